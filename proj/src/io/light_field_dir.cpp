#include "lfdeocc/io/light_field_dir.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

#include "lfdeocc/io/png.hpp"

namespace lfdeocc::io {

namespace fs = std::filesystem;

std::optional<double> LightFieldDir::rectified_disparity() const {
  if (!manifest.contains("rectified_disparity")) return std::nullopt;
  return manifest.at("rectified_disparity").get<double>();
}

std::string view_filename(const std::string& pattern, AngularCoord coord) {
  try {
    return fmt::format(fmt::runtime(pattern), fmt::arg("row", coord.row), fmt::arg("col", coord.col));
  } catch (const fmt::format_error& e) {
    throw std::invalid_argument("bad view_pattern '" + pattern + "': " + e.what());
  }
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path, std::string("malformed JSON: ") + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out << text;
  out.close();
  if (!out) throw IoError(path, "write failed");
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

LightFieldDir read_light_field_dir(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw IoError(manifest_path, "missing light-field manifest");
  LightFieldDir out;
  out.manifest = read_json(manifest_path);
  AngularGrid grid;
  std::string pattern;
  try {
    grid.rows = out.manifest.at("angular_rows").get<std::size_t>();
    grid.cols = out.manifest.at("angular_cols").get<std::size_t>();
    pattern = out.manifest.value("view_pattern", std::string(kDefaultViewPattern));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(manifest_path, std::string("invalid manifest: ") + e.what());
  }
  if (grid.size() == 0) throw IoError(manifest_path, "angular grid is empty");

  std::vector<Image> views;
  views.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const fs::path view_path = dir / view_filename(pattern, grid.coord(i));
    views.push_back(to_rgb(read_png(view_path)));
    if (!views.back().same_shape(views.front())) throw IoError(view_path, "view size differs from the first view");
  }
  out.lf = LightField(grid, std::move(views));
  if (fs::exists(dir / "gt.png")) {
    out.gt = to_rgb(read_png(dir / "gt.png"));
    if (!out.gt->same_shape(out.lf.view(0))) throw IoError(dir / "gt.png", "size differs from the views");
  }
  return out;
}

void write_light_field_dir(const fs::path& dir, const LightField& lf, const std::optional<Image>& gt,
                           nlohmann::json manifest) {
  fs::create_directories(dir);
  manifest["angular_rows"] = lf.grid().rows;
  manifest["angular_cols"] = lf.grid().cols;
  if (!manifest.contains("view_pattern")) manifest["view_pattern"] = kDefaultViewPattern;
  const std::string pattern = manifest.at("view_pattern").get<std::string>();
  for (std::size_t i = 0; i < lf.view_count(); ++i) write_png(dir / view_filename(pattern, lf.grid().coord(i)), lf.view(i));
  if (gt) write_png(dir / "gt.png", *gt);
  write_json(dir / "manifest.json", manifest);
}

nlohmann::json layers_json(const SynthesisResult& result) {
  nlohmann::json layers = nlohmann::json::array();
  for (const OcclusionLayer& l : result.layers) {
    layers.push_back({{"mask", l.mask.id},
                      {"disparity", l.disparity},
                      {"placement_row", l.placement_row},
                      {"placement_col", l.placement_col},
                      {"scale", l.scale}});
  }
  const Image coverage = center_coverage(result.layers, result.gt.height(), result.gt.width());
  return {{"layers", layers},
          {"occlusion_rate", occlusion_rate(coverage)},
          {"lf_permutation", result.lf_permutation},
          {"mask_permutation", result.mask_permutation}};
}

void write_sample_dir(const fs::path& dir, const SynthesisResult& result, const nlohmann::json& source_manifest) {
  nlohmann::json manifest = nlohmann::json::object();
  for (const auto& [key, value] : source_manifest.items()) {
    if (key != "angular_rows" && key != "angular_cols" && key != "view_pattern") manifest[key] = value;
  }
  write_light_field_dir(dir, result.occluded, result.gt, std::move(manifest));
  write_json(dir / "layers.json", layers_json(result));
}

std::vector<fs::path> list_light_field_dirs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir, "not a directory");
  std::vector<fs::path> out;
  for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / "manifest.json")) out.push_back(e.path());
  }
  std::ranges::sort(out);
  return out;
}

std::vector<TrainingSample> load_dataset(const fs::path& dir) {
  std::vector<TrainingSample> out;
  for (const fs::path& sample_dir : list_light_field_dirs(dir)) {
    LightFieldDir d = read_light_field_dir(sample_dir);
    if (!d.gt) throw IoError(sample_dir, "training sample has no gt.png");
    out.push_back({std::move(d.lf), std::move(*d.gt)});
  }
  if (out.empty()) throw IoError(dir, "no training samples found");
  return out;
}

}  // namespace lfdeocc::io
