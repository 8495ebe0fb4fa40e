#include "lfdeocc/io/mask_library.hpp"

#include <algorithm>

#include "lfdeocc/io/png.hpp"

namespace lfdeocc::io {

namespace fs = std::filesystem;

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<MaskAsset> load_mask_library(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir, "mask directory not found");
  std::vector<fs::path> files;
  for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && e.path().extension() == ".png" && !ends_with(name, "_alpha.png")) {
      files.push_back(e.path());
    }
  }
  std::ranges::sort(files);

  std::vector<MaskAsset> masks;
  for (const fs::path& path : files) {
    const Image img = read_png(path);
    MaskAsset mask;
    mask.id = path.stem().string();
    if (img.channels() == 2 || img.channels() == 4) {
      mask.rgb = to_rgb(img);
      mask.alpha = extract_channel(img, img.channels() - 1);
    } else {
      const fs::path alpha_path = path.parent_path() / (mask.id + "_alpha.png");
      if (!fs::exists(alpha_path)) throw IoError(path, "mask has no alpha channel and no " + alpha_path.filename().string());
      mask.rgb = to_rgb(img);
      const Image alpha = read_png(alpha_path);
      mask.alpha = extract_channel(alpha, 0);
      if (mask.alpha.height() != img.height() || mask.alpha.width() != img.width()) {
        throw IoError(alpha_path, "alpha size differs from its mask");
      }
    }
    try {
      mask.validate();
    } catch (const std::exception& e) {
      throw IoError(path, e.what());
    }
    masks.push_back(std::move(mask));
  }
  if (masks.empty()) throw IoError(dir, "no mask PNGs found");
  return masks;
}

void write_mask(const fs::path& path, const MaskAsset& mask) {
  mask.validate();
  Image rgba(mask.rgb.height(), mask.rgb.width(), 4);
  for (std::size_t c = 0; c < 3; ++c) std::ranges::copy(mask.rgb.plane(c), rgba.plane(c).begin());
  std::ranges::copy(mask.alpha.plane(0), rgba.plane(3).begin());
  write_png(path, rgba);
}

}  // namespace lfdeocc::io
