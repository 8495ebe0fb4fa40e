#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lfdeocc/light_field.hpp"
#include "lfdeocc/mask_embed.hpp"
#include "lfdeocc/training.hpp"

namespace lfdeocc::io {

inline constexpr const char* kDefaultViewPattern = "view_{row:02}_{col:02}.png";

/// A light field on disk: manifest.json with angular_rows, angular_cols and
/// an optional view_pattern (fmt syntax with named args row and col), one PNG
/// per view, and optionally gt.png.
struct LightFieldDir {
  LightField lf;
  std::optional<Image> gt;
  nlohmann::json manifest;

  /// The manifest's rectified_disparity, if present.
  std::optional<double> rectified_disparity() const;
};

std::string view_filename(const std::string& pattern, AngularCoord coord);

/// Views and gt are converted to RGB.
LightFieldDir read_light_field_dir(const std::filesystem::path& dir);

/// Writes manifest (angular sizes and view_pattern are filled in), views and
/// gt when given. Creates the directory.
void write_light_field_dir(const std::filesystem::path& dir, const LightField& lf, const std::optional<Image>& gt = {},
                           nlohmann::json manifest = nlohmann::json::object());

/// Per-sample metadata written next to a synthesized light field.
nlohmann::json layers_json(const SynthesisResult& result);

/// Writes a synthesized sample: occluded views, gt.png and layers.json.
/// Extra keys of the source manifest (such as rectified_disparity) are kept.
void write_sample_dir(const std::filesystem::path& dir, const SynthesisResult& result,
                      const nlohmann::json& source_manifest = nlohmann::json::object());

/// Loads every subdirectory holding a manifest.json and gt.png, sorted by name.
std::vector<TrainingSample> load_dataset(const std::filesystem::path& dir);

/// Sorted subdirectories of dir that contain a manifest.json.
std::vector<std::filesystem::path> list_light_field_dirs(const std::filesystem::path& dir);

nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace lfdeocc::io
