#pragma once

#include <filesystem>
#include <vector>

#include "lfdeocc/mask_embed.hpp"

namespace lfdeocc::io {

/// Loads every mask PNG of a directory, sorted by file name. A mask is an
/// RGBA (or gray+alpha) PNG, or an RGB/gray PNG with a paired
/// "<name>_alpha.png". The id is the file stem.
std::vector<MaskAsset> load_mask_library(const std::filesystem::path& dir);

/// Writes rgb+alpha as one RGBA PNG.
void write_mask(const std::filesystem::path& path, const MaskAsset& mask);

}  // namespace lfdeocc::io
