#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lfdeocc/deoccnet.hpp"

namespace lfdeocc {

inline constexpr char kWeightsMagic[4] = {'D', 'O', 'C', 'N'};
inline constexpr std::uint32_t kWeightsVersion = 1;

enum class WeightsErrorKind { Io, Format, ConfigMismatch };

class WeightsError : public std::runtime_error {
 public:
  WeightsError(WeightsErrorKind kind, std::string field, const std::string& message)
      : std::runtime_error(message), kind_(kind), field_(std::move(field)) {}
  WeightsErrorKind kind() const { return kind_; }
  /// Offending config key or tensor name; empty when not applicable.
  const std::string& field() const { return field_; }

 private:
  WeightsErrorKind kind_;
  std::string field_;
};

const char* to_string(WeightsErrorKind kind);

/// In-memory image of a weights or checkpoint file.
struct WeightsFile {
  nlohmann::json header;  // {"network": ..., optional "checkpoint": ...}
  std::vector<std::pair<std::string, nn::Tensor>> tensors;

  const nn::Tensor* find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_weights(const WeightsFile& file);
WeightsFile decode_weights(std::span<const std::uint8_t> bytes);
void write_weights_file(const std::filesystem::path& path, const WeightsFile& file);
/// Reads and parses the whole file; nothing is returned on any error.
WeightsFile read_weights_file(const std::filesystem::path& path);

/// Network config plus every state entry in declaration order.
WeightsFile snapshot(DeOccNet& net);
/// Validates config and every tensor name and shape before touching net.
/// Tensors prefixed "optim." (checkpoint optimizer state) are ignored.
void restore(DeOccNet& net, const WeightsFile& file);

void save_weights(DeOccNet& net, const std::filesystem::path& path);
void load_weights(DeOccNet& net, const std::filesystem::path& path);
/// Builds a network from the file's stored config and loads it.
DeOccNet load_network(const std::filesystem::path& path);

}  // namespace lfdeocc
