#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lfdeocc/nn/autograd.hpp"

namespace lfdeocc::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t checked = 0;
  /// "input <i> element <j>" of the worst entry.
  std::string worst;
  bool passed() const { return max_rel_error < tolerance; }
};

using GradCheckFn = std::function<Var<double>(const std::vector<Var<double>>& inputs)>;

/// Compares reverse-mode gradients with central differences at float64.
/// The op's output is reduced to a scalar by a fixed random projection
/// (weights of magnitude 0.5 to 1.5 with random sign) so every output element
/// contributes. Relative error per entry is |a - n| / max(|a|, |n|, 1e-6).
GradCheckReport grad_check(const GradCheckFn& op, const std::vector<Tensor64>& inputs, double tolerance,
                           double step = 1e-5, std::uint64_t seed = 0);

}  // namespace lfdeocc::nn
