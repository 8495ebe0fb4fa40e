#include "lfdeocc/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace lfdeocc::nn {

namespace {

double project(const Tensor64& y, const std::vector<double>& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.numel(); ++i) s += weights[i] * y[i];
  return s;
}

}  // namespace

GradCheckReport grad_check(const GradCheckFn& op, const std::vector<Tensor64>& inputs, double tolerance, double step,
                           std::uint64_t seed) {
  GradCheckReport report;
  report.tolerance = tolerance;

  std::vector<Var<double>> vars;
  vars.reserve(inputs.size());
  for (const Tensor64& t : inputs) vars.push_back(Var<double>::parameter(t));
  const Var<double> out = op(vars);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mag(0.5, 1.5);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> weights(out.value().numel());
  for (double& w : weights) w = sign(rng) ? mag(rng) : -mag(rng);
  backward(out, Tensor64(out.shape(), weights));

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor64 analytic = vars[i].has_grad() ? vars[i].grad() : Tensor64(inputs[i].shape());
    for (std::size_t e = 0; e < inputs[i].numel(); ++e) {
      auto eval = [&](double delta) {
        std::vector<Var<double>> probe;
        probe.reserve(inputs.size());
        for (std::size_t j = 0; j < inputs.size(); ++j) {
          Tensor64 t = inputs[j];
          if (j == i) t[e] += delta;
          probe.push_back(Var<double>::constant(std::move(t)));
        }
        return project(op(probe).value(), weights);
      };
      const double numeric = (eval(step) - eval(-step)) / (2.0 * step);
      const double a = analytic[e];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      ++report.checked;
      if (rel >= report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = "input " + std::to_string(i) + " element " + std::to_string(e);
      }
    }
  }
  return report;
}

}  // namespace lfdeocc::nn
