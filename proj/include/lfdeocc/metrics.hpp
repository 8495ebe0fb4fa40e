#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "lfdeocc/image.hpp"

namespace lfdeocc {

/// PSNR reported for identical images.
inline constexpr double kPsnrCap = 99.0;

double mean_l1(const Image& a, const Image& b);
double mse(const Image& a, const Image& b);
/// 10 log10(peak^2 / MSE), capped at kPsnrCap.
double psnr(const Image& a, const Image& b, double peak = 1.0);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double peak = 1.0;
};

/// Mean SSIM over all fully-contained Gaussian windows, averaged over
/// channels. Throws std::invalid_argument when the image is smaller than the
/// window.
double ssim(const Image& a, const Image& b, const SsimParams& params = {});

struct EvalRow {
  std::string scene;
  double l1 = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  friend bool operator==(const EvalRow&, const EvalRow&) = default;
};

struct EvalReport {
  std::string method;
  std::vector<EvalRow> rows;
  EvalRow average;
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

EvalRow evaluate_scene(const std::string& scene, const Image& pred, const Image& gt);
/// Appends the arithmetic-mean "Average" row. Throws on empty input.
EvalReport assemble_report(std::vector<EvalRow> rows, std::string method = "");

void to_json(nlohmann::json& j, const EvalRow& row);
void from_json(const nlohmann::json& j, EvalRow& row);
void to_json(nlohmann::json& j, const EvalReport& report);
void from_json(const nlohmann::json& j, EvalReport& report);

/// scene,l1,psnr,ssim with the Average row last.
std::string to_csv(const EvalReport& report);

/// Methods-by-scenes table per metric, one CSV block per metric.
std::string comparison_csv(const std::vector<EvalReport>& reports);

}  // namespace lfdeocc
