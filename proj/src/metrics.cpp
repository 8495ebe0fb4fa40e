#include "lfdeocc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <set>
#include <stdexcept>

namespace lfdeocc {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(fmt::format("{}: shape mismatch {}x{}x{} vs {}x{}x{}", what, a.height(), a.width(),
                                            a.channels(), b.height(), b.width(), b.channels()));
  }
  if (a.empty()) throw std::invalid_argument(fmt::format("{}: empty image", what));
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const double center = (size - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - center;
    k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += k[static_cast<std::size_t>(i)];
  }
  for (double& v : k) v /= total;
  return k;
}

// Separable "valid" filtering of a single plane.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t h, std::size_t w,
                                 const std::vector<double>& k) {
  const std::size_t n = k.size();
  const std::size_t oh = h - n + 1;
  const std::size_t ow = w - n + 1;
  std::vector<double> tmp(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += k[i] * src[y * w + x + i];
      tmp[y * ow + x] = acc;
    }
  }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += k[i] * tmp[(y + i) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double mean_l1(const Image& a, const Image& b) {
  require_same_shape(a, b, "mean_l1");
  double total = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) total += std::abs(double(da[i]) - db[i]);
  return total / static_cast<double>(da.size());
}

double mse(const Image& a, const Image& b) {
  require_same_shape(a, b, "mse");
  double total = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = double(da[i]) - db[i];
    total += d * d;
  }
  return total / static_cast<double>(da.size());
}

double psnr(const Image& a, const Image& b, double peak) {
  const double m = mse(a, b);
  if (m == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / m));
}

double ssim(const Image& a, const Image& b, const SsimParams& params) {
  require_same_shape(a, b, "ssim");
  const auto n = static_cast<std::size_t>(params.window);
  if (a.height() < n || a.width() < n) {
    throw std::invalid_argument(
        fmt::format("ssim: image {}x{} smaller than {}x{} window", a.height(), a.width(), n, n));
  }
  const std::vector<double> k = gaussian_kernel(params.window, params.sigma);
  const double c1 = std::pow(params.k1 * params.peak, 2);
  const double c2 = std::pow(params.k2 * params.peak, 2);
  const std::size_t h = a.height();
  const std::size_t w = a.width();

  double total = 0.0;
  for (std::size_t c = 0; c < a.channels(); ++c) {
    std::vector<double> x(a.plane(c).begin(), a.plane(c).end());
    std::vector<double> y(b.plane(c).begin(), b.plane(c).end());
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, k);
    const auto my = filter_valid(y, h, w, k);
    const auto sxx = filter_valid(xx, h, w, k);
    const auto syy = filter_valid(yy, h, w, k);
    const auto sxy = filter_valid(xy, h, w, k);
    double plane_total = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      plane_total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
                     ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += plane_total / static_cast<double>(mx.size());
  }
  return total / static_cast<double>(a.channels());
}

EvalRow evaluate_scene(const std::string& scene, const Image& pred, const Image& gt) {
  return {scene, mean_l1(pred, gt), psnr(pred, gt), ssim(pred, gt)};
}

EvalReport assemble_report(std::vector<EvalRow> rows, std::string method) {
  if (rows.empty()) throw std::invalid_argument("assemble_report: no rows");
  EvalRow avg{"Average", 0.0, 0.0, 0.0};
  for (const EvalRow& r : rows) {
    avg.l1 += r.l1;
    avg.psnr += r.psnr;
    avg.ssim += r.ssim;
  }
  const auto n = static_cast<double>(rows.size());
  avg.l1 /= n;
  avg.psnr /= n;
  avg.ssim /= n;
  return {std::move(method), std::move(rows), avg};
}

void to_json(nlohmann::json& j, const EvalRow& row) {
  j = {{"scene", row.scene}, {"l1", row.l1}, {"psnr", row.psnr}, {"ssim", row.ssim}};
}

void from_json(const nlohmann::json& j, EvalRow& row) {
  j.at("scene").get_to(row.scene);
  j.at("l1").get_to(row.l1);
  j.at("psnr").get_to(row.psnr);
  j.at("ssim").get_to(row.ssim);
}

void to_json(nlohmann::json& j, const EvalReport& report) {
  j = {{"method", report.method}, {"rows", report.rows}, {"average", report.average}};
}

void from_json(const nlohmann::json& j, EvalReport& report) {
  report.method = j.value("method", "");
  j.at("rows").get_to(report.rows);
  j.at("average").get_to(report.average);
}

std::string to_csv(const EvalReport& report) {
  std::string out = "scene,l1,psnr,ssim\n";
  auto line = [&](const EvalRow& r) { out += fmt::format("{},{:.6f},{:.4f},{:.6f}\n", r.scene, r.l1, r.psnr, r.ssim); };
  for (const EvalRow& r : report.rows) line(r);
  line(report.average);
  return out;
}

std::string comparison_csv(const std::vector<EvalReport>& reports) {
  std::vector<std::string> scenes;
  std::set<std::string> seen;
  for (const EvalReport& rep : reports) {
    for (const EvalRow& r : rep.rows) {
      if (seen.insert(r.scene).second) scenes.push_back(r.scene);
    }
  }
  std::string out;
  const std::pair<const char*, double EvalRow::*> metrics[] = {
      {"l1", &EvalRow::l1}, {"psnr", &EvalRow::psnr}, {"ssim", &EvalRow::ssim}};
  for (const auto& [name, field] : metrics) {
    out += fmt::format("metric,method");
    for (const std::string& s : scenes) out += "," + s;
    out += ",Average\n";
    for (const EvalReport& rep : reports) {
      out += fmt::format("{},{}", name, rep.method);
      for (const std::string& s : scenes) {
        auto it = std::find_if(rep.rows.begin(), rep.rows.end(), [&](const EvalRow& r) { return r.scene == s; });
        out += it == rep.rows.end() ? std::string(",") : fmt::format(",{:.4f}", (*it).*field);
      }
      out += fmt::format(",{:.4f}\n", rep.average.*field);
    }
  }
  return out;
}

}  // namespace lfdeocc
