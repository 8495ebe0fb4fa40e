#include "doctest.h"
#include "fixtures.hpp"
#include "lfdeocc/metrics.hpp"
#include "reference_metrics.hpp"

#include <cmath>

using namespace lfdeocc;

namespace {

Image offset(const Image& img, float delta) {
  Image out = img;
  for (float& v : out.data()) v += delta;
  return out;
}

}  // namespace

TEST_CASE("psnr closed forms") {
  const Image a(16, 16, 3, 0.5f);
  CHECK(psnr(a, offset(a, 0.1f)) == doctest::Approx(20.0).epsilon(1e-5));
  CHECK(psnr(a, offset(a, -0.01f)) == doctest::Approx(40.0).epsilon(1e-4));
  CHECK(psnr(a, a) == kPsnrCap);
  CHECK(psnr(a, offset(a, 0.1f), 2.0) == doctest::Approx(20.0 + 20.0 * std::log10(2.0)).epsilon(1e-5));
  // Half the pixels off by 0.2: MSE = 0.02.
  Image b = a;
  for (std::size_t i = 0; i < b.size(); i += 2) b.data()[i] += 0.2f;
  CHECK(mse(a, b) == doctest::Approx(0.02).epsilon(1e-6));
  CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(50.0)).epsilon(1e-5));
}

TEST_CASE("mean l1 closed form") {
  const Image a = fixtures::noise_image(9, 7, 3, 1);
  const Image b = fixtures::noise_image(9, 7, 3, 2);
  double expected = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) expected += std::abs(double(a.data()[i]) - double(b.data()[i]));
  expected /= double(a.size());
  CHECK(std::abs(mean_l1(a, b) - expected) < 1e-9);
  CHECK(mean_l1(a, a) == 0.0);
  CHECK(mean_l1(Image(4, 4, 1, 0.25f), Image(4, 4, 1, 0.75f)) == 0.5);
}

TEST_CASE("ssim agrees with a direct windowed evaluation") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Image gt = fixtures::render(fixtures::Texture::random(seed), 24 + seed, 30, 0.0, 0.0);
    Image pred = gt;
    const Image noise = fixtures::noise_image(gt.height(), gt.width(), 3, seed + 10);
    for (std::size_t i = 0; i < pred.size(); ++i) pred.data()[i] += 0.2f * (noise.data()[i] - 0.5f);
    const double s = ssim(pred, gt);
    CHECK(std::abs(s - fixtures::reference_ssim(pred, gt)) < 1e-6);
    CHECK(s < 1.0);
    CHECK(s > 0.0);
  }
}

TEST_CASE("ssim special cases") {
  const Image a = fixtures::noise_image(16, 16, 3, 3);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  // Two flat images: only the luminance term remains.
  const double x = 0.2, y = 0.6, c1 = 1e-4;
  CHECK(ssim(Image(12, 12, 1, 0.2f), Image(12, 12, 1, 0.6f)) ==
        doctest::Approx((2 * x * y + c1) / (x * x + y * y + c1)).epsilon(1e-6));
  CHECK(ssim(a, fixtures::noise_image(16, 16, 3, 4)) < 0.2);
  CHECK_THROWS_AS(ssim(Image(10, 40, 1), Image(10, 40, 1)), std::invalid_argument);
  SsimParams small;
  small.window = 7;
  CHECK(std::abs(ssim(a, offset(a, 0.05f), small) - fixtures::reference_ssim(a, offset(a, 0.05f), 7)) < 1e-6);
}

TEST_CASE("metric input checks") {
  CHECK_THROWS_AS(mse(Image(4, 4, 3), Image(4, 5, 3)), std::invalid_argument);
  CHECK_THROWS_AS(mean_l1(Image(4, 4, 3), Image(4, 4, 1)), std::invalid_argument);
  CHECK_THROWS_AS(psnr(Image(), Image()), std::invalid_argument);
}

TEST_CASE("reports") {
  const Image gt(16, 16, 3, 0.5f);
  const EvalRow r1 = evaluate_scene("a", offset(gt, 0.1f), gt);
  CHECK(r1.psnr == doctest::Approx(20.0).epsilon(1e-5));
  CHECK(r1.l1 == doctest::Approx(0.1).epsilon(1e-6));
  const EvalRow r2 = evaluate_scene("b", gt, gt);
  const EvalReport rep = assemble_report({r1, r2}, "net");
  CHECK(rep.average.scene == "Average");
  CHECK(rep.average.psnr == doctest::Approx((r1.psnr + kPsnrCap) / 2));
  CHECK(rep.average.ssim == doctest::Approx((r1.ssim + 1.0) / 2));
  CHECK_THROWS_AS(assemble_report({}), std::invalid_argument);

  const nlohmann::json j = rep;
  CHECK(j.get<EvalReport>() == rep);

  const std::string csv = to_csv(rep);
  CHECK(csv.starts_with("scene,l1,psnr,ssim\na,"));
  CHECK(csv.find("\nAverage,") != std::string::npos);

  EvalReport other = assemble_report({EvalRow{"b", 0.2, 15.0, 0.5}}, "base");
  const std::string cmp = comparison_csv({rep, other});
  CHECK(cmp.starts_with("metric,method,a,b,Average\nl1,net,"));
  CHECK(cmp.find("psnr,base,,15.0000,15.0000\n") != std::string::npos);
}
