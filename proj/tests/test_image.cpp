#include "doctest.h"
#include "lfdeocc/image.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

using namespace lfdeocc;

TEST_CASE("image construction validates size and finiteness") {
  Image a(2, 3, 1, 0.25f);
  CHECK(a.size() == 6);
  CHECK(a.at(0, 1, 2) == 0.25f);
  CHECK_THROWS_AS(Image(2, 2, 1, std::vector<float>(3)), std::invalid_argument);
  CHECK_THROWS_AS(Image(1, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(Image(1, 2, 1, std::vector<float>{0.0f, std::numeric_limits<float>::quiet_NaN()}),
                  std::invalid_argument);
}

TEST_CASE("planar layout") {
  Image img(2, 2, 2, std::vector<float>{0, 1, 2, 3, 4, 5, 6, 7});
  CHECK(img.at(1, 0, 1) == 5.0f);
  CHECK(img.plane(1)[3] == 7.0f);
}

TEST_CASE("crop copies the requested window and rejects overflow") {
  Image img(3, 3, 1, std::vector<float>{0, 1, 2, 3, 4, 5, 6, 7, 8});
  const Image c = crop(img, 1, 1, 2, 2);
  CHECK(c == Image(2, 2, 1, std::vector<float>{4, 5, 7, 8}));
  CHECK_THROWS_AS(crop(img, 2, 2, 2, 2), std::invalid_argument);
}

TEST_CASE("to_rgb replicates gray and drops alpha") {
  const Image gray(1, 2, 1, std::vector<float>{0.1f, 0.2f});
  const Image rgb = to_rgb(gray);
  CHECK(rgb.channels() == 3);
  CHECK(rgb.at(2, 0, 1) == 0.2f);
  Image rgba(1, 1, 4, std::vector<float>{0.1f, 0.2f, 0.3f, 0.4f});
  CHECK(to_rgb(rgba) == Image(1, 1, 3, std::vector<float>{0.1f, 0.2f, 0.3f}));
  CHECK(extract_channel(rgba, 3) == Image(1, 1, 1, 0.4f));
}
