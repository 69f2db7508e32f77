#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "coordsr/errors.hpp"
#include "coordsr/resample.hpp"
#include "oracles.hpp"

using namespace coordsr;

namespace {

double weight_sum(const EnsembleWeights& e) { return e.weights[0] + e.weights[1] + e.weights[2] + e.weights[3]; }

double blend(const EnsembleWeights& e, const std::function<double(int, int)>& f) {
  double s = 0.0;
  for (int k = 0; k < 4; ++k) s += e.weights[k] * f(e.rows[k], e.cols[k]);
  return s;
}

ImageGrid ramp(int rows, int cols, double a, double b, double c) {
  ImageGrid img(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int col = 0; col < cols; ++col) img(r, col) = static_cast<float>(a + b * r + c * col);
  return img;
}

}  // namespace

TEST_SUITE("ensemble_weights") {
  TEST_CASE("query at a cell center selects that cell") {
    const int l = 6, w = 9;
    for (int i = 0; i < l; ++i)
      for (int j = 0; j < w; ++j) {
        const auto e = ensemble_weights({(j + 0.5) / w, (i + 0.5) / l}, l, w);
        int hits = 0;
        for (int k = 0; k < 4; ++k) {
          if (e.weights[k] == 1.0) {
            ++hits;
            CHECK(e.rows[k] == i);
            CHECK(e.cols[k] == j);
          } else {
            CHECK(e.weights[k] == 0.0);
          }
        }
        CHECK(hits == 1);
      }
  }

  TEST_CASE("midpoint of four centers weighs each by a quarter") {
    const auto e = ensemble_weights({2.0 / 8, 3.0 / 6}, 6, 8);
    for (double w : e.weights) CHECK(w == doctest::Approx(0.25).epsilon(1e-12));
  }

  TEST_CASE("random queries: partition of unity and exact bilinear ramps") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int l = 7, w = 5;
    auto f = [](int r, int c) { return 0.3 + 0.7 * r - 1.1 * c + 0.25 * r * c; };
    for (int t = 0; t < 2000; ++t) {
      const double x = u(rng), y = u(rng);
      const auto e = ensemble_weights({x, y}, l, w);
      CHECK(std::abs(weight_sum(e) - 1.0) < 1e-6);
      for (double wt : e.weights) CHECK((wt >= 0.0 && wt <= 1.0));
      // bilinear function of the (clamped) continuous cell coordinate
      const double gy = std::clamp(y * l - 0.5, 0.0, l - 1.0);
      const double gx = std::clamp(x * w - 0.5, 0.0, w - 1.0);
      const double expect = 0.3 + 0.7 * gy - 1.1 * gx + 0.25 * gy * gx;
      CHECK(blend(e, f) == doctest::Approx(expect).epsilon(1e-9));
    }
  }

  TEST_CASE("neighbors stay in bounds and border queries clamp") {
    const auto e = ensemble_weights({0.0, 1.0}, 4, 4);
    for (int k = 0; k < 4; ++k) {
      CHECK(e.rows[k] >= 0);
      CHECK(e.rows[k] < 4);
      CHECK(e.cols[k] >= 0);
      CHECK(e.cols[k] < 4);
    }
    CHECK(blend(e, [](int r, int c) { return r * 10 + c; }) == doctest::Approx(30.0));
    const auto one = ensemble_weights({0.3, 0.7}, 1, 1);
    CHECK(weight_sum(one) == doctest::Approx(1.0));
  }

  TEST_CASE("out-of-domain queries throw") {
    CHECK_THROWS_AS(ensemble_weights({-0.01, 0.5}, 4, 4), DomainError);
    CHECK_THROWS_AS(ensemble_weights({0.5, 1.0001}, 4, 4), DomainError);
    CHECK_THROWS_AS(ensemble_weights({std::nan(""), 0.5}, 4, 4), DomainError);
  }

  TEST_CASE("dense transect is continuous across cell boundaries") {
    const int l = 4, w = 4;
    auto f = [](int r, int c) { return std::sin(1.3 * r) + std::cos(2.1 * c); };
    for (double step : {1e-3, 1e-4}) {
      double prev = blend(ensemble_weights({0.0, 0.37}, l, w), f);
      double max_jump = 0.0;
      for (double x = step; x <= 1.0; x += step) {
        const double v = blend(ensemble_weights({x, 0.37}, l, w), f);
        max_jump = std::max(max_jump, std::abs(v - prev));
        prev = v;
      }
      // Lipschitz bound: |df/dx| <= w * max neighbor difference (< 4)
      CHECK(max_jump <= 4.0 * w * step + 1e-12);
    }
  }

  TEST_CASE("geometry table agrees with per-query weights") {
    const auto g = ensemble_geometry(5, 6, 13, 11);
    REQUIRE(g.queries() == 13u * 11u);
    for (int r = 0; r < 13; ++r)
      for (int c = 0; c < 11; ++c) {
        const auto e = ensemble_weights({(c + 0.5) / 11, (r + 0.5) / 13}, 5, 6);
        const std::size_t q = static_cast<std::size_t>(r) * 11 + c;
        for (int k = 0; k < 4; ++k) {
          CHECK(g.cell[q][k] == e.rows[k] * 6 + e.cols[k]);
          CHECK(g.weight[q][k] == doctest::Approx(e.weights[k]).epsilon(1e-6));
          CHECK(g.offset[q][2 * k] == doctest::Approx(e.dx[k]).epsilon(1e-6));
          CHECK(g.offset[q][2 * k + 1] == doctest::Approx(e.dy[k]).epsilon(1e-6));
        }
      }
  }
}

TEST_SUITE("bicubic") {
  TEST_CASE("kernel values") {
    CHECK(cubic_kernel(0.0) == 1.0);
    CHECK(cubic_kernel(1.0) == 0.0);
    CHECK(cubic_kernel(-1.0) == 0.0);
    CHECK(cubic_kernel(2.0) == 0.0);
    CHECK(cubic_kernel(0.5) == doctest::Approx(0.5625).epsilon(1e-15));
    CHECK(cubic_kernel(-0.5) == doctest::Approx(0.5625).epsilon(1e-15));
  }

  TEST_CASE("reflect-101 indices") {
    CHECK(reflect101(-1, 5) == 1);
    CHECK(reflect101(-2, 5) == 2);
    CHECK(reflect101(5, 5) == 3);
    CHECK(reflect101(6, 5) == 2);
    CHECK(reflect101(-7, 5) == 1);
    CHECK(reflect101(3, 1) == 0);
  }

  TEST_CASE("identity resize is exact") {
    std::mt19937_64 rng(2);
    const ImageGrid img = oracle::random_image(17, 23, rng);
    CHECK(bicubic_resize(img, 17, 23) == img);
  }

  TEST_CASE("constant image stays constant at any size") {
    const ImageGrid img(12, 9, 0.4f);
    for (auto [r, c] : {std::pair{5, 7}, {31, 2}, {12, 40}, {1, 1}}) {
      const ImageGrid out = bicubic_resize(img, r, c);
      for (float v : out.pixels()) CHECK(v == doctest::Approx(0.4f).epsilon(1e-6));
    }
  }

  TEST_CASE("8x8 ramp to 5x5 matches the kernel-sum oracle") {
    const ImageGrid img = ramp(8, 8, 0.1, 0.05, 0.08);
    const ImageGrid got = bicubic_resize(img, 5, 5);
    const ImageGrid ref = oracle::bicubic(img, 5, 5);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got.pixels()[i] - ref.pixels()[i]) < 1e-5);
  }

  TEST_CASE("random images at random ratios match the oracle") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> dim(3, 40);
    for (int t = 0; t < 25; ++t) {
      const ImageGrid img = oracle::random_image(dim(rng), dim(rng), rng);
      const int r = dim(rng), c = dim(rng);
      const ImageGrid got = bicubic_resize(img, r, c);
      const ImageGrid ref = oracle::bicubic(img, r, c);
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got.pixels()[i] - ref.pixels()[i]) < 1e-5);
    }
  }

  TEST_CASE("exact on linear ramps away from the borders") {
    const ImageGrid img = ramp(32, 32, 0.2, 0.01, 0.015);
    const ImageGrid up = bicubic_resize(img, 80, 80);
    const double s = 32.0 / 80.0;
    for (int r = 10; r < 70; ++r)
      for (int c = 10; c < 70; ++c) {
        const double y = (r + 0.5) * s - 0.5, x = (c + 0.5) * s - 0.5;
        CHECK(std::abs(up(r, c) - (0.2 + 0.01 * y + 0.015 * x)) < 1e-5);
      }
  }
}

TEST_SUITE("make_lr_pair") {
  TEST_CASE("s = 1 is the identity") {
    std::mt19937_64 rng(4);
    const ImageGrid img = oracle::random_image(20, 20, rng);
    CHECK(make_lr_pair(img, 1.0).lr == img);
  }

  TEST_CASE("dimension arithmetic") {
    const ImageGrid img(48, 48, 0.5f);
    CHECK(make_lr_pair(img, 2.0).lr.rows() == 24);
    CHECK(make_lr_pair(img, 2.0).lr.cols() == 24);
    CHECK(make_lr_pair(img, 1.7).lr.rows() == 28);
    CHECK(make_lr_pair(img, 3.0).lr.rows() == 16);
  }

  TEST_CASE("s = 1.5 on 48x48 matches the oracle at 32x32") {
    std::mt19937_64 rng(5);
    const ImageGrid img = oracle::random_image(48, 48, rng);
    const auto p = make_lr_pair(img, 1.5);
    REQUIRE(p.lr.rows() == 32);
    const ImageGrid ref = oracle::bicubic(img, 32, 32);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(p.lr.pixels()[i] - ref.pixels()[i]) < 1e-5);
    CHECK(p.scale == 1.5);
  }

  TEST_CASE("domain errors") {
    const ImageGrid img(48, 48, 0.5f);
    CHECK_THROWS_AS(make_lr_pair(img, 0.9), DomainError);
    CHECK_THROWS_AS(make_lr_pair(img, 6.5), DomainError);
    CHECK_NOTHROW(make_lr_pair(img, 6.0));
  }
}
