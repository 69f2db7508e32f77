#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "coordsr/errors.hpp"
#include "coordsr/models.hpp"
#include "coordsr/ops.hpp"
#include "coordsr/phantom.hpp"
#include "coordsr/resample.hpp"
#include "coordsr/trainer.hpp"
#include "gradcheck.hpp"
#include "model_oracle.hpp"
#include "oracles.hpp"

using namespace coordsr;

namespace {

ModelConfig tiny(bool liif = false) {
  ModelConfig c = ModelConfig::tiny();
  c.liif_mode = liif;
  return c;
}

ModelConfig tiny_conv(int scale) {
  ModelConfig c = ModelConfig::tiny();
  c.kind = ModelKind::conv;
  c.scale = scale;
  return c;
}

double max_abs_diff(const ImageGrid& a, const ImageGrid& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a.pixels()[i]) - b.pixels()[i]));
  return m;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("parameter counts") {
    CHECK(mlp_param_count(64, 256, 5) == 214273);
    CHECK(encoder_param_count(64, 16) == 1219264);
    for (int d : {4, 8, 64})
      for (int r : {0, 1, 2, 16}) {
        std::size_t expect = 9 * d + d;  // head
        for (int b = 0; b < r; ++b) expect += 2 * (9 * d * d + d);
        expect += 9 * d * d + d;
        CHECK(encoder_param_count(d, r) == expect);
      }
    const Model full(ModelConfig::full(), 0);
    CHECK(full.encoder_param_count() == 1219264);
    CHECK(full.decoder_param_count() == 214273);
    CHECK(full.param_count() == 1433537);

    const Model t(tiny(), 0);
    CHECK(t.encoder_param_count() == encoder_param_count(8, 2));
    CHECK(t.decoder_param_count() == mlp_param_count(8, 16, 3));
    const Model tl(tiny(true), 0);
    CHECK(tl.decoder_param_count() == mlp_param_count(10, 16, 3));
    const Model tc(tiny_conv(3), 0);
    CHECK(tc.decoder_param_count() == conv_decoder_param_count(8, 3));
    CHECK(conv_decoder_param_count(8, 3) == (9 * 8 * 72 + 72) + (9 * 8 + 1));
  }

  TEST_CASE("invalid configs are rejected") {
    ModelConfig c = tiny();
    c.d = 0;
    c.mlp_layers = 1;
    try {
      c.validate();
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("d") != std::string::npos);
      CHECK(msg.find("mlp_layers") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_model_kind("unet"), ConfigError);
    CHECK(parse_model_kind("conv") == ModelKind::conv);
  }

  TEST_CASE("parameter tensors must match the config") {
    Model m(tiny(), 1);
    auto params = m.params();
    CHECK_NOTHROW(Model(tiny(), params));
    params.pop_back();
    CHECK_THROWS_AS(Model(tiny(), params), ConfigError);
    auto renamed = m.params();
    renamed[0].name = "enc.bogus.w";
    CHECK_THROWS_AS(Model(tiny(), renamed), ConfigError);
  }

  TEST_CASE("same seed gives identical weights") {
    const Model a(tiny(), 9), b(tiny(), 9), c(tiny(), 10);
    CHECK(a.params()[0].value.vec() == b.params()[0].value.vec());
    CHECK(a.params()[0].value.vec() != c.params()[0].value.vec());
  }
}

TEST_SUITE("encoder") {
  TEST_CASE("feature grid shape matches the input") {
    const Model m(tiny(), 1);
    for (auto [r, c] : {std::pair{8, 8}, {13, 21}, {32, 9}}) {
      const Tensor f = encode(m, ImageGrid(r, c, 0.3f));
      CHECK(f.shape() == Shape{1, 8, r, c});
    }
  }

  TEST_CASE("inputs below 8x8 are a domain error") {
    const Model m(tiny(), 1);
    CHECK_THROWS_AS(encode(m, ImageGrid(7, 16)), DomainError);
    CHECK_THROWS_AS(m.infer(ImageGrid(16, 7), 32, 14), DomainError);
  }

  TEST_CASE("zero input with zero biases gives zero features and output") {
    const Model m(tiny(), 3);
    const Tensor f = encode(m, ImageGrid(12, 12, 0.0f));
    for (float v : f.data()) CHECK(v == 0.0f);
    const ImageGrid y = decode_image(m, f, 24, 24);
    for (float v : y.pixels()) CHECK(v == 0.0f);
  }

  TEST_CASE("receptive field radius is 2R+2") {
    const Model m(tiny(), 4);
    const int n = 21, c0 = 10, radius = 2 * 2 + 2;
    std::mt19937_64 rng(2);
    const ImageGrid x = oracle::random_image(n, n, rng);
    ImageGrid xp = x;
    xp(c0, c0) += 0.5f;
    const Tensor a = encode(m, x), b = encode(m, xp);
    int reach = 0;
    for (int ch = 0; ch < 8; ++ch)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (a.at(0, ch, i, j) != b.at(0, ch, i, j))
            reach = std::max(reach, std::max(std::abs(i - c0), std::abs(j - c0)));
    CHECK(reach == radius);
  }
}

TEST_SUITE("decoder") {
  TEST_CASE("cell-center query returns the MLP of that cell's code") {
    for (bool liif : {false, true}) {
      const Model m(tiny(liif), 5);
      std::mt19937_64 rng(5);
      const Tensor f = oracle::random_tensor({1, 8, 6, 7}, rng);
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 7; ++j) {
          Tape tape;
          const auto p = m.bind(tape, false);
          Tensor code({1, liif ? 10 : 8});
          for (int ch = 0; ch < 8; ++ch) code[ch] = f.at(0, ch, i, j);
          const double expect = m.mlp(tape, p, tape.constant(code)).value()[0];
          const double got = decode_point(m, f, {(j + 0.5) / 7, (i + 0.5) / 6});
          CHECK(got == doctest::Approx(expect).epsilon(1e-5));
        }
    }
  }

  TEST_CASE("decode_image agrees with decode_point") {
    for (bool liif : {false, true}) {
      const Model m(tiny(liif), 6);
      std::mt19937_64 rng(6);
      const Tensor f = oracle::random_tensor({1, 8, 9, 11}, rng);
      for (auto [r, c] : {std::pair{9, 11}, {17, 23}, {27, 33}, {5, 6}}) {
        const ImageGrid img = decode_image(m, f, r, c);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j)
            CHECK(std::abs(img(i, j) - decode_point(m, f, {(j + 0.5) / c, (i + 0.5) / r})) < 1e-6);
      }
    }
  }

  TEST_CASE("decoding at the grid resolution is exact") {
    const Model m(tiny(), 7);
    std::mt19937_64 rng(7);
    const Tensor f = oracle::random_tensor({1, 8, 10, 8}, rng);
    const ImageGrid img = decode_image(m, f, 10, 8);
    Tape tape;
    const auto p = m.bind(tape, false);
    const Tensor cells = m.mlp(tape, p, ops::to_rows(tape.constant(f))).value();
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 8; ++j) CHECK(img(i, j) == doctest::Approx(cells[i * 8 + j]).epsilon(1e-5));
  }

  TEST_CASE("constant feature grid decodes to a constant image") {
    const Model m(tiny(), 8);
    Tensor f({1, 8, 5, 5});
    for (int ch = 0; ch < 8; ++ch)
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) f.at(0, ch, i, j) = 0.1f * (ch - 3);
    const ImageGrid img = decode_image(m, f, 23, 17);
    const float v0 = img(0, 0);
    for (float v : img.pixels()) CHECK(v == doctest::Approx(v0).epsilon(1e-6));
  }

  TEST_CASE("output is continuous along a transect") {
    for (bool liif : {false, true}) {
      const Model m(tiny(liif), 9);
      std::mt19937_64 rng(9);
      const Tensor f = oracle::random_tensor({1, 8, 8, 8}, rng);
      double worst = 0;
      const int steps = 4000;
      double prev = decode_point(m, f, {0.0, 0.37});
      for (int k = 1; k <= steps; ++k) {
        const double v = decode_point(m, f, {double(k) / steps, 0.37});
        worst = std::max(worst, std::abs(v - prev));
        prev = v;
      }
      double range = 0;
      for (int k = 0; k <= 64; ++k) range = std::max(range, std::abs(decode_point(m, f, {k / 64.0, 0.37})));
      CHECK(worst < 0.02 * std::max(range, 1e-3) + 1e-6);
    }
  }

  TEST_CASE("queries outside the unit square are a domain error") {
    const Model m(tiny(), 1);
    const Tensor f({1, 8, 8, 8});
    CHECK_THROWS_AS(decode_point(m, f, {1.01, 0.5}), DomainError);
    CHECK_THROWS_AS(decode_point(m, f, {0.5, -0.01}), DomainError);
  }

  TEST_CASE("any output size is accepted") {
    const Model m(tiny(), 2);
    const ImageGrid x = make_phantom(PhantomKind::shepp_logan, 32, 0);
    for (auto [r, c] : {std::pair{16, 16}, {23, 19}, {48, 64}, {9, 9}}) {
      const ImageGrid y = m.infer(x, r, c);
      CHECK(y.rows() == r);
      CHECK(y.cols() == c);
      for (float v : y.pixels()) CHECK((v >= 0.0f && v <= 1.0f));
    }
  }
}

TEST_SUITE("conv decoder") {
  TEST_CASE("output is scale times the input") {
    for (int s : {2, 3, 4}) {
      const Model m(tiny_conv(s), 1);
      const Tensor f = encode(m, ImageGrid(10, 12, 0.4f));
      const ImageGrid y = conv_decode(m, f, s);
      CHECK(y.rows() == 10 * s);
      CHECK(y.cols() == 12 * s);
    }
  }

  TEST_CASE("other scales are a usage error") {
    const Model m(tiny_conv(2), 1);
    const Tensor f = encode(m, ImageGrid(10, 10, 0.4f));
    CHECK_THROWS_AS(conv_decode(m, f, 3), UsageError);
    CHECK_THROWS_AS(m.infer(ImageGrid(10, 10, 0.4f), 30, 30), UsageError);
    CHECK_NOTHROW(m.infer(ImageGrid(10, 10, 0.4f), 20, 20));
  }
}

TEST_SUITE("gradients") {
  struct Case {
    Model model;
    ImageGrid lr, hr;
    Tensor target, smooth;
  };

  Case make_case(ModelConfig cfg, std::uint64_t seed) {
    const ImageGrid big = make_phantom(PhantomKind::texture, 32, seed);
    ImageGrid hr(16, 16);
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) hr(i, j) = big(i + 8, j + 8);
    return {Model(cfg, seed), bicubic_resize(hr, 8, 8), hr, hr.to_tensor(), oracle::blur(hr, 1.0).to_tensor()};
  }

  oracle::GradCheck check(const Case& c, int samples, std::uint64_t seed) {
    std::vector<std::string> names;
    std::vector<Tensor> leaves;
    for (const auto& p : c.model.params()) {
      names.push_back(p.name);
      leaves.push_back(p.value);
    }
    const ModelConfig cfg = c.model.config();
    return oracle::gradcheck_reference(
        names, leaves,
        [&](Tape& tape, const std::vector<Var>& v) {
          return loss(c.model.forward(tape, v, tape.constant(c.lr.to_tensor()), 16, 16), c.target, c.smooth, 10.0).total;
        },
        [&](const oracle::Weights& w) {
          return oracle::sr_loss(oracle::forward(cfg, w, c.lr, 16, 16), c.target, c.smooth, 10.0);
        },
        samples, seed, 1e-4);
  }

  TEST_CASE("forward matches the double-precision reference") {
    for (int mode = 0; mode < 3; ++mode) {
      ModelConfig cfg = mode == 2 ? tiny_conv(2) : tiny(mode == 1);
      const Case c = make_case(cfg, 20 + mode);
      const ImageGrid y = c.model.infer(c.lr, 16, 16);
      Tape tape;
      const auto p = c.model.bind(tape, false);
      const Tensor raw = c.model.forward(tape, p, tape.constant(c.lr.to_tensor()), 16, 16).value();
      const auto ref = oracle::forward(cfg, oracle::weights_of(c.model), c.lr, 16, 16);
      double worst = 0;
      for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(ref[i] - raw[i]));
      CHECK(worst < 1e-5);
      for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) CHECK(y(i, j) == std::clamp(raw[i * 16 + j], 0.0f, 1.0f));
    }
  }

  TEST_CASE("tiny coordinate model passes the finite-difference check") {
    for (bool liif : {false, true}) {
      const auto r = check(make_case(tiny(liif), 1), 200, 101);
      CHECK_MESSAGE(r.pass_rate() >= 0.99, "liif=" << liif << " worst " << r.worst);
    }
  }

  TEST_CASE("tiny conv model passes the finite-difference check") {
    const auto r = check(make_case(tiny_conv(2), 2), 200, 102);
    CHECK_MESSAGE(r.pass_rate() >= 0.99, "worst " << r.worst);
  }
}
