#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "coordsr/adam.hpp"
#include "coordsr/errors.hpp"
#include "coordsr/ft1.hpp"
#include "coordsr/ops.hpp"
#include "coordsr/tape.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace coordsr;

namespace {

Tensor param(Tensor t) { return t.set_requires_grad(true); }

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("shape and data stay consistent") {
    Tensor t({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(shape_numel(t.shape()) == t.numel());
    CHECK_THROWS_AS(Tensor({1, 2}, std::vector<float>{1.0f}), ConfigError);
    CHECK_THROWS_AS(Tensor({1, 1, 1, 1, 1}), ConfigError);
    CHECK(t.reshaped({4, 6}).numel() == 24);
    CHECK_THROWS_AS(t.reshaped({5, 5}), ConfigError);
  }

  TEST_CASE("recording a non-finite value is an error") {
    Tape tape;
    Var a = tape.constant(Tensor({2}, std::vector<float>{1.0f, 1e30f}));
    CHECK_THROWS_AS(ops::mul(a, a), NumericError);
  }
}

TEST_SUITE("conv2d") {
  TEST_CASE("1x1 kernel of 2 doubles a ones image") {
    Tape tape;
    Var x = tape.constant(Tensor({1, 1, 3, 3}, 1.0f));
    Var k = tape.constant(Tensor({1, 1, 1, 1}, 2.0f));
    Var b = tape.constant(Tensor({1}, 0.0f));
    for (float v : ops::conv2d(x, k, b).value().data()) CHECK(v == 2.0f);
  }

  TEST_CASE("delta image reproduces the kernel") {
    Tape tape;
    Tensor img({1, 1, 5, 5});
    img.at(0, 0, 2, 2) = 1.0f;
    Tensor kern({1, 1, 3, 3});
    for (int i = 0; i < 9; ++i) kern[i] = static_cast<float>(i + 1);
    const Tensor y = ops::conv2d(tape.constant(img), tape.constant(kern), tape.constant(Tensor({1}))).value();
    // cross-correlation: out(2+dy, 2+dx) = K(1-dy, 1-dx)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) CHECK(y.at(0, 0, 2 + dy, 2 + dx) == kern.at(0, 0, 1 - dy, 1 - dx));
    CHECK(y.at(0, 0, 0, 0) == 0.0f);
  }

  TEST_CASE("matches the naive loop oracle") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 1 + trial % 2, cin = 1 + trial % 3, cout = 1 + (trial / 3) % 3;
      const int k = trial % 4 == 0 ? 5 : (trial % 4 == 1 ? 1 : 3);
      const Tensor x = oracle::random_tensor({n, cin, 5 + trial % 3, 6}, rng);
      const Tensor w = oracle::random_tensor({cout, cin, k, k}, rng);
      const Tensor b = oracle::random_tensor({cout}, rng);
      Tape tape;
      const Tensor y = ops::conv2d(tape.constant(x), tape.constant(w), tape.constant(b)).value();
      const auto ref = oracle::conv2d(x, w, b);
      REQUIRE(y.numel() == ref.size());
      for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(y[i] - ref[i]) < 1e-5);
    }
  }

  TEST_CASE("shape mismatches are configuration errors") {
    Tape tape;
    Var x = tape.constant(Tensor({1, 2, 5, 5}));
    CHECK_THROWS_AS(ops::conv2d(x, tape.constant(Tensor({1, 3, 3, 3})), tape.constant(Tensor({1}))), ConfigError);
    CHECK_THROWS_AS(ops::conv2d(x, tape.constant(Tensor({1, 2, 2, 2})), tape.constant(Tensor({1}))), ConfigError);
    CHECK_THROWS_AS(ops::conv2d(x, tape.constant(Tensor({1, 2, 3, 3})), tape.constant(Tensor({2}))), ConfigError);
  }

  TEST_CASE("gradient matches finite differences") {
    std::mt19937_64 rng(3);
    const Tensor x = oracle::random_tensor({2, 2, 6, 5}, rng);
    const Tensor w = oracle::random_tensor({3, 2, 3, 3}, rng);
    const Tensor b = oracle::random_tensor({3}, rng);
    const Tensor target = oracle::random_tensor({2, 3, 6, 5}, rng);
    const auto r = oracle::gradcheck({x, w, b}, [&](Tape&, const std::vector<Var>& v) {
      return ops::mean_squared_error(ops::conv2d(v[0], v[1], v[2]), target);
    }, 100, 5);
    CHECK_MESSAGE(r.passed == r.sampled, "worst rel err " << r.worst);
  }
}

TEST_SUITE("linear") {
  TEST_CASE("identity weight passes the input through") {
    Tape tape;
    Tensor eye({3, 3});
    for (int i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0f;
    const Tensor in({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
    CHECK(ops::linear(tape.constant(in), tape.constant(eye), tape.constant(Tensor({3}))).value().vec() == in.vec());
  }

  TEST_CASE("hand-evaluated affine map") {
    Tape tape;
    const Tensor y = ops::linear(tape.constant(Tensor({1, 2}, std::vector<float>{1, 2})),
                                 tape.constant(Tensor({2, 2}, std::vector<float>{1, 1, 0, 1})),
                                 tape.constant(Tensor({2}, std::vector<float>{1, 0})))
                         .value();
    CHECK(y.vec() == std::vector<float>{4, 2});
  }

  TEST_CASE("matches the naive matmul oracle") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
      const int rows = 1 + trial * 3, in = 1 + trial % 7, out = 1 + (trial * 5) % 9;
      const Tensor x = oracle::random_tensor({rows, in}, rng);
      const Tensor w = oracle::random_tensor({out, in}, rng);
      const Tensor b = oracle::random_tensor({out}, rng);
      Tape tape;
      const Tensor y = ops::linear(tape.constant(x), tape.constant(w), tape.constant(b)).value();
      const auto ref = oracle::linear(x, w, b);
      for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(y[i] - ref[i]) < 1e-5);
    }
  }

  TEST_CASE("inner dimension mismatch") {
    Tape tape;
    CHECK_THROWS_AS(ops::linear(tape.constant(Tensor({2, 3})), tape.constant(Tensor({4, 2})),
                                tape.constant(Tensor({4}))),
                    ConfigError);
  }

  TEST_CASE("gradient matches finite differences") {
    std::mt19937_64 rng(4);
    const Tensor x = oracle::random_tensor({7, 5}, rng);
    const Tensor w = oracle::random_tensor({4, 5}, rng);
    const Tensor b = oracle::random_tensor({4}, rng);
    const Tensor target = oracle::random_tensor({7, 4}, rng);
    const auto r = oracle::gradcheck({x, w, b}, [&](Tape&, const std::vector<Var>& v) {
      return ops::mean_squared_error(ops::linear(v[0], v[1], v[2]), target);
    }, 100, 6);
    CHECK(r.passed == r.sampled);
  }
}

TEST_SUITE("relu") {
  TEST_CASE("forward") {
    Tape tape;
    const Tensor y = ops::relu(tape.constant(Tensor({3}, std::vector<float>{-1, 0, 2}))).value();
    CHECK(y.vec() == std::vector<float>{0, 0, 2});
  }

  TEST_CASE("all-negative input has zero output and zero gradient") {
    Tape tape;
    Var x = tape.leaf(param(Tensor({4}, std::vector<float>{-1, -2, -0.5f, -3})));
    Var y = ops::relu(x);
    for (float v : y.value().data()) CHECK(v == 0.0f);
    tape.backward(ops::sum(y));
    for (float g : tape.grad(x).data()) CHECK(g == 0.0f);
  }

  TEST_CASE("gradient at exactly zero is zero") {
    Tape tape;
    Var x = tape.leaf(param(Tensor({2}, std::vector<float>{0.0f, 1.0f})));
    tape.backward(ops::sum(ops::relu(x)));
    CHECK(tape.grad(x)[0] == 0.0f);
    CHECK(tape.grad(x)[1] == 1.0f);
  }

  TEST_CASE("gradient matches finite differences away from zero") {
    std::mt19937_64 rng(7);
    Tensor x = oracle::random_tensor({64}, rng);
    for (float& v : x.data()) v += v < 0 ? -0.05f : 0.05f;
    const Tensor w = oracle::random_tensor({64}, rng);
    const auto r = oracle::gradcheck({x}, [&](Tape& tape, const std::vector<Var>& v) {
      return ops::sum(ops::mul(ops::relu(v[0]), tape.constant(w)));
    }, 64, 8, 1e-3, 1e-3);
    CHECK(r.passed == r.sampled);
  }
}

TEST_SUITE("elementwise and reductions") {
  TEST_CASE("gradients match finite differences") {
    std::mt19937_64 rng(9);
    const Tensor a = oracle::random_tensor({3, 4}, rng);
    const Tensor b = oracle::random_tensor({3, 4}, rng);
    const Tensor t = oracle::random_tensor({3, 4}, rng);
    const auto r = oracle::gradcheck({a, b}, [&](Tape&, const std::vector<Var>& v) {
      Var x = ops::add_scaled(ops::mul(v[0], v[1]), ops::scale(v[0], 0.7f), 2.0f);
      return ops::add(ops::mean_squared_error(x, t), ops::scale(ops::sum(ops::add(v[0], v[1])), 0.1f));
    }, 24, 10);
    CHECK(r.passed == r.sampled);
  }

  TEST_CASE("mean absolute error gradient") {
    std::mt19937_64 rng(10);
    const Tensor a = oracle::random_tensor({50}, rng);
    const Tensor t = oracle::random_tensor({50}, rng);
    const auto r = oracle::gradcheck({a}, [&](Tape&, const std::vector<Var>& v) {
      return ops::mean_abs_error(v[0], t);
    }, 50, 11);
    CHECK(r.pass_rate() >= 0.99);
  }

  TEST_CASE("pixel shuffle matches the index formula") {
    std::mt19937_64 rng(13);
    for (int r : {2, 3, 4}) {
      const Tensor x = oracle::random_tensor({2, 2 * r * r, 3, 4}, rng);
      Tape tape;
      const Tensor y = ops::pixel_shuffle(tape.constant(x), r).value();
      REQUIRE(y.shape() == Shape{2, 2, 3 * r, 4 * r});
      for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 2; ++c)
          for (int h = 0; h < 3; ++h)
            for (int w = 0; w < 4; ++w)
              for (int i = 0; i < r; ++i)
                for (int j = 0; j < r; ++j)
                  CHECK(y.at(n, c, h * r + i, w * r + j) == x.at(n, c * r * r + i * r + j, h, w));
    }
  }

  TEST_CASE("pixel shuffle of a constant is constant") {
    Tape tape;
    for (float v : ops::pixel_shuffle(tape.constant(Tensor({1, 4, 5, 5}, 0.25f)), 2).value().data()) {
      CHECK(v == 0.25f);
    }
  }

  TEST_CASE("pixel shuffle and row reshapes propagate gradients") {
    std::mt19937_64 rng(14);
    const Tensor x = oracle::random_tensor({1, 8, 3, 2}, rng);
    const Tensor t = oracle::random_tensor({24, 2}, rng);
    const auto r = oracle::gradcheck({x}, [&](Tape&, const std::vector<Var>& v) {
      Var rows = ops::to_rows(ops::pixel_shuffle(v[0], 2));
      return ops::mean_squared_error(ops::to_rows(ops::from_rows(rows, 1, 6, 4)), t);
    }, 48, 15);
    CHECK(r.passed == r.sampled);
  }
}

TEST_SUITE("backward") {
  TEST_CASE("sum(w*x) gives grad(w) = x") {
    Tape tape;
    const Tensor xv({3}, std::vector<float>{1, -2, 3});
    Var w = tape.leaf(param(Tensor({3}, std::vector<float>{0.5f, 0.5f, 0.5f})));
    tape.backward(ops::sum(ops::mul(w, tape.constant(xv))));
    CHECK(tape.grad(w).vec() == xv.vec());
  }

  TEST_CASE("||w||^2 gives grad 2w") {
    Tape tape;
    const Tensor wv({3}, std::vector<float>{1, -2, 0.25f});
    Var w = tape.leaf(param(wv));
    tape.backward(ops::sum(ops::mul(w, w)));
    for (int i = 0; i < 3; ++i) CHECK(tape.grad(w)[i] == 2 * wv[i]);
  }

  TEST_CASE("non-scalar loss, empty tape and second backward are usage errors") {
    {
      Tape tape;
      Var w = tape.leaf(param(Tensor({3}, 1.0f)));
      CHECK_THROWS_AS(tape.backward(ops::scale(w, 2.0f)), UsageError);
    }
    {
      Tape tape;
      Var w = tape.leaf(param(Tensor({3}, 1.0f)));
      Var l = ops::sum(w);
      tape.backward(l);
      CHECK(tape.consumed());
      CHECK_THROWS_AS(tape.backward(l), UsageError);
    }
    {
      Tape tape;
      CHECK_THROWS_AS(tape.backward(Var{}), UsageError);
    }
  }

  TEST_CASE("every requires_grad leaf gets a gradient of its own shape") {
    Tape tape;
    Var a = tape.leaf(param(Tensor({2, 3}, 1.0f)));
    Var unused = tape.leaf(param(Tensor({4, 1, 2}, 1.0f)));
    tape.backward(ops::sum(a));
    CHECK(tape.grad(a).shape() == Shape{2, 3});
    CHECK(tape.grad(unused).shape() == Shape{4, 1, 2});
    for (float g : tape.grad(unused).data()) CHECK(g == 0.0f);
  }

  TEST_CASE("entries are in topological order") {
    Tape tape;
    Var a = tape.leaf(param(Tensor({2}, 1.0f)));
    Var b = ops::mul(a, a);
    ops::sum(ops::add(b, a));
    for (const auto& e : tape.entries())
      for (std::size_t in : e.inputs) CHECK(in < e.output);
  }

  TEST_CASE("forward is bitwise reproducible") {
    std::mt19937_64 rng(21);
    const Tensor x = oracle::random_tensor({2, 3, 9, 7}, rng);
    const Tensor w = oracle::random_tensor({4, 3, 3, 3}, rng);
    const Tensor b = oracle::random_tensor({4}, rng);
    Tape t1, t2;
    const Tensor y1 = ops::conv2d(t1.constant(x), t1.constant(w), t1.constant(b)).value();
    const Tensor y2 = ops::conv2d(t2.constant(x), t2.constant(w), t2.constant(b)).value();
    CHECK(y1 == y2);
  }
}

TEST_SUITE("adam") {
  TEST_CASE("zero gradient leaves parameters unchanged") {
    Tensor p({5}, 0.3f);
    const Tensor g({5}, 0.0f);
    AdamState s = AdamState::for_params({&p});
    adam_step({&p}, {&g}, s, AdamOptions{});
    for (float v : p.data()) CHECK(v == 0.3f);
    CHECK(s.step == 1);
  }

  TEST_CASE("first step moves by about lr against the gradient sign") {
    Tensor p({1}, 1.0f);
    const Tensor g({1}, 1.0f);
    AdamState s = AdamState::for_params({&p});
    AdamOptions o;
    o.lr = 0.1f;
    adam_step({&p}, {&g}, s, o);
    CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-5));
  }

  TEST_CASE("100 steps on (w-3)^2 follow the scalar recurrence") {
    // scalar reference recurrence in double precision
    double w = 0.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 100; ++t) {
      const double g = 2.0 * (w - 3.0);
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double mh = m / (1.0 - std::pow(0.9, t));
      const double vh = v / (1.0 - std::pow(0.999, t));
      w -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    }
    Tensor p({1}, 0.0f);
    AdamState s = AdamState::for_params({&p});
    AdamOptions o;
    o.lr = 0.1f;
    for (int t = 0; t < 100; ++t) {
      const Tensor g({1}, 2.0f * (p[0] - 3.0f));
      adam_step({&p}, {&g}, s, o);
    }
    CHECK(std::abs(p[0] - w) < 1e-3);
    CHECK(std::abs(p[0] - 3.0f) < 0.5f);
  }

  TEST_CASE("non-finite gradient aborts without touching state") {
    Tensor p({2}, 1.0f);
    const Tensor g({2}, std::vector<float>{0.5f, std::nanf("")});
    AdamState s = AdamState::for_params({&p});
    CHECK_THROWS_AS(adam_step({&p}, {&g}, s, AdamOptions{}, {"w"}), NumericError);
    CHECK(p[0] == 1.0f);
    CHECK(s.step == 0);
    CHECK(s.m[0][0] == 0.0f);
  }
}

TEST_SUITE("ft1") {
  TEST_CASE("round trip and byte layout") {
    const Tensor t({2, 3}, std::vector<float>{1, 2, 3, 4, 5, -6.5f});
    const auto bytes = encode_ft1(t);
    REQUIRE(bytes.size() == 4 + 1 + 2 * 4 + 6 * 4);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "FT01");
    CHECK(bytes[4] == 2);
    CHECK(bytes[5] == 2);
    CHECK(bytes[9] == 3);
    // 1.0f little-endian
    CHECK(bytes[13] == 0x00);
    CHECK(bytes[16] == 0x3f);
    CHECK(decode_ft1(bytes) == t);
  }

  TEST_CASE("malformed payloads are rejected") {
    auto bytes = encode_ft1(Tensor({4}, 1.0f));
    bytes.pop_back();
    CHECK_THROWS_AS(decode_ft1(bytes), ConfigError);
    bytes[0] = 'X';
    CHECK_THROWS_AS(decode_ft1(bytes), ConfigError);
  }
}
