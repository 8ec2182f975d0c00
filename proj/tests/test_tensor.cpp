#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "tensor.hpp"

using namespace dsan;

namespace {

Tensor random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                     bool requires_grad = true, double away_from_zero = 0.0) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> data(rows * cols);
  for (double& v : data) {
    do {
      v = dist(rng);
    } while (std::fabs(v) < away_from_zero);
  }
  return Tensor(rows, cols, std::move(data), requires_grad);
}

// Weights drawn once so the checked function stays deterministic; a plain
// sum would give every component the same gradient and hide index bugs.
Tensor weights_like(const Tensor& t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.5, 1.5);
  std::vector<double> w(t.size());
  for (double& v : w) v = dist(rng);
  return Tensor(t.rows(), t.cols(), std::move(w));
}

}  // namespace

TEST_CASE("matmul basics") {
  Tensor eye = Tensor::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  Tensor b = Tensor::from_rows({{2, -1, 4}, {0, 3, 5}, {7, 8, -9}});
  Tensor prod = matmul(eye, b);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(prod.at(i, j) == b.at(i, j));
    }
  }

  Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  Tensor v = Tensor::from_rows({{0}, {1}});
  Tensor av = matmul(a, v);
  CHECK(av.at(0, 0) == doctest::Approx(2.0));
  CHECK(av.at(1, 0) == doctest::Approx(4.0));

  std::mt19937_64 rng(7);
  Tensor z = matmul(Tensor::zeros(2, 3), random_tensor(3, 4, rng, false));
  for (double x : z.data()) CHECK(x == 0.0);

  CHECK_THROWS_AS(matmul(Tensor::zeros(2, 3), Tensor::zeros(2, 3)), Error);
  try {
    matmul(Tensor::zeros(2, 3), Tensor::zeros(4, 5));
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("2x3") != std::string::npos);
    CHECK(std::string(e.what()).find("4x5") != std::string::npos);
  }
}

TEST_CASE("matmul associativity") {
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 20; ++iter) {
    Tensor a = random_tensor(4, 4, rng, false);
    Tensor b = random_tensor(4, 4, rng, false);
    Tensor c = random_tensor(4, 4, rng, false);
    Tensor left = matmul(matmul(a, b), c);
    Tensor right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) {
      CHECK(std::fabs(left.data()[i] - right.data()[i]) < 1e-10);
    }
  }
}

TEST_CASE("softmax rows") {
  Tensor uniform = softmax_rows(Tensor::from_rows({{0, 0, 0}}));
  for (double v : uniform.data()) CHECK(v == doctest::Approx(1.0 / 3.0));

  Tensor masked = softmax_rows(
      Tensor::from_rows({{kMaskValue, kMaskValue, kMaskValue}}));
  for (double v : masked.data()) CHECK(v == 0.0);

  Tensor mixed = softmax_rows(Tensor::from_rows({{-3.0, -1.5, kMaskValue}}));
  CHECK(mixed.at(0, 0) == doctest::Approx(0.18243).epsilon(1e-4));
  CHECK(mixed.at(0, 1) == doctest::Approx(0.81757).epsilon(1e-4));
  CHECK(mixed.at(0, 2) == 0.0);

  // entries in [0,1]; live rows sum to 1 within 1e-12
  std::mt19937_64 rng(3);
  for (int iter = 0; iter < 50; ++iter) {
    Tensor x = random_tensor(5, 7, rng, false);
    Tensor y = softmax_rows(scale(x, 10.0));
    for (std::size_t i = 0; i < 5; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < 7; ++j) {
        double v = y.at(i, j);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        sum += v;
      }
      CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("elementwise activations") {
  Tensor s = sigmoid(Tensor::from_rows({{0.0}}));
  CHECK(s.item() == doctest::Approx(0.5));

  Tensor e = elu(Tensor::from_rows({{-1.0}}));
  CHECK(e.item() == doctest::Approx(std::exp(-1.0) - 1.0));

  Tensor r = relu(Tensor::from_rows({{-2.0, 0.0, 3.0}}));
  CHECK(r.at(0, 0) == 0.0);
  CHECK(r.at(0, 1) == 0.0);
  CHECK(r.at(0, 2) == 3.0);

  CHECK_THROWS_AS(add(Tensor::zeros(2, 3), Tensor::zeros(3, 2)), Error);
}

TEST_CASE("layer norm") {
  Tensor gain = Tensor::row({1, 1, 1, 1});
  Tensor bias = Tensor::row({0, 0, 0, 0});
  Tensor constant = layer_norm(Tensor::from_rows({{4.2, 4.2, 4.2, 4.2}}), gain, bias);
  for (double v : constant.data()) CHECK(std::fabs(v) < 1e-9);

  Tensor pm = layer_norm(Tensor::from_rows({{1.0, -1.0}}),
                         Tensor::row({1, 1}), Tensor::row({0, 0}));
  CHECK(pm.at(0, 0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(pm.at(0, 1) == doctest::Approx(-1.0).epsilon(1e-5));

  Tensor collapsed = layer_norm(Tensor::from_rows({{3.0, -7.0, 2.0}}),
                                Tensor::row({0, 0, 0}), Tensor::row({5, 6, 7}));
  CHECK(collapsed.at(0, 0) == 5.0);
  CHECK(collapsed.at(0, 1) == 6.0);
  CHECK(collapsed.at(0, 2) == 7.0);
}

TEST_CASE("grad_check closed forms") {
  Tensor x = Tensor::row({1, 2, 3}, true);
  auto report = grad_check([&x] { return sum_all(mul(x, x)); }, {x});
  CHECK(report.max_rel_err < 1e-7);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
  CHECK(x.grad()[2] == doctest::Approx(6.0));

  // constant function: zero gradient everywhere, zero error
  Tensor c = Tensor::row({0.5, -0.25}, true);
  auto constant = grad_check([] { return Tensor(1, 1, {3.0}); }, {c});
  CHECK(constant.max_rel_err == 0.0);

  CHECK_THROWS_AS(grad_check([&x] { return sum_all(x); }, {x}, 1e-2), Error);

  // non-deterministic f violates the contract
  std::mt19937_64 rng(5);
  Tensor wide = random_tensor(8, 8, rng);
  CHECK_THROWS_AS(
      grad_check([&wide, &rng] { return sum_all(dropout(wide, 0.5, rng)); },
                 {wide}),
      Error);
}

TEST_CASE("backward rules against finite differences") {
  std::mt19937_64 rng(17);
  auto check = [&rng](const char* name, auto op, double away = 0.0,
                      std::size_t rows = 4, std::size_t cols = 6) {
    for (int iter = 0; iter < 3; ++iter) {
      Tensor x = random_tensor(rows, cols, rng, true, away);
      Tensor probe;
      {
        NoTape guard;
        probe = op(x);
      }
      Tensor w = weights_like(probe, rng);
      auto report =
          grad_check([&] { return sum_all(mul(op(x), w)); }, {x});
      INFO(name, " iter ", iter, " err ", report.max_rel_err);
      CHECK(report.max_rel_err < 1e-6);
    }
  };

  check("relu", [](const Tensor& x) { return relu(x); }, 0.01);
  check("abs", [](const Tensor& x) { return abs(x); }, 0.01);
  check("elu", [](const Tensor& x) { return elu(x); });
  check("sigmoid", [](const Tensor& x) { return sigmoid(x); });
  check("tanh", [](const Tensor& x) { return tanh(x); });
  check("scale", [](const Tensor& x) { return scale(x, -2.5); });
  check("transpose", [](const Tensor& x) { return transpose(x); });
  check("softmax_rows", [](const Tensor& x) { return softmax_rows(x); });
  check("sum_over_rows", [](const Tensor& x) { return sum_over_rows(x); });
  check("max_over_rows",
        [](const Tensor& x) { return max_over_rows(x, x.rows()); });
  check("slice_cols", [](const Tensor& x) { return slice_cols(x, 1, 3); });

  // binary ops, including the row-broadcast path
  for (int iter = 0; iter < 3; ++iter) {
    Tensor a = random_tensor(4, 6, rng);
    Tensor b = random_tensor(4, 6, rng);
    Tensor brow = random_tensor(1, 6, rng);
    Tensor w = weights_like(a, rng);
    auto r1 = grad_check(
        [&] { return sum_all(mul(add(a, b), w)); }, {a, b});
    CHECK(r1.max_rel_err < 1e-6);
    auto r2 = grad_check(
        [&] { return sum_all(mul(sub(a, b), w)); }, {a, b});
    CHECK(r2.max_rel_err < 1e-6);
    auto r3 = grad_check(
        [&] { return sum_all(mul(mul(a, b), w)); }, {a, b});
    CHECK(r3.max_rel_err < 1e-6);
    auto r4 = grad_check(
        [&] { return sum_all(mul(add(a, brow), w)); }, {a, brow});
    CHECK(r4.max_rel_err < 1e-6);
    auto r5 = grad_check(
        [&] { return sum_all(mul(mul(a, brow), w)); }, {a, brow});
    CHECK(r5.max_rel_err < 1e-6);
  }

  // matmul, concat, layer_norm, masked softmax
  for (int iter = 0; iter < 3; ++iter) {
    Tensor a = random_tensor(3, 5, rng);
    Tensor b = random_tensor(5, 4, rng);
    Tensor wm = weights_like(Tensor::zeros(3, 4), rng);
    auto rm = grad_check(
        [&] { return sum_all(mul(matmul(a, b), wm)); }, {a, b});
    CHECK(rm.max_rel_err < 1e-6);

    Tensor c = random_tensor(3, 2, rng);
    Tensor wc = weights_like(Tensor::zeros(3, 7), rng);
    auto rc = grad_check(
        [&] {
          std::vector<Tensor> parts{a, c};
          return sum_all(mul(concat_cols(parts), wc));
        },
        {a, c});
    CHECK(rc.max_rel_err < 1e-6);

    Tensor d = random_tensor(2, 5, rng);
    Tensor wr = weights_like(Tensor::zeros(5, 5), rng);
    auto rr = grad_check(
        [&] {
          std::vector<Tensor> parts{a, d};
          return sum_all(mul(concat_rows(parts), wr));
        },
        {a, d});
    CHECK(rr.max_rel_err < 1e-6);

    Tensor x = random_tensor(4, 6, rng);
    Tensor gain = random_tensor(1, 6, rng);
    Tensor bias = random_tensor(1, 6, rng);
    Tensor wl = weights_like(x, rng);
    auto rl = grad_check(
        [&] { return sum_all(mul(layer_norm(x, gain, bias), wl)); },
        {x, gain, bias});
    CHECK(rl.max_rel_err < 1e-6);

    Tensor logits = random_tensor(4, 4, rng);
    Tensor mask = Tensor::zeros(4, 4);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = i + 1; j < 4; ++j) mask.set(i, j, kMaskValue);
    }
    Tensor ws = weights_like(logits, rng);
    auto rs = grad_check(
        [&] { return sum_all(mul(softmax_rows(add(logits, mask)), ws)); },
        {logits});
    CHECK(rs.max_rel_err < 1e-6);
  }

  // nll_loss through a softmax
  for (int iter = 0; iter < 3; ++iter) {
    Tensor logits = random_tensor(4, 3, rng);
    std::vector<int> labels{0, 2, 1, 2};
    auto rn = grad_check(
        [&] { return nll_loss(softmax_rows(logits), labels); }, {logits});
    CHECK(rn.max_rel_err < 1e-6);
  }
}

TEST_CASE("dropout backward uses the recorded mask") {
  std::mt19937_64 rng(101);
  Tensor x = random_tensor(6, 6, rng, true);
  Tape tape;
  Tensor y = dropout(x, 0.5, rng);
  tape.backward(sum_all(y));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (y.data()[i] == 0.0) {
      CHECK(x.grad()[i] == 0.0);
    } else {
      CHECK(x.grad()[i] == doctest::Approx(2.0));
    }
  }
}

TEST_CASE("gradients accumulate across reuse") {
  Tensor x = Tensor::row({2.0}, true);
  Tape tape;
  Tensor y = add(mul(x, x), x);  // x^2 + x, dy/dx = 2x + 1 = 5
  tape.backward(sum_all(y));
  CHECK(x.grad()[0] == doctest::Approx(5.0));
}

TEST_CASE("non-finite forward values raise numeric errors") {
  Tensor big = Tensor::constant(1, 2, 1e308);
  CHECK_THROWS_AS(add(big, big), Error);
  try {
    add(big, big);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumeric);
  }
}

TEST_CASE("nll_loss values") {
  Tensor perfect = Tensor::from_rows({{1.0, 0.0, 0.0}});
  std::vector<int> zero{0};
  CHECK(nll_loss(perfect, zero).item() == doctest::Approx(0.0));

  Tensor uniform = Tensor::constant(1, 3, 1.0 / 3.0);
  CHECK(nll_loss(uniform, zero).item() == doctest::Approx(std::log(3.0)));

  // batch mean
  Tensor two = Tensor::from_rows({{0.5, 0.25, 0.25}, {0.1, 0.8, 0.1}});
  std::vector<int> labels{0, 1};
  double expected = (-std::log(0.5) - std::log(0.8)) / 2.0;
  CHECK(nll_loss(two, labels).item() == doctest::Approx(expected));

  std::size_t clamped = 0;
  Tensor degenerate = Tensor::from_rows({{0.0, 1.0, 0.0}});
  double floored = nll_loss(degenerate, zero, &clamped).item();
  CHECK(clamped == 1);
  CHECK(floored == doctest::Approx(-std::log(1e-12)));
}
