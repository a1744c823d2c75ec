// Copyright 2026 The maskscribe Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "maskscribe/nn/checkpoint.h"
#include "maskscribe/nn/gemm.h"
#include "maskscribe/nn/grad_check.h"
#include "maskscribe/nn/ops.h"
#include "maskscribe/nn/params.h"

using namespace maskscribe;
using namespace maskscribe::nn;
using T = Tensor<double>;

namespace {

T randn(Shape shape, Rng& rng, double sd = 1.0) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = rng.normal(0.0, sd);
  return T::from(std::move(shape), std::move(v));
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("maskscribe_nncore_" + name);
}

}  // namespace

TEST_CASE("matmul examples") {
  T eye = T::from({2, 2}, {1, 0, 0, 1});
  T m = T::from({2, 2}, {1, 2, 3, 4});
  auto out = matmul(eye, m);
  CHECK(std::vector<double>(out.data().begin(), out.data().end()) ==
        std::vector<double>{1, 2, 3, 4});

  CHECK(matmul(T::from({1, 2}, {1, 2}), T::from({2, 1}, {3, 4})).item() == 11.0);

  Rng rng(3);
  auto z = matmul(T::zeros({2, 3}), randn({3, 4}, rng));
  CHECK(z.shape() == Shape{2, 4});
  for (double v : z.data()) CHECK(v == 0.0);

  CHECK_THROWS_AS(matmul(T::zeros({2, 3}), T::zeros({2, 3})), DimensionError);
}

TEST_CASE("gemm rows do not depend on batch composition") {
  Rng rng(11);
  for (std::size_t n : {12u, 30u, 64u, 128u, 200u}) {
    const std::size_t k = 96, m = 37;
    std::vector<float> a(m * k), b(k * n), full(m * n);
    for (auto& x : a) x = static_cast<float>(rng.normal());
    for (auto& x : b) x = static_cast<float>(rng.normal());
    gemm(a.data(), b.data(), full.data(), m, k, n);
    for (std::size_t start : {0u, 3u, 17u, 33u}) {
      for (std::size_t len : {1u, 2u, 4u}) {
        if (start + len > m) continue;
        std::vector<float> part(len * n);
        gemm(a.data() + start * k, b.data(), part.data(), len, k, n);
        for (std::size_t i = 0; i < part.size(); ++i) REQUIRE(part[i] == full[start * n + i]);
      }
    }
  }
}

TEST_CASE("softmax examples and normalization") {
  auto s = softmax(T::from({1, 2}, {0, 0}));
  CHECK(s.data()[0] == doctest::Approx(0.5));
  auto t = softmax(T::from({1, 2}, {std::log(1.0), std::log(3.0)}));
  CHECK(t.data()[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(t.data()[1] == doctest::Approx(0.75).epsilon(1e-12));
  auto big = softmax(Tensor<float>::from({1, 2}, {1000.f, 0.f}));
  CHECK(big.data()[0] == doctest::Approx(1.0));
  CHECK(big.data()[1] == doctest::Approx(0.0));

  CHECK_THROWS_AS(softmax(T::from({1, 2}, {NAN, 0})), NumericError);
  CHECK_THROWS_AS(softmax(T::from({1, 2}, {INFINITY, 0})), NumericError);

  // Property: rows sum to one for arbitrary magnitudes, along either axis.
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const double magnitude = std::pow(10.0, rng.uniform_int(-3, 4));
    const std::size_t r = rng.uniform_int(1, 6), c = rng.uniform_int(1, 9);
    T x = randn({r, c}, rng, magnitude);
    for (int axis : {0, 1}) {
      auto y = softmax(x, axis);
      const std::size_t outer = axis == 0 ? c : r, n = axis == 0 ? r : c;
      for (std::size_t o = 0; o < outer; ++o) {
        double total = 0;
        for (std::size_t i = 0; i < n; ++i) {
          const double v = axis == 0 ? y.at(i, o) : y.at(o, i);
          REQUIRE(v >= 0.0);
          total += v;
        }
        REQUIRE(std::abs(total - 1.0) < 1e-6);
      }
    }
  }
}

TEST_CASE("layer_norm examples") {
  auto ones = T::filled({3}, 1.0), zeros = T::zeros({3});
  auto c = layer_norm(T::from({1, 3}, {4, 4, 4}), ones, zeros);
  for (double v : c.data()) CHECK(v == 0.0);

  auto y = layer_norm(T::from({1, 2}, {1, 3}), T::filled({2}, 1.0), T::zeros({2}));
  CHECK(y.data()[0] == doctest::Approx(-1.0).epsilon(1e-3));
  CHECK(y.data()[1] == doctest::Approx(1.0).epsilon(1e-3));

  auto b = layer_norm(T::from({2, 3}, {1, -2, 5, 0, 7, 1}), T::zeros({3}), T::filled({3}, 2.5));
  for (double v : b.data()) CHECK(v == 2.5);
}

TEST_CASE("cross_entropy examples") {
  auto sharp = cross_entropy(T::from({2, 3}, {800, 0, 0, 0, 0, 800}), {0, 2}, {1.0, 3.0});
  CHECK(sharp.item() == doctest::Approx(0.0));
  auto uniform = cross_entropy(T::zeros({1, 4}), {2}, {1.0});
  CHECK(uniform.item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(uniform.item() == doctest::Approx(1.3863).epsilon(1e-4));
  Rng rng(2);
  auto none = cross_entropy(randn({3, 5}, rng), {1, 2, 3}, {0.0, 0.0, 0.0});
  CHECK(none.item() == 0.0);
  CHECK_THROWS_AS(cross_entropy(T::zeros({1, 4}), {4}, {1.0}), IndexError);
}

TEST_CASE("backward examples") {
  Rng rng(9);
  T x = randn({3, 4}, rng).set_requires_grad(true);
  backward(sum(x));
  for (double g : x.grad()) CHECK(g == 1.0);

  T s = T::scalar(3.0).set_requires_grad(true);
  backward(mul(s, s));
  CHECK(s.grad()[0] == doctest::Approx(6.0));
  // Without zeroing, a second sweep accumulates.
  backward(mul(s, s));
  CHECK(s.grad()[0] == doctest::Approx(12.0));

  CHECK_THROWS_AS(backward(sum(T::zeros({2}))), UsageError);
  T detached = x.detach();
  CHECK_THROWS_AS(backward(sum(detached)), UsageError);
  {
    NoGradGuard guard;
    CHECK_THROWS_AS(backward(sum(x)), UsageError);
  }
}

namespace {

// Random composition of differentiable ops over a 2 x 3 input.
T random_graph(const T& x, Rng& rng, std::vector<T>& constants, std::size_t& next) {
  T h = x;
  const int depth = static_cast<int>(rng.uniform_int(1, 4));
  for (int i = 0; i < depth; ++i) {
    switch (rng.uniform_int(0, 5)) {
      case 0: h = gelu(h); break;
      case 1: h = scale(h, rng.normal()); break;
      case 2: h = matmul(h, constants[next++ % constants.size()]); break;
      case 3: h = layer_norm(h, T::filled({3}, 1.5), T::filled({3}, 0.1)); break;
      case 4: h = softmax(h); break;
      default: h = mul(h, h); break;
    }
  }
  return sum(h);
}

}  // namespace

TEST_CASE("tape linearity: grad(f + g) == grad(f) + grad(g)") {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<T> constants;
    for (int i = 0; i < 4; ++i) constants.push_back(randn({3, 3}, rng, 0.5));
    T x = randn({2, 3}, rng).set_requires_grad(true);
    const std::uint64_t shape_seed = rng.next_u64();

    auto build = [&](int which) {
      Rng graph_rng(shape_seed);
      std::size_t next = 0;
      T f = random_graph(x, graph_rng, constants, next);
      T g = random_graph(x, graph_rng, constants, next);
      if (which == 0) return f;
      if (which == 1) return g;
      return add(f, g);
    };
    x.zero_grad();
    backward(build(0));
    std::vector<double> gf(x.grad().begin(), x.grad().end());
    x.zero_grad();
    backward(build(1));
    std::vector<double> gg(x.grad().begin(), x.grad().end());
    x.zero_grad();
    backward(build(2));
    for (std::size_t i = 0; i < gf.size(); ++i) {
      REQUIRE(x.grad()[i] == doctest::Approx(gf[i] + gg[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("attention: every query sees every key of its segment") {
  Rng rng(4);
  T q = randn({5, 4}, rng), k = randn({3, 4}, rng), v = randn({3, 4}, rng);
  auto out = attention(q, k, v, 2, {{0, 5, 0, 3}});
  // Perturbing any key changes every query row.
  T k2 = T::from({3, 4}, std::vector<double>(k.data().begin(), k.data().end()));
  k2.mutable_data()[4 * 2] += 0.5;
  auto out2 = attention(q, k2, v, 2, {{0, 5, 0, 3}});
  for (std::size_t r = 0; r < 5; ++r) CHECK(out.at(r, 0) != out2.at(r, 0));
  CHECK_THROWS_AS(attention(q, k, v, 3, {{0, 5, 0, 3}}), ConfigError);
}

TEST_CASE("adamw examples") {
  SUBCASE("zero grads and no decay leave parameters unchanged") {
    ParamStore<double> params;
    Rng rng(1);
    T w = params.add("w", {2, 3}, {1, -2, 3, 0.5, 0, 7});
    std::vector<double> before(w.data().begin(), w.data().end());
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    w.mutable_grad();  // zero gradient slot
    for (int i = 0; i < 3; ++i) adamw_step(params, cfg);
    CHECK(std::vector<double>(w.data().begin(), w.data().end()) == before);
  }
  SUBCASE("single scalar step matches hand arithmetic") {
    ParamStore<double> params;
    T p = params.add("p", {1}, {1.0});
    p.mutable_grad()[0] = 0.5;
    AdamWConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.01;
    cfg.clip_norm = 0.0;
    adamw_step(params, cfg);
    // m = 0.05, v = 0.00025, m_hat = 0.5, v_hat = 0.25
    const double expected = 1.0 * (1.0 - 0.1 * 0.01) - 0.1 * (0.5 / (0.5 + 1e-8));
    CHECK(p.item() == doctest::Approx(expected).epsilon(1e-12));
    CHECK(p.item() == doctest::Approx(0.899).epsilon(1e-6));
  }
  SUBCASE("clipping preserves direction: x10 grads give the same update") {
    auto run = [](double factor) {
      ParamStore<double> params;
      T a = params.add("a", {3}, {0.2, -0.4, 1.0});
      const double g[3] = {0.6, -1.2, 2.0};  // norm > 1
      for (int i = 0; i < 3; ++i) a.mutable_grad()[i] = g[i] * factor;
      AdamWConfig cfg;
      cfg.clip_norm = 1.0;
      adamw_step(params, cfg);
      return std::vector<double>(a.data().begin(), a.data().end());
    };
    auto base = run(1.0), scaled = run(10.0);
    for (std::size_t i = 0; i < base.size(); ++i) {
      CHECK(scaled[i] == doctest::Approx(base[i]).epsilon(1e-12));
    }
  }
  SUBCASE("non-positive learning rate rejected") {
    ParamStore<double> params;
    params.add("p", {1}, {1.0});
    AdamWConfig cfg;
    cfg.lr = 0.0;
    CHECK_THROWS_AS(adamw_step(params, cfg), ConfigError);
  }
}

TEST_CASE("checkpoint round trip and load errors") {
  ParamStore<float> params;
  Rng rng(8);
  std::vector<float> a(6), b(4);
  for (auto& v : a) v = static_cast<float>(rng.normal());
  for (auto& v : b) v = static_cast<float>(rng.normal());
  params.add("layer.w", {2, 3}, a);
  params.add("layer.b", {4}, b);
  const auto p1 = temp_path("a.ckpt"), p2 = temp_path("b.ckpt");
  write_checkpoint(to_checkpoint(params, {{"kind", "test"}, {"d", "3"}}), p1);

  ParamStore<float> restored;
  restored.add("layer.w", {2, 3}, std::vector<float>(6, 0.f));
  restored.add("layer.b", {4}, std::vector<float>(4, 0.f));
  const Checkpoint ck = read_checkpoint(p1);
  CHECK(ck.meta_value("kind") == "test");
  load_into(restored, ck);
  write_checkpoint(to_checkpoint(restored, ck.meta), p2);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(p1) == slurp(p2));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(restored.get("layer.w").data()[i] == a[i]);

  SUBCASE("unknown parameter") {
    ParamStore<float> other;
    other.add("layer.w", {2, 3}, std::vector<float>(6));
    try {
      load_into(other, ck);
      FAIL("expected an error");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::kUnknownParameter);
    }
  }
  SUBCASE("shape mismatch") {
    ParamStore<float> other;
    other.add("layer.w", {3, 2}, std::vector<float>(6));
    other.add("layer.b", {4}, std::vector<float>(4));
    try {
      load_into(other, ck);
      FAIL("expected an error");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::kShapeMismatch);
    }
  }
  SUBCASE("truncated payload") {
    const std::string bytes = slurp(p1);
    const auto p3 = temp_path("c.ckpt");
    std::ofstream(p3, std::ios::binary) << bytes.substr(0, bytes.size() - 3);
    try {
      read_checkpoint(p3);
      FAIL("expected an error");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::kTruncatedPayload);
    }
  }
  SUBCASE("corrupt manifest") {
    std::string bytes = slurp(p1);
    bytes.replace(bytes.find("params"), 6, "parxms");
    const auto p3 = temp_path("d.ckpt");
    std::ofstream(p3, std::ios::binary) << bytes;
    try {
      read_checkpoint(p3);
      FAIL("expected an error");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::kCorruptManifest);
    }
  }
}

TEST_CASE("grad_check: linear model agrees, corrupted rule is caught") {
  ParamStore<double> params;
  T w = params.add("w", {1}, {0.7});
  T x = T::scalar(2.5);
  auto report = grad_check([&] { return matmul(reshape(x, {1, 1}), reshape(w, {1, 1})); },
                           params);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-8);

  // Same forward as scale(), but the backward rule doubles the gradient.
  auto broken_scale = [](const T& in, double f) {
    std::vector<double> out(in.data().begin(), in.data().end());
    for (auto& v : out) v *= f;
    return make_result<double>("broken_scale", in.shape(), std::move(out), {in},
                               [f](Node<double>& self) {
                                 auto& g = self.parents[0]->ensure_grad();
                                 for (std::size_t i = 0; i < g.size(); ++i) {
                                   g[i] += 2.0 * f * self.grad[i];
                                 }
                               });
  };
  ParamStore<double> p2;
  T v = p2.add("v", {3}, {0.1, -0.3, 0.9});
  auto bad = grad_check([&] { return sum(mul(broken_scale(v, 1.7), v)); }, p2);
  CHECK_FALSE(bad.passed);
}
