#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "gesturegen/error.hpp"
#include "gesturegen/numeric/gradcheck.hpp"
#include "gesturegen/numeric/ops.hpp"
#include "gesturegen/numeric/optim.hpp"
#include "test_support.hpp"

using namespace gesturegen;
using namespace gesturegen::numeric;
using gesturegen::testing::random_array;

namespace {

DenseArray triple_loop(const DenseArray& a, const DenseArray& b) {
  DenseArray out = DenseArray::matrix(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<long double>(a(i, k)) * b(k, j);
      out(i, j) = static_cast<double>(s);
    }
  return out;
}

// Softmax written out per element, then the weighted sum of V rows.
DenseArray brute_attention(const DenseArray& q, const DenseArray& k, const DenseArray& v) {
  DenseArray out = DenseArray::matrix(q.rows(), v.cols());
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  for (std::size_t i = 0; i < q.rows(); ++i) {
    std::vector<double> w(k.rows());
    double total = 0.0;
    for (std::size_t j = 0; j < k.rows(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < q.cols(); ++c) s += q(i, c) * k(j, c);
      w[j] = std::exp(s * scale);
      total += w[j];
    }
    for (std::size_t j = 0; j < k.rows(); ++j)
      for (std::size_t c = 0; c < v.cols(); ++c) out(i, c) += w[j] / total * v(j, c);
  }
  return out;
}

}  // namespace

TEST(Matmul, IdentityTimesIdentity) {
  EXPECT_EQ(matmul(DenseArray::identity(2), DenseArray::identity(2)), DenseArray::identity(2));
}

TEST(Matmul, ZeroMatrix) {
  Rng rng(1);
  const DenseArray a = random_array({3, 4}, rng);
  EXPECT_EQ(matmul(a, DenseArray::matrix(4, 5)), DenseArray::matrix(3, 5));
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const DenseArray a = random_array({3, 4}, rng);
    const DenseArray b = random_array({4, 2}, rng);
    EXPECT_LT(max_abs_diff(matmul(a, b), triple_loop(a, b)), 1e-12);
    EXPECT_LT(max_abs_diff(matmul_tn(transpose(a), b), triple_loop(a, b)), 1e-12);
    EXPECT_LT(max_abs_diff(matmul_nt(a, transpose(b)), triple_loop(a, b)), 1e-12);
  }
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    (void)matmul(DenseArray::matrix(2, 3), DenseArray::matrix(4, 5));
    FAIL() << "expected a dimension error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("4x5"), std::string::npos) << msg;
  }
}

TEST(Matmul, BackwardGradients) {
  Rng rng(3);
  const DenseArray a = random_array({3, 4}, rng);
  const DenseArray b = random_array({4, 2}, rng);
  const DenseArray w = random_array({3, 2}, rng);
  DifferentiableOp wrt_a{[&](const DenseArray& x) { return weighted_sum(matmul(x, b), w); },
                         [&](const DenseArray& x) { return matmul_backward(x, b, w).da; }};
  DifferentiableOp wrt_b{[&](const DenseArray& x) { return weighted_sum(matmul(a, x), w); },
                         [&](const DenseArray& x) { return matmul_backward(a, x, w).db; }};
  EXPECT_LT(finite_diff_check(wrt_a, a, 1e-5), 1e-8);
  EXPECT_LT(finite_diff_check(wrt_b, b, 1e-5), 1e-8);
}

TEST(LayerNorm, ConstantRowMapsToZero) {
  const DenseArray x = DenseArray::from_rows({{3, 3, 3, 3}});
  const DenseArray y = layer_norm(x, DenseArray::vector(4, 1.0), DenseArray::vector(4, 0.0));
  EXPECT_EQ(y.max_abs(), 0.0);
}

TEST(LayerNorm, ZeroGammaGivesBeta) {
  Rng rng(4);
  const DenseArray x = random_array({3, 5}, rng);
  const DenseArray beta = random_array({5}, rng);
  const DenseArray y = layer_norm(x, DenseArray::vector(5, 0.0), beta);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(y(r, c), beta[c]);
}

TEST(LayerNorm, RowMomentsAfterNormalization) {
  Rng rng(5);
  // Spread rows so that var/(var + eps) is within 1e-6 of one.
  const DenseArray x = random_array({4, 8}, rng, 10.0);
  const DenseArray y = layer_norm(x, DenseArray::vector(8, 1.0), DenseArray::vector(8, 0.0));
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0.0;
    for (double v : y.row(r)) mean += v;
    mean /= 8.0;
    double var = 0.0;
    for (double v : y.row(r)) var += (v - mean) * (v - mean);
    var /= 8.0;
    EXPECT_LT(std::abs(mean), 1e-10);
    // The eps in the denominator shrinks the variance by var/(var + eps).
    double raw_var = 0.0, raw_mean = 0.0;
    for (double v : x.row(r)) raw_mean += v;
    raw_mean /= 8.0;
    for (double v : x.row(r)) raw_var += (v - raw_mean) * (v - raw_mean);
    raw_var /= 8.0;
    EXPECT_NEAR(var, raw_var / (raw_var + kLayerNormEps), 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
}

TEST(LayerNorm, EmptyFeatureDimension) {
  try {
    (void)layer_norm(DenseArray::matrix(3, 0), DenseArray::vector(0), DenseArray::vector(0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
  }
}

TEST(LayerNorm, GradientCheckAtTenRandomPoints) {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const DenseArray x = random_array({3, 5}, rng);
    const DenseArray gamma = random_array({5}, rng);
    const DenseArray beta = random_array({5}, rng);
    const DenseArray w = random_array({3, 5}, rng);
    DifferentiableOp op{
        [&](const DenseArray& p) { return weighted_sum(layer_norm(p, gamma, beta), w); },
        [&](const DenseArray& p) {
          LayerNormCache cache;
          (void)layer_norm(p, gamma, beta, kLayerNormEps, &cache);
          return layer_norm_backward(cache, gamma, w).dx;
        }};
    EXPECT_LT(finite_diff_check(op, x, 1e-5), 1e-4);
    DifferentiableOp dgamma{
        [&](const DenseArray& g) { return weighted_sum(layer_norm(x, g, beta), w); },
        [&](const DenseArray& g) {
          LayerNormCache cache;
          (void)layer_norm(x, g, beta, kLayerNormEps, &cache);
          return layer_norm_backward(cache, g, w).dgamma;
        }};
    EXPECT_LT(finite_diff_check(dgamma, gamma, 1e-5), 1e-4);
    DifferentiableOp dbeta{
        [&](const DenseArray& b) { return weighted_sum(layer_norm(x, gamma, b), w); },
        [&](const DenseArray& b) {
          LayerNormCache cache;
          (void)layer_norm(x, gamma, b, kLayerNormEps, &cache);
          return layer_norm_backward(cache, gamma, w).dbeta;
        }};
    EXPECT_LT(finite_diff_check(dbeta, beta, 1e-5), 1e-4);
  }
}

TEST(Softmax, RowsSumToOne) {
  Rng rng(7);
  const DenseArray p = softmax_rows(random_array({6, 9}, rng, 10.0));
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double s = 0.0;
    for (double v : p.row(r)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Attention, SingleKeyReturnsValueRow) {
  Rng rng(8);
  const DenseArray q = random_array({4, 3}, rng);
  const DenseArray k = random_array({1, 3}, rng);
  const DenseArray v = random_array({1, 5}, rng);
  const DenseArray out = scaled_dot_attention(q, k, v);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(out(r, c), v(0, c));
}

TEST(Attention, IdenticalKeysAverageValues) {
  Rng rng(9);
  const DenseArray q = random_array({3, 4}, rng);
  const DenseArray krow = random_array({1, 4}, rng);
  const DenseArray k = broadcast_rows(krow, 5);
  const DenseArray v = random_array({5, 2}, rng);
  const DenseArray out = scaled_dot_attention(q, k, v);
  const DenseArray mean = column_sums(v) * (1.0 / 5.0);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(out(r, c), mean[c], 1e-14);
}

TEST(Attention, MatchesBruteForce) {
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const DenseArray q = random_array({2, 3}, rng);
    const DenseArray k = random_array({4, 3}, rng);
    const DenseArray v = random_array({4, 2}, rng);
    EXPECT_LT(max_abs_diff(scaled_dot_attention(q, k, v), brute_attention(q, k, v)), 1e-10);
  }
}

TEST(Attention, OutputInsideValueHull) {
  Rng rng(11);
  const DenseArray q = random_array({7, 4}, rng, 3.0);
  const DenseArray k = random_array({9, 4}, rng, 3.0);
  const DenseArray v = random_array({9, 3}, rng);
  const DenseArray out = scaled_dot_attention(q, k, v);
  for (std::size_t c = 0; c < 3; ++c) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t j = 0; j < 9; ++j) {
      lo = std::min(lo, v(j, c));
      hi = std::max(hi, v(j, c));
    }
    for (std::size_t r = 0; r < 7; ++r) {
      EXPECT_GE(out(r, c), lo - 1e-12);
      EXPECT_LE(out(r, c), hi + 1e-12);
    }
  }
}

TEST(Attention, EmptyKeys) {
  try {
    (void)scaled_dot_attention(DenseArray::matrix(2, 3), DenseArray::matrix(0, 3), DenseArray::matrix(0, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
  }
}

TEST(Attention, GradientCheckAtTenRandomPoints) {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const DenseArray q = random_array({3, 4}, rng);
    const DenseArray k = random_array({5, 4}, rng);
    const DenseArray v = random_array({5, 2}, rng);
    const DenseArray w = random_array({3, 2}, rng);
    auto grads = [&](const DenseArray& qq, const DenseArray& kk, const DenseArray& vv) {
      AttentionCache cache;
      (void)scaled_dot_attention(qq, kk, vv, &cache);
      return attention_backward(cache, w);
    };
    DifferentiableOp dq{[&](const DenseArray& x) { return weighted_sum(scaled_dot_attention(x, k, v), w); },
                        [&](const DenseArray& x) { return grads(x, k, v).dq; }};
    DifferentiableOp dk{[&](const DenseArray& x) { return weighted_sum(scaled_dot_attention(q, x, v), w); },
                        [&](const DenseArray& x) { return grads(q, x, v).dk; }};
    DifferentiableOp dv{[&](const DenseArray& x) { return weighted_sum(scaled_dot_attention(q, k, x), w); },
                        [&](const DenseArray& x) { return grads(q, k, x).dv; }};
    EXPECT_LT(finite_diff_check(dq, q, 1e-5), 1e-4);
    EXPECT_LT(finite_diff_check(dk, k, 1e-5), 1e-4);
    EXPECT_LT(finite_diff_check(dv, v, 1e-5), 1e-4);
  }
}

TEST(FiniteDiff, LinearOpIsExact) {
  Rng rng(13);
  const DenseArray c = random_array({6}, rng);
  DifferentiableOp op{[&](const DenseArray& x) { return weighted_sum(x, c); },
                      [&](const DenseArray&) { return c; }};
  EXPECT_LT(finite_diff_check(op, random_array({6}, rng), 1e-4), 1e-10);
}

TEST(FiniteDiff, RejectsEpsOutsideRange) {
  DifferentiableOp op{[](const DenseArray&) { return 0.0; }, [](const DenseArray& x) { return x; }};
  EXPECT_THROW((void)finite_diff_check(op, DenseArray::vector(2), 1e-2), Error);
  EXPECT_THROW((void)finite_diff_check(op, DenseArray::vector(2), 1e-8), Error);
}

TEST(FiniteDiff, NonFiniteIsNumericalError) {
  DifferentiableOp op{[](const DenseArray& x) { return std::log(x[0]); },
                      [](const DenseArray& x) { return DenseArray({1}, {1.0 / x[0]}); }};
  try {
    (void)finite_diff_check(op, DenseArray({1}, {-1.0}), 1e-4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumerical);
  }
}

TEST(Silu, GradientCheck) {
  Rng rng(14);
  const DenseArray w = random_array({4, 3}, rng);
  DifferentiableOp op{[&](const DenseArray& x) { return weighted_sum(silu(x), w); },
                      [&](const DenseArray& x) { return silu_backward(x, w); }};
  EXPECT_LT(finite_diff_check(op, random_array({4, 3}, rng, 2.0), 1e-5), 1e-6);
}

TEST(DepthwiseConv, IsCausalAndMatchesDefinition) {
  Rng rng(15);
  const DenseArray x = random_array({6, 3}, rng);
  const DenseArray kernel = random_array({4, 3}, rng);
  const DenseArray bias = random_array({3}, rng);
  const DenseArray y = causal_depthwise_conv(x, kernel, bias);
  for (std::size_t k = 0; k < 6; ++k)
    for (std::size_t c = 0; c < 3; ++c) {
      double expect = bias[c];
      for (std::size_t j = 0; j < 4; ++j) {
        const long src = static_cast<long>(k) - 3 + static_cast<long>(j);
        if (src >= 0) expect += kernel(j, c) * x(static_cast<std::size_t>(src), c);
      }
      EXPECT_NEAR(y(k, c), expect, 1e-14);
    }
}

TEST(DepthwiseConv, GradientCheck) {
  Rng rng(16);
  const DenseArray x = random_array({6, 3}, rng);
  const DenseArray kernel = random_array({3, 3}, rng);
  const DenseArray bias = random_array({3}, rng);
  const DenseArray w = random_array({6, 3}, rng);
  DifferentiableOp dx{[&](const DenseArray& p) { return weighted_sum(causal_depthwise_conv(p, kernel, bias), w); },
                      [&](const DenseArray& p) { return causal_depthwise_conv_backward(p, kernel, w).dx; }};
  DifferentiableOp dk{[&](const DenseArray& p) { return weighted_sum(causal_depthwise_conv(x, p, bias), w); },
                      [&](const DenseArray& p) { return causal_depthwise_conv_backward(x, p, w).dkernel; }};
  DifferentiableOp db{[&](const DenseArray& p) { return weighted_sum(causal_depthwise_conv(x, kernel, p), w); },
                      [&](const DenseArray&) { return causal_depthwise_conv_backward(x, kernel, w).dbias; }};
  EXPECT_LT(finite_diff_check(dx, x, 1e-5), 1e-8);
  EXPECT_LT(finite_diff_check(dk, kernel, 1e-5), 1e-8);
  EXPECT_LT(finite_diff_check(db, bias, 1e-5), 1e-8);
}

TEST(Huber, PiecewiseValues) {
  const DenseArray target = DenseArray::matrix(2, 3);
  EXPECT_DOUBLE_EQ(huber_loss(DenseArray::matrix(2, 3, 0.5), target, 1.0).value, 0.125);
  EXPECT_DOUBLE_EQ(huber_loss(DenseArray::matrix(2, 3, -2.0), target, 1.0).value, 1.5);
  EXPECT_EQ(huber_loss(target, target, 1.0).value, 0.0);
}

TEST(Huber, GradientCheck) {
  Rng rng(17);
  const DenseArray target = random_array({4, 3}, rng);
  DenseArray pred = random_array({4, 3}, rng, 2.0);
  // Keep probes away from the kink at |diff| = delta.
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (std::abs(std::abs(pred[i] - target[i]) - 1.0) < 1e-3) pred[i] += 0.01;
  DifferentiableOp op{[&](const DenseArray& p) { return huber_loss(p, target, 1.0).value; },
                      [&](const DenseArray& p) { return huber_loss(p, target, 1.0).grad; }};
  EXPECT_LT(finite_diff_check(op, pred, 1e-6), 1e-6);
}

TEST(L1, UnitDifferenceIsOne) {
  EXPECT_DOUBLE_EQ(l1_loss(DenseArray::matrix(3, 2, 1.0), DenseArray::matrix(3, 2, 0.0)).value, 1.0);
}

TEST(Linear, ForwardAndGradients) {
  Rng rng(18);
  Linear layer(4, 3, true, 0.5, rng);
  layer.bias.value = random_array({3}, rng);
  const DenseArray x = random_array({5, 4}, rng);
  const DenseArray w = random_array({5, 3}, rng);
  DenseArray expect = triple_loop(x, layer.weight.value);
  add_row_bias(expect, layer.bias.value);
  EXPECT_LT(max_abs_diff(layer.forward(x), expect), 1e-12);
  DifferentiableOp dx{[&](const DenseArray& p) { return weighted_sum(layer.forward(p), w); },
                      [&](const DenseArray& p) {
                        Linear copy = layer;
                        return copy.backward(p, w);
                      }};
  EXPECT_LT(finite_diff_check(dx, x, 1e-5), 1e-8);
  auto loss = [&](bool backward) {
    const double v = weighted_sum(layer.forward(x), w);
    if (backward) layer.accumulate_only(x, w);
    return v;
  };
  EXPECT_LT(finite_diff_check_param(layer.weight, loss, 1e-5), 1e-8);
  EXPECT_LT(finite_diff_check_param(layer.bias, loss, 1e-5), 1e-8);
}

TEST(AdamW, SingleStepMatchesClosedForm) {
  DualValue p(DenseArray({2}, {1.0, -2.0}));
  p.gradient = DenseArray({2}, {0.5, -1.0});
  ParameterSet set;
  set.add("p", p);
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.01;
  AdamW opt(set, cfg);
  opt.step(set);
  // After one step the bias-corrected update is g / (|g| + eps) = sign(g).
  for (int i = 0; i < 2; ++i) {
    const double w0 = i == 0 ? 1.0 : -2.0;
    const double g = i == 0 ? 0.5 : -1.0;
    const double expect = w0 - cfg.lr * (g / (std::abs(g) + cfg.eps) + cfg.weight_decay * w0);
    EXPECT_NEAR(p.value[i], expect, 1e-15);
  }
  EXPECT_EQ(opt.step_count(), 1);
}

TEST(ParameterSet, NamesAndCounts) {
  Rng rng(19);
  Linear a(3, 2, true, 0.1, rng), b(2, 2, false, 0.1, rng);
  ParameterSet inner;
  a.register_params(inner, "a");
  b.register_params(inner, "b");
  ParameterSet outer;
  outer.append(inner, "m.");
  EXPECT_EQ(outer.scalar_count(), 3u * 2 + 2 + 2 * 2);
  EXPECT_NE(outer.find("m.a.weight"), nullptr);
  EXPECT_EQ(outer.find("m.b.bias"), nullptr);
}

TEST(Determinism, RepeatedForwardIsBitIdentical) {
  Rng rng(20);
  const DenseArray q = random_array({8, 4}, rng), k = random_array({8, 4}, rng), v = random_array({8, 4}, rng);
  EXPECT_EQ(scaled_dot_attention(q, k, v), scaled_dot_attention(q, k, v));
  const DenseArray gamma = DenseArray::vector(4, 1.0), beta = DenseArray::vector(4);
  EXPECT_EQ(layer_norm(q, gamma, beta), layer_norm(q, gamma, beta));
}
