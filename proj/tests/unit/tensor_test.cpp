#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "msnt/ops.hpp"
#include "msnt/tensor.hpp"

namespace msnt {
namespace {

using testing::gradient_check;
using testing::random_tensor;

TEST(Matmul, IdentityAndHandCase) {
  const Tensor eye({2, 2}, {1, 0, 0, 1});
  const Tensor m({2, 2}, {1, 2, 3, 4});
  const Tensor r = matmul(eye, m);
  EXPECT_EQ(std::vector<double>(r.data().begin(), r.data().end()), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(matmul(Tensor({1, 2}, {1, 2}), Tensor({2, 1}, {3, 4})).item(), 11.0);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
  }
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  Rng rng(7);
  const Tensor a = random_tensor({3, 3}, rng);
  const Tensor b = random_tensor({3, 3}, rng);
  const auto r = gradient_check([&] { return sum(matmul(a, b)); }, {a}, 1e-5);
  EXPECT_LT(r.max_relative_error, 1e-6) << r.worst;
}

TEST(Softmax, HandCases) {
  const Tensor u = softmax(Tensor({3}, {0, 0, 0}), 0);
  for (double v : u.data()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
  const Tensor big = softmax(Tensor({2}, {1000, 0}), 0);
  EXPECT_EQ(big[0], 1.0);
  EXPECT_EQ(big[1], 0.0);
  const Tensor s = softmax(Tensor({3}, {1, 2, 3}), 0);
  EXPECT_NEAR(s[0], 0.09003, 5e-6);
  EXPECT_NEAR(s[1], 0.24473, 5e-6);
  EXPECT_NEAR(s[2], 0.66524, 5e-6);
}

TEST(Softmax, RowsSumToOne) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = random_tensor({4, 7}, rng, 5.0, false);
    const Tensor s = softmax(x, 1);
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 7; ++c) {
        EXPECT_GE(s.at(r, c), 0.0);
        total += s.at(r, c);
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Layernorm, HandCases) {
  const Tensor g = Tensor::full({3}, 1.0), b = Tensor::zeros({3});
  const Tensor c = layernorm(Tensor({1, 3}, {5, 5, 5}), g, b);
  for (double v : c.data()) EXPECT_EQ(v, 0.0);
  const Tensor y = layernorm(Tensor({1, 3}, {1, 2, 3}), g, b, 1e-5);
  EXPECT_NEAR(y[0], -1.2247, 1e-4);
  EXPECT_NEAR(y[1], 0.0, 1e-12);
  EXPECT_NEAR(y[2], 1.2247, 1e-4);
}

TEST(Layernorm, RowsAreStandardized) {
  Rng rng(4);
  const Tensor g = Tensor::full({16}, 1.0), b = Tensor::zeros({16});
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor y = layernorm(random_tensor({5, 16}, rng, 3.0, false), g, b);
    for (std::size_t r = 0; r < 5; ++r) {
      double mean = 0.0, var = 0.0;
      for (std::size_t c = 0; c < 16; ++c) mean += y.at(r, c) / 16;
      for (std::size_t c = 0; c < 16; ++c) var += (y.at(r, c) - mean) * (y.at(r, c) - mean) / 16;
      EXPECT_LT(std::abs(mean), 1e-10);
      EXPECT_LT(std::abs(var - 1.0), 1e-6);
    }
  }
}

TEST(Layernorm, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  const Tensor x = random_tensor({2, 6}, rng);
  const Tensor g = random_tensor({6}, rng);
  const Tensor b = random_tensor({6}, rng);
  const Tensor w = random_tensor({2, 6}, rng, 1.0, false);
  const auto r =
      gradient_check([&] { return sum(mul(layernorm(x, g, b, 1e-5), w)); }, {x, g, b}, 1e-5);
  EXPECT_LT(r.max_relative_error, 1e-5) << r.worst;
}

TEST(Elementwise, GeluCrossEntropy) {
  EXPECT_EQ(gelu(Tensor({1}, {0.0}))[0], 0.0);
  EXPECT_NEAR(cross_entropy(Tensor({3}, {0, 0, 0}), 1).item(), std::log(3.0), 1e-12);
  // Tanh form, not erf: gelu(1) = 0.8411919906...
  EXPECT_NEAR(gelu(Tensor({1}, {1.0}))[0], 0.8411919906082768, 1e-12);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = random_tensor({3}, rng, 2.0);
    const std::size_t target = rng.uniform_index(3);
    Tape tape;
    tape.backward(cross_entropy(x, target));
    const Tensor p = softmax(Tensor({3}, {x[0], x[1], x[2]}), 0);
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_NEAR(x.grad()[c], p[c] - (c == target ? 1.0 : 0.0), 1e-14);
    }
  }
}

TEST(Errors, OutOfRangeIndices) {
  const Tensor table = Tensor::zeros({4, 2});
  const std::vector<std::size_t> ids = {4};
  EXPECT_THROW(embedding_lookup(table, ids), IndexError);
  EXPECT_THROW(cross_entropy(Tensor::zeros({3}), 3), IndexError);
}

TEST(Dropout, IdentityAtInferenceAndInvertedScaling) {
  Rng rng(8);
  const Tensor x = Tensor::full({1, 1000}, 2.0);
  const Tensor same = dropout(x, 0.5, false, rng);
  EXPECT_EQ(std::vector<double>(same.data().begin(), same.data().end()),
            std::vector<double>(x.data().begin(), x.data().end()));
  const Tensor y = dropout(x, 0.25, true, rng);
  for (double v : y.data()) EXPECT_TRUE(v == 0.0 || std::abs(v - 2.0 / 0.75) < 1e-15);
}

TEST(Dropout, BitReproducibleWithFixedSeed) {
  const Tensor x = Tensor::full({3, 50}, 1.5);
  Rng a(99), b(99);
  const Tensor ya = dropout(x, 0.3, true, a), yb = dropout(x, 0.3, true, b);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(ya[i], yb[i]);
}

TEST(Backward, HandCases) {
  Tensor x = Tensor({2, 2}, {1, 2, 3, 4}, true);
  {
    Tape tape;
    tape.backward(sum(x));
  }
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
  Tensor y = Tensor({3}, {1, 2, 3}, true);
  {
    Tape tape;
    tape.backward(sum(mul(y, y)));
  }
  EXPECT_EQ(y.grad()[0], 2.0);
  EXPECT_EQ(y.grad()[1], 4.0);
  EXPECT_EQ(y.grad()[2], 6.0);
}

TEST(Backward, RepeatedCallsAccumulate) {
  Tensor x = Tensor({2}, {1, 2}, true);
  Tape tape;
  const Tensor loss = sum(scale(x, 3.0));
  tape.backward(loss);
  tape.backward(loss);
  EXPECT_EQ(x.grad()[0], 6.0);
  EXPECT_EQ(x.grad()[1], 6.0);
}

TEST(Backward, NonScalarIsContractError) {
  Tensor x = Tensor({2}, {1, 2}, true);
  Tape tape;
  EXPECT_THROW(tape.backward(scale(x, 2.0)), ContractError);
}

TEST(Backward, SharedInputSumsBothConsumers) {
  Rng rng(10);
  const Tensor x = random_tensor({3, 3}, rng);
  // x feeds matmul twice and tanh once.
  const auto r = gradient_check([&] { return sum(add(matmul(x, x), tanh(x))); }, {x}, 1e-5);
  EXPECT_LT(r.max_relative_error, 1e-6) << r.worst;
}

TEST(Backward, NoTapeRecordsNothing) {
  Tensor x = Tensor({2}, {1, 2}, true);
  const Tensor y = mul(x, x);
  EXPECT_EQ(y.node_index(), -1);
}

TEST(GradientCheck, EveryOpTenRandomInputs) {
  Rng rng(2024);
  for (const auto& op : testing::all_op_checks()) {
    for (int trial = 0; trial < 10; ++trial) {
      // Entrywise needs the small step; at 1e-3 the O(step^2) truncation
      // error alone can exceed 1e-4 on near-zero entries.
      const auto coarse = op.run(rng, 1e-3);
      EXPECT_LT(coarse.norm_relative_error, 1e-4) << op.name;
      const auto fine = op.run(rng, 1e-5);
      EXPECT_LT(fine.max_relative_error, 1e-4) << op.name << ": " << fine.worst;
      EXPECT_GT(fine.entries, 0u);
    }
  }
}

TEST(GradientCheck, FullClassifyPath) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto coarse = testing::model_gradient_check(seed, 1e-3);
    EXPECT_LT(coarse.norm_relative_error, 1e-4);
    const auto fine = testing::model_gradient_check(seed, 1e-5);
    EXPECT_LT(fine.max_relative_error, 1e-4) << fine.worst;
    EXPECT_GT(fine.entries, 500u);
  }
}

}  // namespace
}  // namespace msnt
