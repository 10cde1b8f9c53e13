#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "msnt/ops.hpp"

namespace msnt::testing {

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

GradCheckResult gradient_check(const std::function<Tensor()>& loss_fn,
                               const std::vector<Tensor>& params, double step, double floor) {
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    for (const Tensor& p : params) const_cast<Tensor&>(p).zero_grad();
    const Tensor loss = loss_fn();
    tape.backward(loss);
    for (const Tensor& p : params) {
      const auto g = p.grad_buffer();
      analytic.emplace_back(g.begin(), g.end());
    }
  }
  GradCheckResult result;
  double diff2 = 0.0, analytic2 = 0.0, numeric2 = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor p = params[k];
    auto data = p.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + step;
      const double up = loss_fn().item();
      data[i] = saved - step;
      const double down = loss_fn().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = relative_error(analytic[k][i], numeric, floor);
      diff2 += (analytic[k][i] - numeric) * (analytic[k][i] - numeric);
      analytic2 += analytic[k][i] * analytic[k][i];
      numeric2 += numeric * numeric;
      ++result.entries;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        char buf[160];
        std::snprintf(buf, sizeof buf, "param %zu[%zu]: analytic %.10g vs numeric %.10g", k, i,
                      analytic[k][i], numeric);
        result.worst = buf;
      }
    }
  }
  const double scale = std::sqrt(std::max(analytic2, numeric2));
  result.norm_relative_error = scale > 0.0 ? std::sqrt(diff2) / scale : std::sqrt(diff2);
  return result;
}

Tensor random_tensor(Shape shape, Rng& rng, double scale, bool requires_grad) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = scale * rng.normal();
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

namespace {

// sum(w * y) with a fixed random readout w, so every output entry matters.
Tensor readout(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  const Tensor w = random_tensor(y.shape(), rng, 1.0, false);
  return sum(mul(y, w));
}

OpCheck unary(std::string name, std::function<Tensor(const Tensor&)> op, Shape shape,
              double scale = 1.0) {
  return {name, [op, shape, scale](Rng& rng, double step) {
            const Tensor x = random_tensor(shape, rng, scale);
            const std::uint64_t s = rng.next_u64();
            return gradient_check([&] { return readout(op(x), s); }, {x}, step);
          }};
}

OpCheck binary(std::string name, std::function<Tensor(const Tensor&, const Tensor&)> op,
               Shape a_shape, Shape b_shape) {
  return {name, [op, a_shape, b_shape](Rng& rng, double step) {
            const Tensor a = random_tensor(a_shape, rng);
            const Tensor b = random_tensor(b_shape, rng);
            const std::uint64_t s = rng.next_u64();
            return gradient_check([&] { return readout(op(a, b), s); }, {a, b}, step);
          }};
}

}  // namespace

std::vector<OpCheck> all_op_checks() {
  std::vector<OpCheck> checks;
  checks.push_back(binary("matmul", [](const Tensor& a, const Tensor& b) { return matmul(a, b); },
                          {3, 4}, {4, 2}));
  checks.push_back(binary("matmul_transposed",
                          [](const Tensor& a, const Tensor& b) { return matmul_transposed(a, b); },
                          {3, 4}, {5, 4}));
  checks.push_back(unary("transpose", [](const Tensor& x) { return transpose(x); }, {3, 5}));
  checks.push_back(binary("add", [](const Tensor& a, const Tensor& b) { return add(a, b); }, {2, 3},
                          {2, 3}));
  checks.push_back(binary("sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); }, {2, 3},
                          {2, 3}));
  checks.push_back(binary("mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); }, {2, 3},
                          {2, 3}));
  checks.push_back(unary("scale", [](const Tensor& x) { return scale(x, -1.7); }, {4}));
  checks.push_back(binary("add_row_vector",
                          [](const Tensor& a, const Tensor& b) { return add_row_vector(a, b); },
                          {3, 4}, {4}));
  checks.push_back(unary("reshape", [](const Tensor& x) { return reshape(x, {3, 2}); }, {2, 3}));
  checks.push_back(unary("sum", [](const Tensor& x) { return sum(x); }, {2, 3}));
  checks.push_back(unary("mean", [](const Tensor& x) { return mean(x); }, {2, 3}));
  checks.push_back(unary("softmax_rows", [](const Tensor& x) { return softmax(x, 1); }, {3, 4}));
  checks.push_back(unary("softmax_cols", [](const Tensor& x) { return softmax(x, 0); }, {3, 4}));
  checks.push_back(
      unary("log_softmax", [](const Tensor& x) { return log_softmax(x, 1); }, {3, 4}));
  checks.push_back({"layernorm", [](Rng& rng, double step) {
                      const Tensor x = random_tensor({3, 5}, rng);
                      const Tensor g = random_tensor({5}, rng);
                      const Tensor b = random_tensor({5}, rng);
                      const std::uint64_t s = rng.next_u64();
                      return gradient_check([&] { return readout(layernorm(x, g, b, 1e-5), s); },
                                            {x, g, b}, step);
                    }});
  checks.push_back(unary("gelu", [](const Tensor& x) { return gelu(x); }, {2, 5}, 2.0));
  checks.push_back(unary("tanh", [](const Tensor& x) { return tanh(x); }, {2, 5}));
  checks.push_back({"cross_entropy", [](Rng& rng, double step) {
                      const Tensor x = random_tensor({3}, rng, 2.0);
                      const std::size_t target = rng.uniform_index(3);
                      return gradient_check([&] { return cross_entropy(x, target); }, {x}, step);
                    }});
  checks.push_back({"cross_entropy_batch", [](Rng& rng, double step) {
                      const Tensor x = random_tensor({4, 3}, rng, 2.0);
                      std::vector<std::size_t> t(4);
                      for (auto& v : t) v = rng.uniform_index(3);
                      return gradient_check([&] { return cross_entropy(x, t); }, {x}, step);
                    }});
  checks.push_back({"embedding_lookup", [](Rng& rng, double step) {
                      const Tensor table = random_tensor({6, 3}, rng);
                      // Repeated ids exercise gradient accumulation into one row.
                      std::vector<std::size_t> ids = {2, 0, 2, 5};
                      const std::uint64_t s = rng.next_u64();
                      return gradient_check([&] { return readout(embedding_lookup(table, ids), s); },
                                            {table}, step);
                    }});
  checks.push_back({"gather_rows", [](Rng& rng, double step) {
                      const Tensor x = random_tensor({5, 3}, rng);
                      std::vector<std::size_t> rows = {4, 1, 1};
                      const std::uint64_t s = rng.next_u64();
                      return gradient_check([&] { return readout(gather_rows(x, rows), s); }, {x},
                                            step);
                    }});
  checks.push_back(unary("slice_rows", [](const Tensor& x) { return slice_rows(x, 1, 2); }, {4, 3}));
  checks.push_back(unary("slice_cols", [](const Tensor& x) { return slice_cols(x, 1, 2); }, {3, 4}));
  checks.push_back(binary(
      "concat_rows",
      [](const Tensor& a, const Tensor& b) {
        const std::vector<Tensor> parts = {a, b};
        return concat_rows(parts);
      },
      {2, 3}, {1, 3}));
  checks.push_back(binary(
      "concat_cols",
      [](const Tensor& a, const Tensor& b) {
        const std::vector<Tensor> parts = {a, b};
        return concat_cols(parts);
      },
      {3, 2}, {3, 1}));
  checks.push_back({"dropout", [](Rng& rng, double step) {
                      const Tensor x = random_tensor({3, 4}, rng);
                      const std::uint64_t mask_seed = rng.next_u64();
                      const std::uint64_t s = rng.next_u64();
                      return gradient_check(
                          [&] {
                            Rng mask_rng(mask_seed);
                            return readout(dropout(x, 0.3, true, mask_rng), s);
                          },
                          {x}, step);
                    }});
  return checks;
}

SentimentModel tiny_model(std::size_t vocab_size, std::uint64_t seed, bool shared) {
  EncoderConfig c;
  c.num_layers = 2;
  c.hidden_size = 8;
  c.num_heads = 2;
  c.ff_size = 16;
  c.vocab_size = vocab_size;
  c.max_seq_len = 8;
  c.dropout_rate = 0.0;
  c.share_parameters = shared;
  return init_model(c, VariantSpec::of(shared ? VariantName::albertlike : VariantName::bertlike),
                    seed);
}

TokenizedExample random_example(std::size_t vocab_size, std::size_t real_len, std::size_t max_len,
                                Rng& rng) {
  TokenizedExample ex;
  for (std::size_t i = 0; i < max_len; ++i) {
    std::size_t id = kPadId;
    if (i == 0) {
      id = kClsId;
    } else if (i + 1 == real_len) {
      id = kSepId;
    } else if (i < real_len) {
      id = kNumSpecialTokens + rng.uniform_index(vocab_size - kNumSpecialTokens);
    }
    ex.token_ids.push_back(id);
    ex.segment_ids.push_back(0);
    ex.attention_mask.push_back(i < real_len ? 1 : 0);
    ex.word_index.push_back(i < real_len && i > 0 && i + 1 < real_len ? static_cast<int>(i - 1) : -1);
  }
  return ex;
}

GradCheckResult model_gradient_check(std::uint64_t seed, double step) {
  SentimentModel model = tiny_model(12, seed);
  // Larger-than-init weights so gradients are well above round-off.
  Rng rng(derive_seed(seed, 1));
  for (Tensor& p : model.parameters()) {
    for (double& v : p.mutable_data()) v = 0.4 * rng.normal() + (v == 1.0 ? 1.0 : 0.0);
  }
  model.set_trainable(true);
  std::vector<TokenizedExample> examples = {random_example(12, 6, 8, rng),
                                            random_example(12, 4, 8, rng)};
  examples[1].segment_ids[2] = 1;
  const Batch batch = make_batch(examples, false);
  const std::vector<std::size_t> targets = {rng.uniform_index(3), rng.uniform_index(3)};
  auto loss = [&] { return cross_entropy(classify_batch(model, batch, ForwardOptions{}), targets); };
  return gradient_check(loss, model.parameters(ParameterScope::classifier), step);
}

}  // namespace msnt::testing
