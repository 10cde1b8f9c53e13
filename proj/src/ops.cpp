#include "msnt/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace msnt {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(std::span<const double> data, std::size_t rows, std::size_t cols) {
  return ConstMap(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MutMap as_matrix(std::span<double> data, std::size_t rows, std::size_t cols) {
  return MutMap(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_2d(const Tensor& t, const char* op) {
  if (t.ndim() != 2) {
    throw DimensionError(std::string(op) + ": expected a 2-D tensor, got " +
                         shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

void check_finite([[maybe_unused]] const Tensor& out, [[maybe_unused]] const char* op) {
#ifndef NDEBUG
  for (double v : out.data()) {
    if (!std::isfinite(v)) throw ContractError(std::string(op) + " produced a non-finite value");
  }
#endif
}

// Gradient sink for an input, or an empty span when it needs none.
std::span<double> sink(const Tensor& t) {
  if (!t.requires_grad()) return {};
  return t.grad_buffer();
}

std::size_t product(const Shape& shape, std::size_t begin, std::size_t end) {
  std::size_t p = 1;
  for (std::size_t i = begin; i < end; ++i) p *= shape[i];
  return p;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_to_string(a.shape()) +
                         " x " + shape_to_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = Tensor::zeros({m, n});
  as_matrix(out.mutable_data(), m, n).noalias() = as_matrix(a.data(), m, k) * as_matrix(b.data(), k, n);
  check_finite(out, "matmul");
  Tape::record(out, {a, b}, [m, k, n](const std::vector<Tensor>& in, const Tensor& y) {
    const auto dy = as_matrix(y.grad(), m, n);
    if (auto da = sink(in[0]); !da.empty()) {
      as_matrix(da, m, k).noalias() += dy * as_matrix(in[1].data(), k, n).transpose();
    }
    if (auto db = sink(in[1]); !db.empty()) {
      as_matrix(db, k, n).noalias() += as_matrix(in[0].data(), m, k).transpose() * dy;
    }
  });
  return out;
}

Tensor matmul_transposed(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul_transposed");
  require_2d(b, "matmul_transposed");
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_transposed: inner dimensions disagree for " +
                         shape_to_string(a.shape()) + " x " + shape_to_string(b.shape()) + "^T");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor out = Tensor::zeros({m, n});
  as_matrix(out.mutable_data(), m, n).noalias() =
      as_matrix(a.data(), m, k) * as_matrix(b.data(), n, k).transpose();
  check_finite(out, "matmul_transposed");
  Tape::record(out, {a, b}, [m, k, n](const std::vector<Tensor>& in, const Tensor& y) {
    const auto dy = as_matrix(y.grad(), m, n);
    if (auto da = sink(in[0]); !da.empty()) {
      as_matrix(da, m, k).noalias() += dy * as_matrix(in[1].data(), n, k);
    }
    if (auto db = sink(in[1]); !db.empty()) {
      as_matrix(db, n, k).noalias() += dy.transpose() * as_matrix(in[0].data(), m, k);
    }
  });
  return out;
}

Tensor transpose(const Tensor& x) {
  require_2d(x, "transpose");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros({n, m});
  as_matrix(out.mutable_data(), n, m) = as_matrix(x.data(), m, n).transpose();
  Tape::record(out, {x}, [m, n](const std::vector<Tensor>& in, const Tensor& y) {
    if (auto dx = sink(in[0]); !dx.empty()) {
      as_matrix(dx, m, n) += as_matrix(y.grad(), n, m).transpose();
    }
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> v(a.size());
  const auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = ad[i] + bd[i];
  Tensor out(a.shape(), std::move(v));
  Tape::record(out, {a, b}, [](const std::vector<Tensor>& in, const Tensor& y) {
    const auto dy = y.grad();
    for (const Tensor& t : in) {
      if (auto d = sink(t); !d.empty()) {
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
      }
    }
  });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> v(a.size());
  const auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = ad[i] - bd[i];
  Tensor out(a.shape(), std::move(v));
  Tape::record(out, {a, b}, [](const std::vector<Tensor>& in, const Tensor& y) {
    const auto dy = y.grad();
    if (auto d = sink(in[0]); !d.empty()) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
    }
    if (auto d = sink(in[1]); !d.empty()) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= dy[i];
    }
  });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> v(a.size());
  const auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = ad[i] * bd[i];
  Tensor out(a.shape(), std::move(v));
  check_finite(out, "mul");
  Tape::record(out, {a, b}, [](const std::vector<Tensor>& in, const Tensor& y) {
    const auto dy = y.grad();
    const auto ad = in[0].data(), bd = in[1].data();
    // Sinks may alias when a tensor is multiplied by itself; both terms still land.
    if (auto d = sink(in[0]); !d.empty()) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * bd[i];
    }
    if (auto d = sink(in[1]); !d.empty()) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * ad[i];
    }
  });
  return out;
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> v(x.data().begin(), x.data().end());
  for (double& e : v) e *= factor;
  Tensor out(x.shape(), std::move(v));
  Tape::record(out, {x}, [factor](const std::vector<Tensor>& in, const Tensor& y) {
    const auto dy = y.grad();
    if (auto d = sink(in[0]); !d.empty()) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * dy[i];
    }
  });
  return out;
}

Tensor add_row_vector(const Tensor& x, const Tensor& bias) {
  require_2d(x, "add_row_vector");
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.size() != n) {
    throw DimensionError("add_row_vector: bias " + shape_to_string(bias.shape()) +
                         " does not match " + shape_to_string(x.shape()));
  }
  std::vector<double> v(x.data().begin(), x.data().end());
  const auto bd = bias.data();
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) v[r * n + c] += bd[c];
  }
  Tensor out(x.shape(), std::move(v));
  Tape::record(out, {x, bias}, [m, n](const std::vector<Tensor>& in, const Tensor& y) {
    const auto dy = y.grad();
    if (auto d = sink(in[0]); !d.empty()) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
    }
    if (auto d = sink(in[1]); !d.empty()) {
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) d[c] += dy[r * n + c];
      }
    }
  });
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                         shape_to_string(shape));
  }
  Tensor out(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  Tape::record(out, {x}, [](const std::vector<Tensor>& in, const Tensor& y) {
    const auto dy = y.grad();
    if (auto d = sink(in[0]); !d.empty()) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
    }
  });
  return out;
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Tensor out = Tensor::scalar(s);
  Tape::record(out, {x}, [](const std::vector<Tensor>& in, const Tensor& y) {
    const double g = y.grad()[0];
    if (auto d = sink(in[0]); !d.empty()) {
      for (double& e : d) e += g;
    }
  });
  return out;
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.ndim()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for " +
                         shape_to_string(x.shape()));
  }
  const std::size_t outer = product(x.shape(), 0, axis);
  const std::size_t n = x.shape()[axis];
  const std::size_t inner = product(x.shape(), axis + 1, x.ndim());
  const auto xd = x.data();
  std::vector<double> v(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) {
      const std::size_t base = o * n * inner + j;
      double mx = xd[base];
      for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, xd[base + i * inner]);
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = std::exp(xd[base + i * inner] - mx);
        v[base + i * inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < n; ++i) v[base + i * inner] /= total;
    }
  }
  Tensor out(x.shape(), std::move(v));
  Tape::record(out, {x}, [outer, n, inner](const std::vector<Tensor>& in, const Tensor& y) {
    auto d = sink(in[0]);
    if (d.empty()) return;
    const auto yd = y.data();
    const auto dy = y.grad();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t j = 0; j < inner; ++j) {
        const std::size_t base = o * n * inner + j;
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += dy[base + i * inner] * yd[base + i * inner];
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t k = base + i * inner;
          d[k] += yd[k] * (dy[k] - dot);
        }
      }
    }
  });
  return out;
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.ndim()) {
    throw DimensionError("log_softmax: axis " + std::to_string(axis) + " invalid for " +
                         shape_to_string(x.shape()));
  }
  const std::size_t outer = product(x.shape(), 0, axis);
  const std::size_t n = x.shape()[axis];
  const std::size_t inner = product(x.shape(), axis + 1, x.ndim());
  const auto xd = x.data();
  std::vector<double> v(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) {
      const std::size_t base = o * n * inner + j;
      double mx = xd[base];
      for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, xd[base + i * inner]);
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += std::exp(xd[base + i * inner] - mx);
      const double log_total = std::log(total) + mx;
      for (std::size_t i = 0; i < n; ++i) v[base + i * inner] = xd[base + i * inner] - log_total;
    }
  }
  Tensor out(x.shape(), std::move(v));
  Tape::record(out, {x}, [outer, n, inner](const std::vector<Tensor>& in, const Tensor& y) {
    auto d = sink(in[0]);
    if (d.empty()) return;
    const auto yd = y.data();
    const auto dy = y.grad();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t j = 0; j < inner; ++j) {
        const std::size_t base = o * n * inner + j;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += dy[base + i * inner];
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t k = base + i * inner;
          d[k] += dy[k] - std::exp(yd[k]) * total;
        }
      }
    }
  });
  return out;
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double epsilon) {
  const std::size_t n = x.shape().back();
  if (gamma.size() != n || beta.size() != n) {
    throw DimensionError("layernorm: gamma/beta " + shape_to_string(gamma.shape()) + "/" +
                         shape_to_string(beta.shape()) + " do not match last extent of " +
                         shape_to_string(x.shape()));
  }
  const std::size_t rows = x.size() / n;
  const auto xd = x.data(), g = gamma.data(), b = beta.data();
  std::vector<double> v(x.size());
  std::vector<double> x_hat(x.size());
  std::vector<double> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * n;
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += row[i];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<double>(n);
    rstd[r] = 1.0 / std::sqrt(var + epsilon);
    for (std::size_t i = 0; i < n; ++i) {
      const double h = (row[i] - mu) * rstd[r];
      x_hat[r * n + i] = h;
      v[r * n + i] = g[i] * h + b[i];
    }
  }
  Tensor out(x.shape(), std::move(v));
  check_finite(out, "layernorm");
  Tape::record(out, {x, gamma, beta},
               [rows, n, x_hat = std::move(x_hat), rstd = std::move(rstd)](
                   const std::vector<Tensor>& in, const Tensor& y) {
                 const auto dy = y.grad();
                 const auto g = in[1].data();
                 if (auto dg = sink(in[1]); !dg.empty()) {
                   for (std::size_t r = 0; r < rows; ++r) {
                     for (std::size_t i = 0; i < n; ++i) dg[i] += dy[r * n + i] * x_hat[r * n + i];
                   }
                 }
                 if (auto db = sink(in[2]); !db.empty()) {
                   for (std::size_t r = 0; r < rows; ++r) {
                     for (std::size_t i = 0; i < n; ++i) db[i] += dy[r * n + i];
                   }
                 }
                 auto dx = sink(in[0]);
                 if (dx.empty()) return;
                 const double inv_n = 1.0 / static_cast<double>(n);
                 for (std::size_t r = 0; r < rows; ++r) {
                   double mean_dh = 0.0, mean_dh_h = 0.0;
                   for (std::size_t i = 0; i < n; ++i) {
                     const double dh = dy[r * n + i] * g[i];
                     mean_dh += dh;
                     mean_dh_h += dh * x_hat[r * n + i];
                   }
                   mean_dh *= inv_n;
                   mean_dh_h *= inv_n;
                   for (std::size_t i = 0; i < n; ++i) {
                     const double dh = dy[r * n + i] * g[i];
                     dx[r * n + i] += rstd[r] * (dh - mean_dh - x_hat[r * n + i] * mean_dh_h);
                   }
                 }
               });
  return out;
}

Tensor gelu(const Tensor& x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  const auto xd = x.data();
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double u = xd[i];
    v[i] = 0.5 * u * (1.0 + std::tanh(kC * (u + kA * u * u * u)));
  }
  Tensor out(x.shape(), std::move(v));
  Tape::record(out, {x}, [](const std::vector<Tensor>& in, const Tensor& y) {
    auto d = sink(in[0]);
    if (d.empty()) return;
    const auto xd = in[0].data();
    const auto dy = y.grad();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double u = xd[i];
      const double t = std::tanh(kC * (u + kA * u * u * u));
      const double du = 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * kC * (1.0 + 3.0 * kA * u * u);
      d[i] += dy[i] * du;
    }
  });
  return out;
}

Tensor tanh(const Tensor& x) {
  const auto xd = x.data();
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(xd[i]);
  Tensor out(x.shape(), std::move(v));
  Tape::record(out, {x}, [](const std::vector<Tensor>& in, const Tensor& y) {
    auto d = sink(in[0]);
    if (d.empty()) return;
    const auto yd = y.data();
    const auto dy = y.grad();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * (1.0 - yd[i] * yd[i]);
  });
  return out;
}

Tensor cross_entropy(const Tensor& logits, std::size_t target) {
  const std::size_t t[] = {target};
  return cross_entropy(reshape(logits, {1, logits.size()}), t);
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
  require_2d(logits, "cross_entropy");
  const std::size_t rows = logits.rows(), classes = logits.cols();
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         shape_to_string(logits.shape()) + " logits");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= classes) {
      throw IndexError("cross_entropy: class " + std::to_string(targets[r]) + " out of range for " +
                       std::to_string(classes) + " classes");
    }
  }
  const auto zd = logits.data();
  std::vector<double> probs(logits.size());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = zd.data() + r * classes;
    const double mx = *std::max_element(z, z + classes);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs[r * classes + c] = std::exp(z[c] - mx);
      total += probs[r * classes + c];
    }
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] /= total;
    loss += -(z[targets[r]] - mx - std::log(total));
  }
  loss /= static_cast<double>(rows);
  Tensor out = Tensor::scalar(loss);
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  Tape::record(out, {logits},
               [rows, classes, probs = std::move(probs), tgt = std::move(tgt)](
                   const std::vector<Tensor>& in, const Tensor& y) {
                 auto d = sink(in[0]);
                 if (d.empty()) return;
                 const double g = y.grad()[0] / static_cast<double>(rows);
                 for (std::size_t r = 0; r < rows; ++r) {
                   for (std::size_t c = 0; c < classes; ++c) {
                     const double onehot = (c == tgt[r]) ? 1.0 : 0.0;
                     d[r * classes + c] += g * (probs[r * classes + c] - onehot);
                   }
                 }
               });
  return out;
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids) {
  require_2d(table, "embedding_lookup");
  const std::size_t vocab = table.rows();
  for (std::size_t id : ids) {
    if (id >= vocab) {
      throw IndexError("embedding_lookup: id " + std::to_string(id) + " out of range for " +
                       std::to_string(vocab) + " rows");
    }
  }
  return gather_rows(table, ids);
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  require_2d(x, "gather_rows");
  const std::size_t n = x.cols();
  if (rows.empty()) throw DimensionError("gather_rows: no rows selected");
  for (std::size_t r : rows) {
    if (r >= x.rows()) {
      throw IndexError("gather_rows: row " + std::to_string(r) + " out of range for " +
                       shape_to_string(x.shape()));
    }
  }
  std::vector<double> v(rows.size() * n);
  const auto xd = x.data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(xd.begin() + static_cast<std::ptrdiff_t>(rows[i] * n), n,
                v.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  Tensor out({rows.size(), n}, std::move(v));
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  Tape::record(out, {x}, [n, idx = std::move(idx)](const std::vector<Tensor>& in, const Tensor& y) {
    auto d = sink(in[0]);
    if (d.empty()) return;
    const auto dy = y.grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t c = 0; c < n; ++c) d[idx[i] * n + c] += dy[i * n + c];
    }
  });
  return out;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  require_2d(x, "slice_rows");
  if (count == 0 || begin + count > x.rows()) {
    throw IndexError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + shape_to_string(x.shape()));
  }
  const std::size_t n = x.cols();
  const auto xd = x.data();
  std::vector<double> v(xd.begin() + static_cast<std::ptrdiff_t>(begin * n),
                        xd.begin() + static_cast<std::ptrdiff_t>((begin + count) * n));
  Tensor out({count, n}, std::move(v));
  Tape::record(out, {x}, [begin, n](const std::vector<Tensor>& in, const Tensor& y) {
    auto d = sink(in[0]);
    if (d.empty()) return;
    const auto dy = y.grad();
    for (std::size_t i = 0; i < dy.size(); ++i) d[begin * n + i] += dy[i];
  });
  return out;
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  require_2d(x, "slice_cols");
  if (count == 0 || begin + count > x.cols()) {
    throw IndexError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + shape_to_string(x.shape()));
  }
  const std::size_t m = x.rows(), n = x.cols();
  const auto xd = x.data();
  std::vector<double> v(m * count);
  for (std::size_t r = 0; r < m; ++r) {
    std::copy_n(xd.begin() + static_cast<std::ptrdiff_t>(r * n + begin), count,
                v.begin() + static_cast<std::ptrdiff_t>(r * count));
  }
  Tensor out({m, count}, std::move(v));
  Tape::record(out, {x}, [m, n, begin, count](const std::vector<Tensor>& in, const Tensor& y) {
    auto d = sink(in[0]);
    if (d.empty()) return;
    const auto dy = y.grad();
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < count; ++c) d[r * n + begin + c] += dy[r * count + c];
    }
  });
  return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.ndim() != 2 || p.cols() != n) {
      throw DimensionError("concat_rows: column mismatch " + shape_to_string(parts[0].shape()) +
                           " vs " + shape_to_string(p.shape()));
    }
    total += p.rows();
  }
  std::vector<double> v;
  v.reserve(total * n);
  for (const Tensor& p : parts) v.insert(v.end(), p.data().begin(), p.data().end());
  Tensor out({total, n}, std::move(v));
  Tape::record(out, std::vector<Tensor>(parts.begin(), parts.end()),
               [](const std::vector<Tensor>& in, const Tensor& y) {
                 const auto dy = y.grad();
                 std::size_t offset = 0;
                 for (const Tensor& p : in) {
                   if (auto d = sink(p); !d.empty()) {
                     for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[offset + i];
                   }
                   offset += p.size();
                 }
               });
  return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.ndim() != 2 || p.rows() != m) {
      throw DimensionError("concat_cols: row mismatch " + shape_to_string(parts[0].shape()) +
                           " vs " + shape_to_string(p.shape()));
    }
    total += p.cols();
  }
  std::vector<double> v(m * total);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t c = p.cols();
    const auto pd = p.data();
    for (std::size_t r = 0; r < m; ++r) {
      std::copy_n(pd.begin() + static_cast<std::ptrdiff_t>(r * c), c,
                  v.begin() + static_cast<std::ptrdiff_t>(r * total + offset));
    }
    offset += c;
  }
  Tensor out({m, total}, std::move(v));
  Tape::record(out, std::vector<Tensor>(parts.begin(), parts.end()),
               [m, total](const std::vector<Tensor>& in, const Tensor& y) {
                 const auto dy = y.grad();
                 std::size_t off = 0;
                 for (const Tensor& p : in) {
                   const std::size_t c = p.cols();
                   if (auto d = sink(p); !d.empty()) {
                     for (std::size_t r = 0; r < m; ++r) {
                       for (std::size_t j = 0; j < c; ++j) d[r * c + j] += dy[r * total + off + j];
                     }
                   }
                   off += c;
                 }
               });
  return out;
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ContractError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = rng.uniform() >= rate ? keep_scale : 0.0;
  const auto xd = x.data();
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = xd[i] * mask[i];
  Tensor out(x.shape(), std::move(v));
  Tape::record(out, {x}, [mask = std::move(mask)](const std::vector<Tensor>& in, const Tensor& y) {
    auto d = sink(in[0]);
    if (d.empty()) return;
    const auto dy = y.grad();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * mask[i];
  });
  return out;
}

}  // namespace msnt
