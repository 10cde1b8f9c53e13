#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace msnt {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {
struct TensorStorage;
}

// Handle to a dense row-major array of doubles. Copies share storage, the
// same way parameters are shared between a model and its optimizer.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t size() const;
  // Extents of a 2-D tensor.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  // Writes bypass the tape; only use on leaves or freshly built outputs.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);

  bool has_grad() const;
  std::span<const double> grad() const;
  // Allocates a zero-filled gradient buffer on first use.
  std::span<double> grad_buffer() const;
  void zero_grad();

  // Deep copy with no tape history.
  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  // Tape bookkeeping.
  std::uint64_t tape_id() const;
  std::int64_t node_index() const;

 private:
  friend class Tape;
  explicit Tensor(std::shared_ptr<detail::TensorStorage> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorStorage> impl_;
};

// Define-by-run differentiation tape. Constructing a Tape makes it the active
// tape for the current thread until it is destroyed; ops executed while no
// tape is active record nothing, which is the inference path.
class Tape {
 public:
  using BackwardFn = std::function<void(const std::vector<Tensor>& inputs, const Tensor& output)>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  std::uint64_t id() const { return id_; }
  std::size_t node_count() const { return nodes_.size(); }

  // Attaches `output` to the tape when any input requires grad; a no-op
  // otherwise.
  static void record(Tensor& output, std::vector<Tensor> inputs, BackwardFn backward);

  // Populates grad on every requires_grad tensor reachable from `loss`.
  // Leaf gradients accumulate across calls; intermediate gradients are
  // reseeded each call.
  void backward(const Tensor& loss);

 private:
  struct Node {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  std::uint64_t id_;
  Tape* previous_;
  std::vector<Node> nodes_;
};

// Runs backward on the active tape.
void backward(const Tensor& loss);

}  // namespace msnt
