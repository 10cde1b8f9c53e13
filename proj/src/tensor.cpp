#include "msnt/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <new>
#include <numeric>
#include <sstream>

namespace msnt {

namespace detail {

// Eigen picks its vectorized summation order from the buffer address, so
// buffers start on a cache line to make results independent of where the
// allocator happened to put them.
template <typename T>
struct LineAlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  LineAlignedAllocator() = default;
  template <typename U>
  LineAlignedAllocator(const LineAlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const LineAlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using Buffer = std::vector<double, LineAlignedAllocator<double>>;

struct TensorStorage {
  Shape shape;
  Buffer data;
  Buffer grad;
  bool requires_grad = false;
  std::uint64_t tape_id = 0;
  std::int64_t node = -1;
};

}  // namespace detail

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<detail::TensorStorage>()) {
  if (std::any_of(shape.begin(), shape.end(), [](std::size_t e) { return e == 0; })) {
    throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
  }
  if (shape_size(shape) != data.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data.assign(data.begin(), data.end());
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::size() const { return impl_->data.size(); }

std::size_t Tensor::rows() const {
  if (impl_->shape.size() != 2) {
    throw DimensionError("rows() needs a 2-D tensor, got " + shape_to_string(impl_->shape));
  }
  return impl_->shape[0];
}

std::size_t Tensor::cols() const {
  if (impl_->shape.size() != 2) {
    throw DimensionError("cols() needs a 2-D tensor, got " + shape_to_string(impl_->shape));
  }
  return impl_->shape[1];
}

std::span<const double> Tensor::data() const { return impl_->data; }
std::span<double> Tensor::mutable_data() { return impl_->data; }

double Tensor::item() const {
  if (impl_->data.size() != 1) {
    throw ContractError("item() on tensor of shape " + shape_to_string(impl_->shape));
  }
  return impl_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return impl_->data[row * cols() + col];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool value) { impl_->requires_grad = value; }

bool Tensor::has_grad() const { return !impl_->grad.empty(); }
std::span<const double> Tensor::grad() const { return impl_->grad; }

std::span<double> Tensor::grad_buffer() const {
  if (impl_->grad.size() != impl_->data.size()) {
    impl_->grad.assign(impl_->data.size(), 0.0);
  }
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  return Tensor(impl_->shape, std::vector<double>(impl_->data.begin(), impl_->data.end()),
                impl_->requires_grad);
}

std::uint64_t Tensor::tape_id() const { return impl_->tape_id; }
std::int64_t Tensor::node_index() const { return impl_->node; }

namespace {

thread_local Tape* g_active_tape = nullptr;
std::atomic<std::uint64_t> g_next_tape_id{1};

}  // namespace

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)), previous_(g_active_tape) {
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(Tensor& output, std::vector<Tensor> inputs, BackwardFn backward) {
  Tape* tape = g_active_tape;
  if (tape == nullptr) return;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return;
  output.impl_->requires_grad = true;
  output.impl_->tape_id = tape->id_;
  output.impl_->node = static_cast<std::int64_t>(tape->nodes_.size());
  tape->nodes_.push_back(Node{std::move(inputs), output, std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss");
  }
  if (loss.tape_id() != id_ || loss.node_index() < 0) {
    throw ContractError("backward() loss was not produced on this tape");
  }
  const auto last = static_cast<std::size_t>(loss.node_index());
  std::vector<char> reached(last + 1, 0);
  for (std::size_t i = 0; i <= last; ++i) {
    auto& g = nodes_[i].output.impl_->grad;
    g.assign(nodes_[i].output.size(), 0.0);
  }
  nodes_[last].output.impl_->grad[0] = 1.0;
  reached[last] = 1;

  for (std::size_t i = last + 1; i-- > 0;) {
    if (!reached[i]) continue;
    Node& node = nodes_[i];
    node.backward(node.inputs, node.output);
    for (const Tensor& in : node.inputs) {
      if (in.requires_grad() && in.tape_id() == id_ && in.node_index() >= 0) {
        reached[static_cast<std::size_t>(in.node_index())] = 1;
      }
    }
  }
}

void backward(const Tensor& loss) {
  Tape* tape = Tape::active();
  if (tape == nullptr) throw ContractError("backward() called with no active tape");
  tape->backward(loss);
}

}  // namespace msnt
