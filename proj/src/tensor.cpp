#include "tabdl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tabdl/errors.hpp"

namespace tabdl {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw dimension_error("tensor shape must have at least one dimension");
  for (auto d : shape)
    if (d == 0) throw dimension_error("tensor dimensions must be positive, got " + shape_to_string(shape));
}

} // namespace

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
  validate_shape(shape);
  impl_ = std::make_shared<Impl>();
  impl_->values.assign(shape_size(shape), fill);
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  validate_shape(shape);
  if (shape_size(shape) != values.size())
    throw dimension_error("shape " + shape_to_string(shape) + " does not match " +
                          std::to_string(values.size()) + " values");
  impl_ = std::make_shared<Impl>();
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, std::vector<double>{value}, requires_grad);
}

Tensor::Impl& Tensor::impl() {
  if (!impl_) throw std::logic_error("use of an undefined tensor");
  return *impl_;
}

const Tensor::Impl& Tensor::impl() const {
  if (!impl_) throw std::logic_error("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size())
    throw dimension_error("axis " + std::to_string(axis) + " out of range for " + shape_to_string(s));
  return s[axis];
}

std::size_t Tensor::size() const { return impl().values.size(); }

std::span<double> Tensor::values() { return impl().values; }
std::span<const double> Tensor::values() const { return impl().values; }

double Tensor::item() const {
  if (size() != 1) throw dimension_error("item() on non-scalar tensor " + shape_to_string(shape()));
  return impl().values[0];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }
void Tensor::set_requires_grad(bool on) { impl().requires_grad = on; }

bool Tensor::has_grad() const { return !impl().grad.empty(); }

std::span<double> Tensor::grad() {
  auto& im = impl();
  if (im.grad.empty()) im.grad.assign(im.values.size(), 0.0);
  return im.grad;
}

std::span<const double> Tensor::grad() const { return impl().grad; }

void Tensor::zero_grad() {
  auto& im = impl();
  im.grad.assign(im.values.size(), 0.0);
}

void Tensor::clear_grad() {
  auto& im = impl();
  im.grad.clear();
  im.grad.shrink_to_fit();
}

Tensor Tensor::clone() const {
  Tensor t;
  t.impl_ = std::make_shared<Impl>(impl());
  return t;
}

Tensor Tensor::detach() const { return Tensor(shape(), impl().values, false); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != size())
    throw dimension_error("cannot reshape " + shape_to_string(this->shape()) + " to " + shape_to_string(shape));
  return Tensor(std::move(shape), impl().values, false);
}

void check_finite(const Tensor& t, const std::string& what) {
  auto v = t.values();
  auto bad = std::find_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); });
  if (bad != v.end())
    throw numeric_error(what + ": non-finite value " + std::to_string(*bad) + " at index " +
                        std::to_string(bad - v.begin()));
}

void Tape::record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward) {
  const bool tracked = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  output.set_requires_grad(tracked);
  records_.push_back({std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw dimension_error("backward requires a scalar loss, got " + shape_to_string(loss.shape()));
  auto it = std::find_if(records_.begin(), records_.end(),
                         [&](const Record& r) { return r.output.same_as(loss); });
  if (it == records_.end()) throw std::logic_error("backward: loss tensor was not produced on this tape");

  for (auto& r : records_) r.output.zero_grad();
  Tensor seed = loss;
  seed.grad()[0] = 1.0;

  for (auto r = records_.rbegin(); r != records_.rend(); ++r) {
    if (!r->output.requires_grad()) continue;  // nothing upstream needs a gradient
    for (auto& in : r->inputs)
      if (in.requires_grad()) in.grad();
    r->backward();
  }
  records_.clear();
}

} // namespace tabdl
