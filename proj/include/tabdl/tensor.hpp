#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tabdl {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// Tensor is a handle: copies share the same storage, which is what lets
/// the tape hold references to layer inputs and parameters.  Use clone()
/// for an independent copy.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<double> values();
  std::span<const double> values() const;
  double* data() { return values().data(); }
  const double* data() const { return values().data(); }
  double& operator[](std::size_t i) { return values()[i]; }
  double operator[](std::size_t i) const { return values()[i]; }
  /// Value of a single-element tensor.
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);

  bool has_grad() const;
  /// Allocates a zero gradient if none exists yet.
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();
  void clear_grad();

  Tensor clone() const;
  /// Copy of the values with no gradient tracking.
  Tensor detach() const;
  /// Same values under a new shape (copy).
  Tensor reshaped(Shape shape) const;

  bool same_as(const Tensor& other) const { return impl_ == other.impl_; }

private:
  struct Impl {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  Impl& impl();
  const Impl& impl() const;

  std::shared_ptr<Impl> impl_;
};

/// Throws numeric_error naming `what` if any value is NaN or infinite.
void check_finite(const Tensor& t, const std::string& what);

/// Ordered record of executed operations for reverse-mode differentiation.
class Tape {
public:
  using BackwardFn = std::function<void()>;

  /// Records one operation.  `backward` reads output.grad() and accumulates
  /// into the grad() of the inputs that require gradients.
  void record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse, visiting
  /// each record once.  The tape is cleared afterwards.
  void backward(const Tensor& loss);

  void clear() { records_.clear(); }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

private:
  struct Record {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Record> records_;
};

} // namespace tabdl
