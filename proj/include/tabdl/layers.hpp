#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tabdl/rng.hpp"
#include "tabdl/tensor.hpp"

namespace tabdl {

enum class LayerKind { dense, conv2d, maxpool2d, dropout, relu, sigmoid, flatten };

std::string to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t units = 0;  // dense width or conv filter count
  std::size_t window_h = 0;  // conv kernel or pool window
  std::size_t window_w = 0;
  std::size_t stride = 1;
  double rate = 0.0;

  static LayerSpec dense(std::size_t units) { return {LayerKind::dense, units}; }
  static LayerSpec conv2d(std::size_t filters, std::size_t kh, std::size_t kw, std::size_t stride = 1) {
    return {LayerKind::conv2d, filters, kh, kw, stride};
  }
  static LayerSpec maxpool2d(std::size_t ph, std::size_t pw) { return {LayerKind::maxpool2d, 0, ph, pw}; }
  static LayerSpec dropout(double rate) { return {LayerKind::dropout, 0, 0, 0, 1, rate}; }
  static LayerSpec relu() { return {LayerKind::relu}; }
  static LayerSpec sigmoid() { return {LayerKind::sigmoid}; }
  static LayerSpec flatten() { return {LayerKind::flatten}; }
};

struct ForwardContext {
  Tape* tape = nullptr;
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered stack of layers with its parameters.
///
/// Shapes are inferred per sample at construction (batch axis excluded),
/// so an impossible conv/pool/dense chain fails here rather than in the
/// first forward pass.  Dense and conv weights are Glorot-uniform, biases
/// zero.  Copies share parameter storage.
class Sequential {
public:
  Sequential() = default;
  Sequential(std::string name, Shape sample_shape, std::vector<LayerSpec> layers, Rng& init_rng);

  /// x has a leading batch axis followed by the sample shape.
  Tensor forward(const Tensor& x, const ForwardContext& ctx) const;

  const std::string& name() const { return name_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  /// shapes()[0] is the input sample shape, shapes()[i + 1] the output of layer i.
  const std::vector<Shape>& shapes() const { return shapes_; }
  const Shape& input_shape() const { return shapes_.front(); }
  const Shape& output_shape() const { return shapes_.back(); }

  std::vector<Tensor> parameters() const;
  std::vector<NamedTensor> named_parameters() const;
  std::size_t parameter_count() const;

  /// conv2d -> relu -> maxpool2d runs are evaluated by one fused op unless
  /// disabled.  Results are the same either way.
  void set_fusion(bool on) { fuse_ = on; }
  bool fusion() const { return fuse_; }

private:
  struct Params {
    Tensor weight;
    Tensor bias;
  };

  std::string name_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;
  std::vector<Params> params_;  // one entry per layer, undefined for parameter-free layers
  bool fuse_ = true;
};

/// Rows `rows` of x along axis 0, keeping the trailing shape.
Tensor take_rows(const Tensor& x, std::span<const std::size_t> rows);

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

/// Contiguous mini-batches over `order`; the last batch may be short.
std::vector<std::span<const std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t batch);

/// Total element count of a parameter list.
std::size_t count_parameters(const std::vector<Tensor>& params);

} // namespace tabdl
