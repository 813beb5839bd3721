#include "tabdl/layers.hpp"

#include <algorithm>
#include <cmath>

#include "tabdl/errors.hpp"
#include "tabdl/ops.hpp"

namespace tabdl {

std::string to_string(LayerKind kind) {
  switch (kind) {
  case LayerKind::dense: return "dense";
  case LayerKind::conv2d: return "conv2d";
  case LayerKind::maxpool2d: return "maxpool2d";
  case LayerKind::dropout: return "dropout";
  case LayerKind::relu: return "relu";
  case LayerKind::sigmoid: return "sigmoid";
  case LayerKind::flatten: return "flatten";
  }
  return "unknown";
}

namespace {

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape), 0.0, true);
  for (auto& w : t.values()) w = rng.uniform(-limit, limit);
  return t;
}

std::string layer_label(const std::string& graph, std::size_t i, const LayerSpec& spec) {
  return graph + "[" + std::to_string(i) + "] " + to_string(spec.kind);
}

} // namespace

Sequential::Sequential(std::string name, Shape sample_shape, std::vector<LayerSpec> layers, Rng& init_rng)
    : name_(std::move(name)), layers_(std::move(layers)) {
  if (sample_shape.empty()) throw dimension_error(name_ + ": empty input shape");
  shapes_.push_back(sample_shape);
  params_.resize(layers_.size());

  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& spec = layers_[i];
    const Shape in = shapes_.back();
    Shape out = in;
    const auto where = layer_label(name_, i, spec);
    switch (spec.kind) {
    case LayerKind::dense: {
      if (in.size() != 1) throw dimension_error(where + ": expects a flat input, got " + shape_to_string(in));
      if (spec.units == 0) throw argument_error(where + ": width must be positive");
      params_[i].weight = glorot_uniform({in[0], spec.units}, in[0], spec.units, init_rng);
      params_[i].bias = Tensor({spec.units}, 0.0, true);
      out = {spec.units};
      break;
    }
    case LayerKind::conv2d: {
      if (in.size() != 3) throw dimension_error(where + ": expects HxWxC input, got " + shape_to_string(in));
      if (spec.units == 0 || spec.window_h == 0 || spec.window_w == 0 || spec.stride == 0)
        throw argument_error(where + ": filters, kernel and stride must be positive");
      if (spec.window_h > in[0] || spec.window_w > in[1])
        throw dimension_error(where + ": kernel (" + std::to_string(spec.window_h) + "," +
                              std::to_string(spec.window_w) + ") larger than input " + shape_to_string(in));
      const std::size_t area = spec.window_h * spec.window_w;
      params_[i].weight = glorot_uniform({spec.units, spec.window_h, spec.window_w, in[2]}, area * in[2],
                                         area * spec.units, init_rng);
      params_[i].bias = Tensor({spec.units}, 0.0, true);
      out = {(in[0] - spec.window_h) / spec.stride + 1, (in[1] - spec.window_w) / spec.stride + 1, spec.units};
      break;
    }
    case LayerKind::maxpool2d:
      if (in.size() != 3) throw dimension_error(where + ": expects HxWxC input, got " + shape_to_string(in));
      if (spec.window_h == 0 || spec.window_w == 0) throw argument_error(where + ": pool dimensions must be positive");
      if (spec.window_h > in[0] || spec.window_w > in[1])
        throw dimension_error(where + ": pool larger than input " + shape_to_string(in));
      out = {in[0] / spec.window_h, in[1] / spec.window_w, in[2]};
      break;
    case LayerKind::dropout:
      if (!(spec.rate >= 0.0 && spec.rate < 1.0))
        throw argument_error(where + ": rate must be in [0, 1), got " + std::to_string(spec.rate));
      break;
    case LayerKind::flatten: out = {shape_size(in)}; break;
    case LayerKind::relu:
    case LayerKind::sigmoid: break;
    }
    shapes_.push_back(std::move(out));
  }
}

Tensor Sequential::forward(const Tensor& x, const ForwardContext& ctx) const {
  const Shape& in = input_shape();
  if (x.rank() != in.size() + 1 || !std::equal(in.begin(), in.end(), x.shape().begin() + 1))
    throw dimension_error(name_ + ": input " + shape_to_string(x.shape()) + " does not match sample shape " +
                          shape_to_string(in));
  const std::size_t batch = x.dim(0);
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& spec = layers_[i];
    switch (spec.kind) {
    case LayerKind::dense: h = ops::dense(ctx.tape, h, params_[i].weight, params_[i].bias); break;
    case LayerKind::conv2d:
      if (fuse_ && i + 2 < layers_.size() && layers_[i + 1].kind == LayerKind::relu &&
          layers_[i + 2].kind == LayerKind::maxpool2d) {
        h = ops::conv2d_relu_maxpool(ctx.tape, h, params_[i].weight, params_[i].bias, spec.stride,
                                     layers_[i + 2].window_h, layers_[i + 2].window_w);
        i += 2;
        break;
      }
      h = ops::conv2d(ctx.tape, h, params_[i].weight, params_[i].bias, spec.stride);
      break;
    case LayerKind::maxpool2d: h = ops::maxpool2d(ctx.tape, h, spec.window_h, spec.window_w); break;
    case LayerKind::dropout:
      if (ctx.training && spec.rate > 0.0) {
        if (!ctx.rng) throw std::logic_error(name_ + ": training-mode dropout needs an rng");
        h = ops::dropout(ctx.tape, h, spec.rate, true, *ctx.rng);
      }
      break;
    case LayerKind::relu: h = ops::relu(ctx.tape, h); break;
    case LayerKind::sigmoid: h = ops::sigmoid(ctx.tape, h); break;
    case LayerKind::flatten: {
      Shape s{batch};
      s.insert(s.end(), shapes_[i + 1].begin(), shapes_[i + 1].end());
      h = ops::reshape(ctx.tape, h, std::move(s));
      break;
    }
    }
  }
  return h;
}

std::vector<Tensor> Sequential::parameters() const {
  std::vector<Tensor> out;
  for (const auto& p : params_)
    if (p.weight.defined()) {
      out.push_back(p.weight);
      out.push_back(p.bias);
    }
  return out;
}

std::vector<NamedTensor> Sequential::named_parameters() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].weight.defined()) {
      const std::string prefix = name_ + "." + std::to_string(i) + ".";
      out.push_back({prefix + "weight", params_[i].weight});
      out.push_back({prefix + "bias", params_[i].bias});
    }
  return out;
}

std::size_t Sequential::parameter_count() const { return count_parameters(parameters()); }

std::size_t count_parameters(const std::vector<Tensor>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.size();
  return n;
}

Tensor take_rows(const Tensor& x, std::span<const std::size_t> rows) {
  const std::size_t stride = x.size() / x.dim(0);
  Shape s = x.shape();
  s[0] = rows.size();
  Tensor out(std::move(s));
  auto src = x.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.dim(0)) throw dimension_error("take_rows: row " + std::to_string(rows[i]) + " out of range");
    std::copy_n(src.begin() + rows[i] * stride, stride, dst.begin() + i * stride);
  }
  return out;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

std::vector<std::span<const std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t batch) {
  if (batch == 0) throw argument_error("batch size must be positive");
  std::vector<std::span<const std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += batch)
    out.emplace_back(order.data() + start, std::min(batch, order.size() - start));
  return out;
}

} // namespace tabdl
