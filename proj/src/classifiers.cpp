#include "tabdl/classifiers.hpp"

#include <algorithm>

#include "tabdl/adam.hpp"
#include "tabdl/errors.hpp"
#include "tabdl/ops.hpp"

namespace tabdl {

std::string to_string(ClassifierKind kind) { return kind == ClassifierKind::cnn ? "cnn" : "mlp"; }

ClassifierConfig ClassifierConfig::mlp_defaults() { return {}; }

ClassifierConfig ClassifierConfig::cnn_defaults() {
  ClassifierConfig c;
  c.kind = ClassifierKind::cnn;
  c.epochs = 650;
  c.dropout = 0.2;
  c.hidden = {64};
  return c;
}

void validate(const ClassifierConfig& cfg) {
  if (std::find(cfg.hidden.begin(), cfg.hidden.end(), 0u) != cfg.hidden.end())
    throw argument_error("classifier: hidden widths must be positive");
  if (cfg.epochs == 0 || cfg.batch == 0) throw argument_error("classifier: epochs and batch must be positive");
  if (!(cfg.lr > 0.0)) throw argument_error("classifier: lr must be positive");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw argument_error("classifier: dropout must be in [0, 1)");
  if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) throw argument_error("classifier: threshold must be in (0, 1)");
  if (cfg.kind == ClassifierKind::cnn &&
      (cfg.filters == 0 || cfg.kernel_h == 0 || cfg.kernel_w == 0 || cfg.pool_h == 0 || cfg.pool_w == 0))
    throw argument_error("classifier: filters, kernel and pool sizes must be positive");
}

namespace {

void append_head(std::vector<LayerSpec>& layers, const ClassifierConfig& cfg) {
  for (auto w : cfg.hidden) {
    layers.push_back(LayerSpec::dense(w));
    layers.push_back(LayerSpec::relu());
    layers.push_back(LayerSpec::dropout(cfg.dropout));
  }
  layers.push_back(LayerSpec::dense(1));
  layers.push_back(LayerSpec::sigmoid());
}

} // namespace

Classifier build_mlp(const ClassifierConfig& cfg, std::size_t input_width, const std::string& name, Rng& init) {
  validate(cfg);
  std::vector<LayerSpec> layers;
  append_head(layers, cfg);
  return {ClassifierKind::mlp, Sequential(name, {input_width}, layers, init)};
}

Classifier build_mlp(const ClassifierConfig& cfg, std::size_t input_width, const std::string& name) {
  Rng init = Rng(cfg.seed).fork(kInitStream);
  return build_mlp(cfg, input_width, name, init);
}

Classifier build_cnn(const ClassifierConfig& cfg, std::size_t grid_side, const std::string& name, Rng& init) {
  validate(cfg);
  std::vector<LayerSpec> layers = {
      LayerSpec::conv2d(cfg.filters, cfg.kernel_h, cfg.kernel_w, 1),
      LayerSpec::relu(),
      LayerSpec::maxpool2d(cfg.pool_h, cfg.pool_w),
      LayerSpec::dropout(cfg.dropout),
      LayerSpec::flatten(),
  };
  append_head(layers, cfg);
  Classifier c{ClassifierKind::cnn, Sequential(name, {grid_side, grid_side, 1}, layers, init)};

  // Valid conv, then floor division by the pool window.
  const std::size_t ch = grid_side - cfg.kernel_h + 1, cw = grid_side - cfg.kernel_w + 1;
  const std::vector<Shape> expected = {{grid_side, grid_side, 1},
                                       {ch, cw, cfg.filters},
                                       {ch / cfg.pool_h, cw / cfg.pool_w, cfg.filters},
                                       {(ch / cfg.pool_h) * (cw / cfg.pool_w) * cfg.filters}};
  const auto actual = cnn_shape_chain(c);
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (actual[i] != expected[i])
      throw dimension_error(name + ": shape chain stage " + std::to_string(i) + " is " + shape_to_string(actual[i]) +
                            ", expected " + shape_to_string(expected[i]));
  return c;
}

Classifier build_cnn(const ClassifierConfig& cfg, std::size_t grid_side, const std::string& name) {
  Rng init = Rng(cfg.seed).fork(kInitStream);
  return build_cnn(cfg, grid_side, name, init);
}

std::vector<Shape> cnn_shape_chain(const Classifier& cnn) {
  const auto& layers = cnn.net.layers();
  const auto& shapes = cnn.net.shapes();
  std::vector<Shape> chain = {shapes.front()};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto k = layers[i].kind;
    if (k == LayerKind::conv2d || k == LayerKind::maxpool2d || k == LayerKind::flatten) chain.push_back(shapes[i + 1]);
    if (k == LayerKind::flatten) break;
  }
  if (chain.size() != 4) throw dimension_error(cnn.net.name() + ": not a conv/pool/flatten network");
  return chain;
}

Tensor label_column(std::span<const int> y) {
  if (y.empty()) throw argument_error("labels: empty label vector");
  Tensor t({y.size(), 1});
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0 && y[i] != 1)
      throw argument_error("labels: row " + std::to_string(i) + " has label " + std::to_string(y[i]));
    t[i] = static_cast<double>(y[i]);
  }
  return t;
}

ClassifierTraining train_classifier(Classifier model, const Tensor& X, std::span<const int> y,
                                    const ClassifierConfig& cfg) {
  validate(cfg);
  if (X.dim(0) != y.size())
    throw dimension_error("train_classifier: " + std::to_string(X.dim(0)) + " rows but " + std::to_string(y.size()) +
                          " labels");
  const Tensor Y = label_column(y);
  ClassifierTraining out{std::move(model), {}};
  Adam opt(out.model.net.parameters(), AdamOptions{.lr = cfg.lr});
  Rng shuffle = Rng(cfg.seed).fork(kShuffleStream);
  Rng noise = Rng(cfg.seed).fork(kNoiseStream);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochMeter meter;
    const auto order = shuffled_indices(y.size(), shuffle);
    const auto batches = make_batches(order, cfg.batch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      Tape tape;
      opt.zero_grad();
      Tensor p = out.model.net.forward(take_rows(X, batches[b]), {&tape, true, &noise});
      Tensor loss = ops::bce(&tape, p, take_rows(Y, batches[b]));
      check_loss(loss.item(), out.model.net.name(), epoch, b);
      tape.backward(loss);
      opt.step();
      meter.add({loss.item(), 0.0, 0.0, 0.0, loss.item()}, batches[b].size());
    }
    out.history.push_back(meter.mean());
  }
  for (const auto& p : out.model.net.named_parameters()) check_finite(p.tensor, p.name);
  return out;
}

Prediction threshold_probabilities(const Tensor& probabilities, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw argument_error("threshold must be in (0, 1)");
  Prediction out;
  out.probability.assign(probabilities.values().begin(), probabilities.values().end());
  out.label.reserve(out.probability.size());
  for (double p : out.probability) out.label.push_back(p >= threshold ? 1 : 0);
  return out;
}

Prediction predict(const Classifier& model, const Tensor& X, double threshold) {
  return threshold_probabilities(model.net.forward(X, {}), threshold);
}

} // namespace tabdl
