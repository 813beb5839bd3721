#include "tabdl/sae.hpp"

#include <algorithm>

#include "tabdl/adam.hpp"
#include "tabdl/errors.hpp"
#include "tabdl/ops.hpp"

namespace tabdl {

void validate(const SaeConfig& cfg) {
  if (!(cfg.lambda >= 0.0)) throw argument_error("sae: lambda must be non-negative, got " + std::to_string(cfg.lambda));
  if (cfg.latent == 0) throw argument_error("sae: latent width must be positive");
  if (std::find(cfg.hidden.begin(), cfg.hidden.end(), 0u) != cfg.hidden.end())
    throw argument_error("sae: hidden widths must be positive");
  if (cfg.epochs == 0 || cfg.batch == 0) throw argument_error("sae: epochs and batch must be positive");
  if (!(cfg.lr > 0.0)) throw argument_error("sae: lr must be positive");
}

std::vector<Tensor> SaeModel::parameters() const {
  auto out = encoder.parameters();
  auto d = decoder.parameters();
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

std::vector<NamedTensor> SaeModel::named_parameters() const {
  auto out = encoder.named_parameters();
  auto d = decoder.named_parameters();
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

SaeModel build_autoencoder(const std::string& prefix, std::size_t input_width, const std::vector<std::size_t>& hidden,
                           std::size_t latent, Rng& init) {
  std::vector<LayerSpec> enc, dec;
  for (auto w : hidden) {
    enc.push_back(LayerSpec::dense(w));
    enc.push_back(LayerSpec::relu());
  }
  enc.push_back(LayerSpec::dense(latent));
  enc.push_back(LayerSpec::relu());
  for (auto it = hidden.rbegin(); it != hidden.rend(); ++it) {
    dec.push_back(LayerSpec::dense(*it));
    dec.push_back(LayerSpec::relu());
  }
  dec.push_back(LayerSpec::dense(input_width));
  dec.push_back(LayerSpec::sigmoid());
  return {Sequential(prefix + ".encoder", {input_width}, enc, init),
          Sequential(prefix + ".decoder", {latent}, dec, init)};
}

SaeModel build_sae(const SaeConfig& cfg, std::size_t input_width) {
  validate(cfg);
  Rng init = Rng(cfg.seed).fork(kInitStream);
  return build_autoencoder("sae", input_width, cfg.hidden, cfg.latent, init);
}

SaeLossParts sae_loss(Tape* tape, Tensor x, Tensor x_hat, Tensor latent, double lambda) {
  if (!(lambda >= 0.0)) throw argument_error("sae_loss: lambda must be non-negative, got " + std::to_string(lambda));
  Tensor rec = ops::mse(tape, x_hat, x);
  Tensor sparse = ops::scale(tape, ops::mean_row_l1(tape, latent), lambda);
  SaeLossParts parts;
  parts.reconstruction = rec.item();
  parts.sparsity = sparse.item();
  parts.total = ops::add(tape, rec, sparse);
  return parts;
}

namespace {

std::vector<Tensor> weight_matrices(const SaeModel& m) {
  std::vector<Tensor> out;
  for (const auto& p : m.named_parameters())
    if (p.name.ends_with(".weight")) out.push_back(p.tensor);
  return out;
}

} // namespace

SaeTraining train_sae(const Tensor& X, const SaeConfig& cfg) {
  validate(cfg);
  if (X.rank() != 2) throw dimension_error("train_sae: expected an N x D matrix, got " + shape_to_string(X.shape()));
  SaeTraining out{build_sae(cfg, X.dim(1)), {}};
  Adam opt(out.model.parameters(), AdamOptions{.lr = cfg.lr});
  Rng shuffle = Rng(cfg.seed).fork(kShuffleStream);
  const auto weights = weight_matrices(out.model);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochMeter meter;
    const auto order = shuffled_indices(X.dim(0), shuffle);
    const auto batches = make_batches(order, cfg.batch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      Tape tape;
      opt.zero_grad();
      const ForwardContext ctx{&tape, true, nullptr};
      Tensor x = take_rows(X, batches[b]);
      Tensor latent = out.model.encoder.forward(x, ctx);
      Tensor x_hat = out.model.decoder.forward(latent, ctx);
      Tensor total;
      double rec = 0.0, sparse = 0.0;
      if (cfg.target == SparsityTarget::activations) {
        auto parts = sae_loss(&tape, x, x_hat, latent, cfg.lambda);
        total = parts.total;
        rec = parts.reconstruction;
        sparse = parts.sparsity;
      } else {
        Tensor r = ops::mse(&tape, x_hat, x);
        Tensor s = ops::scale(&tape, ops::l1_penalty(&tape, weights), cfg.lambda);
        rec = r.item();
        sparse = s.item();
        total = ops::add(&tape, r, s);
      }
      check_loss(total.item(), "sae", epoch, b);
      tape.backward(total);
      opt.step();
      meter.add({total.item(), rec, 0.0, sparse, 0.0}, batches[b].size());
    }
    out.history.push_back(meter.mean());
  }
  for (const auto& p : out.model.named_parameters()) check_finite(p.tensor, p.name);
  return out;
}

Tensor encode_features(const SaeModel& model, const Tensor& X) { return model.encoder.forward(X, {}); }

double mean_latent_l1(const SaeModel& model, const Tensor& X) {
  return ops::mean_row_l1(nullptr, encode_features(model, X)).item();
}

Tensor reshape_to_grid(const Tensor& features) {
  if (features.rank() != 2 || features.dim(1) != kLatentWidth)
    throw dimension_error("reshape_to_grid: expected N x " + std::to_string(kLatentWidth) + ", got " +
                          shape_to_string(features.shape()));
  return features.reshaped({features.dim(0), kGridSide, kGridSide, 1});
}

Tensor flatten_grid(const Tensor& grid) {
  if (grid.rank() != 4 || grid.dim(1) != kGridSide || grid.dim(2) != kGridSide || grid.dim(3) != 1)
    throw dimension_error("flatten_grid: expected N x 20 x 20 x 1, got " + shape_to_string(grid.shape()));
  return grid.reshaped({grid.dim(0), kLatentWidth});
}

} // namespace tabdl
