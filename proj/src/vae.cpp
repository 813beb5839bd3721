#include "tabdl/vae.hpp"

#include <algorithm>
#include <cmath>

#include "tabdl/adam.hpp"
#include "tabdl/errors.hpp"
#include "tabdl/ops.hpp"

namespace tabdl {

void validate(const VaeConfig& cfg) {
  if (cfg.latent_dim == 0) throw argument_error("vae: latent_dim must be at least 1");
  if (cfg.hidden.empty()) throw argument_error("vae: at least one hidden layer is required");
  if (std::find(cfg.hidden.begin(), cfg.hidden.end(), 0u) != cfg.hidden.end())
    throw argument_error("vae: hidden widths must be positive");
  if (cfg.epochs == 0 || cfg.batch == 0) throw argument_error("vae: epochs and batch must be positive");
  if (!(cfg.lr > 0.0)) throw argument_error("vae: lr must be positive");
  if (!(cfg.kl_weight >= 0.0)) throw argument_error("vae: kl_weight must be non-negative");
}

std::vector<Tensor> VaeModel::parameters() const {
  std::vector<Tensor> out;
  for (const auto* s : {&encoder, &mu_head, &logvar_head, &decoder}) {
    auto p = s->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<NamedTensor> VaeModel::named_parameters() const {
  std::vector<NamedTensor> out;
  for (const auto* s : {&encoder, &mu_head, &logvar_head, &decoder}) {
    auto p = s->named_parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

VaeModel build_vae(const VaeConfig& cfg, std::size_t input_width) {
  validate(cfg);
  Rng init = Rng(cfg.seed).fork(kInitStream);

  std::vector<LayerSpec> enc, dec;
  for (auto w : cfg.hidden) {
    enc.push_back(LayerSpec::dense(w));
    enc.push_back(LayerSpec::relu());
  }
  for (auto it = cfg.hidden.rbegin(); it != cfg.hidden.rend(); ++it) {
    dec.push_back(LayerSpec::dense(*it));
    dec.push_back(LayerSpec::relu());
  }
  dec.push_back(LayerSpec::dense(input_width));
  dec.push_back(LayerSpec::sigmoid());

  VaeModel m;
  m.encoder = Sequential("vae.encoder", {input_width}, enc, init);
  const Shape features = m.encoder.output_shape();
  m.mu_head = Sequential("vae.mu", features, {LayerSpec::dense(cfg.latent_dim)}, init);
  m.logvar_head = Sequential("vae.logvar", features, {LayerSpec::dense(cfg.latent_dim)}, init);
  m.decoder = Sequential("vae.decoder", {cfg.latent_dim}, dec, init);
  return m;
}

Tensor reparameterize(Tape* tape, Tensor mu, Tensor log_var, Rng& rng) {
  if (mu.shape() != log_var.shape())
    throw dimension_error("reparameterize: mu " + shape_to_string(mu.shape()) + " vs log_var " +
                          shape_to_string(log_var.shape()));
  auto eps = std::make_shared<std::vector<double>>(mu.size());
  for (auto& e : *eps) e = rng.normal();
  Tensor z(mu.shape());
  auto mv = mu.values();
  auto lv = log_var.values();
  auto zv = z.values();
  for (std::size_t i = 0; i < zv.size(); ++i) zv[i] = mv[i] + std::exp(0.5 * lv[i]) * (*eps)[i];

  if (tape) {
    tape->record({mu, log_var}, z, [mu, log_var, z, eps]() mutable {
      auto gz = std::as_const(z).grad();
      if (mu.requires_grad()) {
        auto gm = mu.grad();
        for (std::size_t i = 0; i < gm.size(); ++i) gm[i] += gz[i];
      }
      if (log_var.requires_grad()) {
        auto gl = log_var.grad();
        auto lv = log_var.values();
        for (std::size_t i = 0; i < gl.size(); ++i) gl[i] += gz[i] * 0.5 * std::exp(0.5 * lv[i]) * (*eps)[i];
      }
    });
  }
  return z;
}

VaeLossParts vae_loss(Tape* tape, Tensor x, Tensor x_hat, Tensor mu, Tensor log_var, double kl_weight) {
  if (!(kl_weight >= 0.0)) throw argument_error("vae_loss: kl_weight must be non-negative");
  Tensor rec = ops::mse(tape, x_hat, x);
  Tensor kl = ops::scale(tape, ops::kl_standard_normal_logvar(tape, mu, log_var), kl_weight);
  VaeLossParts parts;
  parts.reconstruction = rec.item();
  parts.kl = kl.item();
  parts.total = ops::add(tape, rec, kl);
  return parts;
}

namespace {

struct VaeForward {
  Tensor mu, log_var, z, x_hat;
};

VaeForward run_vae(const VaeModel& m, const Tensor& x, Tape* tape, Rng& noise) {
  const ForwardContext ctx{tape, tape != nullptr, nullptr};
  VaeForward f;
  Tensor h = m.encoder.forward(x, ctx);
  f.mu = m.mu_head.forward(h, ctx);
  f.log_var = m.logvar_head.forward(h, ctx);
  f.z = reparameterize(tape, f.mu, f.log_var, noise);
  f.x_hat = m.decoder.forward(f.z, ctx);
  return f;
}

} // namespace

VaeTraining train_vae(const data::Dataset& rows, const VaeConfig& cfg) {
  validate(cfg);
  if (rows.rows() < 2 * cfg.batch)
    throw argument_error("train_vae: need at least " + std::to_string(2 * cfg.batch) + " rows for batch " +
                         std::to_string(cfg.batch) + ", got " + std::to_string(rows.rows()));
  VaeTraining out{build_vae(cfg, rows.width()), {}};
  Adam opt(out.model.parameters(), AdamOptions{.lr = cfg.lr});
  Rng shuffle = Rng(cfg.seed).fork(kShuffleStream);
  Rng noise = Rng(cfg.seed).fork(kNoiseStream);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochMeter meter;
    const auto order = shuffled_indices(rows.rows(), shuffle);
    const auto batches = make_batches(order, cfg.batch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      Tape tape;
      opt.zero_grad();
      Tensor x = take_rows(rows.X, batches[b]);
      auto f = run_vae(out.model, x, &tape, noise);
      auto loss = vae_loss(&tape, x, f.x_hat, f.mu, f.log_var, cfg.kl_weight);
      check_loss(loss.total.item(), "vae", epoch, b);
      tape.backward(loss.total);
      opt.step();
      meter.add({loss.total.item(), loss.reconstruction, loss.kl, 0.0, 0.0}, batches[b].size());
    }
    out.history.push_back(meter.mean());
  }
  for (const auto& p : out.model.named_parameters()) check_finite(p.tensor, p.name);
  return out;
}

data::Dataset generate_synthetic(const VaeModel& model, const data::Dataset& seeds, std::int64_t count, Rng& rng) {
  if (count < 0) throw argument_error("generate_synthetic: count must be non-negative, got " + std::to_string(count));
  data::Dataset out;
  if (count == 0) return out;
  if (seeds.rows() == 0) throw argument_error("generate_synthetic: no seed rows");
  const int label = seeds.y.front();
  if (std::any_of(seeds.y.begin(), seeds.y.end(), [&](int y) { return y != label; }))
    throw argument_error("generate_synthetic: seed rows must share one label");

  std::vector<std::size_t> rows(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i % seeds.rows();
  const Tensor x = take_rows(seeds.X, rows);
  auto f = run_vae(model, x, nullptr, rng);
  for (auto& v : f.x_hat.values()) v = std::clamp(v, 0.0, 1.0);

  out.X = f.x_hat;
  out.y.assign(rows.size(), label);
  out.synthetic.assign(rows.size(), true);
  return out;
}

std::string to_string(BalancePolicy policy) { return policy == BalancePolicy::exact ? "exact" : "one_pass"; }

BalancePolicy parse_balance_policy(std::string_view text) {
  if (text == "one_pass") return BalancePolicy::one_pass;
  if (text == "exact") return BalancePolicy::exact;
  throw config_error("unknown balance policy '" + std::string(text) + "' (expected one_pass or exact)");
}

std::size_t synthetic_rows_needed(std::size_t majority, std::size_t minority, BalancePolicy policy) {
  if (minority >= majority) return 0;
  if (minority == 0) throw argument_error("balance: the minority class has no rows to seed from");
  const std::size_t gap = majority - minority;
  if (policy == BalancePolicy::exact) return gap;
  const std::size_t passes = (gap + minority - 1) / minority;
  return passes * minority;
}

data::Dataset balance_dataset(const data::Dataset& train, const VaeModel& model, Rng& rng, BalancePolicy policy) {
  const std::size_t zeros = train.count_label(0), ones = train.count_label(1);
  if (zeros == ones) return train;
  const int minority_label = zeros < ones ? 0 : 1;

  std::vector<std::size_t> seed_rows;
  for (std::size_t i = 0; i < train.rows(); ++i)
    if (train.y[i] == minority_label && !train.synthetic[i]) seed_rows.push_back(i);
  const std::size_t needed = synthetic_rows_needed(std::max(zeros, ones), std::min(zeros, ones), policy);
  if (needed > 0 && seed_rows.empty()) throw argument_error("balance: no real minority rows to seed from");
  const data::Dataset seeds = data::subset(train, seed_rows);
  return data::concat(train, generate_synthetic(model, seeds, static_cast<std::int64_t>(needed), rng));
}

} // namespace tabdl
