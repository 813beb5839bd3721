#include "tabdl/joint.hpp"

#include <algorithm>
#include <cmath>

#include "tabdl/adam.hpp"
#include "tabdl/errors.hpp"
#include "tabdl/ops.hpp"

namespace tabdl {

namespace {

void validate_weights(double alpha, double beta, double lambda) {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(lambda >= 0.0))
    throw argument_error("joint: alpha, beta and lambda must be non-negative");
  if (alpha + beta <= 0.0) throw argument_error("joint: alpha and beta cannot both be zero");
}

} // namespace

void validate(const JointConfig& cfg) {
  validate_weights(cfg.alpha, cfg.beta, cfg.lambda);
  if (cfg.latent == 0) throw argument_error("joint: latent width must be positive");
  if (cfg.head == ClassifierKind::cnn && cfg.latent != kLatentWidth)
    throw argument_error("joint: a cnn head needs a " + std::to_string(kLatentWidth) + "-wide latent");
  if (cfg.epochs == 0 || cfg.batch == 0) throw argument_error("joint: epochs and batch must be positive");
  if (!(cfg.lr > 0.0)) throw argument_error("joint: lr must be positive");
  validate(cfg.head_config);
}

std::vector<Tensor> JointModel::parameters() const {
  auto out = autoencoder.parameters();
  auto h = head.net.parameters();
  out.insert(out.end(), h.begin(), h.end());
  return out;
}

std::vector<NamedTensor> JointModel::named_parameters() const {
  auto out = autoencoder.named_parameters();
  auto h = head.net.named_parameters();
  out.insert(out.end(), h.begin(), h.end());
  return out;
}

JointModel build_joint(const JointConfig& cfg, std::size_t input_width) {
  validate(cfg);
  Rng init = Rng(cfg.seed).fork(kInitStream);
  JointModel m;
  m.autoencoder = build_autoencoder("joint", input_width, cfg.hidden, cfg.latent, init);
  ClassifierConfig head_cfg = cfg.head_config;
  head_cfg.kind = cfg.head;
  m.head = cfg.head == ClassifierKind::cnn ? build_cnn(head_cfg, kGridSide, "joint.head", init)
                                           : build_mlp(head_cfg, cfg.latent, "joint.head", init);
  return m;
}

JointOutput joint_forward(const JointModel& model, const Tensor& x, const ForwardContext& ctx) {
  JointOutput out;
  out.latent = model.autoencoder.encoder.forward(x, ctx);
  out.reconstruction = model.autoencoder.decoder.forward(out.latent, ctx);
  Tensor head_in = out.latent;
  if (model.head.kind == ClassifierKind::cnn)
    head_in = ops::reshape(ctx.tape, out.latent, {x.dim(0), kGridSide, kGridSide, 1});
  out.probability = model.head.net.forward(head_in, ctx);
  return out;
}

JointLossParts joint_loss(Tape* tape, Tensor x, Tensor x_hat, Tensor latent, Tensor y, Tensor y_hat, double alpha,
                          double beta, double lambda) {
  validate_weights(alpha, beta, lambda);
  Tensor rec = ops::scale(tape, ops::mse(tape, x_hat, x), beta);
  Tensor cls = ops::scale(tape, ops::bce(tape, y_hat, y), alpha);
  Tensor sparse = ops::scale(tape, ops::mean_row_l1(tape, latent), lambda);
  JointLossParts parts;
  parts.reconstruction = rec.item();
  parts.classification = cls.item();
  parts.sparsity = sparse.item();
  parts.total = ops::add(tape, ops::add(tape, rec, cls), sparse);
  return parts;
}

JointLossParts joint_loss(Tape* tape, Tensor x, Tensor x_hat, Tensor latent, Tensor y, Tensor y_hat,
                          const JointConfig& cfg) {
  return joint_loss(tape, x, x_hat, latent, y, y_hat, cfg.alpha, cfg.beta, cfg.lambda);
}

JointTraining train_joint(JointModel model, const Tensor& X, std::span<const int> y, const JointConfig& cfg) {
  validate(cfg);
  if (X.rank() != 2 || X.dim(0) != y.size())
    throw dimension_error("train_joint: features " + shape_to_string(X.shape()) + " vs " + std::to_string(y.size()) +
                          " labels");
  const Tensor Y = label_column(y);
  JointTraining out{std::move(model), {}};
  Adam opt(out.model.parameters(), AdamOptions{.lr = cfg.lr});
  Rng shuffle = Rng(cfg.seed).fork(kShuffleStream);
  Rng noise = Rng(cfg.seed).fork(kNoiseStream);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochMeter meter;
    const auto order = shuffled_indices(y.size(), shuffle);
    const auto batches = make_batches(order, cfg.batch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      Tape tape;
      opt.zero_grad();
      Tensor x = take_rows(X, batches[b]);
      auto f = joint_forward(out.model, x, {&tape, true, &noise});
      auto loss = joint_loss(&tape, x, f.reconstruction, f.latent, take_rows(Y, batches[b]), f.probability, cfg);
      check_loss(loss.total.item(), "joint", epoch, b);
      tape.backward(loss.total);
      opt.step();
      meter.add({loss.total.item(), loss.reconstruction, 0.0, loss.sparsity, loss.classification}, batches[b].size());
    }
    out.history.push_back(meter.mean());
  }
  for (const auto& p : out.model.named_parameters()) check_finite(p.tensor, p.name);
  return out;
}

Prediction predict_joint(const JointModel& model, const Tensor& X, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw argument_error("predict: threshold must be in (0, 1)");
  return threshold_probabilities(joint_forward(model, X, {}).probability, threshold);
}

} // namespace tabdl
