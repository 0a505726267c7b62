#include "loster/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "loster/optim.hpp"

namespace loster {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

DenseMatrix gather_rows(const DenseMatrix& data, const std::vector<std::size_t>& idx,
                        std::size_t begin, std::size_t end) {
  DenseMatrix out(end - begin, data.cols());
  for (std::size_t i = begin; i < end; ++i) {
    std::copy(data.row(idx[i]), data.row(idx[i]) + data.cols(), out.row(i - begin));
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (pretrain_lr <= 0.0 || joint_lr <= 0.0) {
    throw std::invalid_argument("TrainConfig: learning rates must be positive");
  }
  if (lr_decay <= 0.0 || lr_decay_every == 0) {
    throw std::invalid_argument("TrainConfig: bad learning-rate decay");
  }
  if (tau0 <= 0.0 || beta <= 0.0 || tau_floor <= 0.0) {
    throw std::invalid_argument("TrainConfig: temperatures must be positive");
  }
  if (tau_instance <= 0.0 || tau_cluster <= 0.0) {
    throw std::invalid_argument("TrainConfig: contrastive temperatures must be positive");
  }
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (stop_fraction <= 0.0 || stop_fraction >= 1.0) {
    throw std::invalid_argument("TrainConfig: stop_fraction must lie in (0, 1)");
  }
  if (sigma <= 0.0) throw std::invalid_argument("TrainConfig: sigma must be positive");
  if (lloyd_iterations < 0) throw std::invalid_argument("TrainConfig: lloyd_iterations >= 0");
}

double anneal_tau(std::size_t epoch, double tau0, double beta, double tau_floor) {
  return std::max(tau0 * std::pow(beta, static_cast<double>(epoch)), tau_floor);
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.joint_lr * std::pow(cfg.lr_decay, static_cast<double>(epoch / cfg.lr_decay_every));
}

void pretrain_view(ViewModel& model, const DenseMatrix& data, const TrainConfig& cfg, Rng& rng,
                   std::vector<double>* epoch_losses) {
  cfg.validate();
  if (data.rows() == 0) throw std::invalid_argument("pretrain_view: empty dataset");
  const std::size_t n = data.rows();
  const std::vector<Parameter*> params = model.parameters();
  AdamOptimizer adam(params, cfg.pretrain_lr);

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    rng.shuffle(idx.begin(), idx.end());
    double loss_sum = 0.0;
    for (std::size_t begin = 0, batch = 0; begin < n; begin += cfg.batch_size, ++batch) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      Tape tape;
      Var x = tape.constant(gather_rows(data, idx, begin, end));
      Var z = encode(tape, x, model, Mode::kTrain, &rng);
      Var x_hat = decode(tape, z, model, Mode::kTrain, &rng);
      Var loss = reconstruction_loss(tape, x, x_hat);
      const double value = tape.scalar(loss);
      if (!std::isfinite(value)) {
        throw std::runtime_error("pretrain_view: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " + std::to_string(batch));
      }
      loss_sum += value * static_cast<double>(end - begin);
      for (Parameter* p : params) p->zero_grad();
      tape.backward(loss);
      adam.step();
    }
    if (epoch_losses) epoch_losses->push_back(loss_sum / static_cast<double>(n));
  }
}

DenseMatrix encode_dataset(const ViewModel& model, const DenseMatrix& data,
                           std::size_t batch_size) {
  ViewModel& mutable_model = const_cast<ViewModel&>(model);
  const std::size_t n = data.rows();
  DenseMatrix out(n, model.cfg.latent_dim);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + batch_size);
    Tape tape;
    Var x = tape.constant(gather_rows(data, idx, begin, end));
    Var z = encode(tape, x, mutable_model, Mode::kEval, nullptr);
    const DenseMatrix& vz = tape.value(z);
    for (std::size_t i = begin; i < end; ++i) {
      std::copy(vz.row(i - begin), vz.row(i - begin) + vz.cols(), out.row(i));
    }
  }
  return out;
}

std::vector<int> final_assignment(const ViewModel& model, const DenseMatrix& data, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("final_assignment: sigma must be positive");
  if (model.centroids.value.empty()) {
    throw std::logic_error("final_assignment: centroids not initialized");
  }
  const DenseMatrix z = encode_dataset(model, data);
  // argmax of the RBF probabilities equals the nearest-centroid rule
  return nearest_centroid_labels(z, model.centroids.value);
}

TrainState make_train_state(ViewModel view_original, ViewModel view_augmented,
                            const DenseMatrix& data, const TrainConfig& cfg) {
  TrainState state;
  state.view_original = std::move(view_original);
  state.view_augmented = std::move(view_augmented);
  state.tau = cfg.tau0;
  state.labels = final_assignment(state.view_original, data, cfg.sigma);
  return state;
}

void joint_train(TrainState& state, const DenseMatrix& data, const DenseMatrix& data_aug,
                 const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t n = data.rows();
  if (n == 0) throw std::invalid_argument("joint_train: empty dataset");
  if (!data.same_shape(data_aug)) {
    throw ShapeError("joint_train: views " + shape_string(data) + " vs " + shape_string(data_aug));
  }
  ViewModel& orig = state.view_original;
  ViewModel& aug = state.view_augmented;
  if (orig.centroids.value.empty() || aug.centroids.value.empty()) {
    throw std::logic_error("joint_train: centroids not initialized");
  }
  const std::size_t k = orig.centroids.value.rows();
  if (k > n) throw std::invalid_argument("joint_train: k exceeds dataset size");

  std::vector<Parameter*> params = orig.all_parameters();
  for (Parameter* p : aug.all_parameters()) params.push_back(p);

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);

  for (; state.epoch < cfg.max_epochs; ++state.epoch) {
    const auto start = Clock::now();
    const std::size_t epoch = state.epoch;
    state.tau = anneal_tau(epoch, cfg.tau0, cfg.beta, cfg.tau_floor);
    const double lr = lr_at(epoch, cfg);

    rng.shuffle(idx.begin(), idx.end());
    double sum_rec = 0.0, sum_kmeans = 0.0, sum_instance = 0.0, sum_cluster = 0.0;
    for (std::size_t begin = 0, batch = 0; begin < n; begin += cfg.batch_size, ++batch) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      const std::size_t bn = end - begin;
      Tape tape;
      Var x = tape.constant(gather_rows(data, idx, begin, end));
      Var x_aug = tape.constant(gather_rows(data_aug, idx, begin, end));

      Var z = encode(tape, x, orig, Mode::kTrain, &rng);
      Var x_hat = decode(tape, z, orig, Mode::kTrain, &rng);
      Var z_aug = encode(tape, x_aug, aug, Mode::kTrain, &rng);
      Var x_aug_hat = decode(tape, z_aug, aug, Mode::kTrain, &rng);
      Var loss_rec = add(tape, reconstruction_loss(tape, x, x_hat),
                         reconstruction_loss(tape, x_aug, x_aug_hat));

      Var m = tape.param(orig.centroids);
      Var m_aug = tape.param(aug.centroids);
      Var probs = assignment_probs(tape, z, m, cfg.sigma);
      Var probs_aug = assignment_probs(tape, z_aug, m_aug, cfg.sigma);
      Var q = gumbel_softmax(tape, probs, state.tau, sample_gumbel(bn, k, rng));
      Var q_aug = gumbel_softmax(tape, probs_aug, state.tau, sample_gumbel(bn, k, rng));
      Var q_hard = straight_through(tape, q);
      Var q_aug_hard = straight_through(tape, q_aug);
      Var loss_kmeans = scale(tape,
                              add(tape, kmeans_loss(tape, z, q_hard, m),
                                  kmeans_loss(tape, z_aug, q_aug_hard, m_aug)),
                              0.5);

      Var loss_instance = instance_loss(tape, z, z_aug, cfg.tau_instance, cfg.exclude_self);
      Var loss_cluster = cluster_loss(tape, q, q_aug, cfg.tau_cluster);

      Var total = add(tape, add(tape, loss_rec, loss_kmeans),
                      add(tape, loss_instance, loss_cluster));
      const double total_value = tape.scalar(total);
      if (!std::isfinite(total_value)) {
        throw std::runtime_error(
            "joint_train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
            std::to_string(batch) + " (rec=" + std::to_string(tape.scalar(loss_rec)) +
            ", kmeans=" + std::to_string(tape.scalar(loss_kmeans)) +
            ", instance=" + std::to_string(tape.scalar(loss_instance)) +
            ", cluster=" + std::to_string(tape.scalar(loss_cluster)) + ")");
      }
      const double weight = static_cast<double>(bn);
      sum_rec += tape.scalar(loss_rec) * weight;
      sum_kmeans += tape.scalar(loss_kmeans) * weight;
      sum_instance += tape.scalar(loss_instance) * weight;
      sum_cluster += tape.scalar(loss_cluster) * weight;

      for (Parameter* p : params) p->zero_grad();
      tape.backward(total);
      clip_gradient_norm(params, cfg.clip_norm);
      sgd_step(params, lr);
    }

    const std::vector<int> labels = final_assignment(orig, data, cfg.sigma);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] != state.labels[i]) ++changed;
    }
    const double changed_fraction = static_cast<double>(changed) / static_cast<double>(n);
    state.labels = labels;

    EpochLogRow row;
    row.epoch = epoch;
    row.tau = state.tau;
    row.lr = lr;
    row.loss_rec = sum_rec / static_cast<double>(n);
    row.loss_kmeans = sum_kmeans / static_cast<double>(n);
    row.loss_instance = sum_instance / static_cast<double>(n);
    row.loss_cluster = sum_cluster / static_cast<double>(n);
    row.loss_total = row.loss_rec + row.loss_kmeans + row.loss_instance + row.loss_cluster;
    row.changed_fraction = changed_fraction;
    row.seconds = seconds_since(start);
    state.history.push_back(row);

    if (changed_fraction < cfg.stop_fraction) {
      ++state.epoch;
      break;
    }
  }
}

FitResult fit(const DenseMatrix& data, std::size_t k, const TrainConfig& cfg,
              AutoencoderConfig arch, const AugmentConfig& aug_cfg) {
  cfg.validate();
  if (k > data.rows()) throw std::invalid_argument("fit: k exceeds dataset size");
  arch.input_len = data.cols();
  arch.validate();

  Rng rng(cfg.seed);
  const DenseMatrix data_aug = augment_dataset(data, aug_cfg, rng.derive(0x61756731u).engine()());

  FitResult result;
  const auto pretrain_start = Clock::now();
  ViewModel view_o = make_view_model(arch, ViewTag::kOriginal, rng);
  ViewModel view_a = make_view_model(arch, ViewTag::kAugmented, rng);
  pretrain_view(view_o, data, cfg, rng, &result.pretrain_losses_original);
  pretrain_view(view_a, data_aug, cfg, rng, &result.pretrain_losses_augmented);
  result.pretrain_seconds = seconds_since(pretrain_start);

  const auto joint_start = Clock::now();
  const DenseMatrix z = encode_dataset(view_o, data);
  const DenseMatrix z_aug = encode_dataset(view_a, data_aug);
  view_o.centroids = Parameter("orig.centroids", kmeanspp_init(z, k, rng, cfg.lloyd_iterations));
  view_a.centroids = Parameter("aug.centroids", kmeanspp_init(z_aug, k, rng, cfg.lloyd_iterations));

  TrainState state = make_train_state(std::move(view_o), std::move(view_a), data, cfg);
  joint_train(state, data, data_aug, cfg, rng);
  result.joint_seconds = seconds_since(joint_start);

  result.labels = state.labels;
  result.history = state.history;
  result.state = std::move(state);
  return result;
}

}  // namespace loster
