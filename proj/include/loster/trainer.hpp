#pragma once

#include <cstdint>
#include <vector>

#include "loster/augment.hpp"
#include "loster/concrete.hpp"
#include "loster/contrastive.hpp"
#include "loster/dataio.hpp"
#include "loster/densenet.hpp"
#include "loster/rng.hpp"

namespace loster {

struct TrainConfig {
  std::size_t pretrain_epochs = 50;
  double pretrain_lr = 1e-3;   // Adam
  double joint_lr = 1e-2;      // SGD
  double lr_decay = 0.1;       // applied every lr_decay_every epochs
  std::size_t lr_decay_every = 5;
  double tau0 = 10.0;
  double beta = 0.65;
  double tau_floor = 0.01;
  double tau_instance = 1.0;
  double tau_cluster = 1.0;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 100;
  double stop_fraction = 0.001;  // stop when fewer labels than this change
  double sigma = 1.0;
  std::uint64_t seed = 42;
  bool exclude_self = false;  // conventional NT-Xent denominator variant
  int lloyd_iterations = 10;  // refinement after k-means++ seeding
  // Joint-phase global gradient-norm ceiling; 0 disables. Plain SGD at the
  // published rate needs it during the first epochs, after which it
  // disengages and the step is exactly -lr * grad.
  double clip_norm = 5.0;

  void validate() const;
};

// Temperature schedule: tau(epoch) = max(tau0 * beta^epoch, tau_floor).
double anneal_tau(std::size_t epoch, double tau0, double beta, double tau_floor);

// Joint-phase step size: joint_lr * lr_decay^(epoch / lr_decay_every).
double lr_at(std::size_t epoch, const TrainConfig& cfg);

// Minimizes the single-view reconstruction loss with Adam for
// cfg.pretrain_epochs epochs. Appends the per-epoch mean loss to
// epoch_losses when given. Aborts with a diagnostic on non-finite loss.
void pretrain_view(ViewModel& model, const DenseMatrix& data, const TrainConfig& cfg, Rng& rng,
                   std::vector<double>* epoch_losses = nullptr);

// Full-dataset hard labels from the original view: argmax of the RBF
// assignment probabilities, which is the nearest-centroid rule.
std::vector<int> final_assignment(const ViewModel& model, const DenseMatrix& data, double sigma);

// Batched eval-mode encoding of a whole dataset.
DenseMatrix encode_dataset(const ViewModel& model, const DenseMatrix& data,
                           std::size_t batch_size = 256);

struct TrainState {
  ViewModel view_original;
  ViewModel view_augmented;
  std::size_t epoch = 0;
  double tau = 10.0;
  std::vector<int> labels;  // previous full-dataset assignment
  std::vector<EpochLogRow> history;
};

// Both views pretrained and centroids initialized; labels seeded from the
// initial centroids so max_epochs = 0 returns the k-means++ assignment.
TrainState make_train_state(ViewModel view_original, ViewModel view_augmented,
                            const DenseMatrix& data, const TrainConfig& cfg);

// The joint phase: one SGD step per batch on both views' weights and both
// centroid matrices under rec + kmeans + instance + cluster, with per-epoch
// temperature annealing and learning-rate decay. Stops when the fraction of
// samples changing cluster between consecutive epochs drops below
// cfg.stop_fraction, or at cfg.max_epochs.
void joint_train(TrainState& state, const DenseMatrix& data, const DenseMatrix& data_aug,
                 const TrainConfig& cfg, Rng& rng);

struct FitResult {
  std::vector<int> labels;
  std::vector<EpochLogRow> history;
  std::vector<double> pretrain_losses_original;
  std::vector<double> pretrain_losses_augmented;
  double pretrain_seconds = 0.0;
  double joint_seconds = 0.0;
  TrainState state;
};

// The whole pipeline on an already normalized dataset: augment once, pretrain
// each view, k-means++ centroid init in each latent space, joint phase,
// labels from the original view.
FitResult fit(const DenseMatrix& data, std::size_t k, const TrainConfig& cfg,
              AutoencoderConfig arch, const AugmentConfig& aug_cfg);

}  // namespace loster
