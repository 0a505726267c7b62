#include "loster/gradsuite.hpp"

#include <stdexcept>

#include "loster/augment.hpp"
#include "loster/concrete.hpp"
#include "loster/contrastive.hpp"
#include "loster/dataio.hpp"
#include "loster/densenet.hpp"
#include "loster/trainer.hpp"

namespace loster {

namespace {

// Identity with a deliberately wrong backward (gradient scaled by 1.01).
// Used only as a negative-control fixture.
Var faulty_identity(Tape& t, Var x) {
  const int ix = t.check(x);
  DenseMatrix value = t.value(x);
  Var o = t.emplace(std::move(value), t.requires_grad(x));
  t.set_backward(o, [id = o.id, ix](Tape& tp) {
    const DenseMatrix& g = tp.grad_buffer(id);
    DenseMatrix da(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.size(); ++i) da.data()[i] = 1.01 * g.data()[i];
    tp.accumulate(ix, da);
  });
  return o;
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(const GradSuiteConfig& cfg) {
  Rng rng(cfg.seed);

  // small two-view instance with frozen stochastic pieces
  TimeSeriesDataset dataset =
      gen_synthetic(std::max<std::size_t>(1, cfg.n / std::max<std::size_t>(1, cfg.k)), cfg.len,
                    std::max<std::size_t>(1, cfg.k), 0.1, rng);
  DenseMatrix data = dataset.series;
  if (data.rows() > cfg.n) {
    DenseMatrix trimmed(cfg.n, data.cols());
    for (std::size_t i = 0; i < cfg.n; ++i) {
      std::copy(data.row(i), data.row(i) + data.cols(), trimmed.row(i));
    }
    data = std::move(trimmed);
  }
  znorm_rows(data);
  AugmentConfig aug_cfg;
  aug_cfg.n_segments = 2;
  aug_cfg.warp_knots = 2;
  const DenseMatrix data_aug = augment_dataset(data, aug_cfg, cfg.seed + 1);

  AutoencoderConfig arch;
  arch.input_len = data.cols();
  arch.latent_dim = cfg.latent_dim;
  arch.encoder_blocks = cfg.encoder_blocks;
  arch.decoder_blocks = cfg.decoder_blocks;
  arch.dropout = 0.0;  // disabled for determinism of the loss closure
  ViewModel view_o = make_view_model(arch, ViewTag::kOriginal, rng);
  ViewModel view_a = make_view_model(arch, ViewTag::kAugmented, rng);

  DenseMatrix m0(cfg.k, cfg.latent_dim);
  DenseMatrix m1(cfg.k, cfg.latent_dim);
  for (std::size_t i = 0; i < m0.size(); ++i) m0.data()[i] = rng.normal(0.0, 0.5);
  for (std::size_t i = 0; i < m1.size(); ++i) m1.data()[i] = rng.normal(0.0, 0.5);
  view_o.centroids = Parameter("orig.centroids", std::move(m0));
  view_a.centroids = Parameter("aug.centroids", std::move(m1));

  const std::size_t n = data.rows();
  const DenseMatrix noise_o = sample_gumbel(n, cfg.k, rng);
  const DenseMatrix noise_a = sample_gumbel(n, cfg.k, rng);

  std::vector<Parameter*> params = view_o.all_parameters();
  for (Parameter* p : view_a.all_parameters()) params.push_back(p);

  enum Component { kRec, kKmeans, kInstance, kCluster };
  auto build = [&](Tape& t, Component which) -> Var {
    Var x = t.constant(data);
    Var x_aug = t.constant(data_aug);
    Var z = encode(t, x, view_o, Mode::kEval, nullptr);
    Var z_aug = encode(t, x_aug, view_a, Mode::kEval, nullptr);
    switch (which) {
      case kRec: {
        Var x_hat = decode(t, z, view_o, Mode::kEval, nullptr);
        Var x_aug_hat = decode(t, z_aug, view_a, Mode::kEval, nullptr);
        return add(t, reconstruction_loss(t, x, x_hat),
                   reconstruction_loss(t, x_aug, x_aug_hat));
      }
      case kKmeans: {
        Var m = t.param(view_o.centroids);
        Var m_aug = t.param(view_a.centroids);
        Var q = gumbel_softmax(t, assignment_probs(t, z, m, cfg.sigma), cfg.tau, noise_o);
        Var q_aug =
            gumbel_softmax(t, assignment_probs(t, z_aug, m_aug, cfg.sigma), cfg.tau, noise_a);
        return scale(t,
                     add(t, kmeans_loss(t, z, q, m), kmeans_loss(t, z_aug, q_aug, m_aug)), 0.5);
      }
      case kInstance:
        return instance_loss(t, z, z_aug, cfg.tau_instance);
      case kCluster: {
        Var m = t.param(view_o.centroids);
        Var m_aug = t.param(view_a.centroids);
        Var q = gumbel_softmax(t, assignment_probs(t, z, m, cfg.sigma), cfg.tau, noise_o);
        Var q_aug =
            gumbel_softmax(t, assignment_probs(t, z_aug, m_aug, cfg.sigma), cfg.tau, noise_a);
        return cluster_loss(t, q, q_aug, cfg.tau_cluster);
      }
    }
    throw std::logic_error("run_gradient_suite: unknown component");
  };

  auto wrap = [&](const std::string& name, Var loss, Tape& t) -> Var {
    return cfg.inject_fault == name ? faulty_identity(t, loss) : loss;
  };

  std::vector<GradSuiteEntry> entries;
  const std::vector<std::pair<std::string, Component>> singles = {
      {"reconstruction", kRec}, {"kmeans", kKmeans}, {"instance", kInstance}, {"cluster", kCluster}};
  for (const auto& [name, which] : singles) {
    LossFn fn = [&, which, name](Tape& t) { return wrap(name, build(t, which), t); };
    entries.push_back({name, finite_diff_check(fn, params, cfg.step)});
  }
  LossFn total_fn = [&](Tape& t) {
    Var total = add(t, add(t, build(t, kRec), build(t, kKmeans)),
                    add(t, build(t, kInstance), build(t, kCluster)));
    return wrap("total", total, t);
  };
  entries.push_back({"total", finite_diff_check(total_fn, params, cfg.step)});
  return entries;
}

}  // namespace loster
