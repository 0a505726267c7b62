#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "loster/metrics.hpp"
#include "loster/optim.hpp"
#include "loster/trainer.hpp"

using namespace loster;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.pretrain_epochs = 3;
  cfg.batch_size = 16;
  cfg.max_epochs = 4;
  cfg.seed = 5;
  return cfg;
}

AutoencoderConfig tiny_arch(std::size_t len) {
  AutoencoderConfig arch;
  arch.input_len = len;
  arch.latent_dim = 4;
  arch.encoder_blocks = 2;
  arch.decoder_blocks = 2;
  return arch;
}

DenseMatrix toy_data(std::size_t n, std::size_t len, std::uint64_t seed) {
  Rng rng(seed);
  TimeSeriesDataset d = gen_synthetic(n / 2, len, 2, 0.1, rng);
  znorm_rows(d.series);
  return d.series;
}

}  // namespace

TEST_CASE("anneal_tau follows the published schedule") {
  CHECK(anneal_tau(0, 10.0, 0.65, 0.01) == doctest::Approx(10.0));
  CHECK(anneal_tau(1, 10.0, 0.65, 0.01) == doctest::Approx(6.5));
  CHECK(anneal_tau(16, 10.0, 0.65, 0.01) > 0.01);
  for (std::size_t epoch = 17; epoch < 40; ++epoch) {
    CHECK(anneal_tau(epoch, 10.0, 0.65, 0.01) == doctest::Approx(0.01));
  }
  SUBCASE("non-increasing in the epoch") {
    double prev = 1e300;
    for (std::size_t epoch = 0; epoch < 60; ++epoch) {
      const double tau = anneal_tau(epoch, 10.0, 0.65, 0.01);
      CHECK(tau <= prev);
      prev = tau;
    }
  }
}

TEST_CASE("lr_at decays by 0.1 every 5 epochs") {
  TrainConfig cfg;
  CHECK(lr_at(0, cfg) == doctest::Approx(1e-2));
  CHECK(lr_at(4, cfg) == doctest::Approx(1e-2));
  CHECK(lr_at(5, cfg) == doctest::Approx(1e-3));
  CHECK(lr_at(12, cfg) == doctest::Approx(1e-4));
  SUBCASE("non-increasing in the epoch") {
    double prev = 1e300;
    for (std::size_t epoch = 0; epoch < 40; ++epoch) {
      const double lr = lr_at(epoch, cfg);
      CHECK(lr <= prev);
      prev = lr;
    }
  }
}

TEST_CASE("sgd_step moves each parameter by exactly -lr * grad") {
  Parameter p("p", DenseMatrix(2, 2, {1.0, 2.0, 3.0, 4.0}));
  p.grad = DenseMatrix(2, 2, {0.5, -0.25, 1.5, 0.0});
  const DenseMatrix before = p.value;
  sgd_step({&p}, 0.1);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(p.value.data()[i] ==
          doctest::Approx(before.data()[i] - 0.1 * p.grad.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("adam takes a first step of size lr per coordinate") {
  Parameter p("p", DenseMatrix(1, 2, {1.0, -1.0}));
  p.grad = DenseMatrix(1, 2, {0.3, -0.7});
  AdamOptimizer adam({&p}, 1e-3);
  adam.step();
  // bias-corrected first step is lr * g / (|g| + eps') ~ lr * sign(g)
  CHECK(p.value(0, 0) == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
  CHECK(p.value(0, 1) == doctest::Approx(-1.0 + 1e-3).epsilon(1e-6));
}

TEST_CASE("pretrain_view stated cases") {
  const DenseMatrix data = toy_data(24, 16, 7);
  SUBCASE("zero epochs leave the parameters unchanged") {
    TrainConfig cfg = tiny_config();
    cfg.pretrain_epochs = 0;
    Rng init_rng(1);
    ViewModel model = make_view_model(tiny_arch(16), ViewTag::kOriginal, init_rng);
    const DenseMatrix before = model.encoder[0].w_hidden.value;
    Rng rng(2);
    pretrain_view(model, data, cfg, rng);
    CHECK(model.encoder[0].w_hidden.value == before);
  }
  SUBCASE("fixed seeds give identical final parameters") {
    TrainConfig cfg = tiny_config();
    auto run = [&] {
      Rng init_rng(1);
      ViewModel model = make_view_model(tiny_arch(16), ViewTag::kOriginal, init_rng);
      Rng rng(2);
      pretrain_view(model, data, cfg, rng);
      return model.encoder[1].w_out.value;
    };
    CHECK(run() == run());
  }
  SUBCASE("the reconstruction loss drops on an easy dataset") {
    TrainConfig cfg = tiny_config();
    cfg.pretrain_epochs = 40;
    Rng init_rng(1);
    AutoencoderConfig arch = tiny_arch(16);
    arch.latent_dim = 8;
    ViewModel model = make_view_model(arch, ViewTag::kOriginal, init_rng);
    Rng rng(2);
    std::vector<double> losses;
    pretrain_view(model, data, cfg, rng, &losses);
    REQUIRE(losses.size() == 40);
    CHECK(losses.back() < 0.5 * losses.front());
  }
}

TEST_CASE("final_assignment stated cases") {
  Rng rng(9);
  AutoencoderConfig arch = tiny_arch(12);
  ViewModel model = make_view_model(arch, ViewTag::kOriginal, rng);
  const DenseMatrix data = toy_data(12, 12, 11);
  const DenseMatrix z = encode_dataset(model, data);

  DenseMatrix centroids(3, 4);
  for (std::size_t i = 0; i < centroids.size(); ++i) centroids.data()[i] = rng.normal();
  model.centroids = Parameter("orig.centroids", centroids);

  const std::vector<int> labels = final_assignment(model, data, 1.0);
  REQUIRE(labels.size() == data.rows());
  SUBCASE("labels stay in range") {
    for (int l : labels) {
      CHECK(l >= 0);
      CHECK(l < 3);
    }
  }
  SUBCASE("agrees with the nearest-centroid rule for any sigma") {
    for (double sigma : {0.2, 1.0, 5.0}) {
      CHECK(final_assignment(model, data, sigma) == nearest_centroid_labels(z, centroids));
    }
  }
  SUBCASE("a latent code sitting on a centroid takes its label") {
    // decode-free check: pick centroid 2 equal to an actual code
    DenseMatrix pinned = centroids;
    for (std::size_t c = 0; c < 4; ++c) pinned(2, c) = z(5, c);
    model.centroids.value = pinned;
    CHECK(final_assignment(model, data, 1.0)[5] == 2);
  }
}

TEST_CASE("joint_train stopping behavior") {
  const DenseMatrix data = toy_data(24, 16, 13);
  TrainConfig cfg = tiny_config();
  AutoencoderConfig arch = tiny_arch(16);

  Rng rng(3);
  const DenseMatrix data_aug = augment_dataset(data, AugmentConfig{}, 99);
  ViewModel view_o = make_view_model(arch, ViewTag::kOriginal, rng);
  ViewModel view_a = make_view_model(arch, ViewTag::kAugmented, rng);
  Rng pre_rng(4);
  pretrain_view(view_o, data, cfg, pre_rng);
  pretrain_view(view_a, data_aug, cfg, pre_rng);
  view_o.centroids = Parameter("orig.centroids", kmeanspp_init(encode_dataset(view_o, data), 2, rng));
  view_a.centroids =
      Parameter("aug.centroids", kmeanspp_init(encode_dataset(view_a, data_aug), 2, rng));

  SUBCASE("max_epochs = 0 returns the initial assignment") {
    cfg.max_epochs = 0;
    TrainState state = make_train_state(std::move(view_o), std::move(view_a), data, cfg);
    const std::vector<int> initial = state.labels;
    Rng train_rng(5);
    joint_train(state, data, data_aug, cfg, train_rng);
    CHECK(state.labels == initial);
    CHECK(state.history.empty());
    CHECK(state.epoch == 0);
  }
  SUBCASE("an epoch with zero changes stops the loop") {
    cfg.max_epochs = 50;
    // freeze learning so assignments cannot move: lr 0 keeps everything fixed
    cfg.joint_lr = 1e-30;
    TrainState state = make_train_state(std::move(view_o), std::move(view_a), data, cfg);
    Rng train_rng(5);
    joint_train(state, data, data_aug, cfg, train_rng);
    CHECK(state.epoch == 1);  // stops within one epoch of the freeze
    REQUIRE(state.history.size() == 1);
    CHECK(state.history[0].changed_fraction == 0.0);
  }
  SUBCASE("the log carries the schedule and finite losses") {
    cfg.max_epochs = 3;
    cfg.stop_fraction = 1e-9;
    TrainState state = make_train_state(std::move(view_o), std::move(view_a), data, cfg);
    Rng train_rng(5);
    joint_train(state, data, data_aug, cfg, train_rng);
    // the loop may stop early on a zero-change epoch; every logged row is checked
    REQUIRE(state.history.size() >= 1);
    for (std::size_t e = 0; e < state.history.size(); ++e) {
      const EpochLogRow& row = state.history[e];
      CHECK(row.epoch == e);
      CHECK(row.tau == doctest::Approx(anneal_tau(e, cfg.tau0, cfg.beta, cfg.tau_floor)));
      CHECK(row.lr == doctest::Approx(lr_at(e, cfg)));
      CHECK(std::isfinite(row.loss_rec));
      CHECK(std::isfinite(row.loss_kmeans));
      CHECK(std::isfinite(row.loss_instance));
      CHECK(std::isfinite(row.loss_cluster));
      CHECK(row.loss_total == doctest::Approx(row.loss_rec + row.loss_kmeans +
                                              row.loss_instance + row.loss_cluster));
    }
  }
}

TEST_CASE("fit clusters an easy two-frequency dataset") {
  Rng rng(17);
  TimeSeriesDataset d = gen_synthetic(16, 24, 2, 0.05, rng);
  znorm_rows(d.series);
  TrainConfig cfg = tiny_config();
  cfg.pretrain_epochs = 10;
  cfg.max_epochs = 12;
  AutoencoderConfig arch = tiny_arch(24);
  arch.latent_dim = 8;
  const FitResult result = fit(d.series, 2, cfg, arch, AugmentConfig{});
  REQUIRE(result.labels.size() == d.count());
  CHECK(rand_index(d.labels, result.labels) >= 0.75);
  CHECK_FALSE(result.history.empty());

  SUBCASE("labels never feed the trainer") {
    // the fit interface only sees the series matrix; shuffling the label
    // vector cannot change the outcome
    TimeSeriesDataset shuffled = d;
    std::reverse(shuffled.labels.begin(), shuffled.labels.end());
    const FitResult again = fit(shuffled.series, 2, cfg, arch, AugmentConfig{});
    CHECK(again.labels == result.labels);
  }
}

TEST_CASE("train config invariants") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.stop_fraction = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig{};
  cfg.joint_lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
