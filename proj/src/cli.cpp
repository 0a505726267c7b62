#include "loster/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "loster/augment.hpp"
#include "loster/dataio.hpp"
#include "loster/densenet.hpp"
#include "loster/gradsuite.hpp"
#include "loster/metrics.hpp"
#include "loster/ops.hpp"
#include "loster/trainer.hpp"

namespace loster {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Settings {
  TrainConfig train;
  AutoencoderConfig arch;
  AugmentConfig aug;
  std::size_t k = 0;
  std::string data_path;
  std::string test_path;
  std::string delimiter = "tab";
  std::string out_dir;
  std::string config_path;
  int threads = 1;
};

Delimiter parse_delimiter(const std::string& name) {
  if (name == "tab") return Delimiter::kTab;
  if (name == "comma") return Delimiter::kComma;
  if (name == "ws" || name == "whitespace") return Delimiter::kWhitespace;
  throw std::invalid_argument("unknown delimiter '" + name + "' (tab, comma, ws)");
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument("bad boolean '" + v + "'");
}

// Flat key=value configuration, keys mirroring the config structs. Applied
// before argv parsing so explicit flags override file values.
void apply_config_file(Settings& s, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  std::map<std::string, std::function<void(const std::string&)>> setters;
  auto size_setter = [](std::size_t& field) {
    return [&field](const std::string& v) { field = std::stoull(v); };
  };
  auto double_setter = [](double& field) {
    return [&field](const std::string& v) { field = std::stod(v); };
  };
  auto bool_setter = [](bool& field) {
    return [&field](const std::string& v) { field = parse_bool(v); };
  };
  setters["k"] = size_setter(s.k);
  setters["seed"] = [&s](const std::string& v) { s.train.seed = std::stoull(v); };
  setters["latent_dim"] = size_setter(s.arch.latent_dim);
  setters["encoder_blocks"] = size_setter(s.arch.encoder_blocks);
  setters["decoder_blocks"] = size_setter(s.arch.decoder_blocks);
  setters["dropout"] = double_setter(s.arch.dropout);
  setters["layer_norm"] = bool_setter(s.arch.layer_norm);
  setters["norm_output_block"] = bool_setter(s.arch.norm_output_block);
  setters["pretrain_epochs"] = size_setter(s.train.pretrain_epochs);
  setters["pretrain_lr"] = double_setter(s.train.pretrain_lr);
  setters["joint_lr"] = double_setter(s.train.joint_lr);
  setters["lr_decay"] = double_setter(s.train.lr_decay);
  setters["lr_decay_every"] = size_setter(s.train.lr_decay_every);
  setters["tau0"] = double_setter(s.train.tau0);
  setters["beta"] = double_setter(s.train.beta);
  setters["tau_floor"] = double_setter(s.train.tau_floor);
  setters["tau_instance"] = double_setter(s.train.tau_instance);
  setters["tau_cluster"] = double_setter(s.train.tau_cluster);
  setters["batch_size"] = size_setter(s.train.batch_size);
  setters["max_epochs"] = size_setter(s.train.max_epochs);
  setters["stop_fraction"] = double_setter(s.train.stop_fraction);
  setters["sigma"] = double_setter(s.train.sigma);
  setters["exclude_self"] = bool_setter(s.train.exclude_self);
  setters["lloyd_iterations"] = [&s](const std::string& v) {
    s.train.lloyd_iterations = std::stoi(v);
  };
  setters["clip_norm"] = double_setter(s.train.clip_norm);
  setters["rotation"] = bool_setter(s.aug.rotation);
  setters["permutation"] = bool_setter(s.aug.permutation);
  setters["n_segments"] = size_setter(s.aug.n_segments);
  setters["timewarp"] = bool_setter(s.aug.timewarp);
  setters["warp_knots"] = size_setter(s.aug.warp_knots);
  setters["warp_sigma"] = double_setter(s.aug.warp_sigma);
  setters["delimiter"] = [&s](const std::string& v) { s.delimiter = v; };
  setters["threads"] = [&s](const std::string& v) { s.threads = std::stoi(v); };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                  ": expected key=value");
    }
    auto trim = [](std::string v) {
      const auto b = v.find_first_not_of(" \t");
      const auto e = v.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                  ": unknown key '" + key + "'");
    }
    try {
      it->second(value);
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                  ": bad value '" + value + "' for key '" + key + "'");
    }
  }
}

// Finds --config <path> or --config=<path> ahead of full argv parsing.
std::optional<std::string> prescan_config(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return std::nullopt;
}

// Shared hyperparameter flags; names double as config-file keys.
void add_model_options(CLI::App* cmd, Settings& s) {
  cmd->add_option("--latent_dim", s.arch.latent_dim, "latent dimension d");
  cmd->add_option("--encoder_blocks", s.arch.encoder_blocks, "residual blocks in the encoder");
  cmd->add_option("--decoder_blocks", s.arch.decoder_blocks, "residual blocks in the decoder");
  cmd->add_option("--dropout", s.arch.dropout, "dropout probability");
  cmd->add_option("--layer_norm", s.arch.layer_norm, "layer norm inside residual blocks");
  cmd->add_option("--norm_output_block", s.arch.norm_output_block,
                  "layer norm on the reconstruction block");

  cmd->add_option("--pretrain_epochs", s.train.pretrain_epochs, "reconstruction epochs per view");
  cmd->add_option("--pretrain_lr", s.train.pretrain_lr, "Adam learning rate for pretraining");
  cmd->add_option("--joint_lr", s.train.joint_lr, "SGD learning rate for the joint phase");
  cmd->add_option("--lr_decay", s.train.lr_decay, "joint lr decay factor");
  cmd->add_option("--lr_decay_every", s.train.lr_decay_every, "epochs between lr decays");
  cmd->add_option("--tau0", s.train.tau0, "initial Gumbel temperature");
  cmd->add_option("--beta", s.train.beta, "temperature annealing base");
  cmd->add_option("--tau_floor", s.train.tau_floor, "temperature floor");
  cmd->add_option("--tau_instance", s.train.tau_instance, "instance contrastive temperature");
  cmd->add_option("--tau_cluster", s.train.tau_cluster, "cluster contrastive temperature");
  cmd->add_option("--batch_size", s.train.batch_size, "mini-batch size");
  cmd->add_option("--max_epochs", s.train.max_epochs, "joint-phase epoch cap");
  cmd->add_option("--stop_fraction", s.train.stop_fraction,
                  "stop when fewer labels than this fraction change");
  cmd->add_option("--sigma", s.train.sigma, "RBF assignment bandwidth");
  cmd->add_option("--exclude_self", s.train.exclude_self,
                  "conventional NT-Xent denominator variant");
  cmd->add_option("--lloyd_iterations", s.train.lloyd_iterations,
                  "refinement sweeps after k-means++ seeding");
  cmd->add_option("--clip_norm", s.train.clip_norm,
                  "joint-phase gradient-norm ceiling (0 disables)");
  cmd->add_option("--seed", s.train.seed, "master seed");

  cmd->add_option("--rotation", s.aug.rotation, "augmentation: random sign flip");
  cmd->add_option("--permutation", s.aug.permutation, "augmentation: segment shuffle");
  cmd->add_option("--n_segments", s.aug.n_segments, "segments for the permutation");
  cmd->add_option("--timewarp", s.aug.timewarp, "augmentation: time warping");
  cmd->add_option("--warp_knots", s.aug.warp_knots, "time-warp control points");
  cmd->add_option("--warp_sigma", s.aug.warp_sigma, "time-warp noise scale");

  cmd->add_option("--threads", s.threads,
                  "linear-algebra threads (>1 may break bitwise reproducibility)");
}

void add_data_options(CLI::App* cmd, Settings& s, bool require_data) {
  CLI::Option* data = cmd->add_option("--data", s.data_path, "train partition (label-first rows)");
  if (require_data) data->required();
  cmd->add_option("--test", s.test_path, "test partition, appended after the train rows");
  cmd->add_option("--delimiter", s.delimiter, "field delimiter: tab, comma or ws");
  cmd->add_option("--out", s.out_dir, "output directory (default $LOSTER_OUT_DIR/<run>)");
  cmd->add_option("--config", s.config_path,
                  "flat key=value file; command-line flags override")
      ->check(CLI::ExistingFile);
}

std::string default_out_dir(const std::string& stem, std::uint64_t seed) {
  const char* base = std::getenv("LOSTER_OUT_DIR");
  fs::path root = base != nullptr && *base != '\0' ? fs::path(base) : fs::path("runs");
  return (root / (stem + "-seed" + std::to_string(seed))).string();
}

std::string settings_echo(const Settings& s) {
  std::ostringstream out;
  out.precision(17);
  out << "k=" << s.k << '\n'
      << "seed=" << s.train.seed << '\n'
      << "latent_dim=" << s.arch.latent_dim << '\n'
      << "encoder_blocks=" << s.arch.encoder_blocks << '\n'
      << "decoder_blocks=" << s.arch.decoder_blocks << '\n'
      << "dropout=" << s.arch.dropout << '\n'
      << "layer_norm=" << s.arch.layer_norm << '\n'
      << "norm_output_block=" << s.arch.norm_output_block << '\n'
      << "pretrain_epochs=" << s.train.pretrain_epochs << '\n'
      << "pretrain_lr=" << s.train.pretrain_lr << '\n'
      << "joint_lr=" << s.train.joint_lr << '\n'
      << "lr_decay=" << s.train.lr_decay << '\n'
      << "lr_decay_every=" << s.train.lr_decay_every << '\n'
      << "tau0=" << s.train.tau0 << '\n'
      << "beta=" << s.train.beta << '\n'
      << "tau_floor=" << s.train.tau_floor << '\n'
      << "tau_instance=" << s.train.tau_instance << '\n'
      << "tau_cluster=" << s.train.tau_cluster << '\n'
      << "batch_size=" << s.train.batch_size << '\n'
      << "max_epochs=" << s.train.max_epochs << '\n'
      << "stop_fraction=" << s.train.stop_fraction << '\n'
      << "sigma=" << s.train.sigma << '\n'
      << "exclude_self=" << s.train.exclude_self << '\n'
      << "lloyd_iterations=" << s.train.lloyd_iterations << '\n'
      << "clip_norm=" << s.train.clip_norm << '\n'
      << "rotation=" << s.aug.rotation << '\n'
      << "permutation=" << s.aug.permutation << '\n'
      << "n_segments=" << s.aug.n_segments << '\n'
      << "timewarp=" << s.aug.timewarp << '\n'
      << "warp_knots=" << s.aug.warp_knots << '\n'
      << "warp_sigma=" << s.aug.warp_sigma << '\n'
      << "delimiter=" << s.delimiter << '\n'
      << "threads=" << s.threads << '\n';
  return out.str();
}

void write_manifest(const Settings& s, const std::string& command, const fs::path& out_dir) {
  nlohmann::json doc;
  doc["command"] = command;
  doc["settings"] = settings_echo(s);
  doc["data"] = s.data_path;
  doc["test"] = s.test_path;
  doc["out_dir"] = out_dir.string();
  doc["seed"] = s.train.seed;
  doc["format_versions"] = {{"results", 1}, {"checkpoint", 1}};
  fs::create_directories(out_dir);
  std::ofstream out(out_dir / "run_manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + out_dir.string());
  out << doc.dump(2) << '\n';
}

void apply_threads(const Settings& s) {
  if (s.threads > 1) {
    std::cerr << "warning: --threads " << s.threads
              << " may break bitwise reproducibility of logged results\n";
  }
  set_max_threads(s.threads);
}

TimeSeriesDataset load_and_normalize(const Settings& s) {
  std::optional<fs::path> test;
  if (!s.test_path.empty()) test = fs::path(s.test_path);
  TimeSeriesDataset dataset = load_ucr(s.data_path, test, parse_delimiter(s.delimiter));
  znorm_rows(dataset.series);
  return dataset;
}

int run_cluster(Settings& s) {
  apply_threads(s);
  const auto start = Clock::now();
  TimeSeriesDataset dataset = load_and_normalize(s);
  if (s.k > dataset.count()) {
    throw std::invalid_argument("k=" + std::to_string(s.k) + " exceeds n=" +
                                std::to_string(dataset.count()));
  }
  const fs::path out_dir = s.out_dir.empty()
                               ? fs::path(default_out_dir(dataset.name, s.train.seed))
                               : fs::path(s.out_dir);
  write_manifest(s, "cluster", out_dir);

  FitResult result = fit(dataset.series, s.k, s.train, s.arch, s.aug);

  RunResults run;
  run.dataset_name = dataset.name;
  run.seed = s.train.seed;
  run.config_echo = settings_echo(s);
  run.epochs = result.history;
  run.labels = result.labels;
  run.wallclock_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  if (dataset.has_labels()) {
    run.rand_index = rand_index(dataset.labels, result.labels);
    run.nmi = nmi(dataset.labels, result.labels);
  }
  save_results(run, out_dir);
  write_train_log_csv(result.history, out_dir / "train_log.csv");

  std::cout << "dataset " << dataset.name << ": n=" << dataset.count()
            << " L=" << dataset.length() << " k=" << s.k << '\n';
  std::cout << "pretrain " << result.pretrain_losses_original.size() << "+"
            << result.pretrain_losses_augmented.size() << " epochs in "
            << result.pretrain_seconds << " s, joint " << result.history.size()
            << " epochs in " << result.joint_seconds << " s\n";
  if (run.rand_index) {
    std::cout << "RI " << *run.rand_index << '\n' << "NMI " << *run.nmi << '\n';
  }
  std::cout << "results written to " << out_dir.string() << '\n';
  return 0;
}

int run_pretrain(Settings& s) {
  apply_threads(s);
  TimeSeriesDataset dataset = load_and_normalize(s);
  const fs::path out_dir = s.out_dir.empty()
                               ? fs::path(default_out_dir(dataset.name, s.train.seed))
                               : fs::path(s.out_dir);
  write_manifest(s, "pretrain", out_dir);

  Rng rng(s.train.seed);
  const DenseMatrix data_aug =
      augment_dataset(dataset.series, s.aug, rng.derive(0x61756731u).engine()());
  s.arch.input_len = dataset.length();
  ViewModel view_o = make_view_model(s.arch, ViewTag::kOriginal, rng);
  ViewModel view_a = make_view_model(s.arch, ViewTag::kAugmented, rng);
  std::vector<double> losses_o, losses_a;
  pretrain_view(view_o, dataset.series, s.train, rng, &losses_o);
  pretrain_view(view_a, data_aug, s.train, rng, &losses_a);
  save_checkpoint(view_o, out_dir / "view_original.ckpt");
  save_checkpoint(view_a, out_dir / "view_augmented.ckpt");
  std::cout << "pretrained both views for " << s.train.pretrain_epochs << " epochs each\n";
  if (!losses_o.empty()) {
    std::cout << "final reconstruction loss: original " << losses_o.back() << ", augmented "
              << losses_a.back() << '\n';
  }
  std::cout << "checkpoints written to " << out_dir.string() << '\n';
  return 0;
}

int run_eval(const std::string& pred_path, const std::string& truth_path) {
  const std::vector<int> pred = load_label_csv(pred_path);
  const std::vector<int> truth = load_label_csv(truth_path);
  std::cout << "RI " << rand_index(truth, pred) << '\n';
  std::cout << "NMI " << nmi(truth, pred) << '\n';
  return 0;
}

int run_synth(const std::string& family, std::size_t k, std::size_t n_per_class, std::size_t len,
              double noise, std::uint64_t seed, const std::string& out_path) {
  Rng rng(seed);
  TimeSeriesDataset dataset;
  if (family == "sine") {
    dataset = gen_synthetic(n_per_class, len, k, noise, rng);
  } else if (family == "chart") {
    dataset = gen_control_charts(n_per_class, len, rng);
  } else {
    throw std::invalid_argument("unknown family '" + family + "' (sine, chart)");
  }
  save_dataset(dataset, out_path);
  std::cout << "wrote " << dataset.count() << " series of length " << dataset.length() << " to "
            << out_path << '\n';
  return 0;
}

int run_gradcheck(const GradSuiteConfig& cfg, bool zero_params) {
  if (zero_params) {
    // degenerate model without parameters: 0 by the empty-maximum convention
    const double err = finite_diff_check([](Tape& t) { return t.constant(DenseMatrix(1, 1)); },
                                         {}, cfg.step);
    std::cout << "zero-parameter model: max rel error " << err << '\n';
    return err < 1e-4 ? 0 : 1;
  }
  const std::vector<GradSuiteEntry> entries = run_gradient_suite(cfg);
  int exit_code = 0;
  for (const GradSuiteEntry& e : entries) {
    const bool ok = e.max_rel_error < 1e-4;
    std::cout << e.loss << ": max rel error " << e.max_rel_error << (ok ? " (ok)" : " (FAIL)")
              << '\n';
    if (!ok) {
      std::cerr << "gradient check failed for loss '" << e.loss << "'\n";
      exit_code = 1;
    }
  }
  return exit_code;
}

int run_bench(Settings& s, std::size_t epochs) {
  apply_threads(s);
  TimeSeriesDataset dataset = load_and_normalize(s);
  if (s.k == 0) s.k = dataset.has_labels() ? *std::max_element(dataset.labels.begin(),
                                                               dataset.labels.end()) + 1
                                           : 2;
  s.train.max_epochs = epochs;
  s.train.stop_fraction = 1e-9;  // time every requested epoch
  FitResult result = fit(dataset.series, s.k, s.train, s.arch, s.aug);

  double total = 0.0, worst = 0.0;
  for (const EpochLogRow& row : result.history) {
    std::cout << "epoch " << row.epoch << ": " << row.seconds << " s\n";
    total += row.seconds;
    worst = std::max(worst, row.seconds);
  }
  const double mean = result.history.empty() ? 0.0 : total / result.history.size();
  std::cout << "joint epochs " << result.history.size() << ", mean " << mean << " s, max "
            << worst << " s (n=" << dataset.count() << ", L=" << dataset.length()
            << ", batch=" << s.train.batch_size << ")\n";
  if (!s.out_dir.empty()) {
    fs::create_directories(s.out_dir);
    write_train_log_csv(result.history, fs::path(s.out_dir) / "bench.csv");
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"long-sequence time series clustering via a two-view dense autoencoder "
               "with a differentiable hard k-means objective"};
  app.require_subcommand(1);

  Settings s;
  GradSuiteConfig grad_cfg;
  bool grad_zero_params = false;
  std::string eval_pred, eval_truth;
  std::string synth_family = "sine";
  std::size_t synth_k = 3, synth_n = 50, synth_len = 64;
  double synth_noise = 0.1;
  std::uint64_t synth_seed = 42;
  std::string synth_out;
  std::size_t bench_epochs = 3;

  CLI::App* cluster = app.add_subcommand("cluster", "run the full pipeline on a dataset");
  add_data_options(cluster, s, /*require_data=*/true);
  cluster->add_option("--k", s.k, "number of clusters")->required();
  add_model_options(cluster, s);

  CLI::App* pretrain = app.add_subcommand("pretrain", "train the two views' autoencoders only");
  add_data_options(pretrain, s, /*require_data=*/true);
  add_model_options(pretrain, s);

  CLI::App* eval = app.add_subcommand("eval", "Rand index and NMI between two label files");
  eval->add_option("--labels", eval_pred, "predicted labels csv")->required();
  eval->add_option("--truth", eval_truth, "ground-truth labels csv")->required();

  CLI::App* synth = app.add_subcommand("synth", "generate a labeled synthetic dataset");
  synth->add_option("--family", synth_family, "sine (k frequency classes) or chart (6 classes)");
  synth->add_option("--k", synth_k, "classes (sine family)");
  synth->add_option("--n", synth_n, "series per class");
  synth->add_option("--len", synth_len, "time steps per series");
  synth->add_option("--noise", synth_noise, "white-noise scale (sine family)");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--out", synth_out, "output file (label-first rows)")->required();

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every loss");
  gradcheck->add_option("--n", grad_cfg.n, "instances");
  gradcheck->add_option("--len", grad_cfg.len, "series length");
  gradcheck->add_option("--latent_dim", grad_cfg.latent_dim, "latent dimension");
  gradcheck->add_option("--k", grad_cfg.k, "clusters");
  gradcheck->add_option("--encoder_blocks", grad_cfg.encoder_blocks, "encoder blocks");
  gradcheck->add_option("--decoder_blocks", grad_cfg.decoder_blocks, "decoder blocks");
  gradcheck->add_option("--step", grad_cfg.step, "central-difference step");
  gradcheck->add_option("--seed", grad_cfg.seed, "instance seed");
  gradcheck->add_option("--inject-fault", grad_cfg.inject_fault,
                        "test fixture: corrupt the named loss's backward")
      ->group("");
  gradcheck->add_flag("--zero-params", grad_zero_params,
                      "check the zero-parameter degenerate model")
      ->group("");

  CLI::App* bench = app.add_subcommand("bench", "per-epoch joint-training timing report");
  add_data_options(bench, s, /*require_data=*/true);
  bench->add_option("--k", s.k, "number of clusters (default: class count)");
  bench->add_option("--epochs", bench_epochs, "joint epochs to time");
  add_model_options(bench, s);

  // config file first, then argv, so explicit flags override file values
  if (const auto config = prescan_config(argc, argv)) {
    try {
      apply_config_file(s, *config);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (cluster->parsed()) return run_cluster(s);
    if (pretrain->parsed()) return run_pretrain(s);
    if (eval->parsed()) return run_eval(eval_pred, eval_truth);
    if (synth->parsed()) {
      return run_synth(synth_family, synth_k, synth_n, synth_len, synth_noise, synth_seed,
                       synth_out);
    }
    if (gradcheck->parsed()) return run_gradcheck(grad_cfg, grad_zero_params);
    if (bench->parsed()) return run_bench(s, bench_epochs);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace loster
