#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "loster/matrix.hpp"
#include "loster/rng.hpp"

namespace loster {

class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// n series of equal length with optional ground-truth labels. Labels are
// evaluation-only; the trainer never sees them.
struct TimeSeriesDataset {
  DenseMatrix series;                    // n x L
  std::vector<int> labels;               // dense 0-based ids, empty if absent
  std::vector<std::string> label_names;  // dense id -> original token
  std::string name;
  std::vector<std::string> provenance;   // source files, in merge order

  bool has_labels() const { return !labels.empty(); }
  std::size_t count() const { return series.rows(); }
  std::size_t length() const { return series.cols(); }
};

enum class Delimiter { kTab, kComma, kWhitespace };

// Loads a label-first delimited file; appends the test partition when given.
// Row format: label, v1, ..., vL. Labels may be arbitrary tokens and are
// mapped to dense 0-based ids in order of first appearance.
TimeSeriesDataset load_ucr(const std::filesystem::path& train_path,
                           const std::optional<std::filesystem::path>& test_path = {},
                           Delimiter delimiter = Delimiter::kTab);

// Per-series standardization with population std; constant series map to
// zeros (std < 1e-12 guard).
std::vector<double> znorm(const std::vector<double>& x);
void znorm_rows(DenseMatrix& series);

// k classes of unit sinusoids, class c at (c+1) cycles over the window, with
// a random phase offset in [0, pi/2) and white noise of scale noise_std.
TimeSeriesDataset gen_synthetic(std::size_t n_per_class, std::size_t len, std::size_t k,
                                double noise_std, Rng& rng);

// Six-class control-chart generator (normal, cyclic, increasing trend,
// decreasing trend, upward shift, downward shift) following the classic
// chart-pattern simulation recipe.
TimeSeriesDataset gen_control_charts(std::size_t n_per_class, std::size_t len, Rng& rng);

// Writes a dataset in the label-first delimited layout read by load_ucr.
void save_dataset(const TimeSeriesDataset& dataset, const std::filesystem::path& path,
                  Delimiter delimiter = Delimiter::kTab);

struct EpochLogRow {
  std::size_t epoch = 0;
  double tau = 0.0;
  double lr = 0.0;
  double loss_rec = 0.0;
  double loss_kmeans = 0.0;
  double loss_instance = 0.0;
  double loss_cluster = 0.0;
  double loss_total = 0.0;
  double changed_fraction = 0.0;
  double seconds = 0.0;
};

// One finished run: everything needed to reproduce and evaluate it.
struct RunResults {
  std::string dataset_name;
  std::uint64_t seed = 0;
  std::string config_echo;  // flat key=value lines, the resolved configuration
  std::vector<EpochLogRow> epochs;
  std::vector<int> labels;
  std::optional<double> rand_index;
  std::optional<double> nmi;
  double wallclock_seconds = 0.0;
};

// Writes <dir>/results.json (schema_version 1) and <dir>/labels.csv.
void save_results(const RunResults& results, const std::filesystem::path& out_dir);

// Reads the labels column of a labels.csv (or one bare label per line).
std::vector<int> load_label_csv(const std::filesystem::path& path);

void write_train_log_csv(const std::vector<EpochLogRow>& rows, const std::filesystem::path& path);

}  // namespace loster
