#include "loster/dataio.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace loster {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<std::string> split_fields(const std::string& line, Delimiter delimiter) {
  std::vector<std::string> fields;
  if (delimiter == Delimiter::kWhitespace) {
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) fields.push_back(tok);
    return fields;
  }
  const char sep = delimiter == Delimiter::kTab ? '\t' : ',';
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

struct RawFile {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;
};

RawFile read_file(const std::filesystem::path& path, Delimiter delimiter) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  RawFile raw;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected_len = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line, delimiter);
    if (fields.size() < 2) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected a label and at least one value");
    }
    std::vector<double> values;
    values.reserve(fields.size() - 1);
    for (std::size_t f = 1; f < fields.size(); ++f) {
      try {
        std::size_t used = 0;
        const double v = std::stod(fields[f], &used);
        if (used != fields[f].size() || !std::isfinite(v)) throw std::invalid_argument(fields[f]);
        values.push_back(v);
      } catch (const std::exception&) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": non-numeric value '" + fields[f] + "'");
      }
    }
    if (raw.rows.empty()) {
      expected_len = values.size();
    } else if (values.size() != expected_len) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": row has " +
                       std::to_string(values.size()) + " values, expected " +
                       std::to_string(expected_len));
    }
    raw.labels.push_back(fields[0]);
    raw.rows.push_back(std::move(values));
  }
  if (raw.rows.empty()) {
    throw ParseError(path.string() + ": no data rows");
  }
  return raw;
}

}  // namespace

TimeSeriesDataset load_ucr(const std::filesystem::path& train_path,
                           const std::optional<std::filesystem::path>& test_path,
                           Delimiter delimiter) {
  RawFile merged = read_file(train_path, delimiter);
  std::vector<std::string> provenance{train_path.string()};
  if (test_path) {
    RawFile test = read_file(*test_path, delimiter);
    if (!test.rows.empty() && test.rows.front().size() != merged.rows.front().size()) {
      throw ParseError("train/test length mismatch: " +
                       std::to_string(merged.rows.front().size()) + " vs " +
                       std::to_string(test.rows.front().size()));
    }
    merged.labels.insert(merged.labels.end(), test.labels.begin(), test.labels.end());
    merged.rows.insert(merged.rows.end(), std::make_move_iterator(test.rows.begin()),
                       std::make_move_iterator(test.rows.end()));
    provenance.push_back(test_path->string());
  }

  const std::size_t n = merged.rows.size();
  const std::size_t len = merged.rows.front().size();
  TimeSeriesDataset dataset;
  dataset.series = DenseMatrix(n, len);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(merged.rows[i].begin(), merged.rows[i].end(), dataset.series.row(i));
  }

  std::unordered_map<std::string, int> ids;
  dataset.labels.reserve(n);
  for (const std::string& token : merged.labels) {
    auto [it, inserted] = ids.try_emplace(token, static_cast<int>(ids.size()));
    if (inserted) dataset.label_names.push_back(token);
    dataset.labels.push_back(it->second);
  }
  dataset.name = train_path.stem().string();
  dataset.provenance = std::move(provenance);
  return dataset;
}

std::vector<double> znorm(const std::vector<double>& x) {
  if (x.empty()) return x;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  const double std_dev = std::sqrt(var);
  std::vector<double> out(x.size(), 0.0);
  if (std_dev < 1e-12) return out;  // constant series map to zeros
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / std_dev;
  return out;
}

void znorm_rows(DenseMatrix& series) {
  for (std::size_t i = 0; i < series.rows(); ++i) {
    std::vector<double> row(series.row(i), series.row(i) + series.cols());
    const std::vector<double> normed = znorm(row);
    std::copy(normed.begin(), normed.end(), series.row(i));
  }
}

TimeSeriesDataset gen_synthetic(std::size_t n_per_class, std::size_t len, std::size_t k,
                                double noise_std, Rng& rng) {
  if (k < 1) throw std::invalid_argument("gen_synthetic: k must be >= 1");
  if (len < 8) throw std::invalid_argument("gen_synthetic: len must be >= 8");
  const std::size_t n = n_per_class * k;
  TimeSeriesDataset dataset;
  dataset.series = DenseMatrix(n, len);
  dataset.labels.reserve(n);
  dataset.name = "synthetic-sines";
  for (std::size_t c = 0; c < k; ++c) {
    const double freq = static_cast<double>(c + 1);
    for (std::size_t r = 0; r < n_per_class; ++r) {
      const std::size_t i = c * n_per_class + r;
      const double phase = rng.uniform(0.0, kPi / 2.0);
      double* row = dataset.series.row(i);
      for (std::size_t t = 0; t < len; ++t) {
        row[t] = std::sin(2.0 * kPi * freq * static_cast<double>(t) / static_cast<double>(len) +
                          phase) +
                 noise_std * rng.normal();
      }
      dataset.labels.push_back(static_cast<int>(c));
    }
  }
  for (std::size_t c = 0; c < k; ++c) dataset.label_names.push_back(std::to_string(c));
  return dataset;
}

TimeSeriesDataset gen_control_charts(std::size_t n_per_class, std::size_t len, Rng& rng) {
  if (len < 8) throw std::invalid_argument("gen_control_charts: len must be >= 8");
  constexpr std::size_t kClasses = 6;
  const std::size_t n = n_per_class * kClasses;
  TimeSeriesDataset dataset;
  dataset.series = DenseMatrix(n, len);
  dataset.labels.reserve(n);
  dataset.name = "control-charts";
  const double level = 30.0;
  const double spread = 2.0;
  for (std::size_t c = 0; c < kClasses; ++c) {
    for (std::size_t r = 0; r < n_per_class; ++r) {
      const std::size_t i = c * n_per_class + r;
      double* row = dataset.series.row(i);
      const double amplitude = rng.uniform(10.0, 15.0);
      const double period = rng.uniform(10.0, 15.0);
      const double slope = rng.uniform(0.2, 0.5);
      const double shift = rng.uniform(7.5, 20.0);
      const double shift_at = rng.uniform(static_cast<double>(len) / 3.0,
                                          2.0 * static_cast<double>(len) / 3.0);
      for (std::size_t t = 0; t < len; ++t) {
        const double td = static_cast<double>(t);
        double v = level + spread * rng.uniform(-3.0, 3.0);
        switch (c) {
          case 0: break;                                              // normal
          case 1: v += amplitude * std::sin(2.0 * kPi * td / period); break;  // cyclic
          case 2: v += slope * td; break;                             // increasing trend
          case 3: v -= slope * td; break;                             // decreasing trend
          case 4: v += td >= shift_at ? shift : 0.0; break;           // upward shift
          case 5: v -= td >= shift_at ? shift : 0.0; break;           // downward shift
          default: break;
        }
        row[t] = v;
      }
      dataset.labels.push_back(static_cast<int>(c));
    }
  }
  for (std::size_t c = 0; c < kClasses; ++c) dataset.label_names.push_back(std::to_string(c));
  return dataset;
}

void save_dataset(const TimeSeriesDataset& dataset, const std::filesystem::path& path,
                  Delimiter delimiter) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot write " + path.string());
  const char sep = delimiter == Delimiter::kComma ? ',' : '\t';
  out.precision(17);
  for (std::size_t i = 0; i < dataset.series.rows(); ++i) {
    if (dataset.has_labels()) {
      out << dataset.label_names[dataset.labels[i]];
    } else {
      out << 0;
    }
    const double* row = dataset.series.row(i);
    for (std::size_t t = 0; t < dataset.series.cols(); ++t) out << sep << row[t];
    out << '\n';
  }
  if (!out) throw std::runtime_error("save_dataset: write failed for " + path.string());
}

void save_results(const RunResults& results, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["dataset"] = results.dataset_name;
  doc["seed"] = results.seed;
  doc["config"] = results.config_echo;
  doc["wallclock_seconds"] = results.wallclock_seconds;
  doc["labels"] = results.labels;
  if (results.rand_index) doc["rand_index"] = *results.rand_index;
  if (results.nmi) doc["nmi"] = *results.nmi;
  nlohmann::json epochs = nlohmann::json::array();
  for (const EpochLogRow& row : results.epochs) {
    epochs.push_back({{"epoch", row.epoch},
                      {"tau", row.tau},
                      {"lr", row.lr},
                      {"loss_rec", row.loss_rec},
                      {"loss_kmeans", row.loss_kmeans},
                      {"loss_instance", row.loss_instance},
                      {"loss_cluster", row.loss_cluster},
                      {"loss_total", row.loss_total},
                      {"changed_fraction", row.changed_fraction},
                      {"seconds", row.seconds}});
  }
  doc["epochs"] = std::move(epochs);

  const std::filesystem::path json_path = out_dir / "results.json";
  {
    std::ofstream out(json_path);
    if (!out) throw std::runtime_error("save_results: cannot write " + json_path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw std::runtime_error("save_results: write failed for " + json_path.string());
  }
  const std::filesystem::path csv_path = out_dir / "labels.csv";
  {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("save_results: cannot write " + csv_path.string());
    out << "index,label\n";
    for (std::size_t i = 0; i < results.labels.size(); ++i) {
      out << i << ',' << results.labels[i] << '\n';
    }
    if (!out) throw std::runtime_error("save_results: write failed for " + csv_path.string());
  }
}

std::vector<int> load_label_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.find("label") != std::string::npos) continue;  // header
    const auto comma = line.find_last_of(',');
    const std::string token = comma == std::string::npos ? line : line.substr(comma + 1);
    try {
      labels.push_back(std::stoi(token));
    } catch (const std::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad label '" + token + "'");
    }
  }
  if (labels.empty()) throw ParseError(path.string() + ": no labels");
  return labels;
}

void write_train_log_csv(const std::vector<EpochLogRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_train_log_csv: cannot write " + path.string());
  out << "epoch,tau,lr,loss_rec,loss_kmeans,loss_instance,loss_cluster,loss_total,"
         "changed_fraction,seconds\n";
  out.precision(12);
  for (const EpochLogRow& r : rows) {
    out << r.epoch << ',' << r.tau << ',' << r.lr << ',' << r.loss_rec << ',' << r.loss_kmeans
        << ',' << r.loss_instance << ',' << r.loss_cluster << ',' << r.loss_total << ','
        << r.changed_fraction << ',' << r.seconds << '\n';
  }
}

}  // namespace loster
