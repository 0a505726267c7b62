#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "loster/cli.hpp"
#include "loster/dataio.hpp"

using namespace loster;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  std::vector<const char*> argv{"loster"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("loster-cli-" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({"no-such-command"}) == 2);
  CHECK(run({"cluster"}) == 2);                                   // missing --data/--k
  CHECK(run({"cluster", "--data", "x.tsv", "--k", "2", "--bogus"}) == 2);
  CHECK(run({"eval", "--labels", "/nonexistent.csv", "--truth", "/nonexistent.csv"}) == 2);
  CHECK(run({}) == 2);
}

TEST_CASE("synth then cluster then eval round trip") {
  TempDir dir;
  const std::string data = (dir.path / "sines.tsv").string();
  CHECK(run({"synth", "--family", "sine", "--k", "2", "--n", "12", "--len", "24", "--noise",
             "0.05", "--seed", "3", "--out", data}) == 0);

  const std::string out = (dir.path / "run").string();
  CHECK(run({"cluster", "--data", data, "--k", "2", "--seed", "7", "--out", out,
             "--latent_dim", "8", "--encoder_blocks", "2", "--decoder_blocks", "2",
             "--pretrain_epochs", "6", "--max_epochs", "6", "--batch_size", "16"}) == 0);
  CHECK(fs::exists(fs::path(out) / "results.json"));
  CHECK(fs::exists(fs::path(out) / "labels.csv"));
  CHECK(fs::exists(fs::path(out) / "train_log.csv"));
  CHECK(fs::exists(fs::path(out) / "run_manifest.json"));

  // build the truth csv from the generated dataset and score the labels
  const TimeSeriesDataset d = load_ucr(data);
  const std::string truth = (dir.path / "truth.csv").string();
  {
    std::ofstream f(truth);
    f << "index,label\n";
    for (std::size_t i = 0; i < d.labels.size(); ++i) f << i << ',' << d.labels[i] << '\n';
  }
  CHECK(run({"eval", "--labels", (fs::path(out) / "labels.csv").string(), "--truth", truth}) == 0);

  // the written document carries the score of an easily separable instance
  std::ifstream jf(fs::path(out) / "results.json");
  nlohmann::json doc;
  jf >> doc;
  CHECK(doc["rand_index"].get<double>() >= 0.9);
  CHECK(doc["seed"].get<std::uint64_t>() == 7);
}

TEST_CASE("identical seeds give byte-identical label files") {
  TempDir dir;
  const std::string data = (dir.path / "sines.tsv").string();
  REQUIRE(run({"synth", "--k", "2", "--n", "10", "--len", "16", "--seed", "5", "--out", data}) == 0);

  auto cluster_into = [&](const std::string& out) {
    return run({"cluster", "--data", data, "--k", "2", "--seed", "11", "--out", out,
                "--latent_dim", "6", "--encoder_blocks", "2", "--decoder_blocks", "2",
                "--pretrain_epochs", "4", "--max_epochs", "4", "--batch_size", "8"});
  };
  const std::string out1 = (dir.path / "a").string();
  const std::string out2 = (dir.path / "b").string();
  REQUIRE(cluster_into(out1) == 0);
  REQUIRE(cluster_into(out2) == 0);

  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  };
  const std::string a = slurp(fs::path(out1) / "labels.csv");
  CHECK_FALSE(a.empty());
  CHECK(a == slurp(fs::path(out2) / "labels.csv"));
}

TEST_CASE("config file values are applied and flags override them") {
  TempDir dir;
  const std::string data = (dir.path / "sines.tsv").string();
  REQUIRE(run({"synth", "--k", "2", "--n", "8", "--len", "16", "--seed", "2", "--out", data}) == 0);

  const std::string config = (dir.path / "run.conf").string();
  {
    std::ofstream f(config);
    f << "latent_dim=6\nencoder_blocks=2\ndecoder_blocks=2\npretrain_epochs=2\n"
         "max_epochs=2\nbatch_size=8\nseed=21\n";
  }
  const std::string out = (dir.path / "run").string();
  CHECK(run({"cluster", "--data", data, "--k", "2", "--config", config, "--out", out,
             "--seed", "22"}) == 0);
  // the manifest echoes the resolved settings: flag wins over file
  std::ifstream f(fs::path(out) / "run_manifest.json");
  const std::string manifest((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  CHECK(manifest.find("seed=22") != std::string::npos);
  CHECK(manifest.find("latent_dim=6") != std::string::npos);
}

TEST_CASE("pretrain writes loadable checkpoints") {
  TempDir dir;
  const std::string data = (dir.path / "sines.tsv").string();
  REQUIRE(run({"synth", "--k", "2", "--n", "8", "--len", "16", "--seed", "9", "--out", data}) == 0);
  const std::string out = (dir.path / "pre").string();
  CHECK(run({"pretrain", "--data", data, "--out", out, "--latent_dim", "6",
             "--encoder_blocks", "2", "--decoder_blocks", "2", "--pretrain_epochs", "2",
             "--batch_size", "8"}) == 0);
  CHECK(fs::exists(fs::path(out) / "view_original.ckpt"));
  CHECK(fs::exists(fs::path(out) / "view_augmented.ckpt"));
}

TEST_CASE("gradcheck command") {
  SUBCASE("default sizes pass") {
    CHECK(run({"gradcheck", "--n", "6", "--len", "8", "--latent_dim", "4", "--k", "2"}) == 0);
  }
  SUBCASE("an injected wrong gradient fails and names the loss") {
    CHECK(run({"gradcheck", "--n", "6", "--len", "8", "--latent_dim", "4", "--k", "2",
               "--inject-fault", "instance"}) == 1);
  }
  SUBCASE("the zero-parameter degenerate model passes") {
    CHECK(run({"gradcheck", "--zero-params"}) == 0);
  }
}

TEST_CASE("bench reports per-epoch timings") {
  TempDir dir;
  const std::string data = (dir.path / "sines.tsv").string();
  REQUIRE(run({"synth", "--k", "2", "--n", "10", "--len", "16", "--seed", "4", "--out", data}) == 0);
  const std::string out = (dir.path / "bench").string();
  CHECK(run({"bench", "--data", data, "--k", "2", "--epochs", "2", "--out", out,
             "--latent_dim", "6", "--encoder_blocks", "2", "--decoder_blocks", "2",
             "--pretrain_epochs", "1", "--batch_size", "8"}) == 0);
  CHECK(fs::exists(fs::path(out) / "bench.csv"));
}
