#include "loster/densenet.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace loster {

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x4c53434bu;  // "LSCK"
constexpr std::uint32_t kCheckpointVersion = 1;

DenseMatrix init_weights(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  // uniform in +-1/sqrt(fan_in)
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  DenseMatrix w(in_dim, out_dim);
  for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
  return w;
}

}  // namespace

void AutoencoderConfig::validate() const {
  if (input_len == 0) throw std::invalid_argument("AutoencoderConfig: input_len must be set");
  if (latent_dim == 0) throw std::invalid_argument("AutoencoderConfig: latent_dim must be >= 1");
  if (encoder_blocks == 0 || decoder_blocks == 0) {
    throw std::invalid_argument("AutoencoderConfig: need at least one block per stack");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw std::invalid_argument("AutoencoderConfig: dropout must lie in [0, 1)");
  }
}

std::vector<Parameter*> ResidualBlockParams::parameters() {
  std::vector<Parameter*> out{&w_hidden, &b_hidden, &w_out, &b_out, &w_skip, &b_skip};
  if (normed) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
  return out;
}

ResidualBlockParams make_residual_block(const std::string& name, std::size_t in_dim,
                                        std::size_t hidden_dim, std::size_t out_dim, bool normed,
                                        Rng& rng) {
  ResidualBlockParams block;
  block.w_hidden = Parameter(name + ".w_hidden", init_weights(in_dim, hidden_dim, rng));
  block.b_hidden = Parameter(name + ".b_hidden", DenseMatrix(1, hidden_dim));
  block.w_out = Parameter(name + ".w_out", init_weights(hidden_dim, out_dim, rng));
  block.b_out = Parameter(name + ".b_out", DenseMatrix(1, out_dim));
  block.w_skip = Parameter(name + ".w_skip", init_weights(in_dim, out_dim, rng));
  block.b_skip = Parameter(name + ".b_skip", DenseMatrix(1, out_dim));
  block.normed = normed;
  if (normed) {
    block.gamma = Parameter(name + ".gamma", DenseMatrix(1, out_dim, 1.0));
    block.beta = Parameter(name + ".beta", DenseMatrix(1, out_dim));
  }
  return block;
}

std::vector<Parameter*> ViewModel::parameters() {
  std::vector<Parameter*> out;
  for (ResidualBlockParams& b : encoder) {
    for (Parameter* p : b.parameters()) out.push_back(p);
  }
  for (ResidualBlockParams& b : decoder) {
    for (Parameter* p : b.parameters()) out.push_back(p);
  }
  return out;
}

std::vector<Parameter*> ViewModel::all_parameters() {
  std::vector<Parameter*> out = parameters();
  if (!centroids.value.empty()) out.push_back(&centroids);
  return out;
}

ViewModel make_view_model(const AutoencoderConfig& cfg, ViewTag tag, Rng& rng) {
  cfg.validate();
  ViewModel model;
  model.cfg = cfg;
  model.tag = tag;
  const std::string prefix = tag == ViewTag::kOriginal ? "orig" : "aug";
  const std::size_t len = cfg.input_len, d = cfg.latent_dim;
  for (std::size_t b = 0; b < cfg.encoder_blocks; ++b) {
    const std::size_t in_dim = b == 0 ? len : d;
    const bool last = b + 1 == cfg.encoder_blocks;
    // the latent-emitting block is unnormalized by default: pinning z to the
    // layer-norm sphere keeps the k-means objective away from its fixed point
    const bool normed = cfg.layer_norm && (!last || cfg.norm_output_block);
    model.encoder.push_back(
        make_residual_block(prefix + ".enc" + std::to_string(b), in_dim, d, d, normed, rng));
  }
  for (std::size_t b = 0; b < cfg.decoder_blocks; ++b) {
    const bool last = b + 1 == cfg.decoder_blocks;
    const std::size_t out_dim = last ? len : d;
    const bool normed = cfg.layer_norm && (!last || cfg.norm_output_block);
    model.decoder.push_back(
        make_residual_block(prefix + ".dec" + std::to_string(b), d, d, out_dim, normed, rng));
  }
  return model;
}

Var residual_block_forward(Tape& t, Var x, ResidualBlockParams& block, double dropout_p,
                           Mode mode, Rng* rng) {
  Var hidden = relu(t, linear_forward(t, x, t.param(block.w_hidden), t.param(block.b_hidden)));
  Var main = linear_forward(t, hidden, t.param(block.w_out), t.param(block.b_out));
  main = dropout(t, main, dropout_p, mode == Mode::kTrain, rng);
  Var skip = linear_forward(t, x, t.param(block.w_skip), t.param(block.b_skip));
  Var out = add(t, main, skip);
  if (block.normed) {
    out = layer_norm(t, out, t.param(block.gamma), t.param(block.beta));
  }
  return out;
}

Var encode(Tape& t, Var x, ViewModel& model, Mode mode, Rng* rng) {
  if (t.value(x).cols() != model.cfg.input_len) {
    throw ShapeError("encode: input " + shape_string(t.value(x)) + ", expected cols " +
                     std::to_string(model.cfg.input_len));
  }
  Var h = x;
  for (ResidualBlockParams& block : model.encoder) {
    h = residual_block_forward(t, h, block, model.cfg.dropout, mode, rng);
  }
  return h;
}

Var decode(Tape& t, Var z, ViewModel& model, Mode mode, Rng* rng) {
  if (t.value(z).cols() != model.cfg.latent_dim) {
    throw ShapeError("decode: input " + shape_string(t.value(z)) + ", expected cols " +
                     std::to_string(model.cfg.latent_dim));
  }
  Var h = z;
  for (ResidualBlockParams& block : model.decoder) {
    h = residual_block_forward(t, h, block, model.cfg.dropout, mode, rng);
  }
  return h;
}

Var reconstruction_loss(Tape& t, Var x, Var x_hat) {
  const DenseMatrix& vx = t.value(x);
  if (!vx.same_shape(t.value(x_hat))) {
    throw ShapeError("reconstruction_loss: " + shape_string(vx) + " vs " +
                     shape_string(t.value(x_hat)));
  }
  if (vx.rows() == 0) throw ShapeError("reconstruction_loss: empty batch");
  return scale(t, frobenius_sq(t, sub(t, x, x_hat)), 1.0 / static_cast<double>(vx.rows()));
}

namespace {

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_matrix(std::ofstream& out, const DenseMatrix& m) {
  write_u32(out, static_cast<std::uint32_t>(m.rows()));
  write_u32(out, static_cast<std::uint32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

DenseMatrix read_matrix(std::ifstream& in) {
  const std::uint32_t rows = read_u32(in);
  const std::uint32_t cols = read_u32(in);
  DenseMatrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(m.size() * sizeof(double)));
  return m;
}

}  // namespace

void save_checkpoint(const ViewModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path.string());
  write_u32(out, kCheckpointMagic);
  write_u32(out, kCheckpointVersion);
  write_u32(out, static_cast<std::uint32_t>(model.tag));
  write_u32(out, static_cast<std::uint32_t>(model.cfg.input_len));
  write_u32(out, static_cast<std::uint32_t>(model.cfg.latent_dim));
  write_u32(out, static_cast<std::uint32_t>(model.cfg.encoder_blocks));
  write_u32(out, static_cast<std::uint32_t>(model.cfg.decoder_blocks));
  write_u32(out, model.cfg.layer_norm ? 1u : 0u);
  write_u32(out, model.cfg.norm_output_block ? 1u : 0u);
  double dropout = model.cfg.dropout;
  out.write(reinterpret_cast<const char*>(&dropout), sizeof(dropout));

  ViewModel& mutable_model = const_cast<ViewModel&>(model);
  const std::vector<Parameter*> params = mutable_model.parameters();
  write_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) write_matrix(out, p->value);
  write_u32(out, model.centroids.value.empty() ? 0u : 1u);
  if (!model.centroids.value.empty()) write_matrix(out, model.centroids.value);
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

ViewModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  if (read_u32(in) != kCheckpointMagic) {
    throw std::runtime_error("load_checkpoint: " + path.string() + " is not a checkpoint");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("load_checkpoint: unsupported format version " +
                             std::to_string(version));
  }
  const ViewTag tag = static_cast<ViewTag>(read_u32(in));
  AutoencoderConfig cfg;
  cfg.input_len = read_u32(in);
  cfg.latent_dim = read_u32(in);
  cfg.encoder_blocks = read_u32(in);
  cfg.decoder_blocks = read_u32(in);
  cfg.layer_norm = read_u32(in) != 0;
  cfg.norm_output_block = read_u32(in) != 0;
  in.read(reinterpret_cast<char*>(&cfg.dropout), sizeof(cfg.dropout));

  Rng scratch(0);
  ViewModel model = make_view_model(cfg, tag, scratch);
  const std::vector<Parameter*> params = model.parameters();
  const std::uint32_t count = read_u32(in);
  if (count != params.size()) {
    throw std::runtime_error("load_checkpoint: parameter count mismatch in " + path.string());
  }
  for (Parameter* p : params) {
    DenseMatrix m = read_matrix(in);
    if (!m.same_shape(p->value)) {
      throw std::runtime_error("load_checkpoint: shape mismatch for " + p->name);
    }
    p->value = std::move(m);
    p->zero_grad();
  }
  if (read_u32(in) != 0) {
    model.centroids = Parameter((tag == ViewTag::kOriginal ? "orig" : "aug") + std::string(".centroids"),
                                read_matrix(in));
  }
  if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path.string());
  return model;
}

}  // namespace loster
