#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "loster/ops.hpp"
#include "loster/rng.hpp"
#include "loster/tape.hpp"

namespace loster {

enum class Mode { kTrain, kEval };
enum class ViewTag { kOriginal, kAugmented };

struct AutoencoderConfig {
  std::size_t input_len = 0;     // L, set from the dataset
  std::size_t latent_dim = 256;  // d
  std::size_t encoder_blocks = 3;
  std::size_t decoder_blocks = 3;
  double dropout = 0.1;
  bool layer_norm = true;
  // Whether the two emitting blocks (latent code, reconstruction) are
  // normalized. Off by default: normalizing the reconstruction forbids exact
  // recovery of standardized inputs, and normalizing the latent code pins it
  // to a sphere the k-means centroids cannot reach.
  bool norm_output_block = false;

  void validate() const;
};

// One residual block: hidden path Linear -> ReLU -> Linear -> Dropout, plus a
// fully linear skip connection, optionally layer-normalized at the end.
struct ResidualBlockParams {
  Parameter w_hidden, b_hidden;  // in -> hidden
  Parameter w_out, b_out;        // hidden -> out
  Parameter w_skip, b_skip;      // in -> out
  Parameter gamma, beta;         // present iff normed
  bool normed = false;

  std::size_t in_dim() const { return w_hidden.value.rows(); }
  std::size_t hidden_dim() const { return w_hidden.value.cols(); }
  std::size_t out_dim() const { return w_out.value.cols(); }

  std::vector<Parameter*> parameters();
};

ResidualBlockParams make_residual_block(const std::string& name, std::size_t in_dim,
                                        std::size_t hidden_dim, std::size_t out_dim, bool normed,
                                        Rng& rng);

// One view's autoencoder plus its centroid matrix. The two views share the
// architecture but never the weights.
struct ViewModel {
  AutoencoderConfig cfg;
  ViewTag tag = ViewTag::kOriginal;
  std::vector<ResidualBlockParams> encoder;
  std::vector<ResidualBlockParams> decoder;
  Parameter centroids;  // k x d, empty until clustering init

  std::vector<Parameter*> parameters();      // encoder + decoder
  std::vector<Parameter*> all_parameters();  // + centroids when present
};

ViewModel make_view_model(const AutoencoderConfig& cfg, ViewTag tag, Rng& rng);

Var residual_block_forward(Tape& t, Var x, ResidualBlockParams& block, double dropout_p,
                           Mode mode, Rng* rng);

// Batch encode/decode: x is [n x L] -> z [n x d] -> x_hat [n x L].
Var encode(Tape& t, Var x, ViewModel& model, Mode mode, Rng* rng);
Var decode(Tape& t, Var z, ViewModel& model, Mode mode, Rng* rng);

// (1/n) * sum_i ||x_i - x_hat_i||^2. The squared norm runs over time steps
// and is not averaged over them.
Var reconstruction_loss(Tape& t, Var x, Var x_hat);

// Binary checkpoint of one view (format version 1): config header plus all
// parameter matrices, centroids included when present.
void save_checkpoint(const ViewModel& model, const std::filesystem::path& path);
ViewModel load_checkpoint(const std::filesystem::path& path);

}  // namespace loster
