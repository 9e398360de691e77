#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "forge/data.hpp"
#include "forge/nn.hpp"

namespace forge {

// The three minority-class synthesizers. All are deterministic functions of
// (data, config, seed); samplers never emit NaN/Inf.

struct SmoteConfig {
    int k_neighbors = 5;
    std::size_t n_synthetic = 0;
    std::uint64_t seed = 0;
};

/// Each synthetic row is x_i + λ(x_nn - x_i): x_i drawn uniformly, x_nn drawn
/// uniformly from the k Euclidean nearest neighbors of x_i, λ ~ Uniform(0,1).
Matrix smote_generate(const Matrix& x_minority, const SmoteConfig& cfg);

/// k nearest neighbors by Euclidean distance, ties broken by row index.
std::vector<std::vector<std::size_t>> nearest_neighbors(const Matrix& x, int k);

struct TrainTrace {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> epochs;  // one row per completed epoch
};

struct DivergenceDetected : std::runtime_error {
    TrainTrace trace;
    DivergenceDetected(const std::string& msg, TrainTrace trace_)
        : std::runtime_error("divergence detected: " + msg), trace(std::move(trace_)) {}
};

// ---- GAN + Transformer -------------------------------------------------------

struct GanConfig {
    std::size_t latent_dim = 32;
    std::size_t model_dim = 64;
    std::size_t num_heads = 4;
    std::size_t num_blocks = 2;
    std::size_t ffn_hidden = 128;
    std::size_t se_reduction = 4;
    std::size_t disc_hidden1 = 128;
    std::size_t disc_hidden2 = 64;
    std::size_t recon_hidden = 64;
    std::size_t epochs = 300;
    std::size_t batch_size = 64;
    float lr = 2e-4f;
    float lambda_rec = 0.1f;
    // the returned generator carries an exponential moving average of its
    // training weights; the adversarial equilibrium orbits the data
    // distribution and the average sits at the orbit's center (0 disables)
    float ema_decay = 0.999f;
    bool sigmoid_output = false;  // squash samples into [0,1] per feature
};

/// Generator: noise -> per-feature tokens (+ learned feature embeddings) ->
/// Transformer encoder stack -> SE gate over the flattened tokens -> linear
/// head back to feature space.
struct Generator {
    LinearLayer noise_proj;     // latent -> tokens*model_dim
    Tensor feature_embeddings;  // [tokens, model_dim]
    std::vector<TransformerEncoderBlock> blocks;
    SEBlock se_gate;          // over tokens*model_dim
    LinearLayer output_head;  // tokens*model_dim -> width
};

struct Discriminator {
    LinearLayer l1, l2, l3;  // width -> h1 -> h2 -> 1 logit
};

/// Rebuilds generator outputs from the discriminator's penultimate features;
/// its error regularizes both networks.
struct ReconDecoder {
    LinearLayer l1, l2;  // h2 -> hidden -> width
};

struct GanTransformerModel {
    GanConfig config;
    std::size_t width = 0;  // feature count == token count
    Generator generator;
    Discriminator discriminator;
    ReconDecoder recon_decoder;
};

GanTransformerModel make_gan(const GanConfig& cfg, std::size_t width, Rng& rng);

Tensor generator_forward(const GanTransformerModel& model, const Tensor& z);

struct DiscriminatorOut {
    Tensor logits;       // [batch, 1]
    Tensor penultimate;  // [batch, h2]
};
DiscriminatorOut discriminator_forward(const GanTransformerModel& model, const Tensor& rows);

Tensor recon_forward(const GanTransformerModel& model, const Tensor& penultimate);

std::vector<Tensor> generator_params(const GanTransformerModel& model);
std::vector<Tensor> discriminator_params(const GanTransformerModel& model);  // incl. decoder

/// Alternating Adam updates; discriminator sees real vs detached fake rows,
/// generator maximizes log D(fake) plus the weighted reconstruction term.
/// Throws DivergenceDetected (with the trace so far) if any loss goes NaN.
std::pair<GanTransformerModel, TrainTrace> gan_train(const Matrix& x_minority,
                                                     const GanConfig& cfg, Rng& rng);

Matrix gan_sample(const GanTransformerModel& model, std::size_t n, Rng& rng);

// ---- TVAE ---------------------------------------------------------------------

struct TvaeConfig {
    std::size_t latent_dim = 16;
    std::size_t hidden = 64;
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    float lr = 1e-3f;
    float beta = 1.0f;
};

struct TvaeModel {
    TvaeConfig config;
    std::size_t width = 0;
    LinearLayer enc1;         // width -> hidden
    LinearLayer mu_head;      // hidden -> latent
    LinearLayer logvar_head;  // hidden -> latent
    LinearLayer dec1;         // latent -> hidden
    LinearLayer dec2;         // hidden -> width
};

TvaeModel make_tvae(const TvaeConfig& cfg, std::size_t width, Rng& rng);

std::vector<Tensor> tvae_params(const TvaeModel& model);

/// Mean over the batch of ½ Σ_d (μ² + σ² - 1 - log σ²) against N(0, I).
Tensor tvae_kl(const Tensor& mu, const Tensor& logvar);

/// Decoded reconstruction of x through the reparameterized latent.
Tensor tvae_reconstruct(const TvaeModel& model, const Tensor& x, const Tensor& noise,
                        Tensor* mu_out = nullptr, Tensor* logvar_out = nullptr);

std::pair<TvaeModel, TrainTrace> tvae_train(const Matrix& x_minority, const TvaeConfig& cfg,
                                            Rng& rng);

Matrix tvae_sample(const TvaeModel& model, std::size_t n, Rng& rng);

// ---- shared -------------------------------------------------------------------

/// Appends synthetic rows with the given label and synthetic_mask = true.
/// Only ever applied to the training split; the pipeline enforces that.
Dataset augment_dataset(const Dataset& d, const Matrix& synthetic, std::uint8_t label = 1);

/// z ~ N(0, I) as a [rows, cols] tensor.
Tensor randn_tensor(Rng& rng, std::size_t rows, std::size_t cols);

}  // namespace forge
