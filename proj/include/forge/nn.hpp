#pragma once

#include <vector>

#include "forge/rng.hpp"
#include "forge/tensor.hpp"

namespace forge {

// Building blocks for the generative models. Each block is a plain parameter
// container; forward functions run on the active tape so training can
// backpropagate through any composition of them.

/// Glorot-uniform draw: Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out, Shape shape);

struct LinearLayer {
    Tensor weight;  // [in, out]
    Tensor bias;    // [out]

    std::size_t in_dim() const { return weight.dim(0); }
    std::size_t out_dim() const { return weight.dim(1); }
};

LinearLayer make_linear(Rng& rng, std::size_t in, std::size_t out);

/// x·W + b for x of rank 2 [batch, in] or rank 3 [batch, tokens, in].
Tensor linear_forward(const LinearLayer& layer, const Tensor& x);

struct LayerNorm {
    Tensor gain;   // [dim]
    Tensor shift;  // [dim]
};

LayerNorm make_layer_norm(std::size_t dim);

/// Per-row (x - mean) / sqrt(var + 1e-5) * gain + shift over the last axis.
Tensor layer_norm_forward(const LayerNorm& params, const Tensor& x);

struct MultiHeadSelfAttention {
    std::size_t num_heads = 0;
    std::size_t head_dim = 0;
    LinearLayer w_q, w_k, w_v, w_o;

    std::size_t model_dim() const { return num_heads * head_dim; }
};

MultiHeadSelfAttention make_attention(Rng& rng, std::size_t model_dim, std::size_t num_heads);

/// Scaled dot-product attention over x: [batch, tokens, dim], no masking.
/// When `attn_weights` is given it receives one [batch, tokens, tokens]
/// tensor per head.
Tensor attention_forward(const MultiHeadSelfAttention& attn, const Tensor& x,
                         std::vector<Tensor>* attn_weights = nullptr);

struct TransformerEncoderBlock {
    MultiHeadSelfAttention attention;
    LinearLayer ffn1, ffn2;
    LayerNorm norm1, norm2;
};

TransformerEncoderBlock make_encoder_block(Rng& rng, std::size_t model_dim, std::size_t num_heads,
                                           std::size_t ffn_hidden);

/// Post-norm residual layout: out = LN(h + FFN(h)), h = LN(x + Attn(x)).
Tensor encoder_block_forward(const TransformerEncoderBlock& block, const Tensor& x);

struct SEBlock {
    LinearLayer fc_reduce;  // dim -> dim/r
    LinearLayer fc_expand;  // dim/r -> dim
    std::size_t reduction = 0;
};

SEBlock make_se_block(Rng& rng, std::size_t dim, std::size_t reduction);

/// x ⊙ sigmoid(fc_expand(relu(fc_reduce(x)))) for x: [batch, dim].
Tensor se_block_forward(const SEBlock& se, const Tensor& x);

// Parameter collection, in a fixed traversal order shared with checkpoints.
void append_params(const LinearLayer& l, std::vector<Tensor>& out);
void append_params(const LayerNorm& l, std::vector<Tensor>& out);
void append_params(const MultiHeadSelfAttention& a, std::vector<Tensor>& out);
void append_params(const TransformerEncoderBlock& b, std::vector<Tensor>& out);
void append_params(const SEBlock& s, std::vector<Tensor>& out);

/// Adam with bias correction. One state instance per optimized network; the
/// slot order must match the parameter list passed to every step.
struct AdamState {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    long long t = 0;
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;
};

AdamState make_adam(const std::vector<Tensor>& params, float lr, float beta1 = 0.9f,
                    float beta2 = 0.999f, float eps = 1e-8f);

/// Applies one update to every parameter and clears their gradients.
/// Throws MissingGrad when a parameter has no populated gradient.
void adam_step(AdamState& state, std::vector<Tensor>& params);

}  // namespace forge
