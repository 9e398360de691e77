#include "forge/nn.hpp"

#include <cmath>

namespace forge {

Tensor glorot_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out, Shape shape) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<float> values(shape_size(shape));
    for (float& v : values) v = static_cast<float>(rng.uniform(-a, a));
    return Tensor(std::move(shape), std::move(values), true);
}

LinearLayer make_linear(Rng& rng, std::size_t in, std::size_t out) {
    LinearLayer layer;
    layer.weight = glorot_uniform(rng, in, out, {in, out});
    layer.bias = Tensor::zeros({out}, true);
    return layer;
}

Tensor linear_forward(const LinearLayer& layer, const Tensor& x) {
    if (x.rank() < 2 || x.shape().back() != layer.in_dim()) {
        throw ShapeMismatch("linear expects [..., " + std::to_string(layer.in_dim()) + "], got " +
                            shape_str(x.shape()));
    }
    return add(matmul(x, layer.weight), layer.bias);
}

LayerNorm make_layer_norm(std::size_t dim) {
    LayerNorm ln;
    ln.gain = Tensor::ones({dim}, true);
    ln.shift = Tensor::zeros({dim}, true);
    return ln;
}

Tensor layer_norm_forward(const LayerNorm& params, const Tensor& x) {
    const std::size_t dim = x.shape().back();
    if (params.gain.size() != dim) {
        throw ShapeMismatch("layer norm dim " + std::to_string(params.gain.size()) + " vs input " +
                            shape_str(x.shape()));
    }
    const std::size_t last = x.rank() - 1;
    Tensor mu = reduce(Red::Mean, x, last, true);
    Tensor centered = sub(x, mu);
    Tensor var = reduce(Red::Mean, mul(centered, centered), last, true);
    Tensor denom = sqrt_(add(var, Tensor::scalar(1e-5f)));
    Tensor normalized = div(centered, denom);
    return add(mul(normalized, params.gain), params.shift);
}

MultiHeadSelfAttention make_attention(Rng& rng, std::size_t model_dim, std::size_t num_heads) {
    if (num_heads == 0 || model_dim % num_heads != 0) {
        throw ShapeMismatch("model_dim " + std::to_string(model_dim) + " not divisible by " +
                            std::to_string(num_heads) + " heads");
    }
    MultiHeadSelfAttention attn;
    attn.num_heads = num_heads;
    attn.head_dim = model_dim / num_heads;
    attn.w_q = make_linear(rng, model_dim, model_dim);
    attn.w_k = make_linear(rng, model_dim, model_dim);
    attn.w_v = make_linear(rng, model_dim, model_dim);
    attn.w_o = make_linear(rng, model_dim, model_dim);
    return attn;
}

Tensor attention_forward(const MultiHeadSelfAttention& attn, const Tensor& x,
                         std::vector<Tensor>* attn_weights) {
    if (x.rank() != 3 || x.shape()[2] != attn.model_dim()) {
        throw ShapeMismatch("attention expects [batch, tokens, " +
                            std::to_string(attn.model_dim()) + "], got " + shape_str(x.shape()));
    }
    Tensor q = linear_forward(attn.w_q, x);
    Tensor k = linear_forward(attn.w_k, x);
    Tensor v = linear_forward(attn.w_v, x);

    const float scale_factor = 1.0f / std::sqrt(static_cast<float>(attn.head_dim));
    std::vector<Tensor> heads;
    heads.reserve(attn.num_heads);
    for (std::size_t h = 0; h < attn.num_heads; ++h) {
        const std::size_t off = h * attn.head_dim;
        Tensor qh = slice_last(q, off, attn.head_dim);
        Tensor kh = slice_last(k, off, attn.head_dim);
        Tensor vh = slice_last(v, off, attn.head_dim);
        Tensor scores = scale(matmul(qh, transpose_last(kh)), scale_factor);
        Tensor weights = softmax(scores, 2);
        if (attn_weights) attn_weights->push_back(weights);
        heads.push_back(matmul(weights, vh));
    }
    return linear_forward(attn.w_o, concat_last(heads));
}

TransformerEncoderBlock make_encoder_block(Rng& rng, std::size_t model_dim, std::size_t num_heads,
                                           std::size_t ffn_hidden) {
    TransformerEncoderBlock block;
    block.attention = make_attention(rng, model_dim, num_heads);
    block.ffn1 = make_linear(rng, model_dim, ffn_hidden);
    block.ffn2 = make_linear(rng, ffn_hidden, model_dim);
    block.norm1 = make_layer_norm(model_dim);
    block.norm2 = make_layer_norm(model_dim);
    return block;
}

Tensor encoder_block_forward(const TransformerEncoderBlock& block, const Tensor& x) {
    Tensor h = layer_norm_forward(block.norm1, add(x, attention_forward(block.attention, x)));
    Tensor f = linear_forward(block.ffn2, gelu(linear_forward(block.ffn1, h)));
    return layer_norm_forward(block.norm2, add(h, f));
}

SEBlock make_se_block(Rng& rng, std::size_t dim, std::size_t reduction) {
    if (reduction == 0 || dim % reduction != 0) {
        throw ShapeMismatch("SE dim " + std::to_string(dim) + " not divisible by reduction " +
                            std::to_string(reduction));
    }
    SEBlock se;
    se.reduction = reduction;
    se.fc_reduce = make_linear(rng, dim, dim / reduction);
    se.fc_expand = make_linear(rng, dim / reduction, dim);
    return se;
}

Tensor se_block_forward(const SEBlock& se, const Tensor& x) {
    if (x.rank() != 2 || x.shape()[1] != se.fc_reduce.in_dim()) {
        throw ShapeMismatch("SE expects [batch, " + std::to_string(se.fc_reduce.in_dim()) +
                            "], got " + shape_str(x.shape()));
    }
    Tensor gate = sigmoid(linear_forward(se.fc_expand, relu(linear_forward(se.fc_reduce, x))));
    return mul(x, gate);
}

void append_params(const LinearLayer& l, std::vector<Tensor>& out) {
    out.push_back(l.weight);
    out.push_back(l.bias);
}

void append_params(const LayerNorm& l, std::vector<Tensor>& out) {
    out.push_back(l.gain);
    out.push_back(l.shift);
}

void append_params(const MultiHeadSelfAttention& a, std::vector<Tensor>& out) {
    append_params(a.w_q, out);
    append_params(a.w_k, out);
    append_params(a.w_v, out);
    append_params(a.w_o, out);
}

void append_params(const TransformerEncoderBlock& b, std::vector<Tensor>& out) {
    append_params(b.attention, out);
    append_params(b.ffn1, out);
    append_params(b.ffn2, out);
    append_params(b.norm1, out);
    append_params(b.norm2, out);
}

void append_params(const SEBlock& s, std::vector<Tensor>& out) {
    append_params(s.fc_reduce, out);
    append_params(s.fc_expand, out);
}

AdamState make_adam(const std::vector<Tensor>& params, float lr, float beta1, float beta2,
                    float eps) {
    AdamState state;
    state.lr = lr;
    state.beta1 = beta1;
    state.beta2 = beta2;
    state.eps = eps;
    state.m.reserve(params.size());
    state.v.reserve(params.size());
    for (const Tensor& p : params) {
        state.m.emplace_back(p.size(), 0.0f);
        state.v.emplace_back(p.size(), 0.0f);
    }
    return state;
}

void adam_step(AdamState& state, std::vector<Tensor>& params) {
    if (params.size() != state.m.size()) {
        throw ShapeMismatch("adam state has " + std::to_string(state.m.size()) +
                            " slots, got " + std::to_string(params.size()) + " params");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].has_grad()) {
            throw MissingGrad("parameter " + std::to_string(i) + " in adam_step");
        }
        if (params[i].size() != state.m[i].size()) {
            throw ShapeMismatch("adam slot " + std::to_string(i) + " size");
        }
    }
    state.t += 1;
    const float bc1 = 1.0f - static_cast<float>(std::pow(state.beta1, state.t));
    const float bc2 = 1.0f - static_cast<float>(std::pow(state.beta2, state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto grad = params[i].grad();
        auto theta = params[i].values();
        std::vector<float>& m = state.m[i];
        std::vector<float>& v = state.v[i];
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const float g = grad[j];
            m[j] = state.beta1 * m[j] + (1.0f - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0f - state.beta2) * g * g;
            const float mhat = m[j] / bc1;
            const float vhat = v[j] / bc2;
            theta[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
        params[i].clear_grad();
    }
}

}  // namespace forge
