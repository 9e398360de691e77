#include <cmath>

#include "doctest.h"
#include "forge/nn.hpp"

using namespace forge;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    std::vector<float> values(shape_size(shape));
    for (float& v : values) v = static_cast<float>(rng.uniform(lo, hi));
    return Tensor(std::move(shape), std::move(values));
}

Tensor anchor_weights(Rng& rng, Shape shape) {
    std::vector<float> values(shape_size(shape));
    for (float& v : values) {
        const double magnitude = rng.uniform(5.0, 6.0);
        v = static_cast<float>(rng.uniform() < 0.5 ? -magnitude : magnitude);
    }
    return Tensor(std::move(shape), std::move(values));
}

void fill(Tensor& t, float v) { std::fill(t.values().begin(), t.values().end(), v); }

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("linear: identity weights pass input through") {
    Rng rng(1);
    LinearLayer layer = make_linear(rng, 3, 3);
    fill(layer.weight, 0.0f);
    for (std::size_t i = 0; i < 3; ++i) layer.weight.values()[i * 3 + i] = 1.0f;
    Tensor x = random_tensor(rng, {4, 3});
    Tensor y = linear_forward(layer, x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.values()[i] == x.values()[i]);
}

TEST_CASE("linear: hand-computed single sample") {
    Rng rng(2);
    LinearLayer layer = make_linear(rng, 2, 1);
    layer.weight.values()[0] = 1.0f;
    layer.weight.values()[1] = 2.0f;
    layer.bias.values()[0] = 0.5f;
    Tensor x({1, 2}, {1.0f, 1.0f});
    // [1,1]·[[1],[2]] + [0.5] = 3.5
    CHECK(linear_forward(layer, x).values()[0] == doctest::Approx(3.5));
    CHECK_THROWS_AS(linear_forward(layer, Tensor({1, 3}, 1.0f)), ShapeMismatch);
}

TEST_CASE("linear: gradients w.r.t. input, weight and bias") {
    Rng rng(3);
    LinearLayer layer = make_linear(rng, 4, 3);
    Tensor x = random_tensor(rng, {2, 4});
    Tensor out_anchor = anchor_weights(rng, {2, 3});
    Tensor in_anchor = anchor_weights(rng, {2, 4});

    auto wrt_input = [&](const Tensor& probe) {
        return add(sum(mul(linear_forward(layer, probe), out_anchor)), sum(mul(probe, in_anchor)));
    };
    CHECK(finite_difference_check(wrt_input, x) < 1e-3);

    Tensor w_anchor = anchor_weights(rng, {4, 3});
    auto wrt_weight = [&](const Tensor& probe) {
        LinearLayer l{probe, layer.bias};
        return add(scale(sum(mul(linear_forward(l, x), out_anchor)), 0.1f),
                   sum(mul(probe, w_anchor)));
    };
    CHECK(finite_difference_check(wrt_weight, layer.weight.detach()) < 1e-3);

    auto wrt_bias = [&](const Tensor& probe) {
        LinearLayer l{layer.weight, probe};
        return sum(mul(linear_forward(l, x), out_anchor));
    };
    CHECK(finite_difference_check(wrt_bias, layer.bias.detach()) < 1e-3);
}

TEST_CASE("layer norm: constant row maps to shift") {
    LayerNorm ln = make_layer_norm(4);
    for (std::size_t i = 0; i < 4; ++i) ln.shift.values()[i] = static_cast<float>(i);
    Tensor x({2, 4}, 3.25f);
    Tensor y = layer_norm_forward(ln, x);
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(y.values()[r * 4 + c] == doctest::Approx(static_cast<double>(c)).epsilon(1e-5));
        }
    }
}

TEST_CASE("layer norm: rows normalized to mean 0, variance 1 under unit gain") {
    Rng rng(5);
    LayerNorm ln = make_layer_norm(16);
    Tensor x = random_tensor(rng, {3, 16}, -4, 4);
    Tensor y = layer_norm_forward(ln, x);
    for (std::size_t r = 0; r < 3; ++r) {
        double mean = 0.0, var = 0.0;
        for (std::size_t c = 0; c < 16; ++c) mean += y.values()[r * 16 + c];
        mean /= 16.0;
        for (std::size_t c = 0; c < 16; ++c) {
            const double d = y.values()[r * 16 + c] - mean;
            var += d * d;
        }
        var /= 16.0;
        CHECK(std::abs(mean) < 1e-5);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("layer norm: gradient check") {
    Rng rng(7);
    LayerNorm ln = make_layer_norm(5);
    for (auto& v : ln.gain.values()) v = static_cast<float>(rng.uniform(0.5, 1.5));
    Tensor out_anchor = anchor_weights(rng, {2, 5});
    Tensor in_anchor = anchor_weights(rng, {2, 5});
    auto f = [&](const Tensor& probe) {
        return add(sum(mul(layer_norm_forward(ln, probe), out_anchor)),
                   sum(mul(probe, in_anchor)));
    };
    CHECK(finite_difference_check(f, random_tensor(rng, {2, 5})) < 1e-3);

    Tensor x = random_tensor(rng, {2, 5});
    Tensor gain_anchor = anchor_weights(rng, {5});
    auto wrt_gain = [&](const Tensor& probe) {
        LayerNorm l{probe, ln.shift};
        return add(scale(sum(mul(layer_norm_forward(l, x), out_anchor)), 0.1f),
                   sum(mul(probe, gain_anchor)));
    };
    CHECK(finite_difference_check(wrt_gain, ln.gain.detach()) < 1e-3);
}

TEST_CASE("attention: a single token attends only to itself") {
    Rng rng(11);
    MultiHeadSelfAttention attn = make_attention(rng, 8, 2);
    Tensor x = random_tensor(rng, {3, 1, 8});
    Tensor out = attention_forward(attn, x);
    // softmax over one key is 1, so the output is W_o applied to the V row
    Tensor expected = linear_forward(attn.w_o, linear_forward(attn.w_v, x));
    REQUIRE(out.shape() == expected.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out.values()[i] == doctest::Approx(expected.values()[i]).epsilon(1e-5));
    }
}

TEST_CASE("attention: weight rows sum to 1") {
    Rng rng(13);
    MultiHeadSelfAttention attn = make_attention(rng, 8, 4);
    Tensor x = random_tensor(rng, {2, 5, 8});
    std::vector<Tensor> weights;
    attention_forward(attn, x, &weights);
    REQUIRE(weights.size() == 4);
    for (const Tensor& w : weights) {
        REQUIRE(w.shape() == Shape{2, 5, 5});
        for (std::size_t row = 0; row < 2 * 5; ++row) {
            double s = 0.0;
            for (std::size_t c = 0; c < 5; ++c) {
                const float v = w.values()[row * 5 + c];
                CHECK(v >= 0.0f);
                s += v;
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
        }
    }
}

TEST_CASE("attention: two tokens, one head, identity projections, hand-verified") {
    Rng rng(17);
    MultiHeadSelfAttention attn = make_attention(rng, 2, 1);
    for (LinearLayer* l : {&attn.w_q, &attn.w_k, &attn.w_v, &attn.w_o}) {
        fill(l->weight, 0.0f);
        l->weight.values()[0] = 1.0f;
        l->weight.values()[3] = 1.0f;
        fill(l->bias, 0.0f);
    }
    Tensor x({1, 2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
    std::vector<Tensor> weights;
    Tensor out = attention_forward(attn, x, &weights);

    // Q=K=V=x; scores s_ij = (x_i . x_j)/sqrt(2) = delta_ij/sqrt(2)
    const double s = 1.0 / std::sqrt(2.0);
    const double w_self = std::exp(s) / (std::exp(s) + 1.0);
    const double w_other = 1.0 - w_self;
    REQUIRE(weights.size() == 1);
    CHECK(weights[0].values()[0] == doctest::Approx(w_self).epsilon(1e-5));
    CHECK(weights[0].values()[1] == doctest::Approx(w_other).epsilon(1e-5));
    // out_0 = w_self*[1,0] + w_other*[0,1]
    CHECK(out.values()[0] == doctest::Approx(w_self).epsilon(1e-5));
    CHECK(out.values()[1] == doctest::Approx(w_other).epsilon(1e-5));
    CHECK(out.values()[2] == doctest::Approx(w_other).epsilon(1e-5));
    CHECK(out.values()[3] == doctest::Approx(w_self).epsilon(1e-5));
}

TEST_CASE("attention: gradient check") {
    Rng rng(19);
    MultiHeadSelfAttention attn = make_attention(rng, 4, 2);
    Tensor out_anchor = anchor_weights(rng, {2, 3, 4});
    Tensor in_anchor = anchor_weights(rng, {2, 3, 4});
    auto f = [&](const Tensor& probe) {
        return add(scale(sum(mul(attention_forward(attn, probe), out_anchor)), 0.1f),
                   sum(mul(probe, in_anchor)));
    };
    CHECK(finite_difference_check(f, random_tensor(rng, {2, 3, 4})) < 1e-3);

    Tensor x = random_tensor(rng, {2, 3, 4});
    Tensor wq_anchor = anchor_weights(rng, {4, 4});
    auto wrt_wq = [&](const Tensor& probe) {
        MultiHeadSelfAttention a = attn;
        a.w_q.weight = probe;
        return add(scale(sum(mul(attention_forward(a, x), out_anchor)), 0.1f),
                   sum(mul(probe, wq_anchor)));
    };
    CHECK(finite_difference_check(wrt_wq, attn.w_q.weight.detach()) < 1e-3);
}

TEST_CASE("encoder block: output shape equals input shape") {
    Rng rng(23);
    for (auto [batch, tokens] : {std::pair<std::size_t, std::size_t>{1, 1}, {2, 3}, {4, 7}}) {
        TransformerEncoderBlock block = make_encoder_block(rng, 8, 2, 16);
        Tensor x = random_tensor(rng, {batch, tokens, 8});
        CHECK(encoder_block_forward(block, x).shape() == x.shape());
    }
}

TEST_CASE("encoder block: zero attention/ffn output weights reduce to stacked layer norms") {
    Rng rng(29);
    TransformerEncoderBlock block = make_encoder_block(rng, 6, 2, 12);
    fill(block.attention.w_o.weight, 0.0f);
    fill(block.attention.w_o.bias, 0.0f);
    fill(block.ffn2.weight, 0.0f);
    fill(block.ffn2.bias, 0.0f);
    Tensor x = random_tensor(rng, {2, 4, 6});
    Tensor got = encoder_block_forward(block, x);
    Tensor expected = layer_norm_forward(block.norm2, layer_norm_forward(block.norm1, x));
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got.values()[i] == doctest::Approx(expected.values()[i]).epsilon(1e-5));
    }
}

TEST_CASE("encoder block: gradient check through the full block") {
    Rng rng(31);
    TransformerEncoderBlock block = make_encoder_block(rng, 4, 2, 8);
    Tensor out_anchor = anchor_weights(rng, {1, 3, 4});
    Tensor in_anchor = anchor_weights(rng, {1, 3, 4});
    auto f = [&](const Tensor& probe) {
        return add(scale(sum(mul(encoder_block_forward(block, probe), out_anchor)), 0.1f),
                   sum(mul(probe, in_anchor)));
    };
    CHECK(finite_difference_check(f, random_tensor(rng, {1, 3, 4})) < 1e-3);
}

TEST_CASE("SE block: gate in (0,1) and saturation limit") {
    Rng rng(37);
    SEBlock se = make_se_block(rng, 8, 4);
    CHECK_THROWS_AS(make_se_block(rng, 6, 4), ShapeMismatch);

    Tensor x = random_tensor(rng, {3, 8});
    Tensor out = se_block_forward(se, x);
    for (std::size_t i = 0; i < out.size(); ++i) {
        // |out| < |x| elementwise because the gate is strictly inside (0,1)
        if (x.values()[i] != 0.0f) CHECK(std::abs(out.values()[i]) < std::abs(x.values()[i]));
    }

    fill(se.fc_expand.bias, 60.0f);  // gate saturates at 1
    Tensor saturated = se_block_forward(se, x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(saturated.values()[i] == doctest::Approx(x.values()[i]).epsilon(1e-4));
    }
}

TEST_CASE("SE block: gradient check") {
    Rng rng(41);
    SEBlock se = make_se_block(rng, 8, 4);
    Tensor out_anchor = anchor_weights(rng, {2, 8});
    Tensor in_anchor = anchor_weights(rng, {2, 8});
    auto f = [&](const Tensor& probe) {
        return add(scale(sum(mul(se_block_forward(se, probe), out_anchor)), 0.1f),
                   sum(mul(probe, in_anchor)));
    };
    CHECK(finite_difference_check(f, random_tensor(rng, {2, 8})) < 1e-3);

    Tensor x = random_tensor(rng, {2, 8});
    Tensor reduce_anchor = anchor_weights(rng, {8, 2});
    auto wrt_reduce = [&](const Tensor& probe) {
        SEBlock s = se;
        s.fc_reduce.weight = probe;
        return add(scale(sum(mul(se_block_forward(s, x), out_anchor)), 0.1f),
                   sum(mul(probe, reduce_anchor)));
    };
    CHECK(finite_difference_check(wrt_reduce, se.fc_reduce.weight.detach()) < 1e-3);
}

TEST_CASE("adam: zero gradient is a fixed point from a fresh state") {
    Tensor p({3}, {0.5f, -0.25f, 2.0f}, true);
    std::vector<Tensor> params{p};
    AdamState opt = make_adam(params, 1e-3f);
    {
        Tape tape;
        tape.backward(sum(mul(p, Tensor({3}, 0.0f))));
    }
    adam_step(opt, params);
    CHECK(p.values()[0] == 0.5f);
    CHECK(p.values()[1] == -0.25f);
    CHECK(p.values()[2] == 2.0f);
}

TEST_CASE("adam: first step with unit gradient moves by about -lr") {
    Tensor p({1}, 0.5f, true);
    std::vector<Tensor> params{p};
    AdamState opt = make_adam(params, 1e-3f);
    {
        Tape tape;
        tape.backward(sum(p));  // gradient exactly 1
    }
    adam_step(opt, params);
    // bias-corrected m_hat = v_hat = 1, so the update is lr/(1+eps)
    CHECK(p.values()[0] == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
    CHECK(opt.t == 1);
    CHECK_FALSE(p.has_grad());  // grads cleared by the step
}

TEST_CASE("adam: missing gradient raises") {
    Tensor p({2}, 1.0f, true);
    std::vector<Tensor> params{p};
    AdamState opt = make_adam(params, 1e-3f);
    CHECK_THROWS_AS(adam_step(opt, params), MissingGrad);
}

TEST_CASE("adam: second moment stays non-negative over 100 random steps") {
    Rng rng(43);
    Tensor p({4}, 0.0f, true);
    std::vector<Tensor> params{p};
    AdamState opt = make_adam(params, 1e-2f);
    for (int step = 0; step < 100; ++step) {
        Tensor target = random_tensor(rng, {4}, -3, 3);
        Tape tape;
        tape.backward(mse(mul(p, Tensor::ones({4})), target));
        adam_step(opt, params);
        for (float v : opt.v[0]) CHECK(v >= 0.0f);
    }
    CHECK(opt.t == 100);
}

TEST_CASE("glorot init: deterministic per seed, zero bias, centered") {
    Rng a(123), b(123), c(321);
    LinearLayer la = make_linear(a, 20, 10);
    LinearLayer lb = make_linear(b, 20, 10);
    LinearLayer lc = make_linear(c, 20, 10);
    for (std::size_t i = 0; i < la.weight.size(); ++i) {
        CHECK(la.weight.values()[i] == lb.weight.values()[i]);
    }
    bool any_diff = false;
    for (std::size_t i = 0; i < la.weight.size(); ++i) {
        if (la.weight.values()[i] != lc.weight.values()[i]) any_diff = true;
    }
    CHECK(any_diff);
    for (float v : la.bias.values()) CHECK(v == 0.0f);

    // sample mean of 10k draws stays within 3 standard errors of 0
    Rng rng(7);
    const std::size_t fan_in = 100, fan_out = 100;
    Tensor w = glorot_uniform(rng, fan_in, fan_out, {100, 100});
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    double mean = 0.0;
    for (float v : w.values()) {
        CHECK(std::abs(v) <= bound);
        mean += v;
    }
    mean /= static_cast<double>(w.size());
    const double sigma_mean = bound / std::sqrt(3.0) / std::sqrt(static_cast<double>(w.size()));
    CHECK(std::abs(mean) < 3.0 * sigma_mean);
}

}  // TEST_SUITE
