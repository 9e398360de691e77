#include "forge/oversample.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace forge {

// ---- SMOTE --------------------------------------------------------------------

std::vector<std::vector<std::size_t>> nearest_neighbors(const Matrix& x, int k) {
    const std::size_t n = x.rows;
    std::vector<std::vector<std::size_t>> result(n);
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        dist.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double d2 = 0.0;
            const float* a = x.data.data() + i * x.cols;
            const float* b = x.data.data() + j * x.cols;
            for (std::size_t c = 0; c < x.cols; ++c) {
                const double diff = static_cast<double>(a[c]) - static_cast<double>(b[c]);
                d2 += diff * diff;
            }
            dist.emplace_back(d2, j);
        }
        const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), dist.size());
        std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
        result[i].reserve(kk);
        for (std::size_t t = 0; t < kk; ++t) result[i].push_back(dist[t].second);
    }
    return result;
}

Matrix smote_generate(const Matrix& x_minority, const SmoteConfig& cfg) {
    if (cfg.k_neighbors < 1) throw TooFewMinoritySamples("k must be >= 1");
    if (x_minority.rows <= static_cast<std::size_t>(cfg.k_neighbors)) {
        throw TooFewMinoritySamples(std::to_string(x_minority.rows) + " rows for k=" +
                                    std::to_string(cfg.k_neighbors));
    }
    Matrix out(cfg.n_synthetic, x_minority.cols);
    if (cfg.n_synthetic == 0) return out;

    const auto neighbors = nearest_neighbors(x_minority, cfg.k_neighbors);
    Rng rng(cfg.seed);
    for (std::size_t s = 0; s < cfg.n_synthetic; ++s) {
        const std::size_t base = rng.index(x_minority.rows);
        const std::size_t nn = neighbors[base][rng.index(neighbors[base].size())];
        const double lambda = rng.uniform();
        const float* xi = x_minority.data.data() + base * x_minority.cols;
        const float* xn = x_minority.data.data() + nn * x_minority.cols;
        float* row = out.data.data() + s * out.cols;
        for (std::size_t c = 0; c < out.cols; ++c) {
            // interpolate in double and round once, so the segment-membership
            // contract holds to 1e-6 on float32 data
            row[c] = static_cast<float>(xi[c] + lambda * (static_cast<double>(xn[c]) - xi[c]));
        }
    }
    return out;
}

// ---- GAN + Transformer ----------------------------------------------------------

GanTransformerModel make_gan(const GanConfig& cfg, std::size_t width, Rng& rng) {
    if (width == 0) throw EmptyMinority("gan model needs at least one feature");
    GanTransformerModel model;
    model.config = cfg;
    model.width = width;
    const std::size_t flat = width * cfg.model_dim;

    model.generator.noise_proj = make_linear(rng, cfg.latent_dim, flat);
    model.generator.feature_embeddings = glorot_uniform(rng, width, cfg.model_dim, {width, cfg.model_dim});
    for (std::size_t b = 0; b < cfg.num_blocks; ++b) {
        model.generator.blocks.push_back(
            make_encoder_block(rng, cfg.model_dim, cfg.num_heads, cfg.ffn_hidden));
    }
    model.generator.se_gate = make_se_block(rng, flat, cfg.se_reduction);
    model.generator.output_head = make_linear(rng, flat, width);

    model.discriminator.l1 = make_linear(rng, width, cfg.disc_hidden1);
    model.discriminator.l2 = make_linear(rng, cfg.disc_hidden1, cfg.disc_hidden2);
    model.discriminator.l3 = make_linear(rng, cfg.disc_hidden2, 1);

    model.recon_decoder.l1 = make_linear(rng, cfg.disc_hidden2, cfg.recon_hidden);
    model.recon_decoder.l2 = make_linear(rng, cfg.recon_hidden, width);
    return model;
}

Tensor generator_forward(const GanTransformerModel& model, const Tensor& z) {
    const GanConfig& cfg = model.config;
    if (z.rank() != 2 || z.shape()[1] != cfg.latent_dim) {
        throw ShapeMismatch("generator noise must be [batch, " + std::to_string(cfg.latent_dim) +
                            "], got " + shape_str(z.shape()));
    }
    const std::size_t batch = z.shape()[0];
    Tensor tokens = reshape(linear_forward(model.generator.noise_proj, z),
                            {batch, model.width, cfg.model_dim});
    tokens = add(tokens, model.generator.feature_embeddings);
    for (const auto& block : model.generator.blocks) {
        tokens = encoder_block_forward(block, tokens);
    }
    Tensor flat = reshape(tokens, {batch, model.width * cfg.model_dim});
    Tensor gated = se_block_forward(model.generator.se_gate, flat);
    Tensor out = linear_forward(model.generator.output_head, gated);
    return cfg.sigmoid_output ? sigmoid(out) : out;
}

DiscriminatorOut discriminator_forward(const GanTransformerModel& model, const Tensor& rows) {
    Tensor h1 = relu(linear_forward(model.discriminator.l1, rows));
    Tensor h2 = relu(linear_forward(model.discriminator.l2, h1));
    return {linear_forward(model.discriminator.l3, h2), h2};
}

Tensor recon_forward(const GanTransformerModel& model, const Tensor& penultimate) {
    return linear_forward(model.recon_decoder.l2,
                          relu(linear_forward(model.recon_decoder.l1, penultimate)));
}

std::vector<Tensor> generator_params(const GanTransformerModel& model) {
    std::vector<Tensor> params;
    append_params(model.generator.noise_proj, params);
    params.push_back(model.generator.feature_embeddings);
    for (const auto& block : model.generator.blocks) append_params(block, params);
    append_params(model.generator.se_gate, params);
    append_params(model.generator.output_head, params);
    return params;
}

std::vector<Tensor> discriminator_params(const GanTransformerModel& model) {
    std::vector<Tensor> params;
    append_params(model.discriminator.l1, params);
    append_params(model.discriminator.l2, params);
    append_params(model.discriminator.l3, params);
    append_params(model.recon_decoder.l1, params);
    append_params(model.recon_decoder.l2, params);
    return params;
}

Tensor randn_tensor(Rng& rng, std::size_t rows, std::size_t cols) {
    std::vector<float> values(rows * cols);
    for (float& v : values) v = static_cast<float>(rng.normal());
    return Tensor({rows, cols}, std::move(values));
}

namespace {

Tensor gather_rows(const Matrix& x, const std::vector<std::size_t>& idx) {
    std::vector<float> values(idx.size() * x.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        std::memcpy(values.data() + i * x.cols, x.data.data() + idx[i] * x.cols,
                    x.cols * sizeof(float));
    }
    return Tensor({idx.size(), x.cols}, std::move(values));
}

}  // namespace

std::pair<GanTransformerModel, TrainTrace> gan_train(const Matrix& x_minority,
                                                     const GanConfig& cfg, Rng& rng) {
    if (x_minority.rows == 0) throw EmptyMinority("gan_train");
    if (cfg.batch_size == 0) throw ShapeMismatch("gan batch_size must be positive");
    const std::size_t n = x_minority.rows;
    const std::size_t batch = cfg.batch_size;

    GanTransformerModel model = make_gan(cfg, x_minority.cols, rng);
    std::vector<Tensor> g_params = generator_params(model);
    std::vector<Tensor> d_params = discriminator_params(model);
    AdamState g_opt = make_adam(g_params, cfg.lr);
    AdamState d_opt = make_adam(d_params, cfg.lr);

    std::vector<std::vector<float>> ema;
    if (cfg.ema_decay > 0.0f) {
        ema.reserve(g_params.size());
        for (const Tensor& p : g_params) {
            ema.emplace_back(p.values().begin(), p.values().end());
        }
    }

    TrainTrace trace;
    trace.columns = {"d_loss", "g_loss", "recon_loss"};

    const std::size_t batches = std::max<std::size_t>(1, n / batch);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (n >= batch) rng.shuffle(perm);
        double d_sum = 0.0, g_sum = 0.0, rec_sum = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            std::vector<std::size_t> idx(batch);
            if (n >= batch) {
                for (std::size_t i = 0; i < batch; ++i) idx[i] = perm[b * batch + i];
            } else {
                for (std::size_t i = 0; i < batch; ++i) idx[i] = rng.index(n);
            }
            Tensor real = gather_rows(x_minority, idx);
            Tensor ones({batch, 1}, 1.0f);
            Tensor zeros({batch, 1}, 0.0f);

            // discriminator update; fake rows are detached from the generator
            Tensor fake = generator_forward(model, randn_tensor(rng, batch, cfg.latent_dim));
            double d_loss_value;
            {
                Tape tape;
                DiscriminatorOut real_out = discriminator_forward(model, real);
                DiscriminatorOut fake_out = discriminator_forward(model, fake);
                Tensor rec = recon_forward(model, fake_out.penultimate);
                Tensor adv = scale(add(bce_with_logits(real_out.logits, ones),
                                       bce_with_logits(fake_out.logits, zeros)),
                                   0.5f);
                Tensor d_loss = add(adv, scale(mse(rec, fake), cfg.lambda_rec));
                d_loss_value = d_loss.item();
                tape.backward(d_loss);
                adam_step(d_opt, d_params);
            }

            // generator update; discriminator grads are discarded, not applied
            double g_loss_value, rec_value;
            {
                Tape tape;
                Tensor fake2 = generator_forward(model, randn_tensor(rng, batch, cfg.latent_dim));
                DiscriminatorOut out = discriminator_forward(model, fake2);
                Tensor rec = recon_forward(model, out.penultimate);
                Tensor rec_loss = mse(rec, fake2);
                Tensor g_loss = add(bce_with_logits(out.logits, ones), scale(rec_loss, cfg.lambda_rec));
                g_loss_value = g_loss.item();
                rec_value = rec_loss.item();
                tape.backward(g_loss);
                adam_step(g_opt, g_params);
                for (Tensor& p : d_params) p.clear_grad();
            }

            if (!ema.empty()) {
                const float decay = cfg.ema_decay;
                for (std::size_t p = 0; p < g_params.size(); ++p) {
                    auto values = g_params[p].values();
                    for (std::size_t j = 0; j < values.size(); ++j) {
                        ema[p][j] = decay * ema[p][j] + (1.0f - decay) * values[j];
                    }
                }
            }

            if (std::isnan(d_loss_value) || std::isnan(g_loss_value)) {
                throw DivergenceDetected("gan loss NaN at epoch " + std::to_string(epoch + 1),
                                         trace);
            }
            d_sum += d_loss_value;
            g_sum += g_loss_value;
            rec_sum += rec_value;
        }
        const double nb = static_cast<double>(batches);
        trace.epochs.push_back({d_sum / nb, g_sum / nb, rec_sum / nb});
    }

    if (!ema.empty()) {
        for (std::size_t p = 0; p < g_params.size(); ++p) {
            std::copy(ema[p].begin(), ema[p].end(), g_params[p].values().begin());
        }
    }
    return {std::move(model), std::move(trace)};
}

Matrix gan_sample(const GanTransformerModel& model, std::size_t n, Rng& rng) {
    Matrix out(n, model.width);
    constexpr std::size_t kChunk = 512;
    std::size_t done = 0;
    while (done < n) {
        const std::size_t take = std::min(kChunk, n - done);
        Tensor rows = generator_forward(model, randn_tensor(rng, take, model.config.latent_dim));
        std::memcpy(out.data.data() + done * model.width, rows.values().data(),
                    take * model.width * sizeof(float));
        done += take;
    }
    return out;
}

// ---- TVAE -----------------------------------------------------------------------

TvaeModel make_tvae(const TvaeConfig& cfg, std::size_t width, Rng& rng) {
    if (width == 0) throw EmptyMinority("tvae model needs at least one feature");
    TvaeModel model;
    model.config = cfg;
    model.width = width;
    model.enc1 = make_linear(rng, width, cfg.hidden);
    model.mu_head = make_linear(rng, cfg.hidden, cfg.latent_dim);
    model.logvar_head = make_linear(rng, cfg.hidden, cfg.latent_dim);
    model.dec1 = make_linear(rng, cfg.latent_dim, cfg.hidden);
    model.dec2 = make_linear(rng, cfg.hidden, width);
    return model;
}

std::vector<Tensor> tvae_params(const TvaeModel& model) {
    std::vector<Tensor> params;
    append_params(model.enc1, params);
    append_params(model.mu_head, params);
    append_params(model.logvar_head, params);
    append_params(model.dec1, params);
    append_params(model.dec2, params);
    return params;
}

Tensor tvae_kl(const Tensor& mu, const Tensor& logvar) {
    if (mu.shape() != logvar.shape()) {
        throw ShapeMismatch("kl " + shape_str(mu.shape()) + " vs " + shape_str(logvar.shape()));
    }
    Tensor one = Tensor::scalar(1.0f);
    Tensor per_dim = sub(sub(add(mul(mu, mu), exp_(logvar)), one), logvar);
    Tensor per_sample = reduce(Red::Sum, per_dim, 1);
    return scale(reduce(Red::Mean, per_sample), 0.5f);
}

Tensor tvae_reconstruct(const TvaeModel& model, const Tensor& x, const Tensor& noise,
                        Tensor* mu_out, Tensor* logvar_out) {
    Tensor h = relu(linear_forward(model.enc1, x));
    Tensor mu = linear_forward(model.mu_head, h);
    Tensor logvar = linear_forward(model.logvar_head, h);
    if (mu_out) *mu_out = mu;
    if (logvar_out) *logvar_out = logvar;
    Tensor std_dev = exp_(scale(logvar, 0.5f));
    Tensor z = add(mu, mul(std_dev, noise));
    return linear_forward(model.dec2, relu(linear_forward(model.dec1, z)));
}

std::pair<TvaeModel, TrainTrace> tvae_train(const Matrix& x_minority, const TvaeConfig& cfg,
                                            Rng& rng) {
    if (x_minority.rows == 0) throw EmptyMinority("tvae_train");
    if (cfg.batch_size == 0) throw ShapeMismatch("tvae batch_size must be positive");
    const std::size_t n = x_minority.rows;
    const std::size_t batch = cfg.batch_size;

    TvaeModel model = make_tvae(cfg, x_minority.cols, rng);
    std::vector<Tensor> params = tvae_params(model);
    AdamState opt = make_adam(params, cfg.lr);

    TrainTrace trace;
    trace.columns = {"recon_loss", "kl_loss", "total_loss"};

    const std::size_t batches = std::max<std::size_t>(1, n / batch);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (n >= batch) rng.shuffle(perm);
        double rec_sum = 0.0, kl_sum = 0.0, total_sum = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
            std::vector<std::size_t> idx(batch);
            if (n >= batch) {
                for (std::size_t i = 0; i < batch; ++i) idx[i] = perm[b * batch + i];
            } else {
                for (std::size_t i = 0; i < batch; ++i) idx[i] = rng.index(n);
            }
            Tensor x = gather_rows(x_minority, idx);
            Tensor noise = randn_tensor(rng, idx.size(), cfg.latent_dim);

            Tape tape;
            Tensor mu, logvar;
            Tensor xhat = tvae_reconstruct(model, x, noise, &mu, &logvar);
            Tensor rec = mse(xhat, x);
            Tensor kl = tvae_kl(mu, logvar);
            Tensor total = add(rec, scale(kl, cfg.beta));
            const double rec_value = rec.item();
            const double kl_value = kl.item();
            const double total_value = total.item();
            tape.backward(total);
            adam_step(opt, params);

            if (std::isnan(total_value)) {
                throw DivergenceDetected("tvae loss NaN at epoch " + std::to_string(epoch + 1),
                                         trace);
            }
            rec_sum += rec_value;
            kl_sum += kl_value;
            total_sum += total_value;
        }
        const double nb = static_cast<double>(batches);
        trace.epochs.push_back({rec_sum / nb, kl_sum / nb, total_sum / nb});
    }
    return {std::move(model), std::move(trace)};
}

Matrix tvae_sample(const TvaeModel& model, std::size_t n, Rng& rng) {
    Matrix out(n, model.width);
    constexpr std::size_t kChunk = 1024;
    std::size_t done = 0;
    while (done < n) {
        const std::size_t take = std::min(kChunk, n - done);
        Tensor z = randn_tensor(rng, take, model.config.latent_dim);
        Tensor rows = linear_forward(model.dec2, relu(linear_forward(model.dec1, z)));
        std::memcpy(out.data.data() + done * model.width, rows.values().data(),
                    take * model.width * sizeof(float));
        done += take;
    }
    return out;
}

// ---- shared ---------------------------------------------------------------------

Dataset augment_dataset(const Dataset& d, const Matrix& synthetic, std::uint8_t label) {
    if (synthetic.rows > 0 && synthetic.cols != d.width()) {
        throw WidthMismatch("synthetic width " + std::to_string(synthetic.cols) +
                            " vs dataset width " + std::to_string(d.width()));
    }
    Dataset out;
    out.feature_names = d.feature_names;
    out.features = Matrix(d.rows() + synthetic.rows, d.width());
    if (!d.features.data.empty()) {
        std::memcpy(out.features.data.data(), d.features.data.data(),
                    d.features.data.size() * sizeof(float));
    }
    if (!synthetic.data.empty()) {
        std::memcpy(out.features.data.data() + d.features.data.size(), synthetic.data.data(),
                    synthetic.data.size() * sizeof(float));
    }
    out.labels = d.labels;
    out.labels.insert(out.labels.end(), synthetic.rows, label);
    out.synthetic_mask = d.synthetic_mask;
    out.synthetic_mask.insert(out.synthetic_mask.end(), synthetic.rows, 1);
    return out;
}

}  // namespace forge
