#include "forge/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace forge {

using nlohmann::json;

namespace {

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string read_file_or_throw(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CorruptManifest("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::size_t tensor_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& base_path) {
    json manifest;
    manifest["format_version"] = kCheckpointVersion;
    manifest["kind"] = ck.kind;
    manifest["meta"] = ck.meta;

    std::string blob;
    json tensors = json::array();
    for (const CheckpointTensor& t : ck.tensors) {
        json entry;
        entry["name"] = t.name;
        entry["shape"] = t.shape;
        entry["offset"] = blob.size();
        tensors.push_back(entry);
        for (float v : t.data) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            blob.push_back(static_cast<char>(bits & 0xff));
            blob.push_back(static_cast<char>((bits >> 8) & 0xff));
            blob.push_back(static_cast<char>((bits >> 16) & 0xff));
            blob.push_back(static_cast<char>((bits >> 24) & 0xff));
        }
    }
    manifest["tensors"] = tensors;
    manifest["blob_bytes"] = blob.size();

    write_file(base_path + ".json", manifest.dump(2) + "\n");
    write_file(base_path + ".bin", blob);
}

Checkpoint load_checkpoint(const std::string& base_path) {
    const std::string manifest_text = read_file_or_throw(base_path + ".json");
    json manifest;
    try {
        manifest = json::parse(manifest_text);
    } catch (const json::exception& e) {
        throw CorruptManifest(base_path + ".json: " + e.what());
    }
    if (!manifest.is_object() || !manifest.contains("format_version") ||
        !manifest.contains("kind") || !manifest.contains("tensors") ||
        !manifest.contains("blob_bytes")) {
        throw CorruptManifest(base_path + ".json: missing required fields");
    }
    const int version = manifest["format_version"].get<int>();
    if (version != kCheckpointVersion) {
        throw VersionMismatch("checkpoint format " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
    }

    const std::string blob = read_file_or_throw(base_path + ".bin");
    if (blob.size() != manifest["blob_bytes"].get<std::size_t>()) {
        throw CorruptManifest(base_path + ".bin: expected " +
                              std::to_string(manifest["blob_bytes"].get<std::size_t>()) +
                              " bytes, found " + std::to_string(blob.size()));
    }

    Checkpoint ck;
    ck.kind = manifest["kind"].get<std::string>();
    ck.meta = manifest.value("meta", json::object());
    for (const json& entry : manifest["tensors"]) {
        if (!entry.contains("name") || !entry.contains("shape") || !entry.contains("offset")) {
            throw CorruptManifest(base_path + ".json: malformed tensor entry");
        }
        CheckpointTensor t;
        t.name = entry["name"].get<std::string>();
        t.shape = entry["shape"].get<std::vector<std::size_t>>();
        const std::size_t offset = entry["offset"].get<std::size_t>();
        const std::size_t count = tensor_size(t.shape);
        if (offset + count * 4 > blob.size()) {
            throw CorruptManifest(base_path + ".bin: tensor '" + t.name + "' overruns blob");
        }
        t.data.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            const auto* p = reinterpret_cast<const unsigned char*>(blob.data() + offset + i * 4);
            const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                                       (static_cast<std::uint32_t>(p[1]) << 8) |
                                       (static_cast<std::uint32_t>(p[2]) << 16) |
                                       (static_cast<std::uint32_t>(p[3]) << 24);
            std::memcpy(&t.data[i], &bits, sizeof(float));
        }
        ck.tensors.push_back(std::move(t));
    }
    return ck;
}

// ---- tensor adapters -----------------------------------------------------------

namespace {

void push_tensor(Checkpoint& ck, const std::string& name, const Tensor& t) {
    CheckpointTensor entry;
    entry.name = name;
    entry.shape = t.shape();
    entry.data.assign(t.values().begin(), t.values().end());
    ck.tensors.push_back(std::move(entry));
}

// Restores checkpoint tensors into an equally ordered parameter list.
void restore_params(const Checkpoint& ck, std::vector<Tensor>& params, const std::string& kind) {
    if (ck.kind != kind) {
        throw CorruptManifest("checkpoint kind '" + ck.kind + "', expected '" + kind + "'");
    }
    if (ck.tensors.size() != params.size()) {
        throw ShapeMismatch("checkpoint has " + std::to_string(ck.tensors.size()) +
                            " tensors, model expects " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (ck.tensors[i].shape != params[i].shape()) {
            throw ShapeMismatch("tensor '" + ck.tensors[i].name + "' is " +
                                shape_str(ck.tensors[i].shape) + ", model expects " +
                                shape_str(params[i].shape()));
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::copy(ck.tensors[i].data.begin(), ck.tensors[i].data.end(),
                  params[i].values().begin());
    }
}

std::vector<std::string> gan_param_names(const GanTransformerModel& model) {
    std::vector<std::string> names;
    auto linear = [&](const std::string& prefix) {
        names.push_back(prefix + ".weight");
        names.push_back(prefix + ".bias");
    };
    linear("generator.noise_proj");
    names.push_back("generator.feature_embeddings");
    for (std::size_t b = 0; b < model.generator.blocks.size(); ++b) {
        const std::string p = "generator.block" + std::to_string(b);
        linear(p + ".attention.w_q");
        linear(p + ".attention.w_k");
        linear(p + ".attention.w_v");
        linear(p + ".attention.w_o");
        linear(p + ".ffn1");
        linear(p + ".ffn2");
        names.push_back(p + ".norm1.gain");
        names.push_back(p + ".norm1.shift");
        names.push_back(p + ".norm2.gain");
        names.push_back(p + ".norm2.shift");
    }
    linear("generator.se_gate.fc_reduce");
    linear("generator.se_gate.fc_expand");
    linear("generator.output_head");
    linear("discriminator.l1");
    linear("discriminator.l2");
    linear("discriminator.l3");
    linear("recon_decoder.l1");
    linear("recon_decoder.l2");
    return names;
}

json tree_to_json(const DecisionTree& tree) {
    json nodes = json::array();
    for (const TreeNode& n : tree.nodes) {
        nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.value}));
    }
    return json{{"max_depth", tree.max_depth},
                {"min_samples_leaf", tree.min_samples_leaf},
                {"nodes", nodes}};
}

DecisionTree tree_from_json(const json& j) {
    DecisionTree tree;
    tree.max_depth = j.value("max_depth", 0);
    tree.min_samples_leaf = j.value("min_samples_leaf", 1);
    for (const json& row : j.at("nodes")) {
        if (!row.is_array() || row.size() != 5) throw CorruptManifest("malformed tree node");
        TreeNode n;
        n.feature = row[0].get<int>();
        n.threshold = row[1].get<float>();
        n.left = row[2].get<int>();
        n.right = row[3].get<int>();
        n.value = row[4].get<float>();
        tree.nodes.push_back(n);
    }
    if (tree.nodes.empty()) throw CorruptManifest("tree with no nodes");
    return tree;
}

}  // namespace

Checkpoint gan_to_checkpoint(const GanTransformerModel& model) {
    Checkpoint ck;
    ck.kind = "gan_transformer";
    ck.meta["width"] = model.width;
    ck.meta["latent_dim"] = model.config.latent_dim;
    ck.meta["model_dim"] = model.config.model_dim;
    ck.meta["num_heads"] = model.config.num_heads;
    ck.meta["num_blocks"] = model.config.num_blocks;
    ck.meta["ffn_hidden"] = model.config.ffn_hidden;
    ck.meta["se_reduction"] = model.config.se_reduction;
    ck.meta["disc_hidden1"] = model.config.disc_hidden1;
    ck.meta["disc_hidden2"] = model.config.disc_hidden2;
    ck.meta["recon_hidden"] = model.config.recon_hidden;
    ck.meta["sigmoid_output"] = model.config.sigmoid_output;

    std::vector<Tensor> params = generator_params(model);
    std::vector<Tensor> d_params = discriminator_params(model);
    params.insert(params.end(), d_params.begin(), d_params.end());
    const std::vector<std::string> names = gan_param_names(model);
    for (std::size_t i = 0; i < params.size(); ++i) push_tensor(ck, names[i], params[i]);
    return ck;
}

GanTransformerModel gan_from_checkpoint(const Checkpoint& ck) {
    GanConfig cfg;
    try {
        cfg.latent_dim = ck.meta.at("latent_dim").get<std::size_t>();
        cfg.model_dim = ck.meta.at("model_dim").get<std::size_t>();
        cfg.num_heads = ck.meta.at("num_heads").get<std::size_t>();
        cfg.num_blocks = ck.meta.at("num_blocks").get<std::size_t>();
        cfg.ffn_hidden = ck.meta.at("ffn_hidden").get<std::size_t>();
        cfg.se_reduction = ck.meta.at("se_reduction").get<std::size_t>();
        cfg.disc_hidden1 = ck.meta.at("disc_hidden1").get<std::size_t>();
        cfg.disc_hidden2 = ck.meta.at("disc_hidden2").get<std::size_t>();
        cfg.recon_hidden = ck.meta.at("recon_hidden").get<std::size_t>();
        cfg.sigmoid_output = ck.meta.at("sigmoid_output").get<bool>();
    } catch (const json::exception& e) {
        throw CorruptManifest(std::string("gan meta: ") + e.what());
    }
    const std::size_t width = ck.meta.at("width").get<std::size_t>();
    Rng rng(0);
    GanTransformerModel model = make_gan(cfg, width, rng);
    std::vector<Tensor> params = generator_params(model);
    std::vector<Tensor> d_params = discriminator_params(model);
    params.insert(params.end(), d_params.begin(), d_params.end());
    restore_params(ck, params, "gan_transformer");
    return model;
}

Checkpoint tvae_to_checkpoint(const TvaeModel& model) {
    Checkpoint ck;
    ck.kind = "tvae";
    ck.meta["width"] = model.width;
    ck.meta["latent_dim"] = model.config.latent_dim;
    ck.meta["hidden"] = model.config.hidden;
    const std::vector<Tensor> params = tvae_params(model);
    const char* names[] = {"enc1.weight",   "enc1.bias",   "mu_head.weight",     "mu_head.bias",
                           "logvar.weight", "logvar.bias", "dec1.weight",        "dec1.bias",
                           "dec2.weight",   "dec2.bias"};
    for (std::size_t i = 0; i < params.size(); ++i) push_tensor(ck, names[i], params[i]);
    return ck;
}

TvaeModel tvae_from_checkpoint(const Checkpoint& ck) {
    TvaeConfig cfg;
    try {
        cfg.latent_dim = ck.meta.at("latent_dim").get<std::size_t>();
        cfg.hidden = ck.meta.at("hidden").get<std::size_t>();
    } catch (const json::exception& e) {
        throw CorruptManifest(std::string("tvae meta: ") + e.what());
    }
    Rng rng(0);
    TvaeModel model = make_tvae(cfg, ck.meta.at("width").get<std::size_t>(), rng);
    std::vector<Tensor> params = tvae_params(model);
    restore_params(ck, params, "tvae");
    return model;
}

namespace {

Checkpoint linear_model_checkpoint(const std::string& kind, const std::vector<float>& weights,
                                   float bias) {
    Checkpoint ck;
    ck.kind = kind;
    CheckpointTensor w;
    w.name = "weights";
    w.shape = {weights.size()};
    w.data = weights;
    ck.tensors.push_back(std::move(w));
    CheckpointTensor b;
    b.name = "bias";
    b.shape = {1};
    b.data = {bias};
    ck.tensors.push_back(std::move(b));
    return ck;
}

void linear_model_restore(const Checkpoint& ck, const std::string& kind,
                          std::vector<float>& weights, float& bias) {
    if (ck.kind != kind) {
        throw CorruptManifest("checkpoint kind '" + ck.kind + "', expected '" + kind + "'");
    }
    if (ck.tensors.size() != 2) throw CorruptManifest(kind + " checkpoint needs 2 tensors");
    weights = ck.tensors[0].data;
    if (ck.tensors[1].data.size() != 1) throw ShapeMismatch("bias must be a scalar");
    bias = ck.tensors[1].data[0];
}

}  // namespace

Checkpoint logistic_to_checkpoint(const LogisticModel& model) {
    return linear_model_checkpoint("logistic", model.weights, model.bias);
}

LogisticModel logistic_from_checkpoint(const Checkpoint& ck) {
    LogisticModel model;
    linear_model_restore(ck, "logistic", model.weights, model.bias);
    return model;
}

Checkpoint svm_to_checkpoint(const LinearSvmModel& model) {
    Checkpoint ck = linear_model_checkpoint("linear_svm", model.weights, model.bias);
    ck.meta["c"] = model.c;
    return ck;
}

LinearSvmModel svm_from_checkpoint(const Checkpoint& ck) {
    LinearSvmModel model;
    linear_model_restore(ck, "linear_svm", model.weights, model.bias);
    model.c = ck.meta.value("c", 1.0f);
    return model;
}

Checkpoint forest_to_checkpoint(const RandomForestModel& model) {
    Checkpoint ck;
    ck.kind = "random_forest";
    ck.meta["seed"] = model.seed;
    ck.meta["n_trees"] = model.params.n_trees;
    ck.meta["max_depth"] = model.params.max_depth;
    ck.meta["min_samples_leaf"] = model.params.min_samples_leaf;
    ck.meta["features_per_split"] = model.params.features_per_split;
    ck.meta["bootstrap"] = model.params.bootstrap;
    json trees = json::array();
    for (const DecisionTree& t : model.trees) trees.push_back(tree_to_json(t));
    ck.meta["trees"] = std::move(trees);
    return ck;
}

RandomForestModel forest_from_checkpoint(const Checkpoint& ck) {
    if (ck.kind != "random_forest") {
        throw CorruptManifest("checkpoint kind '" + ck.kind + "', expected 'random_forest'");
    }
    RandomForestModel model;
    try {
        model.seed = ck.meta.at("seed").get<std::uint64_t>();
        model.params.n_trees = ck.meta.at("n_trees").get<std::size_t>();
        model.params.max_depth = ck.meta.at("max_depth").get<int>();
        model.params.min_samples_leaf = ck.meta.at("min_samples_leaf").get<int>();
        model.params.features_per_split = ck.meta.at("features_per_split").get<std::size_t>();
        model.params.bootstrap = ck.meta.at("bootstrap").get<bool>();
        for (const json& t : ck.meta.at("trees")) model.trees.push_back(tree_from_json(t));
    } catch (const json::exception& e) {
        throw CorruptManifest(std::string("forest meta: ") + e.what());
    }
    return model;
}

Checkpoint gbt_to_checkpoint(const GbtModel& model) {
    Checkpoint ck;
    ck.kind = "gbt";
    ck.meta["n_rounds"] = model.params.n_rounds;
    ck.meta["eta"] = model.params.eta;
    ck.meta["max_depth"] = model.params.max_depth;
    ck.meta["lambda_l2"] = model.params.lambda_l2;
    ck.meta["base_score"] = model.base_score;
    json trees = json::array();
    for (const DecisionTree& t : model.trees) trees.push_back(tree_to_json(t));
    ck.meta["trees"] = std::move(trees);
    return ck;
}

GbtModel gbt_from_checkpoint(const Checkpoint& ck) {
    if (ck.kind != "gbt") {
        throw CorruptManifest("checkpoint kind '" + ck.kind + "', expected 'gbt'");
    }
    GbtModel model;
    try {
        model.params.n_rounds = ck.meta.at("n_rounds").get<std::size_t>();
        model.params.eta = ck.meta.at("eta").get<float>();
        model.params.max_depth = ck.meta.at("max_depth").get<int>();
        model.params.lambda_l2 = ck.meta.at("lambda_l2").get<float>();
        model.base_score = ck.meta.at("base_score").get<float>();
        for (const json& t : ck.meta.at("trees")) model.trees.push_back(tree_from_json(t));
    } catch (const json::exception& e) {
        throw CorruptManifest(std::string("gbt meta: ") + e.what());
    }
    return model;
}

}  // namespace forge
