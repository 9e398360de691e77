#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "forge/classifiers.hpp"
#include "forge/oversample.hpp"

namespace forge {

// Shared model persistence: a JSON manifest (<base>.json) naming tensors by
// {name, shape, offset} plus one blob (<base>.bin) of little-endian float32.
// Tree ensembles ride along as flat node tables inside the manifest.

constexpr int kCheckpointVersion = 1;

struct CheckpointTensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<float> data;
};

struct Checkpoint {
    std::string kind;
    nlohmann::json meta = nlohmann::json::object();
    std::vector<CheckpointTensor> tensors;
};

void save_checkpoint(const Checkpoint& ck, const std::string& base_path);

/// Errors: CorruptManifest (unreadable manifest, blob size/offset disagreement),
/// VersionMismatch, ShapeMismatch (declared shape vs payload).
Checkpoint load_checkpoint(const std::string& base_path);

// Model adapters. Loading validates every declared shape before any copy.
Checkpoint gan_to_checkpoint(const GanTransformerModel& model);
GanTransformerModel gan_from_checkpoint(const Checkpoint& ck);

Checkpoint tvae_to_checkpoint(const TvaeModel& model);
TvaeModel tvae_from_checkpoint(const Checkpoint& ck);

Checkpoint logistic_to_checkpoint(const LogisticModel& model);
LogisticModel logistic_from_checkpoint(const Checkpoint& ck);

Checkpoint svm_to_checkpoint(const LinearSvmModel& model);
LinearSvmModel svm_from_checkpoint(const Checkpoint& ck);

Checkpoint forest_to_checkpoint(const RandomForestModel& model);
RandomForestModel forest_from_checkpoint(const Checkpoint& ck);

Checkpoint gbt_to_checkpoint(const GbtModel& model);
GbtModel gbt_from_checkpoint(const Checkpoint& ck);

}  // namespace forge
