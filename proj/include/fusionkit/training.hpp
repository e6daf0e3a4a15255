#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fusionkit/model.hpp"

namespace fusionkit {

struct AdamOptimizer {
    double lr;
    double beta1;
    double beta2;
    double eps;
    long long step_count = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    AdamOptimizer(const TrainConfig& config, std::size_t param_count);

    // Reads each parameter's grad and applies the update in place. A
    // positive clip_norm rescales the whole gradient to that global norm
    // first.
    void step(const std::vector<std::pair<std::string, ad::NodePtr>>& params, double clip_norm);
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double loss_e = 0.0;
    double loss_v = 0.0;
    double delta1 = 1.0;
    double delta2 = 1.0;
    double val_dis = 0.0;
    double val_dim = 0.0;
    double val_com = 0.0;
};

struct Checkpoint {
    TrainConfig config;
    DatasetManifest manifest;
    std::vector<std::pair<std::string, Tensor>> params;
    int epoch = 0;
    double best_com = 0.0;
    std::string rng_state;
};

struct TrainResult {
    Checkpoint best;
    std::vector<EpochStats> history;
    int best_epoch = 0;
};

// Mini-batch Adam on the configured multi-task loss; keeps the checkpoint
// with the best validation combined score; stops once `patience` epochs pass
// without improvement.
TrainResult train_model(const TrainConfig& config, const Dataset& train_set,
                        const Dataset& val_set);

Checkpoint snapshot(const FusionModel& model, int epoch, double best_com,
                    const std::string& rng_state);
FusionModel model_from_checkpoint(const Checkpoint& ckpt);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

void write_history(const std::string& path, const std::vector<EpochStats>& history);

// Shared by run-config files and checkpoints. Parsing rejects unknown keys.
nlohmann::json config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& j,
                             const std::vector<std::string>& extra_allowed_keys = {});

}  // namespace fusionkit
