#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "fusionkit/dataio.hpp"
#include "fusionkit/decoder.hpp"
#include "fusionkit/fusion.hpp"
#include "fusionkit/losses.hpp"
#include "fusionkit/metrics.hpp"

namespace fusionkit {

struct TrainConfig {
    StrategyKind strategy = StrategyKind::parallel;
    DecoderKind decoder = DecoderKind::jdev;
    LossKind loss = LossKind::uncertainty;
    int fused_dim = 128;
    int num_classes = 0;  // 0: take the manifest's class count
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 32;
    int max_epochs = 100;
    int patience = 20;
    double grad_clip_norm = 5.0;  // <= 0 disables clipping
    std::uint64_t seed = 0;
    ModalityMap modality_map;
    double combined_coeff = 0.25;

    void validate() const;
};

// All trainable state for one (strategy, decoder) configuration. Parameters
// are long-lived autodiff leaves; each forward pass builds a fresh graph on
// top of them.
struct FusionModel {
    TrainConfig config;
    DatasetManifest manifest;
    FusionEncoder encoder;
    std::variant<BaselineParams, JdevParams> decoder;
    UncertaintyWeights uncertainty;

    int num_classes() const { return manifest.num_classes; }

    // Stable, deterministic order; names ending in ".weight" are the Xavier
    // initialized matrices, everything else starts at zero.
    std::vector<std::pair<std::string, ad::NodePtr>> parameters() const;

    void zero_grad() const;
};

// Xavier-uniform weights, zero biases, zero rho, deterministic per seed.
FusionModel init_model(const TrainConfig& config, const DatasetManifest& manifest,
                       std::uint64_t seed);

struct BatchForward {
    DecoderOutput decoder;
    FusedState fused;
};

// Builds the batch graph: stream matrices -> fusion encoder -> decoder.
BatchForward model_forward(const FusionModel& model,
                           const std::vector<const FeatureSample*>& batch);

std::vector<Prediction> predict(const FusionModel& model, const std::vector<FeatureSample>& samples);

MetricsReport evaluate(const FusionModel& model, const std::vector<FeatureSample>& samples);

// Full-graph gradient check: random init, random batch, the complete
// fusion + decoder + loss graph, every parameter probed by central
// differences.
struct ModelGradCheckSpec {
    int fused_dim = 8;
    int num_classes = 4;
    int acoustic_streams = 3;
    int visual_streams = 2;
    int stream_dim = 6;
    int batch = 3;
    std::uint64_t seed = 0;
    double step = 1e-5;
    double tol = 1e-5;
};

ad::GradCheckReport model_grad_check(StrategyKind strategy, DecoderKind decoder, LossKind loss,
                                     const ModelGradCheckSpec& spec);

}  // namespace fusionkit
