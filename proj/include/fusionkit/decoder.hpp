#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fusionkit/autodiff.hpp"

namespace fusionkit {

enum class DecoderKind { baseline, jdev };

DecoderKind decoder_from_string(const std::string& s);
const char* to_string(DecoderKind k);

// Joint decoder: the emotion logits feed an auxiliary valence estimate which
// is merged with the direct one.
struct JdevParams {
    ad::NodePtr w_emotion;   // D x C
    ad::NodePtr b_emotion;   // 1 x C
    ad::NodePtr w_valence;   // D x 1
    ad::NodePtr b_valence;   // 1 x 1
    ad::NodePtr w_emo_val;   // C x 1
    ad::NodePtr b_emo_val;   // 1 x 1
    ad::NodePtr w_merge;     // 2 x 1
    ad::NodePtr b_merge;     // 1 x 1
};

// Independent classification and regression heads, no cross-branch coupling.
struct BaselineParams {
    ad::NodePtr w_emotion;   // D x C
    ad::NodePtr b_emotion;   // 1 x C
    ad::NodePtr w_valence;   // D x 1
    ad::NodePtr b_valence;   // 1 x 1
};

struct DecoderOutput {
    ad::NodePtr logits;     // B x C
    ad::NodePtr posterior;  // B x C
    ad::NodePtr valence;    // B x 1
    // Joint-decoder intermediates; null for the baseline.
    ad::NodePtr valence_direct;
    ad::NodePtr valence_from_emotion;
};

DecoderOutput jdev_forward(const JdevParams& params, const ad::NodePtr& fused);
DecoderOutput baseline_forward(const BaselineParams& params, const ad::NodePtr& fused);

struct Prediction {
    std::string id;
    std::vector<double> probs;
    std::vector<double> logits;
    double valence = 0.0;
    std::optional<double> valence_direct;
    std::optional<double> valence_from_emotion;
};

// Argmax with ties broken toward the lowest index.
int classify(const std::vector<double>& probs);

// One record per line: {"id": ..., "probs": [...], "valence": ...}
void write_predictions(const std::string& path, const std::vector<Prediction>& predictions);
std::vector<Prediction> read_predictions(const std::string& path);

}  // namespace fusionkit
