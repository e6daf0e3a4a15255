#pragma once

#include <map>
#include <string>
#include <vector>

#include "fusionkit/autodiff.hpp"
#include "fusionkit/dataio.hpp"

namespace fusionkit {

enum class Modality { acoustic, visual };
using ModalityMap = std::map<std::string, Modality>;

Modality modality_from_string(const std::string& s);
const char* to_string(Modality m);

enum class StrategyKind {
    parallel = 1,          // one gathering stage over every stream
    per_acoustic_av = 2,   // one stage per acoustic stream (with all visual), then a top stage
    intra_then_inter = 3,  // acoustic-only stage, then a top stage with the visual streams
};

StrategyKind strategy_from_int(int v);
const char* to_string(StrategyKind s);

// Attention-guided gathering over N aligned inputs: per-input affine
// alignment to the common dimension, one learned scoring vector per input
// (the columns of attn_weight), softmax over the N scores, weighted average.
struct AfgParams {
    struct Align {
        ad::NodePtr weight;  // d_n x D
        ad::NodePtr bias;    // 1 x D
    };
    std::vector<Align> align;
    ad::NodePtr attn_weight;  // D x N
    ad::NodePtr attn_bias;    // 1 x N

    int input_count() const { return static_cast<int>(align.size()); }
    int fused_dim() const { return attn_weight ? attn_weight->rows() : 0; }
};

struct AfgResult {
    ad::NodePtr fused;  // B x D
    Tensor attention;   // B x N snapshot of the softmax weights
};

AfgResult afg_forward(const AfgParams& params, const std::vector<ad::NodePtr>& inputs);

struct FusedState {
    ad::NodePtr fused;  // B x D
    std::vector<std::pair<std::string, Tensor>> attention_records;  // per stage
};

// One gathering stage inside a strategy graph. Inputs refer either to a raw
// stream (by position in stream_names) or to an earlier stage's output.
struct AfgStage {
    std::string name;
    struct Input {
        bool is_stage = false;
        int index = 0;
    };
    std::vector<Input> inputs;
    AfgParams params;
};

struct FusionEncoder {
    StrategyKind strategy = StrategyKind::parallel;
    int fused_dim = 0;
    std::vector<std::string> stream_names;  // manifest order
    std::vector<AfgStage> stages;           // evaluated in order; last one is the output

    // Builds the wiring with zero-valued parameter leaves; initialization is
    // the trainer's job. Strategies 2 and 3 require a non-empty acoustic and
    // visual partition.
    static FusionEncoder build(StrategyKind strategy, const DatasetManifest& manifest,
                               const ModalityMap& modality_map, int fused_dim);

    FusedState forward(const std::map<std::string, ad::NodePtr>& stream_nodes) const;

    void collect_parameters(std::vector<std::pair<std::string, ad::NodePtr>>& out) const;
};

}  // namespace fusionkit
