#include "fusionkit/fusion.hpp"

#include <algorithm>

#include "fusionkit/errors.hpp"

namespace fusionkit {

Modality modality_from_string(const std::string& s) {
    if (s == "acoustic") return Modality::acoustic;
    if (s == "visual") return Modality::visual;
    raise(ErrorKind::Config, "unknown modality '" + s + "' (want acoustic|visual)");
}

const char* to_string(Modality m) {
    return m == Modality::acoustic ? "acoustic" : "visual";
}

StrategyKind strategy_from_int(int v) {
    switch (v) {
        case 1: return StrategyKind::parallel;
        case 2: return StrategyKind::per_acoustic_av;
        case 3: return StrategyKind::intra_then_inter;
        default:
            raise(ErrorKind::Config, "fusion strategy must be 1, 2 or 3; got " + std::to_string(v));
    }
}

const char* to_string(StrategyKind s) {
    switch (s) {
        case StrategyKind::parallel: return "1";
        case StrategyKind::per_acoustic_av: return "2";
        case StrategyKind::intra_then_inter: return "3";
    }
    return "?";
}

AfgResult afg_forward(const AfgParams& params, const std::vector<ad::NodePtr>& inputs) {
    const int n = static_cast<int>(inputs.size());
    if (n == 0) {
        raise(ErrorKind::Contract, "afg_forward: no inputs");
    }
    if (n != params.input_count()) {
        raise(ErrorKind::Dimension, "afg_forward: " + std::to_string(n) + " inputs but " +
                                        std::to_string(params.input_count()) + " alignment maps");
    }
    if (params.attn_weight->cols() != n) {
        raise(ErrorKind::Dimension,
              "afg_forward: attention matrix is " + params.attn_weight->value.shape_str() +
                  ", want " + std::to_string(params.fused_dim()) + "x" + std::to_string(n));
    }

    std::vector<ad::NodePtr> aligned;
    std::vector<ad::NodePtr> scores;
    aligned.reserve(static_cast<std::size_t>(n));
    scores.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto& a = params.align[static_cast<std::size_t>(i)];
        auto p = ad::add_bias(ad::matmul(inputs[static_cast<std::size_t>(i)], a.weight), a.bias);
        scores.push_back(ad::matmul(p, ad::slice_cols(params.attn_weight, i, i + 1)));
        aligned.push_back(std::move(p));
    }
    auto alpha = ad::softmax_rows(
        ad::add_bias(n == 1 ? scores[0] : ad::concat_cols(scores), params.attn_bias));

    AfgResult result;
    result.attention = alpha->value;
    result.fused = ad::weighted_sum(alpha, aligned);
    return result;
}

namespace {

AfgParams make_afg_params(const std::vector<int>& input_dims, int fused_dim) {
    AfgParams params;
    for (int d : input_dims) {
        params.align.push_back({ad::parameter(Tensor(d, fused_dim)),
                                ad::parameter(Tensor(1, fused_dim))});
    }
    const int n = static_cast<int>(input_dims.size());
    params.attn_weight = ad::parameter(Tensor(fused_dim, n));
    params.attn_bias = ad::parameter(Tensor(1, n));
    return params;
}

}  // namespace

FusionEncoder FusionEncoder::build(StrategyKind strategy, const DatasetManifest& manifest,
                                   const ModalityMap& modality_map, int fused_dim) {
    if (fused_dim <= 0) {
        raise(ErrorKind::Config, "fused dimension must be positive");
    }
    FusionEncoder enc;
    enc.strategy = strategy;
    enc.fused_dim = fused_dim;

    std::vector<int> acoustic, visual;
    for (std::size_t i = 0; i < manifest.streams.size(); ++i) {
        const auto& spec = manifest.streams[i];
        enc.stream_names.push_back(spec.name);
        auto it = modality_map.find(spec.name);
        if (it == modality_map.end()) {
            if (strategy != StrategyKind::parallel) {
                raise(ErrorKind::Config, "modality map has no entry for stream '" + spec.name + "'");
            }
            continue;  // strategy 1 never consults modalities
        }
        (it->second == Modality::acoustic ? acoustic : visual).push_back(static_cast<int>(i));
    }

    auto stream_dim = [&](int idx) { return manifest.streams[static_cast<std::size_t>(idx)].dim; };
    auto stream_input = [](int idx) { return AfgStage::Input{false, idx}; };
    auto stage_input = [](int idx) { return AfgStage::Input{true, idx}; };

    switch (strategy) {
        case StrategyKind::parallel: {
            AfgStage stage;
            stage.name = "gather";
            std::vector<int> dims;
            for (std::size_t i = 0; i < manifest.streams.size(); ++i) {
                stage.inputs.push_back(stream_input(static_cast<int>(i)));
                dims.push_back(stream_dim(static_cast<int>(i)));
            }
            stage.params = make_afg_params(dims, fused_dim);
            enc.stages.push_back(std::move(stage));
            break;
        }
        case StrategyKind::per_acoustic_av: {
            if (acoustic.empty() || visual.empty()) {
                raise(ErrorKind::Config,
                      "strategy 2 needs at least one acoustic and one visual stream");
            }
            std::vector<AfgStage::Input> top_inputs;
            for (int a : acoustic) {
                AfgStage stage;
                stage.name = "branch." + manifest.streams[static_cast<std::size_t>(a)].name;
                std::vector<int> dims{stream_dim(a)};
                stage.inputs.push_back(stream_input(a));
                for (int v : visual) {
                    stage.inputs.push_back(stream_input(v));
                    dims.push_back(stream_dim(v));
                }
                stage.params = make_afg_params(dims, fused_dim);
                top_inputs.push_back(stage_input(static_cast<int>(enc.stages.size())));
                enc.stages.push_back(std::move(stage));
            }
            AfgStage top;
            top.name = "top";
            top.inputs = std::move(top_inputs);
            top.params = make_afg_params(
                std::vector<int>(acoustic.size(), fused_dim), fused_dim);
            enc.stages.push_back(std::move(top));
            break;
        }
        case StrategyKind::intra_then_inter: {
            if (acoustic.empty() || visual.empty()) {
                raise(ErrorKind::Config,
                      "strategy 3 needs at least one acoustic and one visual stream");
            }
            AfgStage intra;
            intra.name = "acoustic";
            std::vector<int> dims;
            for (int a : acoustic) {
                intra.inputs.push_back(stream_input(a));
                dims.push_back(stream_dim(a));
            }
            intra.params = make_afg_params(dims, fused_dim);
            enc.stages.push_back(std::move(intra));

            AfgStage top;
            top.name = "top";
            top.inputs.push_back(stage_input(0));
            std::vector<int> top_dims{fused_dim};
            for (int v : visual) {
                top.inputs.push_back(stream_input(v));
                top_dims.push_back(stream_dim(v));
            }
            top.params = make_afg_params(top_dims, fused_dim);
            enc.stages.push_back(std::move(top));
            break;
        }
    }
    return enc;
}

FusedState FusionEncoder::forward(const std::map<std::string, ad::NodePtr>& stream_nodes) const {
    FusedState state;
    std::vector<ad::NodePtr> stage_outputs;
    for (const auto& stage : stages) {
        std::vector<ad::NodePtr> inputs;
        for (const auto& in : stage.inputs) {
            if (in.is_stage) {
                inputs.push_back(stage_outputs[static_cast<std::size_t>(in.index)]);
            } else {
                const auto& name = stream_names[static_cast<std::size_t>(in.index)];
                auto it = stream_nodes.find(name);
                if (it == stream_nodes.end()) {
                    raise(ErrorKind::Schema, "forward: missing stream '" + name + "'");
                }
                inputs.push_back(it->second);
            }
        }
        auto result = afg_forward(stage.params, inputs);
        state.attention_records.emplace_back(stage.name, std::move(result.attention));
        stage_outputs.push_back(std::move(result.fused));
    }
    state.fused = stage_outputs.back();
    return state;
}

void FusionEncoder::collect_parameters(std::vector<std::pair<std::string, ad::NodePtr>>& out) const {
    for (const auto& stage : stages) {
        for (std::size_t i = 0; i < stage.params.align.size(); ++i) {
            const std::string base = "fusion." + stage.name + ".align" + std::to_string(i);
            out.emplace_back(base + ".weight", stage.params.align[i].weight);
            out.emplace_back(base + ".bias", stage.params.align[i].bias);
        }
        out.emplace_back("fusion." + stage.name + ".attn_weight", stage.params.attn_weight);
        out.emplace_back("fusion." + stage.name + ".attn_bias", stage.params.attn_bias);
    }
}

}  // namespace fusionkit
