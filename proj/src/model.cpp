#include "fusionkit/model.hpp"

#include <cmath>
#include <random>

#include "fusionkit/errors.hpp"

namespace fusionkit {

void TrainConfig::validate() const {
    if (fused_dim <= 0) raise(ErrorKind::Config, "fused_dim must be positive");
    if (num_classes < 0) raise(ErrorKind::Config, "classes must be >= 0");
    if (!(learning_rate > 0.0)) raise(ErrorKind::Config, "lr must be positive");
    if (batch_size <= 0) raise(ErrorKind::Config, "batch_size must be positive");
    if (max_epochs < 0) raise(ErrorKind::Config, "epochs must be >= 0");
    if (patience <= 0) raise(ErrorKind::Config, "patience must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        raise(ErrorKind::Config, "adam betas must be in [0, 1)");
    }
    if (!(adam_eps > 0.0)) raise(ErrorKind::Config, "adam_eps must be positive");
}

std::vector<std::pair<std::string, ad::NodePtr>> FusionModel::parameters() const {
    std::vector<std::pair<std::string, ad::NodePtr>> out;
    encoder.collect_parameters(out);
    std::visit(
        [&out](const auto& params) {
            using T = std::decay_t<decltype(params)>;
            out.emplace_back("decoder.emotion.weight", params.w_emotion);
            out.emplace_back("decoder.emotion.bias", params.b_emotion);
            out.emplace_back("decoder.valence.weight", params.w_valence);
            out.emplace_back("decoder.valence.bias", params.b_valence);
            if constexpr (std::is_same_v<T, JdevParams>) {
                out.emplace_back("decoder.emo_val.weight", params.w_emo_val);
                out.emplace_back("decoder.emo_val.bias", params.b_emo_val);
                out.emplace_back("decoder.merge.weight", params.w_merge);
                out.emplace_back("decoder.merge.bias", params.b_merge);
            }
        },
        decoder);
    out.emplace_back("loss.rho1", uncertainty.rho1);
    out.emplace_back("loss.rho2", uncertainty.rho2);
    return out;
}

void FusionModel::zero_grad() const {
    for (const auto& [name, p] : parameters()) {
        (void)name;
        p->zero_grad();
    }
}

FusionModel init_model(const TrainConfig& config, const DatasetManifest& manifest,
                       std::uint64_t seed) {
    config.validate();
    FusionModel model;
    model.config = config;
    model.manifest = manifest;
    if (config.num_classes > 0) {
        model.manifest.num_classes = config.num_classes;
    }
    if (model.manifest.num_classes < 2) {
        raise(ErrorKind::Config, "model needs at least 2 classes");
    }
    const int d = config.fused_dim;
    const int c = model.manifest.num_classes;

    model.encoder = FusionEncoder::build(config.strategy, manifest, config.modality_map, d);
    if (config.decoder == DecoderKind::jdev) {
        model.decoder = JdevParams{
            ad::parameter(Tensor(d, c)), ad::parameter(Tensor(1, c)),
            ad::parameter(Tensor(d, 1)), ad::parameter(Tensor(1, 1)),
            ad::parameter(Tensor(c, 1)), ad::parameter(Tensor(1, 1)),
            ad::parameter(Tensor(2, 1)), ad::parameter(Tensor(1, 1)),
        };
    } else {
        model.decoder = BaselineParams{
            ad::parameter(Tensor(d, c)), ad::parameter(Tensor(1, c)),
            ad::parameter(Tensor(d, 1)), ad::parameter(Tensor(1, 1)),
        };
    }
    model.uncertainty = UncertaintyWeights::make();

    std::mt19937_64 rng(seed);
    for (const auto& [name, p] : model.parameters()) {
        if (name.size() >= 6 && name.compare(name.size() - 6, 6, "weight") == 0) {
            const double bound =
                std::sqrt(6.0 / static_cast<double>(p->value.rows + p->value.cols));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (double& v : p->value.data) {
                v = dist(rng);
            }
        }
    }
    return model;
}

namespace {

DecoderOutput forward_dispatch(const BaselineParams& p, const ad::NodePtr& fused) {
    return baseline_forward(p, fused);
}
DecoderOutput forward_dispatch(const JdevParams& p, const ad::NodePtr& fused) {
    return jdev_forward(p, fused);
}

}  // namespace

BatchForward model_forward(const FusionModel& model,
                           const std::vector<const FeatureSample*>& batch) {
    if (batch.empty()) {
        raise(ErrorKind::Contract, "model_forward: empty batch");
    }
    const int b = static_cast<int>(batch.size());
    std::map<std::string, ad::NodePtr> stream_nodes;
    for (const auto& spec : model.manifest.streams) {
        Tensor mat(b, spec.dim);
        for (int i = 0; i < b; ++i) {
            const auto& streams = batch[static_cast<std::size_t>(i)]->streams;
            auto it = streams.find(spec.name);
            if (it == streams.end() || static_cast<int>(it->second.size()) != spec.dim) {
                raise(ErrorKind::Schema, "sample '" + batch[static_cast<std::size_t>(i)]->id +
                                             "' does not match the model manifest for stream '" +
                                             spec.name + "'");
            }
            for (int j = 0; j < spec.dim; ++j) {
                mat.at(i, j) = it->second[static_cast<std::size_t>(j)];
            }
        }
        stream_nodes[spec.name] = ad::constant(std::move(mat));
    }

    BatchForward fwd;
    fwd.fused = model.encoder.forward(stream_nodes);
    fwd.decoder = std::visit(
        [&](const auto& params) { return forward_dispatch(params, fwd.fused.fused); },
        model.decoder);
    return fwd;
}

std::vector<Prediction> predict(const FusionModel& model,
                                const std::vector<FeatureSample>& samples) {
    if (samples.empty()) {
        raise(ErrorKind::Contract, "predict: empty sample list");
    }
    std::vector<const FeatureSample*> batch;
    batch.reserve(samples.size());
    for (const auto& s : samples) {
        batch.push_back(&s);
    }
    const auto fwd = model_forward(model, batch);
    const Tensor& probs = fwd.decoder.posterior->value;
    const Tensor& logits = fwd.decoder.logits->value;
    const Tensor& valence = fwd.decoder.valence->value;

    std::vector<Prediction> out;
    out.reserve(samples.size());
    for (int i = 0; i < probs.rows; ++i) {
        Prediction p;
        p.id = samples[static_cast<std::size_t>(i)].id;
        p.probs.resize(static_cast<std::size_t>(probs.cols));
        p.logits.resize(static_cast<std::size_t>(probs.cols));
        for (int j = 0; j < probs.cols; ++j) {
            p.probs[static_cast<std::size_t>(j)] = probs.at(i, j);
            p.logits[static_cast<std::size_t>(j)] = logits.at(i, j);
        }
        p.valence = valence.at(i, 0);
        if (fwd.decoder.valence_direct) {
            p.valence_direct = fwd.decoder.valence_direct->value.at(i, 0);
            p.valence_from_emotion = fwd.decoder.valence_from_emotion->value.at(i, 0);
        }
        out.push_back(std::move(p));
    }
    return out;
}

MetricsReport evaluate(const FusionModel& model, const std::vector<FeatureSample>& samples) {
    for (const auto& s : samples) {
        if (!s.emotion || !s.valence) {
            raise(ErrorKind::Contract, "evaluate: sample '" + s.id + "' is missing labels");
        }
    }
    return score_predictions(predict(model, samples), samples, model.num_classes(),
                             model.config.combined_coeff);
}

ad::GradCheckReport model_grad_check(StrategyKind strategy, DecoderKind decoder, LossKind loss,
                                     const ModelGradCheckSpec& spec) {
    TrainConfig config;
    config.strategy = strategy;
    config.decoder = decoder;
    config.loss = loss;
    config.fused_dim = spec.fused_dim;
    config.num_classes = spec.num_classes;

    DatasetManifest manifest;
    manifest.num_classes = spec.num_classes;
    for (int i = 0; i < spec.acoustic_streams; ++i) {
        const std::string name = "a" + std::to_string(i);
        manifest.streams.push_back({name, spec.stream_dim});
        config.modality_map[name] = Modality::acoustic;
    }
    for (int i = 0; i < spec.visual_streams; ++i) {
        const std::string name = "v" + std::to_string(i);
        manifest.streams.push_back({name, spec.stream_dim});
        config.modality_map[name] = Modality::visual;
    }
    std::sort(manifest.streams.begin(), manifest.streams.end(),
              [](const StreamSpec& a, const StreamSpec& b) { return a.name < b.name; });

    FusionModel model = init_model(config, manifest, spec.seed);

    std::mt19937_64 rng(spec.seed ^ 0xa5a5a5a5a5a5a5a5ULL);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<FeatureSample> samples(static_cast<std::size_t>(spec.batch));
    std::vector<int> labels;
    std::vector<double> targets;
    for (int i = 0; i < spec.batch; ++i) {
        auto& s = samples[static_cast<std::size_t>(i)];
        s.id = "probe" + std::to_string(i);
        for (const auto& st : manifest.streams) {
            auto& vec = s.streams[st.name];
            vec.resize(static_cast<std::size_t>(st.dim));
            for (auto& v : vec) {
                v = unit(rng);
            }
        }
        labels.push_back(static_cast<int>(rng() % static_cast<unsigned>(spec.num_classes)));
        targets.push_back(unit(rng));
    }
    std::vector<const FeatureSample*> batch;
    for (const auto& s : samples) {
        batch.push_back(&s);
    }

    auto build = [&]() {
        auto fwd = model_forward(model, batch);
        auto loss_e = ce_loss(fwd.decoder.logits, labels);
        auto loss_v = mse_loss(fwd.decoder.valence, targets);
        return loss == LossKind::uncertainty
                   ? uncertainty_loss(loss_e, loss_v, model.uncertainty)
                   : ad::add(loss_e, loss_v);
    };
    return ad::grad_check(build, model.parameters(), spec.step, spec.tol);
}

}  // namespace fusionkit
