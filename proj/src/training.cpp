#include "fusionkit/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "fusionkit/errors.hpp"

namespace fusionkit {

using nlohmann::json;

AdamOptimizer::AdamOptimizer(const TrainConfig& config, std::size_t param_count)
    : lr(config.learning_rate),
      beta1(config.adam_beta1),
      beta2(config.adam_beta2),
      eps(config.adam_eps),
      m(param_count),
      v(param_count) {}

void AdamOptimizer::step(const std::vector<std::pair<std::string, ad::NodePtr>>& params,
                         double clip_norm) {
    if (params.size() != m.size()) {
        raise(ErrorKind::Contract, "optimizer state does not match the parameter list");
    }

    double scale = 1.0;
    if (clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& [name, p] : params) {
            (void)name;
            for (double g : p->grad.data) {
                sq += g * g;
            }
        }
        const double norm = std::sqrt(sq);
        if (norm > clip_norm) {
            scale = clip_norm / norm;
        }
    }

    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        ad::Node& p = *params[i].second;
        if (m[i].empty()) {
            m[i] = Tensor(p.value.rows, p.value.cols, 0.0);
            v[i] = Tensor(p.value.rows, p.value.cols, 0.0);
        }
        for (std::size_t k = 0; k < p.value.data.size(); ++k) {
            const double g = p.grad.data[k] * scale;
            m[i].data[k] = beta1 * m[i].data[k] + (1.0 - beta1) * g;
            v[i].data[k] = beta2 * v[i].data[k] + (1.0 - beta2) * g * g;
            const double m_hat = m[i].data[k] / bc1;
            const double v_hat = v[i].data[k] / bc2;
            p.value.data[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

namespace {

void require_labeled(const Dataset& ds, const char* which) {
    if (ds.samples.empty()) {
        raise(ErrorKind::Contract, std::string(which) + " split is empty");
    }
    for (const auto& s : ds.samples) {
        if (!s.emotion || !s.valence) {
            raise(ErrorKind::Contract,
                  std::string(which) + " sample '" + s.id + "' is missing labels");
        }
    }
}

std::string rng_to_string(const std::mt19937_64& rng) {
    std::ostringstream out;
    out << rng;
    return out.str();
}

}  // namespace

TrainResult train_model(const TrainConfig& config, const Dataset& train_set,
                        const Dataset& val_set) {
    config.validate();
    require_labeled(train_set, "train");
    require_labeled(val_set, "val");

    FusionModel model = init_model(config, train_set.manifest, config.seed);

    auto params = model.parameters();
    AdamOptimizer opt(config, params.size());
    std::mt19937_64 shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

    TrainResult result;
    double best_com = evaluate(model, val_set.samples).com;
    result.best = snapshot(model, 0, best_com, rng_to_string(shuffle_rng));
    result.best_epoch = 0;

    std::vector<std::size_t> order(train_set.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    int epochs_since_best = 0;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double sum_total = 0.0, sum_e = 0.0, sum_v = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<const FeatureSample*> batch;
            std::vector<int> labels;
            std::vector<double> targets;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const FeatureSample& s = train_set.samples[order[i]];
                batch.push_back(&s);
                labels.push_back(*s.emotion);
                targets.push_back(*s.valence);
            }

            auto fwd = model_forward(model, batch);
            auto loss_e = ce_loss(fwd.decoder.logits, labels);
            auto loss_v = mse_loss(fwd.decoder.valence, targets);
            auto total = config.loss == LossKind::uncertainty
                             ? uncertainty_loss(loss_e, loss_v, model.uncertainty)
                             : ad::add(loss_e, loss_v);

            if (!std::isfinite(total->value.item())) {
                raise(ErrorKind::Numeric, "non-finite loss at epoch " + std::to_string(epoch) +
                                              ", batch " + std::to_string(batches));
            }
            sum_total += total->value.item();
            sum_e += loss_e->value.item();
            sum_v += loss_v->value.item();
            ++batches;

            model.zero_grad();
            ad::backward(total);
            opt.step(params, config.grad_clip_norm);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = sum_total / batches;
        stats.loss_e = sum_e / batches;
        stats.loss_v = sum_v / batches;
        stats.delta1 = model.uncertainty.delta1();
        stats.delta2 = model.uncertainty.delta2();
        const auto report = evaluate(model, val_set.samples);
        stats.val_dis = report.dis;
        stats.val_dim = report.dim;
        stats.val_com = report.com;
        result.history.push_back(stats);

        if (report.com > best_com) {
            best_com = report.com;
            result.best = snapshot(model, epoch, best_com, rng_to_string(shuffle_rng));
            result.best_epoch = epoch;
            epochs_since_best = 0;
        } else if (++epochs_since_best >= config.patience) {
            break;
        }
    }
    return result;
}

Checkpoint snapshot(const FusionModel& model, int epoch, double best_com,
                    const std::string& rng_state) {
    Checkpoint ckpt;
    ckpt.config = model.config;
    ckpt.manifest = model.manifest;
    for (const auto& [name, p] : model.parameters()) {
        ckpt.params.emplace_back(name, p->value);
    }
    ckpt.epoch = epoch;
    ckpt.best_com = best_com;
    ckpt.rng_state = rng_state;
    return ckpt;
}

FusionModel model_from_checkpoint(const Checkpoint& ckpt) {
    FusionModel model = init_model(ckpt.config, ckpt.manifest, ckpt.config.seed);
    auto params = model.parameters();
    if (params.size() != ckpt.params.size()) {
        raise(ErrorKind::Schema, "checkpoint holds " + std::to_string(ckpt.params.size()) +
                                     " parameters, model wants " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].first != ckpt.params[i].first) {
            raise(ErrorKind::Schema, "checkpoint parameter '" + ckpt.params[i].first +
                                         "' does not match model parameter '" + params[i].first +
                                         "'");
        }
        if (!params[i].second->value.same_shape(ckpt.params[i].second)) {
            raise(ErrorKind::Schema, "checkpoint parameter '" + ckpt.params[i].first +
                                         "' has shape " + ckpt.params[i].second.shape_str() +
                                         ", model wants " +
                                         params[i].second->value.shape_str());
        }
        params[i].second->value = ckpt.params[i].second;
    }
    return model;
}

nlohmann::json config_to_json(const TrainConfig& config) {
    json j;
    j["strategy"] = static_cast<int>(config.strategy);
    j["decoder"] = to_string(config.decoder);
    j["loss"] = to_string(config.loss);
    j["fused_dim"] = config.fused_dim;
    j["classes"] = config.num_classes;
    j["lr"] = config.learning_rate;
    j["adam_beta1"] = config.adam_beta1;
    j["adam_beta2"] = config.adam_beta2;
    j["adam_eps"] = config.adam_eps;
    j["batch_size"] = config.batch_size;
    j["epochs"] = config.max_epochs;
    j["patience"] = config.patience;
    j["grad_clip"] = config.grad_clip_norm;
    j["seed"] = config.seed;
    j["combined_coeff"] = config.combined_coeff;
    json mm = json::object();
    for (const auto& [name, modality] : config.modality_map) {
        mm[name] = to_string(modality);
    }
    j["modality_map"] = mm;
    return j;
}

TrainConfig config_from_json(const nlohmann::json& j,
                             const std::vector<std::string>& extra_allowed_keys) {
    static const std::vector<std::string> known = {
        "strategy",  "decoder",  "loss",     "fused_dim", "classes",
        "lr",        "adam_beta1", "adam_beta2", "adam_eps", "batch_size",
        "epochs",    "patience", "grad_clip", "seed",     "combined_coeff",
        "modality_map",
    };
    for (const auto& [key, value] : j.items()) {
        (void)value;
        const bool ok =
            std::find(known.begin(), known.end(), key) != known.end() ||
            std::find(extra_allowed_keys.begin(), extra_allowed_keys.end(), key) !=
                extra_allowed_keys.end();
        if (!ok) {
            raise(ErrorKind::Usage, "unknown config key '" + key + "'");
        }
    }

    TrainConfig config;
    try {
        if (j.contains("strategy")) config.strategy = strategy_from_int(j["strategy"].get<int>());
        if (j.contains("decoder")) config.decoder = decoder_from_string(j["decoder"].get<std::string>());
        if (j.contains("loss")) config.loss = loss_from_string(j["loss"].get<std::string>());
        if (j.contains("fused_dim")) config.fused_dim = j["fused_dim"].get<int>();
        if (j.contains("classes")) config.num_classes = j["classes"].get<int>();
        if (j.contains("lr")) config.learning_rate = j["lr"].get<double>();
        if (j.contains("adam_beta1")) config.adam_beta1 = j["adam_beta1"].get<double>();
        if (j.contains("adam_beta2")) config.adam_beta2 = j["adam_beta2"].get<double>();
        if (j.contains("adam_eps")) config.adam_eps = j["adam_eps"].get<double>();
        if (j.contains("batch_size")) config.batch_size = j["batch_size"].get<int>();
        if (j.contains("epochs")) config.max_epochs = j["epochs"].get<int>();
        if (j.contains("patience")) config.patience = j["patience"].get<int>();
        if (j.contains("grad_clip")) config.grad_clip_norm = j["grad_clip"].get<double>();
        if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("combined_coeff")) config.combined_coeff = j["combined_coeff"].get<double>();
        if (j.contains("modality_map")) {
            for (const auto& [name, modality] : j["modality_map"].items()) {
                config.modality_map[name] = modality_from_string(modality.get<std::string>());
            }
        }
    } catch (const json::exception& e) {
        raise(ErrorKind::Usage, std::string("bad config value: ") + e.what());
    }
    return config;
}

namespace {

json manifest_to_json(const DatasetManifest& manifest) {
    json j;
    j["streams"] = json::array();
    for (const auto& s : manifest.streams) {
        j["streams"].push_back({{"name", s.name}, {"dim", s.dim}});
    }
    j["classes"] = manifest.num_classes;
    j["sample_count"] = manifest.sample_count;
    j["has_emotion"] = manifest.has_emotion;
    j["has_valence"] = manifest.has_valence;
    return j;
}

DatasetManifest manifest_from_json(const json& j) {
    DatasetManifest manifest;
    for (const auto& s : j.at("streams")) {
        manifest.streams.push_back({s.at("name").get<std::string>(), s.at("dim").get<int>()});
    }
    manifest.num_classes = j.at("classes").get<int>();
    manifest.sample_count = j.at("sample_count").get<std::size_t>();
    manifest.has_emotion = j.at("has_emotion").get<bool>();
    manifest.has_valence = j.at("has_valence").get<bool>();
    return manifest;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    json j;
    j["format"] = "fusionkit-checkpoint-v1";
    j["config"] = config_to_json(ckpt.config);
    j["manifest"] = manifest_to_json(ckpt.manifest);
    j["epoch"] = ckpt.epoch;
    j["best_com"] = ckpt.best_com;
    j["rng_state"] = ckpt.rng_state;
    j["params"] = json::array();
    for (const auto& [name, tensor] : ckpt.params) {
        j["params"].push_back({{"name", name},
                               {"rows", tensor.rows},
                               {"cols", tensor.cols},
                               {"data", tensor.data}});
    }
    std::ofstream out(path);
    if (!out) {
        raise(ErrorKind::Parse, "cannot open '" + path + "' for writing");
    }
    out << j.dump(1) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrorKind::Parse, "cannot open checkpoint '" + path + "'");
    }
    json j;
    try {
        in >> j;
        if (j.at("format").get<std::string>() != "fusionkit-checkpoint-v1") {
            raise(ErrorKind::Schema, "'" + path + "' is not a fusionkit checkpoint");
        }
        Checkpoint ckpt;
        ckpt.config = config_from_json(j.at("config"));
        ckpt.manifest = manifest_from_json(j.at("manifest"));
        ckpt.epoch = j.at("epoch").get<int>();
        ckpt.best_com = j.at("best_com").get<double>();
        ckpt.rng_state = j.at("rng_state").get<std::string>();
        for (const auto& p : j.at("params")) {
            Tensor t(p.at("rows").get<int>(), p.at("cols").get<int>());
            t.data = p.at("data").get<std::vector<double>>();
            if (static_cast<int>(t.data.size()) != t.size()) {
                raise(ErrorKind::Schema, "checkpoint tensor '" +
                                             p.at("name").get<std::string>() +
                                             "' has the wrong element count");
            }
            ckpt.params.emplace_back(p.at("name").get<std::string>(), std::move(t));
        }
        return ckpt;
    } catch (const json::exception& e) {
        raise(ErrorKind::Parse, path + ": " + e.what());
    }
}

void write_history(const std::string& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path);
    if (!out) {
        raise(ErrorKind::Parse, "cannot open '" + path + "' for writing");
    }
    for (const auto& h : history) {
        json j;
        j["epoch"] = h.epoch;
        j["train_loss"] = h.train_loss;
        j["loss_e"] = h.loss_e;
        j["loss_v"] = h.loss_v;
        j["delta1"] = h.delta1;
        j["delta2"] = h.delta2;
        j["val_dis"] = h.val_dis;
        j["val_dim"] = h.val_dim;
        j["val_com"] = h.val_com;
        out << j.dump() << "\n";
    }
}

}  // namespace fusionkit
