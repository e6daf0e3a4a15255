#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fusionkit/ensemble.hpp"
#include "fusionkit/errors.hpp"
#include "fusionkit/training.hpp"

using namespace fusionkit;
using nlohmann::json;

namespace {

std::uint64_t env_seed() {
    if (const char* s = std::getenv("FUSIONKIT_SEED")) {
        try {
            return std::stoull(s);
        } catch (const std::exception&) {
            raise(ErrorKind::Usage, std::string("FUSIONKIT_SEED is not an integer: ") + s);
        }
    }
    return 0;
}

json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrorKind::Parse, "cannot open '" + path + "'");
    }
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        raise(ErrorKind::Parse, path + ": " + e.what());
    }
}

void reject_unknown_keys(const json& j, const std::vector<std::string>& known,
                         const std::string& what) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            raise(ErrorKind::Usage, what + ": unknown key '" + key + "'");
        }
    }
}

SynthSpec parse_synth_spec(const std::string& path) {
    const json j = parse_json_file(path);
    reject_unknown_keys(j,
                        {"classes", "samples", "seed", "valence_noise", "feature_noise",
                         "streams", "priors", "valence_means", "means_seed", "means_scale",
                         "class_means"},
                        "synth spec");
    try {
        std::vector<StreamSpec> streams;
        for (const auto& [name, dim] : j.at("streams").items()) {
            streams.push_back({name, dim.get<int>()});
        }
        auto spec = SynthSpec::make(
            j.at("classes").get<int>(), streams, j.at("samples").get<int>(),
            j.contains("seed") ? j["seed"].get<std::uint64_t>() : env_seed(),
            j.at("valence_noise").get<double>(), j.at("feature_noise").get<double>(),
            j.contains("means_seed") ? j["means_seed"].get<std::uint64_t>() : 1,
            j.contains("means_scale") ? j["means_scale"].get<double>() : 1.0);
        if (j.contains("priors")) {
            spec.class_priors = j["priors"].get<std::vector<double>>();
        }
        if (j.contains("valence_means")) {
            spec.valence_means = j["valence_means"].get<std::vector<double>>();
        }
        if (j.contains("class_means")) {
            spec.class_means =
                j["class_means"].get<std::vector<std::vector<std::vector<double>>>>();
        }
        spec.validate();
        return spec;
    } catch (const json::exception& e) {
        raise(ErrorKind::Parse, path + ": " + e.what());
    }
}

std::vector<double> parse_weights(const std::string& text) {
    std::vector<double> weights;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) {
        try {
            weights.push_back(std::stod(token));
        } catch (const std::exception&) {
            raise(ErrorKind::Usage, "bad weight '" + token + "' in --weights");
        }
    }
    if (weights.empty()) {
        raise(ErrorKind::Usage, "--weights needs at least one value");
    }
    return weights;
}

struct TrainCli {
    std::string config_path;
    std::string data_path;
    std::string out_path;
    std::string history_path;
    double train_fraction = 0.8;

    // flag overrides; only applied when the option was actually passed
    int strategy = 1;
    std::string decoder, loss;
    std::uint64_t seed = 0;
    double lr = 0.0, grad_clip = 0.0;
    int epochs = 0, batch_size = 0, fused_dim = 0, classes = 0, patience = 0;
};

void run_train(const TrainCli& cli, const CLI::App& cmd) {
    TrainConfig config;
    config.seed = env_seed();
    double train_fraction = 0.8;
    if (!cli.config_path.empty()) {
        const json j = parse_json_file(cli.config_path);
        config = config_from_json(j, {"train_fraction"});
        if (!j.contains("seed")) {
            config.seed = env_seed();
        }
        if (j.contains("train_fraction")) {
            train_fraction = j["train_fraction"].get<double>();
        }
    }

    if (cmd.count("--strategy")) config.strategy = strategy_from_int(cli.strategy);
    if (cmd.count("--decoder")) config.decoder = decoder_from_string(cli.decoder);
    if (cmd.count("--loss")) config.loss = loss_from_string(cli.loss);
    if (cmd.count("--seed")) config.seed = cli.seed;
    if (cmd.count("--lr")) config.learning_rate = cli.lr;
    if (cmd.count("--epochs")) config.max_epochs = cli.epochs;
    if (cmd.count("--batch-size")) config.batch_size = cli.batch_size;
    if (cmd.count("--fused-dim")) config.fused_dim = cli.fused_dim;
    if (cmd.count("--classes")) config.num_classes = cli.classes;
    if (cmd.count("--patience")) config.patience = cli.patience;
    if (cmd.count("--grad-clip")) config.grad_clip_norm = cli.grad_clip;
    if (cmd.count("--train-fraction")) train_fraction = cli.train_fraction;

    const auto ds = load_dataset(cli.data_path, config.num_classes);
    const auto split = split_dataset(ds.samples, train_fraction, config.seed);
    if (!split.stratified) {
        std::cerr << "fusionkit: warning: split is not stratified\n";
    }
    const Dataset train_set{ds.manifest, split.train};
    const Dataset val_set{ds.manifest, split.val};

    const auto result = train_model(config, train_set, val_set);
    save_checkpoint(cli.out_path, result.best);
    if (!cli.history_path.empty()) {
        write_history(cli.history_path, result.history);
    }
    std::printf("trained %zu epochs; best epoch %d, val com %.4f; checkpoint: %s\n",
                result.history.size(), result.best_epoch, result.best.best_com,
                cli.out_path.c_str());
}

void run_gradcheck(const ModelGradCheckSpec& spec) {
    bool all_pass = true;
    double worst = 0.0;
    for (int s = 1; s <= 3; ++s) {
        for (auto decoder : {DecoderKind::baseline, DecoderKind::jdev}) {
            for (auto loss : {LossKind::uncertainty, LossKind::fixed_equal}) {
                const auto report =
                    model_grad_check(strategy_from_int(s), decoder, loss, spec);
                std::printf("strategy %d, decoder %-8s, loss %-11s: max rel err %.3e  %s\n", s,
                            to_string(decoder), to_string(loss), report.max_rel_err,
                            report.pass ? "ok" : "FAIL");
                worst = std::max(worst, report.max_rel_err);
                all_pass = all_pass && report.pass;
            }
        }
    }
    if (!all_pass) {
        raise(ErrorKind::Numeric,
              "gradient check failed (worst rel err " + std::to_string(worst) + ")");
    }
    std::printf("PASS\n");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fusionkit: attention fusion and joint decoding over feature streams"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string synth_spec_path, synth_out;
    synth->add_option("--spec", synth_spec_path, "synth spec JSON")
        ->required()
        ->check(CLI::ExistingFile);
    synth->add_option("--out", synth_out, "output dataset path")->required();

    // train
    auto* train = app.add_subcommand("train", "train a fusion model");
    TrainCli train_cli;
    train->add_option("--config", train_cli.config_path, "run config JSON")
        ->check(CLI::ExistingFile);
    train->add_option("--data", train_cli.data_path, "dataset path")
        ->required()
        ->check(CLI::ExistingFile);
    train->add_option("--out", train_cli.out_path, "checkpoint output path")->required();
    train->add_option("--history", train_cli.history_path, "per-epoch history output path");
    train->add_option("--strategy", train_cli.strategy, "fusion strategy (1|2|3)");
    train->add_option("--decoder", train_cli.decoder, "decoder (baseline|jdev)");
    train->add_option("--loss", train_cli.loss, "loss (uncertainty|fixed-equal)");
    train->add_option("--seed", train_cli.seed, "rng seed");
    train->add_option("--lr", train_cli.lr, "learning rate");
    train->add_option("--epochs", train_cli.epochs, "max epochs");
    train->add_option("--batch-size", train_cli.batch_size, "mini-batch size");
    train->add_option("--fused-dim", train_cli.fused_dim, "common fused dimension D");
    train->add_option("--classes", train_cli.classes, "number of emotion classes");
    train->add_option("--patience", train_cli.patience, "early-stop patience");
    train->add_option("--grad-clip", train_cli.grad_clip, "global grad-norm clip (<=0 off)");
    train->add_option("--train-fraction", train_cli.train_fraction, "train split fraction");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on labeled data");
    std::string eval_ckpt, eval_data, eval_out;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--data", eval_data, "labeled dataset path")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--out", eval_out, "also write the report here");

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "write per-sample predictions");
    std::string pred_ckpt, pred_data, pred_out;
    predict_cmd->add_option("--checkpoint", pred_ckpt, "checkpoint path")
        ->required()
        ->check(CLI::ExistingFile);
    predict_cmd->add_option("--data", pred_data, "dataset path")
        ->required()
        ->check(CLI::ExistingFile);
    predict_cmd->add_option("--out", pred_out, "prediction output path")->required();

    // fuse
    auto* fuse = app.add_subcommand("fuse", "decision-level fusion of prediction sets");
    std::vector<std::string> fuse_preds;
    std::string fuse_weights_text, fuse_labels, fuse_out, fuse_config;
    bool fuse_search = false;
    double fuse_grid = 0.05;
    int fuse_classes = 0;
    fuse->add_option("--pred", fuse_preds, "prediction file (repeat per member)")
        ->required()
        ->check(CLI::ExistingFile);
    fuse->add_option("--weights", fuse_weights_text, "comma-separated member weights");
    fuse->add_flag("--search", fuse_search, "grid-search weights on labeled data");
    fuse->add_option("--grid-step", fuse_grid, "simplex grid step for --search");
    fuse->add_option("--labels", fuse_labels, "labeled dataset for scoring")
        ->check(CLI::ExistingFile);
    fuse->add_option("--classes", fuse_classes, "number of classes (default: from labels)");
    fuse->add_option("--out", fuse_out, "write fused predictions here");
    fuse->add_option("--config", fuse_config, "fuse config JSON (weights, grid_step)")
        ->check(CLI::ExistingFile);

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every model");
    ModelGradCheckSpec gc;
    gradcheck->add_option("--fused-dim", gc.fused_dim, "fused dimension");
    gradcheck->add_option("--classes", gc.num_classes, "class count");
    gradcheck->add_option("--acoustic", gc.acoustic_streams, "acoustic stream count");
    gradcheck->add_option("--visual", gc.visual_streams, "visual stream count");
    gradcheck->add_option("--stream-dim", gc.stream_dim, "per-stream dimension");
    gradcheck->add_option("--batch", gc.batch, "probe batch size");
    gradcheck->add_option("--step", gc.step, "finite-difference step");
    gradcheck->add_option("--tol", gc.tol, "max relative error tolerance");
    gradcheck->add_option("--seed", gc.seed, "rng seed");

    try {
        app.parse(argc, argv);

        if (*synth) {
            const auto spec = parse_synth_spec(synth_spec_path);
            const auto samples = generate_synthetic(spec);
            write_dataset(synth_out, samples);
            std::printf("wrote %zu samples to %s\n", samples.size(), synth_out.c_str());
        } else if (*train) {
            run_train(train_cli, *train);
        } else if (*eval_cmd) {
            const auto ckpt = load_checkpoint(eval_ckpt);
            const auto model = model_from_checkpoint(ckpt);
            const auto ds = load_dataset(eval_data, model.num_classes());
            const auto report = evaluate(model, ds.samples);
            std::fputs(report.to_text().c_str(), stdout);
            if (!eval_out.empty()) {
                std::ofstream out(eval_out);
                out << report.to_text();
            }
        } else if (*predict_cmd) {
            const auto ckpt = load_checkpoint(pred_ckpt);
            const auto model = model_from_checkpoint(ckpt);
            const auto ds = load_dataset(pred_data, model.num_classes());
            write_predictions(pred_out, predict(model, ds.samples));
            std::printf("wrote %zu predictions to %s\n", ds.samples.size(), pred_out.c_str());
        } else if (*fuse) {
            std::vector<std::vector<Prediction>> members;
            for (const auto& path : fuse_preds) {
                members.push_back(read_predictions(path));
            }
            std::vector<double> weights;
            if (!fuse_config.empty()) {
                const json j = parse_json_file(fuse_config);
                reject_unknown_keys(j, {"weights", "grid_step"}, "fuse config");
                if (j.contains("weights")) weights = j["weights"].get<std::vector<double>>();
                if (j.contains("grid_step") && !fuse->count("--grid-step")) {
                    fuse_grid = j["grid_step"].get<double>();
                }
            }
            if (fuse->count("--weights")) {
                weights = parse_weights(fuse_weights_text);
            }

            std::optional<Dataset> labels;
            if (!fuse_labels.empty()) {
                labels = load_dataset(fuse_labels, fuse_classes);
            }

            std::vector<Prediction> fused;
            if (fuse_search) {
                if (!labels) {
                    raise(ErrorKind::Usage, "--search needs --labels");
                }
                const auto result = search_weights(members, labels->samples, fuse_grid,
                                                   labels->manifest.num_classes);
                std::printf("weights:");
                for (double w : result.weights) {
                    std::printf(" %.4f", w);
                }
                std::printf("  (%zu candidates)\n", result.candidates_evaluated);
                std::fputs(result.report.to_text().c_str(), stdout);
                fused = fuse_predictions(members, result.weights);
            } else {
                if (weights.empty()) {
                    raise(ErrorKind::Usage, "fuse needs --weights, a --config with weights, or --search");
                }
                fused = fuse_predictions(members, weights);
                if (labels) {
                    const auto report =
                        score_predictions(fused, labels->samples, labels->manifest.num_classes);
                    std::fputs(report.to_text().c_str(), stdout);
                }
            }
            if (!fuse_out.empty()) {
                write_predictions(fuse_out, fused);
            }
        } else if (*gradcheck) {
            run_gradcheck(gc);
        }
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "fusionkit: error[usage]: " << e.what() << "\n";
        return 1;
    } catch (const FusionError& e) {
        std::cerr << "fusionkit: error[" << e.category() << "]: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "fusionkit: error[internal]: " << e.what() << "\n";
        return 1;
    }
}
