#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "fusionkit/errors.hpp"
#include "fusionkit/training.hpp"

using namespace fusionkit;

namespace {

TrainConfig small_config() {
    TrainConfig config;
    config.fused_dim = 8;
    config.batch_size = 16;
    config.max_epochs = 20;
    config.patience = 50;
    config.seed = 7;
    config.modality_map = {{"a0", Modality::acoustic},
                           {"a1", Modality::acoustic},
                           {"v0", Modality::visual}};
    return config;
}

Dataset small_dataset(double feature_noise, std::uint64_t seed, int count = 60) {
    auto spec = SynthSpec::make(3, {{"a0", 4}, {"a1", 4}, {"v0", 3}}, count, seed, 0.1,
                                feature_noise);
    Dataset ds;
    ds.samples = generate_synthetic(spec);
    ds.manifest = derive_manifest(ds.samples, 3);
    return ds;
}

double accuracy(const FusionModel& model, const std::vector<FeatureSample>& samples) {
    const auto preds = predict(model, samples);
    int hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (classify(preds[i].probs) == *samples[i].emotion) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

}  // namespace

TEST_CASE("init_model: deterministic per seed, biases zero") {
    const auto config = small_config();
    const auto ds = small_dataset(0.5, 3);
    auto a = init_model(config, ds.manifest, 42);
    auto b = init_model(config, ds.manifest, 42);
    auto c = init_model(config, ds.manifest, 43);

    const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
    REQUIRE(pa.size() == pb.size());
    bool any_differs = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].second->value == pb[i].second->value);
        if (!(pa[i].second->value == pc[i].second->value)) {
            any_differs = true;
        }
        const auto& name = pa[i].first;
        if (name.find("bias") != std::string::npos || name.find("rho") != std::string::npos) {
            for (double v : pa[i].second->value.data) {
                CHECK(v == 0.0);
            }
        }
    }
    CHECK(any_differs);
}

TEST_CASE("init_model: initial posterior is near uniform at D=128, C=6") {
    TrainConfig config;
    config.fused_dim = 128;
    config.num_classes = 6;
    DatasetManifest manifest;
    manifest.num_classes = 6;
    for (int i = 0; i < 5; ++i) {
        const std::string name = "s" + std::to_string(i);
        manifest.streams.push_back({name, 16});
        config.modality_map[name] = i < 3 ? Modality::acoustic : Modality::visual;
    }
    auto model = init_model(config, manifest, 11);

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<FeatureSample> samples(100);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i].id = "r" + std::to_string(i);
        for (const auto& st : manifest.streams) {
            auto& vec = samples[i].streams[st.name];
            vec.resize(static_cast<std::size_t>(st.dim));
            for (auto& v : vec) {
                v = unit(rng);
            }
        }
    }
    const auto preds = predict(model, samples);
    for (const auto& p : preds) {
        CHECK(p.probs[static_cast<std::size_t>(classify(p.probs))] < 2.0 / 6.0);
    }
}

TEST_CASE("init_model: missing modality entry is a configuration error") {
    auto config = small_config();
    config.strategy = StrategyKind::intra_then_inter;
    config.modality_map.erase("v0");
    const auto ds = small_dataset(0.5, 3);
    CHECK_THROWS_AS(init_model(config, ds.manifest, 1), FusionError);
}

TEST_CASE("train: zero epochs returns the initialization") {
    auto config = small_config();
    config.max_epochs = 0;
    const auto ds = small_dataset(0.5, 5);
    const auto split = split_dataset(ds.samples, 0.75, 1);
    Dataset train{ds.manifest, split.train}, val{ds.manifest, split.val};

    const auto result = train_model(config, train, val);
    CHECK(result.history.empty());
    CHECK(result.best.epoch == 0);

    const auto fresh = init_model(config, ds.manifest, config.seed);
    const auto fresh_params = fresh.parameters();
    REQUIRE(result.best.params.size() == fresh_params.size());
    for (std::size_t i = 0; i < fresh_params.size(); ++i) {
        CHECK(result.best.params[i].second == fresh_params[i].second->value);
    }
}

TEST_CASE("adam: one full-batch step matches a hand-stepped oracle") {
    // Scalar linear model: loss = (w x + b - y)^2 with x = 2, y = 1.
    auto w = ad::parameter(Tensor::scalar(0.5));
    auto b = ad::parameter(Tensor::scalar(-0.2));
    auto x = ad::constant(Tensor::scalar(2.0));

    TrainConfig config;
    config.learning_rate = 1e-3;
    std::vector<std::pair<std::string, ad::NodePtr>> params = {{"w", w}, {"b", b}};
    AdamOptimizer opt(config, params.size());

    // Hand-stepped reference state.
    double w_ref = 0.5, b_ref = -0.2;
    double mw = 0.0, vw = 0.0, mb = 0.0, vb = 0.0;
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, lr = 1e-3;

    for (int step = 1; step <= 3; ++step) {
        auto pred = ad::add(ad::matmul(x, w), b);
        auto loss = mse_loss(pred, {1.0});
        w->zero_grad();
        b->zero_grad();
        ad::backward(loss);
        opt.step(params, 0.0);

        const double residual = w_ref * 2.0 + b_ref - 1.0;
        const double gw = 2.0 * residual * 2.0;
        const double gb = 2.0 * residual;
        mw = beta1 * mw + (1 - beta1) * gw;
        vw = beta2 * vw + (1 - beta2) * gw * gw;
        mb = beta1 * mb + (1 - beta1) * gb;
        vb = beta2 * vb + (1 - beta2) * gb * gb;
        const double bc1 = 1.0 - std::pow(beta1, step);
        const double bc2 = 1.0 - std::pow(beta2, step);
        w_ref -= lr * (mw / bc1) / (std::sqrt(vw / bc2) + eps);
        b_ref -= lr * (mb / bc1) / (std::sqrt(vb / bc2) + eps);

        CHECK(w->value.item() == doctest::Approx(w_ref).epsilon(1e-14));
        CHECK(b->value.item() == doctest::Approx(b_ref).epsilon(1e-14));
    }
}

TEST_CASE("adam: global-norm clipping rescales the update") {
    auto w = ad::parameter(Tensor::scalar(0.0));
    w->grad.data[0] = 30.0;  // norm 30, clip at 3 -> effective gradient 3
    TrainConfig config;
    config.learning_rate = 0.1;
    std::vector<std::pair<std::string, ad::NodePtr>> params = {{"w", w}};

    AdamOptimizer clipped(config, 1);
    clipped.step(params, 3.0);
    const double g = 3.0;
    const double expected = -0.1 * g / (std::sqrt(g * g) + 1e-8);
    CHECK(w->value.item() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("train: separable features reach near-perfect train accuracy") {
    auto config = small_config();
    config.max_epochs = 200;
    config.patience = 200;
    const auto ds = small_dataset(0.0, 9);
    const auto split = split_dataset(ds.samples, 0.7, 2);
    Dataset train{ds.manifest, split.train}, val{ds.manifest, split.val};

    const auto result = train_model(config, train, val);
    auto model = model_from_checkpoint(result.best);
    CHECK(accuracy(model, train.samples) >= 0.99);

    // A 100%-accurate model scores dis = 1 on its own training set.
    if (accuracy(model, train.samples) == 1.0) {
        CHECK(evaluate(model, train.samples).dis == doctest::Approx(1.0));
    }
}

TEST_CASE("train: loss is non-increasing on the convex reduction") {
    // One stream, frozen identity alignment, baseline decoder, fixed-equal
    // loss: the trainable surface is jointly convex.
    TrainConfig config;
    config.strategy = StrategyKind::parallel;
    config.decoder = DecoderKind::baseline;
    config.loss = LossKind::fixed_equal;
    config.fused_dim = 4;
    config.learning_rate = 1e-3;
    config.modality_map = {{"x", Modality::acoustic}};

    auto spec = SynthSpec::make(3, {{"x", 4}}, 40, 21, 0.2, 0.8);
    Dataset ds;
    ds.samples = generate_synthetic(spec);
    ds.manifest = derive_manifest(ds.samples, 3);

    auto model = init_model(config, ds.manifest, 5);
    auto& stage = model.encoder.stages[0];
    stage.params.align[0].weight->value.fill(0.0);
    for (int i = 0; i < 4; ++i) {
        stage.params.align[0].weight->value.at(i, i) = 1.0;
    }
    stage.params.align[0].weight->requires_grad = false;
    stage.params.align[0].bias->requires_grad = false;

    std::vector<const FeatureSample*> batch;
    std::vector<int> labels;
    std::vector<double> targets;
    for (const auto& s : ds.samples) {
        batch.push_back(&s);
        labels.push_back(*s.emotion);
        targets.push_back(*s.valence);
    }

    auto params = model.parameters();
    AdamOptimizer opt(config, params.size());
    double prev = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 10; ++step) {
        auto fwd = model_forward(model, batch);
        auto loss = ad::add(ce_loss(fwd.decoder.logits, labels),
                            mse_loss(fwd.decoder.valence, targets));
        CHECK(loss->value.item() <= prev + 1e-12);
        prev = loss->value.item();
        model.zero_grad();
        ad::backward(loss);
        opt.step(params, config.grad_clip_norm);
    }
}

TEST_CASE("train: uncertainty weights shift toward the learnable task") {
    // Labels are pure noise; valence is a clean linear readout of the
    // features. delta1 should grow (downweighting CE) while delta2 shrinks.
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Dataset ds;
    for (int i = 0; i < 80; ++i) {
        FeatureSample s;
        s.id = "n" + std::to_string(i);
        auto& vec = s.streams["x"];
        vec.resize(6);
        double total = 0.0;
        for (auto& v : vec) {
            v = unit(rng);
            total += v;
        }
        s.emotion = static_cast<int>(rng() % 3);
        s.valence = 0.5 * total;
        ds.samples.push_back(std::move(s));
    }
    ds.manifest = derive_manifest(ds.samples, 3);

    TrainConfig config;
    config.fused_dim = 6;
    config.loss = LossKind::uncertainty;
    config.max_epochs = 150;
    config.patience = 150;
    config.batch_size = 20;
    config.seed = 3;
    config.modality_map = {{"x", Modality::acoustic}};

    const auto split = split_dataset(ds.samples, 0.75, 4);
    const auto result =
        train_model(config, Dataset{ds.manifest, split.train}, Dataset{ds.manifest, split.val});
    REQUIRE(!result.history.empty());
    const auto& first = result.history.front();
    const auto& last = result.history.back();
    CHECK(last.delta1 > 1.0);
    CHECK(last.delta1 / last.delta2 > first.delta1 / first.delta2);
    CHECK(last.delta1 / last.delta2 > 1.3);
    CHECK(last.loss_v < first.loss_v);
}

TEST_CASE("train: full determinism of history and final checkpoint") {
    auto config = small_config();
    config.max_epochs = 8;
    const auto ds = small_dataset(0.8, 13);
    const auto split = split_dataset(ds.samples, 0.75, 6);
    Dataset train{ds.manifest, split.train}, val{ds.manifest, split.val};

    const auto a = train_model(config, train, val);
    const auto b = train_model(config, train, val);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].train_loss == b.history[i].train_loss);
        CHECK(a.history[i].val_com == b.history[i].val_com);
        CHECK(a.history[i].delta1 == b.history[i].delta1);
    }
    REQUIRE(a.best.params.size() == b.best.params.size());
    for (std::size_t i = 0; i < a.best.params.size(); ++i) {
        CHECK(a.best.params[i].second == b.best.params[i].second);
    }
}

TEST_CASE("checkpoint: save/load round-trip is exact and reproduces predictions") {
    auto config = small_config();
    config.max_epochs = 6;
    const auto ds = small_dataset(0.8, 17);
    const auto split = split_dataset(ds.samples, 0.75, 8);
    Dataset train{ds.manifest, split.train}, val{ds.manifest, split.val};
    const auto result = train_model(config, train, val);

    const std::string path = "/tmp/fusionkit_ckpt_test.json";
    save_checkpoint(path, result.best);
    const auto loaded = load_checkpoint(path);

    REQUIRE(loaded.params.size() == result.best.params.size());
    for (std::size_t i = 0; i < loaded.params.size(); ++i) {
        CHECK(loaded.params[i].first == result.best.params[i].first);
        CHECK(loaded.params[i].second == result.best.params[i].second);
    }
    CHECK(loaded.epoch == result.best.epoch);
    CHECK(loaded.best_com == result.best.best_com);

    auto m1 = model_from_checkpoint(result.best);
    auto m2 = model_from_checkpoint(loaded);
    const auto p1 = predict(m1, val.samples);
    const auto p2 = predict(m2, val.samples);
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i].probs == p2[i].probs);
        CHECK(p1[i].valence == p2[i].valence);
    }

    const auto r1 = evaluate(m1, val.samples);
    CHECK(r1.com == result.best.best_com);
    std::remove(path.c_str());
}

TEST_CASE("predict then score externally equals evaluate") {
    auto config = small_config();
    config.max_epochs = 4;
    const auto ds = small_dataset(0.8, 19);
    const auto split = split_dataset(ds.samples, 0.75, 9);
    const auto result = train_model(config, Dataset{ds.manifest, split.train},
                                    Dataset{ds.manifest, split.val});
    auto model = model_from_checkpoint(result.best);
    const auto direct = evaluate(model, split.val);
    const auto scored =
        score_predictions(predict(model, split.val), split.val, 3, config.combined_coeff);
    CHECK(direct.dis == scored.dis);
    CHECK(direct.dim == scored.dim);
    CHECK(direct.com == scored.com);
}

TEST_CASE("train: a diverging run aborts with a numeric error naming the epoch") {
    auto config = small_config();
    config.learning_rate = 1e6;
    config.grad_clip_norm = 0.0;
    config.max_epochs = 50;
    const auto ds = small_dataset(0.5, 23);
    const auto split = split_dataset(ds.samples, 0.75, 10);
    try {
        train_model(config, Dataset{ds.manifest, split.train}, Dataset{ds.manifest, split.val});
        FAIL("expected a numeric abort");
    } catch (const FusionError& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("train: empty split is a contract error") {
    auto config = small_config();
    const auto ds = small_dataset(0.5, 29);
    Dataset empty{ds.manifest, {}};
    CHECK_THROWS_AS(train_model(config, ds, empty), FusionError);
}
