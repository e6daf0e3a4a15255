#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fusionkit/errors.hpp"
#include "fusionkit/losses.hpp"
#include "fusionkit/metrics.hpp"
#include "oracles.hpp"

using namespace fusionkit;

namespace {

Tensor random_tensor(int rows, int cols, std::mt19937_64& rng, double scale = 2.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    Tensor t(rows, cols);
    for (double& v : t.data) {
        v = dist(rng);
    }
    return t;
}

}  // namespace

TEST_CASE("ce_loss: uniform logits give ln C") {
    const int c = 7;
    auto logits = ad::constant(Tensor(3, c, 0.0));
    auto loss = ce_loss(logits, {0, 3, 6});
    CHECK(loss->value.item() == doctest::Approx(std::log(static_cast<double>(c))).epsilon(1e-14));
}

TEST_CASE("ce_loss: saturated correct logits drive the loss to zero") {
    Tensor logits(2, 4, 0.0);
    logits.at(0, 1) = 50.0;
    logits.at(1, 2) = 50.0;
    auto loss = ce_loss(ad::constant(logits), {1, 2});
    CHECK(loss->value.item() >= 0.0);
    CHECK(loss->value.item() < 1e-20);
}

TEST_CASE("ce_loss: random batch matches the oracle, gradient matches differences") {
    std::mt19937_64 rng(3);
    const int b = 5, c = 4;
    auto logits = ad::parameter(random_tensor(b, c, rng));
    std::vector<int> labels;
    oracle::Mat logits_o;
    for (int i = 0; i < b; ++i) {
        labels.push_back(static_cast<int>(rng() % c));
        oracle::Vec row(static_cast<std::size_t>(c));
        for (int j = 0; j < c; ++j) row[static_cast<std::size_t>(j)] = logits->value.at(i, j);
        logits_o.push_back(row);
    }
    auto loss = ce_loss(logits, labels);
    CHECK(std::abs(loss->value.item() - oracle::cross_entropy(logits_o, labels)) < 1e-12);

    auto report = ad::grad_check([&]() { return ce_loss(logits, labels); },
                                 {{"logits", logits}}, 1e-5, 1e-6);
    CHECK(report.pass);
}

TEST_CASE("ce_loss: empty batch and label mismatch are contract errors") {
    CHECK_THROWS_AS(ce_loss(ad::constant(Tensor(0, 3)), {}), FusionError);
    CHECK_THROWS_AS(ce_loss(ad::constant(Tensor(2, 3)), {0}), FusionError);
}

TEST_CASE("mse_loss: fixed cases and the oracle") {
    auto perfect = mse_loss(ad::constant(Tensor(2, 1, 0.7)), {0.7, 0.7});
    CHECK(perfect->value.item() == 0.0);

    Tensor preds(2, 1, 0.0);
    auto loss = mse_loss(ad::constant(preds), {1.0, -1.0});
    CHECK(loss->value.item() == doctest::Approx(1.0).epsilon(1e-15));

    std::mt19937_64 rng(5);
    Tensor p = random_tensor(6, 1, rng);
    std::vector<double> targets(6);
    for (auto& t : targets) {
        t = random_tensor(1, 1, rng).item();
    }
    auto node = mse_loss(ad::constant(p), targets);
    CHECK(std::abs(node->value.item() - oracle::mse(p.data, targets)) < 1e-13);
}

TEST_CASE("uncertainty_loss: closed-form fixtures") {
    auto weights = UncertaintyWeights::make();  // delta = 1
    auto le = ad::constant(Tensor::scalar(1.0));
    auto lv = ad::constant(Tensor::scalar(2.0));
    auto loss = uncertainty_loss(le, lv, weights);
    CHECK(loss->value.item() == doctest::Approx(1.0 + 1.0 + 2.0 * std::log(2.0)).epsilon(1e-14));
    CHECK(std::abs(loss->value.item() - 3.38629) < 1e-5);

    auto zero = uncertainty_loss(ad::constant(Tensor::scalar(0.0)),
                                 ad::constant(Tensor::scalar(0.0)), weights);
    CHECK(zero->value.item() == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));

    UncertaintyWeights skewed{ad::parameter(Tensor::scalar(std::log(2.0))),
                              ad::parameter(Tensor::scalar(std::log(0.5)))};
    auto one = ad::constant(Tensor::scalar(1.0));
    auto loss2 = uncertainty_loss(one, one, skewed);
    const double expected = 0.25 + 2.0 + std::log(3.0) + std::log(1.5);
    CHECK(loss2->value.item() == doctest::Approx(expected).epsilon(1e-14));
    CHECK(std::abs(loss2->value.item() - 3.75408) < 1e-5);
}

TEST_CASE("uncertainty_loss: dL/d(delta1) is -1.5 at the unit fixture") {
    auto weights = UncertaintyWeights::make();
    auto le = ad::constant(Tensor::scalar(1.0));
    auto lv = ad::constant(Tensor::scalar(2.0));
    auto loss = uncertainty_loss(le, lv, weights);
    ad::backward(loss);
    // dL/d(rho) = dL/d(delta) * delta; delta = 1 here, so the rho gradient is
    // the delta gradient itself.
    CHECK(weights.rho1->grad.item() == doctest::Approx(-1.5).epsilon(1e-12));

    weights.rho1->zero_grad();
    weights.rho2->zero_grad();
    auto report = ad::grad_check([&]() { return uncertainty_loss(le, lv, weights); },
                                 {{"rho1", weights.rho1}, {"rho2", weights.rho2}}, 1e-5, 1e-6);
    CHECK(report.pass);
}

TEST_CASE("uncertainty_loss: gradients flow through the upstream losses") {
    std::mt19937_64 rng(7);
    auto logits = ad::parameter(random_tensor(4, 3, rng));
    auto preds = ad::parameter(random_tensor(4, 1, rng));
    auto weights = UncertaintyWeights::make();
    std::vector<int> labels = {0, 2, 1, 0};
    std::vector<double> targets = {0.5, -0.5, 0.0, 1.0};
    auto build = [&]() {
        return uncertainty_loss(ce_loss(logits, labels), mse_loss(preds, targets), weights);
    };
    auto report = ad::grad_check(
        build,
        {{"logits", logits}, {"preds", preds}, {"rho1", weights.rho1}, {"rho2", weights.rho2}},
        1e-5, 1e-6);
    CHECK(report.pass);
}

TEST_CASE("uncertainty_loss: strictly increasing in both losses") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> pos(0.0, 3.0);
    std::uniform_real_distribution<double> rho_dist(-1.0, 1.0);
    for (int iter = 0; iter < 50; ++iter) {
        UncertaintyWeights weights{ad::parameter(Tensor::scalar(rho_dist(rng))),
                                   ad::parameter(Tensor::scalar(rho_dist(rng)))};
        const double le = pos(rng), lv = pos(rng), bump = 0.25;
        auto value = [&](double a, double b) {
            return uncertainty_loss(ad::constant(Tensor::scalar(a)),
                                    ad::constant(Tensor::scalar(b)), weights)
                ->value.item();
        };
        CHECK(value(le + bump, lv) > value(le, lv));
        CHECK(value(le, lv + bump) > value(le, lv));
    }
}

TEST_CASE("weighted_f1: perfect predictions score 1, combined ties out") {
    ConfusionMatrix confusion(3);
    confusion.at(0, 0) = 10;
    confusion.at(1, 1) = 5;
    confusion.at(2, 2) = 7;
    CHECK(weighted_f1(confusion) == doctest::Approx(1.0).epsilon(1e-15));
    const auto report = make_report(confusion, 0.0, 0.25);
    CHECK(report.dis == doctest::Approx(1.0));
    CHECK(report.dim == 0.0);
    CHECK(report.com == doctest::Approx(1.0));
}

TEST_CASE("weighted_f1: reduces to plain F1 for balanced binary classes") {
    ConfusionMatrix confusion(2);
    confusion.at(0, 0) = 8;
    confusion.at(0, 1) = 2;
    confusion.at(1, 0) = 2;
    confusion.at(1, 1) = 8;
    const auto scores = per_class_scores(confusion);
    CHECK(weighted_f1(confusion) ==
          doctest::Approx(0.5 * scores[0].f1 + 0.5 * scores[1].f1).epsilon(1e-15));
    CHECK(weighted_f1(confusion) == doctest::Approx(scores[0].f1).epsilon(1e-15));
}

TEST_CASE("weighted_f1: equals accuracy when precision matches recall per class") {
    // Symmetric confusion matrices have FP == FN for every class.
    ConfusionMatrix confusion(3);
    confusion.at(0, 0) = 12; confusion.at(0, 1) = 3; confusion.at(0, 2) = 1;
    confusion.at(1, 0) = 3;  confusion.at(1, 1) = 9; confusion.at(1, 2) = 2;
    confusion.at(2, 0) = 1;  confusion.at(2, 1) = 2; confusion.at(2, 2) = 15;
    const double accuracy = static_cast<double>(12 + 9 + 15) / confusion.total();
    CHECK(weighted_f1(confusion) == doctest::Approx(accuracy).epsilon(1e-14));
}

TEST_CASE("weighted_f1: zero-support class contributes nothing; empty total is an error") {
    ConfusionMatrix confusion(3);
    confusion.at(0, 0) = 4;
    confusion.at(1, 1) = 4;  // class 2 has no support
    CHECK(weighted_f1(confusion) == doctest::Approx(1.0).epsilon(1e-15));

    ConfusionMatrix empty(2);
    CHECK_THROWS_AS(weighted_f1(empty), FusionError);
}

TEST_CASE("combined: reference triples reproduce at the published precision") {
    CHECK(std::abs(combined_score(0.7936, 0.6138) - 0.6402) < 5e-4);
    CHECK(std::abs(combined_score(0.6170, 1.1890) - 0.3198) < 5e-4);
    CHECK(combined_score(1.0, 0.0) == 1.0);
    CHECK(combined_score(0.5, 1.0, 0.1) == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("metrics report: four-decimal text output") {
    ConfusionMatrix confusion(2);
    confusion.at(0, 0) = 3;
    confusion.at(1, 1) = 1;
    const auto report = make_report(confusion, 0.0625, 0.25);
    const auto text = report.to_text();
    CHECK(text.find("dis: 1.0000") != std::string::npos);
    CHECK(text.find("dim: 0.0625") != std::string::npos);
    CHECK(text.find("com: 0.9844") != std::string::npos);
    CHECK(text.find("confusion") != std::string::npos);
}

TEST_CASE("score_predictions: aligns by id and rejects unknown ids") {
    std::vector<FeatureSample> labeled(2);
    labeled[0].id = "a";
    labeled[0].emotion = 0;
    labeled[0].valence = 0.5;
    labeled[1].id = "b";
    labeled[1].emotion = 1;
    labeled[1].valence = -0.5;

    std::vector<Prediction> preds(2);
    preds[0].id = "b";
    preds[0].probs = {0.1, 0.9};
    preds[0].valence = -0.5;
    preds[1].id = "a";
    preds[1].probs = {0.8, 0.2};
    preds[1].valence = 0.5;

    const auto report = score_predictions(preds, labeled, 2);
    CHECK(report.dis == doctest::Approx(1.0));
    CHECK(report.dim == 0.0);

    preds[0].id = "missing";
    CHECK_THROWS_AS(score_predictions(preds, labeled, 2), FusionError);
}
