#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fusionkit/dataio.hpp"
#include "fusionkit/decoder.hpp"

namespace fusionkit {

struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<std::int64_t> counts;  // row = true class, col = predicted

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int c)
        : num_classes(c), counts(static_cast<std::size_t>(c) * static_cast<std::size_t>(c), 0) {}

    std::int64_t& at(int truth, int predicted) {
        return counts[static_cast<std::size_t>(truth) * num_classes + predicted];
    }
    std::int64_t at(int truth, int predicted) const {
        return counts[static_cast<std::size_t>(truth) * num_classes + predicted];
    }
    std::int64_t support(int truth) const;
    std::int64_t total() const;
};

struct ClassScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;
};

struct MetricsReport {
    double dis = 0.0;  // support-weighted F1, higher is better
    double dim = 0.0;  // valence MSE, lower is better
    double com = 0.0;  // dis - coeff * dim
    double combined_coeff = 0.25;
    std::vector<ClassScore> per_class;
    ConfusionMatrix confusion;

    std::string to_text() const;  // dis/dim/com at 4 decimals plus the confusion matrix
};

std::vector<ClassScore> per_class_scores(const ConfusionMatrix& confusion);

// Per-class F1 averaged with weights support/total.
double weighted_f1(const ConfusionMatrix& confusion);

double mse_metric(const std::vector<double>& predictions, const std::vector<double>& targets);

double combined_score(double dis, double dim, double coeff = 0.25);

MetricsReport make_report(const ConfusionMatrix& confusion, double dim, double coeff = 0.25);

// Aligns predictions with labeled samples by id and scores them. Every
// sample needs both labels; every prediction needs a matching sample.
MetricsReport score_predictions(const std::vector<Prediction>& predictions,
                                const std::vector<FeatureSample>& labeled, int num_classes,
                                double coeff = 0.25);

}  // namespace fusionkit
