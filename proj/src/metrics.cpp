#include "fusionkit/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "fusionkit/errors.hpp"

namespace fusionkit {

std::int64_t ConfusionMatrix::support(int truth) const {
    std::int64_t s = 0;
    for (int j = 0; j < num_classes; ++j) {
        s += at(truth, j);
    }
    return s;
}

std::int64_t ConfusionMatrix::total() const {
    std::int64_t s = 0;
    for (std::int64_t v : counts) {
        s += v;
    }
    return s;
}

std::vector<ClassScore> per_class_scores(const ConfusionMatrix& confusion) {
    const int c = confusion.num_classes;
    std::vector<ClassScore> scores(static_cast<std::size_t>(c));
    for (int k = 0; k < c; ++k) {
        std::int64_t tp = confusion.at(k, k);
        std::int64_t fp = 0, fn = 0;
        for (int j = 0; j < c; ++j) {
            if (j != k) {
                fp += confusion.at(j, k);
                fn += confusion.at(k, j);
            }
        }
        auto& s = scores[static_cast<std::size_t>(k)];
        s.support = tp + fn;
        s.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        s.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        s.f1 = (s.precision + s.recall) > 0.0
                   ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                   : 0.0;
    }
    return scores;
}

double weighted_f1(const ConfusionMatrix& confusion) {
    if (confusion.num_classes <= 0) {
        raise(ErrorKind::Contract, "weighted_f1: empty confusion matrix");
    }
    for (std::int64_t v : confusion.counts) {
        if (v < 0) {
            raise(ErrorKind::Contract, "weighted_f1: negative count");
        }
    }
    const std::int64_t total = confusion.total();
    if (total == 0) {
        raise(ErrorKind::Contract, "weighted_f1: no samples");
    }
    double score = 0.0;
    const auto scores = per_class_scores(confusion);
    for (const auto& s : scores) {
        score += (static_cast<double>(s.support) / static_cast<double>(total)) * s.f1;
    }
    return score;
}

double mse_metric(const std::vector<double>& predictions, const std::vector<double>& targets) {
    if (predictions.empty() || predictions.size() != targets.size()) {
        raise(ErrorKind::Contract, "mse_metric: need equal non-empty prediction/target lists");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - targets[i];
        total += d * d;
    }
    return total / static_cast<double>(predictions.size());
}

double combined_score(double dis, double dim, double coeff) {
    return dis - coeff * dim;
}

MetricsReport make_report(const ConfusionMatrix& confusion, double dim, double coeff) {
    MetricsReport report;
    report.confusion = confusion;
    report.per_class = per_class_scores(confusion);
    report.dis = weighted_f1(confusion);
    report.dim = dim;
    report.combined_coeff = coeff;
    report.com = combined_score(report.dis, report.dim, coeff);
    return report;
}

MetricsReport score_predictions(const std::vector<Prediction>& predictions,
                                const std::vector<FeatureSample>& labeled, int num_classes,
                                double coeff) {
    if (predictions.empty()) {
        raise(ErrorKind::Contract, "score_predictions: no predictions");
    }
    std::map<std::string, const FeatureSample*> by_id;
    for (const auto& s : labeled) {
        by_id[s.id] = &s;
    }
    ConfusionMatrix confusion(num_classes);
    std::vector<double> pred_valence, true_valence;
    pred_valence.reserve(predictions.size());
    true_valence.reserve(predictions.size());
    for (const auto& p : predictions) {
        auto it = by_id.find(p.id);
        if (it == by_id.end()) {
            raise(ErrorKind::Alignment, "no labeled sample with id '" + p.id + "'");
        }
        const FeatureSample& s = *it->second;
        if (!s.emotion || !s.valence) {
            raise(ErrorKind::Contract, "sample '" + s.id + "' is missing labels");
        }
        if (*s.emotion >= num_classes) {
            raise(ErrorKind::Label, "sample '" + s.id + "' has label " +
                                        std::to_string(*s.emotion) + " >= " +
                                        std::to_string(num_classes));
        }
        confusion.at(*s.emotion, classify(p.probs))++;
        pred_valence.push_back(p.valence);
        true_valence.push_back(*s.valence);
    }
    return make_report(confusion, mse_metric(pred_valence, true_valence), coeff);
}

std::string MetricsReport::to_text() const {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << "dis: " << dis << "\n";
    out << "dim: " << dim << "\n";
    out << "com: " << com << "\n";
    out << "confusion (rows = true, cols = predicted):\n";
    for (int i = 0; i < confusion.num_classes; ++i) {
        out << " ";
        for (int j = 0; j < confusion.num_classes; ++j) {
            out << " " << std::setw(6) << confusion.at(i, j);
        }
        out << "\n";
    }
    out << "per-class precision/recall/f1/support:\n";
    for (std::size_t k = 0; k < per_class.size(); ++k) {
        const auto& s = per_class[k];
        out << "  class " << k << ": " << s.precision << " / " << s.recall << " / " << s.f1
            << " / " << s.support << "\n";
    }
    return out.str();
}

}  // namespace fusionkit
