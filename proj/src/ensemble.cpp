#include "fusionkit/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fusionkit/errors.hpp"

namespace fusionkit {

std::vector<Prediction> fuse_predictions(const std::vector<std::vector<Prediction>>& members,
                                         const std::vector<double>& weights) {
    if (members.empty()) {
        raise(ErrorKind::Contract, "fuse_predictions: no members");
    }
    if (weights.size() != members.size()) {
        raise(ErrorKind::Contract, "fuse_predictions: " + std::to_string(weights.size()) +
                                       " weights for " + std::to_string(members.size()) +
                                       " members");
    }
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) {
            raise(ErrorKind::Contract, "fuse_predictions: negative weight");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        raise(ErrorKind::Contract,
              "fuse_predictions: weights sum to " + std::to_string(total) + ", want 1");
    }

    const auto& lead = members.front();
    const std::size_t num_classes = lead.empty() ? 0 : lead.front().probs.size();

    // Index every member by id and demand identical coverage.
    std::vector<std::map<std::string, const Prediction*>> by_id(members.size());
    for (std::size_t m = 0; m < members.size(); ++m) {
        for (const auto& p : members[m]) {
            if (p.probs.size() != num_classes) {
                raise(ErrorKind::Alignment, "member " + std::to_string(m) + " sample '" + p.id +
                                                "' has " + std::to_string(p.probs.size()) +
                                                " classes, member 0 has " +
                                                std::to_string(num_classes));
            }
            by_id[m][p.id] = &p;
        }
        if (by_id[m].size() != lead.size()) {
            std::string missing;
            for (const auto& p : lead) {
                if (!by_id[m].count(p.id)) {
                    missing += (missing.empty() ? "" : ", ") + p.id;
                }
            }
            raise(ErrorKind::Alignment, "member " + std::to_string(m) +
                                            " does not cover the same ids as member 0" +
                                            (missing.empty() ? "" : ": missing " + missing));
        }
    }

    std::vector<Prediction> fused;
    fused.reserve(lead.size());
    for (const auto& base : lead) {
        Prediction out;
        out.id = base.id;
        out.probs.assign(num_classes, 0.0);
        out.valence = 0.0;
        for (std::size_t m = 0; m < members.size(); ++m) {
            auto it = by_id[m].find(base.id);
            if (it == by_id[m].end()) {
                raise(ErrorKind::Alignment,
                      "member " + std::to_string(m) + " is missing id '" + base.id + "'");
            }
            const Prediction& p = *it->second;
            for (std::size_t j = 0; j < num_classes; ++j) {
                out.probs[j] += weights[m] * p.probs[j];
            }
            out.valence += weights[m] * p.valence;
        }
        fused.push_back(std::move(out));
    }
    return fused;
}

WeightSearchResult search_weights(const std::vector<std::vector<Prediction>>& members,
                                  const std::vector<FeatureSample>& labeled, double grid_step,
                                  int num_classes, double combined_coeff) {
    if (members.empty()) {
        raise(ErrorKind::Contract, "search_weights: no members");
    }
    if (!(grid_step > 0.0 && grid_step <= 1.0)) {
        raise(ErrorKind::Contract, "search_weights: grid step must be in (0, 1]");
    }
    const auto ticks = static_cast<long long>(std::llround(1.0 / grid_step));
    if (std::abs(static_cast<double>(ticks) * grid_step - 1.0) > 1e-9) {
        raise(ErrorKind::Contract, "search_weights: grid step must divide 1");
    }

    const std::size_t m = members.size();
    WeightSearchResult best;
    bool have_best = false;

    // Enumerate compositions of `ticks` into m parts in lexicographically
    // ascending weight order; only strict improvements replace the best.
    std::vector<long long> counts(m, 0);
    auto evaluate_candidate = [&]() {
        std::vector<double> weights(m);
        for (std::size_t i = 0; i < m; ++i) {
            weights[i] = static_cast<double>(counts[i]) / static_cast<double>(ticks);
        }
        auto report =
            score_predictions(fuse_predictions(members, weights), labeled, num_classes,
                              combined_coeff);
        if (!have_best || report.com > best.report.com) {
            best.weights = weights;
            best.report = std::move(report);
            have_best = true;
        }
        ++best.candidates_evaluated;
    };

    auto recurse = [&](auto&& self, std::size_t pos, long long remaining) -> void {
        if (pos + 1 == m) {
            counts[pos] = remaining;
            evaluate_candidate();
            return;
        }
        for (long long c = 0; c <= remaining; ++c) {
            counts[pos] = c;
            self(self, pos + 1, remaining - c);
        }
    };
    recurse(recurse, 0, ticks);
    return best;
}

}  // namespace fusionkit
