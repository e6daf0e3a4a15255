#pragma once

#include <string>
#include <vector>

#include "fusionkit/dataio.hpp"
#include "fusionkit/decoder.hpp"
#include "fusionkit/metrics.hpp"

namespace fusionkit {

// Convex combination of member systems' posteriors and valences, aligned by
// sample id. Weights must lie on the simplex.
std::vector<Prediction> fuse_predictions(const std::vector<std::vector<Prediction>>& members,
                                         const std::vector<double>& weights);

struct WeightSearchResult {
    std::vector<double> weights;
    MetricsReport report;
    std::size_t candidates_evaluated = 0;
};

// Exhaustive simplex grid search (grid_step must divide 1) maximizing the
// combined score on the labeled validation samples. Ties go to the
// lexicographically smallest weight vector.
WeightSearchResult search_weights(const std::vector<std::vector<Prediction>>& members,
                                  const std::vector<FeatureSample>& labeled, double grid_step,
                                  int num_classes, double combined_coeff = 0.25);

}  // namespace fusionkit
