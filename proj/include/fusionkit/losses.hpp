#pragma once

#include <string>
#include <vector>

#include "fusionkit/autodiff.hpp"

namespace fusionkit {

enum class LossKind { uncertainty, fixed_equal };

LossKind loss_from_string(const std::string& s);
const char* to_string(LossKind k);

// Mean over the batch of -log softmax(logits)[label].
ad::NodePtr ce_loss(const ad::NodePtr& logits, const std::vector<int>& labels);

// Mean squared error against constant targets.
ad::NodePtr mse_loss(const ad::NodePtr& predictions, const std::vector<double>& targets);

// Trainable task weights, parametrized as delta = exp(rho) so positivity
// needs no projection.
struct UncertaintyWeights {
    ad::NodePtr rho1;  // 1x1
    ad::NodePtr rho2;  // 1x1

    double delta1() const;
    double delta2() const;

    static UncertaintyWeights make();  // rho = 0, i.e. delta = 1
};

// loss_e / delta1^2 + loss_v / (2 delta2^2) + log(1 + delta1) + log(1 + delta2)
ad::NodePtr uncertainty_loss(const ad::NodePtr& loss_e, const ad::NodePtr& loss_v,
                             const UncertaintyWeights& weights);

}  // namespace fusionkit
