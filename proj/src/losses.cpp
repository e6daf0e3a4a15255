#include "fusionkit/losses.hpp"

#include <cmath>

#include "fusionkit/errors.hpp"

namespace fusionkit {

LossKind loss_from_string(const std::string& s) {
    if (s == "uncertainty") return LossKind::uncertainty;
    if (s == "fixed-equal") return LossKind::fixed_equal;
    raise(ErrorKind::Config, "unknown loss '" + s + "' (want uncertainty|fixed-equal)");
}

const char* to_string(LossKind k) {
    return k == LossKind::uncertainty ? "uncertainty" : "fixed-equal";
}

ad::NodePtr ce_loss(const ad::NodePtr& logits, const std::vector<int>& labels) {
    if (logits->rows() == 0) {
        raise(ErrorKind::Contract, "ce_loss: empty batch");
    }
    if (static_cast<int>(labels.size()) != logits->rows()) {
        raise(ErrorKind::Contract, "ce_loss: " + std::to_string(labels.size()) +
                                       " labels for " + std::to_string(logits->rows()) + " rows");
    }
    auto picked = ad::take_per_row(ad::log_softmax_rows(logits), labels);
    return ad::scalar_mul(ad::mean_all(picked), -1.0);
}

ad::NodePtr mse_loss(const ad::NodePtr& predictions, const std::vector<double>& targets) {
    if (predictions->rows() == 0) {
        raise(ErrorKind::Contract, "mse_loss: empty batch");
    }
    if (predictions->cols() != 1 ||
        static_cast<int>(targets.size()) != predictions->rows()) {
        raise(ErrorKind::Contract, "mse_loss: predictions " + predictions->value.shape_str() +
                                       " vs " + std::to_string(targets.size()) + " targets");
    }
    Tensor t(predictions->rows(), 1);
    for (int i = 0; i < t.rows; ++i) {
        t.at(i, 0) = targets[static_cast<std::size_t>(i)];
    }
    auto diff = ad::sub(predictions, ad::constant(std::move(t)));
    return ad::mean_all(ad::mul(diff, diff));
}

double UncertaintyWeights::delta1() const { return std::exp(rho1->value.item()); }
double UncertaintyWeights::delta2() const { return std::exp(rho2->value.item()); }

UncertaintyWeights UncertaintyWeights::make() {
    return {ad::parameter(Tensor::scalar(0.0)), ad::parameter(Tensor::scalar(0.0))};
}

ad::NodePtr uncertainty_loss(const ad::NodePtr& loss_e, const ad::NodePtr& loss_v,
                             const UncertaintyWeights& weights) {
    // 1/delta^2 = exp(-2 rho)
    auto term_e = ad::mul(loss_e, ad::exp(ad::scalar_mul(weights.rho1, -2.0)));
    auto term_v = ad::scalar_mul(ad::mul(loss_v, ad::exp(ad::scalar_mul(weights.rho2, -2.0))), 0.5);
    auto reg1 = ad::log(ad::add_scalar(ad::exp(weights.rho1), 1.0));
    auto reg2 = ad::log(ad::add_scalar(ad::exp(weights.rho2), 1.0));
    return ad::add(ad::add(term_e, term_v), ad::add(reg1, reg2));
}

}  // namespace fusionkit
