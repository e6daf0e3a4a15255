#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "fusionkit/tensor.hpp"

namespace fusionkit::ad {

class Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of a reverse-mode tape. Graphs are dynamic: each forward pass
// builds a fresh DAG of Nodes on top of long-lived parameter leaves. A Node
// owns its parents, so releasing the root frees the interior of the graph
// while leaves survive in whoever holds them.
//
// `grad` is the persistent accumulator (zero until a backward pass reaches
// the node). Each backward() call computes the root-to-node flow in scratch
// buffers and adds it in, so running backward twice on the same graph
// exactly doubles every gradient.
class Node {
public:
    Tensor value;
    Tensor grad;
    bool requires_grad = false;

    const char* op = "leaf";
    std::vector<NodePtr> parents;

    // Adds this node's flow contributions into the parents' flow buffers.
    // Empty for leaves.
    std::function<void(Node&)> backprop;

    int rows() const { return value.rows; }
    int cols() const { return value.cols; }

    void zero_grad() { grad.fill(0.0); }

    // Scratch state used only inside backward().
    Tensor flow;
    bool flow_set = false;
    void flow_add(const Tensor& t);
};

NodePtr constant(Tensor value);
NodePtr parameter(Tensor value);

// -- graph operations ------------------------------------------------------

NodePtr matmul(const NodePtr& a, const NodePtr& b);
NodePtr add(const NodePtr& a, const NodePtr& b);           // same shape
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);           // elementwise
NodePtr add_bias(const NodePtr& a, const NodePtr& bias);   // (m x n) + (1 x n) row vector
NodePtr scalar_mul(const NodePtr& a, double c);
NodePtr add_scalar(const NodePtr& a, double c);
NodePtr tanh(const NodePtr& a);
NodePtr exp(const NodePtr& a);
NodePtr log(const NodePtr& a);                             // domain error on x <= 0
NodePtr softmax_rows(const NodePtr& a);                    // max-subtracted, rows sum to 1
NodePtr log_softmax_rows(const NodePtr& a);
NodePtr concat_cols(const std::vector<NodePtr>& nodes);
NodePtr slice_cols(const NodePtr& a, int begin, int end);  // half-open column range
NodePtr take_per_row(const NodePtr& a, const std::vector<int>& col_per_row);  // m x 1
// out[i][j] = sum_k weights[i][k] * parts[k][i][j]; the weighted-average step
// of attention pooling, kept as one op so its adjoint stays auditable.
NodePtr weighted_sum(const NodePtr& weights, const std::vector<NodePtr>& parts);
NodePtr sum_all(const NodePtr& a);                         // 1x1
NodePtr mean_all(const NodePtr& a);                        // 1x1

// Propagates d(root)/d(node) into every reachable requires-grad node's grad.
// root must be 1x1.
void backward(const NodePtr& root);

// -- gradient checking -----------------------------------------------------

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    int worst_index = -1;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;
    double tol = 0.0;
    bool pass = false;
};

// Compares analytic gradients of build() (a deterministic scalar-graph
// builder over the given parameter leaves) against central finite
// differences with the given step. Relative error is measured against
// max(1, |analytic|, |numeric|): the unit floor keeps finite-difference
// roundoff on near-zero coordinates from dominating the report.
GradCheckReport grad_check(const std::function<NodePtr()>& build,
                           const std::vector<std::pair<std::string, NodePtr>>& params,
                           double step, double tol);

}  // namespace fusionkit::ad
