#include "fusionkit/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "fusionkit/errors.hpp"

namespace fusionkit::ad {

namespace {

NodePtr make_node(Tensor value, const char* op, std::vector<NodePtr> parents,
                  std::function<void(Node&)> backprop) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->grad = Tensor(node->value.rows, node->value.cols, 0.0);
    node->op = op;
    node->parents = std::move(parents);
    node->requires_grad = false;
    for (const auto& p : node->parents) {
        if (p->requires_grad) {
            node->requires_grad = true;
            break;
        }
    }
    if (node->requires_grad) {
        node->backprop = std::move(backprop);
    }
    return node;
}

[[noreturn]] void dim_error(const char* op, const Tensor& a, const Tensor& b) {
    raise(ErrorKind::Dimension,
          std::string(op) + ": shape mismatch (" + a.shape_str() + " vs " + b.shape_str() + ")");
}

}  // namespace

void Node::flow_add(const Tensor& t) {
    if (!flow_set) {
        flow = t;
        flow_set = true;
    } else {
        flow.add_in_place(t);
    }
}

NodePtr constant(Tensor value) {
    auto node = std::make_shared<Node>();
    node->grad = Tensor(value.rows, value.cols, 0.0);
    node->value = std::move(value);
    node->requires_grad = false;
    return node;
}

NodePtr parameter(Tensor value) {
    auto node = constant(std::move(value));
    node->requires_grad = true;
    return node;
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
    if (a->cols() != b->rows()) {
        dim_error("matmul", a->value, b->value);
    }
    const int m = a->rows(), k = a->cols(), n = b->cols();
    Tensor out(m, n);
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double av = a->value.at(i, p);
            if (av == 0.0) continue;
            for (int j = 0; j < n; ++j) {
                out.at(i, j) += av * b->value.at(p, j);
            }
        }
    }
    return make_node(std::move(out), "matmul", {a, b}, [m, k, n](Node& self) {
        Node& a = *self.parents[0];
        Node& b = *self.parents[1];
        if (a.requires_grad) {
            Tensor ga(m, k);  // g . b^T
            for (int i = 0; i < m; ++i) {
                for (int p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (int j = 0; j < n; ++j) {
                        s += self.flow.at(i, j) * b.value.at(p, j);
                    }
                    ga.at(i, p) = s;
                }
            }
            a.flow_add(ga);
        }
        if (b.requires_grad) {
            Tensor gb(k, n);  // a^T . g
            for (int p = 0; p < k; ++p) {
                for (int j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (int i = 0; i < m; ++i) {
                        s += a.value.at(i, p) * self.flow.at(i, j);
                    }
                    gb.at(p, j) = s;
                }
            }
            b.flow_add(gb);
        }
    });
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
    if (!a->value.same_shape(b->value)) {
        dim_error("add", a->value, b->value);
    }
    Tensor out = a->value;
    out.add_in_place(b->value);
    return make_node(std::move(out), "add", {a, b}, [](Node& self) {
        if (self.parents[0]->requires_grad) self.parents[0]->flow_add(self.flow);
        if (self.parents[1]->requires_grad) self.parents[1]->flow_add(self.flow);
    });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
    if (!a->value.same_shape(b->value)) {
        dim_error("sub", a->value, b->value);
    }
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] -= b->value.data[i];
    }
    return make_node(std::move(out), "sub", {a, b}, [](Node& self) {
        if (self.parents[0]->requires_grad) self.parents[0]->flow_add(self.flow);
        if (self.parents[1]->requires_grad) {
            Tensor g = self.flow;
            g.scale_in_place(-1.0);
            self.parents[1]->flow_add(g);
        }
    });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
    if (!a->value.same_shape(b->value)) {
        dim_error("mul", a->value, b->value);
    }
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] *= b->value.data[i];
    }
    return make_node(std::move(out), "mul", {a, b}, [](Node& self) {
        Node& a = *self.parents[0];
        Node& b = *self.parents[1];
        if (a.requires_grad) {
            Tensor g = self.flow;
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                g.data[i] *= b.value.data[i];
            }
            a.flow_add(g);
        }
        if (b.requires_grad) {
            Tensor g = self.flow;
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                g.data[i] *= a.value.data[i];
            }
            b.flow_add(g);
        }
    });
}

NodePtr add_bias(const NodePtr& a, const NodePtr& bias) {
    if (bias->rows() != 1 || bias->cols() != a->cols()) {
        dim_error("add_bias", a->value, bias->value);
    }
    Tensor out = a->value;
    for (int i = 0; i < out.rows; ++i) {
        for (int j = 0; j < out.cols; ++j) {
            out.at(i, j) += bias->value.at(0, j);
        }
    }
    return make_node(std::move(out), "add_bias", {a, bias}, [](Node& self) {
        Node& a = *self.parents[0];
        Node& bias = *self.parents[1];
        if (a.requires_grad) {
            a.flow_add(self.flow);
        }
        if (bias.requires_grad) {
            Tensor g(1, self.flow.cols);
            for (int i = 0; i < self.flow.rows; ++i) {
                for (int j = 0; j < self.flow.cols; ++j) {
                    g.at(0, j) += self.flow.at(i, j);
                }
            }
            bias.flow_add(g);
        }
    });
}

NodePtr scalar_mul(const NodePtr& a, double c) {
    Tensor out = a->value;
    out.scale_in_place(c);
    return make_node(std::move(out), "scalar_mul", {a}, [c](Node& self) {
        if (!self.parents[0]->requires_grad) return;
        Tensor g = self.flow;
        g.scale_in_place(c);
        self.parents[0]->flow_add(g);
    });
}

NodePtr add_scalar(const NodePtr& a, double c) {
    Tensor out = a->value;
    for (double& v : out.data) {
        v += c;
    }
    return make_node(std::move(out), "add_scalar", {a}, [](Node& self) {
        if (self.parents[0]->requires_grad) self.parents[0]->flow_add(self.flow);
    });
}

NodePtr tanh(const NodePtr& a) {
    Tensor out = a->value;
    for (double& v : out.data) {
        v = std::tanh(v);
    }
    return make_node(std::move(out), "tanh", {a}, [](Node& self) {
        if (!self.parents[0]->requires_grad) return;
        Tensor g = self.flow;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            const double y = self.value.data[i];
            g.data[i] *= 1.0 - y * y;
        }
        self.parents[0]->flow_add(g);
    });
}

NodePtr exp(const NodePtr& a) {
    Tensor out = a->value;
    for (double& v : out.data) {
        v = std::exp(v);
    }
    return make_node(std::move(out), "exp", {a}, [](Node& self) {
        if (!self.parents[0]->requires_grad) return;
        Tensor g = self.flow;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            g.data[i] *= self.value.data[i];
        }
        self.parents[0]->flow_add(g);
    });
}

NodePtr log(const NodePtr& a) {
    Tensor out = a->value;
    for (double& v : out.data) {
        if (!(v > 0.0)) {
            raise(ErrorKind::Domain, "log: non-positive input " + std::to_string(v));
        }
        v = std::log(v);
    }
    return make_node(std::move(out), "log", {a}, [](Node& self) {
        if (!self.parents[0]->requires_grad) return;
        Tensor g = self.flow;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            g.data[i] /= self.parents[0]->value.data[i];
        }
        self.parents[0]->flow_add(g);
    });
}

NodePtr softmax_rows(const NodePtr& a) {
    Tensor out = a->value;
    for (int i = 0; i < out.rows; ++i) {
        double mx = out.at(i, 0);
        for (int j = 1; j < out.cols; ++j) {
            mx = std::max(mx, out.at(i, j));
        }
        double denom = 0.0;
        for (int j = 0; j < out.cols; ++j) {
            out.at(i, j) = std::exp(out.at(i, j) - mx);
            denom += out.at(i, j);
        }
        for (int j = 0; j < out.cols; ++j) {
            out.at(i, j) /= denom;
        }
    }
    return make_node(std::move(out), "softmax_rows", {a}, [](Node& self) {
        if (!self.parents[0]->requires_grad) return;
        // gx_j = y_j * (g_j - sum_k g_k y_k) per row
        Tensor g(self.flow.rows, self.flow.cols);
        for (int i = 0; i < g.rows; ++i) {
            double dot = 0.0;
            for (int j = 0; j < g.cols; ++j) {
                dot += self.flow.at(i, j) * self.value.at(i, j);
            }
            for (int j = 0; j < g.cols; ++j) {
                g.at(i, j) = self.value.at(i, j) * (self.flow.at(i, j) - dot);
            }
        }
        self.parents[0]->flow_add(g);
    });
}

NodePtr log_softmax_rows(const NodePtr& a) {
    Tensor out = a->value;
    for (int i = 0; i < out.rows; ++i) {
        double mx = out.at(i, 0);
        for (int j = 1; j < out.cols; ++j) {
            mx = std::max(mx, out.at(i, j));
        }
        double denom = 0.0;
        for (int j = 0; j < out.cols; ++j) {
            denom += std::exp(out.at(i, j) - mx);
        }
        const double lse = mx + std::log(denom);
        for (int j = 0; j < out.cols; ++j) {
            out.at(i, j) -= lse;
        }
    }
    return make_node(std::move(out), "log_softmax_rows", {a}, [](Node& self) {
        if (!self.parents[0]->requires_grad) return;
        // gx_j = g_j - exp(y_j) * sum_k g_k per row
        Tensor g(self.flow.rows, self.flow.cols);
        for (int i = 0; i < g.rows; ++i) {
            double total = 0.0;
            for (int j = 0; j < g.cols; ++j) {
                total += self.flow.at(i, j);
            }
            for (int j = 0; j < g.cols; ++j) {
                g.at(i, j) = self.flow.at(i, j) - std::exp(self.value.at(i, j)) * total;
            }
        }
        self.parents[0]->flow_add(g);
    });
}

NodePtr concat_cols(const std::vector<NodePtr>& nodes) {
    if (nodes.empty()) {
        raise(ErrorKind::Contract, "concat_cols: empty node list");
    }
    const int m = nodes[0]->rows();
    int total = 0;
    for (const auto& n : nodes) {
        if (n->rows() != m) {
            dim_error("concat_cols", nodes[0]->value, n->value);
        }
        total += n->cols();
    }
    Tensor out(m, total);
    int offset = 0;
    for (const auto& n : nodes) {
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n->cols(); ++j) {
                out.at(i, offset + j) = n->value.at(i, j);
            }
        }
        offset += n->cols();
    }
    return make_node(std::move(out), "concat_cols", nodes, [](Node& self) {
        int offset = 0;
        for (auto& p : self.parents) {
            if (p->requires_grad) {
                Tensor g(p->rows(), p->cols());
                for (int i = 0; i < g.rows; ++i) {
                    for (int j = 0; j < g.cols; ++j) {
                        g.at(i, j) = self.flow.at(i, offset + j);
                    }
                }
                p->flow_add(g);
            }
            offset += p->cols();
        }
    });
}

NodePtr slice_cols(const NodePtr& a, int begin, int end) {
    if (begin < 0 || end > a->cols() || begin >= end) {
        raise(ErrorKind::Contract, "slice_cols: bad range [" + std::to_string(begin) + "," +
                                       std::to_string(end) + ") for " + a->value.shape_str());
    }
    Tensor out(a->rows(), end - begin);
    for (int i = 0; i < out.rows; ++i) {
        for (int j = 0; j < out.cols; ++j) {
            out.at(i, j) = a->value.at(i, begin + j);
        }
    }
    return make_node(std::move(out), "slice_cols", {a}, [begin](Node& self) {
        Node& a = *self.parents[0];
        if (!a.requires_grad) return;
        Tensor g(a.rows(), a.cols());
        for (int i = 0; i < self.flow.rows; ++i) {
            for (int j = 0; j < self.flow.cols; ++j) {
                g.at(i, begin + j) = self.flow.at(i, j);
            }
        }
        a.flow_add(g);
    });
}

NodePtr take_per_row(const NodePtr& a, const std::vector<int>& col_per_row) {
    if (static_cast<int>(col_per_row.size()) != a->rows()) {
        raise(ErrorKind::Contract, "take_per_row: need one column index per row");
    }
    Tensor out(a->rows(), 1);
    for (int i = 0; i < a->rows(); ++i) {
        const int c = col_per_row[static_cast<std::size_t>(i)];
        if (c < 0 || c >= a->cols()) {
            raise(ErrorKind::Contract,
                  "take_per_row: column " + std::to_string(c) + " out of range for " +
                      a->value.shape_str());
        }
        out.at(i, 0) = a->value.at(i, c);
    }
    return make_node(std::move(out), "take_per_row", {a}, [cols = col_per_row](Node& self) {
        Node& a = *self.parents[0];
        if (!a.requires_grad) return;
        Tensor g(a.rows(), a.cols());
        for (int i = 0; i < a.rows(); ++i) {
            g.at(i, cols[static_cast<std::size_t>(i)]) = self.flow.at(i, 0);
        }
        a.flow_add(g);
    });
}

NodePtr weighted_sum(const NodePtr& weights, const std::vector<NodePtr>& parts) {
    if (parts.empty()) {
        raise(ErrorKind::Contract, "weighted_sum: empty part list");
    }
    const int m = weights->rows();
    const int n = weights->cols();
    if (n != static_cast<int>(parts.size())) {
        raise(ErrorKind::Contract, "weighted_sum: " + std::to_string(parts.size()) +
                                       " parts but weights are " + weights->value.shape_str());
    }
    const int d = parts[0]->cols();
    for (const auto& p : parts) {
        if (p->rows() != m || p->cols() != d) {
            dim_error("weighted_sum", parts[0]->value, p->value);
        }
    }
    Tensor out(m, d);
    for (int k = 0; k < n; ++k) {
        for (int i = 0; i < m; ++i) {
            const double w = weights->value.at(i, k);
            for (int j = 0; j < d; ++j) {
                out.at(i, j) += w * parts[static_cast<std::size_t>(k)]->value.at(i, j);
            }
        }
    }
    std::vector<NodePtr> all = {weights};
    all.insert(all.end(), parts.begin(), parts.end());
    return make_node(std::move(out), "weighted_sum", std::move(all), [m, n, d](Node& self) {
        Node& w = *self.parents[0];
        if (w.requires_grad) {
            Tensor gw(m, n);
            for (int k = 0; k < n; ++k) {
                const Node& part = *self.parents[static_cast<std::size_t>(k) + 1];
                for (int i = 0; i < m; ++i) {
                    double s = 0.0;
                    for (int j = 0; j < d; ++j) {
                        s += self.flow.at(i, j) * part.value.at(i, j);
                    }
                    gw.at(i, k) = s;
                }
            }
            w.flow_add(gw);
        }
        for (int k = 0; k < n; ++k) {
            Node& part = *self.parents[static_cast<std::size_t>(k) + 1];
            if (!part.requires_grad) continue;
            Tensor gp(m, d);
            for (int i = 0; i < m; ++i) {
                const double wv = w.value.at(i, k);
                for (int j = 0; j < d; ++j) {
                    gp.at(i, j) = wv * self.flow.at(i, j);
                }
            }
            part.flow_add(gp);
        }
    });
}

NodePtr sum_all(const NodePtr& a) {
    double s = 0.0;
    for (double v : a->value.data) {
        s += v;
    }
    return make_node(Tensor::scalar(s), "sum_all", {a}, [](Node& self) {
        Node& a = *self.parents[0];
        if (!a.requires_grad) return;
        Tensor g(a.rows(), a.cols(), self.flow.data[0]);
        a.flow_add(g);
    });
}

NodePtr mean_all(const NodePtr& a) {
    if (a->value.size() == 0) {
        raise(ErrorKind::Contract, "mean_all: empty tensor");
    }
    double s = 0.0;
    for (double v : a->value.data) {
        s += v;
    }
    const double inv = 1.0 / a->value.size();
    return make_node(Tensor::scalar(s * inv), "mean_all", {a}, [inv](Node& self) {
        Node& a = *self.parents[0];
        if (!a.requires_grad) return;
        Tensor g(a.rows(), a.cols(), self.flow.data[0] * inv);
        a.flow_add(g);
    });
}

void backward(const NodePtr& root) {
    if (root->rows() != 1 || root->cols() != 1) {
        raise(ErrorKind::Contract,
              "backward: root must be 1x1, got " + root->value.shape_str());
    }
    if (!root->requires_grad) {
        return;  // all-constant graph, nothing to propagate
    }

    // Iterative post-order DFS; the reverse is a valid topological order.
    // Subtrees that do not require grad are never entered.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* node;
        std::size_t next;
    };
    std::vector<Frame> stack;
    stack.push_back({root.get(), 0});
    visited.insert(root.get());
    while (!stack.empty()) {
        Frame& top = stack.back();
        if (top.next < top.node->parents.size()) {
            Node* p = top.node->parents[top.next++].get();
            if (p->requires_grad && visited.insert(p).second) {
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(top.node);
            stack.pop_back();
        }
    }

    root->flow_add(Tensor::scalar(1.0));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->flow_set && node->backprop) {
            node->backprop(*node);
        }
    }
    for (Node* node : order) {
        if (node->flow_set) {
            node->grad.add_in_place(node->flow);
            node->flow = Tensor();
            node->flow_set = false;
        }
    }
}

GradCheckReport grad_check(const std::function<NodePtr()>& build,
                           const std::vector<std::pair<std::string, NodePtr>>& params,
                           double step, double tol) {
    if (!(step > 0.0)) {
        raise(ErrorKind::Contract, "grad_check: step must be positive");
    }

    for (const auto& [name, p] : params) {
        (void)name;
        p->zero_grad();
    }
    NodePtr root = build();
    if (!root->value.all_finite()) {
        raise(ErrorKind::Numeric, "grad_check: non-finite loss at base point");
    }
    backward(root);

    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (const auto& [name, p] : params) {
        (void)name;
        analytic.push_back(p->grad);
    }

    auto probe = [&](const std::string& name, int index) {
        const double v = build()->value.item();
        if (!std::isfinite(v)) {
            raise(ErrorKind::Numeric, "grad_check: non-finite loss probing " + name +
                                          "[" + std::to_string(index) + "]");
        }
        return v;
    };

    GradCheckReport report;
    report.tol = tol;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const auto& [name, p] = params[pi];
        GradCheckEntry entry;
        entry.name = name;
        for (int i = 0; i < p->value.size(); ++i) {
            const double saved = p->value.data[static_cast<std::size_t>(i)];
            p->value.data[static_cast<std::size_t>(i)] = saved + step;
            const double f_plus = probe(name, i);
            p->value.data[static_cast<std::size_t>(i)] = saved - step;
            const double f_minus = probe(name, i);
            p->value.data[static_cast<std::size_t>(i)] = saved;

            const double numeric = (f_plus - f_minus) / (2.0 * step);
            const double a = analytic[pi].data[static_cast<std::size_t>(i)];
            const double rel =
                std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            if (rel > entry.max_rel_err) {
                entry.max_rel_err = rel;
                entry.worst_index = i;
            }
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
    }
    report.pass = report.max_rel_err <= tol;
    return report;
}

}  // namespace fusionkit::ad
