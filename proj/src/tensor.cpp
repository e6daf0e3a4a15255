#include "fusionkit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "fusionkit/errors.hpp"

namespace fusionkit {

Tensor::Tensor(int r, int c, double fill_value) : rows(r), cols(c) {
    if (r < 0 || c < 0) {
        raise(ErrorKind::Contract, "tensor dimensions must be non-negative");
    }
    data.assign(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill_value);
}

Tensor Tensor::scalar(double v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
}

Tensor Tensor::row(const std::vector<double>& values) {
    Tensor t(1, static_cast<int>(values.size()));
    t.data = values;
    return t;
}

std::string Tensor::shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

double Tensor::item() const {
    if (rows != 1 || cols != 1) {
        raise(ErrorKind::Contract, "item() requires a 1x1 tensor, got " + shape_str());
    }
    return data[0];
}

void Tensor::fill(double v) {
    std::fill(data.begin(), data.end(), v);
}

void Tensor::add_in_place(const Tensor& other) {
    if (!same_shape(other)) {
        raise(ErrorKind::Dimension,
              "tensor add shape mismatch (" + shape_str() + " vs " + other.shape_str() + ")");
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] += other.data[i];
    }
}

void Tensor::scale_in_place(double factor) {
    for (double& v : data) {
        v *= factor;
    }
}

bool Tensor::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        raise(ErrorKind::Dimension,
              "max_abs_diff shape mismatch (" + a.shape_str() + " vs " + b.shape_str() + ")");
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    }
    return m;
}

}  // namespace fusionkit
