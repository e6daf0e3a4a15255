#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace fusionkit {

// Dense 2-D real array, row-major, 64-bit throughout. All model quantities
// (matrices, row vectors, scalars-as-1x1) live in this one type.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int r, int c, double fill = 0.0);

    static Tensor scalar(double v);
    static Tensor row(const std::vector<double>& values);

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    int size() const { return rows * cols; }
    bool empty() const { return data.empty(); }
    bool same_shape(const Tensor& other) const { return rows == other.rows && cols == other.cols; }
    std::string shape_str() const;

    double item() const;  // contract: 1x1 only

    void fill(double v);
    void add_in_place(const Tensor& other);       // shapes must match
    void scale_in_place(double factor);
    bool all_finite() const;

    bool operator==(const Tensor& other) const = default;
};

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace fusionkit
