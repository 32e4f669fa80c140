// Dense row-major tensors of doubles, rank 0 (scalar), 1 (vector) or 2 (matrix).
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace midgen {

struct Shape {
    int ndim = 0;
    std::array<int64_t, 2> d{0, 0};

    static Shape scalar() { return Shape{0, {0, 0}}; }
    static Shape vec(int64_t n) { return Shape{1, {n, 0}}; }
    static Shape mat(int64_t rows, int64_t cols) { return Shape{2, {rows, cols}}; }

    int64_t numel() const {
        if (ndim == 0) return 1;
        if (ndim == 1) return d[0];
        return d[0] * d[1];
    }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

struct Tensor {
    Shape shape;
    std::vector<double> data;

    static Tensor scalar(double v) { return Tensor{Shape::scalar(), {v}}; }
    static Tensor zeros(Shape s) { return Tensor{s, std::vector<double>(size_t(s.numel()), 0.0)}; }
    static Tensor vec(std::vector<double> v) {
        Shape s = Shape::vec(int64_t(v.size()));
        return Tensor{s, std::move(v)};
    }
    static Tensor mat(int64_t rows, int64_t cols, std::vector<double> v);

    int64_t numel() const { return shape.numel(); }
    double& operator[](size_t i) { return data[i]; }
    double operator[](size_t i) const { return data[i]; }
    std::span<const double> view() const { return {data.data(), data.size()}; }
};

bool all_finite(std::span<const double> v);

}  // namespace midgen
