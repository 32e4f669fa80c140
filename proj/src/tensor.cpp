#include "midgen/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace midgen {

std::string Shape::str() const {
    if (ndim == 0) return "[]";
    if (ndim == 1) return "[" + std::to_string(d[0]) + "]";
    return "[" + std::to_string(d[0]) + "," + std::to_string(d[1]) + "]";
}

Tensor Tensor::mat(int64_t rows, int64_t cols, std::vector<double> v) {
    if (int64_t(v.size()) != rows * cols)
        throw std::invalid_argument("Tensor::mat: got " + std::to_string(v.size()) +
                                    " values for shape " + Shape::mat(rows, cols).str());
    return Tensor{Shape::mat(rows, cols), std::move(v)};
}

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace midgen
