#include "oma/tensor.hpp"

#include <cmath>

#include "oma/errors.hpp"

namespace oma {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeMismatch("tensor buffer length does not match shape");
    }
}

Tensor Tensor::row(std::initializer_list<double> values) {
    return {1, values.size(), std::vector<double>(values)};
}

Tensor Tensor::column(const std::vector<double>& values) {
    return {values.size(), 1, values};
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Tensor t(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != t.cols()) throw ShapeMismatch("ragged row list");
        for (std::size_t j = 0; j < t.cols(); ++j) t(i, j) = rows[i][j];
    }
    return t;
}

void Tensor::fill(double v) {
    for (auto& x : data_) x = v;
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double x : data_) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace oma
