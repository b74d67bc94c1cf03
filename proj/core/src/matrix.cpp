// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0

#include "evograd/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace evograd {

Matrix::Matrix(int rows, int cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(rows) * cols) {
        throw std::invalid_argument("Matrix: data length does not match rows*cols");
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    data_.reserve(static_cast<std::size_t>(rows_) * cols_);
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != cols_) {
            throw std::invalid_argument("Matrix: ragged initializer");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::scalar(double v) {
    Matrix m(1, 1);
    m.at(0, 0) = v;
    return m;
}

Matrix Matrix::constant(int rows, int cols, double v) {
    Matrix m(rows, cols);
    for (auto& e : m.data_) e = v;
    return m;
}

Matrix transpose(const Matrix& x) {
    Matrix out(x.cols(), x.rows());
    for (int r = 0; r < x.rows(); ++r)
        for (int c = 0; c < x.cols(); ++c) out.at(c, r) = x.at(r, c);
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner dimensions differ");
    }
    Matrix out(a.rows(), b.cols());
    const int n = a.rows(), k = a.cols(), m = b.cols();
    for (int i = 0; i < n; ++i) {
        double* orow = out.data() + static_cast<std::size_t>(i) * m;
        const double* arow = a.data() + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b.data() + static_cast<std::size_t>(p) * m;
            for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("hadamard: shape mismatch");
    }
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
    return out;
}

bool all_finite(const Matrix& x) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x.data()[i])) return false;
    return true;
}

double mean(const Matrix& x) {
    if (x.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x.data()[i];
    return s / static_cast<double>(x.size());
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("max_abs_diff: shape mismatch");
    }
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a.data()[i] - b.data()[i]));
    return d;
}

bool operator==(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.data()[i] != b.data()[i]) return false;
    return true;
}

}  // namespace evograd
