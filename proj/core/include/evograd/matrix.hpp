// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace evograd {

// Dense row-major matrix of doubles. The single value carrier of the whole
// project; all entries are owned, shapes are fixed after construction.
class Matrix {
  public:
    Matrix() = default;
    Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0.0) {}
    Matrix(int rows, int cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix scalar(double v);
    static Matrix constant(int rows, int cols, double v);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    bool is_scalar() const { return rows_ == 1 && cols_ == 1; }

    double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

Matrix transpose(const Matrix& x);
Matrix matmul(const Matrix& a, const Matrix& b);

// Elementwise product, used by activation-derivative masking.
Matrix hadamard(const Matrix& a, const Matrix& b);

bool all_finite(const Matrix& x);
double mean(const Matrix& x);

// Max |a - b| over all entries; matrices must share a shape.
double max_abs_diff(const Matrix& a, const Matrix& b);

bool operator==(const Matrix& a, const Matrix& b);

}  // namespace evograd
