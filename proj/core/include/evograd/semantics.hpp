// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Concrete evaluation of update equations: matrix values for every operand,
// semantics of every unary/binary function, and the running-statistics state
// behind the .rmean/.rstd/.rnorm variants and the run_norm unary.

#pragma once

#include <array>
#include <optional>

#include "evograd/dsl.hpp"
#include "evograd/matrix.hpp"
#include "evograd/rng.hpp"

namespace evograd {

inline constexpr double kNormEps = 1e-12;      // norm-family denominators
inline constexpr double kDivEps = 1e-8;        // guarded division
inline constexpr double kRunNormEps = 1e-8;    // running standardization
inline constexpr double kEmaDecay = 0.9;

// Exponential moving average of an operand's mean and centered variance.
// The first update adopts the batch statistics directly.
struct RunningStats {
    double mean_ema = 0.0;
    double var_ema = 0.0;
    bool initialized = false;

    void update(const Matrix& x);
    double std_dev() const;
};

// Per-layer statistics store: one slot per leaf operand (variants) plus one
// slot per unary position (run_norm tracks what that position sees).
struct LayerStats {
    std::array<RunningStats, kLeafOperandCount> operand;
    std::array<RunningStats, kMaxSteps * 2> unary_slot;
};

// All operand values visible at one hidden layer during one backward pass.
// Matrices are borrowed from the caller; stats and rng are per-training-run
// state owned elsewhere. A context is used by exactly one evaluation at a
// time.
struct BackwardContext {
    std::array<const Matrix*, kLeafOperandCount> leaves{};
    LayerStats* stats = nullptr;
    Rng* rng = nullptr;

    const Matrix& leaf(OperandKind k) const { return *leaves[static_cast<int>(k)]; }
    void set_leaf(OperandKind k, const Matrix& m) { leaves[static_cast<int>(k)] = &m; }
};

// Unary semantics. `slot` carries the EMA state for run_norm; when null,
// run_norm standardizes with the batch statistics of `x` (the first-update
// behaviour). Stochastic unaries draw from `rng`.
Matrix eval_unary(const Unary& u, const Matrix& x, Rng& rng, RunningStats* slot = nullptr);

// Binary semantics; shapes must be equal, 1x1-broadcastable, or matmul
// compatible. Division is guarded like Recip. KeepLeft returns x unchanged.
Matrix eval_binary(BinaryTag f, const Matrix& x, const Matrix& y);

// Folds the equation left to right threading the previous result. Updates
// the running stats of every referenced operand once, before variant reads.
// Returns nullopt when the result is non-finite (candidate failure).
std::optional<Matrix> eval_equation(const Equation& e, BackwardContext& ctx);

// Matching norm magnitude used by the normalizing unaries: |x|_p over the
// flattened matrix (p in {0,1,2,+-inf}) or the matrix norm for MNorm.
double vector_norm(const double* data, std::size_t n, std::size_t stride, double order);
double matrix_norm(const Matrix& x, double order);

}  // namespace evograd
