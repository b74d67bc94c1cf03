// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0

#include "evograd/semantics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace evograd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Guarded reciprocal denominator: pushes |x| away from zero, keeping the
// sign (zero counts as positive).
double guarded(double x) {
    if (x >= 0.0) return x < kDivEps ? kDivEps : x;
    return x > -kDivEps ? -kDivEps : x;
}

Matrix map(const Matrix& x, double (*f)(double)) {
    Matrix out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = f(out.data()[i]);
    return out;
}

}  // namespace

void RunningStats::update(const Matrix& x) {
    const double batch_mean = mean(x);
    if (!initialized) {
        mean_ema = batch_mean;
        double acc = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x.data()[i] - batch_mean;
            acc += d * d;
        }
        var_ema = x.size() > 0 ? acc / static_cast<double>(x.size()) : 0.0;
        initialized = true;
        return;
    }
    mean_ema = kEmaDecay * mean_ema + (1.0 - kEmaDecay) * batch_mean;
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x.data()[i] - mean_ema;
        acc += d * d;
    }
    const double batch_var = x.size() > 0 ? acc / static_cast<double>(x.size()) : 0.0;
    var_ema = kEmaDecay * var_ema + (1.0 - kEmaDecay) * batch_var;
}

double RunningStats::std_dev() const { return std::sqrt(var_ema); }

double vector_norm(const double* data, std::size_t n, std::size_t stride, double order) {
    if (n == 0) return 0.0;
    if (order == 0.0) {
        double count = 0.0;
        for (std::size_t i = 0; i < n; ++i) count += data[i * stride] != 0.0 ? 1.0 : 0.0;
        return count;
    }
    if (order == 1.0) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += std::fabs(data[i * stride]);
        return s;
    }
    if (order == 2.0) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += data[i * stride] * data[i * stride];
        return std::sqrt(s);
    }
    if (order == kInf) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(data[i * stride]));
        return m;
    }
    // order == -inf: smallest magnitude
    double m = std::fabs(data[0]);
    for (std::size_t i = 1; i < n; ++i) m = std::min(m, std::fabs(data[i * stride]));
    return m;
}

double matrix_norm(const Matrix& x, double order) {
    if (order == kFrobenius) {
        return vector_norm(x.data(), x.size(), 1, 2.0);
    }
    if (order == 1.0) {  // max absolute column sum
        double best = 0.0;
        for (int c = 0; c < x.cols(); ++c) {
            double s = 0.0;
            for (int r = 0; r < x.rows(); ++r) s += std::fabs(x.at(r, c));
            best = std::max(best, s);
        }
        return best;
    }
    // +inf: max absolute row sum; -inf: min absolute row sum.
    double best = order == kInf ? 0.0 : kInf;
    for (int r = 0; r < x.rows(); ++r) {
        double s = 0.0;
        for (int c = 0; c < x.cols(); ++c) s += std::fabs(x.at(r, c));
        best = order == kInf ? std::max(best, s) : std::min(best, s);
    }
    return best;
}

namespace {

Matrix scale_by(const Matrix& x, double factor) {
    Matrix out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= factor;
    return out;
}

Matrix normalized_whole(const Matrix& x, double norm) { return scale_by(x, 1.0 / (norm + kNormEps)); }

Matrix column_normalized(const Matrix& x, double order) {
    Matrix out = x;
    for (int c = 0; c < x.cols(); ++c) {
        const double n = vector_norm(x.data() + c, x.rows(), x.cols(), order);
        const double inv = 1.0 / (n + kNormEps);
        for (int r = 0; r < x.rows(); ++r) out.at(r, c) *= inv;
    }
    return out;
}

Matrix row_normalized(const Matrix& x, double order) {
    Matrix out = x;
    for (int r = 0; r < x.rows(); ++r) {
        const double n = vector_norm(x.data() + static_cast<std::size_t>(r) * x.cols(), x.cols(), 1, order);
        const double inv = 1.0 / (n + kNormEps);
        for (int c = 0; c < x.cols(); ++c) out.at(r, c) *= inv;
    }
    return out;
}

Matrix run_normalized(const Matrix& x, const RunningStats& st) {
    const double inv = 1.0 / std::sqrt(st.var_ema + kRunNormEps);
    Matrix out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = (out.data()[i] - st.mean_ema) * inv;
    return out;
}

}  // namespace

Matrix eval_unary(const Unary& u, const Matrix& x, Rng& rng, RunningStats* slot) {
    switch (u.tag) {
        case UnaryTag::Ident:
            return x;
        case UnaryTag::Transpose:
            return transpose(x);
        case UnaryTag::Recip:
            return map(x, [](double v) { return 1.0 / guarded(v); });
        case UnaryTag::Abs:
            return map(x, [](double v) { return std::fabs(v); });
        case UnaryTag::Neg:
            return map(x, [](double v) { return -v; });
        case UnaryTag::Gt0:
            return map(x, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
        case UnaryTag::Relu:
            return map(x, [](double v) { return v > 0.0 ? v : 0.0; });
        case UnaryTag::Sign:
            return map(x, [](double v) { return sgn(v); });
        case UnaryTag::SqrtAbs:
            return map(x, [](double v) { return std::sqrt(std::fabs(v)); });
        case UnaryTag::SignSqrt:
            return map(x, [](double v) { return sgn(v) * std::sqrt(std::fabs(v)); });
        case UnaryTag::Square:
            return map(x, [](double v) { return v * v; });
        case UnaryTag::SignSquare:
            return map(x, [](double v) { return sgn(v) * v * v; });
        case UnaryTag::Cube:
            return map(x, [](double v) { return v * v * v; });
        case UnaryTag::Scale:
            return scale_by(x, u.param);
        case UnaryTag::Shift: {
            Matrix out = x;
            for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += u.param;
            return out;
        }
        case UnaryTag::AddNoise: {
            std::normal_distribution<double> noise(0.0, u.param);
            Matrix out = x;
            for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += noise(rng);
            return out;
        }
        case UnaryTag::MulNoise: {
            std::normal_distribution<double> noise(0.0, u.param);
            Matrix out = x;
            for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= 1.0 + noise(rng);
            return out;
        }
        case UnaryTag::Dropout: {
            std::uniform_real_distribution<double> coin(0.0, 1.0);
            const double keep_scale = 1.0 / (1.0 - u.param);
            Matrix out = x;
            for (std::size_t i = 0; i < out.size(); ++i) {
                out.data()[i] = coin(rng) < u.param ? 0.0 : out.data()[i] * keep_scale;
            }
            return out;
        }
        case UnaryTag::Clip: {
            const double c = u.param;
            Matrix out = x;
            for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::clamp(out.data()[i], -c, c);
            return out;
        }
        case UnaryTag::VNorm:
            return normalized_whole(x, vector_norm(x.data(), x.size(), 1, u.param));
        case UnaryTag::CNorm:
            return column_normalized(x, u.param);
        case UnaryTag::RNorm:
            return row_normalized(x, u.param);
        case UnaryTag::MNorm:
            return normalized_whole(x, matrix_norm(x, u.param));
        case UnaryTag::RunNorm: {
            if (slot != nullptr) {
                slot->update(x);
                return run_normalized(x, *slot);
            }
            RunningStats local;
            local.update(x);
            return run_normalized(x, local);
        }
    }
    throw std::logic_error("eval_unary: unhandled tag");
}

namespace {

Matrix broadcast_pair(BinaryTag f, const Matrix& x, const Matrix& y) {
    double (*op)(double, double) = nullptr;
    switch (f) {
        case BinaryTag::Add: op = [](double a, double b) { return a + b; }; break;
        case BinaryTag::Sub: op = [](double a, double b) { return a - b; }; break;
        case BinaryTag::MulElem: op = [](double a, double b) { return a * b; }; break;
        case BinaryTag::DivElem: op = [](double a, double b) { return a / guarded(b); }; break;
        case BinaryTag::Min: op = [](double a, double b) { return std::min(a, b); }; break;
        case BinaryTag::Max: op = [](double a, double b) { return std::max(a, b); }; break;
        default: throw std::logic_error("broadcast_pair: not elementwise");
    }
    if (x.same_shape(y)) {
        Matrix out = x;
        for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = op(out.data()[i], y.data()[i]);
        return out;
    }
    if (x.is_scalar()) {
        const double v = x.at(0, 0);
        Matrix out = y;
        for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = op(v, out.data()[i]);
        return out;
    }
    if (y.is_scalar()) {
        const double v = y.at(0, 0);
        Matrix out = x;
        for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = op(out.data()[i], v);
        return out;
    }
    throw std::invalid_argument("eval_binary: elementwise shape mismatch");
}

}  // namespace

Matrix eval_binary(BinaryTag f, const Matrix& x, const Matrix& y) {
    switch (f) {
        case BinaryTag::MatMul:
            return matmul(x, y);
        case BinaryTag::KeepLeft:
            return x;
        default:
            return broadcast_pair(f, x, y);
    }
}

namespace {

Matrix operand_value(const Operand& op, const BackwardContext& ctx, const Matrix& prev) {
    if (op.kind == OperandKind::Prev) return prev;
    const Matrix& raw = ctx.leaf(op.kind);
    if (op.stat == StatVariant::Raw) return raw;
    const RunningStats& st = ctx.stats->operand[static_cast<int>(op.kind)];
    switch (op.stat) {
        case StatVariant::RunMean:
            return Matrix::scalar(st.mean_ema);
        case StatVariant::RunStd:
            return Matrix::scalar(st.std_dev());
        case StatVariant::RunNorm:
            return run_normalized(raw, RunningStats{st.mean_ema, st.var_ema, true});
        default:
            return raw;
    }
}

}  // namespace

std::optional<Matrix> eval_equation(const Equation& e, BackwardContext& ctx) {
    // EMA update for every referenced operand, once per pass, in enum order,
    // before any variant is read.
    bool referenced[kLeafOperandCount] = {};
    for (const auto& st : e.steps) {
        for (const Operand* op : {&st.op1, &st.op2}) {
            if (op->kind != OperandKind::Prev) referenced[static_cast<int>(op->kind)] = true;
        }
    }
    for (int k = 0; k < kLeafOperandCount; ++k) {
        if (referenced[k]) ctx.stats->operand[k].update(*ctx.leaves[k]);
    }

    Matrix prev;
    for (std::size_t s = 0; s < e.steps.size(); ++s) {
        const EquationStep& st = e.steps[s];
        Matrix a = eval_unary(st.u1, operand_value(st.op1, ctx, prev), *ctx.rng, &ctx.stats->unary_slot[s * 2]);
        Matrix b = eval_unary(st.u2, operand_value(st.op2, ctx, prev), *ctx.rng, &ctx.stats->unary_slot[s * 2 + 1]);
        prev = eval_binary(st.f, a, b);
    }
    if (!all_finite(prev)) return std::nullopt;
    return prev;
}

}  // namespace evograd
