// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0

#include "evograd/dsl.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <tuple>

namespace evograd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr std::array<std::string_view, kOperandKindCount> kOperandNames = {
    "w",    "sgn_w", "r",  "s",      "r_l",  "h_pre", "h",   "h_pre_next", "b_l",
    "b_next", "grad_h", "g", "fa", "fa_act", "dfa", "dfa_act", "prev",
};

constexpr std::array<std::string_view, kBinaryTagCount> kBinaryNames = {
    "add", "sub", "mul_elem", "div_elem", "matmul", "keep_left", "min", "max",
};

const std::vector<double> kEmptySet;
const std::vector<double> kScaleSet = {-2.0, -1.0, -0.5, 0.5, 2.0};
const std::vector<double> kShiftSet = {-10.0, -1.0, -0.5, -0.1, -0.01, 0.01, 0.1, 0.5, 1.0, 10.0};
const std::vector<double> kNoiseSet = {0.01, 0.1, 0.5, 1.0};
const std::vector<double> kDropoutSet = {0.01, 0.1, 0.3};
const std::vector<double> kClipSet = {0.01, 0.1, 0.5, 1.0};
const std::vector<double> kVectorNormSet = {0.0, 1.0, 2.0, -kInf, kInf};
const std::vector<double> kMatrixNormSet = {kFrobenius, 1.0, -kInf, kInf};

// Canonical spellings for bracketed parameters, index-aligned with the sets.
const std::vector<std::string_view> kScaleNames = {"-2", "-1", "-0.5", "0.5", "2"};
const std::vector<std::string_view> kShiftNames = {"-10", "-1", "-0.5", "-0.1", "-0.01", "0.01", "0.1", "0.5", "1", "10"};
const std::vector<std::string_view> kNoiseNames = {"0.01", "0.1", "0.5", "1.0"};
const std::vector<std::string_view> kDropoutNames = {"0.01", "0.1", "0.3"};
const std::vector<std::string_view> kClipNames = {"0.01", "0.1", "0.5", "1.0"};

std::string_view norm_suffix(double order, bool frobenius_family) {
    if (frobenius_family && order == kFrobenius) return "fro";
    if (order == -kInf) return "ninf";
    if (order == kInf) return "inf";
    if (order == 0.0) return "0";
    if (order == 1.0) return "1";
    return "2";
}

}  // namespace

std::string_view operand_name(OperandKind k) { return kOperandNames[static_cast<int>(k)]; }

std::string_view stat_suffix(StatVariant v) {
    switch (v) {
        case StatVariant::Raw: return "";
        case StatVariant::RunMean: return ".rmean";
        case StatVariant::RunStd: return ".rstd";
        case StatVariant::RunNorm: return ".rnorm";
    }
    return "";
}

std::string_view binary_name(BinaryTag f) { return kBinaryNames[static_cast<int>(f)]; }

namespace {

constexpr std::array<std::string_view, kUnaryTagCount> kUnaryTagNames = {
    "ident",  "transpose", "recip",     "abs",       "neg",     "gt0",       "relu",    "sign",
    "sqrt_abs", "sign_sqrt", "square",  "sign_square", "cube",  "scale",     "shift",   "add_noise",
    "mul_noise", "dropout", "clip",     "vnorm",     "cnorm",   "rnorm",     "mnorm",   "run_norm",
};

constexpr std::array<std::string_view, kStatVariantCount> kStatVariantNames = {"raw", "rmean", "rstd", "rnorm"};

}  // namespace

std::string_view unary_tag_name(UnaryTag t) { return kUnaryTagNames[static_cast<int>(t)]; }

std::string_view stat_variant_name(StatVariant v) { return kStatVariantNames[static_cast<int>(v)]; }

std::optional<OperandKind> operand_kind_from_name(std::string_view name) {
    for (int k = 0; k < kOperandKindCount; ++k)
        if (kOperandNames[k] == name) return static_cast<OperandKind>(k);
    return std::nullopt;
}

std::optional<UnaryTag> unary_tag_from_name(std::string_view name) {
    for (int t = 0; t < kUnaryTagCount; ++t)
        if (kUnaryTagNames[t] == name) return static_cast<UnaryTag>(t);
    return std::nullopt;
}

std::optional<BinaryTag> binary_tag_from_name(std::string_view name) {
    for (int f = 0; f < kBinaryTagCount; ++f)
        if (kBinaryNames[f] == name) return static_cast<BinaryTag>(f);
    return std::nullopt;
}

std::optional<StatVariant> stat_variant_from_name(std::string_view name) {
    for (int v = 0; v < kStatVariantCount; ++v)
        if (kStatVariantNames[v] == name) return static_cast<StatVariant>(v);
    return std::nullopt;
}

bool unary_has_param(UnaryTag t) {
    switch (t) {
        case UnaryTag::Scale:
        case UnaryTag::Shift:
        case UnaryTag::AddNoise:
        case UnaryTag::MulNoise:
        case UnaryTag::Dropout:
        case UnaryTag::Clip:
        case UnaryTag::VNorm:
        case UnaryTag::CNorm:
        case UnaryTag::RNorm:
        case UnaryTag::MNorm:
            return true;
        default:
            return false;
    }
}

const std::vector<double>& unary_param_set(UnaryTag t) {
    switch (t) {
        case UnaryTag::Scale: return kScaleSet;
        case UnaryTag::Shift: return kShiftSet;
        case UnaryTag::AddNoise:
        case UnaryTag::MulNoise: return kNoiseSet;
        case UnaryTag::Dropout: return kDropoutSet;
        case UnaryTag::Clip: return kClipSet;
        case UnaryTag::VNorm:
        case UnaryTag::CNorm:
        case UnaryTag::RNorm: return kVectorNormSet;
        case UnaryTag::MNorm: return kMatrixNormSet;
        default: return kEmptySet;
    }
}

namespace {

std::string_view bracket_param_string(UnaryTag t, double v) {
    const std::vector<double>* set = &unary_param_set(t);
    const std::vector<std::string_view>* names = nullptr;
    switch (t) {
        case UnaryTag::Scale: names = &kScaleNames; break;
        case UnaryTag::Shift: names = &kShiftNames; break;
        case UnaryTag::AddNoise:
        case UnaryTag::MulNoise: names = &kNoiseNames; break;
        case UnaryTag::Dropout: names = &kDropoutNames; break;
        case UnaryTag::Clip: names = &kClipNames; break;
        default: return "";
    }
    for (std::size_t i = 0; i < set->size(); ++i)
        if ((*set)[i] == v) return (*names)[i];
    return "";
}

}  // namespace

std::string unary_name(const Unary& u) {
    switch (u.tag) {
        case UnaryTag::Ident: return "ident";
        case UnaryTag::Transpose: return "transpose";
        case UnaryTag::Recip: return "recip";
        case UnaryTag::Abs: return "abs";
        case UnaryTag::Neg: return "neg";
        case UnaryTag::Gt0: return "gt0";
        case UnaryTag::Relu: return "relu";
        case UnaryTag::Sign: return "sign";
        case UnaryTag::SqrtAbs: return "sqrt_abs";
        case UnaryTag::SignSqrt: return "sign_sqrt";
        case UnaryTag::Square: return "square";
        case UnaryTag::SignSquare: return "sign_square";
        case UnaryTag::Cube: return "cube";
        case UnaryTag::Scale: return "scale[" + std::string(bracket_param_string(u.tag, u.param)) + "]";
        case UnaryTag::Shift: return "shift[" + std::string(bracket_param_string(u.tag, u.param)) + "]";
        case UnaryTag::AddNoise: return "add_noise[" + std::string(bracket_param_string(u.tag, u.param)) + "]";
        case UnaryTag::MulNoise: return "mul_noise[" + std::string(bracket_param_string(u.tag, u.param)) + "]";
        case UnaryTag::Dropout: return "dropout[" + std::string(bracket_param_string(u.tag, u.param)) + "]";
        case UnaryTag::Clip: return "clip[" + std::string(bracket_param_string(u.tag, u.param)) + "]";
        case UnaryTag::VNorm: return "vnorm_" + std::string(norm_suffix(u.param, false));
        case UnaryTag::CNorm: return "cnorm_" + std::string(norm_suffix(u.param, false));
        case UnaryTag::RNorm: return "rnorm_" + std::string(norm_suffix(u.param, false));
        case UnaryTag::MNorm: return "mnorm_" + std::string(norm_suffix(u.param, true));
        case UnaryTag::RunNorm: return "run_norm";
    }
    return "";
}

bool is_stochastic(const Equation& e) {
    for (const auto& s : e.steps) {
        for (UnaryTag t : {s.u1.tag, s.u2.tag}) {
            if (t == UnaryTag::AddNoise || t == UnaryTag::MulNoise || t == UnaryTag::Dropout) return true;
        }
    }
    return false;
}

namespace {

bool param_legal(UnaryTag t, double v) {
    if (!unary_has_param(t)) return v == 0.0;
    for (double p : unary_param_set(t))
        if (p == v) return true;
    return false;
}

std::optional<std::string> validate_operand(const Operand& op, int step, bool is_op1) {
    if (op.kind == OperandKind::Prev) {
        if (step == 0) return "prev not allowed in step 1";
        if (!is_op1) return "prev only valid as the first operand";
        if (op.stat != StatVariant::Raw) return "stat variant not allowed on prev";
    }
    return std::nullopt;
}

}  // namespace

std::optional<std::string> validate_structure(const Equation& e) {
    if (e.steps.empty() || e.steps.size() > kMaxSteps) {
        return "equation must have 1 to " + std::to_string(kMaxSteps) + " steps";
    }
    for (std::size_t s = 0; s < e.steps.size(); ++s) {
        const EquationStep& st = e.steps[s];
        if (s > 0 && st.op1.kind != OperandKind::Prev) {
            return "step " + std::to_string(s + 1) + ": first operand must be prev";
        }
        if (auto err = validate_operand(st.op1, static_cast<int>(s), true)) return err;
        if (auto err = validate_operand(st.op2, static_cast<int>(s), false)) return err;
        if (!param_legal(st.u1.tag, st.u1.param) || !param_legal(st.u2.tag, st.u2.param)) {
            return "step " + std::to_string(s + 1) + ": parameter outside legal set";
        }
    }
    return std::nullopt;
}

namespace {

std::string operand_text(const Operand& op) {
    return std::string(operand_name(op.kind)) + std::string(stat_suffix(op.stat));
}

void append_step(std::string& out, const EquationStep& s) {
    out += binary_name(s.f);
    out += '(';
    out += unary_name(s.u1);
    out += '(';
    out += operand_text(s.op1);
    out += "), ";
    out += unary_name(s.u2);
    out += '(';
    out += operand_text(s.op2);
    out += "))";
}

bool commutative(BinaryTag f) {
    return f == BinaryTag::Add || f == BinaryTag::MulElem || f == BinaryTag::Min || f == BinaryTag::Max;
}

// Fixed total order on (operand, unary) sides for commutative normalization.
auto side_order_key(const Operand& op, const Unary& u) {
    return std::make_tuple(static_cast<int>(op.kind), static_cast<int>(op.stat), static_cast<int>(u.tag), u.param);
}

}  // namespace

std::string serialize_equation(const Equation& e) {
    std::string out;
    for (std::size_t s = 0; s < e.steps.size(); ++s) {
        if (s > 0) out += " |> ";
        append_step(out, e.steps[s]);
    }
    return out;
}

std::string canonical_key(const Equation& e) {
    Equation norm = e;
    for (auto& s : norm.steps) {
        if (!commutative(s.f)) continue;
        if (s.op1.kind == OperandKind::Prev) continue;  // chained steps keep their orientation
        if (side_order_key(s.op2, s.u2) < side_order_key(s.op1, s.u1)) {
            std::swap(s.op1, s.op2);
            std::swap(s.u1, s.u2);
        }
    }
    return serialize_equation(norm);
}

}  // namespace evograd
