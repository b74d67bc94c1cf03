// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0

#include <array>

#include "evograd/dsl.hpp"

namespace evograd {

namespace {

constexpr std::array<std::string_view, 6> kDimNames = {"B", "n_prev", "n_i", "n_next", "n_L", "1"};

SymShape leaf_shape(OperandKind k) {
    switch (k) {
        case OperandKind::W:
        case OperandKind::SgnW:
        case OperandKind::R:
        case OperandKind::S:
            return {Dim::NPrev, Dim::NCur};
        case OperandKind::RL:
            return {Dim::NOut, Dim::NCur};
        case OperandKind::HPre:
        case OperandKind::H:
        case OperandKind::GradH:
        case OperandKind::GradHPre:
        case OperandKind::Fa:
        case OperandKind::FaAct:
        case OperandKind::Dfa:
        case OperandKind::DfaAct:
            return {Dim::B, Dim::NCur};
        case OperandKind::HPreNext:
        case OperandKind::BNext:
            return {Dim::B, Dim::NNext};
        case OperandKind::BL:
            return {Dim::B, Dim::NOut};
        case OperandKind::Prev:
            return {Dim::B, Dim::NCur};  // unreachable; Prev resolved by caller
    }
    return {Dim::B, Dim::NCur};
}

}  // namespace

std::string_view dim_name(Dim d) { return kDimNames[static_cast<int>(d)]; }

std::string shape_name(const SymShape& s) {
    return std::string(dim_name(s.rows)) + "x" + std::string(dim_name(s.cols));
}

ShapeEnv::ShapeEnv() {
    for (std::uint8_t i = 0; i < 6; ++i) parent_[i] = i;
}

std::uint8_t ShapeEnv::find(std::uint8_t i) const {
    while (parent_[i] != i) i = parent_[i];
    return i;
}

void ShapeEnv::declare_equal(Dim a, Dim b) {
    std::uint8_t ra = find(static_cast<std::uint8_t>(a));
    std::uint8_t rb = find(static_cast<std::uint8_t>(b));
    if (ra != rb) parent_[rb] = ra;
}

bool ShapeEnv::same(Dim a, Dim b) const {
    return find(static_cast<std::uint8_t>(a)) == find(static_cast<std::uint8_t>(b));
}

namespace {

bool same_shape(const ShapeEnv& env, const SymShape& a, const SymShape& b) {
    return env.same(a.rows, b.rows) && env.same(a.cols, b.cols);
}

bool is_one(const ShapeEnv& env, const SymShape& s) {
    return env.same(s.rows, Dim::One) && env.same(s.cols, Dim::One);
}

SymShape operand_shape(const Operand& op, const SymShape& prev) {
    if (op.kind == OperandKind::Prev) return prev;
    if (op.stat == StatVariant::RunMean || op.stat == StatVariant::RunStd) return {Dim::One, Dim::One};
    return leaf_shape(op.kind);
}

SymShape apply_unary(const Unary& u, const SymShape& s) {
    if (u.tag == UnaryTag::Transpose) return {s.cols, s.rows};
    return s;
}

}  // namespace

Feasibility check_feasible(const Equation& e, const ShapeEnv& env) {
    if (auto err = validate_structure(e)) {
        return {false, {}, 0, *err};
    }
    SymShape prev{};
    for (std::size_t s = 0; s < e.steps.size(); ++s) {
        const EquationStep& st = e.steps[s];
        SymShape a = apply_unary(st.u1, operand_shape(st.op1, prev));
        SymShape b = apply_unary(st.u2, operand_shape(st.op2, prev));
        SymShape out;
        switch (st.f) {
            case BinaryTag::MatMul:
                if (!env.same(a.cols, b.rows)) {
                    return {false, {}, static_cast<int>(s),
                            "matmul inner dimensions differ: " + shape_name(a) + " vs " + shape_name(b)};
                }
                out = {a.rows, b.cols};
                break;
            case BinaryTag::KeepLeft:
                out = a;
                break;
            default:
                if (same_shape(env, a, b)) {
                    out = a;
                } else if (is_one(env, a)) {
                    out = b;
                } else if (is_one(env, b)) {
                    out = a;
                } else {
                    return {false, {}, static_cast<int>(s),
                            "elementwise shape mismatch: " + shape_name(a) + " vs " + shape_name(b)};
                }
                break;
        }
        prev = out;
    }
    const SymShape want{Dim::B, Dim::NCur};
    if (!same_shape(env, prev, want)) {
        return {false, {}, static_cast<int>(e.steps.size()) - 1,
                "final shape " + shape_name(prev) + " is not " + shape_name(want)};
    }
    return {true, prev, -1, ""};
}

}  // namespace evograd
