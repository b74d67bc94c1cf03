// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0

#include <stdexcept>

#include "evograd/dsl.hpp"

namespace evograd {

VocabSpec VocabSpec::full() {
    VocabSpec v;
    for (int k = 0; k < kLeafOperandCount; ++k) v.operands.push_back(static_cast<OperandKind>(k));
    for (int s = 0; s < kStatVariantCount; ++s) v.variants.push_back(static_cast<StatVariant>(s));
    for (int u = 0; u < kUnaryTagCount; ++u) v.unaries.push_back(static_cast<UnaryTag>(u));
    for (int f = 0; f < kBinaryTagCount; ++f) v.binaries.push_back(static_cast<BinaryTag>(f));
    return v;
}

bool VocabSpec::valid() const {
    if (operands.empty() || variants.empty() || unaries.empty() || binaries.empty()) return false;
    if (min_steps < 1 || max_steps > kMaxSteps || min_steps > max_steps) return false;
    for (OperandKind k : operands)
        if (k == OperandKind::Prev) return false;
    return true;
}

namespace {

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& pool) {
    std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
    return pool[d(rng)];
}

Operand sample_operand(Rng& rng, const VocabSpec& vocab) {
    return Operand{pick(rng, vocab.operands), pick(rng, vocab.variants)};
}

Unary sample_unary(Rng& rng, const VocabSpec& vocab) {
    Unary u{pick(rng, vocab.unaries), 0.0};
    if (unary_has_param(u.tag)) u.param = pick(rng, unary_param_set(u.tag));
    return u;
}

}  // namespace

Equation random_equation(Rng& rng, const VocabSpec& vocab, int steps, int retry_budget) {
    if (!vocab.valid()) throw std::invalid_argument("random_equation: empty or invalid vocabulary");
    if (steps < 1 || steps > kMaxSteps) throw std::invalid_argument("random_equation: steps out of range");
    for (int attempt = 0; attempt < retry_budget; ++attempt) {
        Equation e;
        e.steps.resize(steps);
        for (int s = 0; s < steps; ++s) {
            EquationStep& st = e.steps[s];
            st.op1 = s == 0 ? sample_operand(rng, vocab) : Operand{OperandKind::Prev, StatVariant::Raw};
            st.u1 = sample_unary(rng, vocab);
            st.op2 = sample_operand(rng, vocab);
            st.u2 = sample_unary(rng, vocab);
            st.f = pick(rng, vocab.binaries);
        }
        if (check_feasible(e).ok) return e;
    }
    throw std::runtime_error("random_equation: no feasible equation in vocab after " + std::to_string(retry_budget) +
                             " attempts");
}

}  // namespace evograd
