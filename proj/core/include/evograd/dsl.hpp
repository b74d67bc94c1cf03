// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Update-equation DSL: an equation is a chain of 1..3 steps, each step
// applying a binary function to two unary-transformed operands. Step s >= 2
// consumes the previous step's result as its first operand, so every step
// contributes to the final value. Equations are immutable values; parsing,
// serialization and shape checking are pure functions.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evograd/rng.hpp"

namespace evograd {

// ---------------------------------------------------------------------------
// Components
// ---------------------------------------------------------------------------

// Values visible to an equation during the backward pass of hidden layer i.
// Shapes (batch B, widths n_{i-1}, n_i, n_{i+1}, n_L):
//   W, SgnW, R, S            n_{i-1} x n_i
//   RL                       n_L x n_i
//   HPre, H, GradH, GradHPre,
//   Fa, FaAct, Dfa, DfaAct   B x n_i
//   HPreNext, BNext          B x n_{i+1}
//   BL                       B x n_L
//   Prev                     result of the previous step (steps 2..S only)
enum class OperandKind : std::uint8_t {
    W,
    SgnW,
    R,
    S,
    RL,
    HPre,
    H,
    HPreNext,
    BL,
    BNext,
    GradH,
    GradHPre,
    Fa,
    FaAct,
    Dfa,
    DfaAct,
    Prev,
};

inline constexpr int kOperandKindCount = 17;
inline constexpr int kLeafOperandCount = 16;  // all kinds except Prev

// Running-statistics view of an operand. RunMean/RunStd read broadcastable
// 1x1 scalars; RunNorm standardizes the operand elementwise. All use an
// exponential moving average with factor 0.9 maintained per (layer, operand).
enum class StatVariant : std::uint8_t { Raw, RunMean, RunStd, RunNorm };

inline constexpr int kStatVariantCount = 4;

struct Operand {
    OperandKind kind = OperandKind::GradHPre;
    StatVariant stat = StatVariant::Raw;

    bool operator==(const Operand&) const = default;
};

enum class UnaryTag : std::uint8_t {
    Ident,
    Transpose,
    Recip,
    Abs,
    Neg,
    Gt0,
    Relu,
    Sign,
    SqrtAbs,
    SignSqrt,
    Square,
    SignSquare,
    Cube,
    Scale,     // a*x,   a in {-2,-1,-0.5,0.5,2}
    Shift,     // x+b,   b in {-10,-1,-0.5,-0.1,-0.01,0.01,0.1,0.5,1,10}
    AddNoise,  // x + N(0,g^2),        g in {0.01,0.1,0.5,1.0}
    MulNoise,  // x .* (1 + N(0,g^2)), g in {0.01,0.1,0.5,1.0}
    Dropout,   // d in {0.01,0.1,0.3}; survivors scaled by 1/(1-d)
    Clip,      // clamp to [-c,c], c in {0.01,0.1,0.5,1.0}
    VNorm,     // x / (|x|_p + eps), p over the flattened matrix
    CNorm,     // per-column vector-norm normalization
    RNorm,     // per-row vector-norm normalization
    MNorm,     // matrix-norm normalization
    RunNorm,   // (x - m)/sqrt(s + 1e-8) with EMA statistics, factor 0.9
};

inline constexpr int kUnaryTagCount = 24;

// Norm orders are carried in Unary::param: 0, 1, 2, +inf, -inf for the
// vector-norm families; for MNorm the value kFrobenius (0) means the
// Frobenius norm and 1/+inf/-inf are the matrix norms.
inline constexpr double kFrobenius = 0.0;

struct Unary {
    UnaryTag tag = UnaryTag::Ident;
    double param = 0.0;

    bool operator==(const Unary&) const = default;
};

enum class BinaryTag : std::uint8_t { Add, Sub, MulElem, DivElem, MatMul, KeepLeft, Min, Max };

inline constexpr int kBinaryTagCount = 8;

struct EquationStep {
    Operand op1;
    Unary u1;
    Operand op2;
    Unary u2;
    BinaryTag f = BinaryTag::KeepLeft;

    bool operator==(const EquationStep&) const = default;
};

struct Equation {
    std::vector<EquationStep> steps;  // length 1..3; steps[s].op1 == Prev for s >= 1

    bool operator==(const Equation&) const = default;
};

inline constexpr int kMaxSteps = 3;

// ---------------------------------------------------------------------------
// Component metadata
// ---------------------------------------------------------------------------

std::string_view operand_name(OperandKind k);
std::string_view stat_suffix(StatVariant v);  // "" for Raw, ".rmean" etc.
std::string_view binary_name(BinaryTag f);
std::string_view unary_tag_name(UnaryTag t);   // tag without parameter, e.g. "clip"
std::string_view stat_variant_name(StatVariant v);  // "raw", "rmean", ...

std::optional<OperandKind> operand_kind_from_name(std::string_view name);
std::optional<UnaryTag> unary_tag_from_name(std::string_view name);
std::optional<BinaryTag> binary_tag_from_name(std::string_view name);
std::optional<StatVariant> stat_variant_from_name(std::string_view name);

bool unary_has_param(UnaryTag t);
// Legal parameter values for a parameterized unary (empty for the rest).
const std::vector<double>& unary_param_set(UnaryTag t);
// Name as written in equation text: "clip[0.1]", "vnorm_2", "ident", ...
std::string unary_name(const Unary& u);

// True if the equation contains Dropout/AddNoise/MulNoise anywhere.
bool is_stochastic(const Equation& e);

// Structural validity: 1..3 steps, Prev exactly in op1 of steps 2..S, no
// stat variant on Prev, every parameter in its legal set. Returns an error
// message, or nullopt when valid.
std::optional<std::string> validate_structure(const Equation& e);

// ---------------------------------------------------------------------------
// Text form
// ---------------------------------------------------------------------------
//
//   equation ::= step (" |> " step)*
//   step     ::= binary "(" unary "(" operand ")" "," unary "(" operand ")" ")"
//   unary    ::= name | name "[" number "]"
//   operand  ::= name | name ".rmean" | name ".rstd" | name ".rnorm"

class ParseError : public std::runtime_error {
  public:
    ParseError(std::size_t position, const std::string& message)
        : std::runtime_error(message + " (at position " + std::to_string(position) + ")"),
          position_(position),
          detail_(message) {}

    std::size_t position() const { return position_; }
    const std::string& detail() const { return detail_; }

  private:
    std::size_t position_;
    std::string detail_;
};

Equation parse_equation(std::string_view text);

// Canonical text: fixed parameter formatting, single-space separators.
// parse_equation(serialize_equation(e)) is structurally equal to e.
std::string serialize_equation(const Equation& e);

// Deduplication key: serialization after ordering the operands of
// commutative binaries (Add, MulElem, Min, Max) in leaf-only steps.
std::string canonical_key(const Equation& e);

// ---------------------------------------------------------------------------
// Symbolic shape checking
// ---------------------------------------------------------------------------

enum class Dim : std::uint8_t { B, NPrev, NCur, NNext, NOut, One };

struct SymShape {
    Dim rows = Dim::B;
    Dim cols = Dim::NCur;

    bool operator==(const SymShape&) const = default;
};

std::string_view dim_name(Dim d);
std::string shape_name(const SymShape& s);

// Symbolic size environment. Dimensions are pairwise distinct unless
// explicitly declared equal (a net whose widths coincide may declare so;
// the default generic environment keeps every symbol distinct).
class ShapeEnv {
  public:
    ShapeEnv();
    void declare_equal(Dim a, Dim b);
    bool same(Dim a, Dim b) const;

  private:
    std::uint8_t parent_[6];
    std::uint8_t find(std::uint8_t i) const;
};

struct Feasibility {
    bool ok = false;
    SymShape shape;        // final result shape when ok
    int step = -1;         // offending step when not ok
    std::string message;   // empty when ok
};

// Symbolic shape inference over the whole equation. Feasible iff every
// binary application type-checks and the final shape is B x n_i.
Feasibility check_feasible(const Equation& e, const ShapeEnv& env = ShapeEnv());

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

// Allowed component subsets for sampling and mutation. Operand slots draw
// uniformly from the (kind, variant) cross product; unary slots draw a tag,
// then a parameter uniformly from its legal set.
struct VocabSpec {
    std::vector<OperandKind> operands;   // Prev excluded implicitly
    std::vector<StatVariant> variants;
    std::vector<UnaryTag> unaries;
    std::vector<BinaryTag> binaries;
    int min_steps = 1;
    int max_steps = kMaxSteps;

    static VocabSpec full();
    bool valid() const;
};

// Uniformly samples every slot, retrying whole equations until one passes
// check_feasible. Deterministic given the generator state. Throws
// std::runtime_error after `retry_budget` infeasible samples.
Equation random_equation(Rng& rng, const VocabSpec& vocab, int steps, int retry_budget = 1000);

}  // namespace evograd
