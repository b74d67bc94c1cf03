// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>
#include <unordered_map>

#include "evograd/dsl.hpp"

namespace evograd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::unordered_map<std::string, Operand>& operand_table() {
    static const std::unordered_map<std::string, Operand> table = [] {
        std::unordered_map<std::string, Operand> t;
        for (int k = 0; k < kOperandKindCount; ++k) {
            auto kind = static_cast<OperandKind>(k);
            t.emplace(std::string(operand_name(kind)), Operand{kind, StatVariant::Raw});
        }
        return t;
    }();
    return table;
}

// Bare unary spellings, with norm orders folded into the name
// (vnorm_2, mnorm_fro, ...). Bracket-parameterized tags are spelled
// name + "[param]" and live in a separate table.
const std::unordered_map<std::string, Unary>& bare_unary_table() {
    static const std::unordered_map<std::string, Unary> table = [] {
        std::unordered_map<std::string, Unary> t;
        t.emplace("ident", Unary{UnaryTag::Ident, 0.0});
        t.emplace("transpose", Unary{UnaryTag::Transpose, 0.0});
        t.emplace("recip", Unary{UnaryTag::Recip, 0.0});
        t.emplace("abs", Unary{UnaryTag::Abs, 0.0});
        t.emplace("neg", Unary{UnaryTag::Neg, 0.0});
        t.emplace("gt0", Unary{UnaryTag::Gt0, 0.0});
        t.emplace("relu", Unary{UnaryTag::Relu, 0.0});
        t.emplace("sign", Unary{UnaryTag::Sign, 0.0});
        t.emplace("sqrt_abs", Unary{UnaryTag::SqrtAbs, 0.0});
        t.emplace("sign_sqrt", Unary{UnaryTag::SignSqrt, 0.0});
        t.emplace("square", Unary{UnaryTag::Square, 0.0});
        t.emplace("sign_square", Unary{UnaryTag::SignSquare, 0.0});
        t.emplace("cube", Unary{UnaryTag::Cube, 0.0});
        t.emplace("run_norm", Unary{UnaryTag::RunNorm, 0.0});
        const std::pair<const char*, double> vorders[] = {
            {"_0", 0.0}, {"_1", 1.0}, {"_2", 2.0}, {"_ninf", -kInf}, {"_inf", kInf}};
        const std::pair<const char*, UnaryTag> vfams[] = {
            {"vnorm", UnaryTag::VNorm}, {"cnorm", UnaryTag::CNorm}, {"rnorm", UnaryTag::RNorm}};
        for (const auto& [prefix, tag] : vfams)
            for (const auto& [suffix, order] : vorders) t.emplace(std::string(prefix) + suffix, Unary{tag, order});
        const std::pair<const char*, double> morders[] = {
            {"_fro", kFrobenius}, {"_1", 1.0}, {"_ninf", -kInf}, {"_inf", kInf}};
        for (const auto& [suffix, order] : morders) t.emplace(std::string("mnorm") + suffix, Unary{UnaryTag::MNorm, order});
        return t;
    }();
    return table;
}

const std::unordered_map<std::string, UnaryTag>& bracket_unary_table() {
    static const std::unordered_map<std::string, UnaryTag> table = {
        {"scale", UnaryTag::Scale},        {"shift", UnaryTag::Shift},     {"add_noise", UnaryTag::AddNoise},
        {"mul_noise", UnaryTag::MulNoise}, {"dropout", UnaryTag::Dropout}, {"clip", UnaryTag::Clip},
    };
    return table;
}

const std::unordered_map<std::string, BinaryTag>& binary_table() {
    static const std::unordered_map<std::string, BinaryTag> table = [] {
        std::unordered_map<std::string, BinaryTag> t;
        for (int f = 0; f < kBinaryTagCount; ++f) {
            auto tag = static_cast<BinaryTag>(f);
            t.emplace(std::string(binary_name(tag)), tag);
        }
        return t;
    }();
    return table;
}

class Parser {
  public:
    explicit Parser(std::string_view text) : text_(text) {}

    Equation parse() {
        Equation e;
        e.steps.push_back(parse_step(0));
        skip_ws();
        while (!at_end()) {
            expect("|>");
            if (e.steps.size() == static_cast<std::size_t>(kMaxSteps)) {
                throw ParseError(pos_, "too many steps (max " + std::to_string(kMaxSteps) + ")");
            }
            e.steps.push_back(parse_step(static_cast<int>(e.steps.size())));
            skip_ws();
        }
        if (auto err = validate_structure(e)) throw ParseError(pos_, *err);
        return e;
    }

  private:
    std::string_view text_;
    std::size_t pos_ = 0;

    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return at_end() ? '\0' : text_[pos_]; }

    void skip_ws() {
        while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    void expect(std::string_view token) {
        skip_ws();
        if (text_.substr(pos_, token.size()) != token) {
            throw ParseError(pos_, "expected '" + std::string(token) + "'");
        }
        pos_ += token.size();
    }

    std::string identifier() {
        skip_ws();
        std::size_t start = pos_;
        while (!at_end()) {
            char c = text_[pos_];
            if (std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '_') {
                ++pos_;
            } else {
                break;
            }
        }
        if (pos_ == start) throw ParseError(start, "expected identifier");
        return std::string(text_.substr(start, pos_ - start));
    }

    double number() {
        skip_ws();
        std::size_t start = pos_;
        std::string buf(text_.substr(pos_, std::min<std::size_t>(64, text_.size() - pos_)));
        char* end = nullptr;
        double v = std::strtod(buf.c_str(), &end);
        if (end == buf.c_str()) throw ParseError(start, "expected number");
        pos_ += static_cast<std::size_t>(end - buf.c_str());
        return v;
    }

    EquationStep parse_step(int step_index) {
        skip_ws();
        std::size_t fpos = pos_;
        std::string fname = identifier();
        auto fit = binary_table().find(fname);
        if (fit == binary_table().end()) throw ParseError(fpos, "unknown binary function '" + fname + "'");
        EquationStep s;
        s.f = fit->second;
        expect("(");
        std::tie(s.u1, s.op1) = parse_unary_expr(step_index, true);
        expect(",");
        std::tie(s.u2, s.op2) = parse_unary_expr(step_index, false);
        expect(")");
        return s;
    }

    std::pair<Unary, Operand> parse_unary_expr(int step_index, bool is_op1) {
        skip_ws();
        std::size_t upos = pos_;
        std::string uname = identifier();
        Unary u;
        if (auto bare = bare_unary_table().find(uname); bare != bare_unary_table().end()) {
            u = bare->second;
        } else if (auto br = bracket_unary_table().find(uname); br != bracket_unary_table().end()) {
            u.tag = br->second;
            expect("[");
            std::size_t ppos = pos_;
            double v = number();
            u.param = match_param(br->second, uname, v, ppos);
            expect("]");
        } else {
            throw ParseError(upos, "unknown unary function '" + uname + "'");
        }
        expect("(");
        Operand op = parse_operand(step_index, is_op1);
        expect(")");
        return {u, op};
    }

    static double match_param(UnaryTag tag, const std::string& name, double v, std::size_t at) {
        for (double legal : unary_param_set(tag)) {
            if (std::fabs(legal - v) < 1e-9) return legal;
        }
        throw ParseError(at, "parameter outside legal set for '" + name + "'");
    }

    Operand parse_operand(int step_index, bool is_op1) {
        skip_ws();
        std::size_t opos = pos_;
        std::string oname = identifier();
        auto it = operand_table().find(oname);
        if (it == operand_table().end()) throw ParseError(opos, "unknown operand '" + oname + "'");
        Operand op = it->second;
        if (peek() == '.') {
            ++pos_;
            std::size_t vpos = pos_;
            std::string vname = identifier();
            if (vname == "rmean") {
                op.stat = StatVariant::RunMean;
            } else if (vname == "rstd") {
                op.stat = StatVariant::RunStd;
            } else if (vname == "rnorm") {
                op.stat = StatVariant::RunNorm;
            } else {
                throw ParseError(vpos, "unknown stat variant '." + vname + "'");
            }
        }
        if (op.kind == OperandKind::Prev) {
            if (step_index == 0) throw ParseError(opos, "prev not allowed in step 1");
            if (!is_op1) throw ParseError(opos, "prev only valid as the first operand");
            if (op.stat != StatVariant::Raw) throw ParseError(opos, "stat variant not allowed on prev");
        } else if (step_index > 0 && is_op1) {
            throw ParseError(opos, "first operand of step " + std::to_string(step_index + 1) + " must be prev");
        }
        return op;
    }
};

}  // namespace

Equation parse_equation(std::string_view text) {
    Parser p(text);
    return p.parse();
}

}  // namespace evograd
