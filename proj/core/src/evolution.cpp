// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0

#include "evograd/evolution.hpp"

#include <algorithm>
#include <stdexcept>

namespace evograd {

Candidate Candidate::from_equation(const Equation& e) {
    Candidate c;
    c.equation = e;
    c.key = canonical_key(e);
    return c;
}

bool Population::OrderEntry::operator<(const OrderEntry& o) const {
    if (acc != o.acc) return acc > o.acc;                     // higher accuracy first
    if (generation != o.generation) return generation < o.generation;  // earlier generation wins ties
    return key < o.key;
}

void Population::order_insert(const Candidate& c) {
    OrderEntry e{c.fitness->val_acc, c.generation, c.key};
    ordered_.insert(std::lower_bound(ordered_.begin(), ordered_.end(), e), std::move(e));
}

void Population::order_erase(const Candidate& c) {
    OrderEntry e{c.fitness->val_acc, c.generation, c.key};
    auto it = std::lower_bound(ordered_.begin(), ordered_.end(), e);
    while (it != ordered_.end() && it->key != c.key) ++it;
    if (it != ordered_.end()) ordered_.erase(it);
}

void Population::insert_unevaluated(Candidate c) {
    if (by_key_.count(c.key) > 0) return;
    std::string key = c.key;
    by_key_.emplace(std::move(key), std::move(c));
}

void Population::record_result(Candidate c) {
    if (!c.fitness) throw std::invalid_argument("record_result: candidate has no fitness");
    auto it = by_key_.find(c.key);
    if (it == by_key_.end()) {
        order_insert(c);
        std::string key = c.key;
        by_key_.emplace(std::move(key), std::move(c));
        return;
    }
    Candidate& stored = it->second;
    stored.encounters += 1;
    if (!stored.fitness) {
        stored.fitness = c.fitness;
        order_insert(stored);
        return;
    }
    if (c.fitness->val_acc > stored.fitness->val_acc) {
        order_erase(stored);
        stored.fitness = c.fitness;
        order_insert(stored);
    }
}

const Candidate* Population::select_parent(Rng& rng, double p, int elite_n) const {
    if (ordered_.empty()) throw std::runtime_error("select_parent: no evaluated candidates");
    const std::size_t elite = std::min<std::size_t>(elite_n, ordered_.size());
    const std::size_t rest = ordered_.size() - elite;
    std::bernoulli_distribution coin(p);
    bool from_elite = coin(rng);
    if (from_elite && elite == 0) from_elite = false;
    if (!from_elite && rest == 0) from_elite = true;
    std::size_t index;
    if (from_elite) {
        std::uniform_int_distribution<std::size_t> d(0, elite - 1);
        index = d(rng);
    } else {
        std::uniform_int_distribution<std::size_t> d(elite, ordered_.size() - 1);
        index = d(rng);
    }
    return &by_key_.at(ordered_[index].key);
}

std::vector<const Candidate*> Population::top_k(int k) const {
    std::vector<const Candidate*> out;
    const std::size_t n = std::min<std::size_t>(std::max(k, 0), ordered_.size());
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(&by_key_.at(ordered_[i].key));
    return out;
}

const Candidate* Population::best() const { return ordered_.empty() ? nullptr : &by_key_.at(ordered_.front().key); }

const Candidate* Population::find(const std::string& key) const {
    auto it = by_key_.find(key);
    return it == by_key_.end() ? nullptr : &it->second;
}

std::vector<const Candidate*> Population::all() const {
    std::vector<const Candidate*> out;
    out.reserve(by_key_.size());
    for (const auto& [key, c] : by_key_) out.push_back(&c);
    return out;
}

std::vector<const Candidate*> Population::evaluated_in_order() const { return top_k(static_cast<int>(ordered_.size())); }

Population init_population(const EvoConfig& config, Rng& rng) {
    Population pop;
    if (config.init_mode == InitMode::Seeded) {
        std::vector<Equation> seeds = config.seed_equations;
        if (seeds.empty()) {
            for (const auto& [name, eq] : builtin_equations()) seeds.push_back(eq);
        }
        for (const Equation& e : seeds) {
            Feasibility feas = check_feasible(e, ShapeEnv());
            if (!feas.ok) {
                throw std::invalid_argument("init_population: seed equation '" + serialize_equation(e) +
                                            "' is infeasible: " + feas.message);
            }
            pop.insert_unevaluated(Candidate::from_equation(e));
        }
        return pop;
    }
    std::uniform_int_distribution<int> step_dist(config.vocab.min_steps, config.vocab.max_steps);
    const int max_attempts = config.random_count * 100;
    int attempts = 0;
    while (static_cast<int>(pop.size()) < config.random_count && attempts < max_attempts) {
        ++attempts;
        Equation e = random_equation(rng, config.vocab, step_dist(rng));
        pop.insert_unevaluated(Candidate::from_equation(e));
    }
    return pop;
}

namespace {

// A mutable slot inside an equation: operand, unary, or binary position.
// The first operand of steps >= 2 is pinned to prev and never listed.
enum class SlotKind { Op1, U1, Op2, U2, F };

struct Slot {
    int step;
    SlotKind kind;
};

std::vector<Slot> mutable_slots(const Equation& e) {
    std::vector<Slot> slots;
    for (int s = 0; s < static_cast<int>(e.steps.size()); ++s) {
        if (s == 0) slots.push_back({s, SlotKind::Op1});
        slots.push_back({s, SlotKind::U1});
        slots.push_back({s, SlotKind::Op2});
        slots.push_back({s, SlotKind::U2});
        slots.push_back({s, SlotKind::F});
    }
    return slots;
}

template <typename T>
std::optional<T> pick_excluding(Rng& rng, const std::vector<T>& pool, const T& current) {
    std::vector<T> options;
    options.reserve(pool.size());
    for (const T& v : pool)
        if (!(v == current)) options.push_back(v);
    if (options.empty()) return std::nullopt;
    std::uniform_int_distribution<std::size_t> d(0, options.size() - 1);
    return options[d(rng)];
}

bool swap_operand(Rng& rng, const VocabSpec& vocab, Operand& op) {
    // The operand category is the (kind, variant) cross product.
    std::vector<Operand> pool;
    pool.reserve(vocab.operands.size() * vocab.variants.size());
    for (OperandKind k : vocab.operands)
        for (StatVariant v : vocab.variants) pool.push_back({k, v});
    auto next = pick_excluding(rng, pool, op);
    if (!next) return false;
    op = *next;
    return true;
}

bool swap_unary(Rng& rng, const VocabSpec& vocab, Unary& u) {
    // A parameterized unary mutates either its tag or its parameter with
    // equal probability; a bare one can only change tag.
    const bool can_change_param = unary_has_param(u.tag) && unary_param_set(u.tag).size() > 1;
    bool change_param = false;
    if (can_change_param) {
        std::bernoulli_distribution coin(0.5);
        change_param = coin(rng);
    }
    if (change_param) {
        auto next = pick_excluding(rng, unary_param_set(u.tag), u.param);
        if (next) {
            u.param = *next;
            return true;
        }
        // fall through to a tag change
    }
    auto next_tag = pick_excluding(rng, vocab.unaries, u.tag);
    if (!next_tag) return false;
    u.tag = *next_tag;
    u.param = 0.0;
    if (unary_has_param(u.tag)) {
        const auto& set = unary_param_set(u.tag);
        std::uniform_int_distribution<std::size_t> d(0, set.size() - 1);
        u.param = set[d(rng)];
    }
    return true;
}

bool swap_binary(Rng& rng, const VocabSpec& vocab, BinaryTag& f) {
    auto next = pick_excluding(rng, vocab.binaries, f);
    if (!next) return false;
    f = *next;
    return true;
}

bool apply_single_swap(Rng& rng, const VocabSpec& vocab, Equation& e) {
    const std::vector<Slot> slots = mutable_slots(e);
    std::uniform_int_distribution<std::size_t> d(0, slots.size() - 1);
    const Slot slot = slots[d(rng)];
    EquationStep& st = e.steps[slot.step];
    switch (slot.kind) {
        case SlotKind::Op1: return swap_operand(rng, vocab, st.op1);
        case SlotKind::U1: return swap_unary(rng, vocab, st.u1);
        case SlotKind::Op2: return swap_operand(rng, vocab, st.op2);
        case SlotKind::U2: return swap_unary(rng, vocab, st.u2);
        case SlotKind::F: return swap_binary(rng, vocab, st.f);
    }
    return false;
}

int draw_k(Rng& rng, const std::vector<double>& k_probs) {
    std::discrete_distribution<int> d(k_probs.begin(), k_probs.end());
    return d(rng) + 1;
}

}  // namespace

MutationResult mutate(const Equation& e, const EvoConfig& config, Rng& rng) {
    for (int attempt = 0; attempt < config.mutation_retry; ++attempt) {
        Equation child = e;
        const int k = draw_k(rng, config.k_probs);
        bool swapped_all = true;
        for (int i = 0; i < k && swapped_all; ++i) swapped_all = apply_single_swap(rng, config.vocab, child);
        if (!swapped_all) continue;
        if (check_feasible(child).ok) return {std::move(child), false};
    }
    std::uniform_int_distribution<int> step_dist(config.vocab.min_steps, config.vocab.max_steps);
    return {random_equation(rng, config.vocab, step_dist(rng)), true};
}

int count_differing_slots(const Equation& a, const Equation& b) {
    if (a.steps.size() != b.steps.size()) {
        return static_cast<int>(std::max(a.steps.size(), b.steps.size())) * 5;
    }
    int diff = 0;
    for (std::size_t s = 0; s < a.steps.size(); ++s) {
        const EquationStep& sa = a.steps[s];
        const EquationStep& sb = b.steps[s];
        diff += sa.op1 == sb.op1 ? 0 : 1;
        diff += sa.u1 == sb.u1 ? 0 : 1;
        diff += sa.op2 == sb.op2 ? 0 : 1;
        diff += sa.u2 == sb.u2 ? 0 : 1;
        diff += sa.f == sb.f ? 0 : 1;
    }
    return diff;
}

}  // namespace evograd
