// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Evolutionary controller state: population with elite ordering, parent
// selection, and single-component mutation with feasibility retry.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "evograd/dsl.hpp"
#include "evograd/rng.hpp"
#include "evograd/trainer.hpp"

namespace evograd {

enum class InitMode { Seeded, Random };

struct EvoConfig {
    double p = 0.7;                        // probability of drawing from the elite set
    int elite_n = 1000;                    // elite pool size
    std::vector<double> k_probs = {1.0};   // categorical over mutation counts 1..len
    int mutation_retry = 100;              // whole-mutation restarts before fallback
    VocabSpec vocab = VocabSpec::full();
    InitMode init_mode = InitMode::Seeded;
    int random_count = 32;                 // Random init population size
    std::vector<Equation> seed_equations;  // Seeded init; empty = the three builtins
};

struct Candidate {
    Equation equation;
    std::string key;
    std::optional<FitnessRecord> fitness;
    std::int64_t generation = 0;
    std::optional<std::string> parent_key;
    int encounters = 1;

    static Candidate from_equation(const Equation& e);
};

// Candidates keyed by canonical key; evaluated candidates carry a total
// order (accuracy desc, generation asc, key asc) whose first N form the
// elite set. Owned and mutated by the controller thread only.
class Population {
  public:
    bool contains(const std::string& key) const { return by_key_.count(key) > 0; }
    std::size_t size() const { return by_key_.size(); }
    std::size_t evaluated_count() const { return ordered_.size(); }

    // Inserts a candidate without fitness (initial population member).
    void insert_unevaluated(Candidate c);

    // Inserts or merges an evaluated candidate: a duplicate key keeps the
    // better accuracy and bumps the encounter counter.
    void record_result(Candidate c);

    // With probability p a uniform draw from the elite set, otherwise from
    // the rest; an empty side falls back to the other. Throws on an empty
    // evaluated population.
    const Candidate* select_parent(Rng& rng, double p, int elite_n) const;

    // Best k evaluated candidates in elite order (fewer if the population
    // is smaller).
    std::vector<const Candidate*> top_k(int k) const;

    const Candidate* best() const;
    const Candidate* find(const std::string& key) const;
    std::vector<const Candidate*> all() const;
    std::vector<const Candidate*> evaluated_in_order() const;

  private:
    struct OrderEntry {
        double acc;
        std::int64_t generation;
        std::string key;

        bool operator<(const OrderEntry& o) const;
    };

    std::unordered_map<std::string, Candidate> by_key_;
    std::vector<OrderEntry> ordered_;  // evaluated only, best first

    void order_insert(const Candidate& c);
    void order_erase(const Candidate& c);
};

// Random mode draws `random_count` distinct feasible equations; Seeded mode
// inserts exactly the configured equations (default: the three builtins).
// Throws when a seed equation is infeasible.
Population init_population(const EvoConfig& config, Rng& rng);

struct MutationResult {
    Equation equation;
    bool fallback = false;  // retry budget exhausted; fresh random equation
};

// Draws k from the categorical, applies k uniform single-slot swaps
// (excluding forced prev slots; replacements never equal the current value)
// and restarts from the parent until the child passes check_feasible.
MutationResult mutate(const Equation& e, const EvoConfig& config, Rng& rng);

// Number of (operand/unary/binary) slots at which the equations differ;
// equations with different step counts compare as all-slots-different.
int count_differing_slots(const Equation& a, const Equation& b);

}  // namespace evograd
