// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0
//
// From-scratch MLP trainer. The forward pass is a plain chain of matrix
// products and nonlinearities; the backward pass for hidden layers is driven
// by a DSL equation instead of the chain rule. The output layer always
// receives the analytic softmax-cross-entropy signal.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evograd/dsl.hpp"
#include "evograd/matrix.hpp"
#include "evograd/semantics.hpp"
#include "evograd/taskbench.hpp"

namespace evograd {

enum class Activation { Relu, Tanh };
enum class Schedule { Constant, CosineWarmup };
enum class Optimizer { Sgd, SgdMomentum };

inline constexpr double kMomentum = 0.9;

// Row-batch convention throughout: activations are B x n_i and the forward
// step is h^p_i = h_{i-1} * W_i with W_i of shape n_{i-1} x n_i.
struct MlpModel {
    std::vector<int> widths;            // n_0 .. n_L
    std::vector<Matrix> weights;        // weights[j]: widths[j] x widths[j+1]
    std::vector<Matrix> feedback_r;     // Gaussian, shaped like weights[j]
    std::vector<Matrix> feedback_s;     // Bernoulli {0,1}, shaped like weights[j]
    std::vector<Matrix> feedback_rl;    // n_L x widths[j+1], direct output-to-layer maps
    Activation activation = Activation::Relu;

    int layer_count() const { return static_cast<int>(weights.size()); }
    int parameter_count() const;

    // Gaussian init with std 1/sqrt(fan-in); feedback matrices are drawn once
    // here and stay fixed for the whole training run.
    static MlpModel init(const std::vector<int>& widths, Activation act, std::uint64_t seed);
};

struct LayerCache {
    Matrix input;              // h_0 = x
    std::vector<int> labels;   // batch labels, used by the backward passes
    std::vector<Matrix> pre;   // h^p_j, B x widths[j+1]
    std::vector<Matrix> act;   // h_j = sigma(h^p_j) for hidden j; act[L-1] unused
    Matrix probs;              // softmax(logits)
    double loss = 0.0;         // mean cross-entropy
};

struct TrainConfig {
    int epochs = 20;
    int batch = 32;
    double lr = 0.1;
    Schedule schedule = Schedule::Constant;
    Optimizer optimizer = Optimizer::Sgd;
    std::uint64_t seed = 1;
    std::vector<int> hidden = {32, 32};
    Activation activation = Activation::Relu;
    bool early_stop = true;
    double early_stop_fraction = 0.25;  // first check after ceil(epochs*fraction)
    double early_stop_margin = 0.05;    // stop when val acc < chance + margin
    bool eval_test = false;             // fill FitnessRecord::test_acc after training
};

struct FitnessRecord {
    std::string key;  // canonical equation key
    double val_acc = 0.0;
    std::optional<double> test_acc;
    int epochs_completed = 0;
    bool failed = false;
    std::string reason;  // "early_stop" or failure description
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
};

// Per-run state threaded through equation-driven backward passes: running
// statistics per layer plus the generator for stochastic unaries.
struct EquationRuntime {
    std::vector<LayerStats> layer_stats;
    Rng rng;

    explicit EquationRuntime(int hidden_layers = 0, std::uint64_t seed = 0)
        : layer_stats(hidden_layers), rng(seed) {}
};

LayerCache forward(const MlpModel& model, const Matrix& x, const std::vector<int>& y);

// Equation-driven weight deltas, already batch-normalized (divided by B).
// Returns nullopt when any equation evaluation goes non-finite.
std::optional<std::vector<Matrix>> backward_with_equation(const MlpModel& model, const LayerCache& cache,
                                                          const Equation& e, EquationRuntime& rt);

// Analytic chain-rule deltas; independent reference route for the same
// mean-cross-entropy loss.
std::vector<Matrix> backward_reference(const MlpModel& model, const LayerCache& cache);

// Central differences (J(w+eps) - J(w-eps)) / (2 eps), one forward pass per
// perturbed weight. Intended for small models only.
std::vector<Matrix> finite_difference_grad(const MlpModel& model, const Matrix& x, const std::vector<int>& y,
                                           double eps = 1e-5);

struct OptimizerState {
    Optimizer kind = Optimizer::Sgd;
    double momentum = kMomentum;
    std::vector<Matrix> velocity;

    static OptimizerState for_model(const MlpModel& model, Optimizer kind, double momentum = kMomentum);
};

void optimizer_step(MlpModel& model, OptimizerState& state, const std::vector<Matrix>& deltas, double lr);

// Warmup ramps linearly to peak over the first 10% of steps, then cosine
// decay to zero over the remainder. Constant schedule returns peak always.
double lr_at(Schedule schedule, std::int64_t step, std::int64_t total_steps, double peak);

double accuracy(const MlpModel& model, const Matrix& x, const std::vector<int>& y);

// Full training loop: shuffled minibatches, equation-driven backward,
// optimizer and schedule, validation each epoch, early stopping against the
// task's chance level. Deterministic given config.seed.
FitnessRecord train_and_evaluate(const Equation& e, const Dataset& task, const TrainConfig& config);

// The three reference update rules expressed in the DSL.
std::map<std::string, Equation> builtin_equations();

}  // namespace evograd
