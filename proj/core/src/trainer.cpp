// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0

#include "evograd/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace evograd {

namespace {

Matrix gaussian_matrix(int rows, int cols, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m.at(r, c) = dist(rng);
    return m;
}

Matrix bernoulli_matrix(int rows, int cols, Rng& rng) {
    std::bernoulli_distribution coin(0.5);
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m.at(r, c) = coin(rng) ? 1.0 : 0.0;
    return m;
}

double act_apply(Activation a, double v) { return a == Activation::Relu ? (v > 0.0 ? v : 0.0) : std::tanh(v); }

// Derivative w.r.t. the pre-activation; ReLU' at 0 is 0.
double act_derivative(Activation a, double pre) {
    if (a == Activation::Relu) return pre > 0.0 ? 1.0 : 0.0;
    const double t = std::tanh(pre);
    return 1.0 - t * t;
}

Matrix activation_derivative(Activation a, const Matrix& pre) {
    Matrix out = pre;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = act_derivative(a, out.data()[i]);
    return out;
}

Matrix sign_matrix(const Matrix& x) {
    Matrix out = x;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = out.data()[i];
        out.data()[i] = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    }
    return out;
}

// Signal of the mean cross-entropy loss before batch normalization:
// probs - onehot(y). Weight deltas divide by B afterwards.
Matrix output_error(const Matrix& probs, const std::vector<int>& y) {
    Matrix err = probs;
    for (int r = 0; r < err.rows(); ++r) err.at(r, y[r]) -= 1.0;
    return err;
}

Matrix batch_normalized_delta(const Matrix& inputs, const Matrix& signal) {
    Matrix d = matmul(transpose(inputs), signal);
    const double inv = 1.0 / static_cast<double>(inputs.rows());
    for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] *= inv;
    return d;
}

}  // namespace

int MlpModel::parameter_count() const {
    int n = 0;
    for (const auto& w : weights) n += static_cast<int>(w.size());
    return n;
}

MlpModel MlpModel::init(const std::vector<int>& widths, Activation act, std::uint64_t seed) {
    if (widths.size() < 2) throw std::invalid_argument("MlpModel: need at least input and output widths");
    MlpModel m;
    m.widths = widths;
    m.activation = act;
    const int layers = static_cast<int>(widths.size()) - 1;
    const int n_out = widths.back();
    Rng weight_rng(derive_seed(seed, 1));
    Rng feedback_rng(derive_seed(seed, 2));
    for (int j = 0; j < layers; ++j) {
        const int fan_in = widths[j];
        const double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in));
        m.weights.push_back(gaussian_matrix(widths[j], widths[j + 1], stddev, weight_rng));
        m.feedback_r.push_back(gaussian_matrix(widths[j], widths[j + 1], stddev, feedback_rng));
        m.feedback_s.push_back(bernoulli_matrix(widths[j], widths[j + 1], feedback_rng));
        m.feedback_rl.push_back(
            gaussian_matrix(n_out, widths[j + 1], 1.0 / std::sqrt(static_cast<double>(n_out)), feedback_rng));
    }
    return m;
}

LayerCache forward(const MlpModel& model, const Matrix& x, const std::vector<int>& y) {
    if (x.cols() != model.widths.front()) throw std::invalid_argument("forward: input width mismatch");
    if (static_cast<std::size_t>(x.rows()) != y.size()) throw std::invalid_argument("forward: label count mismatch");
    LayerCache cache;
    cache.input = x;
    cache.labels = y;
    const int layers = model.layer_count();
    const Matrix* h = &cache.input;
    for (int j = 0; j < layers; ++j) {
        cache.pre.push_back(matmul(*h, model.weights[j]));
        if (j < layers - 1) {
            Matrix a = cache.pre.back();
            for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = act_apply(model.activation, a.data()[i]);
            cache.act.push_back(std::move(a));
            h = &cache.act.back();
        } else {
            cache.act.push_back(Matrix());  // output layer is linear
        }
    }
    // Numerically stable softmax + mean cross-entropy.
    const Matrix& logits = cache.pre.back();
    cache.probs = logits;
    double loss = 0.0;
    for (int r = 0; r < logits.rows(); ++r) {
        double mx = logits.at(r, 0);
        for (int c = 1; c < logits.cols(); ++c) mx = std::max(mx, logits.at(r, c));
        double z = 0.0;
        for (int c = 0; c < logits.cols(); ++c) z += std::exp(logits.at(r, c) - mx);
        for (int c = 0; c < logits.cols(); ++c) cache.probs.at(r, c) = std::exp(logits.at(r, c) - mx) / z;
        loss -= std::log(std::max(cache.probs.at(r, y[r]), 1e-300));
    }
    cache.loss = loss / logits.rows();
    return cache;
}

std::optional<std::vector<Matrix>> backward_with_equation(const MlpModel& model, const LayerCache& cache,
                                                          const Equation& e, EquationRuntime& rt) {
    const int layers = model.layer_count();
    std::vector<Matrix> deltas(layers);

    // Output layer: analytic signal; the search rewrites hidden layers only.
    const Matrix b_output = output_error(cache.probs, cache.labels);
    const Matrix& h_into_output = layers == 1 ? cache.input : cache.act[layers - 2];
    deltas[layers - 1] = batch_normalized_delta(h_into_output, b_output);

    if (static_cast<int>(rt.layer_stats.size()) < layers - 1) rt.layer_stats.resize(layers - 1);

    Matrix b_next = b_output;  // b^p_{j+1}, equation-produced below the output
    for (int j = layers - 2; j >= 0; --j) {
        const Matrix& pre = cache.pre[j];
        const Matrix sigma_prime = activation_derivative(model.activation, pre);
        const Matrix sgn_w = sign_matrix(model.weights[j]);
        const Matrix grad_h = matmul(b_next, transpose(model.weights[j + 1]));
        const Matrix grad_hpre = hadamard(grad_h, sigma_prime);
        const Matrix fa = matmul(b_next, transpose(model.feedback_r[j + 1]));
        const Matrix fa_act = hadamard(fa, sigma_prime);
        const Matrix dfa = matmul(b_output, model.feedback_rl[j]);
        const Matrix dfa_act = hadamard(dfa, sigma_prime);
        const Matrix& h_prev = j == 0 ? cache.input : cache.act[j - 1];

        BackwardContext ctx;
        ctx.set_leaf(OperandKind::W, model.weights[j]);
        ctx.set_leaf(OperandKind::SgnW, sgn_w);
        ctx.set_leaf(OperandKind::R, model.feedback_r[j]);
        ctx.set_leaf(OperandKind::S, model.feedback_s[j]);
        ctx.set_leaf(OperandKind::RL, model.feedback_rl[j]);
        ctx.set_leaf(OperandKind::HPre, cache.pre[j]);
        ctx.set_leaf(OperandKind::H, cache.act[j]);
        ctx.set_leaf(OperandKind::HPreNext, cache.pre[j + 1]);
        ctx.set_leaf(OperandKind::BL, b_output);
        ctx.set_leaf(OperandKind::BNext, b_next);
        ctx.set_leaf(OperandKind::GradH, grad_h);
        ctx.set_leaf(OperandKind::GradHPre, grad_hpre);
        ctx.set_leaf(OperandKind::Fa, fa);
        ctx.set_leaf(OperandKind::FaAct, fa_act);
        ctx.set_leaf(OperandKind::Dfa, dfa);
        ctx.set_leaf(OperandKind::DfaAct, dfa_act);
        ctx.stats = &rt.layer_stats[j];
        ctx.rng = &rt.rng;

        std::optional<Matrix> b_cur = eval_equation(e, ctx);
        if (!b_cur) return std::nullopt;
        deltas[j] = batch_normalized_delta(h_prev, *b_cur);
        b_next = std::move(*b_cur);
    }
    return deltas;
}

std::vector<Matrix> backward_reference(const MlpModel& model, const LayerCache& cache) {
    const int layers = model.layer_count();
    std::vector<Matrix> deltas(layers);
    Matrix signal = output_error(cache.probs, cache.labels);
    for (int j = layers - 1; j >= 0; --j) {
        const Matrix& h_prev = j == 0 ? cache.input : cache.act[j - 1];
        deltas[j] = batch_normalized_delta(h_prev, signal);
        if (j > 0) {
            signal = hadamard(matmul(signal, transpose(model.weights[j])),
                              activation_derivative(model.activation, cache.pre[j - 1]));
        }
    }
    return deltas;
}

std::vector<Matrix> finite_difference_grad(const MlpModel& model, const Matrix& x, const std::vector<int>& y,
                                           double eps) {
    MlpModel probe = model;
    std::vector<Matrix> grads;
    for (int j = 0; j < probe.layer_count(); ++j) {
        Matrix g(probe.weights[j].rows(), probe.weights[j].cols());
        for (int r = 0; r < g.rows(); ++r) {
            for (int c = 0; c < g.cols(); ++c) {
                const double saved = probe.weights[j].at(r, c);
                probe.weights[j].at(r, c) = saved + eps;
                const double plus = forward(probe, x, y).loss;
                probe.weights[j].at(r, c) = saved - eps;
                const double minus = forward(probe, x, y).loss;
                probe.weights[j].at(r, c) = saved;
                g.at(r, c) = (plus - minus) / (2.0 * eps);
            }
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

OptimizerState OptimizerState::for_model(const MlpModel& model, Optimizer kind, double momentum) {
    OptimizerState st;
    st.kind = kind;
    st.momentum = momentum;
    for (const auto& w : model.weights) st.velocity.push_back(Matrix(w.rows(), w.cols()));
    return st;
}

void optimizer_step(MlpModel& model, OptimizerState& state, const std::vector<Matrix>& deltas, double lr) {
    for (int j = 0; j < model.layer_count(); ++j) {
        if (state.kind == Optimizer::SgdMomentum) {
            Matrix& v = state.velocity[j];
            for (std::size_t i = 0; i < v.size(); ++i) {
                v.data()[i] = state.momentum * v.data()[i] + deltas[j].data()[i];
                model.weights[j].data()[i] -= lr * v.data()[i];
            }
        } else {
            for (std::size_t i = 0; i < model.weights[j].size(); ++i) {
                model.weights[j].data()[i] -= lr * deltas[j].data()[i];
            }
        }
    }
}

double lr_at(Schedule schedule, std::int64_t step, std::int64_t total_steps, double peak) {
    if (schedule == Schedule::Constant) return peak;
    const double warmup = 0.1 * static_cast<double>(total_steps);
    const double s = static_cast<double>(step);
    if (s < warmup) return peak * (s / warmup);
    const double t = (s - warmup) / (static_cast<double>(total_steps) - warmup);
    return peak * 0.5 * (1.0 + std::cos(t * 3.14159265358979323846));
}

double accuracy(const MlpModel& model, const Matrix& x, const std::vector<int>& y) {
    if (y.empty()) return 0.0;
    const Matrix* h = &x;
    Matrix cur;
    for (int j = 0; j < model.layer_count(); ++j) {
        cur = matmul(*h, model.weights[j]);
        if (j < model.layer_count() - 1) {
            for (std::size_t i = 0; i < cur.size(); ++i) cur.data()[i] = act_apply(model.activation, cur.data()[i]);
        }
        h = &cur;
    }
    int hits = 0;
    for (int r = 0; r < cur.rows(); ++r) {
        int best = 0;
        for (int c = 1; c < cur.cols(); ++c)
            if (cur.at(r, c) > cur.at(r, best)) best = c;
        hits += best == y[r] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(y.size());
}

FitnessRecord train_and_evaluate(const Equation& e, const Dataset& task, const TrainConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();
    FitnessRecord rec;
    rec.key = canonical_key(e);
    rec.seed = config.seed;

    std::vector<int> widths;
    widths.push_back(task.num_features);
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
    widths.push_back(task.num_classes);

    MlpModel model = MlpModel::init(widths, config.activation, config.seed);
    EquationRuntime rt(model.layer_count() - 1, derive_seed(config.seed, 4));
    OptimizerState opt = OptimizerState::for_model(model, config.optimizer);
    Rng shuffle_rng(derive_seed(config.seed, 3));

    const int n = task.train.count();
    const int batch = std::min(config.batch, n);
    const std::int64_t steps_per_epoch = (n + batch - 1) / batch;
    const std::int64_t total_steps = steps_per_epoch * config.epochs;
    const int first_check =
        static_cast<int>(std::ceil(config.early_stop_fraction * static_cast<double>(config.epochs)));

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    double best_val = 0.0;
    bool evaluated = false;
    std::int64_t global_step = 0;

    auto finish = [&](double final_val) {
        rec.val_acc = final_val;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!rec.failed && config.eval_test) {
            rec.test_acc = accuracy(model, task.test.x, task.test.y);
        }
        return rec;
    };

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (int start = 0; start < n; start += batch) {
            const int bs = std::min(batch, n - start);
            Matrix bx(bs, task.num_features);
            std::vector<int> by(bs);
            for (int i = 0; i < bs; ++i) {
                for (int c = 0; c < task.num_features; ++c) bx.at(i, c) = task.train.x.at(order[start + i], c);
                by[i] = task.train.y[order[start + i]];
            }
            LayerCache cache = forward(model, bx, by);
            if (!std::isfinite(cache.loss)) {
                rec.failed = true;
                rec.reason = "non-finite loss at epoch " + std::to_string(epoch + 1);
                return finish(evaluated ? best_val : 0.0);
            }
            auto deltas = backward_with_equation(model, cache, e, rt);
            if (!deltas) {
                rec.failed = true;
                rec.reason = "non-finite update at epoch " + std::to_string(epoch + 1);
                return finish(evaluated ? best_val : 0.0);
            }
            optimizer_step(model, opt, *deltas, lr_at(config.schedule, global_step, total_steps, config.lr));
            ++global_step;
        }
        bool weights_finite = true;
        for (const auto& w : model.weights) weights_finite = weights_finite && all_finite(w);
        if (!weights_finite) {
            rec.failed = true;
            rec.reason = "non-finite weights at epoch " + std::to_string(epoch + 1);
            return finish(evaluated ? best_val : 0.0);
        }

        const double val_acc = accuracy(model, task.val.x, task.val.y);
        evaluated = true;
        best_val = std::max(best_val, val_acc);
        rec.epochs_completed = epoch + 1;

        if (config.early_stop && epoch + 1 >= first_check && val_acc < task.chance + config.early_stop_margin) {
            rec.reason = "early_stop";
            return finish(val_acc);
        }
        if (epoch + 1 == config.epochs) return finish(val_acc);
    }
    return finish(evaluated ? best_val : 0.0);
}

std::map<std::string, Equation> builtin_equations() {
    auto keep_left_of = [](OperandKind kind) {
        Equation e;
        EquationStep s;
        s.f = BinaryTag::KeepLeft;
        s.op1 = {kind, StatVariant::Raw};
        s.u1 = {UnaryTag::Ident, 0.0};
        s.op2 = {kind, StatVariant::Raw};
        s.u2 = {UnaryTag::Ident, 0.0};
        e.steps.push_back(s);
        return e;
    };
    return {
        {"backprop", keep_left_of(OperandKind::GradHPre)},
        {"feedback_alignment", keep_left_of(OperandKind::FaAct)},
        {"dfa", keep_left_of(OperandKind::DfaAct)},
    };
}

}  // namespace evograd
