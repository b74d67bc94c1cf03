// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0
//
// evograd command line: search | train | eval | report | baselines.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "evograd/search.hpp"

namespace {

std::atomic<bool> g_stop{false};

void handle_sigint(int) { g_stop.store(true); }

// Flag overrides are collected as (config key, value) pairs in parse order
// and applied on top of the config file.
struct JobOverrides {
    std::vector<std::pair<std::string, std::string>> entries;

    void add(CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& desc) {
        cmd->add_option_function<std::string>(
            flag, [this, key](const std::string& v) { entries.emplace_back(key, v); }, desc);
    }
};

void register_task_flags(CLI::App* cmd, JobOverrides& ov) {
    ov.add(cmd, "--task", "task.kind", "task kind: blobs|two_moons|spirals|idx");
    ov.add(cmd, "--noise", "task.noise", "task noise level");
    ov.add(cmd, "--train-n", "task.train", "training sample count");
    ov.add(cmd, "--val-n", "task.val", "validation sample count");
    ov.add(cmd, "--test-n", "task.test", "test sample count");
    ov.add(cmd, "--task-seed", "task.seed", "dataset seed");
    ov.add(cmd, "--images", "task.images", "IDX images path (task idx)");
    ov.add(cmd, "--labels", "task.labels", "IDX labels path (task idx)");
}

void register_train_flags(CLI::App* cmd, JobOverrides& ov) {
    ov.add(cmd, "--hidden", "model.hidden", "hidden widths, comma separated");
    ov.add(cmd, "--activation", "model.activation", "relu|tanh");
    ov.add(cmd, "--epochs", "train.epochs", "training epochs");
    ov.add(cmd, "--batch", "train.batch", "minibatch size");
    ov.add(cmd, "--lr", "train.lr", "peak learning rate");
    ov.add(cmd, "--schedule", "train.schedule", "constant|cosine_warmup");
    ov.add(cmd, "--optimizer", "train.optimizer", "sgd|sgd_momentum");
    ov.add(cmd, "--early-stop", "train.early_stop", "true|false");
}

void register_search_flags(CLI::App* cmd, JobOverrides& ov) {
    ov.add(cmd, "--p", "evo.p", "elite selection probability");
    ov.add(cmd, "--elite", "evo.elite", "elite pool size");
    ov.add(cmd, "--retry", "evo.retry", "mutation retry budget");
    ov.add(cmd, "--init", "init.mode", "seeded|random");
    ov.add(cmd, "--init-count", "init.count", "random init population size");
    ov.add(cmd, "--vocab-operands", "vocab.operands", "operand vocabulary (all or names)");
    ov.add(cmd, "--vocab-exclude-operands", "vocab.exclude_operands", "operands to drop");
    ov.add(cmd, "--vocab-unaries", "vocab.unaries", "unary vocabulary");
    ov.add(cmd, "--vocab-exclude-unaries", "vocab.exclude_unaries", "unaries to drop");
    ov.add(cmd, "--vocab-binaries", "vocab.binaries", "binary vocabulary");
    ov.add(cmd, "--vocab-exclude-binaries", "vocab.exclude_binaries", "binaries to drop");
    ov.add(cmd, "--vocab-variants", "vocab.variants", "stat variants: raw,rmean,rstd,rnorm");
    ov.add(cmd, "--min-steps", "vocab.min_steps", "minimum equation steps");
    ov.add(cmd, "--max-steps", "vocab.max_steps", "maximum equation steps");
    ov.add(cmd, "--budget", "search.budget", "mutated evaluations to run");
    ov.add(cmd, "--workers", "search.workers", "evaluation worker threads");
    ov.add(cmd, "--seed", "search.seed", "root seed");
    ov.add(cmd, "--out", "search.out", "run log path (JSON lines)");
}

evograd::SearchJob build_job(const std::string& config_path, const JobOverrides& ov) {
    evograd::SearchJob job;
    if (!config_path.empty()) job = evograd::load_job_config(config_path);
    for (const auto& [key, value] : ov.entries) evograd::set_job_key(job, key, value);
    evograd::apply_env_overrides(job);
    return job;
}

void print_fitness(const evograd::FitnessRecord& fit) {
    std::printf("val_acc:   %.4f\n", fit.val_acc);
    if (fit.test_acc) std::printf("test_acc:  %.4f\n", *fit.test_acc);
    std::printf("epochs:    %d\n", fit.epochs_completed);
    std::printf("failed:    %s\n", fit.failed ? "true" : "false");
    if (!fit.reason.empty()) std::printf("reason:    %s\n", fit.reason.c_str());
    std::printf("seconds:   %.3f\n", fit.wall_seconds);
    std::printf("seed:      %llu\n", static_cast<unsigned long long>(fit.seed));
}

int cmd_eval(const std::string& text) {
    evograd::Equation e = evograd::parse_equation(text);
    std::printf("canonical: %s\n", evograd::serialize_equation(e).c_str());
    evograd::Feasibility feas = evograd::check_feasible(e);
    if (!feas.ok) {
        std::printf("infeasible at step %d: %s\n", feas.step + 1, feas.message.c_str());
        return 2;
    }
    std::printf("feasible, shape %s\n", evograd::shape_name(feas.shape).c_str());
    return 0;
}

int cmd_train(const std::string& text, const std::string& config_path, const JobOverrides& ov) {
    evograd::SearchJob job = build_job(config_path, ov);
    evograd::Equation e = evograd::parse_equation(text);
    evograd::Feasibility feas = evograd::check_feasible(e);
    if (!feas.ok) {
        std::fprintf(stderr, "equation infeasible at step %d: %s\n", feas.step + 1, feas.message.c_str());
        return 2;
    }
    evograd::Dataset data = evograd::generate(job.task);
    evograd::TrainConfig cfg = job.train;
    cfg.seed = job.root_seed;
    cfg.eval_test = true;
    std::printf("equation:  %s\n", evograd::serialize_equation(e).c_str());
    std::printf("task:      %s (chance %.3f)\n", evograd::task_kind_name(job.task.kind).c_str(), data.chance);
    print_fitness(evograd::train_and_evaluate(e, data, cfg));
    return 0;
}

int cmd_search(const std::string& config_path, const JobOverrides& ov) {
    evograd::SearchJob job = build_job(config_path, ov);
    std::signal(SIGINT, handle_sigint);
    std::printf("search: budget %lld, %d worker(s), log %s\n", static_cast<long long>(job.budget), job.workers,
                job.out_path.c_str());
    evograd::SearchResult result = evograd::run_search(job, &g_stop);
    std::printf("%s after %lld records\n", result.interrupted ? "interrupted" : "finished",
                static_cast<long long>(result.records_written));
    const auto top = result.population.top_k(5);
    for (std::size_t i = 0; i < top.size(); ++i) {
        std::printf("#%zu  %.4f  %s\n", i + 1, top[i]->fitness->val_acc,
                    evograd::serialize_equation(top[i]->equation).c_str());
    }
    return 0;
}

int cmd_report(const std::string& log_path, const std::string& config_path, const JobOverrides& ov,
               const std::string& csv_path) {
    evograd::SearchJob job = build_job(config_path, ov);
    evograd::ResumeState state = evograd::resume(log_path, job);
    std::printf("resumed %lld records (%lld skipped), %zu unique equations\n",
                static_cast<long long>(state.records_loaded), static_cast<long long>(state.lines_skipped),
                state.population.size());
    const auto entries = evograd::rerun_top(state.population, job, job.report_k, job.report_repeats);
    if (csv_path.empty() || csv_path == "-") {
        evograd::write_report_csv(std::cout, entries);
    } else {
        std::ofstream out(csv_path);
        if (!out) throw std::runtime_error("cannot open report file '" + csv_path + "'");
        evograd::write_report_csv(out, entries);
        std::printf("report written to %s (%zu entries)\n", csv_path.c_str(), entries.size());
    }
    return 0;
}

int cmd_baselines(const std::string& config_path, const JobOverrides& ov) {
    evograd::SearchJob job = build_job(config_path, ov);
    evograd::Dataset data = evograd::generate(job.task);
    evograd::TrainConfig cfg = job.train;
    cfg.seed = job.root_seed;
    cfg.eval_test = true;
    std::printf("task %s: %d train / %d val / %d test, chance %.3f\n",
                evograd::task_kind_name(job.task.kind).c_str(), data.train.count(), data.val.count(),
                data.test.count(), data.chance);
    std::printf("%-20s %9s %9s %7s %8s\n", "equation", "val_acc", "test_acc", "epochs", "seconds");
    for (const auto& [name, eq] : evograd::builtin_equations()) {
        evograd::FitnessRecord fit = evograd::train_and_evaluate(eq, data, cfg);
        std::printf("%-20s %9.4f %9.4f %7d %8.2f\n", name.c_str(), fit.val_acc, fit.test_acc.value_or(0.0),
                    fit.epochs_completed, fit.wall_seconds);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evolutionary search over backward-propagation update equations"};
    app.require_subcommand(1);

    std::string equation_text;
    std::string config_path;
    std::string log_path;
    std::string csv_path;
    JobOverrides ov;

    CLI::App* search = app.add_subcommand("search", "run an evolutionary search");
    search->add_option("--config", config_path, "flat key/value config file");
    register_task_flags(search, ov);
    register_train_flags(search, ov);
    register_search_flags(search, ov);

    CLI::App* train = app.add_subcommand("train", "train once with a given equation");
    train->add_option("--equation", equation_text, "equation text")->required();
    train->add_option("--config", config_path, "flat key/value config file");
    register_task_flags(train, ov);
    register_train_flags(train, ov);
    ov.add(train, "--seed", "search.seed", "training seed");

    CLI::App* eval = app.add_subcommand("eval", "parse and shape-check an equation");
    eval->add_option("--equation", equation_text, "equation text")->required();

    CLI::App* report = app.add_subcommand("report", "rerun the top candidates from a run log");
    report->add_option("--log", log_path, "run log path")->required();
    report->add_option("--config", config_path, "config file the search ran with");
    report->add_option("--csv", csv_path, "output CSV path ('-' for stdout)");
    ov.add(report, "--k", "report.k", "number of candidates to rerun");
    ov.add(report, "--repeats", "report.repeats", "reruns per candidate");
    register_task_flags(report, ov);
    register_train_flags(report, ov);
    ov.add(report, "--seed", "search.seed", "root seed");

    CLI::App* baselines = app.add_subcommand("baselines", "train the builtin equations and compare");
    baselines->add_option("--config", config_path, "flat key/value config file");
    register_task_flags(baselines, ov);
    register_train_flags(baselines, ov);
    ov.add(baselines, "--seed", "search.seed", "training seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*search) return cmd_search(config_path, ov);
        if (*train) return cmd_train(equation_text, config_path, ov);
        if (*eval) return cmd_eval(equation_text);
        if (*report) return cmd_report(log_path, config_path, ov, csv_path);
        if (*baselines) return cmd_baselines(config_path, ov);
    } catch (const evograd::ParseError& e) {
        std::fprintf(stderr, "equation syntax error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
