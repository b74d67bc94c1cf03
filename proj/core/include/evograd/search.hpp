// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Search orchestration: a controller thread owning the population, a pool
// of evaluation worker threads, an append-only JSON Lines run log, resume,
// and the top-k x n-rerun reporting protocol.

#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "evograd/evolution.hpp"
#include "evograd/taskbench.hpp"
#include "evograd/trainer.hpp"

namespace evograd {

struct SearchJob {
    DatasetSpec task;
    TrainConfig train;
    EvoConfig evo;
    std::int64_t budget = 500;  // mutated evaluations; initial population is extra
    int workers = 1;
    std::string out_path = "evograd_run.jsonl";
    std::uint64_t root_seed = 42;
    int report_k = 100;
    int report_repeats = 5;
};

// One line per completed evaluation, append-only.
struct RunLogRecord {
    std::int64_t iter = 0;
    std::string eq;
    std::string key;
    std::optional<std::string> parent;
    double val_acc = 0.0;
    std::optional<double> test_acc;
    int epochs = 0;
    bool failed = false;
    std::string reason;
    std::uint64_t seed = 0;
    std::int64_t ts = 0;  // epoch milliseconds
};

// FNV-1a over the hash-relevant job configuration (task, model, training,
// evolution, vocabulary, root seed). Budget, worker count and paths do not
// affect compatibility.
std::string job_hash(const SearchJob& job);

struct SearchResult {
    Population population;
    std::int64_t records_written = 0;
    std::int64_t next_iter = 0;
    bool interrupted = false;
};

// Evaluates the initial population, then runs the mutate/evaluate loop until
// `budget` mutated candidates are recorded (or `stop` is raised; in-flight
// evaluations are drained). Every completed evaluation is appended to the
// log before the controller acts on it.
SearchResult run_search(const SearchJob& job, const std::atomic<bool>* stop = nullptr);

struct ResumeState {
    Population population;
    std::int64_t next_iter = 0;
    std::int64_t records_loaded = 0;
    std::int64_t lines_skipped = 0;
    std::int64_t init_records = 0;  // records without a parent key
};

// Rebuilds the population from a run log written with a compatible job hash.
// A corrupt line stops parsing at the last valid line; a truncated final
// line is tolerated silently.
ResumeState resume(const std::string& log_path, const SearchJob& job);

// Continues a resumed search, appending to the same log and finishing the
// remaining mutated-evaluation budget.
SearchResult continue_search(const SearchJob& job, ResumeState state, const std::atomic<bool>* stop = nullptr);

struct ReportEntry {
    std::string equation;
    std::vector<double> val_accs;   // one per rerun
    std::vector<double> test_accs;  // reruns that produced a test accuracy
    double val_mean = 0.0;
    double val_std = 0.0;
    double test_mean = 0.0;
    double test_std = 0.0;
    bool failed = false;
};

// Retrains the top-k candidates `repeats` times each with distinct seeds on
// train+validation, evaluating on the held-out test split. Entries are
// sorted by mean validation accuracy.
std::vector<ReportEntry> rerun_top(const Population& pop, const SearchJob& job, int k, int repeats);

// CSV columns: rank,equation,val_mean,val_std,test_mean,test_std,failed.
void write_report_csv(std::ostream& out, const std::vector<ReportEntry>& entries);

// --- configuration files -------------------------------------------------
//
// Flat key/value text, one `key = value` per line, '#' comments. Keys are
// documented in the README; unknown keys are an error.

SearchJob parse_job_config(const std::string& text);
SearchJob load_job_config(const std::string& path);

// Applies one key/value assignment; shared by the config parser and CLI
// flag overrides. Throws std::invalid_argument on unknown keys or values.
void set_job_key(SearchJob& job, const std::string& key, const std::string& value);

// Canonical config dump; parsing it back reproduces the job.
std::string job_config_text(const SearchJob& job);

// Applies the EVOGRAD_WORKERS environment override, when present.
void apply_env_overrides(SearchJob& job);

}  // namespace evograd
