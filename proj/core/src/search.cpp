// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0

#include "evograd/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include <json.hpp>

namespace evograd {

namespace {

using nlohmann::json;

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct EvalTask {
    std::int64_t iter = 0;
    Equation eq;
    std::string key;
    std::optional<std::string> parent;
    std::uint64_t seed = 0;
};

struct EvalOutcome {
    EvalTask task;
    FitnessRecord fit;
};

// Controller-to-workers task channel plus the result channel back. Closing
// the task channel releases the workers.
class WorkerPool {
  public:
    WorkerPool(int count, const Dataset& data, const TrainConfig& base) {
        for (int i = 0; i < count; ++i) {
            threads_.emplace_back([this, &data, base] { worker_loop(data, base); });
        }
    }

    ~WorkerPool() {
        close();
        for (auto& t : threads_) t.join();
    }

    void submit(EvalTask task) {
        {
            std::lock_guard lock(mu_);
            tasks_.push_back(std::move(task));
        }
        task_cv_.notify_one();
    }

    EvalOutcome wait_result() {
        std::unique_lock lock(mu_);
        result_cv_.wait(lock, [this] { return !results_.empty(); });
        EvalOutcome out = std::move(results_.front());
        results_.pop_front();
        return out;
    }

    void close() {
        {
            std::lock_guard lock(mu_);
            closed_ = true;
        }
        task_cv_.notify_all();
    }

  private:
    void worker_loop(const Dataset& data, TrainConfig base) {
        for (;;) {
            EvalTask task;
            {
                std::unique_lock lock(mu_);
                task_cv_.wait(lock, [this] { return closed_ || !tasks_.empty(); });
                if (tasks_.empty()) return;  // closed
                task = std::move(tasks_.front());
                tasks_.pop_front();
            }
            EvalOutcome out;
            out.fit.key = task.key;
            out.fit.seed = task.seed;
            try {
                TrainConfig cfg = base;
                cfg.seed = task.seed;
                out.fit = train_and_evaluate(task.eq, data, cfg);
            } catch (const std::exception& ex) {
                out.fit.failed = true;
                out.fit.reason = std::string("worker error: ") + ex.what();
            }
            out.task = std::move(task);
            {
                std::lock_guard lock(mu_);
                results_.push_back(std::move(out));
            }
            result_cv_.notify_one();
        }
    }

    std::mutex mu_;
    std::condition_variable task_cv_;
    std::condition_variable result_cv_;
    std::deque<EvalTask> tasks_;
    std::deque<EvalOutcome> results_;
    bool closed_ = false;
    std::vector<std::thread> threads_;
};

json record_to_json(const RunLogRecord& r) {
    json j;
    j["iter"] = r.iter;
    j["eq"] = r.eq;
    j["key"] = r.key;
    j["parent"] = r.parent ? json(*r.parent) : json(nullptr);
    j["val_acc"] = r.val_acc;
    j["test_acc"] = r.test_acc ? json(*r.test_acc) : json(nullptr);
    j["epochs"] = r.epochs;
    j["failed"] = r.failed;
    j["reason"] = r.reason;
    j["seed"] = r.seed;
    j["ts"] = r.ts;
    return j;
}

RunLogRecord record_from_json(const json& j) {
    RunLogRecord r;
    r.iter = j.at("iter").get<std::int64_t>();
    r.eq = j.at("eq").get<std::string>();
    r.key = j.at("key").get<std::string>();
    if (!j.at("parent").is_null()) r.parent = j.at("parent").get<std::string>();
    r.val_acc = j.at("val_acc").get<double>();
    if (!j.at("test_acc").is_null()) r.test_acc = j.at("test_acc").get<double>();
    r.epochs = j.at("epochs").get<int>();
    r.failed = j.at("failed").get<bool>();
    r.reason = j.at("reason").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.ts = j.at("ts").get<std::int64_t>();
    return r;
}

RunLogRecord make_record(const EvalOutcome& out) {
    RunLogRecord r;
    r.iter = out.task.iter;
    r.eq = serialize_equation(out.task.eq);
    r.key = out.task.key;
    r.parent = out.task.parent;
    r.val_acc = out.fit.val_acc;
    r.test_acc = out.fit.test_acc;
    r.epochs = out.fit.epochs_completed;
    r.failed = out.fit.failed;
    r.reason = out.fit.reason;
    r.seed = out.fit.seed;
    r.ts = now_ms();
    return r;
}

Candidate candidate_from(const EvalOutcome& out) {
    Candidate c;
    c.equation = out.task.eq;
    c.key = out.task.key;
    c.fitness = out.fit;
    c.generation = out.task.iter;
    c.parent_key = out.task.parent;
    return c;
}

Candidate candidate_from(const RunLogRecord& r) {
    Candidate c;
    c.equation = parse_equation(r.eq);
    c.key = r.key;
    FitnessRecord fit;
    fit.key = r.key;
    fit.val_acc = r.val_acc;
    fit.test_acc = r.test_acc;
    fit.epochs_completed = r.epochs;
    fit.failed = r.failed;
    fit.reason = r.reason;
    fit.seed = r.seed;
    c.fitness = fit;
    c.generation = r.iter;
    c.parent_key = r.parent;
    return c;
}

class LogWriter {
  public:
    LogWriter(const std::string& path, bool append) {
        out_.open(path, append ? std::ios::app : std::ios::trunc);
        if (!out_) throw std::runtime_error("cannot open log file '" + path + "' for writing");
        path_ = path;
    }

    void write_header(const std::string& hash) {
        json j;
        j["type"] = "header";
        j["version"] = 1;
        j["job_hash"] = hash;
        j["ts"] = now_ms();
        write_line(j.dump());
    }

    void write_record(const RunLogRecord& r) { write_line(record_to_json(r).dump()); }

  private:
    void write_line(const std::string& line) {
        out_ << line << '\n';
        out_.flush();
        if (!out_) throw std::runtime_error("write failure on log file '" + path_ + "'");
    }

    std::ofstream out_;
    std::string path_;
};

// Per-iteration training seed; stream 100+iter keeps clear of the fixed
// streams used inside train_and_evaluate.
std::uint64_t iteration_seed(std::uint64_t root, std::int64_t iter) {
    return derive_seed(root, 100 + static_cast<std::uint64_t>(iter));
}

struct SearchDriver {
    const SearchJob& job;
    const std::atomic<bool>* stop;
    Dataset data;
    Rng ctrl_rng;
    std::unordered_set<std::string> seen;
    std::int64_t next_iter = 0;

    SearchDriver(const SearchJob& j, const std::atomic<bool>* s)
        : job(j), stop(s), data(generate(j.task)), ctrl_rng(derive_seed(j.root_seed, 0)) {}

    bool stopped() const { return stop != nullptr && stop->load(); }

    EvalTask task_for(const Equation& eq, std::optional<std::string> parent) {
        EvalTask t;
        t.iter = next_iter++;
        t.eq = eq;
        t.key = canonical_key(eq);
        t.parent = std::move(parent);
        t.seed = iteration_seed(job.root_seed, t.iter);
        seen.insert(t.key);
        return t;
    }

    // Select + mutate until an unseen key appears; a saturated space falls
    // back to a random equation so every iteration still yields one record.
    EvalTask next_mutated_task(const Population& pop) {
        for (int tries = 0; tries < 100; ++tries) {
            const Candidate* parent = pop.select_parent(ctrl_rng, job.evo.p, job.evo.elite_n);
            MutationResult m = mutate(parent->equation, job.evo, ctrl_rng);
            const std::string key = canonical_key(m.equation);
            if (seen.count(key) == 0) {
                return task_for(m.equation, parent->key);
            }
        }
        std::uniform_int_distribution<int> step_dist(job.evo.vocab.min_steps, job.evo.vocab.max_steps);
        return task_for(random_equation(ctrl_rng, job.evo.vocab, step_dist(ctrl_rng)), std::nullopt);
    }
};

SearchResult drive_search(SearchDriver& driver, Population pop, std::int64_t mutated_remaining, LogWriter& log) {
    SearchResult result;
    const int workers = std::max(1, driver.job.workers);
    WorkerPool pool(workers, driver.data, driver.job.train);

    // Phase 1: evaluate any unevaluated candidates (initial population),
    // in deterministic key order.
    std::vector<const Candidate*> pending;
    for (const Candidate* c : pop.all()) {
        if (!c->fitness) pending.push_back(c);
    }
    std::sort(pending.begin(), pending.end(), [](const Candidate* a, const Candidate* b) { return a->key < b->key; });
    std::int64_t inflight = 0;
    for (const Candidate* c : pending) {
        pool.submit(driver.task_for(c->equation, std::nullopt));
        ++inflight;
    }
    while (inflight > 0) {
        EvalOutcome out = pool.wait_result();
        --inflight;
        log.write_record(make_record(out));
        ++result.records_written;
        pop.record_result(candidate_from(out));
    }

    // Phase 2: the evolve loop.
    std::int64_t issued = 0;
    if (pop.evaluated_count() > 0) {
        while (issued < mutated_remaining && inflight < workers && !driver.stopped()) {
            pool.submit(driver.next_mutated_task(pop));
            ++issued;
            ++inflight;
        }
        while (inflight > 0) {
            EvalOutcome out = pool.wait_result();
            --inflight;
            log.write_record(make_record(out));
            ++result.records_written;
            pop.record_result(candidate_from(out));
            if (issued < mutated_remaining && !driver.stopped()) {
                pool.submit(driver.next_mutated_task(pop));
                ++issued;
                ++inflight;
            }
        }
    }

    result.interrupted = driver.stopped();
    result.next_iter = driver.next_iter;
    result.population = std::move(pop);
    return result;
}

}  // namespace

std::string job_hash(const SearchJob& job) {
    std::string text = job_config_text(job);
    // Strip runtime-only lines: budget, workers, output path, report knobs.
    std::string relevant;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        const std::string_view line(text.data() + start, end - start);
        if (line.rfind("search.budget", 0) != 0 && line.rfind("search.workers", 0) != 0 &&
            line.rfind("search.out", 0) != 0 && line.rfind("report.", 0) != 0) {
            relevant.append(line);
            relevant.push_back('\n');
        }
        start = end + 1;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(relevant)));
    return std::string(buf);
}

SearchResult run_search(const SearchJob& job, const std::atomic<bool>* stop) {
    if (job.budget < 0) throw std::invalid_argument("run_search: negative budget");
    SearchDriver driver(job, stop);
    LogWriter log(job.out_path, /*append=*/false);
    log.write_header(job_hash(job));
    Population pop = init_population(job.evo, driver.ctrl_rng);
    return drive_search(driver, std::move(pop), job.budget, log);
}

ResumeState resume(const std::string& log_path, const SearchJob& job) {
    std::ifstream in(log_path);
    if (!in) throw std::runtime_error("cannot open log file '" + log_path + "'");
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("log file '" + log_path + "' is empty");

    ResumeState state;
    try {
        json header = json::parse(line);
        if (header.at("type").get<std::string>() != "header") throw std::runtime_error("missing header");
        if (header.at("job_hash").get<std::string>() != job_hash(job)) {
            throw std::runtime_error("job mismatch");
        }
    } catch (const json::exception&) {
        throw std::runtime_error("log file '" + log_path + "' has no valid header line");
    }

    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);

    for (std::size_t i = 0; i < lines.size(); ++i) {
        RunLogRecord rec;
        try {
            rec = record_from_json(json::parse(lines[i]));
            Candidate c = candidate_from(rec);  // re-parses the equation text
            if (canonical_key(c.equation) != rec.key) throw std::runtime_error("key mismatch");
            state.population.record_result(std::move(c));
        } catch (const std::exception&) {
            // Corrupt line: everything from here on is skipped. A torn final
            // line is the expected crash shape and skips silently.
            state.lines_skipped = static_cast<std::int64_t>(lines.size() - i);
            break;
        }
        state.records_loaded += 1;
        if (!rec.parent) state.init_records += 1;
        state.next_iter = std::max(state.next_iter, rec.iter + 1);
    }
    return state;
}

SearchResult continue_search(const SearchJob& job, ResumeState state, const std::atomic<bool>* stop) {
    SearchDriver driver(job, stop);
    driver.next_iter = state.next_iter;
    for (const Candidate* c : state.population.all()) driver.seen.insert(c->key);
    const std::int64_t mutated_done = state.records_loaded - state.init_records;
    const std::int64_t remaining = std::max<std::int64_t>(0, job.budget - mutated_done);
    LogWriter log(job.out_path, /*append=*/true);
    return drive_search(driver, std::move(state.population), remaining, log);
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

}  // namespace

std::vector<ReportEntry> rerun_top(const Population& pop, const SearchJob& job, int k, int repeats) {
    Dataset data = generate(job.task);

    // Reruns train on train+validation and report against the held-out test
    // split; the same seed set is reused across candidates.
    Dataset merged = data;
    {
        const int n = data.train.count() + data.val.count();
        Matrix x(n, data.num_features);
        std::vector<int> y(n);
        for (int r = 0; r < data.train.count(); ++r) {
            for (int c = 0; c < data.num_features; ++c) x.at(r, c) = data.train.x.at(r, c);
            y[r] = data.train.y[r];
        }
        for (int r = 0; r < data.val.count(); ++r) {
            for (int c = 0; c < data.num_features; ++c) x.at(data.train.count() + r, c) = data.val.x.at(r, c);
            y[data.train.count() + r] = data.val.y[r];
        }
        merged.train = Split{std::move(x), std::move(y)};
    }

    TrainConfig cfg = job.train;
    cfg.early_stop = false;
    cfg.eval_test = true;

    std::vector<ReportEntry> entries;
    for (const Candidate* cand : pop.top_k(k)) {
        ReportEntry entry;
        entry.equation = serialize_equation(cand->equation);
        for (int r = 0; r < repeats; ++r) {
            cfg.seed = derive_seed(job.root_seed, 0x10000000000ULL + static_cast<std::uint64_t>(r));
            FitnessRecord fit = train_and_evaluate(cand->equation, merged, cfg);
            entry.val_accs.push_back(fit.val_acc);
            if (fit.test_acc) entry.test_accs.push_back(*fit.test_acc);
            entry.failed = entry.failed || fit.failed;
        }
        std::tie(entry.val_mean, entry.val_std) = mean_std(entry.val_accs);
        std::tie(entry.test_mean, entry.test_std) = mean_std(entry.test_accs);
        entries.push_back(std::move(entry));
    }
    std::stable_sort(entries.begin(), entries.end(), [](const ReportEntry& a, const ReportEntry& b) {
        if (a.val_mean != b.val_mean) return a.val_mean > b.val_mean;
        return a.equation < b.equation;
    });
    return entries;
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

}  // namespace

void write_report_csv(std::ostream& out, const std::vector<ReportEntry>& entries) {
    out << "rank,equation,val_mean,val_std,test_mean,test_std,failed\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const ReportEntry& e = entries[i];
        out << (i + 1) << ",\"" << e.equation << "\"," << fmt_double(e.val_mean) << ',' << fmt_double(e.val_std)
            << ',' << fmt_double(e.test_mean) << ',' << fmt_double(e.test_std) << ','
            << (e.failed ? "true" : "false") << '\n';
    }
}

}  // namespace evograd
