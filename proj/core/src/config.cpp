// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "evograd/search.hpp"

namespace evograd {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t end = s.find(sep, start);
        if (end == std::string::npos) end = s.size();
        std::string part = trim(s.substr(start, end - start));
        if (!part.empty()) parts.push_back(std::move(part));
        start = end + 1;
    }
    return parts;
}

int to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': expected integer, got '" + v + "'");
    }
}

std::int64_t to_int64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        std::int64_t out = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': expected integer, got '" + v + "'");
    }
}

std::uint64_t to_uint64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        std::uint64_t out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': expected unsigned integer, got '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': expected number, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config key '" + key + "': expected boolean, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const std::string& part : split(v, ',')) out.push_back(to_int(key, part));
    return out;
}

template <typename Enum>
std::vector<Enum> to_enum_list(const std::string& key, const std::string& v,
                               std::optional<Enum> (*from_name)(std::string_view), int enum_count,
                               bool skip_prev_operand) {
    std::vector<Enum> out;
    if (trim(v) == "all") {
        for (int i = 0; i < enum_count; ++i) out.push_back(static_cast<Enum>(i));
        return out;
    }
    for (const std::string& part : split(v, ',')) {
        auto e = from_name(part);
        if (!e) throw std::invalid_argument("config key '" + key + "': unknown name '" + part + "'");
        out.push_back(*e);
    }
    (void)skip_prev_operand;
    return out;
}

template <typename Enum>
void exclude_from(std::vector<Enum>& list, const std::string& key, const std::string& v,
                  std::optional<Enum> (*from_name)(std::string_view)) {
    for (const std::string& part : split(v, ',')) {
        auto e = from_name(part);
        if (!e) throw std::invalid_argument("config key '" + key + "': unknown name '" + part + "'");
        std::erase(list, *e);
    }
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

}  // namespace

void set_job_key(SearchJob& job, const std::string& raw_key, const std::string& raw_value) {
    const std::string key = trim(raw_key);
    const std::string v = trim(raw_value);

    if (key == "task.kind") {
        job.task.kind = task_kind_from_name(v);
    } else if (key == "task.train") {
        job.task.train_count = to_int(key, v);
    } else if (key == "task.val") {
        job.task.val_count = to_int(key, v);
    } else if (key == "task.test") {
        job.task.test_count = to_int(key, v);
    } else if (key == "task.noise") {
        job.task.noise = to_double(key, v);
    } else if (key == "task.seed") {
        job.task.seed = to_uint64(key, v);
    } else if (key == "task.standardize") {
        job.task.standardize = to_bool(key, v);
    } else if (key == "task.images") {
        job.task.images_path = v;
    } else if (key == "task.labels") {
        job.task.labels_path = v;
    } else if (key == "model.hidden") {
        job.train.hidden = to_int_list(key, v);
    } else if (key == "model.activation") {
        if (v == "relu") {
            job.train.activation = Activation::Relu;
        } else if (v == "tanh") {
            job.train.activation = Activation::Tanh;
        } else {
            throw std::invalid_argument("config key 'model.activation': expected relu|tanh, got '" + v + "'");
        }
    } else if (key == "train.epochs") {
        job.train.epochs = to_int(key, v);
    } else if (key == "train.batch") {
        job.train.batch = to_int(key, v);
    } else if (key == "train.lr") {
        job.train.lr = to_double(key, v);
    } else if (key == "train.schedule") {
        if (v == "constant") {
            job.train.schedule = Schedule::Constant;
        } else if (v == "cosine_warmup") {
            job.train.schedule = Schedule::CosineWarmup;
        } else {
            throw std::invalid_argument("config key 'train.schedule': expected constant|cosine_warmup, got '" + v + "'");
        }
    } else if (key == "train.optimizer") {
        if (v == "sgd") {
            job.train.optimizer = Optimizer::Sgd;
        } else if (v == "sgd_momentum") {
            job.train.optimizer = Optimizer::SgdMomentum;
        } else {
            throw std::invalid_argument("config key 'train.optimizer': expected sgd|sgd_momentum, got '" + v + "'");
        }
    } else if (key == "train.early_stop") {
        job.train.early_stop = to_bool(key, v);
    } else if (key == "train.early_stop_fraction") {
        job.train.early_stop_fraction = to_double(key, v);
    } else if (key == "train.early_stop_margin") {
        job.train.early_stop_margin = to_double(key, v);
    } else if (key == "evo.p") {
        job.evo.p = to_double(key, v);
        if (job.evo.p < 0.0 || job.evo.p > 1.0) throw std::invalid_argument("evo.p must be in [0,1]");
    } else if (key == "evo.elite") {
        job.evo.elite_n = to_int(key, v);
        if (job.evo.elite_n < 1) throw std::invalid_argument("evo.elite must be >= 1");
    } else if (key == "evo.k_probs") {
        job.evo.k_probs.clear();
        for (const std::string& part : split(v, ',')) job.evo.k_probs.push_back(to_double(key, part));
        if (job.evo.k_probs.empty()) throw std::invalid_argument("evo.k_probs must be nonempty");
    } else if (key == "evo.retry") {
        job.evo.mutation_retry = to_int(key, v);
    } else if (key == "init.mode") {
        if (v == "seeded") {
            job.evo.init_mode = InitMode::Seeded;
        } else if (v == "random") {
            job.evo.init_mode = InitMode::Random;
        } else {
            throw std::invalid_argument("config key 'init.mode': expected seeded|random, got '" + v + "'");
        }
    } else if (key == "init.count") {
        job.evo.random_count = to_int(key, v);
    } else if (key == "init.equations") {
        job.evo.seed_equations.clear();
        for (const std::string& part : split(v, ';')) job.evo.seed_equations.push_back(parse_equation(part));
    } else if (key == "vocab.operands") {
        job.evo.vocab.operands =
            to_enum_list<OperandKind>(key, v, operand_kind_from_name, kLeafOperandCount, true);
    } else if (key == "vocab.exclude_operands") {
        exclude_from(job.evo.vocab.operands, key, v, operand_kind_from_name);
    } else if (key == "vocab.variants") {
        job.evo.vocab.variants = to_enum_list<StatVariant>(key, v, stat_variant_from_name, kStatVariantCount, false);
    } else if (key == "vocab.unaries") {
        job.evo.vocab.unaries = to_enum_list<UnaryTag>(key, v, unary_tag_from_name, kUnaryTagCount, false);
    } else if (key == "vocab.exclude_unaries") {
        exclude_from(job.evo.vocab.unaries, key, v, unary_tag_from_name);
    } else if (key == "vocab.binaries") {
        job.evo.vocab.binaries = to_enum_list<BinaryTag>(key, v, binary_tag_from_name, kBinaryTagCount, false);
    } else if (key == "vocab.exclude_binaries") {
        exclude_from(job.evo.vocab.binaries, key, v, binary_tag_from_name);
    } else if (key == "vocab.min_steps") {
        job.evo.vocab.min_steps = to_int(key, v);
    } else if (key == "vocab.max_steps") {
        job.evo.vocab.max_steps = to_int(key, v);
    } else if (key == "search.budget") {
        job.budget = to_int64(key, v);
    } else if (key == "search.workers") {
        job.workers = to_int(key, v);
        if (job.workers < 1) throw std::invalid_argument("search.workers must be >= 1");
    } else if (key == "search.seed") {
        job.root_seed = to_uint64(key, v);
    } else if (key == "search.out") {
        job.out_path = v;
    } else if (key == "report.k") {
        job.report_k = to_int(key, v);
    } else if (key == "report.repeats") {
        job.report_repeats = to_int(key, v);
    } else {
        throw std::invalid_argument("unknown config key '" + key + "'");
    }
}

SearchJob parse_job_config(const std::string& text) {
    SearchJob job;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        try {
            set_job_key(job, stripped.substr(0, eq), stripped.substr(eq + 1));
        } catch (const std::invalid_argument& ex) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return job;
}

SearchJob load_job_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_job_config(buf.str());
}

namespace {

template <typename Enum>
std::string join_names(const std::vector<Enum>& list, std::string_view (*name)(Enum)) {
    std::string out;
    for (std::size_t i = 0; i < list.size(); ++i) {
        if (i > 0) out += ',';
        out += std::string(name(list[i]));
    }
    return out;
}

}  // namespace

std::string job_config_text(const SearchJob& job) {
    std::ostringstream out;
    out << "task.kind = " << task_kind_name(job.task.kind) << '\n';
    out << "task.train = " << job.task.train_count << '\n';
    out << "task.val = " << job.task.val_count << '\n';
    out << "task.test = " << job.task.test_count << '\n';
    out << "task.noise = " << fmt(job.task.noise) << '\n';
    out << "task.seed = " << job.task.seed << '\n';
    out << "task.standardize = " << (job.task.standardize ? "true" : "false") << '\n';
    if (!job.task.images_path.empty()) out << "task.images = " << job.task.images_path << '\n';
    if (!job.task.labels_path.empty()) out << "task.labels = " << job.task.labels_path << '\n';
    out << "model.hidden = ";
    for (std::size_t i = 0; i < job.train.hidden.size(); ++i) out << (i > 0 ? "," : "") << job.train.hidden[i];
    out << '\n';
    out << "model.activation = " << (job.train.activation == Activation::Relu ? "relu" : "tanh") << '\n';
    out << "train.epochs = " << job.train.epochs << '\n';
    out << "train.batch = " << job.train.batch << '\n';
    out << "train.lr = " << fmt(job.train.lr) << '\n';
    out << "train.schedule = " << (job.train.schedule == Schedule::Constant ? "constant" : "cosine_warmup") << '\n';
    out << "train.optimizer = " << (job.train.optimizer == Optimizer::Sgd ? "sgd" : "sgd_momentum") << '\n';
    out << "train.early_stop = " << (job.train.early_stop ? "true" : "false") << '\n';
    out << "train.early_stop_fraction = " << fmt(job.train.early_stop_fraction) << '\n';
    out << "train.early_stop_margin = " << fmt(job.train.early_stop_margin) << '\n';
    out << "evo.p = " << fmt(job.evo.p) << '\n';
    out << "evo.elite = " << job.evo.elite_n << '\n';
    out << "evo.k_probs = ";
    for (std::size_t i = 0; i < job.evo.k_probs.size(); ++i) out << (i > 0 ? "," : "") << fmt(job.evo.k_probs[i]);
    out << '\n';
    out << "evo.retry = " << job.evo.mutation_retry << '\n';
    out << "init.mode = " << (job.evo.init_mode == InitMode::Seeded ? "seeded" : "random") << '\n';
    out << "init.count = " << job.evo.random_count << '\n';
    if (!job.evo.seed_equations.empty()) {
        out << "init.equations = ";
        for (std::size_t i = 0; i < job.evo.seed_equations.size(); ++i) {
            out << (i > 0 ? "; " : "") << serialize_equation(job.evo.seed_equations[i]);
        }
        out << '\n';
    }
    out << "vocab.operands = " << join_names<OperandKind>(job.evo.vocab.operands, operand_name) << '\n';
    out << "vocab.variants = " << join_names<StatVariant>(job.evo.vocab.variants, stat_variant_name) << '\n';
    out << "vocab.unaries = " << join_names<UnaryTag>(job.evo.vocab.unaries, unary_tag_name) << '\n';
    out << "vocab.binaries = " << join_names<BinaryTag>(job.evo.vocab.binaries, binary_name) << '\n';
    out << "vocab.min_steps = " << job.evo.vocab.min_steps << '\n';
    out << "vocab.max_steps = " << job.evo.vocab.max_steps << '\n';
    out << "search.budget = " << job.budget << '\n';
    out << "search.workers = " << job.workers << '\n';
    out << "search.seed = " << job.root_seed << '\n';
    out << "search.out = " << job.out_path << '\n';
    out << "report.k = " << job.report_k << '\n';
    out << "report.repeats = " << job.report_repeats << '\n';
    return out.str();
}

void apply_env_overrides(SearchJob& job) {
    if (const char* workers = std::getenv("EVOGRAD_WORKERS")) {
        job.workers = to_int("EVOGRAD_WORKERS", workers);
        if (job.workers < 1) throw std::invalid_argument("EVOGRAD_WORKERS must be >= 1");
    }
}

}  // namespace evograd
