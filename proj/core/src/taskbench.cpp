// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0

#include "evograd/taskbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "evograd/rng.hpp"

namespace evograd {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

// Synthetic tasks are all two-class 2-D point clouds. Spirals use two
// interleaved arms of kSpiralTurns revolutions.
constexpr double kSpiralTurns = 1.5;

Split draw_synthetic(TaskKind kind, int count, double noise, Rng& rng) {
    Split split;
    split.x = Matrix(count, 2);
    split.y.resize(count);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < count; ++i) {
        const int cls = i % 2;  // balanced classes
        double px = 0.0, py = 0.0;
        switch (kind) {
            case TaskKind::Blobs: {
                px = (cls == 0 ? -3.0 : 3.0) + noise * gauss(rng);
                py = noise * gauss(rng);
                break;
            }
            case TaskKind::TwoMoons: {
                const double t = unit(rng) * kPi;
                if (cls == 0) {
                    px = std::cos(t);
                    py = std::sin(t);
                } else {
                    px = 1.0 - std::cos(t);
                    py = 0.5 - std::sin(t);
                }
                px += noise * gauss(rng);
                py += noise * gauss(rng);
                break;
            }
            case TaskKind::Spirals: {
                const double t = unit(rng);
                const double r = 0.1 + 0.9 * t;
                const double theta = kSpiralTurns * 2.0 * kPi * t + kPi * cls;
                px = r * std::cos(theta) + noise * gauss(rng);
                py = r * std::sin(theta) + noise * gauss(rng);
                break;
            }
            case TaskKind::IdxFiles:
                throw std::logic_error("draw_synthetic: not a synthetic kind");
        }
        split.x.at(i, 0) = px;
        split.x.at(i, 1) = py;
        split.y[i] = cls;
    }
    return split;
}

void standardize_with_train_stats(Dataset& d) {
    const int f = d.num_features;
    std::vector<double> mu(f, 0.0), sd(f, 0.0);
    const int n = d.train.count();
    for (int c = 0; c < f; ++c) {
        double s = 0.0;
        for (int r = 0; r < n; ++r) s += d.train.x.at(r, c);
        mu[c] = s / n;
        double v = 0.0;
        for (int r = 0; r < n; ++r) {
            const double dv = d.train.x.at(r, c) - mu[c];
            v += dv * dv;
        }
        sd[c] = std::sqrt(v / n);
        if (sd[c] < 1e-12) sd[c] = 1.0;  // constant feature
    }
    for (Split* split : {&d.train, &d.val, &d.test}) {
        for (int r = 0; r < split->count(); ++r)
            for (int c = 0; c < f; ++c) split->x.at(r, c) = (split->x.at(r, c) - mu[c]) / sd[c];
    }
}

double chance_level(const Split& val, int num_classes) {
    if (val.y.empty()) return 1.0 / std::max(1, num_classes);
    std::vector<int> counts(num_classes, 0);
    for (int y : val.y) counts[y]++;
    return static_cast<double>(*std::max_element(counts.begin(), counts.end())) / static_cast<double>(val.y.size());
}

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error(path + ": truncated file");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

Dataset generate(const DatasetSpec& spec) {
    Dataset d;
    if (spec.kind == TaskKind::IdxFiles) {
        IdxData data = load_idx(spec.images_path, spec.labels_path);
        const int total = spec.train_count + spec.val_count + spec.test_count;
        if (data.images.rows() < total) {
            throw std::runtime_error("generate: IDX file has " + std::to_string(data.images.rows()) +
                                     " samples, need " + std::to_string(total));
        }
        d.num_features = data.images.cols();
        auto slice = [&](int offset, int count) {
            Split s;
            s.x = Matrix(count, d.num_features);
            s.y.resize(count);
            for (int r = 0; r < count; ++r) {
                for (int c = 0; c < d.num_features; ++c) s.x.at(r, c) = data.images.at(offset + r, c);
                s.y[r] = data.labels[offset + r];
            }
            return s;
        };
        d.train = slice(0, spec.train_count);
        d.val = slice(spec.train_count, spec.val_count);
        d.test = slice(spec.train_count + spec.val_count, spec.test_count);
        d.num_classes = 1 + *std::max_element(data.labels.begin(), data.labels.begin() + total);
    } else {
        Rng rng(spec.seed);
        d.train = draw_synthetic(spec.kind, spec.train_count, spec.noise, rng);
        d.val = draw_synthetic(spec.kind, spec.val_count, spec.noise, rng);
        d.test = draw_synthetic(spec.kind, spec.test_count, spec.noise, rng);
        d.num_features = 2;
        d.num_classes = 2;
    }
    if (spec.standardize) standardize_with_train_stats(d);
    d.chance = chance_level(d.val, d.num_classes);
    return d;
}

IdxData load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error(images_path + ": cannot open");
    const std::uint32_t img_magic = read_be32(img, images_path);
    if (img_magic != kImagesMagic) {
        throw std::runtime_error(images_path + ": bad magic (expected images magic 0x00000803)");
    }
    const std::uint32_t count = read_be32(img, images_path);
    const std::uint32_t rows = read_be32(img, images_path);
    const std::uint32_t cols = read_be32(img, images_path);

    IdxData out;
    out.images = Matrix(static_cast<int>(count), static_cast<int>(rows * cols));
    std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
    for (std::uint32_t i = 0; i < count; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
            throw std::runtime_error(images_path + ": truncated file");
        }
        for (std::size_t c = 0; c < buf.size(); ++c) out.images.at(static_cast<int>(i), static_cast<int>(c)) = buf[c] / 255.0;
    }

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error(labels_path + ": cannot open");
    const std::uint32_t lab_magic = read_be32(lab, labels_path);
    if (lab_magic != kLabelsMagic) {
        throw std::runtime_error(labels_path + ": bad magic (expected labels magic 0x00000801)");
    }
    const std::uint32_t lab_count = read_be32(lab, labels_path);
    if (lab_count != count) {
        throw std::runtime_error(labels_path + ": count mismatch (" + std::to_string(lab_count) + " labels vs " +
                                 std::to_string(count) + " images)");
    }
    std::vector<unsigned char> lbuf(lab_count);
    if (!lab.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(lbuf.size()))) {
        throw std::runtime_error(labels_path + ": truncated file");
    }
    out.labels.assign(lbuf.begin(), lbuf.end());
    return out;
}

void write_idx(const Matrix& images, const std::vector<int>& labels, int img_rows, int img_cols,
               const std::string& images_path, const std::string& labels_path) {
    if (images.cols() != img_rows * img_cols) throw std::invalid_argument("write_idx: feature count != rows*cols");
    if (static_cast<std::size_t>(images.rows()) != labels.size()) throw std::invalid_argument("write_idx: count mismatch");
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error(images_path + ": cannot open for writing");
    write_be32(img, kImagesMagic);
    write_be32(img, static_cast<std::uint32_t>(images.rows()));
    write_be32(img, static_cast<std::uint32_t>(img_rows));
    write_be32(img, static_cast<std::uint32_t>(img_cols));
    for (int r = 0; r < images.rows(); ++r) {
        for (int c = 0; c < images.cols(); ++c) {
            const double v = std::clamp(images.at(r, c), 0.0, 1.0);
            const unsigned char byte = static_cast<unsigned char>(std::lround(v * 255.0));
            img.write(reinterpret_cast<const char*>(&byte), 1);
        }
    }
    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error(labels_path + ": cannot open for writing");
    write_be32(lab, kLabelsMagic);
    write_be32(lab, static_cast<std::uint32_t>(labels.size()));
    for (int y : labels) {
        const unsigned char byte = static_cast<unsigned char>(y);
        lab.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

std::string task_kind_name(TaskKind kind) {
    switch (kind) {
        case TaskKind::Blobs: return "blobs";
        case TaskKind::TwoMoons: return "two_moons";
        case TaskKind::Spirals: return "spirals";
        case TaskKind::IdxFiles: return "idx";
    }
    return "blobs";
}

TaskKind task_kind_from_name(const std::string& name) {
    if (name == "blobs") return TaskKind::Blobs;
    if (name == "two_moons") return TaskKind::TwoMoons;
    if (name == "spirals") return TaskKind::Spirals;
    if (name == "idx") return TaskKind::IdxFiles;
    throw std::invalid_argument("unknown task kind '" + name + "'");
}

}  // namespace evograd
