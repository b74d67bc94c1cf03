// Copyright 2026 The Evograd Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic desk-scale classification tasks: synthetic 2-D generators
// and an IDX-format loader, with fixed train/validation/test splits.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evograd/matrix.hpp"

namespace evograd {

enum class TaskKind { Blobs, TwoMoons, Spirals, IdxFiles };

struct DatasetSpec {
    TaskKind kind = TaskKind::Blobs;
    int train_count = 256;
    int val_count = 128;
    int test_count = 128;
    double noise = 0.3;
    std::uint64_t seed = 1;
    bool standardize = true;  // per-feature, train statistics only
    std::string images_path;  // IdxFiles only
    std::string labels_path;  // IdxFiles only
};

struct Split {
    Matrix x;
    std::vector<int> y;

    int count() const { return x.rows(); }
};

struct Dataset {
    Split train;
    Split val;
    Split test;
    int num_features = 0;
    int num_classes = 0;
    double chance = 0.5;  // best constant predictor on the validation split
};

// Deterministic from spec.seed. Synthetic kinds draw balanced classes;
// IdxFiles partitions the file into consecutive disjoint splits.
Dataset generate(const DatasetSpec& spec);

struct IdxData {
    Matrix images;  // count x (rows*cols), entries scaled to [0,1]
    std::vector<int> labels;
};

// IDX binary files: magic 0x00000803 (images) / 0x00000801 (labels),
// big-endian dimensions, unsigned byte payload.
IdxData load_idx(const std::string& images_path, const std::string& labels_path);

// Fixture writer, the exact inverse of load_idx for byte-grid matrices
// (entries k/255). Values are quantized with round(v*255).
void write_idx(const Matrix& images, const std::vector<int>& labels, int img_rows, int img_cols,
               const std::string& images_path, const std::string& labels_path);

std::string task_kind_name(TaskKind kind);
TaskKind task_kind_from_name(const std::string& name);

}  // namespace evograd
