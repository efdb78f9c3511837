#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lintrain/tensor.hpp"

namespace lintrain {

/// An image-classification split: [M,C,H,W] pixel tensor plus labels in
/// [0, class_count). Immutable after load; normalization stats are recorded
/// on the dataset they were applied to.
template <typename T>
struct DatasetT {
    TensorT<T> images; // [M, C, H, W]
    std::vector<std::int32_t> labels;
    std::int64_t class_count = 0;
    std::string split; // "train" / "test"
    std::vector<double> channel_mean, channel_std; // filled by normalize()

    std::int64_t size() const { return images.empty() ? 0 : images.dim(0); }
};

/// Big-endian IDX ingestion (image magic 0x803, label magic 0x801). Pixel
/// bytes scale to [0,1]; images smaller than 32x32 are zero-padded to 32x32,
/// centered with floor offsets, so the classic 5x5-conv/pool chain applies.
template <typename T>
DatasetT<T> load_idx(const std::string& images_path, const std::string& labels_path);

/// Writes images/labels back out as IDX, recovering pixel bytes by rounding
/// value*255. Fixture support; round-trips loaded datasets bit-exactly.
template <typename T>
void write_idx(const DatasetT<T>& ds, const std::string& images_path,
               const std::string& labels_path);

/// CIFAR-10 binary batches: records of 3073 bytes, one label byte then three
/// channel-major 32x32 planes.
template <typename T>
DatasetT<T> load_cifar10_bin(const std::vector<std::string>& paths);

template <typename T>
void write_cifar10_bin(const DatasetT<T>& ds, const std::string& path);

/// Per-channel standardization. Stats (mean, std with floor 1e-8) come from
/// `train` only and are applied to train and every dataset in `others`.
template <typename T>
void normalize(DatasetT<T>& train, std::vector<DatasetT<T>*> others = {});

/// One-hot target rows: out[m, labels[m]] = 1.
template <typename T>
TensorT<T> one_hot(const std::vector<std::int32_t>& labels, std::int64_t class_count);

/// First-k-per-class subset in file order.
template <typename T>
DatasetT<T> subset_per_class(const DatasetT<T>& ds, std::int64_t per_class);

/// Keeps only the listed classes, relabeling to their position in the list.
template <typename T>
DatasetT<T> subset_classes(const DatasetT<T>& ds, const std::vector<std::int32_t>& classes);

/// Standard-normal inputs with uniform labels, shaped [M,d,1,1]. A nonzero
/// `class_shift` adds shift * e_{label mod d} to the mean, giving a separable
/// blob per class; shift 0 keeps plain N(0,1) draws.
template <typename T>
DatasetT<T> synth_gaussian(std::int64_t count, std::int64_t dim, std::int64_t class_count,
                           std::uint64_t seed, double class_shift = 0.0,
                           double scale = 1.0);

/// Deterministic minibatch order: one Fisher-Yates permutation per epoch,
/// derived from (seed, epoch); the final short batch is kept.
struct BatchPlan {
    std::uint64_t seed = 1;
    std::int64_t batch_size = 32;
};

std::vector<std::vector<std::int64_t>> batches(const BatchPlan& plan, std::int64_t count,
                                               std::int64_t epoch);

/// Gathers the indexed examples into a batch tensor plus their labels.
template <typename T>
std::pair<TensorT<T>, std::vector<std::int32_t>> gather(const DatasetT<T>& ds,
                                                        const std::vector<std::int64_t>& idx);

} // namespace lintrain
