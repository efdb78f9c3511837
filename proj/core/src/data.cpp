#include "lintrain/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "lintrain/errors.hpp"
#include "lintrain/rng.hpp"

namespace lintrain {

namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
constexpr std::int64_t kPadTarget = 32;
constexpr std::int64_t kCifarRecordBytes = 3073;

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off) {
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

void push_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    b.push_back(static_cast<std::uint8_t>(v >> 24));
    b.push_back(static_cast<std::uint8_t>(v >> 16));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v));
}

std::uint8_t pixel_byte(double value) {
    const double scaled = std::round(value * 255.0);
    if (scaled < 0.0) return 0;
    if (scaled > 255.0) return 255;
    return static_cast<std::uint8_t>(scaled);
}

} // namespace

template <typename T>
DatasetT<T> load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto ib = read_file(images_path);
    if (ib.size() < 16) throw DataError("truncated IDX image file: " + images_path);
    if (be32(ib, 0) != kIdxImageMagic)
        throw DataError("wrong IDX image magic in " + images_path);
    const std::int64_t count = be32(ib, 4);
    const std::int64_t rows = be32(ib, 8);
    const std::int64_t cols = be32(ib, 12);
    if (static_cast<std::int64_t>(ib.size()) != 16 + count * rows * cols)
        throw DataError("truncated IDX image file: " + images_path);

    const auto lb = read_file(labels_path);
    if (lb.size() < 8) throw DataError("truncated IDX label file: " + labels_path);
    if (be32(lb, 0) != kIdxLabelMagic)
        throw DataError("wrong IDX label magic in " + labels_path);
    const std::int64_t label_count = be32(lb, 4);
    if (static_cast<std::int64_t>(lb.size()) != 8 + label_count)
        throw DataError("truncated IDX label file: " + labels_path);
    if (label_count != count)
        throw DataError("IDX image/label count mismatch: " + std::to_string(count) + " vs " +
                        std::to_string(label_count));

    const std::int64_t out_h = std::max(rows, kPadTarget);
    const std::int64_t out_w = std::max(cols, kPadTarget);
    const std::int64_t off_h = (out_h - rows) / 2;
    const std::int64_t off_w = (out_w - cols) / 2;

    DatasetT<T> ds;
    ds.images = TensorT<T>({count, 1, out_h, out_w});
    T* px = ds.images.ptr();
    const std::uint8_t* src = ib.data() + 16;
    for (std::int64_t m = 0; m < count; ++m) {
        T* plane = px + m * out_h * out_w;
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t c = 0; c < cols; ++c)
                plane[(r + off_h) * out_w + (c + off_w)] =
                    static_cast<T>(src[(m * rows + r) * cols + c]) / T(255);
    }
    ds.labels.resize(static_cast<std::size_t>(count));
    std::int32_t max_label = 0;
    for (std::int64_t m = 0; m < count; ++m) {
        ds.labels[static_cast<std::size_t>(m)] = lb[static_cast<std::size_t>(8 + m)];
        max_label = std::max(max_label, ds.labels[static_cast<std::size_t>(m)]);
    }
    ds.class_count = max_label + 1;
    return ds;
}

template <typename T>
void write_idx(const DatasetT<T>& ds, const std::string& images_path,
               const std::string& labels_path) {
    if (ds.images.rank() != 4 || ds.images.dim(1) != 1)
        throw DataError("write_idx: expected single-channel [M,1,H,W] images");
    const std::int64_t count = ds.images.dim(0);
    const std::int64_t rows = ds.images.dim(2);
    const std::int64_t cols = ds.images.dim(3);

    std::vector<std::uint8_t> ib;
    ib.reserve(static_cast<std::size_t>(16 + count * rows * cols));
    push_be32(ib, kIdxImageMagic);
    push_be32(ib, static_cast<std::uint32_t>(count));
    push_be32(ib, static_cast<std::uint32_t>(rows));
    push_be32(ib, static_cast<std::uint32_t>(cols));
    const T* px = ds.images.ptr();
    for (std::int64_t i = 0, e = ds.images.size(); i < e; ++i)
        ib.push_back(pixel_byte(static_cast<double>(px[i])));
    write_file(images_path, ib);

    std::vector<std::uint8_t> lb;
    lb.reserve(static_cast<std::size_t>(8 + count));
    push_be32(lb, kIdxLabelMagic);
    push_be32(lb, static_cast<std::uint32_t>(count));
    for (const std::int32_t l : ds.labels) lb.push_back(static_cast<std::uint8_t>(l));
    write_file(labels_path, lb);
}

template <typename T>
DatasetT<T> load_cifar10_bin(const std::vector<std::string>& paths) {
    DatasetT<T> ds;
    ds.class_count = 10;
    std::vector<std::uint8_t> all;
    for (const auto& path : paths) {
        const auto bytes = read_file(path);
        if (bytes.size() % kCifarRecordBytes != 0)
            throw DataError("CIFAR-10 file length is not a multiple of 3073: " + path);
        all.insert(all.end(), bytes.begin(), bytes.end());
    }
    const std::int64_t count = static_cast<std::int64_t>(all.size()) / kCifarRecordBytes;
    ds.images = TensorT<T>({std::max<std::int64_t>(count, 1), 3, 32, 32});
    if (count == 0) ds.images = TensorT<T>(); // empty dataset stays empty
    ds.labels.resize(static_cast<std::size_t>(count));
    T* px = count ? ds.images.ptr() : nullptr;
    for (std::int64_t m = 0; m < count; ++m) {
        const std::uint8_t* rec = all.data() + m * kCifarRecordBytes;
        if (rec[0] > 9) throw DataError("CIFAR-10 label byte out of range");
        ds.labels[static_cast<std::size_t>(m)] = rec[0];
        T* dst = px + m * 3 * 32 * 32;
        for (std::int64_t i = 0; i < 3 * 32 * 32; ++i)
            dst[i] = static_cast<T>(rec[1 + i]) / T(255);
    }
    return ds;
}

template <typename T>
void write_cifar10_bin(const DatasetT<T>& ds, const std::string& path) {
    if (ds.images.rank() != 4 || ds.images.dim(1) != 3 || ds.images.dim(2) != 32 ||
        ds.images.dim(3) != 32)
        throw DataError("write_cifar10_bin: expected [M,3,32,32] images");
    std::vector<std::uint8_t> bytes;
    const std::int64_t count = ds.images.dim(0);
    bytes.reserve(static_cast<std::size_t>(count * kCifarRecordBytes));
    const T* px = ds.images.ptr();
    for (std::int64_t m = 0; m < count; ++m) {
        bytes.push_back(static_cast<std::uint8_t>(ds.labels[static_cast<std::size_t>(m)]));
        for (std::int64_t i = 0; i < 3 * 32 * 32; ++i)
            bytes.push_back(pixel_byte(static_cast<double>(px[m * 3 * 32 * 32 + i])));
    }
    write_file(path, bytes);
}

template <typename T>
void normalize(DatasetT<T>& train, std::vector<DatasetT<T>*> others) {
    if (train.size() < 1) throw DataError("normalize: empty train split");
    const std::int64_t channels = train.images.dim(1);
    const std::int64_t plane = train.images.dim(2) * train.images.dim(3);
    const std::int64_t count = train.size();

    std::vector<double> mean(static_cast<std::size_t>(channels), 0.0);
    std::vector<double> sd(static_cast<std::size_t>(channels), 0.0);
    const T* px = train.images.ptr();
    for (std::int64_t c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (std::int64_t m = 0; m < count; ++m) {
            const T* p = px + (m * channels + c) * plane;
            for (std::int64_t i = 0; i < plane; ++i) acc += static_cast<double>(p[i]);
        }
        mean[static_cast<std::size_t>(c)] = acc / static_cast<double>(count * plane);
    }
    for (std::int64_t c = 0; c < channels; ++c) {
        double acc = 0.0;
        const double mu = mean[static_cast<std::size_t>(c)];
        for (std::int64_t m = 0; m < count; ++m) {
            const T* p = px + (m * channels + c) * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
                const double d = static_cast<double>(p[i]) - mu;
                acc += d * d;
            }
        }
        sd[static_cast<std::size_t>(c)] =
            std::max(std::sqrt(acc / static_cast<double>(count * plane)), 1e-8);
    }

    auto apply = [&](DatasetT<T>& ds) {
        if (ds.size() == 0) return;
        if (ds.images.dim(1) != channels)
            throw ShapeError("normalize: channel count differs between splits");
        const std::int64_t p2 = ds.images.dim(2) * ds.images.dim(3);
        T* data = ds.images.ptr();
        for (std::int64_t m = 0; m < ds.size(); ++m)
            for (std::int64_t c = 0; c < channels; ++c) {
                const double mu = mean[static_cast<std::size_t>(c)];
                const double s = sd[static_cast<std::size_t>(c)];
                T* p = data + (m * channels + c) * p2;
                for (std::int64_t i = 0; i < p2; ++i)
                    p[i] = static_cast<T>((static_cast<double>(p[i]) - mu) / s);
            }
        ds.channel_mean = mean;
        ds.channel_std = sd;
    };
    apply(train);
    for (DatasetT<T>* ds : others)
        if (ds) apply(*ds);
}

template <typename T>
TensorT<T> one_hot(const std::vector<std::int32_t>& labels, std::int64_t class_count) {
    if (class_count < 1) throw DataError("one_hot: class_count must be >= 1");
    TensorT<T> out({static_cast<std::int64_t>(labels.size()), class_count});
    for (std::size_t m = 0; m < labels.size(); ++m) {
        const std::int32_t l = labels[m];
        if (l < 0 || l >= class_count)
            throw DataError("one_hot: label " + std::to_string(l) + " out of range");
        out[static_cast<std::int64_t>(m) * class_count + l] = T(1);
    }
    return out;
}

namespace {

template <typename T>
DatasetT<T> take_indices(const DatasetT<T>& ds, const std::vector<std::int64_t>& keep,
                         std::int64_t class_count,
                         const std::vector<std::int32_t>* relabel = nullptr) {
    DatasetT<T> out;
    out.split = ds.split;
    out.class_count = class_count;
    const std::int64_t per = ds.images.size() / ds.size();
    out.images = TensorT<T>({static_cast<std::int64_t>(keep.size()), ds.images.dim(1),
                             ds.images.dim(2), ds.images.dim(3)});
    out.labels.resize(keep.size());
    const T* src = ds.images.ptr();
    T* dst = out.images.ptr();
    for (std::size_t i = 0; i < keep.size(); ++i) {
        std::copy(src + keep[i] * per, src + (keep[i] + 1) * per,
                  dst + static_cast<std::int64_t>(i) * per);
        out.labels[i] = relabel ? (*relabel)[i] : ds.labels[static_cast<std::size_t>(keep[i])];
    }
    return out;
}

} // namespace

template <typename T>
DatasetT<T> subset_per_class(const DatasetT<T>& ds, std::int64_t per_class) {
    if (per_class < 1) throw DataError("subset_per_class: per_class must be >= 1");
    std::vector<std::int64_t> taken(static_cast<std::size_t>(ds.class_count), 0);
    std::vector<std::int64_t> keep;
    for (std::int64_t m = 0; m < ds.size(); ++m) {
        const std::int32_t l = ds.labels[static_cast<std::size_t>(m)];
        if (taken[static_cast<std::size_t>(l)] < per_class) {
            ++taken[static_cast<std::size_t>(l)];
            keep.push_back(m);
        }
    }
    for (std::int64_t c = 0; c < ds.class_count; ++c)
        if (taken[static_cast<std::size_t>(c)] < per_class)
            throw DataError("subset_per_class: class " + std::to_string(c) + " has only " +
                            std::to_string(taken[static_cast<std::size_t>(c)]) + " examples");
    return take_indices(ds, keep, ds.class_count);
}

template <typename T>
DatasetT<T> subset_classes(const DatasetT<T>& ds, const std::vector<std::int32_t>& classes) {
    if (classes.empty()) throw DataError("subset_classes: empty class list");
    std::vector<std::int64_t> keep;
    std::vector<std::int32_t> relabel;
    for (std::int64_t m = 0; m < ds.size(); ++m) {
        const std::int32_t l = ds.labels[static_cast<std::size_t>(m)];
        const auto it = std::find(classes.begin(), classes.end(), l);
        if (it != classes.end()) {
            keep.push_back(m);
            relabel.push_back(static_cast<std::int32_t>(it - classes.begin()));
        }
    }
    if (keep.empty()) throw DataError("subset_classes: no examples matched");
    return take_indices(ds, keep, static_cast<std::int64_t>(classes.size()), &relabel);
}

template <typename T>
DatasetT<T> synth_gaussian(std::int64_t count, std::int64_t dim, std::int64_t class_count,
                           std::uint64_t seed, double class_shift, double scale) {
    if (count < 1 || dim < 1 || class_count < 1)
        throw DataError("synth_gaussian: count, dim and class_count must be >= 1");
    DatasetT<T> ds;
    ds.class_count = class_count;
    ds.images = TensorT<T>({count, dim, 1, 1});
    ds.labels.resize(static_cast<std::size_t>(count));
    Xoshiro256 rng(seed);
    T* px = ds.images.ptr();
    // draw order per example: label first, then the dim pixels
    for (std::int64_t m = 0; m < count; ++m) {
        const auto label =
            static_cast<std::int32_t>(rng.next_below(static_cast<std::uint64_t>(class_count)));
        ds.labels[static_cast<std::size_t>(m)] = label;
        for (std::int64_t i = 0; i < dim; ++i) {
            double v = rng.next_normal();
            if (class_shift != 0.0 && i == label % dim) v += class_shift;
            px[m * dim + i] = static_cast<T>(scale * v);
        }
    }
    return ds;
}

std::vector<std::vector<std::int64_t>> batches(const BatchPlan& plan, std::int64_t count,
                                               std::int64_t epoch) {
    if (plan.batch_size < 1) throw ConfigError("batches: batch_size must be >= 1");
    if (plan.batch_size > count)
        throw ConfigError("batches: batch_size exceeds dataset size");
    std::vector<std::int64_t> perm(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) perm[static_cast<std::size_t>(i)] = i;
    Xoshiro256 rng(derive_seed(plan.seed, static_cast<std::uint64_t>(epoch)));
    for (std::int64_t i = count - 1; i > 0; --i) {
        const auto j =
            static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(i + 1)));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    std::vector<std::vector<std::int64_t>> out;
    for (std::int64_t start = 0; start < count; start += plan.batch_size) {
        const std::int64_t end = std::min(count, start + plan.batch_size);
        out.emplace_back(perm.begin() + start, perm.begin() + end);
    }
    return out;
}

template <typename T>
std::pair<TensorT<T>, std::vector<std::int32_t>> gather(const DatasetT<T>& ds,
                                                        const std::vector<std::int64_t>& idx) {
    const std::int64_t per = ds.images.size() / ds.size();
    TensorT<T> batch({static_cast<std::int64_t>(idx.size()), ds.images.dim(1),
                      ds.images.dim(2), ds.images.dim(3)});
    std::vector<std::int32_t> labels(idx.size());
    const T* src = ds.images.ptr();
    T* dst = batch.ptr();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        std::copy(src + idx[i] * per, src + (idx[i] + 1) * per,
                  dst + static_cast<std::int64_t>(i) * per);
        labels[i] = ds.labels[static_cast<std::size_t>(idx[i])];
    }
    return {std::move(batch), std::move(labels)};
}

#define LINTRAIN_INSTANTIATE_DATA(T)                                                       \
    template DatasetT<T> load_idx<T>(const std::string&, const std::string&);              \
    template void write_idx<T>(const DatasetT<T>&, const std::string&, const std::string&); \
    template DatasetT<T> load_cifar10_bin<T>(const std::vector<std::string>&);             \
    template void write_cifar10_bin<T>(const DatasetT<T>&, const std::string&);            \
    template void normalize<T>(DatasetT<T>&, std::vector<DatasetT<T>*>);                   \
    template TensorT<T> one_hot<T>(const std::vector<std::int32_t>&, std::int64_t);        \
    template DatasetT<T> subset_per_class<T>(const DatasetT<T>&, std::int64_t);            \
    template DatasetT<T> subset_classes<T>(const DatasetT<T>&,                             \
                                           const std::vector<std::int32_t>&);              \
    template DatasetT<T> synth_gaussian<T>(std::int64_t, std::int64_t, std::int64_t,       \
                                           std::uint64_t, double, double);                         \
    template std::pair<TensorT<T>, std::vector<std::int32_t>> gather<T>(                   \
        const DatasetT<T>&, const std::vector<std::int64_t>&);

LINTRAIN_INSTANTIATE_DATA(float)
LINTRAIN_INSTANTIATE_DATA(double)

} // namespace lintrain
