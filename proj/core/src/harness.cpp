#include "lintrain/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "lintrain/arch.hpp"
#include "lintrain/autodiff.hpp"
#include "lintrain/data.hpp"
#include "lintrain/errors.hpp"
#include "lintrain/ops.hpp"
#include "lintrain/optim.hpp"
#include "lintrain/rng.hpp"
#include "lintrain/tangent.hpp"

namespace lintrain {

std::uint64_t fnv1a64(const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < bytes; ++i) {
        hash ^= p[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

const csv::Schema& epochs_schema() {
    static const csv::Schema schema{{{"epoch", csv::ColType::Int},
                                     {"split", csv::ColType::Str},
                                     {"loss", csv::ColType::Float},
                                     {"accuracy", csv::ColType::Float}}};
    return schema;
}

const csv::Schema& trajectory_schema() {
    static const csv::Schema schema{{{"step", csv::ColType::Int},
                                     {"probe_id", csv::ColType::Int},
                                     {"model", csv::ColType::Str},
                                     {"output_value", csv::ColType::Float}}};
    return schema;
}

const csv::Schema& effrank_schema() {
    static const csv::Schema schema{{{"width_factor", csv::ColType::Int},
                                     {"m", csv::ColType::Int},
                                     {"effective_rank", csv::ColType::Float}}};
    return schema;
}

const csv::Schema& divergence_schema() {
    static const csv::Schema schema{{{"probe_id", csv::ColType::Int},
                                     {"max_abs_dev", csv::ColType::Float},
                                     {"first_step_over_threshold", csv::ColType::Int}}};
    return schema;
}

template <typename T>
double evaluate_accuracy(const TensorT<T>& outputs, std::span<const std::int32_t> labels) {
    if (outputs.rank() != 2) throw ShapeError("evaluate_accuracy: outputs must be [N,L]");
    const std::int64_t n = outputs.dim(0), l = outputs.dim(1);
    if (static_cast<std::int64_t>(labels.size()) != n)
        throw ShapeError("evaluate_accuracy: label count mismatch");
    std::int64_t correct = 0;
    const T* po = outputs.ptr();
    for (std::int64_t i = 0; i < n; ++i) {
        const T* row = po + i * l;
        std::int64_t best = 0;
        for (std::int64_t j = 1; j < l; ++j)
            if (row[j] > row[best]) best = j; // ties keep the lowest index
        if (best == labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

namespace {

namespace fs = std::filesystem;

template <typename T>
struct Splits {
    DatasetT<T> train, test;
};

std::vector<std::string> existing_cifar_batches(const std::string& dir) {
    std::vector<std::string> paths;
    for (int i = 1; i <= 5; ++i) {
        const std::string p = dir + "/data_batch_" + std::to_string(i) + ".bin";
        if (fs::exists(p)) paths.push_back(p);
    }
    if (paths.empty()) throw IoError("no CIFAR-10 data_batch_*.bin under " + dir);
    return paths;
}

template <typename T>
Splits<T> load_splits(const ExperimentConfig& c) {
    Splits<T> s;
    if (c.dataset == "mnist") {
        s.train = load_idx<T>(c.data_dir + "/train-images-idx3-ubyte",
                              c.data_dir + "/train-labels-idx1-ubyte");
        s.test = load_idx<T>(c.data_dir + "/t10k-images-idx3-ubyte",
                             c.data_dir + "/t10k-labels-idx1-ubyte");
    } else if (c.dataset == "cifar10") {
        s.train = load_cifar10_bin<T>(existing_cifar_batches(c.data_dir));
        s.test = load_cifar10_bin<T>({c.data_dir + "/test_batch.bin"});
    } else { // synth
        s.train = synth_gaussian<T>(c.synth_train, c.synth_dim, c.synth_classes, c.seed,
                                    c.synth_shift, c.synth_scale);
        s.test = synth_gaussian<T>(c.synth_test, c.synth_dim, c.synth_classes,
                                   derive_seed(c.seed, 0x7E57), c.synth_shift, c.synth_scale);
    }
    s.train.split = "train";
    s.test.split = "test";
    if (c.subset_per_class > 0) s.train = subset_per_class(s.train, c.subset_per_class);
    if (c.test_subset_per_class > 0) s.test = subset_per_class(s.test, c.test_subset_per_class);
    if (c.normalize) normalize(s.train, {&s.test});
    return s;
}

template <typename T>
NetworkSpec build_arch(const ExperimentConfig& c, const DatasetT<T>& train,
                       std::int64_t width_override = -1) {
    const std::int64_t width = width_override > 0 ? width_override : c.width_factor;
    const std::int64_t channels = train.images.dim(1);
    const std::int64_t height = train.images.dim(2);
    const std::int64_t width_px = train.images.dim(3);
    if (c.arch == "lenet") {
        if (height != 32 || width_px != 32)
            throw ConfigError("lenet expects 32x32 inputs, dataset is " +
                              std::to_string(height) + "x" + std::to_string(width_px));
        return build_lenet(width, channels, train.class_count);
    }
    if (c.arch == "mlp") {
        const std::int64_t input_dim = channels * height * width_px;
        if (c.mlp_dims.front() != input_dim)
            throw ConfigError("mlp_dims[0] = " + std::to_string(c.mlp_dims.front()) +
                              " does not match dataset input size " +
                              std::to_string(input_dim));
        if (c.mlp_dims.back() != train.class_count)
            throw ConfigError("mlp_dims back does not match dataset class count");
        return build_mlp(c.mlp_dims, width);
    }
    // arch = file
    std::ifstream in(c.arch_file);
    if (!in) throw IoError("cannot open arch_file " + c.arch_file);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return build_convnet(layers_from_text(text), channels, height, width_px,
                         train.class_count, width);
}

SgdHyper hyper_for(const ExperimentConfig& c, bool linearized) {
    SgdHyper h;
    h.lr = (linearized && c.lin_lr >= 0.0) ? c.lin_lr : c.lr;
    h.momentum = c.momentum;
    h.weight_decay =
        (linearized && c.lin_weight_decay >= 0.0) ? c.lin_weight_decay : c.weight_decay;
    h.decay_biases = c.decay_biases;
    return h;
}

/// One model being trained: either the network itself or its tangent model.
/// The tangent path trains the offset u against the frozen w0 graph.
template <typename T>
struct Trainer {
    bool linearized = false;
    NetworkSpec spec;
    ParamVectorT<T> w0;      // standard: snapshot of the initialization
    ParamVectorT<T> weights; // standard: w; linearized: u
    SgdStateT<T> sgd;
    double base_lr;

    Trainer(bool lin, NetworkSpec s, ParamVectorT<T> init, SgdHyper hyper)
        : linearized(lin),
          spec(std::move(s)),
          w0(std::move(init)),
          weights(lin ? ParamVectorT<T>(w0.layout()) : w0),
          sgd(w0.layout(), hyper),
          base_lr(hyper.lr) {}

    TensorT<T> outputs(const TensorT<T>& batch) const {
        if (linearized) {
            TangentModelT<T> tm{spec, w0, weights};
            return tangent_forward(tm, batch);
        }
        return predict(spec, weights, batch);
    }

    double step(const TensorT<T>& batch, const TensorT<T>& targets) {
        if (linearized) {
            auto [base, graph] = forward(spec, w0, batch);
            TensorT<T> out = jvp(graph, weights);
            T* po = out.ptr();
            const T* pb = base.ptr();
            for (std::int64_t i = 0, e = out.size(); i < e; ++i) po[i] += pb[i];
            const double loss = ops::l2_loss(out, targets);
            const ParamVectorT<T> grad = vjp(graph, ops::l2_loss_cotangent(out, targets));
            sgd_step(weights, grad, sgd);
            return loss;
        }
        auto [out, graph] = forward(spec, weights, batch);
        const double loss = ops::l2_loss(out, targets);
        const ParamVectorT<T> grad = vjp(graph, ops::l2_loss_cotangent(out, targets));
        sgd_step(weights, grad, sgd);
        return loss;
    }

    void set_epoch_lr(const LrSchedule& schedule, std::int64_t epoch) {
        LrSchedule own = schedule;
        own.base_lr = base_lr;
        sgd.hyper.lr = schedule_lr(own, epoch);
    }
};

template <typename T>
std::int64_t count_correct(const TensorT<T>& outputs, std::span<const std::int32_t> labels) {
    const std::int64_t n = outputs.dim(0), l = outputs.dim(1);
    const T* po = outputs.ptr();
    std::int64_t correct = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const T* row = po + i * l;
        std::int64_t best = 0;
        for (std::int64_t j = 1; j < l; ++j)
            if (row[j] > row[best]) best = j;
        if (best == labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return correct;
}

template <typename T>
EpochStat evaluate_split(const Trainer<T>& model, const DatasetT<T>& ds,
                         std::int64_t batch_size, std::int64_t epoch) {
    EpochStat stat{epoch, ds.split, 0.0, 0.0};
    const std::int64_t count = ds.size();
    double loss_weighted = 0.0;
    std::int64_t correct = 0;
    for (std::int64_t start = 0; start < count; start += batch_size) {
        const std::int64_t end = std::min(count, start + batch_size);
        std::vector<std::int64_t> idx(static_cast<std::size_t>(end - start));
        for (std::int64_t i = start; i < end; ++i) idx[static_cast<std::size_t>(i - start)] = i;
        auto [batch, labels] = gather(ds, idx);
        const TensorT<T> out = model.outputs(batch);
        const TensorT<T> targets = one_hot<T>(labels, ds.class_count);
        loss_weighted += ops::l2_loss(out, targets) * static_cast<double>(end - start);
        correct += count_correct(out, labels);
    }
    stat.loss = loss_weighted / static_cast<double>(count);
    stat.accuracy = static_cast<double>(correct) / static_cast<double>(count);
    return stat;
}

template <typename T>
struct ProbeSet {
    TensorT<T> batch;
    std::vector<diagnostics::ProbeId> ids;
};

/// First probe_count test examples; the logged slot is the correct class.
template <typename T>
ProbeSet<T> select_probes(const DatasetT<T>& test, std::int64_t probe_count) {
    const std::int64_t count = std::min(probe_count, test.size());
    std::vector<std::int64_t> idx(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = i;
    auto [batch, labels] = gather(test, idx);
    ProbeSet<T> probes{std::move(batch), {}};
    for (std::int64_t i = 0; i < count; ++i)
        probes.ids.push_back({i, labels[static_cast<std::size_t>(i)]});
    return probes;
}

template <typename T>
void log_probes(diagnostics::TrajectoryLog& log, const Trainer<T>& model,
                const ProbeSet<T>& probes, std::int64_t step) {
    const TensorT<T> out = model.outputs(probes.batch);
    std::vector<double> values(probes.ids.size());
    const std::int64_t l = out.dim(1);
    for (std::size_t p = 0; p < probes.ids.size(); ++p)
        values[p] = static_cast<double>(
            out[static_cast<std::int64_t>(p) * l + probes.ids[p].output_slot]);
    log.steps.push_back(step);
    log.values.push_back(std::move(values));
}

template <typename T>
std::uint64_t checksum(const ParamVectorT<T>& v) {
    return fnv1a64(v.ptr(), static_cast<std::size_t>(v.size()) * sizeof(T));
}

void write_epochs_csv(const RunRecord& record, const std::string& path) {
    std::vector<csv::Row> rows;
    for (const EpochStat& s : record.epochs)
        rows.push_back({s.epoch, s.split, s.loss, s.accuracy});
    csv::emit_csv(rows, epochs_schema(), path);
}

void write_trajectory_csv(const std::vector<const diagnostics::TrajectoryLog*>& logs,
                          const std::string& path) {
    std::vector<csv::Row> rows;
    if (!logs.empty()) {
        const std::size_t steps = logs.front()->steps.size();
        for (std::size_t s = 0; s < steps; ++s)
            for (const auto* log : logs)
                for (std::size_t p = 0; p < log->probes.size(); ++p)
                    rows.push_back({log->steps[s], log->probes[p].example_index,
                                    log->model_tag, log->values[s][p]});
    }
    csv::emit_csv(rows, trajectory_schema(), path);
}

void write_divergence_csv(const diagnostics::DivergenceResult& d,
                          const std::vector<diagnostics::ProbeId>& probes,
                          const std::string& path) {
    std::vector<csv::Row> rows;
    for (std::size_t p = 0; p < probes.size(); ++p)
        rows.push_back({probes[p].example_index, d.per_probe_max[p], d.first_step_over[p]});
    csv::emit_csv(rows, divergence_schema(), path);
}

std::string ensure_out_dir(const ExperimentConfig& c) {
    fs::create_directories(c.out_dir);
    return c.out_dir;
}

template <typename T>
RunRecord run_train_impl(const ExperimentConfig& c) {
    const Splits<T> splits = load_splits<T>(c);
    const NetworkSpec spec = build_arch(c, splits.train);
    ParamVectorT<T> w0 = init_params<T>(spec, c.seed);

    const bool linearized = c.model == "linearized";
    Trainer<T> model(linearized, spec, std::move(w0), hyper_for(c, linearized));

    RunRecord record;
    record.model_tag = linearized ? "linearized" : "standard";
    record.config_echo = config_echo(c);
    record.w0_checksum = checksum(model.w0);

    LrSchedule schedule{c.lr, c.schedule_decay, c.schedule_period, c.schedule};
    const BatchPlan plan{c.seed, c.batch_size};

    record.epochs.push_back(evaluate_split(model, splits.train, c.batch_size, 0));
    record.epochs.push_back(evaluate_split(model, splits.test, c.batch_size, 0));

    std::int64_t step_count = 0;
    for (std::int64_t epoch = 0; epoch < c.epochs; ++epoch) {
        model.set_epoch_lr(schedule, epoch);
        for (const auto& idx : batches(plan, splits.train.size(), epoch)) {
            auto [batch, labels] = gather(splits.train, idx);
            const double loss =
                model.step(batch, one_hot<T>(labels, splits.train.class_count));
            ++step_count;
            if (!std::isfinite(loss))
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                                   ", step " + std::to_string(step_count));
        }
        record.epochs.push_back(evaluate_split(model, splits.train, c.batch_size, epoch + 1));
        record.epochs.push_back(evaluate_split(model, splits.test, c.batch_size, epoch + 1));
    }
    record.final_checksum = checksum(model.weights);

    const std::string dir = ensure_out_dir(c);
    write_epochs_csv(record, dir + "/epochs.csv");
    return record;
}

template <typename T>
PairResult run_train_pair_impl(const ExperimentConfig& c) {
    const Splits<T> splits = load_splits<T>(c);
    const NetworkSpec spec = build_arch(c, splits.train);
    const ParamVectorT<T> w0 = init_params<T>(spec, c.seed);

    Trainer<T> standard(false, spec, w0, hyper_for(c, false));
    Trainer<T> linearized(true, spec, w0, hyper_for(c, true));

    PairResult result;
    result.standard_run.model_tag = "standard";
    result.linearized_run.model_tag = "linearized";
    result.standard_run.config_echo = result.linearized_run.config_echo = config_echo(c);
    result.standard_run.w0_checksum = result.linearized_run.w0_checksum = checksum(w0);

    const ProbeSet<T> probes = select_probes(splits.test, c.probe_count);
    auto& slog = result.standard_run.trajectory;
    auto& llog = result.linearized_run.trajectory;
    slog.model_tag = "standard";
    llog.model_tag = "linearized";
    slog.probes = llog.probes = probes.ids;

    LrSchedule schedule{c.lr, c.schedule_decay, c.schedule_period, c.schedule};
    const BatchPlan plan{c.seed, c.batch_size};

    auto eval_both = [&](std::int64_t epoch) {
        result.standard_run.epochs.push_back(
            evaluate_split(standard, splits.train, c.batch_size, epoch));
        result.standard_run.epochs.push_back(
            evaluate_split(standard, splits.test, c.batch_size, epoch));
        result.linearized_run.epochs.push_back(
            evaluate_split(linearized, splits.train, c.batch_size, epoch));
        result.linearized_run.epochs.push_back(
            evaluate_split(linearized, splits.test, c.batch_size, epoch));
    };
    eval_both(0);

    log_probes(slog, standard, probes, 0);
    log_probes(llog, linearized, probes, 0);

    const std::int64_t steps_per_epoch =
        (splits.train.size() + c.batch_size - 1) / c.batch_size;
    const std::int64_t total_steps = steps_per_epoch * c.epochs;
    std::int64_t step_count = 0;
    for (std::int64_t epoch = 0; epoch < c.epochs; ++epoch) {
        standard.set_epoch_lr(schedule, epoch);
        linearized.set_epoch_lr(schedule, epoch);
        // both models consume the identical batch sequence, interleaved per step
        for (const auto& idx : batches(plan, splits.train.size(), epoch)) {
            auto [batch, labels] = gather(splits.train, idx);
            const TensorT<T> targets = one_hot<T>(labels, splits.train.class_count);
            const double sloss = standard.step(batch, targets);
            const double lloss = linearized.step(batch, targets);
            ++step_count;
            if (!std::isfinite(sloss) || !std::isfinite(lloss))
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                                   ", step " + std::to_string(step_count));
            if (step_count % c.log_cadence == 0 || step_count == total_steps) {
                log_probes(slog, standard, probes, step_count);
                log_probes(llog, linearized, probes, step_count);
            }
        }
        eval_both(epoch + 1);
    }
    result.standard_run.final_checksum = checksum(standard.weights);
    result.linearized_run.final_checksum = checksum(linearized.weights);

    result.divergence = diagnostics::trajectory_divergence(slog, llog, c.divergence_threshold);

    const std::string dir = ensure_out_dir(c);
    write_epochs_csv(result.standard_run, dir + "/epochs_standard.csv");
    write_epochs_csv(result.linearized_run, dir + "/epochs_linearized.csv");
    write_trajectory_csv({&slog, &llog}, dir + "/trajectory.csv");
    write_divergence_csv(result.divergence, probes.ids, dir + "/divergence.csv");
    return result;
}

template <typename T>
EffrankResult run_effrank_impl(const ExperimentConfig& c) {
    const Splits<T> splits = load_splits<T>(c);
    const std::int64_t m = std::min(c.effrank_m, splits.train.size());
    std::vector<std::int64_t> idx(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = i;
    auto [examples, labels] = gather(splits.train, idx);
    (void)labels;

    EffrankResult result;
    for (const std::int64_t width : c.widths) {
        const NetworkSpec spec = build_arch(c, splits.train, width);
        TangentModelT<T> tm = make_tangent(spec, init_params<T>(spec, c.seed));
        const double effrank =
            diagnostics::effrank_of_embedding(tm, examples, c.embed_block_elems);
        result.rows.push_back({width, m, effrank});
    }

    std::vector<csv::Row> rows;
    for (const EffrankRow& r : result.rows)
        rows.push_back({r.width_factor, r.examples, r.effective_rank});
    csv::emit_csv(rows, effrank_schema(), ensure_out_dir(c) + "/effrank.csv");
    return result;
}

} // namespace

RunRecord run_train(const ExperimentConfig& config) {
    validate_config(config);
    if (config.model == "paired")
        throw ConfigError("run_train handles model = standard|linearized; use run_train_pair");
    return config.float_width == "f32" ? run_train_impl<float>(config)
                                       : run_train_impl<double>(config);
}

PairResult run_train_pair(const ExperimentConfig& config) {
    validate_config(config);
    return config.float_width == "f32" ? run_train_pair_impl<float>(config)
                                       : run_train_pair_impl<double>(config);
}

EffrankResult run_effrank(const ExperimentConfig& config) {
    validate_config(config);
    return config.float_width == "f32" ? run_effrank_impl<float>(config)
                                       : run_effrank_impl<double>(config);
}

template double evaluate_accuracy<float>(const TensorT<float>&,
                                         std::span<const std::int32_t>);
template double evaluate_accuracy<double>(const TensorT<double>&,
                                          std::span<const std::int32_t>);

} // namespace lintrain
