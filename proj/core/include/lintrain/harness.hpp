#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lintrain/config.hpp"
#include "lintrain/csv.hpp"
#include "lintrain/diagnostics.hpp"
#include "lintrain/tensor.hpp"

namespace lintrain {

struct EpochStat {
    std::int64_t epoch; // 0 = evaluation at initialization
    std::string split;  // "train" / "test"
    double loss = 0.0;
    double accuracy = 0.0;
};

struct RunRecord {
    std::string model_tag; // "standard" / "linearized"
    std::vector<EpochStat> epochs;
    diagnostics::TrajectoryLog trajectory; // empty for single runs
    std::uint64_t w0_checksum = 0;
    std::uint64_t final_checksum = 0; // trained vector: w for standard, u for linearized
    std::string config_echo;
};

struct PairResult {
    RunRecord standard_run;
    RunRecord linearized_run;
    diagnostics::DivergenceResult divergence;
};

struct EffrankRow {
    std::int64_t width_factor = 1;
    std::int64_t examples = 0;
    double effective_rank = 0.0;
};

struct EffrankResult {
    std::vector<EffrankRow> rows;
};

/// Trains one model (standard or linearized per config.model); writes
/// epochs.csv under config.out_dir. Epoch records run from 0 (initial
/// evaluation) through config.epochs, on both splits.
RunRecord run_train(const ExperimentConfig& config);

/// Trains the network and its tangent model side by side from the same w0,
/// consuming identical minibatch sequences step for step; logs the
/// correct-class probe outputs of both models on the same cadence. Writes
/// epochs_standard.csv, epochs_linearized.csv, trajectory.csv and
/// divergence.csv.
PairResult run_train_pair(const ExperimentConfig& config);

/// For each width in config.widths: fresh w0 from the config seed, embed the
/// first config.effrank_m training examples, compute the effective rank of
/// the feature matrix. Writes effrank.csv.
EffrankResult run_effrank(const ExperimentConfig& config);

/// Fraction of rows whose argmax (ties to the lowest index; equivalent to the
/// closest one-hot vector) equals the label.
template <typename T>
double evaluate_accuracy(const TensorT<T>& outputs, std::span<const std::int32_t> labels);

std::uint64_t fnv1a64(const void* data, std::size_t bytes);

const csv::Schema& epochs_schema();     // epoch,split,loss,accuracy
const csv::Schema& trajectory_schema(); // step,probe_id,model,output_value
const csv::Schema& effrank_schema();    // width_factor,m,effective_rank
const csv::Schema& divergence_schema(); // probe_id,max_abs_dev,first_step_over_threshold

} // namespace lintrain
