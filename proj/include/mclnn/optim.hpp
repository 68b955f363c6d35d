#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mclnn/config.hpp"
#include "mclnn/dataset.hpp"
#include "mclnn/net.hpp"

namespace mclnn {

// -ln(p[label]), clamped away from zero.
double cross_entropy(const Eigen::VectorXd& probabilities, int label);

struct AdamState {
    ModelParams first_moments;
    ModelParams second_moments;
    std::int64_t step_count = 0;
    AdamHyper hyper;
};

AdamState make_adam_state(const ModelParams& params, const AdamHyper& hyper);

// Bias-corrected update on one flat array; exposed for direct testing.
void adam_update_array(Eigen::Map<Eigen::VectorXd> params, Eigen::Map<Eigen::VectorXd> grads,
                       Eigen::Map<Eigen::VectorXd> m, Eigen::Map<Eigen::VectorXd> v,
                       std::int64_t step, const AdamHyper& hyper);

// One optimizer step over every trainable array. Throws DivergenceError on
// non-finite gradient entries.
void adam_step(ModelParams& params, ModelParams& grads, AdamState& state);

// A clip prepared for one fold rotation: features stay raw and shared, the
// standardizer is applied when segments are materialized.
struct PreparedClip {
    const FeatureClip* clip = nullptr;
    int label = 0;
};

struct TrainData {
    std::vector<PreparedClip> train;
    std::vector<PreparedClip> validation;
    Standardizer standardizer;
};

enum class StopReason { PatienceExhausted, MaxEpochs };

struct EpochStat {
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainRun {
    ModelParams best_params;
    std::vector<EpochStat> history;
    StopReason stop_reason = StopReason::MaxEpochs;
    int best_epoch = 0;  // 1-based
    double best_val_accuracy = 0.0;
};

// Mini-batch training with per-epoch validation through clip voting and
// early stopping on validation accuracy (ties keep the earliest epoch).
TrainRun train(const ModelConfig& config, const TrainData& data, std::uint64_t seed);

std::string history_csv(const TrainRun& run);

}  // namespace mclnn
