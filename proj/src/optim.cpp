#include "mclnn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <utility>

#include "mclnn/errors.hpp"
#include "mclnn/rng.hpp"

namespace mclnn {

double cross_entropy(const Eigen::VectorXd& probabilities, int label) {
    if (label < 0 || label >= probabilities.size()) {
        throw std::out_of_range("cross_entropy: label " + std::to_string(label) +
                                " out of range for " + std::to_string(probabilities.size()) +
                                " classes");
    }
    return -std::log(std::max(probabilities(label), 1e-12));
}

AdamState make_adam_state(const ModelParams& params, const AdamHyper& hyper) {
    AdamState state;
    state.first_moments = zeros_like(params);
    state.second_moments = zeros_like(params);
    state.hyper = hyper;
    return state;
}

void adam_update_array(Eigen::Map<Eigen::VectorXd> params, Eigen::Map<Eigen::VectorXd> grads,
                       Eigen::Map<Eigen::VectorXd> m, Eigen::Map<Eigen::VectorXd> v,
                       std::int64_t step, const AdamHyper& hyper) {
    const double b1 = hyper.beta1;
    const double b2 = hyper.beta2;
    m = b1 * m + (1.0 - b1) * grads;
    v.array() = b2 * v.array() + (1.0 - b2) * grads.array().square();
    const double m_corr = 1.0 - std::pow(b1, static_cast<double>(step));
    const double v_corr = 1.0 - std::pow(b2, static_cast<double>(step));
    params.array() -=
        hyper.learning_rate * (m.array() / m_corr) / ((v.array() / v_corr).sqrt() + hyper.epsilon);
}

void adam_step(ModelParams& params, ModelParams& grads, AdamState& state) {
    auto param_views = parameter_views(params);
    auto grad_views = parameter_views(grads);
    auto m_views = parameter_views(state.first_moments);
    auto v_views = parameter_views(state.second_moments);
    if (param_views.size() != grad_views.size()) {
        throw std::invalid_argument("adam_step: parameter/gradient structure mismatch");
    }
    state.step_count += 1;
    for (std::size_t i = 0; i < param_views.size(); ++i) {
        if (param_views[i].size() != grad_views[i].size()) {
            throw std::invalid_argument("adam_step: array " + std::to_string(i) +
                                        " shape mismatch");
        }
        if (!grad_views[i].allFinite()) {
            throw DivergenceError("adam_step: non-finite gradient in array " + std::to_string(i));
        }
        adam_update_array(param_views[i], grad_views[i], m_views[i], v_views[i],
                          state.step_count, state.hyper);
    }
}

namespace {

// Lazy handle on one training segment; frames are materialized per batch so
// a hop-1 pass over a large cache never holds every window at once.
struct SegmentRef {
    int clip = 0;  // index into data.train
    Eigen::Index start = 0;
};

double validation_accuracy(const std::vector<PreparedClip>& clips, const ModelParams& params,
                           const Standardizer& standardizer, Eigen::Index hop) {
    int correct = 0;
    for (const PreparedClip& pc : clips) {
        const VoteResult result = predict_clip(*pc.clip, params, &standardizer, hop);
        if (result.class_index == pc.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(clips.size());
}

}  // namespace

TrainRun train(const ModelConfig& config, const TrainData& data, std::uint64_t seed) {
    if (data.train.empty()) throw DataError("train: no training clips");
    if (data.validation.empty()) throw DataError("train: no validation clips");
    for (const PreparedClip& pc : data.train) {
        if (pc.clip->frames.cols() != config.feature_length) {
            throw DataError("train: clip " + pc.clip->clip_id + " has " +
                            std::to_string(pc.clip->frames.cols()) + " features, config expects " +
                            std::to_string(config.feature_length));
        }
    }

    const Eigen::Index q = config.segment_frames();
    std::vector<SegmentRef> refs;
    for (std::size_t ci = 0; ci < data.train.size(); ++ci) {
        for (const Eigen::Index start :
             segment_starts(data.train[ci].clip->frames.rows(), q, config.train_hop)) {
            refs.push_back({static_cast<int>(ci), start});
        }
    }

    ModelParams params = init_model(config, seed);
    AdamState state = make_adam_state(params, config.optimizer);

    TrainRun run;
    run.best_val_accuracy = -1.0;
    int epochs_since_best = 0;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(refs);

        double loss_sum = 0.0;
        std::size_t example_count = 0;
        std::size_t batch_index = 0;
        for (std::size_t pos = 0; pos < refs.size(); pos += config.batch_size, ++batch_index) {
            const std::size_t take =
                std::min<std::size_t>(config.batch_size, refs.size() - pos);
            std::vector<LabeledSegment> batch(take);
            for (std::size_t i = 0; i < take; ++i) {
                const SegmentRef& ref = refs[pos + i];
                const PreparedClip& pc = data.train[static_cast<std::size_t>(ref.clip)];
                batch[i].segment.frames =
                    segment_frames(pc.clip->frames, ref.start, q, &data.standardizer);
                batch[i].segment.clip_index = ref.clip;
                batch[i].segment.start_frame = ref.start;
                batch[i].label = pc.label;
            }
            const std::uint64_t dropout_seed =
                derive_seed(seed, "dropout", static_cast<std::uint64_t>(epoch), batch_index);
            GradientResult grad = model_gradients(batch, params, dropout_seed);
            if (!std::isfinite(grad.mean_loss)) {
                throw DivergenceError("train: non-finite loss in epoch " + std::to_string(epoch));
            }
            loss_sum += grad.mean_loss * static_cast<double>(take);
            example_count += take;
            adam_step(params, grad.gradients, state);
        }

        EpochStat stat;
        stat.train_loss = loss_sum / static_cast<double>(example_count);
        stat.val_accuracy =
            validation_accuracy(data.validation, params, data.standardizer, config.eval_hop);
        run.history.push_back(stat);

        if (stat.val_accuracy > run.best_val_accuracy) {
            run.best_val_accuracy = stat.val_accuracy;
            run.best_epoch = epoch;
            run.best_params = params;
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
        }
        if (epochs_since_best >= config.patience) {
            run.stop_reason = StopReason::PatienceExhausted;
            return run;
        }
    }
    run.stop_reason = StopReason::MaxEpochs;
    return run;
}

std::string history_csv(const TrainRun& run) {
    std::ostringstream os;
    os << "epoch,train_loss,val_accuracy\n";
    os << std::setprecision(12);
    for (std::size_t i = 0; i < run.history.size(); ++i) {
        os << (i + 1) << ',' << run.history[i].train_loss << ',' << run.history[i].val_accuracy
           << '\n';
    }
    return os.str();
}

}  // namespace mclnn
