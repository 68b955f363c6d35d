#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "helpers.hpp"
#include "mclnn/errors.hpp"
#include "mclnn/evaluate.hpp"
#include "mclnn/optim.hpp"
#include "oracles.hpp"

using namespace mclnn;

namespace {

// Single-scalar Adam convenience for the hand-worked examples.
double scalar_steps(double theta, double grad, int steps, const AdamHyper& hyper) {
    Eigen::VectorXd p(1), g(1), m(1), v(1);
    p << theta;
    g << grad;
    m.setZero();
    v.setZero();
    for (int s = 1; s <= steps; ++s) {
        adam_update_array(Eigen::Map<Eigen::VectorXd>(p.data(), 1),
                          Eigen::Map<Eigen::VectorXd>(g.data(), 1),
                          Eigen::Map<Eigen::VectorXd>(m.data(), 1),
                          Eigen::Map<Eigen::VectorXd>(v.data(), 1), s, hyper);
    }
    return p(0);
}

// prepare_fold keeps pointers into the dataset's clips, so the cache must
// stay alive as long as the splits are in use.
struct PreparedSynthetic {
    CachedDataset cache;
    TrainData data;
};

PreparedSynthetic prepared_synthetic(const std::vector<FeatureClip>& clips, int test_fold) {
    PreparedSynthetic prepared;
    prepared.cache.clips = clips;
    prepared.cache.fold_count = 4;
    prepared.cache.labels = {"band_low", "band_mid"};
    prepared.data =
        prepare_fold(prepared.cache, prepared.cache.labels, fold_split(4, test_fold));
    return prepared;
}

}  // namespace

TEST_CASE("cross entropy") {
    CHECK(cross_entropy(Eigen::VectorXd::Constant(10, 0.1), 3) ==
          doctest::Approx(std::log(10.0)));
    Eigen::VectorXd perfect = Eigen::VectorXd::Zero(4);
    perfect(2) = 1.0;
    CHECK(cross_entropy(perfect, 2) == doctest::Approx(0.0));
    Eigen::VectorXd quarter(4);
    quarter << 0.25, 0.25, 0.25, 0.25;
    CHECK(cross_entropy(quarter, 0) == doctest::Approx(1.386294).epsilon(1e-6));
    CHECK_THROWS_AS(cross_entropy(quarter, 4), std::out_of_range);
    CHECK_THROWS_AS(cross_entropy(quarter, -1), std::out_of_range);

    // Zero probability is clamped, not infinite.
    CHECK(cross_entropy(perfect, 0) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("adam hand-worked steps") {
    const AdamHyper hyper;  // 0.001 / 0.9 / 0.999 / 1e-8
    const double first = scalar_steps(0.0, 1.0, 1, hyper);
    CHECK(std::abs(first - (-0.000999999995)) < 1e-9);
    const double second = scalar_steps(0.0, 1.0, 2, hyper);
    CHECK(second == doctest::Approx(-0.002).epsilon(1e-6));
}

TEST_CASE("adam identity on zero gradient with zero moments") {
    testutil::RandomModelSpec spec;
    ModelParams params = testutil::random_model(spec, 21);
    ModelParams before = params;
    ModelParams grads = zeros_like(params);
    AdamState state = make_adam_state(params, AdamHyper{});
    adam_step(params, grads, state);
    CHECK(state.step_count == 1);

    auto now = parameter_views(params);
    auto was = parameter_views(before);
    for (std::size_t i = 0; i < now.size(); ++i) {
        for (Eigen::Index j = 0; j < now[i].size(); ++j) CHECK(now[i](j) == was[i](j));
    }
}

TEST_CASE("adam rejects non-finite gradients") {
    testutil::RandomModelSpec spec;
    ModelParams params = testutil::random_model(spec, 22);
    ModelParams grads = zeros_like(params);
    grads.output.bias(0) = std::numeric_limits<double>::quiet_NaN();
    AdamState state = make_adam_state(params, AdamHyper{});
    CHECK_THROWS_AS(adam_step(params, grads, state), DivergenceError);
}

TEST_CASE("a small-rate adam step does not increase the batch loss") {
    for (std::uint64_t seed : {31u, 32u, 33u}) {
        testutil::RandomModelSpec spec;
        spec.masked = seed % 2 == 0;
        ModelParams params = testutil::random_model(spec, seed);
        std::vector<LabeledSegment> batch(4);
        for (std::size_t b = 0; b < batch.size(); ++b) {
            batch[b].segment.frames =
                testutil::random_segment(spec, derive_seed(seed, "batch", b));
            batch[b].label = static_cast<int>(b % spec.classes);
        }
        const double before = batch_loss(batch, params, 1);
        GradientResult grad = model_gradients(batch, params, 1);
        AdamHyper hyper;
        hyper.learning_rate = 1e-6;
        AdamState state = make_adam_state(params, hyper);
        adam_step(params, grad.gradients, state);
        const double after = batch_loss(batch, params, 1);
        CHECK(after <= before + 1e-12);
    }
}

TEST_CASE("training overfits the separable synthetic set") {
    const auto clips = testutil::synthetic_clips();
    const ModelConfig config = testutil::tiny_config();
    const auto prepared = prepared_synthetic(clips, 1);
    const TrainData& data = prepared.data;

    const TrainRun run = train(config, data, 42);
    CHECK(run.best_val_accuracy >= 0.9);
    CHECK(run.best_epoch >= 1);
    CHECK(run.history.size() >= static_cast<std::size_t>(run.best_epoch));

    // The checkpoint really is the best recorded epoch.
    double best = 0.0;
    for (const auto& stat : run.history) best = std::max(best, stat.val_accuracy);
    CHECK(run.best_val_accuracy == best);

    // Training clips classify almost perfectly with the checkpoint.
    int correct = 0;
    for (const auto& pc : data.train) {
        if (predict_clip(*pc.clip, run.best_params, &data.standardizer, 4).class_index ==
            pc.label) {
            ++correct;
        }
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(data.train.size()) >= 0.99);
}

TEST_CASE("patience zero stops after exactly one epoch") {
    const auto clips = testutil::synthetic_clips(16, 30);
    ModelConfig config = testutil::tiny_config();
    config.patience = 0;
    config.max_epochs = 50;
    const TrainRun run = train(config, prepared_synthetic(clips, 1).data, 7);
    CHECK(run.history.size() == 1);
    CHECK(run.best_epoch == 1);
    CHECK(run.stop_reason == StopReason::PatienceExhausted);
}

TEST_CASE("max epochs is honored") {
    const auto clips = testutil::synthetic_clips(16, 30);
    ModelConfig config = testutil::tiny_config();
    config.max_epochs = 3;
    config.patience = 100;
    const TrainRun run = train(config, prepared_synthetic(clips, 1).data, 7);
    CHECK(run.history.size() == 3);
    CHECK(run.stop_reason == StopReason::MaxEpochs);
}

TEST_CASE("training twice with one seed is bit-identical") {
    const auto clips = testutil::synthetic_clips(16, 30);
    ModelConfig config = testutil::tiny_config();
    config.max_epochs = 4;
    config.patience = 100;
    TrainRun a = train(config, prepared_synthetic(clips, 2).data, 99);
    TrainRun b = train(config, prepared_synthetic(clips, 2).data, 99);
    CHECK(history_csv(a) == history_csv(b));
    auto va = parameter_views(a.best_params);
    auto vb = parameter_views(b.best_params);
    REQUIRE(va.size() == vb.size());
    for (std::size_t i = 0; i < va.size(); ++i) {
        for (Eigen::Index j = 0; j < va[i].size(); ++j) CHECK(va[i](j) == vb[i](j));
    }
}

TEST_CASE("empty splits are rejected") {
    const auto clips = testutil::synthetic_clips(8, 20);
    const ModelConfig config = testutil::tiny_config();
    const auto prepared = prepared_synthetic(clips, 1);
    TrainData no_train = prepared.data;
    no_train.train.clear();
    CHECK_THROWS_AS(train(config, no_train, 1), DataError);
    TrainData no_val = prepared.data;
    no_val.validation.clear();
    CHECK_THROWS_AS(train(config, no_val, 1), DataError);
}

TEST_CASE("history csv is one line per epoch") {
    const auto clips = testutil::synthetic_clips(8, 20);
    ModelConfig config = testutil::tiny_config();
    config.max_epochs = 2;
    config.patience = 100;
    const TrainRun run = train(config, prepared_synthetic(clips, 1).data, 3);
    const std::string csv = history_csv(run);
    CHECK(csv.starts_with("epoch,train_loss,val_accuracy\n"));
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("1,") != std::string::npos);
    CHECK(csv.find("2,") != std::string::npos);
}
