#include "mclnn/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"
#include "mclnn/errors.hpp"
#include "mclnn/rng.hpp"

namespace mclnn {

CachedDataset load_cache_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) {
        throw IoError("feature cache " + dir.string() + " is not a directory");
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".mclf") {
            files.push_back(entry.path());
        }
    }
    // Directory iteration order is unspecified; sort for reproducible clip order.
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("feature cache " + dir.string() + " holds no .mclf files");

    CachedDataset cache;
    std::set<std::string> labels;
    for (const auto& file : files) {
        FeatureClip clip = load_feature_clip(file);
        labels.insert(clip.label);
        cache.fold_count = std::max(cache.fold_count, clip.fold);
        cache.clips.push_back(std::move(clip));
    }
    cache.labels.assign(labels.begin(), labels.end());
    return cache;
}

std::vector<std::string> resolve_classes(const ModelConfig& config, const CachedDataset& cache) {
    if (!config.classes_explicit) return cache.labels;
    const std::set<std::string> allowed(config.classes.begin(), config.classes.end());
    for (const std::string& label : cache.labels) {
        if (!allowed.count(label)) {
            throw DataError("cache label `" + label + "` is not in the configured class list");
        }
    }
    return config.classes;
}

namespace {

int class_index(const std::vector<std::string>& classes, const std::string& label) {
    const auto it = std::find(classes.begin(), classes.end(), label);
    if (it == classes.end()) throw DataError("unknown class label: " + label);
    return static_cast<int>(it - classes.begin());
}

}  // namespace

TrainData prepare_fold(const CachedDataset& cache, const std::vector<std::string>& classes,
                       const FoldSplit& split) {
    const std::set<int> train_folds(split.train_folds.begin(), split.train_folds.end());
    TrainData data;
    std::vector<const FeatureClip*> train_clips;
    for (const FeatureClip& clip : cache.clips) {
        if (clip.fold == split.test_fold) continue;
        PreparedClip pc{&clip, class_index(classes, clip.label)};
        if (clip.fold == split.validation_fold) {
            data.validation.push_back(pc);
        } else if (train_folds.count(clip.fold)) {
            data.train.push_back(pc);
            train_clips.push_back(&clip);
        }
    }
    if (data.train.empty() || data.validation.empty()) {
        throw DataError("fold rotation (test " + std::to_string(split.test_fold) +
                        ") left an empty split");
    }
    data.standardizer = fit_standardizer(train_clips);
    return data;
}

FoldOutcome run_fold(const ModelConfig& config, const CachedDataset& cache,
                     const std::vector<std::string>& classes, int test_fold, std::uint64_t seed) {
    const FoldSplit split = fold_split(cache.fold_count, test_fold);

    ModelConfig fold_config = config;
    fold_config.classes = classes;  // output width follows the resolved label order

    TrainData data = prepare_fold(cache, classes, split);
    FoldOutcome outcome;
    outcome.test_fold = test_fold;
    outcome.run = train(fold_config, data, derive_seed(seed, "fold", static_cast<std::uint64_t>(
                                                                        test_fold)));
    outcome.standardizer = data.standardizer;

    const int n_classes = static_cast<int>(classes.size());
    outcome.confusion = Eigen::MatrixXi::Zero(n_classes, n_classes);
    int correct = 0;
    int total = 0;
    for (const FeatureClip& clip : cache.clips) {
        if (clip.fold != test_fold) continue;
        const int truth = class_index(classes, clip.label);
        const VoteResult vote = predict_clip(clip, outcome.run.best_params, &data.standardizer,
                                             fold_config.eval_hop);
        outcome.confusion(truth, vote.class_index) += 1;
        correct += vote.class_index == truth ? 1 : 0;
        ++total;
    }
    if (total == 0) throw DataError("fold " + std::to_string(test_fold) + " holds no clips");
    outcome.accuracy = static_cast<double>(correct) / static_cast<double>(total);
    return outcome;
}

EvaluationReport cross_validate(const ModelConfig& config, const CachedDataset& cache,
                                std::uint64_t seed, int jobs) {
    const std::vector<std::string> classes = resolve_classes(config, cache);
    if (cache.fold_count < 3) {
        throw DataError("cross-validation needs at least 3 folds, cache has " +
                        std::to_string(cache.fold_count));
    }
    jobs = std::max(1, jobs);

    std::vector<FoldOutcome> outcomes(static_cast<std::size_t>(cache.fold_count));
    std::atomic<int> next_fold{1};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        for (;;) {
            const int fold = next_fold.fetch_add(1);
            if (fold > cache.fold_count) return;
            try {
                outcomes[static_cast<std::size_t>(fold - 1)] =
                    run_fold(config, cache, classes, fold, seed);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const int n = std::min(jobs, cache.fold_count);
        pool.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    EvaluationReport report;
    report.classes = classes;
    const int n_classes = static_cast<int>(classes.size());
    report.confusion = Eigen::MatrixXi::Zero(n_classes, n_classes);
    double sum = 0.0;
    for (const FoldOutcome& outcome : outcomes) {
        report.fold_accuracy.push_back(outcome.accuracy);
        report.confusion += outcome.confusion;
        sum += outcome.accuracy;
    }
    report.mean_accuracy = sum / static_cast<double>(cache.fold_count);
    return report;
}

std::string report_json(const EvaluationReport& report) {
    nlohmann::json doc;
    doc["classes"] = report.classes;
    doc["fold_accuracy"] = report.fold_accuracy;
    doc["mean_accuracy"] = report.mean_accuracy;
    nlohmann::json confusion = nlohmann::json::array();
    for (Eigen::Index r = 0; r < report.confusion.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < report.confusion.cols(); ++c) {
            row.push_back(report.confusion(r, c));
        }
        confusion.push_back(std::move(row));
    }
    doc["confusion"] = std::move(confusion);
    return doc.dump(2) + "\n";
}

}  // namespace mclnn
