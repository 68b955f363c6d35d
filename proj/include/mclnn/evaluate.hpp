#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mclnn/config.hpp"
#include "mclnn/dataset.hpp"
#include "mclnn/model_io.hpp"
#include "mclnn/optim.hpp"

namespace mclnn {

// A feature cache pulled back into memory: every clip plus the sorted label
// set and the highest fold id seen.
struct CachedDataset {
    std::vector<FeatureClip> clips;
    std::vector<std::string> labels;
    int fold_count = 0;
};

CachedDataset load_cache_dir(const std::filesystem::path& dir);

// The label order a model trained on this cache will use: the config's list
// when one was pinned there (cache labels must be covered by it), otherwise
// the cache's own sorted labels.
std::vector<std::string> resolve_classes(const ModelConfig& config, const CachedDataset& cache);

// Builds one fold rotation: training and validation clip lists with labels
// resolved to indices, and a standardizer fitted on the training folds only.
TrainData prepare_fold(const CachedDataset& cache, const std::vector<std::string>& classes,
                       const FoldSplit& split);

struct FoldOutcome {
    int test_fold = 0;
    double accuracy = 0.0;
    Eigen::MatrixXi confusion;  // true rows, predicted columns
    TrainRun run;
    Standardizer standardizer;
};

// Trains one rotation and scores the held-out fold by clip voting.
FoldOutcome run_fold(const ModelConfig& config, const CachedDataset& cache,
                     const std::vector<std::string>& classes, int test_fold, std::uint64_t seed);

// Full rotation over every fold; `jobs` folds run concurrently, results merge
// in fold order so the report does not depend on scheduling.
EvaluationReport cross_validate(const ModelConfig& config, const CachedDataset& cache,
                                std::uint64_t seed, int jobs = 1);

// Report serialization: per-fold accuracies, mean, confusion matrix, labels.
std::string report_json(const EvaluationReport& report);

}  // namespace mclnn
