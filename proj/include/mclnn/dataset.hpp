#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mclnn/features.hpp"
#include "mclnn/net.hpp"

namespace mclnn {

struct ManifestEntry {
    std::string path;
    int fold = 0;
    std::string label;
};

struct FoldManifest {
    std::vector<ManifestEntry> entries;
    std::vector<std::string> classes;        // sorted label strings
    std::map<std::string, int> class_index;  // label -> contiguous index
    int fold_count = 0;                      // highest fold id seen

    int index_of(const std::string& label) const;
};

// CSV with header `path,fold,label`. Labels are indexed alphabetically.
// Duplicate paths, missing columns, and folds < 1 are rejected.
FoldManifest parse_manifest(std::string_view csv);

struct FoldSplit {
    std::vector<int> train_folds;
    int validation_fold = 0;
    int test_fold = 0;
};

// Rotation: test = test_fold, validation = (test_fold mod F) + 1, train =
// the rest. Requires at least 3 folds, all nonempty.
FoldSplit fold_split(const FoldManifest& manifest, int test_fold);
FoldSplit fold_split(int fold_count, int test_fold);

// Windows of q consecutive frames at the given hop. A clip shorter than q
// yields one segment padded by repeating its final frame.
std::vector<Segment> extract_segments(const FeatureClip& clip, Eigen::Index q, Eigen::Index hop,
                                      int clip_index = -1);

// Start offsets only, for callers that materialize windows lazily. A short
// clip yields the single start 0 (with padding implied).
std::vector<Eigen::Index> segment_starts(Eigen::Index frame_count, Eigen::Index q,
                                         Eigen::Index hop);

// One q x l window starting at `start`, repeating the last frame when the
// clip runs out; standardized when a standardizer is given.
Eigen::MatrixXd segment_frames(const Eigen::MatrixXd& clip_frames, Eigen::Index start,
                               Eigen::Index q, const Standardizer* standardizer);

struct VoteResult {
    int class_index = 0;
    Eigen::VectorXd mean_probs;
};

// Probability voting: mean of the segment-level distributions, argmax with
// ties broken toward the lower class index.
VoteResult vote(const std::vector<Eigen::VectorXd>& segment_probs);

// Clip-level prediction: forward every segment at the given hop and vote.
VoteResult predict_clip(const FeatureClip& clip, const ModelParams& params,
                        const Standardizer* standardizer, Eigen::Index hop);

struct EvaluationReport {
    std::vector<double> fold_accuracy;
    double mean_accuracy = 0.0;
    Eigen::MatrixXi confusion;  // rows = true class, cols = predicted
    std::vector<std::string> classes;
};

// Plain-text confusion table, true classes as rows and predictions as columns.
std::string format_confusion(const EvaluationReport& report);

}  // namespace mclnn
