#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "mclnn/wav.hpp"

namespace mclnn {

inline constexpr int kFftSize = 1024;
inline constexpr int kHopSize = 512;
inline constexpr int kMelBins = 60;
inline constexpr int kFeatureLength = 2 * kMelBins;  // log-mel + delta
inline constexpr int kDeltaHalfWidth = 4;            // 9-frame regression filter

struct FeatureClip {
    Eigen::MatrixXd frames;  // T x 120, columns 0-59 log-mel, 60-119 delta
    std::string clip_id;
    std::string label;
    int fold = 0;
};

struct Standardizer {
    Eigen::VectorXd means;  // length 120
    Eigen::VectorXd stds;   // length 120, floored at 1e-8
};

// Centered (reflect-padded) power spectrogram, Hann window 1024, hop 512.
// Returns T x 513 with T = 1 + floor(N / 512).
Eigen::MatrixXd power_spectrogram(const std::vector<double>& samples);

// 60 unit-peak triangular filters on the HTK mel scale over [0, rate/2],
// as a 513 x 60 matrix applied to power spectra.
Eigen::MatrixXd mel_filterbank(int sample_rate = kTargetSampleRate);

// 9-frame linear-regression temporal derivative with replicated edges.
Eigen::MatrixXd delta_filter(const Eigen::MatrixXd& frames);

// Full pipeline: power spectrogram -> mel -> 10*log10 with 1e-10 floor ->
// delta -> concatenation to 120 columns.
Eigen::MatrixXd log_mel_delta_frames(const AudioClip& clip);

FeatureClip log_mel_delta(const AudioClip& clip, std::string clip_id = {},
                          std::string label = {}, int fold = 0);

// Per-column mean and population standard deviation over every frame of the
// given clips. Callers must pass training-fold clips only.
Standardizer fit_standardizer(const std::vector<const FeatureClip*>& training_clips);

FeatureClip apply_standardizer(const FeatureClip& clip, const Standardizer& s);

// In-place variant used when materializing segments.
void standardize_inplace(Eigen::MatrixXd& frames, const Standardizer& s);

// Feature cache: one MCLFEAT1 file per clip, float32 payload.
void save_feature_clip(const std::filesystem::path& path, const FeatureClip& clip);
FeatureClip load_feature_clip(const std::filesystem::path& path);

// Stable cache file name for a manifest path.
std::string cache_file_name(const std::string& clip_id);

}  // namespace mclnn
