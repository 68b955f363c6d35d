#pragma once

#include <unistd.h>

#include <Eigen/Dense>
#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "mclnn/config.hpp"
#include "mclnn/features.hpp"
#include "mclnn/rng.hpp"

namespace testutil {

// Fresh directory under the system temp root; removed on destruction.
class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("mclnn-test-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

// Two-class separable clips: class 0 lifts feature columns 5-15, class 1
// columns 40-50, on top of uniform noise. Folds rotate round-robin.
inline std::vector<mclnn::FeatureClip> synthetic_clips(int clip_count = 40, int frames = 80,
                                                       int features = 120, int folds = 4,
                                                       std::uint64_t seed = 7) {
    std::vector<mclnn::FeatureClip> clips;
    for (int c = 0; c < clip_count; ++c) {
        mclnn::Rng rng(mclnn::derive_seed(seed, "synthetic-clip", static_cast<std::uint64_t>(c)));
        const int label = c % 2;
        mclnn::FeatureClip clip;
        clip.frames.resize(frames, features);
        for (int t = 0; t < frames; ++t) {
            for (int f = 0; f < features; ++f) clip.frames(t, f) = rng.uniform(-1.0, 1.0);
        }
        const int lo = label == 0 ? 5 : 40;
        clip.frames.middleCols(lo, 11).array() += 3.0;
        clip.clip_id = "clip-" + std::to_string(c);
        clip.label = label == 0 ? "band_low" : "band_mid";
        clip.fold = (c / 2) % folds + 1;
        clips.push_back(std::move(clip));
    }
    return clips;
}

// A model small enough to train in seconds against synthetic_clips.
inline mclnn::ModelConfig tiny_config() {
    mclnn::ModelConfig config = mclnn::default_config();
    config.layers = {{24, 1, true, {8, 0}}};
    config.extra_frames = 2;  // q = 4
    config.dense_widths = {16};
    config.classes = {"band_low", "band_mid"};
    config.classes_explicit = true;
    config.batch_size = 64;
    config.max_epochs = 200;
    config.patience = 20;
    config.train_hop = 2;
    config.eval_hop = 4;
    config.seed = 42;
    return config;
}

}  // namespace testutil
