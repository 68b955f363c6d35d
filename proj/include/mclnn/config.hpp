#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mclnn/mask.hpp"
#include "mclnn/net.hpp"

namespace mclnn {

struct LayerConfig {
    int nodes = 0;
    int order = 15;
    bool masked = true;
    MaskSpec mask;  // meaningful when masked
};

struct AdamHyper {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Complete hyperparameter record. The shipped defaults are the 10-class
// urban-sound configuration: two masked conditional layers of 300 and 200
// nodes (bands 20/-5 and 5/3, order 15), five pooled frames, and two dense
// layers of 100 neurons.
struct ModelConfig {
    int feature_length = 120;
    std::vector<LayerConfig> layers;
    int extra_frames = 5;  // k
    std::vector<int> dense_widths;
    std::vector<std::string> classes;
    bool classes_explicit = false;  // set when the document pins "classes"
    AdamHyper optimizer;
    int batch_size = 200;
    int max_epochs = 200;
    int patience = 20;
    double dropout = 0.5;
    std::uint64_t seed = 42;
    int train_hop = 1;
    int eval_hop = 1;

    int order() const { return layers.empty() ? 0 : layers.front().order; }
    int segment_frames() const;
};

ModelConfig default_config();

// Parses a JSON document and merges it over the defaults. Unknown keys and
// invariant violations raise ConfigError with a path-qualified message.
ModelConfig parse_config(std::string_view json_text);
ModelConfig load_config(const std::filesystem::path& path);

// Trainable scalar count; PReLU slopes are reported separately because
// conventions differ on whether they are counted.
struct ParameterCount {
    std::int64_t excluding_slopes = 0;
    std::int64_t including_slopes = 0;
};
ParameterCount parameter_count(const ModelConfig& config);

// Builds the parameter structure: masked scaled-uniform weights, zero biases,
// PReLU slopes at 0.25.
ModelParams init_model(const ModelConfig& config, std::uint64_t seed);

}  // namespace mclnn
