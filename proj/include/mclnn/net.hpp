#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mclnn/mask.hpp"

namespace mclnn {

// d = 2n + 1 frames per window.
int window_width(int order);

// q = (2n)m + k frames per segment for an m-layer stack.
int segment_width(int order, int layer_count, int extra_frames);

// One conditional layer: a window of 2n+1 input frames, each multiplied by
// its own weight matrix, summed, biased, and passed through PReLU. weights[i]
// holds the matrix for window offset u = i - order.
struct ConditionalLayerParams {
    int order = 1;
    std::vector<Eigen::MatrixXd> weights;  // 2n+1 matrices, l_in x e
    Eigen::VectorXd bias;                  // e
    Eigen::VectorXd prelu_slopes;          // e
    std::optional<BinaryMask> mask;        // l_in x e; absent = plain CLNN

    Eigen::Index input_width() const { return weights.empty() ? 0 : weights.front().rows(); }
    Eigen::Index output_width() const { return weights.empty() ? 0 : weights.front().cols(); }
};

struct DenseLayerParams {
    Eigen::MatrixXd weights;  // in x out
    Eigen::VectorXd bias;
    Eigen::VectorXd prelu_slopes;
};

struct OutputLayerParams {
    Eigen::MatrixXd weights;  // in x classes
    Eigen::VectorXd bias;
};

struct ModelParams {
    std::vector<ConditionalLayerParams> clnn_layers;
    std::vector<DenseLayerParams> dense_layers;
    OutputLayerParams output;
    int extra_frames = 1;       // k, pooled before the dense stage
    double dropout_rate = 0.5;  // applied to dense activations in train mode

    int order() const { return clnn_layers.empty() ? 0 : clnn_layers.front().order; }
    int segment_frames() const;
    Eigen::Index feature_width() const {
        return clnn_layers.empty() ? 0 : clnn_layers.front().input_width();
    }
    Eigen::Index class_count() const { return output.weights.cols(); }
};

struct Segment {
    Eigen::MatrixXd frames;  // q x l
    int clip_index = -1;
    Eigen::Index start_frame = 0;
};

Eigen::VectorXd prelu(const Eigen::VectorXd& x, const Eigen::VectorXd& slopes);

// Forward pass of one conditional layer over p input frames; the output has
// 2n fewer rows (only central frames have a full window).
Eigen::MatrixXd clnn_layer_forward(const Eigen::MatrixXd& input,
                                   const ConditionalLayerParams& params);

// Feature-wise mean over the k remaining frames.
Eigen::VectorXd global_mean_pool(const Eigen::MatrixXd& frames);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// Full model: m conditional layers, mean pooling, dense PReLU layers
// (dropout active only in train mode), softmax. dropout_seed selects the
// dropout stream; it is ignored at inference.
Eigen::VectorXd model_forward(const Segment& segment, const ModelParams& params,
                              bool train_mode, std::uint64_t dropout_seed = 0);

// Gradients of mean categorical cross-entropy over a batch, mirroring the
// parameter shapes. Masked weight positions get exactly zero gradient.
struct GradientResult {
    ModelParams gradients;
    double mean_loss = 0.0;
};

struct LabeledSegment {
    Segment segment;
    int label = 0;
};

GradientResult model_gradients(const std::vector<LabeledSegment>& batch,
                               const ModelParams& params, std::uint64_t dropout_seed);

// Mean loss over a batch under the same dropout streams model_gradients uses.
double batch_loss(const std::vector<LabeledSegment>& batch, const ModelParams& params,
                  std::uint64_t dropout_seed);

// A zeroed parameter structure with the same shapes (gradient / moment
// accumulators).
ModelParams zeros_like(const ModelParams& params);

// Flat views over every trainable array in serialization order: per
// conditional layer W_-n..W_n, bias, slopes; per dense layer W, bias, slopes;
// output W, bias.
std::vector<Eigen::Map<Eigen::VectorXd>> parameter_views(ModelParams& params);

}  // namespace mclnn
