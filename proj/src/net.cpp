#include "mclnn/net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mclnn/errors.hpp"
#include "mclnn/rng.hpp"

namespace mclnn {

namespace {

void check_layer(const ConditionalLayerParams& p) {
    if (p.order < 1) throw std::invalid_argument("conditional layer: order must be >= 1");
    const std::size_t d = static_cast<std::size_t>(2 * p.order + 1);
    if (p.weights.size() != d) {
        throw std::invalid_argument("conditional layer: expected " + std::to_string(d) +
                                    " weight matrices, got " + std::to_string(p.weights.size()));
    }
    const Eigen::Index l = p.weights.front().rows();
    const Eigen::Index e = p.weights.front().cols();
    for (const auto& w : p.weights) {
        if (w.rows() != l || w.cols() != e) {
            throw std::invalid_argument("conditional layer: weight matrices differ in shape");
        }
    }
    if (p.bias.size() != e || p.prelu_slopes.size() != e) {
        throw std::invalid_argument("conditional layer: bias/slopes length mismatch");
    }
    if (p.mask && (p.mask->rows() != l || p.mask->cols() != e)) {
        throw std::invalid_argument("conditional layer: mask shape mismatch");
    }
}

Eigen::MatrixXd effective_weight(const ConditionalLayerParams& p, std::size_t u) {
    return p.mask ? apply_mask(p.weights[u], *p.mask) : p.weights[u];
}

// PReLU over matrix rows with per-column slopes.
void prelu_inplace(Eigen::MatrixXd& pre, const Eigen::VectorXd& slopes) {
    for (Eigen::Index j = 0; j < pre.cols(); ++j) {
        const double a = slopes(j);
        for (Eigen::Index t = 0; t < pre.rows(); ++t) {
            if (pre(t, j) <= 0.0) pre(t, j) *= a;
        }
    }
}

// Per-example dropout stream; layer index keeps the two dense layers independent.
Eigen::VectorXd dropout_mask(Eigen::Index size, double rate, std::uint64_t seed,
                             std::size_t layer_index) {
    Eigen::VectorXd mask = Eigen::VectorXd::Ones(size);
    if (rate <= 0.0) return mask;
    Rng rng(derive_seed(seed, "dropout-layer", layer_index));
    const double keep = 1.0 - rate;
    for (Eigen::Index i = 0; i < size; ++i) {
        mask(i) = rng.uniform() < keep ? 1.0 / keep : 0.0;  // inverted dropout
    }
    return mask;
}

// Everything the backward pass needs from one example's forward pass.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> clnn_inputs;  // input to each conditional layer
    std::vector<Eigen::MatrixXd> clnn_pre;     // pre-activation per conditional layer
    Eigen::VectorXd pooled;
    std::vector<Eigen::VectorXd> dense_inputs;  // input to each dense layer
    std::vector<Eigen::VectorXd> dense_pre;
    std::vector<Eigen::VectorXd> dense_dropout;  // scaled keep masks
    Eigen::VectorXd output_input;
    Eigen::VectorXd probs;
};

Eigen::MatrixXd clnn_pre_activation(const Eigen::MatrixXd& input,
                                    const ConditionalLayerParams& p) {
    const int n = p.order;
    const Eigen::Index rows_out = input.rows() - 2 * n;
    Eigen::MatrixXd pre = Eigen::MatrixXd::Zero(rows_out, p.output_width());
    for (std::size_t u = 0; u < p.weights.size(); ++u) {
        pre.noalias() +=
            input.middleRows(static_cast<Eigen::Index>(u), rows_out) * effective_weight(p, u);
    }
    pre.rowwise() += p.bias.transpose();
    return pre;
}

ForwardCache forward_cached(const Segment& segment, const ModelParams& params, bool train_mode,
                            std::uint64_t dropout_seed) {
    if (segment.frames.rows() != params.segment_frames()) {
        throw std::invalid_argument("model_forward: segment has " +
                                    std::to_string(segment.frames.rows()) + " frames, expected " +
                                    std::to_string(params.segment_frames()));
    }

    ForwardCache cache;
    Eigen::MatrixXd h = segment.frames;
    for (const auto& layer : params.clnn_layers) {
        check_layer(layer);
        if (h.cols() != layer.input_width()) {
            throw std::invalid_argument("model_forward: layer input width mismatch");
        }
        cache.clnn_inputs.push_back(h);
        Eigen::MatrixXd pre = clnn_pre_activation(h, layer);
        cache.clnn_pre.push_back(pre);
        prelu_inplace(pre, layer.prelu_slopes);
        h = std::move(pre);
    }

    cache.pooled = global_mean_pool(h);

    Eigen::VectorXd v = cache.pooled;
    for (std::size_t i = 0; i < params.dense_layers.size(); ++i) {
        const auto& d = params.dense_layers[i];
        cache.dense_inputs.push_back(v);
        Eigen::VectorXd pre = d.weights.transpose() * v + d.bias;
        cache.dense_pre.push_back(pre);
        Eigen::VectorXd act = prelu(pre, d.prelu_slopes);
        Eigen::VectorXd drop = train_mode
                                   ? dropout_mask(act.size(), params.dropout_rate, dropout_seed, i)
                                   : Eigen::VectorXd::Ones(act.size());
        cache.dense_dropout.push_back(drop);
        v = act.cwiseProduct(drop);
    }

    cache.output_input = v;
    cache.probs = softmax(params.output.weights.transpose() * v + params.output.bias);
    return cache;
}

}  // namespace

int window_width(int order) {
    if (order < 1) throw std::invalid_argument("window_width: order must be >= 1");
    return 2 * order + 1;
}

int segment_width(int order, int layer_count, int extra_frames) {
    if (order < 1 || layer_count < 1 || extra_frames < 1) {
        throw std::invalid_argument("segment_width: order, layers, and extra frames must be >= 1");
    }
    return 2 * order * layer_count + extra_frames;
}

int ModelParams::segment_frames() const {
    if (clnn_layers.empty()) return extra_frames;
    return segment_width(order(), static_cast<int>(clnn_layers.size()), extra_frames);
}

Eigen::VectorXd prelu(const Eigen::VectorXd& x, const Eigen::VectorXd& slopes) {
    if (x.size() != slopes.size()) {
        throw std::invalid_argument("prelu: value/slope length mismatch");
    }
    Eigen::VectorXd out = x;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (out(i) <= 0.0) out(i) *= slopes(i);
    }
    return out;
}

Eigen::MatrixXd clnn_layer_forward(const Eigen::MatrixXd& input,
                                   const ConditionalLayerParams& params) {
    check_layer(params);
    if (input.cols() != params.input_width()) {
        throw std::invalid_argument("clnn_layer_forward: input width " +
                                    std::to_string(input.cols()) + " != weight rows " +
                                    std::to_string(params.input_width()));
    }
    if (input.rows() < 2 * params.order + 1) {
        throw std::invalid_argument("clnn_layer_forward: need at least " +
                                    std::to_string(2 * params.order + 1) + " frames, got " +
                                    std::to_string(input.rows()));
    }
    Eigen::MatrixXd pre = clnn_pre_activation(input, params);
    prelu_inplace(pre, params.prelu_slopes);
    return pre;
}

Eigen::VectorXd global_mean_pool(const Eigen::MatrixXd& frames) {
    if (frames.rows() < 1) throw std::invalid_argument("global_mean_pool: no frames");
    return frames.colwise().mean().transpose();
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    Eigen::VectorXd out = (logits.array() - m).exp();
    out /= out.sum();
    return out;
}

Eigen::VectorXd model_forward(const Segment& segment, const ModelParams& params, bool train_mode,
                              std::uint64_t dropout_seed) {
    return forward_cached(segment, params, train_mode, dropout_seed).probs;
}

ModelParams zeros_like(const ModelParams& params) {
    ModelParams z = params;
    for (auto& layer : z.clnn_layers) {
        for (auto& w : layer.weights) w.setZero();
        layer.bias.setZero();
        layer.prelu_slopes.setZero();
        layer.mask.reset();
    }
    for (auto& d : z.dense_layers) {
        d.weights.setZero();
        d.bias.setZero();
        d.prelu_slopes.setZero();
    }
    z.output.weights.setZero();
    z.output.bias.setZero();
    return z;
}

std::vector<Eigen::Map<Eigen::VectorXd>> parameter_views(ModelParams& params) {
    std::vector<Eigen::Map<Eigen::VectorXd>> views;
    auto add = [&views](Eigen::MatrixXd& m) {
        views.emplace_back(m.data(), m.size());
    };
    auto add_vec = [&views](Eigen::VectorXd& v) {
        views.emplace_back(v.data(), v.size());
    };
    for (auto& layer : params.clnn_layers) {
        for (auto& w : layer.weights) add(w);
        add_vec(layer.bias);
        add_vec(layer.prelu_slopes);
    }
    for (auto& d : params.dense_layers) {
        add(d.weights);
        add_vec(d.bias);
        add_vec(d.prelu_slopes);
    }
    add(params.output.weights);
    add_vec(params.output.bias);
    return views;
}

GradientResult model_gradients(const std::vector<LabeledSegment>& batch,
                               const ModelParams& params, std::uint64_t dropout_seed) {
    if (batch.empty()) throw std::invalid_argument("model_gradients: empty batch");
    const Eigen::Index classes = params.class_count();

    GradientResult result;
    result.gradients = zeros_like(params);
    ModelParams& g = result.gradients;
    double loss_sum = 0.0;

    for (std::size_t ex = 0; ex < batch.size(); ++ex) {
        const auto& [segment, label] = batch[ex];
        if (label < 0 || label >= classes) {
            throw std::invalid_argument("model_gradients: label " + std::to_string(label) +
                                        " out of range for " + std::to_string(classes) +
                                        " classes");
        }
        const std::uint64_t ex_seed = derive_seed(dropout_seed, "example", ex);
        ForwardCache cache = forward_cached(segment, params, true, ex_seed);

        loss_sum += -std::log(std::max(cache.probs(label), 1e-12));

        // Softmax + cross-entropy: dL/dlogits = p - onehot.
        Eigen::VectorXd dlogits = cache.probs;
        dlogits(label) -= 1.0;

        g.output.weights.noalias() += cache.output_input * dlogits.transpose();
        g.output.bias += dlogits;
        Eigen::VectorXd dv = params.output.weights * dlogits;

        for (std::size_t i = params.dense_layers.size(); i-- > 0;) {
            const auto& d = params.dense_layers[i];
            const Eigen::VectorXd& pre = cache.dense_pre[i];
            const Eigen::VectorXd dact = dv.cwiseProduct(cache.dense_dropout[i]);
            Eigen::VectorXd dpre(pre.size());
            for (Eigen::Index j = 0; j < pre.size(); ++j) {
                if (pre(j) > 0.0) {
                    dpre(j) = dact(j);
                } else {
                    dpre(j) = dact(j) * d.prelu_slopes(j);
                    g.dense_layers[i].prelu_slopes(j) += dact(j) * pre(j);
                }
            }
            g.dense_layers[i].weights.noalias() += cache.dense_inputs[i] * dpre.transpose();
            g.dense_layers[i].bias += dpre;
            dv = d.weights * dpre;
        }

        // Mean pooling spreads the gradient evenly over the k frames.
        const Eigen::Index k = params.extra_frames;
        Eigen::MatrixXd dh = (1.0 / static_cast<double>(k)) *
                             Eigen::VectorXd::Ones(k) * dv.transpose();

        for (std::size_t b = params.clnn_layers.size(); b-- > 0;) {
            const auto& layer = params.clnn_layers[b];
            auto& glayer = g.clnn_layers[b];
            const Eigen::MatrixXd& pre = cache.clnn_pre[b];
            const Eigen::MatrixXd& input = cache.clnn_inputs[b];
            const Eigen::Index rows_out = pre.rows();

            Eigen::MatrixXd dpre(rows_out, pre.cols());
            for (Eigen::Index j = 0; j < pre.cols(); ++j) {
                const double a = layer.prelu_slopes(j);
                double slope_grad = 0.0;
                for (Eigen::Index t = 0; t < rows_out; ++t) {
                    if (pre(t, j) > 0.0) {
                        dpre(t, j) = dh(t, j);
                    } else {
                        dpre(t, j) = dh(t, j) * a;
                        slope_grad += dh(t, j) * pre(t, j);
                    }
                }
                glayer.prelu_slopes(j) += slope_grad;
            }
            glayer.bias += dpre.colwise().sum().transpose();

            Eigen::MatrixXd dinput = Eigen::MatrixXd::Zero(input.rows(), input.cols());
            for (std::size_t u = 0; u < layer.weights.size(); ++u) {
                const Eigen::Index off = static_cast<Eigen::Index>(u);
                Eigen::MatrixXd dw = input.middleRows(off, rows_out).transpose() * dpre;
                if (layer.mask) dw = dw.cwiseProduct(*layer.mask);
                glayer.weights[u] += dw;
                dinput.middleRows(off, rows_out).noalias() +=
                    dpre * effective_weight(layer, u).transpose();
            }
            dh = std::move(dinput);
        }
    }

    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (auto view : parameter_views(g)) view *= inv_batch;
    result.mean_loss = loss_sum * inv_batch;
    return result;
}

double batch_loss(const std::vector<LabeledSegment>& batch, const ModelParams& params,
                  std::uint64_t dropout_seed) {
    if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
    double loss_sum = 0.0;
    for (std::size_t ex = 0; ex < batch.size(); ++ex) {
        const auto& [segment, label] = batch[ex];
        const std::uint64_t ex_seed = derive_seed(dropout_seed, "example", ex);
        const Eigen::VectorXd probs = model_forward(segment, params, true, ex_seed);
        loss_sum += -std::log(std::max(probs(label), 1e-12));
    }
    return loss_sum / static_cast<double>(batch.size());
}

}  // namespace mclnn
