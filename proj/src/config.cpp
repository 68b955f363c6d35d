#include "mclnn/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mclnn/errors.hpp"
#include "mclnn/rng.hpp"

namespace mclnn {

namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
}

void expect_keys(const json& obj, const std::string& path, const std::set<std::string>& known) {
    for (const auto& item : obj.items()) {
        if (!known.count(item.key())) fail(path.empty() ? item.key() : path + "." + item.key(),
                                           "unknown key");
    }
}

int get_int(const json& obj, const std::string& path, const std::string& key, int fallback,
            int min_value) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) fail(path + key, "expected an integer");
    const auto value = v.get<std::int64_t>();
    if (value < min_value) {
        fail(path + key, "must be >= " + std::to_string(min_value) + ", got " +
                             std::to_string(value));
    }
    return static_cast<int>(value);
}

double get_double(const json& obj, const std::string& path, const std::string& key,
                  double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) fail(path + key, "expected a number");
    return v.get<double>();
}

bool get_bool(const json& obj, const std::string& path, const std::string& key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) fail(path + key, "expected a boolean");
    return v.get<bool>();
}

LayerConfig parse_layer(const json& node, const std::string& path, const LayerConfig& fallback) {
    if (!node.is_object()) fail(path, "expected an object");
    expect_keys(node, path, {"nodes", "order", "masked", "bandwidth", "overlap"});
    LayerConfig layer = fallback;
    layer.nodes = get_int(node, path + ".", "nodes", fallback.nodes, 1);
    if (!node.contains("nodes") && fallback.nodes == 0) fail(path + ".nodes", "required");
    layer.order = get_int(node, path + ".", "order", fallback.order, 1);
    layer.masked = get_bool(node, path + ".", "masked", fallback.masked);
    layer.mask.bandwidth = get_int(node, path + ".", "bandwidth", fallback.mask.bandwidth, 1);
    if (node.contains("overlap")) {
        const json& v = node.at("overlap");
        if (!v.is_number_integer()) fail(path + ".overlap", "expected an integer");
        layer.mask.overlap = v.get<int>();  // may legitimately be negative
    }
    return layer;
}

void validate(const ModelConfig& config) {
    if (config.feature_length < 1) fail("feature_length", "must be >= 1");
    if (config.layers.empty()) fail("layers", "at least one layer required");
    int input_width = config.feature_length;
    for (std::size_t i = 0; i < config.layers.size(); ++i) {
        const LayerConfig& layer = config.layers[i];
        const std::string path = "layers[" + std::to_string(i) + "]";
        if (layer.nodes < 1) fail(path + ".nodes", "must be >= 1");
        if (layer.order < 1) fail(path + ".order", "must be >= 1");
        if (layer.order != config.layers.front().order) {
            fail(path + ".order", "all layers must share one order");
        }
        if (layer.masked) {
            if (layer.mask.bandwidth < 1) fail(path + ".bandwidth", "must be >= 1");
            if (layer.mask.bandwidth > input_width) {
                fail(path + ".bandwidth", "exceeds layer input width " +
                                              std::to_string(input_width));
            }
            if (layer.mask.overlap >= layer.mask.bandwidth) {
                fail(path + ".overlap",
                     "must be < bandwidth (" + std::to_string(layer.mask.overlap) + " >= " +
                         std::to_string(layer.mask.bandwidth) + ")");
            }
        }
        input_width = layer.nodes;
    }
    if (config.extra_frames < 1) fail("extra_frames", "must be >= 1");
    for (std::size_t i = 0; i < config.dense_widths.size(); ++i) {
        if (config.dense_widths[i] < 1) {
            fail("dense[" + std::to_string(i) + "]", "must be >= 1");
        }
    }
    if (config.classes.size() < 2) fail("classes", "need at least 2 class labels");
    std::set<std::string> unique(config.classes.begin(), config.classes.end());
    if (unique.size() != config.classes.size()) fail("classes", "labels must be unique");
    if (!(config.optimizer.learning_rate > 0)) fail("optimizer.learning_rate", "must be > 0");
    if (config.optimizer.beta1 < 0 || config.optimizer.beta1 >= 1) {
        fail("optimizer.beta1", "must be in [0, 1)");
    }
    if (config.optimizer.beta2 < 0 || config.optimizer.beta2 >= 1) {
        fail("optimizer.beta2", "must be in [0, 1)");
    }
    if (!(config.optimizer.epsilon > 0)) fail("optimizer.epsilon", "must be > 0");
    if (config.dropout < 0 || config.dropout >= 1) fail("dropout", "must be in [0, 1)");
}

}  // namespace

int ModelConfig::segment_frames() const {
    return segment_width(order(), static_cast<int>(layers.size()), extra_frames);
}

ModelConfig default_config() {
    ModelConfig config;
    config.layers = {
        {300, 15, true, {20, -5}},
        {200, 15, true, {5, 3}},
    };
    config.dense_widths = {100, 100};
    config.classes = {"air_conditioner", "car_horn",   "children_playing", "dog_bark",
                      "drilling",        "engine_idling", "gun_shot",      "jackhammer",
                      "siren",           "street_music"};
    return config;
}

ModelConfig parse_config(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");

    expect_keys(doc, "", {"schema", "feature_length", "layers", "extra_frames", "dense",
                          "classes", "optimizer", "batch_size", "max_epochs", "patience",
                          "dropout", "seed", "train_hop", "eval_hop"});

    const int schema = get_int(doc, "", "schema", kSchemaVersion, 1);
    if (schema != kSchemaVersion) {
        fail("schema", "unsupported version " + std::to_string(schema) + " (this build reads " +
                           std::to_string(kSchemaVersion) + ")");
    }

    ModelConfig config = default_config();
    config.feature_length = get_int(doc, "", "feature_length", config.feature_length, 1);

    if (doc.contains("layers")) {
        const json& layers = doc.at("layers");
        if (!layers.is_array() || layers.empty()) fail("layers", "expected a nonempty array");
        const bool shapes_match = layers.size() == config.layers.size();
        std::vector<LayerConfig> parsed;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            // Same-length overrides merge per layer; otherwise each entry
            // stands alone and must carry its own node count.
            LayerConfig fallback = shapes_match ? config.layers[i] : LayerConfig{};
            parsed.push_back(parse_layer(layers[i], "layers[" + std::to_string(i) + "]",
                                         fallback));
        }
        config.layers = std::move(parsed);
    }

    config.extra_frames = get_int(doc, "", "extra_frames", config.extra_frames, 1);

    if (doc.contains("dense")) {
        const json& dense = doc.at("dense");
        if (!dense.is_array()) fail("dense", "expected an array of widths");
        config.dense_widths.clear();
        for (std::size_t i = 0; i < dense.size(); ++i) {
            if (!dense[i].is_number_integer()) {
                fail("dense[" + std::to_string(i) + "]", "expected an integer");
            }
            config.dense_widths.push_back(dense[i].get<int>());
        }
    }

    if (doc.contains("classes")) {
        const json& classes = doc.at("classes");
        if (!classes.is_array()) fail("classes", "expected an array of labels");
        config.classes.clear();
        for (std::size_t i = 0; i < classes.size(); ++i) {
            if (!classes[i].is_string()) {
                fail("classes[" + std::to_string(i) + "]", "expected a string");
            }
            config.classes.push_back(classes[i].get<std::string>());
        }
        config.classes_explicit = true;
    }

    if (doc.contains("optimizer")) {
        const json& opt = doc.at("optimizer");
        if (!opt.is_object()) fail("optimizer", "expected an object");
        expect_keys(opt, "optimizer", {"learning_rate", "beta1", "beta2", "epsilon"});
        config.optimizer.learning_rate =
            get_double(opt, "optimizer.", "learning_rate", config.optimizer.learning_rate);
        config.optimizer.beta1 = get_double(opt, "optimizer.", "beta1", config.optimizer.beta1);
        config.optimizer.beta2 = get_double(opt, "optimizer.", "beta2", config.optimizer.beta2);
        config.optimizer.epsilon =
            get_double(opt, "optimizer.", "epsilon", config.optimizer.epsilon);
    }

    config.batch_size = get_int(doc, "", "batch_size", config.batch_size, 1);
    config.max_epochs = get_int(doc, "", "max_epochs", config.max_epochs, 1);
    config.patience = get_int(doc, "", "patience", config.patience, 0);
    config.dropout = get_double(doc, "", "dropout", config.dropout);
    if (doc.contains("seed")) {
        const json& v = doc.at("seed");
        if (!v.is_number_unsigned() && !v.is_number_integer()) fail("seed", "expected an integer");
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
            fail("seed", "must be >= 0");
        }
        config.seed = v.get<std::uint64_t>();
    }
    config.train_hop = get_int(doc, "", "train_hop", config.train_hop, 1);
    config.eval_hop = get_int(doc, "", "eval_hop", config.eval_hop, 1);

    validate(config);
    return config;
}

ModelConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

ParameterCount parameter_count(const ModelConfig& config) {
    ParameterCount count;
    std::int64_t weights = 0;
    std::int64_t slopes = 0;
    std::int64_t input = config.feature_length;
    for (const LayerConfig& layer : config.layers) {
        const std::int64_t d = window_width(layer.order);
        weights += d * input * layer.nodes + layer.nodes;
        slopes += layer.nodes;
        input = layer.nodes;
    }
    for (const int width : config.dense_widths) {
        weights += input * width + width;
        slopes += width;
        input = width;
    }
    weights += input * static_cast<std::int64_t>(config.classes.size()) +
               static_cast<std::int64_t>(config.classes.size());
    count.excluding_slopes = weights;
    count.including_slopes = weights + slopes;
    return count;
}

namespace {

void fill_uniform(Eigen::MatrixXd& matrix, double range, Rng& rng) {
    for (Eigen::Index i = 0; i < matrix.size(); ++i) {
        matrix(i) = (2.0 * rng.uniform() - 1.0) * range;
    }
}

}  // namespace

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
    validate(config);
    ModelParams params;
    params.extra_frames = config.extra_frames;
    params.dropout_rate = config.dropout;

    int input = config.feature_length;
    for (std::size_t li = 0; li < config.layers.size(); ++li) {
        const LayerConfig& layer = config.layers[li];
        const int d = window_width(layer.order);
        ConditionalLayerParams clnn;
        clnn.order = layer.order;
        // Scaled uniform init over the summed-window fan-in.
        const double range = std::sqrt(6.0 / (static_cast<double>(d) * input + layer.nodes));
        clnn.weights.resize(static_cast<std::size_t>(d));
        for (int u = 0; u < d; ++u) {
            Rng rng(derive_seed(seed, "init-clnn", static_cast<std::uint64_t>(li),
                                static_cast<std::uint64_t>(u)));
            clnn.weights[static_cast<std::size_t>(u)].resize(input, layer.nodes);
            fill_uniform(clnn.weights[static_cast<std::size_t>(u)], range, rng);
        }
        clnn.bias = Eigen::VectorXd::Zero(layer.nodes);
        clnn.prelu_slopes = Eigen::VectorXd::Constant(layer.nodes, 0.25);
        if (layer.masked) {
            clnn.mask = build_mask(input, layer.nodes, layer.mask);
            // Zero the hidden positions up front so a zero gradient keeps
            // them at exactly zero for the whole run.
            for (auto& w : clnn.weights) w = w.cwiseProduct(*clnn.mask);
        }
        params.clnn_layers.push_back(std::move(clnn));
        input = layer.nodes;
    }

    for (std::size_t di = 0; di < config.dense_widths.size(); ++di) {
        const int width = config.dense_widths[di];
        DenseLayerParams dense;
        const double range = std::sqrt(6.0 / (input + width));
        Rng rng(derive_seed(seed, "init-dense", static_cast<std::uint64_t>(di)));
        dense.weights.resize(input, width);
        fill_uniform(dense.weights, range, rng);
        dense.bias = Eigen::VectorXd::Zero(width);
        dense.prelu_slopes = Eigen::VectorXd::Constant(width, 0.25);
        params.dense_layers.push_back(std::move(dense));
        input = width;
    }

    const int classes = static_cast<int>(config.classes.size());
    const double range = std::sqrt(6.0 / (input + classes));
    Rng rng(derive_seed(seed, "init-output"));
    params.output.weights.resize(input, classes);
    fill_uniform(params.output.weights, range, rng);
    params.output.bias = Eigen::VectorXd::Zero(classes);
    return params;
}

}  // namespace mclnn
