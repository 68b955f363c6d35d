#include "mclnn/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "mclnn/errors.hpp"
#include "mclnn/mask.hpp"

namespace mclnn {

namespace {

using nlohmann::json;

constexpr char kMagic[] = "MCLNN1\n";
constexpr std::size_t kMagicLen = 7;

static_assert(std::endian::native == std::endian::little,
              "model container assumes a little-endian host");

void append_f32(std::string& buf, double value) {
    const float f = static_cast<float>(value);
    char raw[4];
    std::memcpy(raw, &f, 4);
    buf.append(raw, 4);
}

void append_matrix(std::string& buf, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) append_f32(buf, m(r, c));
    }
}

void append_vector(std::string& buf, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) append_f32(buf, v(i));
}

class Reader {
  public:
    Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    void bytes(char* dst, std::size_t n) {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw DataError(source_ + ": truncated model file");
        }
    }

    std::uint32_t u32() {
        unsigned char raw[4];
        bytes(reinterpret_cast<char*>(raw), 4);
        return static_cast<std::uint32_t>(raw[0]) | (static_cast<std::uint32_t>(raw[1]) << 8) |
               (static_cast<std::uint32_t>(raw[2]) << 16) |
               (static_cast<std::uint32_t>(raw[3]) << 24);
    }

    double f32() {
        char raw[4];
        bytes(raw, 4);
        float f;
        std::memcpy(&f, raw, 4);
        return static_cast<double>(f);
    }

    Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f32();
        }
        return m;
    }

    Eigen::VectorXd vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = f32();
        return v;
    }

    bool at_end() {
        in_.peek();
        return in_.eof();
    }

    const std::string& source() const { return source_; }

  private:
    std::istream& in_;
    std::string source_;
};

json layer_header(const SavedModel& model) {
    json layers = json::array();
    Eigen::Index inputs = model.params.feature_width();
    for (const ConditionalLayerParams& layer : model.params.clnn_layers) {
        json node{{"kind", "conditional"},
                  {"inputs", inputs},
                  {"nodes", layer.output_width()},
                  {"order", layer.order}};
        if (layer.mask) {
            // The bitmap itself travels in the header as '0'/'1' row strings:
            // compact, human-inspectable, and the payload stays a plain run
            // of float arrays.
            json rows = json::array();
            for (Eigen::Index r = 0; r < layer.mask->rows(); ++r) {
                std::string row(static_cast<std::size_t>(layer.mask->cols()), '0');
                for (Eigen::Index c = 0; c < layer.mask->cols(); ++c) {
                    if ((*layer.mask)(r, c) != 0.0) row[static_cast<std::size_t>(c)] = '1';
                }
                rows.push_back(std::move(row));
            }
            node["mask_rows"] = std::move(rows);
        }
        layers.push_back(std::move(node));
        inputs = layer.output_width();
    }
    for (const DenseLayerParams& layer : model.params.dense_layers) {
        layers.push_back(json{{"kind", "dense"}, {"inputs", inputs}, {"nodes", layer.bias.size()}});
        inputs = layer.bias.size();
    }
    layers.push_back(json{{"kind", "output"},
                          {"inputs", inputs},
                          {"nodes", model.params.output.bias.size()}});
    return layers;
}

}  // namespace

void save_model(std::ostream& out, const SavedModel& model) {
    if (model.params.clnn_layers.empty()) {
        throw std::invalid_argument("save_model: model has no conditional layers");
    }
    if (static_cast<Eigen::Index>(model.classes.size()) != model.params.class_count()) {
        throw std::invalid_argument("save_model: class label count does not match output width");
    }

    json header;
    header["classes"] = model.classes;
    header["extra_frames"] = model.params.extra_frames;
    header["dropout"] = model.params.dropout_rate;
    header["layers"] = layer_header(model);
    header["standardizer"] = model.standardizer.has_value();

    const std::string header_text = header.dump();
    if (header_text.size() > 0xffffffffu) throw std::invalid_argument("save_model: header too large");

    std::string payload;
    for (const ConditionalLayerParams& layer : model.params.clnn_layers) {
        for (const Eigen::MatrixXd& w : layer.weights) append_matrix(payload, w);
        append_vector(payload, layer.bias);
        append_vector(payload, layer.prelu_slopes);
    }
    for (const DenseLayerParams& layer : model.params.dense_layers) {
        append_matrix(payload, layer.weights);
        append_vector(payload, layer.bias);
        append_vector(payload, layer.prelu_slopes);
    }
    append_matrix(payload, model.params.output.weights);
    append_vector(payload, model.params.output.bias);
    if (model.standardizer) {
        append_vector(payload, model.standardizer->means);
        append_vector(payload, model.standardizer->stds);
    }

    out.write(kMagic, kMagicLen);
    const std::uint32_t len = static_cast<std::uint32_t>(header_text.size());
    const char len_bytes[4] = {static_cast<char>(len & 0xff), static_cast<char>((len >> 8) & 0xff),
                               static_cast<char>((len >> 16) & 0xff),
                               static_cast<char>((len >> 24) & 0xff)};
    out.write(len_bytes, 4);
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("save_model: write failed");
}

void save_model(const std::filesystem::path& path, const SavedModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    save_model(out, model);
}

SavedModel load_model(std::istream& in, const std::string& source) {
    Reader reader(in, source);
    char magic[kMagicLen];
    reader.bytes(magic, kMagicLen);
    if (std::memcmp(magic, kMagic, kMagicLen) != 0) {
        throw DataError(source + ": not a model file (bad magic)");
    }
    const std::uint32_t header_len = reader.u32();
    std::string header_text(header_len, '\0');
    reader.bytes(header_text.data(), header_len);

    json header;
    try {
        header = json::parse(header_text);
    } catch (const json::parse_error& e) {
        throw DataError(source + ": bad model header: " + e.what());
    }

    SavedModel model;
    try {
        model.classes = header.at("classes").get<std::vector<std::string>>();
        model.params.extra_frames = header.at("extra_frames").get<int>();
        model.params.dropout_rate = header.at("dropout").get<double>();

        for (const json& node : header.at("layers")) {
            const std::string kind = node.at("kind").get<std::string>();
            const Eigen::Index inputs = node.at("inputs").get<Eigen::Index>();
            const Eigen::Index nodes = node.at("nodes").get<Eigen::Index>();
            if (inputs < 1 || nodes < 1) throw DataError(source + ": bad layer shape");
            if (kind == "conditional") {
                ConditionalLayerParams layer;
                layer.order = node.at("order").get<int>();
                if (layer.order < 1) throw DataError(source + ": bad layer order");
                const int d = window_width(layer.order);
                layer.weights.reserve(static_cast<std::size_t>(d));
                for (int u = 0; u < d; ++u) layer.weights.push_back(reader.matrix(inputs, nodes));
                layer.bias = reader.vector(nodes);
                layer.prelu_slopes = reader.vector(nodes);
                if (node.contains("mask_rows")) {
                    const auto rows = node.at("mask_rows").get<std::vector<std::string>>();
                    if (static_cast<Eigen::Index>(rows.size()) != inputs) {
                        throw DataError(source + ": mask row count mismatch");
                    }
                    BinaryMask mask = BinaryMask::Zero(inputs, nodes);
                    for (Eigen::Index r = 0; r < inputs; ++r) {
                        const std::string& row = rows[static_cast<std::size_t>(r)];
                        if (static_cast<Eigen::Index>(row.size()) != nodes) {
                            throw DataError(source + ": mask row length mismatch");
                        }
                        for (Eigen::Index c = 0; c < nodes; ++c) {
                            const char ch = row[static_cast<std::size_t>(c)];
                            if (ch != '0' && ch != '1') {
                                throw DataError(source + ": mask rows must be 0/1 strings");
                            }
                            mask(r, c) = ch == '1' ? 1.0 : 0.0;
                        }
                    }
                    layer.mask = std::move(mask);
                }
                model.params.clnn_layers.push_back(std::move(layer));
            } else if (kind == "dense") {
                DenseLayerParams layer;
                layer.weights = reader.matrix(inputs, nodes);
                layer.bias = reader.vector(nodes);
                layer.prelu_slopes = reader.vector(nodes);
                model.params.dense_layers.push_back(std::move(layer));
            } else if (kind == "output") {
                model.params.output.weights = reader.matrix(inputs, nodes);
                model.params.output.bias = reader.vector(nodes);
            } else {
                throw DataError(source + ": unknown layer kind `" + kind + "`");
            }
        }

        if (header.at("standardizer").get<bool>()) {
            const Eigen::Index l = model.params.feature_width();
            Standardizer s;
            s.means = reader.vector(l);
            s.stds = reader.vector(l);
            model.standardizer = std::move(s);
        }
    } catch (const json::exception& e) {
        throw DataError(source + ": bad model header: " + e.what());
    }

    if (model.params.clnn_layers.empty() || model.params.output.weights.size() == 0) {
        throw DataError(source + ": model header lists no usable layers");
    }
    if (static_cast<Eigen::Index>(model.classes.size()) != model.params.class_count()) {
        throw DataError(source + ": class list does not match output width");
    }
    if (!reader.at_end()) throw DataError(source + ": trailing bytes after payload");
    return model;
}

SavedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file " + path.string());
    return load_model(in, path.string());
}

}  // namespace mclnn
