#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mclnn/cli.hpp"
#include "mclnn/config.hpp"
#include "mclnn/dataset.hpp"
#include "mclnn/features.hpp"
#include "mclnn/mask.hpp"
#include "mclnn/model_io.hpp"
#include "mclnn/wav.hpp"

namespace py = pybind11;

namespace {

// Thin inference handle over a saved container.
struct Model {
    mclnn::SavedModel saved;

    static Model load(const std::filesystem::path& path) { return {mclnn::load_model(path)}; }

    std::vector<std::string> classes() const { return saved.classes; }

    py::tuple predict_frames(const Eigen::MatrixXd& frames, Eigen::Index hop) const {
        mclnn::FeatureClip clip;
        clip.frames = frames;
        const mclnn::Standardizer* standardizer =
            saved.standardizer ? &*saved.standardizer : nullptr;
        const mclnn::VoteResult vote =
            mclnn::predict_clip(clip, saved.params, standardizer, hop);
        return py::make_tuple(saved.classes[static_cast<std::size_t>(vote.class_index)],
                              vote.mean_probs);
    }

    py::tuple predict_wav(const std::filesystem::path& path, Eigen::Index hop) const {
        const mclnn::AudioClip audio = mclnn::load_audio_file(path);
        return predict_frames(mclnn::log_mel_delta_frames(audio), hop);
    }
};

}  // namespace

PYBIND11_MODULE(_mclnn, m) {
    m.doc() = "Masked conditional neural networks for sound classification";

    m.def("window_width", &mclnn::window_width, py::arg("order"),
          "Frames one conditional window spans: 2*order + 1.");
    m.def("segment_width", &mclnn::segment_width, py::arg("order"), py::arg("layers"),
          py::arg("extra_frames"), "Segment frames a layer stack consumes: 2*order*layers + k.");

    m.def(
        "build_mask",
        [](int l, int e, int bandwidth, int overlap) {
            return mclnn::build_mask(l, e, mclnn::MaskSpec{bandwidth, overlap});
        },
        py::arg("l"), py::arg("e"), py::arg("bandwidth"), py::arg("overlap"),
        "Binary band mask as an l x e array of 0.0/1.0.");

    m.def(
        "resample",
        [](const std::vector<double>& samples, int from_rate, int to_rate) {
            return mclnn::resample(samples, from_rate, to_rate);
        },
        py::arg("samples"), py::arg("from_rate"), py::arg("to_rate"));

    m.def(
        "load_wav",
        [](const std::filesystem::path& path) {
            const mclnn::AudioClip clip = mclnn::load_audio_file(path);
            return py::make_tuple(clip.samples, clip.sample_rate);
        },
        py::arg("path"), "Decode a PCM16 WAV to mono 22050 Hz samples in [-1, 1].");

    m.def(
        "log_mel_delta",
        [](const std::vector<double>& samples, int sample_rate) {
            mclnn::AudioClip clip;
            clip.sample_rate = mclnn::kTargetSampleRate;
            clip.samples = sample_rate == mclnn::kTargetSampleRate
                               ? samples
                               : mclnn::resample(samples, sample_rate, mclnn::kTargetSampleRate);
            return mclnn::log_mel_delta_frames(clip);
        },
        py::arg("samples"), py::arg("sample_rate") = mclnn::kTargetSampleRate,
        "Feature frames (T x 120): 60 log-mel bands plus their temporal delta.");

    m.def(
        "parameter_count",
        [](const std::string& config_json) {
            const mclnn::ParameterCount count =
                mclnn::parameter_count(mclnn::parse_config(config_json));
            return py::make_tuple(count.excluding_slopes, count.including_slopes);
        },
        py::arg("config_json") = "{}",
        "Trainable scalars of a config: (excluding, including) PReLU slopes.");

    m.def(
        "vote",
        [](const std::vector<Eigen::VectorXd>& segment_probs) {
            const mclnn::VoteResult result = mclnn::vote(segment_probs);
            return py::make_tuple(result.class_index, result.mean_probs);
        },
        py::arg("segment_probs"),
        "Clip-level probability vote: (argmax index, mean distribution).");

    py::class_<Model>(m, "Model")
        .def_static("load", &Model::load, py::arg("path"))
        .def_property_readonly("classes", &Model::classes)
        .def("predict", &Model::predict_frames, py::arg("frames"), py::arg("hop") = 1,
             "Classify a clip given as raw (unstandardized) T x l feature frames.")
        .def("predict_wav", &Model::predict_wav, py::arg("path"), py::arg("hop") = 1);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) { return mclnn::cli::run(args); },
        py::arg("args"), "Invoke the command-line interface in-process; returns its exit code.");
}
