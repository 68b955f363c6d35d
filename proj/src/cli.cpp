#include "mclnn/cli.hpp"

#include <atomic>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "mclnn/config.hpp"
#include "mclnn/dataset.hpp"
#include "mclnn/errors.hpp"
#include "mclnn/evaluate.hpp"
#include "mclnn/features.hpp"
#include "mclnn/mask.hpp"
#include "mclnn/model_io.hpp"
#include "mclnn/optim.hpp"
#include "mclnn/rng.hpp"
#include "mclnn/wav.hpp"

namespace mclnn::cli {

namespace {

int default_jobs() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

ModelConfig config_or_default(const std::string& config_path) {
    return config_path.empty() ? default_config() : load_config(config_path);
}

struct FeaturizeArgs {
    std::string manifest;
    std::string audio_root;
    std::string cache;
    int jobs = default_jobs();
};

void do_featurize(const FeaturizeArgs& args) {
    std::ifstream in(args.manifest, std::ios::binary);
    if (!in) throw IoError("cannot open manifest " + args.manifest);
    std::ostringstream buf;
    buf << in.rdbuf();
    const FoldManifest manifest = parse_manifest(buf.str());

    const std::filesystem::path root = args.audio_root;
    const std::filesystem::path cache = args.cache;
    std::filesystem::create_directories(cache);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= manifest.entries.size()) return;
            {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (failure) return;
            }
            try {
                const ManifestEntry& entry = manifest.entries[i];
                const AudioClip audio = load_audio_file(root / entry.path);
                const FeatureClip clip =
                    log_mel_delta(audio, entry.path, entry.label, entry.fold);
                save_feature_clip(cache / cache_file_name(entry.path), clip);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    const int jobs = std::max(1, std::min<int>(args.jobs,
                                               static_cast<int>(manifest.entries.size())));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::cout << "featurized " << manifest.entries.size() << " clips into " << cache.string()
              << "\n";
}

struct TrainArgs {
    std::string config;
    std::string cache;
    int test_fold = 0;
    std::string out;
    std::string history;
    std::optional<std::uint64_t> seed;
};

void do_train(const TrainArgs& args) {
    ModelConfig config = config_or_default(args.config);
    if (args.seed) config.seed = *args.seed;

    const CachedDataset cache = load_cache_dir(args.cache);
    const std::vector<std::string> classes = resolve_classes(config, cache);
    const FoldSplit split = fold_split(cache.fold_count, args.test_fold);

    ModelConfig fold_config = config;
    fold_config.classes = classes;
    TrainData data = prepare_fold(cache, classes, split);

    // The same derivation cross-validation uses, so a standalone run of one
    // rotation reproduces that fold of an evaluate run bit for bit.
    const TrainRun run = train(fold_config, data,
                               derive_seed(config.seed, "fold",
                                           static_cast<std::uint64_t>(args.test_fold)));

    SavedModel model;
    model.params = run.best_params;
    model.classes = classes;
    model.standardizer = data.standardizer;
    save_model(std::filesystem::path(args.out), model);

    if (!args.history.empty()) {
        std::ofstream hist(args.history, std::ios::binary);
        if (!hist) throw IoError("cannot open " + args.history + " for writing");
        hist << history_csv(run);
    }

    std::cout << "trained on folds {";
    for (std::size_t i = 0; i < split.train_folds.size(); ++i) {
        std::cout << (i ? "," : "") << split.train_folds[i];
    }
    std::cout << "}, validated on fold " << split.validation_fold << "\n";
    std::cout << "best epoch " << run.best_epoch << " of " << run.history.size()
              << ", validation accuracy " << std::setprecision(6) << run.best_val_accuracy
              << (run.stop_reason == StopReason::PatienceExhausted ? " (patience exhausted)"
                                                                   : " (max epochs)")
              << "\n";
    std::cout << "model written to " << args.out << "\n";
}

struct EvaluateArgs {
    std::string config;
    std::string cache;
    std::string out;
    int jobs = default_jobs();
    std::optional<std::uint64_t> seed;
};

void do_evaluate(const EvaluateArgs& args) {
    ModelConfig config = config_or_default(args.config);
    if (args.seed) config.seed = *args.seed;

    const CachedDataset cache = load_cache_dir(args.cache);
    const EvaluationReport report = cross_validate(config, cache, config.seed, args.jobs);

    std::ofstream out(args.out, std::ios::binary);
    if (!out) throw IoError("cannot open " + args.out + " for writing");
    out << report_json(report);

    std::cout << std::setprecision(6);
    for (std::size_t i = 0; i < report.fold_accuracy.size(); ++i) {
        std::cout << "fold " << (i + 1) << " accuracy " << report.fold_accuracy[i] << "\n";
    }
    std::cout << "mean accuracy " << report.mean_accuracy << "\n\n";
    std::cout << format_confusion(report);
    std::cout << "report written to " << args.out << "\n";
}

struct PredictArgs {
    std::string model;
    std::string wav;
    int hop = 1;
};

void do_predict(const PredictArgs& args) {
    const SavedModel model = load_model(std::filesystem::path(args.model));
    const AudioClip audio = load_audio_file(args.wav);
    const FeatureClip clip = log_mel_delta(audio, args.wav);
    if (clip.frames.cols() != model.params.feature_width()) {
        throw DataError("feature width " + std::to_string(clip.frames.cols()) +
                        " does not match the model's " +
                        std::to_string(model.params.feature_width()));
    }
    const Standardizer* standardizer =
        model.standardizer ? &*model.standardizer : nullptr;
    const VoteResult vote = predict_clip(clip, model.params, standardizer, args.hop);

    std::cout << "predicted: " << model.classes[static_cast<std::size_t>(vote.class_index)]
              << "\n";
    std::cout << std::setprecision(9);
    for (std::size_t i = 0; i < model.classes.size(); ++i) {
        std::cout << model.classes[i] << " " << vote.mean_probs(static_cast<Eigen::Index>(i))
                  << "\n";
    }
}

struct DumpMaskArgs {
    int l = 0;
    int e = 0;
    int bw = 0;
    int ov = 0;
};

void do_dump_mask(const DumpMaskArgs& args) {
    const BinaryMask mask = build_mask(args.l, args.e, MaskSpec{args.bw, args.ov});
    for (Eigen::Index r = 0; r < mask.rows(); ++r) {
        std::string row(static_cast<std::size_t>(mask.cols()), '0');
        for (Eigen::Index c = 0; c < mask.cols(); ++c) {
            if (mask(r, c) != 0.0) row[static_cast<std::size_t>(c)] = '1';
        }
        std::cout << row << "\n";
    }
}

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"mclnn — masked conditional neural networks for sound classification"};
    app.require_subcommand(1);
    app.footer(
        "Exit codes:\n"
        "  0  success\n"
        "  1  usage error\n"
        "  2  configuration violation\n"
        "  3  file or I/O failure\n"
        "  4  malformed or inconsistent data\n"
        "  5  training diverged");

    FeaturizeArgs fz;
    auto* featurize = app.add_subcommand(
        "featurize", "Extract log-mel+delta features for every manifest entry");
    featurize->add_option("--manifest", fz.manifest, "CSV with header path,fold,label")
        ->required();
    featurize->add_option("--audio-root", fz.audio_root, "Directory manifest paths are relative to")
        ->required();
    featurize->add_option("--cache", fz.cache, "Output directory for .mclf feature files")
        ->required();
    featurize->add_option("--jobs", fz.jobs, "Worker threads (default: hardware cores)");
    featurize->callback([&] { do_featurize(fz); });

    TrainArgs tr;
    auto* train_cmd =
        app.add_subcommand("train", "Train one fold rotation and write the best checkpoint");
    train_cmd->add_option("--config", tr.config, "JSON config (omit for shipped defaults)");
    train_cmd->add_option("--cache", tr.cache, "Feature cache directory")->required();
    train_cmd->add_option("--test-fold", tr.test_fold, "Held-out fold id (1-based)")->required();
    train_cmd->add_option("--out", tr.out, "Model file to write")->required();
    train_cmd->add_option("--history", tr.history, "Optional CSV of per-epoch loss/accuracy");
    train_cmd->add_option("--seed", tr.seed, "Override the config seed");
    train_cmd->callback([&] { do_train(tr); });

    EvaluateArgs ev;
    auto* evaluate =
        app.add_subcommand("evaluate", "Cross-validate over every fold and write a report");
    evaluate->add_option("--config", ev.config, "JSON config (omit for shipped defaults)");
    evaluate->add_option("--cache", ev.cache, "Feature cache directory")->required();
    evaluate->add_option("--out", ev.out, "Report JSON to write")->required();
    evaluate->add_option("--jobs", ev.jobs, "Concurrent fold rotations (default: hardware cores)");
    evaluate->add_option("--seed", ev.seed, "Override the config seed");
    evaluate->callback([&] { do_evaluate(ev); });

    PredictArgs pr;
    auto* predict = app.add_subcommand("predict", "Classify one WAV clip with a trained model");
    predict->add_option("--model", pr.model, "Model file")->required();
    predict->add_option("--wav", pr.wav, "Input WAV (PCM16 mono/stereo)")->required();
    predict->add_option("--hop", pr.hop, "Segment hop in frames (default 1)")
        ->check(CLI::PositiveNumber);
    predict->callback([&] { do_predict(pr); });

    DumpMaskArgs dm;
    auto* dump_mask = app.add_subcommand("dump-mask", "Print a mask as 0/1 text rows");
    dump_mask->add_option("--l", dm.l, "Feature (row) count")->required();
    dump_mask->add_option("--e", dm.e, "Neuron (column) count")->required();
    dump_mask->add_option("--bw", dm.bw, "Bandwidth")->required();
    dump_mask->add_option("--ov", dm.ov, "Overlap (may be negative)")->required();
    dump_mask->callback([&] { do_dump_mask(dm); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    try {
        return dispatch(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int run(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.reserve(args.size() + 1);
    full.push_back("mclnn");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const std::string& s : full) argv.push_back(s.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace mclnn::cli
