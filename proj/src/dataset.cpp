#include "mclnn/dataset.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "mclnn/errors.hpp"

namespace mclnn {

namespace {

// Minimal quote-aware CSV row splitter.
std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

int FoldManifest::index_of(const std::string& label) const {
    const auto it = class_index.find(label);
    if (it == class_index.end()) throw DataError("unknown class label: " + label);
    return it->second;
}

FoldManifest parse_manifest(std::string_view csv) {
    std::istringstream in{std::string(csv)};
    std::string line;
    if (!std::getline(in, line)) throw DataError("manifest: empty document");

    const auto header = split_csv_row(trim(line));
    if (header.size() != 3 || trim(header[0]) != "path" || trim(header[1]) != "fold" ||
        trim(header[2]) != "label") {
        throw DataError("manifest: header must be `path,fold,label`");
    }

    FoldManifest manifest;
    std::set<std::string> seen_paths;
    std::set<std::string> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string trimmed = trim(line);
        if (trimmed.empty()) continue;
        const auto fields = split_csv_row(trimmed);
        if (fields.size() != 3) {
            throw DataError("manifest line " + std::to_string(line_no) + ": expected 3 columns");
        }
        ManifestEntry entry;
        entry.path = trim(fields[0]);
        entry.label = trim(fields[2]);
        if (entry.path.empty() || entry.label.empty()) {
            throw DataError("manifest line " + std::to_string(line_no) + ": empty path or label");
        }
        try {
            std::size_t pos = 0;
            entry.fold = std::stoi(trim(fields[1]), &pos);
            if (pos != trim(fields[1]).size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw DataError("manifest line " + std::to_string(line_no) + ": bad fold `" +
                            fields[1] + "`");
        }
        if (entry.fold < 1) {
            throw DataError("manifest line " + std::to_string(line_no) + ": fold " +
                            std::to_string(entry.fold) + " out of range");
        }
        if (!seen_paths.insert(entry.path).second) {
            throw DataError("manifest: duplicate path " + entry.path);
        }
        labels.insert(entry.label);
        manifest.fold_count = std::max(manifest.fold_count, entry.fold);
        manifest.entries.push_back(std::move(entry));
    }
    if (manifest.entries.empty()) throw DataError("manifest: no entries");

    manifest.classes.assign(labels.begin(), labels.end());  // std::set is sorted
    for (std::size_t i = 0; i < manifest.classes.size(); ++i) {
        manifest.class_index[manifest.classes[i]] = static_cast<int>(i);
    }
    return manifest;
}

FoldSplit fold_split(int fold_count, int test_fold) {
    if (fold_count < 3) {
        throw DataError("fold_split: need at least 3 folds, have " + std::to_string(fold_count));
    }
    if (test_fold < 1 || test_fold > fold_count) {
        throw DataError("fold_split: test fold " + std::to_string(test_fold) +
                        " out of range [1, " + std::to_string(fold_count) + "]");
    }
    FoldSplit split;
    split.test_fold = test_fold;
    split.validation_fold = (test_fold % fold_count) + 1;
    for (int f = 1; f <= fold_count; ++f) {
        if (f != split.test_fold && f != split.validation_fold) split.train_folds.push_back(f);
    }
    return split;
}

FoldSplit fold_split(const FoldManifest& manifest, int test_fold) {
    std::vector<int> counts(static_cast<std::size_t>(manifest.fold_count) + 1, 0);
    for (const auto& e : manifest.entries) counts[static_cast<std::size_t>(e.fold)]++;
    for (int f = 1; f <= manifest.fold_count; ++f) {
        if (counts[static_cast<std::size_t>(f)] == 0) {
            throw DataError("fold_split: fold " + std::to_string(f) + " is empty");
        }
    }
    return fold_split(manifest.fold_count, test_fold);
}

std::vector<Eigen::Index> segment_starts(Eigen::Index frame_count, Eigen::Index q,
                                         Eigen::Index hop) {
    if (q < 1 || hop < 1) throw std::invalid_argument("segment_starts: q and hop must be >= 1");
    std::vector<Eigen::Index> starts;
    if (frame_count < q) {
        starts.push_back(0);  // single padded segment
        return starts;
    }
    for (Eigen::Index s = 0; s + q <= frame_count; s += hop) starts.push_back(s);
    return starts;
}

Eigen::MatrixXd segment_frames(const Eigen::MatrixXd& clip_frames, Eigen::Index start,
                               Eigen::Index q, const Standardizer* standardizer) {
    Eigen::MatrixXd out(q, clip_frames.cols());
    const Eigen::Index avail = std::min(q, clip_frames.rows() - start);
    out.topRows(avail) = clip_frames.middleRows(start, avail);
    for (Eigen::Index t = avail; t < q; ++t) {
        out.row(t) = clip_frames.row(clip_frames.rows() - 1);
    }
    if (standardizer) standardize_inplace(out, *standardizer);
    return out;
}

std::vector<Segment> extract_segments(const FeatureClip& clip, Eigen::Index q, Eigen::Index hop,
                                      int clip_index) {
    std::vector<Segment> segments;
    for (const Eigen::Index start : segment_starts(clip.frames.rows(), q, hop)) {
        Segment seg;
        seg.frames = segment_frames(clip.frames, start, q, nullptr);
        seg.clip_index = clip_index;
        seg.start_frame = start;
        segments.push_back(std::move(seg));
    }
    return segments;
}

VoteResult vote(const std::vector<Eigen::VectorXd>& segment_probs) {
    if (segment_probs.empty()) throw std::invalid_argument("vote: no segment probabilities");
    const Eigen::Index classes = segment_probs.front().size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(classes);
    for (const auto& p : segment_probs) {
        if (p.size() != classes) throw std::invalid_argument("vote: probability length mismatch");
        mean += p;
    }
    mean /= static_cast<double>(segment_probs.size());

    VoteResult result;
    result.mean_probs = mean;
    result.class_index = 0;
    for (Eigen::Index i = 1; i < classes; ++i) {
        if (mean(i) > mean(result.class_index)) result.class_index = static_cast<int>(i);
    }
    return result;
}

VoteResult predict_clip(const FeatureClip& clip, const ModelParams& params,
                        const Standardizer* standardizer, Eigen::Index hop) {
    const Eigen::Index q = params.segment_frames();
    std::vector<Eigen::VectorXd> probs;
    for (const Eigen::Index start : segment_starts(clip.frames.rows(), q, hop)) {
        Segment seg;
        seg.frames = segment_frames(clip.frames, start, q, standardizer);
        seg.start_frame = start;
        probs.push_back(model_forward(seg, params, false));
    }
    return vote(probs);
}

std::string format_confusion(const EvaluationReport& report) {
    std::ostringstream os;
    std::size_t width = 5;
    for (const auto& c : report.classes) width = std::max(width, c.size() + 1);

    auto pad = [&](const std::string& s) {
        os << s;
        for (std::size_t i = s.size(); i < width; ++i) os << ' ';
    };

    pad("");
    for (const auto& c : report.classes) pad(c);
    os << '\n';
    for (Eigen::Index r = 0; r < report.confusion.rows(); ++r) {
        pad(report.classes[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < report.confusion.cols(); ++c) {
            pad(std::to_string(report.confusion(r, c)));
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace mclnn
