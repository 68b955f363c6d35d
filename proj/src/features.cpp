#include "mclnn/features.hpp"

#include <bit>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>

#include "mclnn/errors.hpp"

namespace mclnn {

namespace {

// Iterative radix-2 FFT; kFftSize is a fixed power of two.
void fft_inplace(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Reflect index into [0, n) without repeating the edge sample.
std::int64_t reflect_index(std::int64_t i, std::int64_t n) {
    if (n == 1) return 0;
    const std::int64_t period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    const std::uint32_t n = read_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    return s;
}

constexpr char kFeatMagic[8] = {'M', 'C', 'L', 'F', 'E', 'A', 'T', '1'};

}  // namespace

Eigen::MatrixXd power_spectrogram(const std::vector<double>& samples) {
    const std::int64_t n = static_cast<std::int64_t>(samples.size());
    if (n < 1) throw DataError("power_spectrogram: empty input");

    const Eigen::Index frames = 1 + static_cast<Eigen::Index>(n / kHopSize);
    const Eigen::Index bins = kFftSize / 2 + 1;

    // Periodic Hann window.
    std::vector<double> window(kFftSize);
    for (int i = 0; i < kFftSize; ++i) {
        window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / kFftSize));
    }

    Eigen::MatrixXd out(frames, bins);
    std::vector<std::complex<double>> buf(kFftSize);
    for (Eigen::Index t = 0; t < frames; ++t) {
        const std::int64_t start = static_cast<std::int64_t>(t) * kHopSize - kFftSize / 2;
        for (int i = 0; i < kFftSize; ++i) {
            const double s = samples[static_cast<std::size_t>(reflect_index(start + i, n))];
            buf[static_cast<std::size_t>(i)] = s * window[static_cast<std::size_t>(i)];
        }
        fft_inplace(buf);
        for (Eigen::Index b = 0; b < bins; ++b) {
            out(t, b) = std::norm(buf[static_cast<std::size_t>(b)]);
        }
    }
    return out;
}

Eigen::MatrixXd mel_filterbank(int sample_rate) {
    const Eigen::Index bins = kFftSize / 2 + 1;
    const double f_max = sample_rate / 2.0;
    const double mel_max = hz_to_mel(f_max);

    std::vector<double> edges(kMelBins + 2);
    for (int i = 0; i < kMelBins + 2; ++i) {
        edges[static_cast<std::size_t>(i)] = mel_to_hz(mel_max * i / (kMelBins + 1));
    }

    Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(bins, kMelBins);
    for (Eigen::Index b = 0; b < bins; ++b) {
        const double freq = static_cast<double>(b) * sample_rate / kFftSize;
        for (int j = 0; j < kMelBins; ++j) {
            const double lo = edges[static_cast<std::size_t>(j)];
            const double mid = edges[static_cast<std::size_t>(j + 1)];
            const double hi = edges[static_cast<std::size_t>(j + 2)];
            double w = 0.0;
            if (freq >= lo && freq <= hi) {
                w = freq <= mid ? (mid > lo ? (freq - lo) / (mid - lo) : 1.0)
                                : (hi > mid ? (hi - freq) / (hi - mid) : 1.0);
            }
            fb(b, j) = std::max(0.0, w);
        }
    }
    return fb;
}

Eigen::MatrixXd delta_filter(const Eigen::MatrixXd& frames) {
    const Eigen::Index t_count = frames.rows();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(t_count, frames.cols());
    double denom = 0.0;
    for (int d = 1; d <= kDeltaHalfWidth; ++d) denom += 2.0 * d * d;
    auto clamp_row = [&](Eigen::Index t) { return std::clamp<Eigen::Index>(t, 0, t_count - 1); };
    for (Eigen::Index t = 0; t < t_count; ++t) {
        for (int d = 1; d <= kDeltaHalfWidth; ++d) {
            out.row(t) += d * (frames.row(clamp_row(t + d)) - frames.row(clamp_row(t - d)));
        }
        out.row(t) /= denom;
    }
    return out;
}

Eigen::MatrixXd log_mel_delta_frames(const AudioClip& clip) {
    if (clip.sample_rate != kTargetSampleRate) {
        throw DataError("log_mel_delta: clip must be at 22050 Hz");
    }
    const Eigen::MatrixXd power = power_spectrogram(clip.samples);
    static const Eigen::MatrixXd fb = mel_filterbank(kTargetSampleRate);
    Eigen::MatrixXd mel = power * fb;  // T x 60
    mel = (mel.array().max(1e-10).log10() * 10.0).matrix();
    const Eigen::MatrixXd delta = delta_filter(mel);

    Eigen::MatrixXd out(mel.rows(), kFeatureLength);
    out.leftCols(kMelBins) = mel;
    out.rightCols(kMelBins) = delta;
    return out;
}

FeatureClip log_mel_delta(const AudioClip& clip, std::string clip_id, std::string label,
                          int fold) {
    FeatureClip fc;
    fc.frames = log_mel_delta_frames(clip);
    fc.clip_id = clip_id.empty() ? clip.source : std::move(clip_id);
    fc.label = std::move(label);
    fc.fold = fold;
    return fc;
}

Standardizer fit_standardizer(const std::vector<const FeatureClip*>& training_clips) {
    if (training_clips.empty()) {
        throw std::invalid_argument("fit_standardizer: no training clips");
    }
    const Eigen::Index cols = training_clips.front()->frames.cols();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(cols);
    Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(cols);
    std::int64_t count = 0;
    for (const FeatureClip* clip : training_clips) {
        if (clip->frames.cols() != cols) {
            throw std::invalid_argument("fit_standardizer: inconsistent feature widths");
        }
        sum += clip->frames.colwise().sum().transpose();
        sum_sq += clip->frames.array().square().colwise().sum().matrix().transpose();
        count += clip->frames.rows();
    }
    Standardizer s;
    s.means = sum / static_cast<double>(count);
    const Eigen::VectorXd var =
        (sum_sq / static_cast<double>(count) - s.means.cwiseProduct(s.means)).cwiseMax(0.0);
    s.stds = var.cwiseSqrt().cwiseMax(1e-8);
    return s;
}

FeatureClip apply_standardizer(const FeatureClip& clip, const Standardizer& s) {
    FeatureClip out = clip;
    standardize_inplace(out.frames, s);
    return out;
}

void standardize_inplace(Eigen::MatrixXd& frames, const Standardizer& s) {
    if (frames.cols() != s.means.size()) {
        throw std::invalid_argument("standardize: feature width mismatch");
    }
    frames.rowwise() -= s.means.transpose();
    frames.array().rowwise() /= s.stds.transpose().array();
}

void save_feature_clip(const std::filesystem::path& path, const FeatureClip& clip) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write feature file " + path.string());
    os.write(kFeatMagic, sizeof(kFeatMagic));
    write_string(os, clip.clip_id);
    write_u32(os, static_cast<std::uint32_t>(clip.frames.rows()));
    write_u32(os, static_cast<std::uint32_t>(clip.frames.cols()));
    write_string(os, clip.label);
    write_u32(os, static_cast<std::uint32_t>(clip.fold));
    for (Eigen::Index t = 0; t < clip.frames.rows(); ++t) {
        for (Eigen::Index j = 0; j < clip.frames.cols(); ++j) {
            const float v = static_cast<float>(clip.frames(t, j));
            static_assert(std::endian::native == std::endian::little,
                          "feature cache assumes a little-endian host");
            os.write(reinterpret_cast<const char*>(&v), 4);
        }
    }
    if (!os) throw IoError("short write to feature file " + path.string());
}

FeatureClip load_feature_clip(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read feature file " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kFeatMagic, 8) != 0) {
        throw DataError("bad feature file magic in " + path.string());
    }
    FeatureClip clip;
    clip.clip_id = read_string(is);
    const std::uint32_t rows = read_u32(is);
    const std::uint32_t cols = read_u32(is);
    clip.label = read_string(is);
    clip.fold = static_cast<int>(read_u32(is));
    if (!is || rows == 0 || cols == 0 || cols > 1u << 16) {
        throw DataError("bad feature file header in " + path.string());
    }
    clip.frames.resize(rows, cols);
    for (std::uint32_t t = 0; t < rows; ++t) {
        for (std::uint32_t j = 0; j < cols; ++j) {
            float v;
            is.read(reinterpret_cast<char*>(&v), 4);
            clip.frames(t, j) = v;
        }
    }
    if (!is) throw DataError("truncated feature file " + path.string());
    return clip;
}

std::string cache_file_name(const std::string& clip_id) {
    // FNV-1a, stable across builds and platforms.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : clip_id) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf) + ".mclf";
}

}  // namespace mclnn
