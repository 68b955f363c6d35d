#include "mclnn/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

#include "mclnn/errors.hpp"

namespace mclnn {

namespace {

constexpr int kHalfTaps = 32;  // 64 taps per output sample
constexpr double kKaiserBeta = 8.6;

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t off) {
    return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
           (static_cast<std::uint32_t>(b[off + 2]) << 16) |
           (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t off) {
    return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t off, const char* tag) {
    return std::memcmp(b.data() + off, tag, 4) == 0;
}

// Zeroth-order modified Bessel function, power series.
double bessel_i0(double x) {
    double sum = 1.0, term = 1.0;
    const double half_sq = x * x / 4.0;
    for (int k = 1; k < 64; ++k) {
        term *= half_sq / (k * k);
        sum += term;
        if (term < 1e-16 * sum) break;
    }
    return sum;
}

double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

}  // namespace

std::vector<double> resample(const std::vector<double>& input, int from_rate, int to_rate) {
    if (from_rate <= 0 || to_rate <= 0) {
        throw std::invalid_argument("resample: sample rates must be positive");
    }
    if (from_rate == to_rate || input.empty()) return input;

    const std::int64_t g = std::gcd(from_rate, to_rate);
    const std::int64_t up = to_rate / g;    // output samples per block
    const std::int64_t down = from_rate / g;  // input samples per block

    // Cutoff at the narrower Nyquist, normalized to the input rate.
    const double cutoff = std::min(1.0, static_cast<double>(to_rate) / from_rate);
    const double i0_beta = bessel_i0(kKaiserBeta);
    auto kernel = [&](double x) {
        const double t = x / kHalfTaps;
        if (t <= -1.0 || t >= 1.0) return 0.0;
        const double window = bessel_i0(kKaiserBeta * std::sqrt(1.0 - t * t)) / i0_beta;
        return cutoff * sinc(cutoff * x) * window;
    };

    // One tap table per phase, each normalized to unit DC gain.
    std::vector<std::vector<double>> phases(static_cast<std::size_t>(up));
    for (std::int64_t p = 0; p < up; ++p) {
        const double frac = static_cast<double>(p) / up;
        auto& taps = phases[static_cast<std::size_t>(p)];
        taps.resize(2 * kHalfTaps);
        double sum = 0.0;
        for (int j = 0; j < 2 * kHalfTaps; ++j) {
            // Input sample index i0 - (kHalfTaps - 1) + j, offset from pos.
            const double x = frac + (kHalfTaps - 1) - j;
            taps[j] = kernel(x);
            sum += taps[j];
        }
        for (double& t : taps) t /= sum;
    }

    const std::int64_t n_in = static_cast<std::int64_t>(input.size());
    const std::int64_t n_out = (n_in * up) / down;
    std::vector<double> out(static_cast<std::size_t>(std::max<std::int64_t>(n_out, 1)));
    for (std::int64_t n = 0; n < static_cast<std::int64_t>(out.size()); ++n) {
        const std::int64_t num = n * down;
        const std::int64_t i0 = num / up;
        const auto& taps = phases[static_cast<std::size_t>(num % up)];
        double acc = 0.0;
        const std::int64_t base = i0 - (kHalfTaps - 1);
        for (int j = 0; j < 2 * kHalfTaps; ++j) {
            const std::int64_t idx = base + j;
            if (idx < 0 || idx >= n_in) continue;
            acc += input[static_cast<std::size_t>(idx)] * taps[j];
        }
        out[static_cast<std::size_t>(n)] = std::clamp(acc, -1.0, 1.0);
    }
    return out;
}

AudioClip decode_wav(std::span<const std::uint8_t> bytes, std::string source) {
    if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE")) {
        throw DataError("decode_wav: not a RIFF/WAVE file" +
                        (source.empty() ? "" : " (" + source + ")"));
    }

    bool have_fmt = false;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t bits = 0;
    std::span<const std::uint8_t> data;

    std::size_t off = 12;
    while (off + 8 <= bytes.size()) {
        const std::uint32_t chunk_size = read_u32(bytes, off + 4);
        const std::size_t body = off + 8;
        if (tag_is(bytes, off, "fmt ")) {
            if (chunk_size < 16 || body + 16 > bytes.size()) {
                throw DataError("decode_wav: truncated fmt chunk");
            }
            const std::uint16_t format = read_u16(bytes, body);
            if (format != 1) {
                throw DataError("decode_wav: unsupported codec " + std::to_string(format) +
                                " (only PCM is supported)");
            }
            channels = read_u16(bytes, body + 2);
            sample_rate = read_u32(bytes, body + 4);
            bits = read_u16(bytes, body + 14);
            have_fmt = true;
        } else if (tag_is(bytes, off, "data")) {
            if (body + chunk_size > bytes.size()) {
                throw DataError("decode_wav: truncated data chunk");
            }
            data = bytes.subspan(body, chunk_size);
        }
        // Chunks are word-aligned.
        off = body + chunk_size + (chunk_size & 1);
    }

    if (!have_fmt) throw DataError("decode_wav: missing fmt chunk");
    if (bits != 16) {
        throw DataError("decode_wav: unsupported bit depth " + std::to_string(bits));
    }
    if (channels < 1 || channels > 2) {
        throw DataError("decode_wav: unsupported channel count " + std::to_string(channels));
    }
    if (sample_rate == 0) throw DataError("decode_wav: zero sample rate");

    const std::size_t frame_bytes = 2u * channels;
    const std::size_t frames = data.size() / frame_bytes;
    if (frames == 0) throw DataError("decode_wav: zero-length audio");

    std::vector<double> mono(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) {
            std::int16_t s;
            std::memcpy(&s, data.data() + i * frame_bytes + 2u * c, 2);
            acc += static_cast<double>(s);
        }
        mono[i] = acc / (channels * 32768.0);
    }

    AudioClip clip;
    clip.source = std::move(source);
    clip.sample_rate = kTargetSampleRate;
    clip.samples = resample(mono, static_cast<int>(sample_rate), kTargetSampleRate);
    return clip;
}

AudioClip load_audio_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const std::streamoff size = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in) throw IoError("cannot read " + path.string());
    return decode_wav(bytes, path.string());
}

}  // namespace mclnn
