#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mclnn {

inline constexpr int kTargetSampleRate = 22050;

struct AudioClip {
    std::vector<double> samples;  // mono, in [-1, 1]
    int sample_rate = kTargetSampleRate;
    std::string source;
};

// Decodes RIFF/WAVE PCM 16-bit (1 or 2 channels). Stereo is averaged to mono,
// samples are scaled by 1/32768, and anything not already at 22050 Hz is
// resampled. Throws DataError on malformed or unsupported input.
AudioClip decode_wav(std::span<const std::uint8_t> bytes, std::string source = {});

// decode_wav over a file's bytes; throws IoError when the file cannot be read.
AudioClip load_audio_file(const std::filesystem::path& path);

// Band-limited rational resampler: windowed sinc, 64 taps per phase,
// Kaiser beta 8.6. Identity when the rates match.
std::vector<double> resample(const std::vector<double>& input, int from_rate, int to_rate);

}  // namespace mclnn
