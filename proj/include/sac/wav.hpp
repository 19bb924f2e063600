#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace sac {

struct WavAudio {
    std::uint32_t sample_rate = 0;
    std::vector<float> samples;  // mono, in [-1, 1)
};

// RIFF/WAVE, PCM16, mono. Anything else is a FormatError.
WavAudio decode_wav(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_wav(const std::vector<float>& samples, std::uint32_t sample_rate);

WavAudio read_wav(const std::filesystem::path& path);
// Also rejects a sample rate other than `expected_rate`.
WavAudio read_wav(const std::filesystem::path& path, std::uint32_t expected_rate);
void write_wav(const std::filesystem::path& path, const std::vector<float>& samples, std::uint32_t sample_rate);

std::int16_t float_to_pcm16(float v);

}  // namespace sac
