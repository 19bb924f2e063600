#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace sac {

// Uniform noise in [-amplitude, amplitude) from raw mt19937 output, so the
// samples are identical on every standard library.
std::vector<float> seeded_noise(std::size_t n, std::uint64_t seed, float amplitude = 0.3f);

std::vector<float> sine(std::size_t n, double freq_hz, double sample_rate, float amplitude = 0.5f);

}  // namespace sac
