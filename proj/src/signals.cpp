#include "sac/signals.hpp"

#include <cmath>
#include <numbers>

#include "sac/weights.hpp"

namespace sac {

std::vector<float> seeded_noise(std::size_t n, std::uint64_t seed, float amplitude) {
    WeightInit rng(seed);
    std::vector<float> out(n);
    for (float& v : out) v = amplitude * rng.next_symmetric();
    return out;
}

std::vector<float> sine(std::size_t n, double freq_hz, double sample_rate, float amplitude) {
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = amplitude * static_cast<float>(std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / sample_rate));
    return out;
}

}  // namespace sac
