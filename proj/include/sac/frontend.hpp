#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sac/tensor.hpp"
#include "sac/vocoder.hpp"
#include "sac/weights.hpp"

namespace sac {

struct FrontendConfig {
    std::size_t bands = 16;
};

struct VadConfig {
    float threshold = 0.01f;    // RMS over one chunk
    std::size_t hangover = 2;   // chunks kept active after the last loud one
    bool mute = true;           // zero the output of inactive chunks
};

// Energy VAD with hangover, evaluated once per chunk.
class Vad {
public:
    explicit Vad(VadConfig cfg = {}) : cfg_(cfg) {}
    bool update(std::span<const float> chunk);
    static float rms(std::span<const float> chunk);

private:
    VadConfig cfg_;
    std::size_t remaining_ = 0;
};

// Per-frame log band energies (Hann window over one hop, DFT, triangular
// mel-spaced bands) followed by a frozen linear projection to the encoder width.
class Frontend {
public:
    Frontend(std::size_t sample_rate, std::size_t hop, FrontendConfig cfg, Tensor proj, Tensor bias,
             Tensor speaker_proj);

    static void init_weights(std::size_t hidden, std::size_t speaker_dim, const FrontendConfig& cfg,
                             WeightInit& init, WeightStore& store);
    static Frontend from_store(std::size_t sample_rate, std::size_t hop, std::size_t hidden,
                               std::size_t speaker_dim, const FrontendConfig& cfg, const WeightStore& store);

    std::size_t hop() const { return hop_; }
    std::size_t bands() const { return cfg_.bands; }

    // samples.size() must be a multiple of hop -> [frames, bands]
    Tensor log_band_energies(std::span<const float> samples) const;
    // -> [frames, hidden]
    Tensor features(std::span<const float> samples) const;

    // Gain-normalized spectral envelope, mean-pooled and projected; unit norm.
    // Silence raises DegenerateInputError.
    SpeakerEmbedding speaker_embedding(std::span<const float> samples) const;

private:
    std::size_t sample_rate_, hop_;
    FrontendConfig cfg_;
    std::vector<float> window_;
    std::vector<float> cos_, sin_;  // [bins, hop]
    std::vector<float> filters_;    // [bands, bins]
    std::size_t bins_;
    Tensor proj_, bias_, speaker_proj_;
};

}  // namespace sac
