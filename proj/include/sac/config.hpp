#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "sac/emformer.hpp"
#include "sac/frontend.hpp"
#include "sac/vocoder.hpp"
#include "sac/wavenet.hpp"

namespace sac {

// Everything needed to build and stream a model. Defaults are the toy config.
struct SessionConfig {
    std::size_t sample_rate = 16000;
    std::size_t hop = 320;
    std::size_t chunk_frames = 4;
    std::size_t warmup_chunks = 10;
    FrontendConfig frontend;
    VadConfig vad;
    EmformerConfig emformer;
    WaveNetConfig wavenet;
    VocoderConfig vocoder;

    std::size_t chunk_samples() const { return chunk_frames * hop; }
    double chunk_seconds() const {
        return static_cast<double>(chunk_samples()) / static_cast<double>(sample_rate);
    }

    // Derives the inter-component channel counts from the component widths.
    void link();
    void validate() const;
};

// Flat `key = value` text; `#` starts a comment; lists are comma separated.
// Unknown keys and malformed values raise ConfigError. The result is linked
// and validated.
SessionConfig parse_config(const std::string& text);
SessionConfig load_config(const std::filesystem::path& path);
std::string format_config(const SessionConfig& cfg);

// The full-scale configuration (12 x 1024 encoder, S=4, L=30, R=8, hop 320
// via 8*8*5) with a bottleneck sized so the total look-ahead is 32 frames.
SessionConfig full_scale_config();

}  // namespace sac
