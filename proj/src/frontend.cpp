#include "sac/frontend.hpp"

#include <cmath>
#include <numbers>

#include "sac/errors.hpp"
#include "sac/kernels.hpp"

namespace sac {

float Vad::rms(std::span<const float> chunk) {
    if (chunk.empty()) return 0.0f;
    double s = 0.0;
    for (float v : chunk) s += static_cast<double>(v) * v;
    return static_cast<float>(std::sqrt(s / static_cast<double>(chunk.size())));
}

bool Vad::update(std::span<const float> chunk) {
    if (rms(chunk) > cfg_.threshold) {
        remaining_ = cfg_.hangover;
        return true;
    }
    if (remaining_ > 0) {
        --remaining_;
        return true;
    }
    return false;
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

constexpr float kEnergyFloor = 1e-8f;

}  // namespace

Frontend::Frontend(std::size_t sample_rate, std::size_t hop, FrontendConfig cfg, Tensor proj, Tensor bias,
                   Tensor speaker_proj)
    : sample_rate_(sample_rate),
      hop_(hop),
      cfg_(cfg),
      bins_(hop / 2 + 1),
      proj_(std::move(proj)),
      bias_(std::move(bias)),
      speaker_proj_(std::move(speaker_proj)) {
    if (hop_ < 2) throw ConfigError("frontend: hop must be >= 2");
    if (cfg_.bands == 0) throw ConfigError("frontend: bands must be positive");
    const double pi = std::numbers::pi;
    window_.resize(hop_);
    for (std::size_t n = 0; n < hop_; ++n)
        window_[n] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * pi * static_cast<double>(n) / hop_));
    cos_.resize(bins_ * hop_);
    sin_.resize(bins_ * hop_);
    for (std::size_t b = 0; b < bins_; ++b)
        for (std::size_t n = 0; n < hop_; ++n) {
            const double ang = 2.0 * pi * static_cast<double>((b * n) % hop_) / hop_;
            cos_[b * hop_ + n] = static_cast<float>(std::cos(ang));
            sin_[b * hop_ + n] = static_cast<float>(std::sin(ang));
        }
    // Triangular filters with edges equally spaced on the mel scale.
    const double top = hz_to_mel(sample_rate_ / 2.0);
    std::vector<double> edges(cfg_.bands + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(cfg_.bands + 1));
    filters_.assign(cfg_.bands * bins_, 0.0f);
    for (std::size_t m = 0; m < cfg_.bands; ++m) {
        const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
        for (std::size_t b = 0; b < bins_; ++b) {
            const double hz = static_cast<double>(b) * sample_rate_ / static_cast<double>(hop_);
            double w = 0.0;
            if (hz > lo && hz <= mid) w = (hz - lo) / (mid - lo);
            else if (hz > mid && hz < hi) w = (hi - hz) / (hi - mid);
            filters_[m * bins_ + b] = static_cast<float>(w);
        }
    }
}

void Frontend::init_weights(std::size_t hidden, std::size_t speaker_dim, const FrontendConfig& cfg,
                            WeightInit& init, WeightStore& store) {
    store.put("frontend.proj", init.uniform({cfg.bands, hidden}, cfg.bands));
    store.put("frontend.bias", init.uniform({hidden}, cfg.bands));
    store.put("speaker.proj", init.uniform({cfg.bands, speaker_dim}, cfg.bands));
}

Frontend Frontend::from_store(std::size_t sample_rate, std::size_t hop, std::size_t hidden,
                              std::size_t speaker_dim, const FrontendConfig& cfg, const WeightStore& store) {
    return Frontend(sample_rate, hop, cfg, store.expect("frontend.proj", {cfg.bands, hidden}),
                    store.expect("frontend.bias", {hidden}),
                    store.expect("speaker.proj", {cfg.bands, speaker_dim}));
}

Tensor Frontend::log_band_energies(std::span<const float> samples) const {
    if (samples.size() % hop_ != 0)
        throw ChunkingError("frontend: sample count " + std::to_string(samples.size()) +
                            " is not a multiple of hop " + std::to_string(hop_));
    const std::size_t frames = samples.size() / hop_;
    Tensor out({frames, cfg_.bands});
    std::vector<float> windowed(hop_), power(bins_);
    for (std::size_t t = 0; t < frames; ++t) {
        const float* s = samples.data() + t * hop_;
        for (std::size_t n = 0; n < hop_; ++n) windowed[n] = s[n] * window_[n];
        for (std::size_t b = 0; b < bins_; ++b) {
            float re = 0.0f, im = 0.0f;
            const float* c = cos_.data() + b * hop_;
            const float* sn = sin_.data() + b * hop_;
            for (std::size_t n = 0; n < hop_; ++n) {
                re += windowed[n] * c[n];
                im -= windowed[n] * sn[n];
            }
            power[b] = re * re + im * im;
        }
        auto row = out.row(t);
        for (std::size_t m = 0; m < cfg_.bands; ++m) {
            float e = 0.0f;
            const float* f = filters_.data() + m * bins_;
            for (std::size_t b = 0; b < bins_; ++b) e += f[b] * power[b];
            row[m] = std::log(e + kEnergyFloor);
        }
    }
    return out;
}

Tensor Frontend::features(std::span<const float> samples) const {
    return linear(log_band_energies(samples), proj_, bias_);
}

SpeakerEmbedding Frontend::speaker_embedding(std::span<const float> samples) const {
    double energy = 0.0;
    for (float v : samples) energy += static_cast<double>(v) * v;
    if (!(energy > 0.0)) throw DegenerateInputError("speaker embedding: input has zero energy");
    const Tensor bands = log_band_energies(samples);
    if (bands.rows() == 0) throw DegenerateInputError("speaker embedding: no complete frame");
    Tensor pooled({1, cfg_.bands});
    for (std::size_t t = 0; t < bands.rows(); ++t) {
        auto row = bands.row(t);
        float mean = 0.0f;
        for (float v : row) mean += v;
        mean /= static_cast<float>(row.size());
        for (std::size_t m = 0; m < cfg_.bands; ++m) pooled(0, m) += row[m] - mean;
    }
    for (float& v : pooled.data()) v /= static_cast<float>(bands.rows());
    const Tensor g = matmul(pooled, speaker_proj_);
    return SpeakerEmbedding::normalized(g.values());
}

}  // namespace sac
