#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sac/kernels.hpp"
#include "sac/stream_conv.hpp"
#include "sac/tensor.hpp"
#include "sac/weights.hpp"

namespace sac {

// Fixed-dimension, unit-norm speaker vector g.
struct SpeakerEmbedding {
    std::vector<float> values;

    std::size_t dim() const { return values.size(); }
    float norm() const;
    // Scales v to unit length; a zero vector is a DegenerateInputError.
    static SpeakerEmbedding normalized(std::vector<float> v);
    // Every entry 1/sqrt(dim).
    static SpeakerEmbedding neutral(std::size_t dim);
    bool operator==(const SpeakerEmbedding&) const = default;
};

struct VocoderConfig {
    std::size_t in_channels = 16;
    std::size_t channels = 16;  // width after the input conv; halves at every upsampling stage
    std::vector<std::size_t> upsample_factors{8, 8, 5};
    std::vector<std::size_t> upsample_kernels{16, 16, 10};
    std::vector<std::size_t> resblock_kernels{3, 5};
    std::vector<std::size_t> resblock_dilations{1, 3};
    std::size_t pre_kernel = 7;
    std::size_t post_kernel = 7;
    std::size_t speaker_dim = 32;

    void validate() const;
    std::size_t hop() const;
    std::size_t num_stages() const { return upsample_factors.size(); }
    std::size_t stage_in_channels(std::size_t stage) const;
    std::size_t stage_out_channels(std::size_t stage) const;
    // Rows trimmed from the front / back of a transposed conv output so that
    // T input frames give exactly T*factor rows.
    std::size_t trim_left(std::size_t stage) const;
    std::size_t trim_right(std::size_t stage) const;

    ConvSpec pre_spec() const;
    ConvSpec post_spec() const;
    ConvSpec res_spec(std::size_t stage, std::size_t kernel, std::size_t dilation) const;

    // Feature frames beyond t that output frame t depends on.
    std::size_t future_reach() const;
    // Feature frames before t that output frame t depends on.
    std::size_t past_reach() const;
};

struct ResUnitWeights {
    Tensor c1_w, c1_b;  // dilated conv
    Tensor c2_w, c2_b;  // dilation 1
};

struct StageWeights {
    Tensor up_w, up_b;                               // [Cin, Cout, K]
    std::vector<std::vector<ResUnitWeights>> blocks;  // [kernel][dilation]
};

class Vocoder {
public:
    Vocoder(VocoderConfig cfg, Tensor cond_w, Tensor pre_w, Tensor pre_b, std::vector<StageWeights> stages,
            Tensor post_w, Tensor post_b);

    static void init_weights(const VocoderConfig& cfg, WeightInit& init, WeightStore& store,
                             const std::string& prefix = "vocoder");
    static Vocoder from_store(const VocoderConfig& cfg, const WeightStore& store,
                              const std::string& prefix = "vocoder");

    const VocoderConfig& config() const { return cfg_; }
    const std::vector<StageWeights>& stages() const { return stages_; }
    const Tensor& pre_w() const { return pre_w_; }
    const Tensor& pre_b() const { return pre_b_; }
    const Tensor& post_w() const { return post_w_; }
    const Tensor& post_b() const { return post_b_; }

    // g projected to [1, in_channels].
    Tensor condition(const SpeakerEmbedding& g) const;
    // feat + condition(g) broadcast over frames: the input stage pre-activation.
    Tensor conditioned_input(const Tensor& feat, const Tensor& cond) const;

    // [T, in_channels] -> [T*hop, 1]
    Tensor offline(const Tensor& feat, const SpeakerEmbedding& g) const;

private:
    VocoderConfig cfg_;
    Tensor cond_w_;
    Tensor pre_w_, pre_b_;
    std::vector<StageWeights> stages_;
    Tensor post_w_, post_b_;
};

// Multi-receptive-field fusion: (b0 + b1 + ...) / n, summed in branch order.
Tensor mrf_combine(std::vector<Tensor>& branches);

struct ResUnitState {
    ConvBuffer c1, c2;
    RowQueue residual;
};

struct UpsampleState {
    Tensor acc;                // overlap-add tail, first row = next output row
    std::size_t to_drop = 0;   // leading rows still to trim
    bool started = false;
};

struct StageState {
    UpsampleState up;
    std::vector<std::vector<ResUnitState>> blocks;
    std::vector<RowQueue> branch_out;
};

struct VocoderState {
    bool bound = false;
    SpeakerEmbedding g;
    const SpeakerEmbedding* last_g = nullptr;  // address seen by the latest call
    Tensor cond;
    ConvBuffer pre;
    std::vector<StageState> stages;
    ConvBuffer post;
    std::vector<float> pending;  // computed samples not yet released
    std::size_t frames_consumed = 0;
    std::size_t samples_emitted = 0;
    bool flushed = false;

    static VocoderState fresh(const VocoderConfig& cfg);
};

// Returns hop * (newly resolved frames) samples. g must match the first call.
std::vector<float> vocoder_step(const Vocoder& model, VocoderState& state, const Tensor& feat,
                                const SpeakerEmbedding& g);
std::vector<float> vocoder_flush(const Vocoder& model, VocoderState& state, const SpeakerEmbedding& g);

}  // namespace sac
