#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "sac/kernels.hpp"
#include "sac/tensor.hpp"
#include "sac/weights.hpp"

namespace sac {

struct EmformerConfig {
    std::size_t num_layers = 2;
    std::size_t hidden = 16;
    std::size_t heads = 2;
    std::size_t segment = 4;        // S, frames per segment
    std::size_t left_context = 8;   // L, frames
    std::size_t right_context = 4;  // R, frames of look-ahead
    std::size_t ff_dim = 32;

    void validate() const;
};

// Segment-granular attention mask. Query frame t may attend to frames in
// [segment_start(t) - L, segment_end(t) + R) clipped to [0, T).
class AttentionBlockMask {
public:
    AttentionBlockMask(std::size_t length, std::size_t segment, std::size_t left, std::size_t right);

    std::size_t length() const { return length_; }
    std::size_t block_size() const { return segment_; }
    std::size_t num_blocks() const { return (length_ + segment_ - 1) / segment_; }
    std::size_t block_of(std::size_t frame) const { return frame / segment_; }
    std::pair<std::size_t, std::size_t> block_rows(std::size_t block) const;
    // Allowed key frames [begin, end) for every query in the block.
    std::pair<std::size_t, std::size_t> key_range(std::size_t block) const;

    bool allows(std::size_t query, std::size_t key) const;
    BoolMatrix dense() const;
    double sparsity() const;

    struct KvBlock {
        std::size_t index;
        bool full;  // every (query, key) pair in the tile is allowed
    };
    // Key blocks touched by a query block, ascending; untouched tiles are skipped.
    std::vector<KvBlock> kv_blocks(std::size_t query_block) const;

private:
    std::size_t length_, segment_, left_, right_;
};

AttentionBlockMask build_block_mask(std::size_t length, const EmformerConfig& cfg);

// (#disallowed entries) / (#entries)
double mask_sparsity(const BoolMatrix& mask);
double mask_sparsity(const AttentionBlockMask& mask);

// Attention that visits only the key tiles the mask touches. Numerically the
// same computation as masked_softmax_attention over mask.dense().
Tensor blocksparse_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                             const AttentionBlockMask& mask);

struct EmformerLayerWeights {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln1_gamma, ln1_beta;
    Tensor ff1_w, ff1_b, ff2_w, ff2_b;
    Tensor ln2_gamma, ln2_beta;
};

// Emformer-style encoder without memory bank: each segment's queries (its
// center frames and a private copy of its right-context frames) attend to the
// cached left context, the center and the right context. Right-context rows
// are recomputed per layer inside the segment that uses them, so the total
// look-ahead stays R frames regardless of depth.
class Emformer {
public:
    Emformer(EmformerConfig cfg, std::vector<EmformerLayerWeights> layers);

    static void init_weights(const EmformerConfig& cfg, WeightInit& init, WeightStore& store,
                             const std::string& prefix = "emformer");
    static Emformer from_store(const EmformerConfig& cfg, const WeightStore& store,
                               const std::string& prefix = "emformer");

    const EmformerConfig& config() const { return cfg_; }
    const std::vector<EmformerLayerWeights>& layers() const { return layers_; }

    // Full-utterance reference; T must be a multiple of the segment size.
    Tensor offline(const Tensor& x) const;

    // Multi-head attention of q over (keys, values) with no masking.
    Tensor attend(const Tensor& q, const Tensor& keys, const Tensor& values) const;
    // Output projection, residual, layer norm, feed-forward, residual, layer norm.
    Tensor post_attention(const EmformerLayerWeights& w, const Tensor& rows, const Tensor& attn) const;

private:
    EmformerConfig cfg_;
    std::vector<EmformerLayerWeights> layers_;
};

struct EmformerState {
    std::vector<Tensor> key_cache;    // per layer, <= L rows
    std::vector<Tensor> value_cache;  // per layer, <= L rows
    Tensor pending;                   // input frames not yet emitted (next segment + right context)
    std::size_t frames_consumed = 0;
    std::size_t frames_emitted = 0;
    bool flushed = false;

    static EmformerState fresh(const EmformerConfig& cfg);
};

// Feeds exactly S new frames. Returns S output frames for the oldest segment
// whose right context is complete, or an empty [0, hidden] tensor.
Tensor emformer_step(const Emformer& model, EmformerState& state, const Tensor& new_frames);

// End of stream: emits every buffered segment using whatever right context exists.
Tensor emformer_flush(const Emformer& model, EmformerState& state);

}  // namespace sac
