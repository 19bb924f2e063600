#include "sac/emformer.hpp"

#include <algorithm>

#include "sac/errors.hpp"

namespace sac {

void EmformerConfig::validate() const {
    if (num_layers == 0) throw ConfigError("emformer: num_layers must be >= 1");
    if (hidden == 0 || heads == 0 || hidden % heads != 0)
        throw ConfigError("emformer: hidden must be a positive multiple of heads");
    if (segment == 0) throw ConfigError("emformer: segment must be >= 1");
    if (ff_dim == 0) throw ConfigError("emformer: ff_dim must be >= 1");
}

// ---------------------------------------------------------------------------
// Block mask

AttentionBlockMask::AttentionBlockMask(std::size_t length, std::size_t segment, std::size_t left,
                                       std::size_t right)
    : length_(length), segment_(segment), left_(left), right_(right) {
    if (length == 0) throw DimensionError("block mask: length must be >= 1");
    if (segment == 0) throw ConfigError("block mask: segment must be >= 1");
}

std::pair<std::size_t, std::size_t> AttentionBlockMask::block_rows(std::size_t block) const {
    const std::size_t begin = block * segment_;
    return {begin, std::min(length_, begin + segment_)};
}

std::pair<std::size_t, std::size_t> AttentionBlockMask::key_range(std::size_t block) const {
    const auto [begin, end] = block_rows(block);
    return {begin > left_ ? begin - left_ : 0, std::min(length_, end + right_)};
}

bool AttentionBlockMask::allows(std::size_t query, std::size_t key) const {
    const auto [kb, ke] = key_range(block_of(query));
    return key >= kb && key < ke;
}

BoolMatrix AttentionBlockMask::dense() const {
    BoolMatrix m(length_, length_);
    for (std::size_t q = 0; q < length_; ++q) {
        const auto [kb, ke] = key_range(block_of(q));
        for (std::size_t k = kb; k < ke; ++k) m.set(q, k, true);
    }
    return m;
}

double AttentionBlockMask::sparsity() const {
    std::size_t allowed = 0;
    for (std::size_t b = 0; b < num_blocks(); ++b) {
        const auto [qb, qe] = block_rows(b);
        const auto [kb, ke] = key_range(b);
        allowed += (qe - qb) * (ke - kb);
    }
    const double total = static_cast<double>(length_) * static_cast<double>(length_);
    return (total - static_cast<double>(allowed)) / total;
}

std::vector<AttentionBlockMask::KvBlock> AttentionBlockMask::kv_blocks(std::size_t query_block) const {
    const auto [kb, ke] = key_range(query_block);
    std::vector<KvBlock> out;
    for (std::size_t blk = kb / segment_; blk * segment_ < ke; ++blk) {
        const auto [bb, be] = block_rows(blk);
        out.push_back({blk, bb >= kb && be <= ke});
    }
    return out;
}

AttentionBlockMask build_block_mask(std::size_t length, const EmformerConfig& cfg) {
    return AttentionBlockMask(length, cfg.segment, cfg.left_context, cfg.right_context);
}

double mask_sparsity(const BoolMatrix& mask) {
    const std::size_t total = mask.rows * mask.cols;
    if (total == 0) return 0.0;
    const auto allowed = static_cast<std::size_t>(std::count(mask.cells.begin(), mask.cells.end(), 1));
    return static_cast<double>(total - allowed) / static_cast<double>(total);
}

double mask_sparsity(const AttentionBlockMask& mask) { return mask.sparsity(); }

Tensor blocksparse_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                             const AttentionBlockMask& mask) {
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
        throw DimensionError("blocksparse_attention: expected rank-2 tensors");
    if (q.rows() != mask.length() || k.rows() != mask.length() || v.rows() != mask.length())
        throw DimensionError("blocksparse_attention: mask length does not match q/k/v");
    if (q.cols() != k.cols()) throw DimensionError("blocksparse_attention: query/key width mismatch");

    Tensor out({q.rows(), v.cols()});
    std::vector<std::size_t> keys;
    std::vector<float> scratch;
    for (std::size_t b = 0; b < mask.num_blocks(); ++b) {
        const auto tiles = mask.kv_blocks(b);
        const auto [qb, qe] = mask.block_rows(b);
        for (std::size_t qi = qb; qi < qe; ++qi) {
            keys.clear();
            for (const auto& tile : tiles) {
                const auto [kb, ke] = mask.block_rows(tile.index);
                for (std::size_t kj = kb; kj < ke; ++kj)
                    if (tile.full || mask.allows(qi, kj)) keys.push_back(kj);
            }
            if (keys.empty())
                throw InvalidMaskError("blocksparse_attention: query row " + std::to_string(qi) +
                                       " has no allowed keys");
            detail::attend_row(q.row(qi), k, v, keys, out.row(qi), scratch);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model

Emformer::Emformer(EmformerConfig cfg, std::vector<EmformerLayerWeights> layers)
    : cfg_(cfg), layers_(std::move(layers)) {
    cfg_.validate();
    if (layers_.size() != cfg_.num_layers) throw ConfigError("emformer: layer count mismatch");
}

namespace {

std::string layer_name(const std::string& prefix, std::size_t l, const char* leaf) {
    return prefix + ".layer" + std::to_string(l) + "." + leaf;
}

}  // namespace

void Emformer::init_weights(const EmformerConfig& cfg, WeightInit& init, WeightStore& store,
                            const std::string& prefix) {
    cfg.validate();
    const std::size_t h = cfg.hidden, f = cfg.ff_dim;
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        auto put = [&](const char* leaf, Tensor t) { store.put(layer_name(prefix, l, leaf), std::move(t)); };
        for (const char* p : {"q", "k", "v", "o"}) {
            put((std::string("w") + p).c_str(), init.uniform({h, h}, h));
            put((std::string("b") + p).c_str(), init.uniform({h}, h));
        }
        put("ln1_gamma", init.constant({h}, 1.0f));
        put("ln1_beta", init.constant({h}, 0.0f));
        put("ff1_w", init.uniform({h, f}, h));
        put("ff1_b", init.uniform({f}, h));
        put("ff2_w", init.uniform({f, h}, f));
        put("ff2_b", init.uniform({h}, f));
        put("ln2_gamma", init.constant({h}, 1.0f));
        put("ln2_beta", init.constant({h}, 0.0f));
    }
}

Emformer Emformer::from_store(const EmformerConfig& cfg, const WeightStore& store,
                              const std::string& prefix) {
    cfg.validate();
    const std::size_t h = cfg.hidden, f = cfg.ff_dim;
    std::vector<EmformerLayerWeights> layers(cfg.num_layers);
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        auto get = [&](const char* leaf, std::vector<std::size_t> shape) {
            return store.expect(layer_name(prefix, l, leaf), shape);
        };
        auto& w = layers[l];
        w.wq = get("wq", {h, h});
        w.bq = get("bq", {h});
        w.wk = get("wk", {h, h});
        w.bk = get("bk", {h});
        w.wv = get("wv", {h, h});
        w.bv = get("bv", {h});
        w.wo = get("wo", {h, h});
        w.bo = get("bo", {h});
        w.ln1_gamma = get("ln1_gamma", {h});
        w.ln1_beta = get("ln1_beta", {h});
        w.ff1_w = get("ff1_w", {h, f});
        w.ff1_b = get("ff1_b", {f});
        w.ff2_w = get("ff2_w", {f, h});
        w.ff2_b = get("ff2_b", {h});
        w.ln2_gamma = get("ln2_gamma", {h});
        w.ln2_beta = get("ln2_beta", {h});
    }
    return Emformer(cfg, std::move(layers));
}

Tensor Emformer::attend(const Tensor& q, const Tensor& keys, const Tensor& values) const {
    const std::size_t head_dim = cfg_.hidden / cfg_.heads;
    Tensor out({q.rows(), cfg_.hidden});
    for (std::size_t h = 0; h < cfg_.heads; ++h) {
        const std::size_t c0 = h * head_dim, c1 = c0 + head_dim;
        const Tensor head = scaled_dot_product_attention(q.slice_cols(c0, c1), keys.slice_cols(c0, c1),
                                                         values.slice_cols(c0, c1));
        for (std::size_t r = 0; r < q.rows(); ++r) {
            auto src = head.row(r);
            std::copy(src.begin(), src.end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(c0));
        }
    }
    return out;
}

Tensor Emformer::post_attention(const EmformerLayerWeights& w, const Tensor& rows,
                                const Tensor& attn) const {
    Tensor x = linear(attn, w.wo, w.bo);
    add_inplace(x, rows);
    x = layer_norm(x, w.ln1_gamma, w.ln1_beta);
    Tensor ff = linear(x, w.ff1_w, w.ff1_b);
    relu_inplace(ff);
    ff = linear(ff, w.ff2_w, w.ff2_b);
    add_inplace(ff, x);
    return layer_norm(ff, w.ln2_gamma, w.ln2_beta);
}

Tensor Emformer::offline(const Tensor& x) const {
    if (x.rank() != 2 || x.cols() != cfg_.hidden) throw DimensionError("emformer: input must be [T, hidden]");
    const std::size_t total = x.rows();
    const std::size_t seg = cfg_.segment;
    if (total % seg != 0)
        throw DimensionError("emformer: input length " + std::to_string(total) +
                             " is not a multiple of the segment size " + std::to_string(seg));
    if (total == 0) return Tensor::zeros(0, cfg_.hidden);

    const AttentionBlockMask mask = build_block_mask(total, cfg_);
    const std::size_t segments = mask.num_blocks();

    // Layer-0 right-context rows are copies of the input frames after each segment.
    Tensor center = x;
    std::vector<Tensor> right(segments);
    for (std::size_t i = 0; i < segments; ++i) {
        const std::size_t end = mask.block_rows(i).second;
        right[i] = x.slice_rows(end, mask.key_range(i).second);
    }

    for (const auto& w : layers_) {
        const Tensor keys_c = linear(center, w.wk, w.bk);
        const Tensor values_c = linear(center, w.wv, w.bv);
        Tensor next_center({total, cfg_.hidden});
        std::vector<Tensor> next_right(segments);
        for (std::size_t i = 0; i < segments; ++i) {
            const auto [cb, ce] = mask.block_rows(i);
            const std::size_t kb = mask.key_range(i).first;
            const Tensor rows = concat_rows(center.slice_rows(cb, ce), right[i]);
            const Tensor q = linear(rows, w.wq, w.bq);
            const Tensor keys = concat_rows(keys_c.slice_rows(kb, ce), linear(right[i], w.wk, w.bk));
            const Tensor values = concat_rows(values_c.slice_rows(kb, ce), linear(right[i], w.wv, w.bv));
            const Tensor out = post_attention(w, rows, attend(q, keys, values));
            for (std::size_t r = 0; r < ce - cb; ++r) {
                auto src = out.row(r);
                std::copy(src.begin(), src.end(), next_center.row(cb + r).begin());
            }
            next_right[i] = out.slice_rows(ce - cb, out.rows());
        }
        center = std::move(next_center);
        right = std::move(next_right);
    }
    return center;
}

// ---------------------------------------------------------------------------
// Streaming

EmformerState EmformerState::fresh(const EmformerConfig& cfg) {
    EmformerState s;
    s.key_cache.assign(cfg.num_layers, Tensor::zeros(0, cfg.hidden));
    s.value_cache.assign(cfg.num_layers, Tensor::zeros(0, cfg.hidden));
    s.pending = Tensor::zeros(0, cfg.hidden);
    return s;
}

namespace {

void keep_last_rows(Tensor& t, std::size_t n) {
    if (t.rows() > n) t.drop_front_rows(t.rows() - n);
}

Tensor process_segment(const Emformer& model, EmformerState& state, std::size_t right_len) {
    const auto& cfg = model.config();
    const std::size_t seg = cfg.segment;
    Tensor rows = state.pending.slice_rows(0, seg + right_len);
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
        const auto& w = model.layers()[l];
        const Tensor q = linear(rows, w.wq, w.bq);
        const Tensor k_new = linear(rows, w.wk, w.bk);
        const Tensor v_new = linear(rows, w.wv, w.bv);
        const Tensor keys = concat_rows(state.key_cache[l], k_new);
        const Tensor values = concat_rows(state.value_cache[l], v_new);
        Tensor out = model.post_attention(w, rows, model.attend(q, keys, values));
        state.key_cache[l].append_rows(k_new.slice_rows(0, seg));
        state.value_cache[l].append_rows(v_new.slice_rows(0, seg));
        keep_last_rows(state.key_cache[l], cfg.left_context);
        keep_last_rows(state.value_cache[l], cfg.left_context);
        rows = std::move(out);
    }
    state.pending.drop_front_rows(seg);
    state.frames_emitted += seg;
    return rows.slice_rows(0, seg);
}

}  // namespace

Tensor emformer_step(const Emformer& model, EmformerState& state, const Tensor& new_frames) {
    const auto& cfg = model.config();
    if (state.flushed) throw StateError("emformer: step after flush");
    if (new_frames.rank() != 2 || new_frames.rows() != cfg.segment)
        throw ChunkingError("emformer: step needs exactly " + std::to_string(cfg.segment) + " frames");
    if (new_frames.cols() != cfg.hidden) throw DimensionError("emformer: frame width mismatch");
    if (state.key_cache.size() != cfg.num_layers) throw StateError("emformer: state built for another config");
    state.pending.append_rows(new_frames);
    state.frames_consumed += cfg.segment;
    if (state.pending.rows() >= cfg.segment + cfg.right_context)
        return process_segment(model, state, cfg.right_context);
    return Tensor::zeros(0, cfg.hidden);
}

Tensor emformer_flush(const Emformer& model, EmformerState& state) {
    if (state.flushed) throw StateError("emformer: flushed twice");
    const std::size_t seg = model.config().segment;
    Tensor out = Tensor::zeros(0, model.config().hidden);
    while (state.pending.rows() > 0) {
        const std::size_t right_len = std::min(model.config().right_context, state.pending.rows() - seg);
        out.append_rows(process_segment(model, state, right_len));
    }
    state.flushed = true;
    return out;
}

}  // namespace sac
