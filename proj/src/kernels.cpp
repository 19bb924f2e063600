#include "sac/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "sac/errors.hpp"

namespace sac {

void ConvSpec::validate() const {
    if (in_channels == 0 || out_channels == 0 || kernel_size == 0)
        throw ConfigError("conv: channel counts and kernel size must be positive");
    if (dilation < 1) throw ConfigError("conv: dilation must be >= 1");
    if (stride < 1) throw ConfigError("conv: stride must be >= 1");
    if (!causal && kernel_size % 2 == 0)
        throw ConfigError("conv: non-causal convolution needs an odd kernel size");
}

namespace {

void require_rank2(const Tensor& t, const char* what) {
    if (t.rank() != 2) throw DimensionError(std::string(what) + ": expected a rank-2 tensor");
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::size_t m = a.rows(), kk = a.cols(), n = b.cols();
    if (b.rows() != kk)
        throw DimensionError("matmul: inner dimensions differ (" + std::to_string(kk) + " vs " +
                             std::to_string(b.rows()) + ")");
    Tensor c({m, n});
    const float* ap = a.data().data();
    const float* bp = b.data().data();
    float* cp = c.data().data();
    // i-k-j order: c[i][j] still accumulates over k ascending from zero.
    for (std::size_t i = 0; i < m; ++i) {
        float* crow = cp + i * n;
        for (std::size_t k = 0; k < kk; ++k) {
            const float aik = ap[i * kk + k];
            const float* brow = bp + k * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

void add_bias(Tensor& x, const Tensor& bias) {
    if (bias.empty()) return;
    const std::size_t c = x.cols();
    if (bias.size() != c) throw DimensionError("add_bias: bias length does not match columns");
    const float* bp = bias.data().data();
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto row = x.row(r);
        for (std::size_t j = 0; j < c; ++j) row[j] += bp[j];
    }
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    Tensor y = matmul(x, w);
    add_bias(y, bias);
    return y;
}

Tensor conv1d(const Tensor& x, const Tensor& w, const ConvSpec& spec, std::size_t left_pad,
              std::size_t right_pad) {
    spec.validate();
    require_rank2(x, "conv1d");
    if (w.rank() != 3) throw DimensionError("conv1d: weight must be [Cout, Cin, K]");
    const std::size_t cin = x.cols(), cout = w.dim(0), kernel = w.dim(2);
    if (w.dim(1) != cin || cin != spec.in_channels || cout != spec.out_channels ||
        kernel != spec.kernel_size)
        throw DimensionError("conv1d: weight shape does not match input/spec");
    const std::size_t padded = x.rows() + left_pad + right_pad;
    const std::size_t span = spec.receptive_span();
    if (padded < span + 1)
        throw DimensionError("conv1d: input shorter than the receptive span; output would be empty");
    const std::size_t out_len = (padded - span - 1) / spec.stride + 1;
    const std::size_t t_in = x.rows();

    Tensor y({out_len, cout});
    const float* xp = x.data().data();
    const float* wp = w.data().data();
    for (std::size_t t = 0; t < out_len; ++t) {
        const std::size_t base = t * spec.stride;
        for (std::size_t co = 0; co < cout; ++co) {
            float acc = 0.0f;
            const float* wco = wp + co * cin * kernel;
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const float* wk = wco + ci * kernel;
                for (std::size_t k = 0; k < kernel; ++k) {
                    const std::size_t p = base + k * spec.dilation;  // padded coordinate
                    // Padding is materialized as literal zeros, so the product is
                    // still formed; buffer-fed callers see the same arithmetic.
                    float xv = 0.0f;
                    if (p >= left_pad && p - left_pad < t_in) xv = xp[(p - left_pad) * cin + ci];
                    acc += wk[k] * xv;
                }
            }
            y(t, co) = acc;
        }
    }
    return y;
}

void scatter_transposed_frame(std::span<const float> frame, const Tensor& w,
                              std::span<float> acc) {
    const std::size_t cin = w.dim(0), cout = w.dim(1), kernel = w.dim(2);
    const float* wp = w.data().data();
    for (std::size_t ci = 0; ci < cin; ++ci) {
        const float xv = frame[ci];
        const float* wci = wp + ci * cout * kernel;
        for (std::size_t k = 0; k < kernel; ++k) {
            float* out = acc.data() + k * cout;
            for (std::size_t co = 0; co < cout; ++co) out[co] += xv * wci[co * kernel + k];
        }
    }
}

Tensor conv1d_transposed(const Tensor& x, const Tensor& w, std::size_t factor) {
    require_rank2(x, "conv1d_transposed");
    if (w.rank() != 3) throw DimensionError("conv1d_transposed: weight must be [Cin, Cout, K]");
    if (factor < 1) throw ConfigError("conv1d_transposed: factor must be >= 1");
    const std::size_t cin = w.dim(0), cout = w.dim(1), kernel = w.dim(2);
    if (kernel < factor)
        throw ConfigError("conv1d_transposed: kernel shorter than the upsample factor leaves gaps");
    if (x.cols() != cin) throw DimensionError("conv1d_transposed: input channels mismatch");
    const std::size_t t_in = x.rows();
    Tensor y({t_in * factor + kernel - factor, cout});
    auto out = y.data();
    for (std::size_t t = 0; t < t_in; ++t)
        scatter_transposed_frame(x.row(t), w, out.subspan(t * factor * cout, kernel * cout));
    return y;
}

namespace detail {

void attend_row(std::span<const float> q, const Tensor& k, const Tensor& v,
                std::span<const std::size_t> keys, std::span<float> out,
                std::vector<float>& scratch) {
    const std::size_t d = q.size();
    const float scale = 1.0f / std::sqrt(static_cast<float>(d));
    scratch.resize(keys.size());
    float max_score = -std::numeric_limits<float>::infinity();
    for (std::size_t n = 0; n < keys.size(); ++n) {
        auto krow = k.row(keys[n]);
        float dot = 0.0f;
        for (std::size_t i = 0; i < d; ++i) dot += q[i] * krow[i];
        scratch[n] = dot * scale;
        max_score = std::max(max_score, scratch[n]);
    }
    float denom = 0.0f;
    for (std::size_t n = 0; n < keys.size(); ++n) {
        scratch[n] = std::exp(scratch[n] - max_score);
        denom += scratch[n];
    }
    std::fill(out.begin(), out.end(), 0.0f);
    const std::size_t dv = out.size();
    for (std::size_t n = 0; n < keys.size(); ++n) {
        auto vrow = v.row(keys[n]);
        const float p = scratch[n];
        for (std::size_t i = 0; i < dv; ++i) out[i] += p * vrow[i];
    }
    for (std::size_t i = 0; i < dv; ++i) out[i] /= denom;
}

}  // namespace detail

namespace {

void check_attention_shapes(const Tensor& q, const Tensor& k, const Tensor& v) {
    require_rank2(q, "attention");
    require_rank2(k, "attention");
    require_rank2(v, "attention");
    if (q.cols() != k.cols()) throw DimensionError("attention: query/key width mismatch");
    if (k.rows() != v.rows()) throw DimensionError("attention: key/value length mismatch");
}

}  // namespace

Tensor masked_softmax_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                const BoolMatrix& mask) {
    check_attention_shapes(q, k, v);
    if (mask.rows != q.rows() || mask.cols != k.rows())
        throw DimensionError("attention: mask shape does not match [Tq, Tk]");
    Tensor out({q.rows(), v.cols()});
    std::vector<std::size_t> keys;
    std::vector<float> scratch;
    keys.reserve(k.rows());
    for (std::size_t i = 0; i < q.rows(); ++i) {
        keys.clear();
        for (std::size_t j = 0; j < k.rows(); ++j)
            if (mask(i, j)) keys.push_back(j);
        if (keys.empty())
            throw InvalidMaskError("attention: query row " + std::to_string(i) +
                                   " has no allowed keys");
        detail::attend_row(q.row(i), k, v, keys, out.row(i), scratch);
    }
    return out;
}

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    check_attention_shapes(q, k, v);
    if (k.rows() == 0) throw InvalidMaskError("attention: no keys");
    Tensor out({q.rows(), v.cols()});
    std::vector<std::size_t> keys(k.rows());
    std::iota(keys.begin(), keys.end(), std::size_t{0});
    std::vector<float> scratch;
    for (std::size_t i = 0; i < q.rows(); ++i)
        detail::attend_row(q.row(i), k, v, keys, out.row(i), scratch);
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
    require_rank2(x, "layer_norm");
    const std::size_t c = x.cols();
    if (gamma.size() != c || beta.size() != c)
        throw DimensionError("layer_norm: gamma/beta length mismatch");
    Tensor y({x.rows(), c});
    const float inv_n = 1.0f / static_cast<float>(c);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto in = x.row(r);
        auto out = y.row(r);
        float mean = 0.0f;
        for (float v : in) mean += v;
        mean *= inv_n;
        float var = 0.0f;
        for (float v : in) var += (v - mean) * (v - mean);
        var *= inv_n;
        const float inv_std = 1.0f / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j)
            out[j] = (in[j] - mean) * inv_std * gamma.data()[j] + beta.data()[j];
    }
    return y;
}

void relu_inplace(Tensor& x) {
    for (float& v : x.data()) v = v > 0.0f ? v : 0.0f;
}

void leaky_relu_inplace(Tensor& x, float slope) {
    for (float& v : x.data()) v = v > 0.0f ? v : v * slope;
}

void tanh_inplace(Tensor& x) {
    for (float& v : x.data()) v = std::tanh(v);
}

void sigmoid_inplace(Tensor& x) {
    for (float& v : x.data()) v = 1.0f / (1.0f + std::exp(-v));
}

void add_inplace(Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) throw DimensionError("add_inplace: size mismatch");
    auto ap = a.data();
    auto bp = b.data();
    for (std::size_t i = 0; i < ap.size(); ++i) ap[i] += bp[i];
}

}  // namespace sac
