#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sac/tensor.hpp"

// Deterministic float32 kernels. Every reduction runs in a fixed sequential
// order, so the same inputs give bit-identical outputs regardless of how many
// rows are batched together. The streaming/offline equivalence relies on this.
namespace sac {

struct ConvSpec {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t kernel_size = 1;
    std::size_t dilation = 1;
    std::size_t stride = 1;  // upsample factor for transposed convolutions
    bool causal = false;

    void validate() const;
    std::size_t receptive_span() const { return dilation * (kernel_size - 1); }
    // Zero padding that keeps output length equal to input length.
    std::size_t same_left_pad() const { return causal ? receptive_span() : receptive_span() / 2; }
    std::size_t same_right_pad() const { return causal ? 0 : receptive_span() / 2; }
};

struct BoolMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> cells;

    BoolMatrix() = default;
    BoolMatrix(std::size_t r, std::size_t c, bool value = false)
        : rows(r), cols(c), cells(r * c, value ? 1 : 0) {}

    bool operator()(std::size_t r, std::size_t c) const { return cells[r * cols + c] != 0; }
    void set(std::size_t r, std::size_t c, bool v) { cells[r * cols + c] = v ? 1 : 0; }
};

// a[M,K] x b[K,N]
Tensor matmul(const Tensor& a, const Tensor& b);

// x[T,in] x w[in,out] + bias[out]; bias may be an empty tensor.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

void add_bias(Tensor& x, const Tensor& bias);

// Valid convolution over x zero-extended by left_pad/right_pad frames.
// x[T,Cin], w[Cout,Cin,K] -> [(T+pads-dilation*(K-1)-1)/stride+1, Cout].
Tensor conv1d(const Tensor& x, const Tensor& w, const ConvSpec& spec, std::size_t left_pad,
              std::size_t right_pad);

// x[T,Cin], w[Cin,Cout,K] -> [T*factor + K - factor, Cout]. Frame t scatters a
// K-tap kernel starting at output row t*factor; overlaps are summed.
Tensor conv1d_transposed(const Tensor& x, const Tensor& w, std::size_t factor);

// Adds one input frame's contribution into acc, a [K, Cout] row-major window
// starting at that frame's first output row. conv1d_transposed is a loop over
// this in frame order, so incremental callers reproduce it bit for bit.
void scatter_transposed_frame(std::span<const float> frame, const Tensor& w,
                              std::span<float> acc);

// softmax(q k^T / sqrt(d)) v restricted to allowed keys.
Tensor masked_softmax_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                const BoolMatrix& mask);

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v);

namespace detail {
// Attention for a single query row over an ascending list of key rows.
void attend_row(std::span<const float> q, const Tensor& k, const Tensor& v,
                std::span<const std::size_t> keys, std::span<float> out,
                std::vector<float>& scratch);
}  // namespace detail

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);

void relu_inplace(Tensor& x);
void leaky_relu_inplace(Tensor& x, float slope);
void tanh_inplace(Tensor& x);
void sigmoid_inplace(Tensor& x);

// a += b, elementwise
void add_inplace(Tensor& a, const Tensor& b);

}  // namespace sac
