#pragma once

#include <cstddef>

#include "sac/kernels.hpp"
#include "sac/tensor.hpp"

namespace sac {

// Input history for one streamed "same"-padded convolution (stride 1).
//
// `rows` starts as the left zero padding and afterwards holds exactly the
// input frames from (next output - left pad) onward, so in steady state it is
// a window of dilation*(K-1) frames. The zero right padding is appended only
// when the stream ends. Outputs are produced with conv1d on the window without
// extra padding, which is the same arithmetic conv1d performs offline with
// symmetric padding.
struct ConvBuffer {
    Tensor rows;
    std::size_t consumed = 0;
    std::size_t emitted = 0;
    bool started = false;
    bool finished = false;
};

// Appends x, returns every output frame whose inputs are now complete. With
// final=true the right zero padding is applied and the buffer is closed.
// `bias` may be empty.
Tensor conv_stream(ConvBuffer& buf, const Tensor& x, const Tensor& w, const Tensor& bias,
                   const ConvSpec& spec, bool final);

// Row FIFO used to line up a residual path with a delayed branch.
class RowQueue {
public:
    explicit RowQueue(std::size_t cols = 0) : rows_(Tensor::zeros(0, cols)) {}
    void push(const Tensor& t) { rows_.append_rows(t); }
    Tensor pop(std::size_t n);
    std::size_t size() const { return rows_.rank() == 2 ? rows_.rows() : 0; }

private:
    Tensor rows_;
};

}  // namespace sac
