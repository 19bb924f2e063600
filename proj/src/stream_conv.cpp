#include "sac/stream_conv.hpp"

#include "sac/errors.hpp"

namespace sac {

Tensor conv_stream(ConvBuffer& buf, const Tensor& x, const Tensor& w, const Tensor& bias,
                   const ConvSpec& spec, bool final) {
    if (buf.finished) throw StateError("streamed convolution already flushed");
    if (spec.stride != 1) throw ConfigError("streamed convolution requires stride 1");
    if (!buf.started) {
        buf.rows = Tensor::zeros(spec.same_left_pad(), spec.in_channels);
        buf.started = true;
    }
    if (x.rank() == 2 && x.rows() > 0) {
        buf.rows.append_rows(x);
        buf.consumed += x.rows();
    }
    if (final) {
        buf.rows.append_rows(Tensor::zeros(spec.same_right_pad(), spec.in_channels));
        buf.finished = true;
    }
    const std::size_t span = spec.receptive_span();
    if (buf.rows.rows() <= span) return Tensor::zeros(0, spec.out_channels);

    Tensor y = conv1d(buf.rows, w, spec, 0, 0);
    add_bias(y, bias);
    buf.rows.drop_front_rows(y.rows());
    buf.emitted += y.rows();
    return y;
}

Tensor RowQueue::pop(std::size_t n) {
    if (n > size()) throw StateError("row queue underflow");
    Tensor out = rows_.slice_rows(0, n);
    rows_.drop_front_rows(n);
    return out;
}

}  // namespace sac
