#include "sac/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "sac/errors.hpp"

namespace sac {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0f) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_product(shape_))
        throw DimensionError("tensor data length does not match shape");
}

Tensor Tensor::vector(std::vector<float> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw DimensionError("rows() requires a rank-2 tensor");
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw DimensionError("cols() requires a rank-2 tensor");
    return shape_[1];
}

std::span<float> Tensor::row(std::size_t r) {
    return std::span<float>(data_).subspan(r * shape_[1], shape_[1]);
}

std::span<const float> Tensor::row(std::size_t r) const {
    return std::span<const float>(data_).subspan(r * shape_[1], shape_[1]);
}

void Tensor::append_rows(const Tensor& other) {
    if (other.rank() != 2) throw DimensionError("append_rows requires rank-2 tensors");
    if (shape_.empty()) {
        *this = other;
        return;
    }
    if (cols() != other.cols()) throw DimensionError("append_rows: column mismatch");
    data_.insert(data_.end(), other.data_.begin(), other.data_.end());
    shape_[0] += other.shape_[0];
}

void Tensor::drop_front_rows(std::size_t n) {
    if (n > rows()) throw DimensionError("drop_front_rows: not enough rows");
    data_.erase(data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(n * shape_[1]));
    shape_[0] -= n;
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
    if (begin > end || end > rows()) throw DimensionError("slice_rows: range out of bounds");
    const std::size_t c = cols();
    return Tensor({end - begin, c},
                  std::vector<float>(data_.begin() + static_cast<std::ptrdiff_t>(begin * c),
                                     data_.begin() + static_cast<std::ptrdiff_t>(end * c)));
}

Tensor Tensor::slice_cols(std::size_t begin, std::size_t end) const {
    if (begin > end || end > cols()) throw DimensionError("slice_cols: range out of bounds");
    const std::size_t r = rows();
    Tensor out({r, end - begin});
    for (std::size_t i = 0; i < r; ++i) {
        auto src = row(i).subspan(begin, end - begin);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    out.append_rows(b);
    return out;
}

bool all_finite(const Tensor& t) {
    return std::all_of(t.values().begin(), t.values().end(), [](float v) { return std::isfinite(v); });
}

float max_abs_diff(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw DimensionError("max_abs_diff: length mismatch");
    float m = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const float d = std::abs(a[i] - b[i]);
        if (std::isnan(d)) return std::numeric_limits<float>::infinity();
        m = std::max(m, d);
    }
    return m;
}

}  // namespace sac
