#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sac {

// Dense row-major float32 array. Rank-2 tensors are [rows, cols] and are the
// common currency between components: rows are time frames (or samples),
// cols are channels.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<float> data);

    static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }
    static Tensor vector(std::vector<float> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t rows() const;
    std::size_t cols() const;

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }
    const std::vector<float>& values() const { return data_; }

    std::span<float> row(std::size_t r);
    std::span<const float> row(std::size_t r) const;

    float& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    float operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
    float& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    float operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    // Row operations for rank-2 tensors.
    void append_rows(const Tensor& other);
    void drop_front_rows(std::size_t n);
    Tensor slice_rows(std::size_t begin, std::size_t end) const;
    Tensor slice_cols(std::size_t begin, std::size_t end) const;

    bool operator==(const Tensor&) const = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<float> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

Tensor concat_rows(const Tensor& a, const Tensor& b);

bool all_finite(const Tensor& t);

// Largest absolute elementwise difference; shapes must match.
float max_abs_diff(std::span<const float> a, std::span<const float> b);

}  // namespace sac
