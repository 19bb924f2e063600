#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sac/tensor.hpp"

namespace sac {

// Named tensor collection backing every model component.
//
// On-disk layout (all integers and floats little-endian):
//   "SACW" | u32 version (=1) | u32 tensor count
//   per tensor: u16 name length | UTF-8 name | u8 rank | u32 dims[rank] | f32 data (row-major)
// Tensors are written in name order so that identical contents give identical bytes.
class WeightStore {
public:
    static constexpr std::uint32_t kVersion = 1;

    void put(const std::string& name, Tensor t);
    bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
    const Tensor& get(const std::string& name) const;
    // get() plus a shape check; a mismatch means weights and config disagree.
    const Tensor& expect(const std::string& name, const std::vector<std::size_t>& shape) const;

    std::size_t count() const { return tensors_.size(); }
    const std::map<std::string, Tensor>& tensors() const { return tensors_; }

    std::vector<std::uint8_t> serialize() const;
    static WeightStore deserialize(const std::vector<std::uint8_t>& bytes);

    void save(const std::filesystem::path& path) const;
    static WeightStore load(const std::filesystem::path& path);

private:
    std::map<std::string, Tensor> tensors_;
};

// Seeded initializer: uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]. Floats are
// derived from raw mt19937 output so files are identical across standard libraries.
class WeightInit {
public:
    explicit WeightInit(std::uint64_t seed) : rng_(static_cast<std::mt19937::result_type>(seed)) {}

    // Bound gain/sqrt(fan_in).
    Tensor uniform(std::vector<std::size_t> shape, std::size_t fan_in, float gain = 1.0f);
    Tensor constant(std::vector<std::size_t> shape, float value);
    // Uniform in [-1, 1).
    float next_symmetric();

private:
    std::mt19937 rng_;
};

}  // namespace sac
