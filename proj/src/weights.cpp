#include "sac/weights.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "sac/errors.hpp"

namespace sac {

namespace {

constexpr char kMagic[4] = {'S', 'A', 'C', 'W'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    static_assert(std::is_integral_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += sizeof(T);
        return static_cast<T>(v);
    }

    std::string get_string(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw FormatError("weights file truncated");
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

void WeightStore::put(const std::string& name, Tensor t) {
    if (name.empty() || name.size() > 0xffff) throw ConfigError("weight name length out of range");
    if (t.rank() > 0xff) throw ConfigError("weight rank out of range");
    tensors_[name] = std::move(t);
}

const Tensor& WeightStore::get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ConfigError("missing weight tensor '" + name + "'");
    return it->second;
}

const Tensor& WeightStore::expect(const std::string& name, const std::vector<std::size_t>& shape) const {
    const Tensor& t = get(name);
    if (t.shape() != shape) {
        std::ostringstream msg;
        msg << "weight tensor '" << name << "' has shape [";
        for (std::size_t i = 0; i < t.rank(); ++i) msg << (i ? "," : "") << t.dim(i);
        msg << "], config expects [";
        for (std::size_t i = 0; i < shape.size(); ++i) msg << (i ? "," : "") << shape[i];
        msg << "]";
        throw ConfigError(msg.str());
    }
    return t;
}

std::vector<std::uint8_t> WeightStore::serialize() const {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_le<std::uint32_t>(out, kVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors_.size()));
    for (const auto& [name, t] : tensors_) {
        put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        out.push_back(static_cast<std::uint8_t>(t.rank()));
        for (std::size_t d : t.shape()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        for (float v : t.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

WeightStore WeightStore::deserialize(const std::vector<std::uint8_t>& bytes) {
    Reader in(bytes);
    if (in.get_string(4) != std::string(kMagic, 4)) throw FormatError("not a weights file (bad magic)");
    const auto version = in.get<std::uint32_t>();
    if (version != kVersion) throw FormatError("unsupported weights file version " + std::to_string(version));
    const auto count = in.get<std::uint32_t>();
    WeightStore store;
    for (std::uint32_t n = 0; n < count; ++n) {
        const auto name_len = in.get<std::uint16_t>();
        std::string name = in.get_string(name_len);
        const auto rank = in.get<std::uint8_t>();
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = in.get<std::uint32_t>();
        std::vector<float> data(shape_product(shape));
        for (float& v : data) v = std::bit_cast<float>(in.get<std::uint32_t>());
        if (store.contains(name)) throw FormatError("duplicate weight tensor '" + name + "'");
        store.put(name, Tensor(std::move(shape), std::move(data)));
    }
    if (!in.done()) throw FormatError("trailing bytes after weights");
    return store;
}

void WeightStore::save(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot open '" + path.string() + "' for writing");
    const auto bytes = serialize();
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw UsageError("failed writing '" + path.string() + "'");
}

WeightStore WeightStore::load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot open weights file '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

float WeightInit::next_symmetric() {
    const float unit = static_cast<float>(rng_() >> 8) * (1.0f / 16777216.0f);
    return 2.0f * unit - 1.0f;
}

Tensor WeightInit::uniform(std::vector<std::size_t> shape, std::size_t fan_in, float gain) {
    Tensor t(std::move(shape));
    const float bound = gain / std::sqrt(static_cast<float>(fan_in == 0 ? 1 : fan_in));
    for (float& v : t.data()) v = bound * next_symmetric();
    return t;
}

Tensor WeightInit::constant(std::vector<std::size_t> shape, float value) {
    Tensor t(std::move(shape));
    for (float& v : t.data()) v = value;
    return t;
}

}  // namespace sac
