#include "sac/wav.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "sac/errors.hpp"

namespace sac {

namespace {

std::uint32_t le32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

std::int16_t float_to_pcm16(float v) {
    if (std::isnan(v)) return 0;
    // Same 1/32768 scale as decoding, so decode -> encode is lossless.
    const long q = std::lround(static_cast<double>(std::clamp(v, -1.0f, 1.0f)) * 32768.0);
    return static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L));
}

WavAudio decode_wav(const std::vector<std::uint8_t>& b) {
    if (b.size() < 12 || std::string(b.begin(), b.begin() + 4) != "RIFF" ||
        std::string(b.begin() + 8, b.begin() + 12) != "WAVE")
        throw FormatError("not a RIFF/WAVE file");
    std::size_t pos = 12;
    bool have_fmt = false;
    WavAudio out;
    while (pos + 8 <= b.size()) {
        const std::string id(b.begin() + static_cast<std::ptrdiff_t>(pos), b.begin() + static_cast<std::ptrdiff_t>(pos + 4));
        const std::uint32_t size = le32(&b[pos + 4]);
        const std::size_t body = pos + 8;
        if (body + size > b.size()) {
            if (id != "data") throw FormatError("truncated '" + id + "' chunk");
        }
        if (id == "fmt ") {
            if (size < 16) throw FormatError("fmt chunk too short");
            const std::uint16_t format = le16(&b[body]);
            const std::uint16_t channels = le16(&b[body + 2]);
            out.sample_rate = le32(&b[body + 4]);
            const std::uint16_t bits = le16(&b[body + 14]);
            if (format != 1) throw FormatError("only PCM (format 1) WAV is supported, got format " + std::to_string(format));
            if (channels != 1) throw FormatError("only mono WAV is supported, got " + std::to_string(channels) + " channels");
            if (bits != 16) throw FormatError("only 16-bit PCM is supported, got " + std::to_string(bits) + " bits");
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw FormatError("data chunk before fmt chunk");
            // Tolerate writers that leave the size at its placeholder value.
            const std::size_t avail = std::min<std::size_t>(size, b.size() - body);
            const std::size_t n = avail / 2;
            out.samples.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                out.samples[i] = static_cast<float>(static_cast<std::int16_t>(le16(&b[body + 2 * i]))) / 32768.0f;
            return out;
        }
        pos = body + size + (size & 1);
    }
    throw FormatError(have_fmt ? "missing data chunk" : "missing fmt chunk");
}

std::vector<std::uint8_t> encode_wav(const std::vector<float>& samples, std::uint32_t sample_rate) {
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    put_tag(out, "RIFF");
    put32(out, 36 + data_bytes);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put32(out, 16);
    put16(out, 1);
    put16(out, 1);
    put32(out, sample_rate);
    put32(out, sample_rate * 2);
    put16(out, 2);
    put16(out, 16);
    put_tag(out, "data");
    put32(out, data_bytes);
    for (float v : samples) put16(out, static_cast<std::uint16_t>(float_to_pcm16(v)));
    return out;
}

WavAudio read_wav(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot open input file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    try {
        return decode_wav(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

WavAudio read_wav(const std::filesystem::path& path, std::uint32_t expected_rate) {
    WavAudio a = read_wav(path);
    if (a.sample_rate != expected_rate)
        throw FormatError(path.string() + ": sample rate " + std::to_string(a.sample_rate) + " Hz, expected " +
                          std::to_string(expected_rate) + " Hz (resample first)");
    return a;
}

void write_wav(const std::filesystem::path& path, const std::vector<float>& samples, std::uint32_t sample_rate) {
    const auto bytes = encode_wav(samples, sample_rate);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot write output file " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw UsageError("failed writing " + path.string());
}

}  // namespace sac
