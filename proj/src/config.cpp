#include "sac/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sac/errors.hpp"

namespace sac {

void SessionConfig::link() {
    wavenet.in_channels = emformer.hidden;
    vocoder.in_channels = wavenet.out_channels;
}

void SessionConfig::validate() const {
    if (sample_rate == 0 || hop == 0 || chunk_frames == 0)
        throw ConfigError("session: sample_rate, hop and chunk_frames must be positive");
    if (warmup_chunks == 0) throw ConfigError("session: warmup_chunks must be >= 1");
    emformer.validate();
    wavenet.validate();
    vocoder.validate();
    if (chunk_frames != emformer.segment)
        throw ConfigError("session.chunk_frames (" + std::to_string(chunk_frames) +
                          ") must equal emformer.segment (" + std::to_string(emformer.segment) + ")");
    if (vocoder.hop() != hop)
        throw ConfigError("product of vocoder.factors (" + std::to_string(vocoder.hop()) +
                          ") must equal session.hop (" + std::to_string(hop) + ")");
    if (wavenet.in_channels != emformer.hidden || vocoder.in_channels != wavenet.out_channels)
        throw ConfigError("component channel counts are not linked");
    if (frontend.bands == 0) throw ConfigError("frontend.bands must be positive");
    if (!(vad.threshold >= 0.0f)) throw ConfigError("vad.threshold must be >= 0");
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::size_t parse_count(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

float parse_float(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const float f = std::stof(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return f;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    if (trim(v).empty()) return out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_count(key, trim(item)));
    return out;
}

std::string join(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

using Setter = std::function<void(SessionConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto count = [&t](const std::string& k, std::size_t SessionConfig::*m) {
            t[k] = [m](SessionConfig& c, const std::string& key, const std::string& v) { c.*m = parse_count(key, v); };
        };
        count("session.sample_rate", &SessionConfig::sample_rate);
        count("session.hop", &SessionConfig::hop);
        count("session.chunk_frames", &SessionConfig::chunk_frames);
        count("session.warmup_chunks", &SessionConfig::warmup_chunks);
        t["frontend.bands"] = [](SessionConfig& c, auto& k, auto& v) { c.frontend.bands = parse_count(k, v); };
        t["vad.threshold"] = [](SessionConfig& c, auto& k, auto& v) { c.vad.threshold = parse_float(k, v); };
        t["vad.hangover"] = [](SessionConfig& c, auto& k, auto& v) { c.vad.hangover = parse_count(k, v); };
        t["vad.mute"] = [](SessionConfig& c, auto& k, auto& v) { c.vad.mute = parse_bool(k, v); };
        t["emformer.layers"] = [](SessionConfig& c, auto& k, auto& v) { c.emformer.num_layers = parse_count(k, v); };
        t["emformer.hidden"] = [](SessionConfig& c, auto& k, auto& v) { c.emformer.hidden = parse_count(k, v); };
        t["emformer.heads"] = [](SessionConfig& c, auto& k, auto& v) { c.emformer.heads = parse_count(k, v); };
        t["emformer.segment"] = [](SessionConfig& c, auto& k, auto& v) { c.emformer.segment = parse_count(k, v); };
        t["emformer.left"] = [](SessionConfig& c, auto& k, auto& v) { c.emformer.left_context = parse_count(k, v); };
        t["emformer.right"] = [](SessionConfig& c, auto& k, auto& v) { c.emformer.right_context = parse_count(k, v); };
        t["emformer.ff"] = [](SessionConfig& c, auto& k, auto& v) { c.emformer.ff_dim = parse_count(k, v); };
        t["wavenet.channels"] = [](SessionConfig& c, auto& k, auto& v) { c.wavenet.channels = parse_count(k, v); };
        t["wavenet.out_channels"] = [](SessionConfig& c, auto& k, auto& v) { c.wavenet.out_channels = parse_count(k, v); };
        t["wavenet.kernel"] = [](SessionConfig& c, auto& k, auto& v) { c.wavenet.kernel_size = parse_count(k, v); };
        t["wavenet.dilations"] = [](SessionConfig& c, auto& k, auto& v) { c.wavenet.dilations = parse_list(k, v); };
        t["wavenet.gated"] = [](SessionConfig& c, auto& k, auto& v) { c.wavenet.gated = parse_bool(k, v); };
        t["wavenet.residual"] = [](SessionConfig& c, auto& k, auto& v) { c.wavenet.residual = parse_bool(k, v); };
        t["wavenet.skip"] = [](SessionConfig& c, auto& k, auto& v) { c.wavenet.skip = parse_bool(k, v); };
        t["vocoder.channels"] = [](SessionConfig& c, auto& k, auto& v) { c.vocoder.channels = parse_count(k, v); };
        t["vocoder.factors"] = [](SessionConfig& c, auto& k, auto& v) { c.vocoder.upsample_factors = parse_list(k, v); };
        t["vocoder.kernels"] = [](SessionConfig& c, auto& k, auto& v) { c.vocoder.upsample_kernels = parse_list(k, v); };
        t["vocoder.resblock_kernels"] = [](SessionConfig& c, auto& k, auto& v) {
            c.vocoder.resblock_kernels = parse_list(k, v);
        };
        t["vocoder.resblock_dilations"] = [](SessionConfig& c, auto& k, auto& v) {
            c.vocoder.resblock_dilations = parse_list(k, v);
        };
        t["vocoder.pre_kernel"] = [](SessionConfig& c, auto& k, auto& v) { c.vocoder.pre_kernel = parse_count(k, v); };
        t["vocoder.post_kernel"] = [](SessionConfig& c, auto& k, auto& v) { c.vocoder.post_kernel = parse_count(k, v); };
        t["vocoder.speaker_dim"] = [](SessionConfig& c, auto& k, auto& v) { c.vocoder.speaker_dim = parse_count(k, v); };
        return t;
    }();
    return table;
}

}  // namespace

SessionConfig parse_config(const std::string& text) {
    SessionConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end())
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        it->second(cfg, key, value);
    }
    cfg.link();
    cfg.validate();
    return cfg;
}

SessionConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string format_config(const SessionConfig& c) {
    std::ostringstream o;
    auto b = [](bool v) { return v ? "true" : "false"; };
    o << "session.sample_rate = " << c.sample_rate << "\n"
      << "session.hop = " << c.hop << "\n"
      << "session.chunk_frames = " << c.chunk_frames << "\n"
      << "session.warmup_chunks = " << c.warmup_chunks << "\n"
      << "frontend.bands = " << c.frontend.bands << "\n"
      << "vad.threshold = " << c.vad.threshold << "\n"
      << "vad.hangover = " << c.vad.hangover << "\n"
      << "vad.mute = " << b(c.vad.mute) << "\n"
      << "emformer.layers = " << c.emformer.num_layers << "\n"
      << "emformer.hidden = " << c.emformer.hidden << "\n"
      << "emformer.heads = " << c.emformer.heads << "\n"
      << "emformer.segment = " << c.emformer.segment << "\n"
      << "emformer.left = " << c.emformer.left_context << "\n"
      << "emformer.right = " << c.emformer.right_context << "\n"
      << "emformer.ff = " << c.emformer.ff_dim << "\n"
      << "wavenet.channels = " << c.wavenet.channels << "\n"
      << "wavenet.out_channels = " << c.wavenet.out_channels << "\n"
      << "wavenet.kernel = " << c.wavenet.kernel_size << "\n"
      << "wavenet.dilations = " << join(c.wavenet.dilations) << "\n"
      << "wavenet.gated = " << b(c.wavenet.gated) << "\n"
      << "wavenet.residual = " << b(c.wavenet.residual) << "\n"
      << "wavenet.skip = " << b(c.wavenet.skip) << "\n"
      << "vocoder.channels = " << c.vocoder.channels << "\n"
      << "vocoder.factors = " << join(c.vocoder.upsample_factors) << "\n"
      << "vocoder.kernels = " << join(c.vocoder.upsample_kernels) << "\n"
      << "vocoder.resblock_kernels = " << join(c.vocoder.resblock_kernels) << "\n"
      << "vocoder.resblock_dilations = " << join(c.vocoder.resblock_dilations) << "\n"
      << "vocoder.pre_kernel = " << c.vocoder.pre_kernel << "\n"
      << "vocoder.post_kernel = " << c.vocoder.post_kernel << "\n"
      << "vocoder.speaker_dim = " << c.vocoder.speaker_dim << "\n";
    return o.str();
}

SessionConfig full_scale_config() {
    SessionConfig c;
    c.emformer.num_layers = 12;
    c.emformer.hidden = 1024;
    c.emformer.heads = 8;
    c.emformer.segment = 4;
    c.emformer.left_context = 30;
    c.emformer.right_context = 8;
    c.emformer.ff_dim = 4096;
    c.chunk_frames = 4;
    c.frontend.bands = 80;
    c.wavenet.channels = 256;
    c.wavenet.out_channels = 256;
    c.wavenet.kernel_size = 3;
    c.wavenet.dilations = {1, 2, 4, 1, 2, 1};
    c.vocoder.channels = 128;
    c.vocoder.upsample_factors = {8, 8, 5};
    c.vocoder.upsample_kernels = {16, 16, 10};
    c.vocoder.resblock_kernels = {3, 7, 11};
    c.vocoder.resblock_dilations = {1, 3, 5};
    c.vocoder.speaker_dim = 256;
    c.link();
    c.validate();
    return c;
}

}  // namespace sac
