#include "sac/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <thread>

#include "sac/errors.hpp"
#include "sac/signals.hpp"
#include "sac/wav.hpp"

namespace sac::cli {

using nlohmann::json;

namespace {

json latency_json(const LatencySummary& s) {
    return json{{"input_chunks", s.input_chunks},
                {"output_chunks", s.output_chunks},
                {"playback_start_seconds", s.playback_start},
                {"min", s.latency_min},
                {"max", s.latency_max},
                {"mean", s.latency_mean},
                {"per_chunk", s.latency},
                {"underruns", s.underruns},
                {"player_ahead_ok", s.ahead_ok},
                {"min_ahead_margin", s.min_ahead_margin}};
}

template <class T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

SessionConfig resolve_config(const std::optional<std::string>& path) {
    if (path) return load_config(*path);
    SessionConfig cfg;
    cfg.link();
    cfg.validate();
    return cfg;
}

std::shared_ptr<const Model> load_model(const SessionConfig& cfg, const std::string& weights) {
    if (weights.empty()) throw UsageError("--weights is required");
    if (!std::filesystem::exists(weights)) throw UsageError("weights file not found: " + weights);
    return std::make_shared<const Model>(cfg, WeightStore::load(weights));
}

void write_report(const RunReport& r, const std::optional<std::string>& path) {
    if (!path) return;
    std::ofstream f(*path);
    if (!f) throw UsageError("cannot write report " + *path);
    f << report_json(r) << "\n";
}

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }
}

// Wall-clock run: chunks are pushed at their arrival times by this thread
// while a player thread drains the session's output queue.
std::vector<float> run_realtime(std::shared_ptr<const Model> model, const std::vector<float>& samples,
                                SessionOptions opts, LatencySummary& latency, std::vector<bool>& speech) {
    using clock = std::chrono::steady_clock;
    const auto& cfg = model->config();
    const std::size_t cs = cfg.chunk_samples();
    const auto cd = std::chrono::nanoseconds(std::llround(cfg.chunk_seconds() * 1e9));
    StreamSession session(model, std::move(opts));
    std::vector<float> out;
    std::vector<double> ready;
    const auto start = clock::now();
    std::thread player([&] {
        while (auto chunk = session.output().pop()) {
            ready.push_back(std::chrono::duration<double>(clock::now() - start).count());
            out.insert(out.end(), chunk->begin(), chunk->end());
        }
    });
    try {
        std::size_t pos = 0, j = 0;
        for (; pos + cs <= samples.size(); pos += cs, ++j) {
            std::this_thread::sleep_until(start + cd * static_cast<long long>(j + 1));
            session.push_chunk(std::span<const float>(samples).subspan(pos, cs));
        }
        if (pos < samples.size()) std::this_thread::sleep_until(start + cd * static_cast<long long>(j + 1));
        session.finalize(std::span<const float>(samples).subspan(pos));
    } catch (...) {
        session.output().close();
        player.join();
        throw;
    }
    player.join();
    latency = playback_from_ready_times(ready, session.events(), cfg.chunk_seconds());
    speech = session.speech_flags();
    return out;
}

}  // namespace

std::string report_json(const RunReport& r) {
    std::size_t speech_chunks = 0;
    for (bool b : r.speech) speech_chunks += b ? 1 : 0;
    json rf{{"past_frames", r.receptive_field.past_frames},
            {"future_frames", r.receptive_field.future_frames},
            {"future_seconds", r.receptive_field.future_seconds},
            {"emformer_future", r.receptive_field.emformer_future},
            {"bottleneck_future", r.receptive_field.bottleneck_future},
            {"vocoder_future", r.receptive_field.vocoder_future}};
    json j{{"schema", 1},
           {"mode", r.mode},
           {"input", optional_json(r.input)},
           {"output", optional_json(r.output)},
           {"sample_rate", r.sample_rate},
           {"chunk_seconds", r.chunk_seconds},
           {"chunks", r.speech.size()},
           {"input_samples", r.input_samples},
           {"output_samples", r.output_samples},
           {"max_abs_diff", optional_json(r.max_abs_diff)},
           {"first_mismatch", optional_json(r.first_mismatch)},
           {"realtime", r.realtime},
           {"mock_rtf", optional_json(r.mock_rtf)},
           {"receptive_field", rf},
           {"vad", json{{"speech_chunks", speech_chunks}, {"flags", r.speech}}}};
    if (r.latency) {
        j["rtf"] = json{{"max", r.latency->rtf_max}, {"mean", r.latency->rtf_mean}, {"per_chunk", r.latency->rtf}};
        j["latency"] = latency_json(*r.latency);
        j["underruns"] = r.latency->underruns;
    } else {
        j["rtf"] = nullptr;
        j["latency"] = nullptr;
        j["underruns"] = nullptr;
    }
    return j.dump(2);
}

Comparison compare(const std::vector<float>& a, const std::vector<float>& b, double tol) {
    Comparison c;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        const double d = std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
        const bool bad = !(d <= tol);
        if (std::isnan(d)) c.max_abs_diff = std::numeric_limits<double>::infinity();
        else c.max_abs_diff = std::max(c.max_abs_diff, d);
        if (bad && !c.first_mismatch) c.first_mismatch = i;
    }
    if (a.size() != b.size()) {
        c.max_abs_diff = std::numeric_limits<double>::infinity();
        if (!c.first_mismatch) c.first_mismatch = n;
    }
    return c;
}

int cmd_init_weights(const InitWeightsOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const SessionConfig cfg = resolve_config(o.config);
        const WeightStore store = Model::random_weights(cfg, o.seed);
        store.save(o.out);
        out << "wrote " << store.count() << " tensors to " << o.out << "\n";
        return int(kOk);
    });
}

int cmd_convert(const ConvertOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (o.mode != "streaming" && o.mode != "offline")
            throw UsageError("--mode must be 'streaming' or 'offline', got '" + o.mode + "'");
        if (o.mode == "offline" && o.realtime) throw UsageError("--realtime applies to streaming mode only");
        const SessionConfig cfg = resolve_config(o.config);
        const auto model = load_model(cfg, o.weights);
        const WavAudio audio = read_wav(o.input, static_cast<std::uint32_t>(cfg.sample_rate));

        RunReport r;
        r.mode = o.mode;
        r.input = o.input;
        r.output = o.output;
        r.sample_rate = cfg.sample_rate;
        r.chunk_seconds = cfg.chunk_seconds();
        r.input_samples = audio.samples.size();
        r.realtime = o.realtime;
        r.mock_rtf = o.mock_rtf;
        r.receptive_field = receptive_field(cfg);

        std::vector<float> result;
        if (o.mode == "offline") {
            auto off = offline_convert_detailed(*model, audio.samples);
            result = std::move(off.samples);
            r.speech = std::move(off.speech);
        } else {
            SessionOptions opts;
            if (o.mock_rtf) opts.compute = mock_compute(*o.mock_rtf, cfg.chunk_seconds());
            if (o.realtime) {
                LatencySummary lat;
                result = run_realtime(model, audio.samples, std::move(opts), lat, r.speech);
                r.latency = lat;
            } else {
                std::vector<ComputeEvent> events;
                result = stream_convert(model, audio.samples, std::move(opts), &events, &r.speech);
                r.latency = simulate_playback(events, cfg.chunk_seconds());
            }
        }
        // Drop the zero-extension to whole chunks.
        result.resize(audio.samples.size());
        r.output_samples = result.size();
        write_wav(o.output, result, static_cast<std::uint32_t>(cfg.sample_rate));
        write_report(r, o.report);
        std::size_t speech = 0;
        for (bool b : r.speech) speech += b ? 1 : 0;
        out << o.mode << ": " << r.speech.size() << " chunks (" << speech << " speech), " << result.size()
            << " samples -> " << o.output << "\n";
        if (r.latency)
            out << "latency mean " << r.latency->latency_mean << " s, max rtf " << r.latency->rtf_max
                << ", underruns " << r.latency->underruns << "\n";
        return int(kOk);
    });
}

int cmd_verify(const VerifyOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const SessionConfig cfg = resolve_config(o.config);
        const auto model = load_model(cfg, o.weights);
        const WavAudio audio = read_wav(o.input, static_cast<std::uint32_t>(cfg.sample_rate));
        SessionOptions opts;
        opts.corrupt_cache_after = o.corrupt_cache_after;
        std::vector<bool> speech;
        const std::vector<float> streamed = stream_convert(model, audio.samples, opts, nullptr, &speech);
        const std::vector<float> reference = offline_convert(*model, audio.samples);
        const Comparison c = compare(streamed, reference);

        RunReport r;
        r.mode = "verify";
        r.input = o.input;
        r.sample_rate = cfg.sample_rate;
        r.chunk_seconds = cfg.chunk_seconds();
        r.input_samples = audio.samples.size();
        r.output_samples = streamed.size();
        r.max_abs_diff = c.max_abs_diff;
        r.first_mismatch = c.first_mismatch;
        r.receptive_field = receptive_field(cfg);
        r.speech = std::move(speech);
        write_report(r, o.report);

        if (audio.samples.empty()) out << "note: zero-length input, nothing to compare\n";
        out << "samples=" << streamed.size() << " max_abs_diff=" << c.max_abs_diff << " first_mismatch=";
        if (c.first_mismatch) out << *c.first_mismatch;
        else out << "none";
        out << "\n";
        const bool pass = c.max_abs_diff <= kVerifyTolerance;
        out << (pass ? "PASS" : "FAIL") << " (tolerance " << kVerifyTolerance << ")\n";
        return int(pass ? kOk : kVerifyFailed);
    });
}

int cmd_bench(const BenchOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (!(o.seconds > 0.0)) throw UsageError("--seconds must be positive");
        const SessionConfig cfg = resolve_config(o.config);
        const auto model = o.weights ? load_model(cfg, *o.weights)
                                     : std::make_shared<const Model>(cfg, Model::random_weights(cfg, o.seed));
        const auto n = static_cast<std::size_t>(std::llround(o.seconds * static_cast<double>(cfg.sample_rate)));
        const std::vector<float> input = seeded_noise(n, o.seed);
        SessionOptions opts;
        if (o.mock_rtf) opts.compute = mock_compute(*o.mock_rtf, cfg.chunk_seconds());
        std::vector<ComputeEvent> events;
        RunReport r;
        const std::vector<float> result = stream_convert(model, input, std::move(opts), &events, &r.speech);
        r.mode = "bench";
        r.sample_rate = cfg.sample_rate;
        r.chunk_seconds = cfg.chunk_seconds();
        r.input_samples = n;
        r.output_samples = result.size();
        r.mock_rtf = o.mock_rtf;
        r.receptive_field = receptive_field(cfg);
        r.latency = simulate_playback(events, cfg.chunk_seconds());
        write_report(r, o.report);
        out << report_json(r) << "\n";
        return int(kOk);
    });
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Streaming accent-conversion runtime"};
    app.require_subcommand(1);

    InitWeightsOptions init;
    auto* init_cmd = app.add_subcommand("init-weights", "Write seeded random weights for a config");
    init_cmd->add_option("--config", init.config, "Config file (default: built-in toy config)");
    init_cmd->add_option("--seed", init.seed, "RNG seed");
    init_cmd->add_option("--out", init.out, "Output weights file")->required();

    ConvertOptions conv;
    auto* conv_cmd = app.add_subcommand("convert", "Convert a PCM16 mono WAV");
    conv_cmd->add_option("input", conv.input, "Input WAV")->required();
    conv_cmd->add_option("output", conv.output, "Output WAV")->required();
    conv_cmd->add_option("--mode", conv.mode, "streaming | offline")->check(CLI::IsMember({"streaming", "offline"}));
    conv_cmd->add_flag("--realtime", conv.realtime, "Pace chunks at wall-clock chunk duration");
    conv_cmd->add_option("--config", conv.config, "Config file");
    conv_cmd->add_option("--weights", conv.weights, "Weights file")->required();
    conv_cmd->add_option("--report", conv.report, "Write a JSON run report here");
    conv_cmd->add_option("--mock-rtf", conv.mock_rtf, "Charge this RTF per chunk instead of measured time");

    VerifyOptions ver;
    auto* ver_cmd = app.add_subcommand("verify", "Check streaming output against offline output");
    ver_cmd->add_option("input", ver.input, "Input WAV")->required();
    ver_cmd->add_option("--config", ver.config, "Config file");
    ver_cmd->add_option("--weights", ver.weights, "Weights file")->required();
    ver_cmd->add_option("--report", ver.report, "Write a JSON run report here");
    ver_cmd->add_option("--corrupt-cache-after", ver.corrupt_cache_after)->group("");

    BenchOptions bench;
    auto* bench_cmd = app.add_subcommand("bench", "Stream seeded noise and report RTF and latency");
    bench_cmd->add_option("--config", bench.config, "Config file");
    bench_cmd->add_option("--weights", bench.weights, "Weights file (default: seeded random)");
    bench_cmd->add_option("--seconds", bench.seconds, "Seconds of input");
    bench_cmd->add_option("--seed", bench.seed, "Seed for input noise and random weights");
    bench_cmd->add_option("--mock-rtf", bench.mock_rtf, "Charge this RTF per chunk instead of measured time");
    bench_cmd->add_option("--report", bench.report, "Also write the report here");

    std::optional<std::string> show_path;
    bool show_full = false;
    auto* show_cmd = app.add_subcommand("print-config", "Print a resolved config and its look-ahead");
    show_cmd->add_option("--config", show_path, "Config file");
    show_cmd->add_flag("--full-scale", show_full, "Use the built-in full-scale config");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kOk;
        }
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    if (*init_cmd) return cmd_init_weights(init, out, err);
    if (*conv_cmd) return cmd_convert(conv, out, err);
    if (*ver_cmd) return cmd_verify(ver, out, err);
    if (*bench_cmd) return cmd_bench(bench, out, err);
    return guarded(err, [&] {
        const SessionConfig cfg = show_full ? full_scale_config() : resolve_config(show_path);
        const ReceptiveField rf = receptive_field(cfg);
        out << format_config(cfg);
        out << "# look-ahead: " << rf.emformer_future << " + " << rf.bottleneck_future << " + " << rf.vocoder_future
            << " = " << rf.future_frames << " frames (" << rf.future_seconds << " s)\n";
        return int(kOk);
    });
}

}  // namespace sac::cli
