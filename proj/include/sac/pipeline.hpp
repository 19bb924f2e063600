#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "sac/config.hpp"
#include "sac/emformer.hpp"
#include "sac/frontend.hpp"
#include "sac/vocoder.hpp"
#include "sac/wavenet.hpp"
#include "sac/weights.hpp"

namespace sac {

// Frontend, encoder, bottleneck and vocoder built from one weight store.
class Model {
public:
    Model(const SessionConfig& cfg, const WeightStore& store);

    static void init_weights(const SessionConfig& cfg, std::uint64_t seed, WeightStore& store);
    static WeightStore random_weights(const SessionConfig& cfg, std::uint64_t seed);

    const SessionConfig& config() const { return cfg_; }
    const Frontend& frontend() const { return frontend_; }
    const Emformer& emformer() const { return emformer_; }
    const WaveNet& wavenet() const { return wavenet_; }
    const Vocoder& vocoder() const { return vocoder_; }

private:
    SessionConfig cfg_;
    Frontend frontend_;
    Emformer emformer_;
    WaveNet wavenet_;
    Vocoder vocoder_;
};

// g for a session: computed from the speech chunks among `chunks` (flags from
// the VAD); when none of them is speech the neutral embedding is used.
SpeakerEmbedding session_speaker_embedding(const Model& model, std::span<const float> chunks,
                                           const std::vector<bool>& speech);

// Per-chunk VAD flags over `samples` zero-extended to whole chunks.
std::vector<bool> vad_flags(const SessionConfig& cfg, std::span<const float> samples);

struct OfflineResult {
    std::vector<float> samples;
    std::vector<bool> speech;
    SpeakerEmbedding g;
};

// Whole-utterance reference: the input is zero-extended to whole chunks and
// the output has the same length.
OfflineResult offline_convert_detailed(const Model& model, std::span<const float> samples,
                                       const SpeakerEmbedding* g_override = nullptr);
std::vector<float> offline_convert(const Model& model, std::span<const float> samples,
                                   const SpeakerEmbedding* g_override = nullptr);

struct ReceptiveField {
    std::size_t past_frames = 0;
    std::size_t future_frames = 0;
    std::size_t emformer_future = 0;
    std::size_t bottleneck_future = 0;
    std::size_t vocoder_future = 0;
    double future_seconds = 0.0;
};

ReceptiveField receptive_field(const SessionConfig& cfg);

// Thread-safe FIFO of finished output chunks (producer: session, consumer: player).
class OutputQueue {
public:
    void push(std::vector<float> chunk);
    // Blocks until a chunk is available or the queue is closed and drained.
    std::optional<std::vector<float>> pop();
    std::optional<std::vector<float>> try_pop();
    void close();
    std::size_t size() const;
    bool closed() const;

private:
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::vector<float>> chunks_;
    bool closed_ = false;
};

// One call into the session (a pushed chunk or the finalize call).
struct ComputeEvent {
    bool finalize = false;
    std::size_t input_chunks = 0;   // chunks received so far, including this one
    std::size_t steps = 0;          // encoder steps run by this call
    std::int64_t compute_ns = 0;    // charged compute time
    std::int64_t measured_ns = 0;   // wall-clock time actually spent
    std::size_t outputs_total = 0;  // output chunks produced so far, including this call
};

// Maps (event, measured ns) to the compute time charged to the event.
using ComputeModel = std::function<std::int64_t(const ComputeEvent&)>;
// Every push costs rtf * chunk duration; finalize is free.
ComputeModel mock_compute(double rtf, double chunk_seconds);

struct SessionOptions {
    ComputeModel compute;  // default: measured wall-clock time
    // Test hook: after this many pushed chunks, perturb the encoder key cache.
    std::optional<std::size_t> corrupt_cache_after;
};

class StreamSession {
public:
    explicit StreamSession(std::shared_ptr<const Model> model, SessionOptions opts = {});

    // Exactly chunk_samples() samples. Returns the output chunks completed by this call.
    std::vector<std::vector<float>> push_chunk(std::span<const float> samples);
    // Optional short tail (< one chunk) is zero-padded and pushed first.
    std::vector<std::vector<float>> finalize(std::span<const float> tail = {});

    OutputQueue& output() { return queue_; }
    const SessionConfig& config() const { return model_->config(); }
    bool cache_initialized() const;
    bool finalized() const;
    std::size_t chunks_received() const;
    std::size_t chunks_emitted() const;
    std::vector<bool> speech_flags() const;
    std::vector<ComputeEvent> events() const;
    // Null until the warmup completes.
    std::shared_ptr<const SpeakerEmbedding> speaker() const;
    // Address of the g passed to the most recent vocoder call.
    const SpeakerEmbedding* vocoder_bound_speaker() const;

private:
    void run_step(std::span<const float> chunk);
    void initialize_cache();
    void cut_output(std::vector<std::vector<float>>& out, bool all);
    void record(bool finalize, std::size_t steps, std::int64_t measured_ns, std::size_t outputs_before);

    std::shared_ptr<const Model> model_;
    SessionOptions opts_;
    mutable std::mutex mu_;
    OutputQueue queue_;

    std::vector<std::vector<float>> input_chunks_;
    std::vector<bool> speech_;
    Vad vad_;
    bool cache_initialized_ = false;
    bool finalized_ = false;
    std::size_t received_ = 0;
    std::size_t emitted_ = 0;
    std::size_t steps_ = 0;

    std::shared_ptr<const SpeakerEmbedding> g_;
    EmformerState emformer_state_;
    StreamConvState wavenet_state_;
    VocoderState vocoder_state_;
    std::vector<float> pending_;
    std::vector<ComputeEvent> events_;
};

// Streams `samples` through a fresh session chunk by chunk and returns all output.
std::vector<float> stream_convert(std::shared_ptr<const Model> model, std::span<const float> samples,
                                  SessionOptions opts = {}, std::vector<ComputeEvent>* events = nullptr,
                                  std::vector<bool>* speech = nullptr);

// Playback simulation. Pushes arrive at (j+1)*chunk; each call starts when it
// has arrived and the previous call finished. The player starts once `lead`
// output chunks exist and plays one chunk per chunk duration, stalling
// (an underrun) when the next chunk is not ready.
struct LatencySummary {
    std::size_t input_chunks = 0;
    std::size_t output_chunks = 0;
    std::vector<double> rtf;  // per push
    double rtf_max = 0.0;
    double rtf_mean = 0.0;
    std::vector<double> latency;  // per output chunk: playback start - input chunk start, seconds
    double latency_min = 0.0;
    double latency_max = 0.0;
    double latency_mean = 0.0;
    double playback_start = 0.0;  // seconds
    std::size_t underruns = 0;
    // Smallest (produced - played) margin observed at any chunk boundary,
    // relative to min(lead, chunks remaining); >= 0 means the player-ahead rule held.
    long long min_ahead_margin = 0;
    bool ahead_ok = true;
};

LatencySummary simulate_playback(const std::vector<ComputeEvent>& events, double chunk_seconds,
                                 std::size_t lead = 2);

// Same accounting from observed wall-clock ready times (seconds since the first
// chunk's start) of each output chunk.
LatencySummary playback_from_ready_times(const std::vector<double>& ready, const std::vector<ComputeEvent>& events,
                                         double chunk_seconds, std::size_t lead = 2);

}  // namespace sac
