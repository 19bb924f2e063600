#include "sac/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "sac/errors.hpp"

namespace sac {

namespace {

SessionConfig linked(SessionConfig cfg) {
    cfg.link();
    cfg.validate();
    return cfg;
}

std::int64_t now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::int64_t seconds_to_ns(double s) { return std::llround(s * 1e9); }

}  // namespace

Model::Model(const SessionConfig& cfg, const WeightStore& store)
    : cfg_(linked(cfg)),
      frontend_(Frontend::from_store(cfg_.sample_rate, cfg_.hop, cfg_.emformer.hidden, cfg_.vocoder.speaker_dim,
                                     cfg_.frontend, store)),
      emformer_(Emformer::from_store(cfg_.emformer, store)),
      wavenet_(WaveNet::from_store(cfg_.wavenet, store)),
      vocoder_(Vocoder::from_store(cfg_.vocoder, store)) {}

void Model::init_weights(const SessionConfig& cfg_in, std::uint64_t seed, WeightStore& store) {
    const SessionConfig cfg = linked(cfg_in);
    WeightInit init(seed);
    Frontend::init_weights(cfg.emformer.hidden, cfg.vocoder.speaker_dim, cfg.frontend, init, store);
    Emformer::init_weights(cfg.emformer, init, store);
    WaveNet::init_weights(cfg.wavenet, init, store);
    Vocoder::init_weights(cfg.vocoder, init, store);
}

WeightStore Model::random_weights(const SessionConfig& cfg, std::uint64_t seed) {
    WeightStore store;
    init_weights(cfg, seed, store);
    return store;
}

SpeakerEmbedding session_speaker_embedding(const Model& model, std::span<const float> chunks,
                                           const std::vector<bool>& speech) {
    const std::size_t cs = model.config().chunk_samples();
    std::vector<float> voiced;
    for (std::size_t c = 0; c < speech.size() && (c + 1) * cs <= chunks.size(); ++c)
        if (speech[c]) voiced.insert(voiced.end(), chunks.begin() + c * cs, chunks.begin() + (c + 1) * cs);
    if (voiced.empty()) return SpeakerEmbedding::neutral(model.config().vocoder.speaker_dim);
    return model.frontend().speaker_embedding(voiced);
}

std::vector<bool> vad_flags(const SessionConfig& cfg, std::span<const float> samples) {
    const std::size_t cs = cfg.chunk_samples();
    Vad vad(cfg.vad);
    std::vector<bool> flags;
    std::vector<float> chunk(cs);
    for (std::size_t start = 0; start < samples.size(); start += cs) {
        const std::size_t n = std::min(cs, samples.size() - start);
        std::fill(chunk.begin(), chunk.end(), 0.0f);
        std::copy_n(samples.begin() + start, n, chunk.begin());
        flags.push_back(vad.update(chunk));
    }
    return flags;
}

OfflineResult offline_convert_detailed(const Model& model, std::span<const float> samples,
                                       const SpeakerEmbedding* g_override) {
    const auto& cfg = model.config();
    const std::size_t cs = cfg.chunk_samples();
    const std::size_t chunks = (samples.size() + cs - 1) / cs;
    OfflineResult r;
    r.speech = vad_flags(cfg, samples);
    if (chunks == 0) {
        r.g = g_override ? *g_override : SpeakerEmbedding::neutral(cfg.vocoder.speaker_dim);
        return r;
    }
    std::vector<float> padded(chunks * cs, 0.0f);
    std::copy(samples.begin(), samples.end(), padded.begin());

    const std::size_t warm = std::min(chunks, cfg.warmup_chunks);
    r.g = g_override ? *g_override
                     : session_speaker_embedding(model, std::span<const float>(padded.data(), warm * cs),
                                                 std::vector<bool>(r.speech.begin(), r.speech.begin() + warm));

    const Tensor feats = model.frontend().features(padded);
    const Tensor enc = model.emformer().offline(feats);
    const Tensor bottleneck = model.wavenet().offline(enc);
    const Tensor wave = model.vocoder().offline(bottleneck, r.g);
    r.samples = wave.values();
    if (cfg.vad.mute)
        for (std::size_t c = 0; c < chunks; ++c)
            if (!r.speech[c]) std::fill_n(r.samples.begin() + c * cs, cs, 0.0f);
    return r;
}

std::vector<float> offline_convert(const Model& model, std::span<const float> samples,
                                   const SpeakerEmbedding* g_override) {
    return offline_convert_detailed(model, samples, g_override).samples;
}

ReceptiveField receptive_field(const SessionConfig& cfg_in) {
    const SessionConfig cfg = linked(cfg_in);
    ReceptiveField rf;
    rf.emformer_future = cfg.emformer.right_context;
    rf.bottleneck_future = cfg.wavenet.future_reach();
    rf.vocoder_future = cfg.vocoder.future_reach();
    rf.future_frames = rf.emformer_future + rf.bottleneck_future + rf.vocoder_future;
    rf.future_seconds = static_cast<double>(rf.future_frames * cfg.hop) / static_cast<double>(cfg.sample_rate);

    // Encoder past: each layer reaches L frames before its segment start; take
    // the last frame of a segment, which sees the most past.
    const long long s = static_cast<long long>(cfg.emformer.segment);
    const long long probe = (1LL << 20) * s + s - 1;
    long long first = probe;
    for (std::size_t l = 0; l < cfg.emformer.num_layers; ++l)
        first = (first / s) * s - static_cast<long long>(cfg.emformer.left_context);
    rf.past_frames = static_cast<std::size_t>(probe - first) + cfg.wavenet.future_reach() + cfg.vocoder.past_reach();
    return rf;
}

void OutputQueue::push(std::vector<float> chunk) {
    {
        std::lock_guard lock(mu_);
        if (closed_) throw StateError("output queue is closed");
        chunks_.push_back(std::move(chunk));
    }
    cv_.notify_all();
}

std::optional<std::vector<float>> OutputQueue::pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return closed_ || !chunks_.empty(); });
    if (chunks_.empty()) return std::nullopt;
    auto c = std::move(chunks_.front());
    chunks_.pop_front();
    return c;
}

std::optional<std::vector<float>> OutputQueue::try_pop() {
    std::lock_guard lock(mu_);
    if (chunks_.empty()) return std::nullopt;
    auto c = std::move(chunks_.front());
    chunks_.pop_front();
    return c;
}

void OutputQueue::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

std::size_t OutputQueue::size() const {
    std::lock_guard lock(mu_);
    return chunks_.size();
}

bool OutputQueue::closed() const {
    std::lock_guard lock(mu_);
    return closed_;
}

ComputeModel mock_compute(double rtf, double chunk_seconds) {
    const std::int64_t cost = seconds_to_ns(rtf * chunk_seconds);
    return [cost](const ComputeEvent& e) -> std::int64_t { return e.finalize ? 0 : cost; };
}

StreamSession::StreamSession(std::shared_ptr<const Model> model, SessionOptions opts)
    : model_(std::move(model)), opts_(std::move(opts)) {
    if (!model_) throw MisuseError("session: null model");
    const auto& cfg = model_->config();
    vad_ = Vad(cfg.vad);
    emformer_state_ = EmformerState::fresh(cfg.emformer);
    wavenet_state_ = StreamConvState::fresh(cfg.wavenet);
    vocoder_state_ = VocoderState::fresh(cfg.vocoder);
}

void StreamSession::run_step(std::span<const float> chunk) {
    const Tensor feats = model_->frontend().features(chunk);
    const Tensor enc = emformer_step(model_->emformer(), emformer_state_, feats);
    const Tensor bottleneck = wavenet_step(model_->wavenet(), wavenet_state_, enc);
    const auto wave = vocoder_step(model_->vocoder(), vocoder_state_, bottleneck, *g_);
    pending_.insert(pending_.end(), wave.begin(), wave.end());
    ++steps_;
}

void StreamSession::initialize_cache() {
    const std::size_t cs = model_->config().chunk_samples();
    std::vector<float> all;
    all.reserve(input_chunks_.size() * cs);
    for (const auto& c : input_chunks_) all.insert(all.end(), c.begin(), c.end());
    std::vector<bool> flags(speech_.begin(), speech_.begin() + static_cast<std::ptrdiff_t>(input_chunks_.size()));
    g_ = std::make_shared<const SpeakerEmbedding>(session_speaker_embedding(*model_, all, flags));
    for (const auto& c : input_chunks_) run_step(c);
    input_chunks_.clear();
    cache_initialized_ = true;
}

void StreamSession::cut_output(std::vector<std::vector<float>>& out, bool all) {
    const auto& cfg = model_->config();
    const std::size_t cs = cfg.chunk_samples();
    std::size_t used = 0;
    while (pending_.size() - used >= cs) {
        std::vector<float> chunk(pending_.begin() + static_cast<std::ptrdiff_t>(used),
                                 pending_.begin() + static_cast<std::ptrdiff_t>(used + cs));
        if (cfg.vad.mute && emitted_ < speech_.size() && !speech_[emitted_]) std::fill(chunk.begin(), chunk.end(), 0.0f);
        queue_.push(chunk);
        out.push_back(std::move(chunk));
        ++emitted_;
        used += cs;
    }
    pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(used));
    if (all && !pending_.empty()) throw StateError("session: output is not a whole number of chunks");
}

void StreamSession::record(bool finalize, std::size_t steps, std::int64_t measured_ns, std::size_t) {
    ComputeEvent e;
    e.finalize = finalize;
    e.input_chunks = received_;
    e.steps = steps;
    e.measured_ns = measured_ns;
    e.outputs_total = emitted_;
    e.compute_ns = opts_.compute ? opts_.compute(e) : measured_ns;
    events_.push_back(e);
}

std::vector<std::vector<float>> StreamSession::push_chunk(std::span<const float> samples) {
    std::lock_guard lock(mu_);
    const auto& cfg = model_->config();
    if (finalized_) throw StateError("session: push after finalize");
    if (samples.size() != cfg.chunk_samples())
        throw ChunkingError("session: chunk has " + std::to_string(samples.size()) + " samples, expected " +
                            std::to_string(cfg.chunk_samples()));
    const std::int64_t t0 = now_ns();
    const std::size_t steps_before = steps_;
    const std::size_t emitted_before = emitted_;
    ++received_;
    speech_.push_back(vad_.update(samples));
    if (!cache_initialized_) {
        input_chunks_.emplace_back(samples.begin(), samples.end());
        if (input_chunks_.size() >= cfg.warmup_chunks) initialize_cache();
    } else {
        run_step(samples);
    }
    std::vector<std::vector<float>> out;
    cut_output(out, false);
    if (opts_.corrupt_cache_after && *opts_.corrupt_cache_after == received_) {
        // Fault injection: a tampered cache must be caught by the verifier.
        Tensor& cache = emformer_state_.key_cache.empty() || emformer_state_.key_cache[0].empty()
                            ? emformer_state_.pending
                            : emformer_state_.key_cache[0];
        for (float& v : cache.data()) v += 1.0f;
    }
    record(false, steps_ - steps_before, now_ns() - t0, emitted_before);
    return out;
}

std::vector<std::vector<float>> StreamSession::finalize(std::span<const float> tail) {
    const std::size_t cs = model_->config().chunk_samples();
    std::vector<std::vector<float>> out;
    if (!tail.empty()) {
        if (tail.size() >= cs)
            throw ChunkingError("session: finalize tail must be shorter than one chunk; push whole chunks");
        std::vector<float> padded(cs, 0.0f);
        std::copy(tail.begin(), tail.end(), padded.begin());
        {
            std::lock_guard lock(mu_);
            if (finalized_) throw StateError("session: finalize called twice");
        }
        out = push_chunk(padded);
    }
    std::lock_guard lock(mu_);
    if (finalized_) throw StateError("session: finalize called twice");
    const std::int64_t t0 = now_ns();
    const std::size_t steps_before = steps_;
    const std::size_t emitted_before = emitted_;
    if (!cache_initialized_ && !input_chunks_.empty()) initialize_cache();
    if (cache_initialized_) {
        Tensor bottleneck = wavenet_step(model_->wavenet(), wavenet_state_,
                                         emformer_flush(model_->emformer(), emformer_state_));
        bottleneck.append_rows(wavenet_flush(model_->wavenet(), wavenet_state_));
        auto wave = vocoder_step(model_->vocoder(), vocoder_state_, bottleneck, *g_);
        pending_.insert(pending_.end(), wave.begin(), wave.end());
        wave = vocoder_flush(model_->vocoder(), vocoder_state_, *g_);
        pending_.insert(pending_.end(), wave.begin(), wave.end());
    }
    cut_output(out, true);
    finalized_ = true;
    queue_.close();
    record(true, steps_ - steps_before, now_ns() - t0, emitted_before);
    return out;
}

bool StreamSession::cache_initialized() const {
    std::lock_guard lock(mu_);
    return cache_initialized_;
}

bool StreamSession::finalized() const {
    std::lock_guard lock(mu_);
    return finalized_;
}

std::size_t StreamSession::chunks_received() const {
    std::lock_guard lock(mu_);
    return received_;
}

std::size_t StreamSession::chunks_emitted() const {
    std::lock_guard lock(mu_);
    return emitted_;
}

std::vector<bool> StreamSession::speech_flags() const {
    std::lock_guard lock(mu_);
    return speech_;
}

std::vector<ComputeEvent> StreamSession::events() const {
    std::lock_guard lock(mu_);
    return events_;
}

std::shared_ptr<const SpeakerEmbedding> StreamSession::speaker() const {
    std::lock_guard lock(mu_);
    return g_;
}

const SpeakerEmbedding* StreamSession::vocoder_bound_speaker() const {
    std::lock_guard lock(mu_);
    return vocoder_state_.last_g;
}

std::vector<float> stream_convert(std::shared_ptr<const Model> model, std::span<const float> samples,
                                  SessionOptions opts, std::vector<ComputeEvent>* events,
                                  std::vector<bool>* speech) {
    StreamSession session(model, std::move(opts));
    const std::size_t cs = model->config().chunk_samples();
    std::vector<float> out;
    out.reserve(((samples.size() + cs - 1) / cs) * cs);
    auto append = [&out](const std::vector<std::vector<float>>& chunks) {
        for (const auto& c : chunks) out.insert(out.end(), c.begin(), c.end());
    };
    std::size_t pos = 0;
    for (; pos + cs <= samples.size(); pos += cs) append(session.push_chunk(samples.subspan(pos, cs)));
    append(session.finalize(samples.subspan(pos)));
    if (events) *events = session.events();
    if (speech) *speech = session.speech_flags();
    return out;
}

namespace {

LatencySummary timeline(const std::vector<std::int64_t>& ready, const std::vector<ComputeEvent>& events,
                        std::int64_t cd, std::size_t lead) {
    LatencySummary s;
    std::size_t pushes = 0;
    double rtf_sum = 0.0;
    for (const auto& e : events) {
        if (e.finalize) continue;
        ++pushes;
        const double r = static_cast<double>(e.compute_ns) / static_cast<double>(cd);
        s.rtf.push_back(r);
        s.rtf_max = std::max(s.rtf_max, r);
        rtf_sum += r;
    }
    s.input_chunks = pushes;
    s.rtf_mean = pushes ? rtf_sum / static_cast<double>(pushes) : 0.0;
    const std::size_t n = ready.size();
    s.output_chunks = n;
    if (n == 0) return s;
    lead = std::max<std::size_t>(1, lead);

    std::vector<std::int64_t> play(n);
    play[0] = ready[std::min(lead, n) - 1];
    for (std::size_t k = 1; k < n; ++k) {
        const std::int64_t due = play[k - 1] + cd;
        if (ready[k] > due) {
            ++s.underruns;
            play[k] = ready[k];
        } else {
            play[k] = due;
        }
    }
    s.playback_start = static_cast<double>(play[0]) * 1e-9;
    double lat_sum = 0.0;
    s.latency_min = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        const double l = static_cast<double>(play[k] - static_cast<std::int64_t>(k) * cd) * 1e-9;
        s.latency.push_back(l);
        s.latency_min = std::min(s.latency_min, l);
        s.latency_max = std::max(s.latency_max, l);
        lat_sum += l;
    }
    s.latency_mean = lat_sum / static_cast<double>(n);

    // At playback start and whenever chunk k-1 finishes playing (k played),
    // the produced count must lead by min(lead, remaining).
    long long worst = std::numeric_limits<long long>::max();
    for (std::size_t k = 0; k < n; ++k) {
        const std::int64_t at = k == 0 ? play[0] : play[k - 1] + cd;
        const auto produced = static_cast<long long>(std::upper_bound(ready.begin(), ready.end(), at) - ready.begin());
        const long long need = static_cast<long long>(k + std::min(lead, n - k));
        worst = std::min(worst, produced - need);
    }
    s.min_ahead_margin = worst;
    s.ahead_ok = worst >= 0;
    return s;
}

}  // namespace

LatencySummary simulate_playback(const std::vector<ComputeEvent>& events, double chunk_seconds, std::size_t lead) {
    const std::int64_t cd = seconds_to_ns(chunk_seconds);
    std::vector<std::int64_t> ready;
    std::int64_t finish = 0;
    for (const auto& e : events) {
        const std::int64_t arrival = static_cast<std::int64_t>(e.input_chunks) * cd;
        finish = std::max(arrival, finish) + e.compute_ns;
        while (ready.size() < e.outputs_total) ready.push_back(finish);
    }
    return timeline(ready, events, cd, lead);
}

LatencySummary playback_from_ready_times(const std::vector<double>& ready_s, const std::vector<ComputeEvent>& events,
                                         double chunk_seconds, std::size_t lead) {
    std::vector<std::int64_t> ready;
    for (double r : ready_s) ready.push_back(seconds_to_ns(r));
    for (std::size_t i = 1; i < ready.size(); ++i) ready[i] = std::max(ready[i], ready[i - 1]);
    return timeline(ready, events, seconds_to_ns(chunk_seconds), lead);
}

}  // namespace sac
