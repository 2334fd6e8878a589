// Copyright 2026 The Relay Authors
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
//
// Deterministic stand-in for an instrumented kernel read path. A scenario
// executes N pinned threads issuing synchronous reads; every request is
// assembled as an integer-nanosecond timeline (call-tree frames, injected
// IRQ/preemption intervals, an off-CPU device wait on page cache misses)
// and emitted exactly as the probe handlers would log it. The injected
// amounts are recorded as ground truth so analyzers can be checked
// against exact expected values.

#ifndef RELAY_SIMULATOR_HPP
#define RELAY_SIMULATOR_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relay/prng.hpp"
#include "relay/profile_config.hpp"
#include "relay/trace_model.hpp"

namespace relay {

/// Read-path layers modeled by the simulator, in stack order. Matches
/// the shipped default layer description.
enum class Layer : uint8_t { Vfs, Mm, Fs, Blk, Req, Drv, Cpy, Io };
constexpr size_t kLayerCount = 8;
constexpr std::array<const char*, kLayerCount> kLayerNames = {
    "vfs", "mm", "fs", "blk", "req", "drv", "cpy", "io"};

inline std::optional<Layer> layer_from_name(std::string_view name) {
    for (size_t i = 0; i < kLayerCount; ++i)
        if (name == kLayerNames[i]) return static_cast<Layer>(i);
    return std::nullopt;
}

struct LayerTiming {
    int64_t mean_ns = 0;
    int64_t jitter_ns = 0;
};

/// One deliberate latency injection: `added_ns` goes into `layer` (an
/// attributable layer name, or "irq" for an extra interrupt) of request
/// `request_index` on `thread`. Spiked requests also run with inflated
/// CPI so hardware counters co-move with the latency.
struct SpikeInjection {
    uint32_t thread = 0;
    uint32_t request_index = 0;
    std::string layer;
    int64_t added_ns = 0;
};

/// External interrupt load. `total_events` interrupts are apportioned
/// across threads by `steering_weights` (largest remainder, so the
/// per-thread counts are exact) and spread evenly over each thread's
/// request-index range [active_begin, active_end).
struct IrqModel {
    uint64_t total_events = 0;
    std::vector<uint64_t> steering_weights;
    int64_t duration_mean_ns = 0;
    int64_t duration_jitter_ns = 0;
    uint32_t active_begin = 0;
    uint32_t active_end = 0; // 0 means requests_per_thread
};

struct SchedModel {
    uint32_t preempt_permille = 0;
    int64_t duration_mean_ns = 0;
    int64_t duration_jitter_ns = 0;
};

struct DeviceModel {
    int64_t wait_base_ns = 0;
    int64_t wait_spread_ns = 0;
    uint32_t hiccup_permille = 0;
    int64_t hiccup_base_ns = 0;
    int64_t hiccup_spread_ns = 0;
    int64_t completion_irq_mean_ns = 0;
    int64_t completion_irq_jitter_ns = 0;
    int64_t wakeup_mean_ns = 0;
    int64_t wakeup_jitter_ns = 0;
};

struct CacheModel {
    uint32_t miss_permille = 0;
    /// Chance of a correlated episode that doubles every layer's drawn
    /// self time for one request (batched all-layer slowdown tails).
    uint32_t correlated_slowdown_permille = 0;
};

/// Hardware-counter advancement rates. Cycles tick uniformly; the
/// instruction rate depends on what the cpu is doing, which is what
/// makes CPI trace the injected anomalies.
struct HwModel {
    uint32_t cycles_per_10ns = 26; // 2.6 GHz
    uint32_t instr_base_per_100ns = 289;
    uint32_t instr_spiked_per_100ns = 160;
    uint32_t instr_irq_per_100ns = 52;
    uint32_t instr_idle_per_100ns = 26;
    uint32_t instr_user_per_100ns = 200;
};

enum class AccessPattern : uint8_t { Sequential, Random };

struct ScenarioConfig {
    std::string name = "custom";
    uint32_t threads = 1;
    uint32_t requests_per_thread = 1;
    AccessPattern pattern = AccessPattern::Sequential;
    CacheModel cache;
    std::array<LayerTiming, kLayerCount> layer_base_latencies{};
    std::vector<SpikeInjection> spike_injections;
    IrqModel irq_model;
    SchedModel sched_model;
    DeviceModel device_model;
    ProbeDepth depth{ProbeDepth::kMax};
    uint64_t seed = 42;

    uint32_t pid = 4242;
    uint32_t tid_base = 4301;
    uint64_t start_ts_ns = 1'000'000;
    uint64_t thread_start_stagger_ns = 557;
    int64_t gap_mean_ns = 1'000;
    int64_t gap_jitter_ns = 200;
    HwModel hw;
    /// Probe set whose depth ranks gate function records; empty probes
    /// means the shipped default script.
    ProfileDescription profile;

    LayerTiming& layer(Layer l) { return layer_base_latencies[static_cast<size_t>(l)]; }
    const LayerTiming& layer(Layer l) const { return layer_base_latencies[static_cast<size_t>(l)]; }
    const ProfileDescription& effective_profile() const {
        return profile.probes.empty() ? default_profile_script() : profile;
    }
};

/// Per-request injected amounts; the oracle half of every analyzer test.
/// total_ns always equals the sum of the components, exactly.
struct TruthEntry {
    uint64_t rid = 0;
    uint32_t thread_index = 0;
    uint32_t pid = 0;
    uint32_t tid = 0;
    uint16_t cpu = 0;
    uint64_t start_ts = 0;
    uint64_t end_ts = 0;
    std::array<int64_t, kLayerCount> layer_self_ns{};
    int64_t irq_ns = 0;
    uint32_t irq_count = 0;
    int64_t sched_ns = 0;
    int64_t io_wait_ns = 0;
    int64_t total_ns = 0;
    bool miss = false;
    bool spiked = false;
    std::string spike_layer; // empty when not spiked

    int64_t component_sum() const {
        int64_t s = irq_ns + sched_ns + io_wait_ns;
        for (int64_t v : layer_self_ns) s += v;
        return s;
    }
};

struct GroundTruth {
    std::vector<TruthEntry> entries; // ordered by start_ts

    std::map<uint32_t, uint64_t> irq_counts_by_tid() const {
        std::map<uint32_t, uint64_t> out;
        for (const auto& e : entries) out[e.tid] += e.irq_count;
        return out;
    }
    std::map<uint32_t, int64_t> irq_ns_by_tid() const {
        std::map<uint32_t, int64_t> out;
        for (const auto& e : entries) out[e.tid] += e.irq_ns;
        return out;
    }
};

struct SimResult {
    std::vector<TraceRecord> records; // canonical (ts, cpu) order
    GroundTruth truth;
    FunctionInterner interner;
    ScenarioConfig config;
};

namespace detail {

// Names of the always-on kernel-activity probes. These never belong to
// an attributable layer.
constexpr const char* kSyscallFunc = "sys_read";
constexpr const char* kIrqFunc = "common_interrupt";
constexpr const char* kSchedFunc = "finish_task_switch";
constexpr const char* kSubmitFunc = "blk_account_io_start";
constexpr const char* kCompleteFunc = "blk_mq_complete_request";

/// Largest-remainder apportionment of `total` by `weights`. When the
/// weights themselves sum to `total` the result is the weights verbatim.
inline std::vector<uint64_t> apportion(uint64_t total, const std::vector<uint64_t>& weights) {
    std::vector<uint64_t> counts(weights.size(), 0);
    unsigned __int128 wsum = 0;
    for (uint64_t w : weights) wsum += w;
    if (wsum == 0 || total == 0) return counts;
    std::vector<std::pair<uint64_t, size_t>> remainders; // (remainder, index)
    uint64_t assigned = 0;
    for (size_t i = 0; i < weights.size(); ++i) {
        unsigned __int128 num = static_cast<unsigned __int128>(total) * weights[i];
        counts[i] = static_cast<uint64_t>(num / wsum);
        remainders.push_back({static_cast<uint64_t>(num % wsum), i});
        assigned += counts[i];
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (size_t k = 0; assigned < total && k < remainders.size(); ++k, ++assigned)
        counts[remainders[k].second] += 1;
    return counts;
}

/// Evenly spreads `hits` over `span` slots; slot k receives
/// floor((k+1)h/n) - floor(kh/n) hits.
inline uint32_t hits_for_slot(uint64_t slot, uint64_t span, uint64_t hits) {
    if (span == 0) return 0;
    return static_cast<uint32_t>(((slot + 1) * hits) / span - (slot * hits) / span);
}

} // namespace detail

inline void validate_scenario(const ScenarioConfig& cfg) {
    auto reject = [](const std::string& why) {
        throw std::invalid_argument("invalid scenario: " + why);
    };
    if (cfg.threads < 1 || cfg.threads > 256) reject("threads must be 1..256");
    if (cfg.requests_per_thread < 1) reject("requests_per_thread must be >= 1");
    if (cfg.cache.miss_permille > 1000) reject("miss_permille over 1000");
    if (cfg.cache.correlated_slowdown_permille > 1000) reject("correlated_slowdown_permille over 1000");
    if (cfg.sched_model.preempt_permille > 1000) reject("preempt_permille over 1000");
    if (cfg.depth.level < ProbeDepth::kMin || cfg.depth.level > ProbeDepth::kMax) reject("bad probe depth");
    for (const auto& lt : cfg.layer_base_latencies)
        if (lt.mean_ns < 0 || lt.jitter_ns < 0) reject("negative layer latency");
    if (cfg.irq_model.total_events > 0) {
        if (cfg.irq_model.steering_weights.size() != cfg.threads)
            reject("steering_weights must have one entry per thread");
        uint64_t sum = 0;
        for (uint64_t w : cfg.irq_model.steering_weights) sum += w;
        if (sum == 0) reject("steering weights sum to zero");
        if (cfg.irq_model.duration_mean_ns <= 0) reject("irq duration mean must be positive");
        uint32_t end = cfg.irq_model.active_end ? cfg.irq_model.active_end : cfg.requests_per_thread;
        if (cfg.irq_model.active_begin >= end || end > cfg.requests_per_thread)
            reject("irq active range outside request range");
    }
    if (cfg.sched_model.preempt_permille > 0 && cfg.sched_model.duration_mean_ns <= 0)
        reject("sched duration mean must be positive");
    bool needs_device = cfg.cache.miss_permille > 0;
    for (const auto& s : cfg.spike_injections) {
        if (s.thread >= cfg.threads) reject("spike thread out of range");
        if (s.request_index >= cfg.requests_per_thread) reject("spike request index out of range");
        if (s.added_ns <= 0) reject("spike added_ns must be positive");
        if (s.layer == "irq") continue;
        auto l = layer_from_name(s.layer);
        if (!l) reject("spike layer '" + s.layer + "' unknown");
        if (*l != Layer::Vfs && *l != Layer::Mm && *l != Layer::Cpy) needs_device = true;
    }
    if (needs_device) {
        const auto& d = cfg.device_model;
        if (d.wait_base_ns <= 0) reject("device wait base must be positive for miss scenarios");
        if (d.wait_spread_ns < 0 || d.hiccup_base_ns < 0 || d.hiccup_spread_ns < 0 ||
            d.completion_irq_mean_ns < 0 || d.wakeup_mean_ns < 0)
            reject("negative device model field");
        if (d.hiccup_permille > 1000) reject("hiccup_permille over 1000");
    }
    if (cfg.gap_mean_ns < 0 || cfg.gap_jitter_ns < 0) reject("negative inter-request gap");
}

namespace detail {

struct Insertion {
    enum class Kind : uint8_t { Irq, Sched } kind;
    int64_t offset; // position within the request's on-cpu run time
    int64_t duration;
    uint32_t seq; // stable order for equal offsets
};

struct IoEpisode {
    int64_t device_wait = 0;
    int64_t irq_duration = 0;
    int64_t wakeup = 0;
};

// One modeled call-tree node. Children interleave with the node's own
// run slices: slice, child, slice, child, ..., slice.
struct CallNode {
    Layer layer;
    FunctionId func;
    std::vector<CallNode> children;
    bool has_episode = false; // the io episode sits before the last slice
};

class ThreadEmitter {
public:
    ThreadEmitter(const ScenarioConfig& cfg, const FunctionInterner& interner, uint32_t thread_index)
        : cfg_(cfg), interner_(interner), thread_(thread_index),
          rng_(SplitMix64::mix(cfg.seed, thread_index)),
          cpu_(static_cast<uint16_t>(thread_index)),
          tid_(cfg.tid_base + thread_index),
          clock_(cfg.start_ts_ns + thread_index * cfg.thread_start_stagger_ns) {
        f_syscall_ = interner.find(kSyscallFunc);
        f_irq_ = interner.find(kIrqFunc);
        f_sched_ = interner.find(kSchedFunc);
        f_submit_ = interner.find(kSubmitFunc);
        f_complete_ = interner.find(kCompleteFunc);
        depth_by_func_.assign(interner.size() + 1, 1);
        for (const auto& p : cfg.effective_profile().probes)
            if (FunctionId id = interner.find(p.function); id != 0)
                depth_by_func_[id] = static_cast<uint8_t>(p.depth);
        uint32_t end = cfg.irq_model.active_end ? cfg.irq_model.active_end : cfg.requests_per_thread;
        irq_active_begin_ = cfg.irq_model.active_begin;
        irq_active_span_ = end - cfg.irq_model.active_begin;
        if (cfg.irq_model.total_events > 0)
            irq_quota_ = apportion(cfg.irq_model.total_events, cfg.irq_model.steering_weights)[thread_index];
        for (const auto& s : cfg.spike_injections)
            if (s.thread == thread_index) spikes_[s.request_index] = &s;
    }

    void run(std::vector<TraceRecord>& records, std::vector<TruthEntry>& truth) {
        records_ = &records;
        for (uint32_t r = 0; r < cfg_.requests_per_thread; ++r) {
            advance(std::max<int64_t>(1, rng_.jittered(cfg_.gap_mean_ns, cfg_.gap_jitter_ns)),
                    cfg_.hw.instr_user_per_100ns);
            truth.push_back(emit_request(r));
        }
    }

private:
    void advance(int64_t ns, uint32_t instr_rate_per_100ns) {
        clock_ += static_cast<uint64_t>(ns);
        cycles_tenths_ += static_cast<uint64_t>(ns) * cfg_.hw.cycles_per_10ns;
        instr_hundredths_ += static_cast<uint64_t>(ns) * instr_rate_per_100ns;
    }

    HwSample hw_now() const {
        return HwSample{cycles_tenths_ / 10, instr_hundredths_ / 100};
    }

    void emit(EventKind kind, FunctionId func, uint64_t rid, uint32_t pid, uint32_t tid) {
        records_->push_back(TraceRecord{kind, cpu_, pid, tid, func, rid, clock_, hw_now()});
    }
    void emit_owner(EventKind kind, FunctionId func, uint64_t rid) {
        emit(kind, func, rid, cfg_.pid, tid_);
    }

    bool func_active(FunctionId f) const {
        // Probe depth gating: function frames of layers deeper than the
        // configured level are not instrumented. Depth ranks follow the
        // shipped default script (layer rank == probe depth).
        int depth = f < depth_by_func_.size() ? depth_by_func_[f] : 1;
        return depth <= cfg_.depth.level;
    }

    // --- request assembly -------------------------------------------------

    TruthEntry emit_request(uint32_t req_index) {
        const SpikeInjection* spike = nullptr;
        if (auto it = spikes_.find(req_index); it != spikes_.end()) spike = it->second;

        // Draw order is fixed; identical configs replay identical streams.
        bool miss = rng_.chance_permille(cfg_.cache.miss_permille);
        if (spike && spike->layer != "irq") {
            // A spike into a miss-only layer forces the request down the
            // miss path so the time has a frame to land in.
            Layer l = *layer_from_name(spike->layer);
            if (l != Layer::Vfs && l != Layer::Mm && l != Layer::Cpy) miss = true;
        }

        std::array<int64_t, kLayerCount> selfs{};
        auto on_path = [&](Layer l) {
            if (!miss)
                return l == Layer::Vfs || l == Layer::Mm || l == Layer::Cpy;
            return true;
        };
        for (size_t i = 0; i < kLayerCount; ++i) {
            const auto& lt = cfg_.layer_base_latencies[i];
            if (!on_path(static_cast<Layer>(i)) || (lt.mean_ns == 0 && lt.jitter_ns == 0)) continue;
            selfs[i] = rng_.jittered(lt.mean_ns, lt.jitter_ns);
        }
        bool slowed = cfg_.cache.correlated_slowdown_permille > 0 &&
                      rng_.chance_permille(cfg_.cache.correlated_slowdown_permille);
        if (slowed)
            for (auto& v : selfs) v *= 2;

        TruthEntry truth;
        truth.thread_index = thread_;
        truth.pid = cfg_.pid;
        truth.tid = tid_;
        truth.cpu = cpu_;
        truth.miss = miss;

        std::vector<Insertion> insertions;
        uint32_t seq = 0;

        int64_t spike_irq_ns = 0;
        if (spike) {
            truth.spiked = true;
            truth.spike_layer = spike->layer;
            if (auto l = layer_from_name(spike->layer))
                selfs[static_cast<size_t>(*l)] += spike->added_ns;
            else
                spike_irq_ns = spike->added_ns; // extra interrupt
        }

        int64_t on_cpu_total = 0;
        for (int64_t v : selfs) on_cpu_total += v;

        // Steered external interrupts for this request.
        uint32_t hits = 0;
        if (irq_quota_ > 0 && req_index >= irq_active_begin_ &&
            req_index < irq_active_begin_ + irq_active_span_)
            hits = hits_for_slot(req_index - irq_active_begin_, irq_active_span_, irq_quota_);
        for (uint32_t h = 0; h < hits; ++h) {
            int64_t dur = rng_.jittered(cfg_.irq_model.duration_mean_ns, cfg_.irq_model.duration_jitter_ns);
            insertions.push_back({Insertion::Kind::Irq, static_cast<int64_t>(rng_.bounded(on_cpu_total + 1)),
                                  dur, seq++});
        }
        if (spike_irq_ns > 0)
            insertions.push_back({Insertion::Kind::Irq, static_cast<int64_t>(rng_.bounded(on_cpu_total + 1)),
                                  spike_irq_ns, seq++});
        if (rng_.chance_permille(cfg_.sched_model.preempt_permille)) {
            int64_t dur = rng_.jittered(cfg_.sched_model.duration_mean_ns, cfg_.sched_model.duration_jitter_ns);
            if (dur > 0)
                insertions.push_back({Insertion::Kind::Sched, static_cast<int64_t>(rng_.bounded(on_cpu_total + 1)),
                                      dur, seq++});
        }

        IoEpisode episode;
        if (miss) {
            const auto& d = cfg_.device_model;
            episode.device_wait = d.wait_base_ns + static_cast<int64_t>(rng_.bounded(d.wait_spread_ns + 1));
            if (rng_.chance_permille(d.hiccup_permille))
                episode.device_wait += d.hiccup_base_ns + static_cast<int64_t>(rng_.bounded(d.hiccup_spread_ns + 1));
            episode.irq_duration = rng_.jittered(d.completion_irq_mean_ns, d.completion_irq_jitter_ns);
            episode.wakeup = rng_.jittered(d.wakeup_mean_ns, d.wakeup_jitter_ns);
        }

        std::stable_sort(insertions.begin(), insertions.end(), [](const Insertion& a, const Insertion& b) {
            if (a.offset != b.offset) return a.offset < b.offset;
            return a.seq < b.seq;
        });

        // Emit.
        truth.start_ts = clock_;
        const uint64_t rid = RequestId::make(clock_, cpu_);
        truth.rid = rid;
        emit_owner(EventKind::SyscallEnter, f_syscall_, rid);

        const uint32_t run_rate = truth.spiked ? cfg_.hw.instr_spiked_per_100ns : cfg_.hw.instr_base_per_100ns;
        EmitCursor cur{rid, run_rate, selfs, insertions, 0, 0, &truth, miss ? &episode : nullptr};
        CallNode tree = build_tree(miss);
        emit_node(tree, cur);
        // Anything not consumed by the walk (possible only with an
        // all-zero-latency degenerate request) lands here.
        flush_insertions(cur, std::numeric_limits<int64_t>::max());

        emit_owner(EventKind::SyscallExit, f_syscall_, rid);
        truth.end_ts = clock_;
        truth.total_ns = static_cast<int64_t>(truth.end_ts - truth.start_ts);
        truth.layer_self_ns = selfs;
        if (truth.total_ns != truth.component_sum())
            throw std::logic_error("simulator accounting drift on rid " + std::to_string(rid));
        return truth;
    }

    struct EmitCursor {
        uint64_t rid;
        uint32_t run_rate;
        std::array<int64_t, kLayerCount>& selfs;
        std::vector<Insertion>& insertions;
        size_t next_insertion;
        int64_t run_progress;
        TruthEntry* truth;
        const IoEpisode* episode;
    };

    CallNode build_tree(bool miss) {
        auto fid = [&](const char* n) { return interner_.find(n); };
        auto leaf = [&](Layer l, const char* n) { return CallNode{l, fid(n), {}, false}; };
        CallNode get_pages = leaf(Layer::Mm, "filemap_get_pages");
        get_pages.children.push_back(leaf(Layer::Mm, "filemap_get_folio"));
        if (miss) {
            get_pages.children.push_back(leaf(Layer::Fs, "ext4_iomap_begin"));
            CallNode submit = leaf(Layer::Blk, "submit_bio");
            CallNode mq = leaf(Layer::Req, "blk_mq_submit_bio");
            mq.children.push_back(leaf(Layer::Req, "blk_mq_get_tag"));
            CallNode start = leaf(Layer::Req, "blk_mq_start_request");
            start.children.push_back(leaf(Layer::Drv, "scsi_queue_rq"));
            mq.children.push_back(std::move(start));
            submit.children.push_back(std::move(mq));
            get_pages.children.push_back(std::move(submit));
            CallNode iosched = leaf(Layer::Io, "io_schedule");
            iosched.has_episode = true;
            get_pages.children.push_back(std::move(iosched));
        }
        CallNode filemap_read = leaf(Layer::Mm, "filemap_read");
        filemap_read.children.push_back(std::move(get_pages));
        filemap_read.children.push_back(leaf(Layer::Cpy, "copy_page_to_iter"));
        CallNode generic = leaf(Layer::Mm, "generic_file_read_iter");
        generic.children.push_back(std::move(filemap_read));
        CallNode top = leaf(Layer::Vfs, "ksys_read");
        CallNode vfs_read = leaf(Layer::Vfs, "vfs_read");
        if (miss) {
            CallNode ext4 = leaf(Layer::Fs, "ext4_file_read_iter");
            ext4.children.push_back(std::move(generic));
            vfs_read.children.push_back(std::move(ext4));
        } else {
            vfs_read.children.push_back(std::move(generic));
        }
        top.children.push_back(std::move(vfs_read));
        return top;
    }

    // Counts self slices per layer so each layer's drawn self time can be
    // split exactly across its frames.
    void count_slices(const CallNode& n, std::array<int64_t, kLayerCount>& counts,
                      const std::array<int64_t, kLayerCount>& selfs) {
        if (include_node(n, selfs))
            counts[static_cast<size_t>(n.layer)] +=
                static_cast<int64_t>(n.children.size()) + (n.has_episode ? 1 : 0) + 1;
        for (const auto& c : n.children) count_slices(c, counts, selfs);
    }

    bool include_node(const CallNode& n, const std::array<int64_t, kLayerCount>& selfs) const {
        if (n.has_episode) return true;
        if (selfs[static_cast<size_t>(n.layer)] > 0) return true;
        for (const auto& c : n.children)
            if (include_node(c, selfs)) return true;
        return false;
    }

    void emit_node(const CallNode& root, EmitCursor& cur) {
        std::array<int64_t, kLayerCount> slice_counts{};
        count_slices(root, slice_counts, cur.selfs);
        std::array<int64_t, kLayerCount> remaining = cur.selfs;
        std::array<int64_t, kLayerCount> remaining_slices = slice_counts;
        walk(root, cur, remaining, remaining_slices);
    }

    void walk(const CallNode& n, EmitCursor& cur, std::array<int64_t, kLayerCount>& remaining,
              std::array<int64_t, kLayerCount>& remaining_slices) {
        const bool included = include_node(n, cur.selfs);
        const size_t li = static_cast<size_t>(n.layer);
        auto run_slice = [&] {
            if (!included) return;
            int64_t slice = remaining_slices[li] > 0 ? remaining[li] / remaining_slices[li] : 0;
            if (remaining_slices[li] == 1) slice = remaining[li];
            remaining[li] -= slice;
            remaining_slices[li] -= 1;
            run(slice, cur);
        };
        if (included && func_active(n.func)) emit_owner(EventKind::FuncEntry, n.func, cur.rid);
        for (const CallNode& child : n.children) {
            if (included) run_slice();
            walk(child, cur, remaining, remaining_slices);
        }
        if (n.has_episode && cur.episode) {
            if (included) run_slice();
            emit_io_episode(*cur.episode, cur);
        }
        if (included) run_slice();
        if (included && func_active(n.func)) emit_owner(EventKind::FuncExit, n.func, cur.rid);
    }

    /// Advances on-cpu run time by `ns`, splitting at insertion offsets.
    void run(int64_t ns, EmitCursor& cur) {
        int64_t end = cur.run_progress + ns;
        flush_insertions(cur, cur.run_progress);
        while (cur.next_insertion < cur.insertions.size() &&
               cur.insertions[cur.next_insertion].offset <= end) {
            const Insertion& ins = cur.insertions[cur.next_insertion];
            int64_t pre = ins.offset - cur.run_progress;
            if (pre > 0) {
                advance(pre, cur.run_rate);
                cur.run_progress += pre;
            }
            apply_insertion(ins, cur);
            ++cur.next_insertion;
        }
        if (end > cur.run_progress) {
            advance(end - cur.run_progress, cur.run_rate);
            cur.run_progress = end;
        }
    }

    void flush_insertions(EmitCursor& cur, int64_t upto) {
        while (cur.next_insertion < cur.insertions.size() &&
               cur.insertions[cur.next_insertion].offset <= upto) {
            apply_insertion(cur.insertions[cur.next_insertion], cur);
            ++cur.next_insertion;
        }
    }

    void apply_insertion(const Insertion& ins, EmitCursor& cur) {
        if (ins.kind == Insertion::Kind::Irq) {
            emit(EventKind::IrqEnter, f_irq_, RequestId::kNone, cfg_.pid, tid_);
            advance(ins.duration, cfg_.hw.instr_irq_per_100ns);
            emit(EventKind::IrqExit, f_irq_, RequestId::kNone, cfg_.pid, tid_);
            cur.truth->irq_ns += ins.duration;
            cur.truth->irq_count += 1;
        } else {
            emit_owner(EventKind::SchedOut, f_sched_, cur.rid);
            advance(ins.duration, cfg_.hw.instr_idle_per_100ns);
            emit_owner(EventKind::SchedIn, f_sched_, cur.rid);
            cur.truth->sched_ns += ins.duration;
        }
    }

    void emit_io_episode(const IoEpisode& ep, EmitCursor& cur) {
        emit_owner(EventKind::OffcpuSubmit, f_submit_, cur.rid);
        emit_owner(EventKind::SchedOut, f_sched_, cur.rid);
        advance(ep.device_wait, cfg_.hw.instr_idle_per_100ns);
        // Completion interrupt fires on this cpu while the issuing thread
        // sleeps; the handler context is the idle task.
        emit(EventKind::IrqEnter, f_irq_, RequestId::kNone, 0, 0);
        int64_t first_half = ep.irq_duration / 2;
        advance(first_half, cfg_.hw.instr_irq_per_100ns);
        emit(EventKind::OffcpuComplete, f_complete_, cur.rid, 0, 0);
        advance(ep.irq_duration - first_half, cfg_.hw.instr_irq_per_100ns);
        emit(EventKind::IrqExit, f_irq_, RequestId::kNone, 0, 0);
        advance(ep.wakeup, cfg_.hw.instr_idle_per_100ns);
        emit_owner(EventKind::SchedIn, f_sched_, cur.rid);
        cur.truth->irq_ns += ep.irq_duration;
        cur.truth->irq_count += 1;
        cur.truth->io_wait_ns += ep.device_wait + ep.wakeup;
    }

    const ScenarioConfig& cfg_;
    const FunctionInterner& interner_;
    uint32_t thread_;
    SplitMix64 rng_;
    uint16_t cpu_;
    uint32_t tid_;
    uint64_t clock_;
    uint64_t cycles_tenths_ = 0;
    uint64_t instr_hundredths_ = 0;
    std::vector<TraceRecord>* records_ = nullptr;
    FunctionId f_syscall_ = 0, f_irq_ = 0, f_sched_ = 0, f_submit_ = 0, f_complete_ = 0;
    uint64_t irq_quota_ = 0;
    uint32_t irq_active_begin_ = 0;
    uint32_t irq_active_span_ = 0;
    std::map<uint32_t, const SpikeInjection*> spikes_;
    std::vector<uint8_t> depth_by_func_;
};

} // namespace detail

/// Runs a scenario. The record stream is canonically ordered, passes
/// validate_stream at every depth, and replays bit-identically for the
/// same config (the probe depth only filters function records out of the
/// emission; it never shifts the timeline).
inline SimResult simulate(const ScenarioConfig& cfg) {
    validate_scenario(cfg);

    SimResult result;
    result.config = cfg;
    // Fixed interning order keeps wire string tables reproducible.
    result.interner.intern(detail::kSyscallFunc);
    result.interner.intern(detail::kIrqFunc);
    result.interner.intern(detail::kSchedFunc);
    result.interner.intern(detail::kSubmitFunc);
    result.interner.intern(detail::kCompleteFunc);
    for (const auto& p : default_profile_script().probes) result.interner.intern(p.function);

    std::vector<std::vector<TraceRecord>> per_thread(cfg.threads);
    for (uint32_t t = 0; t < cfg.threads; ++t) {
        per_thread[t].reserve(cfg.requests_per_thread * 24);
        detail::ThreadEmitter emitter(cfg, result.interner, t);
        emitter.run(per_thread[t], result.truth.entries);
    }
    size_t total = 0;
    for (const auto& v : per_thread) total += v.size();
    result.records.reserve(total);
    for (auto& v : per_thread)
        result.records.insert(result.records.end(), v.begin(), v.end());
    result.records = canonical_order(std::move(result.records));
    std::stable_sort(result.truth.entries.begin(), result.truth.entries.end(),
                     [](const TruthEntry& a, const TruthEntry& b) {
                         if (a.start_ts != b.start_ts) return a.start_ts < b.start_ts;
                         return a.cpu < b.cpu;
                     });
    return result;
}

/// Documented workload presets. Parameter choices are described in the
/// README; the shapes they reproduce are checked by the acceptance suite.
inline ScenarioConfig preset(const std::string& name) {
    ScenarioConfig cfg;
    cfg.name = name;
    if (name == "seqread_hit") {
        cfg.threads = 1;
        cfg.requests_per_thread = 2'000;
        cfg.pattern = AccessPattern::Sequential;
        cfg.cache.miss_permille = 0;
        cfg.layer(Layer::Vfs) = {3'000, 400};
        cfg.layer(Layer::Mm) = {9'000, 700};
        cfg.layer(Layer::Cpy) = {6'000, 400};
        cfg.spike_injections = {
            {0, 150, "vfs", 9'500},  {0, 420, "cpy", 9'800}, {0, 700, "irq", 10'200},
            {0, 1'030, "vfs", 10'600}, {0, 1'310, "cpy", 9'200}, {0, 1'640, "vfs", 9'900},
        };
    } else if (name == "randread_miss") {
        cfg.threads = 1;
        cfg.requests_per_thread = 4'000;
        cfg.pattern = AccessPattern::Random;
        cfg.cache.miss_permille = 850;
        cfg.cache.correlated_slowdown_permille = 31; // ~1/32 batched slowdowns
        cfg.layer(Layer::Vfs) = {2'500, 300};
        cfg.layer(Layer::Mm) = {3'500, 400};
        cfg.layer(Layer::Fs) = {1'800, 300};
        cfg.layer(Layer::Blk) = {1'200, 200};
        cfg.layer(Layer::Req) = {900, 150};
        cfg.layer(Layer::Drv) = {700, 100};
        cfg.layer(Layer::Cpy) = {5'000, 400};
        cfg.layer(Layer::Io) = {300, 50};
        cfg.device_model = {55'000, 30'000, 62, 40'000, 160'000, 3'000, 300, 1'500, 300};
        cfg.sched_model = {20, 4'000, 500};
        cfg.gap_mean_ns = 1'200;
        cfg.gap_jitter_ns = 300;
    } else if (name == "mt_irq_skew") {
        cfg.threads = 4;
        cfg.requests_per_thread = 22'500;
        cfg.pattern = AccessPattern::Random;
        cfg.cache.miss_permille = 0; // warmed page cache
        cfg.layer(Layer::Vfs) = {3'000, 400};
        cfg.layer(Layer::Mm) = {9'000, 700};
        cfg.layer(Layer::Cpy) = {6'000, 400};
        cfg.irq_model.total_events = 10'478;
        cfg.irq_model.steering_weights = {7'276, 128, 2'953, 121};
        cfg.irq_model.duration_mean_ns = 6'500;
        cfg.irq_model.duration_jitter_ns = 325;
        cfg.irq_model.active_begin = 6'000;
        cfg.irq_model.active_end = 19'500;
        cfg.gap_mean_ns = 900;
        cfg.gap_jitter_ns = 150;
    } else {
        throw std::invalid_argument("unknown preset '" + name + "'");
    }
    return cfg;
}

inline const std::array<const char*, 3> kPresetNames = {"seqread_hit", "randread_miss", "mt_irq_skew"};

} // namespace relay

#endif // RELAY_SIMULATOR_HPP
