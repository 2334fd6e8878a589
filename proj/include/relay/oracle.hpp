// Copyright 2026 The Relay Authors
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
//
// Independent verification path for compute_request_profile. Instead of
// walking a frame stack with accumulators, the oracle slices the request
// span into elementary segments between consecutive events and assigns
// each segment to exactly one bucket by priority: interrupt interval,
// then off-cpu window, then the innermost enclosing frame's layer, then
// unattributed. Quadratic and simple on purpose.

#ifndef RELAY_ORACLE_HPP
#define RELAY_ORACLE_HPP

#include <cstdint>
#include <vector>

#include "relay/analyzer.hpp"
#include "relay/trace_model.hpp"

namespace relay {

/// Elementary segments of a request's event list: one per consecutive
/// event pair, zero-width segments included.
inline std::vector<std::pair<uint64_t, uint64_t>> oracle_segments(const std::vector<TraceRecord>& events) {
    std::vector<std::pair<uint64_t, uint64_t>> segs;
    for (size_t i = 0; i + 1 < events.size(); ++i)
        segs.push_back({events[i].ts, events[i + 1].ts});
    return segs;
}

inline RequestProfile oracle_profile(const std::vector<TraceRecord>& events,
                                     const AnalysisContext& ctx) {
    if (events.empty() || events.front().kind != EventKind::SyscallEnter)
        throw AnalysisError("oracle: event list does not start with SYSCALL_ENTER");

    const size_t n = events.size();
    const uint16_t owner_cpu = events.front().cpu;

    RequestProfile p;
    p.layer_self_ns.assign(ctx.layer_count(), 0);
    p.layer_hw.assign(ctx.layer_count(), HwDelta{});
    p.rid = events.front().rid;
    p.pid = events.front().pid;
    p.tid = events.front().tid;
    p.cpu = owner_cpu;
    p.start_ts = events.front().ts;

    // Index-based interval tables. A table entry [begin, end) covers the
    // segments between event begin and event end.
    struct FrameSpan {
        size_t begin = 0, end = 0;
        int32_t layer = -1;
        size_t depth = 0;
    };
    struct IrqSpan {
        size_t begin = 0, end = 0;
    };
    struct WindowSpan {
        size_t begin = 0, end = 0;
        bool io = false;
    };
    std::vector<FrameSpan> frames;
    std::vector<IrqSpan> irqs;
    std::vector<WindowSpan> windows;
    size_t exit_index = 0;

    {
        std::vector<size_t> frame_stack; // indices into `frames`
        std::vector<size_t> irq_starts;
        bool submit_pending = false;
        bool window_open = false;
        size_t window_begin = 0;
        bool window_io = false;
        bool ended = false;

        for (size_t i = 1; i < n; ++i) {
            const TraceRecord& r = events[i];
            if (ended) {
                if (r.cpu == owner_cpu)
                    throw AnalysisError("oracle: owner-cpu event after SYSCALL_EXIT");
                continue;
            }
            switch (r.kind) {
            case EventKind::FuncEntry:
                frame_stack.push_back(frames.size());
                frames.push_back(FrameSpan{i, 0, ctx.lookup.layer_of(r.func), frame_stack.size()});
                break;
            case EventKind::FuncExit:
                if (frame_stack.empty() || events[frames[frame_stack.back()].begin].func != r.func)
                    throw AnalysisError("oracle: mismatched FUNC_EXIT");
                frames[frame_stack.back()].end = i;
                frame_stack.pop_back();
                break;
            case EventKind::IrqEnter:
                if (r.cpu == owner_cpu) irq_starts.push_back(i);
                break;
            case EventKind::IrqExit:
                if (r.cpu != owner_cpu) break;
                if (irq_starts.empty()) throw AnalysisError("oracle: IRQ_EXIT without IRQ_ENTER");
                if (irq_starts.size() == 1) irqs.push_back(IrqSpan{irq_starts.front(), i});
                irq_starts.pop_back();
                break;
            case EventKind::SchedOut:
                if (window_open) throw AnalysisError("oracle: nested SCHED_OUT");
                window_open = true;
                window_begin = i;
                window_io = submit_pending;
                submit_pending = false;
                break;
            case EventKind::SchedIn:
                if (!window_open) throw AnalysisError("oracle: SCHED_IN without SCHED_OUT");
                windows.push_back(WindowSpan{window_begin, i, window_io});
                window_open = false;
                break;
            case EventKind::OffcpuSubmit:
                submit_pending = true;
                break;
            case EventKind::OffcpuComplete:
                break;
            case EventKind::SyscallEnter:
                throw AnalysisError("oracle: duplicate SYSCALL_ENTER");
            case EventKind::SyscallExit:
                exit_index = i;
                p.end_ts = r.ts;
                ended = true;
                break;
            }
        }
        if (!ended) throw AnalysisError("oracle: missing SYSCALL_EXIT");
        if (!frame_stack.empty()) throw AnalysisError("oracle: unclosed frames");
        if (window_open) throw AnalysisError("oracle: unclosed off-cpu window");
    }

    p.total_ns = static_cast<int64_t>(p.end_ts - p.start_ts);
    p.irq_count = static_cast<uint32_t>(irqs.size());

    enum class Bucket { Irq, IoWait, Sched, Layer, Unattributed, Outside };
    auto classify = [&](size_t k) -> std::pair<Bucket, int32_t> {
        if (k >= exit_index) return {Bucket::Outside, -1};
        for (const IrqSpan& s : irqs)
            if (s.begin <= k && k < s.end) return {Bucket::Irq, -1};
        for (const WindowSpan& w : windows)
            if (w.begin <= k && k < w.end) return {w.io ? Bucket::IoWait : Bucket::Sched, -1};
        const FrameSpan* innermost = nullptr;
        for (const FrameSpan& f : frames)
            if (f.begin <= k && k < f.end && (!innermost || f.depth > innermost->depth))
                innermost = &f;
        if (innermost && innermost->layer >= 0) return {Bucket::Layer, innermost->layer};
        return {Bucket::Unattributed, -1};
    };

    for (size_t k = 0; k + 1 < n; ++k) {
        int64_t width = static_cast<int64_t>(events[k + 1].ts - events[k].ts);
        auto [bucket, layer] = classify(k);
        switch (bucket) {
        case Bucket::Irq: p.irq_ns += width; break;
        case Bucket::IoWait: p.io_wait_ns += width; break;
        case Bucket::Sched: p.sched_ns += width; break;
        case Bucket::Layer: p.layer_self_ns[static_cast<size_t>(layer)] += width; break;
        case Bucket::Unattributed: p.unattributed_ns += width; break;
        case Bucket::Outside: break;
        }
    }

    // Hardware deltas: consecutive owner-cpu records, each delta assigned
    // by the bucket active across that gap; off-cpu and unattributed gaps
    // contribute to no scope.
    size_t prev_owner = 0;
    for (size_t i = 1; i < n; ++i) {
        if (events[i].cpu != owner_cpu) continue;
        if (i > exit_index) break;
        HwDelta d{events[i].hw.cycles - events[prev_owner].hw.cycles,
                  events[i].hw.instructions - events[prev_owner].hw.instructions};
        auto [bucket, layer] = classify(prev_owner);
        if (bucket == Bucket::Irq) p.irq_hw += d;
        else if (bucket == Bucket::Layer) p.layer_hw[static_cast<size_t>(layer)] += d;
        prev_owner = i;
    }

    p.request_hw = p.irq_hw;
    for (const HwDelta& d : p.layer_hw) p.request_hw += d;
    return p;
}

} // namespace relay

#endif // RELAY_ORACLE_HPP
