// Copyright 2026 The Relay Authors
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
//
// Back-end analysis: group a trace by request id, then walk each
// request's events attributing every nanosecond to a layer's self time,
// interrupt handling, scheduler preemption, device wait, or the
// unattributed remainder. All attribution is exact integer arithmetic.

#ifndef RELAY_ANALYZER_HPP
#define RELAY_ANALYZER_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "relay/profile_config.hpp"
#include "relay/trace_model.hpp"

namespace relay {

struct HwDelta {
    uint64_t cycles = 0;
    uint64_t instructions = 0;

    bool operator==(const HwDelta&) const = default;
    void operator+=(const HwDelta& o) {
        cycles += o.cycles;
        instructions += o.instructions;
    }
};

/// Cycles per instruction over a delta, rounded to 3 decimals; absent
/// when no instructions retired in the scope.
inline std::optional<double> cpi_of(const HwDelta& d) {
    if (d.instructions == 0) return std::nullopt;
    double raw = static_cast<double>(d.cycles) / static_cast<double>(d.instructions);
    return std::round(raw * 1000.0) / 1000.0;
}

/// Per-request attribution result. The exact-conservation invariant
/// total == sum(layer self) + irq + sched + io_wait + unattributed
/// holds for every profile the analyzer emits.
struct RequestProfile {
    uint64_t rid = 0;
    uint32_t pid = 0;
    uint32_t tid = 0;
    uint16_t cpu = 0;
    uint64_t start_ts = 0;
    uint64_t end_ts = 0;
    int64_t total_ns = 0;
    std::vector<int64_t> layer_self_ns; // indexed by LayerDescription order
    int64_t irq_ns = 0;
    uint32_t irq_count = 0;
    int64_t sched_ns = 0;
    int64_t io_wait_ns = 0;
    int64_t unattributed_ns = 0;
    std::vector<HwDelta> layer_hw;
    HwDelta irq_hw;
    HwDelta request_hw; // on-cpu layer segments plus interrupt handling

    int64_t component_sum() const {
        int64_t s = irq_ns + sched_ns + io_wait_ns + unattributed_ns;
        for (int64_t v : layer_self_ns) s += v;
        return s;
    }
    std::optional<double> request_cpi() const { return cpi_of(request_hw); }
    std::optional<double> layer_cpi(size_t i) const { return cpi_of(layer_hw[i]); }

    bool operator==(const RequestProfile&) const = default;
};

class AnalysisError : public std::runtime_error {
public:
    explicit AnalysisError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Events of one request: the rid's own records plus any rid-0
/// IRQ/SCHED records grouping attributed to it, in canonical order.
struct RequestEvents {
    uint64_t rid = 0;
    bool complete = false;
    std::vector<TraceRecord> events;
};

struct GroupedStream {
    std::vector<RequestEvents> requests; // ordered by syscall-enter ts
    uint64_t discarded_irq_intervals = 0;
    uint64_t discarded_records = 0;
    uint64_t incomplete_requests = 0;
};

/// Splits a canonical stream into per-request event lists.
///
/// Records carrying a rid go to that rid's list. rid-0 IRQ intervals are
/// charged by cpu occupancy at IRQ_ENTER: first to the request running
/// on that cpu, else to the request most recently put to sleep on that
/// cpu (a completion interrupt arriving during its own window), else
/// they are dropped and counted. Nested IRQ records travel with their
/// top-level interval. Requests missing their SYSCALL_EXIT are flagged
/// incomplete and excluded from profile computation.
inline GroupedStream group_by_rid(const std::vector<TraceRecord>& input) {
    GroupedStream out;
    std::vector<TraceRecord> records = canonical_order(input);

    std::unordered_map<uint64_t, size_t> index_of_rid;
    struct CpuState {
        uint64_t running_rid = 0;
        uint64_t sleeping_rid = 0;
        int irq_depth = 0;
        uint64_t irq_target = 0;
        std::vector<TraceRecord> irq_records; // pending top-level interval
    };
    std::unordered_map<uint16_t, CpuState> cpus;

    auto group_of = [&](uint64_t rid) -> RequestEvents& {
        auto [it, inserted] = index_of_rid.try_emplace(rid, out.requests.size());
        if (inserted) out.requests.push_back(RequestEvents{rid, false, {}});
        return out.requests[it->second];
    };

    for (const TraceRecord& r : records) {
        CpuState& cs = cpus[r.cpu];

        if (r.kind == EventKind::IrqEnter && r.rid == RequestId::kNone) {
            if (cs.irq_depth == 0)
                cs.irq_target = cs.running_rid ? cs.running_rid : cs.sleeping_rid;
            cs.irq_depth++;
            cs.irq_records.push_back(r);
            continue;
        }
        if (r.kind == EventKind::IrqExit && r.rid == RequestId::kNone) {
            if (cs.irq_depth == 0) {
                out.discarded_records++; // dangling exit; validation reports it
                continue;
            }
            cs.irq_depth--;
            cs.irq_records.push_back(r);
            if (cs.irq_depth == 0) {
                if (cs.irq_target != 0) {
                    auto& g = group_of(cs.irq_target);
                    g.events.insert(g.events.end(), cs.irq_records.begin(), cs.irq_records.end());
                } else {
                    out.discarded_irq_intervals++;
                    out.discarded_records += cs.irq_records.size();
                }
                cs.irq_records.clear();
            }
            continue;
        }
        if (cs.irq_depth > 0 && r.rid == RequestId::kNone) {
            // Non-IRQ record inside an interrupt (nested handler noise):
            // travels with the interval.
            cs.irq_records.push_back(r);
            continue;
        }

        uint64_t target = r.rid;
        if (target == RequestId::kNone) {
            // rid-0 sched records of traced work are charged by occupancy.
            if (r.kind == EventKind::SchedOut) target = cs.running_rid;
            else if (r.kind == EventKind::SchedIn) target = cs.sleeping_rid;
        }
        if (target == RequestId::kNone) {
            out.discarded_records++;
            continue;
        }

        switch (r.kind) {
        case EventKind::SyscallEnter:
            cs.running_rid = target;
            break;
        case EventKind::SyscallExit:
            if (cs.running_rid == target) cs.running_rid = 0;
            group_of(target).complete = true;
            break;
        case EventKind::SchedOut:
            if (cs.running_rid == target) cs.running_rid = 0;
            cs.sleeping_rid = target;
            break;
        case EventKind::SchedIn:
            if (cs.sleeping_rid == target) cs.sleeping_rid = 0;
            cs.running_rid = target;
            break;
        default:
            break;
        }
        // Foreign-cpu records (e.g. a completion logged on a steered cpu)
        // join the group without touching this cpu's occupancy; the
        // switch above only matched because owner-side kinds carry the
        // owner's cpu in well-formed streams.
        group_of(target).events.push_back(r);
    }

    for (auto& cs : cpus)
        if (!cs.second.irq_records.empty())
            out.discarded_records += cs.second.irq_records.size();

    for (auto& req : out.requests)
        if (!req.complete) out.incomplete_requests++;
    return out;
}

/// Resolved layer context shared by all per-request computations.
struct AnalysisContext {
    const LayerDescription* ld = nullptr;
    LayerLookup lookup;

    AnalysisContext(const LayerDescription& layers, const FunctionInterner& interner)
        : ld(&layers), lookup(layers, interner) {}

    size_t layer_count() const { return ld->layers.size(); }
};

/// Stack-walk attribution over one request's events.
///
/// On FUNC_EXIT the frame's self time is gross minus child time minus
/// stolen (interrupt/off-cpu) time, charged to the function's layer; the
/// gross time rolls up into the parent's child accumulator. A
/// SCHED_OUT..SCHED_IN window is device wait when an OFFCPU_SUBMIT was
/// outstanding (minus any completion-interrupt time inside the window,
/// which stays in the irq bucket) and scheduler interference otherwise.
/// Hardware counters are differenced at record boundaries on the owner
/// cpu and accumulated into the bucket active before each record.
inline RequestProfile compute_request_profile(const std::vector<TraceRecord>& events,
                                              const AnalysisContext& ctx) {
    if (events.empty()) throw AnalysisError("empty event list");

    RequestProfile p;
    p.layer_self_ns.assign(ctx.layer_count(), 0);
    p.layer_hw.assign(ctx.layer_count(), HwDelta{});

    struct Frame {
        FunctionId func;
        int32_t layer;
        uint64_t entry_ts;
        int64_t child_ns = 0;
        int64_t stolen_ns = 0;
    };
    std::vector<Frame> stack;

    bool started = false;
    bool ended = false;
    uint16_t owner_cpu = 0;
    bool have_prev_hw = false;
    HwSample prev_hw;

    int irq_depth = 0;
    uint64_t irq_start_ts = 0;
    bool window_open = false;
    bool window_is_io = false;
    uint64_t window_start_ts = 0;
    int64_t window_irq_ns = 0;
    bool submit_pending = false;

    auto fail = [&](const std::string& why) {
        throw AnalysisError("rid " + std::to_string(p.rid ? p.rid : events.front().rid) + ": " + why);
    };

    for (const TraceRecord& r : events) {
        if (!started) {
            if (r.kind != EventKind::SyscallEnter) fail("first event is not SYSCALL_ENTER");
            started = true;
            p.rid = r.rid;
            p.pid = r.pid;
            p.tid = r.tid;
            p.cpu = owner_cpu = r.cpu;
            p.start_ts = r.ts;
            prev_hw = r.hw;
            have_prev_hw = true;
            continue;
        }
        if (ended) {
            if (r.cpu == owner_cpu) fail("owner-cpu event after SYSCALL_EXIT");
            continue; // foreign-cpu stragglers at the exit timestamp
        }

        // Hardware delta since the previous owner-cpu record goes to the
        // bucket that was active across that gap.
        if (r.cpu == owner_cpu && have_prev_hw) {
            HwDelta d{r.hw.cycles - prev_hw.cycles, r.hw.instructions - prev_hw.instructions};
            if (irq_depth > 0)
                p.irq_hw += d;
            else if (!window_open && !stack.empty() && stack.back().layer >= 0)
                p.layer_hw[static_cast<size_t>(stack.back().layer)] += d;
            prev_hw = r.hw;
        }

        switch (r.kind) {
        case EventKind::FuncEntry:
            stack.push_back(Frame{r.func, ctx.lookup.layer_of(r.func), r.ts});
            break;
        case EventKind::FuncExit: {
            if (stack.empty() || stack.back().func != r.func) fail("mismatched FUNC_EXIT");
            Frame f = stack.back();
            stack.pop_back();
            int64_t gross = static_cast<int64_t>(r.ts - f.entry_ts);
            int64_t self = gross - f.child_ns - f.stolen_ns;
            if (self < 0) fail("negative self time in frame");
            if (f.layer >= 0) p.layer_self_ns[static_cast<size_t>(f.layer)] += self;
            if (!stack.empty()) stack.back().child_ns += gross;
            break;
        }
        case EventKind::IrqEnter:
            if (r.cpu != owner_cpu) break; // foreign noise; not ours to account
            if (irq_depth == 0) irq_start_ts = r.ts;
            irq_depth++;
            break;
        case EventKind::IrqExit: {
            if (r.cpu != owner_cpu) break;
            if (irq_depth == 0) fail("IRQ_EXIT without IRQ_ENTER");
            irq_depth--;
            if (irq_depth == 0) {
                int64_t dur = static_cast<int64_t>(r.ts - irq_start_ts);
                p.irq_ns += dur;
                p.irq_count += 1;
                if (window_open)
                    window_irq_ns += dur;
                else if (!stack.empty())
                    stack.back().stolen_ns += dur;
            }
            break;
        }
        case EventKind::SchedOut:
            if (window_open) fail("nested SCHED_OUT");
            window_open = true;
            window_start_ts = r.ts;
            window_irq_ns = 0;
            window_is_io = submit_pending;
            submit_pending = false;
            break;
        case EventKind::SchedIn: {
            if (!window_open) fail("SCHED_IN without SCHED_OUT");
            int64_t dur = static_cast<int64_t>(r.ts - window_start_ts);
            int64_t remainder = dur - window_irq_ns;
            if (remainder < 0) fail("interrupt time exceeds its window");
            if (window_is_io)
                p.io_wait_ns += remainder;
            else
                p.sched_ns += remainder;
            if (!stack.empty()) stack.back().stolen_ns += dur;
            window_open = false;
            break;
        }
        case EventKind::OffcpuSubmit:
            submit_pending = true;
            break;
        case EventKind::OffcpuComplete:
            break; // informational; the window classification already knows
        case EventKind::SyscallEnter:
            fail("duplicate SYSCALL_ENTER");
            break;
        case EventKind::SyscallExit:
            p.end_ts = r.ts;
            ended = true;
            break;
        }
    }

    if (!started || !ended) fail("request not bracketed by SYSCALL_ENTER/SYSCALL_EXIT");
    if (!stack.empty()) fail("unclosed frames at SYSCALL_EXIT");
    if (window_open) fail("unclosed off-cpu window at SYSCALL_EXIT");

    p.total_ns = static_cast<int64_t>(p.end_ts - p.start_ts);
    int64_t attributed = p.irq_ns + p.sched_ns + p.io_wait_ns;
    for (int64_t v : p.layer_self_ns) attributed += v;
    p.unattributed_ns = p.total_ns - attributed;
    if (p.unattributed_ns < 0) fail("attributed time exceeds request span");

    p.request_hw = p.irq_hw;
    for (const HwDelta& d : p.layer_hw) p.request_hw += d;
    return p;
}

struct AnalysisResult {
    std::vector<RequestProfile> profiles; // ordered by start ts
    std::vector<std::string> layer_names;
    uint64_t discarded_irq_intervals = 0;
    uint64_t discarded_records = 0;
    uint64_t incomplete_requests = 0;
    uint64_t input_records = 0;
};

/// Convenience wrapper: group, then profile every complete request.
inline AnalysisResult analyze_stream(const std::vector<TraceRecord>& records,
                                     const LayerDescription& ld,
                                     const FunctionInterner& interner) {
    AnalysisContext ctx(ld, interner);
    GroupedStream grouped = group_by_rid(records);

    AnalysisResult out;
    out.input_records = records.size();
    out.discarded_irq_intervals = grouped.discarded_irq_intervals;
    out.discarded_records = grouped.discarded_records;
    out.incomplete_requests = grouped.incomplete_requests;
    for (const auto& l : ld.layers) out.layer_names.push_back(l.name);
    out.profiles.reserve(grouped.requests.size());
    for (const auto& req : grouped.requests) {
        if (!req.complete) continue;
        out.profiles.push_back(compute_request_profile(req.events, ctx));
    }
    return out;
}

} // namespace relay

#endif // RELAY_ANALYZER_HPP
