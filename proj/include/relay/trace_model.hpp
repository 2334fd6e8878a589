// Copyright 2026 The Relay Authors
// Licensed under the Apache License, Version 2.0. See LICENSE for details.

#ifndef RELAY_TRACE_MODEL_HPP
#define RELAY_TRACE_MODEL_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace relay {

/// Kinds of probe-handler emissions. FUNC_* pair LIFO per thread,
/// IRQ_* pair LIFO per cpu; SYSCALL_* bracket one request on its owner
/// thread. The numeric values are part of the wire format.
enum class EventKind : uint8_t {
    FuncEntry = 0,
    FuncExit = 1,
    IrqEnter = 2,
    IrqExit = 3,
    SchedOut = 4,
    SchedIn = 5,
    OffcpuSubmit = 6,
    OffcpuComplete = 7,
    SyscallEnter = 8,
    SyscallExit = 9,
};

inline const char* to_string(EventKind k) {
    switch (k) {
    case EventKind::FuncEntry: return "FUNC_ENTRY";
    case EventKind::FuncExit: return "FUNC_EXIT";
    case EventKind::IrqEnter: return "IRQ_ENTER";
    case EventKind::IrqExit: return "IRQ_EXIT";
    case EventKind::SchedOut: return "SCHED_OUT";
    case EventKind::SchedIn: return "SCHED_IN";
    case EventKind::OffcpuSubmit: return "OFFCPU_SUBMIT";
    case EventKind::OffcpuComplete: return "OFFCPU_COMPLETE";
    case EventKind::SyscallEnter: return "SYSCALL_ENTER";
    case EventKind::SyscallExit: return "SYSCALL_EXIT";
    }
    return "?";
}

/// Interned function name. Ids are dense from 1 within one capture
/// session; 0 is never assigned.
using FunctionId = uint32_t;

/// Cumulative hardware counters of one cpu, sampled when a record is
/// emitted. Both counters are non-decreasing per cpu.
struct HwSample {
    uint64_t cycles = 0;
    uint64_t instructions = 0;

    bool operator==(const HwSample&) const = default;
};

/// Request id: (syscall-entry timestamp ns << 8) | low 8 bits of the cpu
/// the syscall entered on. Strictly increasing per cpu, unique within a
/// capture session; 0 means "not attributable to a request".
struct RequestId {
    static constexpr uint64_t kNone = 0;

    static uint64_t make(uint64_t enter_ts_ns, uint16_t cpu) {
        return (enter_ts_ns << 8) | (cpu & 0xffu);
    }
    static uint64_t enter_ts(uint64_t rid) { return rid >> 8; }
    static uint16_t cpu(uint64_t rid) { return static_cast<uint16_t>(rid & 0xffu); }
};

/// One probe-handler emission.
struct TraceRecord {
    EventKind kind = EventKind::FuncEntry;
    uint16_t cpu = 0;
    uint32_t pid = 0;
    uint32_t tid = 0;
    FunctionId func = 0;
    uint64_t rid = RequestId::kNone;
    uint64_t ts = 0; // integer nanoseconds
    HwSample hw;

    bool operator==(const TraceRecord&) const = default;
};

/// Session-scoped string table mapping function names to dense ids.
class FunctionInterner {
public:
    /// Returns the id for `name`, assigning the next dense id (from 1) on
    /// first use. Rejects empty names and names longer than 255 bytes.
    FunctionId intern(std::string_view name) {
        if (name.empty()) throw std::invalid_argument("intern: empty function name");
        if (name.size() > 255) throw std::invalid_argument("intern: function name over 255 bytes");
        auto it = ids_.find(std::string(name));
        if (it != ids_.end()) return it->second;
        names_.emplace_back(name);
        FunctionId id = static_cast<FunctionId>(names_.size());
        ids_.emplace(names_.back(), id);
        return id;
    }

    /// Looks up an already-interned name; 0 if unknown.
    FunctionId find(std::string_view name) const {
        auto it = ids_.find(std::string(name));
        return it == ids_.end() ? 0 : it->second;
    }

    const std::string& name(FunctionId id) const {
        if (id == 0 || id > names_.size()) throw std::out_of_range("FunctionId out of range");
        return names_[id - 1];
    }

    /// Registers an externally assigned (id, name) pair, as when decoding
    /// a wire string table. Ids must stay dense.
    void restore(FunctionId id, std::string_view name) {
        if (id != names_.size() + 1)
            throw std::invalid_argument("restore: non-dense FunctionId");
        names_.emplace_back(name);
        ids_.emplace(names_.back(), id);
    }

    bool contains(FunctionId id) const { return id >= 1 && id <= names_.size(); }
    size_t size() const { return names_.size(); }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, FunctionId> ids_;
};

enum class Violation : uint8_t {
    TsRegression,
    HwRegression,
    NonLifoFuncExit,
    UnmatchedFuncExit,
    UnmatchedFuncEntry,
    NonLifoIrqExit,
    UnmatchedIrqExit,
    UnmatchedIrqEnter,
    RecordBeforeSyscallEnter,
    RecordAfterSyscallExit,
    DuplicateSyscallEnter,
    MissingSyscallExit,
};

inline const char* to_string(Violation v) {
    switch (v) {
    case Violation::TsRegression: return "ts-regression";
    case Violation::HwRegression: return "hw-regression";
    case Violation::NonLifoFuncExit: return "non-lifo-func-exit";
    case Violation::UnmatchedFuncExit: return "unmatched-func-exit";
    case Violation::UnmatchedFuncEntry: return "unmatched-func-entry";
    case Violation::NonLifoIrqExit: return "non-lifo-irq-exit";
    case Violation::UnmatchedIrqExit: return "unmatched-irq-exit";
    case Violation::UnmatchedIrqEnter: return "unmatched-irq-enter";
    case Violation::RecordBeforeSyscallEnter: return "record-before-syscall-enter";
    case Violation::RecordAfterSyscallExit: return "record-after-syscall-exit";
    case Violation::DuplicateSyscallEnter: return "duplicate-syscall-enter";
    case Violation::MissingSyscallExit: return "missing-syscall-exit";
    }
    return "?";
}

struct ValidationError {
    size_t record_index; // index into the canonically ordered stream
    Violation code;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationError> errors;
    bool ok() const { return errors.empty(); }
};

/// Reorders a stream into its canonical total order: per-cpu substreams
/// merged by (ts, cpu), with each cpu's relative order preserved. Any
/// cross-cpu interleaving of the same capture collapses to the same
/// sequence, which is what makes analysis independent of arrival order.
inline std::vector<TraceRecord> canonical_order(std::vector<TraceRecord> records) {
    std::stable_sort(records.begin(), records.end(),
                     [](const TraceRecord& a, const TraceRecord& b) {
                         if (a.ts != b.ts) return a.ts < b.ts;
                         return a.cpu < b.cpu;
                     });
    return records;
}

/// Checks stream well-formedness. Per-cpu checks (timestamp and
/// hardware-counter monotonicity, IRQ pairing) and per-thread checks
/// (FUNC pairing) run over the input's per-cpu/per-thread subsequences,
/// which any legal cross-cpu interleaving preserves; the per-rid
/// SYSCALL bracketing runs over the canonical (ts, cpu) order. Error
/// indices refer to the input stream. Violations are data, not
/// exceptions.
inline ValidationReport validate_stream(const std::vector<TraceRecord>& records) {
    ValidationReport report;
    auto fail = [&](size_t idx, Violation code, std::string msg) {
        report.errors.push_back({idx, code, std::move(msg)});
    };

    struct CpuState {
        bool seen = false;
        uint64_t ts = 0;
        HwSample hw;
        std::vector<size_t> irq_stack; // record indices of open IRQ_ENTERs
    };
    struct FuncFrame {
        size_t index;
        FunctionId func;
    };
    std::map<uint16_t, CpuState> cpus;
    std::map<uint32_t, std::vector<FuncFrame>> func_stacks; // per tid

    for (size_t i = 0; i < records.size(); ++i) {
        const TraceRecord& r = records[i];
        CpuState& cs = cpus[r.cpu];
        if (cs.seen) {
            if (r.ts < cs.ts)
                fail(i, Violation::TsRegression,
                     "cpu " + std::to_string(r.cpu) + " ts went backwards");
            if (r.hw.cycles < cs.hw.cycles || r.hw.instructions < cs.hw.instructions)
                fail(i, Violation::HwRegression,
                     "cpu " + std::to_string(r.cpu) + " hw counter went backwards");
        }
        cs.seen = true;
        cs.ts = std::max(cs.ts, r.ts);
        cs.hw.cycles = std::max(cs.hw.cycles, r.hw.cycles);
        cs.hw.instructions = std::max(cs.hw.instructions, r.hw.instructions);

        switch (r.kind) {
        case EventKind::FuncEntry:
            func_stacks[r.tid].push_back({i, r.func});
            break;
        case EventKind::FuncExit: {
            auto& stack = func_stacks[r.tid];
            if (stack.empty()) {
                fail(i, Violation::UnmatchedFuncExit, "FUNC_EXIT with no open frame");
            } else if (stack.back().func != r.func) {
                fail(i, Violation::NonLifoFuncExit, "FUNC_EXIT does not match innermost entry");
                stack.pop_back();
            } else {
                stack.pop_back();
            }
            break;
        }
        case EventKind::IrqEnter:
            cs.irq_stack.push_back(i);
            break;
        case EventKind::IrqExit:
            if (cs.irq_stack.empty())
                fail(i, Violation::UnmatchedIrqExit, "IRQ_EXIT with no open IRQ");
            else
                cs.irq_stack.pop_back();
            break;
        default:
            break;
        }
    }

    for (auto& [tid, stack] : func_stacks)
        for (const FuncFrame& f : stack)
            fail(f.index, Violation::UnmatchedFuncEntry,
                 "FUNC_ENTRY never exited on tid " + std::to_string(tid));
    for (auto& [cpu, cs] : cpus)
        for (size_t idx : cs.irq_stack)
            fail(idx, Violation::UnmatchedIrqEnter,
                 "IRQ_ENTER never exited on cpu " + std::to_string(cpu));

    // Per-rid bracketing over the canonical order, reported against
    // input indices.
    std::vector<size_t> order(records.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (records[a].ts != records[b].ts) return records[a].ts < records[b].ts;
        return records[a].cpu < records[b].cpu;
    });

    struct RidState {
        bool entered = false;
        bool exited = false;
        uint32_t owner_tid = 0;
        size_t enter_index = 0;
    };
    std::map<uint64_t, RidState> rids;
    for (size_t pos = 0; pos < order.size(); ++pos) {
        size_t i = order[pos];
        const TraceRecord& r = records[i];
        if (r.rid == RequestId::kNone) continue;
        RidState& rs = rids[r.rid];
        if (r.kind == EventKind::SyscallEnter) {
            if (rs.entered)
                fail(i, Violation::DuplicateSyscallEnter, "rid has two SYSCALL_ENTERs");
            rs.entered = true;
            rs.owner_tid = r.tid;
            rs.enter_index = i;
        } else if (!rs.entered) {
            fail(i, Violation::RecordBeforeSyscallEnter, "rid record before its SYSCALL_ENTER");
        }
        if (r.kind == EventKind::SyscallExit) {
            if (rs.exited)
                fail(i, Violation::RecordAfterSyscallExit, "rid has two SYSCALL_EXITs");
            rs.exited = true;
        } else if (rs.exited && r.tid == rs.owner_tid) {
            // Only the owner thread is bracketed; a steered-cpu
            // completion record at the exit timestamp is legal.
            fail(i, Violation::RecordAfterSyscallExit, "owner-thread record after SYSCALL_EXIT");
        }
    }
    for (auto& [rid, rs] : rids)
        if (rs.entered && !rs.exited)
            fail(rs.enter_index, Violation::MissingSyscallExit,
                 "rid " + std::to_string(rid) + " has no SYSCALL_EXIT");

    std::sort(report.errors.begin(), report.errors.end(),
              [](const ValidationError& a, const ValidationError& b) {
                  if (a.record_index != b.record_index) return a.record_index < b.record_index;
                  return static_cast<int>(a.code) < static_cast<int>(b.code);
              });
    return report;
}

} // namespace relay

#endif // RELAY_TRACE_MODEL_HPP
