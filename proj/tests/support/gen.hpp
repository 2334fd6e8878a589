// Copyright 2026 The Relay Authors
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
//
// Random well-formed single-request event lists for analyzer/oracle
// cross-checking: nested frames (known and unknown functions), nested
// interrupt pairs, scheduler windows with and without a pending device
// submit, completion records on a steered cpu, zero-width gaps, and
// consistent per-cpu hardware counters.

#ifndef RELAY_TESTS_GEN_HPP
#define RELAY_TESTS_GEN_HPP

#include <string>
#include <vector>

#include "relay/analyzer.hpp"
#include "relay/prng.hpp"
#include "relay/profile_config.hpp"
#include "relay/trace_model.hpp"

namespace relay::testgen {

struct GenStream {
    std::vector<TraceRecord> events;
    FunctionInterner interner;
};

class RequestGenerator {
public:
    explicit RequestGenerator(uint64_t seed) : rng_(seed) {
        syscall_ = interner_.intern("sys_read");
        irq_ = interner_.intern("common_interrupt");
        sched_ = interner_.intern("finish_task_switch");
        submit_ = interner_.intern("blk_account_io_start");
        complete_ = interner_.intern("blk_mq_complete_request");
        for (const auto& p : default_profile_script().probes)
            pool_.push_back(interner_.intern(p.function));
        pool_.push_back(interner_.intern("mystery_helper"));   // no layer
        pool_.push_back(interner_.intern("unlabeled_path"));   // no layer
    }

    const FunctionInterner& interner() const { return interner_; }

    std::vector<TraceRecord> generate(size_t max_events) {
        events_.clear();
        budget_ = max_events;
        reserved_ = 1; // the closing SYSCALL_EXIT
        ts_ = 1'000 + rng_.bounded(1'000'000);
        owner_cpu_ = static_cast<uint16_t>(rng_.bounded(3));
        foreign_cpu_ = static_cast<uint16_t>(owner_cpu_ + 1 + rng_.bounded(3));
        tid_ = 100 + static_cast<uint32_t>(rng_.bounded(50));
        owner_hw_ = {rng_.bounded(1'000), rng_.bounded(1'000)};
        foreign_hw_ = {rng_.bounded(1'000), rng_.bounded(1'000)};
        rid_ = RequestId::make(ts_, owner_cpu_);

        emit(EventKind::SyscallEnter, syscall_, rid_);
        body(0);
        // Close with space kept in reserve by body().
        emit(EventKind::SyscallExit, syscall_, rid_);
        return events_;
    }

private:
    void hop(uint64_t max_ns) {
        uint64_t d = rng_.bounded(max_ns + 1); // 0 allowed: same-ts records
        ts_ += d;
        owner_hw_.cycles += d * (1 + rng_.bounded(4));
        owner_hw_.instructions += d * rng_.bounded(4);
        foreign_hw_.cycles += d * (1 + rng_.bounded(3));
        foreign_hw_.instructions += d * rng_.bounded(3);
    }

    void emit(EventKind kind, FunctionId func, uint64_t rid) {
        events_.push_back(TraceRecord{kind, owner_cpu_, 77, tid_, func, rid, ts_, owner_hw_});
    }
    void emit_foreign(EventKind kind, FunctionId func, uint64_t rid) {
        events_.push_back(TraceRecord{kind, foreign_cpu_, 0, 0, func, rid, ts_, foreign_hw_});
    }

    size_t room() const {
        return budget_ > events_.size() + reserved_ ? budget_ - events_.size() - reserved_ : 0;
    }

    void irq_pair(bool allow_nested) {
        emit(EventKind::IrqEnter, irq_, RequestId::kNone);
        hop(400);
        if (allow_nested && room() >= 4 && rng_.chance_permille(250)) {
            emit(EventKind::IrqEnter, irq_, RequestId::kNone);
            hop(200);
            emit(EventKind::IrqExit, irq_, RequestId::kNone);
            hop(200);
        }
        emit(EventKind::IrqExit, irq_, RequestId::kNone);
    }

    void sched_window() {
        bool io = rng_.chance_permille(500);
        if (io) {
            emit(EventKind::OffcpuSubmit, submit_, rid_);
            hop(50);
        }
        emit(EventKind::SchedOut, sched_, rid_);
        hop(2'000);
        if (room() >= 5 && rng_.chance_permille(600)) {
            emit(EventKind::IrqEnter, irq_, RequestId::kNone);
            hop(300);
            if (io && rng_.chance_permille(700)) {
                if (rng_.chance_permille(500)) emit(EventKind::OffcpuComplete, complete_, rid_);
                else emit_foreign(EventKind::OffcpuComplete, complete_, rid_);
                hop(300);
            }
            emit(EventKind::IrqExit, irq_, RequestId::kNone);
            hop(200);
        } else if (io && room() >= 2 && rng_.chance_permille(500)) {
            emit_foreign(EventKind::OffcpuComplete, complete_, rid_);
            hop(300);
        }
        emit(EventKind::SchedIn, sched_, rid_);
    }

    void body(int depth) {
        size_t actions = 1 + rng_.bounded(5);
        for (size_t a = 0; a < actions; ++a) {
            if (room() < 6) return;
            switch (rng_.bounded(5)) {
            case 0:
                hop(800);
                break;
            case 1: { // frame
                if (depth >= 4) break;
                FunctionId f = pool_[rng_.bounded(pool_.size())];
                emit(EventKind::FuncEntry, f, rid_);
                reserved_++; // its exit
                hop(500);
                body(depth + 1);
                hop(500);
                reserved_--;
                emit(EventKind::FuncExit, f, rid_);
                break;
            }
            case 2:
                if (room() >= 6) irq_pair(true);
                break;
            case 3:
                if (room() >= 8) sched_window();
                break;
            case 4: // dangling submit, never consumed by a window
                if (rng_.chance_permille(150)) emit(EventKind::OffcpuSubmit, submit_, rid_);
                break;
            }
            hop(300);
        }
    }

    SplitMix64 rng_;
    FunctionInterner interner_;
    std::vector<FunctionId> pool_;
    std::vector<TraceRecord> events_;
    size_t budget_ = 50;
    size_t reserved_ = 1;
    uint64_t ts_ = 0;
    uint64_t rid_ = 0;
    uint16_t owner_cpu_ = 0, foreign_cpu_ = 1;
    uint32_t tid_ = 0;
    HwSample owner_hw_, foreign_hw_;
};

} // namespace relay::testgen

#endif // RELAY_TESTS_GEN_HPP
