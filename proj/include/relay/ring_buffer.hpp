// Copyright 2026 The Relay Authors
// Licensed under the Apache License, Version 2.0. See LICENSE for details.

#ifndef RELAY_RING_BUFFER_HPP
#define RELAY_RING_BUFFER_HPP

#include <atomic>
#include <cstdint>
#include <vector>

#include "relay/trace_model.hpp"
#include "relay/wire.hpp"

namespace relay {

/// Single-producer single-consumer record ring standing in for the
/// kernel/user shared-memory buffer. Capacity is byte-denominated
/// (default 4 MiB, i.e. 1024 4-KiB pages) and accounted in wire-record
/// units; a push is accepted iff at least one record's worth of space is
/// free, otherwise the record is dropped and counted. Drop-on-full, not
/// overwrite: the analyzer should see drop counts, never torn requests.
class RecordRing {
public:
    static constexpr size_t kDefaultCapacityBytes = 4u << 20;

    explicit RecordRing(size_t capacity_bytes = kDefaultCapacityBytes)
        : slots_(capacity_bytes / kWireRecordBytes) {
        if (slots_.empty()) slots_.resize(1);
    }

    /// Producer side. Returns false (and counts a drop) when full.
    bool push(const TraceRecord& rec) {
        uint64_t head = head_.load(std::memory_order_relaxed);
        uint64_t tail = tail_.load(std::memory_order_acquire);
        if (head - tail >= slots_.size()) {
            dropped_.fetch_add(1, std::memory_order_relaxed);
            return false;
        }
        slots_[head % slots_.size()] = rec;
        head_.store(head + 1, std::memory_order_release);
        return true;
    }

    /// Consumer side: pops up to `max` records in FIFO order.
    size_t drain(std::vector<TraceRecord>& out, size_t max) {
        uint64_t tail = tail_.load(std::memory_order_relaxed);
        uint64_t head = head_.load(std::memory_order_acquire);
        size_t n = 0;
        while (tail < head && n < max) {
            out.push_back(slots_[tail % slots_.size()]);
            ++tail;
            ++n;
        }
        tail_.store(tail, std::memory_order_release);
        return n;
    }

    size_t size() const {
        return static_cast<size_t>(head_.load(std::memory_order_acquire) -
                                   tail_.load(std::memory_order_acquire));
    }
    bool empty() const { return size() == 0; }
    size_t capacity_records() const { return slots_.size(); }
    uint64_t dropped() const { return dropped_.load(std::memory_order_relaxed); }

private:
    std::vector<TraceRecord> slots_;
    std::atomic<uint64_t> head_{0};
    std::atomic<uint64_t> tail_{0};
    std::atomic<uint64_t> dropped_{0};
};

} // namespace relay

#endif // RELAY_RING_BUFFER_HPP
