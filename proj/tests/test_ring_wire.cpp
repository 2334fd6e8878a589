// Copyright 2026 The Relay Authors
// Licensed under the Apache License, Version 2.0. See LICENSE for details.

#include <doctest.h>

#include <deque>

#include "relay/prng.hpp"
#include "relay/ring_buffer.hpp"
#include "relay/simulator.hpp"
#include "relay/wire.hpp"

using namespace relay;

namespace {

TraceRecord make_record(SplitMix64& rng, FunctionId max_func) {
    TraceRecord r;
    r.kind = static_cast<EventKind>(rng.bounded(10));
    r.cpu = static_cast<uint16_t>(rng.bounded(8));
    r.pid = static_cast<uint32_t>(rng.bounded(1 << 20));
    r.tid = static_cast<uint32_t>(rng.bounded(1 << 20));
    r.func = static_cast<FunctionId>(1 + rng.bounded(max_func));
    r.rid = rng.next();
    r.ts = rng.next() >> 8;
    r.hw = {rng.next() >> 1, rng.next() >> 1};
    return r;
}

} // namespace

TEST_CASE("ring accepts into free space and drops on full") {
    RecordRing ring(3 * kWireRecordBytes);
    TraceRecord r;
    r.func = 1;
    CHECK(ring.push(r));
    CHECK(ring.push(r));
    CHECK(ring.push(r));
    CHECK_FALSE(ring.push(r));
    CHECK(ring.dropped() == 1);
    std::vector<TraceRecord> out;
    CHECK(ring.drain(out, 100) == 3);
    CHECK(ring.push(r)); // space reusable after drain
}

TEST_CASE("a default 4 MiB ring holds exactly capacity/record-size records") {
    RecordRing ring;
    const size_t expected = (4u << 20) / kWireRecordBytes;
    CHECK(ring.capacity_records() == expected);
    TraceRecord r;
    r.func = 1;
    size_t accepted = 0;
    for (size_t i = 0; i <= expected; ++i)
        if (ring.push(r)) accepted++;
    CHECK(accepted == expected);
    CHECK(ring.dropped() == 1); // the (capacity+1)-th push
}

TEST_CASE("interleaved push/drain preserves FIFO order against a queue oracle") {
    RecordRing ring(16 * kWireRecordBytes);
    std::deque<TraceRecord> oracle;
    SplitMix64 rng(99);
    std::vector<TraceRecord> drained;
    for (int step = 0; step < 2'000; ++step) {
        if (rng.bounded(100) < 60) {
            TraceRecord r = make_record(rng, 50);
            if (ring.push(r)) oracle.push_back(r);
        } else {
            size_t n = rng.bounded(5);
            std::vector<TraceRecord> got;
            ring.drain(got, n);
            for (const auto& r : got) {
                REQUIRE_FALSE(oracle.empty());
                CHECK(r == oracle.front());
                oracle.pop_front();
            }
        }
    }
    while (!oracle.empty()) {
        std::vector<TraceRecord> got;
        REQUIRE(ring.drain(got, 1) == 1);
        CHECK(got[0] == oracle.front());
        oracle.pop_front();
    }
}

TEST_CASE("an empty batch is exactly magic plus zero counts") {
    FunctionInterner in;
    FunctionId shipped = 0;
    auto bytes = encode_batch({}, in, shipped);
    REQUIRE(bytes.size() == 12);
    CHECK(bytes[0] == 'P');
    CHECK(bytes[1] == '2');
    CHECK(bytes[2] == 'L');
    CHECK(bytes[3] == '1');
    for (size_t i = 4; i < 12; ++i) CHECK(bytes[i] == 0);
}

TEST_CASE("a thousand random records round-trip losslessly") {
    FunctionInterner in;
    for (int i = 0; i < 60; ++i) in.intern("fn_" + std::to_string(i));
    SplitMix64 rng(4321);
    std::vector<TraceRecord> records;
    for (int i = 0; i < 1'000; ++i) records.push_back(make_record(rng, 50));

    auto bytes = encode_trace(records, in);
    auto decoded = decode_trace(bytes);
    CHECK(decoded.records == records);
    // only referenced names ship
    CHECK(decoded.interner.size() <= in.size());
}

TEST_CASE("a flipped magic byte fails decoding with its offset") {
    FunctionInterner in;
    in.intern("f");
    TraceRecord r;
    r.func = 1;
    auto bytes = encode_trace({r}, in);
    bytes[0] ^= 0xff;
    try {
        decode_trace(bytes);
        FAIL("expected WireError");
    } catch (const WireError& e) {
        CHECK(e.offset() == 0);
    }
}

TEST_CASE("a truncated stream fails at finish with the cut offset") {
    FunctionInterner in;
    in.intern("f");
    std::vector<TraceRecord> records(3);
    for (auto& r : records) r.func = 1;
    auto bytes = encode_trace(records, in);
    bytes.resize(bytes.size() - 10);
    WireDecoder d;
    d.feed(bytes.data(), bytes.size());
    CHECK(d.records().empty()); // batch incomplete, nothing surfaced
    CHECK_THROWS_AS(d.finish(), WireError);
}

TEST_CASE("records referencing unknown function ids are rejected") {
    FunctionInterner in;
    in.intern("f");
    TraceRecord r;
    r.func = 1;
    auto bytes = encode_trace({r}, in);
    // 12-byte header, 4+1+1 table entry ("f"), then the record; func sits
    // 11 bytes into the record.
    size_t func_off = 12 + 6 + 11;
    bytes[func_off] = 9;
    CHECK_THROWS_AS(decode_trace(bytes), WireError);

    TraceRecord zero;
    zero.func = 0;
    FunctionId shipped = 0;
    CHECK_THROWS_AS(encode_batch({zero}, in, shipped), std::invalid_argument);
}

TEST_CASE("the canonical writer splits batches at the record cap") {
    FunctionInterner in;
    in.intern("f");
    std::vector<TraceRecord> records(kWireBatchRecordCap + 10);
    for (size_t i = 0; i < records.size(); ++i) {
        records[i].func = 1;
        records[i].ts = i;
    }
    auto bytes = encode_trace(records, in);
    WireDecoder d;
    d.feed(bytes.data(), bytes.size());
    d.finish();
    CHECK(d.batches_decoded() == 2);
    CHECK(d.records() == records);
}

TEST_CASE("incremental decoding accepts arbitrary chunking") {
    auto sim = simulate([] {
        ScenarioConfig cfg = preset("seqread_hit");
        cfg.requests_per_thread = 120;
        std::erase_if(cfg.spike_injections,
                      [](const SpikeInjection& s) { return s.request_index >= 120; });
        return cfg;
    }());
    auto bytes = encode_trace(sim.records, sim.interner);
    WireDecoder d;
    SplitMix64 rng(5);
    size_t off = 0;
    while (off < bytes.size()) {
        size_t n = std::min<size_t>(1 + rng.bounded(700), bytes.size() - off);
        d.feed(bytes.data() + off, n);
        off += n;
    }
    d.finish();
    CHECK(d.records() == sim.records);
}
