// Copyright 2026 The Relay Authors
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
//
// Binary trace format. A trace file (*.p2lt) is a concatenation of
// batches; each batch is:
//
//   magic "P2L1"                      4 bytes
//   string-table delta count          u32 LE
//   record count                      u32 LE
//   table entries: id u32, len u8, name bytes     (delta count times)
//   records, 48 bytes each, little-endian:
//     kind u8, cpu u16, pid u32, tid u32, func u32,
//     rid u64, ts u64, cycles u64, instructions u64, pad u8
//
// Function names ship once, in the batch that first references them;
// ids are dense from 1 in shipping order, so a decoder accumulates an
// identical string table.

#ifndef RELAY_WIRE_HPP
#define RELAY_WIRE_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "relay/trace_model.hpp"

namespace relay {

constexpr char kWireMagic[4] = {'P', '2', 'L', '1'};
constexpr size_t kWireRecordBytes = 48;
constexpr size_t kWireBatchHeaderBytes = 12;
constexpr size_t kWireBatchRecordCap = 8192; // canonical writer batch size

class WireError : public std::runtime_error {
public:
    WireError(uint64_t byte_offset, const std::string& msg)
        : std::runtime_error("trace byte " + std::to_string(byte_offset) + ": " + msg),
          offset_(byte_offset) {}
    uint64_t offset() const { return offset_; }

private:
    uint64_t offset_;
};

namespace wire_detail {

inline void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
}
inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}
inline void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}
inline uint16_t get_u16(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}
inline uint32_t get_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
inline uint64_t get_u64(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

} // namespace wire_detail

inline void encode_record(std::vector<uint8_t>& out, const TraceRecord& r) {
    using namespace wire_detail;
    out.push_back(static_cast<uint8_t>(r.kind));
    put_u16(out, r.cpu);
    put_u32(out, r.pid);
    put_u32(out, r.tid);
    put_u32(out, r.func);
    put_u64(out, r.rid);
    put_u64(out, r.ts);
    put_u64(out, r.hw.cycles);
    put_u64(out, r.hw.instructions);
    out.push_back(0); // pad
}

/// Encodes one batch. `shipped_names` is the caller's watermark of
/// string-table ids already on the wire; it advances so later batches
/// ship only new names.
inline std::vector<uint8_t> encode_batch(const std::vector<TraceRecord>& records,
                                         const FunctionInterner& interner,
                                         FunctionId& shipped_names) {
    using namespace wire_detail;
    FunctionId max_id = shipped_names;
    for (const TraceRecord& r : records) {
        if (r.func == 0 || !interner.contains(r.func))
            throw std::invalid_argument("encode_batch: record references unknown FunctionId " +
                                        std::to_string(r.func));
        max_id = std::max(max_id, r.func);
    }
    std::vector<uint8_t> out;
    out.reserve(kWireBatchHeaderBytes + records.size() * kWireRecordBytes);
    out.insert(out.end(), kWireMagic, kWireMagic + 4);
    put_u32(out, max_id - shipped_names);
    put_u32(out, static_cast<uint32_t>(records.size()));
    for (FunctionId id = shipped_names + 1; id <= max_id; ++id) {
        const std::string& name = interner.name(id);
        put_u32(out, id);
        out.push_back(static_cast<uint8_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
    }
    shipped_names = max_id;
    for (const TraceRecord& r : records) encode_record(out, r);
    return out;
}

/// Incremental batch decoder. Feed it bytes in any chunking; it consumes
/// whole batches and keeps a partial tail pending. The accumulated
/// string table persists across batches.
class WireDecoder {
public:
    /// Appends bytes and decodes every complete batch.
    void feed(const uint8_t* data, size_t n) {
        pending_.insert(pending_.end(), data, data + n);
        size_t consumed = 0;
        while (true) {
            size_t used = try_decode_batch(pending_.data() + consumed, pending_.size() - consumed,
                                           base_offset_ + consumed);
            if (used == 0) break;
            consumed += used;
        }
        pending_.erase(pending_.begin(), pending_.begin() + consumed);
        base_offset_ += consumed;
    }

    /// Bytes held back waiting for the rest of a batch.
    size_t pending_bytes() const { return pending_.size(); }
    /// Fails if a partial batch is still pending (truncated input).
    void finish() const {
        if (!pending_.empty())
            throw WireError(base_offset_ + pending_.size(), "truncated batch at end of stream");
    }

    std::vector<TraceRecord>& records() { return records_; }
    const std::vector<TraceRecord>& records() const { return records_; }
    const FunctionInterner& interner() const { return table_; }
    uint64_t batches_decoded() const { return batches_; }

private:
    using WE = WireError;

    // Returns bytes consumed, or 0 if `n` bytes do not hold a full batch.
    size_t try_decode_batch(const uint8_t* p, size_t n, uint64_t abs) {
        using namespace wire_detail;
        if (n < kWireBatchHeaderBytes) return 0;
        if (std::memcmp(p, kWireMagic, 4) != 0)
            throw WE(abs, "bad magic");
        uint32_t table_count = get_u32(p + 4);
        uint32_t record_count = get_u32(p + 8);
        size_t off = kWireBatchHeaderBytes;
        // Table entries are variable length; walk them.
        std::vector<std::pair<FunctionId, std::string>> entries;
        entries.reserve(table_count);
        for (uint32_t i = 0; i < table_count; ++i) {
            if (n < off + 5) return 0;
            FunctionId id = get_u32(p + off);
            uint8_t len = p[off + 4];
            if (len == 0) throw WE(abs + off + 4, "empty string-table name");
            if (n < off + 5 + len) return 0;
            entries.emplace_back(id, std::string(reinterpret_cast<const char*>(p + off + 5), len));
            off += 5 + len;
        }
        if (n < off + static_cast<size_t>(record_count) * kWireRecordBytes) return 0;

        for (auto& [id, name] : entries) {
            if (id != table_.size() + 1)
                throw WE(abs + kWireBatchHeaderBytes, "non-dense string-table id " + std::to_string(id));
            table_.restore(id, name);
        }
        for (uint32_t i = 0; i < record_count; ++i, off += kWireRecordBytes) {
            const uint8_t* q = p + off;
            TraceRecord r;
            if (q[0] > static_cast<uint8_t>(EventKind::SyscallExit))
                throw WE(abs + off, "unknown event kind " + std::to_string(q[0]));
            r.kind = static_cast<EventKind>(q[0]);
            r.cpu = get_u16(q + 1);
            r.pid = get_u32(q + 3);
            r.tid = get_u32(q + 7);
            r.func = get_u32(q + 11);
            r.rid = get_u64(q + 15);
            r.ts = get_u64(q + 23);
            r.hw.cycles = get_u64(q + 31);
            r.hw.instructions = get_u64(q + 39);
            if (r.func == 0 || !table_.contains(r.func))
                throw WE(abs + off + 11, "FunctionId " + std::to_string(r.func) +
                                             " not in accumulated string table");
            records_.push_back(r);
        }
        batches_++;
        return off;
    }

    std::vector<uint8_t> pending_;
    uint64_t base_offset_ = 0;
    FunctionInterner table_;
    std::vector<TraceRecord> records_;
    uint64_t batches_ = 0;
};

/// Canonical batching writer: batches of exactly kWireBatchRecordCap
/// records (remainder at finish), names shipped on first reference. Any
/// producer that routes the same record stream through this writer
/// emits byte-identical files, whatever its own chunking was.
class TraceFileWriter {
public:
    explicit TraceFileWriter(const FunctionInterner& interner) : interner_(&interner) {}

    void write(const TraceRecord& r) {
        buffer_.push_back(r);
        if (buffer_.size() >= kWireBatchRecordCap) emit();
    }
    void write(const std::vector<TraceRecord>& records) {
        for (const TraceRecord& r : records) write(r);
    }
    /// Flushes the remainder. A stream with no records at all still
    /// yields one empty batch so the output is a well-formed trace.
    std::vector<uint8_t> finish() {
        if (!buffer_.empty() || !emitted_any_) emit();
        return std::move(out_);
    }

private:
    void emit() {
        auto bytes = encode_batch(buffer_, *interner_, shipped_);
        out_.insert(out_.end(), bytes.begin(), bytes.end());
        buffer_.clear();
        emitted_any_ = true;
    }

    const FunctionInterner* interner_;
    std::vector<TraceRecord> buffer_;
    std::vector<uint8_t> out_;
    FunctionId shipped_ = 0;
    bool emitted_any_ = false;
};

struct DecodedTrace {
    std::vector<TraceRecord> records;
    FunctionInterner interner;
};

inline std::vector<uint8_t> encode_trace(const std::vector<TraceRecord>& records,
                                         const FunctionInterner& interner) {
    TraceFileWriter w(interner);
    w.write(records);
    return w.finish();
}

inline DecodedTrace decode_trace(const std::vector<uint8_t>& bytes) {
    WireDecoder d;
    d.feed(bytes.data(), bytes.size());
    d.finish();
    return DecodedTrace{std::move(d.records()), d.interner()};
}

inline void write_trace_file(const std::string& path, const std::vector<TraceRecord>& records,
                             const FunctionInterner& interner) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    auto bytes = encode_trace(records, interner);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline DecodedTrace read_trace_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for read: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_trace(bytes);
}

} // namespace relay

#endif // RELAY_WIRE_HPP
