// Copyright 2026 The Relay Authors
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
//
// Agent/collector transport. The agent periodically drains the per-cpu
// record rings, merges them into canonical (ts, cpu) order and ships
// them as numbered frames over a stream socket; the collector decodes
// and re-encodes through the canonical trace writer, so the persisted
// file is byte-identical to one written directly, whatever the network
// chunking or reconnect history was.
//
// Frame protocol (all integers little-endian):
//   on connect: collector -> agent   u64 next-expected-seq
//   agent -> collector               u32 len | u64 seq | payload
//   collector -> agent after frame   u64 next-expected-seq (ack)
//   end of session: seq = UINT64_MAX, payload = u64 ring-drop count
// Frames are retransmitted after reconnect until acknowledged; the
// sequence numbers make delivery exactly-once.
//
// Endpoints: "host:port" (TCP) or "unix:/path" (Unix stream socket).

#ifndef RELAY_TRANSPORT_HPP
#define RELAY_TRANSPORT_HPP

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "relay/ring_buffer.hpp"
#include "relay/wire.hpp"

namespace relay {

class TransportError : public std::runtime_error {
public:
    explicit TransportError(const std::string& msg) : std::runtime_error(msg) {}
};

constexpr uint64_t kFinSeq = UINT64_MAX;

namespace net {

struct Endpoint {
    bool is_unix = false;
    std::string host; // or socket path
    uint16_t port = 0;

    static Endpoint parse(const std::string& text) {
        Endpoint ep;
        if (text.rfind("unix:", 0) == 0) {
            ep.is_unix = true;
            ep.host = text.substr(5);
            if (ep.host.empty()) throw TransportError("empty unix socket path");
            return ep;
        }
        auto colon = text.rfind(':');
        if (colon == std::string::npos)
            throw TransportError("endpoint must be host:port or unix:/path, got '" + text + "'");
        ep.host = text.substr(0, colon);
        if (ep.host.empty()) ep.host = "127.0.0.1";
        ep.port = static_cast<uint16_t>(std::stoi(text.substr(colon + 1)));
        return ep;
    }
};

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
    Socket& operator=(Socket&& o) noexcept {
        if (this != &o) {
            close_fd();
            fd_ = o.fd_;
            o.fd_ = -1;
        }
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket() { close_fd(); }

    bool valid() const { return fd_ >= 0; }
    int fd() const { return fd_; }
    void close_fd() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

    void set_recv_timeout(int ms) const {
        timeval tv{ms / 1000, (ms % 1000) * 1000};
        ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    }

    bool write_all(const void* data, size_t n) const {
        const char* p = static_cast<const char*>(data);
        while (n > 0) {
            ssize_t w = ::send(fd_, p, n, MSG_NOSIGNAL);
            if (w <= 0) return false;
            p += w;
            n -= static_cast<size_t>(w);
        }
        return true;
    }
    bool read_all(void* data, size_t n) const {
        char* p = static_cast<char*>(data);
        while (n > 0) {
            ssize_t r = ::recv(fd_, p, n, 0);
            if (r <= 0) return false;
            p += r;
            n -= static_cast<size_t>(r);
        }
        return true;
    }
    bool write_u64(uint64_t v) const {
        uint8_t buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<uint8_t>(v >> (8 * i));
        return write_all(buf, 8);
    }
    bool read_u64(uint64_t& v) const {
        uint8_t buf[8];
        if (!read_all(buf, 8)) return false;
        v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
        return true;
    }
    bool write_u32(uint32_t v) const {
        uint8_t buf[4];
        for (int i = 0; i < 4; ++i) buf[i] = static_cast<uint8_t>(v >> (8 * i));
        return write_all(buf, 4);
    }
    bool read_u32(uint32_t& v) const {
        uint8_t buf[4];
        if (!read_all(buf, 4)) return false;
        v = static_cast<uint32_t>(buf[0]) | (static_cast<uint32_t>(buf[1]) << 8) |
            (static_cast<uint32_t>(buf[2]) << 16) | (static_cast<uint32_t>(buf[3]) << 24);
        return true;
    }

private:
    int fd_ = -1;
};

inline Socket connect_to(const Endpoint& ep) {
    if (ep.is_unix) {
        int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
        if (fd < 0) throw TransportError("socket() failed");
        sockaddr_un addr{};
        addr.sun_family = AF_UNIX;
        std::strncpy(addr.sun_path, ep.host.c_str(), sizeof(addr.sun_path) - 1);
        if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
            ::close(fd);
            return Socket{};
        }
        return Socket{fd};
    }
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(ep.port);
    if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw TransportError("bad address '" + ep.host + "'");
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        return Socket{};
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return Socket{fd};
}

class Listener {
public:
    explicit Listener(const Endpoint& ep) : ep_(ep) {
        if (ep.is_unix) {
            ::unlink(ep.host.c_str());
            fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
            if (fd_ < 0) throw TransportError("socket() failed");
            sockaddr_un addr{};
            addr.sun_family = AF_UNIX;
            std::strncpy(addr.sun_path, ep.host.c_str(), sizeof(addr.sun_path) - 1);
            if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
                throw TransportError("bind failed on " + ep.host);
        } else {
            fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
            if (fd_ < 0) throw TransportError("socket() failed");
            int one = 1;
            ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
            sockaddr_in addr{};
            addr.sin_family = AF_INET;
            addr.sin_port = htons(ep.port);
            if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1)
                throw TransportError("bad address '" + ep.host + "'");
            if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
                throw TransportError("bind failed on " + ep.host + ":" + std::to_string(ep.port));
            sockaddr_in bound{};
            socklen_t len = sizeof bound;
            ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
            port_ = ntohs(bound.sin_port);
        }
        if (::listen(fd_, 4) != 0) throw TransportError("listen failed");
    }
    ~Listener() {
        if (fd_ >= 0) ::close(fd_);
        if (ep_.is_unix) ::unlink(ep_.host.c_str());
    }
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    uint16_t port() const { return port_; }
    Socket accept() const {
        int fd = ::accept(fd_, nullptr, nullptr);
        if (fd < 0) return Socket{};
        int one = 1;
        if (!ep_.is_unix) ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        return Socket{fd};
    }

private:
    Endpoint ep_;
    int fd_ = -1;
    uint16_t port_ = 0;
};

} // namespace net

struct CollectorResult {
    uint64_t records = 0;
    uint64_t frames = 0;
    uint64_t reconnects = 0;
    uint64_t agent_reported_drops = 0;
};

/// One-session collector: accepts an agent (reconnects allowed), decodes
/// its frames in sequence and appends the records to `out_path` through
/// the canonical writer. Returns when the agent's end-of-session frame
/// is acknowledged.
class CollectorServer {
public:
    explicit CollectorServer(const std::string& endpoint)
        : listener_(net::Endpoint::parse(endpoint)) {}

    uint16_t port() const { return listener_.port(); }

    CollectorResult serve(const std::string& out_path) {
        std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
        if (!out) throw TransportError("cannot open for write: " + out_path);

        CollectorResult result;
        WireDecoder decoder;
        TraceFileWriter writer(decoder.interner());
        uint64_t expected_seq = 0;
        bool first_conn = true;

        auto drain_decoded = [&] {
            for (const TraceRecord& r : decoder.records()) {
                writer.write(r);
                result.records++;
            }
            decoder.records().clear();
        };

        while (true) {
            net::Socket conn = listener_.accept();
            if (!conn.valid()) throw TransportError("accept failed");
            conn.set_recv_timeout(10'000);
            if (!first_conn) result.reconnects++;
            first_conn = false;
            if (!conn.write_u64(expected_seq)) continue;

            while (true) {
                uint32_t len = 0;
                if (!conn.read_u32(len)) break; // connection lost; re-accept
                if (len < 8) throw TransportError("short frame");
                uint64_t seq = 0;
                if (!conn.read_u64(seq)) break;
                std::vector<uint8_t> payload(len - 8);
                if (!payload.empty() && !conn.read_all(payload.data(), payload.size())) break;

                if (seq == kFinSeq) {
                    if (payload.size() != 8) throw TransportError("bad end-of-session frame");
                    uint64_t drops = 0;
                    for (int i = 7; i >= 0; --i) drops = (drops << 8) | payload[i];
                    result.agent_reported_drops = drops;
                    auto bytes = writer.finish();
                    out.write(reinterpret_cast<const char*>(bytes.data()),
                              static_cast<std::streamsize>(bytes.size()));
                    out.flush();
                    if (!out) throw TransportError("write failed: " + out_path);
                    conn.write_u64(expected_seq);
                    return result;
                }
                if (seq == expected_seq) {
                    decoder.feed(payload.data(), payload.size());
                    if (decoder.pending_bytes() != 0)
                        throw TransportError("frame did not contain whole batches");
                    drain_decoded();
                    expected_seq++;
                    result.frames++;
                } else if (seq > expected_seq) {
                    throw TransportError("sequence gap: got " + std::to_string(seq) + ", expected " +
                                         std::to_string(expected_seq));
                }
                // Duplicates fall through to the ack.
                if (!conn.write_u64(expected_seq)) break;
            }
        }
    }

private:
    net::Listener listener_;
};

struct AgentOptions {
    int period_ms = 100;
    int max_reconnects = 8;
    int reconnect_backoff_ms = 50;
};

struct AgentStats {
    uint64_t records_sent = 0;
    uint64_t frames_sent = 0;
    uint64_t reconnects = 0;
    uint64_t ring_drops = 0;
    bool completed = false;
};

/// Drains per-cpu rings every period and ships the merged records.
/// While the connection is down nothing is drained, so backpressure
/// lands in the rings (and is counted there as drops when they fill).
class Agent {
public:
    Agent(std::string endpoint, std::vector<RecordRing>* rings, const FunctionInterner& interner,
          AgentOptions opts = {})
        : endpoint_(std::move(endpoint)), rings_(rings), interner_(&interner), opts_(opts) {}

    /// Runs until `producer_done` is set and the rings are empty.
    AgentStats run(const std::atomic<bool>& producer_done) {
        AgentStats stats;
        const net::Endpoint ep = net::Endpoint::parse(endpoint_);
        net::Socket conn;
        bool connected_once = false;
        uint64_t next_seq = 0;
        std::vector<uint8_t> inflight; // encoded frame awaiting ack
        uint64_t inflight_seq = 0;
        uint64_t inflight_records = 0;
        FunctionId shipped = 0;

        auto commit_inflight = [&] {
            if (inflight_seq != kFinSeq) {
                stats.frames_sent++;
                stats.records_sent += inflight_records;
            }
            inflight.clear();
        };

        auto ensure_connected = [&]() -> bool {
            if (conn.valid()) return true;
            for (int attempt = 0; attempt <= opts_.max_reconnects; ++attempt) {
                if (attempt > 0)
                    std::this_thread::sleep_for(
                        std::chrono::milliseconds(opts_.reconnect_backoff_ms * attempt));
                conn = net::connect_to(ep);
                if (!conn.valid()) continue;
                conn.set_recv_timeout(10'000);
                uint64_t expected = 0;
                if (!conn.read_u64(expected)) {
                    conn.close_fd();
                    continue;
                }
                if (connected_once) stats.reconnects++;
                connected_once = true;
                if (!inflight.empty() && inflight_seq != kFinSeq && expected == inflight_seq + 1)
                    commit_inflight(); // frame landed but its ack was lost
                return true;
            }
            return false;
        };

        // Retransmits the inflight frame until acked or out of retries.
        auto flush_inflight = [&]() -> bool {
            while (!inflight.empty()) {
                if (!ensure_connected()) return false;
                if (inflight.empty()) break;
                if (conn.write_all(inflight.data(), inflight.size())) {
                    uint64_t ack = 0;
                    if (conn.read_u64(ack) && (inflight_seq == kFinSeq || ack == inflight_seq + 1)) {
                        commit_inflight();
                        break;
                    }
                }
                conn.close_fd();
            }
            return true;
        };

        auto make_frame = [](uint64_t seq, const std::vector<uint8_t>& payload) {
            std::vector<uint8_t> frame;
            frame.reserve(12 + payload.size());
            uint32_t len = static_cast<uint32_t>(8 + payload.size());
            for (int i = 0; i < 4; ++i) frame.push_back(static_cast<uint8_t>(len >> (8 * i)));
            for (int i = 0; i < 8; ++i) frame.push_back(static_cast<uint8_t>(seq >> (8 * i)));
            frame.insert(frame.end(), payload.begin(), payload.end());
            return frame;
        };

        std::vector<TraceRecord> drained;
        while (true) {
            const bool done = producer_done.load(std::memory_order_acquire);
            drained.clear();
            if (ensure_connected()) {
                for (RecordRing& ring : *rings_) ring.drain(drained, SIZE_MAX);
            }
            if (!drained.empty()) {
                // Per-ring order is already per-cpu order; a stable sort
                // by (ts, cpu) reproduces the canonical merged stream.
                std::stable_sort(drained.begin(), drained.end(),
                                 [](const TraceRecord& a, const TraceRecord& b) {
                                     if (a.ts != b.ts) return a.ts < b.ts;
                                     return a.cpu < b.cpu;
                                 });
                inflight = make_frame(next_seq, encode_batch(drained, *interner_, shipped));
                inflight_seq = next_seq;
                inflight_records = drained.size();
                if (!flush_inflight()) break;
                next_seq++;
                continue; // keep draining while data is flowing
            }
            if (done) {
                bool empty = true;
                for (RecordRing& ring : *rings_) empty = empty && ring.empty();
                if (empty) {
                    uint64_t drops = 0;
                    for (RecordRing& ring : *rings_) drops += ring.dropped();
                    stats.ring_drops = drops;
                    std::vector<uint8_t> payload;
                    for (int i = 0; i < 8; ++i) payload.push_back(static_cast<uint8_t>(drops >> (8 * i)));
                    inflight = make_frame(kFinSeq, payload);
                    inflight_seq = kFinSeq;
                    inflight_records = 0;
                    stats.completed = flush_inflight() && inflight.empty();
                    break;
                }
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(opts_.period_ms));
        }
        return stats;
    }

private:
    std::string endpoint_;
    std::vector<RecordRing>* rings_;
    const FunctionInterner* interner_;
    AgentOptions opts_;
};

} // namespace relay

#endif // RELAY_TRANSPORT_HPP
