// Copyright 2026 The Relay Authors
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
//
// Statistics over request profiles: nearest-rank percentiles, windowed
// per-thread tail latency, interrupt fairness accounting and per-request
// tail decomposition. Everything here is a pure function and integer-
// exact where the inputs are integers.

#ifndef RELAY_STATS_HPP
#define RELAY_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relay/analyzer.hpp"

namespace relay {

/// Nearest-rank percentile with an exact rational rank: the
/// ceil(q_num/q_den * n)-th smallest element. Always a sample value.
inline int64_t percentile_nearest_rank(std::vector<int64_t> values, uint64_t q_num, uint64_t q_den) {
    if (values.empty()) throw std::invalid_argument("percentile of empty set");
    if (q_den == 0 || q_num == 0 || q_num > q_den)
        throw std::invalid_argument("percentile rank must satisfy 0 < q <= 1");
    std::sort(values.begin(), values.end());
    uint64_t n = values.size();
    uint64_t k = (n * q_num + q_den - 1) / q_den; // ceil(n*q)
    if (k == 0) k = 1;
    return values[k - 1];
}

/// Convenience overload: q as a decimal fraction, snapped to 1e-6.
inline int64_t percentile(const std::vector<int64_t>& values, double q) {
    auto num = static_cast<uint64_t>(std::llround(q * 1'000'000.0));
    return percentile_nearest_rank(values, num, 1'000'000);
}

struct WindowCell {
    int64_t p99_ns = 0;
    size_t count = 0;

    bool operator==(const WindowCell&) const = default;
};

/// Per-window, per-thread tail latency. Windows are consecutive groups
/// of `window_size` requests in start-timestamp order; the final window
/// may be partial, so window count = ceil(total / window_size).
struct WindowedSeries {
    size_t window_size = 0;
    std::vector<std::map<uint32_t, WindowCell>> windows; // tid -> cell

    bool operator==(const WindowedSeries&) const = default;
};

inline WindowedSeries windowed_p99(const std::vector<RequestProfile>& profiles,
                                   size_t window_size = 6'000) {
    if (window_size == 0) throw std::invalid_argument("window size must be positive");
    WindowedSeries series;
    series.window_size = window_size;

    std::vector<const RequestProfile*> ordered;
    ordered.reserve(profiles.size());
    for (const auto& p : profiles) ordered.push_back(&p);
    std::stable_sort(ordered.begin(), ordered.end(), [](const RequestProfile* a, const RequestProfile* b) {
        if (a->start_ts != b->start_ts) return a->start_ts < b->start_ts;
        return a->rid < b->rid;
    });

    for (size_t begin = 0; begin < ordered.size(); begin += window_size) {
        size_t end = std::min(begin + window_size, ordered.size());
        std::map<uint32_t, std::vector<int64_t>> by_tid;
        for (size_t i = begin; i < end; ++i)
            by_tid[ordered[i]->tid].push_back(ordered[i]->total_ns);
        std::map<uint32_t, WindowCell> cells;
        for (auto& [tid, totals] : by_tid)
            cells[tid] = WindowCell{percentile_nearest_rank(totals, 99, 100), totals.size()};
        series.windows.push_back(std::move(cells));
    }
    return series;
}

struct FairnessRow {
    uint32_t tid = 0;
    uint64_t irq_count = 0;
    int64_t irq_ns = 0;

    bool operator==(const FairnessRow&) const = default;
};

/// Per-thread interrupt burden, rows ordered by tid. Row sums equal the
/// stream-wide irq totals by construction.
inline std::vector<FairnessRow> fairness_table(const std::vector<RequestProfile>& profiles) {
    std::map<uint32_t, FairnessRow> rows;
    for (const auto& p : profiles) {
        FairnessRow& row = rows[p.tid];
        row.tid = p.tid;
        row.irq_count += p.irq_count;
        row.irq_ns += p.irq_ns;
    }
    std::vector<FairnessRow> out;
    out.reserve(rows.size());
    for (auto& [tid, row] : rows) out.push_back(row);
    return out;
}

struct TailEntry {
    uint64_t rid = 0;
    uint32_t tid = 0;
    int64_t total_ns = 0;
    std::string dominant;   // layer or bucket name
    double share = 0.0;     // dominant / total

    bool operator==(const TailEntry&) const = default;
};

/// Requests above `threshold_ns`, each attributed to its dominant
/// bucket: the attributable layers in description order (the io layer
/// aggregates its frame self time with device wait), then the irq and
/// sched interference buckets. Ties go to the earlier candidate.
inline std::vector<TailEntry> tail_decompose(const std::vector<RequestProfile>& profiles,
                                             const std::vector<std::string>& layer_names,
                                             int64_t threshold_ns) {
    if (threshold_ns <= 0) throw std::invalid_argument("tail threshold must be positive");
    std::vector<TailEntry> out;
    for (const auto& p : profiles) {
        if (p.total_ns <= threshold_ns) continue;
        std::vector<std::pair<std::string, int64_t>> candidates;
        bool io_merged = false;
        for (size_t i = 0; i < layer_names.size(); ++i) {
            int64_t v = i < p.layer_self_ns.size() ? p.layer_self_ns[i] : 0;
            if (layer_names[i] == LayerDescription::kWaitBucket) {
                v += p.io_wait_ns;
                io_merged = true;
            }
            candidates.push_back({layer_names[i], v});
        }
        candidates.push_back({LayerDescription::kIrqBucket, p.irq_ns});
        candidates.push_back({LayerDescription::kSchedBucket, p.sched_ns});
        if (!io_merged) candidates.push_back({LayerDescription::kWaitBucket, p.io_wait_ns});

        size_t best = 0;
        for (size_t i = 1; i < candidates.size(); ++i)
            if (candidates[i].second > candidates[best].second) best = i;
        TailEntry e;
        e.rid = p.rid;
        e.tid = p.tid;
        e.total_ns = p.total_ns;
        e.dominant = candidates[best].first;
        e.share = p.total_ns > 0
                      ? static_cast<double>(candidates[best].second) / static_cast<double>(p.total_ns)
                      : 0.0;
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace relay

#endif // RELAY_STATS_HPP
