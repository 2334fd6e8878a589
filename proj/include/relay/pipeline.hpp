// Copyright 2026 The Relay Authors
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
//
// End-to-end run: simulate -> (file | agent/collector loopback) ->
// decode -> analyze -> report, with the cross-stage invariants checked
// and a manifest of output digests. Returns rather than exits so tests
// and the CLI share one code path.

#ifndef RELAY_PIPELINE_HPP
#define RELAY_PIPELINE_HPP

#include <atomic>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "relay/analyzer.hpp"
#include "relay/json_io.hpp"
#include "relay/oracle.hpp"
#include "relay/report.hpp"
#include "relay/simulator.hpp"
#include "relay/transport.hpp"
#include "relay/util.hpp"
#include "relay/wire.hpp"

namespace relay {

struct PipelineOptions {
    std::string preset_name = "seqread_hit";
    uint64_t seed = 42;
    ProbeDepth depth{ProbeDepth::kMax};
    std::string outdir;
    bool stream = false; // route the trace through an agent/collector loopback
    std::string layers_path; // empty -> shipped default
    ReportOptions report;
};

struct PipelineResult {
    bool ok = false;
    std::vector<std::string> failures;
    std::string trace_path;
    std::string truth_path;
    std::string profiles_path;
    std::string manifest_path;
    std::vector<std::string> report_paths;
    size_t requests = 0;
    size_t records = 0;
    AgentStats agent;
    CollectorResult collector;
};

inline PipelineResult run_pipeline(const PipelineOptions& opts) {
    namespace fs = std::filesystem;
    PipelineResult result;
    auto fail = [&](const std::string& why) { result.failures.push_back(why); };

    fs::create_directories(opts.outdir);
    result.trace_path = (fs::path(opts.outdir) / "trace.p2lt").string();
    result.truth_path = (fs::path(opts.outdir) / "truth.json").string();
    result.profiles_path = (fs::path(opts.outdir) / "profiles.jsonl").string();
    result.manifest_path = (fs::path(opts.outdir) / "manifest.json").string();
    std::string report_dir = (fs::path(opts.outdir) / "report").string();

    ScenarioConfig cfg = preset(opts.preset_name);
    cfg.seed = opts.seed;
    cfg.depth = opts.depth;
    SimResult sim = simulate(cfg);
    result.requests = sim.truth.entries.size();
    result.records = sim.records.size();

    ValidationReport validation = validate_stream(sim.records);
    if (!validation.ok())
        fail("validation: " + std::to_string(validation.errors.size()) + " violations, first: " +
             validation.errors.front().message);

    if (opts.stream) {
        CollectorServer server("127.0.0.1:0");
        std::string endpoint = "127.0.0.1:" + std::to_string(server.port());
        std::thread collector_thread([&] { result.collector = server.serve(result.trace_path); });
        std::vector<RecordRing> rings(cfg.threads);
        std::atomic<bool> done{false};
        AgentOptions agent_opts;
        agent_opts.period_ms = 5;
        Agent agent(endpoint, &rings, sim.interner, agent_opts);
        std::thread agent_thread([&] { result.agent = agent.run(done); });
        for (const TraceRecord& r : sim.records)
            while (!rings[r.cpu].push(r)) std::this_thread::sleep_for(std::chrono::microseconds(20));
        done.store(true, std::memory_order_release);
        agent_thread.join();
        collector_thread.join();
        if (!result.agent.completed) fail("agent session did not complete");
        // The network hop must persist exactly what a direct write would.
        auto direct = encode_trace(sim.records, sim.interner);
        auto streamed = read_file_bytes(result.trace_path);
        if (direct != streamed) fail("streamed trace differs from direct encoding");
    } else {
        write_trace_file(result.trace_path, sim.records, sim.interner);
    }

    DecodedTrace decoded = read_trace_file(result.trace_path);
    if (decoded.records != sim.records) fail("decoded trace differs from emitted records");

    LayerDescription layers = default_layer_description();
    if (!opts.layers_path.empty()) {
        auto bytes = read_file_bytes(opts.layers_path);
        layers = parse_layer_description(
            std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    }
    AnalysisResult analysis = analyze_stream(decoded.records, layers, decoded.interner);

    if (analysis.profiles.size() != sim.truth.entries.size())
        fail("profile count " + std::to_string(analysis.profiles.size()) + " != request count " +
             std::to_string(sim.truth.entries.size()));
    for (const RequestProfile& p : analysis.profiles) {
        if (p.total_ns != p.component_sum()) {
            fail("conservation violated for rid " + std::to_string(p.rid));
            break;
        }
    }
    if (opts.depth.level == ProbeDepth::kMax) {
        for (const RequestProfile& p : analysis.profiles) {
            if (p.unattributed_ns != 0) {
                fail("unattributed time at full depth for rid " + std::to_string(p.rid));
                break;
            }
        }
        if (layers == default_layer_description() &&
            analysis.profiles.size() == sim.truth.entries.size()) {
            for (size_t i = 0; i < analysis.profiles.size(); ++i) {
                const auto& p = analysis.profiles[i];
                const auto& t = sim.truth.entries[i];
                bool match = p.rid == t.rid && p.total_ns == t.total_ns && p.irq_ns == t.irq_ns &&
                             p.irq_count == t.irq_count && p.sched_ns == t.sched_ns &&
                             p.io_wait_ns == t.io_wait_ns;
                for (size_t l = 0; l < kLayerCount && match; ++l)
                    match = p.layer_self_ns[l] == t.layer_self_ns[l];
                if (!match) {
                    fail("profile diverges from ground truth at rid " + std::to_string(p.rid));
                    break;
                }
            }
        }
    }

    write_truth_json(result.truth_path, sim);
    write_profiles_jsonl(result.profiles_path, analysis);
    result.report_paths = emit_report(analysis, report_dir, opts.report);

    Json files = Json::object();
    auto add_digest = [&](const std::string& path) {
        files[fs::path(path).lexically_relative(opts.outdir).string()] = file_digest(path);
    };
    add_digest(result.trace_path);
    add_digest(result.truth_path);
    add_digest(result.profiles_path);
    for (const auto& p : result.report_paths) add_digest(p);
    Json manifest{
        {"tool_version", kRelayVersion},
        {"wire_format", std::string(kWireMagic, 4)},
        {"preset", opts.preset_name},
        {"seed", opts.seed},
        {"depth", opts.depth.str()},
        {"requests", result.requests},
        {"records", result.records},
        {"streamed", opts.stream},
        {"ring_drops", result.agent.ring_drops},
        {"files", files},
    };
    write_text_file(result.manifest_path, manifest.dump(2) + "\n");

    result.ok = result.failures.empty();
    return result;
}

/// Analyzer-vs-oracle comparison over every request of a trace, plus
/// stream validation; the `verify` subcommand's engine.
struct VerifyReport {
    ValidationReport validation;
    size_t requests_checked = 0;
    size_t divergences = 0;
    std::string first_divergence;
    uint64_t incomplete_requests = 0;

    bool ok() const { return validation.ok() && divergences == 0; }
};

/// Field-by-field comparison keyed by bucket name, for divergence
/// reporting. Empty means the profiles agree exactly.
inline std::vector<std::string> diff_profiles(const RequestProfile& a, const RequestProfile& b,
                                              const std::vector<std::string>& layer_names) {
    std::vector<std::string> diffs;
    auto cmp = [&](const std::string& bucket, int64_t x, int64_t y) {
        if (x != y)
            diffs.push_back(bucket + ": " + std::to_string(x) + " != " + std::to_string(y));
    };
    cmp("total_ns", a.total_ns, b.total_ns);
    for (size_t i = 0; i < layer_names.size(); ++i)
        cmp(layer_names[i], a.layer_self_ns[i], b.layer_self_ns[i]);
    cmp("irq_ns", a.irq_ns, b.irq_ns);
    cmp("irq_count", a.irq_count, b.irq_count);
    cmp("sched_ns", a.sched_ns, b.sched_ns);
    cmp("io_wait_ns", a.io_wait_ns, b.io_wait_ns);
    cmp("unattributed_ns", a.unattributed_ns, b.unattributed_ns);
    auto cmp_hw = [&](const std::string& bucket, const HwDelta& x, const HwDelta& y) {
        if (!(x == y))
            diffs.push_back(bucket + ": cycles " + std::to_string(x.cycles) + "/" +
                            std::to_string(y.cycles) + " instructions " + std::to_string(x.instructions) +
                            "/" + std::to_string(y.instructions));
    };
    for (size_t i = 0; i < layer_names.size(); ++i)
        cmp_hw(layer_names[i] + "_hw", a.layer_hw[i], b.layer_hw[i]);
    cmp_hw("irq_hw", a.irq_hw, b.irq_hw);
    cmp_hw("request_hw", a.request_hw, b.request_hw);
    return diffs;
}

inline VerifyReport verify_trace(const std::vector<TraceRecord>& records, const LayerDescription& ld,
                                 const FunctionInterner& interner) {
    VerifyReport report;
    report.validation = validate_stream(records);

    AnalysisContext ctx(ld, interner);
    GroupedStream grouped = group_by_rid(records);
    report.incomplete_requests = grouped.incomplete_requests;
    std::vector<std::string> layer_names;
    for (const auto& l : ld.layers) layer_names.push_back(l.name);

    for (const auto& req : grouped.requests) {
        if (!req.complete) continue;
        RequestProfile a = compute_request_profile(req.events, ctx);
        RequestProfile o = oracle_profile(req.events, ctx);
        report.requests_checked++;
        auto diffs = diff_profiles(a, o, layer_names);
        if (!diffs.empty()) {
            report.divergences++;
            if (report.first_divergence.empty())
                report.first_divergence = "rid " + std::to_string(req.rid) + ": " + diffs.front();
        }
    }
    return report;
}

} // namespace relay

#endif // RELAY_PIPELINE_HPP
