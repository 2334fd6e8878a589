// Copyright 2026 The Relay Authors
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
//
// relay: per-request, per-layer IO latency profiling over simulated
// kernel traces. Subcommands wire the pipeline stages together:
//
//   simulate  run a workload preset, emit trace (+ ground truth)
//   collect   receive an agent session and persist the trace
//   analyze   compute per-request layer breakdowns from a trace
//   report    render CSV/JSON/SVG analyses from profiles
//   verify    validate a trace and cross-check analyzer vs oracle
//   pipeline  all of the above end to end, with invariant checks
//
// Exit codes: 0 success, 1 failed checks or findings, 2 bad usage/IO.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "relay/pipeline.hpp"

namespace {

using namespace relay;

uint64_t resolve_seed(uint64_t flag_seed) {
    if (const char* env = std::getenv("RELAY_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw CLI::ValidationError("RELAY_SEED", "RELAY_SEED must be an integer");
        }
    }
    return flag_seed;
}

LayerDescription load_layers(const std::string& spec) {
    if (spec.empty() || spec == "default") return default_layer_description();
    auto bytes = read_file_bytes(spec);
    return parse_layer_description(
        std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

ProfileDescription load_profile(const std::string& spec) {
    if (spec.empty() || spec == "default") return default_profile_script();
    auto bytes = read_file_bytes(spec);
    return parse_profile_script(
        std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

int cmd_simulate(const std::string& preset_name, uint64_t seed, const std::string& depth_str,
                 const std::string& out, const std::string& truth_path, const std::string& stream,
                 const std::string& profile_path) {
    ScenarioConfig cfg = preset(preset_name);
    cfg.seed = resolve_seed(seed);
    cfg.depth = ProbeDepth::parse(depth_str);
    if (!profile_path.empty() && profile_path != "default") cfg.profile = load_profile(profile_path);

    SimResult sim = simulate(cfg);
    std::fprintf(stderr, "simulated %zu requests, %zu records (preset %s, seed %llu, depth %s)\n",
                 sim.truth.entries.size(), sim.records.size(), preset_name.c_str(),
                 static_cast<unsigned long long>(cfg.seed), cfg.depth.str().c_str());

    if (!out.empty()) write_trace_file(out, sim.records, sim.interner);
    if (!truth_path.empty()) write_truth_json(truth_path, sim);

    if (!stream.empty()) {
        std::vector<RecordRing> rings(cfg.threads);
        std::atomic<bool> done{false};
        Agent agent(stream, &rings, sim.interner);
        AgentStats stats;
        std::thread agent_thread([&] { stats = agent.run(done); });
        for (const TraceRecord& r : sim.records)
            while (!rings[r.cpu].push(r)) std::this_thread::sleep_for(std::chrono::microseconds(20));
        done.store(true, std::memory_order_release);
        agent_thread.join();
        std::fprintf(stderr, "agent: sent %llu records in %llu frames, %llu ring drops, %s\n",
                     static_cast<unsigned long long>(stats.records_sent),
                     static_cast<unsigned long long>(stats.frames_sent),
                     static_cast<unsigned long long>(stats.ring_drops),
                     stats.completed ? "session complete" : "session FAILED");
        if (!stats.completed) return 1;
    }
    return 0;
}

int cmd_collect(const std::string& listen, const std::string& out) {
    CollectorServer server(listen);
    std::fprintf(stderr, "collector listening on %s\n",
                 server.port() ? ("port " + std::to_string(server.port())).c_str() : listen.c_str());
    CollectorResult result = server.serve(out);
    std::fprintf(stderr, "collected %llu records in %llu frames (%llu reconnects, %llu agent drops) -> %s\n",
                 static_cast<unsigned long long>(result.records),
                 static_cast<unsigned long long>(result.frames),
                 static_cast<unsigned long long>(result.reconnects),
                 static_cast<unsigned long long>(result.agent_reported_drops), out.c_str());
    return 0;
}

int cmd_analyze(const std::string& trace, const std::string& layers_spec, const std::string& out) {
    DecodedTrace decoded = read_trace_file(trace);
    LayerDescription layers = load_layers(layers_spec);
    AnalysisResult analysis = analyze_stream(decoded.records, layers, decoded.interner);
    write_profiles_jsonl(out, analysis);
    std::fprintf(stderr,
                 "analyzed %zu records: %zu profiles, %llu incomplete, %llu discarded irq intervals\n",
                 decoded.records.size(), analysis.profiles.size(),
                 static_cast<unsigned long long>(analysis.incomplete_requests),
                 static_cast<unsigned long long>(analysis.discarded_irq_intervals));
    return 0;
}

int cmd_report(const std::string& profiles_path, const std::string& outdir, size_t window,
               int64_t tail_threshold) {
    AnalysisResult analysis = read_profiles_jsonl(profiles_path);
    ReportOptions opts;
    opts.window_size = window;
    opts.tail_threshold_ns = tail_threshold;
    auto paths = emit_report(analysis, outdir, opts);
    for (const auto& p : paths) std::fprintf(stderr, "wrote %s\n", p.c_str());
    return 0;
}

int cmd_verify(const std::string& trace, const std::string& layers_spec) {
    DecodedTrace decoded = read_trace_file(trace);
    LayerDescription layers = load_layers(layers_spec);
    VerifyReport report = verify_trace(decoded.records, layers, decoded.interner);

    std::printf("records:   %zu\n", decoded.records.size());
    std::printf("requests:  %zu checked, %llu incomplete\n", report.requests_checked,
                static_cast<unsigned long long>(report.incomplete_requests));
    std::printf("validation: %s (%zu violations)\n", report.validation.ok() ? "ok" : "FAILED",
                report.validation.errors.size());
    for (size_t i = 0; i < std::min<size_t>(5, report.validation.errors.size()); ++i) {
        const auto& e = report.validation.errors[i];
        std::printf("  record %zu: %s: %s\n", e.record_index, to_string(e.code), e.message.c_str());
    }
    std::printf("oracle:     %s (%zu divergences)\n", report.divergences == 0 ? "ok" : "DIVERGED",
                report.divergences);
    if (report.divergences) std::printf("  first: %s\n", report.first_divergence.c_str());
    return report.ok() ? 0 : 1;
}

int cmd_pipeline(const std::string& preset_name, uint64_t seed, const std::string& depth_str,
                 const std::string& outdir, bool stream, const std::string& layers_spec,
                 size_t window, int64_t tail_threshold) {
    PipelineOptions opts;
    opts.preset_name = preset_name;
    opts.seed = resolve_seed(seed);
    opts.depth = ProbeDepth::parse(depth_str);
    opts.outdir = outdir;
    opts.stream = stream;
    if (!layers_spec.empty() && layers_spec != "default") opts.layers_path = layers_spec;
    opts.report.window_size = window;
    opts.report.tail_threshold_ns = tail_threshold;

    PipelineResult result = run_pipeline(opts);
    Json record{
        {"ok", result.ok},
        {"preset", preset_name},
        {"seed", opts.seed},
        {"requests", result.requests},
        {"records", result.records},
        {"trace", result.trace_path},
        {"profiles", result.profiles_path},
        {"manifest", result.manifest_path},
        {"failures", result.failures},
    };
    std::printf("%s\n", record.dump().c_str());
    return result.ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"relay: per-request per-layer IO latency profiling pipeline"};
    app.require_subcommand(1);

    // simulate
    std::string preset_name = "seqread_hit", depth_str = "L8", out, truth_path, stream_ep, profile_path;
    uint64_t seed = 42;
    auto* sim = app.add_subcommand("simulate", "run a workload preset and emit its trace");
    sim->add_option("--preset", preset_name, "workload preset: seqread_hit, randread_miss, mt_irq_skew")
        ->required();
    sim->add_option("--seed", seed, "PRNG seed (env RELAY_SEED overrides)");
    sim->add_option("--depth", depth_str, "probe depth L1..L8 (default L8)");
    sim->add_option("--out", out, "trace output file (*.p2lt)");
    sim->add_option("--truth", truth_path, "ground-truth JSON output");
    sim->add_option("--stream", stream_ep, "stream records to a collector (host:port or unix:/path)");
    sim->add_option("--profile", profile_path, "profile script (*.p2l), or 'default'");

    // collect
    std::string listen_ep, collect_out;
    auto* col = app.add_subcommand("collect", "receive one agent session and persist the trace");
    col->add_option("--listen", listen_ep, "listen endpoint (host:port or unix:/path)")->required();
    col->add_option("--out", collect_out, "trace output file (*.p2lt)")->required();

    // analyze
    std::string trace_path, layers_spec = "default", profiles_out;
    auto* ana = app.add_subcommand("analyze", "compute per-request per-layer profiles from a trace");
    ana->add_option("trace", trace_path, "input trace (*.p2lt)")->required();
    ana->add_option("--layers", layers_spec, "layer description (*.layers), or 'default'");
    ana->add_option("--out", profiles_out, "profiles output (JSON lines)")->required();

    // report
    std::string report_profiles, report_dir;
    size_t window = 6'000;
    int64_t tail_threshold = 25'000;
    auto* rep = app.add_subcommand("report", "emit CSV/JSON/SVG analyses from profiles");
    rep->add_option("profiles", report_profiles, "profiles file from analyze")->required();
    rep->add_option("--out", report_dir, "output directory")->required();
    rep->add_option("--window", window, "requests per p99 window (default 6000)");
    rep->add_option("--tail-threshold", tail_threshold, "tail latency threshold in ns (default 25000)");

    // verify
    std::string verify_trace_path, verify_layers = "default";
    auto* ver = app.add_subcommand("verify", "validate a trace and cross-check analyzer vs oracle");
    ver->add_option("trace", verify_trace_path, "input trace (*.p2lt)")->required();
    ver->add_option("--layers", verify_layers, "layer description (*.layers), or 'default'");

    // pipeline
    std::string pl_preset = "seqread_hit", pl_depth = "L8", pl_outdir, pl_layers = "default";
    uint64_t pl_seed = 42;
    bool pl_stream = false;
    size_t pl_window = 6'000;
    int64_t pl_tail = 25'000;
    auto* pl = app.add_subcommand("pipeline", "simulate, transport, analyze and report end to end");
    pl->add_option("--preset", pl_preset, "workload preset")->required();
    pl->add_option("--seed", pl_seed, "PRNG seed (env RELAY_SEED overrides)");
    pl->add_option("--depth", pl_depth, "probe depth L1..L8");
    pl->add_option("--outdir", pl_outdir, "output directory")->required();
    pl->add_flag("--stream", pl_stream, "route the trace through an agent/collector loopback");
    pl->add_option("--layers", pl_layers, "layer description, or 'default'");
    pl->add_option("--window", pl_window, "requests per p99 window");
    pl->add_option("--tail-threshold", pl_tail, "tail latency threshold in ns");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            if (out.empty() && stream_ep.empty())
                throw CLI::ValidationError("simulate", "need --out and/or --stream");
            return cmd_simulate(preset_name, seed, depth_str, out, truth_path, stream_ep, profile_path);
        }
        if (col->parsed()) return cmd_collect(listen_ep, collect_out);
        if (ana->parsed()) return cmd_analyze(trace_path, layers_spec, profiles_out);
        if (rep->parsed()) return cmd_report(report_profiles, report_dir, window, tail_threshold);
        if (ver->parsed()) return cmd_verify(verify_trace_path, verify_layers);
        if (pl->parsed())
            return cmd_pipeline(pl_preset, pl_seed, pl_depth, pl_outdir, pl_stream, pl_layers,
                                pl_window, pl_tail);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
