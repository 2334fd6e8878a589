// Copyright 2026 The Relay Authors
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
//
// JSON serialization for analysis output and ground truth.
//
// profiles.jsonl: line 1 is a meta object
//   {"schema":"relay-profiles-v1","layers":[...],"discarded_irq_intervals":N,
//    "discarded_records":N,"incomplete_requests":N}
// followed by one RequestProfile object per line.

#ifndef RELAY_JSON_IO_HPP
#define RELAY_JSON_IO_HPP

#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "relay/analyzer.hpp"
#include "relay/simulator.hpp"
#include "relay/util.hpp"

namespace relay {

using Json = nlohmann::json;

constexpr const char* kProfilesSchema = "relay-profiles-v1";
constexpr const char* kTruthSchema = "relay-truth-v1";

inline Json hw_to_json(const HwDelta& d) {
    return Json{{"cycles", d.cycles}, {"instructions", d.instructions}};
}

inline Json profile_to_json(const RequestProfile& p, const std::vector<std::string>& layer_names) {
    Json layers = Json::object();
    Json layer_hw = Json::object();
    for (size_t i = 0; i < layer_names.size(); ++i) {
        layers[layer_names[i]] = p.layer_self_ns[i];
        layer_hw[layer_names[i]] = hw_to_json(p.layer_hw[i]);
    }
    Json j{
        {"rid", p.rid},
        {"pid", p.pid},
        {"tid", p.tid},
        {"cpu", p.cpu},
        {"start_ts", p.start_ts},
        {"end_ts", p.end_ts},
        {"total_ns", p.total_ns},
        {"layers", layers},
        {"irq_ns", p.irq_ns},
        {"irq_count", p.irq_count},
        {"sched_ns", p.sched_ns},
        {"io_wait_ns", p.io_wait_ns},
        {"unattributed_ns", p.unattributed_ns},
        {"hw", Json{{"layers", layer_hw}, {"irq", hw_to_json(p.irq_hw)}, {"request", hw_to_json(p.request_hw)}}},
    };
    if (auto cpi = p.request_cpi()) j["cpi"] = *cpi;
    else j["cpi"] = nullptr;
    return j;
}

inline RequestProfile profile_from_json(const Json& j, const std::vector<std::string>& layer_names) {
    RequestProfile p;
    p.rid = j.at("rid").get<uint64_t>();
    p.pid = j.at("pid").get<uint32_t>();
    p.tid = j.at("tid").get<uint32_t>();
    p.cpu = j.at("cpu").get<uint16_t>();
    p.start_ts = j.at("start_ts").get<uint64_t>();
    p.end_ts = j.at("end_ts").get<uint64_t>();
    p.total_ns = j.at("total_ns").get<int64_t>();
    p.irq_ns = j.at("irq_ns").get<int64_t>();
    p.irq_count = j.at("irq_count").get<uint32_t>();
    p.sched_ns = j.at("sched_ns").get<int64_t>();
    p.io_wait_ns = j.at("io_wait_ns").get<int64_t>();
    p.unattributed_ns = j.at("unattributed_ns").get<int64_t>();
    const Json& layers = j.at("layers");
    const Json& layer_hw = j.at("hw").at("layers");
    for (const auto& name : layer_names) {
        p.layer_self_ns.push_back(layers.at(name).get<int64_t>());
        const Json& h = layer_hw.at(name);
        p.layer_hw.push_back(HwDelta{h.at("cycles").get<uint64_t>(), h.at("instructions").get<uint64_t>()});
    }
    const Json& irq_hw = j.at("hw").at("irq");
    p.irq_hw = HwDelta{irq_hw.at("cycles").get<uint64_t>(), irq_hw.at("instructions").get<uint64_t>()};
    const Json& req_hw = j.at("hw").at("request");
    p.request_hw = HwDelta{req_hw.at("cycles").get<uint64_t>(), req_hw.at("instructions").get<uint64_t>()};
    return p;
}

inline void write_profiles_jsonl(const std::string& path, const AnalysisResult& analysis) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    Json meta{
        {"schema", kProfilesSchema},
        {"layers", analysis.layer_names},
        {"discarded_irq_intervals", analysis.discarded_irq_intervals},
        {"discarded_records", analysis.discarded_records},
        {"incomplete_requests", analysis.incomplete_requests},
        {"input_records", analysis.input_records},
    };
    f << meta.dump() << "\n";
    for (const auto& p : analysis.profiles) f << profile_to_json(p, analysis.layer_names).dump() << "\n";
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline AnalysisResult read_profiles_jsonl(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty profiles file: " + path);
    Json meta = Json::parse(line);
    if (meta.value("schema", "") != kProfilesSchema)
        throw std::runtime_error("unexpected profiles schema in " + path);
    AnalysisResult out;
    out.layer_names = meta.at("layers").get<std::vector<std::string>>();
    out.discarded_irq_intervals = meta.value("discarded_irq_intervals", 0ULL);
    out.discarded_records = meta.value("discarded_records", 0ULL);
    out.incomplete_requests = meta.value("incomplete_requests", 0ULL);
    out.input_records = meta.value("input_records", 0ULL);
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        out.profiles.push_back(profile_from_json(Json::parse(line), out.layer_names));
    }
    return out;
}

inline void write_truth_json(const std::string& path, const SimResult& sim) {
    Json requests = Json::array();
    for (const auto& t : sim.truth.entries) {
        Json layers = Json::object();
        for (size_t i = 0; i < kLayerCount; ++i) layers[kLayerNames[i]] = t.layer_self_ns[i];
        requests.push_back(Json{
            {"rid", t.rid},
            {"thread", t.thread_index},
            {"tid", t.tid},
            {"cpu", t.cpu},
            {"start_ts", t.start_ts},
            {"end_ts", t.end_ts},
            {"layers", layers},
            {"irq_ns", t.irq_ns},
            {"irq_count", t.irq_count},
            {"sched_ns", t.sched_ns},
            {"io_wait_ns", t.io_wait_ns},
            {"total_ns", t.total_ns},
            {"miss", t.miss},
            {"spike_layer", t.spiked ? Json(t.spike_layer) : Json(nullptr)},
        });
    }
    Json doc{
        {"schema", kTruthSchema},
        {"scenario", sim.config.name},
        {"seed", sim.config.seed},
        {"depth", sim.config.depth.str()},
        {"layers", std::vector<std::string>(kLayerNames.begin(), kLayerNames.end())},
        {"requests", requests},
    };
    write_text_file(path, doc.dump() + "\n");
}

} // namespace relay

#endif // RELAY_JSON_IO_HPP
