// Copyright 2026 The Relay Authors
// Licensed under the Apache License, Version 2.0. See LICENSE for details.
//
// Profile scripts (*.p2l) describe probe points and the hardware events
// to sample; layer descriptions (*.layers) assign probed functions to
// named IO-stack layers. Both use a line-oriented grammar:
//
//   stmt  := probe | layer | hw
//   probe := "probe" IDENT ("entry"|"exit"|"entry,exit") "depth=" INT
//   layer := "layer" IDENT "=" IDENT ("," IDENT)*
//   hw    := "hw" IDENT+
//
// '#' starts a comment; blank lines are ignored.

#ifndef RELAY_PROFILE_CONFIG_HPP
#define RELAY_PROFILE_CONFIG_HPP

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "relay/trace_model.hpp"

namespace relay {

class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line), msg_(msg) {}
    int line() const { return line_; }
    const std::string& message() const { return msg_; }

private:
    int line_;
    std::string msg_;
};

enum class ProbeAt : uint8_t { Entry, Exit, Both };

inline const char* to_string(ProbeAt a) {
    switch (a) {
    case ProbeAt::Entry: return "entry";
    case ProbeAt::Exit: return "exit";
    case ProbeAt::Both: return "entry,exit";
    }
    return "?";
}

/// Probe depth knob: level Lk activates every probe whose depth rank is
/// at most k. The shipped default has ranks laid out so the active
/// probe-point counts at L1..L8 are 2, 6, 8, 9, 12, 13, 14, 15.
struct ProbeDepth {
    static constexpr int kMin = 1;
    static constexpr int kMax = 8;

    int level = kMax;

    static ProbeDepth parse(std::string_view text) {
        if (text.size() == 2 && (text[0] == 'L' || text[0] == 'l') && text[1] >= '1' && text[1] <= '8')
            return ProbeDepth{text[1] - '0'};
        throw std::invalid_argument("probe depth must be L1..L8, got '" + std::string(text) + "'");
    }
    std::string str() const { return "L" + std::to_string(level); }
    bool operator==(const ProbeDepth&) const = default;
};

struct ProbeSpec {
    std::string function;
    ProbeAt at = ProbeAt::Both;
    int depth = 1; // 1..8

    bool operator==(const ProbeSpec&) const = default;
};

struct ProfileDescription {
    std::vector<ProbeSpec> probes;
    std::vector<std::string> hw_events; // subset of {cycles, instructions}

    bool operator==(const ProfileDescription&) const = default;

    const ProbeSpec* find(std::string_view function) const {
        for (const auto& p : probes)
            if (p.function == function) return &p;
        return nullptr;
    }

    /// Canonical text form; re-parsing it reproduces this description.
    std::string serialize() const {
        std::ostringstream out;
        for (const auto& p : probes)
            out << "probe " << p.function << " " << to_string(p.at) << " depth=" << p.depth << "\n";
        if (!hw_events.empty()) {
            out << "hw";
            for (const auto& e : hw_events) out << " " << e;
            out << "\n";
        }
        return out.str();
    }
};

struct LayerSpec {
    std::string name;
    std::vector<std::string> members;
    int depth_rank = 0; // position in the ordered layer list, 1-based

    bool operator==(const LayerSpec&) const = default;
};

/// Ordered attributable layers plus the fixed accounting buckets. The
/// interference buckets (irq, sched) and the device-wait bucket (io)
/// exist regardless of configuration; "io" may also appear as an
/// attributable layer holding the sleep-entry function.
struct LayerDescription {
    std::vector<LayerSpec> layers;

    static constexpr const char* kIrqBucket = "irq";
    static constexpr const char* kSchedBucket = "sched";
    static constexpr const char* kWaitBucket = "io";

    bool operator==(const LayerDescription&) const = default;

    std::optional<size_t> index_of(std::string_view layer_name) const {
        for (size_t i = 0; i < layers.size(); ++i)
            if (layers[i].name == layer_name) return i;
        return std::nullopt;
    }

    /// Layer name owning `function`, or nullopt.
    std::optional<std::string_view> layer_of(std::string_view function) const {
        for (const auto& l : layers)
            for (const auto& m : l.members)
                if (m == function) return std::string_view(l.name);
        return std::nullopt;
    }

    std::string serialize() const {
        std::ostringstream out;
        for (const auto& l : layers) {
            out << "layer " << l.name << " =";
            for (size_t i = 0; i < l.members.size(); ++i)
                out << (i ? ", " : " ") << l.members[i];
            out << "\n";
        }
        return out.str();
    }
};

namespace detail {

inline std::vector<std::string> tokenize_config_line(std::string_view line) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : line) {
        if (c == '#') break;
        if (c == ' ' || c == '\t' || c == '\r') {
            if (!cur.empty()) tokens.push_back(std::move(cur)), cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

inline bool valid_ident(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    return true;
}

} // namespace detail

/// Parses a profile script. Rejects unknown statements, duplicate
/// functions, depths outside 1..8, and hardware events other than
/// cycles/instructions. Errors carry the offending line number.
inline ProfileDescription parse_profile_script(std::string_view text) {
    ProfileDescription pd;
    std::set<std::string> seen_functions;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto tokens = detail::tokenize_config_line(line);
        if (tokens.empty()) continue;
        const std::string& key = tokens[0];
        if (key == "probe") {
            if (tokens.size() != 4)
                throw ParseError(lineno, "probe wants: probe <function> <entry|exit|entry,exit> depth=<1..8>");
            ProbeSpec spec;
            spec.function = tokens[1];
            if (!detail::valid_ident(spec.function))
                throw ParseError(lineno, "bad function name '" + spec.function + "'");
            if (!seen_functions.insert(spec.function).second)
                throw ParseError(lineno, "duplicate probe for function '" + spec.function + "'");
            if (tokens[2] == "entry") spec.at = ProbeAt::Entry;
            else if (tokens[2] == "exit") spec.at = ProbeAt::Exit;
            else if (tokens[2] == "entry,exit") spec.at = ProbeAt::Both;
            else throw ParseError(lineno, "probe site must be entry, exit or entry,exit");
            if (tokens[3].rfind("depth=", 0) != 0)
                throw ParseError(lineno, "expected depth=<1..8>");
            int depth = 0;
            try {
                size_t pos = 0;
                depth = std::stoi(tokens[3].substr(6), &pos);
                if (pos != tokens[3].size() - 6) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw ParseError(lineno, "bad depth value '" + tokens[3].substr(6) + "'");
            }
            if (depth < ProbeDepth::kMin || depth > ProbeDepth::kMax)
                throw ParseError(lineno, "depth " + std::to_string(depth) + " outside 1..8");
            spec.depth = depth;
            pd.probes.push_back(std::move(spec));
        } else if (key == "hw") {
            if (tokens.size() < 2) throw ParseError(lineno, "hw wants at least one event name");
            for (size_t i = 1; i < tokens.size(); ++i) {
                if (tokens[i] != "cycles" && tokens[i] != "instructions")
                    throw ParseError(lineno, "unknown hw event '" + tokens[i] + "'");
                if (std::count(pd.hw_events.begin(), pd.hw_events.end(), tokens[i]))
                    throw ParseError(lineno, "duplicate hw event '" + tokens[i] + "'");
                pd.hw_events.push_back(tokens[i]);
            }
        } else if (key == "layer") {
            throw ParseError(lineno, "layer statements belong in a layer description, not a profile script");
        } else {
            throw ParseError(lineno, "unknown statement '" + key + "'");
        }
    }
    return pd;
}

/// Parses a layer description. Layer names must be unique and every
/// function may belong to only one layer; depth ranks are assigned by
/// list position, starting at 1.
inline LayerDescription parse_layer_description(std::string_view text) {
    LayerDescription ld;
    std::set<std::string> seen_layers;
    std::set<std::string> seen_functions;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto tokens = detail::tokenize_config_line(line);
        if (tokens.empty()) continue;
        const std::string& key = tokens[0];
        if (key == "layer") {
            if (tokens.size() < 4 || tokens[2] != "=")
                throw ParseError(lineno, "layer wants: layer <name> = <fn>[, <fn>...]");
            LayerSpec spec;
            spec.name = tokens[1];
            if (!detail::valid_ident(spec.name))
                throw ParseError(lineno, "bad layer name '" + spec.name + "'");
            if (spec.name == LayerDescription::kIrqBucket || spec.name == LayerDescription::kSchedBucket)
                throw ParseError(lineno, "'" + spec.name + "' is a reserved interference bucket");
            if (!seen_layers.insert(spec.name).second)
                throw ParseError(lineno, "duplicate layer '" + spec.name + "'");
            // Member tokens may carry trailing commas; split them off.
            std::vector<std::string> members;
            for (size_t i = 3; i < tokens.size(); ++i) {
                std::string tok = tokens[i];
                size_t start = 0;
                while (start <= tok.size()) {
                    size_t comma = tok.find(',', start);
                    std::string piece = tok.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
                    if (!piece.empty()) members.push_back(piece);
                    if (comma == std::string::npos) break;
                    start = comma + 1;
                }
            }
            if (members.empty()) throw ParseError(lineno, "layer '" + spec.name + "' has no members");
            for (const auto& m : members) {
                if (!detail::valid_ident(m))
                    throw ParseError(lineno, "bad function name '" + m + "'");
                if (!seen_functions.insert(m).second)
                    throw ParseError(lineno, "function '" + m + "' already belongs to another layer");
            }
            spec.members = std::move(members);
            spec.depth_rank = static_cast<int>(ld.layers.size()) + 1;
            ld.layers.push_back(std::move(spec));
        } else if (key == "probe" || key == "hw") {
            throw ParseError(lineno, "'" + key + "' statements belong in a profile script, not a layer description");
        } else {
            throw ParseError(lineno, "unknown statement '" + key + "'");
        }
    }
    return ld;
}

/// Subset of `pd` active at `level`: probes with depth rank <= level.
inline ProfileDescription probes_at_depth(const ProfileDescription& pd, ProbeDepth level) {
    ProfileDescription out;
    out.hw_events = pd.hw_events;
    for (const auto& p : pd.probes)
        if (p.depth <= level.level) out.probes.push_back(p);
    return out;
}

/// Link check: probed functions that no layer claims. Empty means the
/// profile script and layer description are consistent.
inline std::vector<std::string> unassigned_probe_functions(const ProfileDescription& pd,
                                                           const LayerDescription& ld) {
    std::vector<std::string> missing;
    for (const auto& p : pd.probes)
        if (!ld.layer_of(p.function)) missing.push_back(p.function);
    return missing;
}

/// FunctionId -> layer index table resolved against a capture's string
/// table, for O(1) lookups on the analysis hot path.
class LayerLookup {
public:
    LayerLookup() = default;
    LayerLookup(const LayerDescription& ld, const FunctionInterner& interner) {
        table_.assign(interner.size() + 1, -1);
        for (size_t li = 0; li < ld.layers.size(); ++li)
            for (const auto& m : ld.layers[li].members)
                if (FunctionId id = interner.find(m); id != 0)
                    table_[id] = static_cast<int32_t>(li);
    }

    /// Layer index for `id`, or -1 when the function maps to no layer.
    int32_t layer_of(FunctionId id) const {
        return id < table_.size() ? table_[id] : -1;
    }

private:
    std::vector<int32_t> table_;
};

/// Shipped read-path probe set: 15 probe points whose depth ranks
/// reproduce per-level counts 2, 6, 8, 9, 12, 13, 14, 15.
inline const char* default_profile_script_text() {
    return R"(# relay default read-path probe set
probe ksys_read entry,exit depth=1
probe vfs_read entry,exit depth=1
probe generic_file_read_iter entry,exit depth=2
probe filemap_read entry,exit depth=2
probe filemap_get_pages entry,exit depth=2
probe filemap_get_folio entry,exit depth=2
probe ext4_file_read_iter entry,exit depth=3
probe ext4_iomap_begin entry,exit depth=3
probe submit_bio entry,exit depth=4
probe blk_mq_submit_bio entry,exit depth=5
probe blk_mq_get_tag entry,exit depth=5
probe blk_mq_start_request entry,exit depth=5
probe scsi_queue_rq entry,exit depth=6
probe copy_page_to_iter entry,exit depth=7
probe io_schedule entry,exit depth=8
hw cycles instructions
)";
}

/// Shipped read-path layers, ordered vfs, mm, fs, blk, req, drv, cpy, io.
inline const char* default_layer_description_text() {
    return R"(# relay default read-path layers
layer vfs = ksys_read, vfs_read
layer mm = generic_file_read_iter, filemap_read, filemap_get_pages, filemap_get_folio
layer fs = ext4_file_read_iter, ext4_iomap_begin
layer blk = submit_bio
layer req = blk_mq_submit_bio, blk_mq_get_tag, blk_mq_start_request
layer drv = scsi_queue_rq
layer cpy = copy_page_to_iter
layer io = io_schedule
)";
}

inline const ProfileDescription& default_profile_script() {
    static const ProfileDescription pd = parse_profile_script(default_profile_script_text());
    return pd;
}

inline const LayerDescription& default_layer_description() {
    static const LayerDescription ld = parse_layer_description(default_layer_description_text());
    return ld;
}

} // namespace relay

#endif // RELAY_PROFILE_CONFIG_HPP
