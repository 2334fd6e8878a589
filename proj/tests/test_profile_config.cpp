// Copyright 2026 The Relay Authors
// Licensed under the Apache License, Version 2.0. See LICENSE for details.

#include <doctest.h>

#include <fstream>
#include <set>

#include "relay/profile_config.hpp"
#include "relay/util.hpp"

using namespace relay;

TEST_CASE("minimal profile script parses") {
    auto pd = parse_profile_script("probe vfs_read entry,exit depth=1\nhw cycles instructions\n");
    REQUIRE(pd.probes.size() == 1);
    CHECK(pd.probes[0].function == "vfs_read");
    CHECK(pd.probes[0].at == ProbeAt::Both);
    CHECK(pd.probes[0].depth == 1);
    CHECK(pd.hw_events == std::vector<std::string>{"cycles", "instructions"});
}

TEST_CASE("profile script errors carry line numbers") {
    try {
        parse_profile_script("probe a entry depth=1\nprobe b exit depth=9\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_profile_script("probe a entry depth=1\nprobe a exit depth=2\n"), ParseError);
    CHECK_THROWS_AS(parse_profile_script("layer vfs = a\n"), ParseError);
    CHECK_THROWS_AS(parse_profile_script("frobnicate x\n"), ParseError);
    CHECK_THROWS_AS(parse_profile_script("hw cache_misses\n"), ParseError);
    CHECK_THROWS_AS(parse_profile_script("probe a sideways depth=1\n"), ParseError);
}

TEST_CASE("default profile script ships 15 probes with the documented depth counts") {
    const auto& pd = default_profile_script();
    CHECK(pd.probes.size() == 15);
    const size_t expected[8] = {2, 6, 8, 9, 12, 13, 14, 15};
    for (int level = 1; level <= 8; ++level) {
        auto subset = probes_at_depth(pd, ProbeDepth{level});
        INFO("L" << level);
        CHECK(subset.probes.size() == expected[level - 1]);
    }
}

TEST_CASE("probes_at_depth is monotone in the level") {
    const auto& pd = default_profile_script();
    for (int level = 1; level < 8; ++level) {
        auto lo = probes_at_depth(pd, ProbeDepth{level});
        auto hi = probes_at_depth(pd, ProbeDepth{level + 1});
        std::set<std::string> hi_funcs;
        for (const auto& p : hi.probes) hi_funcs.insert(p.function);
        for (const auto& p : lo.probes) CHECK(hi_funcs.count(p.function) == 1);
    }
}

TEST_CASE("layer description parses, rejects double ownership and reserved names") {
    auto ld = parse_layer_description("layer vfs = vfs_read, ksys_read\n");
    REQUIRE(ld.layers.size() == 1);
    CHECK(ld.layers[0].members == std::vector<std::string>{"vfs_read", "ksys_read"});
    CHECK(ld.layers[0].depth_rank == 1);

    CHECK_THROWS_AS(parse_layer_description("layer a = f\nlayer b = f\n"), ParseError);
    CHECK_THROWS_AS(parse_layer_description("layer irq = f\n"), ParseError);
    CHECK_THROWS_AS(parse_layer_description("layer a = f\nlayer a = g\n"), ParseError);
    CHECK_THROWS_AS(parse_layer_description("probe f entry depth=1\n"), ParseError);
    CHECK_THROWS_AS(parse_layer_description("layer a =\n"), ParseError);
}

TEST_CASE("default layers cover exactly the default probe functions") {
    const auto& ld = default_layer_description();
    const auto& pd = default_profile_script();
    CHECK(ld.layers.size() == 8);
    CHECK(ld.layers[0].name == "vfs");
    CHECK(ld.layers[7].name == "io");

    CHECK(unassigned_probe_functions(pd, ld).empty());

    std::set<std::string> probed, members;
    for (const auto& p : pd.probes) probed.insert(p.function);
    for (const auto& l : ld.layers)
        for (const auto& m : l.members) members.insert(m);
    CHECK(probed == members);
}

TEST_CASE("layer_of answers for members and declines for strangers") {
    const auto& ld = default_layer_description();
    CHECK(ld.layer_of("vfs_read") == "vfs");
    CHECK(ld.layer_of("io_schedule") == "io");
    CHECK_FALSE(ld.layer_of("made_up_fn").has_value());
    for (const auto& p : default_profile_script().probes) {
        INFO(p.function);
        CHECK(ld.layer_of(p.function).has_value());
    }
}

TEST_CASE("canonical serialization round-trips") {
    const char* docs[] = {
        "probe vfs_read entry,exit depth=1\nhw cycles\n",
        "probe a entry depth=3\nprobe b exit depth=8\n",
    };
    for (const char* d : docs) {
        auto once = parse_profile_script(d);
        auto twice = parse_profile_script(once.serialize());
        CHECK(once == twice);
    }
    auto ld1 = parse_layer_description(default_layer_description_text());
    auto ld2 = parse_layer_description(ld1.serialize());
    CHECK(ld1 == ld2);
    auto pd1 = parse_profile_script(default_profile_script_text());
    auto pd2 = parse_profile_script(pd1.serialize());
    CHECK(pd1 == pd2);
}

TEST_CASE("shipped config files match the embedded defaults") {
    auto p2l = read_file_bytes(std::string(RELAY_SOURCE_DIR) + "/configs/default.p2l");
    auto layers = read_file_bytes(std::string(RELAY_SOURCE_DIR) + "/configs/default.layers");
    auto pd = parse_profile_script(std::string_view(reinterpret_cast<char*>(p2l.data()), p2l.size()));
    auto ld = parse_layer_description(std::string_view(reinterpret_cast<char*>(layers.data()), layers.size()));
    CHECK(pd == default_profile_script());
    CHECK(ld == default_layer_description());
}

TEST_CASE("probe depth parses L1..L8 only") {
    CHECK(ProbeDepth::parse("L1").level == 1);
    CHECK(ProbeDepth::parse("L8").level == 8);
    CHECK_THROWS_AS(ProbeDepth::parse("L9"), std::invalid_argument);
    CHECK_THROWS_AS(ProbeDepth::parse("3"), std::invalid_argument);
}

TEST_CASE("layer lookup resolves function ids on the hot path") {
    FunctionInterner in;
    auto vfs_read = in.intern("vfs_read");
    auto mystery = in.intern("mystery");
    LayerLookup lookup(default_layer_description(), in);
    CHECK(lookup.layer_of(vfs_read) == 0); // vfs is the first layer
    CHECK(lookup.layer_of(mystery) == -1);
    CHECK(lookup.layer_of(0) == -1);
}
