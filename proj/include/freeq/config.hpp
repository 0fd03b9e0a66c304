// freeq - config.hpp
// Run configuration shared by the CLI subcommands: provider selection, the
// pipeline constants, file paths, and a flat key = value config file format.

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "freeq/errors.hpp"
#include "freeq/scenegraph.hpp"

namespace freeq {

struct RunConfig {
    std::string provider = "mock";  // mock | oracle | http | replay
    MergeConfig merge;              // tau_iou 0.9, tau_sim 0.9, top-5 views
    AssocConfig assoc;              // voxel 0.025, nn 0.025, assoc 1.1
    std::uint64_t seed = 0;
    int jobs = 0;  // 0 = library default
    int verbosity = 0;
    bool explain = false;

    std::string scene_path;
    std::string graph_path;
    std::string out_path;
    std::string batch_path;
    std::string query_text;
    std::string truth_path;       // planted.json for the oracle provider
    std::string fixture_path;     // mock fixture file
    std::string transcripts_path; // record (mock/oracle/http) or replay source
    std::string api_base;
    std::string api_key;
    std::string model;

    // Applies a parsed config file; flag values are applied afterwards by the
    // CLI so they override the file.
    void apply_file_value(const std::string& key, const std::string& value);

    // Canonical "key = value" echo of the effective pipeline constants.
    std::string echo() const;

    void validate() const;
};

// Flat TOML-like parser: one "key = value" per line, '#' comments, no
// sections. Throws FormatError on malformed lines.
std::map<std::string, std::string> parse_config_file(const std::string& text);

}  // namespace freeq
