// freeq - config.cpp

#include "freeq/config.hpp"

#include <sstream>

#include "freeq/io.hpp"

namespace freeq {

std::map<std::string, std::string> parse_config_file(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        line_no++;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto begin = line.find_first_not_of(" \t\r");
        if (begin == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("config line " + std::to_string(line_no) + " has no '='");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw FormatError("config line " + std::to_string(line_no) +
                                           " has an empty key");
        out[key] = value;
    }
    return out;
}

void RunConfig::apply_file_value(const std::string& key, const std::string& value) {
    auto as_double = [&] { return std::stod(value); };
    auto as_int = [&] { return std::stoi(value); };
    try {
        if (key == "provider") provider = value;
        else if (key == "tau_iou") merge.tau_iou = as_double();
        else if (key == "tau_sim") merge.tau_sim = as_double();
        else if (key == "top_k_views") merge.top_k_views = as_int();
        else if (key == "z_tolerance") merge.z_tolerance = as_double();
        else if (key == "graphcut_k") merge.graphcut_k = as_int();
        else if (key == "graphcut_kappa") merge.graphcut_kappa = as_double();
        else if (key == "voxel_size") assoc.voxel_size = as_double();
        else if (key == "nn_threshold") assoc.nn_threshold = as_double();
        else if (key == "assoc_threshold") assoc.assoc_threshold = as_double();
        else if (key == "seed") seed = std::stoull(value);
        else if (key == "jobs") jobs = as_int();
        else if (key == "api_base") api_base = value;
        else if (key == "api_key") api_key = value;
        else if (key == "model") model = value;
        else throw FormatError("unknown config key '" + key + "'");
    } catch (const std::invalid_argument&) {
        throw FormatError("config key '" + key + "' has a malformed value '" + value + "'");
    }
}

std::string RunConfig::echo() const {
    std::ostringstream ss;
    ss << "provider = " << provider << "\n"
       << "tau_iou = " << io::format_double(merge.tau_iou) << "\n"
       << "tau_sim = " << io::format_double(merge.tau_sim) << "\n"
       << "top_k_views = " << merge.top_k_views << "\n"
       << "z_tolerance = " << io::format_double(merge.z_tolerance) << "\n"
       << "graphcut_k = " << merge.graphcut_k << "\n"
       << "graphcut_kappa = " << io::format_double(merge.graphcut_kappa) << "\n"
       << "voxel_size = " << io::format_double(assoc.voxel_size) << "\n"
       << "nn_threshold = " << io::format_double(assoc.nn_threshold) << "\n"
       << "assoc_threshold = " << io::format_double(assoc.assoc_threshold) << "\n"
       << "seed = " << seed << "\n"
       << "jobs = " << jobs << "\n";
    return ss.str();
}

void RunConfig::validate() const {
    merge.validate();
    assoc.validate();
    if (provider != "mock" && provider != "oracle" && provider != "http" &&
        provider != "replay")
        throw FormatError("provider must be one of mock|oracle|http|replay");
    if (provider == "replay" && transcripts_path.empty())
        throw FormatError("replay provider needs --transcripts");
}

}  // namespace freeq
