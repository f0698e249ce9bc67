// manifest.hpp: run manifest written next to every command's outputs.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace spinbath {

struct RunManifest {
    std::string command;
    std::string config_hash;  ///< sha256 of the canonical config dump
    std::vector<std::pair<std::string, std::string>> inputs;  ///< (path, sha256)
    std::string version;
    std::string timestamp;  ///< UTC, ISO 8601
    std::uint64_t seed = 0;
    std::vector<std::string> outputs;
    std::vector<std::string> notes;
};

const char* toolkit_version() noexcept;

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

/// Current UTC time, or SOURCE_DATE_EPOCH when that variable is set.
std::string utc_timestamp();

std::string manifest_json(const RunManifest& m);

}  // namespace spinbath
