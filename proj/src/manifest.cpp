#include "spinbath/manifest.hpp"

#include "spinbath/errors.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

namespace spinbath {

const char* toolkit_version() noexcept { return SPINBATH_VERSION; }

std::string sha256_hex(const std::string& bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256: digest failed");
    }
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
        char* end = nullptr;
        const long long v = std::strtoll(epoch, &end, 10);
        if (end != epoch && *end == '\0') {
            now = static_cast<std::time_t>(v);
        }
    }
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string manifest_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["command"] = m.command;
    j["toolkit_version"] = m.version;
    j["config_hash"] = m.config_hash;
    j["seed"] = m.seed;
    j["timestamp"] = m.timestamp;
    nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
    for (const auto& [path, hash] : m.inputs) {
        inputs.push_back({{"path", path}, {"sha256", hash}});
    }
    j["inputs"] = inputs;
    j["outputs"] = m.outputs;
    j["notes"] = m.notes;
    return j.dump(2) + "\n";
}

}  // namespace spinbath
