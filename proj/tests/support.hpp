// Shared helpers for the test binaries.

#pragma once

#include "spinbath/config.hpp"

#include <cmath>
#include <string>

namespace testing {

inline std::string source_path(const std::string& rel) { return std::string(SPINBATH_SOURCE_DIR) + "/" + rel; }

inline spinbath::ToolkitConfig shipped_config() { return spinbath::load_config(source_path("configs/cupc_alpha.json")); }

inline double rel_diff(double a, double b) {
    const double s = std::max(std::abs(a), std::abs(b));
    return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

}  // namespace testing
