#include "spinbath/constants.hpp"

#include "spinbath/errors.hpp"

#include <cmath>

namespace spinbath {

void PhysicalConstants::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(std::isfinite(v) && v > 0.0)) {
            throw ConfigError(std::string("constants.") + name + ": must be finite and > 0");
        }
    };
    positive(gamma_e, "gamma_e");
    positive(mu0, "mu0");
    positive(hbar, "hbar");
    positive(k_B, "k_B");
    positive(g_free, "g_free");
}

}  // namespace spinbath
