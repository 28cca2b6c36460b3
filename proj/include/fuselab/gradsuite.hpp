#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fuselab/gradcheck.hpp"

namespace fuselab {

struct SuiteEntry {
    std::string name;
    CheckReport report;
};

/// Finite-difference checks of every primitive op, every layer and encoder,
/// both fusion losses, cross-entropy and the end-to-end training objectives
/// for each fusion mechanism, on small (d = 4) toys.
std::vector<SuiteEntry> run_gradient_suite(double tol = 1e-4, std::uint64_t seed = 7);

}  // namespace fuselab
