#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eqk/oracles.hpp"

namespace eqk::cli {

struct VerifyResult {
  std::string check;
  std::string instance;
  oracles::OracleReport report;
};

// Check groups understood by `eqk verify --only`.
std::vector<std::string> verify_checks();

// Runs one group (or every group when `only` is empty) on the built-in instances.
// Throws InputError for an unknown group name.
std::vector<VerifyResult> run_verify(const std::string& only, std::uint64_t seed);

}  // namespace eqk::cli
