#pragma once

// Battery of closed-form checks: every estimator in the library compared
// against an exact value on cases where the answer is known.

#include <cstdint>
#include <string>
#include <vector>

namespace ikl {

struct OracleCheck {
  std::string name;
  double value = 0.0;
  double reference = 0.0;
  /// Absolute tolerance actually applied (for MC checks: 3 standard errors).
  double tolerance = 0.0;
  bool passed = false;
};

struct OracleOptions {
  std::uint64_t seed = 0;
  std::size_t mc_batch = 100000;
};

std::vector<OracleCheck> run_oracle_battery(const OracleOptions& opts = {});

/// Header name,value,reference,tolerance,status with status "pass" or "fail".
std::string oracle_csv(const std::vector<OracleCheck>& checks);

}  // namespace ikl
