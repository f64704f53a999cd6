#pragma once

// Seeded numerical verification suites behind `refocus verify`.

#include "refocus/model.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace refocus {

struct CheckResult {
  std::string name;
  double value = 0;
  double tolerance = 0;
  bool passed = false;
  bool asserted = true;  // informational rows do not affect the verdict
};

std::vector<CheckResult> verify_revin_suite(std::uint64_t seed = 2024);
std::vector<CheckResult> verify_ameo_suite(std::uint64_t seed = 2024);
std::vector<CheckResult> verify_ket_suite(std::uint64_t seed = 2024);
std::vector<CheckResult> verify_grad_suite(std::uint64_t seed = 2024);

/// scope: revin, ameo, ket, grad or all.
std::vector<CheckResult> verify_scope(std::string_view scope, std::uint64_t seed = 2024);

bool all_passed(const std::vector<CheckResult>& checks);

/// The tiny configuration used for full-model gradient checks.
ReFocusConfig gradcheck_config();

struct ModelGradCheck {
  double max_rel_error = 0;
  Index parameters_checked = 0;
};

/// Finite differences over every parameter of a freshly initialized model
/// on a random batch, with the key-frequency selection frozen at the
/// values chosen by the unperturbed forward pass.
ModelGradCheck model_gradient_check(const ReFocusConfig& cfg, std::uint64_t seed, Index batch = 2, double h = 1e-5);

}  // namespace refocus
