#pragma once

#include <cstddef>
#include <string>

// Plain types only: this header is shared by translation units built with
// different scalar types.
namespace acceptance {

struct GradientOutcome {
  double max_rel_error = 0;
  std::string worst;
  std::size_t checked = 0;
  double seconds = 0;
};

/// Full-ELBO finite-difference check on the 2-agent, 8-step micro-instance.
GradientOutcome run_gradient_criterion();

}  // namespace acceptance
