// Built against the double-precision library; see acceptance.cpp.
#include "acceptance_gradcheck.hpp"

#include <chrono>
#include <ostream>

#include "elbo_gradcheck.hpp"

static_assert(sizeof(dider::real) == sizeof(double), "gradient criterion needs the double-precision build");

namespace acceptance {

GradientOutcome run_gradient_criterion() {
  const auto t0 = std::chrono::steady_clock::now();
  const gradcheck::Result r = gradcheck::micro_elbo(3);
  GradientOutcome out;
  out.max_rel_error = r.max_rel_error;
  out.worst = r.worst;
  out.checked = r.checked;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace acceptance
