#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dider/tensor.hpp"

namespace gradcheck {

struct Result {
  double max_rel_error = 0;
  std::string worst;
  std::size_t checked = 0;
};

/// Central differences against the taped gradient for every entry of every
/// named tensor. The relative error uses max(|analytic|, |numeric|, floor) as
/// denominator so that entries with vanishing gradient are judged absolutely.
inline Result compare(const std::function<dider::Tensor()>& loss_fn,
                      const std::vector<std::pair<std::string, dider::Tensor>>& inputs, double h = 1e-4,
                      double floor = 1e-6) {
  using namespace dider;
  {
    GradTape tape;
    TapeScope scope(&tape);
    for (auto& [name, t] : inputs) const_cast<Tensor&>(t).zero_grad();
    tape.backward(loss_fn());
  }
  Result r;
  TapeScope off(nullptr);
  for (const auto& [name, t] : inputs) {
    Tensor p = t;
    const std::vector<real> analytic =
        p.has_grad() ? std::vector<real>(p.grad().begin(), p.grad().end()) : std::vector<real>(p.numel(), 0);
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const real saved = p.data()[i];
      p.data()[i] = saved + static_cast<real>(h);
      const double up = loss_fn().item();
      p.data()[i] = saved - static_cast<real>(h);
      const double down = loss_fn().item();
      p.data()[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel >= r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst = name + "[" + std::to_string(i) + "] analytic " + std::to_string(a) + " numeric " +
                  std::to_string(numeric);
      }
      ++r.checked;
    }
  }
  return r;
}

}  // namespace gradcheck
