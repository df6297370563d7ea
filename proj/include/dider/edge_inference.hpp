#pragma once

#include "dider/abi.hpp"

#include <string>

#include "dider/nn.hpp"
#include "dider/rng.hpp"
#include "dider/tensor.hpp"

namespace dider {
inline namespace DIDER_ABI {

enum class EdgeSampleMode {
  /// Gumbel-softmax relaxation.
  soft,
  /// Straight-through: one-hot forward, soft backward.
  hard,
  /// Deterministic one-hot of the logits (evaluation).
  argmax,
};

std::string to_string(EdgeSampleMode mode);
EdgeSampleMode edge_sample_mode_from_string(const std::string& text);

struct EdgeInfParams {
  Mlp f_prior;  // H -> e
  Mlp f_enc;    // 2H -> e
  std::size_t n_edge_types = 2;
  double tau = 0.5;

  static EdgeInfParams create(ParamStore& store, std::size_t hidden, std::size_t n_edge_types, double tau, Rng& rng);
};

/// Prior logits from the forward state read at the closing step of a segment.
Tensor prior_logits(const EdgeInfParams& params, const Tensor& h_prior_at);
/// Posterior logits from [reverse, forward] states.
Tensor encoder_logits(const EdgeInfParams& params, const Tensor& h_reverse_at, const Tensor& h_prior_at);

Tensor sample_edges(Rng& rng, const Tensor& logits, double tau, EdgeSampleMode mode);

/// Categorical KL(softmax(enc) || softmax(prior)) summed over rows, with a
/// 1e-16 floor inside the logarithms.
Tensor edge_kl(const Tensor& enc_logits, const Tensor& prior_logits);

}  // namespace DIDER_ABI
}  // namespace dider
