#include "dider/edge_inference.hpp"

#include "dider/errors.hpp"

namespace dider {
inline namespace DIDER_ABI {

std::string to_string(EdgeSampleMode mode) {
  switch (mode) {
    case EdgeSampleMode::soft: return "soft";
    case EdgeSampleMode::hard: return "hard";
    case EdgeSampleMode::argmax: return "argmax";
  }
  return "soft";
}

EdgeSampleMode edge_sample_mode_from_string(const std::string& text) {
  if (text == "soft") return EdgeSampleMode::soft;
  if (text == "hard") return EdgeSampleMode::hard;
  if (text == "argmax") return EdgeSampleMode::argmax;
  throw ConfigError("unknown edge sample mode '" + text + "'");
}

EdgeInfParams EdgeInfParams::create(ParamStore& store, std::size_t hidden, std::size_t n_edge_types, double tau,
                                    Rng& rng) {
  if (n_edge_types < 2) throw ContractError("EdgeInfParams: need at least two edge types");
  if (!(tau > 0)) throw ContractError("EdgeInfParams: tau must be > 0");
  EdgeInfParams p;
  p.f_prior = Mlp::create(store, "edge.f_prior", hidden, hidden, n_edge_types, false, rng);
  p.f_enc = Mlp::create(store, "edge.f_enc", 2 * hidden, hidden, n_edge_types, false, rng);
  p.n_edge_types = n_edge_types;
  p.tau = tau;
  return p;
}

Tensor prior_logits(const EdgeInfParams& params, const Tensor& h_prior_at) { return params.f_prior(h_prior_at); }

Tensor encoder_logits(const EdgeInfParams& params, const Tensor& h_reverse_at, const Tensor& h_prior_at) {
  return params.f_enc(concat_cols({h_reverse_at, h_prior_at}));
}

Tensor sample_edges(Rng& rng, const Tensor& logits, double tau, EdgeSampleMode mode) {
  if (!(tau > 0)) throw ContractError("sample_edges: tau must be > 0");
  switch (mode) {
    case EdgeSampleMode::soft: return sample_gumbel_softmax(rng, logits, static_cast<real>(tau));
    case EdgeSampleMode::hard: return straight_through(sample_gumbel_softmax(rng, logits, static_cast<real>(tau)));
    case EdgeSampleMode::argmax: return onehot_argmax(logits);
  }
  throw ContractError("sample_edges: unknown mode");
}

Tensor edge_kl(const Tensor& enc_logits, const Tensor& prior_logits) {
  if (enc_logits.shape() != prior_logits.shape()) {
    throw DimensionError("edge_kl: " + shape_str(enc_logits.shape()) + " vs " + shape_str(prior_logits.shape()));
  }
  const std::size_t axis = enc_logits.rank() - 1;
  const Tensor q = softmax(enc_logits, axis);
  const Tensor p = softmax(prior_logits, axis);
  constexpr real floor = static_cast<real>(1e-16);
  return sum(mul(q, sub(log_floor(q, floor), log_floor(p, floor))));
}

}  // namespace DIDER_ABI
}  // namespace dider
