#pragma once

#include "dider/abi.hpp"

#include <string>
#include <vector>

#include "dider/encoder.hpp"
#include "dider/nn.hpp"
#include "dider/segmenter.hpp"
#include "dider/tensor.hpp"

namespace dider {
inline namespace DIDER_ABI {

struct DecoderParams {
  /// messages[m - 1] serves edge type m; type 0 (No-Interaction) sends nothing.
  std::vector<Mlp> messages;
  LstmCell cell;
  Mlp out;
  double out_variance = 5e-5;

  static DecoderParams create(ParamStore& store, std::size_t feature_dim, std::size_t hidden,
                              std::size_t n_edge_types, double out_variance, Rng& rng);
  std::size_t n_edge_types() const { return messages.size() + 1; }
  std::size_t hidden() const { return cell.hidden(); }
};

struct DecodeResult {
  Tensor prediction;  // [node_rows, feature_dim]
  LstmState state;
};

/// One autoregressive step. edge_samples: [edge_rows, e], rows on the simplex.
DecodeResult decode_step(const DecoderParams& params, const Tensor& x, const LstmState& state,
                         const Tensor& edge_samples, const GraphIndex& graph);

enum class RolloutMode { teacher_forced, free_running };

/// One-hot decoder inputs per prediction target t = 1..T-1 built from
/// schedules whose segments carry edge types. Targets inside the burn-in use
/// the first segment. Throws ContractError on a gap or an undecided type.
std::vector<Tensor> edges_from_schedules(const std::vector<SegmentSchedule>& schedules, std::size_t n_edge_types);

/// Predicts targets 1..T-1 from steps[0..T-2]. Free running feeds ground
/// truth only for inputs before t_obs. edges[k] serves target k + 1.
std::vector<Tensor> rollout(const DecoderParams& params, const std::vector<Tensor>& steps,
                            const std::vector<Tensor>& edges, std::size_t t_obs, RolloutMode mode,
                            const GraphIndex& graph);

/// Fixed-variance Gaussian negative log-likelihood, constant dropped:
/// sum ||pred - target||^2 / (2 variance).
Tensor nll(const Tensor& predictions, const Tensor& targets, double out_variance);

}  // namespace DIDER_ABI
}  // namespace dider
