#include "dider/decoder.hpp"

#include "dider/errors.hpp"

namespace dider {
inline namespace DIDER_ABI {

DecoderParams DecoderParams::create(ParamStore& store, std::size_t feature_dim, std::size_t hidden,
                                    std::size_t n_edge_types, double out_variance, Rng& rng) {
  if (n_edge_types < 2) throw ContractError("DecoderParams: need at least two edge types");
  if (!(out_variance > 0)) throw ContractError("DecoderParams: out_variance must be > 0");
  DecoderParams p;
  for (std::size_t m = 1; m < n_edge_types; ++m) {
    p.messages.push_back(Mlp::create(store, "decoder.message" + std::to_string(m), 2 * feature_dim + 2 * hidden,
                                     hidden, hidden, true, rng, Activation::tanh));
  }
  p.cell = LstmCell::create(store, "decoder.cell", feature_dim + hidden, hidden, rng);
  p.out = Mlp::create(store, "decoder.out", hidden, hidden, feature_dim, false, rng);
  p.out_variance = out_variance;
  return p;
}

DecodeResult decode_step(const DecoderParams& params, const Tensor& x, const LstmState& state,
                         const Tensor& edge_samples, const GraphIndex& graph) {
  if (x.rank() != 2 || x.dim(0) != graph.node_rows()) {
    throw DimensionError("decode_step: states " + shape_str(x.shape()) + " do not match " +
                         std::to_string(graph.node_rows()) + " nodes");
  }
  if (edge_samples.rank() != 2 || edge_samples.dim(0) != graph.edge_rows() ||
      edge_samples.dim(1) != params.n_edge_types()) {
    throw DimensionError("decode_step: edge samples " + shape_str(edge_samples.shape()) + " for " +
                         std::to_string(graph.edge_rows()) + " edges of " + std::to_string(params.n_edge_types()) +
                         " types");
  }
  const std::size_t hidden = params.hidden();
  Tensor aggregated = Tensor::zeros({graph.node_rows(), hidden});
  if (graph.edge_rows() > 0) {
    const Tensor pre = concat_cols({gather_rows(x, graph.senders), gather_rows(x, graph.receivers),
                                    gather_rows(state.h, graph.senders), gather_rows(state.h, graph.receivers)});
    Tensor message;
    for (std::size_t m = 1; m < params.n_edge_types(); ++m) {
      Tensor part = mul_rowwise(params.messages[m - 1](pre), slice_cols(edge_samples, m, m + 1));
      message = message.defined() ? add(message, part) : part;
    }
    aggregated = scatter_add_rows(message, graph.receivers, graph.node_rows());
  }
  LstmState next = params.cell(concat_cols({x, aggregated}), state);
  return {add(x, params.out(next.h)), next};
}

std::vector<Tensor> edges_from_schedules(const std::vector<SegmentSchedule>& schedules, std::size_t n_edge_types) {
  if (schedules.empty()) return {};
  const std::size_t horizon = schedules.front().horizon;
  const std::size_t t_obs = schedules.front().t_obs;
  const std::size_t n_edges = schedules.front().edges.size();
  for (const auto& s : schedules) {
    if (s.horizon != horizon || s.t_obs != t_obs || s.edges.size() != n_edges) {
      throw ContractError("edges_from_schedules: schedules disagree on window or edge count");
    }
    if (auto why = s.partition_violation(); !why.empty()) throw ContractError("edges_from_schedules: " + why);
  }
  std::vector<Tensor> out;
  out.reserve(horizon - 1);
  for (std::size_t target = 1; target < horizon; ++target) {
    const std::size_t t = std::max(target, t_obs);
    Tensor onehot = Tensor::zeros({schedules.size() * n_edges, n_edge_types});
    for (std::size_t b = 0; b < schedules.size(); ++b) {
      for (std::size_t e = 0; e < n_edges; ++e) {
        int type = -1;
        for (const Segment& seg : schedules[b].edges[e]) {
          if (t >= seg.t_start && t < seg.t_end()) type = seg.edge_type;
        }
        if (type < 0 || static_cast<std::size_t>(type) >= n_edge_types) {
          throw ContractError("edges_from_schedules: no edge type decided for step " + std::to_string(t));
        }
        onehot.data()[(b * n_edges + e) * n_edge_types + static_cast<std::size_t>(type)] = 1;
      }
    }
    out.push_back(onehot);
  }
  return out;
}

std::vector<Tensor> rollout(const DecoderParams& params, const std::vector<Tensor>& steps,
                            const std::vector<Tensor>& edges, std::size_t t_obs, RolloutMode mode,
                            const GraphIndex& graph) {
  if (steps.size() < 2) throw ContractError("rollout: need at least two steps");
  if (edges.size() != steps.size() - 1) {
    throw ContractError("rollout: edge inputs cover " + std::to_string(edges.size()) + " of " +
                        std::to_string(steps.size() - 1) + " prediction targets");
  }
  for (const Tensor& e : edges) {
    if (!e.defined()) throw ContractError("rollout: schedule gap (missing edge sample)");
  }
  std::vector<Tensor> predictions;
  predictions.reserve(steps.size() - 1);
  LstmState state = params.cell.zero_state(graph.node_rows());
  for (std::size_t t = 0; t + 1 < steps.size(); ++t) {
    const bool use_truth = mode == RolloutMode::teacher_forced || t < t_obs;
    const Tensor& x = use_truth ? steps[t] : predictions.back();
    DecodeResult r = decode_step(params, x, state, edges[t], graph);
    state = r.state;
    predictions.push_back(r.prediction);
  }
  return predictions;
}

Tensor nll(const Tensor& predictions, const Tensor& targets, double out_variance) {
  if (predictions.shape() != targets.shape()) {
    throw DimensionError("nll: predictions " + shape_str(predictions.shape()) + " vs targets " +
                         shape_str(targets.shape()));
  }
  if (!(out_variance > 0)) throw ContractError("nll: variance must be > 0");
  return scale(sum(square(sub(predictions, targets))), static_cast<real>(1.0 / (2.0 * out_variance)));
}

}  // namespace DIDER_ABI
}  // namespace dider
