#include "dider/encoder.hpp"

#include "dider/errors.hpp"

namespace dider {
inline namespace DIDER_ABI {

GraphIndex GraphIndex::fully_connected(std::size_t n_agents, std::size_t n_graphs) {
  GraphIndex g;
  g.n_agents = n_agents;
  g.n_graphs = n_graphs;
  const std::size_t e = n_agents == 0 ? 0 : n_agents * (n_agents - 1);
  g.senders.reserve(e * n_graphs);
  g.receivers.reserve(e * n_graphs);
  for (std::size_t b = 0; b < n_graphs; ++b) {
    for (std::size_t i = 0; i < n_agents; ++i) {
      for (std::size_t j = 0; j < n_agents; ++j) {
        if (i == j) continue;
        g.senders.push_back(b * n_agents + i);
        g.receivers.push_back(b * n_agents + j);
      }
    }
  }
  return g;
}

EncoderParams EncoderParams::create(ParamStore& store, std::size_t feature_dim, std::size_t hidden,
                                    std::size_t feedback_dim, Rng& rng) {
  EncoderParams p;
  p.f_emb = Mlp::create(store, "encoder.f_emb", feature_dim, hidden, hidden, true, rng);
  p.f_e1 = Mlp::create(store, "encoder.f_e1", 2 * hidden, hidden, hidden, true, rng);
  p.f_v1 = Mlp::create(store, "encoder.f_v1", hidden, hidden, hidden, true, rng);
  p.f_emb2 = Mlp::create(store, "encoder.f_emb2", 2 * hidden, hidden, hidden, true, rng);
  p.forward_cell = LstmCell::create(store, "encoder.forward", hidden + feedback_dim, hidden, rng);
  p.reverse_cell = LstmCell::create(store, "encoder.reverse", hidden, hidden, rng);
  return p;
}

Tensor embed_step(const EncoderParams& params, const Tensor& x, const GraphIndex& graph) {
  if (x.rank() != 2 || x.dim(1) != params.f_emb.first.in_features()) {
    throw DimensionError("embed_step: expected [N, " + std::to_string(params.f_emb.first.in_features()) +
                         "] states, got " + shape_str(x.shape()));
  }
  if (x.dim(0) != graph.node_rows()) throw DimensionError("embed_step: state rows do not match the graph");
  if (graph.n_agents < 2) throw ContractError("embed_step: needs at least two agents");
  const Tensor nodes = params.f_emb(x);
  const Tensor pair1 = concat_cols({gather_rows(nodes, graph.senders), gather_rows(nodes, graph.receivers)});
  const Tensor edges1 = params.f_e1(pair1);
  // Incoming edge messages are summed at the receiving node.
  const Tensor nodes2 = params.f_v1(scatter_add_rows(edges1, graph.receivers, graph.node_rows()));
  const Tensor pair2 = concat_cols({gather_rows(nodes2, graph.senders), gather_rows(nodes2, graph.receivers)});
  return params.f_emb2(pair2);
}

std::vector<Tensor> roll_forward(const EncoderParams& params, const std::vector<Tensor>& h_emb) {
  std::vector<Tensor> out;
  if (h_emb.empty()) return out;
  out.reserve(h_emb.size());
  LstmState state = params.forward_cell.zero_state(h_emb.front().rows());
  for (const Tensor& x : h_emb) {
    state = params.forward_cell(x, state);
    out.push_back(state.h);
  }
  return out;
}

std::vector<Tensor> roll_reverse(const EncoderParams& params, const std::vector<Tensor>& h_emb) {
  std::vector<Tensor> out(h_emb.size());
  if (h_emb.empty()) return out;
  LstmState state = params.reverse_cell.zero_state(h_emb.front().rows());
  for (std::size_t k = h_emb.size(); k-- > 0;) {
    state = params.reverse_cell(h_emb[k], state);
    out[k] = state.h;
  }
  return out;
}

EdgeEmbeddings encode(const EncoderParams& params, const std::vector<Tensor>& steps, const GraphIndex& graph) {
  EdgeEmbeddings out;
  out.h_emb.reserve(steps.size());
  for (const Tensor& x : steps) out.h_emb.push_back(embed_step(params, x, graph));
  out.h_prior = roll_forward(params, out.h_emb);
  out.h_reverse = roll_reverse(params, out.h_emb);
  return out;
}

}  // namespace DIDER_ABI
}  // namespace dider
