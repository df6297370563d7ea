#pragma once

#include "dider/abi.hpp"

#include <cstddef>
#include <vector>

#include "dider/nn.hpp"
#include "dider/tensor.hpp"

namespace dider {
inline namespace DIDER_ABI {

/// Fully connected directed graphs for a stack of independent samples. Node
/// rows are sample-major (row = sample * N + agent); edge rows likewise
/// (row = sample * E + edge) with edges in lexicographic (src, dst) order.
struct GraphIndex {
  std::size_t n_agents = 0;
  std::size_t n_graphs = 0;
  std::vector<std::size_t> senders;
  std::vector<std::size_t> receivers;

  static GraphIndex fully_connected(std::size_t n_agents, std::size_t n_graphs);
  std::size_t edges_per_graph() const { return n_agents * (n_agents - 1); }
  std::size_t node_rows() const { return n_agents * n_graphs; }
  std::size_t edge_rows() const { return senders.size(); }
};

struct EncoderParams {
  Mlp f_emb;
  Mlp f_e1;
  Mlp f_v1;
  Mlp f_emb2;
  LstmCell forward_cell;
  LstmCell reverse_cell;

  /// `feedback_dim` widens the forward cell input for sample feedback.
  static EncoderParams create(ParamStore& store, std::size_t feature_dim, std::size_t hidden,
                              std::size_t feedback_dim, Rng& rng);
  std::size_t hidden() const { return forward_cell.hidden(); }
};

/// Per-step edge features, each entry [edge_rows, H].
struct EdgeEmbeddings {
  std::vector<Tensor> h_emb;
  std::vector<Tensor> h_prior;
  std::vector<Tensor> h_reverse;
};

/// node -> edge -> node -> edge message passing over one time step.
/// x: [node_rows, feature_dim]; returns [edge_rows, H].
Tensor embed_step(const EncoderParams& params, const Tensor& x, const GraphIndex& graph);

/// Causal recurrence over h_emb, zero state before the first step.
std::vector<Tensor> roll_forward(const EncoderParams& params, const std::vector<Tensor>& h_emb);
/// Anti-causal recurrence, zero state after the last step.
std::vector<Tensor> roll_reverse(const EncoderParams& params, const std::vector<Tensor>& h_emb);

/// Embeds every step and runs both recurrences.
EdgeEmbeddings encode(const EncoderParams& params, const std::vector<Tensor>& steps, const GraphIndex& graph);

}  // namespace DIDER_ABI
}  // namespace dider
