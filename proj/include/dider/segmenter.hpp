#pragma once

#include "dider/abi.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dider/encoder.hpp"
#include "dider/nn.hpp"
#include "dider/rng.hpp"
#include "dider/tensor.hpp"

namespace dider {
inline namespace DIDER_ABI {

/// Which recurrent states the duration posterior reads.
enum class DurationVariant {
  /// Forward (causal) state only.
  past_only,
  /// [reverse, forward] states: the duration sees the whole trajectory.
  full_trajectory,
};

std::string to_string(DurationVariant v);
DurationVariant duration_variant_from_string(const std::string& text);

struct DurationParams {
  Mlp f_mu;
  Mlp f_sigma;
  double prior_mu0 = 0.0;
  double prior_sigma0 = 1.0;
  std::size_t d_min = 1;

  static DurationParams create(ParamStore& store, std::size_t input_dim, std::size_t hidden, double prior_mu0,
                               double prior_sigma0, std::size_t d_min, Rng& rng);
};

struct DurationPosterior {
  Tensor mu;     // [rows, 1], in (-1, 1)
  Tensor sigma;  // [rows, 1], in (0, 1)
};

/// mu = tanh(f_mu(h)), sigma = sigmoid(f_sigma(h)).
DurationPosterior duration_posterior(const DurationParams& params, const Tensor& h_state);

/// clamp(round_half_up(z_d * t_remaining), d_min, t_remaining).
std::size_t realize_duration(double z_d, std::size_t t_remaining, std::size_t d_min);

/// Closed-form KL(N(mu, sigma^2) || N(mu0, sigma0^2)) summed over all rows.
Tensor duration_kl(const Tensor& mu, const Tensor& sigma, double prior_mu0, double prior_sigma0);

struct Segment {
  std::size_t t_start = 0;
  std::size_t duration = 0;
  double z_d = 0;
  double mu = 0;
  double sigma = 0;
  /// -1 until an edge type has been decided for the segment.
  int edge_type = -1;

  std::size_t t_end() const { return t_start + duration; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Per-edge segment lists tiling the prediction window [t_obs, horizon).
struct SegmentSchedule {
  std::size_t t_obs = 0;
  std::size_t horizon = 0;
  std::vector<std::vector<Segment>> edges;

  /// Empty string when every edge is tiled contiguously with durations
  /// >= d_min; otherwise a description of the first violation.
  std::string partition_violation(std::size_t d_min = 1) const;
  double mean_segments_per_edge() const;
  /// Per-step edge types for steps [t_obs, horizon), indexed [edge][t - t_obs].
  std::vector<std::vector<int>> expand() const;
};

/// Incremental construction of per-row schedules. Segment k of a row is
/// decided at read step (start_k - 1), using states up to that step.
class ScheduleBuilder {
 public:
  ScheduleBuilder(std::size_t rows, std::size_t t_obs, std::size_t horizon, std::size_t d_min);

  /// Rows whose next segment starts at t + 1.
  std::vector<std::size_t> reading_at(std::size_t t) const;
  std::size_t next_start(std::size_t row) const { return next_start_[row]; }
  std::size_t remaining(std::size_t row) const { return horizon_ - next_start_[row]; }
  void commit(std::size_t row, Segment segment);
  bool complete() const;
  std::size_t rows() const { return next_start_.size(); }
  std::size_t t_obs() const { return t_obs_; }
  std::size_t horizon() const { return horizon_; }
  std::size_t d_min() const { return d_min_; }
  const std::vector<std::vector<Segment>>& segments() const { return segments_; }
  std::vector<std::vector<Segment>>& segments() { return segments_; }

  /// Splits rows into per-graph schedules of `edges_per_graph` rows each.
  std::vector<SegmentSchedule> per_graph(std::size_t edges_per_graph) const;

 private:
  std::size_t t_obs_;
  std::size_t horizon_;
  std::size_t d_min_;
  std::vector<std::size_t> next_start_;
  std::vector<std::vector<Segment>> segments_;
};

/// Optional override of the sampled z_d, called as (row, segment_index).
using DurationOverride = std::function<double(std::size_t, std::size_t)>;

/// Builds schedules for every edge row from precomputed recurrent states.
/// Durations use mu + sigma * eps when `sample` is set, else the mean.
SegmentSchedule build_schedule(const DurationParams& params, const EdgeEmbeddings& states, std::size_t t_obs,
                               std::size_t horizon, Rng& rng, DurationVariant variant, bool sample = true,
                               const DurationOverride& z_override = {});

/// Writes "sample_id,edge_index,t_start,duration,edge_type" records.
void write_schedule_records(const std::vector<SegmentSchedule>& schedules, const std::filesystem::path& path,
                            std::size_t first_sample_id = 0);

}  // namespace DIDER_ABI
}  // namespace dider
