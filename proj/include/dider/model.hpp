#pragma once

#include "dider/abi.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dider/decoder.hpp"
#include "dider/edge_inference.hpp"
#include "dider/encoder.hpp"
#include "dider/nn.hpp"
#include "dider/physics_sim.hpp"
#include "dider/segmenter.hpp"

namespace dider {
inline namespace DIDER_ABI {

struct ModelConfig {
  std::size_t feature_dim = 4;
  std::size_t hidden = 64;
  std::size_t decoder_hidden = 64;
  std::size_t edge_types = 2;
  double tau = 0.5;
  DurationVariant duration_variant = DurationVariant::past_only;
  /// Feed the current edge sample back into the forward recurrence.
  bool edge_feedback = false;
  double prior_mu0 = 0.0;
  double prior_sigma0 = 1.0;
  std::size_t d_min = 1;
  double out_variance = 5e-5;
  std::uint64_t init_seed = 1;

  void validate() const;
  /// One "key = value" line per field.
  std::string to_text() const;
  static ModelConfig from_text(const std::string& text);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class EdgeSource { encoder, prior };

struct RunOptions {
  std::size_t t_obs = 5;
  RolloutMode rollout = RolloutMode::teacher_forced;
  EdgeSource edge_source = EdgeSource::encoder;
  EdgeSampleMode edge_mode = EdgeSampleMode::soft;
  /// Draw z_d = mu + sigma * eps; otherwise use the posterior mean.
  bool sample_durations = true;
  /// Bypass the duration posterior with fixed-length segments (1 = per-step).
  std::optional<std::size_t> force_duration;
  /// Reuse these segment boundaries (one schedule per sample).
  const std::vector<SegmentSchedule>* frozen_durations = nullptr;
  /// Compute KL terms even when edges come from the prior.
  bool compute_kl = true;
};

struct RunOutput {
  /// predictions[k] is the prediction of step k + 1, shape [B*N, F].
  std::vector<Tensor> predictions;
  /// Sums over every segment and edge of the batch.
  Tensor kl_duration;
  Tensor kl_edge;
  std::vector<SegmentSchedule> schedules;
  /// Type (argmax) of the edge input used for each target,
  /// index ((b * (T - 1)) + (target - 1)) * E + e.
  std::vector<std::uint8_t> decoder_edge_types;
  std::size_t n_samples = 0;
  std::size_t horizon = 0;
  std::size_t n_edges = 0;

  int decoder_edge_type(std::size_t b, std::size_t target, std::size_t e) const {
    return decoder_edge_types[((b * (horizon - 1)) + (target - 1)) * n_edges + e];
  }
};

/// Encoder, duration module, edge prior/encoder and decoder over one
/// parameter store.
class DiderModel {
 public:
  explicit DiderModel(const ModelConfig& config);
  DiderModel(const DiderModel&) = delete;
  DiderModel& operator=(const DiderModel&) = delete;

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const EncoderParams& encoder() const { return encoder_; }
  const DurationParams& duration() const { return duration_; }
  const EdgeInfParams& edges() const { return edges_; }
  const DecoderParams& decoder() const { return decoder_; }

  /// steps[t]: [B*N, F] states of step t. Records on the active tape, if any.
  RunOutput run(const std::vector<Tensor>& steps, std::size_t n_agents, const RunOptions& options, Rng& rng) const;

 private:
  ModelConfig config_;
  ParamStore store_;
  EncoderParams encoder_;
  DurationParams duration_;
  EdgeInfParams edges_;
  DecoderParams decoder_;
};

/// Per-step [B*N, 4] tensors for samples [begin, end).
std::vector<Tensor> batch_steps(const TrajectoryBatch& batch, std::size_t begin, std::size_t end);
std::vector<Tensor> batch_steps(const TrajectoryBatch& batch, const std::vector<std::size_t>& samples);

/// Row-stacks predictions[k] (targets 1..T-1) into [(T-1)*B*N, F].
Tensor stack_rows(const std::vector<Tensor>& parts);

}  // namespace DIDER_ABI
}  // namespace dider
