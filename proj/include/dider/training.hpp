#pragma once

#include "dider/abi.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dider/checkpoint.hpp"
#include "dider/model.hpp"
#include "dider/physics_sim.hpp"

namespace dider {
inline namespace DIDER_ABI {

enum class TrainMode {
  dider,
  /// Duration posterior conditioned on the whole trajectory.
  dider_skid_duration,
  /// Per-step segments: the duration module is bypassed.
  dnri_baseline,
};

std::string to_string(TrainMode mode);
/// Accepts "dider", "dider-skid", "dider_skid_duration", "dnri", "dnri_baseline".
TrainMode train_mode_from_string(const std::string& text);

struct TrainConfig {
  double beta_d = 1.0;
  double beta_e = 1.0;
  double cap_d = 0.0;
  double cap_e = 0.0;
  double lr = 5e-4;
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  /// Samples per gradient shard. Fixes the summation order, so results do not
  /// depend on the thread count.
  std::size_t shard_size = 32;
  std::uint64_t seed = 0;
  std::size_t t_obs = 5;
  TrainMode mode = TrainMode::dider;
  std::optional<std::size_t> force_duration;
  double tau = 0.5;
  std::size_t edge_types = 2;
  std::size_t hidden = 64;
  bool edge_feedback = false;
  double prior_mu0 = 0.0;
  double prior_sigma0 = 1.0;
  double out_variance = 5e-5;
  /// Horizon of the validation MSE used to keep the best checkpoint; 0 = middle
  /// of the prediction window.
  std::size_t val_horizon = 0;

  void validate() const;
  ModelConfig model_config() const;
  /// Segment length forced by the mode or the explicit override.
  std::optional<std::size_t> effective_force_duration() const;
  std::size_t validation_horizon(std::size_t data_horizon) const;
  std::string to_text() const;
  static TrainConfig from_text(const std::string& text);
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct ElboReport {
  double recon_nll = 0;
  double kl_duration = 0;
  double kl_edge = 0;
  double total_loss = 0;
  /// Mean segments per edge.
  double n_segments = 0;
  /// Differentiable total (recorded on the active tape).
  Tensor loss;
};

/// Negative ELBO of one batch with capacity terms, per-sample averages.
/// Edges are sampled from the encoder, durations from the posterior.
ElboReport elbo(const DiderModel& model, const std::vector<Tensor>& steps, std::size_t n_agents,
                const TrainConfig& config, Rng& rng, const std::vector<SegmentSchedule>* frozen = nullptr);

class Adam {
 public:
  Adam() = default;
  explicit Adam(const ParamStore& store, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(ParamStore& store);
  std::uint64_t steps() const { return t_; }
  std::vector<std::vector<real>>& first_moments() { return m_; }
  std::vector<std::vector<real>>& second_moments() { return v_; }
  void set_steps(std::uint64_t t) { t_ = t; }

 private:
  double lr_ = 5e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::uint64_t t_ = 0;
  std::vector<std::vector<real>> m_;
  std::vector<std::vector<real>> v_;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0;
  double recon_nll = 0;
  double kl_duration = 0;
  double kl_edge = 0;
  double n_segments = 0;
  double val_mse = 0;

  static std::string csv_header();
  std::string csv_row() const;
};

/// Everything needed to continue training.
struct TrainState {
  TrainConfig config;
  std::unique_ptr<DiderModel> model;
  Adam optimizer;
  std::size_t epochs_done = 0;
  Rng rng;
  double best_val = 0;
  std::size_t best_epoch = 0;
  std::vector<EpochMetrics> history;

  explicit TrainState(const TrainConfig& config);
};

void save_checkpoint(const std::filesystem::path& path, TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);
/// Model only, for evaluation.
std::unique_ptr<DiderModel> load_model(const std::filesystem::path& path, TrainConfig* config = nullptr);

struct TrainOptions {
  /// last.ckpt, best.ckpt and metrics.csv are written here when set.
  std::filesystem::path out_dir;
  /// Continue from out_dir/last.ckpt.
  bool resume = false;
  std::size_t threads = 1;
  /// Stop after this many epochs in total (for interrupted runs).
  std::optional<std::size_t> stop_after;
  std::size_t val_chunk = 128;
  std::function<void(std::size_t epoch, std::size_t batch, const ElboReport&)> on_batch;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  double best_val = 0;
  std::size_t best_epoch = 0;
};

/// Adam on the negative ELBO; gradients are merged across fixed shards before
/// each update. Throws DivergenceError when the loss turns non-finite.
TrainResult train(const TrajectoryBatch& train_data, const TrajectoryBatch& val_data, const TrainConfig& config,
                  const TrainOptions& options);

}  // namespace DIDER_ABI
}  // namespace dider
