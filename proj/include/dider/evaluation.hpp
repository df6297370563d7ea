#pragma once

#include "dider/abi.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dider/model.hpp"
#include "dider/physics_sim.hpp"

namespace dider {
inline namespace DIDER_ABI {

using Confusion = std::vector<std::vector<std::uint64_t>>;

struct EvalOptions {
  std::size_t t_obs = 5;
  std::vector<std::size_t> horizons{1, 15, 25};
  /// Samples per forward pass.
  std::size_t chunk = 128;
  std::size_t threads = 1;
  /// Fixed-length segments instead of the duration module (DNRI-style runs).
  std::optional<std::size_t> force_duration;
  /// Frozen id permutation (predicted id -> aligned id); aligned on this data when empty.
  std::vector<std::size_t> permutation;
};

/// Per-sample outcome of an evaluation rollout, kept for timeline export.
struct EvalRun {
  std::size_t t_obs = 0;
  std::size_t horizon = 0;
  std::size_t n_agents = 0;
  std::size_t n_edges = 0;
  std::vector<SegmentSchedule> schedules;
  /// Index ((b * (T - 1)) + (target - 1)) * E + e.
  std::vector<std::uint8_t> decoder_edge_types;
};

struct EvalReport {
  std::size_t n_samples = 0;
  std::size_t t_obs = 0;
  /// Mean squared error over samples, agents and all four state dims.
  std::map<std::size_t, double> mse_by_horizon;
  /// Absent when the data carries no edge labels.
  std::optional<std::vector<double>> edge_accuracy_by_type;
  double mean_segments_per_edge = 0;
  /// Rows ground truth, columns aligned prediction.
  Confusion confusion;
  /// Rows ground truth, columns raw predicted id.
  Confusion raw_confusion;
  std::vector<std::size_t> permutation;

  double mean_edge_accuracy() const;
  std::string to_text() const;
  /// "metric,key,value" rows.
  std::string to_csv() const;
};

/// Free-running rollout with edges from the prior (argmax) and mean durations.
EvalReport evaluate(const DiderModel& model, const TrajectoryBatch& data, const EvalOptions& options,
                    EvalRun* run = nullptr);

/// Mean squared error of free-running predictions at one horizon; used for
/// validation during training.
double free_running_mse(const DiderModel& model, const TrajectoryBatch& data, std::size_t t_obs,
                        std::size_t horizon, std::optional<std::size_t> force_duration, std::size_t chunk,
                        std::size_t threads);

/// Mean squared one-step displacement ||x_{t+1} - x_t||^2 at target t_obs + h - 1:
/// the error of a decoder that predicts no change.
double zero_delta_mse(const TrajectoryBatch& data, std::size_t t_obs, std::size_t horizon);

/// Permutation mapping predicted ids to ground-truth ids with type 0 fixed and
/// the rest chosen to maximise the matched counts (exhaustive search).
std::vector<std::size_t> align_labels(const Confusion& confusion);

/// Counts (ground truth label of step u-1, decoder type for target u) over
/// targets u in [t_obs, T) for samples [first, first + n) of `data`.
/// decoder_types uses the RunOutput layout.
Confusion edge_confusion(const TrajectoryBatch& data, std::size_t first, std::size_t n, std::size_t t_obs,
                         const std::vector<std::uint8_t>& decoder_types, std::size_t n_edge_types);

/// Per-type accuracy (row-normalised diagonal) of a confusion matrix.
std::vector<double> per_type_accuracy(const Confusion& confusion);

/// Writes "sample_id,edge_src,edge_dst,t_start,duration,edge_type" records.
void export_timelines(const EvalRun& run, const std::filesystem::path& csv_path, std::size_t first_sample_id = 0);
/// One SVG per sample (up to max_samples) named timeline_<id>.svg.
void export_timeline_svgs(const EvalRun& run, const std::filesystem::path& dir, std::size_t max_samples,
                          std::size_t first_sample_id = 0);

struct TimelineRecord {
  std::size_t sample_id = 0;
  std::size_t edge_src = 0;
  std::size_t edge_dst = 0;
  std::size_t t_start = 0;
  std::size_t duration = 0;
  int edge_type = 0;
};
std::vector<TimelineRecord> read_timelines(const std::filesystem::path& csv_path);

/// Empty when the records expand to exactly the decoder's per-target edge
/// types over the prediction window; otherwise the first mismatch.
std::string replay_mismatch(const std::vector<TimelineRecord>& records, const EvalRun& run,
                            std::size_t first_sample_id = 0);

}  // namespace DIDER_ABI
}  // namespace dider
