#include "dider/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dider/errors.hpp"
#include "dider/parallel.hpp"

namespace dider {
inline namespace DIDER_ABI {

namespace {

struct ChunkStats {
  std::vector<double> sq_error;  // per requested horizon
  std::vector<std::uint64_t> count;
  Confusion raw;
  std::size_t segments = 0;
  std::size_t edges = 0;
  std::vector<SegmentSchedule> schedules;
  std::vector<std::uint8_t> decoder_types;
};

RunOptions evaluation_run_options(std::size_t t_obs, std::optional<std::size_t> force_duration) {
  RunOptions opt;
  opt.t_obs = t_obs;
  opt.rollout = RolloutMode::free_running;
  opt.edge_source = EdgeSource::prior;
  opt.edge_mode = EdgeSampleMode::argmax;
  opt.sample_durations = false;
  opt.force_duration = force_duration;
  opt.compute_kl = false;
  return opt;
}

void check_window(const TrajectoryBatch& data, std::size_t t_obs, const std::vector<std::size_t>& horizons) {
  if (t_obs < 1 || t_obs >= data.horizon) {
    throw ContractError("burn-in " + std::to_string(t_obs) + " must lie in [1, " + std::to_string(data.horizon - 1) +
                        "]");
  }
  for (std::size_t h : horizons) {
    if (h < 1) throw ContractError("horizons must be >= 1");
    if (t_obs + h > data.horizon) {
      throw ContractError("horizon " + std::to_string(h) + " with burn-in " + std::to_string(t_obs) + " needs " +
                          std::to_string(t_obs + h) + " steps; the data has " + std::to_string(data.horizon));
    }
  }
}

double squared_error_at(const Tensor& pred, const TrajectoryBatch& data, std::size_t begin, std::size_t target) {
  const std::size_t per = data.n_agents * data.feature_dim;
  const auto p = pred.data();
  double acc = 0;
  for (std::size_t b = 0; b * per < p.size(); ++b) {
    const float* truth = &data.states[data.state_index(begin + b, target, 0)];
    for (std::size_t k = 0; k < per; ++k) {
      const double d = static_cast<double>(p[b * per + k]) - truth[k];
      acc += d * d;
    }
  }
  return acc;
}

std::vector<std::pair<std::size_t, std::size_t>> chunk_ranges(std::size_t n, std::size_t chunk) {
  if (chunk == 0) throw ContractError("chunk size must be > 0");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t b = 0; b < n; b += chunk) out.emplace_back(b, std::min(n, b + chunk));
  return out;
}

}  // namespace

double EvalReport::mean_edge_accuracy() const {
  if (!edge_accuracy_by_type || edge_accuracy_by_type->empty()) return 0;
  return std::accumulate(edge_accuracy_by_type->begin(), edge_accuracy_by_type->end(), 0.0) /
         static_cast<double>(edge_accuracy_by_type->size());
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "samples: " << n_samples << "\n"
     << "burn-in steps: " << t_obs << "\n"
     << "MSE averaged over samples, agents and (px, py, vx, vy) on normalised data\n";
  for (const auto& [h, v] : mse_by_horizon) os << "  mse@" << h << ": " << v << "\n";
  os << "mean segments per edge: " << mean_segments_per_edge << "\n";
  if (edge_accuracy_by_type) {
    os << "edge accuracy by type (aligned, per step):\n";
    for (std::size_t k = 0; k < edge_accuracy_by_type->size(); ++k) {
      os << "  type " << k << ": " << (*edge_accuracy_by_type)[k] << "\n";
    }
    os << "  mean: " << mean_edge_accuracy() << "\n";
    os << "permutation (predicted -> aligned):";
    for (std::size_t k = 0; k < permutation.size(); ++k) os << " " << k << "->" << permutation[k];
    os << "\nconfusion (rows ground truth, columns aligned prediction):\n";
    for (const auto& row : confusion) {
      os << " ";
      for (auto c : row) os << " " << c;
      os << "\n";
    }
  } else {
    os << "edge accuracy: unavailable (no edge labels)\n";
  }
  return os.str();
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "metric,key,value\n";
  os << "n_samples,," << n_samples << "\n";
  os << "t_obs,," << t_obs << "\n";
  for (const auto& [h, v] : mse_by_horizon) os << "mse," << h << "," << v << "\n";
  os << "mean_segments_per_edge,," << mean_segments_per_edge << "\n";
  if (edge_accuracy_by_type) {
    for (std::size_t k = 0; k < edge_accuracy_by_type->size(); ++k) {
      os << "edge_accuracy," << k << "," << (*edge_accuracy_by_type)[k] << "\n";
    }
    os << "edge_accuracy_mean,," << mean_edge_accuracy() << "\n";
    for (std::size_t g = 0; g < confusion.size(); ++g) {
      for (std::size_t p = 0; p < confusion[g].size(); ++p) {
        os << "confusion," << g << ":" << p << "," << confusion[g][p] << "\n";
      }
    }
  }
  return os.str();
}

EvalReport evaluate(const DiderModel& model, const TrajectoryBatch& data, const EvalOptions& options, EvalRun* run) {
  check_window(data, options.t_obs, options.horizons);
  if (data.feature_dim != model.config().feature_dim) {
    throw DimensionError("evaluate: data has " + std::to_string(data.feature_dim) + " features, model expects " +
                         std::to_string(model.config().feature_dim));
  }
  const std::size_t e_types = model.config().edge_types;
  if (!options.permutation.empty() && options.permutation.size() != e_types) {
    throw ContractError("evaluate: permutation must list every edge type");
  }
  const bool labelled = data.edge_labels.has_value();
  const auto ranges = chunk_ranges(data.n_samples, options.chunk);
  const RunOptions run_opt = evaluation_run_options(options.t_obs, options.force_duration);
  std::vector<ChunkStats> stats(ranges.size());

  parallel_for(ranges.size(), options.threads, [&](std::size_t c) {
    TapeScope no_tape(nullptr);
    const auto [begin, end] = ranges[c];
    Rng rng(0);
    const RunOutput out = model.run(batch_steps(data, begin, end), data.n_agents, run_opt, rng);
    ChunkStats& s = stats[c];
    for (std::size_t h : options.horizons) {
      const std::size_t target = options.t_obs + h - 1;
      s.sq_error.push_back(squared_error_at(out.predictions[target - 1], data, begin, target));
      s.count.push_back((end - begin) * data.n_agents * data.feature_dim);
    }
    s.raw = labelled ? edge_confusion(data, begin, end - begin, options.t_obs, out.decoder_edge_types, e_types)
                     : Confusion(e_types, std::vector<std::uint64_t>(e_types, 0));
    for (const auto& sched : out.schedules) {
      for (const auto& segs : sched.edges) s.segments += segs.size();
      s.edges += sched.edges.size();
    }
    if (run) {
      s.schedules = out.schedules;
      s.decoder_types = out.decoder_edge_types;
    }
  });

  EvalReport report;
  report.n_samples = data.n_samples;
  report.t_obs = options.t_obs;
  Confusion raw(e_types, std::vector<std::uint64_t>(e_types, 0));
  std::vector<double> sq(options.horizons.size(), 0);
  std::vector<std::uint64_t> count(options.horizons.size(), 0);
  std::size_t segments = 0, edges = 0;
  for (const auto& s : stats) {
    for (std::size_t k = 0; k < sq.size(); ++k) {
      sq[k] += s.sq_error[k];
      count[k] += s.count[k];
    }
    for (std::size_t g = 0; g < e_types; ++g) {
      for (std::size_t p = 0; p < e_types; ++p) raw[g][p] += s.raw[g][p];
    }
    segments += s.segments;
    edges += s.edges;
  }
  for (std::size_t k = 0; k < sq.size(); ++k) {
    report.mse_by_horizon[options.horizons[k]] = count[k] ? sq[k] / static_cast<double>(count[k]) : 0.0;
  }
  report.mean_segments_per_edge = edges ? static_cast<double>(segments) / static_cast<double>(edges) : 0.0;
  if (labelled) {
    report.raw_confusion = raw;
    report.permutation = options.permutation.empty() ? align_labels(raw) : options.permutation;
    report.confusion.assign(e_types, std::vector<std::uint64_t>(e_types, 0));
    for (std::size_t g = 0; g < e_types; ++g) {
      for (std::size_t p = 0; p < e_types; ++p) report.confusion[g][report.permutation[p]] += raw[g][p];
    }
    report.edge_accuracy_by_type = per_type_accuracy(report.confusion);
  }

  if (run) {
    run->t_obs = options.t_obs;
    run->horizon = data.horizon;
    run->n_agents = data.n_agents;
    run->n_edges = data.n_agents * (data.n_agents - 1);
    run->schedules.clear();
    run->decoder_edge_types.clear();
    for (auto& s : stats) {
      run->schedules.insert(run->schedules.end(), s.schedules.begin(), s.schedules.end());
      run->decoder_edge_types.insert(run->decoder_edge_types.end(), s.decoder_types.begin(), s.decoder_types.end());
    }
  }
  return report;
}

double free_running_mse(const DiderModel& model, const TrajectoryBatch& data, std::size_t t_obs,
                        std::size_t horizon, std::optional<std::size_t> force_duration, std::size_t chunk,
                        std::size_t threads) {
  check_window(data, t_obs, {horizon});
  const auto ranges = chunk_ranges(data.n_samples, chunk);
  const RunOptions run_opt = evaluation_run_options(t_obs, force_duration);
  std::vector<double> sq(ranges.size(), 0);
  parallel_for(ranges.size(), threads, [&](std::size_t c) {
    TapeScope no_tape(nullptr);
    Rng rng(0);
    const RunOutput out = model.run(batch_steps(data, ranges[c].first, ranges[c].second), data.n_agents, run_opt, rng);
    const std::size_t target = t_obs + horizon - 1;
    sq[c] = squared_error_at(out.predictions[target - 1], data, ranges[c].first, target);
  });
  const double total = std::accumulate(sq.begin(), sq.end(), 0.0);
  return total / static_cast<double>(data.n_samples * data.n_agents * data.feature_dim);
}

double zero_delta_mse(const TrajectoryBatch& data, std::size_t t_obs, std::size_t horizon) {
  check_window(data, t_obs, {horizon});
  const std::size_t target = t_obs + horizon - 1;
  const std::size_t per = data.n_agents * data.feature_dim;
  double acc = 0;
  for (std::size_t s = 0; s < data.n_samples; ++s) {
    const float* next = &data.states[data.state_index(s, target, 0)];
    const float* prev = &data.states[data.state_index(s, target - 1, 0)];
    for (std::size_t k = 0; k < per; ++k) {
      const double d = static_cast<double>(next[k]) - prev[k];
      acc += d * d;
    }
  }
  return data.n_samples ? acc / static_cast<double>(data.n_samples * per) : 0.0;
}

std::vector<std::size_t> align_labels(const Confusion& confusion) {
  const std::size_t e = confusion.size();
  for (const auto& row : confusion) {
    if (row.size() != e) throw ContractError("align_labels: confusion matrix must be square");
  }
  std::vector<std::size_t> perm(e);
  std::iota(perm.begin(), perm.end(), 0);
  if (e <= 2) return perm;
  // perm[p] = aligned id of predicted id p; perm[0] stays 0.
  std::vector<std::size_t> best = perm;
  std::uint64_t best_score = 0;
  bool first = true;
  do {
    std::uint64_t score = 0;
    for (std::size_t p = 0; p < e; ++p) score += confusion[perm[p]][p];
    if (first || score > best_score) {
      best = perm;
      best_score = score;
      first = false;
    }
  } while (std::next_permutation(perm.begin() + 1, perm.end()));
  return best;
}

Confusion edge_confusion(const TrajectoryBatch& data, std::size_t first, std::size_t n, std::size_t t_obs,
                         const std::vector<std::uint8_t>& decoder_types, std::size_t n_edge_types) {
  if (!data.edge_labels) throw ContractError("edge_confusion: data has no edge labels");
  const std::size_t n_edges = data.n_edges();
  const std::size_t horizon = data.horizon;
  if (decoder_types.size() != n * (horizon - 1) * n_edges) {
    throw DimensionError("edge_confusion: decoder types do not cover " + std::to_string(n) + " samples");
  }
  Confusion c(n_edge_types, std::vector<std::uint64_t>(n_edge_types, 0));
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t u = t_obs; u < horizon; ++u) {
      for (std::size_t e = 0; e < n_edges; ++e) {
        const std::size_t truth = (*data.edge_labels)[data.label_index(first + b, u - 1, e)];
        const std::size_t pred = decoder_types[((b * (horizon - 1)) + (u - 1)) * n_edges + e];
        if (truth >= n_edge_types || pred >= n_edge_types) {
          throw ContractError("edge_confusion: type id exceeds " + std::to_string(n_edge_types) + " edge types");
        }
        ++c[truth][pred];
      }
    }
  }
  return c;
}

std::vector<double> per_type_accuracy(const Confusion& confusion) {
  std::vector<double> acc;
  for (std::size_t g = 0; g < confusion.size(); ++g) {
    const auto total = std::accumulate(confusion[g].begin(), confusion[g].end(), std::uint64_t{0});
    acc.push_back(total ? static_cast<double>(confusion[g][g]) / static_cast<double>(total) : 0.0);
  }
  return acc;
}

void export_timelines(const EvalRun& run, const std::filesystem::path& csv_path, std::size_t first_sample_id) {
  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("cannot open " + csv_path.string() + " for writing");
  out << "sample_id,edge_src,edge_dst,t_start,duration,edge_type\n";
  for (std::size_t b = 0; b < run.schedules.size(); ++b) {
    const auto& sched = run.schedules[b];
    for (std::size_t e = 0; e < sched.edges.size(); ++e) {
      const auto [src, dst] = edge_endpoints(e, run.n_agents);
      for (const Segment& seg : sched.edges[e]) {
        out << first_sample_id + b << ',' << src << ',' << dst << ',' << seg.t_start << ',' << seg.duration << ','
            << seg.edge_type << '\n';
      }
    }
  }
  if (!out) throw std::runtime_error("failed writing " + csv_path.string());
}

void export_timeline_svgs(const EvalRun& run, const std::filesystem::path& dir, std::size_t max_samples,
                          std::size_t first_sample_id) {
  static const char* kColours[] = {"#4a78c2", "#d1352b", "#3a9e4f", "#e08a1e", "#8e4fb5", "#7a7a7a"};
  std::filesystem::create_directories(dir);
  const double cell = 12, row_h = 18, left = 60, top = 24;
  for (std::size_t b = 0; b < std::min(max_samples, run.schedules.size()); ++b) {
    const auto& sched = run.schedules[b];
    const double width = left + cell * static_cast<double>(run.horizon) + 10;
    const double height = top + row_h * static_cast<double>(sched.edges.size()) + 10;
    std::ofstream out(dir / ("timeline_" + std::to_string(first_sample_id + b) + ".svg"));
    if (!out) throw std::runtime_error("cannot write timeline svg in " + dir.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    out << "<text x=\"4\" y=\"14\" font-size=\"11\" font-family=\"monospace\">sample " << first_sample_id + b
        << ", steps " << sched.t_obs << ".." << sched.horizon << "</text>\n";
    for (std::size_t e = 0; e < sched.edges.size(); ++e) {
      const auto [src, dst] = edge_endpoints(e, run.n_agents);
      const double y = top + row_h * static_cast<double>(e);
      out << "<text x=\"4\" y=\"" << y + 12 << "\" font-size=\"11\" font-family=\"monospace\">" << src << "-&gt;"
          << dst << "</text>\n";
      for (const Segment& seg : sched.edges[e]) {
        const int type = std::max(0, seg.edge_type);
        out << "<rect x=\"" << left + cell * static_cast<double>(seg.t_start) << "\" y=\"" << y << "\" width=\""
            << cell * static_cast<double>(seg.duration) << "\" height=\"" << row_h - 4 << "\" fill=\""
            << kColours[static_cast<std::size_t>(type) % 6] << "\" stroke=\"#000\" stroke-width=\"0.5\"/>\n";
      }
    }
    out << "</svg>\n";
  }
}

std::vector<TimelineRecord> read_timelines(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open " + csv_path.string());
  std::string line;
  std::getline(in, line);
  if (line != "sample_id,edge_src,edge_dst,t_start,duration,edge_type") {
    throw CorruptDataError("timeline file " + csv_path.string() + " has an unexpected header");
  }
  std::vector<TimelineRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    TimelineRecord r;
    char c1, c2, c3, c4, c5;
    is >> r.sample_id >> c1 >> r.edge_src >> c2 >> r.edge_dst >> c3 >> r.t_start >> c4 >> r.duration >> c5 >>
        r.edge_type;
    if (is.fail() || c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',' || c5 != ',') {
      throw CorruptDataError("bad timeline record: '" + line + "'");
    }
    out.push_back(r);
  }
  return out;
}

std::string replay_mismatch(const std::vector<TimelineRecord>& records, const EvalRun& run,
                            std::size_t first_sample_id) {
  const std::size_t n_samples = run.schedules.size();
  const std::size_t steps = run.horizon - run.t_obs;
  std::vector<int> expanded(n_samples * run.n_edges * steps, -1);
  for (const auto& r : records) {
    if (r.sample_id < first_sample_id || r.sample_id - first_sample_id >= n_samples) {
      return "record for unknown sample " + std::to_string(r.sample_id);
    }
    const std::size_t b = r.sample_id - first_sample_id;
    const std::size_t e = edge_index(r.edge_src, r.edge_dst, run.n_agents);
    for (std::size_t t = r.t_start; t < r.t_start + r.duration; ++t) {
      if (t < run.t_obs || t >= run.horizon) return "record outside the prediction window at step " + std::to_string(t);
      int& slot = expanded[(b * run.n_edges + e) * steps + (t - run.t_obs)];
      if (slot != -1) return "overlapping records at step " + std::to_string(t);
      slot = r.edge_type;
    }
  }
  for (std::size_t b = 0; b < n_samples; ++b) {
    for (std::size_t e = 0; e < run.n_edges; ++e) {
      for (std::size_t t = run.t_obs; t < run.horizon; ++t) {
        const int replayed = expanded[(b * run.n_edges + e) * steps + (t - run.t_obs)];
        const int used = run.decoder_edge_types[((b * (run.horizon - 1)) + (t - 1)) * run.n_edges + e];
        if (replayed != used) {
          return "sample " + std::to_string(first_sample_id + b) + " edge " + std::to_string(e) + " step " +
                 std::to_string(t) + ": timeline says " + std::to_string(replayed) + ", decoder used " +
                 std::to_string(used);
        }
      }
    }
  }
  return {};
}

}  // namespace DIDER_ABI
}  // namespace dider
