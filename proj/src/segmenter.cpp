#include "dider/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dider/errors.hpp"

namespace dider {
inline namespace DIDER_ABI {

std::string to_string(DurationVariant v) { return v == DurationVariant::past_only ? "past_only" : "full_trajectory"; }

DurationVariant duration_variant_from_string(const std::string& text) {
  if (text == "past_only") return DurationVariant::past_only;
  if (text == "full_trajectory") return DurationVariant::full_trajectory;
  throw ConfigError("unknown duration variant '" + text + "'");
}

DurationParams DurationParams::create(ParamStore& store, std::size_t input_dim, std::size_t hidden, double prior_mu0,
                                      double prior_sigma0, std::size_t d_min, Rng& rng) {
  if (!(prior_sigma0 > 0)) throw ContractError("DurationParams: prior_sigma0 must be > 0");
  if (d_min < 1) throw ContractError("DurationParams: d_min must be >= 1");
  DurationParams p;
  p.f_mu = Mlp::create(store, "duration.f_mu", input_dim, hidden, 1, false, rng);
  p.f_sigma = Mlp::create(store, "duration.f_sigma", input_dim, hidden, 1, false, rng);
  p.prior_mu0 = prior_mu0;
  p.prior_sigma0 = prior_sigma0;
  p.d_min = d_min;
  return p;
}

DurationPosterior duration_posterior(const DurationParams& params, const Tensor& h_state) {
  return {tanh(params.f_mu(h_state)), sigmoid(params.f_sigma(h_state))};
}

std::size_t realize_duration(double z_d, std::size_t t_remaining, std::size_t d_min) {
  if (t_remaining < 1) throw ContractError("realize_duration: t_remaining must be >= 1");
  const double lo = static_cast<double>(std::min(d_min, t_remaining));
  const double hi = static_cast<double>(t_remaining);
  if (std::isnan(z_d)) return static_cast<std::size_t>(lo);
  const double rounded = std::floor(z_d * hi + 0.5);
  return static_cast<std::size_t>(std::clamp(rounded, lo, hi));
}

Tensor duration_kl(const Tensor& mu, const Tensor& sigma, double prior_mu0, double prior_sigma0) {
  if (!(prior_sigma0 > 0)) throw ContractError("duration_kl: prior sigma must be > 0");
  for (real s : sigma.data()) {
    // NaN passes through so that training can report where it first appeared.
    if (s <= 0) throw ContractError("duration_kl: sigma must be > 0");
  }
  const real inv_two_var0 = static_cast<real>(1.0 / (2.0 * prior_sigma0 * prior_sigma0));
  const real constant = static_cast<real>(std::log(prior_sigma0) - 0.5);
  // log(s0/s) + (s^2 + (mu - mu0)^2) / (2 s0^2) - 1/2, per row
  Tensor quad = scale(add(square(sigma), square(add_scalar(mu, static_cast<real>(-prior_mu0)))), inv_two_var0);
  Tensor per_row = add_scalar(sub(quad, log(sigma)), constant);
  return sum(per_row);
}

// ---------------------------------------------------------------------------

std::string SegmentSchedule::partition_violation(std::size_t d_min) const {
  if (t_obs >= horizon) return "t_obs >= horizon";
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& segs = edges[e];
    std::ostringstream where;
    where << "edge " << e << ": ";
    if (segs.empty()) return where.str() + "no segments";
    if (segs.front().t_start != t_obs) return where.str() + "first segment does not start at t_obs";
    for (std::size_t k = 0; k < segs.size(); ++k) {
      if (segs[k].duration < d_min) return where.str() + "duration below d_min";
      if (k + 1 < segs.size() && segs[k + 1].t_start != segs[k].t_end()) return where.str() + "gap or overlap";
    }
    if (segs.back().t_end() != horizon) return where.str() + "last segment does not end at the horizon";
  }
  return {};
}

double SegmentSchedule::mean_segments_per_edge() const {
  if (edges.empty()) return 0.0;
  std::size_t total = 0;
  for (const auto& segs : edges) total += segs.size();
  return static_cast<double>(total) / static_cast<double>(edges.size());
}

std::vector<std::vector<int>> SegmentSchedule::expand() const {
  std::vector<std::vector<int>> out(edges.size(), std::vector<int>(horizon - t_obs, -1));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    for (const Segment& s : edges[e]) {
      for (std::size_t t = s.t_start; t < s.t_end() && t < horizon; ++t) out[e][t - t_obs] = s.edge_type;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

ScheduleBuilder::ScheduleBuilder(std::size_t rows, std::size_t t_obs, std::size_t horizon, std::size_t d_min)
    : t_obs_(t_obs), horizon_(horizon), d_min_(d_min), next_start_(rows, t_obs), segments_(rows) {
  if (t_obs < 1 || t_obs >= horizon) {
    throw ContractError("ScheduleBuilder: need 1 <= t_obs < horizon (t_obs=" + std::to_string(t_obs) +
                        ", horizon=" + std::to_string(horizon) + ")");
  }
}

std::vector<std::size_t> ScheduleBuilder::reading_at(std::size_t t) const {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < next_start_.size(); ++r) {
    if (next_start_[r] == t + 1 && next_start_[r] < horizon_) rows.push_back(r);
  }
  return rows;
}

void ScheduleBuilder::commit(std::size_t row, Segment segment) {
  if (segment.t_start != next_start_[row]) throw ContractError("ScheduleBuilder: segment does not continue the row");
  if (segment.duration < 1 || segment.t_end() > horizon_) {
    throw ContractError("ScheduleBuilder: segment leaves the prediction window");
  }
  next_start_[row] = segment.t_end();
  segments_[row].push_back(segment);
}

bool ScheduleBuilder::complete() const {
  return std::all_of(next_start_.begin(), next_start_.end(), [this](std::size_t s) { return s == horizon_; });
}

std::vector<SegmentSchedule> ScheduleBuilder::per_graph(std::size_t edges_per_graph) const {
  std::vector<SegmentSchedule> out;
  if (edges_per_graph == 0) return out;
  const std::size_t graphs = segments_.size() / edges_per_graph;
  out.reserve(graphs);
  for (std::size_t g = 0; g < graphs; ++g) {
    SegmentSchedule s{t_obs_, horizon_, {}};
    s.edges.assign(segments_.begin() + static_cast<std::ptrdiff_t>(g * edges_per_graph),
                   segments_.begin() + static_cast<std::ptrdiff_t>((g + 1) * edges_per_graph));
    out.push_back(std::move(s));
  }
  return out;
}

SegmentSchedule build_schedule(const DurationParams& params, const EdgeEmbeddings& states, std::size_t t_obs,
                               std::size_t horizon, Rng& rng, DurationVariant variant, bool sample,
                               const DurationOverride& z_override) {
  if (t_obs >= horizon) throw ContractError("build_schedule: t_obs must be < horizon");
  if (states.h_prior.size() < horizon - 1) throw ContractError("build_schedule: missing recurrent states");
  if (variant == DurationVariant::full_trajectory && states.h_reverse.size() < horizon - 1) {
    throw ContractError("build_schedule: full_trajectory variant needs reverse states");
  }
  const std::size_t rows = states.h_prior.front().rows();
  ScheduleBuilder builder(rows, t_obs, horizon, params.d_min);
  for (std::size_t t = t_obs - 1; t + 1 < horizon; ++t) {
    const auto active = builder.reading_at(t);
    if (active.empty()) continue;
    Tensor h = gather_rows(states.h_prior[t], active);
    if (variant == DurationVariant::full_trajectory) h = concat_cols({gather_rows(states.h_reverse[t], active), h});
    const DurationPosterior post = duration_posterior(params, h);
    for (std::size_t i = 0; i < active.size(); ++i) {
      const std::size_t row = active[i];
      const double mu = post.mu.at(i);
      const double sigma = post.sigma.at(i);
      double z = sample ? mu + sigma * rng.normal() : mu;
      if (z_override) z = z_override(row, builder.segments()[row].size());
      Segment seg;
      seg.t_start = builder.next_start(row);
      seg.duration = realize_duration(z, builder.remaining(row), params.d_min);
      seg.z_d = z;
      seg.mu = mu;
      seg.sigma = sigma;
      builder.commit(row, seg);
    }
  }
  return {t_obs, horizon, builder.segments()};
}

void write_schedule_records(const std::vector<SegmentSchedule>& schedules, const std::filesystem::path& path,
                            std::size_t first_sample_id) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "sample_id,edge_index,t_start,duration,edge_type\n";
  for (std::size_t s = 0; s < schedules.size(); ++s) {
    for (std::size_t e = 0; e < schedules[s].edges.size(); ++e) {
      for (const Segment& seg : schedules[s].edges[e]) {
        out << first_sample_id + s << ',' << e << ',' << seg.t_start << ',' << seg.duration << ',' << seg.edge_type
            << '\n';
      }
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace DIDER_ABI
}  // namespace dider
