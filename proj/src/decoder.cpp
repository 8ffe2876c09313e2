#include "fastdraw/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fastdraw/error.hpp"

namespace fastdraw {

void DecodeConfig::validate() const {
  if (!(p_min > 0.0 && p_min < 1.0)) fail(ErrorCode::config, "decode.p_min must be in (0, 1)");
  if (!(cluster_eps > 0.0)) fail(ErrorCode::config, "decode.cluster_eps must be positive");
  if (cluster_min_points < 1) fail(ErrorCode::config, "decode.cluster_min_points must be >= 1");
  if (!(center_mask_fraction >= 0.0 && center_mask_fraction < 1.0)) {
    fail(ErrorCode::config, "decode.center_mask_fraction must be in [0, 1)");
  }
  if (max_steps < 1) fail(ErrorCode::config, "decode.max_steps must be >= 1");
}

namespace {

bool in_center_band(int w, int width, double fraction) {
  if (fraction <= 0.0) return false;
  const double center = width / 2.0;
  return std::abs(w + 0.5 - center) < fraction * width / 2.0;
}

}  // namespace

namespace {

struct Proposals {
  std::vector<Seed> seeds;     // one per cluster
  std::vector<Seed> isolated;  // candidates left as noise by the clustering
};

void sort_seeds(std::vector<Seed>& seeds, int W) {
  std::stable_sort(seeds.begin(), seeds.end(), [W](const Seed& a, const Seed& b) {
    if (a.prob != b.prob) return a.prob > b.prob;
    return a.h * W + a.w < b.h * W + b.w;
  });
}

Proposals cluster_candidates(const HeadField& field, const DecodeConfig& cfg) {
  const int H = field.height();
  const int W = field.width();
  std::vector<Seed> candidates;
  std::vector<int> index_of(static_cast<std::size_t>(H) * W, -1);
  for (int h = 0; h < H; ++h) {
    for (int w = 0; w < W; ++w) {
      const float p = field.lane_prob(h, w);
      if (p >= cfg.p_min && !in_center_band(w, W, cfg.center_mask_fraction)) {
        index_of[static_cast<std::size_t>(h) * W + w] = static_cast<int>(candidates.size());
        candidates.push_back({h, w, p});
      }
    }
  }
  if (candidates.empty()) return {};

  // eps-ball neighbours (inclusive, self counted) via the pixel lookup grid.
  const int r = static_cast<int>(std::floor(cfg.cluster_eps));
  const double eps2 = cfg.cluster_eps * cfg.cluster_eps;
  auto neighbours = [&](int i, std::vector<int>& out) {
    out.clear();
    const auto& c = candidates[static_cast<std::size_t>(i)];
    for (int dh = -r; dh <= r; ++dh) {
      const int h = c.h + dh;
      if (h < 0 || h >= H) continue;
      for (int dw = -r; dw <= r; ++dw) {
        const int w = c.w + dw;
        if (w < 0 || w >= W || dh * dh + dw * dw > eps2) continue;
        const int j = index_of[static_cast<std::size_t>(h) * W + w];
        if (j >= 0) out.push_back(j);
      }
    }
  };

  constexpr int kUnvisited = -2;
  constexpr int kNoise = -1;
  std::vector<int> label(candidates.size(), kUnvisited);
  std::vector<int> nb;
  std::vector<int> more;
  std::vector<int> frontier;
  int clusters = 0;
  for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
    if (label[i] != kUnvisited) continue;
    neighbours(i, nb);
    if (static_cast<int>(nb.size()) < cfg.cluster_min_points) {
      label[i] = kNoise;
      continue;
    }
    const int id = clusters++;
    label[i] = id;
    frontier.assign(nb.begin(), nb.end());
    while (!frontier.empty()) {
      const int j = frontier.back();
      frontier.pop_back();
      if (label[j] == kNoise) label[j] = id;  // border point
      if (label[j] != kUnvisited) continue;
      label[j] = id;
      neighbours(j, more);
      if (static_cast<int>(more.size()) >= cfg.cluster_min_points) {
        frontier.insert(frontier.end(), more.begin(), more.end());
      }
    }
  }

  // Candidates are in row-major order, so the first maximum wins ties.
  std::vector<int> best(static_cast<std::size_t>(clusters), -1);
  for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
    const int id = label[i];
    if (id < 0) continue;
    int& b = best[static_cast<std::size_t>(id)];
    if (b < 0 || candidates[i].prob > candidates[b].prob) b = i;
  }
  Proposals out;
  out.seeds.reserve(best.size());
  for (int b : best) out.seeds.push_back(candidates[static_cast<std::size_t>(b)]);
  for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
    if (label[i] == kNoise) out.isolated.push_back(candidates[static_cast<std::size_t>(i)]);
  }
  sort_seeds(out.seeds, W);
  sort_seeds(out.isolated, W);
  return out;
}

}  // namespace

std::vector<Seed> propose_initial_points(const HeadField& field, const DecodeConfig& cfg) {
  return cluster_candidates(field, cfg).seeds;
}

int argmax_class(std::span<const float> probs, int L) {
  int best = L;
  float best_p = probs[static_cast<std::size_t>(L)];
  for (int mag = 1; mag <= L; ++mag) {
    for (int dw : {-mag, mag}) {
      const float p = probs[static_cast<std::size_t>(dw + L)];
      if (p > best_p) {
        best_p = p;
        best = dw + L;
      }
    }
  }
  if (probs[static_cast<std::size_t>(end_class(L))] > best_p) best = end_class(L);
  return best;
}

double uncertainty_at(const HeadField& field, int h, int w, Direction d) {
  const auto probs = field.categorical(h, w, d);
  const int L = field.L();
  double mass = 0.0;
  double mean = 0.0;
  for (int i = 0; i <= 2 * L; ++i) {
    const double p = probs[static_cast<std::size_t>(i)];
    mass += p;
    mean += p * (i - L);
  }
  if (mass < 1e-9) return 0.0;
  mean /= mass;
  double var = 0.0;
  for (int i = 0; i <= 2 * L; ++i) {
    const double dev = (i - L) - mean;
    var += probs[static_cast<std::size_t>(i)] * dev * dev;
  }
  return std::sqrt(std::max(0.0, var / mass));
}

namespace {

struct TrailPoint {
  int h;
  int w;
  double std;
};

void follow(const HeadField& field, int h, int w, Direction d, int max_steps,
            std::vector<TrailPoint>& trail) {
  const int L = field.L();
  const int step = static_cast<int>(d);
  for (int n = 0; n < max_steps; ++n) {
    const int cls = argmax_class(field.categorical(h, w, d), L);
    if (cls == end_class(L)) break;
    const int nh = h + step;
    const int nw = w + (cls - L);
    // Leaving the image (including a clamped column) ends the trail.
    if (!field.contains(nh, nw)) break;
    trail.push_back({nh, nw, uncertainty_at(field, h, w, d)});
    h = nh;
    w = nw;
  }
}

}  // namespace

std::optional<DecodedLane> draw_lane(const HeadField& field, Seed seed, const DecodeConfig& cfg) {
  if (!field.contains(seed.h, seed.w)) {
    std::ostringstream oss;
    oss << "seed (" << seed.h << ", " << seed.w << ") outside " << field.height() << "x"
        << field.width() << " field";
    fail(ErrorCode::seed, oss.str());
  }
  std::vector<TrailPoint> up;
  std::vector<TrailPoint> down;
  follow(field, seed.h, seed.w, Direction::up, cfg.max_steps, up);
  follow(field, seed.h, seed.w, Direction::down, cfg.max_steps, down);
  if (up.size() + down.size() == 0) return std::nullopt;

  std::vector<LanePoint> pts;
  std::vector<double> stds;
  pts.reserve(up.size() + down.size() + 1);
  stds.reserve(pts.capacity());
  for (auto it = down.rbegin(); it != down.rend(); ++it) {
    pts.push_back({it->h, static_cast<double>(it->w)});
    stds.push_back(it->std);
  }
  pts.push_back({seed.h, static_cast<double>(seed.w)});
  stds.push_back(0.5 * (uncertainty_at(field, seed.h, seed.w, Direction::up) +
                        uncertainty_at(field, seed.h, seed.w, Direction::down)));
  for (const auto& p : up) {
    pts.push_back({p.h, static_cast<double>(p.w)});
    stds.push_back(p.std);
  }
  return DecodedLane{Polyline(std::move(pts)), std::move(stds), seed};
}

namespace {

bool overlaps(const Polyline& candidate, const Polyline& kept) {
  std::size_t close = 0;
  for (const auto& p : candidate.points()) {
    if (kept.covers_row(p.h) && std::abs(kept.w_at(p.h) - p.w) <= 2.0) ++close;
  }
  return 2 * close > candidate.size();
}

}  // namespace

std::vector<DecodedLane> decode_all(const HeadField& field, const DecodeConfig& cfg) {
  const auto proposals = cluster_candidates(field, cfg);
  std::vector<DecodedLane> lanes;
  auto try_seed = [&](const Seed& s) {
    auto lane = draw_lane(field, s, cfg);
    if (!lane) return;
    const bool duplicate = std::any_of(lanes.begin(), lanes.end(), [&](const DecodedLane& kept) {
      return overlaps(lane->polyline, kept.polyline);
    });
    if (!duplicate) lanes.push_back(std::move(*lane));
  };
  for (const Seed& s : proposals.seeds) try_seed(s);
  if (!cfg.seed_isolated) return lanes;
  // Lanes steeper than eps per row never form a dense cluster. Their pixels
  // seed a second pass unless a kept lane already passes through them.
  for (const Seed& s : proposals.isolated) {
    const bool covered = std::any_of(lanes.begin(), lanes.end(), [&](const DecodedLane& kept) {
      return kept.polyline.covers_row(s.h) && std::abs(kept.polyline.w_at(s.h) - s.w) <= 2.0;
    });
    if (!covered) try_seed(s);
  }
  return lanes;
}

AgreementReport& AgreementReport::operator+=(const AgreementReport& other) {
  for (std::size_t i = 0; i < hits.size(); ++i) hits[i] += other.hits[i];
  steps += other.steps;
  finalize();
  return *this;
}

void AgreementReport::finalize() {
  for (std::size_t i = 0; i < hits.size(); ++i) {
    fractions[i] = steps == 0 ? 0.0 : static_cast<double>(hits[i]) / static_cast<double>(steps);
  }
}

AgreementReport heuristic_agreement(const HeadField& field, const std::vector<DecodedLane>& lanes) {
  AgreementReport report;
  const int L = field.L();
  auto score_step = [&](int w, int nh, int nw) {
    // Heuristic choice: most likely lane pixel in the next row within +-L,
    // ties toward the smaller offset, then the negative one.
    int best = w;
    float best_p = -1.0f;
    for (int mag = 0; mag <= L; ++mag) {
      for (int off : {-mag, mag}) {
        if (mag == 0 && off > 0) continue;
        const int c = w + off;
        if (c < 0 || c >= field.width()) continue;
        const float p = field.lane_prob(nh, c);
        if (p > best_p) {
          best_p = p;
          best = c;
        }
      }
    }
    const int dist = std::abs(nw - best);
    ++report.steps;
    for (std::size_t i = 0; i < report.thresholds.size(); ++i) {
      if (dist < report.thresholds[i]) ++report.hits[i];
    }
  };
  for (const auto& lane : lanes) {
    const auto& pts = lane.polyline.points();
    const int seed_row = lane.seed.h;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const auto& lo = pts[i];
      const auto& hi = pts[i + 1];
      // Steps above the seed were drawn upward, below it downward.
      if (lo.h >= seed_row) {
        score_step(static_cast<int>(lo.w), hi.h, static_cast<int>(hi.w));
      } else {
        score_step(static_cast<int>(hi.w), lo.h, static_cast<int>(lo.w));
      }
    }
  }
  report.finalize();
  return report;
}

}  // namespace fastdraw
