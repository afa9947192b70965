#include "netexp/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "netexp/error.hpp"
#include "netexp/rng.hpp"

namespace netexp {

Graph Graph::from_edges(
    std::size_t n,
    std::span<const std::pair<std::uint32_t, std::uint32_t>> edges) {
  std::vector<std::vector<std::uint32_t>> adj(n);
  for (const auto& [a, b] : edges) {
    if (a >= n || b >= n) {
      throw_validation("edge (" + std::to_string(a) + "," + std::to_string(b) +
                       ") references a unit outside [0," + std::to_string(n) + ")");
    }
    if (a == b) {
      throw_validation("self-loop at unit " + std::to_string(a));
    }
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  Graph g;
  g.offsets_.resize(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& nb = adj[i];
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    g.offsets_[i + 1] = g.offsets_[i] + nb.size();
  }
  g.adjacency_.reserve(g.offsets_[n]);
  for (std::size_t i = 0; i < n; ++i) {
    g.adjacency_.insert(g.adjacency_.end(), adj[i].begin(), adj[i].end());
  }
  return g;
}

Graph Graph::edgeless(std::size_t n) {
  Graph g;
  g.offsets_.resize(n + 1, 0);
  return g;
}

std::size_t Graph::min_degree() const {
  std::size_t m = SIZE_MAX;
  for (std::size_t i = 0; i < size(); ++i) {
    m = std::min(m, degree(static_cast<std::uint32_t>(i)));
  }
  return size() == 0 ? 0 : m;
}

std::vector<std::int32_t> bfs_distances(const Graph& g, std::uint32_t source,
                                        std::int32_t cap) {
  const std::size_t n = g.size();
  if (source >= n) {
    throw_validation("bfs source " + std::to_string(source) + " out of range");
  }
  if (cap < 0) throw_validation("bfs cap must be >= 0");
  std::vector<std::int32_t> dist(n, kUnreachable);
  std::vector<std::uint32_t> frontier{source}, next;
  dist[source] = 0;
  for (std::int32_t d = 0; d < cap && !frontier.empty(); ++d) {
    next.clear();
    for (std::uint32_t u : frontier) {
      for (std::uint32_t v : g.neighbors(u)) {
        if (dist[v] == kUnreachable) {
          dist[v] = d + 1;
          next.push_back(v);
        }
      }
    }
    frontier.swap(next);
  }
  return dist;
}

namespace {

// Capped BFS reusing caller-local scratch; appends reached units (including
// the source at distance 0) to `out`.
void bfs_collect(const Graph& g, std::uint32_t source, std::int32_t max_dist,
                 std::vector<std::int32_t>& dist_scratch,
                 std::vector<std::uint32_t>& touched,
                 std::vector<std::uint32_t>& out) {
  touched.clear();
  dist_scratch[source] = 0;
  touched.push_back(source);
  out.push_back(source);
  std::size_t frontier_begin = 0;
  for (std::int32_t d = 0; d < max_dist; ++d) {
    const std::size_t frontier_end = touched.size();
    if (frontier_begin == frontier_end) break;
    for (std::size_t k = frontier_begin; k < frontier_end; ++k) {
      for (std::uint32_t v : g.neighbors(touched[k])) {
        if (dist_scratch[v] < 0) {
          dist_scratch[v] = d + 1;
          touched.push_back(v);
          out.push_back(v);
        }
      }
    }
    frontier_begin = frontier_end;
  }
  for (std::uint32_t u : touched) dist_scratch[u] = -1;
}

// max reach for a mode/bandwidth combination; -1 encodes "empty".
std::int32_t max_reach(std::int32_t bandwidth, BandwidthMode mode) {
  if (bandwidth < 0) throw_validation("bandwidth must be >= 0");
  return mode == BandwidthMode::inclusive ? bandwidth : bandwidth - 1;
}

}  // namespace

void for_each_bandwidth_pair(
    const Graph& g, std::int32_t bandwidth, BandwidthMode mode,
    const std::function<void(std::uint32_t, std::uint32_t)>& fn) {
  const std::int32_t reach = max_reach(bandwidth, mode);
  if (reach < 0) return;
  const std::size_t n = g.size();
  std::vector<std::int32_t> dist(n, -1);
  std::vector<std::uint32_t> touched, ball;
  for (std::uint32_t i = 0; i < n; ++i) {
    ball.clear();
    bfs_collect(g, i, reach, dist, touched, ball);
    for (std::uint32_t j : ball) fn(i, j);
  }
}

BandwidthNeighborhoods::BandwidthNeighborhoods(const Graph& g,
                                               std::int32_t bandwidth,
                                               BandwidthMode mode)
    : bandwidth_(bandwidth), mode_(mode) {
  const std::int32_t reach = max_reach(bandwidth, mode);
  const std::size_t n = g.size();
  offsets_.assign(n + 1, 0);
  if (reach < 0) return;
  std::vector<std::int32_t> dist(n, -1);
  std::vector<std::uint32_t> touched, ball;
  for (std::uint32_t i = 0; i < n; ++i) {
    ball.clear();
    bfs_collect(g, i, reach, dist, touched, ball);
    std::sort(ball.begin(), ball.end());
    targets_.insert(targets_.end(), ball.begin(), ball.end());
    offsets_[i + 1] = targets_.size();
  }
}

NeighborhoodStats neighborhood_stats(const Graph& g, std::int32_t max_s,
                                     std::span<const int> moment_orders) {
  if (max_s < 0) throw_validation("neighborhood_stats: max_s must be >= 0");
  const std::size_t n = g.size();
  NeighborhoodStats stats;
  stats.boundary_avg.assign(max_s + 1, 0.0);
  stats.moment_orders.assign(moment_orders.begin(), moment_orders.end());
  stats.moments.assign(moment_orders.size(),
                       std::vector<double>(max_s + 1, 0.0));
  if (n == 0) return stats;

  std::vector<std::int32_t> dist(n, -1);
  std::vector<std::uint32_t> order;
  std::vector<std::size_t> boundary_count(max_s + 1);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::fill(boundary_count.begin(), boundary_count.end(), 0);
    order.assign(1, i);
    dist[i] = 0;
    std::size_t begin = 0;
    for (std::int32_t s = 0; s < max_s; ++s) {
      const std::size_t end = order.size();
      if (begin == end) break;
      for (std::size_t k = begin; k < end; ++k) {
        for (std::uint32_t v : g.neighbors(order[k])) {
          if (dist[v] < 0) {
            dist[v] = s + 1;
            order.push_back(v);
          }
        }
      }
      begin = end;
    }
    for (std::uint32_t u : order) boundary_count[dist[u]] += 1;
    std::size_t cum = 0;
    for (std::int32_t s = 0; s <= max_s; ++s) {
      stats.boundary_avg[s] += static_cast<double>(boundary_count[s]);
      cum += boundary_count[s];
      for (std::size_t k = 0; k < moment_orders.size(); ++k) {
        stats.moments[k][s] +=
            std::pow(static_cast<double>(cum), moment_orders[k]);
      }
    }
    for (std::uint32_t u : order) dist[u] = -1;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (auto& v : stats.boundary_avg) v *= inv_n;
  for (auto& row : stats.moments) {
    for (auto& v : row) v *= inv_n;
  }
  return stats;
}

RggResult rgg_generate(std::size_t n, double density_factor,
                       std::uint64_t seed) {
  if (n < 2) throw_validation("rgg_generate: n must be >= 2");
  if (!(density_factor > 0.0)) {
    throw_validation("rgg_generate: density_factor must be > 0");
  }
  Rng rng(seed);
  std::vector<std::array<double, 2>> pts(n);
  for (auto& p : pts) {
    p[0] = rng.uniform();
    p[1] = rng.uniform();
  }
  const double radius =
      std::sqrt(density_factor / (M_PI * static_cast<double>(n)));
  const double r2 = radius * radius;

  // Cell grid of side >= radius: candidate pairs live in the 3x3 block.
  // Cell count capped near sqrt(n) so memory stays O(n) for tiny radii.
  const std::size_t cells = std::max<std::size_t>(
      1, std::min(static_cast<std::size_t>(1.0 / radius),
                  static_cast<std::size_t>(std::sqrt(static_cast<double>(n))) +
                      1));
  std::vector<std::vector<std::uint32_t>> grid(cells * cells);
  auto cell_of = [&](double x) {
    auto c = static_cast<std::size_t>(x * static_cast<double>(cells));
    return std::min(c, cells - 1);
  };
  for (std::uint32_t i = 0; i < n; ++i) {
    grid[cell_of(pts[i][0]) * cells + cell_of(pts[i][1])].push_back(i);
  }

  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t cx = cell_of(pts[i][0]);
    const std::size_t cy = cell_of(pts[i][1]);
    for (std::size_t gx = (cx == 0 ? 0 : cx - 1);
         gx <= std::min(cells - 1, cx + 1); ++gx) {
      for (std::size_t gy = (cy == 0 ? 0 : cy - 1);
           gy <= std::min(cells - 1, cy + 1); ++gy) {
        for (std::uint32_t j : grid[gx * cells + gy]) {
          if (j <= i) continue;
          const double dx = pts[i][0] - pts[j][0];
          const double dy = pts[i][1] - pts[j][1];
          if (dx * dx + dy * dy <= r2) edges.emplace_back(i, j);
        }
      }
    }
  }

  std::vector<std::size_t> deg(n, 0);
  for (const auto& [a, b] : edges) {
    deg[a]++;
    deg[b]++;
  }
  RggResult out;
  std::vector<std::uint32_t> remap(n, UINT32_MAX);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (deg[i] > 0) {
      remap[i] = static_cast<std::uint32_t>(out.kept_original.size());
      out.kept_original.push_back(i);
      out.coords.push_back(pts[i]);
    }
  }
  out.dropped_count = n - out.kept_original.size();
  if (out.kept_original.empty()) {
    throw_numerical("rgg_generate: every unit is isolated at density_factor " +
                    std::to_string(density_factor));
  }
  for (auto& [a, b] : edges) {
    a = remap[a];
    b = remap[b];
  }
  out.graph = Graph::from_edges(out.kept_original.size(), edges);
  return out;
}

std::vector<double> row_normalized_apply(const Graph& g,
                                         std::span<const double> v) {
  const std::size_t n = g.size();
  if (v.size() != n) {
    throw_validation("row_normalized_apply: vector length mismatch");
  }
  std::vector<double> out(n, 0.0);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto nb = g.neighbors(i);
    if (nb.empty()) {
      throw_validation("row_normalized_apply: unit " + std::to_string(i) +
                       " is isolated");
    }
    double s = 0.0;
    for (std::uint32_t j : nb) s += v[j];
    out[i] = s / static_cast<double>(nb.size());
  }
  return out;
}

}  // namespace netexp
