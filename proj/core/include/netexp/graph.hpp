#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace netexp {

inline constexpr std::int32_t kUnreachable = INT32_MAX;

// Undirected simple graph, CSR adjacency with sorted neighbor lists.
// Immutable after construction; all queries are read-only.
class Graph {
 public:
  Graph() = default;

  // Builds from an undirected edge list. Duplicate edges and both
  // orientations are tolerated and deduplicated; self-loops rejected.
  static Graph from_edges(
      std::size_t n, std::span<const std::pair<std::uint32_t, std::uint32_t>> edges);

  static Graph edgeless(std::size_t n);

  std::size_t size() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t edge_count() const { return adjacency_.size() / 2; }

  std::span<const std::uint32_t> neighbors(std::uint32_t i) const {
    return {adjacency_.data() + offsets_[i], adjacency_.data() + offsets_[i + 1]};
  }
  std::size_t degree(std::uint32_t i) const {
    return offsets_[i + 1] - offsets_[i];
  }
  std::size_t min_degree() const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> adjacency_;
};

// Shortest path lengths from source, capped at `cap` hops; unreachable
// (or beyond cap) entries are kUnreachable.
std::vector<std::int32_t> bfs_distances(const Graph& g, std::uint32_t source,
                                        std::int32_t cap);

enum class BandwidthMode { strict, inclusive };

// Visits every ordered pair (i, j) with B_ij = 1, i.e. path distance
// strictly below (strict) or at most (inclusive) the bandwidth. Includes
// i == j whenever the mode admits distance 0.
void for_each_bandwidth_pair(
    const Graph& g, std::int32_t bandwidth, BandwidthMode mode,
    const std::function<void(std::uint32_t, std::uint32_t)>& fn);

// Materialized bandwidth neighborhoods: for each i, the sorted list of j
// with B_ij = 1. Built once per study and shared by all HAC evaluations.
class BandwidthNeighborhoods {
 public:
  BandwidthNeighborhoods(const Graph& g, std::int32_t bandwidth,
                         BandwidthMode mode = BandwidthMode::inclusive);

  std::size_t size() const { return offsets_.size() - 1; }
  std::span<const std::uint32_t> of(std::uint32_t i) const {
    return {targets_.data() + offsets_[i], targets_.data() + offsets_[i + 1]};
  }
  std::size_t pair_count() const { return targets_.size(); }
  std::int32_t bandwidth() const { return bandwidth_; }
  BandwidthMode mode() const { return mode_; }

 private:
  std::int32_t bandwidth_;
  BandwidthMode mode_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> targets_;
};

struct NeighborhoodStats {
  // boundary_avg[s] = average count of units at distance exactly s.
  std::vector<double> boundary_avg;
  std::vector<int> moment_orders;
  // moments[k_index][s] = average of |closed s-neighborhood|^k.
  std::vector<std::vector<double>> moments;
};

NeighborhoodStats neighborhood_stats(const Graph& g, std::int32_t max_s,
                                     std::span<const int> moment_orders);

struct RggResult {
  Graph graph;
  // Coordinates of retained units, aligned with the new indexing.
  std::vector<std::array<double, 2>> coords;
  // kept_original[i] = index of new unit i in the unpruned draw.
  std::vector<std::uint32_t> kept_original;
  std::size_t dropped_count = 0;
};

// Random geometric graph on the unit square: connect pairs within radius
// sqrt(density_factor / (pi * n)), then drop isolated units and reindex
// densely. Errors when every unit is isolated.
RggResult rgg_generate(std::size_t n, double density_factor,
                       std::uint64_t seed);

// (O v)_i with O the row-normalized adjacency: the neighbor average.
// Errors on isolated units.
std::vector<double> row_normalized_apply(const Graph& g,
                                         std::span<const double> v);

}  // namespace netexp
