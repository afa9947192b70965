#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace netexp {

struct EdgeList {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::uint32_t max_id = 0;
};

// Two integer columns `src,dst`; header row optional; duplicates and both
// orientations tolerated (deduplication happens in Graph::from_edges).
EdgeList read_edge_csv(const std::string& path);

// Columnar node table; header row required, `id` column required, every
// other column parsed as numeric.
struct NodeTable {
  std::vector<std::int64_t> ids;
  std::vector<std::string> column_names;
  std::vector<std::vector<double>> columns;

  std::size_t size() const { return ids.size(); }
  bool has_column(const std::string& name) const;
  const std::vector<double>& column(const std::string& name) const;
};

NodeTable read_node_csv(const std::string& path);

// id,x,y rows; header optional.
struct CoordTable {
  std::vector<std::int64_t> ids;
  std::vector<std::array<double, 2>> coords;
};
CoordTable read_coord_csv(const std::string& path);

// RFC-4180-style escaping: quotes the field when it contains a comma,
// quote, or newline.
std::string csv_escape(const std::string& field);
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace netexp
