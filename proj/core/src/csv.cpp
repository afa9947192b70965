#include "netexp/csv.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>

#include "netexp/error.hpp"

namespace netexp {

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

bool parse_i64(const std::string& s, std::int64_t& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(*(e - 1)))) --e;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

bool parse_f64(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(*(e - 1)))) --e;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

}  // namespace

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

EdgeList read_edge_csv(const std::string& path) {
  const auto lines = read_lines(path);
  EdgeList out;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto fields = split_csv_line(lines[ln]);
    if (fields.size() < 2) {
      throw_io(path + ":" + std::to_string(ln + 1) +
               ": expected two columns src,dst");
    }
    std::int64_t a, b;
    if (!parse_i64(fields[0], a) || !parse_i64(fields[1], b)) {
      if (ln == 0) continue;  // header row
      throw_io(path + ":" + std::to_string(ln + 1) +
               ": non-integer edge endpoints '" + lines[ln] + "'");
    }
    if (a < 0 || b < 0) {
      throw_io(path + ":" + std::to_string(ln + 1) + ": negative unit id");
    }
    out.edges.emplace_back(static_cast<std::uint32_t>(a),
                           static_cast<std::uint32_t>(b));
    out.max_id = std::max({out.max_id, static_cast<std::uint32_t>(a),
                           static_cast<std::uint32_t>(b)});
  }
  return out;
}

bool NodeTable::has_column(const std::string& name) const {
  return std::find(column_names.begin(), column_names.end(), name) !=
         column_names.end();
}

const std::vector<double>& NodeTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < column_names.size(); ++k) {
    if (column_names[k] == name) return columns[k];
  }
  throw_io("node table has no column '" + name + "'");
}

NodeTable read_node_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw_io(path + ": empty node table");
  const auto header = split_csv_line(lines[0]);
  NodeTable t;
  int id_col = -1;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == "id") {
      id_col = static_cast<int>(k);
    } else {
      t.column_names.push_back(header[k]);
    }
  }
  if (id_col < 0) throw_io(path + ": header must contain an 'id' column");
  t.columns.resize(t.column_names.size());

  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const auto fields = split_csv_line(lines[ln]);
    if (fields.size() != header.size()) {
      throw_io(path + ":" + std::to_string(ln + 1) + ": expected " +
               std::to_string(header.size()) + " fields");
    }
    std::size_t cidx = 0;
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (static_cast<int>(k) == id_col) {
        std::int64_t id;
        if (!parse_i64(fields[k], id)) {
          throw_io(path + ":" + std::to_string(ln + 1) + ": bad id '" +
                   fields[k] + "'");
        }
        t.ids.push_back(id);
      } else {
        double v;
        if (!parse_f64(fields[k], v)) {
          throw_io(path + ":" + std::to_string(ln + 1) + ": column '" +
                   header[k] + "' is not numeric: '" + fields[k] + "'");
        }
        t.columns[cidx++].push_back(v);
      }
    }
  }
  // unique ids
  std::vector<std::int64_t> sorted = t.ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw_io(path + ": duplicate unit ids");
  }
  return t;
}

CoordTable read_coord_csv(const std::string& path) {
  const auto lines = read_lines(path);
  CoordTable t;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto fields = split_csv_line(lines[ln]);
    if (fields.size() < 3) {
      throw_io(path + ":" + std::to_string(ln + 1) + ": expected id,x,y");
    }
    std::int64_t id;
    double x, y;
    if (!parse_i64(fields[0], id)) {
      if (ln == 0) continue;  // header
      throw_io(path + ":" + std::to_string(ln + 1) + ": bad id");
    }
    if (!parse_f64(fields[1], x) || !parse_f64(fields[2], y)) {
      throw_io(path + ":" + std::to_string(ln + 1) + ": bad coordinates");
    }
    t.ids.push_back(id);
    t.coords.push_back({x, y});
  }
  return t;
}

}  // namespace netexp
