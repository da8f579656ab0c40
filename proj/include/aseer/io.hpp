#pragma once

// Plain-text file formats:
//   dataset.csv  sensor_id,begin,length,flow,observed   (sorted by sensor_id, begin)
//   nodes.csv    sensor_id,lat,lon
//   reach.csv    src,dst
// Reals are written in shortest round-trip form, so save/load is lossless.

#include "aseer/data_model.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace aseer::io {

namespace fs = std::filesystem;

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                     : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view s, const std::string& context) {
  T value{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw DataError("bad number '" + std::string(s) + "' in " + context);
  return value;
}

inline std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

inline std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return in;
}

// Reads rows after the header, checking the header and field count.
template <class RowFn>
void read_csv(const fs::path& path, std::string_view header, RowFn&& on_row) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != header)
    throw DataError(path.string() + ": expected header '" + std::string(header) + "'");
  const std::size_t fields = split_csv_line(header).size();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cols = split_csv_line(line);
    const std::string ctx = path.filename().string() + ":" + std::to_string(line_no);
    if (cols.size() != fields) throw DataError(ctx + ": expected " + std::to_string(fields) + " fields");
    on_row(cols, ctx);
  }
}

inline constexpr std::string_view dataset_header = "sensor_id,begin,length,flow,observed";
inline constexpr std::string_view nodes_header = "sensor_id,lat,lon";
inline constexpr std::string_view reach_header = "src,dst";

inline void write_dataset(const Dataset& ds, const fs::path& path) {
  auto out = open_out(path);
  out << dataset_header << '\n';
  for (const auto& s : ds.series)
    for (const auto& m : s.measurements)
      out << s.sensor_id << ',' << m.begin << ',' << m.length << ',' << format_double(m.flow) << ','
          << (m.observed ? 1 : 0) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

inline Dataset read_dataset(const fs::path& path) {
  Dataset ds;
  read_csv(path, dataset_header, [&ds](const auto& c, const std::string& ctx) {
    const std::string id(c[0]);
    if (ds.series.empty() || ds.series.back().sensor_id != id) {
      if (!ds.series.empty() && id < ds.series.back().sensor_id)
        throw DataError(ctx + ": rows not sorted by sensor_id");
      ds.series.push_back(SensorSeries{id, {}});
    }
    Measurement m;
    m.begin = parse_number<Seconds>(c[1], ctx);
    m.length = parse_number<Seconds>(c[2], ctx);
    m.flow = parse_number<double>(c[3], ctx);
    const auto obs = parse_number<int>(c[4], ctx);
    if (obs != 0 && obs != 1) throw DataError(ctx + ": observed must be 0 or 1");
    m.observed = obs == 1;
    ds.series.back().measurements.push_back(m);
  });
  for (const auto& s : ds.series) {
    auto v = validate_series(s);
    if (!v.empty()) throw DataError(path.string() + ": sensor " + s.sensor_id + ": " + v.front());
  }
  return ds;
}

inline void write_nodes(const std::vector<SensorLocation>& nodes, const fs::path& path) {
  auto out = open_out(path);
  out << nodes_header << '\n';
  for (const auto& n : nodes)
    out << n.sensor_id << ',' << format_double(n.lat) << ',' << format_double(n.lon) << '\n';
}

inline std::vector<SensorLocation> read_nodes(const fs::path& path) {
  std::vector<SensorLocation> nodes;
  read_csv(path, nodes_header, [&nodes](const auto& c, const std::string& ctx) {
    nodes.push_back(
        SensorLocation{std::string(c[0]), parse_number<double>(c[1], ctx), parse_number<double>(c[2], ctx)});
  });
  return nodes;
}

inline void write_reach(const ReachabilitySet& reach, const fs::path& path) {
  auto out = open_out(path);
  out << reach_header << '\n';
  for (const auto& [a, b] : reach) out << a << ',' << b << '\n';
}

inline ReachabilitySet read_reach(const fs::path& path) {
  ReachabilitySet reach;
  read_csv(path, reach_header, [&reach](const auto& c, const std::string&) {
    reach.insert({std::string(c[0]), std::string(c[1])});
  });
  return reach;
}

// A dataset directory: dataset.csv, nodes.csv, reach.csv.
struct DataBundle {
  Dataset dataset;
  std::vector<SensorLocation> nodes;
  ReachabilitySet reachability;

  bool operator==(const DataBundle& o) const {
    if (!(dataset == o.dataset) || reachability != o.reachability || nodes.size() != o.nodes.size())
      return false;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].sensor_id != o.nodes[i].sensor_id || nodes[i].lat != o.nodes[i].lat ||
          nodes[i].lon != o.nodes[i].lon)
        return false;
    return true;
  }
};

inline void export_bundle(const DataBundle& b, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  write_dataset(b.dataset, dir / "dataset.csv");
  write_nodes(b.nodes, dir / "nodes.csv");
  write_reach(b.reachability, dir / "reach.csv");
}

inline DataBundle load_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("no dataset directory " + dir.string());
  DataBundle b{read_dataset(dir / "dataset.csv"), read_nodes(dir / "nodes.csv"),
               read_reach(dir / "reach.csv")};
  // graph node order follows the dataset's sensor order
  std::vector<SensorLocation> ordered;
  for (const auto& s : b.dataset.series) {
    auto it = std::find_if(b.nodes.begin(), b.nodes.end(),
                           [&s](const SensorLocation& n) { return n.sensor_id == s.sensor_id; });
    if (it == b.nodes.end()) throw DataError("sensor " + s.sensor_id + " missing from nodes.csv");
    ordered.push_back(*it);
  }
  if (b.nodes.size() != ordered.size()) throw DataError("nodes.csv lists sensors without data");
  b.nodes = std::move(ordered);
  return b;
}

inline nlohmann::json norm_to_json(const NormStats& s) {
  return {{"p_mean", s.p_mean}, {"p_std", s.p_std}, {"f_mean", s.f_mean},
          {"f_std", s.f_std},   {"u_mean", s.u_mean}, {"u_std", s.u_std}};
}

inline NormStats norm_from_json(const nlohmann::json& j) {
  NormStats s;
  s.p_mean = j.at("p_mean");
  s.p_std = j.at("p_std");
  s.f_mean = j.at("f_mean");
  s.f_std = j.at("f_std");
  s.u_mean = j.at("u_mean");
  s.u_std = j.at("u_std");
  return s;
}

inline nlohmann::json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void write_json(const nlohmann::json& j, const fs::path& path) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

}  // namespace aseer::io
