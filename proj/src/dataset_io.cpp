#include "infgnn/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "infgnn/errors.hpp"

namespace infgnn {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    out.push_back(cell);
  }
  return out;
}

std::ifstream open_or_throw(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot open " + p.string());
  return in;
}

void expect_header(std::ifstream& in, const fs::path& p,
                   const std::vector<std::string>& expected) {
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != expected) {
    std::string want;
    for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
    throw FormatError(p.string() + ": expected header '" + want + "'");
  }
}

double parse_double(const std::string& s, const fs::path& p, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::out_of_range&) {
    return std::stod("inf");
  } catch (const std::exception&) {
    // stod rejects "nan"/"inf" spellings on some platforms
    if (s == "nan" || s == "NaN" || s == "-nan") return std::nan("");
    throw FormatError(p.string() + ":" + std::to_string(line_no) +
                      ": not a number: '" + s + "'");
  }
}

long long parse_int(const std::string& s, const fs::path& p, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size() || v < 0) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(p.string() + ":" + std::to_string(line_no) +
                      ": not a non-negative integer: '" + s + "'");
  }
}

using IdMap = std::unordered_map<long long, NodeId>;

NodeId map_id(const IdMap* ids, long long raw, const fs::path& p, std::size_t line_no) {
  if (!ids) return NodeId(static_cast<std::uint32_t>(raw));
  auto it = ids->find(raw);
  if (it == ids->end()) {
    throw ValidationError(p.string() + ":" + std::to_string(line_no) + ": node " +
                          std::to_string(raw) + " is not declared in the manifest");
  }
  return it->second;
}

std::vector<Edge> read_edges(const fs::path& p, const IdMap* ids) {
  auto in = open_or_throw(p);
  expect_header(in, p, {"src", "dst", "weight"});
  std::vector<Edge> edges;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 3) {
      throw FormatError(p.string() + ":" + std::to_string(line_no) + ": expected 3 columns");
    }
    edges.push_back({map_id(ids, parse_int(cells[0], p, line_no), p, line_no),
                     map_id(ids, parse_int(cells[1], p, line_no), p, line_no),
                     parse_double(cells[2], p, line_no)});
  }
  return edges;
}

struct RawFeatures {
  std::vector<NodeId> nodes;  // as encountered, for adapters without a manifest
  std::vector<std::tuple<NodeId, std::size_t, std::size_t, double>> rows;
};

RawFeatures read_feature_rows(const fs::path& p, const IdMap* ids) {
  auto in = open_or_throw(p);
  expect_header(in, p, {"node", "feature", "step", "value"});
  RawFeatures out;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) {
      throw FormatError(p.string() + ":" + std::to_string(line_no) + ": expected 4 columns");
    }
    const NodeId id = map_id(ids, parse_int(cells[0], p, line_no), p, line_no);
    out.nodes.push_back(id);
    out.rows.emplace_back(id, static_cast<std::size_t>(parse_int(cells[1], p, line_no)),
                          static_cast<std::size_t>(parse_int(cells[2], p, line_no)),
                          parse_double(cells[3], p, line_no));
  }
  return out;
}

FeatureTensor assemble_features(const RawFeatures& raw, const NodeSet& nodes,
                                std::size_t features, std::size_t steps,
                                const std::string& where) {
  FeatureTensor x(nodes, features, steps);
  std::vector<char> seen(nodes.size() * features * steps, 0);
  for (const auto& [id, f, s, v] : raw.rows) {
    if (!std::binary_search(nodes.begin(), nodes.end(), id)) {
      throw ValidationError(where + ": feature row for node " + std::to_string(id.value()) +
                            " which is not in the interval");
    }
    if (f >= features || s >= steps) {
      throw ValidationError(where + ": feature/step index out of the declared shape");
    }
    const std::size_t row = x.row_of(id);
    x.at(row, f, s) = v;
    seen[(row * features + f) * steps + s] = 1;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw ValidationError(where + ": feature tensor is incomplete (shape mismatch)");
  }
  return x;
}

FeatureTensor read_binary_features(const fs::path& dir, const NodeSet& nodes,
                                   std::size_t features, std::size_t steps,
                                   const IdMap* ids, const std::string& where) {
  const fs::path sidecar = dir / "features.json";
  auto js_in = open_or_throw(sidecar);
  json meta;
  try {
    meta = json::parse(js_in);
  } catch (const json::exception& e) {
    throw FormatError(sidecar.string() + ": " + e.what());
  }
  const auto shape = meta.at("shape").get<std::vector<std::size_t>>();
  if (meta.value("order", std::string("row-major")) != "row-major" ||
      meta.value("dtype", std::string("f64le")) != "f64le") {
    throw FormatError(sidecar.string() + ": only row-major f64le payloads are supported");
  }
  if (shape.size() != 3 || shape[0] != nodes.size() || shape[1] != features ||
      shape[2] != steps) {
    throw ValidationError(where + ": binary feature shape does not match the interval");
  }
  std::vector<NodeId> order;
  for (long long raw : meta.at("nodes").get<std::vector<long long>>()) {
    order.push_back(map_id(ids, raw, sidecar, 0));
  }
  if (order != nodes) {
    throw ValidationError(where + ": binary feature node order differs from the manifest");
  }
  const fs::path payload = dir / "features.bin";
  auto in = open_or_throw(payload);
  const std::size_t count = shape[0] * shape[1] * shape[2];
  std::vector<double> values(count);
  std::vector<unsigned char> bytes(count * 8);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size() || in.peek() != EOF) {
    throw FormatError(payload.string() + ": payload length does not match the declared shape");
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t u = 0;
    for (int b = 7; b >= 0; --b) u = (u << 8) | bytes[i * 8 + b];
    values[i] = std::bit_cast<double>(u);
  }
  return FeatureTensor(nodes, features, steps, std::move(values));
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

DynamicGraphSequence load_dataset(const fs::path& root) {
  const fs::path manifest_path = root / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw FormatError("missing manifest: " + manifest_path.string());
  }
  json manifest;
  try {
    auto in = open_or_throw(manifest_path);
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }

  std::size_t features = 0, steps = 0, interval_count = 0;
  json intervals;
  IdMap id_map;
  try {
    interval_count = manifest.at("T").get<std::size_t>();
    features = manifest.at("D").get<std::size_t>();
    steps = manifest.at("M").get<std::size_t>();
    intervals = manifest.at("intervals");
    if (manifest.contains("id_map")) {
      const auto raw = manifest.at("id_map").get<std::vector<long long>>();
      for (std::size_t i = 0; i < raw.size(); ++i) {
        id_map.emplace(raw[i], NodeId(static_cast<std::uint32_t>(i)));
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  const IdMap* ids = manifest.contains("id_map") ? &id_map : nullptr;
  if (intervals.size() != interval_count) {
    throw FormatError(manifest_path.string() + ": T does not match the interval list");
  }
  const std::size_t global_count = manifest.value("node_count", std::size_t{0});

  std::vector<IntervalData> data;
  for (const json& entry : intervals) {
    const int index = entry.at("index").get<int>();
    const std::string where = "interval " + std::to_string(index);
    std::vector<NodeId> nodes;
    for (long long raw : entry.at("nodes").get<std::vector<long long>>()) {
      const NodeId id = map_id(ids, raw, manifest_path, 0);
      if (global_count > 0 && id.value() >= global_count) {
        throw ValidationError(where + ": node id outside the global id space");
      }
      nodes.push_back(id);
    }
    const fs::path dir = root / ("t" + std::to_string(index));
    IntervalGraph graph(index, nodes, read_edges(dir / "edges.csv", ids));
    FeatureTensor x;
    if (fs::exists(dir / "features.csv")) {
      x = assemble_features(read_feature_rows(dir / "features.csv", ids), graph.nodes(),
                            features, steps, where);
    } else if (fs::exists(dir / "features.bin")) {
      x = read_binary_features(dir, graph.nodes(), features, steps, ids, where);
    } else {
      throw FormatError(dir.string() + ": no features.csv or features.bin");
    }
    data.push_back({std::move(graph), std::move(x)});
  }
  return DynamicGraphSequence(std::move(data));
}

void write_dataset(const DynamicGraphSequence& seq, const fs::path& root,
                   FeatureFormat format) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw FormatError("cannot create " + root.string() + ": " + ec.message());

  std::uint32_t max_id = 0;
  json intervals = json::array();
  for (const IntervalData& d : seq.intervals()) {
    std::vector<std::uint32_t> ids;
    for (NodeId id : d.graph.nodes()) {
      ids.push_back(id.value());
      max_id = std::max(max_id, id.value());
    }
    intervals.push_back({{"index", d.graph.interval_index()}, {"nodes", ids}});
  }
  json manifest = {{"T", seq.size()},
                   {"D", seq.features()},
                   {"M", seq.steps()},
                   {"node_count", seq.size() ? max_id + 1 : 0},
                   {"intervals", intervals}};
  {
    std::ofstream out(root / "manifest.json", std::ios::binary);
    if (!out) throw FormatError("cannot write " + (root / "manifest.json").string());
    out << manifest.dump(2) << "\n";
  }

  for (const IntervalData& d : seq.intervals()) {
    const fs::path dir = root / ("t" + std::to_string(d.graph.interval_index()));
    fs::create_directories(dir, ec);
    if (ec) throw FormatError("cannot create " + dir.string() + ": " + ec.message());
    std::ofstream edges(dir / "edges.csv", std::ios::binary);
    if (!edges) throw FormatError("cannot write " + (dir / "edges.csv").string());
    edges << "src,dst,weight\n";
    for (const Edge& e : d.graph.edges()) {
      edges << e.u.value() << ',' << e.v.value() << ',' << format_double(e.weight) << '\n';
    }
    const FeatureTensor& x = d.features;
    if (format == FeatureFormat::csv) {
      std::ofstream out(dir / "features.csv", std::ios::binary);
      if (!out) throw FormatError("cannot write " + (dir / "features.csv").string());
      out << "node,feature,step,value\n";
      for (std::size_t n = 0; n < x.node_count(); ++n) {
        for (std::size_t f = 0; f < x.features(); ++f) {
          for (std::size_t s = 0; s < x.steps(); ++s) {
            out << x.node_order()[n].value() << ',' << f << ',' << s << ','
                << format_double(x.at(n, f, s)) << '\n';
          }
        }
      }
    } else {
      std::vector<std::uint32_t> ids;
      for (NodeId id : x.node_order()) ids.push_back(id.value());
      json meta = {{"shape", {x.node_count(), x.features(), x.steps()}},
                   {"order", "row-major"},
                   {"dtype", "f64le"},
                   {"nodes", ids}};
      std::ofstream js(dir / "features.json", std::ios::binary);
      js << meta.dump(2) << "\n";
      std::ofstream out(dir / "features.bin", std::ios::binary);
      if (!out) throw FormatError("cannot write " + (dir / "features.bin").string());
      for (double v : x.values()) {
        std::uint64_t u = std::bit_cast<std::uint64_t>(v);
        unsigned char bytes[8];
        for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(u >> (8 * b));
        out.write(reinterpret_cast<const char*>(bytes), 8);
      }
    }
  }
}

DynamicGraphSequence load_pems_years(const std::vector<fs::path>& year_dirs) {
  std::vector<IntervalData> data;
  int index = 1;
  for (const fs::path& dir : year_dirs) {
    const std::string where = "interval " + std::to_string(index);
    RawFeatures raw = read_feature_rows(dir / "features.csv", nullptr);
    NodeSet nodes = make_node_set(raw.nodes);
    std::size_t features = 0, steps = 0;
    for (const auto& [id, f, s, v] : raw.rows) {
      features = std::max(features, f + 1);
      steps = std::max(steps, s + 1);
    }
    IntervalGraph graph(index, nodes, read_edges(dir / "edges.csv", nullptr));
    FeatureTensor x = assemble_features(raw, graph.nodes(), features, steps, where);
    data.push_back({std::move(graph), std::move(x)});
    ++index;
  }
  return DynamicGraphSequence(std::move(data));
}

std::uint64_t hash_directory(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().filename().string().rfind("run_manifest", 0) == 0) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ULL;
  };
  for (const fs::path& f : files) {
    for (char c : fs::relative(f, root).generic_string()) mix(static_cast<unsigned char>(c));
    std::ifstream in(f, std::ios::binary);
    char buf[1 << 14];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
      for (std::streamsize i = 0; i < in.gcount(); ++i) mix(static_cast<unsigned char>(buf[i]));
    }
  }
  return h;
}

}  // namespace infgnn
