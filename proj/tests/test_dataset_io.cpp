#include <doctest.h>

#include <fstream>
#include <string>

#include "infgnn/dataset_io.hpp"
#include "infgnn/errors.hpp"
#include "infgnn/synth.hpp"
#include "support.hpp"

using namespace infgnn;
namespace fs = std::filesystem;

namespace {

DynamicGraphSequence small_sequence() {
  SynthConfig c;
  c.intervals = 2;
  c.initial_nodes = 8;
  c.growth = 2;
  c.steps = 30;
  c.features = 2;
  return generate_synthetic_drift(c, 5).sequence;
}

void check_same(const DynamicGraphSequence& a, const DynamicGraphSequence& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(a[t].graph.interval_index() == b[t].graph.interval_index());
    CHECK(a[t].graph.nodes() == b[t].graph.nodes());
    CHECK(a[t].graph.adjacency_matrix() == b[t].graph.adjacency_matrix());
    const auto va = a[t].features.values(), vb = b[t].features.values();
    CHECK(std::equal(va.begin(), va.end(), vb.begin(), vb.end()));
  }
}

void replace_in_file(const fs::path& p, const std::string& from, const std::string& to) {
  std::ifstream in(p);
  std::string s((std::istreambuf_iterator<char>(in)), {});
  in.close();
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  s.replace(pos, from.size(), to);
  std::ofstream(p) << s;
}

}  // namespace

TEST_CASE("csv round trip is exact") {
  const auto seq = small_sequence();
  const fs::path dir = testing::temp_dir("csv");
  write_dataset(seq, dir);
  check_same(seq, load_dataset(dir));
  fs::remove_all(dir);
}

TEST_CASE("binary round trip is exact") {
  const auto seq = small_sequence();
  const fs::path dir = testing::temp_dir("bin");
  write_dataset(seq, dir, FeatureFormat::binary);
  CHECK(fs::exists(dir / "t1" / "features.bin"));
  check_same(seq, load_dataset(dir));
  fs::remove_all(dir);
}

TEST_CASE("missing manifest is a format error") {
  const fs::path dir = testing::temp_dir("empty");
  CHECK_THROWS_AS(load_dataset(dir), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("asymmetric edge list names the interval") {
  const auto seq = small_sequence();
  const fs::path dir = testing::temp_dir("asym");
  write_dataset(seq, dir);
  const Edge e = seq[1].graph.edges().front();
  std::ofstream(dir / "t2" / "edges.csv", std::ios::app)
      << e.v.value() << ',' << e.u.value() << ",7.5\n";
  try {
    load_dataset(dir);
    FAIL("expected a validation error");
  } catch (const ValidationError& err) {
    CHECK(std::string(err.what()).find("interval 2") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("NaN feature is a validation error") {
  const auto seq = small_sequence();
  const fs::path dir = testing::temp_dir("nan");
  write_dataset(seq, dir);
  std::ifstream in(dir / "t1" / "features.csv");
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  in.close();
  const std::string nan_row = first.substr(0, first.rfind(',') + 1) + "nan";
  replace_in_file(dir / "t1" / "features.csv", first, nan_row);
  CHECK_THROWS_AS(load_dataset(dir), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("truncated features are a shape error naming the interval") {
  const auto seq = small_sequence();
  const fs::path dir = testing::temp_dir("short");
  write_dataset(seq, dir);
  replace_in_file(dir / "manifest.json", "\"M\": 30", "\"M\": 31");
  try {
    load_dataset(dir);
    FAIL("expected a validation error");
  } catch (const ValidationError& err) {
    CHECK(std::string(err.what()).find("interval 1") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("raw ids are remapped through the manifest id map") {
  const fs::path dir = testing::temp_dir("idmap");
  std::ofstream(dir / "manifest.json") << R"({"T": 2, "D": 1, "M": 2, "node_count": 3,
    "id_map": [400, 500, 600],
    "intervals": [{"index": 1, "nodes": [400, 500]}, {"index": 2, "nodes": [500, 600]}]})";
  fs::create_directories(dir / "t1");
  fs::create_directories(dir / "t2");
  std::ofstream(dir / "t1" / "edges.csv") << "src,dst,weight\n400,500,1\n";
  std::ofstream(dir / "t2" / "edges.csv") << "src,dst,weight\n500,600,2\n";
  std::ofstream(dir / "t1" / "features.csv")
      << "node,feature,step,value\n400,0,0,1\n400,0,1,2\n500,0,0,3\n500,0,1,4\n";
  std::ofstream(dir / "t2" / "features.csv")
      << "node,feature,step,value\n500,0,0,5\n500,0,1,6\n600,0,0,7\n600,0,1,8\n";
  const auto seq = load_dataset(dir);
  CHECK(seq[0].graph.nodes() == testing::ids({0, 1}));
  CHECK(seq[1].graph.weight(NodeId(1), NodeId(2)) == 2.0);
  CHECK(seq[1].features.at(seq[1].features.row_of(NodeId(2)), 0, 1) == 8.0);

  std::ofstream(dir / "t2" / "features.csv", std::ios::app) << "999,0,0,1\n";
  CHECK_THROWS_AS(load_dataset(dir), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("per-year directories load as a sequence") {
  const fs::path root = testing::temp_dir("pems");
  for (int y = 0; y < 2; ++y) {
    const fs::path d = root / ("year" + std::to_string(y));
    fs::create_directories(d);
    std::ofstream(d / "edges.csv") << "src,dst,weight\n10,11,1\n";
    std::ofstream f(d / "features.csv");
    f << "node,feature,step,value\n";
    for (int node : {10, 11}) {
      for (int s = 0; s < 3; ++s) f << node << ",0," << s << ',' << node + s << '\n';
    }
    if (y == 1) {
      for (int s = 0; s < 3; ++s) f << "12,0," << s << ",1\n";
    }
  }
  const auto seq = load_pems_years({root / "year0", root / "year1"});
  CHECK(seq.size() == 2);
  CHECK(seq[0].graph.size() == 2);
  CHECK(seq[1].graph.size() == 3);
  CHECK(node_churn(seq[0].graph, seq[1].graph).added == testing::ids({12}));
  fs::remove_all(root);
}

TEST_CASE("directory hash ignores run manifests") {
  const auto seq = small_sequence();
  const fs::path dir = testing::temp_dir("hash");
  write_dataset(seq, dir);
  const auto h = hash_directory(dir);
  std::ofstream(dir / "run_manifest.json") << "{}";
  CHECK(hash_directory(dir) == h);
  std::ofstream(dir / "extra.txt") << "x";
  CHECK(hash_directory(dir) != h);
  fs::remove_all(dir);
}
