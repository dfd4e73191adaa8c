#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "l2x/generators.hpp"
#include "l2x/graph_json.hpp"
#include "l2x/tu_parser.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("l2x_test_" + std::to_string(Catch::rngSeed()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

}  // namespace

TEST_CASE("TU parser on a hand-written fixture") {
  TempDir dir;
  // graph 1: 2-path on nodes 1..3 (label 0); graph 2: triangle on 4..6 (label 1)
  write_file(dir.path / "toy_A.txt", "1, 2\n2, 1\n2, 3\n3, 2\n4, 5\n5, 4\n5, 6\n6, 5\n4, 6\n6, 4\n");
  write_file(dir.path / "toy_graph_indicator.txt", "1\n1\n1\n2\n2\n2\n");
  write_file(dir.path / "toy_graph_labels.txt", "0\n1\n");

  auto ds = l2x::parse_tu_dataset(dir.path, "toy");
  REQUIRE(ds.size() == 2);
  CHECK(ds.graphs[0].num_nodes == 3);
  CHECK(ds.graphs[0].num_edges() == 2);
  CHECK(ds.graphs[0].label == 0);
  CHECK(ds.graphs[1].num_nodes == 3);
  CHECK(ds.graphs[1].num_edges() == 3);
  CHECK(ds.graphs[1].label == 1);
  CHECK(ds.num_classes == 2);
  CHECK(ds.feature_dim == 1);  // constant feature when node labels absent

  int total_nodes = 0;
  for (const auto& g : ds.graphs) total_nodes += g.num_nodes;
  CHECK(total_nodes == 6);  // indicator file length
}

TEST_CASE("TU parser degenerate and error cases") {
  TempDir dir;

  SECTION("empty edge file with one single-node graph") {
    write_file(dir.path / "tiny_A.txt", "");
    write_file(dir.path / "tiny_graph_indicator.txt", "1\n");
    write_file(dir.path / "tiny_graph_labels.txt", "1\n");
    auto ds = l2x::parse_tu_dataset(dir.path, "tiny");
    REQUIRE(ds.size() == 1);
    CHECK(ds.graphs[0].num_nodes == 1);
    CHECK(ds.graphs[0].num_edges() == 0);
  }

  SECTION("missing file names the file") {
    write_file(dir.path / "gone_A.txt", "");
    CHECK_THROWS_MATCHES(l2x::parse_tu_dataset(dir.path, "gone"), l2x::InputError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("gone_graph_indicator.txt")));
  }

  SECTION("cross-graph edge reports the line number") {
    write_file(dir.path / "bad_A.txt", "1, 2\n2, 3\n");
    write_file(dir.path / "bad_graph_indicator.txt", "1\n1\n2\n");
    write_file(dir.path / "bad_graph_labels.txt", "0\n1\n");
    CHECK_THROWS_MATCHES(
        l2x::parse_tu_dataset(dir.path, "bad"), l2x::FormatError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("bad_A.txt:2")));
  }

  SECTION("node labels become one-hot features") {
    write_file(dir.path / "lab_A.txt", "1, 2\n2, 1\n");
    write_file(dir.path / "lab_graph_indicator.txt", "1\n1\n");
    write_file(dir.path / "lab_graph_labels.txt", "0\n");
    write_file(dir.path / "lab_node_labels.txt", "7\n9\n");
    auto ds = l2x::parse_tu_dataset(dir.path, "lab");
    CHECK(ds.feature_dim == 2);
    CHECK(ds.graphs[0].feature(0, 0) == 1.0);
    CHECK(ds.graphs[0].feature(0, 1) == 0.0);
    CHECK(ds.graphs[0].feature(1, 1) == 1.0);
  }
}

TEST_CASE("TU parser ingests MUTAG when files are present") {
  const char* env_root = std::getenv("L2X_DATA_DIR");
  fs::path root = env_root ? fs::path(env_root) : fs::path("data");
  if (!fs::exists(root / "MUTAG" / "MUTAG_A.txt") && !fs::exists(root / "MUTAG_A.txt")) {
    SKIP("MUTAG files not available");
  }
  auto ds = l2x::parse_tu_dataset(root, "MUTAG");
  CHECK(ds.size() == 188);
  double nodes = 0, edges = 0;
  for (const auto& g : ds.graphs) {
    nodes += g.num_nodes;
    edges += g.num_edges();
  }
  CHECK(nodes / ds.size() == Catch::Approx(17.93).margin(0.01));
  CHECK(edges / ds.size() == Catch::Approx(19.79).margin(0.01));
}

TEST_CASE("ba2motifs generator") {
  auto ds = l2x::gen_ba2motifs(100, 7);
  REQUIRE(ds.size() == 100);

  double directed_edges = 0;
  for (const auto& g : ds.graphs) {
    CHECK(g.num_nodes == 25);
    CHECK(g.is_connected());
    directed_edges += 2.0 * g.num_edges();
    const int undirected = g.num_edges();
    REQUIRE(g.truth_mask.has_value());
    if (g.label == 0) {
      CHECK(undirected == 26);  // 19 tree + 6 house + 1 bridge
      CHECK(g.truth_mask->size() == 6);
    } else {
      CHECK(undirected == 25);  // 19 tree + 5 cycle + 1 bridge
      CHECK(g.truth_mask->size() == 5);
    }
    // motif edges live entirely on motif nodes; base edges are untouched
    for (const auto& e : *g.truth_mask) CHECK(e.first >= 20);
    int base_edges = 0;
    for (const auto& e : g.edges) {
      if (e.second < 20) ++base_edges;
    }
    CHECK(base_edges == 19);
  }
  CHECK(directed_edges / ds.size() == Catch::Approx(51.0));

  SECTION("exact class balance at scale") {
    auto big = l2x::gen_ba2motifs(1000, 3);
    int per_class[2] = {0, 0};
    for (const auto& g : big.graphs) ++per_class[g.label];
    CHECK(per_class[0] == 500);
    CHECK(per_class[1] == 500);
  }

  SECTION("odd count rejected") {
    CHECK_THROWS_AS(l2x::gen_ba2motifs(3, 1), l2x::ContractError);
  }

  SECTION("deterministic given seed") {
    CHECK(l2x::gen_ba2motifs(20, 11) == l2x::gen_ba2motifs(20, 11));
  }

  SECTION("removing truth edges isolates the motif interior") {
    for (const auto& g : ds.graphs) {
      std::set<l2x::Edge> kept(g.edges.begin(), g.edges.end());
      for (const auto& e : *g.truth_mask) kept.erase(e);
      int motif_internal = 0;
      for (const auto& e : kept) {
        if (e.first >= 20 && e.second >= 20) ++motif_internal;
      }
      CHECK(motif_internal == 0);
    }
  }
}

TEST_CASE("ring-nitro generator") {
  auto ds = l2x::gen_ring_nitro(60, 5);
  REQUIRE(ds.size() == 60);
  int per_class[2] = {0, 0};
  for (const auto& g : ds.graphs) {
    ++per_class[g.label];
    CHECK(g.is_connected());
    if (g.label == 1) {
      REQUIRE(g.truth_mask.has_value());
      CHECK(g.truth_mask->size() == 9);
    } else {
      CHECK_FALSE(g.truth_mask.has_value());
    }
    CHECK(g.feature_dim == 4);
    // one-hot rows
    for (int v = 0; v < g.num_nodes; ++v) {
      double s = 0;
      for (int k = 0; k < 4; ++k) s += g.feature(v, k);
      CHECK(s == 1.0);
    }
  }
  CHECK(per_class[0] == 30);
  CHECK(per_class[1] == 30);

  CHECK(l2x::gen_ring_nitro(10, 2) == l2x::gen_ring_nitro(10, 2));
}

TEST_CASE("graph JSON round trip and validation") {
  auto ds = l2x::gen_ba2motifs(4, 13);
  for (const auto& g : ds.graphs) {
    CHECK(l2x::parse_graph_json(l2x::serialize_graph_json(g)) == g);
  }

  SECTION("self-loop rejected") {
    const std::string text =
        R"({"num_nodes":4,"edges":[[0,1],[3,3]],"features":[[1],[1],[1],[1]],"label":0})";
    CHECK_THROWS_AS(l2x::parse_graph_json(text), l2x::FormatError);
  }

  SECTION("truth mask outside the edge set rejected") {
    const std::string text =
        R"({"num_nodes":3,"edges":[[0,1]],"features":[[1],[1],[1]],"label":0,
            "truth_mask":[[1,2]]})";
    CHECK_THROWS_AS(l2x::parse_graph_json(text), l2x::FormatError);
  }

  SECTION("malformed JSON rejected") {
    CHECK_THROWS_AS(l2x::parse_graph_json("{nope"), l2x::FormatError);
  }
}

TEST_CASE("dataset JSON round trip via files") {
  TempDir dir;
  auto ds = l2x::gen_ring_nitro(8, 21);
  l2x::save_dataset(ds, dir.path / "rn");
  auto loaded = l2x::load_dataset(dir.path / "rn");
  CHECK(loaded == ds);

  CHECK_THROWS_AS(l2x::load_dataset(dir.path / "missing"), l2x::InputError);
}
