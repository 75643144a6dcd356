// Experiments layer: config parsing and rejection, CSV round trips,
// checksums, preset catalog, SVG rendering, and worker-count invariance of
// experiment results.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <string>

#include "couplab/experiments.hpp"

using namespace couplab;

TEST_CASE("config parsing accepts every documented key") {
  std::string text = R"({
    "name": "demo",
    "claim": "a demo",
    "kind": "vertical_tail",
    "space": "sl2",
    "a": 0.5,
    "h": 2.0,
    "v": 1.5,
    "t_grid": [0.5, 1.0, 2.0],
    "n_paths": 250,
    "n_bins": 40,
    "dt": 0.002,
    "horizon": 4.0,
    "fit_lo": 1.0,
    "fit_hi": 2.0,
    "escape_half_separation": 9.0,
    "tolerance": 0.02,
    "seed": 7,
    "scheme": "bessel_clock",
    "bridge_correction": false,
    "csv": "out.csv",
    "manifest": "out.json",
    "plot": "out.svg"
  })";
  ExperimentSpec s = parse_experiment_config(text);
  CHECK(s.name == "demo");
  CHECK(s.claim == "a demo");
  CHECK(s.kind == ExperimentKind::VerticalTail);
  CHECK(s.space.name() == "SL2");
  CHECK(s.a == 0.5);
  CHECK(s.h == 2.0);
  CHECK(s.v == 1.5);
  CHECK(s.t_grid == std::vector<double>{0.5, 1.0, 2.0});
  CHECK(s.n_paths == 250);
  CHECK(s.n_bins == 40);
  CHECK(s.dt == 0.002);
  CHECK(s.horizon == 4.0);
  CHECK(s.fit_lo == 1.0);
  CHECK(s.fit_hi == 2.0);
  CHECK(s.escape_half_separation == 9.0);
  CHECK(s.tolerance == 0.02);
  CHECK(s.seed == 7);
  CHECK(s.scheme == Scheme::BesselClock);
  CHECK_FALSE(s.bridge_correction);
  CHECK(s.csv_path == "out.csv");
  CHECK(s.manifest_path == "out.json");
  CHECK(s.plot_path == "out.svg");
}

TEST_CASE("config parsing rejects malformed input with ConfigError") {
  auto rejects = [](const std::string& text) {
    CHECK_THROWS_AS(parse_experiment_config(text), ConfigError);
  };
  rejects("not json at all");
  rejects("[1, 2, 3]");                                          // root not an object
  rejects(R"({"bogus_key": 1})");                                // unknown key
  rejects(R"({"kind": "no_such_kind"})");                        // unknown kind
  rejects(R"({"space": "no_such_space"})");                      // unknown space
  rejects(R"({"space": "nonisotropic"})");                       // weights required
  rejects(R"({"space": "nonisotropic", "weights": [1.0, 0.0]})");  // nonpositive weight
  rejects(R"({"space": "nonisotropic", "weights": [2.0, 1.0]})");  // weights not ascending
  rejects(R"({"space": "su2", "weights": [1.0, 2.0]})");           // weights on the wrong space
  rejects(R"({"scheme": "leapfrog"})");                          // unknown scheme
  rejects(R"({"n_paths": 50})");                                 // too few paths
  rejects(R"({"n_paths": "many"})");                             // wrong value type
  rejects(R"({"t_grid": []})");                                  // empty grid
  rejects(R"({"t_grid": [1.0, 1.0]})");                          // not increasing
  rejects(R"({"t_grid": [-1.0]})");                              // nonpositive time
  rejects(R"({"dt": 0.0})");                                     // nonpositive dt
  rejects(R"({"horizon": 0.5, "t_grid": [1.0]})");               // horizon below grid
  rejects(R"({"a": -1.0})");                                     // nonpositive level
  rejects(R"({"space": "su2", "a": 4.0})");                      // 2a beyond the circle
  rejects(R"({"kind": "gradient_bound", "space": "sl2"})");      // wrong space for kind
  rejects(R"({"kind": "geometry_unit", "space": "heisenberg"})");
  CHECK_THROWS_AS(load_experiment_config("/no/such/file.json"), ConfigError);
  CHECK_THROWS_AS(preset_by_name("no-such-preset"), ConfigError);
}

TEST_CASE("significant-digit formatting") {
  CHECK(format_sig12(0.0) == "0");
  CHECK(format_sig12(1.0) == "1");
  CHECK(format_sig12(std::nan("")) == "nan");
  // 12 significant digits survive
  CHECK(format_sig12(0.123456789012) == "0.123456789012");
  CHECK(format_sig12(-9.87654321098e+100) == "-9.87654321098e+100");
}

TEST_CASE("CSV writing and parsing round trip") {
  Table t;
  t.header = {"t", "value", "error"};
  t.rows = {{0.5, 0.123456789012, 1e-300},
            {1.0, -9.87654321098e+100, std::nan("")},
            {2.0, 0.0, -0.0}};
  std::string csv = csv_string(t);
  // RFC-4180 line endings
  CHECK(csv.find("\r\n") != std::string::npos);
  CHECK(csv.substr(0, csv.find("\r\n")) == "t,value,error");

  Table back = parse_csv(csv);
  REQUIRE(back.header == t.header);
  REQUIRE(back.rows.size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    REQUIRE(back.rows[i].size() == t.rows[i].size());
    for (std::size_t c = 0; c < t.rows[i].size(); ++c) {
      if (std::isnan(t.rows[i][c]))
        CHECK(std::isnan(back.rows[i][c]));
      else
        CHECK(back.rows[i][c] == Catch::Approx(t.rows[i][c]).epsilon(1e-11).margin(1e-310));
    }
  }

  Table empty;
  empty.header = {"only", "header"};
  std::string header_only = csv_string(empty);
  CHECK(header_only == "only,header\r\n");
  Table back_empty = parse_csv(header_only);
  CHECK(back_empty.header == empty.header);
  CHECK(back_empty.rows.empty());
}

TEST_CASE("content checksum is the 64-bit FNV-1a of the bytes") {
  CHECK(content_checksum("") == "cbf29ce484222325");
  CHECK(content_checksum("a") != content_checksum("b"));
  CHECK(content_checksum("same bytes") == content_checksum("same bytes"));
}

TEST_CASE("preset catalog") {
  auto presets = list_presets();
  REQUIRE(presets.size() == 12);
  std::set<std::string> names;
  for (const auto& p : presets) {
    CHECK(!p.claim.empty());
    CHECK_NOTHROW(p.validate());
    names.insert(p.name);
  }
  CHECK(names.size() == presets.size());  // unique names
  for (const char* expected :
       {"hmax-exact-tail", "reflection-principle", "maximality-witness", "sech-density",
        "hbm-success", "sl2u-clt", "sl2-expfit", "su2-expfit", "su2-geometry",
        "nonisotropic-bounds", "two-stage-heisenberg", "gradient-vertical"})
    CHECK(names.count(expected) == 1);
  CHECK(preset_by_name("sech-density").kind == ExperimentKind::DensityHistogram);
}

TEST_CASE("SVG rendering") {
  PlotSeries s;
  s.label = "tail";
  s.x = {1.0, 2.0, 3.0};
  s.y = {0.9, 0.5, 0.2};
  std::string svg = svg_plot_string("demo plot", {s}, false);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.find("demo plot") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  // log axis variant also renders
  std::string svg_log = svg_plot_string("demo plot", {s}, true);
  CHECK(svg_log.find("polyline") != std::string::npos);

  Table t;
  t.header = {"t", "tail"};
  t.rows = {{1.0, 0.9}, {2.0, 0.5}};
  std::string csv_path = "test_plot_roundtrip.csv";
  std::string svg_path = "test_plot_roundtrip.svg";
  emit_csv(csv_path, t);
  plot_csv_file(csv_path, svg_path, false);
  std::ifstream in(svg_path, std::ios::binary);
  REQUIRE(in.good());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(content.find("</svg>") != std::string::npos);
  std::remove(csv_path.c_str());
  std::remove(svg_path.c_str());
}

TEST_CASE("experiment results do not depend on the worker count") {
  ExperimentSpec s;
  s.name = "determinism-probe";
  s.kind = ExperimentKind::VerticalTail;
  s.a = 1.0;
  s.t_grid = {0.5, 1.0};
  s.n_paths = 400;
  s.dt = 5e-3;
  s.scheme = Scheme::BesselClock;
  s.seed = 11;
  // no output paths: nothing is written to disk

  auto run_with_workers = [&](const char* workers) {
    setenv("COUPLING_LAB_THREADS", workers, 1);
    auto m = run_experiment(s);
    unsetenv("COUPLING_LAB_THREADS");
    m.doc.erase("wall_time_seconds");
    return std::make_pair(csv_string(m.table), m.doc.dump());
  };
  auto serial = run_with_workers("1");
  auto threaded = run_with_workers("3");
  CHECK(serial.first == threaded.first);
  CHECK(serial.second == threaded.second);
}

TEST_CASE("manifest structure") {
  ExperimentSpec s;
  s.name = "manifest-probe";
  s.claim = "small smoke run";
  s.kind = ExperimentKind::VerticalTail;
  s.a = 1.0;
  s.t_grid = {0.5};
  s.n_paths = 400;
  s.dt = 5e-3;
  s.scheme = Scheme::BesselClock;
  s.csv_path = "manifest_probe.csv";
  s.manifest_path = "manifest_probe.json";
  auto m = run_experiment(s);
  CHECK(m.doc["name"] == "manifest-probe");
  CHECK(m.doc["claim"] == "small smoke run");
  CHECK(m.doc["kind"] == "vertical_tail");
  CHECK(m.doc["version"] == std::string(kVersionTag));
  REQUIRE(m.doc.contains("assertions"));
  CHECK(!m.doc["assertions"].empty());
  for (const auto& a : m.doc["assertions"]) {
    CHECK(a.contains("name"));
    CHECK(a.contains("measured"));
    CHECK(a.contains("tolerance"));
    CHECK(a.contains("pass"));
  }
  // emitted CSV checksum matches the manifest entry
  std::ifstream in(s.csv_path, std::ios::binary);
  REQUIRE(in.good());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(m.doc["outputs"][0]["checksum"] == content_checksum(bytes));
  // stable key order: name first, version before outputs
  std::string dumped = m.doc.dump();
  CHECK(dumped.find("\"name\"") < dumped.find("\"kind\""));
  CHECK(dumped.find("\"version\"") < dumped.find("\"outputs\""));
  std::remove(s.csv_path.c_str());
  std::remove(s.manifest_path.c_str());
}
