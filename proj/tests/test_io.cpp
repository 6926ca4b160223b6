#include "dressed/io.hpp"
#include "dressed/run.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace dressed;

namespace {

std::string config_path(const std::string& name) { return std::string(DRESSED_CONFIG_DIR) + "/" + name; }

json deer_config() { return json::parse(read_text_file(config_path("deer_sq.cfg"))); }

std::string config_error_field(const json& j) {
  try {
    parse_run_config(j);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST(Csv, NumbersRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 12345.678, 0.0}) EXPECT_EQ(std::stod(csv_number(v)), v);
  EXPECT_EQ(csv_number(0.5), "0.5");
  EXPECT_EQ(csv_number(std::nan("")), "nan");
  EXPECT_EQ(fixed_number(1.0 / 3.0, 2), "0.33");
}

TEST(Csv, SweepLayout) {
  SweepResult r;
  r.axis_name = "tau";
  r.axis = {1.0, 2.0};
  r.columns = {{"P0", {0.25, 0.5}}, {"P1", {0.75, 0.5}}};
  EXPECT_EQ(sweep_csv(r), "tau,P0,P1\n1,0.25,0.75\n2,0.5,0.5\n");
}

TEST(Svg, StructureAndEscaping) {
  const auto svg = svg_plot("a < b & c", "x", "y", {{"one", {0, 1, 2}, {0, 1, 4}}, {"two", {0, 1}, {1, 1}}});
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(count(svg, "<polyline"), 2u);
  EXPECT_NE(svg.find("a &lt; b &amp; c"), std::string::npos);
  // Degenerate ranges still produce finite coordinates.
  const auto flat = svg_plot("t", "x", "y", {{"c", {1, 1}, {2, 2}}});
  EXPECT_EQ(flat.find("nan"), std::string::npos);
}

TEST(Config, FixtureParses) {
  const auto c = parse_run_config(deer_config());
  EXPECT_EQ(c.experiment, "deer");
  EXPECT_EQ(c.system.nu_dip, 0.25);
  const auto& b = std::get<DeerBlock>(c.block);
  EXPECT_EQ(b.basis, Basis::SQ);
  ASSERT_EQ(b.tau.size(), 200u);
  EXPECT_DOUBLE_EQ(b.tau.back(), 20.0);
  EXPECT_EQ(c.seed, 1u);
}

TEST(Config, UnknownKeysRejected) {
  auto j = deer_config();
  j["deer"]["taus"] = 1;
  EXPECT_EQ(config_error_field(j), "deer.taus");
  j = deer_config();
  j["colour"] = "red";
  EXPECT_EQ(config_error_field(j), "colour");
  j = deer_config();
  j["ramsey"] = json::object();
  EXPECT_EQ(config_error_field(j), "ramsey");
}

TEST(Config, FieldErrorsAreNamed) {
  auto j = deer_config();
  j["deer"]["tau"] = json::array({-1, 1, 2, 3, 4, 5, 6, 7});
  EXPECT_EQ(config_error_field(j), "deer.tau");
  j = deer_config();
  j["system"]["nu_dip"] = "big";
  EXPECT_EQ(config_error_field(j), "system.nu_dip");
  j = deer_config();
  j["deer"]["tau"]["points"] = 10;
  EXPECT_EQ(config_error_field(j), "deer.tau");
  j = deer_config();
  j["mode"] = "quantum";
  EXPECT_EQ(config_error_field(j), "mode");
  j = deer_config();
  j.erase("deer");
  EXPECT_EQ(config_error_field(j), "deer");
  j = deer_config();
  j["experiment"] = "echo";
  EXPECT_EQ(config_error_field(j), "experiment");
  EXPECT_THROW(parse_run_config_text("{ not json"), ConfigError);
}

TEST(Config, EnsembleBlockValidated) {
  json j = json::parse(read_text_file(config_path("ensemble.cfg")));
  EXPECT_NO_THROW(parse_run_config(j));
  j["ensemble"]["box_edge"] = 20.0;
  EXPECT_EQ(config_error_field(j), "ensemble.box_edge");
  j = json::parse(read_text_file(config_path("ensemble.cfg")));
  j["mode"] = "lab";
  EXPECT_EQ(config_error_field(j), "mode");
}

TEST(Config, OverridesApplyAndEcho) {
  Overrides ov;
  ov.seed = 9;
  ov.output_dir = "elsewhere";
  ov.mode = "lab";
  const auto c = parse_run_config(deer_config(), ov);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.output_dir, "elsewhere");
  EXPECT_EQ(c.mode, EvolutionMode::lab);
  EXPECT_EQ(c.source["seed"], 9);
}

TEST(Config, EveryShippedConfigParses) {
  for (const auto& e : std::filesystem::directory_iterator(DRESSED_CONFIG_DIR)) {
    if (e.path().extension() != ".cfg") continue;
    EXPECT_NO_THROW(parse_run_config_text(read_text_file(e.path().string()))) << e.path();
  }
}

TEST(Run, DeerFixtureSummary) {
  const auto out = execute(parse_run_config(deer_config()));
  const auto& s = out.summary;
  std::vector<std::string> keys;
  for (const auto& [k, v] : s.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"config", "extracted", "criteria", "version", "seed"}));
  const auto& f = s["extracted"]["quantities"]["freq"];
  EXPECT_NEAR(f["value"].get<double>(), 0.125, 0.01);
  EXPECT_TRUE(s["criteria"]["frequency"]["pass"].get<bool>());
  EXPECT_EQ(s["seed"], 1);
  EXPECT_EQ(out.files.back().first, "summary.json");
}

TEST(Run, SummaryIsByteIdentical) {
  auto j = deer_config();
  j["shots"] = 500;
  const auto a = execute(parse_run_config(j));
  const auto b = execute(parse_run_config(j));
  EXPECT_EQ(a.files, b.files);
  j["seed"] = 2;
  const auto c = execute(parse_run_config(j));
  EXPECT_NE(a.files.front().second, c.files.front().second);
}

TEST(Run, EnsembleOutputs) {
  json j = json::parse(read_text_file(config_path("ensemble.cfg")));
  j["ensemble"]["n_configs"] = 200;
  j["ensemble"]["omega_minus"] = json::array({0.0, 8.0});
  j["ensemble"]["raw_samples"] = true;
  const auto out = execute(parse_run_config(j));
  std::map<std::string, std::string> files(out.files.begin(), out.files.end());
  ASSERT_TRUE(files.count("signal.csv") && files.count("histogram.csv") && files.count("samples.csv"));
  EXPECT_EQ(count(files["signal.csv"], "\n"), 4u);
  EXPECT_EQ(count(files["samples.csv"], ",delta,"), 3u * 200u);
  const auto& rows = out.summary["extracted"]["rows"];
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_NEAR(rows[2]["delta_peak_ratio"].get<double>(), 36.0 / 328.0, 1e-6);
  EXPECT_TRUE(out.summary["criteria"]["delta_peak_ratio (10;8)"]["pass"].get<bool>());
}

TEST(Run, RamseyCriterionUsesBasisAndControl) {
  json j = json::parse(read_text_file(config_path("ramsey_dq.cfg")));
  j["ramsey"]["tau"] = json{{"start", 0.05}, {"stop", 40.0}, {"step", 0.05}};
  const auto out = execute(parse_run_config(j));
  const auto& cr = out.summary["criteria"]["shift"];
  EXPECT_NEAR(cr["expected"].get<double>(), -0.52, 1e-12);
  EXPECT_TRUE(cr["pass"].get<bool>());
}

TEST(Run, WritesFiles) {
  auto j = deer_config();
  const auto dir = std::filesystem::temp_directory_path() / "dressed_io_test";
  std::filesystem::remove_all(dir);
  j["output_dir"] = dir.string();
  j["plot"] = true;
  const auto c = parse_run_config(j);
  write_run_output(execute(c), c.output_dir);
  for (const char* f : {"signal.csv", "summary.json", "plot.svg"}) EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  std::filesystem::remove_all(dir);
}
