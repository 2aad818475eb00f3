#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "microstab/config.hpp"
#include "microstab/runio.hpp"
#include "microstab/types.hpp"

using namespace microstab;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/microstab_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("config parse/serialize round trip is the identity") {
  const std::string text =
      "[mesh]\n"
      "generator = hole\n"
      "radius = 0.40000000000000002\n"
      "n_side = 12\n"
      "\n"
      "[material.0]\n"
      "model = neo_hookean\n"
      "kappa = 166.66999999999999\n"
      "mu = 35.710000000000001\n"
      "\n"
      "[load]\n"
      "F = 1,0,0,0.9\n"
      "steps = 10\n";
  Config c = Config::parse(text);
  Config c2 = Config::parse(c.serialize());
  CHECK(c == c2);
  CHECK(c.serialize() == c2.serialize());

  // comments and blank lines are stripped but values survive
  Config d = Config::parse("# top comment\n[a]\nx = 1.5  # trailing\n\ny = hello\n");
  CHECK(d.get_double("a", "x") == 1.5);
  CHECK(d.get("a", "y") == "hello");
  CHECK(Config::parse(d.serialize()) == d);
}

TEST_CASE("typed getters and diagnostics") {
  Config c = Config::parse("[s]\nd = 2.5\ni = 42\nb = true\nlist = 1, 2.5, -3\n");
  CHECK(c.get_double("s", "d") == 2.5);
  CHECK(c.get_int("s", "i") == 42);
  CHECK(c.get_bool_or("s", "b", false));
  CHECK(c.get_bool_or("s", "missing", true));
  CHECK(c.get_double_or("s", "missing", 7.0) == 7.0);
  CHECK(c.get_int_or("s", "missing", -1) == -1);
  CHECK(c.get_or("s", "missing", "fb") == "fb");
  auto lst = c.get_list("s", "list");
  REQUIRE(lst.size() == 3);
  CHECK(lst[1] == 2.5);

  CHECK_THROWS_AS((void)c.get("s", "absent"), ConfigError);
  CHECK_THROWS_AS((void)c.get("nosection", "x"), ConfigError);
  Config bad = Config::parse("[s]\nv = 1.5x\n");
  CHECK_THROWS_AS((void)bad.get_double("s", "v"), ConfigError);
  CHECK_THROWS_AS((void)bad.get_int("s", "v"), ConfigError);
  CHECK_THROWS_AS(Config::parse("[unclosed\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("[s]\nno equals sign\n"), ConfigError);
}

TEST_CASE("17-digit doubles round trip exactly") {
  const double vals[] = {3.141592653589793, 1.0 / 3.0, 6.02214076e23,
                         -1.1125369292536007e-308, 0.1, 166.67};
  Config c;
  for (size_t i = 0; i < std::size(vals); ++i)
    c.set_double("v", "x" + std::to_string(i), vals[i]);
  Config c2 = Config::parse(c.serialize());
  for (size_t i = 0; i < std::size(vals); ++i)
    CHECK(c2.get_double("v", "x" + std::to_string(i)) == vals[i]);
  CHECK(std::stod(format_full(vals[0])) == vals[0]);
}

TEST_CASE("section helpers and set semantics") {
  Config c;
  c.set("material.0", "model", "neo_hookean");
  c.set("material.1", "model", "j2_plasticity");
  c.set("mesh", "generator", "hole");
  auto mats = c.section_names("material.");
  REQUIRE(mats.size() == 2);
  CHECK(mats[0] == "material.0");
  CHECK(c.has_section("mesh"));
  CHECK(!c.has("mesh", "radius"));
  c.set("mesh", "generator", "structured");  // overwrite in place
  CHECK(c.get("mesh", "generator") == "structured");
  REQUIRE(c.sections().size() == 3);
}

TEST_CASE("csv writers emit full-precision machine files") {
  TempFile f("macro.csv");
  write_csv(f.path, {"lambda", "P22"}, {{1.0, -0.5}, {0.9, 1.0 / 3.0}});
  std::string text = slurp(f.path);
  CHECK(text.substr(0, 11) == "lambda,P22\n");
  std::istringstream lines(text);
  std::string header, row1, row2;
  std::getline(lines, header);
  std::getline(lines, row1);
  std::getline(lines, row2);
  CHECK(row1 == "1,-0.5");
  const auto comma = row2.find(',');
  CHECK(std::stod(row2.substr(comma + 1)) == 1.0 / 3.0);

  CHECK_THROWS(write_csv(f.path, {"a", "b"}, {{1.0}}));  // width mismatch
}

TEST_CASE("history and surface writers") {
  TempFile h("history.csv"), s("surface.csv");
  StepRecord rec;
  rec.lambda = 0.5;  // exactly representable: appears verbatim in the file
  rec.beta_min = 0.125;
  rec.k_min = {0.5, 0.0};
  rec.B = 2.0;
  write_history_csv(h.path, {rec});
  std::string ht = slurp(h.path);
  CHECK(ht.find("lambda") == 0);
  CHECK(ht.find("beta_min") != std::string::npos);
  CHECK(ht.find("0.5") != std::string::npos);
  CHECK(ht.find("0.125") != std::string::npos);

  SweepResult sw;
  sw.surface = {{{0.25, 0.5}, 1.5}, {{0.5, 0.0}, -0.25}};
  write_surface_csv(s.path, sw);
  std::string st = slurp(s.path);
  CHECK(st.find("k1,k2,beta") == 0);
  CHECK(st.find("-0.25") != std::string::npos);
}

TEST_CASE("run summary echoes the configuration and formats tables") {
  CHECK(format_table(2.435) == "2.4350");
  CHECK(format_table(-0.00004) == "-0.0000");

  TempFile f("summary.txt");
  Config cfg;
  cfg.set("mesh", "generator", "hole");
  RunSummary s;
  s.tool = "microstab";
  s.analysis = "stability";
  s.config_echo = cfg.serialize();
  s.macro.psi = 2.435;
  BifurcationReport rep;
  rep.found = true;
  rep.lambda_c = 0.9271;
  rep.wave_class = WavelengthClass::finite;
  s.report = &rep;
  write_run_summary(f.path, s);
  std::string text = slurp(f.path);
  CHECK(text.find("stability") != std::string::npos);
  CHECK(text.find("0.9271") != std::string::npos);
  CHECK(text.find("finite") != std::string::npos);
  CHECK(text.find("[mesh]") != std::string::npos);
  CHECK(text.find("generator = hole") != std::string::npos);
}
