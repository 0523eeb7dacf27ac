#include <doctest.h>

#include <cstdlib>

#include "brflow/cli.hpp"
#include "brflow/error.hpp"

using namespace brflow;

TEST_SUITE("cli") {

TEST_CASE("config round trip") {
  RunConfig c;
  c.command = "bench";
  c.case_id = "kovasznay";
  c.scheme = "eafe";
  c.nus = {1.0, 1e-3, 0.1 + 0.2};
  c.epsilon = 1e-8;
  c.pattern = "crisscross";
  c.nx = 12;
  c.levels = 3;
  c.tolerance = 1.0 / 3;
  c.out = "table.csv";
  const std::string text = serialize_config(c);
  const RunConfig back = parse_config_text(text);
  CHECK(back == c);
  CHECK(serialize_config(back) == text);
  CHECK(parse_config_text(serialize_config(RunConfig{})) == RunConfig{});
}

TEST_CASE("config parsing") {
  const RunConfig c = parse_config_text("# comment\n case = potential2d  \n\nnu = 1e-6 # trailing\nlevels=2\n");
  CHECK(c.case_id == "potential2d");
  CHECK(c.nus == std::vector<double>{1e-6});
  CHECK(c.levels == 2);
  CHECK(c.epsilon == 1e-10);
  CHECK_THROWS_AS(parse_config_text("speed = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("nu = fast\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("levels 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("levels = 2.5\n"), ConfigError);
}

TEST_CASE("validation") {
  RunConfig c;
  c.case_id = "kovasznay";
  CHECK_NOTHROW(validate(c));
  auto bad = [&](auto edit) {
    RunConfig d = c;
    edit(d);
    CHECK_THROWS_AS(validate(d), ConfigError);
  };
  bad([](RunConfig& d) { d.nus = {-1.0}; });
  bad([](RunConfig& d) { d.epsilon = 0.0; });
  bad([](RunConfig& d) { d.tolerance = 1.0; });
  bad([](RunConfig& d) { d.case_id = "nope"; });
  bad([](RunConfig& d) { d.case_id.clear(); });
  bad([](RunConfig& d) { d.pattern = "hex"; });
  bad([](RunConfig& d) { d.command = "plot"; });
  bad([](RunConfig& d) { d.nus = {1.0, 2.0}; });
  bad([](RunConfig& d) { d.output_dir = "/nonexistent/dir"; });
  RunConfig info;
  info.command = "mesh-info";
  CHECK_NOTHROW(validate(info));
}

TEST_CASE("case overrides") {
  RunConfig c;
  c.case_id = "potential2d";
  c.t_end = 1.2;
  c.nx = 8;
  c.ny = 8;
  c.pattern = "right";
  c.nus = {0.5};
  const BenchmarkCase bc = case_of(c);
  CHECK(bc.mesh.pattern == GridPattern::RightDiagonal);
  CHECK(bc.mesh.nx == 8);
  CHECK(bc.nus == std::vector<double>{0.5});
  CHECK(bc.record_times == std::vector<double>{0.5, 1.0, 1.2});
  const SolverControls s = controls_of(c);
  CHECK(s.epsilon == 1e-10);
  CHECK(s.max_iterations == 50);
  CHECK(s.eafe_diagonal == EafeDiagonal::RowSum);
}

TEST_CASE("output directory") {
  RunConfig c;
  c.output_dir = "results";
  unsetenv(kOutputDirEnv);
  CHECK(output_path(c, "a.csv") == "results/a.csv");
  CHECK(output_path(c, "/tmp/a.csv") == "/tmp/a.csv");
  setenv(kOutputDirEnv, "/var/out", 1);
  CHECK(output_path(c, "a.csv") == "/var/out/a.csv");
  unsetenv(kOutputDirEnv);
}

}
