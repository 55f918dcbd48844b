#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "qmfg/model.hpp"

using namespace qmfg;

namespace {

bool has_issue(const std::vector<ValidationIssue>& issues, ValidationIssue::Code code,
               const std::string& field) {
  for (const auto& issue : issues)
    if (issue.code == code && issue.field == field) return true;
  return false;
}

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = std::string("/tmp/qmfg_test_") + name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("documented defaults") {
  const RunConfig c = table1_defaults();
  CHECK(c.params.b == 0.5);
  CHECK(c.params.r == 0.1);
  CHECK(c.params.sigma == 0.5);
  CHECK(c.params.lambda == 1.0);
  CHECK(c.params.T == 1.0);
  CHECK(c.params.m0 == 0.0);
  CHECK(c.params.nu == 0.5);  // N(0, 0.25) read as variance 0.25
  CHECK(c.params.gamma(0.5) == 0.0);
  CHECK(c.alpha.alpha == 0.95);
  CHECK(c.n_steps == 1000);
  CHECK(c.n_agents == 1000);
  CHECK(c.n_replications == 1000);
  CHECK(validate(c).empty());
}

TEST_CASE("validate flags each offending field") {
  RunConfig c = table1_defaults();
  c.alpha.alpha = 1.0;
  auto issues = validate(c);
  CHECK(has_issue(issues, ValidationIssue::Code::AlphaOutOfRange, "alpha"));

  c = table1_defaults();
  c.params.r = 0.0;
  issues = validate(c);
  CHECK(has_issue(issues, ValidationIssue::Code::NonPositiveParameter, "r"));

  c = table1_defaults();
  c.n_steps = 0;
  issues = validate(c);
  CHECK(has_issue(issues, ValidationIssue::Code::DegenerateGrid, "n_steps"));

  c = table1_defaults();
  c.n_agents = 1;
  CHECK(!validate(c).empty());

  // several violations reported together
  c = table1_defaults();
  c.params.b = -1.0;
  c.params.sigma = 0.0;
  c.alpha.alpha = 2.0;
  issues = validate(c);
  CHECK(issues.size() >= 3);
  CHECK_THROWS_AS(validated(c), ValidationError);
}

TEST_CASE("validate is idempotent on accepted configs") {
  const RunConfig c = validated(table1_defaults());
  const RunConfig c2 = validated(c);
  CHECK(c2.params.b == c.params.b);
  CHECK(c2.seed == c.seed);
  CHECK(validate(c2).empty());
}

TEST_CASE("time grid is uniform from 0 to T") {
  const TimeGrid grid{400, 2.0};
  const auto t = grid.times();
  CHECK(t.front() == 0.0);
  CHECK(t.back() == 2.0);
  for (std::size_t k = 1; k < t.size(); ++k)
    CHECK(t[k] - t[k - 1] == doctest::Approx(grid.dt()).epsilon(1e-12));
}

TEST_CASE("config file loading") {
  const std::string path = write_temp("config1.txt",
                                      "# example\n"
                                      "b = 0.7\n"
                                      "sigma = 0.4\n"
                                      "nu0_variance = 0.09\n"
                                      "alpha = 0.9\n"
                                      "n_steps = 500\n"
                                      "seed = 99\n"
                                      "gamma_constant = 0.25\n");
  const RunConfig c = load_config_file(path);
  CHECK(c.params.b == 0.7);
  CHECK(c.params.sigma == 0.4);
  CHECK(c.params.nu == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(c.alpha.alpha == 0.9);
  CHECK(c.n_steps == 500);
  CHECK(c.seed == 99);
  CHECK(c.params.gamma(0.123) == 0.25);
  CHECK(c.params.r == 0.1);  // untouched keys keep defaults
}

TEST_CASE("config file rejects unknown keys and junk") {
  const std::string bad = write_temp("config2.txt", "b = 0.5\nwhatever = 3\n");
  CHECK_THROWS_AS(load_config_file(bad), ConfigError);
  const std::string junk = write_temp("config3.txt", "b equals two\n");
  CHECK_THROWS_AS(load_config_file(junk), ConfigError);
  const std::string nonnum = write_temp("config4.txt", "b = abc\n");
  CHECK_THROWS_AS(load_config_file(nonnum), ConfigError);
  CHECK_THROWS_AS(load_config_file("/nonexistent/qmfg.conf"), ConfigError);
}

TEST_CASE("gamma table schedule") {
  const std::string table = write_temp("gamma1.txt", "0.0 1.0\n0.5 2.0\n");
  const std::string path = write_temp("config5.txt", "gamma_table = " + table + "\n");
  const RunConfig c = load_config_file(path);
  CHECK(c.params.gamma(0.0) == 1.0);
  CHECK(c.params.gamma(0.49) == 1.0);
  CHECK(c.params.gamma(0.5) == 2.0);
  CHECK(c.params.gamma(0.9) == 2.0);
  CHECK(c.params.gamma.integral(0.0, 1.0) == doctest::Approx(0.5 * 1.0 + 0.5 * 2.0).epsilon(1e-15));
  CHECK(c.params.gamma.integral(0.25, 0.75) == doctest::Approx(0.25 + 0.5).epsilon(1e-15));

  const std::string bad_table = write_temp("gamma2.txt", "0.5 1.0\n");  // must start at 0
  const std::string bad_path = write_temp("config6.txt", "gamma_table = " + bad_table + "\n");
  CHECK_THROWS_AS(load_config_file(bad_path), ConfigError);
}

TEST_CASE("config round-trips through its text form") {
  RunConfig c = table1_defaults();
  c.params.b = 0.625;
  c.seed = 31337;
  c.alpha.alpha = 0.875;
  const std::string path = write_temp("config7.txt", config_to_text(c));
  const RunConfig back = load_config_file(path);
  CHECK(back.params.b == c.params.b);
  CHECK(back.seed == c.seed);
  CHECK(back.alpha.alpha == c.alpha.alpha);
  CHECK(back.params.nu == doctest::Approx(c.params.nu).epsilon(1e-15));
}
