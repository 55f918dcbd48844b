#include "qmfg/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace qmfg {

std::string ValidationError::format(const std::vector<ValidationIssue>& issues) {
  std::ostringstream os;
  os << "configuration rejected (" << issues.size() << " issue"
     << (issues.size() == 1 ? "" : "s") << "):";
  for (const auto& issue : issues) os << "\n  - " << issue.message;
  return os.str();
}

GammaSchedule GammaSchedule::constant(double value) {
  GammaSchedule g;
  g.constant_ = true;
  g.values_ = {value};
  return g;
}

GammaSchedule GammaSchedule::piecewise(std::vector<double> times, std::vector<double> values) {
  if (times.empty() || times.size() != values.size())
    throw ConfigError("gamma table must have matching, nonempty time and value columns");
  if (times.front() != 0.0) throw ConfigError("gamma table must start at t = 0");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw ConfigError("gamma table times must be strictly increasing");
  GammaSchedule g;
  g.constant_ = false;
  g.times_ = std::move(times);
  g.values_ = std::move(values);
  return g;
}

double GammaSchedule::operator()(double t) const {
  if (constant_) return values_.front();
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  std::size_t idx = (it == times_.begin()) ? 0 : static_cast<std::size_t>(it - times_.begin() - 1);
  return values_[idx];
}

double GammaSchedule::integral(double t0, double t1) const {
  if (t1 < t0) return -integral(t1, t0);
  if (constant_) return values_.front() * (t1 - t0);
  double total = 0.0;
  for (std::size_t i = 0; i < times_.size(); ++i) {
    double seg_lo = times_[i];
    double seg_hi = (i + 1 < times_.size()) ? times_[i + 1] : t1;
    double lo = std::max(seg_lo, t0);
    double hi = std::min(seg_hi, t1);
    if (hi > lo) total += values_[i] * (hi - lo);
  }
  return total;
}

std::string GammaSchedule::describe() const {
  if (constant_) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "constant %.17g", values_.front());
    return buf;
  }
  std::ostringstream os;
  os << "piecewise_constant " << times_.size() << " rows";
  return os.str();
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> t(n_steps + 1);
  for (int k = 0; k <= n_steps; ++k) t[k] = time(k);
  return t;
}

namespace {

void require_positive(std::vector<ValidationIssue>& issues, double value, const char* field) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    issues.push_back({ValidationIssue::Code::NonPositiveParameter, field,
                      std::string(field) + " must be strictly positive, got " + std::to_string(value)});
  }
}

}  // namespace

std::vector<ValidationIssue> validate(const RunConfig& config) {
  std::vector<ValidationIssue> issues;
  const ModelParams& p = config.params;
  require_positive(issues, p.b, "b");
  require_positive(issues, p.sigma, "sigma");
  require_positive(issues, p.r, "r");
  require_positive(issues, p.lambda, "lambda");
  require_positive(issues, p.T, "T");
  if (!(p.nu >= 0.0) || !std::isfinite(p.nu)) {
    issues.push_back({ValidationIssue::Code::NonPositiveParameter, "nu",
                      "nu must be nonnegative, got " + std::to_string(p.nu)});
  }
  if (!(config.alpha.alpha > 0.0 && config.alpha.alpha < 1.0)) {
    issues.push_back({ValidationIssue::Code::AlphaOutOfRange, "alpha",
                      "alpha must lie strictly inside (0,1), got " + std::to_string(config.alpha.alpha)});
  }
  if (config.n_steps < 1) {
    issues.push_back({ValidationIssue::Code::DegenerateGrid, "n_steps",
                      "n_steps must be >= 1, got " + std::to_string(config.n_steps)});
  }
  if (config.n_agents < 2) {
    issues.push_back({ValidationIssue::Code::NonPositiveParameter, "n_agents",
                      "n_agents must be >= 2, got " + std::to_string(config.n_agents)});
  }
  if (config.n_replications < 1) {
    issues.push_back({ValidationIssue::Code::NonPositiveParameter, "n_replications",
                      "n_replications must be >= 1, got " + std::to_string(config.n_replications)});
  }
  // gamma must be evaluable and bounded on the grid
  if (config.n_steps >= 1 && p.T > 0.0) {
    TimeGrid grid = config.time_grid();
    for (int k = 0; k <= grid.n_steps; ++k) {
      if (!std::isfinite(p.gamma(grid.time(k)))) {
        issues.push_back({ValidationIssue::Code::DegenerateGrid, "gamma",
                          "gamma is not finite at t = " + std::to_string(grid.time(k))});
        break;
      }
    }
  }
  return issues;
}

RunConfig validated(RunConfig config) {
  auto issues = validate(config);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return config;
}

RunConfig table1_defaults() {
  RunConfig config;
  config.params = ModelParams{};  // struct defaults carry the documented values
  config.params.gamma = GammaSchedule::constant(0.0);
  config.alpha = QuantileLevel{0.95};
  config.n_steps = 1000;
  config.seed = 42;
  config.n_agents = 1000;
  config.n_replications = 1000;
  return config;
}

namespace {

GammaSchedule load_gamma_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open gamma table file: " + path);
  std::vector<double> times, values;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    double t, v;
    if (row >> t >> v) {
      times.push_back(t);
      values.push_back(v);
    }
  }
  return GammaSchedule::piecewise(std::move(times), std::move(values));
}

}  // namespace

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  RunConfig config = table1_defaults();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto first = line.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + " is not `key = value`: " + line);
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r\n");
      auto e = s.find_last_not_of(" \t\r\n");
      return (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config line " + std::to_string(line_no) + " has an empty key or value");

    auto as_double = [&](const char* field) {
      try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        throw ConfigError(std::string("config key ") + field + " has a non-numeric value: " + value);
      }
    };
    auto as_int = [&](const char* field) {
      double v = as_double(field);
      if (v != std::floor(v)) throw ConfigError(std::string("config key ") + field + " must be an integer");
      return static_cast<long long>(v);
    };

    if (key == "b") config.params.b = as_double("b");
    else if (key == "sigma") config.params.sigma = as_double("sigma");
    else if (key == "r") config.params.r = as_double("r");
    else if (key == "lambda") config.params.lambda = as_double("lambda");
    else if (key == "T") config.params.T = as_double("T");
    else if (key == "m0") config.params.m0 = as_double("m0");
    else if (key == "nu0_variance") {
      double v = as_double("nu0_variance");
      if (v < 0.0) throw ConfigError("nu0_variance must be nonnegative");
      config.params.nu = std::sqrt(v);
    } else if (key == "alpha") config.alpha.alpha = as_double("alpha");
    else if (key == "n_steps") config.n_steps = static_cast<int>(as_int("n_steps"));
    else if (key == "n_agents") config.n_agents = static_cast<int>(as_int("n_agents"));
    else if (key == "n_replications") config.n_replications = static_cast<int>(as_int("n_replications"));
    else if (key == "seed") config.seed = static_cast<std::uint64_t>(as_int("seed"));
    else if (key == "gamma_constant") config.params.gamma = GammaSchedule::constant(as_double("gamma_constant"));
    else if (key == "gamma_table") config.params.gamma = load_gamma_table(value);
    else throw ConfigError("unknown config key: " + key);
  }
  return config;
}

std::string config_to_text(const RunConfig& config) {
  char buf[128];
  std::ostringstream os;
  auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%s = %.17g\n", key, v);
    os << buf;
  };
  put("b", config.params.b);
  put("sigma", config.params.sigma);
  put("r", config.params.r);
  put("lambda", config.params.lambda);
  put("T", config.params.T);
  put("m0", config.params.m0);
  put("nu0_variance", config.params.nu * config.params.nu);
  put("alpha", config.alpha.alpha);
  os << "n_steps = " << config.n_steps << "\n";
  os << "n_agents = " << config.n_agents << "\n";
  os << "n_replications = " << config.n_replications << "\n";
  os << "seed = " << config.seed << "\n";
  if (config.params.gamma.is_constant()) {
    put("gamma_constant", config.params.gamma.constant_value());
  } else {
    os << "# gamma: " << config.params.gamma.describe() << "\n";
  }
  return os.str();
}

}  // namespace qmfg
