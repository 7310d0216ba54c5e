#include "urelay/scenario.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace urelay {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& tok, int line_no) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw ScenarioError("line " + std::to_string(line_no) + ": expected a number, got '" + tok + "'");
  }
  if (pos != tok.size())
    throw ScenarioError("line " + std::to_string(line_no) + ": trailing characters in number '" + tok + "'");
  return v;
}

std::vector<double> parse_array(const std::string& tok, int line_no) {
  if (tok.size() < 2 || tok.front() != '[' || tok.back() != ']')
    throw ScenarioError("line " + std::to_string(line_no) + ": expected [a, b, ...] array");
  std::vector<double> out;
  std::string inner = tok.substr(1, tok.size() - 2);
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty())
      throw ScenarioError("line " + std::to_string(line_no) + ": empty array element");
    out.push_back(parse_number(item, line_no));
  }
  if (out.empty())
    throw ScenarioError("line " + std::to_string(line_no) + ": empty array");
  return out;
}

Eigen::Vector3d parse_position(const std::string& tok, int line_no, double default_z) {
  const auto a = parse_array(tok, line_no);
  if (a.size() == 2) return {a[0], a[1], default_z};
  if (a.size() == 3) return {a[0], a[1], a[2]};
  throw ScenarioError("line " + std::to_string(line_no) + ": position needs 2 or 3 elements");
}

struct KeyHandlerContext {
  Scenario* sc;
  int line_no;
  std::string key;
  std::string value;
};

void apply_key(const KeyHandlerContext& c) {
  Scenario& sc = *c.sc;
  const std::string& k = c.key;
  const std::string& v = c.value;
  const int ln = c.line_no;
  auto num = [&] { return parse_number(v, ln); };

  if (k == "system.bandwidth_hz") sc.sys.bandwidth_hz = num();
  else if (k == "system.p_max_w") sc.sys.p_max_w = num();
  else if (k == "system.p_max_dbm") sc.sys.p_max_w = dbm_to_watts(num());
  else if (k == "system.e_tot") sc.sys.e_tot = num();
  else if (k == "system.m_total") sc.sys.m_total = static_cast<int>(num());
  else if (k == "system.payload_bits") sc.sys.payload_bits = num();
  else if (k == "system.eps_uav_max") sc.sys.eps_uav_max = num();
  else if (k == "system.noise_bs_w") sc.sys.noise_bs_w = num();
  else if (k == "system.noise_bs_dbm_per_hz") sc.sys.noise_bs_w = noise_power(num(), sc.sys.bandwidth_hz);
  else if (k == "system.noise_dev_w") sc.sys.noise_dev_w = num();
  else if (k == "system.noise_dev_dbm_per_hz") sc.sys.noise_dev_w = noise_power(num(), sc.sys.bandwidth_hz);
  else if (k == "system.beta0_sq") sc.sys.beta0_sq = num();
  else if (k == "system.beta0_sq_db") sc.sys.beta0_sq = db_to_linear(num());
  else if (k == "system.uav_height") sc.sys.uav_height = num();
  else if (k == "system.x_min") sc.sys.x_min = num();
  else if (k == "system.x_max") sc.sys.x_max = num();
  else if (k == "system.y_min") sc.sys.y_min = num();
  else if (k == "system.y_max") sc.sys.y_max = num();
  else if (k == "system.bounds") {
    const auto a = parse_array(v, ln);
    if (a.size() != 4)
      throw ScenarioError("line " + std::to_string(ln) + ": system.bounds needs [x_min, x_max, y_min, y_max]");
    sc.sys.x_min = a[0]; sc.sys.x_max = a[1]; sc.sys.y_min = a[2]; sc.sys.y_max = a[3];
  }
  else if (k == "geometry.controller") sc.geom.controller = parse_position(v, ln, 0.0);
  else if (k == "geometry.device") sc.geom.device = parse_position(v, ln, 0.0);
  else if (k == "geometry.uav") sc.geom.uav = parse_position(v, ln, sc.sys.uav_height);
  else if (k == "link.gain_bd_sq") { sc.direct.gain_sq = num(); sc.direct.explicit_gain = true; }
  else if (k == "link.rayleigh_seed") {
    sc.direct.rayleigh_seed = static_cast<std::uint64_t>(num());
    sc.direct.explicit_gain = false;
  }
  else if (k == "link.rayleigh_mean_gain") sc.direct.mean_gain = num();
  else if (k == "solver.outer_tol") sc.solver.outer_tol = num();
  else if (k == "solver.outer_max_iter") sc.solver.outer_max_iter = static_cast<int>(num());
  else if (k == "solver.sca_tol") sc.solver.sca_tol = num();
  else if (k == "solver.sca_max_iter") sc.solver.sca_max_iter = static_cast<int>(num());
  else if (k == "solver.tol_kkt") sc.solver.tol_kkt = num();
  else if (k == "solver.tol_feas") sc.solver.tol_feas = num();
  else throw ScenarioError("line " + std::to_string(ln) + ": unknown key '" + k + "'");
}

}  // namespace

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) * 1e-3; }

double noise_power(double dbm_per_hz, double bandwidth_hz) {
  if (bandwidth_hz <= 0.0) throw ScenarioError("noise_power: bandwidth must be positive");
  return dbm_to_watts(dbm_per_hz) * bandwidth_hz;
}

Scenario default_scenario() { return Scenario{}; }

Scenario parse_scenario(const std::string& text) {
  Scenario sc = default_scenario();
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ScenarioError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ScenarioError("line " + std::to_string(line_no) + ": empty key or value");
    apply_key({&sc, line_no, key, value});
  }
  sc.geom.controller.z() = 0.0;
  sc.geom.device.z() = 0.0;
  sc.geom.uav.z() = sc.sys.uav_height;
  validate(sc);
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

void apply_override(Scenario& sc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ScenarioError("override '" + assignment + "' is not key=value");
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  if (key.empty() || value.empty())
    throw ScenarioError("override '" + assignment + "' has empty key or value");
  apply_key({&sc, 0, key, value});
  sc.geom.controller.z() = 0.0;
  sc.geom.device.z() = 0.0;
  sc.geom.uav.z() = sc.sys.uav_height;
  validate(sc);
}

void validate(const Scenario& sc) {
  const SystemParams& s = sc.sys;
  auto require = [](bool cond, const char* msg) {
    if (!cond) throw ScenarioError(std::string("invalid scenario: ") + msg);
  };
  require(s.bandwidth_hz > 0, "bandwidth must be positive");
  require(s.p_max_w > 0, "p_max must be positive");
  require(s.e_tot > 0, "e_tot must be positive");
  require(s.m_total >= 2, "m_total must be at least 2");
  require(s.payload_bits > 0, "payload_bits must be positive");
  require(s.eps_uav_max > 0 && s.eps_uav_max < 0.5, "eps_uav_max must be in (0, 0.5)");
  require(s.noise_bs_w > 0 && s.noise_dev_w > 0, "noise powers must be positive");
  require(s.beta0_sq > 0, "beta0_sq must be positive");
  require(s.uav_height > 0, "uav_height must be positive");
  require(s.x_min < s.x_max && s.y_min < s.y_max, "position box must be nonempty");
  require((sc.geom.controller - sc.geom.device).norm() > 0, "controller and device coincide");
  require(sc.direct.explicit_gain ? sc.direct.gain_sq > 0 : sc.direct.mean_gain > 0,
          "direct-link gain must be positive");
}

double draw_rayleigh_gain(std::uint64_t seed, double mean) {
  std::mt19937_64 gen(seed);
  // Inverse CDF of Exp(1/mean); generate_canonical is avoided for
  // cross-platform determinism, a fixed 53-bit reduction is used instead.
  const std::uint64_t r = gen();
  const double u = static_cast<double>(r >> 11) * 0x1.0p-53;
  return -mean * std::log1p(-u);
}

double resolve_direct_gain(const DirectLink& dl) {
  if (dl.explicit_gain) return dl.gain_sq;
  return draw_rayleigh_gain(dl.rayleigh_seed, dl.mean_gain);
}

}  // namespace urelay
