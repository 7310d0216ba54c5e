#pragma once

// Scenario configuration: system parameters, node geometry, direct-link
// model, and solver tolerances, loadable from a flat key-value text format.

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace urelay {

struct SystemParams {
  double bandwidth_hz = 1e6;
  double p_max_w = 10.0;        // superposition power cap, watts
  double e_tot = 10.0;          // transmit-energy budget, watt-symbols
  int m_total = 100;            // total blocklength budget
  double payload_bits = 100.0;  // packet size per phase
  double eps_uav_max = 1e-8;    // decoding-error cap at the UAV
  double noise_bs_w = 3.9810717055349725e-15;   // sigma^2 over the band
  double noise_dev_w = 3.9810717055349725e-15;  // delta^2 over the band
  double beta0_sq = 1e-5;       // reference channel gain at 1 m
  double uav_height = 80.0;
  double x_min = 30.0, x_max = 120.0;
  double y_min = 30.0, y_max = 120.0;
};

struct Geometry {
  Eigen::Vector3d controller{0.0, 0.0, 0.0};
  Eigen::Vector3d device{150.0, 150.0, 0.0};
  Eigen::Vector3d uav{75.0, 75.0, 80.0};  // initial position
};

// Direct controller-to-device link. Either an explicit squared gain or a
// seeded Rayleigh (exponential squared-gain) draw around mean_gain; the
// blocked-NLOS default keeps the direct path much weaker than the relay
// path, which is the regime the relay exists for.
struct DirectLink {
  bool explicit_gain = true;
  double gain_sq = 1e-13;
  std::uint64_t rayleigh_seed = 0;
  double mean_gain = 1e-13;
};

struct SolverParams {
  double outer_tol = 1e-3;
  int outer_max_iter = 30;
  double sca_tol = 1e-6;
  int sca_max_iter = 40;
  double tol_kkt = 1e-8;
  double tol_feas = 1e-9;
};

struct Scenario {
  SystemParams sys;
  Geometry geom;
  DirectLink direct;
  SolverParams solver;
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 10^(db/10).
double db_to_linear(double db);

// dBm to watts: 10^(dbm/10) * 1e-3.
double dbm_to_watts(double dbm);

// Noise power in watts from a spectral density in dBm/Hz over a bandwidth.
double noise_power(double dbm_per_hz, double bandwidth_hz);

// The built-in defaults (identical to an empty scenario file).
Scenario default_scenario();

// Parse scenario text. Lines are `section.key = value` with `#` comments;
// values are numbers, `[a, b, ...]` arrays for positions/bounds, and keys
// suffixed _db/_dbm are converted to linear units. Unknown keys and
// malformed values raise ScenarioError with the line number.
Scenario parse_scenario(const std::string& text);

// Read and parse a scenario file.
Scenario load_scenario(const std::string& path);

// Apply one `section.key=value` override (the CLI --set flag).
void apply_override(Scenario& sc, const std::string& assignment);

// Validate cross-field invariants; throws ScenarioError on violation.
void validate(const Scenario& sc);

// Deterministic exponential draw with the given mean via inverse-CDF over
// a mt19937_64 stream; used for the Rayleigh direct-link squared gain.
double draw_rayleigh_gain(std::uint64_t seed, double mean);

// Resolve the direct-link squared gain (explicit value or seeded draw).
double resolve_direct_gain(const DirectLink& dl);

}  // namespace urelay
