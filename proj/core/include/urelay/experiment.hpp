#pragma once

// Experiment drivers: parameter sweeps across the solution schemes,
// convergence histories over UAV heights, and plot-data emission (CSV and
// simple SVG line charts). Sweep points run in parallel; results are
// assembled in input order so outputs are deterministic.

#include <cstdint>
#include <string>
#include <vector>

#include "urelay/ao.hpp"
#include "urelay/scenario.hpp"
#include "urelay/table.hpp"

namespace urelay::experiment {

enum class SweepVariable { m_total, uav_height, e_tot, p_max };
enum class Scheme { joint, fixed_location, fixed_power, oma };

const char* to_string(SweepVariable v);
const char* to_string(Scheme s);
bool parse_variable(const std::string& name, SweepVariable* out);
bool parse_scheme(const std::string& name, Scheme* out);

struct SweepSpec {
  SweepVariable variable = SweepVariable::m_total;
  std::vector<double> values;  // sorted ascending before the run
  std::vector<Scheme> schemes = {Scheme::joint};
  // Repetition 0 uses the scenario's direct link as configured; repetition
  // r >= 1 redraws it with seed + r around the configured mean gain.
  int repetitions = 1;
  std::uint64_t seed = 0;
};

// Scenario with the swept variable applied.
Scenario apply_value(const Scenario& base, SweepVariable v, double value);

// One scheme solved on one scenario.
ao::AoReport run_scheme(const Scenario& sc, Scheme scheme);

struct SweepOutput {
  table::Table rows;     // one row per (value, scheme, repetition)
  table::Table timings;  // wall-clock sidecar, same key columns
};

SweepOutput run_sweep(const Scenario& base, const SweepSpec& spec);

// Joint-scheme objective history per UAV height, one column per height,
// shorter histories padded with their converged value.
table::Table run_convergence(const Scenario& base,
                             const std::vector<double>& heights);

// Objective per (value, scheme) averaged over repetitions, shaped for
// plotting: the swept value plus one probability column per scheme.
table::Table pivot_for_plot(const SweepOutput& out, const SweepSpec& spec);

// Writes path_stem.csv (format "csv" or "both") and path_stem.svg (format
// "svg-lines" or "both"): the SVG charts every probability column on a
// log10 axis against the first numeric column. Returns the paths written.
std::vector<std::string> emit_plot_data(const table::Table& t,
                                        const std::string& format,
                                        const std::string& path_stem);

}  // namespace urelay::experiment
