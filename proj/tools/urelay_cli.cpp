// Experiment CLI: solve one scenario, sweep a parameter across schemes,
// trace convergence over UAV heights, or dump the blocklength lattice.
// Exit codes: 0 success, 2 infeasible scenario, 1 internal error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "urelay/ao.hpp"
#include "urelay/baselines.hpp"
#include "urelay/blocklength_stage.hpp"
#include "urelay/experiment.hpp"
#include "urelay/scenario.hpp"
#include "urelay/table.hpp"

namespace {

using urelay::Scenario;
namespace ao = urelay::ao;
namespace experiment = urelay::experiment;
namespace table = urelay::table;

struct CommonArgs {
  std::string scenario_path;
  std::vector<std::string> overrides;
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--scenario", args->scenario_path,
                  "Scenario file (defaults to built-in parameters)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", args->overrides,
                  "Override one scenario key, e.g. --set sys.m_total=200");
  cmd->add_option("--out-dir", args->out_dir, "Output directory");
}

Scenario load(const CommonArgs& args) {
  Scenario sc = args.scenario_path.empty()
                    ? urelay::default_scenario()
                    : urelay::load_scenario(args.scenario_path);
  for (const std::string& o : args.overrides) urelay::apply_override(sc, o);
  urelay::validate(sc);
  return sc;
}

std::filesystem::path prepare_out_dir(const CommonArgs& args) {
  std::filesystem::path dir(args.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_text(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string fmt(double v) { return table::Table::format_cell(table::Cell{v}); }

table::Table trace_table(const std::vector<urelay::sca::Trace>& traces) {
  using table::Cell;
  using table::Column;
  using table::ColumnKind;
  table::Table t(std::vector<Column>{
      {"outer", ColumnKind::numeric},
      {"iteration", ColumnKind::numeric},
      {"objective_true", ColumnKind::probability},
      {"objective_surrogate", ColumnKind::probability},
      {"eps_bar_uav", ColumnKind::probability},
      {"max_violation", ColumnKind::numeric},
      {"step_norm", ColumnKind::numeric},
      {"qx", ColumnKind::numeric},
      {"qy", ColumnKind::numeric},
      {"s_br", ColumnKind::numeric},
      {"s_rd", ColumnKind::numeric},
  });
  for (std::size_t outer = 0; outer < traces.size(); ++outer) {
    for (const urelay::sca::TraceRow& r : traces[outer]) {
      t.add_row(std::vector<Cell>{
          static_cast<std::int64_t>(outer + 1),
          static_cast<std::int64_t>(r.iteration), r.objective_true,
          r.objective_surrogate, r.eps_bar_uav, r.max_violation, r.step_norm,
          r.qx, r.qy, r.s_br, r.s_rd});
    }
  }
  return t;
}

std::string report_text(const Scenario& sc, const std::string& scheme,
                        const ao::AoReport& rep, double wall_ms) {
  std::string s;
  s += "scheme: " + scheme + "\n";
  s += "status: " + std::string(ao::to_string(rep.status)) + "\n";
  if (rep.status == ao::AoStatus::infeasible) {
    s += "failure: " + rep.failure + "\n";
    return s;
  }
  s += "objective eps1*(eps3+eps12): " + fmt(rep.breakdown.eps_obj) + "\n";
  s += "eps_bar_dev: " + fmt(rep.breakdown.eps_bar_dev) + "\n";
  s += "eps_bar_uav: " + fmt(rep.breakdown.eps_bar_uav) + "\n";
  s += "outer_iterations: " + std::to_string(rep.outer_iterations) + "\n";
  s += "p1: " + fmt(rep.alloc.pw.p1) + " W\n";
  s += "p2: " + fmt(rep.alloc.pw.p2) + " W\n";
  s += "pu: " + fmt(rep.alloc.pw.pu) + " W\n";
  s += "m_bcast: " + std::to_string(rep.alloc.m.m_bcast) + "\n";
  s += "m_relay: " + std::to_string(rep.alloc.m.m_relay) + "\n";
  s += "q: (" + fmt(rep.alloc.q.x()) + ", " + fmt(rep.alloc.q.y()) + ", " +
       fmt(rep.alloc.q.z()) + ") m\n";
  s += "m_total budget: " + std::to_string(sc.sys.m_total) + "\n";
  s += "feasible_after_each_stage: " +
       std::string(rep.feasible_after_each_stage ? "yes" : "no") + "\n";
  s += "wall_ms: " + fmt(wall_ms) + "\n";
  return s;
}

int cmd_solve(const CommonArgs& common, const std::string& scheme_name) {
  const Scenario sc = load(common);
  experiment::Scheme scheme = experiment::Scheme::joint;
  if (!experiment::parse_scheme(scheme_name, &scheme)) {
    throw CLI::ValidationError("--scheme", "unknown scheme " + scheme_name);
  }
  const auto dir = prepare_out_dir(common);

  const auto t0 = std::chrono::steady_clock::now();
  const ao::AoReport rep = experiment::run_scheme(sc, scheme);
  const double wall_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count();

  write_text(dir / "report.txt", report_text(sc, scheme_name, rep, wall_ms));
  if (rep.status != ao::AoStatus::infeasible) {
    write_text(dir / "breakdown.csv", urelay::breakdown_csv_header() + "\n" +
                                          urelay::breakdown_csv_row(rep.breakdown) +
                                          "\n");
    {
      using table::Cell;
      using table::Column;
      using table::ColumnKind;
      table::Table hist(std::vector<Column>{
          {"iteration", ColumnKind::numeric},
          {"objective", ColumnKind::probability}});
      for (std::size_t i = 0; i < rep.objective_history.size(); ++i) {
        hist.add_row(std::vector<Cell>{static_cast<std::int64_t>(i),
                                       rep.objective_history[i]});
      }
      write_text(dir / "history.csv", hist.to_csv());
    }
    write_text(dir / "power_trace.csv", trace_table(rep.power_traces).to_csv());
    write_text(dir / "location_trace.csv",
               trace_table(rep.location_traces).to_csv());
  }

  std::cout << "status: " << ao::to_string(rep.status) << "\n";
  if (rep.status == ao::AoStatus::infeasible) {
    std::cout << "failure: " << rep.failure << "\n";
    return 2;
  }
  std::cout << "objective: " << fmt(rep.breakdown.eps_obj) << "\n"
            << "outputs in " << dir.string() << "\n";
  return 0;
}

std::vector<double> parse_values(const std::vector<std::string>& raw) {
  std::vector<double> out;
  for (const std::string& s : raw) out.push_back(std::stod(s));
  return out;
}

int cmd_sweep(const CommonArgs& common, const std::string& variable,
              const std::vector<std::string>& value_strs,
              const std::vector<std::string>& scheme_strs, int reps,
              std::uint64_t seed, const std::string& format) {
  const Scenario sc = load(common);
  experiment::SweepSpec spec;
  if (!experiment::parse_variable(variable, &spec.variable)) {
    throw CLI::ValidationError("--variable", "unknown variable " + variable);
  }
  spec.values = parse_values(value_strs);
  spec.schemes.clear();
  for (const std::string& s : scheme_strs) {
    experiment::Scheme sch;
    if (!experiment::parse_scheme(s, &sch)) {
      throw CLI::ValidationError("--schemes", "unknown scheme " + s);
    }
    spec.schemes.push_back(sch);
  }
  spec.repetitions = reps;
  spec.seed = seed;

  const auto dir = prepare_out_dir(common);
  const experiment::SweepOutput out = experiment::run_sweep(sc, spec);
  write_text(dir / "sweep.csv", out.rows.to_csv());
  write_text(dir / "sweep_timings.csv", out.timings.to_csv());
  const table::Table pivot = experiment::pivot_for_plot(out, spec);
  const auto written =
      experiment::emit_plot_data(pivot, format, (dir / "sweep_plot").string());

  std::cout << "sweep rows: " << out.rows.row_count() << "\n";
  for (const std::string& p : written) std::cout << "wrote " << p << "\n";
  std::cout << "outputs in " << dir.string() << "\n";
  return 0;
}

int cmd_converge(const CommonArgs& common,
                 const std::vector<std::string>& height_strs,
                 const std::string& format) {
  const Scenario sc = load(common);
  const std::vector<double> heights = parse_values(height_strs);
  const auto dir = prepare_out_dir(common);
  const table::Table t = experiment::run_convergence(sc, heights);
  const auto written =
      experiment::emit_plot_data(t, format, (dir / "converge").string());
  for (const std::string& p : written) std::cout << "wrote " << p << "\n";
  return 0;
}

int cmd_lattice(const CommonArgs& common) {
  const Scenario sc = load(common);
  const ao::Problem pb = ao::make_problem(sc);
  const ao::InitResult init = ao::initialize(pb);
  if (!init.ok) {
    std::cout << "status: infeasible\nfailure: " << init.failure << "\n";
    return 2;
  }
  const urelay::LinkState link = ao::link_for(pb, init.alloc.q);
  const auto rows =
      urelay::blocklength::lattice(link, init.alloc.pw, pb.params);

  using table::Cell;
  using table::Column;
  using table::ColumnKind;
  table::Table t(std::vector<Column>{
      {"m_bcast", ColumnKind::numeric},
      {"m_relay", ColumnKind::numeric},
      {"objective", ColumnKind::probability},
      {"eps_bar_uav", ColumnKind::probability},
      {"energy", ColumnKind::numeric},
      {"feasible", ColumnKind::numeric},
  });
  for (const auto& r : rows) {
    t.add_row(std::vector<Cell>{
        static_cast<std::int64_t>(r.m_bcast),
        static_cast<std::int64_t>(r.m_relay), r.objective, r.eps_bar_uav,
        r.energy, static_cast<std::int64_t>(r.feasible ? 1 : 0)});
  }
  const auto dir = prepare_out_dir(common);
  write_text(dir / "lattice.csv", t.to_csv());
  std::cout << "lattice points: " << rows.size() << "\nwrote "
            << (dir / "lattice.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV relay decoding-error minimization experiments"};
  app.require_subcommand(1);

  CommonArgs solve_args, sweep_args, converge_args, lattice_args;
  std::string scheme = "joint";
  std::string variable;
  std::vector<std::string> values, schemes = {"joint"};
  std::vector<std::string> heights = {"80", "100", "120"};
  int reps = 1;
  std::uint64_t seed = 0;
  std::string sweep_format = "csv", converge_format = "csv";

  CLI::App* c_solve = app.add_subcommand("solve", "Solve one scenario");
  add_common(c_solve, &solve_args);
  c_solve->add_option("--scheme", scheme,
                      "joint | fixed_location | fixed_power | oma");

  CLI::App* c_sweep =
      app.add_subcommand("sweep", "Sweep one parameter across schemes");
  add_common(c_sweep, &sweep_args);
  c_sweep
      ->add_option("--variable", variable,
                   "m_total | uav_height | e_tot | p_max")
      ->required();
  c_sweep->add_option("--values", values, "Sweep values")
      ->required()
      ->delimiter(',');
  c_sweep->add_option("--schemes", schemes, "Schemes to run")->delimiter(',');
  c_sweep->add_option("--reps", reps,
                      "Repetitions (rep 0 as configured, others redraw the "
                      "direct link)");
  c_sweep->add_option("--seed", seed, "Base seed for repetition draws");
  c_sweep->add_option("--format", sweep_format, "csv | svg-lines | both");

  CLI::App* c_conv =
      app.add_subcommand("converge", "Objective history per UAV height");
  add_common(c_conv, &converge_args);
  c_conv->add_option("--heights", heights, "UAV heights")->delimiter(',');
  c_conv->add_option("--format", converge_format, "csv | svg-lines | both");

  CLI::App* c_lat = app.add_subcommand(
      "lattice-dump", "Dump the blocklength search lattice at the initial "
                      "feasible allocation");
  add_common(c_lat, &lattice_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_solve->parsed()) return cmd_solve(solve_args, scheme);
    if (c_sweep->parsed()) {
      return cmd_sweep(sweep_args, variable, values, schemes, reps, seed,
                       sweep_format);
    }
    if (c_conv->parsed()) return cmd_converge(converge_args, heights, converge_format);
    if (c_lat->parsed()) return cmd_lattice(lattice_args);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
