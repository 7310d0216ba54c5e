#include "urelay/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <stdexcept>
#include <thread>

#include "urelay/baselines.hpp"

namespace urelay::experiment {
namespace {

struct Task {
  Scenario scenario;
  Scheme scheme = Scheme::joint;
  double value = 0.0;
  int rep = 0;
  std::int64_t seed_used = -1;
};

struct TaskResult {
  std::string status;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double eps_bar_dev = std::numeric_limits<double>::quiet_NaN();
  double eps_bar_uav = std::numeric_limits<double>::quiet_NaN();
  std::int64_t outer_iterations = 0;
  std::int64_t m_bcast = 0, m_relay = 0;
  double p1 = 0.0, p2 = 0.0, pu = 0.0;
  double qx = 0.0, qy = 0.0;
  double wall_ms = 0.0;
};

TaskResult run_one(const Task& t) {
  TaskResult r;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const ao::AoReport rep = run_scheme(t.scenario, t.scheme);
    r.status = ao::to_string(rep.status);
    if (rep.status != ao::AoStatus::infeasible) {
      r.objective = rep.breakdown.eps_obj;
      r.eps_bar_dev = rep.breakdown.eps_bar_dev;
      r.eps_bar_uav = rep.breakdown.eps_bar_uav;
      r.outer_iterations = rep.outer_iterations;
      r.m_bcast = rep.alloc.m.m_bcast;
      r.m_relay = rep.alloc.m.m_relay;
      r.p1 = rep.alloc.pw.p1;
      r.p2 = rep.alloc.pw.p2;
      r.pu = rep.alloc.pw.pu;
      r.qx = rep.alloc.q.x();
      r.qy = rep.alloc.q.y();
    }
  } catch (const std::exception& e) {
    r.status = std::string("error: ") + e.what();
  }
  r.wall_ms = std::chrono::duration<double, std::milli>(
                  std::chrono::steady_clock::now() - t0)
                  .count();
  return r;
}

std::vector<TaskResult> run_parallel(const std::vector<Task>& tasks) {
  std::vector<TaskResult> results(tasks.size());
  const std::size_t wave =
      std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t start = 0; start < tasks.size(); start += wave) {
    const std::size_t end = std::min(tasks.size(), start + wave);
    std::vector<std::future<TaskResult>> futs;
    futs.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) {
      futs.push_back(std::async(std::launch::async,
                                [&tasks, i] { return run_one(tasks[i]); }));
    }
    for (std::size_t i = start; i < end; ++i) {
      results[i] = futs[i - start].get();
    }
  }
  return results;
}

std::string format_double(double v) {
  return table::Table::format_cell(table::Cell{v});
}

}  // namespace

const char* to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::m_total: return "m_total";
    case SweepVariable::uav_height: return "uav_height";
    case SweepVariable::e_tot: return "e_tot";
    case SweepVariable::p_max: return "p_max";
  }
  return "unknown";
}

const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::joint: return "joint";
    case Scheme::fixed_location: return "fixed_location";
    case Scheme::fixed_power: return "fixed_power";
    case Scheme::oma: return "oma";
  }
  return "unknown";
}

bool parse_variable(const std::string& name, SweepVariable* out) {
  for (SweepVariable v : {SweepVariable::m_total, SweepVariable::uav_height,
                          SweepVariable::e_tot, SweepVariable::p_max}) {
    if (name == to_string(v)) {
      *out = v;
      return true;
    }
  }
  return false;
}

bool parse_scheme(const std::string& name, Scheme* out) {
  for (Scheme s : {Scheme::joint, Scheme::fixed_location, Scheme::fixed_power,
                   Scheme::oma}) {
    if (name == to_string(s)) {
      *out = s;
      return true;
    }
  }
  return false;
}

Scenario apply_value(const Scenario& base, SweepVariable v, double value) {
  Scenario sc = base;
  switch (v) {
    case SweepVariable::m_total:
      sc.sys.m_total = static_cast<int>(std::lround(value));
      break;
    case SweepVariable::uav_height:
      sc.sys.uav_height = value;
      sc.geom.uav.z() = value;
      break;
    case SweepVariable::e_tot:
      sc.sys.e_tot = value;
      break;
    case SweepVariable::p_max:
      sc.sys.p_max_w = value;
      break;
  }
  return sc;
}

ao::AoReport run_scheme(const Scenario& sc, Scheme scheme) {
  const ao::Problem pb = ao::make_problem(sc);
  switch (scheme) {
    case Scheme::joint: return ao::solve(pb);
    case Scheme::fixed_location: return baselines::solve_fixed_location(pb);
    case Scheme::fixed_power: return baselines::solve_fixed_power(pb);
    case Scheme::oma: return baselines::solve_oma(pb);
  }
  throw std::invalid_argument("unknown scheme");
}

SweepOutput run_sweep(const Scenario& base, const SweepSpec& spec) {
  if (spec.values.empty()) throw std::invalid_argument("sweep needs values");
  if (spec.schemes.empty()) throw std::invalid_argument("sweep needs schemes");
  if (spec.repetitions < 1) throw std::invalid_argument("repetitions >= 1");

  std::vector<double> values = spec.values;
  std::sort(values.begin(), values.end());

  std::vector<Task> tasks;
  for (double value : values) {
    for (Scheme scheme : spec.schemes) {
      for (int rep = 0; rep < spec.repetitions; ++rep) {
        Task t;
        t.scenario = apply_value(base, spec.variable, value);
        t.scheme = scheme;
        t.value = value;
        t.rep = rep;
        if (rep > 0) {
          t.scenario.direct.explicit_gain = false;
          t.scenario.direct.rayleigh_seed = spec.seed + static_cast<std::uint64_t>(rep);
          t.seed_used = static_cast<std::int64_t>(t.scenario.direct.rayleigh_seed);
        } else if (!base.direct.explicit_gain) {
          t.seed_used = static_cast<std::int64_t>(base.direct.rayleigh_seed);
        }
        tasks.push_back(std::move(t));
      }
    }
  }

  const std::vector<TaskResult> results = run_parallel(tasks);

  using table::Cell;
  using table::Column;
  using table::ColumnKind;
  table::Table rows(std::vector<Column>{
      {"variable", ColumnKind::label},
      {"value", ColumnKind::numeric},
      {"scheme", ColumnKind::label},
      {"rep", ColumnKind::numeric},
      {"seed", ColumnKind::numeric},
      {"status", ColumnKind::label},
      {"objective", ColumnKind::probability},
      {"eps_bar_dev", ColumnKind::probability},
      {"eps_bar_uav", ColumnKind::probability},
      {"outer_iterations", ColumnKind::numeric},
      {"m_bcast", ColumnKind::numeric},
      {"m_relay", ColumnKind::numeric},
      {"p1", ColumnKind::numeric},
      {"p2", ColumnKind::numeric},
      {"pu", ColumnKind::numeric},
      {"qx", ColumnKind::numeric},
      {"qy", ColumnKind::numeric},
  });
  table::Table timings(std::vector<Column>{
      {"variable", ColumnKind::label},
      {"value", ColumnKind::numeric},
      {"scheme", ColumnKind::label},
      {"rep", ColumnKind::numeric},
      {"wall_ms", ColumnKind::numeric},
  });

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const Task& t = tasks[i];
    const TaskResult& r = results[i];
    rows.add_row(std::vector<Cell>{
        std::string(to_string(spec.variable)), t.value,
        std::string(to_string(t.scheme)), static_cast<std::int64_t>(t.rep),
        t.seed_used, r.status, r.objective, r.eps_bar_dev, r.eps_bar_uav,
        r.outer_iterations, r.m_bcast, r.m_relay, r.p1, r.p2, r.pu, r.qx,
        r.qy});
    timings.add_row(std::vector<Cell>{
        std::string(to_string(spec.variable)), t.value,
        std::string(to_string(t.scheme)), static_cast<std::int64_t>(t.rep),
        r.wall_ms});
  }
  return SweepOutput{std::move(rows), std::move(timings)};
}

table::Table run_convergence(const Scenario& base,
                             const std::vector<double>& heights) {
  if (heights.empty()) throw std::invalid_argument("need at least one height");
  std::vector<Task> tasks;
  for (double h : heights) {
    Task t;
    t.scenario = apply_value(base, SweepVariable::uav_height, h);
    t.scheme = Scheme::joint;
    t.value = h;
    tasks.push_back(std::move(t));
  }

  std::vector<std::vector<double>> histories(tasks.size());
  const std::size_t wave = std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t start = 0; start < tasks.size(); start += wave) {
    const std::size_t end = std::min(tasks.size(), start + wave);
    std::vector<std::future<std::vector<double>>> futs;
    for (std::size_t i = start; i < end; ++i) {
      futs.push_back(std::async(std::launch::async, [&tasks, i] {
        const ao::AoReport rep = ao::solve(ao::make_problem(tasks[i].scenario));
        return rep.objective_history;
      }));
    }
    for (std::size_t i = start; i < end; ++i) {
      histories[i] = futs[i - start].get();
    }
  }

  // Row i holds the objective after outer iteration i+1; the pre-cycle value
  // is dropped so the trace length equals the iteration count. Shorter
  // histories are padded with their converged value.
  std::size_t max_post = 1;
  for (const auto& h : histories) {
    if (h.size() > 1) max_post = std::max(max_post, h.size() - 1);
  }

  using table::Cell;
  using table::Column;
  using table::ColumnKind;
  std::vector<Column> cols{{"iteration", ColumnKind::numeric}};
  for (double h : heights) {
    cols.push_back(Column{"h" + format_double(h), ColumnKind::probability});
  }
  table::Table out(std::move(cols));
  for (std::size_t it = 0; it < max_post; ++it) {
    std::vector<Cell> row;
    row.push_back(static_cast<std::int64_t>(it + 1));
    for (const auto& h : histories) {
      const double v = h.size() > 1
                           ? h[std::min(it + 1, h.size() - 1)]
                           : std::numeric_limits<double>::quiet_NaN();
      row.push_back(v);
    }
    out.add_row(std::move(row));
  }
  return out;
}

table::Table pivot_for_plot(const SweepOutput& out, const SweepSpec& spec) {
  using table::Cell;
  using table::Column;
  using table::ColumnKind;
  std::vector<Column> cols{{std::string(to_string(spec.variable)),
                            ColumnKind::numeric}};
  for (Scheme s : spec.schemes) {
    cols.push_back(Column{std::string(to_string(s)), ColumnKind::probability});
  }
  table::Table pivot(std::move(cols));

  const int c_value = out.rows.column_index("value");
  const int c_scheme = out.rows.column_index("scheme");
  const int c_obj = out.rows.column_index("objective");

  std::vector<double> values = spec.values;
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  for (double value : values) {
    std::vector<Cell> row{value};
    for (Scheme s : spec.schemes) {
      double sum = 0.0;
      int count = 0;
      for (std::size_t i = 0; i < out.rows.row_count(); ++i) {
        const double rv = std::get<double>(out.rows.at(i, c_value));
        const std::string& rs =
            std::get<std::string>(out.rows.at(i, c_scheme));
        if (rv == value && rs == to_string(s)) {
          const double obj = std::get<double>(out.rows.at(i, c_obj));
          if (!std::isnan(obj)) {
            sum += obj;
            ++count;
          }
        }
      }
      row.push_back(count ? sum / count
                          : std::numeric_limits<double>::quiet_NaN());
    }
    pivot.add_row(std::move(row));
  }
  return pivot;
}

namespace {

std::string render_svg(const table::Table& t) {
  const int width = 640, height = 480;
  const double ml = 70, mr = 20, mt = 20, mb = 45;
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c",
                           "#9467bd", "#ff7f0e", "#8c564b"};

  int x_col = -1;
  std::vector<int> y_cols;
  for (std::size_t i = 0; i < t.columns().size(); ++i) {
    if (x_col < 0 && t.columns()[i].kind == table::ColumnKind::numeric) {
      x_col = static_cast<int>(i);
    }
    if (t.columns()[i].kind == table::ColumnKind::probability) {
      y_cols.push_back(static_cast<int>(i));
    }
  }

  auto cell_num = [&](std::size_t r, int c) -> double {
    const table::Cell& cell = t.at(r, static_cast<std::size_t>(c));
    if (const double* d = std::get_if<double>(&cell)) return *d;
    if (const std::int64_t* v = std::get_if<std::int64_t>(&cell)) {
      return static_cast<double>(*v);
    }
    return std::numeric_limits<double>::quiet_NaN();
  };

  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  bool have = false;
  for (std::size_t r = 0; r < t.row_count(); ++r) {
    const double x = x_col >= 0 ? cell_num(r, x_col) : static_cast<double>(r);
    if (std::isnan(x)) continue;
    for (int c : y_cols) {
      const double v = cell_num(r, c);
      if (std::isnan(v) || v <= 0.0) continue;
      const double y = std::log10(std::max(v, 1e-320));
      if (!have) {
        x_lo = x_hi = x;
        y_lo = y_hi = y;
        have = true;
      } else {
        x_lo = std::min(x_lo, x);
        x_hi = std::max(x_hi, x);
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
      }
    }
  }
  if (!have) {
    x_lo = y_lo = 0;
    x_hi = y_hi = 1;
  }
  if (x_hi - x_lo < 1e-12) x_hi = x_lo + 1;
  if (y_hi - y_lo < 1e-12) y_hi = y_lo + 1;

  auto sx = [&](double x) {
    return ml + (x - x_lo) / (x_hi - x_lo) * (width - ml - mr);
  };
  auto sy = [&](double y) {
    return height - mb - (y - y_lo) / (y_hi - y_lo) * (height - mt - mb);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
         "height=\"480\" viewBox=\"0 0 640 480\">\n";
  svg += "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                "stroke=\"black\"/>\n",
                ml, height - mb, static_cast<double>(width) - mr, height - mb);
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                "stroke=\"black\"/>\n",
                ml, mt, ml, height - mb);
  svg += buf;
  // Axis extent labels: x range and log10 y range.
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.1f\" y=\"%d\" font-size=\"12\">%s</text>\n", ml,
                height - 25, format_double(x_lo).c_str());
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%.1f\" y=\"%d\" font-size=\"12\" "
                "text-anchor=\"end\">%s</text>\n",
                static_cast<double>(width) - mr, height - 25,
                format_double(x_hi).c_str());
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"5\" y=\"%.1f\" font-size=\"12\">1e%s</text>\n",
                height - mb, format_double(y_lo).c_str());
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<text x=\"5\" y=\"%.1f\" font-size=\"12\">1e%s</text>\n",
                mt + 10, format_double(y_hi).c_str());
  svg += buf;

  for (std::size_t k = 0; k < y_cols.size(); ++k) {
    const char* color = palette[k % 6];
    std::string points;
    for (std::size_t r = 0; r < t.row_count(); ++r) {
      const double x =
          x_col >= 0 ? cell_num(r, x_col) : static_cast<double>(r);
      const double v = cell_num(r, y_cols[k]);
      if (std::isnan(x) || std::isnan(v) || v <= 0.0) continue;
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", sx(x),
                    sy(std::log10(std::max(v, 1e-320))));
      points += buf;
    }
    svg += "<polyline fill=\"none\" stroke=\"";
    svg += color;
    svg += "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" "
                  "fill=\"%s\">%s</text>\n",
                  ml + 8, mt + 14 + 16 * static_cast<double>(k), color,
                  t.columns()[static_cast<std::size_t>(y_cols[k])].name.c_str());
    svg += buf;
  }
  svg += "</svg>\n";
  return svg;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

std::vector<std::string> emit_plot_data(const table::Table& t,
                                        const std::string& format,
                                        const std::string& path_stem) {
  const bool want_csv = format == "csv" || format == "both";
  const bool want_svg = format == "svg-lines" || format == "both";
  if (!want_csv && !want_svg) {
    throw std::invalid_argument("format must be csv, svg-lines, or both");
  }
  std::vector<std::string> written;
  if (want_csv) {
    const std::string path = path_stem + ".csv";
    write_file(path, t.to_csv());
    written.push_back(path);
  }
  if (want_svg) {
    const std::string path = path_stem + ".svg";
    write_file(path, render_svg(t));
    written.push_back(path);
  }
  return written;
}

}  // namespace urelay::experiment
