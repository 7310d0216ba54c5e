#pragma once

// Alternating-optimization driver: cycles the power, blocklength, and
// position stages from a feasible initial allocation until the end-to-end
// objective stops improving. Every stage output is accepted only if it keeps
// the exact constraints satisfied and does not increase the exact objective,
// so the reported objective history is non-increasing by construction.

#include <Eigen/Core>
#include <string>
#include <vector>

#include "urelay/dep.hpp"
#include "urelay/link.hpp"
#include "urelay/scenario.hpp"
#include "urelay/sca.hpp"

namespace urelay::ao {

enum class AoStatus { converged, converged_stall, iteration_limit, infeasible };
const char* to_string(AoStatus s);

struct Allocation {
  PowerTriple pw;
  BlocklengthPair m;
  Eigen::Vector3d q = Eigen::Vector3d::Zero();
};

struct ConstraintViolation {
  std::string name;
  double amount;  // positive violation in the constraint's natural units
};

// One solve's immutable inputs with the direct-link gain resolved.
struct Problem {
  SystemParams params;
  Geometry geom;
  SolverParams solver;
  double gain_bd_sq = 0.0;
};

Problem make_problem(const Scenario& sc);

LinkState link_for(const Problem& pb, const Eigen::Vector3d& q);

// Exact feasibility of an allocation: power sum, position box, blocklength
// budget, UAV error cap, energy budget, positivity. Empty means feasible.
std::vector<ConstraintViolation> check_feasibility(const Allocation& a,
                                                   const Problem& pb);

struct InitResult {
  bool ok = false;
  Allocation alloc;
  std::string failure;  // first failed check when !ok
};

// Deterministic feasible-point construction: hover at the configured start
// position (clamped into the box), powers p1:p2 split at 7:3 scaled by a
// bisected fraction of p_max, relay power from 90% of the remaining energy,
// blocklengths near the budget midpoint. When the 7:3 split cannot reach
// feasibility the split ratio is escalated through a fixed ladder.
InitResult initialize(const Problem& pb);

struct StageToggles {
  bool power = true;
  bool blocklength = true;
  bool location = true;
};

struct BlockChoice {
  int outer_iter = 0;
  int m_bcast = 0;
  int m_relay = 0;
  double objective = 0.0;
};

struct AoReport {
  AoStatus status = AoStatus::infeasible;
  Allocation alloc;
  DepBreakdown breakdown{};
  double log_objective = 0.0;
  // objective before the first cycle and after each outer iteration.
  std::vector<double> objective_history;
  std::vector<double> log_objective_history;
  int outer_iterations = 0;
  std::vector<sca::Trace> power_traces;     // one trace per outer iteration
  std::vector<sca::Trace> location_traces;  // ditto
  std::vector<BlockChoice> block_history;
  std::string failure;
  LinkState link{};
  // True when check_feasibility stayed empty after every stage acceptance.
  bool feasible_after_each_stage = true;
};

AoReport solve(const Problem& pb, const StageToggles& toggles = {});
AoReport solve(const Scenario& sc);

}  // namespace urelay::ao
