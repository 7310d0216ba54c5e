#pragma once

// Blocklength stage: at fixed powers and position, exhaustively search the
// integer rectangle of (phase-1, phase-2) blocklengths for the pair
// minimizing eps1*(eps3+eps12), subject to the UAV error cap and the energy
// budget. Lower bounds come from requiring each coding rate to sit below
// capacity (any excluded pair has a phase error >= 1/2).

#include <stdexcept>
#include <string>
#include <vector>

#include "urelay/dep.hpp"
#include "urelay/link.hpp"
#include "urelay/scenario.hpp"

namespace urelay::blocklength {

struct Bounds {
  int m2_lb = 0;  // smallest phase-1 blocklength with positive rate margin
  int m3_lb = 0;  // same for phase 2
  int m2_ub = 0;  // m_total - m3_lb
  bool nonempty() const { return m2_lb <= m2_ub; }
};

class BlocklengthError : public std::runtime_error {
 public:
  BlocklengthError(std::string binding, const std::string& what)
      : std::runtime_error(what), binding_(std::move(binding)) {}
  // Which requirement emptied the search: "bounds", "eps_uav_max", "energy".
  const std::string& binding() const { return binding_; }

 private:
  std::string binding_;
};

// Throws std::domain_error when either SNR is nonpositive (the lower bound
// would be unbounded).
Bounds compute_bounds(const LinkState& link, const PowerTriple& pw,
                      const SystemParams& params);

bool energy_feasible_m(const PowerTriple& pw, const BlocklengthPair& m,
                       const SystemParams& params);

struct SearchResult {
  BlocklengthPair m;
  DepBreakdown breakdown;
  double log_objective = 0.0;
};

// Deterministic exhaustive search; ties prefer smaller phase-1 length, then
// smaller phase-2 length. Throws BlocklengthError when no feasible pair
// exists, naming the binding constraint.
SearchResult search(const LinkState& link, const PowerTriple& pw,
                    const SystemParams& params);

struct LatticeRow {
  int m_bcast = 0, m_relay = 0;
  double objective = 0.0;
  double eps_bar_uav = 0.0;
  double energy = 0.0;
  bool feasible = false;
};

// Full rectangle evaluation for debugging dumps.
std::vector<LatticeRow> lattice(const LinkState& link, const PowerTriple& pw,
                                const SystemParams& params);

}  // namespace urelay::blocklength
