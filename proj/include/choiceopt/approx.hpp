#pragma once

#include <cstdint>
#include <vector>

#include "choiceopt/exact.hpp"
#include "choiceopt/models.hpp"
#include "choiceopt/objectives.hpp"
#include "choiceopt/types.hpp"

namespace choiceopt {

/// Configuration for the discretized-table approximation.
struct ApproxConfig {
  double epsilon = 0.01;
  Objective objective = Objective::minimize_d();
  /// CDM only: shrink delta by a factor of 4, tightening the 4-eps bound to eps.
  bool guarantee_mode = false;
  /// Debug: recompute every stored entry's sums from scratch and require exact
  /// equality.
  bool verify_sums = false;
  /// Debug: copy the final table's cells into ApproxResult::cells.
  bool capture_table = false;
};

struct ApproxResult {
  AlternativeSet best_z;
  double value = 0.0;  // D for agreement/disagreement, eps-favorite count for promotion
  std::int64_t cells_materialized = 0;
  double search_fraction = 0.0;  // cells_materialized / 2^m
  std::vector<double> shifts;    // per-individual utility shift (MNL variant only)
  bool guarantee_applicable = true;
  double delta = 0.0;  // discretization step actually used

  struct Cell {
    ItemSet members;        // universe indices
    Eigen::VectorXd sums;   // tracked per-dimension accumulators
  };
  std::vector<Cell> cells;  // filled when ApproxConfig::capture_table is set
};

/// Agreement/Disagreement under MNL. Utilities are shifted per individual so
/// the minimum over the universe is +0.001 before discretization (recorded in
/// `shifts`); delta = eps / (2 k m C(n,2)). The returned value is within eps
/// of the optimum.
ApproxResult optimize_mnl(const Population& pop, const ChoiceInstance& inst,
                          const ApproxConfig& cfg);

/// Agreement/Disagreement under CDM (either parametrization). One tracked
/// dimension per individual-item pair. The eps bound (4 eps with the default
/// delta, eps in guarantee_mode) applies when alternatives exert no pulls on
/// each other; otherwise the sweep is exact but the table is heuristic and
/// `guarantee_applicable` is false.
ApproxResult optimize_cdm(const Population& pop, const ChoiceInstance& inst,
                          const ApproxConfig& cfg);

/// Agreement/Disagreement under NL. One dimension per (individual, internal
/// node with alternative leaf children); subtrees holding only alternatives
/// collapse to a single two-state dimension.
ApproxResult optimize_nl(const Population& pop, const ChoiceInstance& inst,
                         const ApproxConfig& cfg);

/// Promotion under CDM with delta = eps/(10 m): returns the stored set with
/// the most individuals holding x_star as an eps-favorite.
ApproxResult promote_cdm(const Population& pop, const ChoiceInstance& inst, int x_star,
                         double eps);

/// Promotion under NL with the height-adjusted delta; full guarantee.
ApproxResult promote_nl(const Population& pop, const ChoiceInstance& inst, int x_star,
                        double eps);

/// Dispatch on population family and objective kind.
ApproxResult optimize_approx(const Population& pop, const ChoiceInstance& inst,
                             const ApproxConfig& cfg);

}  // namespace choiceopt
