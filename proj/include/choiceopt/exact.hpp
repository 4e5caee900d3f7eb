#pragma once

#include <cstdint>

#include "choiceopt/models.hpp"
#include "choiceopt/objectives.hpp"
#include "choiceopt/types.hpp"

namespace choiceopt {

/// What to optimize over Z. Promote carries the target's universe index and
/// scores sets by strict favorite count.
struct Objective {
  enum class Kind { MinimizeD, MaximizeD, Promote };
  Kind kind = Kind::MinimizeD;
  int x_star = -1;

  static Objective minimize_d() { return {Kind::MinimizeD, -1}; }
  static Objective maximize_d() { return {Kind::MaximizeD, -1}; }
  static Objective promote(int x_star) { return {Kind::Promote, x_star}; }
};

struct ExactResult {
  AlternativeSet z;
  double value = 0.0;
  std::int64_t evaluations = 0;
};

/// Exhaustive optimum over all subsets of C-bar. Ties broken by the
/// lexicographically smallest sorted member-id list. Guarded at m <= 25;
/// the subset space is partitioned by prefix and scanned in parallel.
ExactResult brute_force(const Population& pop, const ChoiceInstance& inst,
                        const Objective& objective);

/// Adds the single item that most improves the objective until no strict
/// improvement (> 1e-12) exists. Ties broken by lowest item id.
ExactResult greedy(const Population& pop, const ChoiceInstance& inst,
                   const Objective& objective);

// ---------------------------------------------------------------------------
// Closed-form promotion rules for the tractable restrictions. Each refuses
// (SpecError naming the condition) when its precondition does not hold, and
// otherwise returns a set attaining the brute-force favorite-count optimum.
// ---------------------------------------------------------------------------

/// |C| = 2 CDM where each individual's pull p_a(z, .) is the same for every
/// alternative z, and the include filter p(z, x_star) > p(z, competitor)
/// agrees across individuals. Includes exactly the alternatives passing the
/// filter.
AlternativeSet promote_cdm_2item_equal(const Population& pop, const ChoiceInstance& inst,
                                       int x_star);

/// All individuals share one tree topology (utilities may differ). Includes
/// every alternative whose branch off x_star's root path already holds a base
/// item, i.e. alternatives that are neither siblings of an ancestor of x_star
/// nor cause such a sibling to enter the induced subtree.
AlternativeSet promote_nl_same_tree(const Population& pop, const ChoiceInstance& inst,
                                    int x_star);

/// Shared aspect structure where every alternative either shares no aspects
/// with x_star or none with any competitor. Includes the alternatives that
/// touch a competitor but not x_star.
AlternativeSet promote_eba_disjoint(const Population& pop, const ChoiceInstance& inst,
                                    int x_star);

/// Sum of exp-utilities over C for standard-form (zero utility sum) MNL
/// parameters. Refuses when the sum over the universe is not zero (within
/// 1e-9).
double stubbornness(const MnlParams& params, const ChoiceInstance& inst);

/// Equal-stubbornness, equal-alternative-utility MNL: Agreement's optimum is
/// all of C-bar and Disagreement's is the empty set.
AlternativeSet solve_equal_stubbornness(const Population& pop, const ChoiceInstance& inst,
                                        const Objective& objective);

/// Objective value of a given set (D or favorite count, per the objective).
double evaluate_objective(const Population& pop, const ChoiceInstance& inst,
                          const Objective& objective, const AlternativeSet& z);

}  // namespace choiceopt
