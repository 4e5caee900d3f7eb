#include "choiceopt/objectives.hpp"

namespace choiceopt {

Eigen::MatrixXd base_item_probs(const Population& pop, const ChoiceInstance& inst,
                                const AlternativeSet& z) {
  require_subset_of_alternatives(z, inst);
  ItemSet full = set_union(inst.choice_set, z.members);
  Eigen::MatrixXd probs(pop.n(), inst.k());
  for (int a = 0; a < pop.n(); ++a) {
    Eigen::VectorXd p = choice_probs(pop.members[a], full);
    for (int i = 0; i < inst.k(); ++i) {
      int pos = static_cast<int>(
          std::lower_bound(full.begin(), full.end(), inst.choice_set[i]) - full.begin());
      probs(a, i) = p[pos];
    }
  }
  return probs;
}

double disagreement_from_probs(const Eigen::MatrixXd& probs) {
  const int n = static_cast<int>(probs.rows());
  double d = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      d += (probs.row(a) - probs.row(b)).cwiseAbs().sum();
  return d;
}

double disagreement(const Population& pop, const ChoiceInstance& inst,
                    const AlternativeSet& z) {
  return disagreement_from_probs(base_item_probs(pop, inst, z));
}

int favorite_count_from_probs(const Eigen::MatrixXd& probs, int x_star_column) {
  int count = 0;
  for (int a = 0; a < probs.rows(); ++a) {
    bool strict = true;
    for (int i = 0; i < probs.cols() && strict; ++i)
      if (i != x_star_column && !(probs(a, x_star_column) > probs(a, i))) strict = false;
    if (strict) ++count;
  }
  return count;
}

int eps_favorite_count_from_probs(const Eigen::MatrixXd& probs, int x_star_column,
                                  double eps) {
  int count = 0;
  for (int a = 0; a < probs.rows(); ++a) {
    bool ok = true;
    for (int i = 0; i < probs.cols() && ok; ++i)
      if (!(probs(a, x_star_column) + eps >= probs(a, i))) ok = false;
    if (ok) ++count;
  }
  return count;
}

namespace {
int x_star_column_of(const ChoiceInstance& inst, int x_star) {
  for (int i = 0; i < inst.k(); ++i)
    if (inst.choice_set[i] == x_star) return i;
  throw SpecError("promotion target " + inst.universe.id(x_star) + " is not in C");
}
}  // namespace

int favorite_count(const Population& pop, const ChoiceInstance& inst,
                   const AlternativeSet& z, int x_star) {
  return favorite_count_from_probs(base_item_probs(pop, inst, z),
                                   x_star_column_of(inst, x_star));
}

int eps_favorite_count(const Population& pop, const ChoiceInstance& inst,
                       const AlternativeSet& z, int x_star, double eps) {
  if (eps < 0) throw SpecError("eps must be >= 0");
  return eps_favorite_count_from_probs(base_item_probs(pop, inst, z),
                                       x_star_column_of(inst, x_star), eps);
}

}  // namespace choiceopt
