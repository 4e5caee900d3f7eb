#pragma once

#include <Eigen/Dense>

#include "choiceopt/models.hpp"
#include "choiceopt/types.hpp"

namespace choiceopt {

/// Per-individual choice probabilities of the base items x in C, with the
/// distribution taken over C union Z. Row a, column i = Pr(a <- C[i] | C u Z).
Eigen::MatrixXd base_item_probs(const Population& pop, const ChoiceInstance& inst,
                                const AlternativeSet& z);

/// Disagreement D(Z): sum over unordered individual pairs and items x in C of
/// |Pr(a <- x | C u Z) - Pr(b <- x | C u Z)|.
double disagreement(const Population& pop, const ChoiceInstance& inst,
                    const AlternativeSet& z);

/// Number of individuals whose strict favorite within C is x_star, under the
/// distribution over C union Z. Ties never count.
int favorite_count(const Population& pop, const ChoiceInstance& inst,
                   const AlternativeSet& z, int x_star);

/// Number of individuals for whom x_star is an eps-favorite:
/// Pr(x_star) + eps >= Pr(x) for every x in C (non-strict).
int eps_favorite_count(const Population& pop, const ChoiceInstance& inst,
                       const AlternativeSet& z, int x_star, double eps);

/// Counting helpers on a precomputed base-item probability matrix (rows =
/// individuals, columns aligned with inst.choice_set).
int favorite_count_from_probs(const Eigen::MatrixXd& probs, int x_star_column);
int eps_favorite_count_from_probs(const Eigen::MatrixXd& probs, int x_star_column,
                                  double eps);
double disagreement_from_probs(const Eigen::MatrixXd& probs);

}  // namespace choiceopt
