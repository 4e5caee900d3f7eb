#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "choiceopt/exact.hpp"
#include "choiceopt/models.hpp"
#include "choiceopt/types.hpp"

namespace choiceopt {

/// One linear monomial `coef * var`.
struct LinearTerm {
  double coef;
  std::string var;
  bool operator==(const LinearTerm&) const = default;
};

/// One bilinear monomial `coef * var1 * var2` (always a z_a * x_i product).
struct BilinearTerm {
  double coef;
  std::string var1;
  std::string var2;
  bool operator==(const BilinearTerm&) const = default;
};

struct MiblpConstraint {
  std::string name;
  std::vector<LinearTerm> linear;
  std::vector<BilinearTerm> bilinear;
  char relation = '<';  // '<' for <=, '>' for >=, '=' for equality
  double rhs = 0.0;
  bool operator==(const MiblpConstraint&) const = default;
};

/// Mixed-integer bilinear program for Agreement or Disagreement: binary
/// inclusion variables x_i, continuous normalization variables z_a coupled to
/// them by bilinear rows, |.|-linearization variables d (and sign binaries g
/// for the maximization).
struct MiblpModel {
  bool maximize = false;
  std::vector<LinearTerm> objective;
  std::vector<MiblpConstraint> constraints;
  std::vector<std::string> binaries;
  std::vector<std::string> frees;
  Eigen::MatrixXd exp_utilities;  // e_{ya}: item y (universe index) by individual a
  Eigen::VectorXd exp_c_totals;   // e_{Ca} per individual

  bool operator==(const MiblpModel& o) const {
    return maximize == o.maximize && objective == o.objective &&
           constraints == o.constraints && binaries == o.binaries && frees == o.frees;
  }
};

/// Builds the exact constraint system for an MNL population.
MiblpModel export_miblp(const Population& pop, const ChoiceInstance& inst,
                        const Objective& objective);

/// Deterministic, diffable LP-style text with bilinear products spelled as
/// bracketed `[ coef za * xi ]` terms.
std::string render_miblp(const MiblpModel& model);

/// Parses `render_miblp` output back; parse(render(m)) structurally equals m.
MiblpModel parse_miblp(const std::string& text);

}  // namespace choiceopt
