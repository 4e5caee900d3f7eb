#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "choiceopt/types.hpp"

namespace choiceopt {

// ---------------------------------------------------------------------------
// Parameter types. All are immutable after construction; every probability
// operation is a pure function of (params, set, item).
// ---------------------------------------------------------------------------

/// Per-individual multinomial logit utilities, one entry per universe item
/// (nats). Entries may be kNegInf, meaning exp-utility exactly zero.
struct MnlParams {
  Eigen::VectorXd utilities;

  int universe_size() const { return static_cast<int>(utilities.size()); }
};

/// Low-rank pull factorization: pull(z, x) = context.row(z) . target.row(x),
/// with the self-pull pull(x, x) fixed to zero by the model.
struct CdmLowRank {
  int rank = 0;
  Eigen::MatrixXd target;   // |U| x rank
  Eigen::MatrixXd context;  // |U| x rank
};

/// Context-dependent model: base utilities plus additive pulls p(z, x)
/// exerted by each present item z on every other item x.
struct CdmParams {
  Eigen::VectorXd base_utilities;  // may contain kNegInf
  Eigen::MatrixXd pulls;           // pulls(z, x); diagonal must be zero
  std::optional<CdmLowRank> low_rank;

  int universe_size() const { return static_cast<int>(base_utilities.size()); }

  /// Builds dense pulls from a low-rank factorization (diagonal zeroed).
  static CdmParams from_low_rank(Eigen::VectorXd base, CdmLowRank lr);

  void validate() const;
};

/// Utility-adjusted-pull parametrization: Pr(x | S) proportional to
/// exp(sum_{w in S} q(w, x)), q(x, x) = 0. Not interconvertible with
/// CdmParams; the two are distinct model families.
struct CdmAltParams {
  Eigen::MatrixXd q;  // q(w, x); diagonal must be zero; entries may be kNegInf

  int universe_size() const { return static_cast<int>(q.rows()); }
  void validate() const;
};

/// Generalized nested-logit tree: leaves are universe items, internal nodes
/// are named categories, every non-root node carries a utility. A choice
/// descends from the root, picking among the children present in the induced
/// subtree by MNL on node utilities.
struct NlTree {
  struct Node {
    int parent = -1;
    std::vector<int> children;
    double utility = 0.0;  // unused on the root
    int item = -1;         // universe index for leaves, -1 for internal nodes
    std::string name;      // category label for internal nodes
  };

  std::vector<Node> nodes;  // nodes[0] is the root
  std::vector<int> leaf_of_item;

  int universe_size() const { return static_cast<int>(leaf_of_item.size()); }
  int root() const { return 0; }
  bool is_leaf(int v) const { return nodes[v].item >= 0; }

  /// Maximum root-to-leaf edge count.
  int height() const;

  /// Path of nodes from root to the item's leaf, excluding the root.
  std::vector<int> path_to_item(int item) const;

  void validate(int universe_size) const;
};

/// Elimination-by-aspects: each item carries a set of aspect tokens, each
/// aspect a strictly positive utility.
struct EbaParams {
  std::vector<std::string> aspect_names;
  std::vector<std::vector<int>> item_aspects;  // per universe item, sorted aspect indices
  Eigen::VectorXd aspect_utility;              // > 0

  int universe_size() const { return static_cast<int>(item_aspects.size()); }
  void validate() const;
};

enum class Family { Mnl, Cdm, CdmAlt, Nl, Eba };

const char* family_name(Family f);
Family family_from_name(const std::string& name);

using ModelParams = std::variant<MnlParams, CdmParams, CdmAltParams, NlTree, EbaParams>;

Family family_of(const ModelParams& m);
int universe_size_of(const ModelParams& m);

/// Heterogeneous group: one parameter set per individual, all of one family,
/// all covering the same universe.
struct Population {
  std::vector<std::string> labels;
  std::vector<ModelParams> members;

  int n() const { return static_cast<int>(members.size()); }
  Family family() const;
  void validate(int universe_size) const;
};

// ---------------------------------------------------------------------------
// Choice probabilities
// ---------------------------------------------------------------------------

/// Softmax over the given utilities with max-shift stabilization; kNegInf
/// entries get probability exactly zero. Throws DegenerateDistribution if all
/// entries are kNegInf.
Eigen::VectorXd stable_softmax(const Eigen::VectorXd& utilities);

Eigen::VectorXd mnl_probs(const MnlParams& p, std::span<const int> set);
double mnl_prob(const MnlParams& p, std::span<const int> set, int x);

Eigen::VectorXd cdm_probs(const CdmParams& p, std::span<const int> set);
double cdm_prob(const CdmParams& p, std::span<const int> set, int x);

Eigen::VectorXd cdm_alt_probs(const CdmAltParams& p, std::span<const int> set);
double cdm_alt_prob(const CdmAltParams& p, std::span<const int> set, int x);

Eigen::VectorXd nl_probs(const NlTree& tree, std::span<const int> set);
double nl_prob(const NlTree& tree, std::span<const int> set, int x);

Eigen::VectorXd eba_probs(const EbaParams& p, std::span<const int> set);
double eba_prob(const EbaParams& p, std::span<const int> set, int x);

/// Family dispatch.
Eigen::VectorXd choice_probs(const ModelParams& m, std::span<const int> set);
double choice_prob(const ModelParams& m, std::span<const int> set, int x);

// ---------------------------------------------------------------------------
// MNL cross-encodings. Each result reproduces the source MNL's choice
// probabilities exactly on every subset. All reject kNegInf utilities.
// ---------------------------------------------------------------------------

CdmParams encode_mnl_as_cdm(const MnlParams& m);
NlTree encode_mnl_as_nl(const MnlParams& m, const Universe& universe);
EbaParams encode_mnl_as_eba(const MnlParams& m, const Universe& universe);

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Bit-stable uniform draw in [0, 1) from the top 53 bits of the generator.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Draws one item from the family's choice distribution over `set`.
int sample_choice(const ModelParams& m, std::span<const int> set, std::mt19937_64& rng);
int sample_choice(const ModelParams& m, std::span<const int> set, std::uint64_t seed);

/// Shifts utilities so they sum to zero over the universe (probabilities are
/// unchanged). Rejects kNegInf entries.
MnlParams recenter_to_standard_form(const MnlParams& p);

}  // namespace choiceopt
