#include "choiceopt/models.hpp"

#include <cmath>
#include <map>
#include <numeric>

namespace choiceopt {

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

CdmParams CdmParams::from_low_rank(Eigen::VectorXd base, CdmLowRank lr) {
  const int u = static_cast<int>(base.size());
  if (lr.rank < 1) throw SpecError("low-rank CDM requires rank >= 1");
  if (lr.target.rows() != u || lr.context.rows() != u || lr.target.cols() != lr.rank ||
      lr.context.cols() != lr.rank)
    throw SpecError("low-rank embedding dimensions do not match universe/rank");
  CdmParams p;
  p.base_utilities = std::move(base);
  p.pulls = lr.context * lr.target.transpose();
  p.pulls.diagonal().setZero();
  p.low_rank = std::move(lr);
  p.validate();
  return p;
}

void CdmParams::validate() const {
  const int u = universe_size();
  if (pulls.rows() != u || pulls.cols() != u)
    throw SpecError("CDM pull matrix must be |U| x |U|");
  for (int i = 0; i < u; ++i)
    if (pulls(i, i) != 0.0) throw SpecError("CDM self-pull p(x, x) must be zero");
  if (low_rank) {
    Eigen::MatrixXd induced = low_rank->context * low_rank->target.transpose();
    induced.diagonal().setZero();
    if ((induced - pulls).cwiseAbs().maxCoeff() != 0.0)
      throw SpecError("low-rank pulls do not equal the dense pulls they induce");
  }
}

void CdmAltParams::validate() const {
  if (q.rows() != q.cols()) throw SpecError("q matrix must be square");
  for (int i = 0; i < q.rows(); ++i)
    if (q(i, i) != 0.0) throw SpecError("q(x, x) must be zero");
}

int NlTree::height() const {
  int h = 0;
  std::vector<int> depth(nodes.size(), 0);
  for (int v = 1; v < static_cast<int>(nodes.size()); ++v) {
    depth[v] = depth[nodes[v].parent] + 1;
    if (is_leaf(v)) h = std::max(h, depth[v]);
  }
  return h;
}

std::vector<int> NlTree::path_to_item(int item) const {
  std::vector<int> path;
  for (int v = leaf_of_item.at(item); v != root(); v = nodes[v].parent) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

void NlTree::validate(int universe_size) const {
  if (nodes.empty()) throw SpecError("NL tree has no nodes");
  if (static_cast<int>(leaf_of_item.size()) != universe_size)
    throw SpecError("NL tree leaves must be bijective with the universe");
  std::vector<char> seen(universe_size, 0);
  for (int v = 0; v < static_cast<int>(nodes.size()); ++v) {
    const Node& nd = nodes[v];
    if (v == root()) {
      if (nd.parent != -1) throw SpecError("root must have no parent");
    } else if (nd.parent < 0 || nd.parent >= static_cast<int>(nodes.size())) {
      throw SpecError("NL node has invalid parent");
    }
    if (is_leaf(v)) {
      if (!nd.children.empty()) throw SpecError("NL leaf cannot have children");
      if (nd.item >= universe_size) throw SpecError("NL leaf item out of range");
      if (seen[nd.item]++) throw SpecError("item appears as more than one NL leaf");
      if (leaf_of_item[nd.item] != v) throw SpecError("leaf_of_item inconsistent");
    } else if (nd.children.empty() && v != root()) {
      throw SpecError("internal NL node must have children");
    }
    for (int c : nd.children)
      if (nodes[c].parent != v) throw SpecError("NL child/parent links inconsistent");
  }
  for (int i = 0; i < universe_size; ++i)
    if (!seen[i]) throw SpecError("universe item missing from NL tree");
  if (height() < 1) throw SpecError("NL tree height must be >= 1");
}

void EbaParams::validate() const {
  for (int a = 0; a < static_cast<int>(aspect_utility.size()); ++a)
    if (!(aspect_utility[a] > 0.0))
      throw SpecError("EBA aspect utilities must be strictly positive");
  for (const auto& aspects : item_aspects) {
    if (aspects.empty()) throw SpecError("every item needs at least one aspect");
    for (int a : aspects)
      if (a < 0 || a >= static_cast<int>(aspect_utility.size()))
        throw SpecError("aspect index out of range");
  }
}

const char* family_name(Family f) {
  switch (f) {
    case Family::Mnl: return "mnl";
    case Family::Cdm: return "cdm";
    case Family::CdmAlt: return "cdm-alt";
    case Family::Nl: return "nl";
    case Family::Eba: return "eba";
  }
  return "?";
}

Family family_from_name(const std::string& name) {
  if (name == "mnl") return Family::Mnl;
  if (name == "cdm") return Family::Cdm;
  if (name == "cdm-alt") return Family::CdmAlt;
  if (name == "nl") return Family::Nl;
  if (name == "eba") return Family::Eba;
  throw SpecError("unknown model family: " + name);
}

Family family_of(const ModelParams& m) {
  return std::visit(
      [](const auto& p) -> Family {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MnlParams>) return Family::Mnl;
        else if constexpr (std::is_same_v<T, CdmParams>) return Family::Cdm;
        else if constexpr (std::is_same_v<T, CdmAltParams>) return Family::CdmAlt;
        else if constexpr (std::is_same_v<T, NlTree>) return Family::Nl;
        else return Family::Eba;
      },
      m);
}

int universe_size_of(const ModelParams& m) {
  return std::visit([](const auto& p) { return p.universe_size(); }, m);
}

Family Population::family() const {
  if (members.empty()) throw SpecError("population must have at least one individual");
  Family f = family_of(members.front());
  for (const auto& m : members)
    if (family_of(m) != f) throw SpecError("population mixes model families");
  return f;
}

void Population::validate(int universe_size) const {
  if (members.empty()) throw SpecError("population must have at least one individual");
  if (labels.size() != members.size())
    throw SpecError("population labels and members differ in length");
  family();
  for (const auto& m : members)
    if (universe_size_of(m) != universe_size)
      throw SpecError("individual parameters do not cover the instance universe");
}

// ---------------------------------------------------------------------------
// Probabilities
// ---------------------------------------------------------------------------

Eigen::VectorXd stable_softmax(const Eigen::VectorXd& utilities) {
  const int n = static_cast<int>(utilities.size());
  if (n == 0) throw SpecError("softmax over empty set");
  double mx = kNegInf;
  for (int i = 0; i < n; ++i) mx = std::max(mx, utilities[i]);
  if (mx == kNegInf)
    throw DegenerateDistribution("all members have exp-utility zero");
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i)
    w[i] = utilities[i] == kNegInf ? 0.0 : std::exp(utilities[i] - mx);
  return w / w.sum();
}

namespace {

int position_in(std::span<const int> set, int x) {
  for (int i = 0; i < static_cast<int>(set.size()); ++i)
    if (set[i] == x) return i;
  throw SpecError("queried item is not in the choice set");
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, std::span<const int> set) {
  Eigen::VectorXd out(set.size());
  for (int i = 0; i < static_cast<int>(set.size()); ++i) out[i] = v[set[i]];
  return out;
}

}  // namespace

Eigen::VectorXd mnl_probs(const MnlParams& p, std::span<const int> set) {
  return stable_softmax(gather(p.utilities, set));
}

double mnl_prob(const MnlParams& p, std::span<const int> set, int x) {
  return mnl_probs(p, set)[position_in(set, x)];
}

Eigen::VectorXd cdm_probs(const CdmParams& p, std::span<const int> set) {
  Eigen::VectorXd u(set.size());
  for (int i = 0; i < static_cast<int>(set.size()); ++i) {
    double total = p.base_utilities[set[i]];
    for (int z : set)
      if (z != set[i]) total += p.pulls(z, set[i]);
    u[i] = total;
  }
  return stable_softmax(u);
}

double cdm_prob(const CdmParams& p, std::span<const int> set, int x) {
  return cdm_probs(p, set)[position_in(set, x)];
}

Eigen::VectorXd cdm_alt_probs(const CdmAltParams& p, std::span<const int> set) {
  Eigen::VectorXd u(set.size());
  for (int i = 0; i < static_cast<int>(set.size()); ++i) {
    double total = 0.0;
    for (int w : set)
      if (w != set[i]) total += p.q(w, set[i]);
    u[i] = total;
  }
  return stable_softmax(u);
}

double cdm_alt_prob(const CdmAltParams& p, std::span<const int> set, int x) {
  return cdm_alt_probs(p, set)[position_in(set, x)];
}

Eigen::VectorXd nl_probs(const NlTree& tree, std::span<const int> set) {
  if (set.empty()) throw SpecError("choice over empty set");
  // Induced subtree: a node is present iff some set item lies below it.
  std::vector<char> present(tree.nodes.size(), 0);
  for (int item : set)
    for (int v = tree.leaf_of_item.at(item); v != -1; v = tree.nodes[v].parent) {
      if (present[v]) break;
      present[v] = 1;
    }
  Eigen::VectorXd probs(set.size());
  for (int i = 0; i < static_cast<int>(set.size()); ++i) {
    double p = 1.0;
    for (int v : tree.path_to_item(set[i])) {
      const auto& siblings = tree.nodes[tree.nodes[v].parent].children;
      double mx = kNegInf;
      for (int s : siblings)
        if (present[s]) mx = std::max(mx, tree.nodes[s].utility);
      if (mx == kNegInf) throw DegenerateDistribution("all NL siblings have exp-utility zero");
      double denom = 0.0;
      for (int s : siblings)
        if (present[s] && tree.nodes[s].utility != kNegInf)
          denom += std::exp(tree.nodes[s].utility - mx);
      double num =
          tree.nodes[v].utility == kNegInf ? 0.0 : std::exp(tree.nodes[v].utility - mx);
      p *= num / denom;
    }
    probs[i] = p;
  }
  return probs;
}

double nl_prob(const NlTree& tree, std::span<const int> set, int x) {
  return nl_probs(tree, set)[position_in(set, x)];
}

namespace {

// Eq-style EBA recursion with memoization on the canonical (sorted) restriction
// set. Aspect sets C', C0 and the restrictions C_chi are computed on the fly.
class EbaEvaluator {
 public:
  explicit EbaEvaluator(const EbaParams& p) : p_(p) {}

  const Eigen::VectorXd& probs(const ItemSet& set) {
    auto it = memo_.find(set);
    if (it != memo_.end()) return it->second;

    const int n = static_cast<int>(set.size());
    // Union and intersection of the members' aspect sets.
    std::vector<int> all = p_.item_aspects[set[0]];
    std::vector<int> shared = p_.item_aspects[set[0]];
    for (int i = 1; i < n; ++i) {
      std::vector<int> u, s;
      const auto& a = p_.item_aspects[set[i]];
      std::set_union(all.begin(), all.end(), a.begin(), a.end(), std::back_inserter(u));
      std::set_intersection(shared.begin(), shared.end(), a.begin(), a.end(),
                            std::back_inserter(s));
      all = std::move(u);
      shared = std::move(s);
    }
    std::vector<int> active;  // C' \ C0
    std::set_difference(all.begin(), all.end(), shared.begin(), shared.end(),
                        std::back_inserter(active));

    double denom = 0.0;
    for (int chi : active) denom += p_.aspect_utility[chi];

    Eigen::VectorXd out(n);
    if (denom == 0.0) {
      out.setConstant(1.0 / n);  // identical aspect sets: uniform base case
      return memo_.emplace(set, std::move(out)).first->second;
    }

    out.setZero();
    for (int chi : active) {
      ItemSet restricted;
      for (int x : set)
        if (std::binary_search(p_.item_aspects[x].begin(), p_.item_aspects[x].end(), chi))
          restricted.push_back(x);
      const Eigen::VectorXd& sub = probs(restricted);
      for (int j = 0; j < static_cast<int>(restricted.size()); ++j) {
        int pos = static_cast<int>(
            std::lower_bound(set.begin(), set.end(), restricted[j]) - set.begin());
        out[pos] += p_.aspect_utility[chi] * sub[j];
      }
    }
    out /= denom;
    return memo_.emplace(set, std::move(out)).first->second;
  }

 private:
  const EbaParams& p_;
  std::map<ItemSet, Eigen::VectorXd> memo_;
};

}  // namespace

Eigen::VectorXd eba_probs(const EbaParams& p, std::span<const int> set) {
  if (set.empty()) throw SpecError("choice over empty set");
  ItemSet canonical(set.begin(), set.end());
  std::sort(canonical.begin(), canonical.end());
  EbaEvaluator eval(p);
  Eigen::VectorXd sorted = eval.probs(canonical);
  Eigen::VectorXd out(set.size());
  for (int i = 0; i < static_cast<int>(set.size()); ++i) {
    int pos = static_cast<int>(
        std::lower_bound(canonical.begin(), canonical.end(), set[i]) - canonical.begin());
    out[i] = sorted[pos];
  }
  return out;
}

double eba_prob(const EbaParams& p, std::span<const int> set, int x) {
  return eba_probs(p, set)[position_in(set, x)];
}

Eigen::VectorXd choice_probs(const ModelParams& m, std::span<const int> set) {
  return std::visit(
      [&](const auto& p) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MnlParams>) return mnl_probs(p, set);
        else if constexpr (std::is_same_v<T, CdmParams>) return cdm_probs(p, set);
        else if constexpr (std::is_same_v<T, CdmAltParams>) return cdm_alt_probs(p, set);
        else if constexpr (std::is_same_v<T, NlTree>) return nl_probs(p, set);
        else return eba_probs(p, set);
      },
      m);
}

double choice_prob(const ModelParams& m, std::span<const int> set, int x) {
  return choice_probs(m, set)[position_in(set, x)];
}

// ---------------------------------------------------------------------------
// Encodings
// ---------------------------------------------------------------------------

namespace {
void require_finite(const Eigen::VectorXd& u, const char* what) {
  for (int i = 0; i < static_cast<int>(u.size()); ++i)
    if (!std::isfinite(u[i]))
      throw SpecError(std::string(what) + " requires finite utilities");
}
}  // namespace

CdmParams encode_mnl_as_cdm(const MnlParams& m) {
  require_finite(m.utilities, "encode_mnl_as_cdm");
  CdmParams p;
  p.base_utilities = m.utilities;
  p.pulls = Eigen::MatrixXd::Zero(m.universe_size(), m.universe_size());
  return p;
}

NlTree encode_mnl_as_nl(const MnlParams& m, const Universe& universe) {
  require_finite(m.utilities, "encode_mnl_as_nl");
  if (universe.size() != m.universe_size())
    throw SpecError("universe size does not match parameters");
  NlTree t;
  t.nodes.resize(1 + universe.size());
  t.leaf_of_item.resize(universe.size());
  t.nodes[0].parent = -1;
  for (int i = 0; i < universe.size(); ++i) {
    int v = i + 1;
    t.nodes[v].parent = 0;
    t.nodes[v].item = i;
    t.nodes[v].utility = m.utilities[i];
    t.nodes[0].children.push_back(v);
    t.leaf_of_item[i] = v;
  }
  t.validate(universe.size());
  return t;
}

EbaParams encode_mnl_as_eba(const MnlParams& m, const Universe& universe) {
  require_finite(m.utilities, "encode_mnl_as_eba");
  if (universe.size() != m.universe_size())
    throw SpecError("universe size does not match parameters");
  EbaParams p;
  p.aspect_names.reserve(universe.size());
  p.item_aspects.resize(universe.size());
  p.aspect_utility.resize(universe.size());
  for (int i = 0; i < universe.size(); ++i) {
    p.aspect_names.push_back("chi_" + universe.id(i));
    p.item_aspects[i] = {i};
    p.aspect_utility[i] = std::exp(m.utilities[i]);
  }
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

int sample_choice(const ModelParams& m, std::span<const int> set, std::mt19937_64& rng) {
  Eigen::VectorXd probs = choice_probs(m, set);
  double u = uniform01(rng);
  double acc = 0.0;
  for (int i = 0; i < static_cast<int>(set.size()); ++i) {
    acc += probs[i];
    if (u < acc) return set[i];
  }
  return set[set.size() - 1];
}

int sample_choice(const ModelParams& m, std::span<const int> set, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_choice(m, set, rng);
}

MnlParams recenter_to_standard_form(const MnlParams& p) {
  require_finite(p.utilities, "recenter_to_standard_form");
  MnlParams out;
  out.utilities = p.utilities.array() - p.utilities.mean();
  return out;
}

}  // namespace choiceopt
