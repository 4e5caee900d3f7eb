#include "choiceopt/approx.hpp"

#include <cmath>
#include <unordered_map>

namespace choiceopt {

namespace {

// ---------------------------------------------------------------------------
// Sparse discretized table. Cells are keyed by one integer index per tracked
// dimension: floor(log_{1+delta} value) shifted by a per-dimension integer
// offset so indices stay >= 0, with -1 reserved for an exactly-zero value.
// Entries keep insertion order; the builder never overwrites an occupied cell.
// ---------------------------------------------------------------------------

constexpr std::int64_t kZeroSentinel = -1;

struct Dimension {
  enum class Kind { Linear, LogDomain, Flag };
  Kind kind = Kind::Linear;
  double initial = 0.0;       // empty-set accumulator
  std::int64_t offset = 0;    // min achievable raw floor index, capped at 0
};

struct DimUpdate {
  int dim;
  double delta;  // additive in the dimension's domain; ignored for Flag
};

struct CellEntry {
  std::vector<std::int32_t> members;  // positions into inst.alternatives, ascending
  Eigen::VectorXd sums;
};

struct KeyHash {
  size_t operator()(const std::vector<std::int64_t>& key) const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::int64_t v : key) {
      std::uint64_t u = static_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) {
        h ^= (u >> (8 * i)) & 0xff;
        h *= 1099511628211ull;
      }
    }
    return static_cast<size_t>(h);
  }
};

class SparseTable {
 public:
  SparseTable(std::vector<Dimension> dims, double delta)
      : dims_(std::move(dims)), log1p_delta_(std::log1p(delta)) {
    Eigen::VectorXd init(dims_.size());
    for (size_t d = 0; d < dims_.size(); ++d) init[d] = dims_[d].initial;
    entries_.push_back({{}, std::move(init)});
    index_.emplace(key_of(entries_[0].sums), 0);
  }

  // One pass of the outer loop: extend every set already stored (the snapshot)
  // by alternative `position`, first write wins.
  void add_alternative(int position, const std::vector<DimUpdate>& updates) {
    const size_t snapshot = entries_.size();
    for (size_t e = 0; e < snapshot; ++e) {
      Eigen::VectorXd sums = entries_[e].sums;
      for (const DimUpdate& u : updates) {
        if (dims_[u.dim].kind == Dimension::Kind::Flag) sums[u.dim] = 1.0;
        else sums[u.dim] += u.delta;
      }
      auto key = key_of(sums);
      if (index_.emplace(std::move(key), entries_.size()).second) {
        std::vector<std::int32_t> members = entries_[e].members;
        members.push_back(static_cast<std::int32_t>(position));
        entries_.push_back({std::move(members), std::move(sums)});
      }
    }
  }

  std::vector<std::int64_t> key_of(const Eigen::VectorXd& sums) const {
    std::vector<std::int64_t> key(dims_.size());
    for (size_t d = 0; d < dims_.size(); ++d) {
      const Dimension& dim = dims_[d];
      double v = sums[d];
      switch (dim.kind) {
        case Dimension::Kind::Flag:
          key[d] = static_cast<std::int64_t>(v);
          break;
        case Dimension::Kind::Linear:
          key[d] = v == 0.0 ? kZeroSentinel
                            : static_cast<std::int64_t>(
                                  std::floor(std::log(v) / log1p_delta_)) -
                                  dim.offset;
          break;
        case Dimension::Kind::LogDomain:
          key[d] = v == kNegInf ? kZeroSentinel
                                : static_cast<std::int64_t>(std::floor(v / log1p_delta_)) -
                                      dim.offset;
          break;
      }
    }
    return key;
  }

  const std::vector<CellEntry>& entries() const { return entries_; }
  const std::vector<Dimension>& dims() const { return dims_; }

 private:
  std::vector<Dimension> dims_;
  double log1p_delta_;
  std::vector<CellEntry> entries_;
  std::unordered_map<std::vector<std::int64_t>, size_t, KeyHash> index_;
};

std::int64_t floor_index(double value, double log1p_delta) {
  return static_cast<std::int64_t>(std::floor(value / log1p_delta));
}

// ---------------------------------------------------------------------------
// Variant-specific table builders. Each produces the dimension layout, the
// per-alternative updates, and an evaluator mapping a stored entry to the n x k
// matrix of base-item probabilities under C union Z.
// ---------------------------------------------------------------------------

struct VariantSpec {
  std::vector<Dimension> dims;
  std::vector<std::vector<DimUpdate>> updates;  // per alternative position
  std::vector<double> shifts;
  bool guarantee_applicable = true;
};

VariantSpec build_mnl_spec(const Population& pop, const ChoiceInstance& inst, double delta) {
  const int n = pop.n();
  const double log1p_delta = std::log1p(delta);
  VariantSpec spec;
  spec.shifts.resize(n, 0.0);

  std::vector<Eigen::VectorXd> shifted(n);
  for (int a = 0; a < n; ++a) {
    const auto& u = std::get<MnlParams>(pop.members[a]).utilities;
    double mn = std::numeric_limits<double>::infinity();
    for (int i = 0; i < u.size(); ++i)
      if (u[i] != kNegInf) mn = std::min(mn, u[i]);
    if (!std::isfinite(mn))
      throw DegenerateDistribution("individual " + pop.labels[a] +
                                   " has no finite utilities");
    spec.shifts[a] = 0.001 - mn;
    shifted[a] = u.array() + spec.shifts[a];
    for (int i = 0; i < u.size(); ++i)
      if (u[i] == kNegInf) shifted[a][i] = kNegInf;
  }

  for (int a = 0; a < n; ++a) {
    Dimension d;
    d.kind = Dimension::Kind::Linear;
    d.initial = 0.0;
    double min_delta = std::numeric_limits<double>::infinity();
    for (int z : inst.alternatives) {
      double e = shifted[a][z] == kNegInf ? 0.0 : std::exp(shifted[a][z]);
      if (e > 0.0) min_delta = std::min(min_delta, e);
    }
    d.offset = std::isfinite(min_delta)
                   ? std::min<std::int64_t>(0, floor_index(std::log(min_delta), log1p_delta))
                   : 0;
    spec.dims.push_back(d);
  }

  spec.updates.resize(inst.m());
  for (int p = 0; p < inst.m(); ++p)
    for (int a = 0; a < n; ++a) {
      double u = shifted[a][inst.alternatives[p]];
      spec.updates[p].push_back({a, u == kNegInf ? 0.0 : std::exp(u)});
    }
  return spec;
}

// Per-(individual, base item) log-domain exponents for either CDM
// parametrization. The tracked accumulator for (a, x) is the full context
// exponent of x under C union Z; it grows additively with each included
// alternative. Alternatives' own exponents split into a Z-independent base
// plus alternative-alternative interactions (zero exactly when the
// approximation guarantee applies).
struct CdmView {
  int n, k;
  Eigen::MatrixXd base_c;    // n x k
  std::vector<Eigen::MatrixXd> add_on_c;  // per individual: m x k
  Eigen::MatrixXd alt_base;  // n x m
  std::vector<Eigen::MatrixXd> alt_alt;   // per individual: m x m (row z, col y)
  bool alt_alt_zero = true;
};

CdmView build_cdm_view(const Population& pop, const ChoiceInstance& inst) {
  const int n = pop.n(), k = inst.k(), m = inst.m();
  CdmView view;
  view.n = n;
  view.k = k;
  view.base_c = Eigen::MatrixXd::Zero(n, k);
  view.alt_base = Eigen::MatrixXd::Zero(n, m);
  view.add_on_c.assign(n, Eigen::MatrixXd::Zero(m, k));
  view.alt_alt.assign(n, Eigen::MatrixXd::Zero(m, m));

  for (int a = 0; a < n; ++a) {
    auto exponent = [&](int target, int source) -> double {
      if (const auto* alt = std::get_if<CdmAltParams>(&pop.members[a]))
        return alt->q(source, target);
      const auto& p = std::get<CdmParams>(pop.members[a]);
      return p.pulls(source, target);
    };
    auto base_of = [&](int target) -> double {
      if (std::holds_alternative<CdmAltParams>(pop.members[a])) return 0.0;
      return std::get<CdmParams>(pop.members[a]).base_utilities[target];
    };

    for (int j = 0; j < k; ++j) {
      double lambda = base_of(inst.choice_set[j]);
      for (int w : inst.choice_set)
        if (w != inst.choice_set[j]) lambda += exponent(inst.choice_set[j], w);
      view.base_c(a, j) = lambda;
      for (int p = 0; p < m; ++p)
        view.add_on_c[a](p, j) = exponent(inst.choice_set[j], inst.alternatives[p]);
    }
    for (int p = 0; p < m; ++p) {
      double lambda = base_of(inst.alternatives[p]);
      for (int w : inst.choice_set) lambda += exponent(inst.alternatives[p], w);
      view.alt_base(a, p) = lambda;
      for (int q = 0; q < m; ++q) {
        if (q == p) continue;
        double e = exponent(inst.alternatives[p], inst.alternatives[q]);
        view.alt_alt[a](q, p) = e;
        if (e != 0.0) view.alt_alt_zero = false;
      }
    }
  }
  return view;
}

VariantSpec build_cdm_spec(const CdmView& view, const ChoiceInstance& inst, double delta) {
  const double log1p_delta = std::log1p(delta);
  VariantSpec spec;
  spec.guarantee_applicable = view.alt_alt_zero;
  const int n = view.n, k = view.k, m = inst.m();

  for (int a = 0; a < n; ++a)
    for (int j = 0; j < k; ++j) {
      Dimension d;
      d.kind = Dimension::Kind::LogDomain;
      d.initial = view.base_c(a, j);
      double lo = d.initial;
      for (int p = 0; p < m; ++p) {
        double delta_l = view.add_on_c[a](p, j);
        if (delta_l != kNegInf) lo += std::min(0.0, delta_l);
      }
      d.offset = d.initial == kNegInf
                     ? 0
                     : std::min<std::int64_t>(0, floor_index(lo, log1p_delta));
      spec.dims.push_back(d);
    }

  // One extra dimension per individual tracks the included alternatives' own
  // exp-utility total (fixed weights when alternatives exert no pulls on each
  // other). Without it, sets with matching context keys but disjoint
  // alternative content would collapse even though their probability
  // denominators differ.
  for (int a = 0; a < n; ++a) {
    Dimension d;
    d.kind = Dimension::Kind::Linear;
    double min_weight = std::numeric_limits<double>::infinity();
    for (int p = 0; p < m; ++p) {
      double w = view.alt_base(a, p) == kNegInf ? 0.0 : std::exp(view.alt_base(a, p));
      if (w > 0.0) min_weight = std::min(min_weight, w);
    }
    d.offset = std::isfinite(min_weight)
                   ? std::min<std::int64_t>(0, floor_index(std::log(min_weight), log1p_delta))
                   : 0;
    spec.dims.push_back(d);
  }

  spec.updates.resize(m);
  for (int p = 0; p < m; ++p) {
    for (int a = 0; a < n; ++a)
      for (int j = 0; j < k; ++j)
        spec.updates[p].push_back({a * k + j, view.add_on_c[a](p, j)});
    for (int a = 0; a < n; ++a) {
      double w = view.alt_base(a, p) == kNegInf ? 0.0 : std::exp(view.alt_base(a, p));
      spec.updates[p].push_back({n * k + a, w});
    }
  }
  return spec;
}

Eigen::MatrixXd cdm_entry_probs(const CdmView& view, const CellEntry& entry) {
  const int n = view.n, k = view.k;
  const int zsize = static_cast<int>(entry.members.size());
  Eigen::MatrixXd probs(n, k);
  Eigen::VectorXd util(k + zsize);
  for (int a = 0; a < n; ++a) {
    for (int j = 0; j < k; ++j) util[j] = entry.sums[a * k + j];
    for (int zi = 0; zi < zsize; ++zi) {
      int p = entry.members[zi];
      double lambda = view.alt_base(a, p);
      for (int zj = 0; zj < zsize; ++zj)
        if (zj != zi) lambda += view.alt_alt[a](entry.members[zj], p);
      util[k + zi] = lambda;
    }
    Eigen::VectorXd soft = stable_softmax(util);
    probs.row(a) = soft.head(k);
  }
  return probs;
}

// Nested logit: tracked dimensions are, per individual, the exp-utility totals
// of alternative leaf children under each internal node that also shelters a
// base item, plus one two-state dimension per maximal all-alternative subtree.
struct NlDims {
  struct PathStep {
    double numerator;              // exp-utility of the child on the item's path
    double base_denominator;       // always-present children
    int linear_dim = -1;           // alt leaf-children total, -1 if none
    std::vector<std::pair<int, double>> flag_children;  // (dim, exp-utility of subtree root)
  };
  // paths[a][j] = steps from root to C[j]'s leaf for individual a
  std::vector<std::vector<std::vector<PathStep>>> paths;
  int n, k;
};

VariantSpec build_nl_spec(const Population& pop, const ChoiceInstance& inst, double delta,
                          NlDims& out_dims) {
  const double log1p_delta = std::log1p(delta);
  const int n = pop.n(), k = inst.k(), m = inst.m();
  VariantSpec spec;
  spec.updates.resize(m);
  out_dims.n = n;
  out_dims.k = k;
  out_dims.paths.assign(n, {});

  std::vector<char> is_alt(inst.universe.size(), 0);
  for (int z : inst.alternatives) is_alt[z] = 1;

  for (int a = 0; a < n; ++a) {
    const auto& tree = std::get<NlTree>(pop.members[a]);
    const int nn = static_cast<int>(tree.nodes.size());

    // pure_alt[v]: every leaf under v is an alternative.
    std::vector<char> pure_alt(nn, 1);
    for (int v = nn - 1; v >= 0; --v) {
      if (tree.is_leaf(v)) pure_alt[v] = is_alt[tree.nodes[v].item];
      else
        for (int c : tree.nodes[v].children) pure_alt[v] = pure_alt[v] && pure_alt[c];
    }

    auto exp_util = [&](int v) {
      return tree.nodes[v].utility == kNegInf ? 0.0 : std::exp(tree.nodes[v].utility);
    };

    // Dimensions for this individual, in node-index order.
    std::vector<int> linear_dim(nn, -1), flag_dim(nn, -1);
    for (int v = 0; v < nn; ++v) {
      if (tree.is_leaf(v)) continue;
      if (pure_alt[v]) {
        // Only maximal all-alternative subtrees get a dimension.
        if (v == tree.root() || !pure_alt[tree.nodes[v].parent]) {
          Dimension d;
          d.kind = Dimension::Kind::Flag;
          flag_dim[v] = static_cast<int>(spec.dims.size());
          spec.dims.push_back(d);
        }
        continue;
      }
      bool has_alt_leaf_child = false;
      double min_e = std::numeric_limits<double>::infinity();
      for (int c : tree.nodes[v].children)
        if (tree.is_leaf(c) && is_alt[tree.nodes[c].item]) {
          has_alt_leaf_child = true;
          double e = exp_util(c);
          if (e > 0.0) min_e = std::min(min_e, e);
        }
      if (has_alt_leaf_child) {
        Dimension d;
        d.kind = Dimension::Kind::Linear;
        d.offset = std::isfinite(min_e)
                       ? std::min<std::int64_t>(0, floor_index(std::log(min_e), log1p_delta))
                       : 0;
        linear_dim[v] = static_cast<int>(spec.dims.size());
        spec.dims.push_back(d);
      }
    }

    // Updates: each alternative touches exactly one dimension of this tree.
    for (int p = 0; p < m; ++p) {
      int leaf = tree.leaf_of_item[inst.alternatives[p]];
      int parent = tree.nodes[leaf].parent;
      if (pure_alt[parent]) {
        int w = parent;
        while (w != tree.root() && pure_alt[tree.nodes[w].parent]) w = tree.nodes[w].parent;
        spec.updates[p].push_back({flag_dim[w], 0.0});
      } else {
        spec.updates[p].push_back({linear_dim[parent], exp_util(leaf)});
      }
    }

    // Evaluation paths for the base items.
    auto& paths_a = out_dims.paths[a];
    paths_a.resize(k);
    for (int j = 0; j < k; ++j) {
      for (int v : tree.path_to_item(inst.choice_set[j])) {
        NlDims::PathStep step;
        step.numerator = exp_util(v);
        step.base_denominator = 0.0;
        int parent = tree.nodes[v].parent;
        step.linear_dim = linear_dim[parent];
        for (int c : tree.nodes[parent].children) {
          if (tree.is_leaf(c)) {
            if (!is_alt[tree.nodes[c].item]) step.base_denominator += exp_util(c);
          } else if (pure_alt[c]) {
            step.flag_children.push_back({flag_dim[c], exp_util(c)});
          } else {
            step.base_denominator += exp_util(c);
          }
        }
        paths_a[j].push_back(std::move(step));
      }
    }
  }
  return spec;
}

Eigen::MatrixXd nl_entry_probs(const NlDims& dims, const CellEntry& entry) {
  Eigen::MatrixXd probs(dims.n, dims.k);
  for (int a = 0; a < dims.n; ++a)
    for (int j = 0; j < dims.k; ++j) {
      double p = 1.0;
      for (const auto& step : dims.paths[a][j]) {
        double denom = step.base_denominator;
        if (step.linear_dim >= 0) denom += entry.sums[step.linear_dim];
        for (const auto& [dim, weight] : step.flag_children)
          if (entry.sums[dim] != 0.0) denom += weight;
        p *= step.numerator / denom;
      }
      probs(a, j) = p;
    }
  return probs;
}

// ---------------------------------------------------------------------------
// Shared build + sweep
// ---------------------------------------------------------------------------

int max_tree_height(const Population& pop) {
  int h = 0;
  for (const auto& m : pop.members) h = std::max(h, std::get<NlTree>(m).height());
  return h;
}

double nl_delta(double eps_budget, int h, int m) {
  // min{(x+1)^{1/h} - 1, 1 - (1-x)^{1/h}} / m, with the second branch dropped
  // once it is vacuous (x >= 1).
  double term1 = std::pow(eps_budget + 1.0, 1.0 / h) - 1.0;
  double term2 = eps_budget < 1.0 ? 1.0 - std::pow(1.0 - eps_budget, 1.0 / h) : term1;
  return std::min(term1, term2) / m;
}

double binom2(int n) { return n * (n - 1) / 2.0; }

template <typename ProbsFn>
ApproxResult run_table(const ChoiceInstance& inst, const ApproxConfig& cfg, double delta,
                       VariantSpec spec, ProbsFn&& entry_probs) {
  SparseTable table(std::move(spec.dims), delta);
  for (int p = 0; p < inst.m(); ++p) table.add_alternative(p, spec.updates[p]);

  if (cfg.verify_sums) {
    for (const auto& entry : table.entries()) {
      Eigen::VectorXd sums(table.dims().size());
      for (size_t d = 0; d < table.dims().size(); ++d) sums[d] = table.dims()[d].initial;
      for (std::int32_t p : entry.members)
        for (const DimUpdate& u : spec.updates[p]) {
          if (table.dims()[u.dim].kind == Dimension::Kind::Flag) sums[u.dim] = 1.0;
          else sums[u.dim] += u.delta;
        }
      for (int d = 0; d < sums.size(); ++d)
        if (!(sums[d] == entry.sums[d]) && !(sums[d] != sums[d] && entry.sums[d] != entry.sums[d]))
          throw std::runtime_error("table soundness check failed: stored sums differ from "
                                   "recomputation");
    }
  }

  const bool promote = cfg.objective.kind == Objective::Kind::Promote;
  int x_star_col = -1;
  if (promote)
    for (int j = 0; j < inst.k(); ++j)
      if (inst.choice_set[j] == cfg.objective.x_star) x_star_col = j;

  const auto& entries = table.entries();
  double best_value = 0.0;
  size_t best_index = 0;
  for (size_t e = 0; e < entries.size(); ++e) {
    Eigen::MatrixXd probs = entry_probs(entries[e]);
    double v;
    if (promote)
      v = eps_favorite_count_from_probs(probs, x_star_col, cfg.epsilon);
    else
      v = disagreement_from_probs(probs);

    bool take = false;
    if (e == 0) {
      take = true;
    } else if (promote || cfg.objective.kind == Objective::Kind::MaximizeD) {
      take = v > best_value;
    } else {
      take = v < best_value;
    }
    if (!take && v == best_value) {
      auto to_set = [&](const CellEntry& entry) {
        ItemSet members;
        for (std::int32_t p : entry.members) members.push_back(inst.alternatives[p]);
        return AlternativeSet(std::move(members));
      };
      if (lex_less(to_set(entries[e]), to_set(entries[best_index]), inst.universe))
        take = true;
    }
    if (take) {
      best_value = v;
      best_index = e;
    }
  }

  ApproxResult result;
  ItemSet members;
  for (std::int32_t p : entries[best_index].members)
    members.push_back(inst.alternatives[p]);
  result.best_z = AlternativeSet(std::move(members));
  result.value = best_value;
  result.cells_materialized = static_cast<std::int64_t>(entries.size());
  result.search_fraction =
      static_cast<double>(entries.size()) / std::ldexp(1.0, inst.m());
  result.shifts = std::move(spec.shifts);
  result.guarantee_applicable = spec.guarantee_applicable;
  result.delta = delta;
  if (cfg.capture_table) {
    result.cells.reserve(entries.size());
    for (const auto& entry : entries) {
      ApproxResult::Cell cell;
      for (std::int32_t p : entry.members) cell.members.push_back(inst.alternatives[p]);
      std::sort(cell.members.begin(), cell.members.end());
      cell.sums = entry.sums;
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

ApproxResult trivial_result(const Population& pop, const ChoiceInstance& inst,
                            const ApproxConfig& cfg) {
  ApproxResult r;
  r.best_z = AlternativeSet{};
  if (cfg.objective.kind == Objective::Kind::Promote)
    r.value = eps_favorite_count(pop, inst, r.best_z, cfg.objective.x_star, cfg.epsilon);
  else
    r.value = disagreement(pop, inst, r.best_z);
  r.cells_materialized = 1;
  r.search_fraction = 1.0 / std::ldexp(1.0, inst.m());
  return r;
}

void check_common(const Population& pop, const ChoiceInstance& inst,
                  const ApproxConfig& cfg) {
  pop.validate(inst.universe.size());
  if (!(cfg.epsilon > 0)) throw SpecError("epsilon must be > 0");
  if (cfg.objective.kind == Objective::Kind::Promote &&
      !set_contains(inst.choice_set, cfg.objective.x_star))
    throw SpecError("promotion target is not in C");
}

}  // namespace

ApproxResult optimize_mnl(const Population& pop, const ChoiceInstance& inst,
                          const ApproxConfig& cfg) {
  check_common(pop, inst, cfg);
  if (pop.family() != Family::Mnl) throw SpecError("optimize_mnl requires an MNL population");
  if (cfg.objective.kind == Objective::Kind::Promote)
    throw SpecError("Promotion under MNL is fixed by IIA; use agreement/disagreement");
  if (inst.m() == 0 || pop.n() < 2) return trivial_result(pop, inst, cfg);

  double delta = cfg.epsilon / (2.0 * inst.k() * inst.m() * binom2(pop.n()));
  VariantSpec spec = build_mnl_spec(pop, inst, delta);

  Eigen::MatrixXd exp_c(pop.n(), inst.k());
  for (int a = 0; a < pop.n(); ++a) {
    const auto& u = std::get<MnlParams>(pop.members[a]).utilities;
    for (int j = 0; j < inst.k(); ++j) {
      double v = u[inst.choice_set[j]];
      exp_c(a, j) = v == kNegInf ? 0.0 : std::exp(v + spec.shifts[a]);
    }
  }
  auto entry_probs = [&, exp_c](const CellEntry& entry) {
    Eigen::MatrixXd probs(exp_c.rows(), exp_c.cols());
    for (int a = 0; a < probs.rows(); ++a) {
      double denom = exp_c.row(a).sum() + entry.sums[a];
      probs.row(a) = exp_c.row(a) / denom;
    }
    return probs;
  };
  return run_table(inst, cfg, delta, std::move(spec), entry_probs);
}

ApproxResult optimize_cdm(const Population& pop, const ChoiceInstance& inst,
                          const ApproxConfig& cfg) {
  check_common(pop, inst, cfg);
  Family f = pop.family();
  if (f != Family::Cdm && f != Family::CdmAlt)
    throw SpecError("optimize_cdm requires a CDM population");
  if (cfg.objective.kind == Objective::Kind::Promote)
    throw SpecError("use promote_cdm for Promotion");
  if (inst.m() == 0 || pop.n() < 2) return trivial_result(pop, inst, cfg);

  double delta = cfg.epsilon / (2.0 * inst.k() * inst.m() * binom2(pop.n()));
  if (cfg.guarantee_mode) delta /= 4.0;
  CdmView view = build_cdm_view(pop, inst);
  VariantSpec spec = build_cdm_spec(view, inst, delta);
  auto entry_probs = [&view](const CellEntry& e) { return cdm_entry_probs(view, e); };
  return run_table(inst, cfg, delta, std::move(spec), entry_probs);
}

ApproxResult optimize_nl(const Population& pop, const ChoiceInstance& inst,
                         const ApproxConfig& cfg) {
  check_common(pop, inst, cfg);
  if (pop.family() != Family::Nl) throw SpecError("optimize_nl requires an NL population");
  if (cfg.objective.kind == Objective::Kind::Promote)
    throw SpecError("use promote_nl for Promotion");
  if (inst.m() == 0 || pop.n() < 2) return trivial_result(pop, inst, cfg);

  int h = max_tree_height(pop);
  double delta = nl_delta(cfg.epsilon / (2.0 * inst.k() * binom2(pop.n())), h, inst.m());
  NlDims dims;
  VariantSpec spec = build_nl_spec(pop, inst, delta, dims);
  auto entry_probs = [&dims](const CellEntry& e) { return nl_entry_probs(dims, e); };
  return run_table(inst, cfg, delta, std::move(spec), entry_probs);
}

ApproxResult promote_cdm(const Population& pop, const ChoiceInstance& inst, int x_star,
                         double eps) {
  ApproxConfig cfg;
  cfg.epsilon = eps;
  cfg.objective = Objective::promote(x_star);
  check_common(pop, inst, cfg);
  Family f = pop.family();
  if (f != Family::Cdm && f != Family::CdmAlt)
    throw SpecError("promote_cdm requires a CDM population");
  if (inst.m() == 0) return trivial_result(pop, inst, cfg);

  double delta = eps / (10.0 * inst.m());
  CdmView view = build_cdm_view(pop, inst);
  VariantSpec spec = build_cdm_spec(view, inst, delta);
  auto entry_probs = [&view](const CellEntry& e) { return cdm_entry_probs(view, e); };
  return run_table(inst, cfg, delta, std::move(spec), entry_probs);
}

ApproxResult promote_nl(const Population& pop, const ChoiceInstance& inst, int x_star,
                        double eps) {
  ApproxConfig cfg;
  cfg.epsilon = eps;
  cfg.objective = Objective::promote(x_star);
  check_common(pop, inst, cfg);
  if (pop.family() != Family::Nl) throw SpecError("promote_nl requires an NL population");
  if (inst.m() == 0) return trivial_result(pop, inst, cfg);

  double delta = nl_delta(eps / 4.0, max_tree_height(pop), inst.m());
  NlDims dims;
  VariantSpec spec = build_nl_spec(pop, inst, delta, dims);
  auto entry_probs = [&dims](const CellEntry& e) { return nl_entry_probs(dims, e); };
  return run_table(inst, cfg, delta, std::move(spec), entry_probs);
}

ApproxResult optimize_approx(const Population& pop, const ChoiceInstance& inst,
                             const ApproxConfig& cfg) {
  Family f = pop.family();
  if (cfg.objective.kind == Objective::Kind::Promote) {
    switch (f) {
      case Family::Cdm:
      case Family::CdmAlt:
        return promote_cdm(pop, inst, cfg.objective.x_star, cfg.epsilon);
      case Family::Nl:
        return promote_nl(pop, inst, cfg.objective.x_star, cfg.epsilon);
      default:
        throw SpecError("promotion approximation supports CDM and NL populations only");
    }
  }
  switch (f) {
    case Family::Mnl: return optimize_mnl(pop, inst, cfg);
    case Family::Cdm:
    case Family::CdmAlt: return optimize_cdm(pop, inst, cfg);
    case Family::Nl: return optimize_nl(pop, inst, cfg);
    default: throw SpecError("no approximation variant exists for EBA populations");
  }
}

}  // namespace choiceopt
