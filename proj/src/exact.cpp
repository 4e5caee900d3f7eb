#include "choiceopt/exact.hpp"

#include <cmath>
#include <future>
#include <thread>

namespace choiceopt {

double evaluate_objective(const Population& pop, const ChoiceInstance& inst,
                          const Objective& objective, const AlternativeSet& z) {
  switch (objective.kind) {
    case Objective::Kind::MinimizeD:
    case Objective::Kind::MaximizeD:
      return disagreement(pop, inst, z);
    case Objective::Kind::Promote:
      return favorite_count(pop, inst, z, objective.x_star);
  }
  throw SpecError("unknown objective");
}

namespace {

// Better-than comparison with the deterministic lexicographic tie-break.
// Total order, so parallel partition scans reduce to the sequential answer.
bool better(const Objective& obj, double value, const AlternativeSet& z, double best_value,
            const AlternativeSet& best_z, const Universe& universe) {
  bool minimizing = obj.kind == Objective::Kind::MinimizeD;
  if (minimizing ? value < best_value : value > best_value) return true;
  if (value == best_value && lex_less(z, best_z, universe)) return true;
  return false;
}

AlternativeSet set_from_mask(const ChoiceInstance& inst, std::uint32_t mask) {
  ItemSet members;
  for (int i = 0; i < inst.m(); ++i)
    if (mask & (1u << i)) members.push_back(inst.alternatives[i]);
  return AlternativeSet(std::move(members));
}

struct Candidate {
  AlternativeSet z;
  double value;
};

Candidate scan_masks(const Population& pop, const ChoiceInstance& inst,
                     const Objective& objective, std::uint32_t begin, std::uint32_t end) {
  Candidate best{set_from_mask(inst, begin),
                 evaluate_objective(pop, inst, objective, set_from_mask(inst, begin))};
  for (std::uint32_t mask = begin + 1; mask < end; ++mask) {
    AlternativeSet z = set_from_mask(inst, mask);
    double v = evaluate_objective(pop, inst, objective, z);
    if (better(objective, v, z, best.value, best.z, inst.universe)) best = {std::move(z), v};
  }
  return best;
}

}  // namespace

ExactResult brute_force(const Population& pop, const ChoiceInstance& inst,
                        const Objective& objective) {
  pop.validate(inst.universe.size());
  if (inst.m() > 25)
    throw SpecError("brute force refuses m > 25 alternatives (got " +
                    std::to_string(inst.m()) + ")");
  const std::uint32_t total = 1u << inst.m();

  unsigned workers = std::min<unsigned>(std::thread::hardware_concurrency(), 8);
  Candidate best;
  if (inst.m() < 10 || workers < 2) {
    best = scan_masks(pop, inst, objective, 0, total);
  } else {
    std::uint32_t chunk = total / workers;
    std::vector<std::future<Candidate>> parts;
    for (unsigned w = 0; w < workers; ++w) {
      std::uint32_t begin = w * chunk;
      std::uint32_t end = w + 1 == workers ? total : begin + chunk;
      parts.push_back(std::async(std::launch::async, scan_masks, std::cref(pop),
                                 std::cref(inst), std::cref(objective), begin, end));
    }
    best = parts.front().get();
    for (size_t i = 1; i < parts.size(); ++i) {
      Candidate c = parts[i].get();
      if (better(objective, c.value, c.z, best.value, best.z, inst.universe)) best = std::move(c);
    }
  }
  return {std::move(best.z), best.value, static_cast<std::int64_t>(total)};
}

ExactResult greedy(const Population& pop, const ChoiceInstance& inst,
                   const Objective& objective) {
  pop.validate(inst.universe.size());
  constexpr double kImprovement = 1e-12;
  AlternativeSet z;
  double value = evaluate_objective(pop, inst, objective, z);
  std::int64_t evaluations = 1;

  bool improved = true;
  while (improved && z.size() < inst.m()) {
    improved = false;
    int best_item = -1;
    double best_value = value;
    for (int cand : inst.alternatives) {
      if (set_contains(z.members, cand)) continue;
      AlternativeSet trial(z.members);
      trial.members.push_back(cand);
      std::sort(trial.members.begin(), trial.members.end());
      double v = evaluate_objective(pop, inst, objective, trial);
      ++evaluations;
      double gain = objective.kind == Objective::Kind::MinimizeD ? best_value - v
                                                                 : v - best_value;
      bool strictly_better = gain > kImprovement;
      bool tie_on_best = best_item >= 0 && v == best_value &&
                         inst.universe.id(cand) < inst.universe.id(best_item);
      if (strictly_better || tie_on_best) {
        best_item = cand;
        best_value = v;
      }
    }
    if (best_item >= 0) {
      double gain = objective.kind == Objective::Kind::MinimizeD ? value - best_value
                                                                 : best_value - value;
      if (gain > kImprovement) {
        z.members.push_back(best_item);
        std::sort(z.members.begin(), z.members.end());
        value = best_value;
        improved = true;
      }
    }
  }
  return {std::move(z), value, evaluations};
}

// ---------------------------------------------------------------------------
// Restricted closed forms
// ---------------------------------------------------------------------------

AlternativeSet promote_cdm_2item_equal(const Population& pop, const ChoiceInstance& inst,
                                       int x_star) {
  pop.validate(inst.universe.size());
  if (pop.family() != Family::Cdm)
    throw SpecError("promote_cdm_2item_equal requires a CDM population");
  if (inst.k() != 2) throw SpecError("promote_cdm_2item_equal requires |C| = 2");
  if (!set_contains(inst.choice_set, x_star))
    throw SpecError("promotion target is not in C");
  int competitor = inst.choice_set[0] == x_star ? inst.choice_set[1] : inst.choice_set[0];

  // Every alternative must exert the same pull vector, per individual.
  for (int a = 0; a < pop.n(); ++a) {
    const auto& p = std::get<CdmParams>(pop.members[a]);
    const int z0 = inst.alternatives.empty() ? -1 : inst.alternatives[0];
    for (int z : inst.alternatives)
      for (int x = 0; x < inst.universe.size(); ++x)
        if (x != z && x != z0 && p.pulls(z, x) != p.pulls(z0, x))
          throw SpecError("violated precondition: p_a(z, .) must be identical across all "
                          "alternatives z (individual " + pop.labels[a] + ")");
  }
  if (inst.m() == 0) return AlternativeSet{};

  // The include filter must agree in sign across individuals.
  const int z0 = inst.alternatives[0];
  auto filter = [&](int a) {
    const auto& p = std::get<CdmParams>(pop.members[a]);
    return p.pulls(z0, x_star) > p.pulls(z0, competitor);
  };
  bool include = filter(0);
  for (int a = 1; a < pop.n(); ++a)
    if (filter(a) != include)
      throw SpecError("violated precondition: individuals disagree on whether alternatives "
                      "pull x_star above its competitor");

  if (!include) return AlternativeSet{};
  ItemSet all(inst.alternatives.begin(), inst.alternatives.end());
  return AlternativeSet(std::move(all));
}

AlternativeSet promote_nl_same_tree(const Population& pop, const ChoiceInstance& inst,
                                    int x_star) {
  pop.validate(inst.universe.size());
  if (pop.family() != Family::Nl)
    throw SpecError("promote_nl_same_tree requires an NL population");
  if (!set_contains(inst.choice_set, x_star))
    throw SpecError("promotion target is not in C");

  const auto& tree = std::get<NlTree>(pop.members[0]);
  for (int a = 1; a < pop.n(); ++a) {
    const auto& other = std::get<NlTree>(pop.members[a]);
    bool same = other.nodes.size() == tree.nodes.size();
    for (size_t v = 0; same && v < tree.nodes.size(); ++v)
      same = other.nodes[v].parent == tree.nodes[v].parent &&
             other.nodes[v].children == tree.nodes[v].children &&
             other.nodes[v].item == tree.nodes[v].item;
    if (!same)
      throw SpecError("violated precondition: individuals have differing tree topologies");
  }

  // has_base[v]: some item of C is a leaf under v.
  std::vector<char> has_base(tree.nodes.size(), 0);
  for (int x : inst.choice_set)
    for (int v = tree.leaf_of_item[x]; v != -1; v = tree.nodes[v].parent) has_base[v] = 1;

  std::vector<char> on_star_path(tree.nodes.size(), 0);
  on_star_path[tree.root()] = 1;
  for (int v : tree.path_to_item(x_star)) on_star_path[v] = 1;

  // Walk up from z: the branch node is where z's path leaves x_star's path.
  // z is safe iff that branch already holds a base item.
  ItemSet keep;
  for (int z : inst.alternatives) {
    int branch = tree.leaf_of_item[z];
    while (!on_star_path[tree.nodes[branch].parent]) branch = tree.nodes[branch].parent;
    if (has_base[branch]) keep.push_back(z);
  }
  return AlternativeSet(std::move(keep));
}

AlternativeSet promote_eba_disjoint(const Population& pop, const ChoiceInstance& inst,
                                    int x_star) {
  pop.validate(inst.universe.size());
  if (pop.family() != Family::Eba)
    throw SpecError("promote_eba_disjoint requires an EBA population");
  if (!set_contains(inst.choice_set, x_star))
    throw SpecError("promotion target is not in C");

  const auto& base = std::get<EbaParams>(pop.members[0]);
  for (int a = 1; a < pop.n(); ++a)
    if (std::get<EbaParams>(pop.members[a]).item_aspects != base.item_aspects)
      throw SpecError("violated precondition: individuals have differing aspect structures");

  auto shares = [&](int i, int j) {
    const auto& ai = base.item_aspects[i];
    const auto& aj = base.item_aspects[j];
    std::vector<int> common;
    std::set_intersection(ai.begin(), ai.end(), aj.begin(), aj.end(),
                          std::back_inserter(common));
    return !common.empty();
  };

  ItemSet keep;
  for (int z : inst.alternatives) {
    bool hits_star = shares(z, x_star);
    bool hits_competitor = false;
    for (int y : inst.choice_set)
      if (y != x_star && shares(z, y)) hits_competitor = true;
    if (hits_star && hits_competitor)
      throw SpecError("violated precondition: alternative " + inst.universe.id(z) +
                      " shares aspects with both x_star and a competitor");
    if (!hits_star && hits_competitor) keep.push_back(z);
  }
  return AlternativeSet(std::move(keep));
}

double stubbornness(const MnlParams& params, const ChoiceInstance& inst) {
  if (std::abs(params.utilities.sum()) > 1e-9)
    throw SpecError("stubbornness requires standard-form utilities (zero sum over the "
                    "universe)");
  double sigma = 0.0;
  for (int x : inst.choice_set) sigma += std::exp(params.utilities[x]);
  return sigma;
}

AlternativeSet solve_equal_stubbornness(const Population& pop, const ChoiceInstance& inst,
                                        const Objective& objective) {
  pop.validate(inst.universe.size());
  if (pop.family() != Family::Mnl)
    throw SpecError("solve_equal_stubbornness requires an MNL population");
  if (objective.kind == Objective::Kind::Promote)
    throw SpecError("solve_equal_stubbornness handles Agreement/Disagreement only");

  std::vector<double> sigma;
  for (int a = 0; a < pop.n(); ++a)
    sigma.push_back(stubbornness(std::get<MnlParams>(pop.members[a]), inst));
  for (int a = 1; a < pop.n(); ++a)
    if (std::abs(sigma[a] - sigma[0]) > 1e-9)
      throw SpecError("violated precondition: individuals are not equally stubborn");
  for (int z : inst.alternatives) {
    double u0 = std::get<MnlParams>(pop.members[0]).utilities[z];
    for (int a = 1; a < pop.n(); ++a)
      if (std::abs(std::get<MnlParams>(pop.members[a]).utilities[z] - u0) > 1e-9)
        throw SpecError("violated precondition: alternative utilities differ across "
                        "individuals");
  }

  if (objective.kind == Objective::Kind::MinimizeD) {
    ItemSet all(inst.alternatives.begin(), inst.alternatives.end());
    return AlternativeSet(std::move(all));
  }
  return AlternativeSet{};
}

}  // namespace choiceopt
