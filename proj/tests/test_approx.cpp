#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "choiceopt/approx.hpp"
#include "choiceopt/exact.hpp"
#include "choiceopt/gadgets.hpp"
#include "choiceopt/objectives.hpp"
#include "test_helpers.hpp"

using namespace choiceopt;
using namespace choiceopt::testing;

namespace {

ApproxConfig config(double eps, Objective obj) {
  ApproxConfig cfg;
  cfg.epsilon = eps;
  cfg.objective = obj;
  cfg.verify_sums = true;  // exercise the from-scratch check everywhere
  return cfg;
}

std::pair<Population, ChoiceInstance> random_mnl_instance(std::mt19937_64& rng, int n,
                                                          int k, int m, double lo,
                                                          double hi) {
  Population pop;
  for (int a = 0; a < n; ++a) {
    pop.labels.push_back("s" + std::to_string(a));
    pop.members.push_back(random_mnl(rng, k + m, lo, hi));
  }
  ItemSet c;
  for (int i = 0; i < k; ++i) c.push_back(i);
  std::vector<int> alts;
  for (int i = k; i < k + m; ++i) alts.push_back(i);
  return {std::move(pop), ChoiceInstance(make_universe(k + m), c, alts)};
}

}  // namespace

TEST_CASE("adversarial 2x2x2 instance: the table finds {p, q}") {
  auto [pop, inst] = greedy_trap_instance();
  ApproxResult r = optimize_mnl(pop, inst, config(0.01, Objective::minimize_d()));
  CHECK(r.best_z.members == ItemSet{2, 3});
  CHECK(std::abs(r.value - 0.0009) < 1e-3);
  CHECK(r.search_fraction <= 1.0);
  CHECK(r.cells_materialized == 4);  // full table at this epsilon
}

TEST_CASE("additive bound against brute force on random instances") {
  std::mt19937_64 rng(101);
  const double eps = 0.01;
  for (int trial = 0; trial < 12; ++trial) {
    int m = 4 + static_cast<int>(uniform01(rng) * 9);  // 4..12
    auto [pop, inst] = random_mnl_instance(rng, 2, 2, m, 0.1, 3.0);

    ApproxResult lo = optimize_mnl(pop, inst, config(eps, Objective::minimize_d()));
    ExactResult blo = brute_force(pop, inst, Objective::minimize_d());
    CHECK(lo.value <= blo.value + eps);
    CHECK(lo.value >= blo.value - 1e-12);  // cannot beat the optimum
    // the reported value re-evaluates
    CHECK(disagreement(pop, inst, lo.best_z) == doctest::Approx(lo.value).epsilon(1e-12));

    ApproxResult hi = optimize_mnl(pop, inst, config(eps, Objective::maximize_d()));
    ExactResult bhi = brute_force(pop, inst, Objective::maximize_d());
    CHECK(hi.value >= bhi.value - eps);
    CHECK(hi.value <= bhi.value + 1e-12);
  }
}

TEST_CASE("partition gadget through the table") {
  GadgetSpec spec;
  spec.kind = GadgetSpec::Kind::AgreementPartition;
  spec.s = {1, 1, 2};
  GadgetInstance g = generate(spec);
  ApproxResult r = optimize_mnl(g.pop, g.inst, config(0.01, Objective::minimize_d()));
  CHECK(std::abs(r.value - 1.0 / 6) <= 0.01);
  CHECK(verify_certificate(g, r.best_z));
}

TEST_CASE("degenerate inputs") {
  auto [pop, inst0] = greedy_trap_instance();
  ChoiceInstance no_alts(inst0.universe, {0, 1, 2, 3}, {});
  ApproxResult r = optimize_mnl(pop, no_alts, config(0.01, Objective::minimize_d()));
  CHECK(r.best_z.members.empty());
  CHECK(r.cells_materialized == 1);
  CHECK(r.search_fraction == 1.0);

  CHECK_THROWS_AS(optimize_mnl(pop, inst0, config(-1.0, Objective::minimize_d())),
                  SpecError);
  CHECK_THROWS_AS(optimize_mnl(pop, inst0, config(0.01, Objective::promote(0))), SpecError);

  Population cdm_pop;
  cdm_pop.labels = {"a", "b"};
  std::mt19937_64 rng(1);
  cdm_pop.members = {random_cdm(rng, 4), random_cdm(rng, 4)};
  CHECK_THROWS_AS(optimize_mnl(cdm_pop, inst0, config(0.01, Objective::minimize_d())),
                  SpecError);
}

TEST_CASE("determinism and first-write fixedness") {
  std::mt19937_64 rng(7);
  auto [pop, inst] = random_mnl_instance(rng, 2, 2, 9, 0.1, 3.0);
  ApproxConfig cfg = config(0.25, Objective::minimize_d());
  cfg.capture_table = true;
  ApproxResult a = optimize_mnl(pop, inst, cfg);
  ApproxResult b = optimize_mnl(pop, inst, cfg);
  CHECK(a.best_z.members == b.best_z.members);
  CHECK(a.value == b.value);
  CHECK(a.cells_materialized == b.cells_materialized);
  REQUIRE(a.cells.size() == b.cells.size());
  for (size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].members == b.cells[i].members);
    CHECK(a.cells[i].sums == b.cells[i].sums);
  }
}

TEST_CASE("empty set keeps its reserved cell") {
  // utilities shifted to ~0.001 make singleton sums land in [1, 1+delta) at
  // index 0; the zero-sum sentinel must keep the empty set separate.
  Population pop;
  MnlParams a, b;
  a.utilities.resize(3);
  a.utilities << 0.5, 0.5, 0.0011;  // alternative lands near exp(0.001)
  b.utilities.resize(3);
  b.utilities << 0.5, 0.5, 0.0011;
  pop.labels = {"a", "b"};
  pop.members = {a, b};
  ChoiceInstance inst(make_universe(3), {0, 1}, {2});

  ApproxConfig cfg = config(5.0, Objective::minimize_d());  // very coarse delta
  cfg.capture_table = true;
  ApproxResult r = optimize_mnl(pop, inst, cfg);
  CHECK(r.cells_materialized == 2);
  bool saw_empty = false, saw_single = false;
  for (const auto& cell : r.cells) {
    saw_empty = saw_empty || cell.members.empty();
    saw_single = saw_single || cell.members == ItemSet{2};
  }
  CHECK(saw_empty);
  CHECK(saw_single);
}

TEST_CASE("stored-table envelope against every subset") {
  std::mt19937_64 rng(13);
  auto [pop, inst] = random_mnl_instance(rng, 2, 2, 8, 0.1, 3.0);
  ApproxConfig cfg = config(2.0, Objective::minimize_d());
  cfg.capture_table = true;
  ApproxResult r = optimize_mnl(pop, inst, cfg);
  const int m = inst.m();
  const double factor = std::pow(1.0 + r.delta, m);

  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(2);
    for (int i = 0; i < m; ++i)
      if (mask & (1u << i))
        for (int a = 0; a < 2; ++a)
          sums[a] += std::exp(
              std::get<MnlParams>(pop.members[a]).utilities[inst.alternatives[i]] +
              r.shifts[a]);
    bool covered = false;
    for (const auto& cell : r.cells) {
      bool ok = true;
      for (int a = 0; a < 2 && ok; ++a) {
        if (sums[a] == 0.0) ok = cell.sums[a] == 0.0;
        else ok = cell.sums[a] > sums[a] / factor && cell.sums[a] < sums[a] * factor;
      }
      if (ok) covered = true;
    }
    CHECK(covered);
  }
}

TEST_CASE("cell count stays within the runtime bound") {
  std::mt19937_64 rng(17);
  auto [pop, inst] = random_mnl_instance(rng, 2, 2, 10, 0.1, 3.0);
  ApproxResult r = optimize_mnl(pop, inst, config(1.0, Objective::minimize_d()));

  double bound = 1.0;
  for (int a = 0; a < 2; ++a) {
    double s = 0.0;
    for (int z : inst.alternatives)
      s += std::exp(std::get<MnlParams>(pop.members[a]).utilities[z] + r.shifts[a]);
    bound *= 2.0 + std::floor(std::log(s) / std::log1p(r.delta));
  }
  CHECK(static_cast<double>(r.cells_materialized) <= std::min(std::ldexp(1.0, 10), bound));
}

TEST_CASE("coarser epsilon never enlarges the table") {
  std::mt19937_64 rng(19);
  auto [pop, inst] = random_mnl_instance(rng, 2, 2, 11, 0.1, 3.0);
  std::int64_t previous = std::numeric_limits<std::int64_t>::max();
  for (double eps : {0.05, 0.2, 0.8, 3.2, 12.8}) {
    ApproxResult r = optimize_mnl(pop, inst, config(eps, Objective::minimize_d()));
    CHECK(r.cells_materialized <= previous);
    previous = r.cells_materialized;
  }
}

TEST_CASE("cdm variant with zero pulls reproduces the mnl result") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 4; ++trial) {
    auto [pop, inst] = random_mnl_instance(rng, 2, 2, 7, 0.1, 3.0);
    Population cdm_pop;
    cdm_pop.labels = pop.labels;
    for (const auto& member : pop.members)
      cdm_pop.members.push_back(encode_mnl_as_cdm(std::get<MnlParams>(member)));

    ApproxResult mnl_r = optimize_mnl(pop, inst, config(0.01, Objective::minimize_d()));
    ApproxResult cdm_r = optimize_cdm(cdm_pop, inst, config(0.01, Objective::minimize_d()));
    CHECK(cdm_r.guarantee_applicable);
    CHECK(cdm_r.best_z.members == mnl_r.best_z.members);
    CHECK(cdm_r.value == doctest::Approx(mnl_r.value).epsilon(1e-12));
  }
}

TEST_CASE("cdm variant respects the 4-eps and guarantee-mode bounds") {
  std::mt19937_64 rng(29);
  const double eps = 0.05;
  for (int trial = 0; trial < 8; ++trial) {
    // restricted instance: alternatives exert pulls on C only
    const int k = 2, m = 8, n = 2;
    Population pop;
    for (int a = 0; a < n; ++a) {
      CdmAltParams p;
      p.q = Eigen::MatrixXd::Zero(k + m, k + m);
      for (int w = 0; w < k + m; ++w)
        for (int x = 0; x < k; ++x)
          if (w != x) p.q(w, x) = uniform_in(rng, -0.6, 0.6);
      for (int x = k; x < k + m; ++x)
        for (int w = 0; w < k; ++w) p.q(w, x) = uniform_in(rng, -0.6, 0.6);
      pop.labels.push_back("s" + std::to_string(a));
      pop.members.push_back(std::move(p));
    }
    ChoiceInstance inst(make_universe(k + m), {0, 1}, {2, 3, 4, 5, 6, 7, 8, 9});

    ExactResult best = brute_force(pop, inst, Objective::minimize_d());
    ApproxResult r = optimize_cdm(pop, inst, config(eps, Objective::minimize_d()));
    CHECK(r.guarantee_applicable);
    CHECK(r.value <= best.value + 4 * eps);

    ApproxConfig tight = config(eps, Objective::minimize_d());
    tight.guarantee_mode = true;
    ApproxResult rt = optimize_cdm(pop, inst, tight);
    CHECK(rt.value <= best.value + eps);
    CHECK(rt.delta == doctest::Approx(r.delta / 4).epsilon(1e-15));
  }
}

TEST_CASE("cdm variant flags nonzero alternative-alternative pulls") {
  std::mt19937_64 rng(31);
  Population pop;
  pop.labels = {"a", "b"};
  pop.members = {random_cdm_alt(rng, 5), random_cdm_alt(rng, 5)};
  ChoiceInstance inst(make_universe(5), {0, 1}, {2, 3, 4});
  ApproxResult r = optimize_cdm(pop, inst, config(0.05, Objective::minimize_d()));
  CHECK_FALSE(r.guarantee_applicable);
  // heuristic sweep still reports the exact value of the returned set
  CHECK(disagreement(pop, inst, r.best_z) == doctest::Approx(r.value).epsilon(1e-12));
}

TEST_CASE("nl variant: flat trees match the mnl result") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 4; ++trial) {
    auto [pop, inst] = random_mnl_instance(rng, 2, 2, 7, 0.1, 3.0);
    Population nl_pop;
    nl_pop.labels = pop.labels;
    for (const auto& member : pop.members)
      nl_pop.members.push_back(
          encode_mnl_as_nl(std::get<MnlParams>(member), inst.universe));

    ApproxResult mnl_r = optimize_mnl(pop, inst, config(0.05, Objective::minimize_d()));
    ApproxResult nl_r = optimize_nl(nl_pop, inst, config(0.05, Objective::minimize_d()));
    CHECK(std::abs(nl_r.value - mnl_r.value) <= 0.05);
    ExactResult b = brute_force(nl_pop, inst, Objective::minimize_d());
    CHECK(nl_r.value <= b.value + 0.05);
    // height 1 collapses the root-adjusted step to the flat formula
    CHECK(nl_r.delta == doctest::Approx(mnl_r.delta).epsilon(1e-12));
  }
}

TEST_CASE("promotion with all-zero pulls is fixed by ratio independence") {
  CdmAltParams flat;
  flat.q = Eigen::MatrixXd::Zero(5, 5);
  Population pop;
  pop.labels = {"a"};
  pop.members = {flat};
  ChoiceInstance inst(make_universe(5), {0, 1}, {2, 3, 4});

  ApproxResult r = promote_cdm(pop, inst, 0, 0.01);
  CHECK(r.best_z.members.empty());  // every set ties; lex break keeps the empty set
  for (unsigned mask = 0; mask < 8u; ++mask) {
    ItemSet z;
    for (int i = 0; i < 3; ++i)
      if (mask & (1u << i)) z.push_back(2 + i);
    CHECK(eps_favorite_count(pop, inst, AlternativeSet(z), 0, 0.01) ==
          static_cast<int>(r.value));
  }
}

TEST_CASE("nl variant against brute force on the mirrored trees") {
  GadgetSpec spec;
  spec.kind = GadgetSpec::Kind::PromoNl;
  spec.s = {1, 2, 3};
  spec.target = 3;
  GadgetInstance g = generate(spec);
  for (auto obj : {Objective::minimize_d(), Objective::maximize_d()}) {
    ApproxResult r = optimize_nl(g.pop, g.inst, config(0.01, obj));
    ExactResult b = brute_force(g.pop, g.inst, obj);
    if (obj.kind == Objective::Kind::MinimizeD) CHECK(r.value <= b.value + 0.01);
    else CHECK(r.value >= b.value - 0.01);
  }
}

TEST_CASE("nl variant compresses all-alternative subtrees") {
  // universe: two base items under the root, plus a nest holding only
  // alternatives; the nest contributes a single two-state dimension.
  Universe u({"c0", "c1", "z1", "z2", "z3"});
  auto build = [&](double w1, double w2, double w3) {
    NlTree t;
    t.leaf_of_item.assign(5, -1);
    t.nodes.resize(7);
    t.nodes[0].parent = -1;
    t.nodes[0].children = {1, 2, 3};
    t.nodes[1] = {0, {}, 0.9, 0, "c0"};
    t.leaf_of_item[0] = 1;
    t.nodes[2] = {0, {}, 0.4, 1, "c1"};
    t.leaf_of_item[1] = 2;
    t.nodes[3].parent = 0;
    t.nodes[3].name = "nest";
    t.nodes[3].utility = 0.7;
    t.nodes[3].children = {4, 5, 6};
    t.nodes[4] = {3, {}, w1, 2, ""};
    t.leaf_of_item[2] = 4;
    t.nodes[5] = {3, {}, w2, 3, ""};
    t.leaf_of_item[3] = 5;
    t.nodes[6] = {3, {}, w3, 4, ""};
    t.leaf_of_item[4] = 6;
    t.validate(5);
    return t;
  };
  Population pop;
  pop.labels = {"a", "b"};
  pop.members = {build(0.1, 0.5, 0.9), build(0.8, 0.2, 0.4)};
  ChoiceInstance inst(u, {0, 1}, {2, 3, 4});

  ApproxConfig cfg = config(0.01, Objective::minimize_d());
  cfg.capture_table = true;
  ApproxResult r = optimize_nl(pop, inst, cfg);
  // two-state per individual: {} plus "some alternative present" = 2 cells
  CHECK(r.cells_materialized == 2);
  ExactResult b = brute_force(pop, inst, Objective::minimize_d());
  CHECK(r.value <= b.value + 0.01);
}

TEST_CASE("promotion through the table on the cdm constructions") {
  for (auto kind : {GadgetSpec::Kind::PromoCdm1x3, GadgetSpec::Kind::PromoCdm2x2}) {
    GadgetSpec spec;
    spec.kind = kind;
    spec.s = {1, 2, 4, 3};
    spec.target = 6;
    GadgetInstance g = generate(spec);
    ApproxResult r = promote_cdm(g.pop, g.inst, g.x_star, 0.01);
    ExactResult b = brute_force(g.pop, g.inst, Objective::promote(g.x_star));
    CHECK(r.value >= b.value);  // eps-favorite relaxation reaches the strict optimum
    CHECK(r.guarantee_applicable);
    CHECK(eps_favorite_count(g.pop, g.inst, r.best_z, g.x_star, 0.01) ==
          static_cast<int>(r.value));
  }
}

TEST_CASE("promotion through the table on the mirrored trees") {
  GadgetSpec spec;
  spec.kind = GadgetSpec::Kind::PromoNl;
  spec.s = {2, 3, 4};
  spec.target = 5;
  GadgetInstance g = generate(spec);
  ApproxResult r = promote_nl(g.pop, g.inst, g.x_star, 0.01);
  ExactResult b = brute_force(g.pop, g.inst, Objective::promote(g.x_star));
  CHECK(b.value == 2);
  CHECK(r.value >= b.value);
  CHECK(eps_favorite_count(g.pop, g.inst, r.best_z, g.x_star, 0.01) == 2);

  // no alternatives: count at the empty set
  std::mt19937_64 rng(43);
  Universe two = make_universe(2);
  Population pair_pop;
  pair_pop.labels = {"a", "b"};
  pair_pop.members = {random_nl_tree(rng, 2), random_nl_tree(rng, 2)};
  ChoiceInstance bare(two, {0, 1}, {});
  ApproxResult r0 = promote_nl(pair_pop, bare, 0, 0.01);
  CHECK(r0.best_z.members.empty());
  CHECK(r0.value == favorite_count(pair_pop, bare, AlternativeSet{}, 0));
}

TEST_CASE("same-tree promotion matches the closed-form rule") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 6; ++trial) {
    int u_size = 5 + static_cast<int>(uniform01(rng) * 3);
    Population pop = shared_tree_population(rng, 2, u_size);
    ItemSet c = random_subset(rng, u_size, 2);
    std::vector<int> alts;
    for (int i = 0; i < u_size; ++i)
      if (!set_contains(c, i)) alts.push_back(i);
    ChoiceInstance inst(make_universe(u_size), c, alts);
    int x_star = c[0];

    AlternativeSet closed = promote_nl_same_tree(pop, inst, x_star);
    ApproxResult table = promote_nl(pop, inst, x_star, 0.01);
    int closed_count = favorite_count(pop, inst, closed, x_star);
    CHECK(static_cast<int>(table.value) >= closed_count);
  }
}

TEST_CASE("family dispatch") {
  auto [pop, inst] = greedy_trap_instance();
  ApproxConfig cfg = config(0.01, Objective::minimize_d());
  ApproxResult r = optimize_approx(pop, inst, cfg);
  CHECK(r.best_z.members == ItemSet{2, 3});

  Population eba;
  eba.labels = {"a"};
  std::mt19937_64 rng(1);
  eba.members = {random_eba(rng, 4)};
  CHECK_THROWS_WITH_AS(optimize_approx(eba, inst, cfg), doctest::Contains("EBA"), SpecError);
}
