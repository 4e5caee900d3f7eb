#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "choiceopt/gadgets.hpp"
#include "choiceopt/model_io.hpp"
#include "choiceopt/models.hpp"
#include "test_helpers.hpp"

using namespace choiceopt;
using namespace choiceopt::testing;

TEST_CASE("mnl probabilities") {
  MnlParams p;
  p.utilities.resize(2);
  p.utilities << 0.0, 0.0;
  ItemSet set{0, 1};
  CHECK(mnl_prob(p, set, 0) == doctest::Approx(0.5).epsilon(1e-12));

  MnlParams q;
  q.utilities.resize(3);
  q.utilities << std::log(2.0), std::log(1.0), std::log(1.0);
  ItemSet xyz{0, 1, 2};
  CHECK(mnl_prob(q, xyz, 0) == doctest::Approx(0.5).epsilon(1e-12));

  // Partition gadget utilities at t = 2: u_b(x) = log 6, u_b(y) = log 4.
  MnlParams b;
  b.utilities.resize(2);
  b.utilities << std::log(6.0), std::log(4.0);
  CHECK(mnl_prob(b, set, 0) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("mnl errors") {
  MnlParams p;
  p.utilities.resize(3);
  p.utilities << 1.0, 2.0, kNegInf;
  ItemSet set{0, 1};
  CHECK_THROWS_AS(mnl_prob(p, set, 2), SpecError);  // not in set

  MnlParams degenerate;
  degenerate.utilities.resize(2);
  degenerate.utilities << kNegInf, kNegInf;
  CHECK_THROWS_AS(mnl_probs(degenerate, set), DegenerateDistribution);

  // a kNegInf member gets probability exactly zero
  CHECK(mnl_prob(p, ItemSet{0, 2}, 2) == 0.0);
  CHECK(mnl_prob(p, ItemSet{0, 2}, 0) == 1.0);
}

TEST_CASE("cdm matches mnl when pulls vanish") {
  std::mt19937_64 rng(7);
  MnlParams m = random_mnl(rng, 5);
  CdmParams c = encode_mnl_as_cdm(m);
  for (const auto& set : all_nonempty_subsets(5)) {
    Eigen::VectorXd pm = mnl_probs(m, set);
    Eigen::VectorXd pc = cdm_probs(c, set);
    CHECK((pm - pc).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("cdm context adjustment on the 1x3 promotion construction") {
  // One individual, C = {xstar, w, y}, base utilities (1, t, -t), pulls
  // (z, 0, 2z), t = 3, alternative set {z = 3}. With Z included the adjusted
  // utilities are (1 + 3, 3, -3 + 6) = (4, 3, 3).
  const double t = 3.0, z = 3.0;
  CdmParams p;
  p.base_utilities.resize(4);
  p.base_utilities << 1.0, t, -t, kNegInf;
  p.pulls = Eigen::MatrixXd::Zero(4, 4);
  p.pulls(3, 0) = z;
  p.pulls(3, 2) = 2.0 * z;
  p.validate();

  ItemSet set{0, 1, 2, 3};
  Eigen::VectorXd probs = cdm_probs(p, set);
  // direct softmax oracle over (4, 3, 3, -inf)
  double e4 = std::exp(4.0), e3 = std::exp(3.0);
  double denom = e4 + 2 * e3;
  CHECK(probs[0] == doctest::Approx(e4 / denom).epsilon(1e-12));
  CHECK(probs[1] == doctest::Approx(e3 / denom).epsilon(1e-12));
  CHECK(probs[2] == doctest::Approx(e3 / denom).epsilon(1e-12));
  CHECK(probs[3] == 0.0);

  CHECK(cdm_prob(p, ItemSet{0}, 0) == 1.0);
}

TEST_CASE("cdm-alt probabilities") {
  CdmAltParams p;
  p.q = Eigen::MatrixXd::Zero(3, 3);
  ItemSet set{0, 1, 2};
  Eigen::VectorXd probs = cdm_alt_probs(p, set);
  for (int i = 0; i < 3; ++i) CHECK(probs[i] == doctest::Approx(1.0 / 3).epsilon(1e-12));

  // q(w, x) = 1 for the single pair (0 -> 1): Pr(x) = e / (e + 2)
  CdmAltParams q;
  q.q = Eigen::MatrixXd::Zero(3, 3);
  q.q(0, 1) = 1.0;
  CHECK(cdm_alt_prob(q, set, 1) == doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 2.0))
                                       .epsilon(1e-12));
  CHECK(cdm_alt_prob(q, ItemSet{1}, 1) == 1.0);
}

TEST_CASE("q = p - u substitution does not reproduce the pull model") {
  // The utility-adjusted parametrization is a distinct family: substituting
  // q(z, x) = p(z, x) - u(x) changes probabilities on 3-item sets.
  std::mt19937_64 rng(11);
  CdmParams cdm = random_cdm(rng, 3);
  CdmAltParams alt;
  alt.q.resize(3, 3);
  for (int z = 0; z < 3; ++z)
    for (int x = 0; x < 3; ++x)
      alt.q(z, x) = z == x ? 0.0 : cdm.pulls(z, x) - cdm.base_utilities[x];
  ItemSet set{0, 1, 2};
  double gap = (cdm_probs(cdm, set) - cdm_alt_probs(alt, set)).cwiseAbs().maxCoeff();
  CHECK(gap > 1e-3);
}

TEST_CASE("nested logit on the mirrored-tree promotion construction") {
  GadgetSpec spec;
  spec.kind = GadgetSpec::Kind::PromoNl;
  spec.s = {2, 3};
  spec.target = 4;
  spec.epsilon = 0.5;
  GadgetInstance g = generate(spec);
  const auto& tree_a = std::get<NlTree>(g.pop.members[0]);

  // With only C = {xstar, y}: xstar is the sole present child of the nest,
  // so Pr(a <- xstar) = 2/3.
  ItemSet c{0, 1};
  CHECK(nl_prob(tree_a, c, 0) == doctest::Approx(2.0 / 3).epsilon(1e-12));

  // Adding an alternative of weight 4 under the nest:
  // Pr(a <- xstar) = (2/3) * (4.5 / 8.5).
  GadgetSpec spec4 = spec;
  spec4.s = {4, 3};
  GadgetInstance g4 = generate(spec4);
  const auto& tree4 = std::get<NlTree>(g4.pop.members[0]);
  ItemSet with_z{0, 1, 2};  // z1 carries weight 4
  CHECK(nl_prob(tree4, with_z, 0) ==
        doctest::Approx((2.0 / 3) * (4.5 / 8.5)).epsilon(1e-12));
}

TEST_CASE("flat nested logit equals mnl") {
  std::mt19937_64 rng(3);
  Universe u = make_universe(6);
  MnlParams m = random_mnl(rng, 6);
  NlTree flat = encode_mnl_as_nl(m, u);
  for (const auto& set : all_nonempty_subsets(6)) {
    Eigen::VectorXd pm = mnl_probs(m, set);
    Eigen::VectorXd pn = nl_probs(flat, set);
    CHECK((pm - pn).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("eba probabilities") {
  // identical aspect sets: uniform
  EbaParams same;
  same.aspect_names = {"a0", "a1"};
  same.aspect_utility.resize(2);
  same.aspect_utility << 1.0, 2.0;
  same.item_aspects = {{0, 1}, {0, 1}};
  same.validate();
  ItemSet set{0, 1};
  CHECK(eba_prob(same, set, 0) == 0.5);
  CHECK(eba_prob(same, set, 1) == 0.5);

  // disjoint singleton aspects with utilities {1, 3}
  EbaParams disjoint;
  disjoint.aspect_names = {"a0", "a1"};
  disjoint.aspect_utility.resize(2);
  disjoint.aspect_utility << 1.0, 3.0;
  disjoint.item_aspects = {{0}, {1}};
  disjoint.validate();
  CHECK(eba_prob(disjoint, set, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(eba_prob(disjoint, set, 1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("eba cannibalization gadget base probabilities") {
  GadgetSpec spec;
  spec.kind = GadgetSpec::Kind::PromoEba;
  spec.s = {2, 3};
  spec.target = 3;
  spec.epsilon = 0.5;
  GadgetInstance g = generate(spec);
  const double s = 5.0, t = 3.0, eps = 0.5;

  // From C alone the items have disjoint aspects, so probabilities are
  // proportional to summed aspect utilities: a sees (s, s - t/2 - eps).
  const auto& a = std::get<EbaParams>(g.pop.members[0]);
  ItemSet c{0, 1};
  Eigen::VectorXd pa = eba_probs(a, c);
  CHECK(pa[0] / pa[1] == doctest::Approx(s / (s - t / 2 - eps)).epsilon(1e-10));

  const auto& b = std::get<EbaParams>(g.pop.members[1]);
  Eigen::VectorXd pb = eba_probs(b, c);
  CHECK(pb[0] / pb[1] == doctest::Approx((s - t / 2 + eps) / s).epsilon(1e-10));
}

TEST_CASE("lemma-1 encodings agree with the source mnl") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 12; ++trial) {
    int u_size = 2 + static_cast<int>(uniform01(rng) * 7);  // 2..8
    Universe u = make_universe(u_size);
    MnlParams m = random_mnl(rng, u_size);
    CdmParams cdm = encode_mnl_as_cdm(m);
    NlTree nl = encode_mnl_as_nl(m, u);
    EbaParams eba = encode_mnl_as_eba(m, u);
    for (const auto& set : all_nonempty_subsets(u_size)) {
      Eigen::VectorXd pm = mnl_probs(m, set);
      CHECK((pm - cdm_probs(cdm, set)).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((pm - nl_probs(nl, set)).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((pm - eba_probs(eba, set)).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }

  // e.g. utilities (1, 2, 3): every family gives Pr(z | {x, z}) = e^3/(e+e^3)
  MnlParams m;
  m.utilities.resize(3);
  m.utilities << 1.0, 2.0, 3.0;
  Universe u = make_universe(3);
  ItemSet xz{0, 2};
  double expected = std::exp(3.0) / (std::exp(1.0) + std::exp(3.0));
  CHECK(mnl_prob(m, xz, 2) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(cdm_prob(encode_mnl_as_cdm(m), xz, 2) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(nl_prob(encode_mnl_as_nl(m, u), xz, 2) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(eba_prob(encode_mnl_as_eba(m, u), xz, 2) ==
        doctest::Approx(expected).epsilon(1e-12));

  MnlParams bad;
  bad.utilities.resize(2);
  bad.utilities << 0.0, kNegInf;
  CHECK_THROWS_AS(encode_mnl_as_cdm(bad), SpecError);
  CHECK_THROWS_AS(encode_mnl_as_nl(bad, make_universe(2)), SpecError);
  CHECK_THROWS_AS(encode_mnl_as_eba(bad, make_universe(2)), SpecError);
}

TEST_CASE("normalization across families and set sizes") {
  std::mt19937_64 rng(23);
  const int u_size = 6;
  std::vector<ModelParams> models;
  models.push_back(random_mnl(rng, u_size));
  models.push_back(random_cdm(rng, u_size));
  models.push_back(random_cdm_alt(rng, u_size));
  models.push_back(random_nl_tree(rng, u_size));
  models.push_back(random_eba(rng, u_size));
  for (const auto& model : models)
    for (int size = 1; size <= u_size; ++size)
      for (int rep = 0; rep < 6; ++rep) {
        ItemSet set = random_subset(rng, u_size, size);
        CHECK(std::abs(choice_probs(model, set).sum() - 1.0) <= 1e-12);
      }
}

TEST_CASE("mnl iia and shift invariance") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    MnlParams m = random_mnl(rng, 7);
    ItemSet c = random_subset(rng, 7, 4);
    ItemSet d = random_subset(rng, 7, 5);
    // pick x, y in both sets
    ItemSet common;
    std::set_intersection(c.begin(), c.end(), d.begin(), d.end(),
                          std::back_inserter(common));
    if (common.size() < 2) continue;
    int x = common[0], y = common[1];
    double rc = mnl_prob(m, c, x) / mnl_prob(m, c, y);
    double rd = mnl_prob(m, d, x) / mnl_prob(m, d, y);
    CHECK(std::abs(rc - rd) <= 1e-10 * std::max(1.0, std::abs(rc)));

    MnlParams shifted;
    shifted.utilities = m.utilities.array() + 13.25;
    for (const auto& set : {c, d})
      CHECK((mnl_probs(m, set) - mnl_probs(shifted, set)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("nl monotonicity: alternatives never raise a base probability") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    int u_size = 4 + static_cast<int>(uniform01(rng) * 4);
    NlTree tree = random_nl_tree(rng, u_size);
    ItemSet c = random_subset(rng, u_size, 2 + static_cast<int>(uniform01(rng) * 2));
    for (int z = 0; z < u_size; ++z) {
      if (set_contains(c, z)) continue;
      ItemSet extended = set_union(c, ItemSet{z});
      for (int x : c)
        CHECK(nl_prob(tree, extended, x) <= nl_prob(tree, c, x) + 1e-12);
    }
  }
}

TEST_CASE("eba uniform when aspect sets coincide") {
  EbaParams p;
  p.aspect_names = {"a0", "a1", "a2"};
  p.aspect_utility.resize(3);
  p.aspect_utility << 0.3, 1.1, 0.9;
  p.item_aspects = {{0, 2}, {0, 2}, {0, 2}, {1}};
  p.validate();
  ItemSet set{0, 1, 2};
  Eigen::VectorXd probs = eba_probs(p, set);
  for (int i = 0; i < 3; ++i) CHECK(probs[i] == 1.0 / 3);
}

TEST_CASE("sampling") {
  MnlParams p;
  p.utilities.resize(2);
  p.utilities << 0.7, 0.7;
  ModelParams model = p;
  ItemSet set{0, 1};

  std::mt19937_64 rng(5);
  int count0 = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i)
    if (sample_choice(model, set, rng) == 0) ++count0;
  CHECK(std::abs(count0 / static_cast<double>(draws) - 0.5) < 0.01);

  MnlParams point;
  point.utilities.resize(3);
  point.utilities << kNegInf, 2.0, kNegInf;
  ModelParams pm = point;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    CHECK(sample_choice(pm, ItemSet{0, 1, 2}, seed) == 1);

  // identical seeds give identical draw sequences
  std::mt19937_64 r1(99), r2(99);
  for (int i = 0; i < 200; ++i)
    CHECK(sample_choice(model, set, r1) == sample_choice(model, set, r2));

  MnlParams degenerate;
  degenerate.utilities.resize(2);
  degenerate.utilities << kNegInf, kNegInf;
  ModelParams dm = degenerate;
  std::mt19937_64 r3(1);
  CHECK_THROWS_AS(sample_choice(dm, set, r3), DegenerateDistribution);
}

TEST_CASE("model json round-trip preserves probabilities") {
  std::mt19937_64 rng(41);
  const int u_size = 5;
  Universe u = make_universe(u_size);

  std::vector<ModelParams> members;
  members.push_back(random_mnl(rng, u_size));
  members.push_back(random_cdm(rng, u_size));
  members.push_back(random_cdm_alt(rng, u_size));
  members.push_back(random_nl_tree(rng, u_size));
  members.push_back(random_eba(rng, u_size));

  for (const auto& member : members) {
    ModelFile file;
    file.universe = u;
    file.population.labels = {"seg"};
    file.population.members = {member};
    ModelFile parsed = read_model_json(write_model_json(file));
    CHECK(parsed.universe == u);
    for (const auto& set : all_nonempty_subsets(u_size)) {
      Eigen::VectorXd before = choice_probs(member, set);
      Eigen::VectorXd after = choice_probs(parsed.population.members[0], set);
      CHECK((before - after).cwiseAbs().maxCoeff() <= 1e-15);
    }
  }
}

TEST_CASE("model json handles -inf and instance splits") {
  MnlParams p;
  p.utilities.resize(3);
  p.utilities << 1.5, kNegInf, 0.0;
  ModelFile file;
  file.universe = make_universe(3);
  file.population.labels = {"a"};
  file.population.members = {p};
  file.choice_set = {0, 1};
  file.alternatives = {2};

  std::string text = write_model_json(file);
  CHECK(text.find("\"-inf\"") != std::string::npos);
  ModelFile parsed = read_model_json(text);
  CHECK(std::get<MnlParams>(parsed.population.members[0]).utilities[1] == kNegInf);
  CHECK(parsed.has_instance());
  ChoiceInstance inst = parsed.instance();
  CHECK(inst.k() == 2);
  CHECK(inst.m() == 1);

  // low-rank CDM round-trips through the rank/target/context block
  CdmLowRank lr;
  lr.rank = 2;
  lr.target.resize(3, 2);
  lr.target << 0.1, -0.2, 0.3, 0.4, -0.5, 0.6;
  lr.context.resize(3, 2);
  lr.context << 1.0, 0.0, -1.0, 0.5, 0.25, 0.75;
  Eigen::VectorXd base(3);
  base << 0.2, -0.1, 0.05;
  CdmParams cdm = CdmParams::from_low_rank(base, lr);
  ModelFile cf;
  cf.universe = make_universe(3);
  cf.population.labels = {"a"};
  cf.population.members = {cdm};
  ModelFile cparsed = read_model_json(write_model_json(cf));
  const auto& back = std::get<CdmParams>(cparsed.population.members[0]);
  REQUIRE(back.low_rank.has_value());
  CHECK(back.low_rank->rank == 2);
  CHECK((back.pulls - cdm.pulls).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("population invariants") {
  Population pop;
  pop.labels = {"a", "b"};
  MnlParams m;
  m.utilities = Eigen::VectorXd::Zero(3);
  pop.members = {m, m};
  CHECK(pop.family() == Family::Mnl);
  pop.validate(3);
  CHECK_THROWS_AS(pop.validate(4), SpecError);

  CdmAltParams alt;
  alt.q = Eigen::MatrixXd::Zero(3, 3);
  pop.members[1] = alt;
  CHECK_THROWS_AS(pop.family(), SpecError);
}

TEST_CASE("standard form recentring") {
  std::mt19937_64 rng(43);
  MnlParams m = random_mnl(rng, 5);
  MnlParams centered = recenter_to_standard_form(m);
  CHECK(std::abs(centered.utilities.sum()) <= 1e-9);
  for (const auto& set : all_nonempty_subsets(5))
    CHECK((mnl_probs(m, set) - mnl_probs(centered, set)).cwiseAbs().maxCoeff() <= 1e-12);
}
