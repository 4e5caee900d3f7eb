#include "choiceopt/gadgets.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "choiceopt/model_io.hpp"

namespace choiceopt {

namespace {

bool uses_epsilon(GadgetSpec::Kind k) {
  return k == GadgetSpec::Kind::PromoCdm2x2 || k == GadgetSpec::Kind::PromoNl ||
         k == GadgetSpec::Kind::PromoEba;
}

std::vector<ItemId> alternative_names(size_t count) {
  std::vector<ItemId> names;
  for (size_t i = 1; i <= count; ++i) names.push_back("z" + std::to_string(i));
  return names;
}

Universe make_universe(std::vector<ItemId> base, size_t alt_count) {
  for (auto& z : alternative_names(alt_count)) base.push_back(std::move(z));
  return Universe(std::move(base));
}

ChoiceInstance make_instance(const Universe& u, int k) {
  ItemSet c;
  std::vector<int> alts;
  for (int i = 0; i < k; ++i) c.push_back(i);
  for (int i = k; i < u.size(); ++i) alts.push_back(i);
  return ChoiceInstance(u, std::move(c), std::move(alts));
}

}  // namespace

void GadgetSpec::validate() const {
  if (s.empty()) throw SpecError("gadget requires a non-empty integer set S");
  for (auto v : s)
    if (v < 1) throw SpecError("gadget integers must be >= 1");
  if (kind == Kind::AgreementPartition) {
    std::int64_t sum = std::accumulate(s.begin(), s.end(), std::int64_t{0});
    if (sum % 2 != 0) throw SpecError("partition gadget requires an even total sum");
  } else if (target < 1) {
    throw SpecError("subset-sum gadget requires a target >= 1");
  }
  if (uses_epsilon(kind) && !(epsilon > 0.0 && epsilon < 1.0))
    throw SpecError("gadget epsilon must lie in (0, 1)");
}

const char* gadget_kind_name(GadgetSpec::Kind k) {
  switch (k) {
    case GadgetSpec::Kind::AgreementPartition: return "agreement-partition";
    case GadgetSpec::Kind::DisagreementSubsetSum: return "disagreement-subsetsum";
    case GadgetSpec::Kind::PromoCdm1x3: return "promo-cdm-1x3";
    case GadgetSpec::Kind::PromoCdm2x2: return "promo-cdm-2x2";
    case GadgetSpec::Kind::PromoNl: return "promo-nl";
    case GadgetSpec::Kind::PromoEba: return "promo-eba";
  }
  return "?";
}

GadgetSpec::Kind gadget_kind_from_name(const std::string& name) {
  for (auto k : {GadgetSpec::Kind::AgreementPartition, GadgetSpec::Kind::DisagreementSubsetSum,
                 GadgetSpec::Kind::PromoCdm1x3, GadgetSpec::Kind::PromoCdm2x2,
                 GadgetSpec::Kind::PromoNl, GadgetSpec::Kind::PromoEba})
    if (name == gadget_kind_name(k)) return k;
  throw SpecError("unknown gadget kind: " + name);
}

namespace {

GadgetInstance agreement_partition(const GadgetSpec& spec) {
  const auto n_alt = spec.s.size();
  const double sum = static_cast<double>(
      std::accumulate(spec.s.begin(), spec.s.end(), std::int64_t{0}));
  const double t = sum / 2.0;

  GadgetInstance g;
  g.spec = spec;
  g.target = static_cast<std::int64_t>(t);
  Universe u = make_universe({"x", "y"}, n_alt);
  g.inst = make_instance(u, 2);

  MnlParams a, b;
  a.utilities.resize(u.size());
  b.utilities.resize(u.size());
  a.utilities[0] = std::log(t);        // u_a(x) = log t
  a.utilities[1] = std::log(t);        // u_a(y) = log t
  b.utilities[0] = std::log(3.0 * t);  // u_b(x) = log 3t
  b.utilities[1] = std::log(2.0 * t);  // u_b(y) = log 2t
  for (size_t i = 0; i < n_alt; ++i) {
    double z = static_cast<double>(spec.s[i]);
    a.utilities[2 + i] = std::log(z);
    b.utilities[2 + i] = std::log(z);
    g.certificate[2 + static_cast<int>(i)] = spec.s[i];
  }
  g.pop.labels = {"a", "b"};
  g.pop.members = {std::move(a), std::move(b)};
  return g;
}

GadgetInstance disagreement_subsetsum(const GadgetSpec& spec) {
  const auto n_alt = spec.s.size();
  const double t = static_cast<double>(spec.target);

  GadgetInstance g;
  g.spec = spec;
  g.target = spec.target;
  Universe u = make_universe({"x"}, n_alt);
  g.inst = make_instance(u, 1);

  MnlParams a, b;
  a.utilities.resize(u.size());
  b.utilities.resize(u.size());
  a.utilities[0] = std::log(2.0 * t);  // u_a(x) = log 2t
  b.utilities[0] = std::log(t / 2.0);  // u_b(x) = log t/2
  for (size_t i = 0; i < n_alt; ++i) {
    double z = static_cast<double>(spec.s[i]);
    a.utilities[1 + i] = std::log(z);
    b.utilities[1 + i] = std::log(z);
    g.certificate[1 + static_cast<int>(i)] = spec.s[i];
  }
  g.pop.labels = {"a", "b"};
  g.pop.members = {std::move(a), std::move(b)};
  return g;
}

// One individual, C = {xstar, w, y}: context utilities over C u Z come out as
// (1 + s_Z, t, -t + 2 s_Z) and alternatives are never chosen themselves.
GadgetInstance promo_cdm_1x3(const GadgetSpec& spec) {
  const auto n_alt = spec.s.size();
  const double t = static_cast<double>(spec.target);

  GadgetInstance g;
  g.spec = spec;
  g.target = spec.target;
  Universe u = make_universe({"xstar", "w", "y"}, n_alt);
  g.inst = make_instance(u, 3);
  g.x_star = 0;

  CdmAltParams p;
  p.q = Eigen::MatrixXd::Zero(u.size(), u.size());
  p.q(1, 0) = 1.0;  // q(w, xstar)
  p.q(0, 1) = t;    // q(xstar, w)
  p.q(0, 2) = -t;   // q(xstar, y)
  for (size_t i = 0; i < n_alt; ++i) {
    int z = 3 + static_cast<int>(i);
    double v = static_cast<double>(spec.s[i]);
    p.q(z, 0) = v;        // pull on xstar
    p.q(z, 2) = 2.0 * v;  // pull on y
    p.q(0, z) = kNegInf;  // alternatives have exp-utility zero in any set with xstar
    g.certificate[z] = spec.s[i];
  }
  p.validate();
  g.pop.labels = {"a"};
  g.pop.members = {std::move(p)};
  return g;
}

GadgetInstance promo_cdm_2x2(const GadgetSpec& spec) {
  const auto n_alt = spec.s.size();
  const double t = static_cast<double>(spec.target);
  const double eps = spec.epsilon;

  GadgetInstance g;
  g.spec = spec;
  g.target = spec.target;
  Universe u = make_universe({"xstar", "y"}, n_alt);
  g.inst = make_instance(u, 2);
  g.x_star = 0;

  CdmAltParams a, b;
  a.q = Eigen::MatrixXd::Zero(u.size(), u.size());
  b.q = Eigen::MatrixXd::Zero(u.size(), u.size());
  a.q(1, 0) = t + eps;  // E_a(xstar) = t + eps
  b.q(1, 0) = eps;      // E_b(xstar) = eps + s_Z
  b.q(0, 1) = t;        // E_b(y) = t
  for (size_t i = 0; i < n_alt; ++i) {
    int z = 2 + static_cast<int>(i);
    double v = static_cast<double>(spec.s[i]);
    a.q(z, 1) = v;  // pulls y up for a
    b.q(z, 0) = v;  // pulls xstar up for b
    a.q(0, z) = kNegInf;
    b.q(0, z) = kNegInf;
    g.certificate[z] = spec.s[i];
  }
  a.validate();
  b.validate();
  g.pop.labels = {"a", "b"};
  g.pop.members = {std::move(a), std::move(b)};
  return g;
}

// Mirrored two-level trees: each individual's favorite sits directly under the
// root while the contested item shares a nest with the alternatives.
GadgetInstance promo_nl(const GadgetSpec& spec) {
  const auto n_alt = spec.s.size();
  const double t = static_cast<double>(spec.target);
  const double eps = spec.epsilon;

  GadgetInstance g;
  g.spec = spec;
  g.target = spec.target;
  Universe u = make_universe({"xstar", "y"}, n_alt);
  g.inst = make_instance(u, 2);
  g.x_star = 0;

  // top_item: the leaf hanging off the root; nested_item joins the z's.
  auto build = [&](int top_item, int nested_item, double nested_utility) {
    NlTree tree;
    tree.leaf_of_item.assign(u.size(), -1);
    tree.nodes.resize(4 + n_alt);
    tree.nodes[0].parent = -1;
    tree.nodes[0].children = {1, 2};
    tree.nodes[1].parent = 0;
    tree.nodes[1].item = top_item;
    tree.nodes[1].utility = 0.0;
    tree.leaf_of_item[top_item] = 1;
    tree.nodes[2].parent = 0;
    tree.nodes[2].name = "r";
    tree.nodes[2].utility = std::log(2.0);
    int leaf = 3;
    tree.nodes[2].children.push_back(leaf);
    tree.nodes[leaf].parent = 2;
    tree.nodes[leaf].item = nested_item;
    tree.nodes[leaf].utility = nested_utility;
    tree.leaf_of_item[nested_item] = leaf;
    ++leaf;
    for (size_t i = 0; i < n_alt; ++i, ++leaf) {
      tree.nodes[2].children.push_back(leaf);
      tree.nodes[leaf].parent = 2;
      tree.nodes[leaf].item = 2 + static_cast<int>(i);
      tree.nodes[leaf].utility = std::log(static_cast<double>(spec.s[i]));
      tree.leaf_of_item[2 + static_cast<int>(i)] = leaf;
    }
    tree.validate(u.size());
    return tree;
  };

  for (size_t i = 0; i < n_alt; ++i) g.certificate[2 + static_cast<int>(i)] = spec.s[i];
  g.pop.labels = {"a", "b"};
  g.pop.members = {build(1, 0, std::log(t + eps)), build(0, 1, std::log(t - eps))};
  return g;
}

// Aspect system in which each alternative z cannibalizes both x_star (via
// chi_z) and y (via psi_z) at half weight. Aspects whose utility works out to
// zero for an individual are omitted from that individual's map; they are
// inert either way.
GadgetInstance promo_eba(const GadgetSpec& spec) {
  const auto n_alt = spec.s.size();
  const double t = static_cast<double>(spec.target);
  const double eps = spec.epsilon;
  const double sum = static_cast<double>(
      std::accumulate(spec.s.begin(), spec.s.end(), std::int64_t{0}));
  if (!(sum - t / 2.0 - eps > 0.0))
    throw SpecError("promo-eba gadget requires sum(S) > t/2 + eps");

  GadgetInstance g;
  g.spec = spec;
  g.target = spec.target;
  Universe u = make_universe({"xstar", "y"}, n_alt);
  g.inst = make_instance(u, 2);
  g.x_star = 0;

  // Per-individual aspect systems with the zero-utility rows removed.
  auto build = [&](bool is_a) {
    EbaParams p;
    p.item_aspects.resize(u.size());
    std::vector<double> utilities;
    auto add_aspect = [&](const std::string& name, double utility,
                          std::initializer_list<int> items) {
      if (utility == 0.0) return;
      if (utility < 0.0)
        throw SpecError("promo-eba gadget produced a negative aspect utility");
      int id = static_cast<int>(p.aspect_names.size());
      p.aspect_names.push_back(name);
      utilities.push_back(utility);
      for (int item : items) p.item_aspects[item].push_back(id);
    };

    add_aspect("chi", is_a ? 0.0 : sum - t / 2.0 + eps, {0});
    add_aspect("psi", is_a ? sum - t / 2.0 - eps : 0.0, {1});
    for (size_t i = 0; i < n_alt; ++i) {
      int z = 2 + static_cast<int>(i);
      double v = static_cast<double>(spec.s[i]);
      add_aspect("chi_z" + std::to_string(i + 1), is_a ? v : 0.0, {0, z});
      add_aspect("psi_z" + std::to_string(i + 1), is_a ? 0.0 : v, {1, z});
      add_aspect("gamma_z" + std::to_string(i + 1), sum - v, {z});
    }
    p.aspect_utility = Eigen::Map<Eigen::VectorXd>(utilities.data(),
                                                   static_cast<int>(utilities.size()));
    for (auto& aspects : p.item_aspects) std::sort(aspects.begin(), aspects.end());
    p.validate();
    return p;
  };

  for (size_t i = 0; i < n_alt; ++i) g.certificate[2 + static_cast<int>(i)] = spec.s[i];
  g.pop.labels = {"a", "b"};
  g.pop.members = {build(true), build(false)};
  return g;
}

}  // namespace

GadgetInstance generate(const GadgetSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case GadgetSpec::Kind::AgreementPartition: return agreement_partition(spec);
    case GadgetSpec::Kind::DisagreementSubsetSum: return disagreement_subsetsum(spec);
    case GadgetSpec::Kind::PromoCdm1x3: return promo_cdm_1x3(spec);
    case GadgetSpec::Kind::PromoCdm2x2: return promo_cdm_2x2(spec);
    case GadgetSpec::Kind::PromoNl: return promo_nl(spec);
    case GadgetSpec::Kind::PromoEba: return promo_eba(spec);
  }
  throw SpecError("unknown gadget kind");
}

bool verify_certificate(const GadgetInstance& g, const AlternativeSet& z) {
  require_subset_of_alternatives(z, g.inst);
  std::int64_t sum = 0;
  for (int i : z.members) sum += g.certificate.at(i);
  return sum == g.target;
}

void save_gadget(const GadgetInstance& g, const std::string& path) {
  ModelFile file;
  file.universe = g.inst.universe;
  file.population = g.pop;
  file.choice_set = g.inst.choice_set;
  file.alternatives = g.inst.alternatives;
  save_model_file(file, path);

  nlohmann::ordered_json side;
  side["kind"] = gadget_kind_name(g.spec.kind);
  side["target"] = g.target;
  if (uses_epsilon(g.spec.kind)) side["epsilon"] = g.spec.epsilon;
  if (g.x_star >= 0) side["x_star"] = g.inst.universe.id(g.x_star);
  nlohmann::ordered_json cert = nlohmann::ordered_json::object();
  for (int i : g.inst.alternatives) cert[g.inst.universe.id(i)] = g.certificate.at(i);
  side["certificate"] = std::move(cert);
  std::ofstream out(path + ".cert.json");
  if (!out) throw std::runtime_error("cannot write certificate file for " + path);
  out << side.dump(2) << "\n";
}

GadgetInstance load_gadget(const std::string& path) {
  ModelFile file = load_model_file(path);
  if (!file.has_instance()) throw SpecError("gadget file lacks a choice-set split");

  std::ifstream in(path + ".cert.json");
  if (!in) throw std::runtime_error("cannot open certificate file for " + path);
  nlohmann::json side = nlohmann::json::parse(in);

  GadgetInstance g;
  g.pop = std::move(file.population);
  g.inst = file.instance();
  g.spec.kind = gadget_kind_from_name(side.at("kind").get<std::string>());
  g.target = side.at("target").get<std::int64_t>();
  if (side.contains("epsilon")) g.spec.epsilon = side.at("epsilon").get<double>();
  if (side.contains("x_star"))
    g.x_star = g.inst.universe.index_of(side.at("x_star").get<std::string>());
  for (auto it = side.at("certificate").begin(); it != side.at("certificate").end(); ++it) {
    int idx = g.inst.universe.index_of(it.key());
    g.certificate[idx] = it.value().get<std::int64_t>();
    g.spec.s.push_back(it.value().get<std::int64_t>());
  }
  g.spec.target = g.target;
  return g;
}

}  // namespace choiceopt
