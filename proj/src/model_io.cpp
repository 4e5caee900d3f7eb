#include "choiceopt/model_io.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace choiceopt {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json encode_value(double v) {
  if (v == kNegInf) return "-inf";
  return v;
}

double decode_value(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "-inf") return kNegInf;
    throw SpecError("unexpected string value in model file: " + j.get<std::string>());
  }
  return j.get<double>();
}

ordered_json encode_utility_map(const Eigen::VectorXd& u, const Universe& universe) {
  ordered_json out = ordered_json::object();
  for (int i = 0; i < universe.size(); ++i) out[universe.id(i)] = encode_value(u[i]);
  return out;
}

Eigen::VectorXd decode_utility_map(const json& j, const Universe& universe) {
  Eigen::VectorXd u(universe.size());
  for (int i = 0; i < universe.size(); ++i) {
    const auto& id = universe.id(i);
    if (!j.contains(id)) throw SpecError("missing utility for item " + id);
    u[i] = decode_value(j.at(id));
  }
  return u;
}

// Sparse map-of-maps for pairwise parameters; zeros are omitted.
ordered_json encode_pair_matrix(const Eigen::MatrixXd& m, const Universe& universe) {
  ordered_json out = ordered_json::object();
  for (int z = 0; z < universe.size(); ++z) {
    ordered_json row = ordered_json::object();
    for (int x = 0; x < universe.size(); ++x)
      if (m(z, x) != 0.0) row[universe.id(x)] = encode_value(m(z, x));
    if (!row.empty()) out[universe.id(z)] = std::move(row);
  }
  return out;
}

Eigen::MatrixXd decode_pair_matrix(const json& j, const Universe& universe) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(universe.size(), universe.size());
  for (auto it = j.begin(); it != j.end(); ++it) {
    int z = universe.index_of(it.key());
    for (auto jt = it.value().begin(); jt != it.value().end(); ++jt)
      m(z, universe.index_of(jt.key())) = decode_value(jt.value());
  }
  return m;
}

ordered_json encode_nl_node(const NlTree& t, int v, const Universe& universe) {
  ordered_json out = ordered_json::object();
  if (t.is_leaf(v)) {
    out["item"] = universe.id(t.nodes[v].item);
  } else {
    if (!t.nodes[v].name.empty()) out["name"] = t.nodes[v].name;
    ordered_json children = ordered_json::array();
    for (int c : t.nodes[v].children) children.push_back(encode_nl_node(t, c, universe));
    out["children"] = std::move(children);
  }
  if (v != t.root()) out["utility"] = encode_value(t.nodes[v].utility);
  return out;
}

int decode_nl_node(const json& j, NlTree& t, int parent, const Universe& universe) {
  int v = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  t.nodes[v].parent = parent;
  if (parent != -1) {
    if (!j.contains("utility"))
      throw SpecError("non-root NL node is missing its utility");
    t.nodes[v].utility = decode_value(j.at("utility"));
  }
  if (j.contains("item")) {
    int item = universe.index_of(j.at("item").get<std::string>());
    t.nodes[v].item = item;
    if (t.leaf_of_item[item] != -1)
      throw SpecError("item appears as more than one NL leaf");
    t.leaf_of_item[item] = v;
  } else {
    if (j.contains("name")) t.nodes[v].name = j.at("name").get<std::string>();
    if (!j.contains("children")) throw SpecError("internal NL node needs children");
    for (const auto& child : j.at("children")) {
      int c = decode_nl_node(child, t, v, universe);
      t.nodes[v].children.push_back(c);
    }
  }
  return v;
}

ordered_json encode_member(const ModelParams& m, const Universe& universe) {
  ordered_json out = ordered_json::object();
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MnlParams>) {
          out["utilities"] = encode_utility_map(p.utilities, universe);
        } else if constexpr (std::is_same_v<T, CdmParams>) {
          out["utilities"] = encode_utility_map(p.base_utilities, universe);
          if (p.low_rank) {
            out["rank"] = p.low_rank->rank;
            ordered_json target = ordered_json::object(), context = ordered_json::object();
            for (int i = 0; i < universe.size(); ++i) {
              ordered_json trow = ordered_json::array(), crow = ordered_json::array();
              for (int r = 0; r < p.low_rank->rank; ++r) {
                trow.push_back(p.low_rank->target(i, r));
                crow.push_back(p.low_rank->context(i, r));
              }
              target[universe.id(i)] = std::move(trow);
              context[universe.id(i)] = std::move(crow);
            }
            out["target"] = std::move(target);
            out["context"] = std::move(context);
          } else {
            out["pulls"] = encode_pair_matrix(p.pulls, universe);
          }
        } else if constexpr (std::is_same_v<T, CdmAltParams>) {
          out["q"] = encode_pair_matrix(p.q, universe);
        } else if constexpr (std::is_same_v<T, NlTree>) {
          out["tree"] = encode_nl_node(p, p.root(), universe);
        } else {
          ordered_json aspects = ordered_json::object();
          for (int i = 0; i < universe.size(); ++i) {
            ordered_json names = ordered_json::array();
            for (int a : p.item_aspects[i]) names.push_back(p.aspect_names[a]);
            aspects[universe.id(i)] = std::move(names);
          }
          ordered_json utilities = ordered_json::object();
          for (size_t a = 0; a < p.aspect_names.size(); ++a)
            utilities[p.aspect_names[a]] = p.aspect_utility[static_cast<int>(a)];
          out["aspects"] = std::move(aspects);
          out["aspect_utility"] = std::move(utilities);
        }
      },
      m);
  return out;
}

ModelParams decode_member(const json& j, Family family, const Universe& universe) {
  switch (family) {
    case Family::Mnl: {
      MnlParams p;
      p.utilities = decode_utility_map(j.at("utilities"), universe);
      return p;
    }
    case Family::Cdm: {
      Eigen::VectorXd base = decode_utility_map(j.at("utilities"), universe);
      if (j.contains("rank")) {
        CdmLowRank lr;
        lr.rank = j.at("rank").get<int>();
        lr.target.resize(universe.size(), lr.rank);
        lr.context.resize(universe.size(), lr.rank);
        for (int i = 0; i < universe.size(); ++i) {
          const auto& trow = j.at("target").at(universe.id(i));
          const auto& crow = j.at("context").at(universe.id(i));
          for (int r = 0; r < lr.rank; ++r) {
            lr.target(i, r) = trow.at(r).get<double>();
            lr.context(i, r) = crow.at(r).get<double>();
          }
        }
        return CdmParams::from_low_rank(std::move(base), std::move(lr));
      }
      CdmParams p;
      p.base_utilities = std::move(base);
      p.pulls = decode_pair_matrix(j.at("pulls"), universe);
      p.validate();
      return p;
    }
    case Family::CdmAlt: {
      CdmAltParams p;
      p.q = decode_pair_matrix(j.at("q"), universe);
      p.validate();
      return p;
    }
    case Family::Nl: {
      NlTree t;
      t.leaf_of_item.assign(universe.size(), -1);
      decode_nl_node(j.at("tree"), t, -1, universe);
      t.validate(universe.size());
      return t;
    }
    case Family::Eba: {
      EbaParams p;
      std::unordered_map<std::string, int> aspect_index;
      const auto& utilities = j.at("aspect_utility");
      for (auto it = utilities.begin(); it != utilities.end(); ++it) {
        aspect_index.emplace(it.key(), static_cast<int>(p.aspect_names.size()));
        p.aspect_names.push_back(it.key());
      }
      p.aspect_utility.resize(static_cast<int>(p.aspect_names.size()));
      for (size_t a = 0; a < p.aspect_names.size(); ++a)
        p.aspect_utility[static_cast<int>(a)] =
            utilities.at(p.aspect_names[a]).get<double>();
      p.item_aspects.resize(universe.size());
      const auto& aspects = j.at("aspects");
      for (int i = 0; i < universe.size(); ++i) {
        for (const auto& name : aspects.at(universe.id(i))) {
          auto it = aspect_index.find(name.get<std::string>());
          if (it == aspect_index.end())
            throw SpecError("aspect has no utility: " + name.get<std::string>());
          p.item_aspects[i].push_back(it->second);
        }
        std::sort(p.item_aspects[i].begin(), p.item_aspects[i].end());
      }
      p.validate();
      return p;
    }
  }
  throw SpecError("unknown family");
}

}  // namespace

std::string write_model_json(const ModelFile& file) {
  ordered_json out;
  out["family"] = family_name(file.population.family());
  ordered_json universe = ordered_json::array();
  for (const auto& id : file.universe.items()) universe.push_back(id);
  out["universe"] = std::move(universe);
  if (!file.choice_set.empty()) {
    ordered_json c = ordered_json::array();
    for (int i : file.choice_set) c.push_back(file.universe.id(i));
    out["choice_set"] = std::move(c);
    ordered_json alts = ordered_json::array();
    for (int i : file.alternatives) alts.push_back(file.universe.id(i));
    out["alternatives"] = std::move(alts);
  }
  ordered_json individuals = ordered_json::array();
  for (int a = 0; a < file.population.n(); ++a) {
    ordered_json member = encode_member(file.population.members[a], file.universe);
    ordered_json with_label = ordered_json::object();
    with_label["label"] = file.population.labels[a];
    for (auto it = member.begin(); it != member.end(); ++it)
      with_label[it.key()] = std::move(it.value());
    individuals.push_back(std::move(with_label));
  }
  out["individuals"] = std::move(individuals);
  return out.dump(2) + "\n";
}

ModelFile read_model_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SpecError(std::string("model file is not valid JSON: ") + e.what());
  }
  ModelFile file;
  Family family = family_from_name(j.at("family").get<std::string>());
  std::vector<ItemId> items;
  for (const auto& id : j.at("universe")) items.push_back(id.get<std::string>());
  file.universe = Universe(std::move(items));

  for (const auto& member : j.at("individuals")) {
    file.population.labels.push_back(member.at("label").get<std::string>());
    file.population.members.push_back(decode_member(member, family, file.universe));
  }
  file.population.validate(file.universe.size());

  if (j.contains("choice_set")) {
    for (const auto& id : j.at("choice_set"))
      file.choice_set.push_back(file.universe.index_of(id.get<std::string>()));
    std::sort(file.choice_set.begin(), file.choice_set.end());
    if (j.contains("alternatives")) {
      for (const auto& id : j.at("alternatives"))
        file.alternatives.push_back(file.universe.index_of(id.get<std::string>()));
    } else {
      for (int i = 0; i < file.universe.size(); ++i)
        if (!set_contains(file.choice_set, i)) file.alternatives.push_back(i);
    }
    file.instance();  // validates the split
  }
  return file;
}

void save_model_file(const ModelFile& file, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << write_model_json(file);
}

ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return read_model_json(text);
}

}  // namespace choiceopt
