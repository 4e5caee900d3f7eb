#include "choiceopt/miblp.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace choiceopt {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

MiblpModel export_miblp(const Population& pop, const ChoiceInstance& inst,
                        const Objective& objective) {
  pop.validate(inst.universe.size());
  if (pop.family() != Family::Mnl)
    throw SpecError("MIBLP export requires an MNL population");
  if (objective.kind == Objective::Kind::Promote)
    throw SpecError("no MIBLP formulation exists for Promotion");
  const bool disagreement = objective.kind == Objective::Kind::MaximizeD;

  const int n = pop.n();
  MiblpModel m;
  m.maximize = disagreement;
  m.exp_utilities = Eigen::MatrixXd::Zero(inst.universe.size(), n);
  m.exp_c_totals = Eigen::VectorXd::Zero(n);
  for (int a = 0; a < n; ++a) {
    const auto& u = std::get<MnlParams>(pop.members[a]).utilities;
    for (int y = 0; y < inst.universe.size(); ++y)
      m.exp_utilities(y, a) = u[y] == kNegInf ? 0.0 : std::exp(u[y]);
    for (int y : inst.choice_set) m.exp_c_totals[a] += m.exp_utilities(y, a);
  }

  auto xvar = [&](int i) { return "x_" + inst.universe.id(i); };
  auto zvar = [&](int a) { return "z_" + pop.labels[a]; };
  auto dvar = [&](int y, int a, int b) {
    return "d_" + inst.universe.id(y) + "_" + pop.labels[a] + "_" + pop.labels[b];
  };
  auto gvar = [&](int y, int a, int b) {
    return "g_" + inst.universe.id(y) + "_" + pop.labels[a] + "_" + pop.labels[b];
  };

  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int y : inst.choice_set) m.objective.push_back({1.0, dvar(y, a, b)});

  // |z_a e_ya - z_b e_yb| <= d, and for the maximization the two sign rows
  // that force d up to the realized difference.
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      for (int y : inst.choice_set) {
        const double eya = m.exp_utilities(y, a);
        const double eyb = m.exp_utilities(y, b);
        m.constraints.push_back({"abs_pos_" + dvar(y, a, b),
                                 {{eya, zvar(a)}, {-eyb, zvar(b)}, {-1.0, dvar(y, a, b)}},
                                 {},
                                 '<',
                                 0.0});
        m.constraints.push_back({"abs_neg_" + dvar(y, a, b),
                                 {{eyb, zvar(b)}, {-eya, zvar(a)}, {-1.0, dvar(y, a, b)}},
                                 {},
                                 '<',
                                 0.0});
        if (disagreement) {
          m.constraints.push_back(
              {"sign_pos_" + dvar(y, a, b),
               {{2.0, gvar(y, a, b)}, {eya, zvar(a)}, {-eyb, zvar(b)}, {-1.0, dvar(y, a, b)}},
               {},
               '>',
               0.0});
          // 2(1 - g) + z_b e_yb - z_a e_ya >= d, constant moved to the rhs.
          m.constraints.push_back(
              {"sign_neg_" + dvar(y, a, b),
               {{-2.0, gvar(y, a, b)}, {eyb, zvar(b)}, {-eya, zvar(a)}, {-1.0, dvar(y, a, b)}},
               {},
               '>',
               -2.0});
        }
      }
    }
  }

  // z_a e_Ca + z_a sum_i x_i e_ia = 1.
  for (int a = 0; a < n; ++a) {
    MiblpConstraint c;
    c.name = "norm_" + pop.labels[a];
    c.linear.push_back({m.exp_c_totals[a], zvar(a)});
    for (int i : inst.alternatives)
      c.bilinear.push_back({m.exp_utilities(i, a), zvar(a), xvar(i)});
    c.relation = '=';
    c.rhs = 1.0;
    m.constraints.push_back(std::move(c));
  }

  for (int i : inst.alternatives) m.binaries.push_back(xvar(i));
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int y : inst.choice_set)
        if (disagreement) m.binaries.push_back(gvar(y, a, b));
  for (int a = 0; a < n; ++a) m.frees.push_back(zvar(a));
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int y : inst.choice_set) m.frees.push_back(dvar(y, a, b));
  return m;
}

std::string render_miblp(const MiblpModel& model) {
  std::ostringstream out;
  out << (model.maximize ? "Maximize\n" : "Minimize\n");
  out << " obj:";
  if (model.objective.empty()) out << " 0";
  for (size_t i = 0; i < model.objective.size(); ++i) {
    const auto& t = model.objective[i];
    out << (i == 0 ? " " : " + ") << fmt(t.coef) << " " << t.var;
  }
  out << "\nSubject To\n";
  for (const auto& c : model.constraints) {
    out << " " << c.name << ":";
    bool first = true;
    for (const auto& t : c.linear) {
      double v = t.coef;
      if (first) {
        out << " " << fmt(v) << " " << t.var;
      } else if (v < 0) {
        out << " - " << fmt(-v) << " " << t.var;
      } else {
        out << " + " << fmt(v) << " " << t.var;
      }
      first = false;
    }
    if (!c.bilinear.empty()) {
      out << (first ? " [" : " + [");
      for (size_t i = 0; i < c.bilinear.size(); ++i) {
        const auto& t = c.bilinear[i];
        out << (i == 0 ? " " : " + ") << fmt(t.coef) << " " << t.var1 << " * " << t.var2;
      }
      out << " ]";
      first = false;
    }
    if (first) out << " 0";
    out << (c.relation == '<' ? " <= " : c.relation == '>' ? " >= " : " = ");
    out << fmt(c.rhs) << "\n";
  }
  out << "Bounds\n";
  for (const auto& v : model.frees) out << " " << v << " free\n";
  out << "Binary\n";
  for (const auto& v : model.binaries) out << " " << v << "\n";
  out << "End\n";
  return out.str();
}

namespace {

struct Tokenizer {
  std::vector<std::string> tokens;
  size_t pos = 0;

  explicit Tokenizer(const std::string& text) {
    std::string cur;
    for (char ch : text) {
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!cur.empty()) tokens.push_back(std::move(cur)), cur.clear();
      } else if (ch == '[' || ch == ']' || ch == '*' || ch == '+') {
        if (!cur.empty()) tokens.push_back(std::move(cur)), cur.clear();
        tokens.push_back(std::string(1, ch));
      } else {
        cur.push_back(ch);
      }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
  }

  bool done() const { return pos >= tokens.size(); }
  const std::string& peek() const { return tokens.at(pos); }
  std::string next() { return tokens.at(pos++); }
  bool accept(const std::string& t) {
    if (!done() && peek() == t) return ++pos, true;
    return false;
  }
  void expect(const std::string& t) {
    if (!accept(t)) throw SpecError("LP parse error: expected '" + t + "'");
  }
};

bool is_number(const std::string& s) {
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end && *end == '\0' && end != s.c_str();
}

bool is_relation(const std::string& s) { return s == "<=" || s == ">=" || s == "="; }

}  // namespace

MiblpModel parse_miblp(const std::string& text) {
  Tokenizer tk(text);
  MiblpModel m;
  std::string sense = tk.next();
  if (sense == "Maximize") m.maximize = true;
  else if (sense == "Minimize") m.maximize = false;
  else throw SpecError("LP parse error: missing objective sense");

  std::string obj_label = tk.next();
  if (obj_label != "obj:") throw SpecError("LP parse error: expected obj:");
  while (!tk.done() && tk.peek() != "Subject") {
    tk.accept("+");
    std::string coef = tk.next();
    if (coef == "0" && (tk.peek() == "Subject")) break;
    m.objective.push_back({std::strtod(coef.c_str(), nullptr), tk.next()});
  }
  tk.expect("Subject");
  tk.expect("To");

  while (!tk.done() && tk.peek() != "Bounds") {
    MiblpConstraint c;
    std::string name = tk.next();
    if (name.empty() || name.back() != ':')
      throw SpecError("LP parse error: expected constraint name, got " + name);
    c.name = name.substr(0, name.size() - 1);
    double sign = 1.0;
    while (!tk.done() && !is_relation(tk.peek())) {
      if (tk.accept("+")) { sign = 1.0; continue; }
      if (tk.accept("-")) { sign = -1.0; continue; }
      if (tk.accept("[")) {
        while (!tk.accept("]")) {
          tk.accept("+");
          double coef = std::strtod(tk.next().c_str(), nullptr);
          std::string v1 = tk.next();
          tk.expect("*");
          std::string v2 = tk.next();
          c.bilinear.push_back({coef, v1, v2});
        }
        continue;
      }
      std::string num = tk.next();
      if (!is_number(num)) throw SpecError("LP parse error: expected coefficient, got " + num);
      double coef = sign * std::strtod(num.c_str(), nullptr);
      sign = 1.0;
      if (!tk.done() && !is_relation(tk.peek()) && tk.peek() != "[" && tk.peek() != "+" &&
          tk.peek() != "-" && !is_number(tk.peek())) {
        c.linear.push_back({coef, tk.next()});
      }
      // a bare `0` stands for an empty side and adds no term
    }
    std::string rel = tk.next();
    c.relation = rel == "<=" ? '<' : rel == ">=" ? '>' : '=';
    c.rhs = std::strtod(tk.next().c_str(), nullptr);
    m.constraints.push_back(std::move(c));
  }
  tk.expect("Bounds");
  while (!tk.done() && tk.peek() != "Binary") {
    std::string v = tk.next();
    tk.expect("free");
    m.frees.push_back(v);
  }
  tk.expect("Binary");
  while (!tk.done() && tk.peek() != "End") m.binaries.push_back(tk.next());
  tk.expect("End");
  return m;
}

}  // namespace choiceopt
