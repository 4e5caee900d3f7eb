// Command-line front end: model fitting, choice-set optimization, hardness
// gadget generation, the all-pairs/sampled comparison harness, and MIBLP
// export. One JSON record per result on stdout; logs on stderr; exit codes
// 0 = success, 1 = runtime failure, 2 = usage or invalid-request error.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "choiceopt/approx.hpp"
#include "choiceopt/exact.hpp"
#include "choiceopt/fitting.hpp"
#include "choiceopt/gadgets.hpp"
#include "choiceopt/miblp.hpp"
#include "choiceopt/model_io.hpp"
#include "choiceopt/objectives.hpp"

using namespace choiceopt;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') out.push_back(cur), cur.clear();
    else cur.push_back(c);
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string instance_digest(const Population& pop, const ChoiceInstance& inst) {
  ModelFile file;
  file.universe = inst.universe;
  file.population = pop;
  file.choice_set = inst.choice_set;
  file.alternatives = inst.alternatives;
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(write_model_json(file))));
  return buf;
}

ChoiceInstance resolve_instance(const ModelFile& file, const std::string& choice_set,
                                const std::string& alternatives) {
  if (!choice_set.empty()) {
    std::vector<ItemId> c = split_commas(choice_set);
    std::vector<ItemId> alts;
    if (!alternatives.empty()) {
      alts = split_commas(alternatives);
    } else {
      ItemSet ci;
      for (const auto& id : c) ci.push_back(file.universe.index_of(id));
      for (int i = 0; i < file.universe.size(); ++i)
        if (!set_contains(ci, i)) alts.push_back(file.universe.id(i));
    }
    return ChoiceInstance::from_ids(file.universe, c, alts);
  }
  if (!file.has_instance())
    throw SpecError("model file has no choice-set split; pass --choice-set");
  return file.instance();
}

Objective resolve_objective(const std::string& problem, const std::string& target,
                            const ChoiceInstance& inst) {
  if (problem == "agreement") return Objective::minimize_d();
  if (problem == "disagreement") return Objective::maximize_d();
  if (problem == "promotion") {
    if (target.empty()) throw SpecError("--problem promotion requires --target");
    return Objective::promote(inst.universe.index_of(target));
  }
  throw SpecError("unknown problem: " + problem);
}

const char* objective_name(const Objective& o) {
  switch (o.kind) {
    case Objective::Kind::MinimizeD: return "minimize_D";
    case Objective::Kind::MaximizeD: return "maximize_D";
    case Objective::Kind::Promote: return "promote";
  }
  return "?";
}

ordered_json items_json(const ChoiceInstance& inst, const AlternativeSet& z) {
  ordered_json arr = ordered_json::array();
  std::vector<std::string> ids;
  for (int i : z.members) ids.push_back(inst.universe.id(i));
  std::sort(ids.begin(), ids.end());
  for (auto& id : ids) arr.push_back(id);
  return arr;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::int64_t ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start)
        .count();
  }
};

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

AlternativeSet run_restricted(const Population& pop, const ChoiceInstance& inst,
                              const Objective& obj) {
  Family f = pop.family();
  if (obj.kind == Objective::Kind::Promote) {
    switch (f) {
      case Family::Cdm: return promote_cdm_2item_equal(pop, inst, obj.x_star);
      case Family::Nl: return promote_nl_same_tree(pop, inst, obj.x_star);
      case Family::Eba: return promote_eba_disjoint(pop, inst, obj.x_star);
      default:
        throw SpecError("no restricted promotion rule for family " +
                        std::string(family_name(f)));
    }
  }
  if (f == Family::Mnl) return solve_equal_stubbornness(pop, inst, obj);
  throw SpecError("restricted agreement/disagreement requires an MNL population");
}

int cmd_optimize(const std::string& model_path, const std::string& choice_set,
                 const std::string& alternatives, const std::string& problem,
                 const std::string& target, const std::string& method, double epsilon,
                 bool guarantee_mode, std::uint64_t seed) {
  ModelFile file = load_model_file(model_path);
  ChoiceInstance inst = resolve_instance(file, choice_set, alternatives);
  file.population.validate(inst.universe.size());
  Objective obj = resolve_objective(problem, target, inst);

  Timer timer;
  ordered_json record;
  record["command"] = "optimize";
  record["digest"] = instance_digest(file.population, inst);
  record["problem"] = problem;
  record["method"] = method;
  record["objective"] = objective_name(obj);

  if (method == "approx") {
    ApproxConfig cfg;
    cfg.epsilon = epsilon;
    cfg.objective = obj;
    cfg.guarantee_mode = guarantee_mode;
    ApproxResult r = optimize_approx(file.population, inst, cfg);
    record["epsilon"] = epsilon;
    record["Z"] = items_json(inst, r.best_z);
    record["value"] = r.value;
    record["cells"] = r.cells_materialized;
    record["search_fraction"] = r.search_fraction;
    record["guarantee"] = r.guarantee_applicable;
    if (!r.shifts.empty()) record["shift"] = r.shifts;
  } else if (method == "greedy" || method == "brute") {
    ExactResult r = method == "brute" ? brute_force(file.population, inst, obj)
                                      : greedy(file.population, inst, obj);
    record["Z"] = items_json(inst, r.z);
    record["value"] = r.value;
    record["evaluations"] = r.evaluations;
  } else if (method == "restricted") {
    AlternativeSet z = run_restricted(file.population, inst, obj);
    record["Z"] = items_json(inst, z);
    record["value"] = evaluate_objective(file.population, inst, obj, z);
  } else {
    throw SpecError("unknown method: " + method);
  }
  record["time_ms"] = timer.ms();
  record["seed"] = seed;
  std::cout << record.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

int cmd_fit(const std::string& data_path, const std::string& family, const FitConfig& cfg,
            const std::string& out_path) {
  if (family != "mnl" && family != "cdm-lowrank")
    throw SpecError("unknown family for fitting: " + family + " (use mnl or cdm-lowrank)");
  IngestResult ingest = ingest_csv(data_path);
  if (ingest.rejected_rows > 0)
    std::cerr << "rejected " << ingest.rejected_rows << " invalid rows\n";
  if (ingest.dataset.observations.empty()) throw SpecError("dataset has no usable rows");

  FitReport report =
      family == "mnl" ? fit_mnl(ingest.dataset, cfg) : fit_cdm_lowrank(ingest.dataset, cfg);

  ModelFile file;
  file.universe = ingest.dataset.universe;
  file.population = report.model;
  save_model_file(file, out_path);

  ordered_json record;
  record["command"] = "fit";
  record["family"] = family;
  if (family == "cdm-lowrank") record["rank"] = cfg.rank;
  record["nll"] = nll(report.model, ingest.dataset, cfg.l2_weight).value;
  record["grad_check"] = grad_check(report.model, ingest.dataset, cfg.l2_weight);
  record["iterations"] = report.iterations;
  record["rejected_rows"] = ingest.rejected_rows;
  record["out"] = out_path;
  std::cout << record.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gadget
// ---------------------------------------------------------------------------

int cmd_gadget(const std::string& kind, const std::string& set_csv, std::int64_t target,
               double eps, const std::string& out_path) {
  GadgetSpec spec;
  spec.kind = gadget_kind_from_name(kind);
  for (const auto& tok : split_commas(set_csv)) {
    try {
      spec.s.push_back(std::stoll(tok));
    } catch (const std::exception&) {
      throw SpecError("--set entries must be integers, got " + tok);
    }
  }
  spec.target = target;
  spec.epsilon = eps;
  GadgetInstance g = generate(spec);
  save_gadget(g, out_path);

  ordered_json record;
  record["command"] = "gadget";
  record["kind"] = kind;
  record["target"] = g.target;
  record["m"] = g.inst.m();
  record["out"] = out_path;
  record["certificate_out"] = out_path + ".cert.json";
  std::cout << record.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

struct ReportRow {
  std::string choice_set;
  std::string problem;
  std::string method;
  std::string epsilon;
  double value;
  std::int64_t cells;
  std::int64_t time_ms;
  bool verified;
};

int least_popular_item(const Population& pop, const ChoiceInstance& inst) {
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(inst.k());
  for (int a = 0; a < pop.n(); ++a)
    avg += choice_probs(pop.members[a], inst.choice_set);
  int best = 0;
  for (int j = 1; j < inst.k(); ++j)
    if (avg[j] < avg[best]) best = j;
  return inst.choice_set[best];
}

std::vector<ReportRow> run_experiment_cell(const Population& pop, const Universe& universe,
                                           const ItemSet& choice_set,
                                           const std::string& problem, double epsilon,
                                           int brute_guard) {
  std::vector<int> alts;
  for (int i = 0; i < universe.size(); ++i)
    if (!set_contains(choice_set, i)) alts.push_back(i);
  ChoiceInstance inst(universe, choice_set, alts);

  std::string set_label;
  for (size_t i = 0; i < choice_set.size(); ++i)
    set_label += (i ? ";" : "") + universe.id(choice_set[i]);

  Objective obj;
  if (problem == "agreement") obj = Objective::minimize_d();
  else if (problem == "disagreement") obj = Objective::maximize_d();
  else obj = Objective::promote(least_popular_item(pop, inst));

  const bool verified = inst.m() <= 12;
  std::vector<ReportRow> rows;
  char eps_buf[32];
  std::snprintf(eps_buf, sizeof(eps_buf), "%g", epsilon);

  {
    Timer t;
    ApproxConfig cfg;
    cfg.epsilon = epsilon;
    cfg.objective = obj;
    ApproxResult r = optimize_approx(pop, inst, cfg);
    rows.push_back({set_label, problem, "approx", eps_buf, r.value, r.cells_materialized,
                    t.ms(), verified});
  }
  {
    Timer t;
    ExactResult r = greedy(pop, inst, obj);
    rows.push_back({set_label, problem, "greedy", "", r.value, r.evaluations, t.ms(),
                    verified});
  }
  if (inst.m() <= brute_guard) {
    Timer t;
    ExactResult r = brute_force(pop, inst, obj);
    rows.push_back({set_label, problem, "brute", "", r.value, r.evaluations, t.ms(), true});
  }
  return rows;
}

int cmd_experiment(const std::string& model_path, const std::string& mode, int count,
                   int max_size, std::uint64_t seed, const std::string& problem,
                   double epsilon, const std::string& out_path, int workers) {
  ModelFile file = load_model_file(model_path);
  const Universe& universe = file.universe;
  file.population.validate(universe.size());
  if (problem != "agreement" && problem != "disagreement" && problem != "promotion")
    throw SpecError("unknown problem: " + problem);
  if (problem == "promotion" && file.population.family() == Family::Mnl)
    throw SpecError("promotion is fixed under MNL; use a CDM or NL model");

  std::vector<ItemSet> choice_sets;
  if (mode == "all-pairs") {
    for (int i = 0; i < universe.size(); ++i)
      for (int j = i + 1; j < universe.size(); ++j) choice_sets.push_back({i, j});
  } else if (mode == "sampled") {
    if (count < 1) throw SpecError("--count must be >= 1 for sampled mode");
    if (max_size < 2 || max_size > universe.size())
      throw SpecError("--max-size must lie in [2, |universe|]");
    std::mt19937_64 rng(seed);
    std::set<ItemSet> seen;
    while (static_cast<int>(choice_sets.size()) < count) {
      int size = 2 + static_cast<int>(uniform01(rng) * (max_size - 1));
      ItemSet c;
      std::vector<int> all(universe.size());
      for (int i = 0; i < universe.size(); ++i) all[i] = i;
      for (int i = 0; i < size; ++i) {
        int j = i + static_cast<int>(uniform01(rng) * (universe.size() - i));
        std::swap(all[i], all[j]);
      }
      c.assign(all.begin(), all.begin() + size);
      std::sort(c.begin(), c.end());
      if (seen.insert(c).second) choice_sets.push_back(std::move(c));
      if (seen.size() >= (1u << std::min(20, universe.size())))
        break;  // universe exhausted
    }
  } else {
    throw SpecError("unknown mode: " + mode + " (use all-pairs or sampled)");
  }

  // independent choice sets distributed across workers
  workers = std::max(1, std::min<int>(workers, std::thread::hardware_concurrency()));
  std::vector<std::future<std::vector<ReportRow>>> parts;
  int chunk = (static_cast<int>(choice_sets.size()) + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    int begin = w * chunk;
    int end = std::min<int>(begin + chunk, static_cast<int>(choice_sets.size()));
    if (begin >= end) break;
    parts.push_back(std::async(std::launch::async, [&, begin, end] {
      std::vector<ReportRow> rows;
      for (int i = begin; i < end; ++i) {
        auto cell =
            run_experiment_cell(file.population, universe, choice_sets[i], problem,
                                epsilon, 12);
        rows.insert(rows.end(), cell.begin(), cell.end());
      }
      return rows;
    }));
  }
  std::vector<ReportRow> rows;
  for (auto& part : parts) {
    auto r = part.get();
    rows.insert(rows.end(), r.begin(), r.end());
  }
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::tie(a.choice_set, a.problem, a.method) <
           std::tie(b.choice_set, b.problem, b.method);
  });

  std::ostringstream csv;
  csv << "choice_set,problem,method,epsilon,value,cells,time_ms,verified\n";
  for (const auto& row : rows) {
    char value_buf[40];
    std::snprintf(value_buf, sizeof(value_buf), "%.12g", row.value);
    csv << row.choice_set << "," << row.problem << "," << row.method << "," << row.epsilon
        << "," << value_buf << "," << row.cells << "," << row.time_ms << ","
        << (row.verified ? "true" : "false") << "\n";
  }
  if (out_path.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write report: " + out_path);
    out << csv.str();
    ordered_json record;
    record["command"] = "experiment";
    record["rows"] = rows.size();
    record["choice_sets"] = choice_sets.size();
    record["out"] = out_path;
    std::cout << record.dump() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// export-miblp
// ---------------------------------------------------------------------------

int cmd_export_miblp(const std::string& model_path, const std::string& choice_set,
                     const std::string& alternatives, const std::string& problem,
                     const std::string& out_path) {
  ModelFile file = load_model_file(model_path);
  ChoiceInstance inst = resolve_instance(file, choice_set, alternatives);
  if (problem != "agreement" && problem != "disagreement")
    throw SpecError("MIBLP export handles agreement and disagreement only");
  Objective obj =
      problem == "agreement" ? Objective::minimize_d() : Objective::maximize_d();

  MiblpModel model = export_miblp(file.population, inst, obj);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write LP file: " + out_path);
  out << render_miblp(model);

  std::size_t binaries = model.binaries.size();
  std::size_t continuous = model.frees.size();
  ordered_json record;
  record["command"] = "export-miblp";
  record["problem"] = problem;
  record["variables"] = binaries + continuous;
  record["binary_variables"] = binaries;
  record["continuous_variables"] = continuous;
  record["constraints"] = model.constraints.size();
  record["out"] = out_path;
  std::cout << record.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Choice-set optimization for heterogeneous discrete choice models"};
  app.require_subcommand(1);

  // fit
  auto* fit = app.add_subcommand("fit", "Fit per-segment models from a choice CSV");
  std::string fit_data, fit_family = "mnl", fit_out = "model.json";
  FitConfig fit_cfg;
  fit->add_option("--data", fit_data, "dataset CSV")->required();
  fit->add_option("--family", fit_family, "mnl | cdm-lowrank");
  fit->add_option("--rank", fit_cfg.rank, "embedding rank (cdm-lowrank)");
  fit->add_option("--step", fit_cfg.step_size, "step size");
  fit->add_option("--l2", fit_cfg.l2_weight, "l2 regularization weight");
  fit->add_option("--iters", fit_cfg.max_iters, "max iterations");
  fit->add_option("--tol", fit_cfg.tol, "gradient-norm stop threshold");
  fit->add_option("--seed", fit_cfg.seed, "rng seed");
  fit->add_option("--out", fit_out, "output model file")->required();

  // optimize
  auto* opt = app.add_subcommand("optimize", "Optimize an alternative set");
  std::string opt_model, opt_cs, opt_alts, opt_problem, opt_target, opt_method = "approx";
  double opt_eps = 0.01;
  bool opt_guarantee = false;
  std::uint64_t opt_seed = 0;
  opt->add_option("--model", opt_model, "model file")->required();
  opt->add_option("--choice-set", opt_cs, "comma-separated base items");
  opt->add_option("--alternatives", opt_alts, "comma-separated alternative pool");
  opt->add_option("--problem", opt_problem, "agreement | disagreement | promotion")
      ->required();
  opt->add_option("--target", opt_target, "promotion target item");
  opt->add_option("--method", opt_method, "approx | greedy | brute | restricted");
  opt->add_option("--epsilon", opt_eps, "approximation budget");
  opt->add_flag("--guarantee-mode", opt_guarantee, "tighten the CDM delta by 4");
  opt->add_option("--seed", opt_seed, "rng seed (recorded)");

  // gadget
  auto* gad = app.add_subcommand("gadget", "Generate a hardness-reduction instance");
  std::string gad_kind, gad_set, gad_out = "gadget.json";
  std::int64_t gad_target = 0;
  double gad_eps = 0.5;
  gad->add_option("--kind", gad_kind,
                  "agreement-partition | disagreement-subsetsum | promo-cdm-1x3 | "
                  "promo-cdm-2x2 | promo-nl | promo-eba")
      ->required();
  gad->add_option("--set", gad_set, "comma-separated positive integers")->required();
  gad->add_option("--target-sum", gad_target, "subset-sum target");
  gad->add_option("--eps", gad_eps, "gadget epsilon in (0, 1)");
  gad->add_option("--out", gad_out, "output instance file");

  // experiment
  auto* exp = app.add_subcommand("experiment", "Compare methods over many choice sets");
  std::string exp_model, exp_mode = "all-pairs", exp_problem = "agreement", exp_out;
  int exp_count = 100, exp_max_size = 5, exp_workers = 4;
  double exp_eps = 0.01;
  std::uint64_t exp_seed = 0;
  exp->add_option("--model", exp_model, "model file")->required();
  exp->add_option("--mode", exp_mode, "all-pairs | sampled");
  exp->add_option("--count", exp_count, "sampled sets (sampled mode)");
  exp->add_option("--max-size", exp_max_size, "max sampled set size");
  exp->add_option("--seed", exp_seed, "sampling seed");
  exp->add_option("--problem", exp_problem, "agreement | disagreement | promotion");
  exp->add_option("--epsilon", exp_eps, "approximation budget");
  exp->add_option("--out", exp_out, "report CSV path (stdout when omitted)");
  exp->add_option("--workers", exp_workers, "parallel workers");

  // export-miblp
  auto* mib = app.add_subcommand("export-miblp", "Write the bilinear program");
  std::string mib_model, mib_cs, mib_alts, mib_problem, mib_out = "model.lp";
  mib->add_option("--model", mib_model, "model file")->required();
  mib->add_option("--choice-set", mib_cs, "comma-separated base items");
  mib->add_option("--alternatives", mib_alts, "comma-separated alternative pool");
  mib->add_option("--problem", mib_problem, "agreement | disagreement")->required();
  mib->add_option("--out", mib_out, "output LP file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*fit) return cmd_fit(fit_data, fit_family, fit_cfg, fit_out);
    if (*opt)
      return cmd_optimize(opt_model, opt_cs, opt_alts, opt_problem, opt_target, opt_method,
                          opt_eps, opt_guarantee, opt_seed);
    if (*gad) return cmd_gadget(gad_kind, gad_set, gad_target, gad_eps, gad_out);
    if (*exp)
      return cmd_experiment(exp_model, exp_mode, exp_count, exp_max_size, exp_seed,
                            exp_problem, exp_eps, exp_out, exp_workers);
    if (*mib) return cmd_export_miblp(mib_model, mib_cs, mib_alts, mib_problem, mib_out);
  } catch (const SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
