#include "choiceopt/fitting.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace choiceopt {

namespace {

std::vector<int> segment_to_member(const Population& pop, const ChoiceDataset& data) {
  std::vector<int> map(data.segments.size(), -1);
  for (size_t s = 0; s < data.segments.size(); ++s) {
    for (int a = 0; a < pop.n(); ++a)
      if (pop.labels[a] == data.segments[s]) map[s] = a;
    if (map[s] < 0) throw SpecError("model has no member for segment " + data.segments[s]);
  }
  return map;
}

double l2_norm_sq(const ModelParams& m) {
  return std::visit(
      [](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, MnlParams>) {
          return p.utilities.squaredNorm();
        } else if constexpr (std::is_same_v<T, CdmParams>) {
          double v = p.base_utilities.squaredNorm();
          if (p.low_rank)
            v += p.low_rank->target.squaredNorm() + p.low_rank->context.squaredNorm();
          else
            v += p.pulls.squaredNorm();
          return v;
        } else {
          throw SpecError("nll regularizer supports MNL and CDM parameters only");
        }
      },
      m);
}

}  // namespace

NllResult nll(const Population& pop, const ChoiceDataset& data, double l2_weight) {
  auto members = segment_to_member(pop, data);
  NllResult r;
  for (const auto& obs : data.observations) {
    double p = choice_prob(pop.members[members[obs.segment]], obs.choice_set, obs.chosen);
    if (p <= 0.0) {
      ++r.zero_prob_observations;
      r.value = std::numeric_limits<double>::infinity();
    } else if (std::isfinite(r.value)) {
      r.value -= std::log(p);
    }
  }
  if (l2_weight > 0.0 && std::isfinite(r.value))
    for (const auto& m : pop.members) r.value += l2_weight * l2_norm_sq(m);
  return r;
}

// ---------------------------------------------------------------------------
// Flattened-parameter machinery shared by the two fitters and grad_check.
// ---------------------------------------------------------------------------

namespace {

struct SegmentData {
  std::vector<const ChoiceObservation*> observations;
};

std::vector<SegmentData> split_by_segment(const ChoiceDataset& data) {
  std::vector<SegmentData> by_segment(data.segments.size());
  for (const auto& obs : data.observations)
    by_segment[obs.segment].observations.push_back(&obs);
  return by_segment;
}

// MNL: theta = utilities over the universe.
struct MnlProblem {
  const SegmentData& seg;
  double l2;
  int u_size;

  double value(const Eigen::VectorXd& theta) const {
    double f = l2 * theta.squaredNorm();
    for (const auto* obs : seg.observations) {
      Eigen::VectorXd util(obs->choice_set.size());
      for (size_t i = 0; i < obs->choice_set.size(); ++i) util[i] = theta[obs->choice_set[i]];
      double mx = util.maxCoeff();
      double lse = mx + std::log((util.array() - mx).exp().sum());
      f += lse - theta[obs->chosen];
    }
    return f;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd g = 2.0 * l2 * theta;
    for (const auto* obs : seg.observations) {
      Eigen::VectorXd util(obs->choice_set.size());
      for (size_t i = 0; i < obs->choice_set.size(); ++i) util[i] = theta[obs->choice_set[i]];
      Eigen::VectorXd probs = stable_softmax(util);
      for (size_t i = 0; i < obs->choice_set.size(); ++i) {
        int x = obs->choice_set[i];
        g[x] += probs[i] - (x == obs->chosen ? 1.0 : 0.0);
      }
    }
    return g;
  }
};

// Low-rank CDM: theta = [base | vec(target) | vec(context)].
struct CdmProblem {
  const SegmentData& seg;
  double l2;
  int u_size;
  int rank;

  int size() const { return u_size + 2 * u_size * rank; }
  double base(const Eigen::VectorXd& t, int i) const { return t[i]; }
  Eigen::Map<const Eigen::MatrixXd> target(const Eigen::VectorXd& t) const {
    return {t.data() + u_size, u_size, rank};
  }
  Eigen::Map<const Eigen::MatrixXd> context(const Eigen::VectorXd& t) const {
    return {t.data() + u_size + u_size * rank, u_size, rank};
  }

  Eigen::VectorXd context_utilities(const Eigen::VectorXd& theta,
                                    const ItemSet& set) const {
    auto tg = target(theta);
    auto cx = context(theta);
    Eigen::VectorXd util(set.size());
    for (size_t i = 0; i < set.size(); ++i) {
      double v = theta[set[i]];
      for (size_t j = 0; j < set.size(); ++j)
        if (j != i) v += cx.row(set[j]).dot(tg.row(set[i]));
      util[i] = v;
    }
    return util;
  }

  double value(const Eigen::VectorXd& theta) const {
    double f = l2 * theta.squaredNorm();
    for (const auto* obs : seg.observations) {
      Eigen::VectorXd util = context_utilities(theta, obs->choice_set);
      double mx = util.maxCoeff();
      double lse = mx + std::log((util.array() - mx).exp().sum());
      int pos = static_cast<int>(std::lower_bound(obs->choice_set.begin(),
                                                  obs->choice_set.end(), obs->chosen) -
                                 obs->choice_set.begin());
      f += lse - util[pos];
    }
    return f;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd g = 2.0 * l2 * theta;
    auto tg = target(theta);
    auto cx = context(theta);
    auto tg_grad = [&](Eigen::VectorXd& out) {
      return Eigen::Map<Eigen::MatrixXd>(out.data() + u_size, u_size, rank);
    };
    auto cx_grad = [&](Eigen::VectorXd& out) {
      return Eigen::Map<Eigen::MatrixXd>(out.data() + u_size + u_size * rank, u_size, rank);
    };
    for (const auto* obs : seg.observations) {
      const auto& set = obs->choice_set;
      Eigen::VectorXd probs = stable_softmax(context_utilities(theta, set));
      for (size_t i = 0; i < set.size(); ++i) {
        int y = set[i];
        double resid = probs[i] - (y == obs->chosen ? 1.0 : 0.0);
        g[y] += resid;
        for (size_t j = 0; j < set.size(); ++j) {
          if (j == i) continue;
          int z = set[j];
          tg_grad(g).row(y) += resid * cx.row(z);
          cx_grad(g).row(z) += resid * tg.row(y);
        }
      }
    }
    return g;
  }
};

// Descent with backtracking halving; the accepted nll sequence never
// increases. The step is taken per mean-gradient (the sum gradient scales
// with the observation count), so the configured step size keeps one meaning
// across dataset sizes.
template <typename Problem>
void minimize(const Problem& problem, Eigen::VectorXd& theta, const FitConfig& cfg,
              FitReport& report) {
  std::vector<double> trajectory;
  double f = problem.value(theta);
  trajectory.push_back(f);
  double step = cfg.step_size / std::max<size_t>(1, problem.seg.observations.size());
  double grad_norm = 0.0;
  int iterations = 0;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    Eigen::VectorXd g = problem.gradient(theta);
    grad_norm = g.norm();
    if (grad_norm <= cfg.tol) break;
    Eigen::VectorXd trial;
    double f_trial;
    while (true) {
      trial = theta - step * g;
      f_trial = problem.value(trial);
      if (f_trial <= f) break;
      step /= 2.0;
      if (step < 1e-18) break;
    }
    if (f_trial > f) break;  // step collapsed; treat as converged
    theta = std::move(trial);
    f = f_trial;
    trajectory.push_back(f);
    iterations = iter + 1;
  }
  report.nll_trajectories.push_back(std::move(trajectory));
  report.final_grad_norm = std::max(report.final_grad_norm, grad_norm);
  report.iterations = std::max(report.iterations, iterations);
}

void check_segments_nonempty(const ChoiceDataset& data) {
  std::vector<int> counts(data.segments.size(), 0);
  for (const auto& o : data.observations) ++counts[o.segment];
  for (size_t s = 0; s < data.segments.size(); ++s)
    if (counts[s] == 0) throw SpecError("segment " + data.segments[s] + " has no observations");
}

}  // namespace

FitReport fit_mnl(const ChoiceDataset& data, const FitConfig& cfg) {
  if (!(cfg.step_size > 0) || !(cfg.tol > 0)) throw SpecError("step size and tol must be > 0");
  check_segments_nonempty(data);
  auto by_segment = split_by_segment(data);
  FitReport report;
  for (size_t s = 0; s < data.segments.size(); ++s) {
    MnlProblem problem{by_segment[s], cfg.l2_weight, data.universe.size()};
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(data.universe.size());
    minimize(problem, theta, cfg, report);
    MnlParams fitted;
    fitted.utilities = theta.array() - theta.mean();  // standard form
    report.model.labels.push_back(data.segments[s]);
    report.model.members.push_back(std::move(fitted));
  }
  return report;
}

FitReport fit_cdm_lowrank(const ChoiceDataset& data, const FitConfig& cfg) {
  if (cfg.rank < 1) throw SpecError("low-rank CDM requires rank >= 1");
  if (!(cfg.step_size > 0) || !(cfg.tol > 0)) throw SpecError("step size and tol must be > 0");
  check_segments_nonempty(data);
  auto by_segment = split_by_segment(data);
  const int u = data.universe.size();
  std::mt19937_64 rng(cfg.seed);
  FitReport report;
  for (size_t s = 0; s < data.segments.size(); ++s) {
    CdmProblem problem{by_segment[s], cfg.l2_weight, u, cfg.rank};
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(problem.size());
    for (int i = u; i < problem.size(); ++i) theta[i] = 0.2 * uniform01(rng) - 0.1;
    minimize(problem, theta, cfg, report);

    CdmLowRank lr;
    lr.rank = cfg.rank;
    lr.target = problem.target(theta);
    lr.context = problem.context(theta);
    report.model.labels.push_back(data.segments[s]);
    report.model.members.push_back(
        CdmParams::from_low_rank(theta.head(u), std::move(lr)));
  }
  return report;
}

double grad_check(const Population& pop, const ChoiceDataset& data, double l2_weight) {
  auto members = segment_to_member(pop, data);
  auto by_segment = split_by_segment(data);
  const double h = 1e-5;
  double worst = 0.0;

  auto check = [&](auto&& problem, Eigen::VectorXd theta) {
    Eigen::VectorXd analytic = problem.gradient(theta);
    for (int i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd plus = theta, minus = theta;
      plus[i] += h;
      minus[i] -= h;
      double numeric = (problem.value(plus) - problem.value(minus)) / (2.0 * h);
      double rel = std::abs(analytic[i] - numeric) /
                   std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
      worst = std::max(worst, rel);
    }
  };

  for (size_t s = 0; s < data.segments.size(); ++s) {
    const ModelParams& m = pop.members[members[s]];
    if (const auto* mnl = std::get_if<MnlParams>(&m)) {
      MnlProblem problem{by_segment[s], l2_weight, data.universe.size()};
      check(problem, mnl->utilities);
    } else if (const auto* cdm = std::get_if<CdmParams>(&m)) {
      if (!cdm->low_rank) throw SpecError("grad_check supports low-rank CDM only");
      CdmProblem problem{by_segment[s], l2_weight, data.universe.size(), cdm->low_rank->rank};
      Eigen::VectorXd theta(problem.size());
      theta.head(data.universe.size()) = cdm->base_utilities;
      Eigen::Map<Eigen::MatrixXd>(theta.data() + problem.u_size, problem.u_size,
                                  problem.rank) = cdm->low_rank->target;
      Eigen::Map<Eigen::MatrixXd>(theta.data() + problem.u_size + problem.u_size * problem.rank,
                                  problem.u_size, problem.rank) = cdm->low_rank->context;
      check(problem, theta);
    } else {
      throw SpecError("grad_check supports MNL and low-rank CDM populations");
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// CSV ingestion and synthesis
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) out.push_back(cur), cur.clear();
    else cur.push_back(c);
  }
  out.push_back(cur);
  return out;
}

}  // namespace

IngestResult parse_csv(const std::string& text) {
  struct RawRow {
    std::string segment, chosen;
    std::vector<std::string> set;
    int line;
  };
  std::vector<RawRow> rows;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!header_seen) {
      if (t != "segment,chosen,choice_set")
        throw SpecError("line " + std::to_string(line_no) +
                        ": expected header segment,chosen,choice_set");
      header_seen = true;
      continue;
    }
    auto fields = split(t, ',');
    if (fields.size() != 3)
      throw SpecError("line " + std::to_string(line_no) + ": expected 3 fields, got " +
                      std::to_string(fields.size()));
    RawRow row;
    row.segment = trim(fields[0]);
    row.chosen = trim(fields[1]);
    for (const auto& item : split(fields[2], ';')) {
      std::string id = trim(item);
      if (!id.empty()) row.set.push_back(id);
    }
    if (row.segment.empty() || row.chosen.empty() || row.set.empty())
      throw SpecError("line " + std::to_string(line_no) + ": empty field");
    row.line = line_no;
    rows.push_back(std::move(row));
  }

  IngestResult result;
  // Validation: the chosen item must be in the (deduplicated) set, and the set
  // must keep at least two distinct items.
  std::vector<RawRow> accepted;
  for (auto& row : rows) {
    std::sort(row.set.begin(), row.set.end());
    row.set.erase(std::unique(row.set.begin(), row.set.end()), row.set.end());
    bool chosen_in = std::binary_search(row.set.begin(), row.set.end(), row.chosen);
    if (!chosen_in || row.set.size() < 2) {
      ++result.rejected_rows;
      result.rejected_lines.push_back(row.line);
      continue;
    }
    accepted.push_back(std::move(row));
  }

  std::set<std::string> item_ids, segment_ids;
  for (const auto& row : accepted) {
    segment_ids.insert(row.segment);
    for (const auto& id : row.set) item_ids.insert(id);
  }
  result.dataset.universe = Universe({item_ids.begin(), item_ids.end()});
  result.dataset.segments.assign(segment_ids.begin(), segment_ids.end());

  std::map<std::string, int> segment_index;
  for (size_t s = 0; s < result.dataset.segments.size(); ++s)
    segment_index[result.dataset.segments[s]] = static_cast<int>(s);

  for (const auto& row : accepted) {
    ChoiceObservation obs;
    obs.segment = segment_index[row.segment];
    for (const auto& id : row.set) obs.choice_set.push_back(result.dataset.universe.index_of(id));
    std::sort(obs.choice_set.begin(), obs.choice_set.end());
    obs.chosen = result.dataset.universe.index_of(row.chosen);
    result.dataset.observations.push_back(std::move(obs));
  }
  return result;
}

IngestResult ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_csv(text);
}

std::string write_csv(const ChoiceDataset& data) {
  std::ostringstream out;
  out << "segment,chosen,choice_set\n";
  for (const auto& obs : data.observations) {
    out << data.segments[obs.segment] << "," << data.universe.id(obs.chosen) << ",";
    for (size_t i = 0; i < obs.choice_set.size(); ++i)
      out << (i ? ";" : "") << data.universe.id(obs.choice_set[i]);
    out << "\n";
  }
  return out.str();
}

ChoiceDataset synth_dataset(const Population& pop, const Universe& universe,
                            const std::vector<ItemSet>& sets, int count,
                            std::uint64_t seed) {
  pop.validate(universe.size());
  if (sets.empty()) throw SpecError("synthesis needs at least one choice set");
  for (const auto& set : sets) {
    if (set.size() < 2) throw SpecError("synthesis sets need at least two items");
    for (int i : set)
      if (i < 0 || i >= universe.size()) throw SpecError("synthesis set item out of range");
  }
  ChoiceDataset data;
  data.universe = universe;
  data.segments = pop.labels;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < count; ++i) {
    ChoiceObservation obs;
    obs.segment = i % pop.n();
    obs.choice_set = sets[(i / pop.n()) % sets.size()];
    std::sort(obs.choice_set.begin(), obs.choice_set.end());
    obs.chosen = sample_choice(pop.members[obs.segment], obs.choice_set, rng);
    data.observations.push_back(std::move(obs));
  }
  return data;
}

}  // namespace choiceopt
