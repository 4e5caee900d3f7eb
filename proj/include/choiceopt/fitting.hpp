#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "choiceopt/models.hpp"
#include "choiceopt/types.hpp"

namespace choiceopt {

struct ChoiceObservation {
  int segment;        // index into ChoiceDataset::segments
  ItemSet choice_set; // sorted universe indices, size >= 2
  int chosen;         // member of choice_set
};

struct ChoiceDataset {
  Universe universe;
  std::vector<std::string> segments;
  std::vector<ChoiceObservation> observations;

  int observations_in(int segment) const {
    int c = 0;
    for (const auto& o : observations) c += o.segment == segment;
    return c;
  }
};

struct FitConfig {
  double step_size = 0.05;    // adopted default
  int max_iters = 500;
  double l2_weight = 0.00025; // adopted default
  int rank = 2;               // CDM embedding rank
  std::uint64_t seed = 0;
  double tol = 1e-6;          // gradient-norm stopping threshold
};

struct NllResult {
  double value = 0.0;
  int zero_prob_observations = 0;
};

/// Negative log-likelihood of the dataset under the population (labels must
/// cover the dataset's segments), plus l2_weight * ||params||^2. Observations
/// with zero probability push the value to infinity and are counted.
NllResult nll(const Population& pop, const ChoiceDataset& data, double l2_weight = 0.0);

struct FitReport {
  Population model;
  // accepted iterates per segment; each sequence is non-increasing
  std::vector<std::vector<double>> nll_trajectories;
  double final_grad_norm = 0.0;  // worst segment
  int iterations = 0;            // worst segment
};

/// Gradient descent on the regularized nll with backtracking halving; returns
/// standard-form (zero-sum) utilities per segment.
FitReport fit_mnl(const ChoiceDataset& data, const FitConfig& cfg);

/// Low-rank CDM fit: base utilities plus context/target embeddings with
/// pull(z, x) = context(z) . target(x). Embeddings start from seeded
/// uniform(-0.1, 0.1) draws; identical (data, cfg) reproduce the trajectory
/// bitwise.
FitReport fit_cdm_lowrank(const ChoiceDataset& data, const FitConfig& cfg);

/// Max relative error between the analytic gradient and central finite
/// differences (step 1e-5) across every parameter of every member.
double grad_check(const Population& pop, const ChoiceDataset& data, double l2_weight = 0.0);

struct IngestResult {
  ChoiceDataset dataset;
  int rejected_rows = 0;           // well-formed rows failing validation
  std::vector<int> rejected_lines; // 1-based line numbers
};

/// CSV schema: header `segment,chosen,choice_set`; choice_set is a
/// `;`-joined item list; `#` starts a comment line. Malformed rows raise
/// SpecError with the line number; rows whose chosen item is missing from the
/// set (or whose set has fewer than two distinct items) are counted and
/// skipped.
IngestResult parse_csv(const std::string& text);
IngestResult ingest_csv(const std::string& path);

std::string write_csv(const ChoiceDataset& data);

/// Draws `count` observations by cycling segments and sets, sampling each
/// choice from the population member's distribution. Deterministic per seed.
ChoiceDataset synth_dataset(const Population& pop, const Universe& universe,
                            const std::vector<ItemSet>& sets, int count,
                            std::uint64_t seed);

}  // namespace choiceopt
