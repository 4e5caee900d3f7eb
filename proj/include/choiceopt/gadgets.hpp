#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "choiceopt/models.hpp"
#include "choiceopt/types.hpp"

namespace choiceopt {

/// Reduction-instance generators. Each kind reproduces one hardness
/// construction exactly; optimizer outputs map back to Partition/Subset-Sum
/// certificates through the integer attached to each alternative.
struct GadgetSpec {
  enum class Kind {
    AgreementPartition,    // two individuals, C = {x, y}, target = sum/2
    DisagreementSubsetSum, // two individuals, C = {x}
    PromoCdm1x3,           // one individual, C = {xstar, w, y}, q parametrization
    PromoCdm2x2,           // two individuals, C = {xstar, y}, q parametrization
    PromoNl,               // two individuals, mirrored two-level trees
    PromoEba               // two individuals, aspect cannibalization system
  };

  Kind kind = Kind::AgreementPartition;
  std::vector<std::int64_t> s;   // positive integers; alternatives z1..zN
  std::int64_t target = 0;       // ignored for AgreementPartition (sum/2)
  double epsilon = 0.5;          // used by PromoCdm2x2 / PromoNl / PromoEba

  void validate() const;
};

const char* gadget_kind_name(GadgetSpec::Kind k);
GadgetSpec::Kind gadget_kind_from_name(const std::string& name);

struct GadgetInstance {
  Population pop;
  ChoiceInstance inst;
  std::unordered_map<int, std::int64_t> certificate;  // universe index -> integer of S
  std::int64_t target = 0;
  int x_star = -1;  // promotion kinds only
  GadgetSpec spec;
};

GadgetInstance generate(const GadgetSpec& spec);

/// True iff the mapped integers of Z sum to the gadget target.
bool verify_certificate(const GadgetInstance& g, const AlternativeSet& z);

/// Writes the instance in the model-file schema to `path` and the certificate
/// side table to `path + ".cert.json"`.
void save_gadget(const GadgetInstance& g, const std::string& path);
GadgetInstance load_gadget(const std::string& path);

}  // namespace choiceopt
