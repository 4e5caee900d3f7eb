#pragma once

#include <string>

#include "choiceopt/models.hpp"
#include "choiceopt/types.hpp"

namespace choiceopt {

/// A population plus the optional instance split stored alongside it.
/// Files without "choice_set"/"alternatives" leave the instance empty.
struct ModelFile {
  Universe universe;
  Population population;
  ItemSet choice_set;            // may be empty
  std::vector<int> alternatives; // may be empty

  bool has_instance() const { return !choice_set.empty(); }
  ChoiceInstance instance() const {
    return ChoiceInstance(universe, choice_set, alternatives);
  }
};

/// JSON text schema: top-level "family" tag, "universe" list, per-individual
/// parameter blocks; kNegInf serializes as the string "-inf"; NL trees as
/// nested node objects with "utility" on every non-root node.
std::string write_model_json(const ModelFile& file);
ModelFile read_model_json(const std::string& text);

void save_model_file(const ModelFile& file, const std::string& path);
ModelFile load_model_file(const std::string& path);

}  // namespace choiceopt
