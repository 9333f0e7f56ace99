#ifndef BMCA_DEDUP_HPP
#define BMCA_DEDUP_HPP

#include <string>
#include <vector>

#include "bmca/backend.hpp"

namespace bmca::dedup {

struct WitnessClass {
  std::string function;
  backend::PropertyType property_type = backend::PropertyType::postcondition;
  std::vector<backend::Witness> members;
  backend::Witness representative;
};

// One class per distinct (function, property_type), ordered by key.
// Representative: shortest trace_digest, then least property_id, then least
// flattened assignment text — permutation invariant by construction.
std::vector<WitnessClass> dedup(const std::vector<backend::Witness>& witnesses);

std::string assignments_text(const backend::Witness& w);

}  // namespace bmca::dedup

#endif
