#include "bmca/dedup.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace bmca::dedup {

std::string assignments_text(const backend::Witness& w) {
  std::ostringstream out;
  for (const auto& [name, value] : w.assignments)
    out << name << "=" << value << ";";
  return out.str();
}

namespace {

bool better_representative(const backend::Witness& a, const backend::Witness& b) {
  if (a.trace_digest.size() != b.trace_digest.size())
    return a.trace_digest.size() < b.trace_digest.size();
  if (a.property_id != b.property_id) return a.property_id < b.property_id;
  return assignments_text(a) < assignments_text(b);
}

}  // namespace

std::vector<WitnessClass> dedup(const std::vector<backend::Witness>& witnesses) {
  std::map<std::pair<std::string, backend::PropertyType>, WitnessClass> groups;
  for (const auto& w : witnesses) {
    auto key = std::make_pair(w.function, w.property_type);
    auto [it, fresh] = groups.try_emplace(key);
    WitnessClass& cls = it->second;
    if (fresh) {
      cls.function = w.function;
      cls.property_type = w.property_type;
      cls.representative = w;
    } else if (better_representative(w, cls.representative)) {
      cls.representative = w;
    }
    cls.members.push_back(w);
  }
  std::vector<WitnessClass> out;
  out.reserve(groups.size());
  for (auto& [key, cls] : groups) out.push_back(std::move(cls));
  return out;
}

}  // namespace bmca::dedup
