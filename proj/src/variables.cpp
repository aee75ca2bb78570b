#include "mpnet/variables.hpp"

#include "mpnet/errors.hpp"

#include <array>
#include <utility>

namespace mpnet {

namespace {

constexpr std::array<std::pair<Group, std::string_view>, 5> kGroups{{
    {Group::metabolome, "metabolome"},
    {Group::lipidome, "lipidome"},
    {Group::cvd_phenotype, "cvd_phenotype"},
    {Group::depressive_symptom, "depressive_symptom"},
    {Group::risk_factor, "risk_factor"},
}};

constexpr std::array<std::pair<Kind, std::string_view>, 3> kKinds{{
    {Kind::continuous, "continuous"},
    {Kind::discrete_ordinal, "discrete_ordinal"},
    {Kind::categorical, "categorical"},
}};

} // namespace

std::string_view to_string(Group g) noexcept {
  for (const auto &[value, name] : kGroups)
    if (value == g)
      return name;
  return "unknown";
}

std::string_view to_string(Kind k) noexcept {
  for (const auto &[value, name] : kKinds)
    if (value == k)
      return name;
  return "unknown";
}

Group parse_group(std::string_view s) {
  for (const auto &[value, name] : kGroups)
    if (name == s)
      return value;
  throw SchemaError("unknown variable group '" + std::string(s) + "'");
}

Kind parse_kind(std::string_view s) {
  for (const auto &[value, name] : kKinds)
    if (name == s)
      return value;
  throw SchemaError("unknown variable kind '" + std::string(s) + "'");
}

} // namespace mpnet
