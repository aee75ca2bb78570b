#pragma once

#include <string>
#include <string_view>

namespace mpnet {

enum class Group {
  metabolome,
  lipidome,
  cvd_phenotype,
  depressive_symptom,
  risk_factor
};

enum class Kind { continuous, discrete_ordinal, categorical };

struct VariableMeta {
  std::string name;
  Group group = Group::metabolome;
  Kind kind = Kind::continuous;
  std::string units;

  bool operator==(const VariableMeta &) const = default;
};

/// Omics layers are the intermediate (biomarker) groups of the network.
constexpr bool is_biomarker(Group g) noexcept {
  return g == Group::metabolome || g == Group::lipidome;
}

/// Phenotypes in the wide sense: CVD indicators and depressive symptoms.
constexpr bool is_phenotype(Group g) noexcept {
  return g == Group::cvd_phenotype || g == Group::depressive_symptom;
}

std::string_view to_string(Group g) noexcept;
std::string_view to_string(Kind k) noexcept;

// Both throw SchemaError on an unknown token.
Group parse_group(std::string_view s);
Kind parse_kind(std::string_view s);

} // namespace mpnet
