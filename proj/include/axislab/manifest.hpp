#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "axislab/core_geometry.hpp"

namespace axislab {

enum class TextRole { human, AI };

inline const char* to_string(TextRole r) { return r == TextRole::AI ? "AI" : "human"; }

struct ManifestRecord {
  std::string text_id;
  std::string population;
  TextRole role = TextRole::human;
  std::map<std::string, double> covariates;
};

/// Per-text metadata; record order defines row alignment with embeddings.
struct Manifest {
  std::vector<ManifestRecord> records;

  std::size_t size() const { return records.size(); }

  CovariateTable covariates() const {
    std::vector<std::string> ids;
    for (const auto& r : records) ids.push_back(r.text_id);
    CovariateTable t(std::move(ids));
    for (std::size_t i = 0; i < records.size(); ++i)
      for (const auto& [k, v] : records[i].covariates) t.set(k, i, v);
    return t;
  }

  // 1 for AI, 0 for human.
  std::vector<int> labels() const {
    std::vector<int> out;
    for (const auto& r : records) out.push_back(r.role == TextRole::AI ? 1 : 0);
    return out;
  }

  // "population:role" per row, the stratum tag used by few-shot probes.
  std::vector<std::string> strata_tags() const {
    std::vector<std::string> out;
    for (const auto& r : records) out.push_back(r.population + ":" + to_string(r.role));
    return out;
  }

  std::vector<Eigen::Index> rows_where(const std::string& population, std::optional<TextRole> role = std::nullopt) const {
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < records.size(); ++i)
      if ((population.empty() || records[i].population == population) && (!role || records[i].role == *role))
        out.push_back(static_cast<Eigen::Index>(i));
    return out;
  }

  std::vector<std::string> populations() const {
    std::vector<std::string> out;
    for (const auto& r : records)
      if (std::find(out.begin(), out.end(), r.population) == out.end()) out.push_back(r.population);
    return out;
  }
};

}  // namespace axislab
