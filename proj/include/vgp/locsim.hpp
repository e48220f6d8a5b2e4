#pragma once

// Phrase-localization similarity from externally produced localization scores.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace vgp::locsim {

struct Candidate {
  std::string region_id;
  double score = 0.0;
  double probability = 0.0;  // score normalized over the kept candidates
};

using EntityRef = std::pair<std::string, std::string>;  // (image_id, entity_key)

class LocalizationTable {
 public:
  void set(const EntityRef& entity, std::vector<Candidate> candidates) { table_[entity] = std::move(candidates); }
  const std::vector<Candidate>* find(const EntityRef& entity) const;
  std::size_t size() const { return table_.size(); }

 private:
  std::map<EntityRef, std::vector<Candidate>> table_;
};

inline constexpr std::size_t kDefaultCandidates = 30;

/// TSV `<image_id>\t<entity_key>\t<region_id>\t<score>`. Keeps the top `max_candidates`
/// per entity (ties keep file order) and normalizes their scores. When
/// `known` is non-null, rows for entities outside it are an error.
LocalizationTable load_localization_scores(std::istream& in, std::size_t max_candidates = kDefaultCandidates,
                                           const std::set<EntityRef>* known = nullptr);

/// Truncates to the top candidates and fills in probabilities (uniform if all scores are zero).
std::vector<Candidate> normalize_candidates(std::vector<Candidate> candidates, std::size_t max_candidates);

/// Sum over shared regions of p(i|r) p(j|r); 0 (with a warning) when either entity is absent.
double localization_similarity(const EntityRef& i, const EntityRef& j, const LocalizationTable& table);

}  // namespace vgp::locsim
