#include "vgp/locsim.hpp"

#include <algorithm>
#include <istream>
#include <unordered_map>

#include "vgp/text.hpp"

namespace vgp::locsim {

const std::vector<Candidate>* LocalizationTable::find(const EntityRef& entity) const {
  auto it = table_.find(entity);
  return it == table_.end() ? nullptr : &it->second;
}

std::vector<Candidate> normalize_candidates(std::vector<Candidate> candidates, std::size_t max_candidates) {
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
  if (candidates.size() > max_candidates) candidates.resize(max_candidates);
  double total = 0.0;
  for (const auto& c : candidates) total += c.score;
  for (auto& c : candidates)
    c.probability = total > 0.0 ? c.score / total : 1.0 / static_cast<double>(candidates.size());
  return candidates;
}

LocalizationTable load_localization_scores(std::istream& in, std::size_t max_candidates,
                                           const std::set<EntityRef>* known) {
  std::map<EntityRef, std::vector<Candidate>> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 4) throw ParseError(line_no, "expected <image_id>\\t<entity_key>\\t<region_id>\\t<score>");
    double score = 0.0;
    if (!parse_double(f[3], score)) throw ParseError(line_no, "non-numeric localization score");
    if (score < 0.0) throw ParseError(line_no, "negative localization score");
    EntityRef ref{std::string(f[0]), std::string(f[1])};
    if (known && !known->count(ref)) {
      throw ParseError(line_no, "unknown entity " + ref.first + "/" + ref.second);
    }
    raw[ref].push_back({std::string(f[2]), score, 0.0});
  }
  LocalizationTable table;
  for (auto& [ref, cands] : raw) table.set(ref, normalize_candidates(std::move(cands), max_candidates));
  return table;
}

double localization_similarity(const EntityRef& i, const EntityRef& j, const LocalizationTable& table) {
  const auto* ci = table.find(i);
  const auto* cj = table.find(j);
  if (!ci || !cj) {
    warn("no localization candidates for " + (ci ? j : i).first + "/" + (ci ? j : i).second);
    return 0.0;
  }
  std::unordered_map<std::string, double> pj;
  for (const auto& c : *cj) pj[c.region_id] += c.probability;
  double s = 0.0;
  for (const auto& c : *ci) {
    auto it = pj.find(c.region_id);
    if (it != pj.end()) s += c.probability * it->second;
  }
  return s;
}

}  // namespace vgp::locsim
