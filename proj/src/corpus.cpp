#include "vgp/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "vgp/text.hpp"

namespace vgp::corpus {
namespace {

// English function-word list, frozen at version 1. Changing it changes
// normalized forms and therefore every downstream artifact.
constexpr const char* kBundledStopWords[] = {
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've", "you'll",
    "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself", "she", "she's",
    "her", "hers", "herself", "it", "it's", "its", "itself", "they", "them", "their", "theirs",
    "themselves", "what", "which", "who", "whom", "this", "that", "that'll", "these", "those", "am",
    "is", "are", "was", "were", "be", "been", "being", "have", "has", "had", "having", "do", "does",
    "did", "doing", "a", "an", "the", "and", "but", "if", "or", "because", "as", "until", "while",
    "of", "at", "by", "for", "with", "about", "against", "between", "into", "through", "during",
    "before", "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over",
    "under", "again", "further", "then", "once", "here", "there", "when", "where", "why", "how",
    "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no", "nor", "not",
    "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will", "just", "don",
    "don't", "should", "should've", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren",
    "aren't", "couldn", "couldn't", "didn", "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn",
    "hasn't", "haven", "haven't", "isn", "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't",
    "needn", "needn't", "shan", "shan't", "shouldn", "shouldn't", "wasn", "wasn't", "weren",
    "weren't", "won", "won't", "wouldn", "wouldn't",
};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

void append_plain(std::string_view segment, std::vector<std::string>& tokens) {
  for (auto& tok : split_whitespace(segment)) tokens.push_back(std::move(tok));
}

}  // namespace

std::string Entity::key() const { return std::to_string(caption_index) + ":" + std::to_string(ordinal); }

std::string Entity::form() const { return join(normalized_tokens, " "); }

StopWordList::StopWordList(std::unordered_set<std::string> words) : words_(std::move(words)) {}

const StopWordList& StopWordList::bundled() {
  static const StopWordList list{std::unordered_set<std::string>(std::begin(kBundledStopWords),
                                                                 std::end(kBundledStopWords))};
  return list;
}

StopWordList StopWordList::load(std::istream& in) {
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    words.insert(to_lower(t));
  }
  if (words.empty()) throw std::runtime_error("stop-word list is empty");
  return StopWordList(std::move(words));
}

std::vector<int> GoldClustering::labels(std::size_t entity_count) const {
  std::vector<int> out(entity_count, -1);
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (auto i : clusters[c]) out.at(i) = static_cast<int>(c);
  return out;
}

std::pair<RawCaption, std::vector<Entity>> parse_caption(const std::string& image_id, int caption_index,
                                                         const std::string& markup, std::size_t line) {
  RawCaption caption{image_id, caption_index, {}, {}};
  std::vector<Entity> entities;
  std::string_view s(markup);
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto open = s.find_first_of("[]", pos);
    if (open == std::string_view::npos) {
      append_plain(s.substr(pos), caption.tokens);
      break;
    }
    if (s[open] == ']') throw ParseError(line, "unbalanced ']' at column " + std::to_string(open + 1));
    append_plain(s.substr(pos, open - pos), caption.tokens);

    const auto close = s.find_first_of("[]", open + 1);
    if (close == std::string_view::npos || s[close] == '[') {
      throw ParseError(line, "unterminated entity bracket at column " + std::to_string(open + 1));
    }
    std::string_view body = s.substr(open + 1, close - open - 1);
    if (body.substr(0, 4) != "/EN#") {
      throw ParseError(line, "entity bracket must start with /EN# at column " + std::to_string(open + 1));
    }
    body.remove_prefix(4);
    std::size_t header_end = 0;
    while (header_end < body.size() && !is_space(body[header_end])) ++header_end;
    const std::string_view header = body.substr(0, header_end);
    const auto fields = split(header, '/');
    long chain = 0;
    if (!parse_long(fields[0], chain)) {
      throw ParseError(line, "non-integer chain id '" + std::string(fields[0]) + "'");
    }
    if (fields.size() < 2) throw ParseError(line, "entity tag without a type");
    Entity e;
    e.image_id = image_id;
    e.caption_index = caption_index;
    e.ordinal = static_cast<int>(entities.size());
    e.chain_id = chain;
    for (std::size_t f = 1; f < fields.size(); ++f) {
      if (fields[f].empty()) throw ParseError(line, "empty type label in entity tag");
      e.types.emplace_back(fields[f]);
    }
    e.surface_tokens = split_whitespace(body.substr(header_end));
    if (e.surface_tokens.empty()) throw ParseError(line, "empty entity phrase");
    e.token_begin = caption.tokens.size();
    caption.tokens.insert(caption.tokens.end(), e.surface_tokens.begin(), e.surface_tokens.end());
    e.token_end = caption.tokens.size();
    entities.push_back(std::move(e));
    pos = close + 1;
  }
  caption.text = join(caption.tokens, " ");
  return {std::move(caption), std::move(entities)};
}

ParsedCorpus parse_annotations(const std::vector<std::string>& lines) {
  ParsedCorpus out;
  std::set<std::pair<std::string, int>> seen;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::size_t line_no = n + 1;
    std::string_view line(lines[n]);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 3) throw ParseError(line_no, "expected 3 tab-separated fields");
    long idx = 0;
    if (!parse_long(fields[1], idx) || idx < 0 || idx > 4) {
      throw ParseError(line_no, "caption index must be an integer in 0..4");
    }
    const std::string image_id(fields[0]);
    if (image_id.empty()) throw ParseError(line_no, "empty image id");
    if (!seen.emplace(image_id, static_cast<int>(idx)).second) {
      throw ParseError(line_no, "duplicate caption index " + std::to_string(idx) + " for image " + image_id);
    }
    auto [caption, entities] = parse_caption(image_id, static_cast<int>(idx), std::string(fields[2]), line_no);
    out.captions.push_back(std::move(caption));
    for (auto& e : entities) out.entities.push_back(std::move(e));
  }
  return out;
}

ParsedCorpus parse_annotations(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return parse_annotations(lines);
}

Entity normalize_entity(Entity e, const StopWordList& stops) {
  std::vector<std::string> folded;
  folded.reserve(e.surface_tokens.size());
  for (const auto& t : e.surface_tokens) folded.push_back(to_lower(t));
  e.normalized_tokens.clear();
  for (const auto& t : folded)
    if (!stops.contains(t)) e.normalized_tokens.push_back(t);
  if (e.normalized_tokens.empty()) e.normalized_tokens = std::move(folded);
  return e;
}

MergeResult merge_duplicates(const std::vector<Entity>& entities) {
  // Images keep their order of first appearance; within an image the order
  // is (caption_index, span start).
  std::map<std::string, std::size_t> image_rank;
  for (const auto& e : entities) image_rank.emplace(e.image_id, image_rank.size());
  std::vector<std::size_t> order(entities.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ea = entities[a];
    const auto& eb = entities[b];
    const auto ra = image_rank.at(ea.image_id);
    const auto rb = image_rank.at(eb.image_id);
    if (ra != rb) return ra < rb;
    if (ea.caption_index != eb.caption_index) return ea.caption_index < eb.caption_index;
    return ea.token_begin < eb.token_begin;
  });

  MergeResult out;
  out.representative.assign(entities.size(), 0);
  std::map<std::pair<std::string, std::vector<std::string>>, std::size_t> survivor;
  // First pass: survivors are the earliest occurrences in (caption, span) order.
  std::vector<bool> is_survivor(entities.size(), false);
  for (auto i : order) {
    auto key = std::make_pair(entities[i].image_id, entities[i].normalized_tokens);
    if (survivor.emplace(key, i).second) is_survivor[i] = true;
  }
  // Output survivors in the same deterministic order.
  std::map<std::size_t, std::size_t> slot;
  for (auto i : order) {
    if (!is_survivor[i]) continue;
    slot[i] = out.entities.size();
    out.entities.push_back(entities[i]);
  }
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const auto s = survivor.at({entities[i].image_id, entities[i].normalized_tokens});
    out.representative[i] = slot.at(s);
  }
  return out;
}

std::vector<Entity> filter_evaluable(const std::vector<Entity>& entities) {
  std::vector<Entity> out;
  for (const auto& e : entities) {
    if (!e.has_region) continue;
    if (std::find(e.types.begin(), e.types.end(), "notvisual") != e.types.end()) continue;
    out.push_back(e);
  }
  return out;
}

GoldClustering build_gold_clusters(const std::vector<Entity>& entities) {
  GoldClustering g;
  if (!entities.empty()) g.image_id = entities.front().image_id;
  std::map<std::pair<long, std::string>, std::size_t> cluster_of;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const auto key = std::make_pair(entities[i].chain_id, entities[i].primary_type());
    auto [it, inserted] = cluster_of.emplace(key, g.clusters.size());
    if (inserted) g.clusters.emplace_back();
    g.clusters[it->second].push_back(i);
  }
  return g;
}

RegionIndex load_regions(std::istream& in) {
  RegionIndex regions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 3) throw ParseError(line_no, "expected <image_id>\\t<chain_id>\\t<x1>,<y1>,<x2>,<y2>");
    long chain = 0;
    if (!parse_long(fields[1], chain)) throw ParseError(line_no, "non-integer chain id");
    const auto coords = split(fields[2], ',');
    if (coords.size() != 4) throw ParseError(line_no, "box needs four coordinates");
    for (auto c : coords) {
      double v = 0;
      if (!parse_double(trim(c), v)) throw ParseError(line_no, "non-numeric box coordinate");
    }
    regions.emplace(std::string(fields[0]), chain);
  }
  return regions;
}

void apply_regions(std::vector<Entity>& entities, const RegionIndex& regions) {
  for (auto& e : entities) e.has_region = regions.count({e.image_id, e.chain_id}) > 0;
}

std::vector<ImageRecord> prepare_images(const ParsedCorpus& parsed, const StopWordList& stops) {
  std::vector<ImageRecord> images;
  std::map<std::string, std::size_t> index;
  auto slot = [&](const std::string& id) -> ImageRecord& {
    auto [it, inserted] = index.emplace(id, images.size());
    if (inserted) images.push_back(ImageRecord{id, {}, {}, {}, {}});
    return images[it->second];
  };
  for (const auto& c : parsed.captions) slot(c.image_id).captions.push_back(c);
  for (const auto& e : parsed.entities) slot(e.image_id).all_entities.push_back(normalize_entity(e, stops));
  for (auto& img : images) {
    std::stable_sort(img.captions.begin(), img.captions.end(),
                     [](const RawCaption& a, const RawCaption& b) { return a.caption_index < b.caption_index; });
    img.entities = merge_duplicates(filter_evaluable(img.all_entities)).entities;
    img.gold = build_gold_clusters(img.entities);
    img.gold.image_id = img.image_id;
  }
  return images;
}

}  // namespace vgp::corpus
