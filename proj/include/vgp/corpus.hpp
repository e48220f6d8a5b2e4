#pragma once

// Entity-annotated caption corpora.
//
// Annotation lines are `<image_id>\t<caption_index>\t<markup text>` where an
// entity is written inline as `[/EN#<chain_id>/<type>(/<type>)* <phrase>]`.
// Tokens are whitespace separated; markup is stripped to recover the caption.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace vgp::corpus {

struct RawCaption {
  std::string image_id;
  int caption_index = 0;
  std::string text;                 // markup stripped
  std::vector<std::string> tokens;  // whitespace tokens of `text`
};

struct Entity {
  std::string image_id;
  int caption_index = 0;
  int ordinal = 0;  // position among the caption's entities, left to right
  long chain_id = 0;
  std::vector<std::string> types;
  std::vector<std::string> surface_tokens;
  std::vector<std::string> normalized_tokens;
  bool has_region = true;
  std::size_t token_begin = 0;  // span [token_begin, token_end) in caption tokens
  std::size_t token_end = 0;

  const std::string& primary_type() const { return types.front(); }
  /// Stable identifier within an image, e.g. "2:1" for the second entity of caption 2.
  std::string key() const;
  /// Normalized tokens joined by single spaces.
  std::string form() const;
};

struct ParsedCorpus {
  std::vector<RawCaption> captions;
  std::vector<Entity> entities;
};

class StopWordList {
 public:
  StopWordList() = default;
  explicit StopWordList(std::unordered_set<std::string> words);

  /// The list bundled with the toolkit (version 1, frozen).
  static const StopWordList& bundled();
  /// One token per line; blank lines and lines starting with '#' ignored.
  static StopWordList load(std::istream& in);

  bool contains(const std::string& lowercase_token) const { return words_.count(lowercase_token) > 0; }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

struct GoldClustering {
  std::string image_id;
  std::vector<std::vector<std::size_t>> clusters;  // indices into the evaluable entity list

  /// Cluster label per entity, labels numbered by first appearance.
  std::vector<int> labels(std::size_t entity_count) const;
};

struct MergeResult {
  std::vector<Entity> entities;
  std::vector<std::size_t> representative;  // original index -> index into `entities`
};

/// Parses one markup caption; `line` is only used for error messages.
std::pair<RawCaption, std::vector<Entity>> parse_caption(const std::string& image_id, int caption_index,
                                                         const std::string& markup, std::size_t line = 0);

ParsedCorpus parse_annotations(const std::vector<std::string>& lines);
ParsedCorpus parse_annotations(std::istream& in);

Entity normalize_entity(Entity e, const StopWordList& stops);
MergeResult merge_duplicates(const std::vector<Entity>& entities);
std::vector<Entity> filter_evaluable(const std::vector<Entity>& entities);
GoldClustering build_gold_clusters(const std::vector<Entity>& entities);

/// Set of (image_id, chain_id) that own a region in the sidecar file.
using RegionIndex = std::set<std::pair<std::string, long>>;
RegionIndex load_regions(std::istream& in);
void apply_regions(std::vector<Entity>& entities, const RegionIndex& regions);

/// Everything the downstream stages need for one image.
struct ImageRecord {
  std::string image_id;
  std::vector<RawCaption> captions;   // sorted by caption_index
  std::vector<Entity> all_entities;   // normalized, before filtering
  std::vector<Entity> entities;       // evaluable and merged
  GoldClustering gold;
};

/// Normalizes, filters, merges and groups the parsed corpus per image
/// (images in order of first appearance).
std::vector<ImageRecord> prepare_images(const ParsedCorpus& parsed, const StopWordList& stops);

}  // namespace vgp::corpus
