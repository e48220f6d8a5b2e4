#pragma once

// Translation-probability similarity: pseudo-parallel caption pairs, IBM
// Model 1 in both directions, grow-diag-final-and symmetrization, entity-pair
// extraction and the entity co-occurrence table.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vgp/corpus.hpp"

namespace vgp::align {

struct Span {
  std::size_t begin = 0;  // [begin, end) token range
  std::size_t end = 0;
  std::string form;       // normalized entity form
};

struct SentencePair {
  std::string image_id;
  int source_caption = 0;
  int target_caption = 0;
  std::vector<std::string> source;  // lowercased tokens
  std::vector<std::string> target;
  std::vector<Span> source_spans;
  std::vector<Span> target_spans;
};

using PseudoParallelCorpus = std::vector<SentencePair>;

/// All unordered caption pairs of each image (C(m,2) per image with m captions).
PseudoParallelCorpus build_pseudo_parallel(const std::vector<corpus::ImageRecord>& images);

/// Token sequences for one alignment direction.
struct Bitext {
  std::vector<std::string> source;
  std::vector<std::string> target;
};

std::vector<Bitext> forward_bitext(const PseudoParallelCorpus& corpus);
std::vector<Bitext> backward_bitext(const PseudoParallelCorpus& corpus);

class LexiconTable {
 public:
  static constexpr int kNull = 0;

  /// t(target | source); 0 for unseen pairs.
  double prob(const std::string& target, const std::string& source) const;
  double null_prob(const std::string& target) const;

  int source_id(const std::string& token) const;  // -1 if unknown; NULL is 0
  int target_id(const std::string& token) const;
  double prob(int target, int source) const;

  /// Sum over targets of t(. | source) for every source id (incl. NULL).
  std::vector<double> row_sums() const;
  bool operator==(const LexiconTable& other) const { return rows_ == other.rows_; }

  std::vector<std::string> source_vocab{"<NULL>"};
  std::vector<std::string> target_vocab;
  std::unordered_map<std::string, int> source_index;
  std::unordered_map<std::string, int> target_index;

 private:
  friend struct Ibm1Trainer;
  std::vector<std::map<int, double>> rows_;  // per source id: target id -> prob
};

struct Ibm1Options {
  int iterations = 5;
  // Alignment prior of the NULL word; the remaining mass is shared uniformly by
  // the source words. A negative value selects the classic 1/(l+1) prior.
  double null_prob = 0.1;
};

struct Ibm1Result {
  LexiconTable lexicon;
  std::vector<double> log_likelihood;  // corpus log-likelihood before each M-step and after the last
};

Ibm1Result train_ibm1(const std::vector<Bitext>& corpus, const Ibm1Options& options = {});

struct Link {
  int source = 0;
  int target = 0;
  auto operator<=>(const Link&) const = default;
};

using AlignmentMatrix = std::set<Link>;

/// Each target word links to its most probable source word (alignment prior
/// included); NULL wins only when strictly more probable, source ties go to
/// the smaller index.
AlignmentMatrix viterbi_align(const Bitext& pair, const LexiconTable& lexicon, const Ibm1Options& options = {});

enum class FinalAnd {
  kBothDirections,  // final step admits only points present in both directions
  kEitherDirection  // Moses symal: points of either direction with both ends unaligned
};

/// grow-diag-final-and over (source, target) coordinates. `backward` must
/// already be expressed as (source, target) links.
AlignmentMatrix symmetrize_gdfa(const AlignmentMatrix& forward, const AlignmentMatrix& backward,
                                std::size_t source_len, std::size_t target_len,
                                FinalAnd final_and = FinalAnd::kBothDirections);

AlignmentMatrix transpose(const AlignmentMatrix& a);

/// Entity pairs (source form, target form) whose spans are linked inside and
/// have no link leaving either span.
std::vector<std::pair<std::string, std::string>> extract_entity_pairs(const SentencePair& pair,
                                                                      const AlignmentMatrix& alignment);
bool spans_consistent(const Span& s, const Span& t, const AlignmentMatrix& alignment);

class TranslationTable {
 public:
  void add(const std::string& a, const std::string& b, long count = 1);

  long count(const std::string& i, const std::string& j) const;
  long row_total(const std::string& i) const;

  /// p(i|j) as c(i,j) / sum_k c(i,k); with `transposed`, c(i,j) / sum_k c(j,k).
  double p_i_given_j(const std::string& i, const std::string& j, bool transposed = false) const;
  double p_j_given_i(const std::string& i, const std::string& j, bool transposed = false) const;

  /// Unordered pairs (a <= b) with their counts, sorted.
  const std::map<std::pair<std::string, std::string>, long>& pairs() const { return counts_; }

  void write_tsv(std::ostream& out, bool transposed = false) const;
  static TranslationTable read_tsv(std::istream& in);

 private:
  std::map<std::pair<std::string, std::string>, long> counts_;
  std::map<std::string, long> totals_;
};

double translation_similarity(const std::string& i, const std::string& j, const TranslationTable& table,
                              bool transposed = false);

struct AlignedCorpus {
  PseudoParallelCorpus corpus;
  std::vector<AlignmentMatrix> alignments;  // symmetrized, one per sentence pair
  TranslationTable table;
};

struct AlignOptions {
  Ibm1Options ibm1;
  FinalAnd final_and = FinalAnd::kBothDirections;
};

/// Runs the whole chain over the given images.
AlignedCorpus align_corpus(const std::vector<corpus::ImageRecord>& images, const AlignOptions& options = {});

/// `<pair_id>\t<src>-<tgt> ...`
void write_alignments(std::ostream& out, const std::vector<AlignmentMatrix>& alignments);

}  // namespace vgp::align
