#include "vgp/align.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "vgp/text.hpp"

namespace vgp::align {

PseudoParallelCorpus build_pseudo_parallel(const std::vector<corpus::ImageRecord>& images) {
  PseudoParallelCorpus out;
  for (const auto& img : images) {
    std::map<int, std::vector<Span>> spans;
    for (const auto& e : img.all_entities)
      spans[e.caption_index].push_back({e.token_begin, e.token_end, e.form()});
    auto lowered = [](const std::vector<std::string>& toks) {
      std::vector<std::string> out;
      for (const auto& t : toks) out.push_back(to_lower(t));
      return out;
    };
    for (std::size_t a = 0; a < img.captions.size(); ++a) {
      for (std::size_t b = a + 1; b < img.captions.size(); ++b) {
        const auto& ca = img.captions[a];
        const auto& cb = img.captions[b];
        out.push_back({img.image_id, ca.caption_index, cb.caption_index, lowered(ca.tokens), lowered(cb.tokens),
                       spans[ca.caption_index], spans[cb.caption_index]});
      }
    }
  }
  return out;
}

std::vector<Bitext> forward_bitext(const PseudoParallelCorpus& corpus) {
  std::vector<Bitext> out;
  for (const auto& p : corpus) out.push_back({p.source, p.target});
  return out;
}

std::vector<Bitext> backward_bitext(const PseudoParallelCorpus& corpus) {
  std::vector<Bitext> out;
  for (const auto& p : corpus) out.push_back({p.target, p.source});
  return out;
}

// ---------------------------------------------------------------------------
// Lexicon

int LexiconTable::source_id(const std::string& token) const {
  auto it = source_index.find(token);
  return it == source_index.end() ? -1 : it->second;
}

int LexiconTable::target_id(const std::string& token) const {
  auto it = target_index.find(token);
  return it == target_index.end() ? -1 : it->second;
}

double LexiconTable::prob(int target, int source) const {
  if (source < 0 || target < 0 || static_cast<std::size_t>(source) >= rows_.size()) return 0.0;
  const auto& row = rows_[static_cast<std::size_t>(source)];
  auto it = row.find(target);
  return it == row.end() ? 0.0 : it->second;
}

double LexiconTable::prob(const std::string& target, const std::string& source) const {
  return prob(target_id(target), source_id(source));
}

double LexiconTable::null_prob(const std::string& target) const { return prob(target_id(target), kNull); }

std::vector<double> LexiconTable::row_sums() const {
  std::vector<double> out;
  for (const auto& row : rows_) {
    double s = 0.0;
    for (const auto& [_, p] : row) s += p;
    out.push_back(s);
  }
  return out;
}

namespace {

double source_prior(std::size_t position, std::size_t source_len, double null_prob) {
  if (null_prob < 0.0) return 1.0 / static_cast<double>(source_len + 1);
  if (source_len == 0) return position == 0 ? 1.0 : 0.0;
  return position == 0 ? null_prob : (1.0 - null_prob) / static_cast<double>(source_len);
}

}  // namespace

struct Ibm1Trainer {
  static Ibm1Result run(const std::vector<Bitext>& corpus, const Ibm1Options& options) {
    if (options.null_prob >= 1.0) throw std::invalid_argument("NULL alignment prior must be < 1");
    Ibm1Result result;
    LexiconTable& lex = result.lexicon;
    lex.source_index.emplace(lex.source_vocab.front(), LexiconTable::kNull);

    // Integer-encode: source position 0 is NULL.
    std::vector<std::vector<int>> src(corpus.size()), tgt(corpus.size());
    for (std::size_t p = 0; p < corpus.size(); ++p) {
      src[p].push_back(LexiconTable::kNull);
      for (const auto& w : corpus[p].source) {
        auto [it, inserted] = lex.source_index.emplace(w, static_cast<int>(lex.source_vocab.size()));
        if (inserted) lex.source_vocab.push_back(w);
        src[p].push_back(it->second);
      }
      for (const auto& w : corpus[p].target) {
        auto [it, inserted] = lex.target_index.emplace(w, static_cast<int>(lex.target_vocab.size()));
        if (inserted) lex.target_vocab.push_back(w);
        tgt[p].push_back(it->second);
      }
    }
    if (lex.target_vocab.empty() || lex.source_vocab.size() < 2) {
      throw std::invalid_argument("IBM Model 1: empty vocabulary");
    }

    // Uniform over co-occurring targets.
    lex.rows_.assign(lex.source_vocab.size(), {});
    for (std::size_t p = 0; p < corpus.size(); ++p)
      for (int s : src[p])
        for (int t : tgt[p]) lex.rows_[static_cast<std::size_t>(s)][t] = 0.0;
    for (auto& row : lex.rows_)
      for (auto& [_, v] : row) v = 1.0 / static_cast<double>(row.size());

    std::vector<std::map<int, double>> counts(lex.rows_.size());
    std::vector<double> scores;
    for (int it = 0; it <= options.iterations; ++it) {
      for (std::size_t s = 0; s < counts.size(); ++s) {
        counts[s] = lex.rows_[s];
        for (auto& [_, v] : counts[s]) v = 0.0;
      }
      double ll = 0.0;
      for (std::size_t p = 0; p < corpus.size(); ++p) {
        const std::size_t l = src[p].size() - 1;
        scores.resize(src[p].size());
        for (int t : tgt[p]) {
          double z = 0.0;
          for (std::size_t i = 0; i < src[p].size(); ++i) {
            scores[i] = source_prior(i, l, options.null_prob) * lex.prob(t, src[p][i]);
            z += scores[i];
          }
          ll += std::log(z);
          for (std::size_t i = 0; i < src[p].size(); ++i)
            counts[static_cast<std::size_t>(src[p][i])][t] += scores[i] / z;
        }
      }
      if (!result.log_likelihood.empty() && ll < result.log_likelihood.back() - 1e-9 * std::abs(ll)) {
        throw std::logic_error("IBM Model 1 log-likelihood decreased");
      }
      result.log_likelihood.push_back(ll);
      if (it == options.iterations) break;
      for (std::size_t s = 0; s < counts.size(); ++s) {
        double total = 0.0;
        for (const auto& [_, c] : counts[s]) total += c;
        if (total <= 0.0) continue;
        for (auto& [t, v] : lex.rows_[s]) v = counts[s][t] / total;
      }
    }
    return result;
  }
};

Ibm1Result train_ibm1(const std::vector<Bitext>& corpus, const Ibm1Options& options) {
  return Ibm1Trainer::run(corpus, options);
}

AlignmentMatrix viterbi_align(const Bitext& pair, const LexiconTable& lexicon, const Ibm1Options& options) {
  AlignmentMatrix out;
  const std::size_t l = pair.source.size();
  std::vector<int> src_ids;
  for (const auto& w : pair.source) src_ids.push_back(lexicon.source_id(w));
  for (std::size_t j = 0; j < pair.target.size(); ++j) {
    const int t = lexicon.target_id(pair.target[j]);
    const double null_score = source_prior(0, l, options.null_prob) * lexicon.prob(t, LexiconTable::kNull);
    double best = 0.0;
    int best_i = -1;
    for (std::size_t i = 0; i < l; ++i) {
      const double score = source_prior(i + 1, l, options.null_prob) * lexicon.prob(t, src_ids[i]);
      if (score > best) {
        best = score;
        best_i = static_cast<int>(i);
      }
    }
    if (best_i >= 0 && best >= null_score) out.insert({best_i, static_cast<int>(j)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Symmetrization

AlignmentMatrix transpose(const AlignmentMatrix& a) {
  AlignmentMatrix out;
  for (const auto& l : a) out.insert({l.target, l.source});
  return out;
}

AlignmentMatrix symmetrize_gdfa(const AlignmentMatrix& forward, const AlignmentMatrix& backward,
                                std::size_t source_len, std::size_t target_len, FinalAnd final_and) {
  auto in_range = [&](const Link& l) {
    return l.source >= 0 && l.target >= 0 && static_cast<std::size_t>(l.source) < source_len &&
           static_cast<std::size_t>(l.target) < target_len;
  };
  for (const auto& l : forward)
    if (!in_range(l)) throw std::out_of_range("forward alignment link out of range");
  for (const auto& l : backward)
    if (!in_range(l)) throw std::out_of_range("backward alignment link out of range");

  AlignmentMatrix alignment, uni;
  std::set_intersection(forward.begin(), forward.end(), backward.begin(), backward.end(),
                        std::inserter(alignment, alignment.end()));
  std::set_union(forward.begin(), forward.end(), backward.begin(), backward.end(), std::inserter(uni, uni.end()));

  std::vector<bool> src_aligned(source_len, false), tgt_aligned(target_len, false);
  for (const auto& l : alignment) {
    src_aligned[static_cast<std::size_t>(l.source)] = true;
    tgt_aligned[static_cast<std::size_t>(l.target)] = true;
  }
  auto add = [&](const Link& l) {
    alignment.insert(l);
    src_aligned[static_cast<std::size_t>(l.source)] = true;
    tgt_aligned[static_cast<std::size_t>(l.target)] = true;
  };

  static constexpr int kNeighbors[8][2] = {{-1, 0}, {0, -1}, {1, 0}, {0, 1}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
  bool added = true;
  while (added) {
    added = false;
    for (int s = 0; s < static_cast<int>(source_len); ++s) {
      for (int t = 0; t < static_cast<int>(target_len); ++t) {
        if (!alignment.count({s, t})) continue;
        for (const auto& d : kNeighbors) {
          const Link n{s + d[0], t + d[1]};
          if (!in_range(n) || alignment.count(n) || !uni.count(n)) continue;
          if (!src_aligned[static_cast<std::size_t>(n.source)] || !tgt_aligned[static_cast<std::size_t>(n.target)]) {
            add(n);
            added = true;
          }
        }
      }
    }
  }

  auto final_step = [&](const AlignmentMatrix& candidates) {
    for (const auto& l : candidates) {
      if (!src_aligned[static_cast<std::size_t>(l.source)] && !tgt_aligned[static_cast<std::size_t>(l.target)]) add(l);
    }
  };
  if (final_and == FinalAnd::kEitherDirection) {
    final_step(forward);
    final_step(backward);
  } else {
    AlignmentMatrix both;
    std::set_intersection(forward.begin(), forward.end(), backward.begin(), backward.end(),
                          std::inserter(both, both.end()));
    final_step(both);
  }
  return alignment;
}

// ---------------------------------------------------------------------------
// Entity pairs and co-occurrence table

bool spans_consistent(const Span& s, const Span& t, const AlignmentMatrix& alignment) {
  auto in_s = [&](int i) { return static_cast<std::size_t>(i) >= s.begin && static_cast<std::size_t>(i) < s.end; };
  auto in_t = [&](int j) { return static_cast<std::size_t>(j) >= t.begin && static_cast<std::size_t>(j) < t.end; };
  bool inside = false;
  for (const auto& l : alignment) {
    const bool a = in_s(l.source), b = in_t(l.target);
    if (a && b) inside = true;
    if (a != b) return false;
  }
  return inside;
}

std::vector<std::pair<std::string, std::string>> extract_entity_pairs(const SentencePair& pair,
                                                                      const AlignmentMatrix& alignment) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : pair.source_spans)
    for (const auto& t : pair.target_spans)
      if (spans_consistent(s, t, alignment)) out.emplace_back(s.form, t.form);
  return out;
}

void TranslationTable::add(const std::string& a, const std::string& b, long count) {
  if (count < 0) throw std::invalid_argument("co-occurrence counts must be non-negative");
  counts_[std::minmax(a, b)] += count;
  totals_[a] += count;
  if (a != b) totals_[b] += count;
}

long TranslationTable::count(const std::string& i, const std::string& j) const {
  auto it = counts_.find(std::minmax(i, j));
  return it == counts_.end() ? 0 : it->second;
}

long TranslationTable::row_total(const std::string& i) const {
  auto it = totals_.find(i);
  return it == totals_.end() ? 0 : it->second;
}

double TranslationTable::p_i_given_j(const std::string& i, const std::string& j, bool transposed) const {
  const long c = count(i, j);
  if (c == 0) return 0.0;
  return static_cast<double>(c) / static_cast<double>(row_total(transposed ? j : i));
}

double TranslationTable::p_j_given_i(const std::string& i, const std::string& j, bool transposed) const {
  const long c = count(i, j);
  if (c == 0) return 0.0;
  return static_cast<double>(c) / static_cast<double>(row_total(transposed ? i : j));
}

void TranslationTable::write_tsv(std::ostream& out, bool transposed) const {
  for (const auto& [key, c] : counts_) {
    const auto& [a, b] = key;
    out << a << '\t' << b << '\t' << c << '\t' << format_double(p_i_given_j(a, b, transposed)) << '\t'
        << format_double(p_j_given_i(a, b, transposed)) << '\n';
  }
}

TranslationTable TranslationTable::read_tsv(std::istream& in) {
  TranslationTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(line, '\t');
    long c = 0;
    if (f.size() != 5 || !parse_long(f[2], c) || c < 0) throw ParseError(line_no, "malformed translation table row");
    t.add(std::string(f[0]), std::string(f[1]), c);
  }
  return t;
}

double translation_similarity(const std::string& i, const std::string& j, const TranslationTable& table,
                              bool transposed) {
  return table.p_i_given_j(i, j, transposed) * table.p_j_given_i(i, j, transposed);
}

AlignedCorpus align_corpus(const std::vector<corpus::ImageRecord>& images, const AlignOptions& options) {
  AlignedCorpus out;
  out.corpus = build_pseudo_parallel(images);
  if (out.corpus.empty()) return out;
  const auto fwd_text = forward_bitext(out.corpus);
  const auto bwd_text = backward_bitext(out.corpus);
  const auto fwd = train_ibm1(fwd_text, options.ibm1);
  const auto bwd = train_ibm1(bwd_text, options.ibm1);
  for (std::size_t p = 0; p < out.corpus.size(); ++p) {
    const auto& pair = out.corpus[p];
    const auto f = viterbi_align(fwd_text[p], fwd.lexicon, options.ibm1);
    const auto b = transpose(viterbi_align(bwd_text[p], bwd.lexicon, options.ibm1));
    auto sym = symmetrize_gdfa(f, b, pair.source.size(), pair.target.size(), options.final_and);
    for (const auto& [a, c] : extract_entity_pairs(pair, sym)) out.table.add(a, c);
    out.alignments.push_back(std::move(sym));
  }
  return out;
}

void write_alignments(std::ostream& out, const std::vector<AlignmentMatrix>& alignments) {
  for (std::size_t p = 0; p < alignments.size(); ++p) {
    out << p << '\t';
    bool first = true;
    for (const auto& l : alignments[p]) {
      if (!first) out << ' ';
      out << l.source << '-' << l.target;
      first = false;
    }
    out << '\n';
  }
}

}  // namespace vgp::align
