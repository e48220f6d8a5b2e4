#include "vgp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "vgp/tensor_io.hpp"
#include "vgp/text.hpp"

namespace vgp::synth {
namespace {

struct Concept {
  const char* type;
  std::vector<std::vector<const char*>> forms;
};

// No word is shared between concepts.
const std::vector<Concept>& concepts() {
  static const std::vector<Concept> list = {
      {"people", {{"man"}, {"guy"}, {"bearded", "man"}, {"older", "gentleman"}, {"gentleman"}}},
      {"people", {{"woman"}, {"lady"}, {"blond", "lady"}, {"young", "woman"}, {"female"}}},
      {"people", {{"child"}, {"kid"}, {"little", "boy"}, {"toddler"}, {"small", "child"}}},
      {"clothing", {{"shirt"}, {"red", "shirt"}, {"jersey"}, {"striped", "top"}, {"tee"}}},
      {"clothing", {{"hat"}, {"cap"}, {"baseball", "cap"}, {"straw", "hat"}, {"helmet"}}},
      {"animals", {{"dog"}, {"puppy"}, {"brown", "dog"}, {"black", "puppy"}, {"pet"}}},
      {"scene", {{"street"}, {"road"}, {"city", "street"}, {"busy", "road"}, {"sidewalk"}}},
      {"scene", {{"beach"}, {"shore"}, {"sandy", "beach"}, {"ocean", "shore"}, {"coast"}}},
      {"other", {{"ball"}, {"soccer", "ball"}, {"football"}, {"white", "ball"}, {"toy"}}},
      {"other", {{"bicycle"}, {"bike"}, {"mountain", "bike"}, {"blue", "bicycle"}, {"cycle"}}},
      {"scene", {{"park"}, {"grass"}, {"green", "field"}, {"grassy", "park"}, {"lawn"}}},
      {"bodyparts", {{"hand"}, {"hands"}, {"left", "hand"}, {"raised", "arm"}, {"arm"}}},
  };
  return list;
}

const std::vector<const char*> kVerbs = {"walks", "stands", "sits", "plays", "waits"};
const std::vector<const char*> kLinks = {"with", "near", "on", "beside", "by"};
const std::vector<const char*> kFiller = {"walks", "stands", "sits", "plays", "waits", "near", "beside", "sunny",
                                          "day"};

Eigen::VectorXd gaussian(int dim, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, sd);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = normal(rng);
  return v;
}

std::string vector_line(const std::string& token, const Eigen::VectorXd& v) {
  std::string line = token;
  for (Eigen::Index i = 0; i < v.size(); ++i) line += " " + format_double(v[i]);
  return line;
}

}  // namespace

ToyCorpus make_toy_corpus(const ToyOptions& o) {
  if (o.images < 3 || o.captions < 2 || o.grid < 2) throw std::invalid_argument("toy corpus is too small");
  std::mt19937_64 rng(o.seed);
  const auto& inventory = concepts();
  const int concept_count = static_cast<int>(inventory.size());
  ToyCorpus toy;

  // Word vectors: concept centroid plus per-word noise.
  std::vector<Eigen::VectorXd> centroids;
  for (int c = 0; c < concept_count; ++c) centroids.push_back(gaussian(o.word_dimension, 1.0, rng).normalized());
  std::set<std::string> written;
  for (int c = 0; c < concept_count; ++c) {
    for (const auto& form : inventory[c].forms) {
      for (const char* w : form) {
        if (!written.insert(w).second) continue;
        toy.word_vectors.push_back(vector_line(w, centroids[c] + gaussian(o.word_dimension, o.word_noise / std::sqrt(o.word_dimension), rng)));
      }
    }
  }
  for (const char* w : kFiller) {
    if (written.insert(w).second) toy.word_vectors.push_back(vector_line(w, gaussian(o.word_dimension, 0.25, rng)));
  }

  std::vector<Eigen::VectorXd> prototypes;
  for (int c = 0; c < concept_count; ++c) prototypes.push_back(gaussian(o.visual_dimension, 1.0, rng));
  Eigen::MatrixXd lift(o.region_dimension, o.visual_dimension);
  for (int r = 0; r < o.region_dimension; ++r) lift.row(r) = gaussian(o.visual_dimension, 1.0, rng).transpose();
  std::vector<Eigen::VectorXd> region_rows;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int positions = o.grid * o.grid;

  for (int img = 0; img < o.images; ++img) {
    const std::string image_id = "toy" + std::to_string(1000 + img);
    // 3 or 4 concepts: one person, the rest from the other concepts.
    std::vector<int> picks;
    picks.push_back(static_cast<int>(rng() % 3));
    const int extra = 2 + static_cast<int>(rng() % 2);
    while (static_cast<int>(picks.size()) < 1 + extra) {
      const int c = 3 + static_cast<int>(rng() % (concept_count - 3));
      if (std::find(picks.begin(), picks.end(), c) == picks.end()) picks.push_back(c);
    }
    std::vector<long> chains;
    for (std::size_t k = 0; k < picks.size(); ++k) chains.push_back(static_cast<long>(img) * 100 + static_cast<long>(k) + 1);
    // Every third image has one chain without a box.
    const int unboxed = img % 3 == 2 ? static_cast<int>(picks.size()) - 1 : -1;
    for (std::size_t k = 0; k < picks.size(); ++k) {
      if (static_cast<int>(k) == unboxed) continue;
      toy.regions.push_back(image_id + "\t" + std::to_string(chains[k]) + "\t0,0,10,10");
    }

    const bool notvisual = img % 4 == 1;
    for (int cap = 0; cap < o.captions; ++cap) {
      std::vector<std::size_t> mentioned{0};
      for (std::size_t k = 1; k < picks.size(); ++k)
        if (unit(rng) < 0.8) mentioned.push_back(k);
      if (mentioned.size() < 2) mentioned.push_back(1);

      std::string text;
      int ordinal = 0;
      for (std::size_t m = 0; m < mentioned.size(); ++m) {
        const std::size_t k = mentioned[m];
        const auto& c = inventory[picks[k]];
        const auto& form = c.forms[rng() % c.forms.size()];
        std::string phrase = m == 0 ? "A" : (unit(rng) < 0.5 ? "a" : "the");
        for (const char* w : form) phrase += std::string(" ") + w;
        if (m == 1) text += std::string(" ") + kVerbs[rng() % kVerbs.size()];
        if (m >= 1) text += std::string(" ") + kLinks[rng() % kLinks.size()];
        if (!text.empty()) text += " ";
        text += "[/EN#" + std::to_string(chains[k]) + "/" + c.type + " " + phrase + "]";

        const std::string key = std::to_string(cap) + ":" + std::to_string(ordinal++);
        if (static_cast<int>(k) != unboxed) {
          // Localization: the entity's own region scores highest.
          std::vector<std::pair<std::string, double>> scores;
          for (std::size_t r = 0; r < picks.size(); ++r) {
            if (static_cast<int>(r) == unboxed) continue;
            const double s = r == k ? 0.7 + 0.3 * unit(rng) : 0.25 * unit(rng);
            scores.emplace_back("r" + std::to_string(chains[r]), s);
          }
          scores.emplace_back("bg", 0.1 * unit(rng));
          for (const auto& [region, s] : scores)
            toy.localization.push_back(image_id + "\t" + key + "\t" + region + "\t" + format_double(s));
          toy.region_pairs.push_back({image_id, key, region_rows.size()});
          region_rows.push_back(lift * prototypes[picks[k]] + gaussian(o.region_dimension, o.visual_noise, rng));
        }
      }
      if (notvisual && cap == 0) {
        text += " on [/EN#" + std::to_string(img * 100 + 99) + "/notvisual a sunny day]";
        ++ordinal;
      }
      text += " .";
      toy.annotations.push_back(image_id + "\t" + std::to_string(cap) + "\t" + text);
    }

    // Feature map: each concept occupies two cells, the rest is background.
    Eigen::MatrixXd fmap(positions, o.visual_dimension);
    for (int n = 0; n < positions; ++n) fmap.row(n) = gaussian(o.visual_dimension, 0.3, rng).transpose();
    std::vector<int> cells(positions);
    for (int n = 0; n < positions; ++n) cells[n] = n;
    std::shuffle(cells.begin(), cells.end(), rng);
    for (std::size_t k = 0; k < picks.size(); ++k) {
      for (int rep = 0; rep < 2; ++rep) {
        const int cell = cells[2 * k + rep];
        fmap.row(cell) = (prototypes[picks[k]] + gaussian(o.visual_dimension, o.visual_noise, rng)).transpose();
      }
    }
    toy.feature_maps.emplace_back(image_id, fmap);

    const int third = o.images / 5;
    if (img < o.images - 2 * third) {
      toy.train.push_back(image_id);
    } else if (img < o.images - third) {
      toy.validation.push_back(image_id);
    } else {
      toy.test.push_back(image_id);
    }
  }

  toy.region_vectors.resize(static_cast<Eigen::Index>(region_rows.size()), o.region_dimension);
  for (std::size_t r = 0; r < region_rows.size(); ++r) toy.region_vectors.row(static_cast<Eigen::Index>(r)) = region_rows[r].transpose();
  return toy;
}

namespace {

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace

void write_toy_corpus(const ToyCorpus& toy, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "features");
  write_lines(dir / "annotations.tsv", toy.annotations);
  write_lines(dir / "regions.tsv", toy.regions);
  write_lines(dir / "words.txt", toy.word_vectors);
  write_lines(dir / "localization.tsv", toy.localization);
  write_lines(dir / "train.txt", toy.train);
  write_lines(dir / "val.txt", toy.validation);
  write_lines(dir / "test.txt", toy.test);

  std::vector<std::string> index;
  for (const auto& f : toy.feature_maps) {
    const std::string file = f.image_id + ".vgpt";
    save_tensor(dir / "features" / file, to_tensor(f.values));
    index.push_back(f.image_id + "\t" + file);
  }
  write_lines(dir / "features" / "index.tsv", index);

  save_tensor(dir / "region_vectors.vgpt", to_tensor(toy.region_vectors));
  std::vector<std::string> pairs;
  for (const auto& p : toy.region_pairs) pairs.push_back(p.image_id + "\t" + p.entity_key + "\t" + std::to_string(p.row));
  write_lines(dir / "region_pairs.tsv", pairs);

  write_lines(dir / "toy.cfg", {
                                   "# toy corpus; paths are relative to this file",
                                   "corpus = annotations.tsv",
                                   "regions = regions.tsv",
                                   "word_vectors = words.txt",
                                   "feature_maps = features/index.tsv",
                                   "localization = localization.tsv",
                                   "region_vectors = region_vectors.vgpt",
                                   "region_pairs = region_pairs.tsv",
                                   "train = train.txt",
                                   "val = val.txt",
                                   "test = test.txt",
                                   "method = WEA",
                                   "fv.components = 4",
                                   "pca.dimension = 32",
                                   "cca.dimension = 8",
                                   "snn.hidden = 32",
                                   "snn.fused = 32",
                                   "# a toy epoch is only a few batches, so train longer with slower decay",
                                   "snn.epochs = 30",
                                   "snn.decay = 0.9",
                                   "seed = 7",
                               });
}

}  // namespace vgp::synth
