#pragma once

// Seeded toy corpus with planted paraphrase clusters and matching side inputs
// (word vectors, feature maps, localization scores, region vectors).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vgp/simnet.hpp"

namespace vgp::synth {

struct ToyOptions {
  int images = 20;
  int captions = 5;
  int word_dimension = 16;
  int visual_dimension = 16;
  int grid = 4;
  int region_dimension = 16;
  double word_noise = 0.15;
  double visual_noise = 0.1;
  std::uint64_t seed = 7;
};

struct RegionPair {
  std::string image_id;
  std::string entity_key;
  std::size_t row = 0;
};

struct ToyCorpus {
  std::vector<std::string> annotations;   // annotation-file lines
  std::vector<std::string> regions;       // region sidecar lines
  std::vector<std::string> word_vectors;  // word-vector file lines
  std::vector<simnet::FeatureMap> feature_maps;
  std::vector<std::string> localization;  // localization score lines
  Eigen::MatrixXd region_vectors;
  std::vector<RegionPair> region_pairs;
  std::vector<std::string> train, validation, test;
};

ToyCorpus make_toy_corpus(const ToyOptions& options = {});

/// Writes every input file plus `toy.cfg`, a pipeline config that references them.
void write_toy_corpus(const ToyCorpus& toy, const std::filesystem::path& dir);

}  // namespace vgp::synth
