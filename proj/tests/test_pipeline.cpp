#include <fstream>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "vgp/pipeline.hpp"
#include "vgp/synth.hpp"
#include "vgp/text.hpp"

using namespace vgp;
using namespace vgp::pipeline;

namespace {

struct ToyWorkspace {
  test::ScratchDir dir{"pipeline"};
  PipelineConfig cfg;
  ToyWorkspace() {
    synth::write_toy_corpus(synth::make_toy_corpus({}), dir.path());
    cfg = load_config(dir / "toy.cfg");
    cfg.output_dir = dir / "out";
  }
};

}  // namespace

TEST_CASE("config files parse keys, comments and relative paths") {
  test::ScratchDir dir("config");
  test::write_file(dir / "a.cfg",
                   "# comment\ncorpus = data/ann.tsv\nmethod = TP\nseed = 3\nap.damping = 0.7\n"
                   "tune.budget = 9\nsnn.epochs=2\n\n");
  const auto cfg = load_config(dir / "a.cfg");
  CHECK(cfg.corpus == dir / "data/ann.tsv");
  CHECK(cfg.method == Method::kTP);
  CHECK(cfg.seed == 3);
  CHECK(cfg.ap.damping == 0.7);
  CHECK(cfg.tune.budget == 9);
  CHECK(cfg.snn.epochs == 2);

  test::write_file(dir / "bad.cfg", "method = WEA\nnonsense = 1\n");
  try {
    load_config(dir / "bad.cfg");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  test::write_file(dir / "bad2.cfg", "seed = many\n");
  CHECK_THROWS_AS(load_config(dir / "bad2.cfg"), ParseError);
  test::write_file(dir / "bad3.cfg", "no equals sign\n");
  CHECK_THROWS_AS(load_config(dir / "bad3.cfg"), ParseError);

  PipelineConfig c;
  c.apply_override("method=FV_CCA");
  CHECK(c.method == Method::kFVCCA);
  CHECK_THROWS(c.apply_override("method"));
  CHECK_THROWS(c.apply_override("method=XYZ"));
  for (auto m : {Method::kPL, Method::kTP, Method::kWEA, Method::kFV, Method::kFVCCA, Method::kSNN, Method::kSNNImage,
                 Method::kEnsemble})
    CHECK(parse_method(method_name(m)) == m);
}

TEST_CASE("invalid configurations fail before any work") {
  ToyWorkspace t;
  auto cfg = t.cfg;
  cfg.method = Method::kEnsemble;
  CHECK_THROWS_WITH(Workspace{cfg}, doctest::Contains("checkpoint required"));
  cfg = t.cfg;
  cfg.corpus = t.dir / "missing.tsv";
  CHECK_THROWS(Workspace{cfg});
  cfg = t.cfg;
  cfg.method = Method::kSNNImage;
  cfg.feature_maps.clear();
  CHECK_THROWS(Workspace{cfg});
  cfg = t.cfg;
  cfg.test = cfg.validation;
  CHECK_THROWS_WITH(Workspace{cfg}, doctest::Contains("more than one split"));
  cfg = t.cfg;
  cfg.jobs = 0;
  CHECK_THROWS(Workspace{cfg});
}

TEST_CASE("WEA run writes a populated report") {
  ToyWorkspace t;
  const auto r = run_pipeline(t.cfg);
  CHECK(r.method == "WEA");
  CHECK(r.all.images == 4);
  CHECK(r.all.ari >= 0.9);
  CHECK(r.all.f_score > 0.0);
  for (const char* f : {"report.json", "report.txt", "similarities.tsv", "clusters.tsv", "tuning.tsv"})
    CHECK(std::filesystem::exists(t.cfg.output_dir / f));
  const auto back = eval::reports_from_json(test::read_file(t.cfg.output_dir / "report.json"));
  REQUIRE(back.size() == 1);
  CHECK(back[0].all.ari == r.all.ari);
}

TEST_CASE("similarities are symmetric and independent of the job count") {
  ToyWorkspace t;
  for (auto m : {Method::kPL, Method::kTP, Method::kFV, Method::kFVCCA}) {
    auto cfg = t.cfg;
    cfg.method = m;
    Workspace one(cfg);
    cfg.jobs = 3;
    Workspace many(cfg);
    const auto a = one.similarities(Split::kTest);
    const auto b = many.similarities(Split::kTest);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].values == b[i].values);
      CHECK(a[i].values.isApprox(a[i].values.transpose(), 0.0));
      CHECK(a[i].values.allFinite());
    }
  }
}

TEST_CASE("a saved scorer reproduces the trained one") {
  ToyWorkspace t;
  auto cfg = t.cfg;
  cfg.method = Method::kSNNImage;
  cfg.snn.epochs = 2;
  std::vector<ImageSimilarity> trained;
  {
    Workspace ws(cfg);
    trained = ws.similarities(Split::kTest);
  }
  const auto ckpt = cfg.output_dir / "checkpoints" / "SNN_IMAGE";
  REQUIRE(std::filesystem::exists(ckpt / "manifest.json"));
  cfg.checkpoint_snn_image = ckpt;
  cfg.output_dir = t.dir / "out2";
  Workspace reloaded(cfg);
  const auto again = reloaded.similarities(Split::kTest);
  REQUIRE(again.size() == trained.size());
  for (std::size_t i = 0; i < again.size(); ++i) CHECK(again[i].values == trained[i].values);

  // Attention dumps from the checkpoint sum to one per entity.
  const auto& img = reloaded.image(again[0].image_id);
  REQUIRE(img.entities.size() >= 2);
  const auto dumps = emit_attention(reloaded, img.image_id, img.entities[0].key(), img.entities[1].key(), ckpt,
                                    t.dir / "attn.tsv");
  REQUIRE(dumps.size() == 2);
  for (const auto& d : dumps) {
    CHECK(d.grid.rows() == 4);
    CHECK(std::abs(d.grid.sum() - 1.0) < 1e-6);
  }
  std::istringstream lines(test::read_file(t.dir / "attn.tsv"));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) ++count;
  CHECK(count == 32);
  CHECK_THROWS(emit_attention(reloaded, img.image_id, "9:9", img.entities[1].key(), ckpt, t.dir / "x.tsv"));
}

TEST_CASE("entity vectors of every kind cover the evaluable entities") {
  ToyWorkspace t;
  Workspace ws(t.cfg);
  std::size_t evaluable = 0;
  for (const auto& img : ws.images()) evaluable += img.entities.size();
  for (auto kind : {embed::VectorKind::kWEA, embed::VectorKind::kFV, embed::VectorKind::kFVPCA, embed::VectorKind::kCCA}) {
    const auto& v = ws.entity_vectors(kind);
    CHECK(v.size() == evaluable);
    for (const auto& [ref, vec] : v) CHECK(vec.allFinite());
  }
  CHECK(ws.entity_vectors(embed::VectorKind::kFV).begin()->second.size() == 2 * 4 * 16);
}
