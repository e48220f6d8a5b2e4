// Command-line front end for the paraphrase-extraction pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vgp/corpus.hpp"
#include "vgp/eval.hpp"
#include "vgp/pipeline.hpp"
#include "vgp/synth.hpp"
#include "vgp/tensor_io.hpp"
#include "vgp/text.hpp"

namespace fs = std::filesystem;
using namespace vgp;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  int jobs = 0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "pipeline config (key = value lines)")->required();
  app->add_option("--set", c.overrides, "config override key=value (repeatable)");
  app->add_option("-j,--jobs", c.jobs, "worker threads for per-image stages");
}

pipeline::PipelineConfig load(const Common& c) {
  auto cfg = pipeline::load_config(c.config);
  for (const auto& o : c.overrides) cfg.apply_override(o);
  if (c.jobs > 0) cfg.jobs = c.jobs;
  return cfg;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visually grounded paraphrase extraction"};
  app.require_subcommand(1);

  // parse
  std::string corpus_path, regions_path, stopwords_path, parse_out;
  auto* parse = app.add_subcommand("parse", "parse annotations and list evaluable entities");
  parse->add_option("--corpus", corpus_path)->required();
  parse->add_option("--regions", regions_path);
  parse->add_option("--stopwords", stopwords_path);
  parse->add_option("-o,--out", parse_out)->required();

  Common embed_c, align_c, sim_c, train_c, tune_c, cluster_c, eval_c, run_c, attn_c;

  std::string embed_kind = "WEA", embed_out;
  auto* embed = app.add_subcommand("embed", "write entity vectors (VGPT) and their index");
  add_common(embed, embed_c);
  embed->add_option("--kind", embed_kind, "WEA, FV, FV_PCA or CCA");
  embed->add_option("-o,--out", embed_out, "output directory")->required();

  std::string align_out;
  auto* align = app.add_subcommand("align", "align caption pairs and write the translation table");
  add_common(align, align_c);
  align->add_option("-o,--out", align_out, "output directory")->required();

  std::string sim_split = "test", sim_out;
  auto* sim = app.add_subcommand("sim", "write pairwise similarities of one split");
  add_common(sim, sim_c);
  sim->add_option("--split", sim_split, "train, val or test");
  sim->add_option("-o,--out", sim_out)->required();

  std::string train_mode = "SNN", train_out;
  auto* train = app.add_subcommand("train", "train a supervised scorer and save a checkpoint");
  add_common(train, train_c);
  train->add_option("--mode", train_mode, "SNN or SNN_IMAGE");
  train->add_option("-o,--out", train_out, "checkpoint directory")->required();

  std::string tune_out;
  auto* tune = app.add_subcommand("tune", "tune preference and threshold on the validation split");
  add_common(tune, tune_c);
  tune->add_option("-o,--out", tune_out, "output directory")->required();

  std::string cluster_split = "test", cluster_out;
  double cluster_pref = 0.0;
  auto* cluster = app.add_subcommand("cluster", "cluster one split with a fixed preference");
  add_common(cluster, cluster_c);
  cluster->add_option("--split", cluster_split);
  cluster->add_option("--preference", cluster_pref)->required();
  cluster->add_option("-o,--out", cluster_out)->required();

  double eval_pref = 0.0, eval_threshold = 0.0;
  std::string eval_out;
  auto* evaluate = app.add_subcommand("eval", "evaluate the test split with fixed preference and threshold");
  add_common(evaluate, eval_c);
  evaluate->add_option("--preference", eval_pref)->required();
  evaluate->add_option("--threshold", eval_threshold)->required();
  evaluate->add_option("-o,--out", eval_out, "report.json path")->required();

  std::vector<std::string> report_inputs;
  std::string report_json;
  auto* report = app.add_subcommand("report", "merge report.json files into one table");
  report->add_option("inputs", report_inputs)->required();
  report->add_option("--json", report_json, "also write the merged JSON here");

  auto* run = app.add_subcommand("run", "run every stage end to end");
  add_common(run, run_c);

  std::string attn_ckpt, attn_image, attn_out;
  std::vector<std::string> attn_entities;
  auto* attn = app.add_subcommand("attn", "dump attention grids of an entity pair");
  add_common(attn, attn_c);
  attn->add_option("--checkpoint", attn_ckpt)->required();
  attn->add_option("--image", attn_image)->required();
  attn->add_option("--entities", attn_entities)->required()->expected(2);
  attn->add_option("-o,--out", attn_out)->required();

  std::string toy_out;
  std::uint64_t toy_seed = 7;
  auto* toy = app.add_subcommand("toy", "write the bundled toy corpus and its config");
  toy->add_option("-o,--out", toy_out)->required();
  toy->add_option("--seed", toy_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*parse) {
      std::ifstream in(corpus_path);
      if (!in) throw std::runtime_error("cannot open " + corpus_path);
      auto parsed = corpus::parse_annotations(in);
      if (!regions_path.empty()) {
        std::ifstream r(regions_path);
        if (!r) throw std::runtime_error("cannot open " + regions_path);
        corpus::apply_regions(parsed.entities, corpus::load_regions(r));
      }
      auto stops = corpus::StopWordList::bundled();
      if (!stopwords_path.empty()) {
        std::ifstream s(stopwords_path);
        if (!s) throw std::runtime_error("cannot open " + stopwords_path);
        stops = corpus::StopWordList::load(s);
      }
      auto out = open_out(parse_out);
      std::size_t count = 0;
      for (const auto& img : corpus::prepare_images(parsed, stops)) {
        const auto gold = img.gold.labels(img.entities.size());
        for (std::size_t i = 0; i < img.entities.size(); ++i) {
          const auto& e = img.entities[i];
          out << img.image_id << '\t' << e.key() << '\t' << e.chain_id << '\t' << join(e.types, "/") << '\t'
              << e.form() << '\t' << gold[i] << '\n';
          ++count;
        }
      }
      std::cout << count << " evaluable entities\n";
    } else if (*embed) {
      auto cfg = load(embed_c);
      pipeline::Workspace ws(cfg);
      const auto& vectors = ws.entity_vectors(pipeline::parse_vector_kind(embed_kind));
      fs::create_directories(embed_out);
      Eigen::MatrixXd m(static_cast<Eigen::Index>(vectors.size()),
                        vectors.empty() ? 0 : vectors.begin()->second.size());
      auto index = open_out(fs::path(embed_out) / "index.tsv");
      Eigen::Index row = 0;
      for (const auto& [ref, v] : vectors) {
        m.row(row) = v.transpose();
        index << ref.first << '\t' << ref.second << '\t' << row << '\n';
        ++row;
      }
      save_tensor(fs::path(embed_out) / "vectors.vgpt", to_tensor(m));
      std::cout << vectors.size() << " entity vectors of dimension " << m.cols() << '\n';
    } else if (*align) {
      auto cfg = load(align_c);
      pipeline::Workspace ws(cfg);
      const auto& a = ws.aligned();
      auto table = open_out(fs::path(align_out) / "translation_table.tsv");
      a.table.write_tsv(table);
      auto out = open_out(fs::path(align_out) / "alignments.tsv");
      align::write_alignments(out, a.alignments);
      std::cout << a.corpus.size() << " sentence pairs, " << a.table.pairs().size() << " entity pairs\n";
    } else if (*sim) {
      auto cfg = load(sim_c);
      pipeline::Workspace ws(cfg);
      pipeline::write_similarities(sim_out, ws.similarities(pipeline::parse_split(sim_split)));
    } else if (*train) {
      auto cfg = load(train_c);
      const auto mode = simnet::parse_mode(train_mode);
      cfg.method = mode == simnet::ScorerMode::kSNN ? pipeline::Method::kSNN : pipeline::Method::kSNNImage;
      cfg.checkpoint_snn.clear();
      cfg.checkpoint_snn_image.clear();
      cfg.output_dir = fs::path(train_out) / ".work";
      pipeline::Workspace ws(cfg);
      const auto& params = ws.scorer(mode);
      simnet::CheckpointInfo info;
      simnet::load_checkpoint(cfg.output_dir / "checkpoints" / simnet::mode_name(mode), &info);
      simnet::save_checkpoint(train_out, params, info);
      fs::remove_all(cfg.output_dir);
      for (const auto& e : info.log)
        std::cout << "epoch " << e.epoch << " lr " << e.learning_rate << " loss " << e.mean_loss << '\n';
    } else if (*tune) {
      auto cfg = load(tune_c);
      pipeline::Workspace ws(cfg);
      const auto tuned = ws.tune(ws.similarities(pipeline::Split::kValidation));
      pipeline::write_tuning_log(fs::path(tune_out) / "tuning.tsv", tuned.search);
      open_out(fs::path(tune_out) / "tuned.cfg") << "preference = " << format_double(tuned.preference) << '\n'
                                                 << "threshold = " << format_double(tuned.threshold.threshold)
                                                 << '\n';
      std::cout << "preference " << format_double(tuned.preference) << " threshold "
                << format_double(tuned.threshold.threshold) << '\n';
    } else if (*cluster) {
      auto cfg = load(cluster_c);
      pipeline::Workspace ws(cfg);
      const auto sims = ws.similarities(pipeline::parse_split(cluster_split));
      pipeline::write_clusters(cluster_out, sims, ws.cluster_all(sims, cluster_pref));
    } else if (*evaluate) {
      auto cfg = load(eval_c);
      pipeline::Workspace ws(cfg);
      const auto sims = ws.similarities(pipeline::Split::kTest);
      auto r = eval::evaluate_split(ws.evaluations(sims, ws.cluster_all(sims, eval_pref)), eval_threshold, cfg.eval);
      r.method = pipeline::method_name(cfg.method);
      r.preference = eval_pref;
      open_out(eval_out) << eval::to_json({r}) << '\n';
      std::cout << eval::format_table({r});
    } else if (*report) {
      std::vector<eval::EvalReport> all;
      for (const auto& p : report_inputs) {
        std::ifstream in(p);
        if (!in) throw std::runtime_error("cannot open " + p);
        std::stringstream ss;
        ss << in.rdbuf();
        const auto rs = eval::reports_from_json(ss.str());
        all.insert(all.end(), rs.begin(), rs.end());
      }
      std::cout << eval::format_table(all);
      if (!report_json.empty()) open_out(report_json) << eval::to_json(all) << '\n';
    } else if (*run) {
      const auto r = pipeline::run_pipeline(load(run_c));
      std::cout << eval::format_table({r});
    } else if (*attn) {
      auto cfg = load(attn_c);
      pipeline::Workspace ws(cfg);
      pipeline::emit_attention(ws, attn_image, attn_entities[0], attn_entities[1], attn_ckpt, attn_out);
    } else if (*toy) {
      synth::ToyOptions o;
      o.seed = toy_seed;
      synth::write_toy_corpus(synth::make_toy_corpus(o), toy_out);
      std::cout << "wrote " << (fs::path(toy_out) / "toy.cfg").string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
