#pragma once

// Shared test fixtures: the 5-paper/4-dataset toy graph, raw-file writers and
// small random model instances.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stoprec/corpus.hpp"
#include "stoprec/fusion.hpp"
#include "stoprec/topic_model.hpp"

namespace fixtures {

namespace fs = std::filesystem;

inline fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("stoprec_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Raw input files for the toy graph: papers p1..p5, datasets d1..d4.
// p1 -> d1, d2; p3 -> d2, d3; p5 -> d4; p2 -> d1; p4 -> d3.
// Citations: p2->p1, p3->p2, p4->p3, p5->p4, p5->p1.
inline void write_toy_files(const fs::path& dir) {
  {
    std::ofstream f(dir / "papers.jsonl");
    f << R"({"id":"p1","year":2010,"title":"graph topic models","abstract":"latent topics over citation graphs"})"
      << "\n"
      << R"({"id":"p2","year":2011,"title":"dataset search engines","abstract":"finding datasets for research graphs"})"
      << "\n"
      << R"({"id":"p3","year":2012,"title":"embedding citation graphs","abstract":"topics and embeddings for graphs"})"
      << "\n"
      << R"({"id":"p4","year":2013,"title":"topic embeddings","abstract":"joint topics datasets graphs"})"
      << "\n"
      << R"({"id":"p5","year":2014,"title":"recommending datasets","abstract":"dataset recommendation with topics"})"
      << "\n";
  }
  {
    std::ofstream f(dir / "citations.tsv");
    f << "p2\tp1\np3\tp2\np4\tp3\np5\tp4\np5\tp1\n";
  }
  {
    std::ofstream f(dir / "links.tsv");
    f << "p1\td1\np1\td2\np3\td2\np3\td3\np5\td4\np2\td1\np4\td3\n";
  }
}

inline std::pair<stoprec::HeteroGraph, stoprec::Vocabulary> toy_graph() {
  fs::path dir = fresh_dir("toy_graph");
  write_toy_files(dir);
  stoprec::VocabConfig vc;
  vc.min_count = 1;
  return stoprec::load_graph((dir / "papers.jsonl").string(), (dir / "citations.tsv").string(),
                             (dir / "links.tsv").string(), vc);
}

// Random instance of the full continuous-parameter problem for gradient and
// loss checks.
struct RandomInstance {
  stoprec::HeteroGraph g;
  stoprec::FusionParams fp;
  stoprec::Matrix psi_w, psi_d;
  stoprec::TopicState state;
  stoprec::SufficientStats stats;
  stoprec::PairSet pairs;
};

inline RandomInstance random_instance(int n_papers, int n_datasets, int vocab, int K,
                                      std::uint64_t seed) {
  RandomInstance ins;
  stoprec::Rng rng(seed);
  for (int p = 0; p < n_papers; ++p) {
    ins.g.paper_ids.push_back("p" + std::to_string(p));
    ins.g.paper_year.push_back(2000 + p);
    std::vector<int> toks;
    int n_tok = 3 + static_cast<int>(rng.below(5));
    for (int t = 0; t < n_tok; ++t) toks.push_back(static_cast<int>(rng.below(vocab)));
    ins.g.tokens.push_back(toks);
    ins.g.textless.push_back(false);
    std::set<int> ds;
    int n_ds = std::min(n_datasets, 1 + static_cast<int>(rng.below(2)));
    while (static_cast<int>(ds.size()) < n_ds) ds.insert(static_cast<int>(rng.below(n_datasets)));
    ins.g.paper_datasets.emplace_back(ds.begin(), ds.end());
  }
  for (int d = 0; d < n_datasets; ++d) ins.g.dataset_ids.push_back("d" + std::to_string(d));
  for (int p = 0; p + 1 < n_papers; ++p) ins.g.citations.emplace_back(p, p + 1);
  ins.g.finalize();

  ins.fp.V = stoprec::Matrix(n_papers, K);
  for (double& v : ins.fp.V.data()) v = rng.uniform(-1.0, 1.0);
  ins.fp.kappa = rng.uniform(0.5, 2.0);
  ins.fp.beta0 = rng.uniform(-0.5, 0.5);
  for (int k = 0; k < K; ++k) ins.fp.beta1.push_back(rng.uniform(-0.5, 0.5));
  ins.psi_w = stoprec::Matrix(K, vocab);
  ins.psi_d = stoprec::Matrix(K, n_datasets);
  for (double& v : ins.psi_w.data()) v = rng.uniform(-0.5, 0.5);
  for (double& v : ins.psi_d.data()) v = rng.uniform(-0.5, 0.5);

  ins.state.psi_w = ins.psi_w;
  ins.state.psi_d = ins.psi_d;
  stoprec::init_assignments(ins.state, ins.g, K, rng);
  ins.stats = stoprec::recount_stats(ins.g, ins.state, K);
  try {
    ins.pairs = stoprec::PairSet::from_graph(ins.g, seed * 31 + 7);
  } catch (const stoprec::CorpusError&) {
    // Tiny graphs can lack enough non-edges; positives alone suffice there.
    ins.pairs.positives = ins.g.citations;
  }
  return ins;
}

}  // namespace fixtures
