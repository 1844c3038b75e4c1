#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "stoprec/corpus.hpp"

using namespace stoprec;
namespace fs = std::filesystem;

TEST_CASE("tokenize lowercases, splits and filters") {
  auto toks = tokenize("The Quick-Brown FOX, a fox!");
  CHECK(toks == std::vector<std::string>{"quick", "brown", "fox", "fox"});
  CHECK(tokenize("a I of").empty());        // stopwords and short tokens
  CHECK(tokenize("x2 CNN-based").size() == 3);  // "x2", "cnn", "based"
}

TEST_CASE("load_graph builds the toy graph") {
  auto [g, vocab] = fixtures::toy_graph();
  CHECK(g.n_papers() == 5);
  CHECK(g.n_datasets() == 4);
  CHECK(g.citations.size() == 5);
  CHECK(vocab.size() > 0);
  // Dataset ids densified in sorted order.
  CHECK(g.dataset_ids == std::vector<std::string>{"d1", "d2", "d3", "d4"});
  int p1 = g.paper_index_of("p1");
  REQUIRE(p1 >= 0);
  CHECK(g.paper_datasets[p1] == std::vector<int>{0, 1});
  // Vocabulary is sorted alphabetically.
  for (int i = 1; i < vocab.size(); ++i) CHECK(vocab.words[i - 1] < vocab.words[i]);
}

TEST_CASE("load_graph rejects dangling endpoints naming them") {
  auto dir = fixtures::fresh_dir("dangling");
  fixtures::write_toy_files(dir);
  {
    std::ofstream f(dir / "citations.tsv", std::ios::app);
    f << "p1\tp999\n";
  }
  VocabConfig vc;
  vc.min_count = 1;
  try {
    load_graph((dir / "papers.jsonl").string(), (dir / "citations.tsv").string(),
               (dir / "links.tsv").string(), vc);
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find("p999") != std::string::npos);
  }
}

TEST_CASE("malformed TSV line reports line number") {
  auto dir = fixtures::fresh_dir("malformed");
  fixtures::write_toy_files(dir);
  {
    std::ofstream f(dir / "citations.tsv", std::ios::app);
    f << "no_tab_here\n";
  }
  VocabConfig vc;
  vc.min_count = 1;
  try {
    load_graph((dir / "papers.jsonl").string(), (dir / "citations.tsv").string(),
               (dir / "links.tsv").string(), vc);
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find(":6") != std::string::npos);
  }
}

TEST_CASE("isolated papers are removed") {
  auto dir = fixtures::fresh_dir("isolated");
  {
    std::ofstream f(dir / "papers.jsonl");
    f << R"({"id":"a","year":2000,"title":"alpha words"})" << "\n"
      << R"({"id":"b","year":2001,"title":"beta words"})" << "\n"
      << R"({"id":"c","year":2002,"title":"gamma words"})" << "\n";
  }
  {
    std::ofstream f(dir / "citations.tsv");
    f << "a\tb\n";
  }
  {
    std::ofstream f(dir / "links.tsv");
    f << "a\td1\n";
  }
  VocabConfig vc;
  vc.min_count = 1;
  auto [g, vocab] = load_graph((dir / "papers.jsonl").string(), (dir / "citations.tsv").string(),
                               (dir / "links.tsv").string(), vc);
  CHECK(g.n_papers() == 2);
  CHECK(g.paper_index_of("c") == -1);
}

TEST_CASE("self-citations and duplicate links are dropped silently") {
  auto dir = fixtures::fresh_dir("selfcite");
  fixtures::write_toy_files(dir);
  {
    std::ofstream f(dir / "citations.tsv", std::ios::app);
    f << "p1\tp1\np2\tp1\n";  // self-cite plus duplicate
  }
  {
    std::ofstream f(dir / "links.tsv", std::ios::app);
    f << "p1\td1\n";  // duplicate link
  }
  VocabConfig vc;
  vc.min_count = 1;
  auto [g, vocab] = load_graph((dir / "papers.jsonl").string(), (dir / "citations.tsv").string(),
                               (dir / "links.tsv").string(), vc);
  CHECK(g.citations.size() == 5);
  CHECK(g.paper_datasets[g.paper_index_of("p1")] == std::vector<int>{0, 1});
}

TEST_CASE("corpus save/load round-trips exactly") {
  auto [g, vocab] = fixtures::toy_graph();
  auto dir = fixtures::fresh_dir("roundtrip");
  save_corpus(g, vocab, (dir / "c.json").string());
  auto [g2, v2] = load_corpus((dir / "c.json").string());
  CHECK(g2.paper_ids == g.paper_ids);
  CHECK(g2.paper_year == g.paper_year);
  CHECK(g2.dataset_ids == g.dataset_ids);
  CHECK(g2.citations == g.citations);
  CHECK(g2.paper_datasets == g.paper_datasets);
  CHECK(g2.tokens == g.tokens);
  CHECK(v2.words == vocab.words);
  CHECK(v2.doc_freq == vocab.doc_freq);
}

TEST_CASE("split_by_year is inclusive at the cutoff") {
  auto [g, vocab] = fixtures::toy_graph();
  auto split = split_by_year(g, 2012);  // years 2010..2014
  CHECK(split.train.n_papers() == 3);
  CHECK(split.held_out.size() == 2);
  CHECK_FALSE(split.held_out_empty_warning);
  // Train dataset universe shrinks to datasets linked by train papers.
  std::set<std::string> ids(split.train.dataset_ids.begin(), split.train.dataset_ids.end());
  CHECK(ids == std::set<std::string>{"d1", "d2", "d3"});

  auto all = split_by_year(g, 2014);
  CHECK(all.train.n_papers() == 5);
  CHECK(all.held_out_empty_warning);

  CHECK_THROWS_AS(split_by_year(g, 1999), CorpusError);
  CHECK_THROWS_AS(split_by_year(g, 2020), CorpusError);
}

TEST_CASE("build_queries keeps train references and drops unknown ground truth") {
  auto [g, vocab] = fixtures::toy_graph();
  auto split = split_by_year(g, 2012);  // train p1..p3
  auto qs = build_queries(split.train, split.held_out);
  // p4 cites p3 (train), uses d3 (in train): one query.
  // p5 cites p4 (held out) and p1 (train), uses d4 (unknown to train): skipped.
  CHECK(qs.queries.size() == 1);
  CHECK(qs.skipped == 1);
  CHECK(qs.dropped_ground_truth == 1);
  CHECK(qs.queries[0].query_papers ==
        std::vector<int>{split.train.paper_index_of("p3")});
  CHECK(qs.queries[0].ground_truth ==
        std::vector<int>{split.train.dataset_index_of("d3")});
}

TEST_CASE("queries save/load round-trips via string ids") {
  auto [g, vocab] = fixtures::toy_graph();
  QuerySet qs;
  Query q;
  q.query_papers = {g.paper_index_of("p1"), g.paper_index_of("p3")};
  q.ground_truth = {g.dataset_index_of("d2")};
  qs.queries.push_back(q);
  auto dir = fixtures::fresh_dir("queries");
  save_queries(qs, g, (dir / "q.jsonl").string());
  auto back = load_queries((dir / "q.jsonl").string(), g);
  REQUIRE(back.queries.size() == 1);
  CHECK(back.queries[0].query_papers == q.query_papers);
  CHECK(back.queries[0].ground_truth == q.ground_truth);
}

TEST_CASE("sample_negative_pairs count contract on a path graph") {
  HeteroGraph g;
  for (int i = 0; i < 3; ++i) {
    g.paper_ids.push_back("p" + std::to_string(i));
    g.paper_year.push_back(2000);
    g.tokens.push_back({});
    g.textless.push_back(true);
    g.paper_datasets.push_back({});
  }
  g.citations = {{0, 1}, {1, 2}};
  g.finalize();
  auto negs = sample_negative_pairs(g, 7);
  REQUIRE(negs.size() == 2);
  // The only ordered non-edges are (0,2) and (2,0).
  std::set<std::pair<int, int>> got(negs.begin(), negs.end());
  CHECK(got == std::set<std::pair<int, int>>{{0, 2}, {2, 0}});
}

TEST_CASE("sample_negative_pairs rejects graphs too dense for the quota") {
  HeteroGraph g;
  for (int i = 0; i < 3; ++i) {
    g.paper_ids.push_back("p" + std::to_string(i));
    g.paper_year.push_back(2000);
    g.tokens.push_back({});
    g.textless.push_back(true);
    g.paper_datasets.push_back({});
  }
  g.citations = {{0, 1}, {1, 2}, {0, 2}};  // complete
  g.finalize();
  CHECK_THROWS_AS(sample_negative_pairs(g, 1), CorpusError);
}

TEST_CASE("sample_negative_pairs is deterministic per seed") {
  auto [g, vocab] = fixtures::toy_graph();
  CHECK(sample_negative_pairs(g, 7) == sample_negative_pairs(g, 7));
  CHECK(sample_negative_pairs(g, 7) != sample_negative_pairs(g, 8));
}

TEST_CASE("planted corpus determinism") {
  auto a = generate_planted_corpus(4, 60, 12, 80, 1);
  auto b = generate_planted_corpus(4, 60, 12, 80, 1);
  CHECK(a.graph.tokens == b.graph.tokens);
  CHECK(a.graph.citations == b.graph.citations);
  CHECK(a.graph.paper_datasets == b.graph.paper_datasets);
  CHECK(a.truth.paper_topic == b.truth.paper_topic);
  REQUIRE(a.queries.queries.size() == b.queries.queries.size());
  for (std::size_t i = 0; i < a.queries.queries.size(); ++i) {
    CHECK(a.queries.queries[i].query_papers == b.queries.queries[i].query_papers);
    CHECK(a.queries.queries[i].ground_truth == b.queries.queries[i].ground_truth);
  }
}

TEST_CASE("planted corpus with one topic has a single community") {
  auto c = generate_planted_corpus(1, 20, 5, 30, 2);
  for (int t : c.truth.paper_topic) CHECK(t == 0);
  CHECK(c.graph.citations.size() > 0);
}

TEST_CASE("planted within-topic citation fraction matches the mixing rate") {
  auto c = generate_planted_corpus(2, 50, 10, 100, 3);
  int within = 0;
  for (auto [s, d] : c.graph.citations)
    if (c.truth.paper_topic[s] == c.truth.paper_topic[d]) ++within;
  double n = static_cast<double>(c.graph.citations.size());
  double rate = c.config.within_citation_rate;
  // Cross-topic draws can still land in-topic only via the within branch, so
  // the observed fraction is Binomial(n, rate); allow 3 sigma.
  double sigma = std::sqrt(rate * (1.0 - rate) / n);
  CHECK(std::abs(within / n - rate) < 3.0 * sigma + 1e-9);
}

TEST_CASE("planted queries reference same-topic papers") {
  auto c = generate_planted_corpus(4, 80, 16, 100, 5);
  for (const auto& q : c.queries.queries) {
    REQUIRE_FALSE(q.query_papers.empty());
    int k = c.truth.paper_topic[q.query_papers[0]];
    for (int p : q.query_papers) CHECK(c.truth.paper_topic[p] == k);
  }
}
