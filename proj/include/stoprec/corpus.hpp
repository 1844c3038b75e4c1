#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stoprec/common.hpp"

namespace stoprec {

struct Vocabulary {
  std::vector<std::string> words;  // dense index -> word
  std::unordered_map<std::string, int> index;
  std::vector<int> doc_freq;
  int min_count = 3;

  int size() const { return static_cast<int>(words.size()); }

  void rebuild_index() {
    index.clear();
    for (int i = 0; i < size(); ++i) index[words[i]] = i;
  }
};

// The attributed heterogeneous graph: papers with text, datasets, citations
// among papers and paper->dataset usage links. Node ids are densified; the
// original string ids are kept for I/O and reporting.
struct HeteroGraph {
  std::vector<std::string> paper_ids;
  std::vector<int> paper_year;
  std::vector<std::string> dataset_ids;
  std::vector<std::pair<int, int>> citations;          // directed src -> dst
  std::vector<std::vector<int>> paper_datasets;        // D_p lists, no duplicates
  std::vector<std::vector<int>> tokens;                // token-id sequence per paper
  std::vector<bool> textless;                          // no tokens after preprocessing

  // Derived adjacency, built by finalize().
  std::vector<std::vector<int>> cite_out;
  std::vector<std::vector<int>> cite_in;
  std::vector<std::vector<int>> neighbors;  // symmetrized, sorted, unique

  int n_papers() const { return static_cast<int>(paper_ids.size()); }
  int n_datasets() const { return static_cast<int>(dataset_ids.size()); }

  int paper_index_of(const std::string& id) const {
    auto it = paper_index_.find(id);
    return it == paper_index_.end() ? -1 : it->second;
  }
  int dataset_index_of(const std::string& id) const {
    auto it = dataset_index_.find(id);
    return it == dataset_index_.end() ? -1 : it->second;
  }

  // Sparse bag-of-words row for paper p: sorted (word, count) pairs.
  std::vector<std::pair<int, int>> bow(int p) const {
    std::unordered_map<int, int> counts;
    for (int t : tokens[p]) counts[t]++;
    std::vector<std::pair<int, int>> out(counts.begin(), counts.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  void finalize() {
    paper_index_.clear();
    dataset_index_.clear();
    for (int i = 0; i < n_papers(); ++i) paper_index_[paper_ids[i]] = i;
    for (int i = 0; i < n_datasets(); ++i) dataset_index_[dataset_ids[i]] = i;
    cite_out.assign(n_papers(), {});
    cite_in.assign(n_papers(), {});
    neighbors.assign(n_papers(), {});
    for (auto [s, d] : citations) {
      cite_out[s].push_back(d);
      cite_in[d].push_back(s);
      neighbors[s].push_back(d);
      neighbors[d].push_back(s);
    }
    for (auto& v : neighbors) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }

 private:
  std::unordered_map<std::string, int> paper_index_;
  std::unordered_map<std::string, int> dataset_index_;
};

struct Query {
  std::vector<int> query_papers;  // dense paper ids in the train graph
  std::vector<int> ground_truth;  // dense dataset ids
};

struct QuerySet {
  std::vector<Query> queries;
  int skipped = 0;                 // held-out papers that produced no query
  int dropped_ground_truth = 0;    // GT datasets absent from the train graph
};

struct HeldOutPaper {
  std::string id;
  int year = 0;
  std::vector<std::string> references;
  std::vector<std::string> datasets;
};

struct VocabConfig {
  int min_count = 3;
};

namespace detail {

inline const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = {
      "a", "about", "above", "after", "again", "against", "all", "also", "am", "an",
      "and", "any", "are", "as", "at", "be", "because", "been", "before", "being",
      "below", "between", "both", "but", "by", "can", "cannot", "could", "did", "do",
      "does", "doing", "down", "during", "each", "few", "for", "from", "further",
      "had", "has", "have", "having", "he", "her", "here", "hers", "him", "his",
      "how", "if", "in", "into", "is", "it", "its", "itself", "more", "most", "my",
      "no", "nor", "not", "of", "off", "on", "once", "only", "or", "other", "our",
      "ours", "out", "over", "own", "same", "she", "should", "so", "some", "such",
      "than", "that", "the", "their", "theirs", "them", "then", "there", "these",
      "they", "this", "those", "through", "to", "too", "under", "until", "up",
      "very", "was", "we", "were", "what", "when", "where", "which", "while", "who",
      "whom", "why", "will", "with", "would", "you", "your", "yours"};
  return words;
}

}  // namespace detail

// Lowercase, split on non-alphanumerics, drop tokens shorter than 2 chars and
// stopwords. Document-frequency filtering happens at vocabulary build time.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= 2 && !detail::stopwords().count(cur)) out.push_back(cur);
    cur.clear();
  };
  for (char c : text) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

struct CorpusError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Load the heterogeneous graph from the on-disk formats:
//   papers:    JSON lines {"id","year","title","abstract","keywords"}
//   citations: TSV "src<TAB>dst"
//   links:     TSV "paper<TAB>dataset"
// Isolated papers (no citation in either direction and no dataset link) are
// removed and ids densified. Deterministic given the input files.
inline std::pair<HeteroGraph, Vocabulary> load_graph(const std::string& papers_path,
                                                     const std::string& citations_path,
                                                     const std::string& links_path,
                                                     const VocabConfig& vocab_config = {}) {
  std::ifstream pf(papers_path);
  if (!pf) throw CorpusError("cannot open papers file: " + papers_path);

  struct RawPaper {
    std::string id;
    int year;
    std::vector<std::string> raw_tokens;
  };
  std::vector<RawPaper> raw;
  std::unordered_map<std::string, int> raw_index;
  {
    std::string line;
    int lineno = 0;
    while (std::getline(pf, line)) {
      ++lineno;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw CorpusError(papers_path + ":" + std::to_string(lineno) +
                          ": malformed JSON: " + e.what());
      }
      if (!j.contains("id") || !j.contains("year"))
        throw CorpusError(papers_path + ":" + std::to_string(lineno) +
                          ": missing required field id/year");
      RawPaper p;
      p.id = j["id"].get<std::string>();
      p.year = j["year"].get<int>();
      std::string text = j.value("title", std::string{});
      text += ' ';
      text += j.value("abstract", std::string{});
      if (j.contains("keywords"))
        for (const auto& kw : j["keywords"]) {
          text += ' ';
          text += kw.get<std::string>();
        }
      p.raw_tokens = tokenize(text);
      if (raw_index.count(p.id))
        throw CorpusError(papers_path + ":" + std::to_string(lineno) +
                          ": duplicate paper id " + p.id);
      raw_index[p.id] = static_cast<int>(raw.size());
      raw.push_back(std::move(p));
    }
  }

  auto read_tsv = [](const std::string& path) {
    std::ifstream f(path);
    if (!f) throw CorpusError("cannot open file: " + path);
    std::vector<std::pair<std::string, std::string>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
        throw CorpusError(path + ":" + std::to_string(lineno) + ": malformed line");
      rows.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return rows;
  };

  auto cite_rows = read_tsv(citations_path);
  auto link_rows = read_tsv(links_path);

  // Dangling references are a hard error, reported together.
  {
    std::set<std::string> missing;
    for (auto& [s, d] : cite_rows) {
      if (!raw_index.count(s)) missing.insert(s);
      if (!raw_index.count(d)) missing.insert(d);
    }
    for (auto& [p, _] : link_rows)
      if (!raw_index.count(p)) missing.insert(p);
    if (!missing.empty()) {
      std::string msg = "dangling edge endpoint(s):";
      for (auto& m : missing) msg += " " + m;
      throw CorpusError(msg);
    }
  }

  // Vocabulary from document frequency over all papers.
  Vocabulary vocab;
  vocab.min_count = vocab_config.min_count;
  {
    std::unordered_map<std::string, int> df;
    for (const auto& p : raw) {
      std::unordered_set<std::string> uniq(p.raw_tokens.begin(), p.raw_tokens.end());
      for (const auto& w : uniq) df[w]++;
    }
    for (const auto& [w, c] : df)
      if (c >= vocab.min_count) vocab.words.push_back(w);
    std::sort(vocab.words.begin(), vocab.words.end());
    vocab.rebuild_index();
    vocab.doc_freq.resize(vocab.words.size());
    for (int i = 0; i < vocab.size(); ++i) vocab.doc_freq[i] = df[vocab.words[i]];
  }

  // Edge indexing on raw ids.
  std::vector<std::set<int>> linked(raw.size());
  std::vector<std::pair<int, int>> citations;
  {
    std::set<std::pair<int, int>> seen;
    for (auto& [s, d] : cite_rows) {
      int si = raw_index[s], di = raw_index[d];
      if (si == di) continue;  // self-citations dropped
      if (seen.insert({si, di}).second) citations.emplace_back(si, di);
    }
    std::vector<std::string> ds;
    std::unordered_map<std::string, int> dix;
    for (auto& [p, d] : link_rows) {
      if (!dix.count(d)) {
        dix[d] = static_cast<int>(ds.size());
        ds.push_back(d);
      }
      linked[raw_index[p]].insert(dix[d]);
    }
    // Datasets densified in sorted-id order for determinism.
    std::vector<std::string> sorted_ds = ds;
    std::sort(sorted_ds.begin(), sorted_ds.end());
    std::unordered_map<int, int> remap;
    for (int i = 0; i < static_cast<int>(sorted_ds.size()); ++i)
      remap[dix[sorted_ds[i]]] = i;
    for (auto& s : linked) {
      std::set<int> r;
      for (int d : s) r.insert(remap[d]);
      s = std::move(r);
    }
    ds = std::move(sorted_ds);

    // Isolated-paper removal (runs after vocabulary filtering; isolation is
    // edge-based so the filter cannot create it).
    std::vector<bool> has_edge(raw.size(), false);
    for (auto [s, d] : citations) has_edge[s] = has_edge[d] = true;
    for (std::size_t p = 0; p < raw.size(); ++p)
      if (!linked[p].empty()) has_edge[p] = true;

    HeteroGraph g;
    std::vector<int> newid(raw.size(), -1);
    for (std::size_t p = 0; p < raw.size(); ++p) {
      if (!has_edge[p]) continue;
      newid[p] = g.n_papers();
      g.paper_ids.push_back(raw[p].id);
      g.paper_year.push_back(raw[p].year);
      std::vector<int> toks;
      for (const auto& w : raw[p].raw_tokens) {
        auto it = vocab.index.find(w);
        if (it != vocab.index.end()) toks.push_back(it->second);
      }
      g.textless.push_back(toks.empty());
      g.tokens.push_back(std::move(toks));
      g.paper_datasets.emplace_back(linked[p].begin(), linked[p].end());
    }
    g.dataset_ids = ds;
    for (auto [s, d] : citations)
      if (newid[s] >= 0 && newid[d] >= 0) g.citations.emplace_back(newid[s], newid[d]);
    g.finalize();
    return {std::move(g), std::move(vocab)};
  }
}

// ---------------------------------------------------------------------------
// Corpus persistence (single JSON file; round-trips exactly).

inline void save_corpus(const HeteroGraph& g, const Vocabulary& v, const std::string& path) {
  nlohmann::json j;
  j["format"] = "stoprec-corpus-v1";
  j["paper_ids"] = g.paper_ids;
  j["paper_year"] = g.paper_year;
  j["dataset_ids"] = g.dataset_ids;
  nlohmann::json cits = nlohmann::json::array();
  for (auto [s, d] : g.citations) cits.push_back({s, d});
  j["citations"] = std::move(cits);
  j["paper_datasets"] = g.paper_datasets;
  j["tokens"] = g.tokens;
  j["vocab_words"] = v.words;
  j["vocab_doc_freq"] = v.doc_freq;
  j["vocab_min_count"] = v.min_count;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CorpusError("cannot write corpus file: " + path);
  f << j.dump() << '\n';
}

inline std::pair<HeteroGraph, Vocabulary> load_corpus(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CorpusError("cannot open corpus file: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CorpusError("malformed corpus file " + path + ": " + e.what());
  }
  if (j.value("format", std::string{}) != "stoprec-corpus-v1")
    throw CorpusError("unrecognized corpus format in " + path);
  HeteroGraph g;
  g.paper_ids = j["paper_ids"].get<std::vector<std::string>>();
  g.paper_year = j["paper_year"].get<std::vector<int>>();
  g.dataset_ids = j["dataset_ids"].get<std::vector<std::string>>();
  for (const auto& e : j["citations"])
    g.citations.emplace_back(e[0].get<int>(), e[1].get<int>());
  g.paper_datasets = j["paper_datasets"].get<std::vector<std::vector<int>>>();
  g.tokens = j["tokens"].get<std::vector<std::vector<int>>>();
  g.textless.resize(g.tokens.size());
  for (std::size_t p = 0; p < g.tokens.size(); ++p) g.textless[p] = g.tokens[p].empty();
  g.finalize();
  Vocabulary v;
  v.words = j["vocab_words"].get<std::vector<std::string>>();
  v.doc_freq = j["vocab_doc_freq"].get<std::vector<int>>();
  v.min_count = j["vocab_min_count"].get<int>();
  v.rebuild_index();
  return {std::move(g), std::move(v)};
}

// ---------------------------------------------------------------------------
// Train/query split and query construction.

struct YearSplit {
  HeteroGraph train;
  std::vector<HeldOutPaper> held_out;
  bool held_out_empty_warning = false;
};

inline YearSplit split_by_year(const HeteroGraph& g, int cutoff_year) {
  if (g.n_papers() == 0) throw CorpusError("split_by_year: empty graph");
  int lo = *std::min_element(g.paper_year.begin(), g.paper_year.end());
  int hi = *std::max_element(g.paper_year.begin(), g.paper_year.end());
  if (cutoff_year < lo || cutoff_year > hi)
    throw CorpusError("split_by_year: cutoff " + std::to_string(cutoff_year) +
                      " outside observed year range [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");

  YearSplit out;
  std::vector<int> newid(g.n_papers(), -1);
  for (int p = 0; p < g.n_papers(); ++p) {
    if (g.paper_year[p] > cutoff_year) continue;
    newid[p] = out.train.n_papers();
    out.train.paper_ids.push_back(g.paper_ids[p]);
    out.train.paper_year.push_back(g.paper_year[p]);
    out.train.tokens.push_back(g.tokens[p]);
    out.train.textless.push_back(g.textless[p]);
  }

  // Train dataset universe: datasets linked by at least one train paper.
  std::set<int> used;
  for (int p = 0; p < g.n_papers(); ++p)
    if (newid[p] >= 0)
      for (int d : g.paper_datasets[p]) used.insert(d);
  std::vector<int> dmap(g.n_datasets(), -1);
  for (int d : used) {
    dmap[d] = out.train.n_datasets();
    out.train.dataset_ids.push_back(g.dataset_ids[d]);
  }
  for (int p = 0; p < g.n_papers(); ++p) {
    if (newid[p] < 0) continue;
    std::vector<int> ds;
    for (int d : g.paper_datasets[p]) ds.push_back(dmap[d]);
    std::sort(ds.begin(), ds.end());
    out.train.paper_datasets.push_back(std::move(ds));
  }
  for (auto [s, d] : g.citations)
    if (newid[s] >= 0 && newid[d] >= 0)
      out.train.citations.emplace_back(newid[s], newid[d]);
  out.train.finalize();

  for (int p = 0; p < g.n_papers(); ++p) {
    if (newid[p] >= 0) continue;
    HeldOutPaper h;
    h.id = g.paper_ids[p];
    h.year = g.paper_year[p];
    for (int q : g.cite_out[p]) h.references.push_back(g.paper_ids[q]);
    for (int d : g.paper_datasets[p]) h.datasets.push_back(g.dataset_ids[d]);
    out.held_out.push_back(std::move(h));
  }
  out.held_out_empty_warning = out.held_out.empty();
  return out;
}

// One query per held-out paper: query_papers = references that exist in the
// train graph, ground_truth = the paper's dataset links. Papers failing the
// filter are skipped; ground-truth datasets unknown to the train graph are
// dropped (and counted).
inline QuerySet build_queries(const HeteroGraph& train,
                              const std::vector<HeldOutPaper>& held_out) {
  QuerySet qs;
  for (const auto& h : held_out) {
    Query q;
    for (const auto& r : h.references) {
      int idx = train.paper_index_of(r);
      if (idx >= 0) q.query_papers.push_back(idx);
    }
    for (const auto& d : h.datasets) {
      int idx = train.dataset_index_of(d);
      if (idx >= 0)
        q.ground_truth.push_back(idx);
      else
        qs.dropped_ground_truth++;
    }
    std::sort(q.query_papers.begin(), q.query_papers.end());
    std::sort(q.ground_truth.begin(), q.ground_truth.end());
    if (q.query_papers.empty() || q.ground_truth.empty()) {
      qs.skipped++;
      continue;
    }
    qs.queries.push_back(std::move(q));
  }
  return qs;
}

inline void save_queries(const QuerySet& qs, const HeteroGraph& g, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CorpusError("cannot write queries file: " + path);
  for (const auto& q : qs.queries) {
    nlohmann::json j;
    std::vector<std::string> ps, ds;
    for (int p : q.query_papers) ps.push_back(g.paper_ids[p]);
    for (int d : q.ground_truth) ds.push_back(g.dataset_ids[d]);
    j["query_papers"] = ps;
    j["ground_truth"] = ds;
    f << j.dump() << '\n';
  }
}

inline QuerySet load_queries(const std::string& path, const HeteroGraph& g) {
  std::ifstream f(path);
  if (!f) throw CorpusError("cannot open queries file: " + path);
  QuerySet qs;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw CorpusError(path + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
    }
    Query q;
    for (const auto& p : j.at("query_papers")) {
      int idx = g.paper_index_of(p.get<std::string>());
      if (idx < 0)
        throw CorpusError(path + ":" + std::to_string(lineno) + ": unknown paper " +
                          p.get<std::string>());
      q.query_papers.push_back(idx);
    }
    for (const auto& d : j.at("ground_truth")) {
      int idx = g.dataset_index_of(d.get<std::string>());
      if (idx < 0) {
        qs.dropped_ground_truth++;
        continue;
      }
      q.ground_truth.push_back(idx);
    }
    if (q.query_papers.empty() || q.ground_truth.empty()) {
      qs.skipped++;
      continue;
    }
    qs.queries.push_back(std::move(q));
  }
  return qs;
}

// ---------------------------------------------------------------------------
// Negative paper-pair sampling for the pairwise link model. Returns exactly
// |citations| ordered pairs (i, j) that are not citations in either direction
// and not self-pairs; deterministic per seed.

inline std::vector<std::pair<int, int>> sample_negative_pairs(const HeteroGraph& g,
                                                              std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(g.n_papers());
  if (n < 2) throw CorpusError("sample_negative_pairs: need at least 2 papers");

  std::set<std::pair<int, int>> edges;  // undirected lookup
  for (auto [s, d] : g.citations) edges.insert({std::min(s, d), std::max(s, d)});
  const std::size_t want = g.citations.size();
  const std::size_t available = n * (n - 1) - 2 * edges.size();
  if (available < want)
    throw CorpusError("sample_negative_pairs: graph too dense to supply " +
                      std::to_string(want) + " non-edges");

  Rng rng(seed);
  std::set<std::pair<int, int>> chosen;
  std::vector<std::pair<int, int>> out;
  std::size_t attempts = 0;
  const std::size_t max_attempts = 200 * want + 1000;
  while (out.size() < want && attempts < max_attempts) {
    ++attempts;
    int i = static_cast<int>(rng.below(n));
    int j = static_cast<int>(rng.below(n));
    if (i == j) continue;
    auto pair = std::make_pair(i, j);
    if (edges.count({std::min(i, j), std::max(i, j)}) || chosen.count(pair)) continue;
    chosen.insert(pair);
    out.push_back(pair);
  }
  if (out.size() < want) {
    // Dense graph fallback: enumerate remaining non-edges deterministically.
    for (int i = 0; i < static_cast<int>(n) && out.size() < want; ++i)
      for (int j = 0; j < static_cast<int>(n) && out.size() < want; ++j) {
        if (i == j) continue;
        auto pair = std::make_pair(i, j);
        if (!edges.count({std::min(i, j), std::max(i, j)}) && !chosen.count(pair)) {
          chosen.insert(pair);
          out.push_back(pair);
        }
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic planted-topic corpus for end-to-end verification. Every paper has
// a dominant topic; words, dataset links and citations are drawn from
// topic-conditioned distributions with known parameters.

struct PlantedConfig {
  int tokens_per_paper = 60;
  int min_links = 1, max_links = 3;
  int cites_per_paper = 4;
  double within_citation_rate = 0.9;  // probability a citation stays in-topic
  double word_concentration = 0.85;   // probability a token comes from the topic's block
  double dataset_concentration = 0.85;
  int n_queries = 0;  // 0 -> max(5, n_papers / 10)
  int query_size = 3;
  int min_gt = 2, max_gt = 4;
};

struct PlantedTruth {
  std::vector<int> paper_topic;
  Matrix word_dist;     // n_topics x vocab_size
  Matrix dataset_dist;  // n_topics x n_datasets
};

struct PlantedCorpus {
  HeteroGraph graph;
  Vocabulary vocab;
  QuerySet queries;
  PlantedTruth truth;
  PlantedConfig config;
};

inline PlantedCorpus generate_planted_corpus(int n_topics, int n_papers, int n_datasets,
                                             int vocab_size, std::uint64_t seed,
                                             const PlantedConfig& cfg = {}) {
  if (n_topics < 2 && n_topics != 1)
    throw CorpusError("generate_planted_corpus: n_topics must be >= 1");
  if (n_papers < 2 * n_topics || n_datasets < n_topics || vocab_size < n_topics)
    throw CorpusError("generate_planted_corpus: sizes too small for topic count");

  PlantedCorpus out;
  out.config = cfg;
  Rng rng(seed);

  auto pad = [](const char* prefix, int i, int width) {
    std::string s = std::to_string(i);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return std::string(prefix) + s;
  };

  // Block-structured topic distributions with uniform background mass. The
  // in-block dataset mass decays harmonically so each topic has a clear head
  // ordering; word mass stays uniform within the block.
  auto block_dist = [&](int n_items, int topic, bool decay) {
    std::vector<double> d(n_items, 0.0);
    int block = n_items / n_topics;
    int lo = topic * block;
    int hi = (topic == n_topics - 1) ? n_items : lo + block;
    double conc = (n_items == vocab_size) ? cfg.word_concentration : cfg.dataset_concentration;
    double denom = 0.0;
    for (int i = lo; i < hi; ++i) denom += decay ? 1.0 / (1.0 + (i - lo)) : 1.0;
    for (int i = 0; i < n_items; ++i) {
      bool in_block = i >= lo && i < hi;
      double w = in_block ? (decay ? 1.0 / (1.0 + (i - lo)) : 1.0) / denom : 0.0;
      d[i] = conc * w + (1.0 - conc) / n_items;
    }
    return d;
  };

  out.truth.word_dist = Matrix(n_topics, vocab_size);
  out.truth.dataset_dist = Matrix(n_topics, n_datasets);
  for (int k = 0; k < n_topics; ++k) {
    auto wd = block_dist(vocab_size, k, false);
    auto dd = block_dist(n_datasets, k, true);
    for (int j = 0; j < vocab_size; ++j) out.truth.word_dist(k, j) = wd[j];
    for (int i = 0; i < n_datasets; ++i) out.truth.dataset_dist(k, i) = dd[i];
  }

  HeteroGraph& g = out.graph;
  for (int p = 0; p < n_papers; ++p) {
    g.paper_ids.push_back(pad("p", p, 4));
    g.paper_year.push_back(2000 + p % 10);
    out.truth.paper_topic.push_back(p % n_topics);
  }
  for (int d = 0; d < n_datasets; ++d) g.dataset_ids.push_back(pad("d", d, 3));
  out.vocab.min_count = 1;
  for (int w = 0; w < vocab_size; ++w) out.vocab.words.push_back(pad("w", w, 4));
  out.vocab.rebuild_index();
  out.vocab.doc_freq.assign(vocab_size, 0);

  // Tokens and dataset links.
  for (int p = 0; p < n_papers; ++p) {
    int k = out.truth.paper_topic[p];
    std::vector<int> toks;
    for (int t = 0; t < cfg.tokens_per_paper; ++t)
      toks.push_back(static_cast<int>(rng.categorical(out.truth.word_dist.row(k))));
    g.tokens.push_back(std::move(toks));
    g.textless.push_back(false);

    int n_links = cfg.min_links + static_cast<int>(rng.below(cfg.max_links - cfg.min_links + 1));
    std::set<int> links;
    int guard = 0;
    while (static_cast<int>(links.size()) < n_links && guard++ < 1000)
      links.insert(static_cast<int>(rng.categorical(out.truth.dataset_dist.row(k))));
    g.paper_datasets.emplace_back(links.begin(), links.end());
  }
  {
    std::vector<std::set<int>> df(vocab_size);
    for (int p = 0; p < n_papers; ++p)
      for (int t : g.tokens[p]) df[t].insert(p);
    for (int w = 0; w < vocab_size; ++w)
      out.vocab.doc_freq[w] = static_cast<int>(df[w].size());
  }

  // Planted-partition citations.
  std::vector<std::vector<int>> by_topic(n_topics);
  for (int p = 0; p < n_papers; ++p) by_topic[out.truth.paper_topic[p]].push_back(p);
  std::set<std::pair<int, int>> cite_set;
  for (int p = 0; p < n_papers; ++p) {
    int k = out.truth.paper_topic[p];
    for (int c = 0; c < cfg.cites_per_paper; ++c) {
      bool within = n_topics == 1 || rng.bernoulli(cfg.within_citation_rate);
      int target = -1;
      int guard = 0;
      while (guard++ < 1000) {
        if (within) {
          target = by_topic[k][rng.below(by_topic[k].size())];
        } else {
          target = static_cast<int>(rng.below(n_papers));
          if (out.truth.paper_topic[target] == k) continue;
        }
        if (target != p && !cite_set.count({p, target})) break;
      }
      if (target >= 0 && target != p && !cite_set.count({p, target})) {
        cite_set.insert({p, target});
        g.citations.emplace_back(p, target);
      }
    }
  }
  g.finalize();

  // Held-out queries: same-topic train papers as "references", topic-drawn
  // datasets as ground truth.
  int n_queries = cfg.n_queries > 0 ? cfg.n_queries : std::max(5, n_papers / 10);
  for (int qi = 0; qi < n_queries; ++qi) {
    int k = qi % n_topics;
    Query q;
    std::set<int> qpapers;
    int guard = 0;
    while (static_cast<int>(qpapers.size()) < cfg.query_size && guard++ < 1000)
      qpapers.insert(by_topic[k][rng.below(by_topic[k].size())]);
    q.query_papers.assign(qpapers.begin(), qpapers.end());
    int n_gt = cfg.min_gt + static_cast<int>(rng.below(cfg.max_gt - cfg.min_gt + 1));
    std::set<int> gt;
    guard = 0;
    while (static_cast<int>(gt.size()) < n_gt && guard++ < 1000)
      gt.insert(static_cast<int>(rng.categorical(out.truth.dataset_dist.row(k))));
    q.ground_truth.assign(gt.begin(), gt.end());
    out.queries.queries.push_back(std::move(q));
  }
  return out;
}

}  // namespace stoprec
