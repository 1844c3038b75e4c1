// Command-line entry points for the dataset recommendation engine: corpus
// ingestion, pretraining, joint training, querying, evaluation, topic
// profiles, synthetic corpus generation and a minimal HTTP endpoint.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stoprec/corpus.hpp"
#include "stoprec/fusion.hpp"
#include "stoprec/model_io.hpp"
#include "stoprec/recommender.hpp"
#include "stoprec/serve.hpp"

namespace fs = std::filesystem;
using namespace stoprec;

namespace {

int log_level() {
  const char* env = std::getenv("STOPREC_LOG");
  if (!env) return 1;
  std::string v(env);
  if (v == "quiet" || v == "error") return 0;
  if (v == "debug") return 2;
  return 1;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << msg << '\n';
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string corpus_file(const std::string& path) {
  if (fs::is_directory(path)) return (fs::path(path) / "corpus.json").string();
  return path;
}

void write_output(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content;
  } else {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write output file: " + out_path);
    f << content;
  }
}

struct TrainFlags {
  std::string corpus;
  std::string out;
  TrainConfig cfg;
};

void add_train_options(CLI::App* cmd, TrainFlags& fl) {
  cmd->add_option("--corpus", fl.corpus, "Corpus directory or corpus.json")->required();
  cmd->add_option("--out", fl.out, "Output model directory")->required();
  cmd->add_option("--k", fl.cfg.K, "Embedding dimension / topic count (even)");
  cmd->add_option("--lambda", fl.cfg.lambda, "Topic modeling weight");
  cmd->add_option("--lambda-p", fl.cfg.lambda_p, "Paper embedding regularizer");
  cmd->add_option("--lambda-d", fl.cfg.lambda_d, "Dataset parameter regularizer");
  cmd->add_option("--lambda-v", fl.cfg.lambda_v, "Word parameter regularizer");
  cmd->add_option("--lambda-w", fl.cfg.lambda_w, "Representation weight regularizer");
  cmd->add_option("--lr", fl.cfg.lr, "Learning rate for representation updates");
  cmd->add_option("--batch", fl.cfg.batch_size, "Mini-batch size");
  cmd->add_option("--epochs", fl.cfg.outer_iters, "Outer training iterations");
  cmd->add_option("--seed", fl.cfg.seed, "Random seed");
  cmd->add_option("--sdae-epochs", fl.cfg.sdae_epochs, "SDAE pretraining epochs");
}

nlohmann::json config_json(const TrainConfig& c) {
  return {{"K", c.K},           {"lambda", c.lambda},     {"lambda_p", c.lambda_p},
          {"lambda_d", c.lambda_d}, {"lambda_v", c.lambda_v}, {"lambda_w", c.lambda_w},
          {"lr", c.lr},         {"batch", c.batch_size},  {"epochs", c.outer_iters},
          {"seed", c.seed},     {"mu", c.mu},             {"tol", c.tol}};
}

std::string eval_csv(const EvaluationReport& rep, int k) {
  std::ostringstream out;
  out << "# auc is computed over the full ranking (not truncated at k)\n";
  out << "query_id,p_at_" << k << ",r_at_" << k << ",ndcg_at_" << k << ",mrr_at_" << k
      << ",auc\n";
  out.precision(6);
  out << std::fixed;
  for (std::size_t q = 0; q < rep.per_query.size(); ++q) {
    const auto& m = rep.per_query[q];
    out << q << ',' << m.precision << ',' << m.recall << ',' << m.ndcg << ',' << m.mrr << ','
        << m.auc << '\n';
  }
  const auto& s = rep.summary;
  out << "summary," << s.precision << ',' << s.recall << ',' << s.ndcg << ',' << s.mrr << ','
      << s.auc << '\n';
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"STopic-Rec: query-based scientific dataset recommendation"};
  app.set_config("--config");
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic planted-topic corpus");
  int sy_topics = 4, sy_papers = 200, sy_datasets = 40, sy_vocab = 500;
  std::uint64_t sy_seed = 1;
  std::string sy_out;
  synth->add_option("--topics", sy_topics, "Number of planted topics");
  synth->add_option("--n-papers", sy_papers, "Number of papers");
  synth->add_option("--n-datasets", sy_datasets, "Number of datasets");
  synth->add_option("--vocab", sy_vocab, "Vocabulary size");
  synth->add_option("--seed", sy_seed, "Random seed");
  synth->add_option("--out", sy_out, "Output directory")->required();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Build a corpus from raw files");
  std::string in_papers, in_citations, in_links, in_out;
  int in_min_count = 3, in_cutoff = 0;
  ingest->add_option("--papers-file", in_papers, "Papers JSON-lines file")->required();
  ingest->add_option("--citations", in_citations, "Citations TSV file")->required();
  ingest->add_option("--links", in_links, "Paper-dataset links TSV file")->required();
  ingest->add_option("--min-count", in_min_count, "Vocabulary min document frequency");
  ingest->add_option("--cutoff-year", in_cutoff,
                     "Train/query split year (inclusive); writes queries.jsonl");
  ingest->add_option("--out", in_out, "Output corpus directory")->required();

  // pretrain-text / pretrain-graph
  auto* pt_text = app.add_subcommand("pretrain-text", "Pretrain the text autoencoder");
  auto* pt_graph = app.add_subcommand("pretrain-graph", "Pretrain structure embeddings");
  std::string pt_corpus, pt_out;
  int pt_k = 16, pt_epochs = 20;
  std::uint64_t pt_seed = 1;
  for (auto* cmd : {pt_text, pt_graph}) {
    cmd->add_option("--corpus", pt_corpus, "Corpus directory or corpus.json")->required();
    cmd->add_option("--k", pt_k, "Embedding dimension (even)");
    cmd->add_option("--epochs", pt_epochs, "Training epochs");
    cmd->add_option("--seed", pt_seed, "Random seed");
    cmd->add_option("--out", pt_out, "Output directory")->required();
  }

  // train
  auto* train_cmd = app.add_subcommand("train", "Run the full alternating training");
  TrainFlags tf;
  add_train_options(train_cmd, tf);

  // query
  auto* query_cmd = app.add_subcommand("query", "Rank datasets for a query");
  std::string q_model, q_papers, q_out, q_corpus, q_mode = "model";
  int q_top = 5;
  query_cmd->add_option("--model", q_model, "Model bundle directory");
  query_cmd->add_option("--papers", q_papers, "Comma-separated query paper ids")->required();
  query_cmd->add_option("--top", q_top, "Number of datasets to return");
  query_cmd->add_option("--corpus", q_corpus, "Corpus (required for naive modes)");
  query_cmd->add_option("--mode", q_mode, "model | naive | advanced");
  query_cmd->add_option("--out", q_out, "Output file (default stdout)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate ranking metrics over queries");
  std::string e_model, e_queries, e_out, e_corpus, e_mode = "model";
  int e_k = 5;
  eval_cmd->add_option("--model", e_model, "Model bundle directory");
  eval_cmd->add_option("--queries", e_queries, "Queries JSON-lines file")->required();
  eval_cmd->add_option("--k", e_k, "Cutoff k");
  eval_cmd->add_option("--corpus", e_corpus, "Corpus (required for baseline modes)");
  eval_cmd->add_option("--mode", e_mode, "model | naive | advanced");
  eval_cmd->add_option("--out", e_out, "Output CSV file (default stdout)");

  // profile
  auto* prof_cmd = app.add_subcommand("profile", "Top words and datasets of a topic");
  std::string p_model, p_out;
  int p_topic = 0, p_top = 5;
  prof_cmd->add_option("--model", p_model, "Model bundle directory")->required();
  prof_cmd->add_option("--topic", p_topic, "Topic index (omit for all topics)");
  prof_cmd->add_option("--top", p_top, "Entries per list");
  prof_cmd->add_option("--out", p_out, "Output file (default stdout)");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "HTTP recommendation endpoint");
  std::string s_model;
  int s_port = 8080;
  serve_cmd->add_option("--model", s_model, "Model bundle directory")->required();
  serve_cmd->add_option("--port", s_port, "Listen port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    std::cerr << "ERROR: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*synth) {
      auto planted = generate_planted_corpus(sy_topics, sy_papers, sy_datasets, sy_vocab, sy_seed);
      fs::create_directories(sy_out);
      save_corpus(planted.graph, planted.vocab, (fs::path(sy_out) / "corpus.json").string());
      save_queries(planted.queries, planted.graph,
                   (fs::path(sy_out) / "queries.jsonl").string());
      nlohmann::json truth;
      truth["paper_topic"] = planted.truth.paper_topic;
      std::ofstream tf_out(fs::path(sy_out) / "truth.json", std::ios::binary);
      tf_out << truth.dump() << '\n';
      log_info("wrote planted corpus to " + sy_out);
    } else if (*ingest) {
      VocabConfig vc;
      vc.min_count = in_min_count;
      auto [graph, vocab] = load_graph(in_papers, in_citations, in_links, vc);
      fs::create_directories(in_out);
      if (ingest->count("--cutoff-year")) {
        auto split = split_by_year(graph, in_cutoff);
        if (split.held_out_empty_warning) log_info("warning: no held-out papers after cutoff");
        auto queries = build_queries(split.train, split.held_out);
        log_info("queries built: " + std::to_string(queries.queries.size()) + ", skipped " +
                 std::to_string(queries.skipped) + ", dropped ground-truth datasets " +
                 std::to_string(queries.dropped_ground_truth));
        save_corpus(split.train, vocab, (fs::path(in_out) / "corpus.json").string());
        save_queries(queries, split.train, (fs::path(in_out) / "queries.jsonl").string());
      } else {
        save_corpus(graph, vocab, (fs::path(in_out) / "corpus.json").string());
      }
      log_info("ingested " + std::to_string(graph.n_papers()) + " papers, " +
               std::to_string(graph.n_datasets()) + " datasets, vocabulary " +
               std::to_string(vocab.size()));
    } else if (*pt_text) {
      auto [graph, vocab] = load_corpus(corpus_file(pt_corpus));
      if (pt_k % 2 != 0) throw std::runtime_error("--k must be even");
      SdaePretrainConfig cfg;
      cfg.code_dim = static_cast<std::size_t>(pt_k / 2);
      cfg.hidden_widths = {std::min<std::size_t>(256, static_cast<std::size_t>(vocab.size()))};
      cfg.epochs = pt_epochs;
      cfg.seed = pt_seed;
      auto rows = bow_rows(graph, vocab.size());
      auto result = sdae_pretrain(rows, cfg);
      fs::create_directories(pt_out);
      write_tensor((fs::path(pt_out) / "text_codes.tensor").string(),
                   detail::matrix_tensor("text_codes", result.codes));
      for (std::size_t i = 0; i < result.params.encoder.size(); ++i) {
        write_tensor((fs::path(pt_out) / ("sdae_enc_W" + std::to_string(i) + ".tensor")).string(),
                     detail::matrix_tensor("sdae_enc_W" + std::to_string(i),
                                           result.params.encoder[i].W));
        write_tensor((fs::path(pt_out) / ("sdae_enc_b" + std::to_string(i) + ".tensor")).string(),
                     detail::vector_tensor("sdae_enc_b" + std::to_string(i),
                                           result.params.encoder[i].b));
      }
      log_info("text pretraining done; final epoch loss " +
               std::to_string(result.epoch_loss.back()));
    } else if (*pt_graph) {
      auto [graph, vocab] = load_corpus(corpus_file(pt_corpus));
      if (pt_k % 2 != 0) throw std::runtime_error("--k must be even");
      WalkConfig cfg;
      cfg.dim = static_cast<std::size_t>(pt_k / 2);
      cfg.epochs = std::max(1, pt_epochs / 5);
      auto emb = train_structure_embeddings(graph, cfg, pt_seed);
      fs::create_directories(pt_out);
      write_tensor((fs::path(pt_out) / "struct_S.tensor").string(),
                   detail::matrix_tensor("struct_S", emb.S));
      if (emb.degenerate) log_info("warning: no trainable pairs; embeddings left at init");
      log_info("structure pretraining done");
    } else if (*train_cmd) {
      auto [graph, vocab] = load_corpus(corpus_file(tf.corpus));
      auto out = train_stoprec(graph, vocab.size(), tf.cfg);
      Model model = make_model(out, graph, vocab, config_json(tf.cfg).dump());
      save_model(model, tf.out);
      std::ofstream trace(fs::path(tf.out) / "loss_trace.csv", std::ios::binary);
      trace << "outer_iter,loss_total,loss_links,loss_topics,loss_reg,kappa\n";
      trace.precision(10);
      for (const auto& row : out.trace)
        trace << row.outer_iter << ',' << row.loss_total << ',' << row.loss_links << ','
              << row.loss_topics << ',' << row.loss_reg << ',' << row.kappa << '\n';
      log_info("training done: loss " + std::to_string(out.initial_loss) + " -> " +
               std::to_string(out.final_loss) + " in " + std::to_string(out.trace.size()) +
               " outer iterations");
    } else if (*query_cmd) {
      auto papers = split_csv(q_papers);
      if (papers.empty()) throw std::runtime_error("empty --papers");
      nlohmann::json out;
      out["query"] = papers;
      nlohmann::json results = nlohmann::json::array();
      if (q_mode == "model") {
        if (q_model.empty()) throw std::runtime_error("--model required in model mode");
        Model model = load_model(q_model);
        std::vector<int> ids;
        for (const auto& p : papers) {
          auto it = model.paper_index.find(p);
          if (it == model.paper_index.end()) throw std::runtime_error("unknown paper id: " + p);
          ids.push_back(it->second);
        }
        RankedResult r = rank(model, ids, q_top);
        for (std::size_t i = 0; i < r.datasets.size(); ++i)
          results.push_back({{"dataset", model.dataset_ids[r.datasets[i]]},
                             {"score", r.scores[i]}});
      } else if (q_mode == "naive" || q_mode == "advanced") {
        if (q_corpus.empty()) throw std::runtime_error("--corpus required for naive modes");
        auto [graph, vocab] = load_corpus(corpus_file(q_corpus));
        std::vector<int> ids;
        for (const auto& p : papers) {
          int idx = graph.paper_index_of(p);
          if (idx < 0) throw std::runtime_error("unknown paper id: " + p);
          ids.push_back(idx);
        }
        RankedResult r = q_mode == "naive"
                             ? naive_retrieval(graph, ids, q_top)
                             : advanced_naive_retrieval(graph, ids, q_top);
        for (std::size_t i = 0; i < r.datasets.size(); ++i)
          results.push_back({{"dataset", graph.dataset_ids[r.datasets[i]]},
                             {"score", r.scores[i]}});
      } else {
        throw std::runtime_error("unknown --mode: " + q_mode);
      }
      out["results"] = std::move(results);
      write_output(q_out, out.dump(2) + "\n");
    } else if (*eval_cmd) {
      EvaluationReport rep;
      if (e_mode == "model") {
        if (e_model.empty()) throw std::runtime_error("--model required in model mode");
        Model model = load_model(e_model);
        HeteroGraph shim;  // id resolution for query files goes through the model
        shim.paper_ids = model.paper_ids;
        shim.paper_year.assign(model.paper_ids.size(), 0);
        shim.dataset_ids = model.dataset_ids;
        shim.tokens.assign(model.paper_ids.size(), {});
        shim.paper_datasets.assign(model.paper_ids.size(), {});
        shim.textless.assign(model.paper_ids.size(), false);
        shim.finalize();
        QuerySet queries = load_queries(e_queries, shim);
        rep = evaluate_model(model, queries, e_k);
      } else if (e_mode == "naive" || e_mode == "advanced") {
        if (e_corpus.empty()) throw std::runtime_error("--corpus required for baseline modes");
        auto [graph, vocab] = load_corpus(corpus_file(e_corpus));
        QuerySet queries = load_queries(e_queries, graph);
        rep = evaluate_baseline(graph, queries, e_k,
                                e_mode == "naive" ? BaselineKind::Naive
                                                  : BaselineKind::AdvancedNaive);
      } else {
        throw std::runtime_error("unknown --mode: " + e_mode);
      }
      write_output(e_out, eval_csv(rep, e_k));
    } else if (*prof_cmd) {
      Model model = load_model(p_model);
      nlohmann::json out = nlohmann::json::array();
      auto emit = [&](int topic) {
        TopicProfile prof = topic_profile(model, topic, p_top);
        nlohmann::json jt;
        jt["topic"] = topic;
        nlohmann::json words = nlohmann::json::array(), datasets = nlohmann::json::array();
        for (auto [w, prob] : prof.top_words)
          words.push_back({{"word", model.vocab_words[w]}, {"prob", prob}});
        for (auto [d, prob] : prof.top_datasets)
          datasets.push_back({{"dataset", model.dataset_ids[d]}, {"prob", prob}});
        jt["top_words"] = std::move(words);
        jt["top_datasets"] = std::move(datasets);
        out.push_back(std::move(jt));
      };
      if (prof_cmd->count("--topic")) {
        emit(p_topic);
      } else {
        for (int k = 0; k < model.K; ++k) emit(k);
      }
      write_output(p_out, out.dump(2) + "\n");
    } else if (*serve_cmd) {
      Model model = load_model(s_model);
      httplib::Server srv;
      configure_server(srv, model);
      log_info("serving on port " + std::to_string(s_port));
      if (!srv.listen("0.0.0.0", s_port))
        throw std::runtime_error("failed to listen on port " + std::to_string(s_port));
    }
  } catch (const std::exception& e) {
    std::cerr << "ERROR: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
