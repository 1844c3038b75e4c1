#pragma once

#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "stoprec/recommender.hpp"

namespace stoprec {

namespace detail {

inline std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace detail

// Configure an HTTP server over an immutable model snapshot:
//   GET /health            -> 200 "ok"
//   GET /recommend?papers=p1,p3&k=5 -> scored datasets + query topic summary
// All handlers are pure reads, safe under concurrent requests.
inline void configure_server(httplib::Server& srv, const Model& model) {
  srv.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("ok", "text/plain");
  });

  srv.Get("/recommend", [&model](const httplib::Request& req, httplib::Response& res) {
    auto fail = [&](const std::string& msg) {
      nlohmann::json err{{"error", msg}};
      res.status = 400;
      res.set_content(err.dump(), "application/json");
    };
    auto paper_param = detail::split_csv(req.get_param_value("papers"));
    if (paper_param.empty()) return fail("missing or empty 'papers' parameter");
    std::vector<int> papers;
    for (const auto& pid : paper_param) {
      auto it = model.paper_index.find(pid);
      if (it == model.paper_index.end()) return fail("unknown paper id: " + pid);
      papers.push_back(it->second);
    }
    int k = 5;
    if (req.has_param("k")) {
      try {
        std::size_t pos = 0;
        k = std::stoi(req.get_param_value("k"), &pos);
        if (pos != req.get_param_value("k").size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        return fail("malformed 'k' parameter");
      }
      if (k < 1 || k > model.n_datasets()) return fail("'k' out of range");
    }

    try {
      RankedResult ranked = rank(model, papers, k);
      auto topics = query_topics(model, papers, std::min(4, model.K));
      nlohmann::json out;
      out["query"] = paper_param;
      nlohmann::json results = nlohmann::json::array();
      for (std::size_t i = 0; i < ranked.datasets.size(); ++i)
        results.push_back({{"dataset", model.dataset_ids[ranked.datasets[i]]},
                           {"score", ranked.scores[i]}});
      out["results"] = std::move(results);
      nlohmann::json jt = nlohmann::json::array();
      for (auto [topic, weight] : topics) {
        auto prof = topic_profile(model, topic, 5);
        std::vector<std::string> words;
        for (auto [w, _] : prof.top_words) words.push_back(model.vocab_words[w]);
        jt.push_back({{"topic", topic}, {"weight", weight}, {"top_words", words}});
      }
      out["topics"] = std::move(jt);
      res.set_content(out.dump(), "application/json");
    } catch (const std::exception& e) {
      return fail(e.what());
    }
  });
}

}  // namespace stoprec
