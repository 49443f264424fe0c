#include "rfm/service.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <httplib.h>
#include <json.hpp>

#include "rfm/random.hpp"

namespace rfm {
namespace {

using json = nlohmann::json;

std::string hex_id(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::size_t parse_pair_id(const std::string& id, std::size_t pool) {
  if (id.size() < 2 || id[0] != 'p') throw ServiceError(400, "unknown_pair", "unknown pair id '" + id + "'");
  std::size_t idx = 0;
  for (std::size_t i = 1; i < id.size(); ++i) {
    if (id[i] < '0' || id[i] > '9') throw ServiceError(400, "unknown_pair", "unknown pair id '" + id + "'");
    idx = idx * 10 + static_cast<std::size_t>(id[i] - '0');
    if (idx >= pool) throw ServiceError(400, "unknown_pair", "unknown pair id '" + id + "'");
  }
  return idx;
}

json summary_json(const HeadSummary& h) {
  json j = {{"samples", h.samples}, {"head_norm", h.norm}, {"converged", h.converged}};
  j["loss"] = h.loss ? json(*h.loss) : json(nullptr);
  return j;
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", {{"code", code}, {"message", message}}}}.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw ServiceError(400, "bad_request", "request body must be a JSON object");
    return j;
  } catch (const json::exception&) {
    throw ServiceError(400, "bad_request", "request body is not valid JSON");
  }
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ServiceError& e) {
      send_error(res, e.status(), e.code(), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "bad_request", e.what());
    } catch (const DataError& e) {
      send_error(res, 400, "bad_request", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

SessionManager::SessionManager(std::shared_ptr<const RfmModel> model, std::vector<PreferencePair> pool,
                               std::uint64_t seed, AdaptConfig adapt)
    : model_(std::move(model)), pool_(std::move(pool)), seed_(seed), adapt_(adapt) {
  if (!model_) throw Error("session manager needs a model");
  adapt_.validate();
}

std::string SessionManager::create_session() {
  std::lock_guard lock(mutex_);
  const std::uint64_t number = created_++;
  const std::uint64_t session_seed = derive_seed(derive_seed(seed_, "session"), number);
  auto s = std::make_shared<Session>();
  s->order.resize(pool_.size());
  for (std::size_t i = 0; i < pool_.size(); ++i) s->order[i] = i;
  Rng rng(derive_seed(session_seed, "pairs"));
  rng.shuffle(s->order);
  s->head.w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model_->feature_dim()));
  std::string id = hex_id(derive_seed(session_seed, "id"));
  while (sessions_.contains(id)) id = hex_id(mix_seed(std::stoull(id, nullptr, 16)));
  s->head.user_id = id;
  sessions_.emplace(id, std::move(s));
  return id;
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown_session", "no session '" + id + "'");
  return it->second;
}

std::size_t SessionManager::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

HeadSummary SessionManager::summary(const Session& s) const {
  HeadSummary h;
  h.samples = s.samples.size();
  if (!s.samples.empty()) h.loss = s.head.final_loss;
  h.norm = s.head.w.norm();
  h.converged = s.head.converged;
  h.w.assign(s.head.w.data(), s.head.w.data() + s.head.w.size());
  return h;
}

ServedPair SessionManager::next_pair(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  if (s->cursor == s->order.size()) throw ServiceError(410, "pool_exhausted", "every pair in the pool has been served");
  const std::size_t idx = s->order[s->cursor++];
  s->served.emplace(idx, false);
  return {"p" + std::to_string(idx), pool_[idx], s->order.size() - s->cursor};
}

HeadSummary SessionManager::submit_choice(const std::string& id, const std::string& pair_id,
                                          const std::string& choice) {
  auto s = find(id);
  if (choice != "a" && choice != "b") throw ServiceError(400, "bad_choice", "choice must be 'a' or 'b'");
  const std::size_t idx = parse_pair_id(pair_id, pool_.size());
  std::lock_guard lock(s->mutex);
  auto it = s->served.find(idx);
  if (it == s->served.end()) throw ServiceError(400, "unknown_pair", "pair '" + pair_id + "' was not served");
  if (it->second) throw ServiceError(409, "duplicate_answer", "pair '" + pair_id + "' was already answered");

  const auto& pair = pool_[idx];
  AdaptationSample sample{
      encode(*model_, pair.context, pair.response_a) - encode(*model_, pair.context, pair.response_b),
      choice == "a" ? 1 : 0};
  auto samples = s->samples;
  samples.push_back(std::move(sample));
  auto head = adapt(samples, adapt_);
  head.user_id = id;
  // Commit only after the refit succeeded.
  s->samples = std::move(samples);
  s->head = std::move(head);
  it->second = true;
  return summary(*s);
}

HeadSummary SessionManager::weights(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return summary(*s);
}

std::vector<RankedCandidate> SessionManager::rerank(const std::string& id, const CandidateSet& set, std::size_t n) {
  auto s = find(id);
  if (set.candidates.empty()) throw ServiceError(400, "empty_set", "candidate set is empty");
  if (n < 1 || n > set.candidates.size()) {
    throw ServiceError(400, "bad_n", "n must lie between 1 and the number of candidates");
  }
  Eigen::VectorXd w;
  {
    std::lock_guard lock(s->mutex);
    w = s->head.w;
  }
  std::vector<RankedCandidate> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({i, set.candidates[i], encode(*model_, set.context, set.candidates[i]).dot(w)});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  return out;
}

void register_routes(httplib::Server& server, SessionManager& m) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Get("/healthz", guarded([&m](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"status", "ok"},
                         {"feature_dim", m.model().feature_dim()},
                         {"pool_size", m.pool_size()},
                         {"sessions", m.session_count()}}
                        .dump(),
                    "application/json");
  }));

  server.Post("/sessions", guarded([&m](const httplib::Request&, httplib::Response& res) {
    const auto id = m.create_session();
    res.status = 201;
    res.set_content(json{{"session_id", id}, {"pool_size", m.pool_size()}}.dump(), "application/json");
  }));

  server.Get(R"(/sessions/([^/]+)/next-pair)", guarded([&m](const httplib::Request& req, httplib::Response& res) {
    const auto p = m.next_pair(req.matches[1]);
    res.set_content(json{{"pair_id", p.pair_id},
                         {"context", p.pair.context},
                         {"response_a", p.pair.response_a},
                         {"response_b", p.pair.response_b},
                         {"remaining", p.remaining}}
                        .dump(),
                    "application/json");
  }));

  server.Post(R"(/sessions/([^/]+)/choices)", guarded([&m](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto body = parse_body(req);
    if (!body.contains("pair_id") || !body["pair_id"].is_string()) {
      throw ServiceError(400, "bad_request", "pair_id (string) is required");
    }
    if (!body.contains("choice") || !body["choice"].is_string()) {
      throw ServiceError(400, "bad_request", "choice (string) is required");
    }
    const auto h = m.submit_choice(id, body["pair_id"].get<std::string>(), body["choice"].get<std::string>());
    res.set_content(summary_json(h).dump(), "application/json");
  }));

  server.Get(R"(/sessions/([^/]+)/weights)", guarded([&m](const httplib::Request& req, httplib::Response& res) {
    const auto h = m.weights(req.matches[1]);
    auto j = summary_json(h);
    j["d"] = h.w.size();
    j["w"] = h.w;
    res.set_content(j.dump(), "application/json");
  }));

  server.Post(R"(/sessions/([^/]+)/rerank)", guarded([&m](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto body = parse_body(req);
    CandidateSet set;
    set.context = body.at("context").get<std::string>();
    set.candidates = body.at("candidates").get<std::vector<std::string>>();
    const std::size_t n = body.contains("n") ? body["n"].get<std::size_t>() : set.candidates.size();
    json ranked = json::array();
    for (const auto& c : m.rerank(id, set, n)) {
      ranked.push_back({{"index", c.index}, {"text", c.text}, {"score", c.score}});
    }
    res.set_content(json{{"ranked", ranked}}.dump(), "application/json");
  }));

  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    send_error(res, res.status, res.status == 404 ? "not_found" : "http_error", "request failed");
  });
}

void serve(SessionManager& manager, const std::string& host, int port) {
  httplib::Server server;
  register_routes(server, manager);
  if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace rfm
