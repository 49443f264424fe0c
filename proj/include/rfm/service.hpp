#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "rfm/adaptation.hpp"
#include "rfm/dataset.hpp"
#include "rfm/error.hpp"
#include "rfm/model.hpp"

namespace httplib {
class Server;
}

namespace rfm {

// Error carrying an HTTP status and a machine-readable code.
class ServiceError : public Error {
 public:
  ServiceError(int status, std::string code, const std::string& message)
      : Error(message), status_(status), code_(std::move(code)) {}

  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }

 private:
  int status_;
  std::string code_;
};

struct ServedPair {
  std::string pair_id;
  PreferencePair pair;
  std::size_t remaining = 0;  // unserved pairs left after this one
};

struct HeadSummary {
  std::size_t samples = 0;
  std::optional<double> loss;  // empty before the first choice
  double norm = 0.0;
  bool converged = false;
  std::vector<double> w;
};

struct RankedCandidate {
  std::size_t index = 0;  // position in the submitted candidate list
  std::string text;
  double score = 0.0;
};

// Interactive adaptation sessions over a frozen model. Each session serves
// pairs from its own seeded shuffle of the pool and refits its head on every
// accepted choice. Sessions are independent; calls on one session are
// serialised, calls on different sessions may run concurrently.
class SessionManager {
 public:
  SessionManager(std::shared_ptr<const RfmModel> model, std::vector<PreferencePair> pool, std::uint64_t seed,
                 AdaptConfig adapt = {});

  std::string create_session();
  ServedPair next_pair(const std::string& session);
  // choice is "a" (first response preferred, z = 1) or "b".
  HeadSummary submit_choice(const std::string& session, const std::string& pair_id, const std::string& choice);
  HeadSummary weights(const std::string& session);
  std::vector<RankedCandidate> rerank(const std::string& session, const CandidateSet& set, std::size_t n);

  std::size_t session_count() const;
  std::size_t pool_size() const { return pool_.size(); }
  const RfmModel& model() const { return *model_; }

 private:
  struct Session {
    std::mutex mutex;
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    std::map<std::size_t, bool> served;  // pool index -> answered
    std::vector<AdaptationSample> samples;
    AdaptedHead head;
  };

  std::shared_ptr<Session> find(const std::string& id) const;
  HeadSummary summary(const Session& s) const;

  std::shared_ptr<const RfmModel> model_;
  std::vector<PreferencePair> pool_;
  std::uint64_t seed_;
  AdaptConfig adapt_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t created_ = 0;
};

// Installs the JSON endpoints:
//   POST /sessions                  GET  /sessions/{id}/next-pair
//   POST /sessions/{id}/choices     GET  /sessions/{id}/weights
//   POST /sessions/{id}/rerank      GET  /healthz
// Errors are answered as {"error": {"code", "message"}}.
void register_routes(httplib::Server& server, SessionManager& manager);

// Blocks serving on host:port until the server is stopped.
void serve(SessionManager& manager, const std::string& host, int port);

}  // namespace rfm
