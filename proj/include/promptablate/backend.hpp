#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "promptablate/tokenizer.hpp"

namespace promptablate {

enum class Decoding { Greedy };

struct CompletionRequest {
  std::string prompt;
  std::size_t max_new_tokens = 10;
  Decoding decoding = Decoding::Greedy;
  double top_p = 1.0;
  double temperature = 1.0;

  void validate() const;
};

struct CompletionResponse {
  std::string text;
  std::string backend_id;
  double latency_ms = 0.0;
};

// How greedy decoding is expressed on the wire. GreedyFlag keeps
// temperature/top_p at the requested values and adds "do_sample": false;
// Plain is for servers without such a flag and sends temperature 0 instead.
enum class WireDialect { GreedyFlag, Plain };

struct StubConfig {
  enum class Mode {
    Lookup,  // responses[prompt_hash], falling back to default_response
    Echo,    // first line of `hint`
    Hash,    // line of `hint` chosen by prompt hash
  };
  Mode mode = Mode::Lookup;
  std::map<std::string, std::string> responses;
  std::string default_response;
  std::string hint;
  int delay_ms = 0;
};

struct BackendDescriptor {
  std::string id;
  std::string kind = "http";  // "http" or "stub"
  std::string endpoint;       // scheme://host:port
  std::string completions_path = "/v1/completions";
  std::string tokenize_path = "/tokenize";
  std::string model;
  bool can_tokenize = false;
  std::chrono::milliseconds timeout{60000};
  std::size_t max_in_flight = 1;
  std::string auth_env;  // env var holding a bearer token; empty = no auth header
  WireDialect dialect = WireDialect::GreedyFlag;
  int max_attempts = 3;
  std::chrono::milliseconds retry_backoff{500};
  StubConfig stub;

  void validate() const;
};

BackendDescriptor descriptor_from_json(const nlohmann::json& j);
nlohmann::json descriptor_to_json(const BackendDescriptor& d);

// Wire body for a completion request under the descriptor's dialect.
nlohmann::json completion_body(const BackendDescriptor& d, const CompletionRequest& req);

// Counting gate bounding simultaneous outstanding requests.
class AdmissionGate {
 public:
  explicit AdmissionGate(std::size_t capacity);

  void acquire();
  void release();
  std::size_t peak() const;

  class Guard {
   public:
    explicit Guard(AdmissionGate& g) : gate_(g) { gate_.acquire(); }
    ~Guard() { gate_.release(); }
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;

   private:
    AdmissionGate& gate_;
  };

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::size_t capacity_;
  std::size_t in_flight_ = 0;
  std::size_t peak_ = 0;
};

/// A completion backend. Thread-safe; concurrent callers are admitted up to
/// descriptor().max_in_flight at a time.
class Backend {
 public:
  explicit Backend(BackendDescriptor desc);
  virtual ~Backend() = default;

  CompletionResponse complete(const CompletionRequest& req);
  std::vector<std::string> tokenize(std::string_view text);

  const BackendDescriptor& descriptor() const { return desc_; }
  std::size_t peak_in_flight() const { return gate_.peak(); }

 protected:
  virtual std::string do_complete(const CompletionRequest& req) = 0;
  virtual std::vector<std::string> do_tokenize(std::string_view text) = 0;

 private:
  BackendDescriptor desc_;
  AdmissionGate gate_;
};

class StubBackend final : public Backend {
 public:
  explicit StubBackend(BackendDescriptor desc);

 protected:
  std::string do_complete(const CompletionRequest& req) override;
  std::vector<std::string> do_tokenize(std::string_view text) override;
};

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendDescriptor desc);

 protected:
  std::string do_complete(const CompletionRequest& req) override;
  std::vector<std::string> do_tokenize(std::string_view text) override;

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body);
  std::string auth_header_;
};

std::unique_ptr<Backend> make_backend(const BackendDescriptor& desc);

/// Adapts a tokenize-capable backend to the Tokenizer interface.
class BackendTokenizer final : public Tokenizer {
 public:
  explicit BackendTokenizer(Backend& backend) : backend_(backend) {}
  std::vector<std::string> tokenize(std::string_view text) const override {
    return backend_.tokenize(text);
  }

 private:
  Backend& backend_;
};

// Hex FNV-1a of the prompt text; the key used by stub lookup tables and by
// result records.
std::string prompt_hash(std::string_view prompt);

}  // namespace promptablate
