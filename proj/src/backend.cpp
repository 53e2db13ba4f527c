#include "promptablate/backend.hpp"

#include <cstdlib>
#include <iostream>
#include <thread>

#include "httplib.h"
#include "promptablate/error.hpp"
#include "promptablate/text.hpp"

namespace promptablate {

using nlohmann::json;

std::string prompt_hash(std::string_view prompt) { return text::hex64(text::fnv1a64(prompt)); }

void CompletionRequest::validate() const {
  if (max_new_tokens < 1) throw ValidationError("max_new_tokens must be at least 1");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ValidationError("top_p must be in (0, 1]");
  if (!(temperature >= 0.0)) throw ValidationError("temperature must be non-negative");
}

void BackendDescriptor::validate() const {
  if (id.empty()) throw ConfigurationError("backend id is empty");
  if (kind != "http" && kind != "stub") {
    throw ConfigurationError("backend '" + id + "': kind must be 'http' or 'stub'");
  }
  if (kind == "http" && endpoint.empty()) {
    throw ConfigurationError("backend '" + id + "': http backends need an endpoint");
  }
  if (max_in_flight < 1) throw ConfigurationError("backend '" + id + "': max_in_flight must be >= 1");
  if (max_attempts < 1) throw ConfigurationError("backend '" + id + "': max_attempts must be >= 1");
}

namespace {

StubConfig::Mode parse_stub_mode(const std::string& s) {
  if (s == "lookup") return StubConfig::Mode::Lookup;
  if (s == "echo") return StubConfig::Mode::Echo;
  if (s == "hash") return StubConfig::Mode::Hash;
  throw ConfigurationError("unknown stub mode '" + s + "'");
}

std::string stub_mode_name(StubConfig::Mode m) {
  switch (m) {
    case StubConfig::Mode::Lookup: return "lookup";
    case StubConfig::Mode::Echo: return "echo";
    case StubConfig::Mode::Hash: return "hash";
  }
  return "lookup";
}

}  // namespace

BackendDescriptor descriptor_from_json(const json& j) {
  BackendDescriptor d;
  try {
    d.id = j.at("id").get<std::string>();
    d.kind = j.value("kind", std::string("http"));
    d.endpoint = j.value("endpoint", std::string());
    d.completions_path = j.value("completions_path", d.completions_path);
    d.tokenize_path = j.value("tokenize_path", d.tokenize_path);
    d.model = j.value("model", std::string());
    d.can_tokenize = j.value("tokenize", false);
    d.timeout = std::chrono::milliseconds(j.value("timeout_ms", 60000));
    d.max_in_flight = j.value("max_in_flight", std::size_t{1});
    d.auth_env = j.value("auth_env", std::string());
    const std::string dialect = j.value("dialect", std::string("greedy_flag"));
    if (dialect == "greedy_flag") d.dialect = WireDialect::GreedyFlag;
    else if (dialect == "plain") d.dialect = WireDialect::Plain;
    else throw ConfigurationError("backend '" + d.id + "': unknown dialect '" + dialect + "'");
    d.max_attempts = j.value("max_attempts", 3);
    d.retry_backoff = std::chrono::milliseconds(j.value("retry_backoff_ms", 500));
    if (auto it = j.find("stub"); it != j.end()) {
      const json& s = *it;
      d.stub.mode = parse_stub_mode(s.value("mode", std::string("lookup")));
      d.stub.responses = s.value("responses", std::map<std::string, std::string>{});
      d.stub.default_response = s.value("default", std::string());
      d.stub.hint = s.value("hint", std::string());
      d.stub.delay_ms = s.value("delay_ms", 0);
    }
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("backend descriptor: ") + e.what());
  }
  d.validate();
  return d;
}

json descriptor_to_json(const BackendDescriptor& d) {
  json j = {
      {"id", d.id},
      {"kind", d.kind},
      {"endpoint", d.endpoint},
      {"completions_path", d.completions_path},
      {"tokenize_path", d.tokenize_path},
      {"model", d.model},
      {"tokenize", d.can_tokenize},
      {"timeout_ms", d.timeout.count()},
      {"max_in_flight", d.max_in_flight},
      {"auth_env", d.auth_env},
      {"dialect", d.dialect == WireDialect::GreedyFlag ? "greedy_flag" : "plain"},
      {"max_attempts", d.max_attempts},
      {"retry_backoff_ms", d.retry_backoff.count()},
  };
  if (d.kind == "stub") {
    j["stub"] = {{"mode", stub_mode_name(d.stub.mode)},
                 {"responses", d.stub.responses},
                 {"default", d.stub.default_response},
                 {"hint", d.stub.hint},
                 {"delay_ms", d.stub.delay_ms}};
  }
  return j;
}

json completion_body(const BackendDescriptor& d, const CompletionRequest& req) {
  json body = {
      {"model", d.model},
      {"prompt", req.prompt},
      {"max_tokens", req.max_new_tokens},
  };
  if (d.dialect == WireDialect::GreedyFlag) {
    body["temperature"] = req.temperature;
    body["top_p"] = req.top_p;
    body["do_sample"] = false;
  } else {
    body["temperature"] = 0.0;
    body["top_p"] = req.top_p;
  }
  return body;
}

AdmissionGate::AdmissionGate(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ < 1) throw ConfigurationError("admission capacity must be >= 1");
}

void AdmissionGate::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < capacity_; });
  ++in_flight_;
  peak_ = std::max(peak_, in_flight_);
}

void AdmissionGate::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

std::size_t AdmissionGate::peak() const {
  std::lock_guard lock(mu_);
  return peak_;
}

Backend::Backend(BackendDescriptor desc) : desc_(std::move(desc)), gate_(desc_.max_in_flight) {
  desc_.validate();
}

CompletionResponse Backend::complete(const CompletionRequest& req) {
  req.validate();
  AdmissionGate::Guard guard(gate_);
  const auto t0 = std::chrono::steady_clock::now();
  CompletionResponse resp;
  resp.text = do_complete(req);
  resp.backend_id = desc_.id;
  resp.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return resp;
}

std::vector<std::string> Backend::tokenize(std::string_view text) {
  if (!desc_.can_tokenize) {
    throw UnsupportedError("backend '" + desc_.id + "' does not advertise tokenization");
  }
  if (text.empty()) return {};
  AdmissionGate::Guard guard(gate_);
  return do_tokenize(text);
}

StubBackend::StubBackend(BackendDescriptor desc) : Backend(std::move(desc)) {}

std::string StubBackend::do_complete(const CompletionRequest& req) {
  const StubConfig& s = descriptor().stub;
  if (s.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(s.delay_ms));
  std::string out;
  switch (s.mode) {
    case StubConfig::Mode::Lookup: {
      auto it = s.responses.find(prompt_hash(req.prompt));
      out = it != s.responses.end() ? it->second : s.default_response;
      break;
    }
    case StubConfig::Mode::Echo:
      out = s.hint.substr(0, s.hint.find('\n'));
      break;
    case StubConfig::Mode::Hash: {
      std::vector<std::string> lines;
      std::size_t start = 0;
      while (start <= s.hint.size()) {
        const auto nl = s.hint.find('\n', start);
        const auto line = s.hint.substr(start, nl == std::string::npos ? std::string::npos : nl - start);
        if (!text::is_blank(line)) lines.push_back(line);
        if (nl == std::string::npos) break;
        start = nl + 1;
      }
      out = lines.empty() ? s.default_response
                          : lines[text::fnv1a64(req.prompt) % lines.size()];
      break;
    }
  }
  // Honor the token budget the way a server would.
  const auto words = text::split_whitespace(out);
  if (words.size() > req.max_new_tokens) {
    out = text::join({words.begin(), words.begin() + static_cast<std::ptrdiff_t>(req.max_new_tokens)}, " ");
  }
  return out;
}

std::vector<std::string> StubBackend::do_tokenize(std::string_view text) {
  return WhitespaceTokenizer{}.tokenize(text);
}

HttpBackend::HttpBackend(BackendDescriptor desc) : Backend(std::move(desc)) {
  if (descriptor().kind != "http") throw ConfigurationError("HttpBackend needs kind 'http'");
  if (!descriptor().auth_env.empty()) {
    if (const char* token = std::getenv(descriptor().auth_env.c_str())) {
      auth_header_ = std::string("Bearer ") + token;
    }
  }
  if (descriptor().dialect == WireDialect::Plain) {
    std::cerr << "[promptablate] backend '" << descriptor().id
              << "': plain dialect, greedy decoding sent as temperature=0\n";
  }
}

json HttpBackend::post(const std::string& path, const json& body) {
  const BackendDescriptor& d = descriptor();
  const std::string payload = body.dump();
  auto backoff = d.retry_backoff;
  for (int attempt = 1;; ++attempt) {
    httplib::Client client(d.endpoint);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(d.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(d.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!auth_header_.empty()) headers.emplace("Authorization", auth_header_);

    const auto t0 = std::chrono::steady_clock::now();
    auto res = client.Post(path, headers, payload, "application/json");
    if (res) {
      if (res->status < 200 || res->status >= 300) throw BackendError(res->status, res->body);
      try {
        return json::parse(res->body);
      } catch (const json::parse_error& e) {
        throw BackendError(res->status, std::string("malformed JSON response: ") + e.what());
      }
    }

    const auto err = res.error();
    const auto elapsed = std::chrono::steady_clock::now() - t0;
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           (err == httplib::Error::Read && elapsed >= d.timeout);
    if (timed_out) {
      throw TimeoutError("backend '" + d.id + "' timed out after " +
                         std::to_string(d.timeout.count()) + " ms");
    }
    if (attempt >= d.max_attempts) {
      throw TransportError("backend '" + d.id + "' unreachable after " + std::to_string(attempt) +
                           " attempts: " + httplib::to_string(err));
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

std::string HttpBackend::do_complete(const CompletionRequest& req) {
  const json resp = post(descriptor().completions_path, completion_body(descriptor(), req));
  try {
    return resp.at("choices").at(0).at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(200, std::string("response lacks choices[0].text: ") + e.what());
  }
}

std::vector<std::string> HttpBackend::do_tokenize(std::string_view text) {
  const json resp = post(descriptor().tokenize_path, {{"model", descriptor().model}, {"prompt", text}});
  std::vector<std::string> tokens;
  try {
    for (const auto& t : resp.at("tokens")) {
      tokens.push_back(t.is_string() ? t.get<std::string>() : t.dump());
    }
  } catch (const json::exception& e) {
    throw BackendError(200, std::string("tokenize response lacks tokens: ") + e.what());
  }
  return tokens;
}

std::unique_ptr<Backend> make_backend(const BackendDescriptor& desc) {
  if (desc.kind == "stub") return std::make_unique<StubBackend>(desc);
  return std::make_unique<HttpBackend>(desc);
}

}  // namespace promptablate
