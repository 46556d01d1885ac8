// SPDX-License-Identifier: Apache-2.0
//
// Prompt rendering, chat-completion backends and response parsing for
// reasoning generation.
//
// Response contract: the model answers with a tagged plain-text block
//
//   REASONING: <free text>
//   SCORE: <integer 0..100>
//
// parse_response() is the only place that contract is interpreted.
#pragma once

#include "nrfe/error.hpp"
#include "nrfe/types.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace nrfe::llm {

/// Bumped whenever any template wording changes; recorded in run manifests.
inline constexpr std::string_view kTemplateVersion = "nrfe-prompts/1";

struct PromptRequest {
  std::string system_text;
  std::string user_text;
  double temperature = 0.3;
  int max_tokens = 512;

  bool operator==(const PromptRequest&) const = default;
};

struct ParsedReasoning {
  std::string reasoning_text;
  CredibilityScore score{50};
};

struct SamplingOptions {
  double positive_temperature = 0.3;
  double negative_temperature = 0.7;
  double rating_temperature = 0.3;
  int reasoning_max_tokens = 512;
  int rating_max_tokens = 64;
};

/// Polarity threshold and confidence increment, quoted in rectification prompts.
struct ScoreThresholds {
  int polarity = 50;
  int increment = 0;
};

PromptRequest render_rating_prompt(std::string_view news, const SamplingOptions& sampling = {});

PromptRequest render_initial_prompt(std::string_view news, BinaryLabel label, ReasoningType type,
                                    CredibilityScore v_initial, AlterationState alteration,
                                    const SamplingOptions& sampling = {});

/// Re-prompt carrying the previous reasoning and score together with an
/// explanation of which requirement they missed.
PromptRequest render_rectify_prompt(std::string_view news, BinaryLabel label, ReasoningType type,
                                    CredibilityScore v_initial, AlterationState alteration,
                                    std::string_view previous_reasoning,
                                    CredibilityScore previous_score,
                                    const ScoreThresholds& thresholds = {},
                                    const SamplingOptions& sampling = {});

class ResponseParseError : public FormatError {
 public:
  enum class Reason { MissingScore, ScoreOutOfRange, EmptyReasoning };
  ResponseParseError(Reason reason, const std::string& what)
      : FormatError(what), reason_(reason) {}
  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

/// Extracts the REASONING block and the last SCORE-tagged integer.
/// Markdown emphasis around the tags is tolerated; scores are never clamped.
ParsedReasoning parse_response(std::string_view raw);
/// Score-only variant used for the initial credibility rating.
CredibilityScore parse_score(std::string_view raw);

/// Transport failure after the retry budget (timeouts, connection errors,
/// 5xx statuses).
class BackendError : public Error {
 public:
  using Error::Error;
};

/// A mock backend ran out of scripted replies.
class ScriptExhausted : public Error {
 public:
  using Error::Error;
};

/// Parse failures persisted through every parse retry.
class ParseBudgetExhausted : public Error {
 public:
  using Error::Error;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const PromptRequest& request) = 0;
  /// Upper bound on concurrent complete() calls the backend accepts.
  virtual std::size_t max_concurrency() const = 0;
};

inline std::string complete(const PromptRequest& request, Backend& backend) {
  return backend.complete(request);
}

/// Replays a fixed script in FIFO order and records every request.
/// Single-consumer: max_concurrency() is 1.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(std::vector<std::string> script = {});

  std::string complete(const PromptRequest& request) override;
  std::size_t max_concurrency() const override { return 1; }

  void push(std::string reply);
  std::size_t calls() const;
  std::size_t remaining() const;
  std::vector<PromptRequest> requests() const;

 private:
  mutable std::mutex mutex_;
  std::deque<std::string> script_;
  std::vector<PromptRequest> requests_;
};

struct HttpOptions {
  /// Full URL of the chat-completion endpoint, e.g.
  /// http://localhost:11434/v1/chat/completions
  std::string url = "http://localhost:11434/v1/chat/completions";
  std::string model = "llama3:70b";
  std::string api_key;
  std::chrono::milliseconds timeout{120000};
  /// Retries after the first attempt on transport errors and 5xx/429.
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_multiplier = 2.0;
  std::size_t max_in_flight = 4;
};

/// Environment overrides: NRFE_LLM_ENDPOINT, NRFE_LLM_MODEL, NRFE_LLM_API_KEY.
void apply_env_overrides(HttpOptions& options);

/// Posts {model, messages:[{role, content}], temperature, max_tokens} and reads
/// the reply from choices[0].message.content (OpenAI style) or
/// message.content (Ollama native style). Safe for concurrent use; at most
/// max_in_flight requests are outstanding.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpOptions options);

  std::string complete(const PromptRequest& request) override;
  std::size_t max_concurrency() const override { return options_.max_in_flight; }
  const HttpOptions& options() const noexcept { return options_; }

 private:
  HttpOptions options_;
  std::string scheme_host_port_;
  std::string path_;
  std::mutex slots_mutex_;
  std::condition_variable slots_cv_;
  std::size_t in_flight_ = 0;
};

/// Extracts the assistant text from a chat-completion JSON response body.
std::string extract_completion_text(std::string_view body);
/// Serializes a request into the chat-completion JSON body.
std::string chat_request_body(const PromptRequest& request, std::string_view model);

struct GatewayOptions {
  SamplingOptions sampling;
  /// Extra attempts after a reply that fails to parse.
  int parse_retries = 2;
};

/// Backend plus parsing policy: the unit the rectification loop talks to.
class Gateway {
 public:
  explicit Gateway(Backend& backend, GatewayOptions options = {});

  CredibilityScore rate_initial_credibility(std::string_view news);
  ParsedReasoning request_reasoning(const PromptRequest& request);

  Backend& backend() noexcept { return backend_; }
  const GatewayOptions& options() const noexcept { return options_; }

 private:
  Backend& backend_;
  GatewayOptions options_;
};

}  // namespace nrfe::llm
