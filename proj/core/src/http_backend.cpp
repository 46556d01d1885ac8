// SPDX-License-Identifier: Apache-2.0
#include "nrfe/llm_gateway.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <thread>

namespace nrfe::llm {

namespace {

struct SlotGuard {
  std::mutex& mutex;
  std::condition_variable& cv;
  std::size_t& in_flight;

  SlotGuard(std::mutex& m, std::condition_variable& c, std::size_t& n, std::size_t limit)
      : mutex(m), cv(c), in_flight(n) {
    std::unique_lock lock(mutex);
    cv.wait(lock, [&] { return in_flight < limit; });
    ++in_flight;
  }
  ~SlotGuard() {
    {
      std::lock_guard lock(mutex);
      --in_flight;
    }
    cv.notify_one();
  }
};

}  // namespace

void apply_env_overrides(HttpOptions& options) {
  if (const char* url = std::getenv("NRFE_LLM_ENDPOINT"); url && *url) options.url = url;
  if (const char* model = std::getenv("NRFE_LLM_MODEL"); model && *model) options.model = model;
  if (const char* key = std::getenv("NRFE_LLM_API_KEY"); key && *key) options.api_key = key;
}

std::string chat_request_body(const PromptRequest& request, std::string_view model) {
  nlohmann::ordered_json body;
  body["model"] = std::string(model);
  auto& messages = body["messages"] = nlohmann::ordered_json::array();
  if (!request.system_text.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system_text}});
  }
  messages.push_back({{"role", "user"}, {"content", request.user_text}});
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;
  body["stream"] = false;
  return body.dump();
}

std::string extract_completion_text(std::string_view body) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("completion body is not JSON: ") + e.what());
  }
  if (doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
    const auto& choice = doc["choices"][0];
    if (choice.contains("message") && choice["message"].contains("content") &&
        choice["message"]["content"].is_string()) {
      return choice["message"]["content"].get<std::string>();
    }
    if (choice.contains("text") && choice["text"].is_string()) {
      return choice["text"].get<std::string>();
    }
  }
  if (doc.contains("message") && doc["message"].contains("content") &&
      doc["message"]["content"].is_string()) {
    return doc["message"]["content"].get<std::string>();
  }
  throw BackendError("completion body carries no assistant message");
}

HttpBackend::HttpBackend(HttpOptions options) : options_(std::move(options)) {
  const auto scheme_end = options_.url.find("://");
  if (scheme_end == std::string::npos) {
    throw InvalidArgument("endpoint URL needs a scheme: " + options_.url);
  }
  const std::string scheme = options_.url.substr(0, scheme_end);
  if (scheme != "http") {
    throw InvalidArgument("only plain http endpoints are supported (got " + scheme + ")");
  }
  const auto path_begin = options_.url.find('/', scheme_end + 3);
  scheme_host_port_ = options_.url.substr(0, path_begin);
  path_ = path_begin == std::string::npos ? "/" : options_.url.substr(path_begin);
  if (options_.max_in_flight == 0) throw InvalidArgument("max_in_flight must be positive");
  if (options_.max_retries < 0) throw InvalidArgument("max_retries must be >= 0");
}

std::string HttpBackend::complete(const PromptRequest& request) {
  if (request.user_text.empty()) throw InvalidArgument("prompt user_text is empty");
  SlotGuard slot(slots_mutex_, slots_cv_, in_flight_, options_.max_in_flight);

  const std::string body = chat_request_body(request, options_.model);
  httplib::Headers headers;
  if (!options_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + options_.api_key);
  }

  auto backoff = options_.initial_backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(backoff.count()) * options_.backoff_multiplier));
    }
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw BackendError("HTTP status " + std::to_string(res->status) + " from " + options_.url);
    }
    return extract_completion_text(res->body);
  }
  throw BackendError("chat completion failed after " + std::to_string(options_.max_retries + 1) +
                     " attempts: " + last_error);
}

}  // namespace nrfe::llm
