// SPDX-License-Identifier: Apache-2.0
#include "nrfe/llm_gateway.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <regex>
#include <sstream>

namespace nrfe::llm {

namespace {

constexpr std::string_view kSystemText =
    "You are a careful news-credibility analyst. You rate how credible a news item is "
    "on an integer scale from 0 (certainly fake) to 100 (certainly real), and you "
    "follow the requested output format exactly.";

constexpr std::string_view kAnswerFormat =
    "Respond in exactly this format and nothing else:\n"
    "REASONING: <your reasoning, one or more sentences>\n"
    "SCORE: <integer from 0 to 100: the credibility of the news item after taking your "
    "reasoning into account>\n";

std::string_view opposite(BinaryLabel label) {
  return label == BinaryLabel::Real ? "fake" : "real";
}

double temperature_for(ReasoningType type, const SamplingOptions& sampling) {
  return type == ReasoningType::Negative ? sampling.negative_temperature
                                         : sampling.positive_temperature;
}

void write_context(std::ostringstream& out, std::string_view news, BinaryLabel label,
                   ReasoningType type, CredibilityScore v_initial, AlterationState alteration) {
  out << "News item:\n<<<\n" << news << "\n>>>\n\n"
      << "Ground-truth label: this news item is " << to_string(label) << ".\n"
      << "Requested reasoning type: " << to_string(type) << ".\n"
      << "Initial credibility score (rated without any reasoning): " << v_initial.value()
      << " on a 0 (fake) to 100 (real) scale.\n"
      << "Required alteration of the credibility score: " << to_string(alteration) << ".\n\n";
}

void write_task(std::ostringstream& out, BinaryLabel label, ReasoningType type,
                CredibilityScore v_initial, AlterationState alteration) {
  const std::string_view verb = alteration == AlterationState::Increase ? "raise" : "lower";
  if (type == ReasoningType::Positive) {
    out << "Task: write positive reasoning that supports the ground-truth label, explaining "
           "why this news item is "
        << to_string(label) << ". Your reasoning should " << to_string(alteration)
        << " the credibility score relative to the initial score of " << v_initial.value()
        << ", that is, " << verb << " the credibility of this " << to_string(label)
        << " news.\n\n";
  } else {
    out << "Task: write negative reasoning that argues against the ground-truth label. "
           "Argue, even with plausible but mistaken claims, that this "
        << to_string(label) << " news item is actually " << opposite(label)
        << ". Your reasoning should " << to_string(alteration)
        << " the credibility score relative to the initial score of " << v_initial.value()
        << ", that is, " << verb << " the credibility of this " << to_string(label)
        << " news.\n\n";
  }
}

std::string trim(std::string_view s) {
  auto is_trim = [](unsigned char c) { return std::isspace(c) || c == '*'; };
  while (!s.empty() && is_trim(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_trim(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

struct ScoreMatch {
  std::size_t tag_begin;
  std::string digits;
  bool negative;
};

std::optional<ScoreMatch> last_score(std::string_view raw) {
  static const std::regex kScore(R"(SCORE\**[ \t]*:[ \t]*\**[ \t]*(-?)([0-9]+))");
  std::optional<ScoreMatch> last;
  const std::string text(raw);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kScore);
       it != std::sregex_iterator(); ++it) {
    last = ScoreMatch{static_cast<std::size_t>(it->position(0)), (*it)[2].str(),
                      (*it)[1].length() > 0};
  }
  return last;
}

CredibilityScore score_from(const ScoreMatch& m) {
  std::optional<CredibilityScore> score;
  if (!m.negative && m.digits.size() <= 6) score = CredibilityScore::checked(std::stoll(m.digits));
  if (!score) {
    throw ResponseParseError(ResponseParseError::Reason::ScoreOutOfRange,
                             "SCORE " + std::string(m.negative ? "-" : "") + m.digits +
                                 " is outside [0, 100]");
  }
  return *score;
}

}  // namespace

PromptRequest render_rating_prompt(std::string_view news, const SamplingOptions& sampling) {
  std::ostringstream out;
  out << "Rate the credibility of the following news item.\n\n"
      << "News item:\n<<<\n" << news << "\n>>>\n\n"
      << "Answer with a single line of the form:\n"
      << "SCORE: <integer from 0 (certainly fake) to 100 (certainly real)>\n";
  return {std::string(kSystemText), out.str(), sampling.rating_temperature,
          sampling.rating_max_tokens};
}

PromptRequest render_initial_prompt(std::string_view news, BinaryLabel label, ReasoningType type,
                                    CredibilityScore v_initial, AlterationState alteration,
                                    const SamplingOptions& sampling) {
  std::ostringstream out;
  write_context(out, news, label, type, v_initial, alteration);
  write_task(out, label, type, v_initial, alteration);
  out << kAnswerFormat;
  return {std::string(kSystemText), out.str(), temperature_for(type, sampling),
          sampling.reasoning_max_tokens};
}

PromptRequest render_rectify_prompt(std::string_view news, BinaryLabel label, ReasoningType type,
                                    CredibilityScore v_initial, AlterationState alteration,
                                    std::string_view previous_reasoning,
                                    CredibilityScore previous_score,
                                    const ScoreThresholds& thresholds,
                                    const SamplingOptions& sampling) {
  if (trim(previous_reasoning).empty()) {
    throw InvalidArgument("rectification needs the previous reasoning text");
  }
  const int v = previous_score.value();
  const int v0 = v_initial.value();
  const int target = v0 + thresholds.increment;

  std::vector<std::string> failures;
  if (alteration == AlterationState::Decrease && v - v0 > thresholds.increment) {
    failures.push_back("the score " + std::to_string(v) +
                       " did not decrease relative to the initial score " + std::to_string(v0));
  }
  if (alteration == AlterationState::Increase && v - v0 < thresholds.increment) {
    failures.push_back("the score " + std::to_string(v) +
                       " did not increase relative to the initial score " + std::to_string(v0));
  }
  if (type == ReasoningType::Positive) {
    if (label == BinaryLabel::Fake && v > thresholds.polarity) {
      failures.push_back("the score " + std::to_string(v) + " is above the polarity threshold " +
                         std::to_string(thresholds.polarity) +
                         ", so it no longer reflects that the news is fake");
    }
    if (label == BinaryLabel::Real && v < thresholds.polarity) {
      failures.push_back("the score " + std::to_string(v) + " is below the polarity threshold " +
                         std::to_string(thresholds.polarity) +
                         ", so it no longer reflects that the news is real");
    }
  }
  if (failures.empty()) {
    failures.push_back("the score change from " + std::to_string(v0) + " to " +
                       std::to_string(v) + " was not sufficient");
  }

  std::ostringstream out;
  write_context(out, news, label, type, v_initial, alteration);
  write_task(out, label, type, v_initial, alteration);
  out << "Your previous reasoning was:\n<<<\n" << previous_reasoning << "\n>>>\n"
      << "Your previous score was " << v << ".\n\n"
      << "The previous answer did not meet the requirements: ";
  for (std::size_t k = 0; k < failures.size(); ++k) {
    out << (k ? "; " : "") << failures[k];
  }
  out << ".\nRevise the reasoning so that it meets them and rate the news again. ";
  if (alteration == AlterationState::Increase) {
    out << "Your new SCORE must be above " << target;
  } else {
    out << "Your new SCORE must be below " << target;
  }
  if (type == ReasoningType::Positive) {
    out << (label == BinaryLabel::Fake ? " and must not exceed " : " and must not fall below ")
        << thresholds.polarity;
  }
  out << (alteration == AlterationState::Increase ? " (an increase)" : " (a decrease)")
      << ".\n\n" << kAnswerFormat;
  return {std::string(kSystemText), out.str(), temperature_for(type, sampling),
          sampling.reasoning_max_tokens};
}

ParsedReasoning parse_response(std::string_view raw) {
  const auto score = last_score(raw);
  if (!score) {
    throw ResponseParseError(ResponseParseError::Reason::MissingScore,
                             "response has no SCORE tag");
  }
  static const std::regex kReasoning(R"(REASONING\**[ \t]*:[ \t]*\**)");
  const std::string head(raw.substr(0, score->tag_begin));
  std::smatch m;
  std::string body = head;
  if (std::regex_search(head, m, kReasoning)) {
    body = head.substr(static_cast<std::size_t>(m.position(0) + m.length(0)));
  }
  ParsedReasoning parsed;
  parsed.reasoning_text = trim(body);
  if (parsed.reasoning_text.empty()) {
    throw ResponseParseError(ResponseParseError::Reason::EmptyReasoning,
                             "response has an empty REASONING block");
  }
  parsed.score = score_from(*score);
  return parsed;
}

CredibilityScore parse_score(std::string_view raw) {
  const auto score = last_score(raw);
  if (!score) {
    throw ResponseParseError(ResponseParseError::Reason::MissingScore,
                             "response has no SCORE tag");
  }
  return score_from(*score);
}

MockBackend::MockBackend(std::vector<std::string> script)
    : script_(std::make_move_iterator(script.begin()), std::make_move_iterator(script.end())) {}

std::string MockBackend::complete(const PromptRequest& request) {
  std::lock_guard lock(mutex_);
  requests_.push_back(request);
  if (script_.empty()) throw ScriptExhausted("mock backend script exhausted");
  std::string reply = std::move(script_.front());
  script_.pop_front();
  return reply;
}

void MockBackend::push(std::string reply) {
  std::lock_guard lock(mutex_);
  script_.push_back(std::move(reply));
}

std::size_t MockBackend::calls() const {
  std::lock_guard lock(mutex_);
  return requests_.size();
}

std::size_t MockBackend::remaining() const {
  std::lock_guard lock(mutex_);
  return script_.size();
}

std::vector<PromptRequest> MockBackend::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

Gateway::Gateway(Backend& backend, GatewayOptions options)
    : backend_(backend), options_(options) {
  if (options_.parse_retries < 0) throw InvalidArgument("parse_retries must be >= 0");
}

CredibilityScore Gateway::rate_initial_credibility(std::string_view news) {
  const PromptRequest request = render_rating_prompt(news, options_.sampling);
  std::string last_error;
  for (int attempt = 0; attempt <= options_.parse_retries; ++attempt) {
    try {
      return parse_score(backend_.complete(request));
    } catch (const ResponseParseError& e) {
      last_error = e.what();
    }
  }
  throw ParseBudgetExhausted("credibility rating unparseable after " +
                             std::to_string(options_.parse_retries + 1) +
                             " attempts: " + last_error);
}

ParsedReasoning Gateway::request_reasoning(const PromptRequest& request) {
  std::string last_error;
  for (int attempt = 0; attempt <= options_.parse_retries; ++attempt) {
    try {
      return parse_response(backend_.complete(request));
    } catch (const ResponseParseError& e) {
      last_error = e.what();
    }
  }
  throw ParseBudgetExhausted("reasoning reply unparseable after " +
                             std::to_string(options_.parse_retries + 1) +
                             " attempts: " + last_error);
}

}  // namespace nrfe::llm
