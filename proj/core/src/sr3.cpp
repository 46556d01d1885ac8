// SPDX-License-Identifier: Apache-2.0
#include "nrfe/sr3.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace nrfe::sr3 {

void validate(const Sr3Config& cfg) {
  if (cfg.max_iter < 1) throw InvalidArgument("max_iter must be >= 1");
  if (cfg.polarity_threshold < 0 || cfg.polarity_threshold > 100) {
    throw InvalidArgument("polarity threshold must lie in [0, 100]");
  }
  if (cfg.parse_retries < 0) throw InvalidArgument("parse_retries must be >= 0");
  if (cfg.workers < 1) throw InvalidArgument("workers must be >= 1");
}

AlterationState select_alteration(BinaryLabel label, ReasoningType type) {
  const bool fake = label == BinaryLabel::Fake;
  if (type == ReasoningType::Positive) {
    return fake ? AlterationState::Decrease : AlterationState::Increase;
  }
  return fake ? AlterationState::Increase : AlterationState::Decrease;
}

bool needs_rectify(BinaryLabel label, ReasoningType type, CredibilityScore v,
                   CredibilityScore v_initial, const Sr3Config& cfg) {
  const int score = v.value();
  const int delta = score - v_initial.value();
  const int m = cfg.polarity_threshold;
  const int inc = cfg.confidence_increment;
  const bool fake = label == BinaryLabel::Fake;

  if (type == ReasoningType::Positive) {
    const bool polarity_violated = fake ? score > m : score < m;
    const bool confidence_violated = fake ? delta > inc : delta < inc;
    return cfg.strict_conjunction ? (polarity_violated || confidence_violated)
                                  : (polarity_violated && confidence_violated);
  }
  return fake ? delta < inc : delta > inc;
}

Sr3Outcome rectify_one(const NewsItem& item, ReasoningType type, llm::Gateway& gateway,
                       const Sr3Config& cfg, std::optional<CredibilityScore> v_initial) {
  validate(cfg);
  std::vector<CredibilityScore> trace;
  try {
    const CredibilityScore v0 = v_initial ? *v_initial : gateway.rate_initial_credibility(item.text);
    const AlterationState alteration = select_alteration(item.label, type);
    const auto& sampling = gateway.options().sampling;
    const llm::ScoreThresholds thresholds{cfg.polarity_threshold, cfg.confidence_increment};

    llm::ParsedReasoning current = gateway.request_reasoning(
        llm::render_initial_prompt(item.text, item.label, type, v0, alteration, sampling));
    trace.push_back(current.score);

    int iterations = 0;
    while (needs_rectify(item.label, type, current.score, v0, cfg) && iterations < cfg.max_iter) {
      current = gateway.request_reasoning(llm::render_rectify_prompt(
          item.text, item.label, type, v0, alteration, current.reasoning_text, current.score,
          thresholds, sampling));
      trace.push_back(current.score);
      ++iterations;
    }

    Sr3Outcome outcome;
    outcome.v_initial = v0;
    outcome.record.news_id = item.id;
    outcome.record.kind = type;
    outcome.record.reasoning_text = current.reasoning_text;
    outcome.record.score = current.score;
    outcome.record.iterations_used = iterations;
    outcome.record.score_trace = std::move(trace);
    outcome.record.qualified = !needs_rectify(item.label, type, current.score, v0, cfg);
    outcome.terminal_reason = outcome.record.qualified ? TerminalReason::Qualified
                                                       : TerminalReason::BudgetExhausted;
    return outcome;
  } catch (const RectifyError&) {
    throw;
  } catch (const Error& e) {
    throw RectifyError(std::string("rectification of ") + item.id + " (" +
                           std::string(to_string(type)) + ") failed: " + e.what(),
                       std::move(trace));
  }
}

CorpusSummary rectify_corpus(std::span<const NewsItem> items, llm::Gateway& gateway,
                             const Sr3Config& cfg, const std::filesystem::path& store_path) {
  validate(cfg);
  StoreAppender store(store_path);

  std::mutex summary_mutex;
  CorpusSummary summary;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr fatal;

  auto work = [&] {
    while (!abort.load()) {
      const std::size_t index = next.fetch_add(1);
      if (index >= items.size()) return;
      const NewsItem& item = items[index];

      std::vector<ReasoningType> pending;
      for (ReasoningType t : {ReasoningType::Positive, ReasoningType::Negative}) {
        if (!store.contains(item.id, t)) pending.push_back(t);
      }
      if (pending.empty()) {
        std::lock_guard lock(summary_mutex);
        summary.skipped += 2;
        continue;
      }

      try {
        std::optional<CredibilityScore> v0;
        try {
          v0 = gateway.rate_initial_credibility(item.text);
        } catch (const Error&) {
          std::lock_guard lock(summary_mutex);
          summary.errored += pending.size();
          continue;
        }
        for (ReasoningType t : pending) {
          try {
            const Sr3Outcome outcome = rectify_one(item, t, gateway, cfg, v0);
            store.append(outcome.record);
            std::lock_guard lock(summary_mutex);
            if (outcome.terminal_reason == TerminalReason::Qualified) {
              ++summary.qualified;
            } else {
              ++summary.exhausted;
            }
          } catch (const RectifyError&) {
            std::lock_guard lock(summary_mutex);
            ++summary.errored;
          }
        }
      } catch (...) {
        std::lock_guard lock(summary_mutex);
        if (!fatal) fatal = std::current_exception();
        abort.store(true);
        return;
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(
      1, std::min<std::size_t>(static_cast<std::size_t>(cfg.workers),
                               gateway.backend().max_concurrency()));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < workers; ++k) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);
  return summary;
}

}  // namespace nrfe::sr3
