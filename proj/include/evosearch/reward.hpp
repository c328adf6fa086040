#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "evosearch/rollout.hpp"
#include "evosearch/search_env.hpp"

namespace evosearch {

enum class AnswerMode { Judge, F1, Recall };

inline const char* to_string(AnswerMode m) {
  switch (m) {
    case AnswerMode::Judge: return "judge";
    case AnswerMode::F1: return "f1";
    case AnswerMode::Recall: return "recall";
  }
  return "?";
}

// Hybrid reward breakdown. When the format check fails the answer is never
// evaluated: answer_reward is stored as 0 with answer_evaluated=false so logs
// can tell "wrong answer" from "never judged".
struct RewardBreakdown {
  double format_reward = 0.0;   // in {0, 1}
  double answer_reward = 0.0;   // in [0, 1]; binary under Judge and Recall
  double total = 0.0;           // 0.5 * (format + answer) when format holds, else 0
  AnswerMode mode = AnswerMode::Judge;
  bool answer_evaluated = false;

  bool operator==(const RewardBreakdown&) const = default;
};

inline double score_answer(std::string_view pred, std::string_view gold, AnswerMode mode,
                           const std::vector<std::string>* known_entities = nullptr) {
  switch (mode) {
    case AnswerMode::Judge: return judge_answer(pred, gold, known_entities);
    case AnswerMode::F1: return f1_score(pred, gold);
    case AnswerMode::Recall: return recall_reward(pred, gold);
  }
  return 0.0;
}

// One scored rollout: the unit of the line-delimited interchange log shared by
// the trainer, the data pool, the filters and the reports. The reward is the
// training-time score and is never recomputed under a different mode.
struct ScoredRollout {
  Rollout rollout;
  std::string rendered_text;
  RewardBreakdown reward;
  int tool_call_count = 0;
  int iteration_index = 0;
  uint64_t seed = 0;
};

// Format gate first, then the selected answer score on the <answer> payload.
inline RewardBreakdown hybrid_reward(std::string_view text, std::string_view gold, AnswerMode mode,
                                     const std::vector<std::string>* known_entities = nullptr) {
  RewardBreakdown out;
  out.mode = mode;
  auto parsed = parse_rollout(text);
  if (!parsed.ok) return out;
  out.format_reward = 1.0;
  const std::string* answer = nullptr;
  for (const Segment& s : parsed.rollout.segments)
    if (s.kind == SegmentKind::Answer) answer = &s.payload;
  out.answer_reward = answer ? score_answer(*answer, gold, mode, known_entities) : 0.0;
  out.answer_evaluated = true;
  out.total = 0.5 * (out.format_reward + out.answer_reward);
  return out;
}

}  // namespace evosearch
