#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "evosearch/io.hpp"
#include "evosearch/policy.hpp"
#include "evosearch/reward.hpp"

namespace evosearch {

// ---------------------------------------------------------------------------
// Held-out evaluation and report emission.
//
// Evaluation decodes greedily (argmax, one rollout per question) for
// reproducibility. Correctness uses the judge stand-in by default regardless
// of the training reward mode; --judge-mode swaps the scorer at report level.
// Under the F1 scorer, accuracy is the mean F1 score.
// ---------------------------------------------------------------------------

struct EvalConfig {
  int max_searches = 10;
  int search_top_k = 10;
  int token_cap = 512;
  uint64_t seed = 0;
  AnswerMode judge_mode = AnswerMode::Judge;
};

struct PerQuestionEval {
  std::string question_id;
  Split split = Split::EvalInDomain;
  std::string predicted;
  double score = 0.0;  // answer score under judge_mode
  bool correct = false;
  int tool_calls = 0;
};

struct EvalResult {
  double accuracy_id = 0.0;
  double accuracy_ood = 0.0;
  int n_id = 0;
  int n_ood = 0;
  double mean_tool_calls = 0.0;
  std::map<int, int> tool_call_histogram;
  std::vector<PerQuestionEval> per_question;
};

inline EvalResult evaluate(const PolicyParams& params, const Vocabulary& vocab,
                           const KnowledgeGraph& kg, const std::vector<Question>& questions,
                           const EvalConfig& cfg) {
  if (questions.empty()) throw std::invalid_argument("evaluate: empty question set");
  const std::vector<std::string> entities = kg.entity_names();

  RolloutSamplerConfig scfg;
  scfg.temperature = 0.0;  // greedy
  scfg.max_searches = cfg.max_searches;
  scfg.search_top_k = cfg.search_top_k;
  scfg.token_cap = cfg.token_cap;

  EvalResult out;
  double acc_id = 0.0, acc_ood = 0.0, tools = 0.0;
  for (size_t qi = 0; qi < questions.size(); ++qi) {
    const Question& q = questions[qi];
    auto s = sample_rollout(params, vocab, kg, q, scfg, derive_seed(cfg.seed, {0xe7a1ull, qi}));

    PerQuestionEval pq;
    pq.question_id = q.id;
    pq.split = q.split;
    if (s.format_valid) {
      for (const Segment& seg : s.rollout.segments)
        if (seg.kind == SegmentKind::Answer) pq.predicted = seg.payload;
      pq.tool_calls = count_tool_calls(s.rollout);
    } else {
      pq.tool_calls = s.executed_searches;
    }
    pq.score = pq.predicted.empty()
                   ? 0.0
                   : score_answer(pq.predicted, q.gold_answer, cfg.judge_mode, &entities);
    pq.correct = pq.score == 1.0;

    if (q.split == Split::EvalOutOfDomain) {
      acc_ood += pq.score;
      ++out.n_ood;
    } else {
      acc_id += pq.score;
      ++out.n_id;
    }
    tools += pq.tool_calls;
    out.tool_call_histogram[pq.tool_calls] += 1;
    out.per_question.push_back(std::move(pq));
  }
  out.accuracy_id = out.n_id ? acc_id / out.n_id : 0.0;
  out.accuracy_ood = out.n_ood ? acc_ood / out.n_ood : 0.0;
  out.mean_tool_calls = tools / double(questions.size());
  return out;
}

// --- report emission ----------------------------------------------------------------

namespace io {

inline json eval_result_to_json(const EvalResult& r) {
  json hist = json::object();
  for (const auto& [calls, count] : r.tool_call_histogram)
    hist[std::to_string(calls)] = count;
  json per_question = json::array();
  for (const auto& pq : r.per_question)
    per_question.push_back({{"question_id", pq.question_id},
                            {"split", to_string(pq.split)},
                            {"predicted", pq.predicted},
                            {"score", pq.score},
                            {"correct", pq.correct},
                            {"tool_calls", pq.tool_calls}});
  return json{{"accuracy_id", r.accuracy_id},
              {"accuracy_ood", r.accuracy_ood},
              {"n_id", r.n_id},
              {"n_ood", r.n_ood},
              {"mean_tool_calls", r.mean_tool_calls},
              {"tool_call_histogram", std::move(hist)},
              {"per_question", std::move(per_question)}};
}

inline EvalResult eval_result_from_json(const json& j) {
  EvalResult r;
  r.accuracy_id = j.at("accuracy_id").get<double>();
  r.accuracy_ood = j.at("accuracy_ood").get<double>();
  r.n_id = j.at("n_id").get<int>();
  r.n_ood = j.at("n_ood").get<int>();
  r.mean_tool_calls = j.at("mean_tool_calls").get<double>();
  for (const auto& [k, v] : j.at("tool_call_histogram").items())
    r.tool_call_histogram[std::stoi(k)] = v.get<int>();
  for (const auto& pj : j.at("per_question")) {
    PerQuestionEval pq;
    pq.question_id = pj.at("question_id").get<std::string>();
    std::string split = pj.at("split").get<std::string>();
    pq.split = split == "train"
                   ? Split::Train
                   : (split == "eval_id" ? Split::EvalInDomain : Split::EvalOutOfDomain);
    pq.predicted = pj.at("predicted").get<std::string>();
    pq.score = pj.at("score").get<double>();
    pq.correct = pj.at("correct").get<bool>();
    pq.tool_calls = pj.at("tool_calls").get<int>();
    r.per_question.push_back(std::move(pq));
  }
  return r;
}

}  // namespace io

// One evaluated model stage, the unit of the flat report table.
struct ReportRow {
  int iteration = 0;
  std::string stage;  // "sft" or "rl"
  EvalResult result;
};

namespace detail {

inline double split_accuracy(const EvalResult& r, bool ood) {
  return ood ? r.accuracy_ood : r.accuracy_id;
}

inline double split_mean_tool_calls(const EvalResult& r, bool ood) {
  double tools = 0.0;
  int n = 0;
  for (const auto& pq : r.per_question) {
    if ((pq.split == Split::EvalOutOfDomain) != ood) continue;
    tools += pq.tool_calls;
    ++n;
  }
  return n ? tools / n : 0.0;
}

inline std::string number_cell(double v) { return nlohmann::json(v).dump(); }

}  // namespace detail

// Writes summary.json plus a flat table.csv with one row per
// iteration x stage x split, suitable for external plotting. Byte-stable for
// identical inputs.
inline void emit_report(const nlohmann::json& run_metadata, const std::vector<ReportRow>& rows,
                        const std::filesystem::path& out_dir) {
  nlohmann::json summary;
  summary["metadata"] = run_metadata;
  nlohmann::json jrows = nlohmann::json::array();
  for (const ReportRow& row : rows)
    jrows.push_back({{"iteration", row.iteration},
                     {"stage", row.stage},
                     {"result", io::eval_result_to_json(row.result)}});
  summary["rows"] = std::move(jrows);
  io::write_file(out_dir / "summary.json", summary.dump(2) + "\n");

  std::string csv = "iteration,stage,split,accuracy,n_questions,mean_tool_calls\n";
  for (const ReportRow& row : rows) {
    for (bool ood : {false, true}) {
      csv += std::to_string(row.iteration);
      csv += ',';
      csv += row.stage;
      csv += ',';
      csv += ood ? "ood" : "id";
      csv += ',';
      csv += detail::number_cell(detail::split_accuracy(row.result, ood));
      csv += ',';
      csv += std::to_string(ood ? row.result.n_ood : row.result.n_id);
      csv += ',';
      csv += detail::number_cell(detail::split_mean_tool_calls(row.result, ood));
      csv += '\n';
    }
  }
  io::write_file(out_dir / "table.csv", csv);
}

}  // namespace evosearch
