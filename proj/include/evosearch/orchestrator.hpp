#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "evosearch/eval_report.hpp"
#include "evosearch/grpo.hpp"
#include "evosearch/io.hpp"
#include "evosearch/priming.hpp"
#include "evosearch/rsft.hpp"

namespace evosearch {

// ---------------------------------------------------------------------------
// The outer self-evolution loop: shard the training questions into N parts,
// then for i = 1..N filter the data pool, fine-tune the fixed base on the
// filtered corpus (skipped while the pool is empty, so iteration 1 starts RL
// from the base), run RL on shard i, merge the RL rollouts into the pool, and
// evaluate both stage models.
//
// Each completed iteration persists
//   <run_dir>/<iii>/{filtered.jsonl, sft.ckpt, rl.ckpt, pool-delta.jsonl,
//                    report.json, DONE}
// and the DONE marker makes interrupted runs resumable: completed iterations
// are reloaded instead of re-run, which reproduces the uninterrupted run
// bit-for-bit.
// ---------------------------------------------------------------------------

struct TooFewQuestions : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EvolveConfig {
  int iterations = 3;
  uint64_t master_seed = 1;
  uint64_t shard_seed = 1;
  AnswerMode mode = AnswerMode::Judge;
  GrpoConfig grpo;
  FilterConfig filter;
  SftConfig sft;
  RolloutSamplerConfig sampler;  // rollout knobs for training
  BasePolicyConfig base;
  EvalConfig eval;          // seed field is overridden per iteration
  std::string run_dir;      // empty disables persistence
};

struct IterationReport {
  int iteration = 0;
  size_t pool_before = 0;
  size_t pool_after = 0;
  size_t filtered_size = 0;
  bool sft_skipped = false;
  double sft_final_loss = 0.0;
  double rl_first_batch_reward = 0.0;
  double rl_last_batch_reward = 0.0;
  EvalResult sft_eval;
  EvalResult rl_eval;
};

// Seeded shuffle, then a contiguous split into N parts with sizes differing by
// at most one; tags each question with its shard index.
inline std::vector<std::vector<Question>> split_shards(std::vector<Question> questions, int n,
                                                       uint64_t seed) {
  if (n < 1) throw TooFewQuestions("split_shards: need n >= 1");
  if (int(questions.size()) < n)
    throw TooFewQuestions("split_shards: fewer questions than shards");
  Rng rng(derive_seed(seed, {0x1dull}));
  rng.shuffle(questions);

  std::vector<std::vector<Question>> shards(static_cast<size_t>(n));
  const size_t base = questions.size() / size_t(n);
  const size_t extra = questions.size() % size_t(n);
  size_t pos = 0;
  for (size_t s = 0; s < size_t(n); ++s) {
    size_t len = base + (s < extra ? 1 : 0);
    for (size_t i = 0; i < len; ++i) {
      questions[pos].shard = int(s);
      shards[s].push_back(std::move(questions[pos]));
      ++pos;
    }
  }
  return shards;
}

struct EvolveState {
  KnowledgeGraph kg;
  Vocabulary vocab;
  std::vector<std::vector<Question>> shards;
  std::vector<Question> eval_questions;
  PolicySnapshot base;
  DataPool pool;
  EvolveConfig config;
};

namespace detail {

inline std::filesystem::path iteration_dir(const std::string& run_dir, int iteration) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%03d", iteration);
  return std::filesystem::path(run_dir) / buf;
}

inline nlohmann::json iteration_report_to_json(const IterationReport& r) {
  return nlohmann::json{{"iteration", r.iteration},
                        {"pool_before", r.pool_before},
                        {"pool_after", r.pool_after},
                        {"filtered_size", r.filtered_size},
                        {"sft_skipped", r.sft_skipped},
                        {"sft_final_loss", r.sft_final_loss},
                        {"rl_first_batch_reward", r.rl_first_batch_reward},
                        {"rl_last_batch_reward", r.rl_last_batch_reward},
                        {"sft_eval", io::eval_result_to_json(r.sft_eval)},
                        {"rl_eval", io::eval_result_to_json(r.rl_eval)}};
}

inline IterationReport iteration_report_from_json(const nlohmann::json& j) {
  IterationReport r;
  r.iteration = j.at("iteration").get<int>();
  r.pool_before = j.at("pool_before").get<size_t>();
  r.pool_after = j.at("pool_after").get<size_t>();
  r.filtered_size = j.at("filtered_size").get<size_t>();
  r.sft_skipped = j.at("sft_skipped").get<bool>();
  r.sft_final_loss = j.at("sft_final_loss").get<double>();
  r.rl_first_batch_reward = j.at("rl_first_batch_reward").get<double>();
  r.rl_last_batch_reward = j.at("rl_last_batch_reward").get<double>();
  r.sft_eval = io::eval_result_from_json(j.at("sft_eval"));
  r.rl_eval = io::eval_result_from_json(j.at("rl_eval"));
  return r;
}

}  // namespace detail

struct IterationOutcome {
  PolicyParams rl_params;
  IterationReport report;
};

// One Algorithm-1 loop body: filter -> SFT (or skip) -> RL -> pool merge ->
// evaluate -> persist.
inline IterationOutcome run_iteration(int iteration, EvolveState& state) {
  const EvolveConfig& cfg = state.config;
  if (iteration < 1 || iteration > int(state.shards.size()))
    throw std::invalid_argument("run_iteration: iteration out of range");

  IterationReport report;
  report.iteration = iteration;
  report.pool_before = state.pool.size();

  // (1)-(2) read the pool and filter it.
  auto filtered = apply_filter_pipeline(state.pool.records, cfg.filter);
  report.filtered_size = filtered.records.size();

  // (3) SFT from the fixed base; an empty corpus (iteration 1) skips the stage.
  PolicyParams sft_params = state.base.params;
  std::vector<ScoredRollout> corpus;
  for (const ScoredRollout& rec : filtered.records) {
    if (rec.rollout.segments.empty()) continue;  // format-invalid record, not trainable
    ScoredRollout copy = rec;
    encode_rollout_tokens(state.vocab, copy.rollout);
    corpus.push_back(std::move(copy));
  }
  if (corpus.empty()) {
    report.sft_skipped = true;
  } else {
    sft_params = sft_train(state.base, corpus,cfg.sft,
                           derive_seed(cfg.master_seed, {0x5f7ull, uint64_t(iteration)}));
    double loss = 0.0;
    for (const ScoredRollout& rec : corpus) loss += sft_loss_and_gradient(sft_params, rec).loss;
    report.sft_final_loss = loss / double(corpus.size());
  }

  // (4) RL on shard i.
  const std::vector<Question>& shard = state.shards[size_t(iteration - 1)];
  auto rl = rl_train(sft_params, shard, state.kg, state.vocab, cfg.mode, cfg.grpo, cfg.sampler,
                     derive_seed(cfg.master_seed, {0x71ull, uint64_t(iteration)}), iteration);
  if (!rl.metrics.empty()) {
    report.rl_first_batch_reward = rl.metrics.front().mean_reward;
    report.rl_last_batch_reward = rl.metrics.back().mean_reward;
  }

  // (5) merge rollouts into the pool.
  state.pool.append(rl.collected);
  report.pool_after = state.pool.size();

  // (6) evaluate both stage models.
  EvalConfig eval_cfg = cfg.eval;
  eval_cfg.seed = derive_seed(cfg.master_seed, {0xe7ull, uint64_t(iteration), 0});
  report.sft_eval = evaluate(sft_params, state.vocab, state.kg, state.eval_questions, eval_cfg);
  eval_cfg.seed = derive_seed(cfg.master_seed, {0xe7ull, uint64_t(iteration), 1});
  report.rl_eval = evaluate(rl.params, state.vocab, state.kg, state.eval_questions, eval_cfg);

  if (!cfg.run_dir.empty()) {
    auto dir = detail::iteration_dir(cfg.run_dir, iteration);
    std::filesystem::create_directories(dir);
    io::save_records(filtered.records, dir / "filtered.jsonl");
    io::save_checkpoint(sft_params, dir / "sft.ckpt");
    io::save_checkpoint(rl.params, dir / "rl.ckpt");
    io::save_records(rl.collected, dir / "pool-delta.jsonl");
    io::write_file(dir / "report.json",
                   detail::iteration_report_to_json(report).dump(2) + "\n");
    nlohmann::json audit{{"input", filtered.audit.input},
                         {"after_hrs", filtered.audit.after_hrs},
                         {"after_sqd", filtered.audit.after_sqd},
                         {"after_mcs", filtered.audit.after_mcs}};
    io::write_file(dir / "filter-audit.json", audit.dump(2) + "\n");
    std::string metrics;
    for (const BatchMetrics& m : rl.metrics) {
      metrics += nlohmann::json{{"batch_index", m.batch_index},
                                {"mean_reward", m.mean_reward},
                                {"format_rate", m.format_rate},
                                {"mean_tool_calls", m.mean_tool_calls},
                                {"objective", m.objective},
                                {"gradient_norm", m.gradient_norm}}
                     .dump();
      metrics += '\n';
    }
    io::write_file(dir / "rl-metrics.jsonl", metrics);
    io::write_file(dir / "DONE", "done\n");  // completion marker, written last
  }

  return IterationOutcome{std::move(rl.params), std::move(report)};
}

struct EvolveRun {
  PolicyParams final_params;
  std::vector<IterationReport> reports;
};

// Runs iterations 1..N, resuming past completed iteration directories when a
// run_dir is set.
inline EvolveRun evolve(const KnowledgeGraph& kg, const std::vector<Question>& train_questions,
                        const std::vector<Question>& eval_questions, const EvolveConfig& cfg) {
  EvolveState state{kg, Vocabulary::build(kg), {}, eval_questions, PolicySnapshot{}, DataPool{},
                    cfg};
  state.shards = split_shards(train_questions, cfg.iterations, cfg.shard_seed);

  // Eval questions must stay out of every training shard.
  std::set<std::string> train_ids;
  for (const auto& shard : state.shards)
    for (const auto& q : shard) train_ids.insert(q.id);
  for (const auto& q : eval_questions)
    if (train_ids.count(q.id))
      throw std::invalid_argument("evolve: eval question " + q.id + " appears in training data");

  state.base = PolicySnapshot::of(
      make_base_policy(kg, state.vocab, cfg.base, derive_seed(cfg.master_seed, {0xba5eull})),
      SnapshotRole::Base);

  EvolveRun run;
  run.final_params = state.base.params;
  for (int i = 1; i <= cfg.iterations; ++i) {
    if (!cfg.run_dir.empty()) {
      auto dir = detail::iteration_dir(cfg.run_dir, i);
      if (std::filesystem::exists(dir / "DONE")) {
        auto delta = io::load_records(dir / "pool-delta.jsonl");
        state.pool.append(delta);
        run.final_params = io::load_checkpoint(dir / "rl.ckpt");
        run.reports.push_back(detail::iteration_report_from_json(
            nlohmann::json::parse(io::read_file(dir / "report.json"))));
        continue;
      }
    }
    auto outcome = run_iteration(i, state);
    run.final_params = std::move(outcome.rl_params);
    run.reports.push_back(std::move(outcome.report));
  }
  return run;
}

}  // namespace evosearch
