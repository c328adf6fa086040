#include "evosearch/orchestrator.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <set>

namespace evosearch {
namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("evosearch_orch_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TEST(SplitShards, SingletonsAndEvenSplit) {
  auto kg = generate_world(2, 40, 4);
  auto qs = generate_questions(kg, {{1, 1.0}}, 10, Split::Train, 1);
  auto shards = split_shards(qs, 10, 5);
  ASSERT_EQ(shards.size(), 10u);
  for (const auto& s : shards) EXPECT_EQ(s.size(), 1u);

  auto qs2 = generate_questions(kg, {{1, 0.5}, {2, 0.5}}, 103, Split::Train, 2);
  auto shards2 = split_shards(qs2, 10, 5);
  int elevens = 0, tens = 0;
  for (const auto& s : shards2) {
    if (s.size() == 11) ++elevens;
    if (s.size() == 10) ++tens;
  }
  EXPECT_EQ(elevens, 3);
  EXPECT_EQ(tens, 7);

  auto again = split_shards(qs2, 10, 5);
  for (size_t i = 0; i < shards2.size(); ++i) EXPECT_EQ(shards2[i], again[i]);

  EXPECT_THROW(split_shards(qs, 11, 5), TooFewQuestions);
}

TEST(SplitShards, DisjointAndCoveringProperty) {
  auto kg = generate_world(2, 40, 4);
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    int n_q = 5 + rng.next_int(60);
    int n_shards = 1 + rng.next_int(std::min(n_q, 8));
    auto qs = generate_questions(kg, {{1, 0.6}, {2, 0.4}}, n_q, Split::Train, 100 + trial);
    auto shards = split_shards(qs, n_shards, rng.next_u64());
    std::set<std::string> seen;
    size_t total = 0, max_size = 0, min_size = size_t(-1);
    for (size_t s = 0; s < shards.size(); ++s) {
      total += shards[s].size();
      max_size = std::max(max_size, shards[s].size());
      min_size = std::min(min_size, shards[s].size());
      for (const auto& q : shards[s]) {
        EXPECT_TRUE(seen.insert(q.id).second) << "duplicate " << q.id;
        EXPECT_EQ(q.shard, int(s));
      }
    }
    EXPECT_EQ(total, qs.size());
    EXPECT_LE(max_size - min_size, 1u);
  }
}

struct SmallRun {
  KnowledgeGraph kg;
  std::vector<Question> train, eval;
  EvolveConfig cfg;
};

SmallRun small_run(std::string run_dir) {
  SmallRun r;
  r.kg = generate_world(31, 40, 4);
  r.train = generate_questions(r.kg, {{1, 0.75}, {2, 0.25}}, 24, Split::Train, 11);
  r.eval = generate_questions(r.kg, {{1, 1.0}}, 6, Split::EvalInDomain, 12);
  auto ood = generate_questions(r.kg, {{1, 1.0}}, 4, Split::EvalOutOfDomain, 13);
  r.eval.insert(r.eval.end(), ood.begin(), ood.end());

  EvolveConfig& cfg = r.cfg;
  cfg.iterations = 2;
  cfg.master_seed = 7;
  cfg.shard_seed = 8;
  cfg.grpo.group_size = 4;
  cfg.grpo.batch_size = 6;
  cfg.grpo.learning_rate = 0.02;
  cfg.filter.delta = 0.7;
  cfg.filter.top_k = 50;
  cfg.sft.learning_rate = 0.05;
  cfg.sft.batch_size = 8;
  cfg.sft.epochs = 1;
  cfg.sampler.max_searches = 2;
  cfg.sampler.search_top_k = 1;
  cfg.sampler.token_cap = 72;
  cfg.base.context_window = 16;
  cfg.base.hidden = 8;
  cfg.base.demo_count = 10;
  cfg.base.prime_epochs = 8;
  cfg.eval.max_searches = 2;
  cfg.eval.search_top_k = 1;
  cfg.eval.token_cap = 72;
  cfg.run_dir = std::move(run_dir);
  return r;
}

TEST(Evolve, IterationOneSkipsSftAndPoolAccountingHolds) {
  auto r = small_run("");
  auto run = evolve(r.kg, r.train, r.eval, r.cfg);
  ASSERT_EQ(run.reports.size(), 2u);

  const auto& it1 = run.reports[0];
  EXPECT_TRUE(it1.sft_skipped);
  EXPECT_EQ(it1.pool_before, 0u);
  EXPECT_EQ(it1.pool_after, size_t(12 * r.cfg.grpo.group_size));  // shard 1 has 12 questions

  const auto& it2 = run.reports[1];
  EXPECT_EQ(it2.pool_before, it1.pool_after);
  EXPECT_EQ(it2.pool_after, it2.pool_before + size_t(12 * r.cfg.grpo.group_size));
  EXPECT_EQ(it2.iteration, 2);
}

TEST(Evolve, DeterministicReplay) {
  auto r = small_run("");
  auto a = evolve(r.kg, r.train, r.eval, r.cfg);
  auto b = evolve(r.kg, r.train, r.eval, r.cfg);
  EXPECT_EQ(a.final_params.values, b.final_params.values);
  ASSERT_EQ(a.reports.size(), b.reports.size());
  for (size_t i = 0; i < a.reports.size(); ++i) {
    EXPECT_EQ(a.reports[i].rl_eval.accuracy_id, b.reports[i].rl_eval.accuracy_id);
    EXPECT_EQ(a.reports[i].pool_after, b.reports[i].pool_after);
  }
}

TEST(Evolve, PersistsArtifactsAndResumes) {
  TempDir tmp;
  auto r = small_run((tmp.path / "run").string());
  auto first = evolve(r.kg, r.train, r.eval, r.cfg);

  for (int i = 1; i <= 2; ++i) {
    auto dir = tmp.path / "run" / (i == 1 ? "001" : "002");
    for (const char* f :
         {"filtered.jsonl", "sft.ckpt", "rl.ckpt", "pool-delta.jsonl", "report.json", "DONE"})
      EXPECT_TRUE(fs::exists(dir / f)) << i << "/" << f;
  }
  auto final_bytes = io::read_file(tmp.path / "run" / "002" / "rl.ckpt");

  // Full resume: nothing recomputed, same outcome.
  auto resumed = evolve(r.kg, r.train, r.eval, r.cfg);
  EXPECT_EQ(resumed.final_params.values, first.final_params.values);

  // Partial resume: wipe iteration 2, rerun, same bytes.
  fs::remove_all(tmp.path / "run" / "002");
  auto partial = evolve(r.kg, r.train, r.eval, r.cfg);
  EXPECT_EQ(partial.final_params.values, first.final_params.values);
  EXPECT_EQ(io::read_file(tmp.path / "run" / "002" / "rl.ckpt"), final_bytes);
  for (size_t i = 0; i < first.reports.size(); ++i) {
    EXPECT_EQ(partial.reports[i].rl_eval.accuracy_id, first.reports[i].rl_eval.accuracy_id);
    EXPECT_EQ(partial.reports[i].pool_after, first.reports[i].pool_after);
  }
}

TEST(Evolve, SingleIterationEqualsPlainRlFromBase) {
  auto r = small_run("");
  r.cfg.iterations = 1;
  auto run = evolve(r.kg, r.train, r.eval, r.cfg);

  // Reproduce the same path by hand: base, one shard, one RL call.
  auto vocab = Vocabulary::build(r.kg);
  auto base = make_base_policy(r.kg, vocab, r.cfg.base,
                               derive_seed(r.cfg.master_seed, {0xba5eull}));
  auto shards = split_shards(r.train, 1, r.cfg.shard_seed);
  auto rl = rl_train(base, shards[0], r.kg, vocab, r.cfg.mode, r.cfg.grpo, r.cfg.sampler,
                     derive_seed(r.cfg.master_seed, {0x71ull, 1ull}), 1);
  EXPECT_EQ(run.final_params.values, rl.params.values);
  EXPECT_TRUE(run.reports[0].sft_skipped);
}

TEST(Evolve, RejectsEvalQuestionsInsideTrainingData) {
  auto r = small_run("");
  std::vector<Question> bad_eval = r.eval;
  bad_eval.push_back(r.train[0]);
  EXPECT_THROW(evolve(r.kg, r.train, bad_eval, r.cfg), std::invalid_argument);
}

TEST(Evolve, EvalIdsNeverEnterThePool) {
  TempDir tmp;
  auto r = small_run((tmp.path / "run").string());
  auto run = evolve(r.kg, r.train, r.eval, r.cfg);
  std::set<std::string> eval_ids;
  for (const auto& q : r.eval) eval_ids.insert(q.id);
  for (int i = 1; i <= 2; ++i) {
    auto records = io::load_records(tmp.path / "run" / (i == 1 ? "001" : "002") /
                                    "pool-delta.jsonl");
    EXPECT_FALSE(records.empty());
    for (const auto& rec : records) {
      EXPECT_EQ(eval_ids.count(rec.rollout.question_id), 0u);
      EXPECT_EQ(rec.iteration_index, i);
    }
  }
  (void)run;
}

}  // namespace
}  // namespace evosearch
