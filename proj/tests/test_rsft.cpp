#include "evosearch/rsft.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace evosearch {
namespace {

ScoredRollout record(std::string qid, double total, int tool_calls, int iteration) {
  ScoredRollout r;
  r.rollout.question_id = std::move(qid);
  r.reward.total = total;
  r.tool_call_count = tool_calls;
  r.iteration_index = iteration;
  return r;
}

// Independent brute-force oracles with the documented tie-breaks.
std::vector<ScoredRollout> oracle_hrs(const std::vector<ScoredRollout>& in, double delta) {
  std::vector<ScoredRollout> out;
  for (const auto& r : in)
    if (r.reward.total >= delta) out.push_back(r);
  return out;
}

std::vector<ScoredRollout> oracle_sqd(const std::vector<ScoredRollout>& in) {
  std::vector<ScoredRollout> out;
  std::vector<std::string> seen;
  for (const auto& r : in) {
    if (std::find(seen.begin(), seen.end(), r.rollout.question_id) != seen.end()) continue;
    seen.push_back(r.rollout.question_id);
    size_t best = 0;
    bool have = false;
    for (size_t i = 0; i < in.size(); ++i) {
      if (in[i].rollout.question_id != r.rollout.question_id) continue;
      if (!have) {
        best = i;
        have = true;
        continue;
      }
      const auto& b = in[best];
      const auto& c = in[i];
      if (c.tool_call_count > b.tool_call_count ||
          (c.tool_call_count == b.tool_call_count && c.iteration_index > b.iteration_index))
        best = i;
    }
    out.push_back(in[best]);
  }
  return out;
}

std::vector<ScoredRollout> oracle_mcs(const std::vector<ScoredRollout>& in, int k) {
  std::vector<size_t> idx(in.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    auto key = [&](size_t i) {
      return std::tuple<int, int, long>(-in[i].tool_call_count, -in[i].iteration_index, long(i));
    };
    return key(a) < key(b);
  });
  if (idx.size() > size_t(k)) idx.resize(size_t(k));
  std::vector<ScoredRollout> out;
  for (size_t i : idx) out.push_back(in[i]);
  return out;
}

bool same_records(const std::vector<ScoredRollout>& a, const std::vector<ScoredRollout>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].rollout.question_id != b[i].rollout.question_id) return false;
    if (a[i].reward.total != b[i].reward.total) return false;
    if (a[i].tool_call_count != b[i].tool_call_count) return false;
    if (a[i].iteration_index != b[i].iteration_index) return false;
    if (a[i].seed != b[i].seed) return false;
  }
  return true;
}

std::vector<ScoredRollout> random_pool(Rng& rng, int max_records) {
  std::vector<ScoredRollout> pool;
  int n = 1 + rng.next_int(max_records);
  for (int i = 0; i < n; ++i) {
    auto r = record("q" + std::to_string(rng.next_int(12)), 0.5 * rng.next_int(3),
                    rng.next_int(7), 1 + rng.next_int(3));
    r.seed = uint64_t(i);  // marks append identity
    pool.push_back(r);
  }
  return pool;
}

TEST(FilterHrs, JudgeLatticeAtDefaultDelta) {
  // Under the judge-mode lattice {0, 0.5, 1.0}, delta 0.7 keeps exactly the 1.0 records.
  std::vector<ScoredRollout> pool{record("a", 0.0, 1, 1), record("b", 0.5, 2, 1),
                                  record("c", 1.0, 3, 1), record("d", 1.0, 0, 2),
                                  record("e", 0.5, 5, 2)};
  auto kept = filter_hrs(pool, 0.7);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].rollout.question_id, "c");
  EXPECT_EQ(kept[1].rollout.question_id, "d");
}

TEST(FilterHrs, ZeroDeltaIsIdentity) {
  std::vector<ScoredRollout> pool{record("a", 0.0, 1, 1), record("b", 0.5, 2, 1)};
  EXPECT_TRUE(same_records(filter_hrs(pool, 0.0), pool));
}

TEST(FilterHrs, F1ModeThresholdSolvesToF1AtLeastPointFour) {
  // total = 0.5 * (1 + f1) >= 0.7  <=>  f1 >= 0.4
  std::vector<ScoredRollout> pool{
      record("a", 0.5 * (1 + 0.39), 1, 1),
      record("b", 0.5 * (1 + 0.40), 1, 1),
      record("c", 0.5 * (1 + 0.41), 1, 1),
  };
  auto kept = filter_hrs(pool, 0.7);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].rollout.question_id, "b");
  EXPECT_EQ(kept[1].rollout.question_id, "c");
}

TEST(FilterSqd, KeepsMostToolUsingRecord) {
  std::vector<ScoredRollout> pool{record("q", 1.0, 1, 1), record("q", 1.0, 3, 1)};
  auto kept = filter_sqd(pool);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].tool_call_count, 3);
}

TEST(FilterSqd, DistinctQuestionsAreIdentity) {
  std::vector<ScoredRollout> pool{record("a", 1.0, 1, 1), record("b", 1.0, 3, 1),
                                  record("c", 0.5, 2, 2)};
  EXPECT_TRUE(same_records(filter_sqd(pool), pool));
}

TEST(FilterSqd, TieBreaksLatestIterationThenEarliestAppend) {
  std::vector<ScoredRollout> pool{record("q", 1.0, 2, 1), record("q", 1.0, 2, 3),
                                  record("q", 1.0, 2, 3)};
  pool[0].seed = 0;
  pool[1].seed = 1;
  pool[2].seed = 2;
  auto kept = filter_sqd(pool);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].iteration_index, 3);
  EXPECT_EQ(kept[0].seed, 1u);  // earliest appended among the iteration-3 ties
}

TEST(FilterMcs, TopKWithTieBreak) {
  std::vector<ScoredRollout> pool{record("a", 1.0, 5, 1), record("b", 1.0, 3, 1),
                                  record("c", 1.0, 3, 2), record("d", 1.0, 1, 1)};
  auto kept = filter_mcs(pool, 2);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].rollout.question_id, "a");
  EXPECT_EQ(kept[1].rollout.question_id, "c");  // iteration 2 beats iteration 1
}

TEST(FilterMcs, KBeyondSizeKeepsAllSorted) {
  std::vector<ScoredRollout> pool{record("a", 1.0, 1, 1), record("b", 1.0, 4, 1)};
  auto kept = filter_mcs(pool, 10);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].rollout.question_id, "b");
}

TEST(FilterPipeline, MatchesComposedBruteForceOracle) {
  Rng rng(909);
  for (int trial = 0; trial < 300; ++trial) {
    auto pool = random_pool(rng, 100);
    FilterConfig cfg;
    cfg.delta = 0.5 * rng.next_int(3);
    cfg.top_k = 1 + rng.next_int(20);
    auto ours = apply_filter_pipeline(pool, cfg);
    auto oracle = oracle_mcs(oracle_sqd(oracle_hrs(pool, cfg.delta)), cfg.top_k);
    EXPECT_TRUE(same_records(ours.records, oracle)) << "trial " << trial;
    EXPECT_EQ(ours.audit.input, pool.size());
    EXPECT_EQ(ours.audit.after_mcs, ours.records.size());
    EXPECT_EQ(ours.records.size(), std::min(size_t(cfg.top_k), oracle_sqd(oracle_hrs(pool, cfg.delta)).size()));

    // Idempotence of HRS and SQD.
    auto hrs1 = filter_hrs(pool, cfg.delta);
    EXPECT_TRUE(same_records(filter_hrs(hrs1, cfg.delta), hrs1));
    auto sqd1 = filter_sqd(pool);
    EXPECT_TRUE(same_records(filter_sqd(sqd1), sqd1));
  }
}

// --- SFT ---------------------------------------------------------------------

KnowledgeGraph small_world() { return generate_world(5, 12, 3); }

ScoredRollout tokenized_record(const KnowledgeGraph& kg, const Vocabulary& vocab) {
  ScoredRollout rec;
  Rollout& r = rec.rollout;
  r.question_id = "t-0";
  r.question_text = "which entity is reached from " + kg.entities[0].name + " via " +
                    kg.relation_labels[0] + " ?";
  r.segments = {
      Segment::thought("step"),
      Segment::tool_call({kg.entities[0].name + " " + kg.relation_labels[0]}),
      Segment::tool_response({{kg.entities[0].name, join(kg.entities[0].description, " "), 1}}),
      Segment::thought("found"),
      Segment::answer(kg.entities[1].name),
  };
  encode_rollout_tokens(vocab, r);
  rec.rendered_text = render_rollout(r);
  rec.reward.total = 1.0;
  rec.tool_call_count = 1;
  rec.iteration_index = 1;
  return rec;
}

TEST(SftLoss, UniformParamsGiveLogVocabSize) {
  auto kg = small_world();
  auto vocab = Vocabulary::build(kg);
  auto params = PolicyParams::zeros(PolicyArch{4, 3, vocab.size()});
  auto rec = tokenized_record(kg, vocab);
  auto lg = sft_loss_and_gradient(params, rec);
  EXPECT_NEAR(lg.loss, std::log(double(vocab.size())), 1e-12);
}

TEST(SftLoss, InvariantToObservationRewrites) {
  auto kg = small_world();
  auto vocab = Vocabulary::build(kg);
  auto params = PolicyParams::random(PolicyArch{4, 3, vocab.size()}, 3, 0.4);
  auto rec = tokenized_record(kg, vocab);
  auto base = sft_loss_and_gradient(params, rec);

  // Rewrite every observation content token, then also change their count.
  ScoredRollout mutated = rec;
  for (size_t k = 0; k < mutated.rollout.token_ids.size(); ++k) {
    if (mutated.rollout.action_mask[k]) continue;
    int t = mutated.rollout.token_ids[k];
    if (t == vocab.resp_open() || t == vocab.resp_close()) continue;
    mutated.rollout.token_ids[k] = vocab.id("winter");
  }
  auto rewritten = sft_loss_and_gradient(params, mutated);
  EXPECT_EQ(base.loss, rewritten.loss);
  EXPECT_EQ(base.gradient, rewritten.gradient);

  ScoredRollout shorter = rec;
  std::vector<int> toks;
  std::vector<uint8_t> mask;
  for (size_t k = 0; k < shorter.rollout.token_ids.size(); ++k) {
    int t = shorter.rollout.token_ids[k];
    bool m = shorter.rollout.action_mask[k];
    bool is_marker = t == vocab.resp_open() || t == vocab.resp_close();
    if (m || is_marker) {
      toks.push_back(t);
      mask.push_back(m ? 1 : 0);
    }
  }
  shorter.rollout.token_ids = toks;
  shorter.rollout.action_mask = mask;
  shorter.rollout.log_probs.assign(toks.size(), 0.0);
  auto elided = sft_loss_and_gradient(params, shorter);
  EXPECT_EQ(base.loss, elided.loss);
  EXPECT_EQ(base.gradient, elided.gradient);
}

TEST(SftLoss, GradientMatchesCentralFiniteDifferences) {
  auto kg = small_world();
  auto vocab = Vocabulary::build(kg);
  auto rec = tokenized_record(kg, vocab);
  for (uint64_t seed : {1u, 2u}) {
    PolicyParams params = PolicyParams::random(PolicyArch{4, 3, vocab.size()}, seed, 0.4);
    auto lg = sft_loss_and_gradient(params, rec);

    std::vector<std::pair<double, size_t>> by_mag;
    for (size_t i = 0; i < lg.gradient.size(); ++i) by_mag.emplace_back(std::abs(lg.gradient[i]), i);
    std::sort(by_mag.rbegin(), by_mag.rend());
    const double h = 1e-5;
    for (size_t k = 0; k < std::min<size_t>(80, by_mag.size()); ++k) {
      size_t i = by_mag[k].second;
      double saved = params.values[i];
      params.values[i] = saved + h;
      double fp = sft_loss_and_gradient(params, rec).loss;
      params.values[i] = saved - h;
      double fm = sft_loss_and_gradient(params, rec).loss;
      params.values[i] = saved;
      double fd = (fp - fm) / (2 * h);
      double rel = std::abs(lg.gradient[i] - fd) / std::max(1e-6, std::abs(lg.gradient[i]));
      EXPECT_LT(rel, 1e-4) << "seed " << seed << " param " << i;
    }
  }
}

TEST(SftLoss, EmptyAgentSequenceRejected) {
  auto kg = small_world();
  auto vocab = Vocabulary::build(kg);
  auto params = PolicyParams::zeros(PolicyArch{4, 3, vocab.size()});
  Rollout r;
  r.token_ids = {vocab.resp_open(), vocab.resp_close()};
  r.action_mask = {0, 0};
  r.log_probs = {0.0, 0.0};
  EXPECT_THROW(sft_loss_and_gradient(params, r), EmptyAgentSequence);
}

TEST(SftTrain, OneStepDecreasesLossOnSingleRecord) {
  auto kg = small_world();
  auto vocab = Vocabulary::build(kg);
  auto base_params = PolicyParams::random(PolicyArch{4, 3, vocab.size()}, 9, 0.3);
  auto base = PolicySnapshot::of(base_params, SnapshotRole::Base);
  auto rec = tokenized_record(kg, vocab);
  double before = sft_loss_and_gradient(base_params, rec).loss;
  SftConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 1;
  cfg.epochs = 1;
  auto trained = sft_train(base, std::vector<ScoredRollout>{rec}, cfg, 1);
  double after = sft_loss_and_gradient(trained, rec).loss;
  EXPECT_LT(after, before);
}

TEST(SftTrain, ZeroEpochsReturnsBaseUnchanged) {
  auto kg = small_world();
  auto vocab = Vocabulary::build(kg);
  auto base_params = PolicyParams::random(PolicyArch{4, 3, vocab.size()}, 11, 0.3);
  auto base = PolicySnapshot::of(base_params, SnapshotRole::Base);
  auto rec = tokenized_record(kg, vocab);
  SftConfig cfg;
  cfg.epochs = 0;
  auto trained = sft_train(base, std::vector<ScoredRollout>{rec}, cfg, 1);
  EXPECT_EQ(trained.values, base_params.values);
}

TEST(SftTrain, DeterministicReplayAndEmptyDataRejected) {
  auto kg = small_world();
  auto vocab = Vocabulary::build(kg);
  auto base_params = PolicyParams::random(PolicyArch{4, 3, vocab.size()}, 13, 0.3);
  auto base = PolicySnapshot::of(base_params, SnapshotRole::Base);
  auto rec = tokenized_record(kg, vocab);
  std::vector<ScoredRollout> data{rec, rec, rec};
  SftConfig cfg;
  cfg.batch_size = 2;
  cfg.epochs = 2;
  auto a = sft_train(base, data, cfg, 77);
  auto b = sft_train(base, data, cfg, 77);
  EXPECT_EQ(a.values, b.values);
  EXPECT_THROW(sft_train(base, std::vector<ScoredRollout>{}, cfg, 1), EmptyData);
}

}  // namespace
}  // namespace evosearch
