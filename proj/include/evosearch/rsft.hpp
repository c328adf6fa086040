#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evosearch/policy.hpp"
#include "evosearch/reward.hpp"

namespace evosearch {

// ---------------------------------------------------------------------------
// Rejection-sampling fine-tuning: the three sequential filter rules over the
// data pool, and supervised training of the fixed base policy on the filtered
// rollouts.
//
// Filters are pure functions of an immutable record span; the append index
// within that span is the tie-break of last resort. Ties on tool-call count
// prefer the latest iteration_index, then the earliest append order.
//
// The SFT loss is the mean negative log-likelihood over agent tokens only,
// computed on a view of the sequence in which tool-response content tokens are
// elided (the <tool_response>/</tool_response> markers remain). The loss and
// its gradient are therefore exactly invariant to arbitrary rewrites of
// observation content, not merely unscored at those positions.
// ---------------------------------------------------------------------------

struct EmptyAgentSequence : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Append-only cross-iteration accumulator of scored rollouts.
struct DataPool {
  std::vector<ScoredRollout> records;

  void append(std::span<const ScoredRollout> batch) {
    records.insert(records.end(), batch.begin(), batch.end());
  }
  size_t size() const { return records.size(); }
};

struct FilterConfig {
  double delta = 0.7;  // reward threshold for HRS
  int top_k = 2000;    // MCS budget
};

// Rule 1, High-Reward Selection: keep records with reward total >= delta,
// stable order.
inline std::vector<ScoredRollout> filter_hrs(std::span<const ScoredRollout> records,
                                             double delta) {
  std::vector<ScoredRollout> out;
  for (const ScoredRollout& r : records)
    if (r.reward.total >= delta) out.push_back(r);
  return out;
}

// Rule 2, Same-Query Deduplication: one record per question_id, the one with
// the most tool calls; ties prefer the latest iteration, then the earliest
// appended. Output ordered by first appearance of each question_id.
inline std::vector<ScoredRollout> filter_sqd(std::span<const ScoredRollout> records) {
  std::vector<std::string> order;
  std::map<std::string, size_t> best;  // question_id -> index into records
  for (size_t i = 0; i < records.size(); ++i) {
    const std::string& qid = records[i].rollout.question_id;
    auto it = best.find(qid);
    if (it == best.end()) {
      best.emplace(qid, i);
      order.push_back(qid);
      continue;
    }
    const ScoredRollout& cur = records[it->second];
    const ScoredRollout& cand = records[i];
    if (cand.tool_call_count > cur.tool_call_count ||
        (cand.tool_call_count == cur.tool_call_count &&
         cand.iteration_index > cur.iteration_index)) {
      it->second = i;  // equal (count, iteration) keeps the earlier record
    }
  }
  std::vector<ScoredRollout> out;
  out.reserve(order.size());
  for (const std::string& qid : order) out.push_back(records[best.at(qid)]);
  return out;
}

// Rule 3, Multi-Calls Selection: the k records with the most tool calls over
// the merged pool, same tie-break; output in sort order.
inline std::vector<ScoredRollout> filter_mcs(std::span<const ScoredRollout> records, int k) {
  if (k < 1) throw std::invalid_argument("filter_mcs: k must be >= 1");
  std::vector<size_t> idx(records.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    if (records[a].tool_call_count != records[b].tool_call_count)
      return records[a].tool_call_count > records[b].tool_call_count;
    if (records[a].iteration_index != records[b].iteration_index)
      return records[a].iteration_index > records[b].iteration_index;
    return a < b;
  });
  if (idx.size() > size_t(k)) idx.resize(size_t(k));
  std::vector<ScoredRollout> out;
  out.reserve(idx.size());
  for (size_t i : idx) out.push_back(records[i]);
  return out;
}

struct FilterAudit {
  size_t input = 0;
  size_t after_hrs = 0;
  size_t after_sqd = 0;
  size_t after_mcs = 0;
};

struct FilteredCorpus {
  std::vector<ScoredRollout> records;
  FilterAudit audit;
};

// The three rules applied sequentially: HRS -> SQD -> MCS.
inline FilteredCorpus apply_filter_pipeline(std::span<const ScoredRollout> records,
                                            const FilterConfig& cfg) {
  FilteredCorpus out;
  out.audit.input = records.size();
  auto hrs = filter_hrs(records, cfg.delta);
  out.audit.after_hrs = hrs.size();
  auto sqd = filter_sqd(hrs);
  out.audit.after_sqd = sqd.size();
  out.records = filter_mcs(sqd, cfg.top_k);
  out.audit.after_mcs = out.records.size();
  return out;
}

// --- supervised fine-tuning -------------------------------------------------------

namespace detail {

// Conditioning view for the SFT loss: agent tokens and tool-response markers
// survive; observation content is dropped.
inline Rollout sft_view(const Rollout& r) {
  constexpr int kRespOpen = Vocabulary::kRespOpen;
  constexpr int kRespClose = Vocabulary::kRespClose;
  Rollout view;
  view.question_id = r.question_id;
  view.question_text = r.question_text;
  view.prompt_tokens = r.prompt_tokens;
  for (size_t k = 0; k < r.token_ids.size(); ++k) {
    if (r.action_mask[k]) {
      view.token_ids.push_back(r.token_ids[k]);
      view.action_mask.push_back(1);
    } else if (r.token_ids[k] == kRespOpen || r.token_ids[k] == kRespClose) {
      view.token_ids.push_back(r.token_ids[k]);
      view.action_mask.push_back(0);
    }
  }
  view.log_probs.assign(view.token_ids.size(), 0.0);
  return view;
}

}  // namespace detail

struct SftLossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

inline SftLossAndGradient sft_loss_and_gradient(const PolicyParams& params, const Rollout& rollout) {
  if (!rollout.has_tokens())
    throw std::invalid_argument("sft_loss_and_gradient: rollout carries no tokens");
  Rollout view = detail::sft_view(rollout);
  const int n_agent = agent_token_count(view);
  if (n_agent == 0) throw EmptyAgentSequence("sft_loss_and_gradient: no agent tokens");

  auto log_probs = sequence_log_probs(params, view);
  double loss = 0.0;
  for (double lp : log_probs) loss -= lp;
  loss /= double(n_agent);

  std::vector<double> weights(log_probs.size(), -1.0 / double(n_agent));
  SftLossAndGradient out;
  out.loss = loss;
  out.gradient = grad_weighted_log_probs(params, view, weights);
  return out;
}

inline SftLossAndGradient sft_loss_and_gradient(const PolicyParams& params,
                                                const ScoredRollout& record) {
  return sft_loss_and_gradient(params, record.rollout);
}

struct SftConfig {
  double learning_rate = 0.1;
  int batch_size = 16;
  int epochs = 1;
};

// Mini-batch gradient descent on the mean SFT loss, starting from a fresh copy
// of the base parameters. Records must carry token data.
inline PolicyParams sft_train(const PolicySnapshot& base, std::span<const ScoredRollout> data,
                              const SftConfig& cfg, uint64_t seed) {
  if (data.empty()) throw EmptyData("sft_train: no training records");
  PolicyParams params = base.params;
  Rng rng(derive_seed(seed, {0x517f517f517f517full}));

  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_size)) {
      const size_t stop = std::min(order.size(), start + size_t(cfg.batch_size));
      std::vector<double> grad(params.arch.param_count(), 0.0);
      for (size_t i = start; i < stop; ++i) {
        auto lg = sft_loss_and_gradient(params, data[order[i]]);
        for (size_t p = 0; p < grad.size(); ++p) grad[p] += lg.gradient[p];
      }
      const double scale = cfg.learning_rate / double(stop - start);
      for (size_t p = 0; p < grad.size(); ++p) params.values[p] -= scale * grad[p];
    }
  }
  return params;
}

}  // namespace evosearch
