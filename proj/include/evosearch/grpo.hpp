#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "evosearch/policy.hpp"
#include "evosearch/reward.hpp"
#include "evosearch/rng.hpp"

namespace evosearch {

// ---------------------------------------------------------------------------
// Group-relative policy optimization with the hybrid reward.
//
// Advantages are reward z-scores within a rollout group (population standard
// deviation, all-zero when the group's rewards are constant). The surrogate is
// the clipped ratio objective pooled at token level: every agent token of
// every rollout in a group contributes with weight 1 / sum_i |y_i|, where
// |y_i| counts agent tokens only; observation tokens condition the policy but
// are never scored. Old-policy log-probs are the ones recorded at sampling
// time, so ratios are exact.
//
// The KL regularizer uses the non-negative estimator
//   k(t) = rho - log(rho) - 1,   rho = pi_ref(y_t|ctx) / pi_theta(y_t|ctx),
// evaluated per token on the taken action.
// ---------------------------------------------------------------------------

struct GroupTooSmall : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingOldLogProbs : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RolloutGroup {
  Question question;
  std::vector<Rollout> rollouts;
  std::vector<RewardBreakdown> rewards;
  std::vector<double> advantages;
};

struct GrpoConfig {
  int group_size = 16;
  double clip_eps = 0.2;
  double kl_beta = 0.0;
  double learning_rate = 0.05;
  int batch_size = 16;  // questions per parameter update
  double temperature = 1.0;
  int epochs = 1;
  // Eq. 4 ablation switch: normalize advantages over the whole batch instead
  // of per question group.
  bool batch_level_advantages = false;
};

inline std::vector<double> compute_advantages(std::span<const double> rewards) {
  const size_t g = rewards.size();
  if (g < 2) throw GroupTooSmall("compute_advantages: need at least 2 rewards");
  double lo = rewards[0], hi = rewards[0];
  double mean = 0.0;
  for (double r : rewards) {
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    mean += r;
  }
  mean /= double(g);
  std::vector<double> adv(g, 0.0);
  if (lo == hi) return adv;  // constant rewards carry no signal
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  double std_dev = std::sqrt(var / double(g));
  for (size_t i = 0; i < g; ++i) adv[i] = (rewards[i] - mean) / std_dev;
  return adv;
}

struct ObjectiveAndGradient {
  double objective = 0.0;
  std::vector<double> gradient;
};

inline ObjectiveAndGradient grpo_objective_and_gradient(const PolicyParams& params,
                                                        const PolicySnapshot& old_policy,
                                                        const PolicySnapshot& ref_policy,
                                                        const std::vector<RolloutGroup>& groups,
                                                        const GrpoConfig& cfg) {
  if (!(old_policy.params.arch == params.arch) || !(ref_policy.params.arch == params.arch))
    throw ArchitectureMismatch("grpo_objective_and_gradient: snapshot architecture differs");

  ObjectiveAndGradient out;
  out.gradient.assign(params.arch.param_count(), 0.0);
  if (groups.empty()) return out;

  const double inv_groups = 1.0 / double(groups.size());

  for (const RolloutGroup& group : groups) {
    if (group.rollouts.size() < 2) throw GroupTooSmall("grpo: group needs at least 2 rollouts");
    if (group.advantages.size() != group.rollouts.size())
      throw std::invalid_argument("grpo: advantages not computed for group");

    size_t total_agent_tokens = 0;
    for (const Rollout& r : group.rollouts) {
      if (r.log_probs.size() != r.token_ids.size() || r.token_ids.empty())
        throw MissingOldLogProbs("grpo: rollout lacks recorded old-policy log-probs");
      total_agent_tokens += size_t(agent_token_count(r));
    }
    if (total_agent_tokens == 0) continue;
    const double pool_weight = 1.0 / double(total_agent_tokens);

    double group_term = 0.0;
    for (size_t i = 0; i < group.rollouts.size(); ++i) {
      const Rollout& r = group.rollouts[i];
      const double advantage = group.advantages[i];

      auto log_new = sequence_log_probs(params, r, cfg.temperature);
      std::vector<double> log_ref;
      if (cfg.kl_beta != 0.0) log_ref = sequence_log_probs(ref_policy.params, r, cfg.temperature);

      std::vector<double> token_weights(log_new.size(), 0.0);
      size_t t = 0;
      for (size_t k = 0; k < r.token_ids.size(); ++k) {
        if (!r.action_mask[k]) continue;
        const double ratio = std::exp(log_new[t] - r.log_probs[k]);
        const double unclipped = ratio * advantage;
        const double clipped =
            std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * advantage;
        double term;
        double dterm_dlog;  // derivative of the surrogate w.r.t. log pi_theta
        if (unclipped <= clipped) {
          term = unclipped;
          dterm_dlog = unclipped;  // d(r*A)/dlog = r*A
        } else {
          term = clipped;
          dterm_dlog = 0.0;  // the clipped branch is flat in theta
        }
        if (cfg.kl_beta != 0.0) {
          const double rho = std::exp(log_ref[t] - log_new[t]);
          const double kl = rho - (log_ref[t] - log_new[t]) - 1.0;
          term -= cfg.kl_beta * kl;
          dterm_dlog += -cfg.kl_beta * (1.0 - rho);
        }
        group_term += term;
        token_weights[t] = dterm_dlog * pool_weight * inv_groups;
        ++t;
      }
      auto g = grad_weighted_log_probs(params, r, token_weights, cfg.temperature);
      for (size_t p = 0; p < g.size(); ++p) out.gradient[p] += g[p];
    }
    out.objective += pool_weight * group_term * inv_groups;
  }
  return out;
}

// --- the RL training loop ---------------------------------------------------------

struct BatchMetrics {
  int batch_index = 0;
  double mean_reward = 0.0;
  double format_rate = 0.0;
  double mean_tool_calls = 0.0;  // executed searches per rollout
  double objective = 0.0;
  double gradient_norm = 0.0;
};

struct RlTrainResult {
  PolicyParams params;
  std::vector<ScoredRollout> collected;  // every sampled rollout, in order
  std::vector<BatchMetrics> metrics;
};

// One epoch (default) of batched GRPO over the shard, starting from `base`.
// The reference snapshot is the input params, fixed for the whole call. Every
// sampled rollout is scored and appended to the returned log.
inline RlTrainResult rl_train(const PolicyParams& base, const std::vector<Question>& shard,
                              const KnowledgeGraph& kg, const Vocabulary& vocab, AnswerMode mode,
                              const GrpoConfig& cfg, const RolloutSamplerConfig& sampler_cfg,
                              uint64_t seed, int iteration_index) {
  if (shard.empty()) throw std::invalid_argument("rl_train: empty shard");
  if (cfg.group_size < 2) throw GroupTooSmall("rl_train: group_size must be >= 2");

  RlTrainResult out;
  out.params = base;
  const PolicySnapshot ref = PolicySnapshot::of(base, SnapshotRole::Reference);
  const std::vector<std::string> entities = kg.entity_names();

  RolloutSamplerConfig scfg = sampler_cfg;
  scfg.temperature = cfg.temperature;

  int batch_index = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t start = 0; start < shard.size(); start += size_t(cfg.batch_size)) {
      const size_t stop = std::min(shard.size(), start + size_t(cfg.batch_size));
      const PolicySnapshot old_policy = PolicySnapshot::of(out.params, SnapshotRole::Old);

      std::vector<RolloutGroup> groups;
      double batch_reward = 0.0, batch_format = 0.0, batch_tools = 0.0;
      size_t batch_rollouts = 0;

      for (size_t qi = start; qi < stop; ++qi) {
        RolloutGroup group;
        group.question = shard[qi];
        for (int g = 0; g < cfg.group_size; ++g) {
          const uint64_t rollout_seed = derive_seed(
              seed, {0x9e3779b9ull, uint64_t(epoch), uint64_t(qi), uint64_t(g)});
          SampledRollout s =
              sample_rollout(old_policy.params, vocab, kg, shard[qi], scfg, rollout_seed);
          RewardBreakdown reward =
              hybrid_reward(s.rendered_text, shard[qi].gold_answer, mode, &entities);

          batch_reward += reward.total;
          batch_format += reward.format_reward;
          batch_tools += double(s.executed_searches);
          ++batch_rollouts;

          ScoredRollout record;
          record.rollout = s.rollout;
          record.rendered_text = s.rendered_text;
          record.reward = reward;
          record.tool_call_count = count_tool_calls(s.rollout);
          record.iteration_index = iteration_index;
          record.seed = rollout_seed;
          out.collected.push_back(record);

          group.rollouts.push_back(std::move(s.rollout));
          group.rewards.push_back(reward);
        }
        groups.push_back(std::move(group));
      }

      if (cfg.batch_level_advantages) {
        std::vector<double> pooled;
        for (const auto& g : groups)
          for (const auto& r : g.rewards) pooled.push_back(r.total);
        auto adv = compute_advantages(pooled);
        size_t k = 0;
        for (auto& g : groups) {
          g.advantages.assign(adv.begin() + long(k), adv.begin() + long(k + g.rollouts.size()));
          k += g.rollouts.size();
        }
      } else {
        for (auto& g : groups) {
          std::vector<double> totals;
          for (const auto& r : g.rewards) totals.push_back(r.total);
          g.advantages = compute_advantages(totals);
        }
      }

      auto [objective, gradient] =
          grpo_objective_and_gradient(out.params, old_policy, ref, groups, cfg);
      double norm2 = 0.0;
      for (double g : gradient) norm2 += g * g;
      for (size_t p = 0; p < gradient.size(); ++p)
        out.params.values[p] += cfg.learning_rate * gradient[p];

      BatchMetrics m;
      m.batch_index = batch_index++;
      m.mean_reward = batch_reward / double(batch_rollouts);
      m.format_rate = batch_format / double(batch_rollouts);
      m.mean_tool_calls = batch_tools / double(batch_rollouts);
      m.objective = objective;
      m.gradient_norm = std::sqrt(norm2);
      out.metrics.push_back(m);
    }
  }
  return out;
}

}  // namespace evosearch
