#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "evosearch/policy.hpp"
#include "evosearch/search_env.hpp"

namespace evosearch {

// ---------------------------------------------------------------------------
// Base policy construction.
//
// A freshly initialized policy emits token soup and would collect zero format
// reward forever, so the fixed base model is "format primed": trained on a
// small set of scripted demonstration rollouts that follow the tagged template
// (think, search for the question's entity and relation, read the response,
// answer). Demonstration answers are drawn from the entities visible in the
// last observation rather than the gold answer, so the base knows the format
// and the query idiom but not the solutions. This mirrors starting from an
// instruction-tuned backbone.
//
// Priming minimizes the full-context negative log-likelihood of agent tokens
// (observations condition the model exactly as at sampling time); the
// iteration-level SFT stage is a different procedure with its own masking
// semantics. The copy gate starts positive so the untrained policy already
// prefers recently seen tokens; training then shapes which window slots to
// trust.
// ---------------------------------------------------------------------------

struct BasePolicyConfig {
  int context_window = 32;
  int hidden = 16;
  double init_scale = 0.02;
  double copy_gate_init = 1.0;

  int demo_count = 48;
  int demo_max_hops = 2;
  int demo_top_k = 1;
  double demo_correct_rate = 0.0;  // fraction of demos answering the true gold

  double prime_learning_rate = 0.25;
  int prime_batch_size = 8;
  int prime_epochs = 30;
};

namespace detail {

inline std::vector<std::string> entity_tokens_in_response(const KnowledgeGraph& kg,
                                                          const Segment& response) {
  std::vector<std::string> out;
  for (const SearchResult& r : response.results) {
    for (const auto& w : split_whitespace(r.title + " " + r.snippet)) {
      if (!kg.find_entity(w)) continue;
      if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
    }
  }
  return out;
}

}  // namespace detail

// One scripted demonstration rollout for a question with known path.
inline Rollout scripted_demo_rollout(const KnowledgeGraph& kg, const Vocabulary& vocab,
                                     const Question& question, int top_k, bool answer_gold,
                                     Rng& rng) {
  const auto& think_pool = vocabwords::think_pool();
  auto think_word = [&] { return think_pool[rng.next_index(think_pool.size())]; };

  Rollout r;
  r.question_id = question.id;
  r.question_text = question.text;

  SearchBudget budget{question.hop_count + 1};
  const Segment* last_response = nullptr;
  for (int h = 0; h < question.hop_count; ++h) {
    const std::string& subject = kg.entities[size_t(question.path_entities[size_t(h)])].name;
    const std::string& relation = kg.relation_labels[size_t(question.relations[size_t(h)])];
    r.segments.push_back(Segment::thought(think_word()));
    r.segments.push_back(Segment::tool_call({subject + " " + relation}));
    auto results = web_search(kg, subject + " " + relation, top_k, budget);
    r.segments.push_back(Segment::tool_response(std::move(*results)));
    last_response = &r.segments.back();
  }
  r.segments.push_back(Segment::thought(think_word()));

  std::string answer = question.gold_answer;
  if (!answer_gold && last_response) {
    auto candidates = detail::entity_tokens_in_response(kg, *last_response);
    if (!candidates.empty()) answer = candidates[rng.next_index(candidates.size())];
  }
  r.segments.push_back(Segment::answer(answer));
  encode_rollout_tokens(vocab, r);
  return r;
}

// Mini-batch descent on the mean full-context NLL of agent tokens.
inline PolicyParams prime_on_demos(PolicyParams params, const std::vector<Rollout>& demos,
                                   double learning_rate, int batch_size, int epochs,
                                   uint64_t seed) {
  Rng rng(derive_seed(seed, {0x9d9d9d9d9d9d9d9dull}));
  std::vector<size_t> order(demos.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += size_t(batch_size)) {
      const size_t stop = std::min(order.size(), start + size_t(batch_size));
      std::vector<double> grad(params.arch.param_count(), 0.0);
      for (size_t i = start; i < stop; ++i) {
        const Rollout& r = demos[order[i]];
        const int n_agent = agent_token_count(r);
        std::vector<double> weights(size_t(n_agent), -1.0 / double(n_agent));
        auto g = grad_weighted_log_probs(params, r, weights);
        for (size_t p = 0; p < grad.size(); ++p) grad[p] += g[p];
      }
      const double scale = learning_rate / double(stop - start);
      for (size_t p = 0; p < params.values.size(); ++p) params.values[p] -= scale * grad[p];
    }
  }
  return params;
}

inline PolicyParams make_base_policy(const KnowledgeGraph& kg, const Vocabulary& vocab,
                                     const BasePolicyConfig& cfg, uint64_t seed) {
  PolicyArch arch{cfg.context_window, cfg.hidden, vocab.size()};
  PolicyParams init = PolicyParams::random(arch, derive_seed(seed, {0xbeef0001ull}), cfg.init_scale);
  for (int j = 0; j < arch.context_window; ++j)
    init.values[arch.off_copy_gate() + size_t(j)] = cfg.copy_gate_init;

  std::map<int, double> mix;
  for (int h = 1; h <= cfg.demo_max_hops; ++h) mix[h] = 1.0 / cfg.demo_max_hops;
  auto questions =
      generate_questions(kg, mix, cfg.demo_count, Split::Train, derive_seed(seed, {0xbeef0002ull}));

  Rng rng(derive_seed(seed, {0xbeef0003ull}));
  std::vector<Rollout> demos;
  demos.reserve(questions.size());
  for (const Question& q : questions) {
    bool answer_gold = rng.next_double() < cfg.demo_correct_rate;
    demos.push_back(scripted_demo_rollout(kg, vocab, q, cfg.demo_top_k, answer_gold, rng));
  }

  return prime_on_demos(std::move(init), demos, cfg.prime_learning_rate, cfg.prime_batch_size,
                        cfg.prime_epochs, derive_seed(seed, {0xbeef0004ull}));
}

}  // namespace evosearch
