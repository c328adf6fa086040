#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evosearch/rng.hpp"
#include "evosearch/rollout.hpp"
#include "evosearch/search_env.hpp"
#include "evosearch/text.hpp"

namespace evosearch {

// ---------------------------------------------------------------------------
// A tiny autoregressive policy over the environment's closed vocabulary.
//
// Architecture: the last `context_window` tokens are embedded, modulated by a
// per-recency-slot scale vector, summed, and passed through one tanh hidden
// layer to produce logits; a per-slot copy gate adds a learned bonus to the
// logit of each distinct token present in the window, gated by the slot of
// its most recent occurrence. The copy path is what makes "repeat an entity
// seen in an observation" representable at this size; the hidden path carries
// the tag-structure statistics.
//
// All log-probabilities and gradients are exact (analytic), which keeps the
// finite-difference checks in the test suite meaningful.
//
// Token/text duality: the policy emits vocabulary tokens; completed tool-call
// blocks trigger the environment, which injects the tool response as
// mask=false tokens. The rendered text of a sampled rollout is canonical when
// the token stream forms a grammar-valid rollout and a literal space-join of
// token spellings otherwise (which never parses, so such rollouts score 0).
// ---------------------------------------------------------------------------

struct ContextOverflow : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownToken : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ArchitectureMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- vocabulary ---------------------------------------------------------------

namespace vocabwords {

// Filler words available for thought payloads (used by scripted demonstrations
// and learnable by the policy).
inline const std::vector<std::string>& think_pool() {
  static const std::vector<std::string> w = {"step", "found", "next", "look", "check", "done"};
  return w;
}

}  // namespace vocabwords

class Vocabulary {
 public:
  static Vocabulary build(const KnowledgeGraph& kg) {
    Vocabulary v;
    auto add = [&v](const std::string& t) {
      if (v.index_.emplace(t, int(v.tokens_.size())).second) v.tokens_.push_back(t);
    };
    add("<pad>");
    add("<eos>");
    for (auto t : tags::kAll) add(std::string(t));
    for (const auto& w : templates::template_words()) add(w);
    for (const auto& w : vocabwords::think_pool()) add(w);
    for (const auto& w : split_whitespace(kBudgetExhaustedMessage)) add(w);
    for (const auto& r : kg.relation_labels) add(r);
    for (const auto& e : kg.entities) add(e.name);
    for (const auto& w : worldgen::description_pool()) add(w);
    return v;
  }

  int size() const { return int(tokens_.size()); }
  const std::string& token(int id) const { return tokens_.at(size_t(id)); }

  int id(std::string_view t) const {
    auto it = index_.find(std::string(t));
    if (it == index_.end()) throw UnknownToken("unknown token: " + std::string(t));
    return it->second;
  }
  std::optional<int> try_id(std::string_view t) const {
    auto it = index_.find(std::string(t));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // The special-token layout is fixed by build() and relied on across modules.
  static constexpr int kPad = 0;
  static constexpr int kEos = 1;
  static constexpr int kThinkOpen = 2;
  static constexpr int kThinkClose = 3;
  static constexpr int kCallOpen = 4;
  static constexpr int kCallClose = 5;
  static constexpr int kRespOpen = 6;
  static constexpr int kRespClose = 7;
  static constexpr int kAnswerOpen = 8;
  static constexpr int kAnswerClose = 9;

  int pad_id() const { return kPad; }
  int eos_id() const { return kEos; }
  int think_open() const { return kThinkOpen; }
  int think_close() const { return kThinkClose; }
  int call_open() const { return kCallOpen; }
  int call_close() const { return kCallClose; }
  int resp_open() const { return kRespOpen; }
  int resp_close() const { return kRespClose; }
  int answer_open() const { return kAnswerOpen; }
  int answer_close() const { return kAnswerClose; }

  bool is_tag(int id) const { return id >= 2 && id <= 9; }
  bool is_word(int id) const { return id == 0 || id > 9; }

  std::vector<int> encode_words(std::string_view text) const {
    std::vector<int> out;
    for (const auto& w : split_whitespace(text)) out.push_back(id(w));
    return out;
  }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

// --- parameters -----------------------------------------------------------------

struct PolicyArch {
  int context_window = 32;
  int hidden = 16;
  int vocab = 0;

  bool operator==(const PolicyArch&) const = default;

  // Flat layout: embed[V*H] | pos_scale[W*H] | hidden_bias[H] | out[H*V] |
  // out_bias[V] | copy_gate[W].
  size_t param_count() const {
    auto V = size_t(vocab), H = size_t(hidden), W = size_t(context_window);
    return V * H + W * H + H + H * V + V + W;
  }
  size_t off_embed() const { return 0; }
  size_t off_pos_scale() const { return size_t(vocab) * size_t(hidden); }
  size_t off_hidden_bias() const { return off_pos_scale() + size_t(context_window) * size_t(hidden); }
  size_t off_out() const { return off_hidden_bias() + size_t(hidden); }
  size_t off_out_bias() const { return off_out() + size_t(hidden) * size_t(vocab); }
  size_t off_copy_gate() const { return off_out_bias() + size_t(vocab); }
};

struct PolicyParams {
  PolicyArch arch;
  std::vector<double> values;

  static PolicyParams zeros(const PolicyArch& arch) {
    return PolicyParams{arch, std::vector<double>(arch.param_count(), 0.0)};
  }
  static PolicyParams random(const PolicyArch& arch, uint64_t seed, double scale) {
    PolicyParams p = zeros(arch);
    Rng rng(derive_seed(seed, {0xabcdef0123456789ull}));
    for (double& v : p.values) v = scale * rng.next_gaussian();
    return p;
  }
  bool finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

enum class SnapshotRole { Old, Reference, Base };

struct PolicySnapshot {
  PolicyParams params;
  SnapshotRole role = SnapshotRole::Old;

  static PolicySnapshot of(const PolicyParams& p, SnapshotRole role) {
    return PolicySnapshot{p, role};
  }
};

// --- forward pass -----------------------------------------------------------------

struct PolicyWorkspace {
  std::vector<int> window;
  std::vector<double> pre, hidden, logits, probs;
};

namespace detail {

// window[j] = (j+1)-th most recent token of `context`, pad beyond its start.
inline void fill_window(const PolicyArch& arch, std::span<const int> context, int pad_id,
                        std::vector<int>& window) {
  window.resize(size_t(arch.context_window));
  const int n = int(context.size());
  for (int j = 0; j < arch.context_window; ++j)
    window[size_t(j)] = j < n ? context[size_t(n - 1 - j)] : pad_id;
}

inline void forward_logits(const PolicyParams& p, const std::vector<int>& window,
                           PolicyWorkspace& ws) {
  const PolicyArch& a = p.arch;
  const int V = a.vocab, H = a.hidden, W = a.context_window;
  const double* w = p.values.data();
  const double* embed = w + a.off_embed();
  const double* pos_scale = w + a.off_pos_scale();
  const double* hidden_bias = w + a.off_hidden_bias();
  const double* out = w + a.off_out();
  const double* out_bias = w + a.off_out_bias();
  const double* copy_gate = w + a.off_copy_gate();

  ws.pre.assign(size_t(H), 0.0);
  for (int h = 0; h < H; ++h) ws.pre[size_t(h)] = hidden_bias[h];
  for (int j = 0; j < W; ++j) {
    const double* e = embed + size_t(window[size_t(j)]) * size_t(H);
    const double* s = pos_scale + size_t(j) * size_t(H);
    for (int h = 0; h < H; ++h) ws.pre[size_t(h)] += s[h] * e[h];
  }
  ws.hidden.resize(size_t(H));
  for (int h = 0; h < H; ++h) ws.hidden[size_t(h)] = std::tanh(ws.pre[size_t(h)]);

  ws.logits.assign(size_t(V), 0.0);
  for (int v = 0; v < V; ++v) ws.logits[size_t(v)] = out_bias[v];
  for (int h = 0; h < H; ++h) {
    const double c = ws.hidden[size_t(h)];
    const double* row = out + size_t(h) * size_t(V);
    for (int v = 0; v < V; ++v) ws.logits[size_t(v)] += row[v] * c;
  }
  // Copy gate: each distinct window token is boosted once, by the gate of the
  // slot of its most recent occurrence (slot 0 is the most recent token).
  for (int j = 0; j < W; ++j) {
    const int tok = window[size_t(j)];
    bool seen_more_recently = false;
    for (int k = 0; k < j; ++k)
      if (window[size_t(k)] == tok) {
        seen_more_recently = true;
        break;
      }
    if (!seen_more_recently) ws.logits[size_t(tok)] += copy_gate[j];
  }
}

// Tempered softmax into ws.probs.
inline void softmax(const std::vector<double>& logits, double temperature,
                    std::vector<double>& probs) {
  probs.resize(logits.size());
  double m = -1e300;
  for (double l : logits) m = std::max(m, l / temperature);
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] / temperature - m);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
}

inline double log_prob_of(const std::vector<double>& logits, double temperature, int y) {
  double m = -1e300;
  for (double l : logits) m = std::max(m, l / temperature);
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l / temperature - m);
  return logits[size_t(y)] / temperature - m - std::log(sum);
}

}  // namespace detail

// Distribution over the vocabulary for a context of at most context_window
// tokens. Strictly positive, sums to 1 within rounding.
inline std::vector<double> next_token_distribution(const PolicyParams& params,
                                                   std::span<const int> context,
                                                   double temperature) {
  if (temperature <= 0.0)
    throw std::invalid_argument("next_token_distribution: temperature must be > 0");
  if (int(context.size()) > params.arch.context_window)
    throw ContextOverflow("context longer than the policy window");
  PolicyWorkspace ws;
  detail::fill_window(params.arch, context, 0, ws.window);
  detail::forward_logits(params, ws.window, ws);
  detail::softmax(ws.logits, temperature, ws.probs);
  return ws.probs;
}

// --- sampling ----------------------------------------------------------------------

struct RolloutSamplerConfig {
  double temperature = 1.0;  // 0 selects greedy argmax decoding
  int max_searches = 10;
  int search_top_k = 10;
  int token_cap = 512;
};

namespace detail {

inline std::vector<int> response_word_tokens(const Vocabulary& vocab, const Segment& response) {
  std::vector<int> out;
  if (response.budget_exhausted) {
    for (const auto& w : split_whitespace(kBudgetExhaustedMessage)) out.push_back(vocab.id(w));
    return out;
  }
  for (const SearchResult& r : response.results) {
    for (const auto& w : split_whitespace(r.title)) out.push_back(vocab.id(w));
    for (const auto& w : split_whitespace(r.snippet)) out.push_back(vocab.id(w));
  }
  return out;
}

// Rebuilds segments from a token stream. Tool-response blocks must coincide
// with the injected (mask=false) spans; their structured payloads are taken
// from `responses` in order. Returns nullopt when the stream is not a valid
// rollout.
inline std::optional<std::vector<Segment>> segments_from_tokens(
    const Vocabulary& vocab, const std::vector<int>& tokens,
    const std::vector<uint8_t>& mask, const std::vector<Segment>& responses) {
  std::vector<Segment> segs;
  size_t i = 0, resp_used = 0;
  const size_t n = tokens.size();

  auto collect_words = [&](size_t from, int close_tag, bool want_mask,
                           size_t& next) -> std::optional<std::vector<std::string>> {
    std::vector<std::string> words;
    size_t j = from;
    for (; j < n; ++j) {
      if (bool(mask[j]) != want_mask) return std::nullopt;
      if (tokens[j] == close_tag) {
        next = j + 1;
        return words;
      }
      if (!vocab.is_word(tokens[j])) return std::nullopt;
      words.push_back(vocab.token(tokens[j]));
    }
    return std::nullopt;  // unterminated
  };

  while (i < n) {
    const int tok = tokens[i];
    if (tok == vocab.think_open() && mask[i]) {
      size_t next = 0;
      auto words = collect_words(i + 1, vocab.think_close(), true, next);
      if (!words || words->empty()) return std::nullopt;
      segs.push_back(Segment::thought(join(*words, " ")));
      i = next;
    } else if (tok == vocab.call_open() && mask[i]) {
      size_t next = 0;
      auto words = collect_words(i + 1, vocab.call_close(), true, next);
      if (!words || words->empty()) return std::nullopt;
      segs.push_back(Segment::tool_call({join(*words, " ")}));
      i = next;
    } else if (tok == vocab.resp_open() && !mask[i]) {
      size_t next = 0;
      auto words = collect_words(i + 1, vocab.resp_close(), false, next);
      if (!words || resp_used >= responses.size()) return std::nullopt;
      segs.push_back(responses[resp_used++]);
      i = next;
    } else if (tok == vocab.answer_open() && mask[i]) {
      size_t next = 0;
      auto words = collect_words(i + 1, vocab.answer_close(), true, next);
      if (!words || words->empty()) return std::nullopt;
      segs.push_back(Segment::answer(join(*words, " ")));
      i = next;
      if (i != n) return std::nullopt;  // nothing may follow the answer
    } else {
      return std::nullopt;
    }
  }
  if (resp_used != responses.size()) return std::nullopt;
  if (!structure_violation(segs).empty()) return std::nullopt;
  return segs;
}

inline std::string literal_join(const Vocabulary& vocab, const std::vector<int>& tokens) {
  std::vector<std::string> parts;
  parts.reserve(tokens.size());
  for (int t : tokens) parts.push_back(vocab.token(t));
  return join(parts, " ");
}

}  // namespace detail

// Autoregressive sampling against the environment. Malformed generations are
// returned with empty segments and a literal-join rendered_text that fails the
// format check; they are legal returns and score 0 downstream.
struct SampledRollout {
  Rollout rollout;
  std::string rendered_text;
  bool format_valid = false;
  int executed_searches = 0;
};

inline SampledRollout sample_rollout(const PolicyParams& params, const Vocabulary& vocab,
                                     const KnowledgeGraph& kg, const Question& question,
                                     const RolloutSamplerConfig& cfg, uint64_t seed) {
  if (cfg.max_searches < 0) throw std::invalid_argument("sample_rollout: max_searches < 0");
  SampledRollout out;
  Rollout& r = out.rollout;
  r.question_id = question.id;
  r.question_text = question.text;
  r.prompt_tokens = vocab.encode_words(question.text);

  Rng rng(derive_seed(seed, {0x5a5a5a5a5a5a5a5aull}));
  PolicyWorkspace ws;
  std::vector<int> context = r.prompt_tokens;

  std::vector<Segment> responses;          // structured payloads of injected blocks
  SearchBudget budget{cfg.max_searches};
  bool collecting_query = false;
  bool query_garbage = false;
  std::vector<std::string> query_words;

  auto append_token = [&](int tok, uint8_t mask, double logp) {
    r.token_ids.push_back(tok);
    r.action_mask.push_back(mask);
    r.log_probs.push_back(logp);
    context.push_back(tok);
  };

  auto inject_response = [&](const Segment& response) {
    responses.push_back(response);
    append_token(vocab.resp_open(), 0, 0.0);
    for (int t : detail::response_word_tokens(vocab, response)) append_token(t, 0, 0.0);
    append_token(vocab.resp_close(), 0, 0.0);
  };

  while (int(r.token_ids.size()) < cfg.token_cap) {
    detail::fill_window(params.arch, context, vocab.pad_id(), ws.window);
    detail::forward_logits(params, ws.window, ws);

    int tok;
    if (cfg.temperature == 0.0) {
      tok = 0;
      for (int v = 1; v < params.arch.vocab; ++v)
        if (ws.logits[size_t(v)] > ws.logits[size_t(tok)]) tok = v;
    } else {
      detail::softmax(ws.logits, cfg.temperature, ws.probs);
      double u = rng.next_double();
      double acc = 0.0;
      tok = params.arch.vocab - 1;
      for (int v = 0; v < params.arch.vocab; ++v) {
        acc += ws.probs[size_t(v)];
        if (u < acc) {
          tok = v;
          break;
        }
      }
    }
    double logp = detail::log_prob_of(ws.logits, cfg.temperature == 0.0 ? 1.0 : cfg.temperature, tok);
    append_token(tok, 1, logp);

    if (tok == vocab.eos_id() || tok == vocab.answer_close()) break;

    if (tok == vocab.call_open()) {
      collecting_query = true;
      query_garbage = false;
      query_words.clear();
      continue;
    }
    if (collecting_query) {
      if (tok == vocab.call_close()) {
        collecting_query = false;
        if (!query_garbage && !query_words.empty() && cfg.max_searches > 0) {
          std::string query = join(query_words, " ");
          auto results = web_search(kg, query, cfg.search_top_k, budget);
          if (results.has_value()) {
            out.executed_searches += 1;
            inject_response(Segment::tool_response(std::move(*results)));
          } else {
            inject_response(Segment::exhausted_response());
          }
        }
      } else if (vocab.is_word(tok)) {
        query_words.push_back(vocab.token(tok));
      } else {
        query_garbage = true;
      }
    }
  }

  auto segs = detail::segments_from_tokens(vocab, r.token_ids, r.action_mask, responses);
  if (segs.has_value()) {
    r.segments = std::move(*segs);
    out.rendered_text = render_rollout(r);
    out.format_valid = check_format(out.rendered_text) == 1.0;
  } else {
    out.rendered_text = detail::literal_join(vocab, r.token_ids);
    out.format_valid = false;
  }
  return out;
}

// --- scoring and gradients -----------------------------------------------------------

// Log-probabilities of the agent tokens (mask=true), conditioning on the
// prompt and on every preceding token including injected observations.
inline std::vector<double> sequence_log_probs(const PolicyParams& params, const Rollout& rollout,
                                              double temperature = 1.0) {
  if (!rollout.has_tokens())
    throw std::invalid_argument("sequence_log_probs: rollout carries no tokens");
  if (temperature <= 0.0) throw std::invalid_argument("sequence_log_probs: temperature must be > 0");
  PolicyWorkspace ws;
  std::vector<int> context = rollout.prompt_tokens;
  std::vector<double> out;
  for (size_t k = 0; k < rollout.token_ids.size(); ++k) {
    if (rollout.action_mask[k]) {
      detail::fill_window(params.arch, context, 0, ws.window);
      detail::forward_logits(params, ws.window, ws);
      out.push_back(detail::log_prob_of(ws.logits, temperature, rollout.token_ids[k]));
    }
    context.push_back(rollout.token_ids[k]);
  }
  return out;
}

// Exact gradient of sum_t weight_t * log pi(y_t | context) over the agent
// tokens; `weights` aligns with the compact agent-token sequence.
inline std::vector<double> grad_weighted_log_probs(const PolicyParams& params,
                                                   const Rollout& rollout,
                                                   std::span<const double> weights,
                                                   double temperature = 1.0) {
  if (!rollout.has_tokens())
    throw std::invalid_argument("grad_weighted_log_probs: rollout carries no tokens");
  if (temperature <= 0.0)
    throw std::invalid_argument("grad_weighted_log_probs: temperature must be > 0");

  const PolicyArch& a = params.arch;
  const int V = a.vocab, H = a.hidden, W = a.context_window;
  std::vector<double> grad(a.param_count(), 0.0);
  const double* w = params.values.data();
  const double* embed = w + a.off_embed();
  const double* pos_scale = w + a.off_pos_scale();
  const double* out = w + a.off_out();
  double* g_embed = grad.data() + a.off_embed();
  double* g_pos = grad.data() + a.off_pos_scale();
  double* g_hb = grad.data() + a.off_hidden_bias();
  double* g_out = grad.data() + a.off_out();
  double* g_ob = grad.data() + a.off_out_bias();
  double* g_cg = grad.data() + a.off_copy_gate();

  PolicyWorkspace ws;
  std::vector<double> dlogit(static_cast<size_t>(V), 0.0);
  std::vector<double> dhid(static_cast<size_t>(H), 0.0);
  std::vector<int> context = rollout.prompt_tokens;
  size_t agent_idx = 0;

  for (size_t k = 0; k < rollout.token_ids.size(); ++k) {
    const int y = rollout.token_ids[k];
    if (rollout.action_mask[k]) {
      if (agent_idx >= weights.size())
        throw std::invalid_argument("grad_weighted_log_probs: weights shorter than agent tokens");
      const double wt = weights[agent_idx++];
      if (wt != 0.0) {
        detail::fill_window(a, context, 0, ws.window);
        detail::forward_logits(params, ws.window, ws);
        detail::softmax(ws.logits, temperature, ws.probs);

        // d logp(y) / d logit_v = ((v==y) - p_v) / T
        for (int v = 0; v < V; ++v)
          dlogit[size_t(v)] = wt * ((v == y ? 1.0 : 0.0) - ws.probs[size_t(v)]) / temperature;

        for (int v = 0; v < V; ++v) g_ob[v] += dlogit[size_t(v)];
        for (int j = 0; j < W; ++j) {
          const int tok = ws.window[size_t(j)];
          bool seen_more_recently = false;
          for (int kk = 0; kk < j; ++kk)
            if (ws.window[size_t(kk)] == tok) {
              seen_more_recently = true;
              break;
            }
          if (!seen_more_recently) g_cg[j] += dlogit[size_t(tok)];
        }
        for (int h = 0; h < H; ++h) {
          const double* row = out + size_t(h) * size_t(V);
          double acc = 0.0;
          for (int v = 0; v < V; ++v) {
            g_out[size_t(h) * size_t(V) + size_t(v)] += ws.hidden[size_t(h)] * dlogit[size_t(v)];
            acc += row[v] * dlogit[size_t(v)];
          }
          dhid[size_t(h)] = acc;
        }
        for (int h = 0; h < H; ++h) {
          const double dpre = (1.0 - ws.hidden[size_t(h)] * ws.hidden[size_t(h)]) * dhid[size_t(h)];
          g_hb[h] += dpre;
          for (int j = 0; j < W; ++j) {
            const size_t tok = size_t(ws.window[size_t(j)]);
            g_pos[size_t(j) * size_t(H) + size_t(h)] += dpre * embed[tok * size_t(H) + size_t(h)];
            g_embed[tok * size_t(H) + size_t(h)] += dpre * pos_scale[size_t(j) * size_t(H) + size_t(h)];
          }
        }
      }
    }
    context.push_back(rollout.token_ids[k]);
  }
  if (agent_idx != weights.size())
    throw std::invalid_argument("grad_weighted_log_probs: weights longer than agent tokens");
  return grad;
}

// Deterministic retokenization of a grammar-valid rollout: the inverse of the
// sampler's token/text mapping for policy-generated rollouts. Fills
// prompt_tokens, token_ids and action_mask in place.
inline void encode_rollout_tokens(const Vocabulary& vocab, Rollout& rollout) {
  if (auto why = structure_violation(rollout.segments); !why.empty())
    throw InvalidStructure("encode_rollout_tokens: " + why);
  rollout.prompt_tokens = vocab.encode_words(rollout.question_text);
  rollout.token_ids.clear();
  rollout.action_mask.clear();
  rollout.log_probs.clear();

  auto push = [&](int tok, uint8_t mask) {
    rollout.token_ids.push_back(tok);
    rollout.action_mask.push_back(mask);
    rollout.log_probs.push_back(0.0);
  };
  for (const Segment& s : rollout.segments) {
    switch (s.kind) {
      case SegmentKind::Thought:
        push(vocab.think_open(), 1);
        for (int t : vocab.encode_words(s.payload)) push(t, 1);
        push(vocab.think_close(), 1);
        break;
      case SegmentKind::ToolCall:
        push(vocab.call_open(), 1);
        for (int t : vocab.encode_words(join(s.queries, " "))) push(t, 1);
        push(vocab.call_close(), 1);
        break;
      case SegmentKind::ToolResponse:
        push(vocab.resp_open(), 0);
        for (int t : detail::response_word_tokens(vocab, s)) push(t, 0);
        push(vocab.resp_close(), 0);
        break;
      case SegmentKind::Answer:
        push(vocab.answer_open(), 1);
        for (int t : vocab.encode_words(s.payload)) push(t, 1);
        push(vocab.answer_close(), 1);
        break;
    }
  }
}

inline int agent_token_count(const Rollout& rollout) {
  int n = 0;
  for (uint8_t m : rollout.action_mask) n += m ? 1 : 0;
  return n;
}

}  // namespace evosearch
