#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evosearch/rng.hpp"
#include "evosearch/rollout.hpp"
#include "evosearch/text.hpp"

namespace evosearch {

// ---------------------------------------------------------------------------
// Seeded synthetic world: a small knowledge graph, templated multi-hop
// questions over its edges, and a lexical `web_search` tool over entity
// descriptions and triple verbalizations. Everything is a pure function of
// (seed, size parameters), so runs replay bit-for-bit.
//
// Entity names are single underscore-joined tokens ("amber_falcon") and every
// (subject, relation) pair has at most one object, so each relation path fixes
// a unique gold answer. A 20% entity holdout plus a reserved question-template
// family provides the out-of-domain split.
// ---------------------------------------------------------------------------

struct InvalidSize : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ExhaustedPaths : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Entity {
  int id = 0;
  std::string name;
  std::vector<std::string> description;

  bool operator==(const Entity&) const = default;
};

struct Triple {
  int subject = 0;
  int relation = 0;
  int object = 0;

  bool operator==(const Triple&) const = default;
  auto operator<=>(const Triple&) const = default;
};

struct KnowledgeGraph {
  uint64_t seed = 0;
  std::vector<Entity> entities;
  std::vector<std::string> relation_labels;
  std::vector<Triple> triples;
  std::vector<int> holdout_entities;  // sorted ids reserved for the OOD split

  const Entity* find_entity(std::string_view name) const {
    for (const Entity& e : entities)
      if (e.name == name) return &e;
    return nullptr;
  }
  bool is_holdout(int id) const {
    return std::binary_search(holdout_entities.begin(), holdout_entities.end(), id);
  }
  // Functional lookup: the unique object of (subject, relation), if any.
  std::optional<int> follow(int subject, int relation) const {
    for (const Triple& t : triples)
      if (t.subject == subject && t.relation == relation) return t.object;
    return std::nullopt;
  }
  std::vector<std::string> entity_names() const {
    std::vector<std::string> names;
    names.reserve(entities.size());
    for (const Entity& e : entities) names.push_back(e.name);
    return names;
  }
};

enum class Split { Train, EvalInDomain, EvalOutOfDomain };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::EvalInDomain: return "eval_id";
    case Split::EvalOutOfDomain: return "eval_ood";
  }
  return "?";
}

struct Question {
  std::string id;
  std::string text;
  std::string gold_answer;
  int hop_count = 1;
  Split split = Split::Train;
  int shard = -1;  // assigned when the train set is sharded

  // Generation provenance, kept for oracles and scripted demonstrations.
  int anchor = 0;
  std::vector<int> relations;      // relation ids along the path
  std::vector<int> path_entities;  // anchor..gold, hop_count+1 entries

  bool operator==(const Question&) const = default;
};

// --- world generation ---------------------------------------------------------

namespace worldgen {

inline const std::vector<std::string>& adjective_pool() {
  static const std::vector<std::string> p = {
      "amber",  "basalt", "cobalt", "dusky",  "ember",  "fallow", "gilded", "hollow",
      "iron",   "jade",   "keen",   "lunar",  "mossy",  "noble",  "ochre",  "pale",
      "quiet",  "ruby",   "sable",  "tidal",  "umber",  "vivid",  "woven",  "zesty",
  };
  return p;
}

inline const std::vector<std::string>& noun_pool() {
  static const std::vector<std::string> p = {
      "falcon", "harbor", "lantern", "meadow", "orchard", "prism",  "quarry", "ridge",
      "spire",  "thicket", "vault",  "willow", "anvil",   "beacon", "cistern", "dune",
      "eyrie",  "fjord",  "grove",  "hearth", "islet",    "keep",   "lagoon", "mill",
  };
  return p;
}

inline const std::vector<std::string>& relation_pool() {
  static const std::vector<std::string> p = {
      "guards",   "borders",  "supplies", "mentors", "shadows", "feeds",
      "overlooks", "predates", "mirrors",  "anchors", "signals", "harbors",
      "rivals",   "echoes",   "funds",    "crowns",
  };
  return p;
}

inline const std::vector<std::string>& description_pool() {
  static const std::vector<std::string> p = {
      "ancient", "archive", "carved",  "cliffside", "crystal", "famed",   "foggy",
      "granite", "hidden",  "market",  "northern",  "outpost", "quiet",   "remote",
      "salt",    "stone",   "storied", "sunken",    "trade",   "watch",   "weathered",
      "windward", "winter",  "wooden",
  };
  return p;
}

}  // namespace worldgen

inline KnowledgeGraph generate_world(uint64_t seed, int n_entities, int n_relations) {
  if (n_entities < 10) throw InvalidSize("generate_world: need at least 10 entities");
  if (n_relations < 1) throw InvalidSize("generate_world: need at least 1 relation");

  KnowledgeGraph kg;
  kg.seed = seed;
  Rng rng(derive_seed(seed, {0x77221144aabbccddull}));

  // Unique single-token names: shuffled adjective x noun combos, numeric
  // suffix once the combo space wraps.
  const auto& adjs = worldgen::adjective_pool();
  const auto& nouns = worldgen::noun_pool();
  std::vector<std::pair<int, int>> combos;
  combos.reserve(adjs.size() * nouns.size());
  for (size_t a = 0; a < adjs.size(); ++a)
    for (size_t n = 0; n < nouns.size(); ++n) combos.emplace_back(int(a), int(n));
  rng.shuffle(combos);

  const auto& desc_pool = worldgen::description_pool();
  for (int i = 0; i < n_entities; ++i) {
    Entity e;
    e.id = i;
    auto [a, n] = combos[size_t(i) % combos.size()];
    e.name = adjs[size_t(a)] + "_" + nouns[size_t(n)];
    if (size_t(i) >= combos.size()) e.name += "_" + std::to_string(i / combos.size());
    // Fixed-length snippets keep every search document the same token count,
    // which keeps observation layouts position-stable for the tiny policy.
    for (int w = 0; w < 4; ++w)
      e.description.push_back(desc_pool[rng.next_index(desc_pool.size())]);
    kg.entities.push_back(std::move(e));
  }

  const auto& rel_pool = worldgen::relation_pool();
  for (int r = 0; r < n_relations; ++r) {
    if (size_t(r) < rel_pool.size())
      kg.relation_labels.push_back(rel_pool[size_t(r)]);
    else
      kg.relation_labels.push_back("bond_" + std::to_string(r));
  }

  // Every entity gets 2-4 outgoing edges over distinct relations, so the
  // out-degree post-condition holds with margin, (subject, relation) stays
  // functional, and the path pool is rich enough for large question sets.
  for (int s = 0; s < n_entities; ++s) {
    int degree = std::min(n_relations, 2 + rng.next_int(3));
    std::vector<int> rels(static_cast<size_t>(n_relations));
    for (int r = 0; r < n_relations; ++r) rels[size_t(r)] = r;
    rng.shuffle(rels);
    for (int k = 0; k < degree; ++k) {
      int object = rng.next_int(n_entities - 1);
      if (object >= s) ++object;  // exclude self-loops
      kg.triples.push_back(Triple{s, rels[size_t(k)], object});
    }
  }

  // 20% holdout for the OOD split.
  std::vector<int> ids(static_cast<size_t>(n_entities));
  for (int i = 0; i < n_entities; ++i) ids[size_t(i)] = i;
  rng.shuffle(ids);
  int n_holdout = std::max(1, n_entities / 5);
  kg.holdout_entities.assign(ids.begin(), ids.begin() + n_holdout);
  std::sort(kg.holdout_entities.begin(), kg.holdout_entities.end());
  return kg;
}

// --- question generation -------------------------------------------------------

namespace templates {

// Family 0 serves train/ID; family 1 is reserved for the OOD split.
inline std::string render_question(int family, const KnowledgeGraph& kg, int anchor,
                                   const std::vector<int>& relations) {
  const std::string& e = kg.entities[size_t(anchor)].name;
  auto rel = [&](size_t i) { return kg.relation_labels[size_t(relations[i])]; };
  std::string rels;
  for (size_t i = 0; i < relations.size(); ++i) {
    if (i) rels += " then ";
    rels += rel(i);
  }
  if (family == 0) return "which entity is reached from " + e + " via " + rels + " ?";
  return "where does " + e + " lead via " + rels + " ?";
}

inline const std::vector<std::string>& template_words() {
  static const std::vector<std::string> w = {
      "which", "entity", "is", "reached", "from", "via", "then", "?",
      "where", "does", "lead",
  };
  return w;
}

}  // namespace templates

// Largest-remainder quotas so the generated hop histogram matches the mix to
// within one question per bucket.
inline std::vector<std::pair<int, int>> hop_quotas(const std::map<int, double>& mix, int n) {
  double total = 0;
  for (auto& [h, p] : mix) total += p;
  std::vector<std::pair<int, int>> quota;
  std::vector<std::pair<double, int>> remainders;  // (fraction, bucket index)
  int assigned = 0;
  int idx = 0;
  for (auto& [h, p] : mix) {
    double exact = n * p / total;
    int base = static_cast<int>(exact);
    quota.emplace_back(h, base);
    remainders.emplace_back(exact - base, idx++);
    assigned += base;
  }
  std::sort(remainders.begin(), remainders.end(),
            [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  for (int i = 0; i < n - assigned; ++i) quota[size_t(remainders[size_t(i) % remainders.size()].second)].second += 1;
  return quota;
}

inline std::vector<Question> generate_questions(const KnowledgeGraph& kg,
                                                const std::map<int, double>& mix, int n,
                                                Split split, uint64_t seed) {
  if (kg.entities.empty()) throw InvalidSize("generate_questions: empty graph");
  if (n < 1) throw InvalidSize("generate_questions: n must be >= 1");

  Rng rng(derive_seed(seed, {0x51aa33cc77ee0011ull, static_cast<uint64_t>(split)}));
  const bool ood = split == Split::EvalOutOfDomain;

  std::vector<int> anchors;
  for (const Entity& e : kg.entities)
    if (kg.is_holdout(e.id) == ood) anchors.push_back(e.id);
  if (anchors.empty()) throw ExhaustedPaths("generate_questions: no anchors for split");

  // Walk steps stay on non-holdout entities for train/ID so the OOD subset is
  // unseen during training; OOD walks may leave the holdout set after the
  // anchor.
  auto step_allowed = [&](int entity) { return ood || !kg.is_holdout(entity); };

  std::set<std::tuple<int, int, std::vector<int>>> seen;  // (family, anchor, relations)
  std::vector<Question> out;
  auto quotas = hop_quotas(mix, n);

  const char* prefix = split == Split::Train ? "train" : (ood ? "ood" : "id");
  long attempts_left = static_cast<long>(n) * 400 + 4000;

  std::vector<int> order;  // hop bucket per question, shuffled
  for (auto [h, q] : quotas)
    for (int i = 0; i < q; ++i) order.push_back(h);
  rng.shuffle(order);

  for (int qi = 0; qi < n; ++qi) {
    int hops = order[size_t(qi)];
    bool placed = false;
    while (attempts_left-- > 0) {
      int anchor = anchors[rng.next_index(anchors.size())];
      std::vector<int> relations;
      std::vector<int> path{anchor};
      int cur = anchor;
      bool ok = true;
      for (int h = 0; h < hops; ++h) {
        std::vector<std::pair<int, int>> edges;  // (relation, object)
        for (const Triple& t : kg.triples) {
          if (t.subject != cur) continue;
          if (!step_allowed(t.object)) continue;
          if (std::find(path.begin(), path.end(), t.object) != path.end()) continue;
          edges.emplace_back(t.relation, t.object);
        }
        if (edges.empty()) {
          ok = false;
          break;
        }
        auto [rel, obj] = edges[rng.next_index(edges.size())];
        relations.push_back(rel);
        path.push_back(obj);
        cur = obj;
      }
      if (!ok) continue;
      int family = ood ? 1 : 0;
      if (!seen.insert({family, anchor, relations}).second) continue;

      Question q;
      q.id = std::string(prefix) + "-" + std::to_string(out.size());
      q.text = templates::render_question(family, kg, anchor, relations);
      q.gold_answer = kg.entities[size_t(path.back())].name;
      q.hop_count = hops;
      q.split = split;
      q.anchor = anchor;
      q.relations = relations;
      q.path_entities = path;
      out.push_back(std::move(q));
      placed = true;
      break;
    }
    if (!placed) throw ExhaustedPaths("generate_questions: cannot supply " + std::to_string(n) +
                                      " distinct paths");
  }
  return out;
}

// --- web search -----------------------------------------------------------------

// Remaining-searches counter, owned by a single rollout.
struct SearchBudget {
  int remaining = 0;
};

namespace detail {

struct Document {
  std::vector<std::string> title;
  std::vector<std::string> snippet;
};

inline std::vector<Document> corpus(const KnowledgeGraph& kg) {
  std::vector<Document> docs;
  docs.reserve(kg.entities.size() + kg.triples.size());
  for (const Entity& e : kg.entities) docs.push_back(Document{{e.name}, e.description});
  for (const Triple& t : kg.triples) {
    const std::string& s = kg.entities[size_t(t.subject)].name;
    const std::string& r = kg.relation_labels[size_t(t.relation)];
    const std::string& o = kg.entities[size_t(t.object)].name;
    docs.push_back(Document{{s, r}, {s, r, o}});
  }
  return docs;
}

}  // namespace detail

// Top-k documents by token-overlap count against the query; zero-overlap
// documents are dropped; ties resolve by document order (entity docs in id
// order, then triples in generation order). Returns nullopt when the budget
// is already exhausted; otherwise decrements it.
inline std::optional<std::vector<SearchResult>> web_search(const KnowledgeGraph& kg,
                                                           std::string_view query, int top_k,
                                                           SearchBudget& budget) {
  if (top_k < 1) throw InvalidSize("web_search: top_k must be >= 1");
  if (budget.remaining <= 0) return std::nullopt;
  budget.remaining -= 1;

  std::vector<std::string> qtokens = split_whitespace(query);
  std::sort(qtokens.begin(), qtokens.end());
  qtokens.erase(std::unique(qtokens.begin(), qtokens.end()), qtokens.end());

  auto docs = detail::corpus(kg);
  std::vector<std::pair<int, size_t>> scored;  // (score, doc index)
  for (size_t d = 0; d < docs.size(); ++d) {
    std::set<std::string_view> doc_tokens;
    for (const auto& t : docs[d].title) doc_tokens.insert(t);
    for (const auto& t : docs[d].snippet) doc_tokens.insert(t);
    int score = 0;
    for (const auto& q : qtokens)
      if (doc_tokens.count(q)) ++score;
    if (score > 0) scored.emplace_back(score, d);
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  if (static_cast<int>(scored.size()) > top_k) scored.resize(static_cast<size_t>(top_k));

  std::vector<SearchResult> results;
  results.reserve(scored.size());
  for (auto [score, d] : scored)
    results.push_back(SearchResult{join(docs[d].title, " "), join(docs[d].snippet, " "), score});
  return results;
}

// --- answer scoring ---------------------------------------------------------------

// Deterministic stand-in for a model judge: normalized gold must occur as a
// contiguous token run in the prediction, and listing a second known entity
// alongside it counts as a multi-answer response, which is incorrect.
inline double judge_answer(std::string_view pred, std::string_view gold,
                           const std::vector<std::string>* known_entities = nullptr) {
  auto p = normalize_tokens(pred);
  auto g = normalize_tokens(gold);
  if (g.empty() || p.empty()) return 0.0;
  if (!contains_contiguous(p, g)) return 0.0;
  if (known_entities) {
    for (const std::string& name : *known_entities) {
      auto e = normalize_tokens(name);
      if (e.empty() || e == g) continue;
      if (contains_contiguous(p, e)) return 0.0;  // a second entity is listed
    }
  }
  return 1.0;
}

// Token-level F1 with multiset overlap; 0 when either side is empty.
inline double f1_score(std::string_view pred, std::string_view gold) {
  auto p = normalize_tokens(pred);
  auto g = normalize_tokens(gold);
  if (p.empty() || g.empty()) return 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : g) counts[t] += 1;
  int common = 0;
  for (const auto& t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  double precision = double(common) / double(p.size());
  double recall = double(common) / double(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

// Hard-label recall: 1.0 iff every normalized gold token appears in pred.
inline double recall_reward(std::string_view pred, std::string_view gold) {
  auto p = normalize_tokens(pred);
  auto g = normalize_tokens(gold);
  if (p.empty() || g.empty()) return 0.0;
  std::set<std::string> have(p.begin(), p.end());
  for (const auto& t : g)
    if (!have.count(t)) return 0.0;
  return 1.0;
}

}  // namespace evosearch
