#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evosearch/policy.hpp"
#include "evosearch/reward.hpp"
#include "evosearch/search_env.hpp"

namespace evosearch {

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace io {

using nlohmann::json;

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot write " + path.string());
  out.write(content.data(), std::streamsize(content.size()));
  if (!out) throw IoFailure("short write to " + path.string());
}

// --- world and question files ---------------------------------------------------

inline json world_to_json(const KnowledgeGraph& kg) {
  json j;
  j["seed"] = kg.seed;
  j["relations"] = kg.relation_labels;
  j["holdout"] = kg.holdout_entities;
  json entities = json::array();
  for (const Entity& e : kg.entities)
    entities.push_back({{"id", e.id}, {"name", e.name}, {"description", e.description}});
  j["entities"] = std::move(entities);
  json triples = json::array();
  for (const Triple& t : kg.triples) triples.push_back({t.subject, t.relation, t.object});
  j["triples"] = std::move(triples);
  return j;
}

inline KnowledgeGraph world_from_json(const json& j) {
  KnowledgeGraph kg;
  kg.seed = j.at("seed").get<uint64_t>();
  kg.relation_labels = j.at("relations").get<std::vector<std::string>>();
  kg.holdout_entities = j.at("holdout").get<std::vector<int>>();
  for (const auto& e : j.at("entities"))
    kg.entities.push_back(Entity{e.at("id").get<int>(), e.at("name").get<std::string>(),
                                 e.at("description").get<std::vector<std::string>>()});
  for (const auto& t : j.at("triples"))
    kg.triples.push_back(Triple{t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
  return kg;
}

inline void save_world(const KnowledgeGraph& kg, const std::filesystem::path& path) {
  write_file(path, world_to_json(kg).dump(2) + "\n");
}

inline KnowledgeGraph load_world(const std::filesystem::path& path) {
  return world_from_json(json::parse(read_file(path)));
}

inline json question_to_json(const Question& q) {
  return json{{"id", q.id},
              {"text", q.text},
              {"gold_answer", q.gold_answer},
              {"hop_count", q.hop_count},
              {"split", to_string(q.split)},
              {"shard", q.shard},
              {"anchor", q.anchor},
              {"relations", q.relations},
              {"path", q.path_entities}};
}

inline Question question_from_json(const json& j) {
  Question q;
  q.id = j.at("id").get<std::string>();
  q.text = j.at("text").get<std::string>();
  q.gold_answer = j.at("gold_answer").get<std::string>();
  q.hop_count = j.at("hop_count").get<int>();
  std::string split = j.at("split").get<std::string>();
  q.split = split == "train" ? Split::Train
                             : (split == "eval_id" ? Split::EvalInDomain : Split::EvalOutOfDomain);
  q.shard = j.at("shard").get<int>();
  q.anchor = j.at("anchor").get<int>();
  q.relations = j.at("relations").get<std::vector<int>>();
  q.path_entities = j.at("path").get<std::vector<int>>();
  return q;
}

inline void save_questions(const std::vector<Question>& qs, uint64_t seed,
                           const std::filesystem::path& path) {
  json j;
  j["seed"] = seed;
  json arr = json::array();
  for (const Question& q : qs) arr.push_back(question_to_json(q));
  j["questions"] = std::move(arr);
  write_file(path, j.dump(2) + "\n");
}

inline std::vector<Question> load_questions(const std::filesystem::path& path) {
  json j = json::parse(read_file(path));
  std::vector<Question> qs;
  for (const auto& q : j.at("questions")) qs.push_back(question_from_json(q));
  return qs;
}

// --- rollout log records (the interchange format) ---------------------------------

inline AnswerMode mode_from_string(std::string_view s) {
  if (s == "judge") return AnswerMode::Judge;
  if (s == "f1") return AnswerMode::F1;
  if (s == "recall") return AnswerMode::Recall;
  throw IoFailure("unknown answer mode: " + std::string(s));
}

inline json record_to_json(const ScoredRollout& r) {
  return json{{"question_id", r.rollout.question_id},
              {"question_text", r.rollout.question_text},
              {"rendered_text", r.rendered_text},
              {"reward_breakdown",
               {{"format_reward", r.reward.format_reward},
                {"answer_reward", r.reward.answer_reward},
                {"total", r.reward.total},
                {"mode", to_string(r.reward.mode)},
                {"answer_evaluated", r.reward.answer_evaluated}}},
              {"tool_call_count", r.tool_call_count},
              {"iteration_index", r.iteration_index},
              {"seed", r.seed}};
}

inline ScoredRollout record_from_json(const json& j) {
  ScoredRollout r;
  r.rollout.question_id = j.at("question_id").get<std::string>();
  r.rollout.question_text = j.at("question_text").get<std::string>();
  r.rendered_text = j.at("rendered_text").get<std::string>();
  const auto& rb = j.at("reward_breakdown");
  r.reward.format_reward = rb.at("format_reward").get<double>();
  r.reward.answer_reward = rb.at("answer_reward").get<double>();
  r.reward.total = rb.at("total").get<double>();
  r.reward.mode = mode_from_string(rb.at("mode").get<std::string>());
  r.reward.answer_evaluated = rb.at("answer_evaluated").get<bool>();
  r.tool_call_count = j.at("tool_call_count").get<int>();
  r.iteration_index = j.at("iteration_index").get<int>();
  r.seed = j.at("seed").get<uint64_t>();
  auto parsed = parse_rollout(r.rendered_text);
  if (parsed.ok) r.rollout.segments = std::move(parsed.rollout.segments);
  return r;
}

inline std::string records_to_jsonl(std::span<const ScoredRollout> records) {
  std::string out;
  for (const ScoredRollout& r : records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<ScoredRollout> records_from_jsonl(std::string_view content) {
  std::vector<ScoredRollout> out;
  size_t start = 0;
  while (start < content.size()) {
    size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(start, end - start);
    if (!trim_view(line).empty()) out.push_back(record_from_json(json::parse(line)));
    start = end + 1;
  }
  return out;
}

inline void save_records(std::span<const ScoredRollout> records,
                         const std::filesystem::path& path) {
  write_file(path, records_to_jsonl(records));
}

inline std::vector<ScoredRollout> load_records(const std::filesystem::path& path) {
  return records_from_jsonl(read_file(path));
}

// --- checkpoints -------------------------------------------------------------------

// Fixed little-endian layout: magic "EVCK", u32 version, u32 context_window,
// u32 hidden, u32 vocab, u64 param count, then params as f64.
namespace detail {

inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
inline uint32_t get_u32(std::string_view in, size_t& pos) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(in[pos++])) << (8 * i);
  return v;
}
inline uint64_t get_u64(std::string_view in, size_t& pos) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(in[pos++])) << (8 * i);
  return v;
}

}  // namespace detail

inline constexpr uint32_t kCheckpointVersion = 1;

inline std::string checkpoint_to_bytes(const PolicyParams& params) {
  std::string out;
  out.reserve(24 + params.values.size() * 8);
  out += "EVCK";
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, uint32_t(params.arch.context_window));
  detail::put_u32(out, uint32_t(params.arch.hidden));
  detail::put_u32(out, uint32_t(params.arch.vocab));
  detail::put_u64(out, uint64_t(params.values.size()));
  for (double v : params.values) detail::put_u64(out, std::bit_cast<uint64_t>(v));
  return out;
}

inline PolicyParams checkpoint_from_bytes(std::string_view bytes) {
  if (bytes.size() < 28 || bytes.substr(0, 4) != "EVCK")
    throw IoFailure("not a policy checkpoint");
  size_t pos = 4;
  uint32_t version = detail::get_u32(bytes, pos);
  if (version != kCheckpointVersion) throw IoFailure("unsupported checkpoint version");
  PolicyParams p;
  p.arch.context_window = int(detail::get_u32(bytes, pos));
  p.arch.hidden = int(detail::get_u32(bytes, pos));
  p.arch.vocab = int(detail::get_u32(bytes, pos));
  uint64_t n = detail::get_u64(bytes, pos);
  if (n != p.arch.param_count() || bytes.size() != pos + n * 8)
    throw IoFailure("checkpoint size mismatch");
  p.values.resize(n);
  for (uint64_t i = 0; i < n; ++i)
    p.values[i] = std::bit_cast<double>(detail::get_u64(bytes, pos));
  return p;
}

inline void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path) {
  write_file(path, checkpoint_to_bytes(params));
}

inline PolicyParams load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_bytes(read_file(path));
}

// --- flat key-value config files ----------------------------------------------------

// Lines of `key=value`; '#' starts a comment; blank lines ignored.
inline std::map<std::string, std::string> parse_kv(std::string_view content) {
  std::map<std::string, std::string> out;
  size_t start = 0;
  int line_no = 0;
  while (start <= content.size()) {
    size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim_view(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw IoFailure("config line " + std::to_string(line_no) + ": expected key=value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    if (end == content.size()) break;
  }
  return out;
}

inline std::map<std::string, std::string> load_kv(const std::filesystem::path& path) {
  return parse_kv(read_file(path));
}

}  // namespace io
}  // namespace evosearch
