#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evosearch/text.hpp"

namespace evosearch {

// ---------------------------------------------------------------------------
// Rollout data model and the tagged text grammar.
//
// A rollout is zero or more (thought, tool call, tool response) cycles followed
// by exactly one thought and one answer:
//
//   <think>...</think>
//   <tool_call>{"name": "web_search", "arguments": {"queries": [...]}}</tool_call>
//   <tool_response>{"name": "web_search", "content": {"results": [...]}}</tool_response>
//   ...
//   <think>...</think>
//   <answer>...</answer>
//
// The renderer emits exactly one newline between blocks and canonical
// single-line JSON payloads inside the tool tags, so rendered files are
// byte-stable. The parser is strict: it accepts arbitrary whitespace between
// blocks and nothing else.
// ---------------------------------------------------------------------------

enum class SegmentKind { Thought, ToolCall, ToolResponse, Answer };

struct SearchResult {
  std::string title;
  std::string snippet;
  int score = 0;  // lexical overlap count

  bool operator==(const SearchResult&) const = default;
};

struct Segment {
  SegmentKind kind = SegmentKind::Thought;
  std::string payload;                // Thought / Answer text, verbatim
  std::string tool_name;              // ToolCall only
  std::vector<std::string> queries;   // ToolCall only, non-empty
  std::vector<SearchResult> results;  // ToolResponse only
  bool budget_exhausted = false;      // ToolResponse variant: no results, message instead

  bool operator==(const Segment&) const = default;

  static Segment thought(std::string text) {
    Segment s;
    s.kind = SegmentKind::Thought;
    s.payload = std::move(text);
    return s;
  }
  static Segment tool_call(std::vector<std::string> qs) {
    Segment s;
    s.kind = SegmentKind::ToolCall;
    s.tool_name = "web_search";
    s.queries = std::move(qs);
    return s;
  }
  static Segment tool_response(std::vector<SearchResult> rs) {
    Segment s;
    s.kind = SegmentKind::ToolResponse;
    s.results = std::move(rs);
    return s;
  }
  static Segment exhausted_response() {
    Segment s;
    s.kind = SegmentKind::ToolResponse;
    s.budget_exhausted = true;
    return s;
  }
  static Segment answer(std::string text) {
    Segment s;
    s.kind = SegmentKind::Answer;
    s.payload = std::move(text);
    return s;
  }
};

struct Rollout {
  std::string question_id;
  std::string question_text;
  std::vector<Segment> segments;

  // Filled by the policy sampler. prompt_tokens condition the policy but are
  // not part of the generated sequence; action_mask is false exactly on the
  // environment-injected tool response blocks (tags included).
  std::vector<int> prompt_tokens;
  std::vector<int> token_ids;
  std::vector<uint8_t> action_mask;
  std::vector<double> log_probs;  // sampling-time log-probs, 0.0 where masked

  bool has_tokens() const { return !token_ids.empty(); }
};

enum class FormatErrorKind {
  UnbalancedTag,
  WrongOrder,
  TrailingContent,
  MalformedToolCall,
  MissingAnswer,
};

inline const char* to_string(FormatErrorKind k) {
  switch (k) {
    case FormatErrorKind::UnbalancedTag: return "UnbalancedTag";
    case FormatErrorKind::WrongOrder: return "WrongOrder";
    case FormatErrorKind::TrailingContent: return "TrailingContent";
    case FormatErrorKind::MalformedToolCall: return "MalformedToolCall";
    case FormatErrorKind::MissingAnswer: return "MissingAnswer";
  }
  return "?";
}

struct FormatError {
  FormatErrorKind kind = FormatErrorKind::MissingAnswer;
  size_t position = 0;  // byte offset of the first violation
  std::string detail;
};

struct ParseOutcome {
  bool ok = false;
  Rollout rollout;
  FormatError error;
};

struct InvalidStructure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace tags {
inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kToolCallOpen = "<tool_call>";
inline constexpr std::string_view kToolCallClose = "</tool_call>";
inline constexpr std::string_view kToolResponseOpen = "<tool_response>";
inline constexpr std::string_view kToolResponseClose = "</tool_response>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";

inline constexpr std::string_view kAll[] = {
    kThinkOpen,       kThinkClose,       kToolCallOpen, kToolCallClose,
    kToolResponseOpen, kToolResponseClose, kAnswerOpen,   kAnswerClose,
};
}  // namespace tags

inline constexpr std::string_view kBudgetExhaustedMessage = "search budget exhausted";

// --- structural validation ---------------------------------------------------

// Checks the segment-order invariant: ((Thought, ToolCall, ToolResponse)* ,
// Thought, Answer), plus the per-segment payload invariants. Returns an empty
// string when valid, otherwise a description of the first violation.
inline std::string structure_violation(const std::vector<Segment>& segments) {
  auto payload_has_tag = [](const std::string& p) {
    for (auto t : tags::kAll) {
      if (p.find(t) != std::string::npos) return true;
    }
    return false;
  };
  size_t i = 0;
  const size_t n = segments.size();
  while (true) {
    if (i >= n) return "ends without a thought/answer pair";
    if (segments[i].kind != SegmentKind::Thought)
      return "expected a thought at segment " + std::to_string(i);
    if (trim_view(segments[i].payload).empty())
      return "empty thought payload at segment " + std::to_string(i);
    if (payload_has_tag(segments[i].payload))
      return "thought payload embeds a structural tag at segment " + std::to_string(i);
    ++i;
    if (i >= n) return "thought without a following tool call or answer";
    if (segments[i].kind == SegmentKind::Answer) {
      if (segments[i].payload.empty())
        return "empty answer payload at segment " + std::to_string(i);
      if (payload_has_tag(segments[i].payload))
        return "answer payload embeds a structural tag at segment " + std::to_string(i);
      ++i;
      if (i != n) return "content after the answer segment";
      return "";
    }
    if (segments[i].kind != SegmentKind::ToolCall)
      return "expected a tool call or answer at segment " + std::to_string(i);
    if (segments[i].tool_name != "web_search")
      return "tool name must be web_search at segment " + std::to_string(i);
    if (segments[i].queries.empty())
      return "tool call with no queries at segment " + std::to_string(i);
    for (const auto& q : segments[i].queries) {
      if (payload_has_tag(q)) return "query embeds a structural tag at segment " + std::to_string(i);
    }
    ++i;
    if (i >= n || segments[i].kind != SegmentKind::ToolResponse)
      return "tool call without a following tool response at segment " + std::to_string(i);
    for (const auto& r : segments[i].results) {
      if (payload_has_tag(r.title) || payload_has_tag(r.snippet))
        return "search result embeds a structural tag at segment " + std::to_string(i);
    }
    ++i;
  }
}

inline bool is_grammar_valid(const std::vector<Segment>& segments) {
  return structure_violation(segments).empty();
}

// --- rendering ---------------------------------------------------------------

namespace detail {

inline std::string json_quote(const std::string& s) { return nlohmann::json(s).dump(); }

inline std::string tool_call_line(const Segment& s) {
  std::string out = "{\"name\": " + json_quote(s.tool_name) + ", \"arguments\": {\"queries\": [";
  for (size_t i = 0; i < s.queries.size(); ++i) {
    if (i) out += ", ";
    out += json_quote(s.queries[i]);
  }
  out += "]}}";
  return out;
}

inline std::string tool_response_line(const Segment& s) {
  std::string out = "{\"name\": \"web_search\", \"content\": {";
  if (s.budget_exhausted) {
    out += "\"error\": " + json_quote(std::string(kBudgetExhaustedMessage));
  } else {
    out += "\"results\": [";
    for (size_t i = 0; i < s.results.size(); ++i) {
      if (i) out += ", ";
      out += "{\"title\": " + json_quote(s.results[i].title) +
             ", \"snippet\": " + json_quote(s.results[i].snippet) +
             ", \"score\": " + std::to_string(s.results[i].score) + "}";
    }
    out += "]";
  }
  out += "}}";
  return out;
}

}  // namespace detail

inline std::string render_rollout(const Rollout& rollout) {
  if (auto why = structure_violation(rollout.segments); !why.empty())
    throw InvalidStructure("render_rollout: " + why);
  std::string out;
  for (size_t i = 0; i < rollout.segments.size(); ++i) {
    const Segment& s = rollout.segments[i];
    if (i) out += '\n';
    switch (s.kind) {
      case SegmentKind::Thought:
        out += tags::kThinkOpen;
        out += s.payload;
        out += tags::kThinkClose;
        break;
      case SegmentKind::ToolCall:
        out += tags::kToolCallOpen;
        out += detail::tool_call_line(s);
        out += tags::kToolCallClose;
        break;
      case SegmentKind::ToolResponse:
        out += tags::kToolResponseOpen;
        out += detail::tool_response_line(s);
        out += tags::kToolResponseClose;
        break;
      case SegmentKind::Answer:
        out += tags::kAnswerOpen;
        out += s.payload;
        out += tags::kAnswerClose;
        break;
    }
  }
  return out;
}

// --- parsing -----------------------------------------------------------------

namespace detail {

inline bool starts_with_at(std::string_view text, size_t pos, std::string_view prefix) {
  return text.size() - pos >= prefix.size() && text.substr(pos, prefix.size()) == prefix;
}

inline size_t skip_ws(std::string_view text, size_t pos) {
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  return pos;
}

inline bool at_known_tag(std::string_view text, size_t pos) {
  for (auto t : tags::kAll) {
    if (starts_with_at(text, pos, t)) return true;
  }
  return false;
}

inline size_t find_embedded_tag(std::string_view payload) {
  size_t first = std::string_view::npos;
  for (auto t : tags::kAll) {
    size_t p = payload.find(t);
    if (p != std::string_view::npos) first = std::min(first, p);
  }
  return first;
}

inline bool strings_embed_tag(const std::vector<std::string>& strings) {
  for (const auto& s : strings)
    if (find_embedded_tag(s) != std::string_view::npos) return true;
  return false;
}

// Parses the single-line JSON payload of a <tool_call> block. Unknown keys
// anywhere inside are rejected so the format reward stays strict.
inline bool parse_tool_call_payload(std::string_view payload, Segment& out, std::string& why) {
  std::string_view body = trim_view(payload);
  if (body.find('\n') != std::string_view::npos) {
    why = "tool call payload must be a single line";
    return false;
  }
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    why = "tool call payload is not a JSON object";
    return false;
  }
  if (j.size() != 2 || !j.contains("name") || !j.contains("arguments")) {
    why = "tool call object must have exactly the keys name and arguments";
    return false;
  }
  if (!j["name"].is_string() || j["name"].get<std::string>() != "web_search") {
    why = "tool name must be \"web_search\"";
    return false;
  }
  const auto& args = j["arguments"];
  if (!args.is_object() || args.size() != 1 || !args.contains("queries")) {
    why = "arguments must have exactly the key queries";
    return false;
  }
  const auto& queries = args["queries"];
  if (!queries.is_array() || queries.empty()) {
    why = "queries must be a non-empty array";
    return false;
  }
  out.kind = SegmentKind::ToolCall;
  out.tool_name = "web_search";
  out.queries.clear();
  for (const auto& q : queries) {
    if (!q.is_string()) {
      why = "queries must be strings";
      return false;
    }
    out.queries.push_back(q.get<std::string>());
  }
  if (strings_embed_tag(out.queries)) {
    why = "query embeds a structural tag";
    return false;
  }
  return true;
}

inline bool parse_tool_response_payload(std::string_view payload, Segment& out, std::string& why) {
  std::string_view body = trim_view(payload);
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    why = "tool response payload is not a JSON object";
    return false;
  }
  if (j.size() != 2 || !j.contains("name") || !j.contains("content")) {
    why = "tool response object must have exactly the keys name and content";
    return false;
  }
  if (!j["name"].is_string() || j["name"].get<std::string>() != "web_search") {
    why = "tool response name must be \"web_search\"";
    return false;
  }
  const auto& content = j["content"];
  if (!content.is_object() || content.size() != 1) {
    why = "content must have exactly one key (results or error)";
    return false;
  }
  out.kind = SegmentKind::ToolResponse;
  out.results.clear();
  out.budget_exhausted = false;
  if (content.contains("error")) {
    if (!content["error"].is_string()) {
      why = "error must be a string";
      return false;
    }
    out.budget_exhausted = true;
    return true;
  }
  if (!content.contains("results") || !content["results"].is_array()) {
    why = "content must carry a results array";
    return false;
  }
  for (const auto& r : content["results"]) {
    if (!r.is_object() || r.size() != 3 || !r.contains("title") || !r.contains("snippet") ||
        !r.contains("score") || !r["title"].is_string() || !r["snippet"].is_string() ||
        !r["score"].is_number_integer()) {
      why = "each result must be {title, snippet, score}";
      return false;
    }
    out.results.push_back(SearchResult{r["title"].get<std::string>(),
                                       r["snippet"].get<std::string>(), r["score"].get<int>()});
    if (find_embedded_tag(out.results.back().title) != std::string_view::npos ||
        find_embedded_tag(out.results.back().snippet) != std::string_view::npos) {
      why = "search result embeds a structural tag";
      return false;
    }
  }
  return true;
}

}  // namespace detail

// Strict parse of the tagged template. On failure the returned FormatError
// carries the first violation's byte offset. Error mapping for conditions the
// grammar implies but the error set does not name explicitly: an empty thought
// payload reports WrongOrder, an empty answer payload reports MissingAnswer,
// and a malformed <tool_response> payload reports MalformedToolCall.
inline ParseOutcome parse_rollout(std::string_view text) {
  using detail::at_known_tag;
  using detail::skip_ws;
  using detail::starts_with_at;

  ParseOutcome outcome;
  std::vector<Segment>& segments = outcome.rollout.segments;

  auto fail = [&](FormatErrorKind kind, size_t pos, std::string detail) {
    outcome.ok = false;
    outcome.error = FormatError{kind, pos, std::move(detail)};
    return outcome;
  };

  enum class Expect { Thought, CallOrAnswer, Response, End };
  Expect expect = Expect::Thought;
  size_t pos = 0;

  while (true) {
    pos = skip_ws(text, pos);
    if (pos >= text.size()) {
      switch (expect) {
        case Expect::End:
          outcome.ok = true;
          return outcome;
        case Expect::Response:
          return fail(FormatErrorKind::WrongOrder, pos, "tool call without a tool response");
        default:
          return fail(FormatErrorKind::MissingAnswer, pos, "input ends before the answer");
      }
    }
    if (expect == Expect::End)
      return fail(FormatErrorKind::TrailingContent, pos, "content after the answer block");

    if (!at_known_tag(text, pos))
      return fail(FormatErrorKind::TrailingContent, pos, "stray content outside tags");

    if (expect == Expect::Thought || expect == Expect::CallOrAnswer) {
      if (starts_with_at(text, pos, tags::kThinkOpen)) {
        if (expect == Expect::CallOrAnswer)
          return fail(FormatErrorKind::WrongOrder, pos, "thought must be followed by a tool call or answer");
        size_t body = pos + tags::kThinkOpen.size();
        size_t close = text.find(tags::kThinkClose, body);
        if (close == std::string_view::npos)
          return fail(FormatErrorKind::UnbalancedTag, pos, "unterminated <think>");
        std::string payload(text.substr(body, close - body));
        if (trim_view(payload).empty())
          return fail(FormatErrorKind::WrongOrder, body, "empty thought payload");
        if (size_t p = detail::find_embedded_tag(payload); p != std::string_view::npos)
          return fail(FormatErrorKind::WrongOrder, body + p, "tag nested inside a thought");
        segments.push_back(Segment::thought(std::move(payload)));
        pos = close + tags::kThinkClose.size();
        expect = Expect::CallOrAnswer;
        continue;
      }
      if (expect == Expect::CallOrAnswer && starts_with_at(text, pos, tags::kToolCallOpen)) {
        size_t body = pos + tags::kToolCallOpen.size();
        size_t close = text.find(tags::kToolCallClose, body);
        if (close == std::string_view::npos)
          return fail(FormatErrorKind::UnbalancedTag, pos, "unterminated <tool_call>");
        Segment seg;
        std::string why;
        if (!detail::parse_tool_call_payload(text.substr(body, close - body), seg, why))
          return fail(FormatErrorKind::MalformedToolCall, body, why);
        segments.push_back(std::move(seg));
        pos = close + tags::kToolCallClose.size();
        expect = Expect::Response;
        continue;
      }
      if (expect == Expect::CallOrAnswer && starts_with_at(text, pos, tags::kAnswerOpen)) {
        size_t body = pos + tags::kAnswerOpen.size();
        size_t close = text.find(tags::kAnswerClose, body);
        if (close == std::string_view::npos)
          return fail(FormatErrorKind::UnbalancedTag, pos, "unterminated <answer>");
        std::string payload(text.substr(body, close - body));
        if (payload.empty())
          return fail(FormatErrorKind::MissingAnswer, body, "empty answer payload");
        if (size_t p = detail::find_embedded_tag(payload); p != std::string_view::npos)
          return fail(FormatErrorKind::WrongOrder, body + p, "tag nested inside the answer");
        segments.push_back(Segment::answer(std::move(payload)));
        pos = close + tags::kAnswerClose.size();
        expect = Expect::End;
        continue;
      }
      return fail(FormatErrorKind::WrongOrder, pos,
                  expect == Expect::Thought ? "expected <think>"
                                            : "expected <tool_call> or <answer>");
    }

    // expect == Expect::Response
    if (starts_with_at(text, pos, tags::kToolResponseOpen)) {
      size_t body = pos + tags::kToolResponseOpen.size();
      size_t close = text.find(tags::kToolResponseClose, body);
      if (close == std::string_view::npos)
        return fail(FormatErrorKind::UnbalancedTag, pos, "unterminated <tool_response>");
      Segment seg;
      std::string why;
      if (!detail::parse_tool_response_payload(text.substr(body, close - body), seg, why))
        return fail(FormatErrorKind::MalformedToolCall, body, why);
      segments.push_back(std::move(seg));
      pos = close + tags::kToolResponseClose.size();
      expect = Expect::Thought;
      continue;
    }
    return fail(FormatErrorKind::WrongOrder, pos, "tool call without a tool response");
  }
}

// Pure function of the text: 1.0 iff parse_rollout succeeds.
inline double check_format(std::string_view text) { return parse_rollout(text).ok ? 1.0 : 0.0; }

inline int count_tool_calls(const Rollout& rollout) {
  int n = 0;
  for (const Segment& s : rollout.segments)
    if (s.kind == SegmentKind::ToolCall) ++n;
  return n;
}

}  // namespace evosearch
