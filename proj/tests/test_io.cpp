#include "evosearch/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>

namespace evosearch {
namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("evosearch_io_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TEST(WorldIo, RoundTrip) {
  TempDir tmp;
  auto kg = generate_world(11, 25, 4);
  io::save_world(kg, tmp.path / "world.json");
  auto loaded = io::load_world(tmp.path / "world.json");
  EXPECT_EQ(loaded.seed, kg.seed);
  EXPECT_EQ(loaded.entities, kg.entities);
  EXPECT_EQ(loaded.triples, kg.triples);
  EXPECT_EQ(loaded.relation_labels, kg.relation_labels);
  EXPECT_EQ(loaded.holdout_entities, kg.holdout_entities);
}

TEST(QuestionIo, RoundTripWithSeed) {
  TempDir tmp;
  auto kg = generate_world(11, 25, 4);
  auto qs = generate_questions(kg, {{1, 0.5}, {2, 0.5}}, 30, Split::EvalInDomain, 7);
  io::save_questions(qs, 7, tmp.path / "qs.json");
  auto loaded = io::load_questions(tmp.path / "qs.json");
  EXPECT_EQ(loaded, qs);
  auto j = nlohmann::json::parse(io::read_file(tmp.path / "qs.json"));
  EXPECT_EQ(j.at("seed").get<uint64_t>(), 7u);
}

TEST(RecordIo, JsonlRoundTripAndReparse) {
  ScoredRollout rec;
  rec.rollout.question_id = "train-3";
  rec.rollout.question_text = "which entity is reached from amber_falcon via guards ?";
  rec.rollout.segments = {
      Segment::thought("step"),
      Segment::tool_call({"amber_falcon guards"}),
      Segment::tool_response({{"amber_falcon guards", "amber_falcon guards jade_spire", 2}}),
      Segment::thought("found"),
      Segment::answer("jade_spire"),
  };
  rec.rendered_text = render_rollout(rec.rollout);
  rec.reward = RewardBreakdown{1.0, 1.0, 1.0, AnswerMode::Judge, true};
  rec.tool_call_count = 1;
  rec.iteration_index = 2;
  rec.seed = 0xdeadbeefcafe1234ull;

  auto jsonl = io::records_to_jsonl(std::vector<ScoredRollout>{rec, rec});
  auto loaded = io::records_from_jsonl(jsonl);
  ASSERT_EQ(loaded.size(), 2u);
  for (const auto& l : loaded) {
    EXPECT_EQ(l.rollout.question_id, rec.rollout.question_id);
    EXPECT_EQ(l.rollout.question_text, rec.rollout.question_text);
    EXPECT_EQ(l.rendered_text, rec.rendered_text);
    EXPECT_EQ(l.rollout.segments, rec.rollout.segments);  // reparsed from text
    EXPECT_EQ(l.reward, rec.reward);
    EXPECT_EQ(l.tool_call_count, rec.tool_call_count);
    EXPECT_EQ(l.iteration_index, rec.iteration_index);
    EXPECT_EQ(l.seed, rec.seed);
  }
  // Serialization is byte-stable.
  EXPECT_EQ(io::records_to_jsonl(loaded), jsonl);
}

TEST(RecordIo, InvalidRenderedTextYieldsNoSegments) {
  ScoredRollout rec;
  rec.rollout.question_id = "q";
  rec.rollout.question_text = "t";
  rec.rendered_text = "<answer> junk";
  auto jsonl = io::records_to_jsonl(std::vector<ScoredRollout>{rec});
  auto loaded = io::records_from_jsonl(jsonl);
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_TRUE(loaded[0].rollout.segments.empty());
}

TEST(CheckpointIo, BitExactRoundTrip) {
  TempDir tmp;
  PolicyArch arch{8, 4, 50};
  auto params = PolicyParams::random(arch, 3, 0.7);
  params.values[0] = 0.1 + 0.2;  // not exactly representable
  params.values[1] = -0.0;
  params.values[2] = 1e-308;
  io::save_checkpoint(params, tmp.path / "p.ckpt");
  auto loaded = io::load_checkpoint(tmp.path / "p.ckpt");
  EXPECT_EQ(loaded.arch, params.arch);
  ASSERT_EQ(loaded.values.size(), params.values.size());
  for (size_t i = 0; i < params.values.size(); ++i)
    EXPECT_EQ(std::bit_cast<uint64_t>(loaded.values[i]), std::bit_cast<uint64_t>(params.values[i]));
  // Same bytes when re-encoded.
  EXPECT_EQ(io::checkpoint_to_bytes(loaded), io::checkpoint_to_bytes(params));
}

TEST(CheckpointIo, RejectsGarbage) {
  EXPECT_THROW(io::checkpoint_from_bytes("not a checkpoint"), IoFailure);
  PolicyArch arch{4, 2, 20};
  auto bytes = io::checkpoint_to_bytes(PolicyParams::zeros(arch));
  bytes.pop_back();
  EXPECT_THROW(io::checkpoint_from_bytes(bytes), IoFailure);
}

TEST(KvConfig, ParsesFlatFile) {
  auto kv = io::parse_kv(
      "# run config\n"
      "iterations = 3\n"
      "grpo.learning_rate=0.05  # inline comment\n"
      "\n"
      "run_dir=runs/demo\n");
  EXPECT_EQ(kv.at("iterations"), "3");
  EXPECT_EQ(kv.at("grpo.learning_rate"), "0.05");
  EXPECT_EQ(kv.at("run_dir"), "runs/demo");
  EXPECT_THROW(io::parse_kv("no equals sign here"), IoFailure);
}

}  // namespace
}  // namespace evosearch
