#include <doctest.h>

#include <fstream>

#include "redct/common.hpp"
#include "redct/dataset_io.hpp"
#include "redct/types.hpp"
#include "support.hpp"

using namespace redct;
using redct::test::TempDir;

TEST_CASE("fnv1a64 matches the published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("ceil_fraction snaps products that are integers up to rounding") {
  CHECK(ceil_fraction(0.1, 7) == 1);
  CHECK(ceil_fraction(0.07, 100) == 7);
  CHECK(ceil_fraction(0.1, 100) == 10);
  CHECK(ceil_fraction(0.1, 101) == 11);
  CHECK(ceil_fraction(1.0, 13) == 13);
  CHECK(ceil_fraction(0.5, 0) == 0);
}

TEST_CASE("Rng is reproducible and uniform draws stay in range") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(a.below(7) < 7);
  }
}

TEST_CASE("Rng beta draws have the expected mean") {
  Rng rng(5);
  double sum = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) sum += rng.beta(8, 2);
  CHECK(sum / n == doctest::Approx(0.8).epsilon(0.01));
}

TEST_CASE("label_match_key strips punctuation and lowercases the first word") {
  CHECK(label_match_key("  'Misinformation'") == "misinformation");
  CHECK(label_match_key("For") == "for");
  CHECK(label_match_key("Against the motion") == "against");
  CHECK(label_match_key("...") == "");
}

TEST_CASE("TaskSchema enforces its invariants") {
  using V = std::vector<std::string>;
  CHECK_THROWS_AS(TaskSchema("t", V{"a"}, V{"A"}, PromptStyle::zero_shot, false), ConfigError);
  CHECK_THROWS_AS(TaskSchema("t", V{"a", "a"}, V{"A", "B"}, PromptStyle::zero_shot, false), ConfigError);
  CHECK_THROWS_AS(TaskSchema("t", V{"a", "b"}, V{"A", "A"}, PromptStyle::zero_shot, false), ConfigError);
  CHECK_THROWS_AS(TaskSchema("t", V{"a", "b"}, V{"A"}, PromptStyle::zero_shot, false), ConfigError);
  // distinct tokens sharing a first word
  CHECK_THROWS_AS(TaskSchema("t", V{"a", "b"}, V{"Not true", "not false"}, PromptStyle::zero_shot, false),
                  ConfigError);
  const auto s = test::stance_schema();
  CHECK(s.num_classes() == 3);
  CHECK(s.class_index("against") == 1);
  CHECK_FALSE(s.class_index("Against").has_value());
}

TEST_CASE("TaskSchema JSON round trip and hash") {
  const auto s = test::stance_schema(PromptStyle::zero_shot_cot);
  const auto back = TaskSchema::from_json(s.to_json());
  CHECK(back == s);
  CHECK(back.schema_hash() == s.schema_hash());
  // the prompt style does not change what a model's classes mean
  CHECK(s.with_prompt_style(PromptStyle::zero_shot).schema_hash() == s.schema_hash());
  CHECK(test::humor_schema().schema_hash() != s.schema_hash());

  nlohmann::json j = s.to_json();
  j["label_tokens"].erase("neutral");
  CHECK_THROWS_AS(TaskSchema::from_json(j), ConfigError);
}

TEST_CASE("SoftLabel validates distributions") {
  CHECK_NOTHROW(SoftLabel({0.5, 0.25, 0.25}, LabelSource::llm));
  CHECK_THROWS_AS(SoftLabel({0.5, 0.25, 0.24}, LabelSource::llm), DataError);
  CHECK_THROWS_AS(SoftLabel({1.2, -0.2}, LabelSource::llm), DataError);
  CHECK_NOTHROW(SoftLabel({0.0, 1.0}, LabelSource::expert));
  CHECK_THROWS_AS(SoftLabel({0.5, 0.5}, LabelSource::expert), DataError);
}

TEST_CASE("Dataset rejects invalid documents") {
  Dataset ds(test::stance_schema());
  ds.add_document({"d1", "text", "topic", 0});
  CHECK_THROWS_WITH_AS(ds.add_document({"d1", "again", "topic", std::nullopt}), doctest::Contains("d1"), DataError);
  CHECK_THROWS_AS(ds.add_document({"d2", "", "topic", std::nullopt}), DataError);
  CHECK_THROWS_AS(ds.add_document({"d3", "text", "topic", 3}), DataError);
  CHECK_THROWS_AS(ds.add_document({"d4", "text", std::nullopt, std::nullopt}), DataError);
  CHECK_THROWS_AS(ds.set_expert_label("nope", 0), DataError);
  CHECK(ds.size() == 1);
}

TEST_CASE("load_dataset: empty file gives an empty dataset") {
  TempDir dir;
  write_file_atomic(dir / "empty.jsonl", "");
  const auto ds = load_dataset(dir / "empty.jsonl", test::stance_schema());
  CHECK(ds.empty());
}

TEST_CASE("load_dataset: duplicate doc_id is named with its line") {
  const std::string text =
      R"({"doc_id":"d1","text":"a","target":"t"})"
      "\n"
      R"({"doc_id":"d1","text":"b","target":"t"})"
      "\n";
  CHECK_THROWS_WITH_AS(parse_dataset(text, test::stance_schema()), doctest::Contains("d1"), DataError);
  CHECK_THROWS_WITH_AS(parse_dataset(text, test::stance_schema()), doctest::Contains("line 2"), DataError);
}

TEST_CASE("load_dataset: malformed lines report the line number") {
  const std::string text = R"({"doc_id":"d1","text":"a","target":"t"})"
                           "\n{not json\n";
  CHECK_THROWS_WITH_AS(parse_dataset(text, test::stance_schema()), doctest::Contains("line 2"), DataError);
  const std::string bad_gold = R"({"doc_id":"d1","text":"a","target":"t","gold_label":"sideways"})";
  CHECK_THROWS_WITH_AS(parse_dataset(bad_gold, test::stance_schema()), doctest::Contains("line 1"), DataError);
}

TEST_CASE("load_dataset: three-line stance file keeps file order") {
  TempDir dir;
  const std::string text =
      R"({"doc_id":"z","text":"first","target":"guns","gold_label":"for"})"
      "\n"
      R"({"doc_id":"a","text":"second","target":"guns"})"
      "\n"
      R"({"doc_id":"m","text":"third ünïcode","target":"guns","gold_label":"neutral"})"
      "\n";
  write_file_atomic(dir / "in.jsonl", text);
  const auto ds = load_dataset(dir / "in.jsonl", test::stance_schema());
  REQUIRE(ds.size() == 3);
  CHECK(ds.documents()[0].doc_id == "z");
  CHECK(ds.documents()[1].doc_id == "a");
  CHECK(ds.documents()[2].doc_id == "m");
  CHECK(ds.documents()[2].text == "third ünïcode");
  CHECK(ds.documents()[0].gold_label == 0);
  CHECK_FALSE(ds.documents()[1].gold_label.has_value());

  save_dataset(ds, dir / "out.jsonl");
  CHECK(load_dataset(dir / "out.jsonl", test::stance_schema()) == ds);
}

TEST_CASE("save_dataset: empty dataset writes only the header line") {
  Dataset ds(test::stance_schema());
  const auto text = serialize_dataset(ds);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  CHECK(text.find("redct_dataset") != std::string::npos);
  CHECK(parse_dataset(text, test::stance_schema()) == ds);
}

TEST_CASE("dataset round trip preserves annotations and expert labels, bytes are stable") {
  const auto schema = test::stance_schema(PromptStyle::zero_shot_cot);
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Dataset ds(schema);
    const int n = 1 + static_cast<int>(rng.below(30));
    for (int i = 0; i < n; ++i) {
      Document d{"doc" + std::to_string(i), "text \"quoted\"\n" + std::to_string(rng.next_u64()), "topic",
                 std::nullopt};
      if (rng.uniform() < 0.5) d.gold_label = rng.below(3);
      ds.add_document(d);
      if (rng.uniform() < 0.7) {
        auto a = test::make_annotation(d.doc_id, rng.below(3), rng.uniform() * 3, 3);
        a.logprobs.per_class_logprob[0] = -rng.uniform() * 7.123456789012345;
        a.prompt_style = PromptStyle::zero_shot_cot;
        if (rng.uniform() < 0.5) a.rationale = "because";
        a.abstained = rng.uniform() < 0.1;
        ds.set_annotation(a);
      }
      if (rng.uniform() < 0.2) {
        ds.set_expert_label(d.doc_id, rng.below(3));
      } else if (rng.uniform() < 0.2) {
        ds.set_pending(d.doc_id, true);
      }
    }
    const auto text = serialize_dataset(ds);
    CHECK(serialize_dataset(ds) == text);
    const auto back = parse_dataset(text, schema);
    CHECK(back == ds);
    CHECK(serialize_dataset(back) == text);
  }
}

TEST_CASE("a header naming another schema is rejected") {
  const auto text = serialize_dataset(Dataset(test::stance_schema()));
  CHECK_THROWS_AS(parse_dataset(text, test::humor_schema()), ConfigError);
}

TEST_CASE("subset keeps order, annotations and expert labels") {
  const auto schema = test::plain_schema(2);
  Dataset ds(schema);
  for (int i = 0; i < 5; ++i) ds.add_document({"d" + std::to_string(i), "t", std::nullopt, std::nullopt});
  ds.set_annotation(test::make_annotation("d3", 1, 0.5, 2));
  ds.set_expert_label("d1", 0);
  const auto sub = ds.subset({3, 1});
  REQUIRE(sub.size() == 2);
  CHECK(sub.documents()[0].doc_id == "d1");
  CHECK(sub.documents()[1].doc_id == "d3");
  CHECK(sub.annotation("d3") != nullptr);
  CHECK(sub.expert_labels().at("d1") == 0);
}

TEST_CASE("write_file_atomic replaces content and leaves no temp files") {
  TempDir dir;
  write_file_atomic(dir / "sub" / "f.txt", "one");
  write_file_atomic(dir / "sub" / "f.txt", "two");
  CHECK(read_file(dir / "sub" / "f.txt") == "two");
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "sub")) {
    (void)e;
    ++files;
  }
  CHECK(files == 1);
  CHECK_THROWS_AS(read_file(dir / "missing"), IoError);
}
