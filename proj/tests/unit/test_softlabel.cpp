#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "redct/softlabel.hpp"
#include "support.hpp"

using namespace redct;
using namespace redct::softlabel;

namespace {

LlmAnnotation with_logprob(ClassIndex cls, double predicted_logprob, std::size_t k) {
  auto a = test::make_annotation("d", cls, 0.5, k);
  a.logprobs.per_class_logprob.assign(k, predicted_logprob - 1.0);
  a.logprobs.per_class_logprob[cls] = predicted_logprob;
  return a;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("expit") {
  CHECK(expit(0.0) == 0.5);
  CHECK(expit(1.0) == doctest::Approx(0.7310585786300049));
  CHECK(expit(-40.0) > 0.0);
  CHECK(expit(40.0) <= 1.0);
}

TEST_CASE("zero token probability gives weight one half") {
  // a very negative log-prob stands in for a token probability of zero
  const auto s = soft_label_from_annotation(with_logprob(1, -1e6, 3), 3);
  CHECK(s.probs() == std::vector<double>{0.25, 0.5, 0.25});
  CHECK(s.source() == LabelSource::llm);
}

TEST_CASE("log-prob -0.105 gives weight 0.7110") {
  const auto s = soft_label_from_annotation(with_logprob(0, -0.105, 3), 3);
  const double p = std::exp(-0.105);
  CHECK(p == doctest::Approx(0.9003).epsilon(1e-4));
  CHECK(s[0] == doctest::Approx(sigmoid(p)).epsilon(1e-15));
  CHECK(s[0] == doctest::Approx(0.7110).epsilon(1e-4));
  CHECK(s[1] == doctest::Approx(0.1445).epsilon(1e-3));
  CHECK(s[1] == s[2]);
}

TEST_CASE("certain token gives weight expit(1)") {
  const auto s = soft_label_from_annotation(with_logprob(1, 0.0, 2), 2);
  CHECK(s[1] == doctest::Approx(0.7310585786300049).epsilon(1e-15));
  // positive log-probs are clamped to probability 1
  CHECK(soft_label_from_annotation(with_logprob(1, 0.3, 2), 2) == s);
}

TEST_CASE("two classes at weight one half keep the predicted class ahead") {
  const auto s = soft_label_from_annotation(with_logprob(1, -1e6, 2), 2);
  CHECK(s[1] > s[0]);
  CHECK(s[1] - 0.5 == doctest::Approx(1e-9).epsilon(1e-6));
  CHECK(s[0] + s[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("log-probability weight reading") {
  CHECK(weight_argument_from_string("probability") == WeightArgument::probability);
  CHECK(weight_argument_from_string("logprob") == WeightArgument::log_probability);
  CHECK(weight_argument_from_string(to_string(WeightArgument::log_probability)) == WeightArgument::log_probability);
  CHECK_THROWS_AS(weight_argument_from_string("prob"), ConfigError);

  const auto a = with_logprob(0, -0.105, 3);
  CHECK(llm_label_weight(a, WeightArgument::log_probability) == doctest::Approx(sigmoid(-0.105)).epsilon(1e-12));
  CHECK(llm_label_weight(a) == doctest::Approx(sigmoid(std::exp(-0.105))).epsilon(1e-12));
  for (double lp : {-1e6, -3.0, -0.5, -1e-9, 0.0}) {
    CAPTURE(lp);
    CHECK(llm_label_weight(with_logprob(1, lp, 2), WeightArgument::log_probability) <= 0.5);
  }
  // below one half the two-class label leans away from the predicted class
  const auto s = soft_label_from_annotation(with_logprob(1, -1.0, 2), 2, WeightArgument::log_probability);
  CHECK(s[1] == doctest::Approx(sigmoid(-1.0)).epsilon(1e-12));
  CHECK(s[0] > s[1]);
}

TEST_CASE("soft label properties over random annotations") {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t k = 2 + rng.below(4);
    const ClassIndex c = rng.below(k);
    const double lp = -rng.uniform() * 12;
    const auto s = soft_label_from_annotation(with_logprob(c, lp, k), k);
    double sum = 0;
    for (double v : s.probs()) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
    CHECK(s[c] >= 0.5);
    CHECK(s[c] <= 0.7310585786300049 + 1e-15);
    for (std::size_t j = 0; j < k; ++j) {
      if (j != c) CHECK(s[c] > s[j]);
    }
    // monotone in the token probability
    const double lp2 = lp + rng.uniform() * (-lp) + 1e-6;
    CHECK(soft_label_from_annotation(with_logprob(c, std::min(lp2, 0.0), k), k)[c] > s[c]);
  }
}

TEST_CASE("hard labels are one-hot on the prediction") {
  const auto s = hard_label_from_annotation(with_logprob(2, -0.3, 4), 4);
  CHECK(s.probs() == std::vector<double>{0, 0, 1, 0});
}

TEST_CASE("expert labels are one-hot") {
  CHECK(soft_label_from_expert(0, 2).probs() == std::vector<double>{1, 0});
  CHECK(soft_label_from_expert(2, 3).probs() == std::vector<double>{0, 0, 1});
  CHECK(soft_label_from_expert(2, 3).source() == LabelSource::expert);
  CHECK_THROWS_AS(soft_label_from_expert(3, 3), DataError);
}

TEST_CASE("fuse") {
  const auto schema = test::plain_schema(3);
  Dataset ds(schema);
  for (int i = 0; i < 10; ++i) {
    const auto id = "d" + std::to_string(i);
    ds.add_document({id, "t", std::nullopt, std::nullopt});
    ds.set_annotation(test::make_annotation(id, i % 3, 0.1 * i, 3));
  }

  SUBCASE("no expert labels: every example comes from the LLM") {
    const auto fused = fuse(ds);
    REQUIRE(fused.size() == 10);
    for (std::size_t i = 0; i < fused.size(); ++i) {
      CHECK(fused[i].doc_id == ds.documents()[i].doc_id);
      CHECK(fused[i].source == LabelSource::llm);
      CHECK(fused[i].confidence == doctest::Approx(0.1 * i));
    }
    for (const auto& ex : fuse(ds, LlmTargets::hard)) CHECK(*std::max_element(ex.target.probs().begin(), ex.target.probs().end()) == 1.0);
  }
  SUBCASE("one expert label wins over the annotation") {
    ds.set_expert_label("d4", 2);
    const auto fused = fuse(ds);
    std::size_t experts = 0;
    for (const auto& ex : fused) {
      if (ex.source != LabelSource::expert) continue;
      ++experts;
      CHECK(ex.doc_id == "d4");
      CHECK(ex.target.probs() == std::vector<double>{0, 0, 1});
      CHECK(ex.confidence == 1.0);
    }
    CHECK(experts == 1);
  }
  SUBCASE("expert label alone is enough") {
    Dataset d2(schema);
    d2.add_document({"a", "t", std::nullopt, std::nullopt});
    CHECK_THROWS_WITH_AS(fuse(d2), doctest::Contains("'a'"), DataError);
    d2.set_expert_label("a", 1);
    CHECK(fuse(d2).at(0).source == LabelSource::expert);
  }
  SUBCASE("JSONL round trip") {
    ds.set_expert_label("d1", 0);
    const auto fused = fuse(ds);
    const auto text = serialize_fused(fused);
    CHECK(parse_fused(text) == fused);
    CHECK_THROWS_AS(parse_fused("{\"doc_id\":1}\n"), DataError);
  }
}
