#include <gtest/gtest.h>

#include <map>

#include "helpers.hpp"
#include "json.hpp"
#include "promptablate/error.hpp"
#include "promptablate/text.hpp"

using namespace promptablate;
using nlohmann::json;

TEST(Datasets, JsonRoundTrip) {
  const TaskSpec t = *pa_test::toy_task("toy_sentiment");
  EXPECT_EQ(task_from_json(task_to_json(t)), t);
  pa_test::TempDir dir;
  save_task(t, dir.file("t.json"));
  EXPECT_EQ(load_task(dir.file("t.json")), t);
}

TEST(Datasets, ErrorsCarryPaths) {
  json j = task_to_json(*pa_test::toy_task("toy_sentiment"));
  j["demonstrations"][1].erase("label");
  try {
    task_from_json(j);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("demonstrations[1]"), std::string::npos) << e.what();
  }
  j = task_to_json(*pa_test::toy_task("toy_sentiment"));
  j["type"] = "regression";
  EXPECT_THROW(task_from_json(j), Error);

  pa_test::TempDir dir;
  text::write_file(dir.file("bad.json"), "{ not json");
  EXPECT_THROW(load_task(dir.file("bad.json")), Error);
  EXPECT_THROW(load_task(dir.file("missing.json")), IoError);
}

TEST(Datasets, BalancedSamplingHitsQuotas) {
  const TaskSpec t = *pa_test::toy_task("toy_sentiment");
  for (std::size_t n : {2u, 5u, 8u, 13u, 24u}) {
    const auto idx = sample_instance_indices(t, n, 99, true);
    ASSERT_EQ(idx.size(), n);
    ASSERT_TRUE(std::is_sorted(idx.begin(), idx.end()));
    std::map<std::string, std::size_t> per_label;
    for (auto i : idx) ++per_label[t.instances[i].references[0]];
    // Remainder goes to the first labels of label_space.
    EXPECT_EQ(per_label["Positive"], n / 2 + n % 2) << n;
    EXPECT_EQ(per_label["Negative"], n / 2) << n;
  }
}

TEST(Datasets, SamplingIsSeedDeterministic) {
  const TaskSpec t = *pa_test::toy_task("toy_sentiment");
  EXPECT_EQ(sample_instance_indices(t, 6, 1, true), sample_instance_indices(t, 6, 1, true));
  EXPECT_EQ(sample_instance_indices(t, 6, 1, false), sample_instance_indices(t, 6, 1, false));
  bool differs = false;
  for (std::uint64_t s = 2; s < 10 && !differs; ++s) {
    differs = sample_instance_indices(t, 6, 1, false) != sample_instance_indices(t, 6, s, false);
  }
  EXPECT_TRUE(differs);
  const auto all = sample_instance_indices(t, t.instances.size(), 3, false);
  ASSERT_EQ(all.size(), t.instances.size());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
  const auto inst = sample_instances(t, 4, 1, true);
  const auto idx = sample_instance_indices(t, 4, 1, true);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(inst[i], t.instances[idx[i]]);
}

TEST(Datasets, InfeasibleAndMisconfiguredSampling) {
  const TaskSpec t = *pa_test::toy_task("toy_sentiment");
  EXPECT_THROW(sample_instance_indices(t, 25, 0, false), InfeasibleError);
  EXPECT_THROW(sample_instance_indices(t, 26, 0, true), InfeasibleError);
  TaskSpec skewed = t;
  skewed.instances.resize(5);
  skewed.instances.erase(skewed.instances.begin() + 1);  // P, P, N, P
  EXPECT_THROW(sample_instance_indices(skewed, 4, 0, true), InfeasibleError);
  EXPECT_EQ(sample_instance_indices(skewed, 4, 0, false).size(), 4u);
  EXPECT_THROW(sample_instance_indices(*pa_test::toy_task("toy_qa"), 4, 0, true), ConfigurationError);
  EXPECT_EQ(sample_instance_indices(*pa_test::toy_task("toy_qa"), 4, 0, false).size(), 4u);
}
