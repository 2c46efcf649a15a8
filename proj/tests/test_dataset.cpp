#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "viap/dataset.hpp"

using viap::DatasetConfig;
using viap::Split;

namespace {

const viap::Dataset& default_dataset() {
  static const viap::Dataset d = viap::generate_dataset(DatasetConfig{});
  return d;
}

}  // namespace

TEST(Dataset, DefaultCounts) {
  const auto& d = default_dataset();
  EXPECT_EQ(d.views.size(), 160u);
  EXPECT_EQ(d.split(Split::train).size(), 112u);
  EXPECT_EQ(d.split(Split::test).size(), 48u);
  EXPECT_EQ(d.objects.size(), 16u);
  EXPECT_EQ(d.num_classes(), 4u);
}

TEST(Dataset, EveryClassInBothSplits) {
  const auto& d = default_dataset();
  for (Split s : {Split::train, Split::test}) {
    std::set<std::size_t> seen;
    for (const auto* v : d.split(s)) seen.insert(v->label);
    EXPECT_EQ(seen.size(), 4u);
  }
}

TEST(Dataset, SplitsAreDisjointPerObject) {
  const auto& d = default_dataset();
  std::set<std::pair<std::size_t, std::size_t>> train;
  for (const auto* v : d.split(Split::train)) train.insert({v->object_id, v->view_id});
  for (const auto* v : d.split(Split::test)) EXPECT_FALSE(train.count({v->object_id, v->view_id}));
  for (std::size_t o = 0; o < d.objects.size(); ++o) {
    EXPECT_EQ(d.object_views(o, Split::train).size(), 7u);
    EXPECT_EQ(d.object_views(o, Split::test).size(), 3u);
  }
}

TEST(Dataset, SameSeedSameBytes) {
  DatasetConfig c;
  c.objects_per_class = 1;
  c.views_per_object = 3;
  c.train_views_per_object = 2;
  const auto a = viap::generate_dataset(c);
  const auto b = viap::generate_dataset(c);
  ASSERT_EQ(a.views.size(), b.views.size());
  for (std::size_t i = 0; i < a.views.size(); ++i) {
    EXPECT_EQ(a.views[i].image, b.views[i].image);
    EXPECT_EQ(a.views[i].pose, b.views[i].pose);
  }
  c.seed = 8;
  const auto other = viap::generate_dataset(c);
  EXPECT_FALSE(other.views[0].image == a.views[0].image);
}

TEST(Dataset, SaveLoadRoundTrip) {
  DatasetConfig c;
  c.objects_per_class = 2;
  c.views_per_object = 3;
  c.train_views_per_object = 2;
  const auto d = viap::generate_dataset(c);
  const auto dir = std::filesystem::temp_directory_path() / "viap_dataset_test";
  std::filesystem::remove_all(dir);
  viap::save_dataset(d, dir.string());
  const auto back = viap::load_dataset(dir.string());
  EXPECT_EQ(back.class_names, d.class_names);
  ASSERT_EQ(back.views.size(), d.views.size());
  for (std::size_t i = 0; i < d.views.size(); ++i) {
    EXPECT_EQ(back.views[i].image, d.views[i].image);
    EXPECT_EQ(back.views[i].label, d.views[i].label);
    EXPECT_EQ(back.views[i].split, d.views[i].split);
    EXPECT_EQ(back.views[i].pose, d.views[i].pose);
  }
  std::filesystem::remove(dir / viap::kImageStoreFile);
  EXPECT_THROW(viap::load_dataset(dir.string()), viap::Error);
  std::filesystem::remove_all(dir);
}

TEST(Dataset, ConfigJsonRoundTripAndValidation) {
  DatasetConfig c;
  c.render.ambient = 0.5;
  c.jitter_axis = viap::PoseAxis::azimuth;
  const nlohmann::json j = c;
  const DatasetConfig back = j.get<DatasetConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  DatasetConfig bad;
  bad.train_views_per_object = 10;
  EXPECT_THROW(bad.validate(), viap::Error);
  bad = DatasetConfig{};
  bad.render.ambient = 1.5;
  EXPECT_THROW(bad.validate(), viap::Error);
  EXPECT_THROW(viap::default_classes(1), viap::Error);
}
