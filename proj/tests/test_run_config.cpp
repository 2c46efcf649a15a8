#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "viap/run_config.hpp"

TEST(RunConfig, NumberAndFamilyLists) {
  EXPECT_EQ(viap::parse_number_list("0,0.5,10"), (std::vector<double>{0.0, 0.5, 10.0}));
  EXPECT_THROW(viap::parse_number_list("1,x"), viap::Error);
  EXPECT_THROW(viap::parse_number_list("1,,2"), viap::Error);
  EXPECT_EQ(viap::parse_family_list("VIAP,BIM-T"),
            (std::vector<viap::AttackFamily>{viap::AttackFamily::viap, viap::AttackFamily::bim_targeted}));
}

TEST(RunConfig, Targets) {
  const std::vector<std::string> names{"cube", "sphere", "cone"};
  EXPECT_EQ(viap::parse_target("random", names), std::nullopt);
  EXPECT_EQ(viap::parse_target("cone", names), 2u);
  EXPECT_EQ(viap::parse_target("1", names), 1u);
  EXPECT_THROW(viap::parse_target("7", names), viap::Error);
  EXPECT_THROW(viap::parse_target("blob", names), viap::Error);
}

TEST(RunConfig, SeedPropagates) {
  viap::RunConfig c;
  c.seed = 99;
  c.resolve();
  EXPECT_EQ(c.dataset.seed, 99u);
  EXPECT_EQ(c.train.seed, 99u);
  EXPECT_EQ(c.sweep.seed, 99u);
}

TEST(RunConfig, FileWithPartialKeys) {
  const auto path = std::filesystem::temp_directory_path() / "viap_run_config_test.json";
  {
    std::ofstream f(path);
    f << R"({"seed": 3, "train": {"epochs": 4}, "sweep": {"eps_grid": [1, 2]}, "attack": {"family": "BIM"}})";
  }
  viap::RunConfig c = viap::load_run_config(path.string());
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.train.epochs, 4u);
  EXPECT_EQ(c.train.batch_size, viap::TrainConfig{}.batch_size);
  EXPECT_EQ(c.sweep.eps_grid, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(c.attack_family, viap::AttackFamily::bim);
  {
    std::ofstream f(path);
    f << "{not json";
  }
  EXPECT_THROW(viap::load_run_config(path.string()), viap::Error);
  std::filesystem::remove(path);
}

TEST(RunConfig, JsonRoundTrip) {
  viap::RunConfig c;
  c.attack_object = 5;
  c.sweep.fixed_target = 1;
  const nlohmann::json j = c;
  EXPECT_EQ(nlohmann::json(j.get<viap::RunConfig>()), j);
}
