#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sys/wait.h>

#include "egocomm/config.hpp"
#include "egocomm/hash.hpp"
#include "egocomm/pipeline.hpp"
#include "helpers.hpp"

using namespace egocomm;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(EGOCOMM_BIN) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// The easy configuration, optionally with its cohort layout lines replaced.
fs::path write_ini(const fs::path& dir, const std::string& layout) {
  auto ini = text::read_file(fs::path(EGOCOMM_SOURCE_DIR) / "configs/easy.ini");
  const std::string original = "units = ICU,nonICU\nshifts = day,night\nparticipants_per_cell = 1\n";
  if (!layout.empty()) {
    const auto at = ini.find(original);
    EXPECT_NE(at, std::string::npos);
    ini.replace(at, original.size(), layout);
  }
  const auto path = dir / "run.ini";
  std::ofstream(path) << ini;
  return path;
}

std::size_t data_rows(const fs::path& csv) {
  return pipeline::read_csv(csv).rows.size();
}

// Output of the easy configuration, produced once by a ctest fixture.
fs::path easy_run() { return EGOCOMM_EASY_ROOT; }

}  // namespace

TEST(Config, ParsesSectionsAndRejectsUnknownKeys) {
  const auto c = parse_config("[run]\nseed = 9\n[train]\nalpha = 2.5\nepochs = 3\n[stats]\nss_type = I\n");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.train.alpha, 2.5);
  EXPECT_EQ(c.train.epochs, 3);
  try {
    parse_config("[train]\nalpah = 2\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
  }
  EXPECT_THROW(parse_config("[nosuch]\nx = 1\n"), Error);
  EXPECT_THROW(parse_config("[train]\nepochs = many\n"), Error);
}

TEST(Config, HashIgnoresPathsAndJobs) {
  PipelineConfig a, b;
  b.data_root = "/elsewhere";
  b.jobs = 8;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 2;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Cli, ExitCodes) {
  const auto dir = egocomm::testing::temp_dir("cli_codes");
  EXPECT_EQ(run_cli("report --data-root " + (dir / "data").string()), 3);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  std::ofstream(dir / "bad.ini") << "[train]\nlearning_rate = -1\n";
  EXPECT_EQ(run_cli("gen --config " + (dir / "bad.ini").string() + " --data-root " + (dir / "data").string()), 2);
}

TEST(Cli, MissingPrerequisiteInProcess) {
  PipelineConfig c;
  c.data_root = egocomm::testing::temp_dir("cli_prereq");
  c.output_root = c.data_root / "runs";
  try {
    pipeline::run_stage("report", c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingPrerequisite);
  }
}

TEST(Cli, EasyConfigTrainsAUsefulDiarizer) {
  const auto der = pipeline::read_csv(easy_run() / "runs/score/der.csv");
  bool found = false;
  for (const auto& r : der.rows)
    if (r[der.column("set")] == "all" && r[der.column("recording_id")] == "POOLED_MICRO") {
      found = true;
      EXPECT_LT(std::stod(r[der.column("der")]), 0.10);
    }
  EXPECT_TRUE(found);
}

TEST(Cli, EveryStageWritesAManifest) {
  for (auto stage : pipeline::kStages) {
    const auto manifest = easy_run() / "runs" / std::string(stage) / "stage_manifest.json";
    ASSERT_TRUE(fs::exists(manifest)) << stage;
    const auto j = nlohmann::json::parse(text::read_file(manifest));
    EXPECT_EQ(j.at("stage"), std::string(stage));
    EXPECT_EQ(j.at("config_hash").get<std::string>().size(), 64u);
  }
}

TEST(Cli, RerunIsByteIdentical) {
  const auto dir = egocomm::testing::temp_dir("cli_rerun");
  const auto ini = write_ini(dir, "");
  ASSERT_EQ(run_cli("all --jobs 2 --config " + ini.string() + " --data-root " + (dir / "data").string()), 0);
  EXPECT_EQ(sha256_tree(dir / "data/runs"), sha256_tree(easy_run() / "runs"));
  EXPECT_EQ(sha256_tree(dir / "data/cohort"), sha256_tree(easy_run() / "cohort"));
}

TEST(Cli, ReportTableShapes) {
  const auto table = pipeline::read_csv(easy_run() / "runs/report/table_shift_frequency.csv");
  ASSERT_EQ(table.rows.size(), 3u);
  EXPECT_EQ(table.rows[0][0], "level");
  EXPECT_EQ(table.rows[1][0], "level");
  EXPECT_EQ(table.rows[2][0], "test");
}

TEST(Cli, ScatterRowsMatchSubgroupMembership) {
  const auto participants = pipeline::read_csv(easy_run() / "runs/analyze/participants.csv");
  std::map<std::string, std::size_t> expected;
  for (const auto& r : participants.rows)
    if (!r[participants.column("frequency")].empty() && !r[participants.column("irb")].empty())
      ++expected[r[participants.column("work_unit")] + "_" + r[participants.column("primary_shift")]];
  ASSERT_FALSE(expected.empty());
  for (const auto& [subgroup, n] : expected)
    EXPECT_EQ(data_rows(easy_run() / ("runs/report/scatter_frequency_vs_irb_" + subgroup + ".csv")), n) << subgroup;
}

TEST(Cli, FiveUnitsGiveFiveLevelRows) {
  const auto dir = egocomm::testing::temp_dir("cli_units");
  const auto ini = write_ini(dir, "units = ICU,nonICU,float,lab,office\nshifts = day\nparticipants_per_cell = 2\n");
  ASSERT_EQ(run_cli("all --config " + ini.string() + " --data-root " + (dir / "data").string()), 0);
  const auto table = pipeline::read_csv(dir / "data/runs/report/table_unit_frequency.csv");
  ASSERT_EQ(table.rows.size(), 6u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(table.rows[i][0], "level");
}
