// Copyright 2026 The grafiq Authors
// SPDX-License-Identifier: Apache-2.0

// Drives the grafiq binary end to end.

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "golden_data.hpp"
#include "grafiq/container.hpp"
#include "grafiq/imageio.hpp"
#include "grafiq/random.hpp"
#include "testing.hpp"

namespace {

using testing_support::TempDir;

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    CliRun r = run("build-model --seed 4 --out " + at("model.grfq"));
    ASSERT_EQ(r.code, 0) << r.err;
    grafiq::Rng rng(11);
    std::string list;
    for (int i = 0; i < 10; ++i) {
      std::vector<std::uint8_t> px(16 * 16 * 3);
      for (auto& v : px) v = static_cast<std::uint8_t>(rng.below(256));
      const std::string name = "face" + std::to_string(i) + ".ppm";
      grafiq::save_ppm(grafiq::RawImage(16, 16, px), at(name));
      list += "f" + std::to_string(i) + "," + name + "\n";
    }
    spit(at("list.txt"), list);
  }
  static void TearDownTestSuite() { delete dir_; }

  static std::string at(const std::string& leaf) { return *dir_ / leaf; }

  static CliRun run(const std::string& args, const std::string& env = "") {
    const std::string err = at("stderr.txt");
    const std::string cmd = env + " " + GRAFIQ_CLI_PATH + " " + args + " 2>" + err;
    CliRun r;
    FILE* p = ::popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    return r;
  }

  static TempDir* dir_;
};

TempDir* Cli::dir_ = nullptr;

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    rows.push_back(f);
  }
  return rows;
}

TEST_F(Cli, ScoreHeaderAndRows) {
  const CliRun r = run("score --model " + at("model.grfq") + " --tap all --deterministic " + at("list.txt"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"image_id", "loss_bns", "raw_image", "raw_b1", "raw_b2", "raw_b3",
                                               "raw_b4", "quality_selected", "error"}));
  EXPECT_EQ(rows[1][0], "f0");
  EXPECT_EQ(std::stod(rows[1][7]), -std::stod(rows[1][4]));
  EXPECT_TRUE(r.err.empty()) << r.err;
}

TEST_F(Cli, EmptyListGivesHeaderOnly) {
  spit(at("empty.txt"), "");
  const CliRun r = run("score --model " + at("model.grfq") + " " + at("empty.txt"));
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "image_id,loss_bns,raw_b2,quality_selected,error\n");
}

TEST_F(Cli, MissingImageIsPartialFailure) {
  spit(at("partial.txt"), "face0.ppm\nghost.ppm\nface1.ppm\n");
  const CliRun r = run("score --model " + at("model.grfq") + " " + at("partial.txt"));
  EXPECT_EQ(r.code, 2);
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_TRUE(rows[1].back().empty());
  EXPECT_NE(rows[2].back().find("io"), std::string::npos);
  EXPECT_NE(r.err.find("ghost.ppm"), std::string::npos);
}

TEST_F(Cli, UnloadableModelExitsOne) {
  spit(at("bad.grfq"), "GRFQ1");
  EXPECT_EQ(run("score --model " + at("bad.grfq") + " " + at("list.txt")).code, 1);
  EXPECT_EQ(run("score --model " + at("absent.grfq") + " " + at("list.txt")).code, 1);
  EXPECT_EQ(run("score " + at("list.txt")).code, 1);
  EXPECT_EQ(run("score --model " + at("model.grfq") + " --tap b7 " + at("list.txt")).code, 1);
  EXPECT_EQ(run("nonsense").code, 1);
}

TEST_F(Cli, DeterministicAcrossParallelism) {
  const std::string base = "score --model " + at("model.grfq") + " --tap all --deterministic " + at("list.txt");
  const CliRun a = run(base + " --jobs 1");
  const CliRun b = run(base + " --jobs 8");
  const CliRun c = run(base + " --jobs 3 --precision f32");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out, c.out);
}

TEST_F(Cli, SettingPrecedence) {
  spit(at("cfg.ini"), "# settings\ntap = b3\nmodel = " + at("model.grfq") + "\n");
  const std::string list = " " + at("list.txt");
  auto header = [](const CliRun& r) { return r.out.substr(0, r.out.find('\n')); };
  const CliRun file_only = run("score --config " + at("cfg.ini") + list);
  ASSERT_EQ(file_only.code, 0) << file_only.err;
  EXPECT_EQ(header(file_only), "image_id,loss_bns,raw_b3,quality_selected,error");
  const CliRun env = run("score --config " + at("cfg.ini") + list, "GRAFIQ_TAP=b1");
  EXPECT_EQ(header(env), "image_id,loss_bns,raw_b1,quality_selected,error");
  const CliRun flag = run("score --tap b4 --config " + at("cfg.ini") + list, "GRAFIQ_TAP=b1");
  EXPECT_EQ(header(flag), "image_id,loss_bns,raw_b4,quality_selected,error");
  const CliRun env_cfg = run("score" + list, "GRAFIQ_CONFIG=" + at("cfg.ini"));
  EXPECT_EQ(header(env_cfg), "image_id,loss_bns,raw_b3,quality_selected,error");
}

TEST_F(Cli, MseBnsMethod) {
  const CliRun r = run("score --model " + at("model.grfq") + " --method mse-bns " + at("list.txt"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  EXPECT_EQ(std::stod(rows[1][3]), -std::stod(rows[1][1]));
  EXPECT_TRUE(rows[1][2].empty());
}

TEST_F(Cli, EmbedAndPairs) {
  ASSERT_EQ(run("embed --model " + at("model.grfq") + " --out " + at("emb.grfq") + " " + at("list.txt")).code, 0);
  spit(at("pairs.csv"), "id_a,id_b,label\nf0,f0,genuine\nf0,f1,impostor\n");
  const CliRun r = run("pairs --embeddings " + at("emb.grfq") + " " + at("pairs.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"id_a", "id_b", "label", "similarity"}));
  EXPECT_EQ(rows[1][3], "1");

  spit(at("pairs_missing.csv"), "f0,f1,1\nf0,nobody,0\n");
  const CliRun m = run("pairs --embeddings " + at("emb.grfq") + " " + at("pairs_missing.csv"));
  EXPECT_EQ(m.code, 2);
  EXPECT_NE(m.err.find("nobody"), std::string::npos);
}

TEST_F(Cli, PairsMatchOracleOnStoredEmbeddings) {
  namespace ge = golden::evaluation;
  grafiq::Container c;
  c.kind = "embeddings";
  const std::size_t dim = ge::pairs_embeddings.shape[1];
  std::string pairs;
  for (std::size_t i = 0; i < 10; ++i) {
    std::vector<float> v(dim);
    for (std::size_t d = 0; d < dim; ++d) v[d] = static_cast<float>(ge::pairs_embeddings.values[i * dim + d]);
    c.tensors.emplace("e" + std::to_string(i), grafiq::Tensor({dim}, v));
    for (std::size_t j = i + 1; j < 10; ++j) pairs += "e" + std::to_string(i) + ",e" + std::to_string(j) + ",0\n";
  }
  grafiq::write_container(at("oracle_emb.grfq"), c);
  spit(at("oracle_pairs.csv"), pairs);
  const CliRun r = run("pairs --embeddings " + at("oracle_emb.grfq") + " " + at("oracle_pairs.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 46u);
  for (std::size_t k = 0; k < 45; ++k) EXPECT_NEAR(std::stod(rows[k + 1][3]), ge::pairs_similarities[k], 1e-12);
}

void expect_csv_numbers_equal(const std::string& actual, const std::string& expected) {
  const auto a = csv_rows(actual);
  const auto e = csv_rows(expected);
  ASSERT_EQ(a.size(), e.size());
  ASSERT_EQ(a[0], e[0]);
  for (std::size_t i = 1; i < a.size(); ++i) {
    ASSERT_EQ(a[i].size(), e[i].size());
    for (std::size_t j = 0; j < a[i].size(); ++j) EXPECT_NEAR(std::stod(a[i][j]), std::stod(e[i][j]), 1e-12);
  }
}

TEST_F(Cli, EdcMatchesGoldenFiles) {
  const std::string g = std::string(GRAFIQ_GOLDEN_DIR) + "/edc200/";
  const CliRun r = run("edc --similarities " + g + "similarities.csv --qualities " + g + "qualities.csv --fmr 0.1,0.01 --out " +
                    at("edc200"));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const std::string tag : {"fmr0.1", "fmr0.01"}) {
    expect_csv_numbers_equal(slurp(at("edc200_" + tag + ".csv")), slurp(g + "expected_" + tag + ".csv"));
    const auto got = nlohmann::json::parse(slurp(at("edc200_" + tag + ".json")));
    const auto want = nlohmann::json::parse(slurp(g + "expected_" + tag + ".json"));
    EXPECT_EQ(got["threshold"].get<double>(), want["threshold"].get<double>());
    EXPECT_NEAR(got["auc"].get<double>(), want["auc"].get<double>(), 1e-12);
    EXPECT_EQ(got["insufficient_impostors"], want["insufficient_impostors"]);
    EXPECT_EQ(got["empty_genuine"], want["empty_genuine"]);
    EXPECT_EQ(got["comparisons"].get<int>(), 200);
  }
  // Rerun is byte-identical.
  const std::string first = slurp(at("edc200_fmr0.1.json"));
  ASSERT_EQ(run("edc --similarities " + g + "similarities.csv --qualities " + g + "qualities.csv --fmr 0.1 --out " +
                at("edc200")).code, 0);
  EXPECT_EQ(slurp(at("edc200_fmr0.1.json")), first);
}

TEST_F(Cli, EdcConstantQualityIsFlat) {
  std::string s = "id_a,id_b,label,similarity,pair_quality\n";
  for (int i = 0; i < 300; ++i) {
    const char* row[] = {"genuine,-0.5", "genuine,0.9", "impostor,"};
    s += "a,b," + std::string(row[i % 3]) + (i % 3 == 2 ? std::to_string(0.001 * i) : "") + ",7\n";
  }
  spit(at("flat.csv"), s);
  ASSERT_EQ(run("edc --similarities " + at("flat.csv") + " --fmr 0.01 --out " + at("flat")).code, 0);
  const auto side = nlohmann::json::parse(slurp(at("flat_fmr0.01.json")));
  const auto rows = csv_rows(slurp(at("flat_fmr0.01.csv")));
  ASSERT_EQ(rows.size(), 97u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i][1], "0.5") << i;
  EXPECT_DOUBLE_EQ(side["auc"].get<double>(), 0.5);
}

TEST_F(Cli, EdcMalformedRowReportsLine) {
  spit(at("broken.csv"), "id_a,id_b,label,similarity\na,b,genuine,0.5\na,b,impostor,zero\n");
  spit(at("q.csv"), "image_id,quality_selected\na,1\nb,2\n");
  const CliRun r = run("edc --similarities " + at("broken.csv") + " --qualities " + at("q.csv") + " --out " + at("x"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("broken.csv:3"), std::string::npos) << r.err;
}

TEST_F(Cli, TableFromSidecars) {
  spit(at("side_a.json"), R"({"method":"grad","benchmark":"a","fmr_target":0.001,"auc":0.02})");
  spit(at("side_b.json"), R"({"method":"grad","benchmark":"b","fmr_target":0.001,"auc":0.04})");
  const CliRun r = run("table '" + at("side_*.json") + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "method,fmr,a,b,mean\ngrad,0.001,0.02,0.04,0.03\n");
  EXPECT_EQ(run("table '" + at("nomatch_*.json") + "'").code, 1);
}

TEST_F(Cli, SelfCheckExitCodes) {
  const CliRun ok = run("selfcheck --networks 2");
  EXPECT_EQ(ok.code, 0) << ok.out;
  const CliRun f32 = run("selfcheck --networks 2 --precision f32");
  EXPECT_EQ(f32.code, 0) << f32.out;
  const CliRun bad = run("selfcheck --networks 1 --corrupt-kernel bn_inference_backward");
  EXPECT_EQ(bad.code, 3);
  EXPECT_NE(bad.err.find("bn_inference_backward"), std::string::npos);
}

TEST_F(Cli, CalibrateAndInfo) {
  ASSERT_EQ(run("calibrate --model " + at("model.grfq") + " --out " + at("calibrated.grfq") + " " + at("list.txt")).code,
            0);
  const CliRun info = run("info --model " + at("calibrated.grfq"));
  ASSERT_EQ(info.code, 0);
  EXPECT_EQ(nlohmann::json::parse(info.out)["parameters"].get<int>(), 79912);
}

}  // namespace
