// Copyright 2026 The maskscribe Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "doctest.h"

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "commands.h"

namespace fs = std::filesystem;
using maskscribe::cli::run;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

// One scratch directory per process with a small dataset and tiny models.
struct Workspace {
  fs::path root;
  std::vector<std::string> tiny_model = {"--width",   "16", "--heads",       "2",
                                         "--ff-width", "32", "--blocks",     "1",
                                         "--cond-blocks", "1"};
  std::vector<std::string> tiny_lp = {"--lp-width", "16", "--lp-heads", "2", "--lp-ff-width", "32",
                                      "--lp-layers", "1"};

  Workspace() {
    root = fs::temp_directory_path() / ("maskscribe_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    REQUIRE(cli({"gen-data", "--seed", "3", "--out", data(), "--train-size", "64", "--val-size",
                 "12", "--test-size", "12"})
                .code == 0);
    auto s1 = with(tiny_model, {"train", "--stage", "1", "--steps", "10", "--batch-size", "8",
                                "--data", data(), "--out", path("s1.ckpt")});
    REQUIRE(cli(s1).code == 0);
    REQUIRE(cli({"train", "--stage", "2", "--steps", "5", "--batch-size", "8", "--data", data(),
                 "--init", path("s1.ckpt"), "--out", path("s2.ckpt")})
                .code == 0);
    auto lp = with(tiny_lp, {"train", "--length-predictor", "--lp-steps", "5", "--batch-size", "8",
                             "--data", data(), "--out", path("lp.ckpt")});
    REQUIRE(cli(lp).code == 0);
  }
  ~Workspace() { fs::remove_all(root); }

  std::string data() const { return (root / "data").string(); }
  std::string path(const std::string& name) const { return (root / name).string(); }
  static std::vector<std::string> with(std::vector<std::string> extra,
                                       std::vector<std::string> args) {
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
  }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("gen-data is byte-reproducible and echoes channel flags") {
  auto& w = ws();
  const auto a = w.path("a"), b = w.path("b");
  for (const auto& dir : {a, b}) {
    auto r = cli({"gen-data", "--seed", "1", "--out", dir, "--noise", "0.05", "--jitter", "1:3",
                  "--train-size", "20", "--val-size", "5", "--test-size", "5"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("# noise = 0.05  (flag)") != std::string::npos);
    CHECK(r.out.find("# jitter = 1:3  (flag)") != std::string::npos);
  }
  for (const char* split : {"train.tsv", "val.tsv", "test.tsv"}) {
    CHECK(slurp(fs::path(a) / split) == slurp(fs::path(b) / split));
    CHECK(!slurp(fs::path(a) / split).empty());
  }
}

TEST_CASE("usage errors exit with code 1") {
  auto& w = ws();
  CHECK(cli({"gen-data", "--seed", "1"}).code == 1);
  CHECK(cli({}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"train", "--no-such-flag", "1"}).code == 1);

  auto r = cli({"train", "--stage", "2", "--data", w.data(), "--out", w.path("x.ckpt")});
  CHECK(r.code == 1);
  CHECK(r.err.find("stage-1") != std::string::npos);
  CHECK(!fs::exists(w.path("x.ckpt")));

  r = cli({"decode", "--mode", "length-guided", "--checkpoint", w.path("s2.ckpt"), "--data",
           w.data()});
  CHECK(r.code == 1);
  CHECK(r.err.find("length") != std::string::npos);

  CHECK(cli({"gen-data", "--help"}).code == 0);
}

TEST_CASE("config file precedence and unknown keys") {
  auto& w = ws();
  const auto conf = w.path("run.conf");
  {
    std::ofstream f(conf);
    f << "# comment\nthreshold = 0.5\nradius = 3\n\nseed=9\n";
  }
  auto r = cli({"gen-data", "--config", conf, "--seed", "4", "--out", w.path("p"), "--train-size",
                "4", "--val-size", "2", "--test-size", "2"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("# seed = 4  (flag)") != std::string::npos);
  CHECK(r.out.find("# threshold = 0.5  (file)") != std::string::npos);
  CHECK(r.out.find("# radius = 3  (file)") != std::string::npos);
  CHECK(r.out.find("# beta = 0.7  (default)") != std::string::npos);

  {
    std::ofstream f(conf);
    f << "threshold = 0.5\ntemperature = 2\n";
  }
  r = cli({"gen-data", "--config", conf, "--out", w.path("q")});
  CHECK(r.code == 1);
  CHECK(r.err.find("temperature") != std::string::npos);
}

TEST_CASE("training runs and reruns identically") {
  auto& w = ws();
  CHECK(fs::exists(w.path("s1.ckpt.loss.csv")));
  CHECK(count_lines(slurp(w.path("s1.ckpt.loss.csv"))) == 11);
  auto args = Workspace::with(w.tiny_model, {"train", "--stage", "1", "--steps", "10",
                                             "--batch-size", "8", "--data", w.data(), "--out",
                                             w.path("again.ckpt")});
  REQUIRE(cli(args).code == 0);
  CHECK(slurp(w.path("again.ckpt")) == slurp(w.path("s1.ckpt")));
  CHECK(slurp(w.path("again.ckpt.loss.csv")) == slurp(w.path("s1.ckpt.loss.csv")));
}

TEST_CASE("decode writes one row per sample in every mode") {
  auto& w = ws();
  for (const char* mode : {"implicit", "oracle", "length-guided"}) {
    CAPTURE(mode);
    const auto out = w.path(std::string("hyp.") + mode + ".tsv");
    auto r = cli({"decode", "--mode", mode, "--checkpoint", w.path("s2.ckpt"),
                  "--length-checkpoint", w.path("lp.ckpt"), "--data", w.data(), "--out", out,
                  "--block-size", "1", "--trace", out + ".trace"});
    REQUIRE(r.code == 0);
    CHECK(r.err.find("WER") != std::string::npos);
    std::istringstream in(slurp(out));
    std::string line;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      ++rows;
      std::size_t tabs = 0;
      for (char c : line) tabs += c == '\t';
      CHECK(tabs == 4);
    }
    CHECK(rows == 12);
    CHECK(!slurp(out + ".trace").empty());
  }
  // Oracle mode decodes exactly the reference length.
  std::istringstream refs(slurp(fs::path(w.data()) / "test.tsv"));
  std::istringstream hyps(slurp(w.path("hyp.oracle.tsv")));
  std::string ref, hyp;
  std::size_t checked = 0;
  while (std::getline(hyps, hyp)) {
    do {
      std::getline(refs, ref);
    } while (ref.rfind(hyp.substr(0, hyp.find('\t')) + '\t', 0) != 0 && refs);
    std::vector<std::string> rf, hf;
    std::istringstream rs(ref), hs(hyp);
    for (std::string f; std::getline(rs, f, '\t');) rf.push_back(f);
    for (std::string f; std::getline(hs, f, '\t');) hf.push_back(f);
    REQUIRE(rf.size() >= 2);
    CHECK(std::stoul(hf[2]) == rf[1].size());
    ++checked;
  }
  CHECK(checked == 12);
}

TEST_CASE("gridsearch emits an 11 by 11 grid and a stable selection") {
  auto& w = ws();
  std::vector<std::string> args = {"gridsearch", "--checkpoint", w.path("s2.ckpt"),
                                   "--length-checkpoint", w.path("lp.ckpt"), "--data", w.data(),
                                   "--limit", "6", "--out", w.path("grid1.csv")};
  auto a = cli(args);
  REQUIRE(a.code == 0);
  args.back() = w.path("grid2.csv");
  auto b = cli(args);
  REQUIRE(b.code == 0);
  const auto grid = slurp(w.path("grid1.csv"));
  CHECK(grid == slurp(w.path("grid2.csv")));
  CHECK(a.err == b.err);
  CHECK(a.err.find("selected lambda") != std::string::npos);
  std::istringstream in(grid);
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("lambda\\beta,0.0,", 0) == 0);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 11);
  }
  CHECK(rows == 11);
}

TEST_CASE("eval needs a test split and reruns identically") {
  auto& w = ws();
  std::vector<std::string> args = {"eval", "--stage1", w.path("s1.ckpt"), "--stage2",
                                   w.path("s2.ckpt"), "--length-checkpoint", w.path("lp.ckpt"),
                                   "--data", w.data(), "--limit", "4", "--out",
                                   w.path("eval1.csv")};
  REQUIRE(cli(args).code == 0);
  args.back() = w.path("eval2.csv");
  REQUIRE(cli(args).code == 0);
  const auto report = slurp(w.path("eval1.csv"));
  CHECK(report == slurp(w.path("eval2.csv")));
  for (const char* row : {"stage1_oracle", "stage1_implicit", "stage2_oracle", "stage2_implicit",
                          "stage2_rerank_lambda_beta", "stage2_implicit_block1",
                          "viseme_baseline"}) {
    CHECK(report.find(std::string("\n") + row + ",") != std::string::npos);
  }

  const fs::path empty = w.path("empty");
  fs::create_directories(empty);
  auto r = cli({"eval", "--stage1", w.path("s1.ckpt"), "--data", empty.string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("test") != std::string::npos);
}

TEST_CASE("trace shows the sample and its steps") {
  auto& w = ws();
  auto r = cli({"trace", "--mode", "oracle", "--checkpoint", w.path("s2.ckpt"), "--data", w.data(),
                "--sample", "2"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("reference: ") != std::string::npos);
  CHECK(r.out.find("step  0 |") != std::string::npos);
  CHECK(cli({"trace", "--mode", "oracle", "--checkpoint", w.path("s2.ckpt"), "--data", w.data(),
             "--sample", "99"})
            .code == 1);
}
