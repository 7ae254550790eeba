// Drives the installed-style command-line tool end to end through a shell.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "helpers.hpp"

#ifndef HAMNET_CLI_PATH
#error "HAMNET_CLI_PATH must point at the hamnet executable"
#endif

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args, bool merge_stderr = true) {
  const std::string cmd = std::string("\"") + HAMNET_CLI_PATH + "\" " + args + (merge_stderr ? " 2>&1" : " 2>/dev/null");
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += line.empty() ? 0 : 1;
  return n;
}

}  // namespace

TEST_CASE("fixtures, training, evaluation, prediction and graph dumps") {
  testing::TempDir dir("cli");
  const auto data = dir / "data";
  auto r = run("gen-fixtures --seed 7 --out " + q(data) + " --n-sentences 12 --n-val 4 --n-test 4 --d 16 --d-v 8");
  INFO(r.out);
  REQUIRE(r.code == 0);
  for (const char* f : {"meta.json", "train.jsonl", "val.jsonl", "test.jsonl", "hamnet.cfg"})
    CHECK(std::filesystem::exists(data / f));
  CHECK(count_lines(data / "train.jsonl") == 12);

  // command-line keys override the config file
  const auto ckpt = dir / "ckpt";
  r = run("train --config " + q(data / "hamnet.cfg") + " --epochs 3 --heads 2 --checkpoint " + q(ckpt));
  INFO(r.out);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("epoch 3 train_loss") != std::string::npos);
  CHECK(r.out.find("epoch 4 ") == std::string::npos);
  const auto manifest = nlohmann::json::parse(std::ifstream(ckpt / "manifest.json"));
  CHECK(manifest["config"]["heads"] == "2");
  CHECK(manifest["config"]["epochs"] == "3");

  r = run("eval --ckpt " + q(ckpt) + " --data " + q(data / "test.jsonl") + " --format json", false);
  REQUIRE(r.code == 0);
  const auto report = nlohmann::json::parse(r.out);
  CHECK(report["f1"].get<double>() >= 0.0);
  CHECK(report["examples"].size() == 4);

  r = run("eval --ckpt " + q(ckpt) + " --data " + q(data / "test.jsonl") + " --oracle", false);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("F1 1.0000") != std::string::npos);

  r = run("predict --ckpt " + q(ckpt) + " --data " + q(data / "test.jsonl") + " --out " + q(dir / "pred.jsonl"));
  REQUIRE(r.code == 0);
  CHECK(count_lines(dir / "pred.jsonl") == 4);

  r = run("graph --data " + q(data / "test.jsonl") + " --index 1", false);
  REQUIRE(r.code == 0);
  const auto graph = nlohmann::json::parse(r.out);
  CHECK(graph["nodes"][0]["kind"] == "image");

  r = run("graph --data " + q(data / "test.jsonl") + " --format dot", false);
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("digraph", 0) == 0);
}

TEST_CASE("sweep over interaction rounds prints one row per count") {
  testing::TempDir dir("sweep");
  const auto data = dir / "data";
  REQUIRE(run("gen-fixtures --seed 3 --out " + q(data) + " --n-sentences 8 --n-val 2 --n-test 2 --d 16 --d-v 8").code == 0);
  const std::string args = "sweep-l --config " + q(data / "hamnet.cfg") + " --epochs 1 --heads 2 --l 1..3";
  const auto a = run(args, false), b = run(args, false);
  INFO(a.out);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  std::istringstream lines(a.out);
  std::string header, line;
  std::getline(lines, header);
  CHECK(header.rfind("L", 0) == 0);
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    std::istringstream fields(line);
    std::size_t l;
    double p, rcl, f1;
    REQUIRE(static_cast<bool>(fields >> l >> p >> rcl >> f1));
    CHECK(l == ++rows);
    CHECK(f1 >= 0.0);
    CHECK(f1 <= 1.0);
  }
  CHECK(rows == 3);
}

TEST_CASE("exit codes distinguish configuration and data errors") {
  testing::TempDir dir("codes");
  CHECK(run("").code == 1);
  CHECK(run("no-such-command").code == 1);
  CHECK(run("train --config " + q(dir / "missing.cfg")).code == 1);
  CHECK(run("--help").code == 0);

  const auto data = dir / "data";
  REQUIRE(run("gen-fixtures --out " + q(data) + " --n-sentences 4 --n-val 1 --n-test 1 --d 16 --d-v 8").code == 0);
  CHECK(run("train --config " + q(data / "hamnet.cfg") + " --heads 3").code == 1);
  CHECK(run("train --config " + q(data / "hamnet.cfg") + " --d 32").code == 1);

  {
    std::ofstream bad(dir / "bad.jsonl");
    bad << "{\"tokens\": [\"a\"]}\n";
  }
  const auto r = run("graph --data " + q(dir / "bad.jsonl") + " --meta " + q(data / "meta.json"));
  INFO(r.out);
  CHECK(r.code == 2);
  CHECK(r.out.find("bad.jsonl: line 1: field 'labels'") != std::string::npos);
  CHECK(run("graph --data " + q(data / "test.jsonl") + " --index 5").code == 2);
}
