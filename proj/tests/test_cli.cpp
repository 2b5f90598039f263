#include <cstdlib>
#include <string>

#include <sys/wait.h>

#include "doctest.h"
#include "fsvc/manifest.hpp"
#include "fsvc/synthdata.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace fsvc;
using fsvc::testing::read_bytes;
using fsvc::testing::TempDir;

#ifndef FSVC_CLI
#error "FSVC_CLI must name the fsvc executable"
#endif

namespace {

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" FSVC_CLI "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string q(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

struct Fixture {
  TempDir dir{"cli"};
  Fixture() {
    GeneratorSpec s;
    s.train_classes = 10;
    s.val_classes = 5;
    s.test_classes = 5;
    s.videos_per_class = 6;
    s.feature_dim = 8;
    s.frame_count = 4;
    s.prototype_length = 12;
    s.pretrain_classes = 5;
    s.seed = 9;
    save_generator_spec(s, dir / "spec.json");
  }
};

}  // namespace

TEST_CASE("cli end to end") {
  Fixture f;
  const auto data = f.dir / "data";
  REQUIRE(run("gen --spec " + q(f.dir / "spec.json") + " --out " + q(data)) == 0);
  REQUIRE(std::filesystem::exists(data / "manifest.json"));
  REQUIRE(std::filesystem::exists(data / "pretrain_manifest.json"));

  REQUIRE(run("splits --manifest " + q(data / "manifest.json") + " --classes 10,5,5 --cap 3 --seed 1 --out " +
              q(f.dir / "split.json")) == 0);
  const Manifest split = load_manifest(f.dir / "split.json");
  CHECK(split.videos.size() == 10 * 3 + 10 * 6);

  const auto ckpt = f.dir / "m.fsvm";
  REQUIRE(run("train --method baseline-plus --manifest " + q(data / "manifest.json") +
              " --init pretrained --pretrain-manifest " + q(data / "pretrain_manifest.json") +
              " --seed 2 --epochs 2 --embed-dim 6 --pretrain-epochs 2 --out " + q(ckpt)) == 0);
  REQUIRE(std::filesystem::exists(ckpt));

  const std::string base = "eval --ckpt " + q(ckpt) + " --manifest " + q(data / "manifest.json") +
                           " --way 5 --episodes 300 --seed 4 ";
  REQUIRE(run(base + "--shot 1 --report " + q(f.dir / "a.json")) == 0);
  REQUIRE(run(base + "--shot 1 --report " + q(f.dir / "b.json")) == 0);
  CHECK(read_bytes(f.dir / "a.json") == read_bytes(f.dir / "b.json"));
  REQUIRE(run(base + "--shot 1 --report " + q(f.dir / "c.json"), "FSVC_THREADS=3") == 0);
  CHECK(read_bytes(f.dir / "a.json") == read_bytes(f.dir / "c.json"));

  REQUIRE(run(base + "--shot 5 --report " + q(f.dir / "five.json")) == 0);
  const auto five = read_bytes(f.dir / "five.json");
  const auto j = nlohmann::json::parse(std::string(five.begin(), five.end()));
  CHECK(j["n_way"] == 5);
  CHECK(j["k_shot"] == 5);
  CHECK(j["episodes"] == 300);
  CHECK(j["method"] == "baseline-plus");

  REQUIRE(run(base + "--shot 1 --format csv --report " + q(f.dir / "a.csv")) == 0);
  const auto csv = read_bytes(f.dir / "a.csv");
  CHECK(std::string(csv.begin(), csv.end()).rfind("method,", 0) == 0);
}

TEST_CASE("cli usage errors exit nonzero") {
  Fixture f;
  CHECK(run("") != 0);
  CHECK(run("frobnicate") != 0);
  CHECK(run("eval --bogus-flag") != 0);
  CHECK(run("train --method relation-net --manifest " + q(f.dir / "spec.json") + " --out " + q(f.dir / "x")) != 0);
  CHECK(run("gen --spec " + q(f.dir / "missing.json") + " --out " + q(f.dir / "d")) != 0);
  CHECK(run("eval --ckpt " + q(f.dir / "spec.json") + " --manifest " + q(f.dir / "spec.json") + " --report " +
            q(f.dir / "r.json")) != 0);
  CHECK_FALSE(std::filesystem::exists(f.dir / "x"));
}

TEST_CASE("cli selftest passes") { CHECK(run("selftest") == 0); }
