// End-to-end checks of the scriptenc binary on a tiny synthetic corpus.

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"
#include "scriptenc/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

class Workspace {
 public:
  Workspace() {
    dir_ = fs::temp_directory_path() / ("scriptenc_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Workspace() { fs::remove_all(dir_); }
  fs::path path(const std::string& rel) const { return dir_ / rel; }

  Run run(const std::string& args) const {
    const auto out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && '" + SCRIPTENC_CLI + "' " + args + " >'" + out.string() +
                            "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = scriptenc::io::read_file(out);
    r.err = scriptenc::io::read_file(err);
    return r;
  }

 private:
  fs::path dir_;
};

const std::string kCorpus =
    " --scripts syn/scripts --tags syn/tags.json --embeddings syn/embeddings.txt --embedding-dim 16 --min-count 2";

json read_json(const fs::path& p) { return json::parse(scriptenc::io::read_file(p)); }

}  // namespace

TEST_CASE("CLI errors: usage problems exit 2, runtime failures exit 1") {
  Workspace ws;
  auto r = ws.run("evaluate");
  CHECK(r.code == 2);
  CHECK(r.err.starts_with("error code=Usage message="));
  CHECK(ws.run("no-such-command").code == 2);
  CHECK(ws.run("--help").code == 0);

  r = ws.run("synth --scripts 4 --dim 16 --signal 2 --out bad");
  CHECK(r.code != 0);
  CHECK(r.err.starts_with("error code="));

  r = ws.run("parse --input missing.txt --out p");
  CHECK(r.code == 1);
  CHECK(r.err.find("code=FileNotFound") != std::string::npos);
}

TEST_CASE("CLI pipeline: synth, train, evaluate, eval-sim") {
  Workspace ws;
  REQUIRE(ws.run("synth --scripts 12 --dim 16 --seed 5 --out syn").code == 0);
  REQUIRE(fs::exists(ws.path("syn/tag_embeddings.tsv")));

  auto r = ws.run("train" + kCorpus + " --attribute genre --variant boe --epochs 2 --hidden 4 --out model");
  REQUIRE(r.code == 0);
  for (const char* f : {"checkpoint.bin", "train_log.csv", "manifest.json"}) CHECK(fs::exists(ws.path("model") / f));
  const auto manifest = read_json(ws.path("model/manifest.json"));
  CHECK(manifest["seed"] == 13);
  CHECK(manifest["config_hash"].get<std::string>().size() == 16);
  CHECK(manifest["config"]["attribute"] == "genre");
  const auto log = scriptenc::io::read_file(ws.path("model/train_log.csv"));
  CHECK(log.starts_with("epoch,train_loss,val_ap,lr,wallclock\n"));

  SUBCASE("unknown variants and attributes are rejected") {
    CHECK(ws.run("train" + kCorpus + " --attribute genre --variant sideways --out m2").code == 2);
    auto bad = ws.run("train" + kCorpus + " --attribute mood --epochs 1 --out m3");
    CHECK(bad.code == 1);
    CHECK(bad.err.find("code=UnknownAttribute") != std::string::npos);
  }

  SUBCASE("eval-sim at cutoff 100 reproduces evaluate") {
    r = ws.run("evaluate --checkpoint model --out ev");
    REQUIRE(r.code == 0);
    const auto ev = read_json(ws.path("ev/evaluation.json"));
    const double f1 = ev["f1"].get<double>();
    CHECK(ev["excluded_tags"].is_array());
    r = ws.run("eval-sim --checkpoint model --tag-embeddings syn/tag_embeddings.tsv --cutoffs 100,80 --out sim");
    REQUIRE(r.code == 0);
    const auto sim = read_json(ws.path("sim/eval_sim.json"));
    CHECK(sim["genre"]["100"]["f1"].get<double>() == doctest::Approx(f1).epsilon(1e-12));
    CHECK(sim["genre"]["80"]["f1"].get<double>() >= f1 - 1e-12);
    const auto csv = scriptenc::io::read_file(ws.path("sim/eval_sim.csv"));
    CHECK(csv.starts_with("# config_hash="));
    CHECK(csv.find("cutoff,f1,perplexity_reduction,cardinality_reduction\n") != std::string::npos);
  }
}
