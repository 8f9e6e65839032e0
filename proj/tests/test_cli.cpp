#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "lipgail/config.hpp"
#include "lipgail/envs.hpp"
#include "lipgail/eval.hpp"
#include "lipgail/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string bin_path() {
  if (const char* p = std::getenv("LIPGAIL_BIN")) return p;
  return LIPGAIL_BIN_PATH;
}

struct CmdResult {
  int code = -1;
  std::string output;  // stdout + stderr
};

fs::path scratch_dir() {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() / ("lipgail_cli_" + std::to_string(::getpid()) +
                                              "_" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CmdResult run_cli(const std::string& args, const fs::path& dir) {
  static int log_id = 0;
  fs::path log = dir / ("cli_log_" + std::to_string(log_id++) + ".txt");
  std::string cmd = bin_path() + " " + args + " > " + log.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  CmdResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream f(log);
  std::stringstream ss;
  ss << f.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

// a demo file plus a config pointing at it, small enough for two fast iters
void write_train_setup(const fs::path& dir, uint64_t seed) {
  CmdResult gen = run_cli("gen-demos --env double-integrator-1d --n 5 --seed 1 --out " +
                              (dir / "demos.json").string(),
                          dir);
  REQUIRE(gen.code == 0);
  json cfg = {
      {"env", "double-integrator-1d"},
      {"seed", seed},
      {"train",
       {{"total_env_steps", 1024}, {"steps_per_iter", 512}, {"minibatch_size", 256}}},
      {"paths", {{"demos", (dir / "demos.json").string()}, {"out_dir", ""}}},
  };
  write_text(dir / "cfg.json", cfg.dump(2));
}

}  // namespace

TEST_CASE("missing required option exits 2 with usage") {
  fs::path dir = scratch_dir();
  CmdResult r = run_cli("gen-demos --n 3", dir);
  CHECK(r.code == 2);
  CHECK(r.output.find("--env") != std::string::npos);
  CHECK(r.output.find("required") != std::string::npos);

  CmdResult bare = run_cli("", dir);
  CHECK(bare.code == 2);

  CmdResult ver = run_cli("--version", dir);
  CHECK(ver.code == 0);
  CHECK(ver.output.find(lipgail::kVersionTag) != std::string::npos);
}

TEST_CASE("gen-demos writes a readable demo set and rejects bad counts") {
  fs::path dir = scratch_dir();
  fs::path out = dir / "demos.json";
  CmdResult ok = run_cli("gen-demos --env double-integrator-1d --n 3 --seed 5 --out " +
                             out.string(),
                         dir);
  CHECK(ok.code == 0);
  lipgail::DemoSet demos = lipgail::read_demos(out.string());
  CHECK(demos.env_name == "double-integrator-1d");
  CHECK(demos.episodes == 3);
  CHECK(demos.seed == 5);
  CHECK(demos.states.rows == 3 * demos.horizon);
  CHECK(demos.returns.size() == 3);
  CHECK(demos.mean_return > 0.0);

  CHECK(run_cli("gen-demos --env double-integrator-1d --n 0", dir).code == 2);
  CHECK(run_cli("gen-demos --env no-such-env --n 3", dir).code == 2);
}

TEST_CASE("train reruns are byte-identical and the seed flag changes them") {
  fs::path dir = scratch_dir();
  write_train_setup(dir, 3);
  std::string cfg = (dir / "cfg.json").string();

  CmdResult a = run_cli("train --config " + cfg + " --out " + (dir / "a").string(), dir);
  REQUIRE(a.code == 0);
  CmdResult b = run_cli("train --config " + cfg + " --out " + (dir / "b").string(), dir);
  REQUIRE(b.code == 0);
  CHECK(slurp(dir / "a/metrics.csv") == slurp(dir / "b/metrics.csv"));
  CHECK(slurp(dir / "a/checkpoint.json") == slurp(dir / "b/checkpoint.json"));

  CmdResult c = run_cli("train --config " + cfg + " --seed 9 --out " + (dir / "c").string(),
                        dir);
  REQUIRE(c.code == 0);
  CHECK(slurp(dir / "a/metrics.csv") != slurp(dir / "c/metrics.csv"));

  // the snapshot carries the hash and version tag, and matches the checkpoint
  json snap = json::parse(slurp(dir / "a/config.json"));
  json ckpt = json::parse(slurp(dir / "a/checkpoint.json"));
  CHECK(snap.at("config_hash") == ckpt.at("config_hash"));
  CHECK(snap.at("version_tag") == lipgail::kVersionTag);
  CHECK(ckpt.at("seed") == 3);

  // no out dir anywhere -> config error
  CHECK(run_cli("train --config " + cfg, dir).code == 2);
}

TEST_CASE("malformed config exits 2 and reports the line") {
  fs::path dir = scratch_dir();
  write_text(dir / "bad.json", "{\n  \"env\": oops\n}\n");
  CmdResult r = run_cli("train --config " + (dir / "bad.json").string(), dir);
  CHECK(r.code == 2);
  CHECK(r.output.find("line") != std::string::npos);

  write_text(dir / "unknown.json",
             json{{"env", "double-integrator-1d"}, {"train", {{"lrr", 0.1}}}}.dump());
  CmdResult u = run_cli("train --config " + (dir / "unknown.json").string(), dir);
  CHECK(u.code == 2);
  CHECK(u.output.find("train.lrr") != std::string::npos);
}

TEST_CASE("missing input files exit 3") {
  fs::path dir = scratch_dir();
  CHECK(run_cli("train --config " + (dir / "absent.json").string(), dir).code == 3);

  json cfg = {{"env", "double-integrator-1d"},
              {"paths", {{"demos", (dir / "no_demos.json").string()}, {"out_dir", "x"}}}};
  write_text(dir / "cfg.json", cfg.dump());
  CHECK(run_cli("train --config " + (dir / "cfg.json").string() + " --out " +
                    (dir / "x").string(),
                dir)
            .code == 3);
  CHECK(run_cli("evaluate --checkpoint " + (dir / "absent_ckpt.json").string(), dir).code ==
        3);
}

TEST_CASE("evaluate and ellc emit stable parseable reports") {
  fs::path dir = scratch_dir();
  write_train_setup(dir, 3);
  REQUIRE(run_cli("train --config " + (dir / "cfg.json").string() + " --out " +
                      (dir / "run").string(),
                  dir)
              .code == 0);
  std::string ckpt = (dir / "run/checkpoint.json").string();
  std::string hash = json::parse(slurp(dir / "run/checkpoint.json")).at("config_hash");

  std::string eval_args = "evaluate --checkpoint " + ckpt +
                          " --noise-levels 0.1,0 --episodes 2 --seed 4 --out ";
  REQUIRE(run_cli(eval_args + (dir / "noise.csv").string(), dir).code == 0);
  lipgail::NoiseEvalReport noise = lipgail::read_noise_eval_csv((dir / "noise.csv").string());
  CHECK(noise.rows.size() == 2);
  CHECK(noise.rows[0].noise_level == 0.0);  // sorted
  CHECK(noise.rows[1].noise_level == 0.1);
  CHECK(noise.rows[0].episodes == 2);
  CHECK(noise.checkpoint_id == hash);
  CHECK(noise.env == "double-integrator-1d");
  REQUIRE(run_cli(eval_args + (dir / "noise2.csv").string(), dir).code == 0);
  CHECK(slurp(dir / "noise.csv") == slurp(dir / "noise2.csv"));

  std::string ellc_args =
      "ellc --checkpoint " + ckpt + " --radii 0.1 --seed 4 --out ";
  REQUIRE(run_cli(ellc_args + (dir / "ellc.csv").string(), dir).code == 0);
  lipgail::EllcReport ellc = lipgail::read_ellc_csv((dir / "ellc.csv").string());
  CHECK(ellc.samples == 3840);
  CHECK(ellc.rows.size() == 1);
  CHECK(ellc.rows[0].radius == 0.1);
  CHECK(ellc.rows[0].ellc > 0.0);
  CHECK(ellc.delta_rule == "l2-sphere");
  CHECK(ellc.checkpoint_id == hash);
  REQUIRE(run_cli(ellc_args + (dir / "ellc2.csv").string(), dir).code == 0);
  CHECK(slurp(dir / "ellc.csv") == slurp(dir / "ellc2.csv"));

  CHECK(run_cli("ellc --checkpoint " + ckpt + " --radii 0.1,-0.2", dir).code == 2);
  CHECK(run_cli("ellc --checkpoint " + ckpt + " --radii 0", dir).code == 2);
  CHECK(run_cli("evaluate --checkpoint " + ckpt + " --noise-kind cauchy", dir).code == 2);

  // without --out the reports go to stdout only; no stray files appear
  fs::path probe = dir / "no_out_probe";
  fs::create_directories(probe);
  fs::path cwd = fs::current_path();
  fs::current_path(probe);
  CmdResult quiet = run_cli("evaluate --checkpoint " + ckpt +
                                " --noise-levels 0 --episodes 1 --seed 4",
                            dir);
  fs::current_path(cwd);
  CHECK(quiet.code == 0);
  CHECK(fs::is_empty(probe));
}

TEST_CASE("verify-theory reports a passing bound on the linear mdp") {
  fs::path dir = scratch_dir();
  CmdResult r = run_cli("verify-theory --mdp linear-1d --out " + (dir / "t.json").string(),
                        dir);
  REQUIRE(r.code == 0);
  json t = json::parse(slurp(dir / "t.json"));
  CHECK(t.at("mdp") == "linear-1d");
  CHECK(t.at("pass") == true);
  CHECK(t.at("applicable") == true);
  CHECK(t.at("bound").get<double>() == doctest::Approx(1.0 / 0.19).epsilon(1e-12));
  CHECK(t.at("version_tag") == lipgail::kVersionTag);
  CHECK(t.at("det_condition").at("pass") == true);

  CHECK(run_cli("verify-theory --mdp no-such-mdp", dir).code == 2);
}

TEST_CASE("nan abort during training exits 4") {
  fs::path dir = scratch_dir();
  write_train_setup(dir, 3);
  json cfg = json::parse(slurp(dir / "cfg.json"));
  cfg["train"]["lr"] = 1e308;  // first optimizer step overflows the value head
  write_text(dir / "nan_cfg.json", cfg.dump());
  CmdResult r = run_cli("train --config " + (dir / "nan_cfg.json").string() + " --out " +
                            (dir / "nan_run").string(),
                        dir);
  CHECK(r.code == 4);
  CHECK(r.output.find("non-finite") != std::string::npos);
}
