#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lipgail/checkpoint.hpp"
#include "lipgail/common.hpp"
#include "lipgail/config.hpp"
#include "lipgail/envs.hpp"
#include "lipgail/eval.hpp"
#include "lipgail/gail.hpp"
#include "lipgail/theory.hpp"
#include "lipgail/version.hpp"

namespace {

using namespace lipgail;

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += ", ";
    out += p;
  }
  return out;
}

int run_gen_demos(const std::string& env_name, int episodes, uint64_t seed,
                  const std::string& out) {
  require(episodes > 0, "gen-demos: --n must be positive");
  auto env = make_env(env_name);
  PdExpert expert = make_expert(env_name);
  auto trajs = roll_expert(*env, expert, episodes, seed);
  double mean = 0.0;
  for (const auto& t : trajs) mean += t.total_return();
  mean /= static_cast<double>(trajs.size());
  write_demos(out, *env, trajs, seed);
  std::cout << "wrote " << trajs.size() << " episodes to " << out
            << " (mean return " << format_double(mean) << ")\n";
  return 0;
}

int run_train(const std::string& config_path, bool seed_set, uint64_t seed,
              const std::string& out_override) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (seed_set) cfg.train.seed = seed;
  std::string out_dir = out_override.empty() ? cfg.paths.out_dir : out_override;
  require(!out_dir.empty(), "train: no output dir, pass --out or set paths.out_dir");
  require(!cfg.paths.demos.empty(), "train: paths.demos is required");

  DemoSet demos = read_demos(cfg.paths.demos);
  Trainer trainer(cfg.train, std::move(demos));
  auto rows = trainer.run(out_dir);
  for (const auto& r : rows) {
    std::cout << "iter " << r.iter << "  steps " << r.env_steps
              << "  return " << format_double(r.rollout_env_return_mean)
              << "  disc_bce " << format_double(r.disc_bce) << "\n";
  }
  std::cout << "artifacts in " << out_dir << " (config hash "
            << config_hash(cfg.train) << ")\n";
  return 0;
}

int run_evaluate(const std::string& ckpt_path, std::vector<double> levels, int episodes,
                 const std::string& kind_name, uint64_t seed, const std::string& out) {
  LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
  NoiseKind kind = noise_kind_from_name(kind_name);
  NoiseEvalReport report =
      eval_noise(*ckpt.agent, ckpt.config.env, std::move(levels), episodes, kind, seed,
                 ckpt.config_hash);
  std::cout << "env " << report.env << "  checkpoint " << report.checkpoint_id
            << "  noise " << noise_kind_name(report.noise_kind) << "  seed " << report.seed
            << "\n";
  for (const auto& row : report.rows) {
    std::cout << "noise " << format_double(row.noise_level) << "  mean_return "
              << format_double(row.mean_return) << "  std " << format_double(row.std_return)
              << "  episodes " << row.episodes << "\n";
  }
  if (!out.empty()) {
    write_noise_eval_csv(out, report);
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

int run_ellc(const std::string& ckpt_path, std::vector<double> radii, uint64_t seed,
             const std::string& norm_str, bool adversarial, const std::string& out) {
  LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
  Norm norm = norm_from_name(norm_str);
  EllcReport report = ellc_report(*ckpt.agent, ckpt.config.env, std::move(radii), seed, norm,
                                  adversarial, ckpt.config_hash);
  std::cout << "env " << report.env << "  checkpoint " << report.checkpoint_id << "  delta "
            << report.delta_rule << "  samples " << report.samples << "  seed " << report.seed
            << "\n";
  for (const auto& row : report.rows) {
    std::cout << "radius " << format_double(row.radius) << "  ellc " << format_double(row.ellc)
              << "\n";
  }
  if (!out.empty()) {
    write_ellc_csv(out, report);
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

int run_verify_theory(const std::string& mdp_name, const std::string& out) {
  std::vector<std::string> names =
      mdp_name == "all" ? mdp_names() : std::vector<std::string>{mdp_name};
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& name : names) {
    SyntheticMdp mdp = make_mdp(name);
    TheoryReport report = verify_theory(mdp);
    reports.push_back(theory_report_to_json(report));
    const BoundReport& b = report.bound;
    std::cout << name << ": max_grad " << format_double(b.max_grad);
    if (b.applicable) {
      std::cout << "  bound " << format_double(b.bound) << "  pass "
                << (b.pass ? "true" : "false");
    } else {
      std::cout << "  bound n/a (gamma*C >= 1)";
    }
    std::cout << "  residual " << format_double(b.bellman_residual) << "\n";
  }
  if (!out.empty()) {
    nlohmann::json doc = reports.size() == 1 ? reports[0] : reports;
    std::ofstream f(out);
    if (!f) throw IoError("cannot open for writing: " + out);
    f << doc.dump(2) << '\n';
    if (!f) throw IoError("write failed: " + out);
    std::cout << "wrote " << out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"locally Lipschitz GAIL: train, evaluate, verify"};
  app.set_version_flag("--version", std::string(lipgail::kVersionTag));
  app.require_subcommand(1);

  std::string env_name;
  int demo_episodes = 25;
  uint64_t gen_seed = 0;
  std::string gen_out = "demos.json";

  auto* gen = app.add_subcommand("gen-demos", "roll expert demonstrations to a JSON file");
  gen->add_option("--env", env_name, "environment, one of: " + join(env_names()))->required();
  gen->add_option("--n", demo_episodes, "episodes to record")->capture_default_str();
  gen->add_option("--seed", gen_seed, "rng seed")->capture_default_str();
  gen->add_option("--out", gen_out, "output path")->capture_default_str();

  std::string config_path;
  uint64_t train_seed_value = 0;
  std::string train_out;
  auto* train = app.add_subcommand("train", "train from a JSON experiment config");
  train->add_option("--config", config_path, "experiment config path")->required();
  auto* train_seed = train->add_option("--seed", train_seed_value, "override the config seed");
  train->add_option("--out", train_out, "override paths.out_dir");

  std::string eval_ckpt;
  std::vector<double> levels = lipgail::EvalConfig{}.noise_levels;
  int eval_episodes = lipgail::EvalConfig{}.episodes_per_level;
  std::string noise_kind = "gaussian";
  uint64_t eval_seed = 0;
  std::string eval_out;
  auto* eval = app.add_subcommand("evaluate", "returns under observation noise");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval->add_option("--noise-levels", levels, "noise levels, normalized units")
      ->delimiter(',')
      ->capture_default_str();
  eval->add_option("--episodes", eval_episodes, "episodes per level")->capture_default_str();
  eval->add_option("--noise-kind", noise_kind, "gaussian or uniform-linf")->capture_default_str();
  eval->add_option("--seed", eval_seed, "rng seed")->capture_default_str();
  eval->add_option("--out", eval_out, "CSV output path");

  std::string ellc_ckpt;
  std::vector<double> radii = lipgail::EvalConfig{}.ellc_radii;
  std::string norm_str = "l2";
  bool adversarial = false;
  uint64_t ellc_seed = 0;
  std::string ellc_out;
  auto* ellc = app.add_subcommand("ellc", "empirical local Lipschitz constant of the policy");
  ellc->add_option("--checkpoint", ellc_ckpt, "checkpoint path")->required();
  ellc->add_option("--radii", radii, "perturbation radii")->delimiter(',')->capture_default_str();
  ellc->add_option("--norm", norm_str, "l2 or linf")->capture_default_str();
  ellc->add_flag("--adversarial", adversarial, "ascend deltas instead of sampling");
  ellc->add_option("--seed", ellc_seed, "rng seed")->capture_default_str();
  ellc->add_option("--out", ellc_out, "CSV output path");

  std::string mdp_name = "all";
  std::string theory_out;
  auto* verify = app.add_subcommand("verify-theory", "check Q gradient bounds on synthetic MDPs");
  verify->add_option("--mdp", mdp_name, "mdp name or 'all': " + join(lipgail::mdp_names()))
      ->capture_default_str();
  verify->add_option("--out", theory_out, "JSON report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help / --version
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen) return run_gen_demos(env_name, demo_episodes, gen_seed, gen_out);
    if (*train) return run_train(config_path, train_seed->count() > 0, train_seed_value, train_out);
    if (*eval) return run_evaluate(eval_ckpt, levels, eval_episodes, noise_kind, eval_seed, eval_out);
    if (*ellc) return run_ellc(ellc_ckpt, radii, ellc_seed, norm_str, adversarial, ellc_out);
    if (*verify) return run_verify_theory(mdp_name, theory_out);
  } catch (const lipgail::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const lipgail::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const lipgail::NanAbort& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
