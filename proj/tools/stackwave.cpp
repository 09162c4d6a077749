#include <iostream>
#include <string>

#include "CLI11.hpp"
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include "stackwave/cli.hpp"

namespace sw = stackwave;
namespace cli = stackwave::cli;

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Space-time fields are reallocated on every solve; keep them off mmap and untrimmed.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  CLI::App app{"Hierarchical boundary control of the wave equation on a moving interval"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int jobs = 1;
  long long seed = -1;
  bool confirm = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "random seed (overrides run.seed)");
    sub->add_option("--jobs", jobs, "parallel sweep rows")->check(CLI::PositiveNumber);
  };
  for (const char* m : {"simulate", "nash", "leader", "verify", "sweep", "run"})
    add_common(app.add_subcommand(m, std::string(m) == "run" ? "dispatch on run.mode" : std::string("run mode ") + m));
  CLI::App* oracle = app.add_subcommand("oracle", "reference data");
  CLI::App* regen = oracle->add_subcommand("regen", "rewrite the golden fixtures");
  oracle->require_subcommand(1);
  regen->add_flag("--confirm", confirm, "required: overwrite the fixtures");
  regen->add_option("--out", out_dir, "fixture directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (regen->parsed()) {
      if (!confirm) {
        std::cerr << "oracle regen rewrites golden fixtures; pass --confirm to proceed\n";
        return cli::exit_config;
      }
      cli::regenerate_golden(out_dir);
      std::cout << "fixtures written to " << out_dir << "\n";
      return cli::exit_ok;
    }

    const CLI::App* sub = app.get_subcommands().front();
    cli::Config cfg = config_path.empty() ? cli::Config() : cli::Config::load(config_path);
    if (seed >= 0) cfg.set("run.seed", std::to_string(seed));
    if (!out_dir.empty()) cfg.set("output.dir", out_dir);

    std::string mode = sub->get_name();
    if (mode == "run") {
      mode = cfg.str("run.mode");
    } else if (cfg.has("run.mode") && cfg.str("run.mode") != mode) {
      throw sw::ConfigError("run.mode = " + cfg.str("run.mode") + " conflicts with subcommand " + mode, "run.mode");
    }
    if (mode == "oracle-regen") throw sw::ConfigError("use `oracle regen --confirm --out DIR`", "run.mode");
    if (std::find(cli::mode_names().begin(), cli::mode_names().end(), mode) == cli::mode_names().end())
      throw sw::ConfigError("unknown run.mode '" + mode + "'", "run.mode");
    cfg.set("run.mode", mode);

    const cli::RunReport rep = mode == "sweep" ? cli::run_sweep(cfg, cfg.str("output.dir"), jobs)
                                               : cli::execute(mode, cfg, cfg.str("output.dir"));
    if (!rep.message.empty()) std::cerr << mode << ": " << rep.message << "\n";
    if (mode == "verify")
      for (const auto& c : rep.summary["checks"])
        std::cout << (c["passed"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << " value="
                  << cli::fmt(c["value"].get<double>()) << "\n";
    std::cout << "summary written to " << (std::filesystem::path(cfg.str("output.dir")) / "summary.json").string()
              << "\n";
    return rep.exit_code;
  } catch (const sw::ConfigError& e) {
    std::cerr << "config error";
    if (!e.key().empty()) std::cerr << " [" << e.key() << "]";
    std::cerr << ": " << e.what() << "\n";
    return cli::exit_config;
  } catch (const sw::NonConvergence& e) {
    std::cerr << "no convergence: " << e.what() << "\n";
    return cli::exit_nonconvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_config;
  }
}
