#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "risjcas/risjcas.h"

namespace {

struct Common {
  std::string config;
  std::string out;
  int seeds = 0;
  int threads = 0;
  std::string model;
  std::string mode;
};

int exit_code(rj_status st) {
  switch (st) {
    case RJ_OK: return 0;
    case RJ_ERR_CONFIG: return 2;
    case RJ_ERR_NUMERICAL: return 3;
    default: return 1;
  }
}

int report(rj_status st) {
  if (st == RJ_OK) return 0;
  const int line = rj_last_error_line();
  if (line > 0)
    std::fprintf(stderr, "error (line %d): %s\n", line, rj_last_error());
  else
    std::fprintf(stderr, "error: %s\n", rj_last_error());
  return exit_code(st);
}

void add_common(CLI::App* cmd, Common& c, bool run_flags) {
  cmd->add_option("--config", c.config, "YAML experiment config (defaults if omitted)");
  if (!run_flags) return;
  cmd->add_option("--out", c.out, "output directory (overrides output_dir)");
  cmd->add_option("--seeds", c.seeds, "number of channel seeds")->check(CLI::PositiveNumber);
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--model", c.model, "reflection model")->check(CLI::IsMember({"pc", "conv"}));
  cmd->add_option("--mode", c.mode, "radar geometry")->check(CLI::IsMember({"mono", "bi"}));
}

// Loads the config and applies command-line overrides.
rj_status prepare(const Common& c, rj_config** cfg) {
  rj_status st = c.config.empty() ? rj_config_default(cfg) : rj_config_load(c.config.c_str(), cfg);
  if (st != RJ_OK) return st;
  if (c.seeds > 0 && (st = rj_config_set_seeds(*cfg, c.seeds)) != RJ_OK) return st;
  if (c.threads > 0 && (st = rj_config_set_threads(*cfg, c.threads)) != RJ_OK) return st;
  if (!c.model.empty() && (st = rj_config_set_model(*cfg, c.model.c_str())) != RJ_OK) return st;
  if (!c.mode.empty() && (st = rj_config_set_mode(*cfg, c.mode.c_str())) != RJ_OK) return st;
  return rj_config_validate(*cfg);
}

std::string out_dir(const Common& c, const rj_config* cfg) {
  return c.out.empty() ? std::string(rj_config_output_dir(cfg)) : c.out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RIS-assisted joint communication and sensing experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rj_version()));

  Common sweep_opts, quant_opts, validate_opts;
  std::string bits_text;
  bool bits_given = false;
  CLI::App* sweep = app.add_subcommand("sweep", "optimise every seed and write the Pareto points");
  add_common(sweep, sweep_opts, true);
  CLI::App* quant = app.add_subcommand("quant-study", "quantized FI with and without self-interference");
  add_common(quant, quant_opts, true);
  quant->add_option("--bits", bits_text, "comma-separated resolutions, e.g. 1,3,4,8")
      ->each([&](const std::string&) { bits_given = true; });
  CLI::App* check = app.add_subcommand("validate", "check a config without running it");
  add_common(check, validate_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  rj_config* cfg = nullptr;
  int rc = 0;
  if (*sweep) {
    rj_status st = prepare(sweep_opts, &cfg);
    int rows = 0;
    if (st == RJ_OK) {
      const std::string dir = out_dir(sweep_opts, cfg);
      st = rj_run_sweep(cfg, dir.c_str(), &rows);
      if (st == RJ_OK) std::printf("wrote %d Pareto rows to %s\n", rows, dir.c_str());
    }
    rc = report(st);
  } else if (*quant) {
    rj_status st = prepare(quant_opts, &cfg);
    if (st == RJ_OK && bits_given) {
      std::vector<int> bits;
      std::stringstream ss(bits_text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
          bits.push_back(std::stoi(item));
        } catch (const std::exception&) {
          std::fprintf(stderr, "error: --bits entry '%s' is not an integer\n", item.c_str());
          rj_config_free(cfg);
          return 2;
        }
      }
      st = rj_config_set_bits(cfg, bits.data(), bits.size());
      if (st == RJ_OK) st = rj_config_validate(cfg);
    }
    if (st == RJ_OK) {
      const std::string dir = out_dir(quant_opts, cfg);
      st = rj_run_quant_study(cfg, dir.c_str());
      if (st == RJ_OK) std::printf("wrote quantization study to %s\n", dir.c_str());
    }
    rc = report(st);
  } else if (*check) {
    const rj_status st = prepare(validate_opts, &cfg);
    if (st == RJ_OK) {
      char hash[41];
      rj_config_hash(cfg, hash);
      std::printf("ok (config hash %s)\n", hash);
    }
    rc = report(st);
  }
  rj_config_free(cfg);
  return rc;
}
