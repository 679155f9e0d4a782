// Command-line driver for the occult library. Links only the C interface.
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "occult/occult.h"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

int exit_code(occ_status s) {
  switch (s) {
    case OCC_OK:
      return kOk;
    case OCC_ERR_INVALID_ARGUMENT:
    case OCC_ERR_INVALID_PARAMS:
      return kUsage;
    case OCC_ERR_NON_MONOTONE_WARP:
    case OCC_ERR_NUMERICAL:
    case OCC_ERR_ZERO_VARIANCE:
      return kNumerical;
    default:
      return kData;
  }
}

struct ConfigDeleter {
  void operator()(occ_config* c) const { occ_config_free(c); }
};
using ConfigPtr = std::unique_ptr<occ_config, ConfigDeleter>;

struct Failure {
  occ_status status;
};

void check(occ_status s, const std::string& what) {
  if (s == OCC_OK) return;
  std::cerr << "occult: " << what << ": " << occ_status_name(s) << ": " << occ_last_error() << '\n';
  throw Failure{s};
}

// Options shared by every subcommand that builds a pipeline configuration.
struct ConfigOptions {
  std::string config_path;
  std::optional<std::string> seed;
  std::optional<std::string> jobs;
  std::vector<std::string> sets;
  std::map<std::string, std::string> keyed;

  void attach(CLI::App* app, bool with_keys) {
    app->add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "random seed");
    app->add_option("--jobs", jobs, "worker threads (0 = all hardware threads)");
    app->add_option("--set", sets, "override a config key, key=value (repeatable)");
    if (!with_keys) return;
    for (std::size_t i = 0; i < occ_config_key_count(); ++i) {
      const std::string name = occ_config_key_name(i);
      if (name == "seed" || name == "jobs" || name == "out") continue;
      app->add_option_function<std::string>(
             "--" + name, [this, name](const std::string& v) { keyed[name] = v; },
             occ_config_key_description(i))
          ->group("Config keys");
    }
  }

  ConfigPtr build() const {
    occ_config* raw = nullptr;
    if (config_path.empty()) {
      check(occ_config_create(&raw), "config");
    } else {
      check(occ_config_load(config_path.c_str(), &raw), "loading " + config_path);
    }
    ConfigPtr cfg(raw);
    auto apply = [&](const std::string& key, const std::string& value) {
      check(occ_config_set(cfg.get(), key.c_str(), value.c_str()), "setting " + key);
    };
    for (const auto& [k, v] : keyed) apply(k, v);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::cerr << "occult: --set expects key=value, got '" << kv << "'\n";
        throw Failure{OCC_ERR_INVALID_ARGUMENT};
      }
      apply(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) apply("seed", *seed);
    if (jobs) apply("jobs", *jobs);
    return cfg;
  }
};

std::string config_value(const occ_config* cfg, const char* key) {
  std::size_t needed = 0;
  check(occ_config_get(cfg, key, nullptr, 0, &needed), key);
  std::string out(needed + 1, '\0');
  check(occ_config_get(cfg, key, out.data(), out.size(), &needed), key);
  out.resize(needed);
  return out;
}

template <typename Call>
std::string text_result(Call&& call, const std::string& what) {
  std::size_t needed = 0;
  std::vector<char> buf(1 << 16);
  check(call(buf.data(), buf.size(), &needed), what);
  return std::string(buf.data());
}

void progress(std::size_t done, std::size_t total, void*) {
  if (done == total || done % 10 == 0) {
    std::fprintf(stderr, "[run] %zu/%zu cases\n", done, total);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilateral RCDT pipeline for detecting mammographically occult cancer on phantoms or "
               "preprocessed mammograms"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(occ_version()));

  struct StageArgs {
    ConfigOptions cfg;
    std::string in;
    std::string out;
    std::string models;
    std::string scores;
  };
  std::map<std::string, StageArgs> args;

  auto stage = [&](const char* name, const char* help, bool needs_in) {
    CLI::App* sub = app.add_subcommand(name, help);
    StageArgs& a = args[name];
    a.cfg.attach(sub, true);
    if (needs_in) sub->add_option("--in", a.in, "input directory")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--out", a.out, "output directory")->required();
    return sub;
  };

  stage("phantom", "generate a seeded synthetic cohort", false);
  stage("preprocess", "segment, crop, resize and orient every view", true);
  stage("simulate", "simulate the contralateral view of every case", true);
  stage("rcdt", "real-pair and simulated-pair RCDT images", true);
  stage("fuse", "green-magenta fusion of the RCDT images", true);
  stage("train", "train one logistic model per arm", true);
  stage("score", "score cases with trained models", true)
      ->add_option("--models", args["score"].models, "directory with model_<arm>.txt")
      ->required()
      ->check(CLI::ExistingDirectory);

  for (const char* name : {"evaluate", "compare"}) {
    CLI::App* sub = app.add_subcommand(
        name, std::string(name) == "evaluate" ? "ROC curves and AUCs from a score table"
                                              : "DeLong comparisons of the Fused arm from a score table");
    StageArgs& a = args[name];
    sub->add_option("--scores", a.scores, "score_table.csv")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", a.out, "output directory")->required();
  }

  CLI::App* run = app.add_subcommand("run", "full three-arm cross-validated experiment");
  args["run"].cfg.attach(run, true);
  run->add_option("--out", args["run"].out, "output directory (default: config key out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    StageArgs& a = args[name];

    if (name == "evaluate" || name == "compare") {
      const auto call = [&](char* buf, std::size_t cap, std::size_t* needed) {
        return name == "evaluate"
                   ? occ_stage_evaluate(a.scores.c_str(), a.out.c_str(), buf, cap, needed)
                   : occ_stage_compare(a.scores.c_str(), a.out.c_str(), buf, cap, needed);
      };
      std::cout << text_result(call, name);
      return kOk;
    }

    ConfigPtr cfg = a.cfg.build();
    if (name == "run") {
      if (!a.out.empty()) check(occ_config_set(cfg.get(), "out", a.out.c_str()), "setting out");
      check(occ_config_validate(cfg.get()), "config");
      const std::string report = text_result(
          [&](char* buf, std::size_t cap, std::size_t* needed) {
            return occ_run_experiment(cfg.get(), progress, nullptr, buf, cap, needed);
          },
          "run");
      std::cout << report << "Outputs in " << config_value(cfg.get(), "out") << '\n';
      return kOk;
    }

    const char* in = a.in.c_str();
    const char* out = a.out.c_str();
    if (name == "phantom") {
      check(occ_stage_phantom(cfg.get(), out), name);
    } else if (name == "preprocess") {
      check(occ_stage_preprocess(cfg.get(), in, out), name);
    } else if (name == "simulate") {
      check(occ_stage_simulate(cfg.get(), in, out), name);
    } else if (name == "rcdt") {
      check(occ_stage_rcdt(cfg.get(), in, out), name);
    } else if (name == "fuse") {
      check(occ_stage_fuse(cfg.get(), in, out), name);
    } else if (name == "train") {
      check(occ_stage_train(cfg.get(), in, out), name);
    } else if (name == "score") {
      check(occ_stage_score(cfg.get(), in, a.models.c_str(), out), name);
    }
    std::cout << name << ": wrote " << a.out << '\n';
    return kOk;
  } catch (const Failure& f) {
    return exit_code(f.status);
  }
}
