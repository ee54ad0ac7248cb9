// Command-line front end for the rvkit pipeline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rvkit/commands.h"
#include "rvkit/config.h"
#include "rvkit/error.h"

namespace {

namespace fs = std::filesystem;
using namespace rvkit;

struct CommonFlags {
  std::string config;
  int jobs = 1;
};

struct SourceFlags {
  std::optional<double> oracle_noise;
  double noise_centerness = 0.0;
  double noise_extent = 0.0;
  double noise_heading = 0.0;
  std::optional<uint64_t> oracle_seed;
  std::string predictions;
};

void AddCommon(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON run config (default: the dataset's config.json)");
  cmd->add_option("--jobs,-j", f.jobs, "Scenes processed in parallel")->check(CLI::PositiveNumber);
}

void AddSource(CLI::App* cmd, SourceFlags& f) {
  auto* noise = cmd->add_option("--oracle-noise", f.oracle_noise,
                                "Use oracle predictions with this offset noise sigma (m)");
  cmd->add_option("--oracle-noise-centerness", f.noise_centerness,
                  "Oracle noise sigma on center-ness")->needs(noise);
  cmd->add_option("--oracle-noise-extent", f.noise_extent,
                  "Oracle noise sigma on log extents")->needs(noise);
  cmd->add_option("--oracle-noise-heading", f.noise_heading,
                  "Oracle noise sigma on cos/sin heading")->needs(noise);
  cmd->add_option("--oracle-seed", f.oracle_seed, "Oracle RNG seed (default: scene seed)")
      ->needs(noise);
  cmd->add_option("--predictions", f.predictions, "Directory of scene_XXXX.pred.rimg files")
      ->excludes(noise);
}

RunConfig ResolveConfig(const CommonFlags& f, const fs::path& dataset) {
  RunConfig cfg;
  if (!f.config.empty()) {
    cfg = LoadConfig(f.config);
  } else if (!dataset.empty() && fs::exists(dataset / kDatasetConfigName)) {
    cfg = LoadConfig(dataset / kDatasetConfigName);
  }
  ApplySeedOverride(cfg);
  cfg.Validate();
  return cfg;
}

PredictionSource MakeSource(const SourceFlags& f, const RunConfig& cfg) {
  PredictionSource s;
  if (f.oracle_noise) {
    s.oracle = OracleNoise{f.noise_centerness, *f.oracle_noise, f.noise_extent, f.noise_heading};
    s.oracle_seed = f.oracle_seed.value_or(cfg.scene.seed);
  }
  s.predictions_dir = f.predictions;
  return s;
}

std::vector<double> ParseList(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--lambda-sweep: '" + item + "' is not a number");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Range-view LiDAR detection and panoptic toolkit"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CommonFlags common;
  SourceFlags source;
  std::string dataset;
  std::string out;
  int count = 1;
  std::string sweep;
  std::string channel = "range";

  auto* simulate = app.add_subcommand("simulate", "Ray-cast synthetic scenes into a dataset");
  AddCommon(simulate, common);
  simulate->add_option("--out", out, "Output dataset directory")->required();
  simulate->add_option("--count", count, "Number of scenes")->check(CLI::NonNegativeNumber);

  auto* targets = app.add_subcommand("targets", "Build range images and training targets");
  AddCommon(targets, common);
  targets->add_option("--dataset", dataset, "Dataset directory")->required();

  OracleNoise oracle_noise;
  std::optional<uint64_t> oracle_seed;
  auto* oracle = app.add_subcommand("oracle", "Write oracle prediction maps");
  AddCommon(oracle, common);
  oracle->add_option("--dataset", dataset, "Dataset directory")->required();
  oracle->add_option("--out", out, "Output directory")->required();
  oracle->add_option("--noise", oracle_noise.offset, "Offset noise sigma (m)");
  oracle->add_option("--noise-centerness", oracle_noise.centerness, "Center-ness noise sigma");
  oracle->add_option("--noise-extent", oracle_noise.log_extent, "Log extent noise sigma");
  oracle->add_option("--noise-heading", oracle_noise.heading, "Heading cos/sin noise sigma");
  oracle->add_option("--seed", oracle_seed, "RNG seed (default: scene seed)");

  auto* detect = app.add_subcommand("detect", "Decode and suppress boxes per scene");
  AddCommon(detect, common);
  AddSource(detect, source);
  detect->add_option("--dataset", dataset, "Dataset directory")->required();
  detect->add_option("--out", out, "Output directory")->required();

  auto* panoptic = app.add_subcommand("panoptic", "Panoptic segmentation per scene");
  AddCommon(panoptic, common);
  AddSource(panoptic, source);
  panoptic->add_option("--dataset", dataset, "Dataset directory")->required();
  panoptic->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Compute AP, PQ and regression errors");
  AddCommon(eval, common);
  AddSource(eval, source);
  eval->add_option("--dataset", dataset, "Dataset directory")->required();
  eval->add_option("--out", out, "Metrics JSON path (default: DATASET/metrics.json)");
  eval->add_option("--lambda-sweep", sweep, "Comma-separated view-distance weights, e.g. 0,1e-4,1e-2,1");

  std::string input;
  auto* render = app.add_subcommand("render", "Render a RIMG channel to a PPM image");
  render->add_option("--input", input, "RIMG file")->required();
  render->add_option("--channel", channel, "Channel name (default: range)");
  render->add_option("--out", out, "Output .ppm path")->required();

  auto* print_config = app.add_subcommand("print-config", "Print the resolved config");
  AddCommon(print_config, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*simulate) {
      const RunConfig cfg = ResolveConfig(common, {});
      CmdSimulate(cfg, {out, count, common.jobs});
    } else if (*targets) {
      CmdTargets(ResolveConfig(common, dataset), {dataset, common.jobs});
    } else if (*oracle) {
      const RunConfig cfg = ResolveConfig(common, dataset);
      CmdOracle(cfg, {dataset, out, oracle_noise, oracle_seed.value_or(cfg.scene.seed),
                      common.jobs});
    } else if (*detect || *panoptic) {
      const RunConfig cfg = ResolveConfig(common, dataset);
      const InferenceOptions opt{dataset, out, MakeSource(source, cfg), common.jobs};
      *detect ? CmdDetect(cfg, opt) : CmdPanoptic(cfg, opt);
    } else if (*eval) {
      const RunConfig cfg = ResolveConfig(common, dataset);
      const std::string doc =
          CmdEval(cfg, {dataset, out, MakeSource(source, cfg), ParseList(sweep), common.jobs});
      std::cout << doc;
    } else if (*render) {
      CmdRender({input, channel, out});
    } else if (*print_config) {
      std::cout << DumpConfig(ResolveConfig(common, {}));
    }
  } catch (const Error& e) {
    std::cerr << "rvkit: error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "rvkit: error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}
