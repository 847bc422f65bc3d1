// Command-line front end: data generation, training, reconstruction and benchmarks.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "garment/pipeline.hpp"

namespace fs = std::filesystem;
using namespace garment;

namespace {

constexpr int kExitStageFailure = 2;
constexpr int kExitConfigError = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string stages;
  std::vector<std::string> oracle;
  std::string out;
  std::optional<int> resolution;
  std::string line_model;
  std::string occupancy_model;
  std::string classifier;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "pipeline config JSON");
  cmd->add_option("--seed", f.seed, "seed override");
  cmd->add_option("--stages", f.stages, "comma list of enabled stages: pose,lines,second_pass,implicit,registration");
  cmd->add_option("--oracle", f.oracle, "oracle inputs: category, pose, occupancy")->delimiter(',');
  cmd->add_option("--out", f.out, "output path");
  cmd->add_option("--resolution", f.resolution, "marching cubes resolution");
  cmd->add_option("--line-model", f.line_model, "line regressor weights");
  cmd->add_option("--occupancy-model", f.occupancy_model, "occupancy network weights");
  cmd->add_option("--classifier", f.classifier, "category classifier JSON");
}

PipelineConfig resolve_config(const CommonFlags& f) {
  PipelineConfig c = f.config.empty() ? PipelineConfig{} : PipelineConfig::load(f.config);
  if (f.seed) {
    c.seed = *f.seed;
    c.line_training.seed = *f.seed;
    c.occupancy_training.seed = *f.seed;
  }
  if (!f.stages.empty()) {
    c.stages = {false, false, false, false, false};
    std::stringstream ss(f.stages);
    std::string s;
    while (std::getline(ss, s, ',')) {
      if (s == "pose") c.stages.pose = true;
      else if (s == "lines") c.stages.lines = true;
      else if (s == "second_pass") c.stages.second_pass = true;
      else if (s == "implicit") c.stages.implicit = true;
      else if (s == "registration") c.stages.registration = true;
      else throw ConfigError("unknown stage '" + s + "'");
    }
  }
  for (const auto& o : f.oracle) {
    if (o == "category") c.oracle.category = true;
    else if (o == "pose") c.oracle.pose = true;
    else if (o == "occupancy") c.oracle.occupancy = true;
    else throw ConfigError("unknown oracle '" + o + "'");
  }
  if (f.resolution) c.resolution = *f.resolution;
  if (!f.line_model.empty()) c.line_model = f.line_model;
  if (!f.occupancy_model.empty()) c.occupancy_model = f.occupancy_model;
  if (!f.classifier.empty()) c.classifier = f.classifier;
  c.validate();
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

fs::path require_out(const CommonFlags& f) {
  if (f.out.empty()) throw ConfigError("--out is required");
  return f.out;
}

// Output file whose parent directory is created on demand.
fs::path require_out_file(const CommonFlags& f) {
  const fs::path out = require_out(f);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  return out;
}

std::vector<SynthGarment> load_dataset(const fs::path& root) {
  std::vector<SynthGarment> out;
  for (const auto& item : dataset_items(root)) {
    try {
      out.push_back(read_garment(item));
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << item << ": " << e.what() << '\n';
    }
  }
  if (out.empty()) throw std::runtime_error("no readable items in " + root.string());
  return out;
}

void write_report(const metrics::BenchmarkReport& report, const fs::path& dir) {
  write_text(dir / "report.json", report.to_json());
  write_text(dir / "report.csv", report.to_csv());
  std::cout << report.to_table();
  for (const auto& n : report.notes) std::cerr << "note: " << n << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-view garment reconstruction pipeline"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string data;
  int count = 10;
  double pose_magnitude = 0.3;
  double wrinkle = 0.003;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic garment dataset");
  add_common(gen, flags);
  gen->add_option("--count", count, "number of garments")->check(CLI::PositiveNumber);
  gen->add_option("--pose-magnitude", pose_magnitude, "max per-joint angle (rad)");
  gen->add_option("--wrinkle", wrinkle, "wrinkle amplitude");

  std::vector<CLI::App*> data_commands;
  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"train-lines", "train the feature-line regressor"},
           {"train-occ", "train the occupancy network"},
           {"train-classifier", "fit the nearest-centroid category classifier"},
           {"reconstruct", "run the pipeline on one dataset item"},
           {"evaluate", "benchmark the pipeline on a dataset"},
           {"ablate", "benchmark the ablation stage presets"}}) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, flags);
    cmd->add_option("--data", data, "dataset directory (or item directory for reconstruct)")->required();
    data_commands.push_back(cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfigError;
  }

  try {
    const PipelineConfig config = resolve_config(flags);
    const auto* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();

    if (name == "gen-data") {
      const fs::path out = require_out(flags);
      const auto family = generate_family(count, pose_magnitude, wrinkle, config.seed);
      write_dataset(family, out);
      std::cout << "wrote " << family.size() << " garments to " << out << '\n';
    } else if (name == "train-lines") {
      const fs::path out = require_out_file(flags);
      std::vector<LineSample> samples;
      for (const auto& g : load_dataset(data)) samples.push_back(line_sample(g, config.raster_size));
      LineTrainConfig tc = config.line_training;
      tc.lambda_edge = config.lambda_edge;
      const auto r = train_line_regressor(samples, tc);
      save_gcn(out, r.model, tc.seed);
      write_text(fs::path(out.string() + ".loss.csv"), loss_history_csv(r.history));
      std::cout << "L_line " << r.history.front().line << " -> " << r.history.back().line << '\n';
    } else if (name == "train-occ") {
      const fs::path out = require_out_file(flags);
      std::vector<OccupancySample> samples;
      std::uint64_t k = 0;
      for (const auto& g : load_dataset(data))
        samples.push_back(occupancy_sample(g, config.occupancy_points, config.seed + k++, config.raster_size));
      const auto r = train_occupancy(samples, config.occupancy_training);
      save_occupancy_net(out, r.net, config.occupancy_training.seed);
      std::cout << "BCE " << r.history.front() << " -> " << r.history.back() << '\n';
    } else if (name == "train-classifier") {
      const fs::path out = require_out_file(flags);
      std::vector<SilhouetteDescriptor> d;
      std::vector<ClothCategory> y;
      for (const auto& g : load_dataset(data)) {
        d.push_back(silhouette_of(g.ground_truth_mesh, config.raster_size));
        y.push_back(g.category);
      }
      write_text(out, train_classifier(d, y).to_json());
    } else if (name == "reconstruct") {
      const fs::path out = require_out(flags);
      const SynthGarment g = read_garment(data);
      const PipelineModels models = PipelineModels::load(config);
      write_text(out / "config.json", config.to_json());
      try {
        const auto a = run_pipeline(g, config, models, out);
        std::cout << "stages:";
        for (const auto& s : a.stages_run) std::cout << ' ' << s;
        std::cout << "\nfingerprint " << a.fingerprint() << '\n';
      } catch (const StageFailure& e) {
        std::cerr << "stage failure: " << e.what() << '\n';
        return kExitStageFailure;
      }
    } else if (name == "evaluate") {
      const fs::path out = require_out(flags);
      write_text(out / "config.json", config.to_json());
      write_report(run_benchmark(data, config, PipelineModels::load(config), {out / "artifacts"}), out);
    } else if (name == "ablate") {
      const fs::path out = require_out(flags);
      const PipelineModels models = PipelineModels::load(config);
      for (const auto& [setting, c] : ablation_settings(config)) {
        std::cout << "== " << setting << '\n';
        write_report(run_benchmark(data, c, models), out / setting);
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const StageFailure& e) {
    std::cerr << "stage failure: " << e.what() << '\n';
    return kExitStageFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
