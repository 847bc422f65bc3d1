#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "garment/gcn.hpp"
#include "garment/metrics.hpp"
#include "garment/occupancy_net.hpp"
#include "garment/registration.hpp"
#include "garment/synth.hpp"

namespace garment {

// Configuration ----------------------------------------------------------------

struct StageToggles {
  bool pose = true;
  bool lines = true;         // GCN line regression plus handle deformation
  bool second_pass = false;  // a further regression and deformation on M_l
  bool implicit = true;
  bool registration = true;
};

struct OracleFlags {
  bool category = false;
  bool pose = false;
  bool occupancy = false;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  StageToggles stages;
  OracleFlags oracle;
  double lambda_edge = kDefaultEdgeWeight;
  double lambda_reg = kDefaultPoseRegularization;
  RefineWeights refine;
  RegistrationParams registration;
  LineTrainConfig line_training;
  OccupancyTrainConfig occupancy_training;
  int resolution = 128;
  double grid_padding = 0.1;
  int raster_size = kDefaultRasterSize;
  int eval_samples = metrics::kDefaultSamples;
  int occupancy_points = 20000;
  std::string line_model;
  std::string occupancy_model;
  std::string classifier;

  std::string to_json() const;
  static PipelineConfig from_json(std::string_view text);
  static PipelineConfig load(const std::filesystem::path& path);
  void validate() const;
};

/// Thrown for malformed or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A stage that could not complete; artifacts up to the previous stage are kept.
class StageFailure : public std::runtime_error {
 public:
  StageFailure(std::string stage, const std::string& what) : std::runtime_error(what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Classifier -------------------------------------------------------------------

/// Nearest centroid over per-category mean silhouette pyramids.
struct CategoryClassifier {
  std::array<std::vector<double>, kCategoryCount> centroids;
  std::array<int, kCategoryCount> counts{};

  bool trained() const;
  std::string to_json() const;
  static CategoryClassifier from_json(std::string_view text);
};

struct Classification {
  ClothCategory category = ClothCategory::LongSleeveCoat;
  double confidence = 0.0;
};

CategoryClassifier train_classifier(std::span<const SilhouetteDescriptor> descriptors,
                                    std::span<const ClothCategory> labels);

/// Confidence is the softmax weight of the winner over negative squared distances.
Classification classify(const SilhouetteDescriptor& descriptor, const CategoryClassifier* model,
                        std::optional<ClothCategory> override_category = std::nullopt);

// Pipeline ---------------------------------------------------------------------

struct PipelineModels {
  std::optional<GcnModel> lines;
  std::optional<OccupancyNet> occupancy;
  std::optional<CategoryClassifier> classifier;

  /// Loads whatever model paths the config names.
  static PipelineModels load(const PipelineConfig& config);
};

struct StageArtifacts {
  std::vector<std::string> stages_run;
  std::optional<Classification> classification;
  std::optional<Pose> pose;
  std::optional<Mesh> template_mesh;  // M_t
  std::optional<Mesh> posed;          // M_p
  std::vector<FeatureLine> lines;     // template lines on M_t / M_p / M_l
  std::optional<std::vector<LinePositions>> lines_posed;     // l^p
  std::optional<std::vector<LinePositions>> lines_regressed;  // l^o
  std::optional<Mesh> deformed;       // M_l
  std::optional<Mesh> implicit;       // M_I
  std::optional<Mesh> registered;     // M_r
  std::optional<std::string> registration_diagnostics;
  std::map<std::string, double> timings;  // seconds; excluded from comparisons

  /// The most refined mesh produced.
  const Mesh& final_mesh() const;
  /// Hash over every output except the timings.
  std::string fingerprint() const;
};

/// Mesh the template is posed with before any learned stage: the active
/// region of the category template under `pose`.
Mesh posed_template(ClothCategory category, const Pose& pose);

/// GCN training item: template lines posed with the garment's pose.
LineSample line_sample(const SynthGarment& garment, int raster_size = kDefaultRasterSize);
OccupancySample occupancy_sample(const SynthGarment& garment, int n, std::uint64_t seed,
                                 int raster_size = kDefaultRasterSize);

/// Grid bounds: the box around the posed template and the deformed mesh,
/// inflated by `padding`.
Bounds reconstruction_bounds(const Mesh& posed, const Mesh* deformed, double padding);

/// Runs the stages in order. With `out_dir` set every artifact is written as it
/// is produced; on failure a failure.json record is written and StageFailure
/// is rethrown.
StageArtifacts run_pipeline(const SynthGarment& input, const PipelineConfig& config,
                            const PipelineModels& models,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

void write_artifacts(const StageArtifacts& artifacts, const std::filesystem::path& dir);

struct BenchmarkOptions {
  std::optional<std::filesystem::path> artifacts_dir;
};

/// Runs the pipeline on every dataset item and scores the final mesh against
/// the ground-truth surface. Unreadable items are skipped with a note.
metrics::BenchmarkReport run_benchmark(const std::filesystem::path& dataset, const PipelineConfig& config,
                                       const PipelineModels& models, const BenchmarkOptions& options = {});

/// Named stage presets for the ablation runner.
std::vector<std::pair<std::string, PipelineConfig>> ablation_settings(const PipelineConfig& base);

}  // namespace garment
