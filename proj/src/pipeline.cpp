#include "garment/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "garment/implicit.hpp"
#include "garment/laplacian.hpp"
#include "garment/mesh_io.hpp"
#include "garment/parallel.hpp"

namespace garment {

namespace {

using json = nlohmann::ordered_json;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// Reads `key` into `value` when present; unknown keys are reported by `check_keys`.
template <typename T>
void read(const json& j, const char* key, T& value) {
  if (!j.contains(key)) return;
  try {
    value = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string("config: '") + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(std::string("config: unknown key '") + key + "' in " + where);
  }
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  return j.contains(key) ? j.at(key) : empty;
}

std::string lines_json(std::span<const LinePositions> lines, ClothCategory category) {
  AnnotationFile f;
  f.category = to_string(category);
  for (const auto& l : lines) {
    FeatureLineAnnotation a{l.kind, l.side, {}};
    a.points.points = l.positions;
    f.lines.push_back(std::move(a));
  }
  return annotations_to_json(f);
}

std::vector<LinePositions> gather_lines(const Mesh& mesh, std::span<const FeatureLine> lines) {
  std::vector<LinePositions> out;
  for (const auto& l : lines) out.push_back({l.kind, l.side, line_positions(mesh, l)});
  return out;
}

// Handle-based deformation of `mesh` moving each line vertex to its regressed position.
Mesh deform_to_lines(const Mesh& mesh, std::span<const FeatureLine> lines, std::span<const LinePositions> targets) {
  HandleMap handles;
  for (std::size_t l = 0; l < lines.size(); ++l) {
    const auto& idx = lines[l].vertex_indices;
    for (std::size_t k = 0; k < idx.size(); ++k) handles[idx[k]] = targets[l].positions[k];
  }
  return solve(build_system(mesh, handles));
}

std::string mesh_text(const Mesh& mesh) {
  std::ostringstream out;
  io::write_obj(out, mesh);
  return out.str();
}

std::string classification_json(const Classification& c) {
  json j;
  j["category"] = to_string(c.category);
  j["confidence"] = c.confidence;
  return j.dump(2) + "\n";
}

// Writes the files belonging to `stage`; missing outputs are skipped.
void write_stage(const StageArtifacts& a, const std::string& stage, const std::filesystem::path& dir,
                 ClothCategory category) {
  if (stage == "classify" && a.classification) write_text(dir / "classification.json", classification_json(*a.classification));
  if (stage == "template" && a.template_mesh) io::write_obj(dir / "M_t.obj", *a.template_mesh);
  if (stage == "pose") {
    if (a.pose) write_text(dir / "pose.json", a.pose->to_json());
    if (a.posed) io::write_obj(dir / "M_p.obj", *a.posed);
  }
  if (stage == "lines" || stage == "second_pass") {
    if (a.lines_posed) write_text(dir / "lines_p.json", lines_json(*a.lines_posed, category));
    if (a.lines_regressed) write_text(dir / "lines_o.json", lines_json(*a.lines_regressed, category));
    if (a.deformed) io::write_obj(dir / "M_l.obj", *a.deformed);
  }
  if (stage == "implicit" && a.implicit) io::write_obj(dir / "M_I.obj", *a.implicit);
  if (stage == "registration") {
    if (a.registered) io::write_obj(dir / "M_r.obj", *a.registered);
    if (a.registration_diagnostics) write_text(dir / "registration.json", *a.registration_diagnostics);
  }
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

// Configuration ----------------------------------------------------------------

std::string PipelineConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["stages"] = {{"pose", stages.pose},
                 {"lines", stages.lines},
                 {"second_pass", stages.second_pass},
                 {"implicit", stages.implicit},
                 {"registration", stages.registration}};
  j["oracle"] = {{"category", oracle.category}, {"pose", oracle.pose}, {"occupancy", oracle.occupancy}};
  j["lambda_edge"] = lambda_edge;
  j["lambda_reg"] = lambda_reg;
  j["refine"] = {{"lambda_nor", refine.lambda_nor}, {"lambda_lap", refine.lambda_lap},
                 {"lambda_med", refine.lambda_med}, {"lambda_line", refine.lambda_line},
                 {"lambda_fed", refine.lambda_fed}, {"lambda_chm", refine.lambda_chm}};
  j["registration"] = {{"max_angle_deg", registration.max_angle_deg}, {"sigma", registration.sigma},
                       {"iterations", registration.iterations},       {"mu_initial", registration.mu_initial},
                       {"mu_decay", registration.mu_decay},           {"mu_floor", registration.mu_floor},
                       {"tolerance", registration.tolerance},         {"ridge", registration.ridge}};
  j["line_training"] = {{"lr", line_training.lr},         {"batch", line_training.batch},
                        {"epochs", line_training.epochs}, {"seed", line_training.seed},
                        {"hidden", line_training.gcn.hidden}, {"layers", line_training.gcn.layers}};
  j["occupancy_training"] = {{"lr", occupancy_training.lr},         {"batch_points", occupancy_training.batch_points},
                             {"epochs", occupancy_training.epochs}, {"seed", occupancy_training.seed},
                             {"hidden", occupancy_training.net.hidden}, {"layers", occupancy_training.net.layers}};
  j["resolution"] = resolution;
  j["grid_padding"] = grid_padding;
  j["raster_size"] = raster_size;
  j["eval_samples"] = eval_samples;
  j["occupancy_points"] = occupancy_points;
  j["paths"] = {{"line_model", line_model}, {"occupancy_model", occupancy_model}, {"classifier", classifier}};
  return j.dump(2) + "\n";
}

PipelineConfig PipelineConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  check_keys(j,
             {"seed", "stages", "oracle", "lambda_edge", "lambda_reg", "refine", "registration", "line_training",
              "occupancy_training", "resolution", "grid_padding", "raster_size", "eval_samples", "occupancy_points",
              "paths"},
             "config");
  PipelineConfig c;
  read(j, "seed", c.seed);
  const json& st = section(j, "stages");
  check_keys(st, {"pose", "lines", "second_pass", "implicit", "registration"}, "stages");
  read(st, "pose", c.stages.pose);
  read(st, "lines", c.stages.lines);
  read(st, "second_pass", c.stages.second_pass);
  read(st, "implicit", c.stages.implicit);
  read(st, "registration", c.stages.registration);
  const json& orc = section(j, "oracle");
  check_keys(orc, {"category", "pose", "occupancy"}, "oracle");
  read(orc, "category", c.oracle.category);
  read(orc, "pose", c.oracle.pose);
  read(orc, "occupancy", c.oracle.occupancy);
  read(j, "lambda_edge", c.lambda_edge);
  read(j, "lambda_reg", c.lambda_reg);
  const json& rf = section(j, "refine");
  check_keys(rf, {"lambda_nor", "lambda_lap", "lambda_med", "lambda_line", "lambda_fed", "lambda_chm"}, "refine");
  read(rf, "lambda_nor", c.refine.lambda_nor);
  read(rf, "lambda_lap", c.refine.lambda_lap);
  read(rf, "lambda_med", c.refine.lambda_med);
  read(rf, "lambda_line", c.refine.lambda_line);
  read(rf, "lambda_fed", c.refine.lambda_fed);
  read(rf, "lambda_chm", c.refine.lambda_chm);
  const json& rg = section(j, "registration");
  check_keys(rg, {"max_angle_deg", "sigma", "iterations", "mu_initial", "mu_decay", "mu_floor", "tolerance", "ridge"},
             "registration");
  read(rg, "max_angle_deg", c.registration.max_angle_deg);
  read(rg, "sigma", c.registration.sigma);
  read(rg, "iterations", c.registration.iterations);
  read(rg, "mu_initial", c.registration.mu_initial);
  read(rg, "mu_decay", c.registration.mu_decay);
  read(rg, "mu_floor", c.registration.mu_floor);
  read(rg, "tolerance", c.registration.tolerance);
  read(rg, "ridge", c.registration.ridge);
  const json& lt = section(j, "line_training");
  check_keys(lt, {"lr", "batch", "epochs", "seed", "hidden", "layers"}, "line_training");
  read(lt, "lr", c.line_training.lr);
  read(lt, "batch", c.line_training.batch);
  read(lt, "epochs", c.line_training.epochs);
  read(lt, "seed", c.line_training.seed);
  read(lt, "hidden", c.line_training.gcn.hidden);
  read(lt, "layers", c.line_training.gcn.layers);
  const json& ot = section(j, "occupancy_training");
  check_keys(ot, {"lr", "batch_points", "epochs", "seed", "hidden", "layers"}, "occupancy_training");
  read(ot, "lr", c.occupancy_training.lr);
  read(ot, "batch_points", c.occupancy_training.batch_points);
  read(ot, "epochs", c.occupancy_training.epochs);
  read(ot, "seed", c.occupancy_training.seed);
  read(ot, "hidden", c.occupancy_training.net.hidden);
  read(ot, "layers", c.occupancy_training.net.layers);
  read(j, "resolution", c.resolution);
  read(j, "grid_padding", c.grid_padding);
  read(j, "raster_size", c.raster_size);
  read(j, "eval_samples", c.eval_samples);
  read(j, "occupancy_points", c.occupancy_points);
  const json& p = section(j, "paths");
  check_keys(p, {"line_model", "occupancy_model", "classifier"}, "paths");
  read(p, "line_model", c.line_model);
  read(p, "occupancy_model", c.occupancy_model);
  read(p, "classifier", c.classifier);
  c.line_training.lambda_edge = c.lambda_edge;
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return from_json(text);
}

void PipelineConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("config: ") + what);
  };
  require(lambda_edge >= 0.0 && lambda_reg >= 0.0, "weights must be non-negative");
  require(refine.lambda_nor >= 0.0 && refine.lambda_lap >= 0.0 && refine.lambda_med >= 0.0 &&
              refine.lambda_line >= 0.0 && refine.lambda_fed >= 0.0 && refine.lambda_chm >= 0.0,
          "refine weights must be non-negative");
  require(registration.max_angle_deg > 0.0 && registration.max_angle_deg <= 180.0, "max_angle_deg outside (0, 180]");
  require(registration.sigma > 0.0, "sigma must be positive");
  require(registration.iterations >= 0, "registration iterations must be non-negative");
  require(registration.mu_initial > 0.0 && registration.mu_floor > 0.0, "mu must be positive");
  require(registration.mu_decay > 0.0 && registration.mu_decay <= 1.0, "mu_decay outside (0, 1]");
  require(line_training.lr >= 0.0 && line_training.batch > 0 && line_training.epochs >= 0, "bad line_training");
  require(line_training.gcn.hidden > 0 && line_training.gcn.layers > 0, "bad line_training network size");
  require(occupancy_training.lr >= 0.0 && occupancy_training.batch_points > 0 && occupancy_training.epochs >= 0,
          "bad occupancy_training");
  require(occupancy_training.net.hidden > 0 && occupancy_training.net.layers > 0, "bad occupancy network size");
  require(resolution >= 2 && resolution <= 512, "resolution outside [2, 512]");
  require(grid_padding >= 0.0, "grid_padding must be non-negative");
  require(raster_size >= 8 && raster_size % 8 == 0, "raster_size must be a positive multiple of 8");
  require(eval_samples > 0 && occupancy_points > 0, "sample counts must be positive");
}

// Classifier -------------------------------------------------------------------

bool CategoryClassifier::trained() const {
  return std::any_of(counts.begin(), counts.end(), [](int n) { return n > 0; });
}

std::string CategoryClassifier::to_json() const {
  json j;
  j["model"] = "nearest_centroid";
  auto& cs = j["centroids"] = json::object();
  for (ClothCategory c : kAllCategories) {
    const int i = static_cast<int>(c);
    if (counts[i] == 0) continue;
    cs[std::string(to_string(c))] = {{"count", counts[i]}, {"mean", centroids[i]}};
  }
  return j.dump() + "\n";
}

CategoryClassifier CategoryClassifier::from_json(std::string_view text) {
  const json j = json::parse(text);
  if (j.value("model", "") != "nearest_centroid") throw std::invalid_argument("classifier: unexpected model type");
  CategoryClassifier m;
  for (const auto& [name, entry] : j.at("centroids").items()) {
    const int i = static_cast<int>(category_from_string(name));
    m.counts[i] = entry.at("count").get<int>();
    m.centroids[i] = entry.at("mean").get<std::vector<double>>();
    if (m.centroids[i].size() != static_cast<std::size_t>(kDescriptorDim))
      throw std::invalid_argument("classifier: centroid has wrong length");
  }
  return m;
}

CategoryClassifier train_classifier(std::span<const SilhouetteDescriptor> descriptors,
                                    std::span<const ClothCategory> labels) {
  if (descriptors.empty() || descriptors.size() != labels.size())
    throw std::invalid_argument("train_classifier: need one label per descriptor");
  CategoryClassifier m;
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    const int c = static_cast<int>(labels[i]);
    auto& mean = m.centroids[c];
    if (mean.empty()) mean.assign(kDescriptorDim, 0.0);
    for (int k = 0; k < kDescriptorDim; ++k) mean[k] += descriptors[i].pyramid[k];
    ++m.counts[c];
  }
  for (int c = 0; c < kCategoryCount; ++c)
    for (double& v : m.centroids[c]) v /= m.counts[c];
  return m;
}

Classification classify(const SilhouetteDescriptor& descriptor, const CategoryClassifier* model,
                        std::optional<ClothCategory> override_category) {
  if (override_category) return {*override_category, 1.0};
  if (!model || !model->trained()) throw std::invalid_argument("classify: no trained classifier and no override");
  std::vector<std::pair<double, int>> d;
  for (int c = 0; c < kCategoryCount; ++c) {
    if (model->counts[c] == 0) continue;
    double s = 0.0;
    for (int k = 0; k < kDescriptorDim; ++k) s += std::pow(descriptor.pyramid[k] - model->centroids[c][k], 2);
    d.push_back({s, c});
  }
  std::sort(d.begin(), d.end());
  double total = 0.0;
  for (const auto& [s, c] : d) total += std::exp(-(s - d[0].first));
  return {static_cast<ClothCategory>(d[0].second), 1.0 / total};
}

// Pipeline ---------------------------------------------------------------------

PipelineModels PipelineModels::load(const PipelineConfig& config) {
  PipelineModels m;
  if (!config.line_model.empty()) m.lines = load_gcn(config.line_model);
  if (!config.occupancy_model.empty()) m.occupancy = load_occupancy_net(config.occupancy_model);
  if (!config.classifier.empty()) m.classifier = CategoryClassifier::from_json(read_text(config.classifier));
  return m;
}

const Mesh& StageArtifacts::final_mesh() const {
  for (const auto* m : {&registered, &deformed, &posed, &template_mesh})
    if (m->has_value()) return **m;
  throw std::logic_error("StageArtifacts: no mesh produced");
}

std::string StageArtifacts::fingerprint() const {
  std::uint64_t h = fnv1a("artifacts");
  for (const auto& s : stages_run) h = fnv1a(s + ";", h);
  if (classification) h = fnv1a(classification_json(*classification), h);
  if (pose) h = fnv1a(pose->to_json(), h);
  for (const auto* m : {&template_mesh, &posed, &deformed, &implicit, &registered})
    h = fnv1a(m->has_value() ? mesh_text(**m) : std::string("-"), h);
  const ClothCategory c = classification ? classification->category : ClothCategory::LongSleeveCoat;
  for (const auto* l : {&lines_posed, &lines_regressed})
    h = fnv1a(l->has_value() ? lines_json(**l, c) : std::string("-"), h);
  if (registration_diagnostics) h = fnv1a(*registration_diagnostics, h);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Mesh posed_template(ClothCategory category, const Pose& pose) {
  const AdaptableTemplate& tmpl = category_template(category);
  const Mesh full = pose_mesh(tmpl.body, pose);
  ActiveMesh active = extract_active_mesh(tmpl);
  for (int i = 0; i < active.mesh.num_vertices(); ++i) active.mesh.vertices[i] = full.vertices[active.new_to_old[i]];
  return active.mesh;
}

LineSample line_sample(const SynthGarment& garment, int raster_size) {
  const Mesh posed = posed_template(garment.category, garment.pose);
  const auto lines = gather_lines(posed, garment.lines);
  return {make_line_graph(lines, silhouette_of(garment.ground_truth_mesh, raster_size)), garment.annotations};
}

OccupancySample occupancy_sample(const SynthGarment& garment, int n, std::uint64_t seed, int raster_size) {
  const LabeledPoints lp = occupancy_labels(garment, n, seed);
  return {silhouette_of(garment.ground_truth_mesh, raster_size), lp.points, lp.labels};
}

Bounds reconstruction_bounds(const Mesh& posed, const Mesh* deformed, double padding) {
  std::vector<Vec3> pts = posed.vertices;
  if (deformed) pts.insert(pts.end(), deformed->vertices.begin(), deformed->vertices.end());
  return bounding_box(pts).inflated(padding);
}

void write_artifacts(const StageArtifacts& artifacts, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const ClothCategory c =
      artifacts.classification ? artifacts.classification->category : ClothCategory::LongSleeveCoat;
  for (const char* stage : {"classify", "template", "pose", "lines", "implicit", "registration"})
    write_stage(artifacts, stage, dir, c);
  json t = json::object();
  for (const auto& [k, v] : artifacts.timings) t[k] = v;
  write_text(dir / "timings.json", t.dump(2) + "\n");
  write_text(dir / "stages.json", json(artifacts.stages_run).dump() + "\n");
}

StageArtifacts run_pipeline(const SynthGarment& input, const PipelineConfig& config, const PipelineModels& models,
                            const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  StageArtifacts a;
  if (out_dir) std::filesystem::create_directories(*out_dir);

  auto run = [&](const std::string& name, auto&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body();
    } catch (const std::exception& e) {
      if (out_dir) {
        write_artifacts(a, *out_dir);
        json f;
        f["status"] = "failed";
        f["stage"] = name;
        f["message"] = e.what();
        f["completed"] = a.stages_run;
        write_text(*out_dir / "failure.json", f.dump(2) + "\n");
      }
      throw StageFailure(name, name + ": " + e.what());
    }
    a.timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    a.stages_run.push_back(name);
    if (out_dir) {
      const ClothCategory c = a.classification ? a.classification->category : ClothCategory::LongSleeveCoat;
      write_stage(a, name, *out_dir, c);
    }
  };

  const SilhouetteDescriptor descriptor = silhouette_of(input.ground_truth_mesh, config.raster_size);
  ClothCategory category{};
  const AdaptableTemplate* tmpl = nullptr;
  Mesh working;

  run("classify", [&] {
    const CategoryClassifier* model = models.classifier ? &*models.classifier : nullptr;
    a.classification = classify(descriptor, model,
                                config.oracle.category ? std::optional(input.category) : std::nullopt);
    category = a.classification->category;
  });
  run("template", [&] {
    tmpl = &category_template(category);
    const ActiveMesh active = extract_active_mesh(*tmpl);
    a.template_mesh = active.mesh;
    a.lines = remap_lines(tmpl->feature_lines, active);
    working = active.mesh;
  });
  Pose pose = Pose::zero();
  Eigen::Matrix3d align_rotation = Eigen::Matrix3d::Identity();
  Vec3 align_translation = Vec3::Zero();
  if (config.stages.pose) {
    run("pose", [&] {
      if (config.oracle.pose) {
        pose = input.pose;
      } else {
        // Hemlines follow the garment, not the body, so they do not constrain the pose.
        std::vector<FeatureLine> body_lines;
        for (const auto& l : tmpl->feature_lines)
          if (l.kind != LandmarkKind::Hemline) body_lines.push_back(l);
        const PoseFit fit = fit_pose_to_annotations(tmpl->body, body_lines, input.annotations);
        pose = fit.pose;
        align_rotation = fit.align_rotation;
        align_translation = fit.align_translation;
      }
      a.pose = pose;
      a.posed = posed_template(category, pose);
      // Back from the model frame to the input frame.
      for (Vec3& v : a.posed->vertices) v = align_rotation.transpose() * (v - align_translation);
      working = *a.posed;
    });
  }
  auto regress_and_deform = [&] {
    if (!models.lines) throw std::invalid_argument("no line regression model loaded");
    a.lines_posed = gather_lines(working, a.lines);
    const LineGraph graph = make_line_graph(*a.lines_posed, descriptor);
    a.lines_regressed = predict_lines(graph, *models.lines);
    a.deformed = deform_to_lines(working, a.lines, *a.lines_regressed);
    working = *a.deformed;
  };
  if (config.stages.lines) {
    run("lines", regress_and_deform);
    if (config.stages.second_pass) run("second_pass", regress_and_deform);
  }
  if (config.stages.implicit) {
    run("implicit", [&] {
      OccupancyField field;
      if (config.oracle.occupancy) {
        field = analytic_occupancy(input);
      } else {
        if (!models.occupancy) throw std::invalid_argument("no occupancy model loaded");
        field = occupancy_field(*models.occupancy, descriptor);
      }
      const Mesh& posed = a.posed ? *a.posed : *a.template_mesh;
      const Bounds box = reconstruction_bounds(posed, a.deformed ? &*a.deformed : nullptr, config.grid_padding);
      a.implicit = marching_cubes(sample_grid(field, config.resolution, box));
      if (a.implicit->empty()) throw std::runtime_error("occupancy field has no iso-surface in the grid");
    });
    if (config.stages.registration) {
      run("registration", [&] {
        const RegistrationResult r = nonrigid_register(working, *a.implicit, config.registration);
        a.registered = r.mesh;
        a.registration_diagnostics = r.diagnostics_json();
      });
    }
  }
  if (out_dir) write_artifacts(a, *out_dir);
  return a;
}

metrics::BenchmarkReport run_benchmark(const std::filesystem::path& dataset, const PipelineConfig& config,
                                       const PipelineModels& models, const BenchmarkOptions& options) {
  const auto items = dataset_items(dataset);
  if (items.empty()) throw std::invalid_argument("run_benchmark: empty dataset " + dataset.string());
  std::vector<std::optional<metrics::ModelRecord>> records(items.size());
  std::vector<std::string> notes(items.size());
  std::vector<bool> corrupt(items.size(), false);
  // Items run one after another; every stage parallelises internally.
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string id = items[i].filename().string();
    SynthGarment g;
    try {
      g = read_garment(items[i]);
    } catch (const std::exception& e) {
      corrupt[i] = true;
      notes[i] = "skipped " + id + ": " + e.what();
      continue;
    }
    try {
      std::optional<std::filesystem::path> out;
      if (options.artifacts_dir) out = *options.artifacts_dir / id;
      const StageArtifacts a = run_pipeline(g, config, models, out);
      const PointCloud gt = sample_surface(g.ground_truth_mesh, config.eval_samples, config.seed + 1);
      metrics::ModelRecord r = metrics::evaluate_model(a.final_mesh(), gt, config.eval_samples, config.seed);
      r.model_id = id;
      r.category = to_string(g.category);
      records[i] = r;
    } catch (const StageFailure& e) {
      notes[i] = "failed " + id + ": " + e.what();
    }
  }
  if (std::all_of(corrupt.begin(), corrupt.end(), [](bool c) { return c; }))
    throw std::runtime_error("run_benchmark: every dataset entry is corrupt");
  metrics::BenchmarkReport report;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (records[i]) report.records.push_back(*records[i]);
    if (!notes[i].empty()) report.notes.push_back(notes[i]);
  }
  report.recompute_aggregates();
  return report;
}

std::vector<std::pair<std::string, PipelineConfig>> ablation_settings(const PipelineConfig& base) {
  std::vector<std::pair<std::string, PipelineConfig>> out;
  auto add = [&](const char* name, bool pose, bool lines, bool second, bool reg) {
    PipelineConfig c = base;
    c.stages.pose = pose;
    c.stages.lines = lines;
    c.stages.second_pass = second;
    c.stages.implicit = reg;
    c.stages.registration = reg;
    out.emplace_back(name, c);
  };
  add("M_t+GCN", false, true, false, false);
  add("M_p+GCN", true, true, false, false);
  add("M_l+GCN", true, true, true, false);
  add("M_t+Regis", false, false, false, true);
  add("full", true, true, false, true);
  return out;
}

}  // namespace garment
