// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fixtures.hpp"
#include "grad_fixtures.hpp"
#include "garment/implicit.hpp"
#include "garment/laplacian.hpp"
#include "garment/metrics.hpp"
#include "garment/pipeline.hpp"
#include "garment/registration.hpp"
#include "garment/template.hpp"

namespace fs = std::filesystem;
using namespace garment;
using namespace garment::testing;

namespace {

// Collects failed checks for one criterion.
struct Check {
  std::vector<std::string> failures;
  std::string detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

// Oracles ----------------------------------------------------------------------

double brute_chamfer(const PointCloud& a, const PointCloud& b) {
  auto directed = [](const PointCloud& x, const PointCloud& y) {
    double s = 0.0;
    for (const Vec3& p : x.points) {
      double m = 1e300;
      for (const Vec3& q : y.points) m = std::min(m, (p - q).squaredNorm());
      s += m;
    }
    return s / x.size();
  };
  return directed(a, b) + directed(b, a);
}

double brute_emd(const PointCloud& a, const PointCloud& b) {
  std::vector<int> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += (a.points[i] - b.points[perm[i]]).norm();
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / a.size();
}

// Dense cotangent Laplacian from interior angles computed with acos.
Eigen::MatrixXd dense_laplacian(const Mesh& m) {
  const int n = m.num_vertices();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (const Face& f : m.faces) {
    for (int k = 0; k < 3; ++k) {
      const Vec3& apex = m.vertices[f[k]];
      const int i = f[(k + 1) % 3], j = f[(k + 2) % 3];
      const Vec3 u = (m.vertices[i] - apex).normalized();
      const Vec3 v = (m.vertices[j] - apex).normalized();
      const double w = 0.5 / std::tan(std::acos(u.dot(v)));
      l(i, j) -= w;
      l(j, i) -= w;
      l(i, i) += w;
      l(j, j) += w;
    }
  }
  return l;
}

// Least-squares Laplacian editing with the handles substituted out.
Mesh dense_solve(const Mesh& m, const HandleMap& handles) {
  const Eigen::MatrixXd l = dense_laplacian(m);
  const int n = m.num_vertices();
  Eigen::MatrixXd x(n, 3);
  for (int i = 0; i < n; ++i) x.row(i) = m.vertices[i].transpose();
  const Eigen::MatrixXd delta = l * x;
  std::vector<int> free;
  for (int i = 0; i < n; ++i)
    if (!handles.count(i)) free.push_back(i);
  Eigen::MatrixXd lf(n, free.size());
  for (std::size_t c = 0; c < free.size(); ++c) lf.col(c) = l.col(free[c]);
  Eigen::MatrixXd rhs = delta;
  for (const auto& [v, t] : handles) rhs -= l.col(v) * t.transpose();
  const Eigen::MatrixXd xf = lf.colPivHouseholderQr().solve(rhs);
  Mesh out = m;
  for (std::size_t c = 0; c < free.size(); ++c) out.vertices[free[c]] = xf.row(c).transpose();
  for (const auto& [v, t] : handles) out.vertices[v] = t;
  return out;
}

double max_relative_gap(const Mesh& a, const Mesh& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.vertices.size(); ++i) {
    num = std::max(num, (a.vertices[i] - b.vertices[i]).norm());
    den = std::max(den, b.vertices[i].norm());
  }
  return num / den;
}

const Bounds kUnitBox{Vec3::Zero(), Vec3::Ones()};
const Vec3 kCenter(0.5, 0.5, 0.5);

OccupancyField soft_sphere(double r, double width = 0.05) {
  OccupancyField f;
  f.evaluate = [r, width](const Vec3& p) { return std::clamp(0.5 - ((p - kCenter).norm() - r) / width, 0.0, 1.0); };
  return f;
}

double sphere_area_error(const Mesh& m, double r) {
  const double exact = 4.0 * std::numbers::pi * r * r;
  return std::abs(surface_area(m) - exact) / exact;
}

Mesh merged(const Mesh& a, const Mesh& b) {
  Mesh m = a;
  const int offset = a.num_vertices();
  m.vertices.insert(m.vertices.end(), b.vertices.begin(), b.vertices.end());
  for (Face f : b.faces) m.faces.push_back({f[0] + offset, f[1] + offset, f[2] + offset});
  return m;
}

// Criteria ---------------------------------------------------------------------

void constants(Check& c) {
  const PipelineConfig d;
  c.expect(d.lambda_edge == 0.2, "lambda_edge");
  c.expect(d.lambda_reg == 1e-5, "lambda_reg");
  c.expect(d.refine.lambda_nor == 1.6e-4, "lambda_nor");
  c.expect(d.refine.lambda_lap == 1.0, "lambda_lap");
  c.expect(d.refine.lambda_med == 0.5, "lambda_med");
  c.expect(d.refine.lambda_line == 1.0, "lambda_line");
  c.expect(d.refine.lambda_fed == 0.5, "lambda_fed");
  c.expect(d.registration.max_angle_deg == 60.0, "normal cone");
  c.expect(d.registration.sigma == 0.01, "sigma");
  c.expect(d.line_training.lr == 5e-5, "lr");
  c.expect(d.line_training.batch == 8, "batch");
  c.expect(d.line_training.epochs == 50, "epochs");
  PipelineConfig hi = d;
  hi.resolution = 256;
  bool accepted = true;
  try {
    hi.validate();
  } catch (const ConfigError&) {
    accepted = false;
  }
  c.expect(accepted, "resolution 256 rejected by config");
  const Mesh m = marching_cubes(sample_grid(soft_sphere(0.35, 0.02), 256, kUnitBox));
  c.expect(is_watertight(m) && sphere_area_error(m, 0.35) < 0.002, "resolution 256 extraction");
  c.detail = "14 defaults, res 256 sphere with " + std::to_string(m.faces.size()) + " faces";
}

void category_table(Check& c) {
  using C = ClothCategory;
  const std::vector<std::pair<C, std::set<std::string>>> table = {
      {C::LongSleeveCoat, {"ne", "wa", "sh", "el", "wr"}},
      {C::ShortSleeveCoat, {"ne", "wa", "sh", "el"}},
      {C::NoneSleeveCoat, {"ne", "wa", "sh"}},
      {C::LongSleeveDress, {"ne", "wa", "sh", "el", "wr", "he"}},
      {C::ShortSleeveDress, {"ne", "wa", "sh", "el", "he"}},
      {C::NoneSleeveDress, {"ne", "wa", "sh", "he"}},
      {C::LongTrousers, {"wa", "kn", "an"}},
      {C::ShortTrousers, {"wa", "kn"}},
      {C::LongSkirt, {"wa", "he"}},
      {C::ShortSkirt, {"wa", "he"}},
  };
  const AdaptableTemplate base = make_template();
  for (const auto& [category, expected] : table) {
    std::set<std::string> kinds;
    for (const auto& line : activate(base, category).feature_lines) kinds.insert(std::string(to_string(line.kind)));
    c.expect(kinds == expected, std::string(to_string(category)));
  }
  c.detail = "10 rows";
}

void metrics_oracles(Check& c) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const PointCloud a = random_cloud(64, 1000 + 2 * s), b = random_cloud(64, 1001 + 2 * s);
    c.expect(metrics::chamfer(a, b) == brute_chamfer(a, b), "chamfer pair " + std::to_string(s));
  }
  double worst_emd = 0.0;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const PointCloud a = random_cloud(7, 3000 + 2 * s), b = random_cloud(7, 3001 + 2 * s);
    const double gap = std::abs(metrics::emd_exact(a, b) - brute_emd(a, b));
    worst_emd = std::max(worst_emd, gap);
    c.expect(gap < 1e-12, "emd pair " + std::to_string(s));
  }
  double worst_ratio = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const PointCloud a = random_cloud(512, 5000 + 2 * s), b = random_cloud(512, 5001 + 2 * s);
    const double exact = metrics::emd_exact(a, b);
    const double approx = metrics::emd_approx(a, b);
    worst_ratio = std::max(worst_ratio, approx / exact);
    c.expect(approx <= 1.001 * exact && approx >= exact * (1.0 - 1e-12), "approx emd pair " + std::to_string(s));
  }
  c.detail = fmt("emd gap %.1e, worst approx/exact %.6f", worst_emd, worst_ratio);
}

void laplacian(Check& c) {
  // 25 x 20 vertex height field.
  Mesh m = planar_grid(24, 19, 0.04);
  for (Vec3& v : m.vertices) v.z() = 0.1 * std::sin(4.0 * v.x()) * std::cos(3.0 * v.y());
  c.expect(m.num_vertices() == 500, "fixture size");
  const std::vector<int> ids = {0, 24, 250, 262, 475, 499, 137};

  HandleMap rest;
  for (int v : ids) rest[v] = m.vertices[v];
  const Mesh fixed = solve(build_system(m, rest));
  double fixed_gap = 0.0;
  for (int i = 0; i < m.num_vertices(); ++i) fixed_gap = std::max(fixed_gap, (fixed.vertices[i] - m.vertices[i]).norm());
  c.expect(fixed_gap <= 1e-8, "rest handles move the mesh");

  const Vec3 t(0.3, -0.1, 0.2);
  HandleMap moved;
  for (int v : ids) moved[v] = m.vertices[v] + t;
  const Mesh shifted = solve(build_system(m, moved));
  double shift_gap = 0.0;
  for (int i = 0; i < m.num_vertices(); ++i)
    shift_gap = std::max(shift_gap, (shifted.vertices[i] - m.vertices[i] - t).norm());
  c.expect(shift_gap <= 1e-8, "translation");

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  HandleMap edit;
  for (int v : ids) edit[v] = m.vertices[v] + Vec3(u(rng), u(rng), u(rng));
  const Mesh out = solve(build_system(m, edit));
  bool exact = true;
  for (const auto& [v, p] : edit) exact = exact && out.vertices[v] == p;
  c.expect(exact, "handle residual not exactly zero");
  const double gap = max_relative_gap(out, dense_solve(m, edit));
  c.expect(gap <= 1e-7, "dense oracle");
  c.detail = fmt("fixed point %.1e, translation %.1e, dense gap %.1e", fixed_gap, shift_gap, gap);
}

void marching_cubes_sphere(Check& c) {
  const double r = 0.35;
  double errors[3];
  const int res[3] = {32, 64, 128};
  for (int k = 0; k < 3; ++k) {
    const Mesh m = marching_cubes(sample_grid(soft_sphere(r), res[k], kUnitBox));
    errors[k] = sphere_area_error(m, r);
    if (res[k] == 64) {
      c.expect(errors[k] < 0.02, "area at 64");
      c.expect(euler_characteristic(m) == 2, "euler");
      c.expect(is_edge_manifold(m) && is_watertight(m), "manifold");
    }
  }
  c.expect(errors[1] < errors[0] && errors[2] < errors[1], "refinement not monotone");
  c.detail = fmt("area error 32/64/128: %.4f %.4f %.4f", errors[0], errors[1], errors[2]);
}

void registration_gating(Check& c) {
  // The blob sits inside the distance gate, so only the normal cone can reject it.
  const Mesh source = planar_grid(30, 30, 1.0 / 30.0);
  Mesh sheet = source;
  for (Vec3& v : sheet.vertices) v.z() += 0.008;
  const double blob_r = 0.2;
  const Vec3 blob_center(0.5, 0.5, 0.001 + blob_r);
  const Mesh target = merged(sheet, icosphere(4, blob_r, blob_center));
  int into_blob = 0, valid_into_blob = 0;
  for (const auto& k : find_correspondences(source, target)) {
    if ((k.target_point - blob_center).norm() > blob_r + 1e-6) continue;
    ++into_blob;
    valid_into_blob += k.valid;
  }
  c.expect(into_blob > 0, "blob fixture never closest");
  c.expect(valid_into_blob == 0, "valid correspondences into the blob");

  const double amplitude = 0.005;
  Mesh wave = source;
  for (Vec3& v : wave.vertices)
    v.z() += amplitude * (0.6 + 0.4 * std::cos(2.0 * std::numbers::pi * v.x()) * std::cos(std::numbers::pi * v.y()));
  const auto r = nonrigid_register(source, wave);
  double sq = 0.0;
  for (std::size_t i = 0; i < source.vertices.size(); ++i) sq += (r.mesh.vertices[i] - wave.vertices[i]).squaredNorm();
  const double rms = std::sqrt(sq / source.vertices.size());
  c.expect(rms < 0.05 * amplitude, "smooth displacement RMS");

  const double sigmas[] = {0.02, 0.01, 0.005, 0.002};
  const double angles[] = {90.0, 60.0, 30.0, 10.0};
  const Mesh sphere = icosphere(3, 0.3);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Mesh noisy = sphere;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 0.006);
    for (Vec3& v : noisy.vertices) v += Vec3(n(rng), n(rng), n(rng));
    std::set<int> sets[4][4];
    for (int a = 0; a < 4; ++a)
      for (int s = 0; s < 4; ++s)
        for (const auto& k : find_correspondences(sphere, noisy, angles[a], sigmas[s]))
          if (k.valid) sets[a][s].insert(k.source_vertex);
    bool monotone = true;
    for (int a = 0; a < 4; ++a)
      for (int s = 0; s < 4; ++s) {
        if (s + 1 < 4)
          monotone = monotone && std::includes(sets[a][s].begin(), sets[a][s].end(), sets[a][s + 1].begin(),
                                               sets[a][s + 1].end());
        if (a + 1 < 4)
          monotone = monotone && std::includes(sets[a][s].begin(), sets[a][s].end(), sets[a + 1][s].begin(),
                                               sets[a + 1][s].end());
      }
    c.expect(monotone, "gating not monotone for seed " + std::to_string(seed));
  }
  c.detail = std::to_string(into_blob) + " blob-nearest vertices, " + std::to_string(valid_into_blob) +
             " valid; wave RMS " + fmt("%.2f%% of amplitude", 100.0 * rms / amplitude);
}

void gradients(Check& c) {
  double worst = 0.0;
  const auto fixtures = gradient_fixtures();
  for (const auto& f : fixtures) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const double e = f.run(seed);
      worst = std::max(worst, e);
      c.expect(e < 1e-4, f.name + " seed " + std::to_string(seed));
    }
  }
  c.detail = std::to_string(fixtures.size()) + " fixtures x 20 seeds, worst " + fmt("%.1e", worst);
}

// Shared by the learning, pipeline and determinism criteria.
std::vector<LineSample> training_lines() {
  std::vector<LineSample> samples;
  for (const auto& g : generate_family(50, 0.2, 0.002, 1000)) samples.push_back(line_sample(g));
  return samples;
}

std::vector<SynthGarment> test_family() {
  std::vector<SynthGarment> out;
  for (int i = 0; i < kCategoryCount; ++i)
    out.push_back(generate(kAllCategories[i], 0.2, i % 2 ? 0.002 : 0.0, 1 + i));
  return out;
}

void learning(Check& c, const std::vector<LineSample>& lines) {
  const auto r = train_line_regressor(lines, LineTrainConfig{});
  const double ratio = r.history.back().line / r.history.front().line;
  c.expect(ratio < 0.1, "line loss ratio");

  // Convex fixture: a sphere of radius 0.25, half the points near its surface.
  auto sphere_sample = [](int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::normal_distribution<double> g(0.0, 1.0), band(0.0, 0.02);
    OccupancySample s;
    s.descriptor = make_descriptor(std::vector<std::uint8_t>(64 * 64, 0), 64);
    for (int i = 0; i < n; ++i) {
      const Vec3 p = i % 2 == 0 ? Vec3(u(rng), u(rng), u(rng))
                                : Vec3(g(rng), g(rng), g(rng)).normalized() * (0.25 + band(rng));
      s.points.push_back(p);
      s.labels.push_back(p.norm() < 0.25 ? 1.0 : 0.0);
    }
    return s;
  };
  const OccupancySample train = sphere_sample(20000, 3), held = sphere_sample(4000, 4);
  OccupancyTrainConfig oc;
  oc.epochs = 30;
  const auto o = train_occupancy(std::span(&train, 1), oc);
  const OccupancyField field = occupancy_field(o.net, train.descriptor);
  int ok = 0;
  for (std::size_t i = 0; i < held.points.size(); ++i)
    ok += (field.evaluate(held.points[i]) >= 0.5) == (held.labels[i] == 1.0);
  const double acc = static_cast<double>(ok) / held.points.size();
  c.expect(acc >= 0.97, "occupancy accuracy");
  c.detail = fmt("L_line %.3e -> %.3e (ratio %.3f), ", r.history.front().line, r.history.back().line, ratio) +
             fmt("occupancy held-out accuracy %.4f", acc);
}

GcnModel pipeline_gcn(const std::vector<LineSample>& lines) {
  LineTrainConfig tc;
  tc.lr = 1e-3;
  return train_line_regressor(lines, tc).model;
}

void end_to_end(Check& c, const GcnModel& gcn) {
  PipelineConfig config;
  config.oracle = {true, true, true};
  PipelineModels models;
  models.lines = gcn;
  double sum_p = 0.0, sum_r = 0.0;
  std::ostringstream per;
  for (const SynthGarment& g : test_family()) {
    const StageArtifacts a = run_pipeline(g, config, models);
    const PointCloud gt = sample_surface(g.ground_truth_mesh, 30000, 1);
    auto cd = [&](const Mesh& m) { return metrics::chamfer(sample_surface(m, 30000, 2), gt); };
    const double p = cd(*a.posed), l = cd(*a.deformed), r = cd(*a.registered);
    const std::string name(to_string(g.category));
    c.expect(p >= l, name + ": CD(M_p) < CD(M_l)");
    c.expect(l >= r, name + ": CD(M_l) < CD(M_r)");
    sum_p += p;
    sum_r += r;
    std::printf("    %-20s CD_p %.3e  CD_l %.3e  CD_r %.3e\n", name.c_str(), p, l, r);
  }
  c.expect(sum_r < 0.5 * sum_p, "mean CD(M_r) not below half of mean CD(M_p)");
  c.detail = fmt("mean CD_p %.3e, mean CD_r %.3e (ratio %.3f)", sum_p / kCategoryCount, sum_r / kCategoryCount,
                 sum_r / sum_p);
}

void determinism(Check& c, const GcnModel& gcn) {
  const fs::path root = fs::temp_directory_path() / "garment_acceptance";
  fs::remove_all(root);
  auto family = test_family();
  family.resize(4);
  write_dataset(family, root / "data");

  // Classifier and pose fit run for real; occupancy stays analytic.
  std::vector<SilhouetteDescriptor> d;
  std::vector<ClothCategory> y;
  for (const auto& g : generate_family(3 * kCategoryCount, 0.2, 0.002, 2000)) {
    d.push_back(render_silhouette(g));
    y.push_back(g.category);
  }
  fs::create_directories(root);
  save_gcn(root / "lines.bin", gcn, 0);
  {
    std::FILE* f = std::fopen((root / "classifier.json").c_str(), "wb");
    const std::string text = train_classifier(d, y).to_json();
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
  }
  PipelineConfig config;
  config.seed = 11;
  config.oracle.occupancy = true;
  config.resolution = 64;
  config.line_model = (root / "lines.bin").string();
  config.classifier = (root / "classifier.json").string();

  const auto first = run_benchmark(root / "data", config, PipelineModels::load(config));
  // The rerun reloads everything and uses a single worker thread.
  setenv("GARMENT_PIPELINE_THREADS", "1", 1);
  const auto second = run_benchmark(root / "data", PipelineConfig::from_json(config.to_json()),
                                    PipelineModels::load(config));
  unsetenv("GARMENT_PIPELINE_THREADS");
  c.expect(first.records.size() == family.size(), "not every item scored");
  c.expect(first.to_json() == second.to_json(), "report JSON differs");
  c.expect(first.to_csv() == second.to_csv(), "report CSV differs");
  c.detail = std::to_string(first.records.size()) + " items, " + std::to_string(first.to_json().size()) +
             " byte report, mean CD " + fmt("%.3e", first.mean_cd);
  fs::remove_all(root);
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void(Check&)> run;
  };
  std::vector<LineSample> lines;
  GcnModel gcn;
  const std::vector<Criterion> criteria = {
      {1, "constants audit", constants},
      {2, "category table", category_table},
      {3, "metrics oracle equivalence", metrics_oracles},
      {4, "laplacian deformation", laplacian},
      {5, "marching cubes", marching_cubes_sphere},
      {6, "registration gating", registration_gating},
      {7, "gradient engine", gradients},
      {8, "learning smoke tests",
       [&](Check& c) {
         lines = training_lines();
         learning(c, lines);
       }},
      {9, "end-to-end oracle pipeline",
       [&](Check& c) {
         gcn = pipeline_gcn(lines);
         end_to_end(c, gcn);
       }},
      {10, "determinism", [&](Check& c) { determinism(c, gcn); }},
  };

  int failed = 0;
  for (const auto& cr : criteria) {
    Check c;
    const auto start = std::chrono::steady_clock::now();
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool ok = c.failures.empty();
    failed += !ok;
    std::printf("%s %2d %s (%.1f s)%s%s\n", ok ? "PASS" : "FAIL", cr.id, cr.name, secs, c.detail.empty() ? "" : ": ",
                c.detail.c_str());
    for (const auto& f : c.failures) std::printf("    failed: %s\n", f.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
