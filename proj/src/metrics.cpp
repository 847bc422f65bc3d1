#include "garment/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "garment/spatial.hpp"

namespace garment::metrics {

namespace {

void require_nonempty(const PointCloud& a, const PointCloud& b, const char* what) {
  if (a.empty() || b.empty()) throw std::invalid_argument(std::string(what) + ": empty point cloud");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double directed_chamfer(const PointCloud& from, const PointCloud& to) {
  require_nonempty(from, to, "chamfer");
  const KdTree tree(to.points);
  double sum = 0.0;
  for (const Vec3& p : from.points) sum += tree.nearest(p).squared_distance;
  return sum / from.size();
}

double chamfer(const PointCloud& a, const PointCloud& b) {
  return directed_chamfer(a, b) + directed_chamfer(b, a);
}

Assignment hungarian(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw std::invalid_argument("hungarian: cost matrix not square");
  const int n = static_cast<int>(cost.rows());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Potentials u (rows), v (cols); p[j] = row matched to column j (1-based, 0 = free).
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<double> minv(n + 1);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment result;
  result.row_to_col.assign(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) result.row_to_col[p[j] - 1] = j - 1;
  for (int i = 0; i < n; ++i) result.total_cost += cost(i, result.row_to_col[i]);
  result.lower_bound = result.total_cost;
  return result;
}

Assignment auction(const Eigen::MatrixXd& cost, double relative_gap) {
  if (cost.rows() != cost.cols()) throw std::invalid_argument("auction: cost matrix not square");
  const int n = static_cast<int>(cost.rows());
  Assignment result;
  if (n == 0) return result;

  const double max_cost = cost.maxCoeff();
  std::vector<double> price(n, 0.0);
  std::vector<int> owner(n, -1);
  std::vector<int> assigned(n, -1);

  // Bidders maximise -cost - price.
  double eps = std::max(max_cost, 1e-300) / 4.0;
  const double eps_floor = std::max(max_cost, 1e-300) * 1e-14;
  while (true) {
    std::fill(owner.begin(), owner.end(), -1);
    std::fill(assigned.begin(), assigned.end(), -1);
    std::deque<int> queue(static_cast<std::size_t>(n));
    std::iota(queue.begin(), queue.end(), 0);
    while (!queue.empty()) {
      const int i = queue.front();
      queue.pop_front();
      double best = -std::numeric_limits<double>::infinity();
      double second = best;
      int best_j = -1;
      for (int j = 0; j < n; ++j) {
        const double value = -cost(i, j) - price[j];
        if (value > best) {
          second = best;
          best = value;
          best_j = j;
        } else if (value > second) {
          second = value;
        }
      }
      if (n == 1) second = best;
      price[best_j] += best - second + eps;
      if (owner[best_j] >= 0) {
        assigned[owner[best_j]] = -1;
        queue.push_back(owner[best_j]);
      }
      owner[best_j] = i;
      assigned[i] = best_j;
    }

    double primal = 0.0;
    for (int i = 0; i < n; ++i) primal += cost(i, assigned[i]);
    // Weak duality: sum_i min_j (c_ij + p_j) - sum_j p_j <= optimum.
    double dual = -std::accumulate(price.begin(), price.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      double m = std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) m = std::min(m, cost(i, j) + price[j]);
      dual += m;
    }
    dual = std::max(0.0, dual);
    result.row_to_col = assigned;
    result.total_cost = primal;
    result.lower_bound = std::min(dual, primal);
    if (primal <= (1.0 + relative_gap) * result.lower_bound || eps <= eps_floor) break;
    eps = std::max(eps / 5.0, eps_floor);
  }
  return result;
}

Eigen::MatrixXd distance_matrix(const PointCloud& a, const PointCloud& b) {
  Eigen::MatrixXd d(a.size(), b.size());
  for (int i = 0; i < a.size(); ++i)
    for (int j = 0; j < b.size(); ++j) d(i, j) = (a.points[i] - b.points[j]).norm();
  return d;
}

namespace {

void require_equal_sizes(const PointCloud& a, const PointCloud& b) {
  require_nonempty(a, b, "emd");
  if (a.size() != b.size()) {
    throw std::invalid_argument("emd: clouds must have equal cardinality (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                                ")");
  }
}

}  // namespace

double emd_exact(const PointCloud& a, const PointCloud& b) {
  require_equal_sizes(a, b);
  return hungarian(distance_matrix(a, b)).total_cost / a.size();
}

double emd_approx(const PointCloud& a, const PointCloud& b, double relative_gap) {
  require_equal_sizes(a, b);
  return auction(distance_matrix(a, b), relative_gap).total_cost / a.size();
}

double emd(const PointCloud& a, const PointCloud& b) {
  require_equal_sizes(a, b);
  return a.size() <= kExactEmdLimit ? emd_exact(a, b) : emd_approx(a, b);
}

PointCloud resample(const PointCloud& cloud, int n, std::uint64_t seed) {
  if (cloud.empty()) throw std::invalid_argument("resample: empty point cloud");
  if (n <= 0) throw std::invalid_argument("resample: n must be positive");
  std::mt19937_64 rng(seed);
  std::vector<int> picks;
  if (n <= cloud.size()) {
    std::vector<int> idx(cloud.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < n; ++i) {
      std::uniform_int_distribution<int> pick(i, cloud.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    picks.assign(idx.begin(), idx.begin() + n);
  } else {
    std::uniform_int_distribution<int> pick(0, cloud.size() - 1);
    for (int i = 0; i < n; ++i) picks.push_back(pick(rng));
  }
  PointCloud out;
  for (int i : picks) {
    out.points.push_back(cloud.points[i]);
    if (cloud.has_normals()) out.normals.push_back(cloud.normals[i]);
  }
  return out;
}

ModelRecord evaluate_model(const Mesh& reconstruction, const PointCloud& ground_truth,
                           int n_samples, std::uint64_t seed) {
  if (ground_truth.empty()) throw std::invalid_argument("evaluate_model: empty ground truth");
  const PointCloud recon = sample_surface(reconstruction, n_samples, seed);
  const PointCloud gt = resample(ground_truth, n_samples, seed ^ 0x5bd1e995ULL);
  ModelRecord rec;
  rec.cd = chamfer(recon, gt);
  rec.emd = emd(recon, gt);
  rec.reconstruction_points = recon.size();
  rec.ground_truth_points = gt.size();
  rec.seed = seed;
  return rec;
}

void BenchmarkReport::recompute_aggregates() {
  mean_cd = 0.0;
  mean_emd = 0.0;
  if (records.empty()) return;
  for (const auto& r : records) {
    mean_cd += r.cd;
    mean_emd += r.emd;
  }
  mean_cd /= static_cast<double>(records.size());
  mean_emd /= static_cast<double>(records.size());
}

std::string BenchmarkReport::to_csv() const {
  std::ostringstream out;
  out << "model_id,category,cd,emd,reconstruction_points,ground_truth_points,seed\n";
  for (const auto& r : records) {
    out << r.model_id << ',' << r.category << ',' << fmt(r.cd) << ',' << fmt(r.emd) << ','
        << r.reconstruction_points << ',' << r.ground_truth_points << ',' << r.seed << '\n';
  }
  return out.str();
}

std::string BenchmarkReport::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = method;
  j["conventions"] = {
      {"cd", "mean squared nearest distance a->b plus b->a"},
      {"emd", "mean Euclidean cost of the optimal bijection between equal-size samples"},
      {"units", "canonical: template bounding-box diagonal = 1"},
      {"comparability", "absolute values are not comparable to scan-dataset benchmarks"}};
  j["notes"] = notes;
  auto& recs = j["records"] = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    recs.push_back({{"model_id", r.model_id},
                    {"category", r.category},
                    {"cd", r.cd},
                    {"emd", r.emd},
                    {"reconstruction_points", r.reconstruction_points},
                    {"ground_truth_points", r.ground_truth_points},
                    {"seed", r.seed}});
  }
  j["aggregate"] = {{"count", records.size()},
                    {"mean_cd", mean_cd},
                    {"mean_emd", mean_emd},
                    {"mean_cd_x1e3", mean_cd * 1e3},
                    {"mean_emd_x1e2", mean_emd * 1e2}};
  return j.dump(2) + "\n";
}

std::string BenchmarkReport::to_table() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-24s %14s %14s\n", "Method", "CD (x10^-3)", "EMD (x10^2)");
  out << line;
  std::snprintf(line, sizeof(line), "%-24s %14.3f %14.3f\n", method.c_str(), mean_cd * 1e3,
                mean_emd * 1e2);
  out << line;
  out << "(" << records.size() << " models; CD = squared-distance two-way mean, "
      << "EMD = mean matched distance; canonical units)\n";
  return out.str();
}

}  // namespace garment::metrics
