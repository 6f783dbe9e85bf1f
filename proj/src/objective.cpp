#include "dpsvrg/objective.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dpsvrg/rng.hpp"

namespace dpsvrg {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// log(1 + e^t) without overflow
double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

void check_finite(const Vector& x, const char* what) {
  if (!x.allFinite()) throw std::invalid_argument(std::string(what) + ": vector must be finite");
}

}  // namespace

LossKind loss_from_string(const std::string& name) {
  if (name == "logistic") return LossKind::Logistic;
  if (name == "least_squares") return LossKind::LeastSquares;
  throw std::invalid_argument("unknown loss kind: " + name);
}

std::string to_string(LossKind kind) {
  return kind == LossKind::Logistic ? "logistic" : "least_squares";
}

bool Dataset::equal_partition() const {
  if (node_samples.empty()) return false;
  std::size_t lo = node_samples.front().size(), hi = lo;
  for (const auto& block : node_samples) {
    lo = std::min(lo, block.size());
    hi = std::max(hi, block.size());
  }
  return hi - lo <= 1;
}

void Dataset::partition(int m) {
  if (m < 1) throw std::invalid_argument("Dataset::partition: m must be >= 1");
  if (n() < m) throw std::invalid_argument("Dataset::partition: fewer samples than nodes");
  node_samples.assign(static_cast<std::size_t>(m), {});
  const int base = n() / m, extra = n() % m;
  int next = 0;
  for (int i = 0; i < m; ++i) {
    const int size = base + (i < extra ? 1 : 0);
    auto& block = node_samples[static_cast<std::size_t>(i)];
    block.resize(static_cast<std::size_t>(size));
    for (int j = 0; j < size; ++j) block[static_cast<std::size_t>(j)] = next++;
  }
}

void Dataset::scale_max_norm() {
  double max_norm = 0.0;
  for (int i = 0; i < n(); ++i) max_norm = std::max(max_norm, features.row(i).norm());
  if (max_norm > 0.0) features /= max_norm;
}

Dataset Dataset::load_csv(const std::string& path, int m) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  int d = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size() && cell.find_first_not_of(" \t\r", used) != std::string::npos)
          throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        throw std::runtime_error("load_csv: " + path + ":" + std::to_string(line_no) + ": bad value '" + cell + "'");
      }
    }
    if (row.size() < 2)
      throw std::runtime_error("load_csv: " + path + ":" + std::to_string(line_no) + ": need label plus features");
    if (d < 0) d = static_cast<int>(row.size()) - 1;
    if (static_cast<int>(row.size()) - 1 != d)
      throw std::runtime_error("load_csv: " + path + ":" + std::to_string(line_no) + ": inconsistent column count");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("load_csv: " + path + ": empty file");
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), d);
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.labels[static_cast<Eigen::Index>(i)] = rows[i][0];
    for (int j = 0; j < d; ++j) out.features(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j) + 1];
  }
  out.partition(m);
  return out;
}

Dataset Dataset::load_libsvm(const std::string& path, int m) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_libsvm: cannot open " + path);
  struct Row {
    double label;
    std::vector<std::pair<int, double>> entries;
  };
  std::vector<Row> rows;
  std::string line;
  int line_no = 0;
  int d = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    Row row{};
    if (!(ss >> row.label))
      throw std::runtime_error("load_libsvm: " + path + ":" + std::to_string(line_no) + ": missing label");
    std::string tok;
    while (ss >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos)
        throw std::runtime_error("load_libsvm: " + path + ":" + std::to_string(line_no) + ": bad token '" + tok + "'");
      try {
        const int idx = std::stoi(tok.substr(0, colon));
        const double val = std::stod(tok.substr(colon + 1));
        if (idx < 1) throw std::invalid_argument("index");
        row.entries.emplace_back(idx - 1, val);
        d = std::max(d, idx);
      } catch (const std::exception&) {
        throw std::runtime_error("load_libsvm: " + path + ":" + std::to_string(line_no) + ": bad token '" + tok + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("load_libsvm: " + path + ": empty file");
  Dataset out;
  out.features = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), d);
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.labels[static_cast<Eigen::Index>(i)] = rows[i].label;
    for (const auto& [idx, val] : rows[i].entries) out.features(static_cast<Eigen::Index>(i), idx) = val;
  }
  out.partition(m);
  return out;
}

Dataset Dataset::load(const std::string& path, int m) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') break;
  return line.find(':') != std::string::npos ? load_libsvm(path, m) : load_csv(path, m);
}

void Dataset::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path);
  char buf[40];
  for (int i = 0; i < n(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", labels[i]);
    out << buf;
    for (int j = 0; j < dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", features(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
}

void Dataset::save_libsvm(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_libsvm: cannot open " + path);
  char buf[48];
  for (int i = 0; i < n(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", labels[i]);
    out << buf;
    for (int j = 0; j < dim(); ++j)
      if (features(i, j) != 0.0) {
        std::snprintf(buf, sizeof(buf), " %d:%.17g", j + 1, features(i, j));
        out << buf;
      }
    out << '\n';
  }
}

SynthResult synth_dataset(int n, int d, int sparsity, double noise, std::uint64_t seed, int m) {
  if (n < 1 || d < 1) throw std::invalid_argument("synth_dataset: n and d must be positive");
  if (sparsity < 0 || sparsity > d) throw std::invalid_argument("synth_dataset: sparsity must be in [0, d]");
  Rng rng(Rng::splitmix64(seed) ^ 0x73796e74ULL);
  SynthResult out;
  out.data.features.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out.data.features(i, j) = rng.normal();

  out.planted = Vector::Zero(d);
  std::vector<int> coords(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) coords[static_cast<std::size_t>(j)] = j;
  for (int j = d - 1; j > 0; --j) std::swap(coords[static_cast<std::size_t>(j)], coords[static_cast<std::size_t>(rng.uniform_int(j + 1))]);
  for (int j = 0; j < sparsity; ++j) {
    const double mag = 1.0 + rng.uniform01();
    out.planted[coords[static_cast<std::size_t>(j)]] = rng.uniform01() < 0.5 ? -mag : mag;
  }

  out.data.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const double logit = out.data.features.row(i).dot(out.planted) + noise * rng.normal();
    out.data.labels[i] = rng.uniform01() < sigmoid(logit) ? 1.0 : 0.0;
  }
  out.data.partition(m);
  return out;
}

CompositeObjective::CompositeObjective(LossKind loss, Dataset data, Regularizer reg)
    : loss_(loss), data_(std::move(data)), reg_(std::move(reg)) {
  if (data_.node_samples.empty()) throw std::invalid_argument("CompositeObjective: dataset has no partition");
}

double CompositeObjective::sample_loss(const Vector& x, int sample) const {
  if (sample < 0 || sample >= data_.n()) throw std::out_of_range("sample_loss: sample index out of range");
  const double z = data_.features.row(sample).dot(x);
  if (loss_ == LossKind::Logistic) return -data_.labels[sample] * z + softplus(z);
  const double r = z - data_.labels[sample];
  return r * r;
}

Vector CompositeObjective::sample_grad(const Vector& x, int sample) const {
  if (sample < 0 || sample >= data_.n()) throw std::out_of_range("sample_grad: sample index out of range");
  check_finite(x, "sample_grad");
  const double z = data_.features.row(sample).dot(x);
  if (loss_ == LossKind::Logistic)
    return (sigmoid(z) - data_.labels[sample]) * data_.features.row(sample).transpose();
  return 2.0 * (z - data_.labels[sample]) * data_.features.row(sample).transpose();
}

Vector CompositeObjective::full_grad_node(const Vector& x, int node) const {
  if (node < 0 || node >= nodes()) throw std::out_of_range("full_grad_node: node out of range");
  const auto& block = data_.node_samples[static_cast<std::size_t>(node)];
  if (block.empty()) throw std::invalid_argument("full_grad_node: node partition is empty");
  Vector g = Vector::Zero(dim());
  for (int sample : block) g += sample_grad(x, sample);
  return g / static_cast<double>(block.size());
}

Vector CompositeObjective::full_grad(const Vector& x) const {
  check_finite(x, "full_grad");
  Vector g = Vector::Zero(dim());
  for (int i = 0; i < data_.n(); ++i) g += sample_grad(x, i);
  return g / static_cast<double>(data_.n());
}

Vector CompositeObjective::vr_grad(const Vector& x, const Vector& snap_x, const Vector& snapshot_full,
                                   int sample) const {
  return sample_grad(x, sample) - sample_grad(snap_x, sample) + snapshot_full;
}

double CompositeObjective::smooth_value(const Vector& x) const {
  double acc = 0.0;
  for (int i = 0; i < data_.n(); ++i) acc += sample_loss(x, i);
  return acc / static_cast<double>(data_.n());
}

double CompositeObjective::smooth_value_node(const Vector& x, int node) const {
  const auto& block = data_.node_samples[static_cast<std::size_t>(node)];
  double acc = 0.0;
  for (int sample : block) acc += sample_loss(x, sample);
  return acc / static_cast<double>(block.size());
}

double CompositeObjective::value(const Vector& x) const { return smooth_value(x) + reg_.value(x); }

double CompositeObjective::smoothness_L() const {
  double best = 0.0;
  for (int i = 0; i < data_.n(); ++i) {
    const double sq = data_.features.row(i).squaredNorm();
    best = std::max(best, loss_ == LossKind::Logistic ? sq / 4.0 : 2.0 * sq);
  }
  return best;
}

CompositeObjective::BoundConstants CompositeObjective::bound_constants(double radius) const {
  if (!(radius > 0.0)) throw std::invalid_argument("bound_constants: radius must be > 0");
  BoundConstants out;
  for (int i = 0; i < data_.n(); ++i) {
    const double nrm = data_.features.row(i).norm();
    double g;
    if (loss_ == LossKind::Logistic) {
      g = nrm * sigmoid(nrm * radius);  // |sigma(z) - b| <= sigma(||d|| R) for b in {0,1}
    } else {
      g = 2.0 * nrm * (nrm * radius + std::abs(data_.labels[i]));
    }
    out.G_f = std::max(out.G_f, g);
  }
  out.G_h = reg_.subgrad_bound(dim());
  out.M = 2.0 * out.G_f;
  return out;
}

}  // namespace dpsvrg
