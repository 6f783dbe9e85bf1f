#include "dpsvrg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dpsvrg {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("spec field " + key + ": bad number '" + value + "'");
  }
}

long parse_long(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long v = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("spec field " + key + ": bad integer '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw std::invalid_argument("spec field " + key + ": bad flag '" + value + "' (use 0/1)");
}

double json_safe(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

struct CsvSink::Impl {
  std::ofstream out;
};

const char* CsvSink::header() {
  return "algo,s,k,epoch_passes,comm_rounds,gap,loss,consensus_residual,sum_e,sum_sqrt_eps";
}

CsvSink::CsvSink(const std::string& path) : impl_(new Impl) {
  impl_->out.open(path);
  if (!impl_->out) {
    delete impl_;
    throw std::runtime_error("CsvSink: cannot open " + path);
  }
  impl_->out << header() << '\n';
}

CsvSink::~CsvSink() { delete impl_; }

void CsvSink::push(const MetricsRecord& rec) {
  auto& out = impl_->out;
  out << rec.algo << ',' << rec.s << ',' << rec.k << ',' << fmt17(rec.epoch_passes) << ','
      << rec.comm_rounds << ',' << fmt17(rec.gap) << ',' << fmt17(rec.loss) << ','
      << fmt17(rec.consensus_residual) << ',' << fmt17(rec.sum_e) << ',' << fmt17(rec.sum_sqrt_eps)
      << '\n';
}

ExperimentSpec ExperimentSpec::parse(std::istream& in, const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    if (kv.count(key))
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": duplicate key " + key);
    kv[key] = trim(line.substr(eq + 1));
  }

  static const std::set<std::string> known = {
      "name",        "dataset",    "loss",          "synth_n",       "synth_d",
      "synth_sparsity", "synth_noise", "synth_seed", "m",             "b",
      "eta",         "family",     "schedule_seed", "alpha",         "lambda",
      "beta",        "n0",         "S",             "batch",         "consensus",
      "seed",        "record_errors", "algos",      "lambda_sweep",  "b_sweep",
      "dspg_step",   "dspg_iterations", "threads",  "out_dir",       "reference_tol"};
  for (const auto& [key, value] : kv)
    if (!known.count(key)) throw std::invalid_argument(origin + ": unknown key " + key);

  auto require = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw std::invalid_argument(origin + ": missing required key " + key);
    return it->second;
  };
  auto optional = [&](const char* key, const std::string& fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
  };

  ExperimentSpec spec;
  spec.name = optional("name", "run");
  const std::string dataset = require("dataset");
  if (dataset != "synth") spec.dataset_path = dataset;
  spec.loss = loss_from_string(optional("loss", "logistic"));
  if (dataset == "synth") {
    spec.synth.n = static_cast<int>(parse_long("synth_n", require("synth_n")));
    spec.synth.d = static_cast<int>(parse_long("synth_d", require("synth_d")));
    spec.synth.sparsity = static_cast<int>(parse_long("synth_sparsity", require("synth_sparsity")));
    spec.synth.noise = parse_double("synth_noise", require("synth_noise"));
    spec.synth.seed = static_cast<std::uint64_t>(parse_long("synth_seed", require("synth_seed")));
  }

  spec.schedule.m = static_cast<int>(parse_long("m", require("m")));
  spec.schedule.b = static_cast<int>(parse_long("b", require("b")));
  spec.schedule.eta = parse_double("eta", require("eta"));
  spec.schedule.family = family_from_string(require("family"));
  spec.schedule.seed = static_cast<std::uint64_t>(parse_long("schedule_seed", require("schedule_seed")));

  spec.run.alpha = parse_double("alpha", require("alpha"));
  spec.run.lambda = parse_double("lambda", require("lambda"));
  spec.run.beta = parse_double("beta", require("beta"));
  spec.run.n0 = parse_long("n0", require("n0"));
  spec.run.S = static_cast<int>(parse_long("S", require("S")));
  spec.run.m = spec.schedule.m;
  spec.run.batch = static_cast<int>(parse_long("batch", require("batch")));
  spec.run.consensus = consensus_from_string(require("consensus"));
  spec.run.seed = static_cast<std::uint64_t>(parse_long("seed", require("seed")));
  spec.run.record_errors = parse_bool("record_errors", require("record_errors"));

  spec.algos = split_list(require("algos"));
  for (const auto& v : split_list(optional("lambda_sweep", "")))
    spec.lambda_sweep.push_back(parse_double("lambda_sweep", v));
  for (const auto& v : split_list(optional("b_sweep", "")))
    spec.b_sweep.push_back(static_cast<int>(parse_long("b_sweep", v)));
  spec.dspg_step = dspg_step_from_string(optional("dspg_step", "constant"));
  spec.dspg_iterations = parse_long("dspg_iterations", optional("dspg_iterations", "0"));
  spec.threads = static_cast<int>(parse_long("threads", optional("threads", "1")));
  spec.out_dir = require("out_dir");
  spec.reference_tol = parse_double("reference_tol", optional("reference_tol", "1e-10"));
  spec.validate();
  return spec;
}

ExperimentSpec ExperimentSpec::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open spec file " + path);
  return parse(in, path);
}

void ExperimentSpec::validate() const {
  run.validate();
  if (algos.empty()) throw std::invalid_argument("spec field algos: at least one algorithm required");
  static const std::set<std::string> allowed = {"dpsvrg", "dspg", "inexact", "reference"};
  for (const auto& a : algos)
    if (!allowed.count(a)) throw std::invalid_argument("spec field algos: unknown algorithm " + a);
  if (dataset_path.empty() && (synth.n < 1 || synth.d < 1))
    throw std::invalid_argument("spec field synth_n/synth_d: must be positive for synthetic data");
  if (threads < 1) throw std::invalid_argument("spec field threads: must be >= 1");
  if (dspg_iterations < 0) throw std::invalid_argument("spec field dspg_iterations: must be >= 0");
  if (!(reference_tol > 0.0)) throw std::invalid_argument("spec field reference_tol: must be > 0");
}

double fit_rho(const std::vector<MetricsRecord>& rows, int s_min) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& rec : rows)
    if (rec.k == 0 && rec.s >= s_min && rec.gap > 0.0)
      pts.emplace_back(static_cast<double>(rec.s), std::log(rec.gap));
  if (pts.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(pts.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return std::exp(slope);
}

ExperimentOutputs run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  namespace fs = std::filesystem;
  fs::path out_dir(spec.out_dir);
  if (out_dir.is_relative()) {
    if (const char* root = std::getenv(kOutputRootEnv)) out_dir = fs::path(root) / out_dir;
  }
  fs::create_directories(out_dir);

  Dataset data = spec.dataset_path.empty()
                     ? synth_dataset(spec.synth.n, spec.synth.d, spec.synth.sparsity, spec.synth.noise,
                                     spec.synth.seed, spec.run.m)
                           .data
                     : Dataset::load(spec.dataset_path, spec.run.m);

  const std::vector<double> lambdas =
      spec.lambda_sweep.empty() ? std::vector<double>{spec.run.lambda} : spec.lambda_sweep;
  const std::vector<int> bs = spec.b_sweep.empty() ? std::vector<int>{spec.schedule.b} : spec.b_sweep;

  const bool want_reference =
      std::find(spec.algos.begin(), spec.algos.end(), "reference") != spec.algos.end();
  const bool want_curves = spec.algos.size() > static_cast<std::size_t>(want_reference ? 1 : 0);

  nlohmann::json summary;
  summary["schema"] = 1;
  summary["name"] = spec.name;
  summary["runs"] = nlohmann::json::array();

  ExperimentOutputs outputs;
  for (double lambda : lambdas) {
    const Regularizer reg = lambda > 0.0 ? Regularizer::l1(lambda) : Regularizer::zero();
    CompositeObjective obj(spec.loss, data, reg);
    const double L = obj.smoothness_L();

    ReferenceResult ref;
    double f_star = std::numeric_limits<double>::quiet_NaN();
    if (want_reference || want_curves) {
      ref = run_reference(obj, spec.reference_tol);
      f_star = ref.f_star;
    }

    for (int b : bs) {
      MixingSchedule schedule = MixingSchedule::make(spec.schedule.m, b, spec.schedule.eta,
                                                     spec.schedule.family, spec.schedule.seed);
      RunConfig cfg = spec.run;
      cfg.lambda = lambda;

      nlohmann::json entry;
      entry["lambda"] = lambda;
      entry["b"] = b;
      entry["results"] = nlohmann::json::array();
      const double radius = ref.x_star.size() > 0 ? ref.x_star.norm() + 1.0 : 1.0;
      const AnalysisConstants ac{cfg.alpha, L, 0.9, cfg.beta, cfg.n0, obj.bound_constants(radius).M};
      entry["constants"] = {{"L", L},
                            {"M", ac.M},
                            {"rho", json_safe(ac.rho())},
                            {"theta", ac.theta()},
                            {"alpha_limit", ac.alpha_limit()},
                            {"gamma", schedule.gamma()},
                            {"log_gamma", schedule.log_gamma()},
                            {"Gamma", json_safe(schedule.big_gamma())},
                            {"log_Gamma", schedule.log_big_gamma()},
                            {"b0", schedule.b0()},
                            {"eta", schedule.eta()},
                            {"realized_min_weight", schedule.realized_min_weight()}};
      if (want_reference || want_curves) {
        int nnz = 0;
        for (Eigen::Index j = 0; j < ref.x_star.size(); ++j)
          if (std::abs(ref.x_star[j]) > 1e-12) ++nnz;
        entry["reference"] = {{"f_star", f_star},
                              {"iterations", ref.iterations},
                              {"grad_map_norm", ref.grad_map_norm},
                              {"x_star_nonzeros", nnz}};
      }

      const std::string tag = spec.name + "_lam" + fmt_short(lambda) + "_b" + std::to_string(b);
      double dpsvrg_passes = 0.0;

      for (const auto& algo : spec.algos) {
        if (algo == "reference") continue;
        const std::string csv_path = (out_dir / (tag + "_" + algo + ".csv")).string();
        CsvSink csv(csv_path);
        VectorSink rows;
        TeeSink sink(&csv, &rows);
        nlohmann::json run_entry;
        run_entry["algo"] = algo;
        run_entry["csv"] = csv_path;
        if (algo == "dpsvrg") {
          auto res = run_dpsvrg(obj, schedule, cfg, &sink, f_star, spec.threads);
          dpsvrg_passes = res.epoch_passes;
          run_entry["epoch_passes"] = res.epoch_passes;
          run_entry["comm_rounds"] = res.comm_rounds;
          run_entry["rho_hat"] = json_safe(fit_rho(rows.rows, 3));
          if (res.trace) {
            run_entry["round_sum_e"] = res.trace->round_sum_e;
            run_entry["round_sum_sqrt_eps"] = res.trace->round_sum_sqrt_eps;
          }
        } else if (algo == "inexact") {
          auto res = run_inexact_prox_svrg(obj, cfg, nullptr, &sink, f_star);
          run_entry["epoch_passes"] = res.epoch_passes;
          run_entry["rho_hat"] = json_safe(fit_rho(rows.rows, 3));
        } else if (algo == "dspg") {
          long iters = spec.dspg_iterations;
          if (iters == 0) {
            double passes = dpsvrg_passes;
            if (passes == 0.0) {
              passes = static_cast<double>(cfg.S);
              for (int s = 1; s <= cfg.S; ++s)
                passes += 2.0 * cfg.m * cfg.batch * static_cast<double>(cfg.inner_count(s)) / data.n();
            }
            iters = std::max<long>(1, std::lround(passes * data.n() / (cfg.m * cfg.batch)));
          }
          auto res = run_dspg(obj, schedule, cfg, spec.dspg_step, iters, &sink, f_star, spec.threads);
          run_entry["epoch_passes"] = res.epoch_passes;
          run_entry["comm_rounds"] = res.comm_rounds;
          run_entry["iterations"] = iters;
        }
        if (!rows.rows.empty()) {
          const auto& last = rows.rows.back();
          run_entry["final_gap"] = json_safe(last.gap);
          run_entry["final_loss"] = last.loss;
        }
        entry["results"].push_back(run_entry);
        outputs.csv_paths.push_back(csv_path);
      }
      summary["runs"].push_back(entry);
    }
  }

  outputs.summary_path = (out_dir / (spec.name + "_summary.json")).string();
  std::ofstream js(outputs.summary_path);
  if (!js) throw std::runtime_error("run_experiment: cannot write " + outputs.summary_path);
  js << summary.dump(2) << '\n';
  return outputs;
}

}  // namespace dpsvrg
