#ifndef DPSVRG_HARNESS_HPP
#define DPSVRG_HARNESS_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dpsvrg/algorithms.hpp"

namespace dpsvrg {

// Streams records to a CSV file with the fixed header
// algo,s,k,epoch_passes,comm_rounds,gap,loss,consensus_residual,sum_e,sum_sqrt_eps.
// Doubles are written with 17 significant digits so outputs are byte-stable.
class CsvSink : public MetricsSink {
 public:
  explicit CsvSink(const std::string& path);
  ~CsvSink() override;
  void push(const MetricsRecord& rec) override;
  static const char* header();

 private:
  struct Impl;
  Impl* impl_;
};

// Forwards each record to two sinks.
class TeeSink : public MetricsSink {
 public:
  TeeSink(MetricsSink* a, MetricsSink* b) : a_(a), b_(b) {}
  void push(const MetricsRecord& rec) override {
    if (a_) a_->push(rec);
    if (b_) b_->push(rec);
  }

 private:
  MetricsSink* a_;
  MetricsSink* b_;
};

struct SynthSpec {
  int n = 0, d = 0, sparsity = 0;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

struct ScheduleSpec {
  int m = 0, b = 1;
  double eta = 0.1;
  TopologyFamily family = TopologyFamily::Static;
  std::uint64_t seed = 0;
};

// One experiment: a dataset, a schedule, a run configuration, the algorithms
// to run and the sweep axes. Parsed from a flat key=value file; unknown keys
// are rejected and missing required keys are reported by name.
struct ExperimentSpec {
  std::string name = "run";
  std::string dataset_path;  // empty => synthetic
  SynthSpec synth;
  LossKind loss = LossKind::Logistic;
  ScheduleSpec schedule;
  RunConfig run;
  std::vector<std::string> algos;  // subset of dpsvrg, dspg, inexact, reference
  std::vector<double> lambda_sweep;
  std::vector<int> b_sweep;
  DspgStep dspg_step = DspgStep::Constant;
  long dspg_iterations = 0;  // 0 => match DPSVRG's effective passes
  int threads = 1;
  std::string out_dir = ".";
  double reference_tol = 1e-10;

  static ExperimentSpec parse(std::istream& in, const std::string& origin);
  static ExperimentSpec parse_file(const std::string& path);
  void validate() const;
};

struct ExperimentOutputs {
  std::vector<std::string> csv_paths;
  std::string summary_path;
};

// Environment variable overriding the root under which relative out_dir
// paths are placed.
inline constexpr const char* kOutputRootEnv = "DPSVRG_OUTPUT_ROOT";

ExperimentOutputs run_experiment(const ExperimentSpec& spec);

// Least-squares slope fit of log(gap) against the outer round s, over the
// snapshot records (k == 0) with s >= s_min and positive gap. Returns
// exp(slope), the fitted per-round contraction factor; NaN with < 2 points.
double fit_rho(const std::vector<MetricsRecord>& rows, int s_min);

}  // namespace dpsvrg

#endif
