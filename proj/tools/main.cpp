#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dpsvrg/checks.hpp"
#include "dpsvrg/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfigError = 2;

int cmd_run(const std::string& spec_path) {
  const auto spec = dpsvrg::ExperimentSpec::parse_file(spec_path);
  const auto outputs = dpsvrg::run_experiment(spec);
  for (const auto& p : outputs.csv_paths) std::cout << "wrote " << p << '\n';
  std::cout << "wrote " << outputs.summary_path << '\n';
  return kExitOk;
}

int cmd_reference(const std::string& spec_path) {
  auto spec = dpsvrg::ExperimentSpec::parse_file(spec_path);
  spec.algos = {"reference"};
  const auto outputs = dpsvrg::run_experiment(spec);
  std::cout << "wrote " << outputs.summary_path << '\n';
  return kExitOk;
}

int cmd_verify(const std::string& level, const std::string& json_path) {
  const auto report = dpsvrg::verify_suite(level);
  report.print(std::cout);
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    if (!out) throw std::runtime_error("cannot write " + json_path);
    out << report.to_json().dump(2) << '\n';
    std::cout << "wrote " << json_path << '\n';
  }
  return report.all_pass() ? kExitOk : kExitCheckFailure;
}

int cmd_synth(int n, int d, int sparsity, double noise, std::uint64_t seed, int m,
              const std::string& format, const std::string& out_path) {
  const auto synth = dpsvrg::synth_dataset(n, d, sparsity, noise, seed, m);
  if (format == "csv")
    synth.data.save_csv(out_path);
  else
    synth.data.save_libsvm(out_path);
  std::cout << "wrote " << out_path << " (" << n << " samples, " << d << " features)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized proximal SVRG simulator"};
  app.require_subcommand(1);

  std::string spec_path;
  auto* run = app.add_subcommand("run", "Run the experiment described by a key=value spec file");
  run->add_option("spec", spec_path, "spec file")->required();

  auto* reference = app.add_subcommand("reference", "Solve the spec's objective with the reference solver");
  std::string ref_spec;
  reference->add_option("spec", ref_spec, "spec file")->required();

  auto* verify = app.add_subcommand("verify", "Run the invariant battery");
  std::string level = "fast";
  std::string verify_json;
  verify->add_option("--level", level, "fast or full")->check(CLI::IsMember({"fast", "full"}));
  verify->add_option("--json", verify_json, "also write a JSON report to this path");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic logistic dataset");
  int n = 0, d = 0, sparsity = 0, m = 1;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string format = "csv", out_path;
  synth->add_option("--n", n, "samples")->required();
  synth->add_option("--d", d, "feature dimension")->required();
  synth->add_option("--sparsity", sparsity, "nonzeros in the planted weight")->required();
  synth->add_option("--noise", noise, "logit noise standard deviation");
  synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--m", m, "nodes for the stored partition");
  synth->add_option("--format", format, "csv or libsvm")->check(CLI::IsMember({"csv", "libsvm"}));
  synth->add_option("-o,--out", out_path, "output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (run->parsed()) return cmd_run(spec_path);
    if (reference->parsed()) return cmd_reference(ref_spec);
    if (verify->parsed()) return cmd_verify(level, verify_json);
    if (synth->parsed()) return cmd_synth(n, d, sparsity, noise, seed, m, format, out_path);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCheckFailure;
  }
  return kExitConfigError;
}
