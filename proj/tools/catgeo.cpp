// catgeo command-line runner.
//
//   catgeo <experiment> [--config FILE] [--seed N] [--out DIR] [--trials N] [--epochs N] [--subset N]
//   catgeo invert --checkpoint FILE --layer L --x X [X ...] --n N [--seed S] [--method lm|adam] [--csv FILE]
//   catgeo defaults <experiment>
//
// Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.

#include "catgeo/checkpoint.hpp"
#include "catgeo/experiments.hpp"
#include "catgeo/inversion.hpp"

#include <CLI11.hpp>
#include <malloc.h>

#include <fstream>
#include <iostream>
#include <mutex>

using namespace catgeo;

namespace {

struct RunArgs {
  std::string config;
  RunOverrides o;
  bool quiet = false;
};

int run(const std::string& name, const RunArgs& a) {
  Json user = a.config.empty() ? Json{{"experiment", name}} : load_json_file(a.config);
  if (!user.is_object()) throw ConfigError(a.config + ": config must be a JSON object");
  if (!user.contains("experiment")) user["experiment"] = name;
  if (user["experiment"] != name)
    throw ConfigError("/experiment: config is for " + user["experiment"].dump() + ", command is " + name);
  const Json resolved = apply_overrides(resolve_config(user), a.o);
  std::mutex m;
  Logger log;
  if (!a.quiet)
    log = [&](const std::string& line) {
      std::lock_guard lock(m);
      std::cerr << line << std::endl;
    };
  const ExperimentRun r = run_experiment(resolved, log);
  std::cout << (r.dir / "report.json").string() << "\n";
  return 0;
}

struct InvertArgs {
  std::string checkpoint;
  int layer = 0;
  std::vector<double> x;
  long n = 100;
  std::uint64_t seed = 0;
  std::string method = "lm";
  std::string csv;
};

int invert(const InvertArgs& a) {
  const Network net = load_checkpoint(a.checkpoint);
  if (a.layer < 0 || a.layer >= net.depth()) throw ConfigError("--layer: out of range");
  if (Index(a.x.size()) != net.input_shape().size())
    throw ConfigError("--x: network input has " + std::to_string(net.input_shape().size()) + " values");
  InversionOptions opt;
  if (a.method == "adam")
    opt.method = InversionMethod::Adam;
  else if (a.method != "lm")
    throw ConfigError("--method: expected lm or adam");
  const Vector x = Eigen::Map<const Vector>(a.x.data(), Index(a.x.size()));
  const InversionResult r = invert_activity(net, a.layer, x, a.n, a.seed, opt);

  std::vector<std::string> cols{"realization", "converged", "objective"};
  for (Index k = 0; k < x.size(); ++k) cols.push_back("xhat" + std::to_string(k + 1));
  CsvTable t(cols);
  for (Index i = 0; i < r.estimates.cols(); ++i) {
    std::vector<std::string> row{cell(i), cell(bool(r.converged[std::size_t(i)])), cell(r.objective(i))};
    for (Index k = 0; k < x.size(); ++k) row.push_back(cell(r.estimates(k, i)));
    t.row(row);
  }
  if (!a.csv.empty()) {
    std::ofstream out(a.csv, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + a.csv);
    out << t.str();
  }
  Json summary{{"n", a.n},
               {"n_converged", r.n_converged},
               {"mean", std::vector<double>(r.mean.data(), r.mean.data() + r.mean.size())},
               {"variance", r.total_variance()},
               {"inv_variance", 1.0 / r.total_variance()}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // keep large batch buffers mapped between steps instead of faulting them in again
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"Categorical perception geometry experiments"};
  app.require_subcommand(1);

  std::vector<RunArgs> run_args(experiment_names().size());
  for (std::size_t i = 0; i < experiment_names().size(); ++i) {
    auto* sub = app.add_subcommand(experiment_names()[i], "Run the " + experiment_names()[i] + " experiment");
    RunArgs& a = run_args[i];
    sub->add_option("--config", a.config, "JSON config (defaults apply to missing keys)")->check(CLI::ExistingFile);
    sub->add_option("--seed", a.o.seed, "Override the seed");
    sub->add_option("--out", a.o.output_dir, "Override output_dir");
    sub->add_option("--trials", a.o.trials, "Override train.trials")->check(CLI::PositiveNumber);
    sub->add_option("--epochs", a.o.epochs, "Override train.epochs")->check(CLI::NonNegativeNumber);
    sub->add_option("--subset", a.o.subset, "Training items (toy sample size or image subset)")
        ->check(CLI::NonNegativeNumber);
    sub->add_flag("--quiet", a.quiet, "No progress on stderr");
  }

  InvertArgs inv;
  auto* isub = app.add_subcommand("invert", "Virtual inputs of one stimulus for a saved network");
  isub->add_option("--checkpoint", inv.checkpoint, "Network checkpoint")->required()->check(CLI::ExistingFile);
  isub->add_option("--layer", inv.layer, "Layer index whose noisy activity is inverted")->required();
  isub->add_option("--x", inv.x, "Stimulus coordinates")->required();
  isub->add_option("--n", inv.n, "Noise realizations")->check(CLI::PositiveNumber);
  isub->add_option("--seed", inv.seed, "Seed");
  isub->add_option("--method", inv.method, "lm or adam");
  isub->add_option("--csv", inv.csv, "Write the estimates to this CSV file");

  std::string defaults_name;
  auto* dsub = app.add_subcommand("defaults", "Print the default config of an experiment");
  dsub->add_option("experiment", defaults_name)->required()->check(CLI::IsMember(experiment_names()));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    for (std::size_t i = 0; i < experiment_names().size(); ++i)
      if (app.got_subcommand(experiment_names()[i])) return run(experiment_names()[i], run_args[i]);
    if (app.got_subcommand("invert")) return invert(inv);
    if (app.got_subcommand("defaults")) {
      std::cout << default_config(defaults_name).dump(2) << "\n";
      return 0;
    }
  } catch (const StageError& e) {
    std::cerr << "error in stage " << e.what() << "\n";
    return e.exit_code == 1 ? 1 : e.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const EvaluationError& e) {
    std::cerr << "evaluation error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
