#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fbgate/config.hpp"
#include "fbgate/errors.hpp"
#include "fbgate/jobs.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Args {
  std::string config;
  std::string out = "out";
  std::int64_t seed = -1;
};

void add_common(CLI::App* sub, Args& args) {
  sub->add_option("-c,--config", args.config, "JSON configuration file")->required()->check(CLI::ExistingFile);
  sub->add_option("-o,--out", args.out, "output directory");
  sub->add_option("-s,--seed", args.seed, "overrides the config seed")->check(CLI::NonNegativeNumber);
}

void report(const char* kind, const std::string& message) {
  json j = {{"error", kind}, {"message", message}};
  std::cerr << j.dump() << '\n';
}

int run(const std::string& job, const Args& args) {
  std::ifstream in(args.config);
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw fbgate::ConfigError({std::string("config is not valid JSON: ") + e.what()});
  }
  if (!doc.is_object()) throw fbgate::ConfigError({"config must be a JSON object"});
  if (doc.contains("job") && doc["job"] != job)
    throw fbgate::ConfigError({"config job '" + doc["job"].dump() + "' does not match subcommand '" + job + "'"});
  doc["job"] = job;
  if (args.seed >= 0) doc["seed"] = args.seed;

  fbgate::RunConfig cfg = fbgate::parse_config(doc.dump());
  if (!cfg.replay_path.empty() && fs::path(cfg.replay_path).is_relative())
    cfg.replay_path = (fs::path(args.config).parent_path() / cfg.replay_path).lexically_normal().string();

  const fbgate::JobOutcome outcome = fbgate::run_job(cfg, args.out);
  std::cout << outcome.summary << '\n';
  for (const auto& f : outcome.files) std::cout << "wrote " << f.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-fermion Feshbach gate: spectra, gate dynamics and pulse optimization"};
  app.require_subcommand(1);
  Args args;
  auto* spectrum = app.add_subcommand("spectrum", "bound-state spectrum over a field grid");
  auto* gate = app.add_subcommand("gate", "propagate both sectors under a fixed or replayed pulse");
  auto* opt = app.add_subcommand("optimize", "CRAB optimization of the drive envelope");
  for (auto* sub : {spectrum, gate, opt}) add_common(sub, args);
  CLI11_PARSE(app, argc, argv);

  const std::string job = app.get_subcommands().front()->get_name();
  try {
    return run(job, args);
  } catch (const fbgate::ConfigError& e) {
    report("config", e.what());
    return 2;
  } catch (const fbgate::ConvergenceError& e) {
    report("convergence", e.what());
    return 3;
  } catch (const fbgate::PropagationError& e) {
    report("propagation", e.what());
    return 4;
  } catch (const std::exception& e) {
    report("runtime", e.what());
    return 1;
  }
}
