// Command-line front end: synthetic data, simulated benchmarks, replay
// evaluation, ensemble training, report export and the HTTP server.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>

#include "hvil/benchmark.hpp"
#include "hvil/dataset_io.hpp"
#include "hvil/error.hpp"
#include "hvil/eval.hpp"
#include "hvil/http_api.hpp"
#include "hvil/json_io.hpp"
#include "hvil/service.hpp"
#include "hvil/synthetic.hpp"

namespace fs = std::filesystem;
using namespace hvil;

namespace {

struct Options {
  std::string config_path;
  std::string dataset;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  std::optional<std::size_t> top_k;
  std::optional<double> eta;
  std::optional<double> nu;
  std::optional<int> budget;
  std::string logs;
  std::string report;
  std::string bind;
  std::string dataset_id = "default";
};

struct ExperimentConfig {
  SyntheticSpec synthetic;
  BenchmarkConfig benchmark;
  bool normalize = true;
};

ExperimentConfig load_config(const Options& opt) {
  ExperimentConfig cfg;
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path);
    if (!in) throw Error(ErrorCode::kNotFound, "config file " + opt.config_path + " not found");
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, std::string("config: ") + e.what());
    }
    if (j.contains("synthetic")) j.at("synthetic").get_to(cfg.synthetic);
    if (j.contains("benchmark")) j.at("benchmark").get_to(cfg.benchmark);
    cfg.normalize = j.value("normalize", cfg.normalize);
  }
  auto& b = cfg.benchmark;
  if (opt.top_k) b.hvil.window_k = b.policy.window_k = *opt.top_k;
  if (opt.budget) b.hvil.max_rounds_per_probe = b.policy.max_rounds = *opt.budget;
  if (opt.eta) b.hvil.eta = *opt.eta;
  if (opt.nu) b.rmel.nu = *opt.nu;
  return cfg;
}

std::vector<std::uint64_t> seed_list(const Options& opt) {
  if (!opt.seeds.empty()) return opt.seeds;
  return {opt.seed.value_or(0)};
}

// A named dataset directory, or the synthetic dataset generated for `seed`.
Dataset dataset_for(const Options& opt, const ExperimentConfig& cfg, std::uint64_t seed) {
  if (!opt.dataset.empty()) return load_dataset_dir(opt.dataset, cfg.normalize);
  SyntheticSpec spec = cfg.synthetic;
  spec.seed = seed;
  return gen_synthetic(spec).to_dataset(cfg.normalize);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

fs::path seed_dir(const fs::path& out, std::uint64_t seed) { return out / ("seed_" + std::to_string(seed)); }

std::vector<ProbeLog> read_logs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "log file " + path.string() + " not found");
  return read_event_log(in);
}

int cmd_gen(const Options& opt) {
  if (opt.out_dir.empty()) throw Error(ErrorCode::kInvalidArgument, "--out-dir is required");
  auto cfg = load_config(opt);
  cfg.synthetic.seed = opt.seed.value_or(cfg.synthetic.seed);
  gen_synthetic(cfg.synthetic).write(opt.out_dir);
  std::cout << Json{{"dataset", opt.out_dir}, {"spec", cfg.synthetic}}.dump(2) << '\n';
  return 0;
}

int cmd_bench(const Options& opt) {
  const auto cfg = load_config(opt);
  cfg.benchmark.validate();
  if (!opt.dataset.empty() && !fs::is_directory(opt.dataset)) {
    throw Error(ErrorCode::kNotFound, "dataset directory " + opt.dataset + " not found");
  }
  const auto seeds = seed_list(opt);
  std::vector<std::future<BenchmarkRun>> jobs;
  for (auto seed : seeds) {
    jobs.push_back(std::async(std::launch::async, [&opt, &cfg, seed] {
      const Dataset data = dataset_for(opt, cfg, seed);
      return run_benchmark(data, cfg.benchmark, seed);
    }));
  }
  std::vector<Json> reports;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    BenchmarkRun run = jobs[i].get();
    if (!opt.out_dir.empty()) {
      const fs::path dir = seed_dir(opt.out_dir, seeds[i]);
      fs::create_directories(dir);
      write_text(dir / "report.json", run.report.dump(2) + "\n");
      std::ofstream events(dir / "events.jsonl", std::ios::trunc);
      write_event_log(events, run.logs);
      if (run.ensemble) run.ensemble->save(dir / "ensemble.rme");
    }
    reports.push_back(std::move(run.report));
  }
  Json summary{{"seeds", seeds}, {"aggregate", aggregate_reports(reports)}};
  if (!opt.out_dir.empty()) write_text(fs::path(opt.out_dir) / "summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_eval(const Options& opt) {
  const auto cfg = load_config(opt);
  const auto seed = opt.seed.value_or(0);
  fs::path logs = opt.logs;
  if (logs.empty() && !opt.out_dir.empty()) logs = seed_dir(opt.out_dir, seed) / "events.jsonl";
  if (logs.empty()) throw Error(ErrorCode::kInvalidArgument, "--logs or --out-dir is required");
  const Dataset data = dataset_for(opt, cfg, seed);
  const auto run = replay_benchmark(data, cfg.benchmark, seed, read_logs(logs));
  std::cout << run.report.dump(2) << '\n';
  return 0;
}

int cmd_ensemble(const Options& opt) {
  const auto cfg = load_config(opt);
  const auto seed = opt.seed.value_or(0);
  fs::path logs = opt.logs;
  if (logs.empty() && !opt.out_dir.empty()) logs = seed_dir(opt.out_dir, seed) / "events.jsonl";
  if (logs.empty()) throw Error(ErrorCode::kInvalidArgument, "--logs or --out-dir is required");
  const Dataset data = dataset_for(opt, cfg, seed);
  const auto run = replay_benchmark(data, cfg.benchmark, seed, read_logs(logs));
  auto trained = train_rmel(run.verified, run.weak_models, cfg.benchmark.rmel);
  Json out{{"tau", trained.model.tau()},
           {"pairs", trained.trace.pairs},
           {"objective_init", trained.trace.objective_init},
           {"objective_final", trained.trace.objective_final},
           {"iterations", trained.trace.iterations},
           {"min_eigenvalue", trained.trace.min_eigenvalue},
           {"hol", run.report.at("hol")}};
  if (!opt.out_dir.empty()) {
    const fs::path dir = seed_dir(opt.out_dir, seed);
    fs::create_directories(dir);
    trained.model.save(dir / "ensemble.rme");
    out["artifact"] = (dir / "ensemble.rme").string();
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_export(const Options& opt) {
  if (opt.report.empty() || opt.out_dir.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "--report and --out-dir are required");
  }
  std::ifstream in(opt.report);
  if (!in) throw Error(ErrorCode::kNotFound, "report " + opt.report + " not found");
  const Json report = Json::parse(in);
  fs::create_directories(opt.out_dir);
  std::ofstream table(fs::path(opt.out_dir) / "metrics.csv", std::ios::trunc);
  table << "split,model,rank1,rank5,rank10,rank20,expected_rank,map\n";
  table.precision(17);
  for (const char* split : {"hil", "hol"}) {
    if (!report.contains(split)) continue;
    for (const auto& [model, s] : report.at(split).items()) {
      if (!s.is_object() || !s.contains("cmc")) continue;
      CmcCurve curve;
      s.at("cmc").get_to(curve.rates);
      std::ofstream csv(fs::path(opt.out_dir) / (std::string(split) + "_" + model + "_cmc.csv"), std::ios::trunc);
      write_cmc_csv(csv, curve);
      table << split << ',' << model << ',' << s.at("rank1").get<double>() << ',' << s.at("rank5").get<double>() << ','
            << s.at("rank10").get<double>() << ',' << s.at("rank20").get<double>() << ','
            << s.at("expected_rank").get<double>() << ',' << s.at("map").get<double>() << '\n';
    }
  }
  std::cout << Json{{"exported", opt.out_dir}}.dump() << '\n';
  return 0;
}

int cmd_serve(const Options& opt) {
  SessionService service(opt.out_dir);
  service.restore();
  if (!opt.dataset.empty()) {
    service.register_dataset_dir(opt.dataset_id, opt.dataset, load_config(opt).normalize);
  }
  const char* env = std::getenv("HVIL_BIND");
  auto [host, port] = parse_bind_address(!opt.bind.empty() ? opt.bind : (env ? env : ""), "127.0.0.1", 8080);
  ApiServer server(service);
  port = server.bind(host, port);
  std::cerr << Json{{"listening", host + ":" + std::to_string(port)}}.dump() << std::endl;
  return server.serve() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Human-in-the-loop metric learning workbench"};
  app.require_subcommand(1);
  Options opt;

  const auto common = [&opt](CLI::App* cmd) {
    cmd->add_option("--config", opt.config_path, "JSON experiment config");
    cmd->add_option("--dataset", opt.dataset, "Dataset directory (features.rfv, metadata.csv)");
    cmd->add_option("--seed", opt.seed, "Run seed");
    cmd->add_option("--seeds", opt.seeds, "Several run seeds (fanned out across threads)");
    cmd->add_option("--out-dir", opt.out_dir, "Output directory");
    cmd->add_option("--top-k", opt.top_k, "Feedback window size");
    cmd->add_option("--eta", opt.eta, "HVIL trade-off eta");
    cmd->add_option("--nu", opt.nu, "RMEL regularisation strength");
    cmd->add_option("--budget", opt.budget, "Feedback rounds per probe");
  };

  auto* gen = app.add_subcommand("gen", "Generate a synthetic two-view dataset");
  auto* bench = app.add_subcommand("bench", "Run simulated HIL benchmarks");
  auto* eval = app.add_subcommand("eval", "Rebuild a benchmark report from recorded logs");
  auto* ensemble = app.add_subcommand("ensemble", "Train an RMEL ensemble from recorded logs");
  auto* exp = app.add_subcommand("export", "Write CSV tables from a report");
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  for (auto* cmd : {gen, bench, eval, ensemble, exp, serve}) common(cmd);
  for (auto* cmd : {eval, ensemble}) cmd->add_option("--logs", opt.logs, "Event log (JSON lines)");
  exp->add_option("--report", opt.report, "Report JSON");
  serve->add_option("--bind", opt.bind, "host:port (default from HVIL_BIND, else 127.0.0.1:8080)");
  serve->add_option("--dataset-id", opt.dataset_id, "Id under which --dataset is registered");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << Json{{"error", {{"code", "usage"}, {"message", e.what()}}}}.dump() << '\n';
    return 2;
  }

  try {
    if (*gen) return cmd_gen(opt);
    if (*bench) return cmd_bench(opt);
    if (*eval) return cmd_eval(opt);
    if (*ensemble) return cmd_ensemble(opt);
    if (*exp) return cmd_export(opt);
    if (*serve) return cmd_serve(opt);
  } catch (const Error& e) {
    std::cerr << Json{{"error", {{"code", to_string(e.code())}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << Json{{"error", {{"code", "internal"}, {"message", e.what()}}}}.dump() << '\n';
    return 1;
  }
  return 1;
}
