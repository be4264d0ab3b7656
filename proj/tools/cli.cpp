#include "pegmentor/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "pegmentor/calibration_file.hpp"
#include "pegmentor/checkpoint.hpp"
#include "pegmentor/config.hpp"
#include "pegmentor/episode_log.hpp"
#include "pegmentor/error.hpp"
#include "pegmentor/overlay.hpp"
#include "pegmentor/server.hpp"

namespace pegmentor {
namespace {

/// A usage problem detected after flag parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SharedFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  bool json = false;
};

void add_shared(CLI::App* cmd, SharedFlags& f) {
  cmd->add_option("--config", f.config_path, "Configuration file (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--set", f.overrides, "Override one configuration value, e.g. train.epochs=5")
      ->type_name("KEY=VALUE");
  cmd->add_flag("--json", f.json, "Machine-readable output");
}

/// The configuration file is data (exit 2 when bad); --set values are usage (exit 1).
AppConfig load_app_config(const SharedFlags& f) {
  if (f.config_path.empty() && f.overrides.empty()) return AppConfig{};
  Json doc = Json::object();
  if (!f.config_path.empty()) {
    try {
      doc = Json::parse(read_text_file(f.config_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::MalformedFile, f.config_path + ": " + e.what());
    }
    app_config_from_json(doc);
  }
  try {
    for (const auto& s : f.overrides) apply_override(doc, s);
    return app_config_from_json(doc);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

struct RangeScore {
  int trials = 0;
  int successes = 0;
  double rate() const { return trials > 0 ? static_cast<double>(successes) / trials : 0.0; }
};

struct EvalReport {
  RangeScore short_range;
  RangeScore long_range;
  RangeScore all() const {
    return {short_range.trials + long_range.trials, short_range.successes + long_range.successes};
  }
};

RangeScore score(const PolicyFn& policy, const AppConfig& cfg, RangeMode mode, int n, std::uint64_t seed) {
  if (n == 0) return {};
  EpisodeConfig ep = cfg.episode;
  ep.range_mode = mode;
  const double rate = evaluate(policy, cfg.board, ep, n, seed);
  return {n, static_cast<int>(std::lround(rate * n))};
}

/// Short episodes use `seed`, long ones `seed + 1`.
EvalReport evaluate_ranges(const PolicyFn& policy, const AppConfig& cfg, int n_short, int n_long, std::uint64_t seed) {
  return {score(policy, cfg, RangeMode::Short, n_short, seed), score(policy, cfg, RangeMode::Long, n_long, seed + 1)};
}

Json score_json(const RangeScore& s) {
  return {{"trials", s.trials}, {"successes", s.successes}, {"success_rate", s.rate()}};
}

Json report_json(const EvalReport& r) {
  return {{"short", score_json(r.short_range)}, {"long", score_json(r.long_range)}, {"all", score_json(r.all())}};
}

void print_table(std::ostream& out, const EvalReport& r) {
  out << std::left << std::setw(8) << "Range" << std::right << std::setw(8) << "Trials" << std::setw(11)
      << "Successes" << std::setw(14) << "Success rate" << '\n';
  auto row = [&](const char* name, const RangeScore& s) {
    out << std::left << std::setw(8) << name << std::right << std::setw(8) << s.trials << std::setw(11)
        << s.successes << std::setw(14) << std::fixed << std::setprecision(3) << s.rate() << '\n';
  };
  row("Short", r.short_range);
  row("Long", r.long_range);
  row("All", r.all());
  out.unsetf(std::ios::floatfield);
}

// ---------------------------------------------------------------------------

struct DemoGenArgs {
  SharedFlags shared;
  int n = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_demo_gen(const DemoGenArgs& a, std::ostream& out) {
  if (a.n < 1) throw UsageError("--n must be at least 1");
  const AppConfig cfg = load_app_config(a.shared);
  const auto demos = generate_demonstrations(a.n, cfg.board, cfg.episode, a.seed);
  int successes = 0;
  for (const auto& d : demos) successes += (!d.transitions.empty() && d.transitions.back().is_success) ? 1 : 0;
  const Json header{{"generator", "scripted"}, {"seed", a.seed}, {"config", to_json(cfg)}};
  write_episode_log(a.out, header, demos);
  if (a.shared.json)
    out << Json{{"episodes", demos.size()}, {"successful", successes}, {"out", a.out}}.dump() << '\n';
  else
    out << "wrote " << demos.size() << " episodes (" << successes << " successful) to " << a.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  SharedFlags shared;
  std::string demos;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  int eval_trials = 100;
  std::uint64_t eval_seed = 7;
  int jobs = 0;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  EvalReport report;
  std::string checkpoint;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  if (a.seeds.empty()) throw UsageError("give at least one seed with --seed or --seeds");
  if (a.eval_trials < 0) throw UsageError("--eval-trials must be >= 0");
  const AppConfig cfg = load_app_config(a.shared);
  const EpisodeLog log = read_episode_log(a.demos);
  const std::filesystem::path dir(a.out_dir);
  std::filesystem::create_directories(dir);

  std::vector<SeedOutcome> outcomes(a.seeds.size());
  std::mutex log_mu;
  auto run_seed = [&](std::size_t i) {
    TrainConfig tc = cfg.train;
    tc.seed = a.seeds[i];
    const std::string stem = "seed-" + std::to_string(tc.seed);
    std::string stats, timing = "epoch,wall_time_s\n";
    const TrainResult result = train(cfg.board, cfg.episode, log.episodes, tc, [&](const EpochStats& st) {
      stats += Json{{"seed", tc.seed},
                    {"epoch", st.epoch},
                    {"actor_loss", st.actor_loss},
                    {"critic_loss", st.critic_loss},
                    {"bc_loss", st.bc_loss},
                    {"eval_success_rate", st.eval_success_rate}}
                   .dump() +
               "\n";
      timing += std::to_string(st.epoch) + "," + std::to_string(st.wall_time_s) + "\n";
      std::lock_guard lock(log_mu);
      err << "seed " << tc.seed << " epoch " << st.epoch + 1 << "/" << tc.epochs << " success "
          << st.eval_success_rate << " (" << std::fixed << std::setprecision(2) << st.wall_time_s << " s)\n"
          << std::defaultfloat;
    });
    const auto ckpt = dir / (stem + ".ckpt");
    save_checkpoint(ckpt, result.policy);
    write_text_file(dir / (stem + ".stats.jsonl"), stats);
    write_text_file(dir / (stem + ".timing.csv"), timing);
    const PolicyFn policy = LoadedPolicy::learned(result.policy).policy(cfg.board, cfg.episode);
    outcomes[i] = {tc.seed, evaluate_ranges(policy, cfg, a.eval_trials, a.eval_trials, a.eval_seed), ckpt.string()};
  };

  const std::size_t jobs = a.jobs > 0 ? static_cast<std::size_t>(a.jobs)
                                      : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  std::vector<std::exception_ptr> failures(a.seeds.size());
  for (std::size_t start = 0; start < a.seeds.size(); start += jobs) {
    std::vector<std::thread> workers;
    for (std::size_t i = start; i < std::min(a.seeds.size(), start + jobs); ++i)
      workers.emplace_back([&, i] {
        try {
          run_seed(i);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      });
    for (auto& w : workers) w.join();
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  // Best three seeds by overall success; ties keep the lower seed first.
  std::vector<SeedOutcome> ranked = outcomes;
  std::stable_sort(ranked.begin(), ranked.end(), [](const SeedOutcome& x, const SeedOutcome& y) {
    return x.report.all().rate() > y.report.all().rate();
  });
  ranked.resize(std::min<std::size_t>(3, ranked.size()));
  double mean_short = 0.0, mean_long = 0.0, mean_all = 0.0;
  Json best_seeds = Json::array();
  for (const auto& o : ranked) {
    mean_short += o.report.short_range.rate() / ranked.size();
    mean_long += o.report.long_range.rate() / ranked.size();
    mean_all += o.report.all().rate() / ranked.size();
    best_seeds.push_back(o.seed);
  }
  Json per_seed = Json::array();
  for (const auto& o : outcomes) {
    Json j = report_json(o.report);
    j["seed"] = o.seed;
    j["checkpoint"] = o.checkpoint;
    per_seed.push_back(std::move(j));
  }
  const Json summary{{"seeds", per_seed},
                     {"eval_trials_per_range", a.eval_trials},
                     {"eval_seed", a.eval_seed},
                     {"best3", {{"seeds", best_seeds}, {"short", mean_short}, {"long", mean_long}, {"all", mean_all}}}};
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");
  if (a.shared.json) {
    out << summary.dump() << '\n';
  } else {
    for (const auto& o : outcomes)
      out << "seed " << o.seed << ": short " << std::fixed << std::setprecision(3) << o.report.short_range.rate()
          << "  long " << o.report.long_range.rate() << "  all " << o.report.all().rate() << "  -> " << o.checkpoint
          << '\n';
    out << "best-3 mean: short " << mean_short << "  long " << mean_long << "  all " << mean_all << '\n'
        << std::defaultfloat;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  SharedFlags shared;
  std::string checkpoint;
  int n_short = 100;
  int n_long = 100;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.n_short < 0 || a.n_long < 0) throw UsageError("trial counts must be >= 0");
  if (a.n_short + a.n_long == 0) throw UsageError("at least one trial is required");
  const AppConfig cfg = load_app_config(a.shared);
  const LoadedPolicy loaded = LoadedPolicy::load(a.checkpoint);
  const EvalReport r = evaluate_ranges(loaded.policy(cfg.board, cfg.episode), cfg, a.n_short, a.n_long, a.seed);
  Json j = report_json(r);
  j["checkpoint"] = a.checkpoint;
  j["policy"] = loaded.is_scripted() ? "scripted" : "learned";
  j["seed"] = a.seed;
  if (!a.out.empty()) write_text_file(a.out, j.dump(2) + "\n");
  if (a.shared.json) out << j.dump() << '\n';
  else print_table(out, r);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
  SharedFlags shared;
  std::string clicks;
  std::string intrinsics;
  std::string out;
};

std::vector<Pixel> read_clicks(const std::string& path) {
  Json doc;
  try {
    doc = Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedFile, path + ": " + e.what());
  }
  const Json& list = doc.is_object() && doc.contains("clicks") ? doc["clicks"] : doc;
  if (!list.is_array()) throw Error(ErrorCode::MalformedFile, path + ": expected a list of clicks");
  std::vector<Pixel> clicks;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Json& c = list[i];
    try {
      if (c.is_array() && c.size() == 2) clicks.push_back({c[0].get<double>(), c[1].get<double>()});
      else if (c.is_object()) clicks.push_back({c.at("u").get<double>(), c.at("v").get<double>()});
      else throw Error(ErrorCode::MalformedFile, "");
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedFile, path + ": click " + std::to_string(i) + " must be [u, v] or {u, v}");
    }
  }
  return clicks;
}

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
  const AppConfig cfg = load_app_config(a.shared);
  CameraIntrinsics k = cfg.rig.intrinsics;
  if (!a.intrinsics.empty()) {
    Json doc;
    try {
      doc = Json::parse(read_text_file(a.intrinsics));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::MalformedFile, a.intrinsics + ": " + e.what());
    }
    k = intrinsics_from_json(doc.is_object() && doc.contains("intrinsics") ? doc["intrinsics"] : doc);
    try {
      k.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedFile, a.intrinsics + ": " + e.detail());
    }
  }
  const std::vector<Pixel> clicks = read_clicks(a.clicks);
  const auto& landmarks = cfg.board.peg_positions;
  if (clicks.size() < 3)
    throw UsageError("need at least 3 clicks (got " + std::to_string(clicks.size()) + ")");
  if (clicks.size() > landmarks.size())
    throw UsageError("at most " + std::to_string(landmarks.size()) + " clicks, one per peg top");
  CalibrationRecord rec;
  rec.intrinsics = k;
  for (std::size_t i = 0; i < clicks.size(); ++i) rec.correspondences.push_back({landmarks[i], clicks[i]});
  const PnpResult r = solve_pnp(k, rec.correspondences, cfg.pnp);
  rec.pose = r.pose;
  rec.rms_error_px = r.rms_error_px;
  rec.converged = r.converged;
  save_calibration(a.out, rec);
  if (a.shared.json) {
    out << Json{{"rms_error_px", r.rms_error_px},
                {"iterations", r.iterations},
                {"converged", r.converged},
                {"multi_solution_warning", r.multi_solution_warning},
                {"out", a.out}}
               .dump()
        << '\n';
  } else {
    out << "rms_error_px: " << std::setprecision(9) << r.rms_error_px << std::defaultfloat << '\n'
        << "iterations: " << r.iterations << (r.converged ? " (converged)" : " (not converged)") << '\n';
    if (r.multi_solution_warning)
      out << "warning: fewer than " << cfg.pnp.min_points << " points; the pose may be one of several solutions\n";
    out << "wrote " << a.out << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  SharedFlags shared;
  std::vector<int> counts{200, 1000, 2600, 5000};
  int repeats = 300;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_bench_overlay(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  if (a.repeats < 1) throw UsageError("--repeats must be >= 1");
  if (a.counts.empty()) throw UsageError("--counts needs at least one value");
  for (int n : a.counts)
    if (n < 1) throw UsageError("point counts must be >= 1");
  const AppConfig cfg = load_app_config(a.shared);
  const LatencyReport rep = bench_overlay_latency(a.counts, a.repeats, a.seed, cfg.rig, cfg.episode.workspace);
  if (!a.out.empty()) write_text_file(a.out, rep.to_csv());
  std::optional<double> realtime_ms;
  for (const auto& row : rep.rows)
    if (row.n_points == 2600) realtime_ms = row.mean_ms;
  if (a.shared.json) {
    Json rows = Json::array();
    for (const auto& r : rep.rows)
      rows.push_back({{"n_points", r.n_points}, {"mean_ms", r.mean_ms}, {"std_ms", r.std_ms}, {"repeats", r.repeats}});
    Json j{{"rows", rows}, {"monotone", rep.monotone()}};
    if (realtime_ms) j["realtime_2600"] = *realtime_ms <= 1000.0 / 30.0;
    out << j.dump() << '\n';
  } else {
    out << rep.to_csv();
    if (realtime_ms)
      out << "2600 points: " << std::fixed << std::setprecision(3) << *realtime_ms << " ms mean -> "
          << (*realtime_ms <= 1000.0 / 30.0 ? "real-time (>30 Hz) criterion holds" : "real-time criterion FAILS")
          << '\n'
          << std::defaultfloat;
  }
  if (!rep.monotone()) {
    err << "warning: mean latency is not monotone in the point count\n";
    return kExitData;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
  SharedFlags shared;
  std::string bind = "127.0.0.1:8765";
  bool stdio = false;
  std::string checkpoint;
  std::string log_dir;
  double tick_hz = 30.0;
  std::uint64_t seed = 1;
};

int cmd_serve(const ServeArgs& a, std::ostream& err, const std::atomic<bool>* stop) {
  const AppConfig cfg = load_app_config(a.shared);
  ServerOptions opts;
  const auto colon = a.bind.rfind(':');
  if (colon == std::string::npos) throw UsageError("--bind must look like HOST:PORT");
  opts.host = a.bind.substr(0, colon);
  try {
    std::size_t used = 0;
    opts.port = std::stoi(a.bind.substr(colon + 1), &used);
    if (used != a.bind.size() - colon - 1 || opts.port < 0 || opts.port > 65535) throw std::out_of_range("port");
  } catch (const std::exception&) {
    throw UsageError("invalid port in --bind " + a.bind);
  }
  if (opts.host.size() >= 2 && opts.host.front() == '[' && opts.host.back() == ']')
    opts.host = opts.host.substr(1, opts.host.size() - 2);
  if (!(a.tick_hz > 0.0)) throw UsageError("--tick-hz must be positive");
  opts.tick_hz = a.tick_hz;
  opts.seed = a.seed;
  if (!a.checkpoint.empty()) {
    LoadedPolicy::load(a.checkpoint);  // fail fast on a bad file
    opts.checkpoint = a.checkpoint;
  }
  if (!a.log_dir.empty()) opts.log_dir = a.log_dir;
  std::mutex log_mu;
  LogFn log = [&](const std::string& line) {
    std::lock_guard lock(log_mu);
    err << "[serve] " << line << '\n' << std::flush;
  };
  if (a.stdio) return serve_stream(cfg, opts, std::cin, std::cout, log);
  Server server(cfg, opts, log);
  server.listen();
  server.run(stop);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const std::atomic<bool>* stop) {
  CLI::App app{"Peg-transfer mentor: demonstrations, training, evaluation, calibration, overlay benchmark and service",
               "mentor"};
  app.require_subcommand(1);

  DemoGenArgs demo;
  auto* c_demo = app.add_subcommand("demo-gen", "Generate scripted demonstrations as an episode log");
  add_shared(c_demo, demo.shared);
  c_demo->add_option("--n", demo.n, "Number of episodes")->required();
  c_demo->add_option("--seed", demo.seed, "Random seed")->required();
  c_demo->add_option("--out", demo.out, "Output episode log (JSON lines)")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train one policy per seed from demonstrations");
  add_shared(c_train, tr.shared);
  c_train->add_option("--demos", tr.demos, "Demonstration episode log")->required();
  auto* seed_opt = c_train->add_option("--seeds,--seed", tr.seeds, "Training seeds (comma separated)")
                       ->delimiter(',')
                       ->required();
  (void)seed_opt;
  c_train->add_option("--out", tr.out_dir, "Output directory for checkpoints and statistics")->required();
  c_train->add_option("--eval-trials", tr.eval_trials, "Final evaluation episodes per range")->capture_default_str();
  c_train->add_option("--eval-seed", tr.eval_seed, "Seed of the final evaluation")->capture_default_str();
  c_train->add_option("--jobs", tr.jobs, "Seeds trained in parallel (default: all cores)");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint on short and long transfers");
  add_shared(c_eval, ev.shared);
  c_eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  c_eval->add_option("--n-short", ev.n_short, "Short-range trials")->capture_default_str();
  c_eval->add_option("--n-long", ev.n_long, "Long-range trials")->capture_default_str();
  c_eval->add_option("--seed", ev.seed, "Random seed")->required();
  c_eval->add_option("--out", ev.out, "Also write the JSON report here");

  CalibrateArgs cal;
  auto* c_cal = app.add_subcommand("calibrate", "Solve the camera pose from clicked peg tops");
  add_shared(c_cal, cal.shared);
  c_cal->add_option("--clicks", cal.clicks, "Clicks in landmark order: [[u, v], ...]")->required();
  c_cal->add_option("--intrinsics", cal.intrinsics, "Camera intrinsics (JSON); default from the configuration");
  c_cal->add_option("--out", cal.out, "Output calibration file")->required();

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench-overlay", "Measure overlay latency against point count");
  add_shared(c_bench, bench.shared);
  c_bench->add_option("--counts", bench.counts, "Point counts (comma separated)")->capture_default_str()->delimiter(',');
  c_bench->add_option("--repeats", bench.repeats, "Timed repeats per count")->capture_default_str();
  c_bench->add_option("--seed", bench.seed, "Random seed")->required();
  c_bench->add_option("--out", bench.out, "Write the latency table as CSV");

  ServeArgs sv;
  auto* c_serve = app.add_subcommand("serve", "Serve the console protocol");
  add_shared(c_serve, sv.shared);
  c_serve->add_option("--bind", sv.bind, "Listen address HOST:PORT")->capture_default_str();
  c_serve->add_flag("--stdio", sv.stdio, "Serve one session over stdin/stdout instead of TCP");
  c_serve->add_option("--checkpoint", sv.checkpoint, "Policy loaded into every session");
  c_serve->add_option("--log-dir", sv.log_dir, "Directory for per-session episode logs");
  c_serve->add_option("--tick-hz", sv.tick_hz, "Frame rate")->capture_default_str();
  c_serve->add_option("--seed", sv.seed, "First episode seed of each session")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_demo->parsed()) return cmd_demo_gen(demo, out);
    if (c_train->parsed()) return cmd_train(tr, out, err);
    if (c_eval->parsed()) return cmd_eval(ev, out);
    if (c_cal->parsed()) return cmd_calibrate(cal, out);
    if (c_bench->parsed()) return cmd_bench_overlay(bench, out, err);
    if (c_serve->parsed()) return cmd_serve(sv, err, stop);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace pegmentor
