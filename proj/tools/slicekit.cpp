// SPDX-License-Identifier: Apache-2.0
// slicekit: profile, benchmark, plan, prepare and run split models.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "slicekit/error.hpp"
#include "slicekit/offloader.hpp"

namespace fs = std::filesystem;
using namespace slicekit;

namespace {

struct Options {
  std::string model;
  std::string model_file;
  std::vector<std::string> nets;
  std::string bench;
  std::optional<int> split;
  std::optional<int> min_split;
  std::string variant = "both";
  std::uint64_t seed = 1;
  std::string out = ".";
  int reps = 0;
  std::string addr;
  double device_scale = 1.0;
};

LayerGraph load_graph(const Options& o) {
  if (!o.model_file.empty()) return load_model(o.model_file);
  if (o.model.empty()) throw InvalidArgument("one of --model or --model-file is required");
  return make_synthetic_model(o.model, o.seed);
}

// --net wins; SLICEKIT_NET_PROFILE fills in when it is absent.
NetworkProfile single_net(const Options& o) {
  if (o.nets.size() > 1) throw InvalidArgument("this command takes one --net");
  if (!o.nets.empty()) return netem::parse_profile(o.nets.front());
  const char* env = std::getenv(netem::kProfileEnvVar);
  if (env == nullptr || *env == '\0') {
    throw InvalidArgument(std::string("--net is required (or set ") + netem::kProfileEnvVar + ")");
  }
  return netem::parse_profile(env);
}

int required_split(const Options& o) {
  if (!o.split) throw InvalidArgument("--split is required");
  return *o.split;
}

Constraints constraints(const Options& o) {
  Constraints c;
  c.min_split_index = o.min_split;
  c.variant = parse_variant(o.variant);
  return c;
}

fs::path out_dir(const Options& o) {
  const fs::path d(o.out);
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw IoError("cannot create " + d.string() + ": " + ec.message());
  return d;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
  if (!f) throw IoError("cannot write " + p.string());
}

std::string file_stem(std::string id) {
  for (char& c : id) {
    if (c == '@' || c == '+' || c == '/') c = '_';
  }
  return id;
}

std::string split_label(int split) { return split < 0 ? "full" : std::to_string(split); }

// A graph that already carries a DeviceTL/EdgeTL pair, e.g. the output of
// insert-tl or train --split.
std::optional<TLModel> as_tl_model(const LayerGraph& g) {
  for (std::size_t i = 0; i + 1 < g.layers.size(); ++i) {
    if (std::holds_alternative<DeviceTL>(g.layers[i].kind) &&
        std::holds_alternative<EdgeTL>(g.layers[i + 1].kind)) {
      TLModel m;
      m.graph = g;
      m.split_index = static_cast<int>(i) - 1;
      m.base = g;
      m.base.layers.erase(m.base.layers.begin() + static_cast<std::ptrdiff_t>(i),
                          m.base.layers.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      const auto dot = m.base.name.rfind(".tl");
      if (dot != std::string::npos) m.base.name.resize(dot);
      return m;
    }
  }
  return std::nullopt;
}

Deployment deployment_for(const LayerGraph& g, int split, Variant v) {
  if (auto tl = as_tl_model(g)) {
    if (v != Variant::kTL) throw InvalidArgument("model already carries a transfer layer; use --variant tl");
    if (tl->split_index != split) {
      throw SplitMismatch("model has its transfer layer after unit " + std::to_string(tl->split_index) +
                          ", --split is " + std::to_string(split));
    }
    return make_deployment(*tl);
  }
  return make_deployment(g, split, v);
}

// ---------------------------------------------------------------------------
// Experiment comparison: planned vs measured per deployment.

struct ComparisonRow {
  int split = 0;
  std::string variant;
  std::string deployment;
  std::int64_t planned_us = 0;
  std::optional<std::int64_t> planned_dt_us;
  double measured_us = 0;
  double p95_us = 0;
  std::optional<double> measured_dt_us;
};

const char* kComparisonHeader =
    "split,variant,deployment,planned_us,measured_us,p95_us,planned_dt_us,measured_dt_us";

std::string format_comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << kComparisonHeader << '\n' << std::fixed << std::setprecision(0);
  for (const auto& r : rows) {
    os << r.split << ',' << r.variant << ',' << r.deployment << ',' << r.planned_us << ','
       << r.measured_us << ',' << r.p95_us << ',';
    if (r.planned_dt_us) os << *r.planned_dt_us;
    os << ',';
    if (r.measured_dt_us) os << *r.measured_dt_us;
    os << '\n';
  }
  return os.str();
}

std::vector<ComparisonRow> parse_comparison_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kComparisonHeader) {
    throw ParseError("experiment summary: unexpected header");
  }
  std::vector<ComparisonRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() == 7) f.emplace_back();
    if (f.size() != 8) throw ParseError("experiment summary line " + std::to_string(line_no) + ": expected 8 fields");
    try {
      ComparisonRow r;
      r.split = std::stoi(f[0]);
      r.variant = f[1];
      r.deployment = f[2];
      r.planned_us = std::stoll(f[3]);
      r.measured_us = std::stod(f[4]);
      r.p95_us = std::stod(f[5]);
      if (!f[6].empty()) r.planned_dt_us = std::stoll(f[6]);
      if (!f[7].empty()) r.measured_dt_us = std::stod(f[7]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw ParseError("experiment summary line " + std::to_string(line_no) + ": bad number");
    }
  }
  return rows;
}

std::string format_comparison_table(const std::vector<ComparisonRow>& rows, const std::string& title) {
  std::ostringstream os;
  os << "# " << title << '\n';
  os << "# measured totals include result return; the return path adds no emulated delay\n";
  os << std::left << std::setw(7) << "split" << std::setw(7) << "variant" << std::right
     << std::setw(12) << "planned_us" << std::setw(13) << "measured_us" << std::setw(8) << "err%"
     << std::setw(11) << "p95_us" << std::setw(15) << "planned_dt_us" << std::setw(16)
     << "measured_dt_us" << '\n';
  os << std::fixed;
  for (const auto& r : rows) {
    const double err = r.planned_us > 0 ? 100.0 * (r.measured_us - static_cast<double>(r.planned_us)) /
                                              static_cast<double>(r.planned_us)
                                        : 0.0;
    os << std::left << std::setw(7) << split_label(r.split) << std::setw(7) << r.variant << std::right
       << std::setw(12) << r.planned_us << std::setprecision(0) << std::setw(13) << r.measured_us
       << std::setprecision(1) << std::setw(8) << err << std::setprecision(0) << std::setw(11)
       << r.p95_us << std::setw(15) << (r.planned_dt_us ? std::to_string(*r.planned_dt_us) : "-");
    if (r.measured_dt_us) {
      os << std::setw(16) << *r.measured_dt_us;
    } else {
      os << std::setw(16) << "-";
    }
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Commands

int cmd_profile(const Options& o) {
  const LayerGraph g = load_graph(o);
  std::cout << "# split points of " << g.name << " (input " << g.input_shape.str() << ", "
            << g.size() << " units)\n";
  std::cout << std::left << std::setw(7) << "split" << std::setw(13) << "kind" << std::setw(14)
            << "output" << std::right << std::setw(10) << "bytes" << std::setw(13) << "tl_eligible"
            << '\n';
  for (const auto& sp : enumerate_split_points(g)) {
    const bool transfers = sp.kind != SplitKind::kLocalOnly;
    std::cout << std::left << std::setw(7) << split_label(sp.index) << std::setw(13)
              << split_kind_name(sp.kind) << std::setw(14) << sp.output_shape.str() << std::right
              << std::setw(10) << (transfers ? sp.output_bytes : 0) << std::setw(13)
              << (sp.tl_eligible && transfers ? "yes" : "no") << '\n';
  }
  return 0;
}

BenchmarkSet run_bench(const LayerGraph& g, const Options& o, int reps) {
  return benchmark_model(g, ResourceProfile{"device", o.device_scale}, ResourceProfile{"edge", 1.0},
                         random_input(g.input_shape, o.seed), reps);
}

int cmd_bench(const Options& o) {
  const LayerGraph g = load_graph(o);
  const BenchmarkSet set = run_bench(g, o, o.reps > 0 ? o.reps : kMinRepetitions);
  const fs::path p = out_dir(o) / (g.name + ".bench.txt");
  save_records(set, p);
  std::cout << format_records(set) << "wrote " << p.string() << '\n';
  return 0;
}

int cmd_plan(const Options& o) {
  if (o.bench.empty()) throw InvalidArgument("--bench is required");
  const BenchmarkSet set = load_records(o.bench);
  if (o.nets.size() > 1) {
    std::vector<NetworkProfile> grid;
    for (const auto& n : o.nets) grid.push_back(netem::parse_profile(n));
    std::cout << format_sweep_table(sweep(set, grid, constraints(o)));
    return 0;
  }
  const RankedPlan plan = rank(set, single_net(o), constraints(o), fs::path(o.bench).filename().string());
  std::cout << format_plan_table(plan);
  if (o.out != ".") {
    const fs::path p = out_dir(o) / "plan.csv";
    write_file(p, format_plan_csv(plan));
    std::cout << "wrote " << p.string() << '\n';
  }
  return 0;
}

int cmd_report(const Options& o) {
  bool printed = false;
  if (!o.bench.empty()) {
    const BenchmarkSet set = load_records(o.bench);
    std::cout << format_plan_table(
        rank(set, single_net(o), constraints(o), fs::path(o.bench).filename().string()));
    printed = true;
  }
  const fs::path summary = fs::path(o.out) / "experiment.csv";
  if (fs::exists(summary)) {
    std::ifstream f(summary);
    const std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    std::cout << format_comparison_table(parse_comparison_csv(text), "experiment " + summary.string());
    printed = true;
  }
  if (!printed) throw InvalidArgument("nothing to report: give --bench or an --out holding experiment.csv");
  return 0;
}

int cmd_insert_tl(const Options& o) {
  const LayerGraph g = load_graph(o);
  TLModel m = insert_tl(g, required_split(o));
  const fs::path p = save_model(m.graph, out_dir(o), m.graph.name);
  std::cout << "wrote " << p.string() << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  LayerGraph g = load_graph(o);
  const ToyDataset data = make_toy_dataset(o.seed, 4, 250);
  TrainConfig cfg;
  cfg.seed = o.seed;
  std::vector<EpochLog> log;
  if (o.split) {
    const double before = accuracy(g, data.validation);
    const TLModel tl = as_tl_model(g) ? *as_tl_model(g) : insert_tl(g, *o.split);
    const double untrained = accuracy(tl.graph, data.validation);
    RetrainResult r = retrain(tl, data, cfg);
    g = r.model.graph;
    log = std::move(r.log);
    std::cout << "base validation accuracy " << before << ", with untrained TL " << untrained << '\n';
  } else {
    log = train(g, data, cfg);
  }
  const fs::path dir = out_dir(o);
  const fs::path model_path = save_model(g, dir, g.name);
  write_file(dir / (g.name + ".train.csv"), format_training_log(log));
  std::cout << format_training_log(log) << "final validation accuracy "
            << log.back().validation_accuracy << "\nwrote " << model_path.string() << '\n';
  return 0;
}

int cmd_split(const Options& o) {
  const LayerGraph g = load_graph(o);
  const VariantSelection sel = parse_variant(o.variant == "both" ? "no-tl" : o.variant);
  const Variant v = sel == VariantSelection::kTL ? Variant::kTL : Variant::kNoTL;
  Deployment d = deployment_for(g, required_split(o), v);
  const fs::path dir = out_dir(o);
  const std::string stem = file_stem(d.model_id);
  d.head.name = d.model_id;
  std::cout << "wrote " << save_model(d.head, dir, stem + ".head").string() << '\n';
  if (d.offloads()) {
    d.tail.name = d.model_id;
    std::cout << "wrote " << save_model(d.tail, dir, stem + ".tail").string() << '\n';
  }
  return 0;
}

std::atomic<bool> g_stop_requested{false};

int cmd_serve_edge(const Options& o) {
  if (o.model_file.empty()) throw InvalidArgument("--model-file (a tail model) is required");
  const LayerGraph tail = load_model(o.model_file);
  const int split = required_split(o);
  EdgeServer server;
  server.add_model(tail.name, EdgeModel{tail, split});

  // Signals are handled on a dedicated thread so stop() never runs inside a
  // signal handler.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  const auto port = server.start(net::parse_endpoint(o.addr.empty() ? "127.0.0.1:7070" : o.addr));
  std::cout << "serving " << tail.name << " (split " << split_label(split) << ") on port " << port
            << std::endl;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  server.wait();
  waiter.join();
  std::cout << "served " << server.requests_served() << " requests\n";
  return 0;
}

int cmd_run_device(const Options& o) {
  if (o.model_file.empty()) throw InvalidArgument("--model-file (a head model) is required");
  const LayerGraph head = load_model(o.model_file);
  const int split = required_split(o);
  Deployment d;
  d.model_id = head.name;
  d.split_index = split;
  d.head = head;
  d.whole = head;
  d.variant = !head.layers.empty() && std::holds_alternative<DeviceTL>(head.layers.back().kind)
                  ? Variant::kTL
                  : Variant::kNoTL;
  d.kind = o.addr.empty() ? SplitKind::kLocalOnly
                          : (split < 0 ? SplitKind::kFullOffload : SplitKind::kInterior);
  const NetworkProfile net = o.addr.empty() ? unlimited_profile() : single_net(o);
  std::optional<net::Endpoint> edge;
  if (!o.addr.empty()) edge = net::parse_endpoint(o.addr);
  DeviceClient client(d, DeviceConfig{ResourceProfile{"device", o.device_scale}, netem::LinkShaper{net}}, edge);
  const ExperimentSummary s = run_experiment(client, net, std::max(o.reps, kMinExperimentRequests), o.seed);
  std::cout << format_experiment_table({s});
  if (o.out != ".") {
    const fs::path p = out_dir(o) / (file_stem(d.model_id) + ".requests.csv");
    write_file(p, format_request_log(s));
    std::cout << "wrote " << p.string() << '\n';
  }
  return 0;
}

int cmd_experiment(const Options& o) {
  const LayerGraph g = load_graph(o);
  const NetworkProfile net = single_net(o);
  const int n = std::max(o.reps, kMinExperimentRequests);
  const BenchmarkSet set = run_bench(g, o, n);
  Constraints c = constraints(o);
  RankedPlan plan = rank(set, net, c, g.name);
  if (o.split) {
    std::erase_if(plan.entries, [&](const CostBreakdown& e) { return e.split_index != *o.split; });
    if (plan.entries.empty()) throw NoFeasiblePlan("no candidate at split " + std::to_string(*o.split));
  }

  const ResourceProfile device{"device", o.device_scale};
  EdgeServer server;
  std::vector<Deployment> deployments;
  for (const auto& e : plan.entries) {
    deployments.push_back(make_deployment(g, e.split_index, e.variant));
    server.add(deployments.back());
  }
  const net::Endpoint edge{"127.0.0.1", server.start({"127.0.0.1", 0})};

  std::vector<ExperimentSummary> runs;
  std::vector<ComparisonRow> rows;
  std::map<int, double> no_tl_median;
  for (std::size_t i = 0; i < plan.entries.size(); ++i) {
    const Deployment& d = deployments[i];
    std::optional<net::Endpoint> ep;
    if (d.offloads()) ep = edge;
    DeviceClient client(d, DeviceConfig{device, netem::LinkShaper{net}}, ep);
    runs.push_back(run_experiment(client, net, n, o.seed + i));
    const CostBreakdown& e = plan.entries[i];
    rows.push_back({e.split_index, variant_name(e.variant), d.model_id, e.total_us, e.delta_t_us,
                    runs.back().median_us, runs.back().p95_us, std::nullopt});
    if (e.variant == Variant::kNoTL) no_tl_median[e.split_index] = runs.back().median_us;
  }
  server.stop();
  for (auto& r : rows) {
    const auto it = no_tl_median.find(r.split);
    if (r.variant == "tl" && it != no_tl_median.end()) r.measured_dt_us = it->second - r.measured_us;
  }
  std::sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    return a.split != b.split ? a.split < b.split : a.variant > b.variant;
  });

  std::cout << format_plan_table(plan) << '\n'
            << format_experiment_table(runs) << '\n'
            << format_comparison_table(rows, "plan vs measurement for " + g.name + " over " + net.str());
  if (o.out != ".") {
    const fs::path dir = out_dir(o);
    save_records(set, dir / (g.name + ".bench.txt"));
    write_file(dir / "plan.csv", format_plan_csv(plan));
    write_file(dir / "experiment.csv", format_comparison_csv(rows));
    fs::create_directories(dir / "requests");
    for (const auto& s : runs) {
      write_file(dir / "requests" / (file_stem(s.model_id) + ".csv"), format_request_log(s));
    }
    std::cout << "wrote " << (dir / "experiment.csv").string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slicekit: split computing toolkit"};
  app.require_subcommand(1);
  Options o;

  auto add_model = [&](CLI::App* sub) {
    auto* m = sub->add_option("--model", o.model, "builtin model (tiny-cnn-8, branchy-12, deep-20)");
    auto* f = sub->add_option("--model-file", o.model_file, "model text file");
    m->excludes(f);
    sub->add_option("--seed", o.seed, "seed for weights, inputs and datasets");
  };
  auto add_net = [&](CLI::App* sub) {
    sub->add_option("--net", o.nets, "network profile, e.g. 57mbps/28ms or unlimited");
  };
  auto add_constraints = [&](CLI::App* sub) {
    sub->add_option("--min-split", o.min_split, "lowest split index allowed");
    sub->add_option("--variant", o.variant, "tl, no-tl or both");
  };
  auto add_scale = [&](CLI::App* sub) {
    sub->add_option("--device-scale", o.device_scale, "device slowdown factor (>= 1)");
  };

  auto* profile = app.add_subcommand("profile", "list split points and TL eligibility");
  add_model(profile);

  auto* bench = app.add_subcommand("bench", "benchmark every split point");
  add_model(bench);
  add_scale(bench);
  bench->add_option("--reps", o.reps, "timed repetitions (>= 20)");
  bench->add_option("--out", o.out, "output directory");

  auto* plan = app.add_subcommand("plan", "rank split points from saved benchmark records");
  plan->add_option("--bench", o.bench, "benchmark records file");
  add_net(plan);
  add_constraints(plan);
  plan->add_option("--out", o.out, "directory for plan.csv");

  auto* insert = app.add_subcommand("insert-tl", "insert the transfer layer pair at a split");
  add_model(insert);
  insert->add_option("--split", o.split, "split index");
  insert->add_option("--out", o.out, "output directory");

  auto* trainer = app.add_subcommand("train", "train on the toy dataset; with --split, retrain a TL model");
  add_model(trainer);
  trainer->add_option("--split", o.split, "insert the TL here before training");
  trainer->add_option("--out", o.out, "output directory");

  auto* splitter = app.add_subcommand("split", "export head and tail models");
  add_model(splitter);
  splitter->add_option("--split", o.split, "split index (-1 = full offload)");
  splitter->add_option("--variant", o.variant, "tl or no-tl");
  splitter->add_option("--out", o.out, "output directory");

  auto* serve = app.add_subcommand("serve-edge", "serve a tail model until SIGINT/SIGTERM");
  serve->add_option("--model-file", o.model_file, "tail model file");
  serve->add_option("--split", o.split, "split index the tail expects");
  serve->add_option("--addr", o.addr, "listen address host:port");

  auto* device = app.add_subcommand("run-device", "run a head model against an edge server");
  device->add_option("--model-file", o.model_file, "head model file");
  device->add_option("--split", o.split, "split index");
  device->add_option("--addr", o.addr, "edge address host:port; omit for local-only");
  add_net(device);
  add_scale(device);
  device->add_option("--reps", o.reps, "number of requests (>= 30)");
  device->add_option("--seed", o.seed, "input seed");
  device->add_option("--out", o.out, "directory for the request log");

  auto* experiment = app.add_subcommand("experiment", "bench, plan and measure every plan against a local edge");
  add_model(experiment);
  add_net(experiment);
  add_constraints(experiment);
  add_scale(experiment);
  experiment->add_option("--split", o.split, "only measure this split");
  experiment->add_option("--reps", o.reps, "benchmark repetitions and requests per plan (>= 30)");
  experiment->add_option("--out", o.out, "output directory");

  auto* report = app.add_subcommand("report", "rebuild tables from saved records and summaries");
  report->add_option("--bench", o.bench, "benchmark records file");
  add_net(report);
  add_constraints(report);
  report->add_option("--out", o.out, "directory holding experiment.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*profile) return cmd_profile(o);
    if (*bench) return cmd_bench(o);
    if (*plan) return cmd_plan(o);
    if (*insert) return cmd_insert_tl(o);
    if (*trainer) return cmd_train(o);
    if (*splitter) return cmd_split(o);
    if (*serve) return cmd_serve_edge(o);
    if (*device) return cmd_run_device(o);
    if (*experiment) return cmd_experiment(o);
    if (*report) return cmd_report(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
