// butterfly: command-line front end over the C API.
//
// Exit status: 0 when every reported check passes, 1 when a check fails,
// 2 on usage or runtime errors.

#include "butterfly/butterfly.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(bfly_status st) {
  if (st != BFLY_OK) throw CliError(std::string(bfly_status_name(st)) + ": " + bfly_last_error());
}

struct StringDeleter {
  void operator()(bfly_string* s) const { bfly_string_free(s); }
};
using String = std::unique_ptr<bfly_string, StringDeleter>;

struct ScheduleDeleter {
  void operator()(bfly_schedule* s) const { bfly_schedule_destroy(s); }
};
using ScheduleHandle = std::unique_ptr<bfly_schedule, ScheduleDeleter>;

struct HmmDeleter {
  void operator()(bfly_hmm* h) const { bfly_hmm_destroy(h); }
};
using HmmHandle = std::unique_ptr<bfly_hmm, HmmDeleter>;

std::string take(bfly_string* raw) {
  String s(raw);
  return std::string(bfly_string_data(s.get()), bfly_string_size(s.get()));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError("cannot write " + path);
  out << text;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw CliError("not a number: '" + item + "'");
    }
  }
  return out;
}

struct ScheduleArgs {
  std::string family = "radix";
  std::size_t r = 2;
  std::size_t m = 3;
  std::size_t c = 4;
  std::size_t n = 8;

  void add(CLI::App* app) {
    app->add_option("--family", family, "multinomial | radix | mixed")->capture_default_str();
    app->add_option("--r", r, "radix r")->capture_default_str();
    app->add_option("--m", m, "stages (radix)")->capture_default_str();
    app->add_option("--c", c, "width c (mixed)")->capture_default_str();
    app->add_option("--n", n, "population size (multinomial)")->capture_default_str();
  }

  ScheduleHandle build() const {
    bfly_schedule* raw = nullptr;
    if (family == "multinomial" || family == "bpf") {
      check(bfly_schedule_create(BFLY_MULTINOMIAL, n, 0, &raw));
    } else if (family == "radix") {
      check(bfly_schedule_create(BFLY_RADIX, r, m, &raw));
    } else if (family == "mixed") {
      check(bfly_schedule_create(BFLY_MIXED_RADIX, r, c, &raw));
    } else {
      throw CliError("unknown family '" + family + "'");
    }
    return ScheduleHandle(raw);
  }
};

std::size_t population(const bfly_schedule* s) {
  std::size_t n = 0;
  check(bfly_schedule_info(s, nullptr, nullptr, nullptr, &n, nullptr));
  return n;
}

// "identity" (1-based index), "indicator:k", "constant:c" or a comma list.
std::vector<double> input_function(const std::string& spec, std::size_t n) {
  std::vector<double> out;
  if (spec == "identity") {
    for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<double>(i + 1));
  } else if (spec.rfind("indicator:", 0) == 0) {
    const auto k = std::stoul(spec.substr(10));
    if (k < 1 || k > n) throw CliError("indicator index outside [1, N]");
    out.assign(n, 0.0);
    out[k - 1] = 1.0;
  } else if (spec.rfind("constant:", 0) == 0) {
    out.assign(n, std::stod(spec.substr(9)));
  } else {
    out = parse_list(spec.rfind("values:", 0) == 0 ? spec.substr(7) : spec);
  }
  if (out.size() != n) throw CliError("function needs " + std::to_string(n) + " values");
  return out;
}

HmmHandle load_model(const std::string& path) {
  bfly_hmm* raw = nullptr;
  check(bfly_hmm_from_json(read_file(path).c_str(), &raw));
  return HmmHandle(raw);
}

std::vector<double> load_observations(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
    const json& arr = j.is_object() ? j.at("observations") : j;
    return arr.get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw CliError(path + ": " + e.what());
  }
}

int run_experiment(const std::string& kind, const std::string& config_path, std::size_t threads,
                   const std::string& csv, const std::string& summary, bool quiet) {
  json cfg;
  try {
    cfg = json::parse(read_file(config_path));
  } catch (const json::exception& e) {
    throw CliError(config_path + ": " + e.what());
  }
  if (threads) cfg["threads"] = threads;
  if (!csv.empty()) cfg["output"]["csv"] = csv;
  if (!summary.empty()) cfg["output"]["json"] = summary;
  const auto dir = std::filesystem::path(config_path).parent_path().string();
  bfly_string* csv_out = nullptr;
  bfly_string* summary_out = nullptr;
  int all_pass = 0;
  check(bfly_experiment(kind.c_str(), cfg.dump().c_str(), dir.empty() ? "." : dir.c_str(), &csv_out,
                        &summary_out, &all_pass));
  const std::string csv_text = take(csv_out);
  const std::string summary_text = take(summary_out);
  if (csv.empty() && !quiet) std::cout << csv_text;
  if (summary.empty()) std::cerr << summary_text << '\n';
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"butterfly resampling toolkit"};
  app.set_version_flag("--version", std::string(bfly_version()));
  app.require_subcommand(1);

  int status = 0;

  // verify
  ScheduleArgs verify_args;
  bool exact = true;
  auto* verify = app.add_subcommand("verify", "check matrix assumptions exactly");
  verify_args.add(verify);
  verify->add_flag("--exact", exact, "rational arithmetic (always on)");
  verify->callback([&] {
    const auto s = verify_args.build();
    bfly_string* out = nullptr;
    int ok = 0;
    check(bfly_schedule_verify(s.get(), &ok, &out));
    write_output("", take(out));
    status = ok ? 0 : 1;
  });

  // row
  ScheduleArgs row_args;
  std::size_t stage = 1, index = 1;
  auto* row = app.add_subcommand("row", "print one stage row (1-based index)");
  row_args.add(row);
  row->add_option("--stage", stage, "stage k")->required();
  row->add_option("--index", index, "row i, 1-based")->required();
  row->callback([&] {
    const auto s = row_args.build();
    if (index < 1) throw CliError("index is 1-based");
    bfly_string* out = nullptr;
    check(bfly_schedule_row_json(s.get(), stage, index - 1, &out));
    write_output("", take(out));
  });

  // sets
  ScheduleArgs sets_args;
  std::size_t set_index = 1;
  auto* sets = app.add_subcommand("sets", "P/K/C/Q tables for one particle");
  sets_args.add(sets);
  sets->add_option("--index", set_index, "particle, 1-based")->required();
  sets->callback([&] {
    const auto s = sets_args.build();
    if (set_index < 1) throw CliError("index is 1-based");
    bfly_string* out = nullptr;
    check(bfly_sets_json(s.get(), set_index - 1, &out));
    const std::string text = take(out);
    write_output("", text);
    const json j = json::parse(text);
    status = j.value("brute_force_agrees", true) ? 0 : 1;
  });

  // stats
  ScheduleArgs stats_args;
  auto* stats = app.add_subcommand("stats", "edge statistics of the dependency graph");
  stats_args.add(stats);
  stats->callback([&] {
    const auto s = stats_args.build();
    bfly_string* out = nullptr;
    check(bfly_edge_stats_json(s.get(), &out));
    const std::string text = take(out);
    write_output("", text);
    status = json::parse(text).at("agree").get<bool>() ? 0 : 1;
  });

  // partition
  ScheduleArgs part_args;
  std::size_t d = 1;
  auto* partition = app.add_subcommand("partition", "block partition for depth d");
  part_args.add(partition);
  partition->add_option("--d", d, "depth d")->required();
  partition->callback([&] {
    const auto s = part_args.build();
    bfly_string* out = nullptr;
    check(bfly_partition_json(s.get(), d, &out));
    const std::string text = take(out);
    write_output("", text);
    status = json::parse(text).at("structure_holds").get<bool>() ? 0 : 1;
  });

  // model
  std::string builtin = "binary_symmetric";
  double flip = 0.1, confusion = 0.25;
  std::size_t model_states = 3, model_symbols = 2;
  std::uint64_t model_seed = 1;
  auto* model = app.add_subcommand("model", "print a built-in model as JSON");
  model->add_option("--builtin", builtin, "binary_symmetric | random")->capture_default_str();
  model->add_option("--p", flip, "flip probability")->capture_default_str();
  model->add_option("--q", confusion, "emission confusion")->capture_default_str();
  model->add_option("--states", model_states, "states (random)")->capture_default_str();
  model->add_option("--symbols", model_symbols, "symbols (random)")->capture_default_str();
  model->add_option("--seed", model_seed, "seed (random)")->capture_default_str();
  model->callback([&] {
    bfly_hmm* raw = nullptr;
    if (builtin == "binary_symmetric") {
      check(bfly_hmm_binary_symmetric(flip, confusion, &raw));
    } else if (builtin == "random") {
      check(bfly_hmm_random(model_states, model_symbols, model_seed, &raw));
    } else {
      throw CliError("unknown builtin '" + builtin + "'");
    }
    HmmHandle h(raw);
    bfly_string* out = nullptr;
    check(bfly_hmm_to_json(h.get(), &out));
    write_output("", take(out));
  });

  // simulate
  std::string sim_model;
  std::size_t sim_horizon = 5;
  std::uint64_t sim_seed = 0;
  auto* simulate = app.add_subcommand("simulate", "simulate states and observations");
  simulate->add_option("--model", sim_model, "model JSON")->required();
  simulate->add_option("--T", sim_horizon, "horizon")->capture_default_str();
  simulate->add_option("--seed", sim_seed, "seed")->capture_default_str();
  simulate->callback([&] {
    const auto h = load_model(sim_model);
    bfly_string* out = nullptr;
    check(bfly_simulate_json(h.get(), sim_horizon, sim_seed, &out));
    write_output("", take(out));
  });

  // exact-filter
  std::string ef_model, ef_obs;
  auto* exact_filter = app.add_subcommand("exact-filter", "exact predictor and filter as CSV");
  exact_filter->add_option("--model", ef_model, "model JSON")->required();
  exact_filter->add_option("--obs", ef_obs, "observations JSON")->required();
  exact_filter->callback([&] {
    const auto h = load_model(ef_model);
    const auto obs = load_observations(ef_obs);
    bfly_string* out = nullptr;
    check(bfly_exact_filter_csv(h.get(), obs.data(), obs.size(), &out));
    write_output("", take(out));
  });

  // variance
  std::string var_model, var_obs, var_phi = "indicator:1", var_flavor = "all";
  std::size_t var_r = 2;
  auto* variance = app.add_subcommand("variance", "asymptotic variance recursions as CSV");
  variance->add_option("--model", var_model, "model JSON")->required();
  variance->add_option("--obs", var_obs, "observations JSON")->required();
  variance->add_option("--phi", var_phi, "test function")->capture_default_str();
  variance->add_option("--r", var_r, "radix r")->capture_default_str();
  variance->add_option("--flavor", var_flavor, "bpf | radix | mixed | all")->capture_default_str();
  variance->callback([&] {
    const auto h = load_model(var_model);
    const auto obs = load_observations(var_obs);
    bfly_string* out = nullptr;
    check(bfly_variance_csv(h.get(), obs.data(), obs.size(), var_phi.c_str(), var_r, var_flavor.c_str(), &out));
    write_output("", take(out));
  });

  // filter
  ScheduleArgs filter_args;
  std::string filter_model, filter_obs, keep_particles;
  std::vector<std::string> filter_phi{"indicator:1"};
  std::size_t filter_horizon = 5;
  std::uint64_t filter_seed = 0;
  auto* filter = app.add_subcommand("filter", "run one particle filter, per-step CSV");
  filter_args.add(filter);
  filter->add_option("--model", filter_model, "model JSON")->required();
  filter->add_option("--obs", filter_obs, "observations JSON")->required();
  filter->add_option("--T", filter_horizon, "horizon")->capture_default_str();
  filter->add_option("--phi", filter_phi, "test functions")->capture_default_str();
  filter->add_option("--seed", filter_seed, "master seed")->capture_default_str();
  filter->add_option("--keep-particles", keep_particles, "write final-step particles to this CSV file");
  filter->callback([&] {
    const auto h = load_model(filter_model);
    const auto obs = load_observations(filter_obs);
    const auto s = filter_args.build();
    std::vector<const char*> phis;
    for (const auto& p : filter_phi) phis.push_back(p.c_str());
    bfly_string* out = nullptr;
    bfly_string* particles = nullptr;
    check(bfly_filter_csv(h.get(), obs.data(), obs.size(), s.get(), filter_horizon, phis.data(), phis.size(),
                          filter_seed, &out, keep_particles.empty() ? nullptr : &particles));
    write_output("", take(out));
    if (!keep_particles.empty()) write_output(keep_particles, take(particles));
  });

  // resample-once
  ScheduleArgs once_args;
  std::string once_weights;
  std::uint64_t once_seed = 0;
  auto* once = app.add_subcommand("resample-once", "one augmented resampling call, trace as JSON");
  once_args.add(once);
  once->add_option("--weights", once_weights, "comma-separated positive weights")->required();
  once->add_option("--seed", once_seed, "seed")->capture_default_str();
  once->callback([&] {
    const auto s = once_args.build();
    const auto w = parse_list(once_weights);
    if (w.size() != population(s.get())) throw CliError("need one weight per particle");
    bfly_string* out = nullptr;
    check(bfly_resample_trace_json(s.get(), w.data(), once_seed, &out));
    write_output("", take(out));
  });

  // bias
  ScheduleArgs bias_args;
  std::string bias_weights, bias_phi = "identity", bias_config, bias_csv, bias_json;
  std::uint64_t bias_seed = 0;
  std::size_t bias_reps = 10000, bias_threads = 0;
  bool bias_exact = false;
  auto* bias = app.add_subcommand("bias", "lack-of-bias check (fixed inputs or --config experiment)");
  bias_args.add(bias);
  bias->add_option("--weights", bias_weights, "comma-separated input weights");
  bias->add_option("--phi", bias_phi, "function of the input index")->capture_default_str();
  bias->add_option("--seed", bias_seed, "seed")->capture_default_str();
  bias->add_option("--replicates", bias_reps, "Monte Carlo replicates")->capture_default_str();
  bias->add_flag("--exact", bias_exact, "exact enumeration oracle");
  bias->add_option("--config", bias_config, "experiment config JSON");
  bias->add_option("--threads", bias_threads, "worker threads");
  bias->add_option("--csv", bias_csv, "CSV output path");
  bias->add_option("--json", bias_json, "summary output path");
  bias->callback([&] {
    if (!bias_config.empty()) {
      status = run_experiment("bias", bias_config, bias_threads, bias_csv, bias_json, false);
      return;
    }
    if (bias_weights.empty()) throw CliError("--weights or --config is required");
    const auto s = bias_args.build();
    const std::size_t n = population(s.get());
    const auto w = parse_list(bias_weights);
    if (w.size() != n) throw CliError("need one weight per particle");
    const auto phi = input_function(bias_phi, n);
    double lhs = 0, rhs = 0, se = 0;
    check(bfly_lack_of_bias(s.get(), w.data(), phi.data(), bias_exact ? 1 : 0, bias_seed, bias_reps, &lhs, &rhs,
                            &se));
    const double diff = std::abs(lhs - rhs);
    const bool ok = bias_exact ? diff <= 1e-12 : diff <= 4.0 * se;
    json j = {{"lhs", lhs}, {"rhs", rhs}, {"se", se}, {"abs_diff", diff}, {"exact", bias_exact}, {"pass", ok}};
    write_output("", j.dump(2));
    status = ok ? 0 : 1;
  });

  // experiments driven by a config file
  struct ExperimentArgs {
    std::string config, csv, json;
    std::size_t threads = 0;
    bool quiet = false;
  };
  std::vector<std::pair<std::string, std::unique_ptr<ExperimentArgs>>> experiments;
  for (const auto& [name, help] : {std::pair{"clt", "CLT variance-scaling experiment"},
                                   std::pair{"moments", "sub-population moment decay experiment"},
                                   std::pair{"lln", "LLN error-rate experiment"}}) {
    auto args = std::make_unique<ExperimentArgs>();
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", args->config, "experiment config JSON")->required();
    sub->add_option("--threads", args->threads, "worker threads (overrides config)");
    sub->add_option("--csv", args->csv, "CSV output path (overrides config)");
    sub->add_option("--json", args->json, "summary output path (overrides config)");
    sub->add_flag("--quiet", args->quiet, "do not print the CSV");
    ExperimentArgs* a = args.get();
    const std::string kind = name;
    sub->callback([&status, a, kind] { status = run_experiment(kind, a->config, a->threads, a->csv, a->json, a->quiet); });
    experiments.emplace_back(name, std::move(args));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return status;
}
