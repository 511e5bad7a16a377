#include "butterfly/config.hpp"

#include "butterfly/error.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace butterfly {

namespace {

using nlohmann::json;

template <class T>
T get(const json& j, const char* key) {
  require(j.contains(key), ErrorCode::Parse, std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("bad value for '") + key + "': " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? get<T>(j, key) : fallback;
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

}  // namespace

FiniteHmm model_from_json(const json& j) {
  require(j.is_object(), ErrorCode::Parse, "model must be a JSON object");
  if (j.contains("builtin")) {
    const auto name = get<std::string>(j, "builtin");
    if (name == "binary_symmetric") return binary_symmetric(get<double>(j, "p"), get<double>(j, "q"));
    if (name == "random") {
      return random_instance(get<std::size_t>(j, "states"), get_or<std::size_t>(j, "symbols", 2),
                             get_or<std::uint64_t>(j, "seed", 1));
    }
    fail(ErrorCode::Parse, "unknown builtin model '" + name + "'");
  }
  auto initial = get<std::vector<double>>(j, "initial");
  auto transition = get<Matrix>(j, "transition");
  require(j.contains("emission") && j["emission"].is_object(), ErrorCode::Parse,
          "missing emission object");
  const json& e = j["emission"];
  Emission emission;
  const auto type = get_or<std::string>(e, "type", "table");
  if (type == "table") {
    emission.kind = Emission::Kind::Table;
    emission.table = get<Matrix>(e, "table");
  } else if (type == "gaussian") {
    emission.kind = Emission::Kind::Gaussian;
    emission.means = get<std::vector<double>>(e, "means");
    emission.sds = get<std::vector<double>>(e, "sds");
  } else {
    fail(ErrorCode::Parse, "unknown emission type '" + type + "'");
  }
  if (j.contains("states")) {
    require(get<std::size_t>(j, "states") == initial.size(), ErrorCode::Parse,
            "'states' disagrees with the initial law");
  }
  return FiniteHmm(std::move(initial), std::move(transition), std::move(emission));
}

json model_to_json(const FiniteHmm& hmm) {
  json j;
  j["states"] = hmm.states();
  j["initial"] = hmm.initial();
  j["transition"] = hmm.transition();
  const Emission& e = hmm.emission();
  if (e.kind == Emission::Kind::Table) {
    j["emission"] = {{"type", "table"}, {"table", e.table}};
  } else {
    j["emission"] = {{"type", "gaussian"}, {"means", e.means}, {"sds", e.sds}};
  }
  return j;
}

std::vector<double> observations_from_json(const json& j) {
  const json& arr = j.is_object() ? j.at("observations") : j;
  require(arr.is_array(), ErrorCode::Parse, "observations must be an array");
  try {
    return arr.get<std::vector<double>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("bad observations: ") + e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Parse, path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::Io, "cannot write " + path);
  out << text;
  require(out.good(), ErrorCode::Io, "write failed for " + path);
}

ExperimentConfig parse_experiment_config(const json& j, const std::string& base_dir) {
  require(j.is_object(), ErrorCode::Parse, "config must be a JSON object");
  ExperimentConfig cfg;
  cfg.raw = j;

  require(j.contains("model"), ErrorCode::Parse, "missing key 'model'");
  cfg.model = j["model"].is_string() ? read_json_file(resolve(base_dir, j["model"].get<std::string>()))
                                     : j["model"];

  if (j.contains("observations")) {
    const json& o = j["observations"];
    if (o.is_array()) {
      cfg.observations = observations_from_json(o);
    } else if (o.is_object() && o.contains("path")) {
      cfg.observations =
          observations_from_json(read_json_file(resolve(base_dir, get<std::string>(o, "path"))));
    } else if (o.is_object() && o.contains("seed")) {
      cfg.observation_seed = get<std::uint64_t>(o, "seed");
    } else {
      fail(ErrorCode::Parse, "observations must be an array, {path} or {seed}");
    }
  } else {
    cfg.observation_seed = 0;
  }

  cfg.family = parse_family(get<std::string>(j, "family"));
  cfg.r = get_or<std::size_t>(j, "r", cfg.family == Family::Multinomial ? 0 : 2);
  cfg.grid = get<std::vector<std::size_t>>(j, "grid");
  require(!cfg.grid.empty(), ErrorCode::InvalidArgument, "empty grid");
  cfg.replicates = get_or<std::size_t>(j, "replicates", cfg.replicates);
  require(cfg.replicates >= 2, ErrorCode::InvalidArgument, "need at least two replicates");
  cfg.horizon = get_or<std::size_t>(j, "horizon", cfg.horizon);
  cfg.functionals = get_or<std::vector<std::string>>(j, "functionals", cfg.functionals);
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.rel_tol = get_or<double>(j, "rel_tol", cfg.rel_tol);
  cfg.threads = get_or<std::size_t>(j, "threads", cfg.threads);
  cfg.force = get_or<bool>(j, "force", false);
  cfg.d = get_or<std::size_t>(j, "d", cfg.d);
  cfg.p = get_or<double>(j, "p", cfg.p);
  require(cfg.p > 1.0, ErrorCode::InvalidArgument, "moment exponent p must exceed 1");
  if (j.contains("discrimination_step")) cfg.discrimination_step = get<std::size_t>(j, "discrimination_step");
  if (j.contains("output")) {
    const json& out = j["output"];
    cfg.csv_path = get_or<std::string>(out, "csv", "");
    cfg.json_path = get_or<std::string>(out, "json", "");
  }

  if (const char* env = std::getenv("BUTTERFLY_SEED"); env && *env) {
    try {
      cfg.seed = std::stoull(env);
    } catch (const std::exception&) {
      fail(ErrorCode::Parse, "BUTTERFLY_SEED is not an unsigned integer");
    }
  }

  // Validate the grid against the family and the desk-scale budget.
  double operations = 0.0;
  for (std::size_t g : cfg.grid) {
    const Schedule s = schedule_for(cfg.family, cfg.r, g);
    operations += static_cast<double>(cfg.replicates) * static_cast<double>(s.size()) *
                  static_cast<double>(cfg.horizon + 1);
  }
  require(cfg.force || operations <= kParticleOperationBudget, ErrorCode::CapacityExceeded,
          "experiment exceeds the particle-operation budget; set force to run anyway");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  const auto dir = std::filesystem::path(path).parent_path().string();
  return parse_experiment_config(read_json_file(path), dir.empty() ? "." : dir);
}

Schedule schedule_for(Family family, std::size_t r, std::size_t grid_value) {
  switch (family) {
    case Family::Multinomial: return Schedule::multinomial(grid_value);
    case Family::Radix: return Schedule::radix(r, grid_value);
    case Family::MixedRadix: return Schedule::mixed_radix(r, grid_value);
  }
  fail(ErrorCode::InvalidArgument, "unknown family");
}

FiniteHmm config_model(const ExperimentConfig& cfg) { return model_from_json(cfg.model); }

std::vector<double> config_observations(const ExperimentConfig& cfg, const FiniteHmm& hmm) {
  std::vector<double> obs;
  if (cfg.observation_seed) {
    obs = simulate(hmm, cfg.horizon, *cfg.observation_seed).observations;
  } else {
    obs = cfg.observations;
  }
  require(obs.size() > cfg.horizon, ErrorCode::InvalidArgument,
          "observations do not cover the horizon");
  for (double y : obs) hmm.check_observation(y);
  return obs;
}

}  // namespace butterfly
