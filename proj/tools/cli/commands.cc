// Copyright 2026 The ProxyMoE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "cli/commands.h"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include <CLI/CLI.hpp>

#include "proxymoe/dpp.h"
#include "proxymoe/embedding.h"
#include "proxymoe/error.h"
#include "proxymoe/privacy.h"
#include "proxymoe/relevance.h"
#include "proxymoe/rng.h"
#include "proxymoe/router.h"
#include "proxymoe/serialize.h"
#include "proxymoe/toy_moe.h"

namespace proxymoe::cli {
namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string scores;  // select only
};

[[noreturn]] void bad_key(std::string_view where, std::string_view key,
                          std::string_view why) {
  throw Error(ErrorKind::kInvalidArgument,
              std::string(where) + "." + std::string(key) + ": " +
                  std::string(why));
}

Json read_config(const std::string& path) {
  if (path.empty()) return Json::object();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kParseError, "cannot open config '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kParseError, "config '" + path + "': " + e.what());
  }
  if (!j.is_object()) {
    throw Error(ErrorKind::kParseError,
                "config '" + path + "': expected a JSON object");
  }
  return j;
}

// Splits `j` into the command's own keys and the keys forwarded to the
// pipeline configuration parser; anything else is rejected.
std::pair<Json, Json> split_keys(const Json& j, std::string_view where,
                                 const std::set<std::string>& own,
                                 const std::set<std::string>& forwarded) {
  Json mine = Json::object();
  Json rest = Json::object();
  for (const auto& [key, value] : j.items()) {
    if (own.contains(key)) {
      mine[key] = value;
    } else if (forwarded.contains(key)) {
      rest[key] = value;
    } else {
      bad_key(where, key, "unknown key");
    }
  }
  return {mine, rest};
}

std::string string_field(const Json& j, std::string_view where,
                         const std::string& key, bool required,
                         std::string fallback = {}) {
  if (!j.contains(key)) {
    if (required) bad_key(where, key, "required");
    return fallback;
  }
  if (!j.at(key).is_string()) bad_key(where, key, "expected a string");
  return j.at(key).get<std::string>();
}

template <typename T>
T number_field(const Json& j, std::string_view where, const std::string& key,
               T fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if constexpr (std::is_unsigned_v<T>) {
    if (!v.is_number_unsigned()) bad_key(where, key, "expected a non-negative integer");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) bad_key(where, key, "expected an integer");
  } else {
    if (!v.is_number()) bad_key(where, key, "expected a number");
  }
  return v.get<T>();
}

bool bool_field(const Json& j, std::string_view where, const std::string& key,
                bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) bad_key(where, key, "expected a boolean");
  return j.at(key).get<bool>();
}

template <typename T>
std::vector<T> array_field(const Json& j, std::string_view where,
                           const std::string& key, std::vector<T> fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_array()) bad_key(where, key, "expected an array");
  std::vector<T> out;
  for (const auto& e : v) {
    if (!e.is_number_unsigned()) {
      bad_key(where, key, "expected non-negative integers");
    }
    out.push_back(e.get<T>());
  }
  return out;
}

// The file's top-level seed seeds every stream first so that explicit nested
// seeds in the file still win; --seed then overrides everything.
PipelineConfig resolve_pipeline(const Json& j, const Options& opt,
                                PipelineConfig base = {}) {
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) {
      bad_key("config", "seed", "expected a non-negative integer");
    }
    apply_seed(base, j.at("seed").get<std::uint64_t>());
  }
  PipelineConfig cfg = pipeline_config_from_json(j, base);
  if (opt.seed) apply_seed(cfg, *opt.seed);
  return cfg;
}

void write_output(const std::string& path, const std::string& text,
                  std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f || !(f << text) || !f.flush()) {
    throw Error(ErrorKind::kInvalidArgument, "cannot write '" + path + "'");
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string fmt_double(double v) {
  std::ostringstream s;
  s << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return s.str();
}

const std::set<std::string> kSelectionKeys = {
    "seed", "selection", "pool_size", "proxies_per_client",
    "normalize_inputs", "relevance"};

Json pick(const Json& j, const std::set<std::string>& keys) {
  Json out = Json::object();
  for (const auto& [key, value] : j.items()) {
    if (keys.contains(key)) out[key] = value;
  }
  return out;
}

struct SelectionRun {
  Json config;
  EmbeddingSet public_means;
  EmbeddingSet private_means;
  ClientSelection result;
};

SelectionRun run_selection(const Json& file, const Options& opt,
                           std::string_view where,
                           const std::set<std::string>& extra_keys) {
  std::set<std::string> own = {"public", "private", "client"};
  own.insert(extra_keys.begin(), extra_keys.end());
  auto [mine, rest] = split_keys(file, where, own, kSelectionKeys);
  const std::string public_path = string_field(mine, where, "public", true);
  const std::string private_path = string_field(mine, where, "private", true);
  const int client = number_field<int>(mine, where, "client", 0);
  if (client < 0) bad_key(where, "client", "must be non-negative");
  const PipelineConfig cfg = resolve_pipeline(rest, opt);

  const EmbeddingSet pub = load_embeddings(public_path, SetRole::kPublic);
  const EmbeddingSet priv = load_embeddings(private_path, SetRole::kPrivate);
  SelectionRun run{Json::object(), sample_means(pub), sample_means(priv), {}};
  run.result = run_client_selection(run.public_means, priv, client, cfg);

  run.config["public"] = public_path;
  run.config["private"] = private_path;
  run.config["client"] = client;
  const Json resolved = pick(pipeline_config_to_json(cfg), kSelectionKeys);
  for (const auto& [key, value] : resolved.items()) run.config[key] = value;
  for (const auto& key : extra_keys) {
    if (mine.contains(key)) run.config[key] = mine.at(key);
  }
  return run;
}

int cmd_select(const Options& opt, std::ostream& out) {
  Json file = read_config(opt.config);
  std::string scores_path = string_field(file, "select", "scores_out", false);
  if (!opt.scores.empty()) {
    scores_path = opt.scores;
    file["scores_out"] = scores_path;
  }
  const SelectionRun run = run_selection(file, opt, "select", {"scores_out"});

  Json j = selection_to_json(run.result.selection);
  j["config"] = run.config;
  if (!scores_path.empty()) {
    std::string csv = "id,score\n";
    const RelevanceScores& s = run.result.scores;
    for (std::size_t i = 0; i < s.size(); ++i) {
      csv += s.ids()[i] + "," + fmt_double(s.values()[i]) + "\n";
    }
    write_output(scores_path, csv, out);
  }
  write_output(opt.out, dump(j), out);
  return kExitOk;
}

Json simulate_one(const PipelineConfig& cfg) {
  const PipelineResult r = run_pipeline(cfg);
  Json j = report_to_json(r.report);
  j["seed_model"] = report_to_json(r.seed_report);
  j["lambda"] = r.model.router.lambda();
  j["config"] = pipeline_config_to_json(cfg);
  return j;
}

int cmd_simulate(const Options& opt, std::ostream& out) {
  Json file = read_config(opt.config);
  Json variants;
  if (file.contains("variants")) {
    variants = file.at("variants");
    file.erase("variants");
    if (!variants.is_object() || variants.empty()) {
      bad_key("simulate", "variants", "expected a non-empty object");
    }
  }
  const PipelineConfig base = resolve_pipeline(file, opt);
  if (variants.is_null()) {
    write_output(opt.out, dump(simulate_one(base)), out);
    return kExitOk;
  }

  if (opt.out.empty()) {
    throw UsageError("simulate with variants needs --out <directory>");
  }
  std::error_code ec;
  fs::create_directories(opt.out, ec);
  if (ec) {
    throw Error(ErrorKind::kInvalidArgument,
                "cannot create '" + opt.out + "': " + ec.message());
  }
  for (const auto& [name, overrides] : variants.items()) {
    if (name.empty() || name.find_first_of("/\\") != std::string::npos ||
        name == "." || name == "..") {
      bad_key("simulate.variants", name, "not a usable file name");
    }
    PipelineConfig cfg = pipeline_config_from_json(overrides, base);
    if (opt.seed) apply_seed(cfg, *opt.seed);
    Json j = simulate_one(cfg);
    j["variant"] = name;
    const std::string path = (fs::path(opt.out) / (name + ".json")).string();
    write_output(path, dump(j), out);
    out << path << "\n";
  }
  return kExitOk;
}

std::vector<Vector> vectors(const EmbeddingSet& set) {
  std::vector<Vector> v;
  v.reserve(set.size());
  for (const auto& r : set.records()) v.push_back(r.vec);
  return v;
}

Vector mean_of(const std::vector<Vector>& vs) {
  Vector m(vs.front().size(), 0.0);
  for (const auto& v : vs) {
    for (std::size_t i = 0; i < v.size(); ++i) m[i] += v[i];
  }
  for (double& x : m) x /= static_cast<double>(vs.size());
  return m;
}

int cmd_privacy_report(const Options& opt, std::ostream& out) {
  const Json file = read_config(opt.config);
  constexpr std::string_view where = "privacy-report";
  auto [mine, rest] = split_keys(
      file, where, {"private", "proxy", "candidates", "recover_ns", "seed"}, {});
  const std::string private_path = string_field(mine, where, "private", true);
  const std::string proxy_path = string_field(mine, where, "proxy", true);
  const std::string cand_path = string_field(mine, where, "candidates", false);
  const auto ns = array_field<std::size_t>(mine, where, "recover_ns", {});

  const auto priv = vectors(load_embeddings(private_path, SetRole::kPrivate));
  const auto proxy = vectors(load_embeddings(proxy_path, SetRole::kProxy));
  std::vector<Vector> cands;
  if (!cand_path.empty()) {
    cands = vectors(load_embeddings(cand_path, SetRole::kPublic));
  } else {
    // Antipodes of the private samples, then the proxies.
    for (const auto& v : priv) {
      Vector neg = v;
      for (double& x : neg) x = -x;
      cands.push_back(std::move(neg));
    }
    cands.insert(cands.end(), proxy.begin(), proxy.end());
  }

  const SensitivityReport rep = empirical_sensitivity(priv, proxy, cands);
  Json j = sensitivity_to_json(rep);
  j["union_tighter_than_private_only"] = rep.bound < rep.private_only_bound;
  if (!ns.empty()) {
    const Vector e = routing_vector(priv, proxy);
    const Vector mu_proxy = mean_of(proxy);
    const auto rec = recover_private_mean(e, mu_proxy, proxy.size(), ns);
    Json arr = Json::array();
    for (std::size_t i = 0; i < ns.size(); ++i) {
      arr.push_back({{"N", ns[i]}, {"mu_private", rec[i]}});
    }
    j["recovery"] = arr;
  }
  Json echo = Json::object();
  echo["private"] = private_path;
  echo["proxy"] = proxy_path;
  echo["candidates"] = cand_path.empty() ? Json(nullptr) : Json(cand_path);
  echo["recover_ns"] = ns;
  j["config"] = echo;
  write_output(opt.out, dump(j), out);
  return kExitOk;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

int cmd_bench(const Options& opt, std::ostream& out) {
  const Json file = read_config(opt.config);
  constexpr std::string_view where = "bench";
  auto [mine, rest] = split_keys(
      file, where,
      {"n", "dimension", "m_grid", "repeats", "window", "ratio_m", "seed"}, {});
  const auto n = number_field<std::size_t>(mine, where, "n", 3000);
  const auto dim = number_field<std::size_t>(mine, where, "dimension", 768);
  auto grid = array_field<std::size_t>(mine, where, "m_grid", {1, 200, 400, 500});
  const auto repeats = number_field<std::size_t>(mine, where, "repeats", 5);
  const auto window = number_field<std::size_t>(mine, where, "window", 40);
  const auto ratio_m =
      array_field<std::size_t>(mine, where, "ratio_m", {200, 400});
  const std::uint64_t seed =
      opt.seed ? *opt.seed : number_field<std::uint64_t>(mine, where, "seed", 0);
  if (n == 0 || dim == 0 || repeats == 0 || window == 0) {
    throw Error(ErrorKind::kInvalidArgument,
                "bench: n, dimension, repeats and window must be positive");
  }
  if (ratio_m.size() != 2) bad_key(where, "ratio_m", "expected two sizes");
  for (std::size_t m : grid) {
    if (m == 0 || m > n) bad_key(where, "m_grid", "sizes must lie in [1, n]");
  }
  for (std::size_t m : ratio_m) {
    if (m == 0 || m + window > n) {
      bad_key(where, "ratio_m", "sizes must leave room for the window");
    }
  }

  // Gaussian embeddings; rank is min(n, dimension).
  auto t0 = std::chrono::steady_clock::now();
  Rng rng(seed, 0xbe7c);
  EmbeddingSet pool(SetRole::kPublic, dim);
  Vector r(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vector v(dim);
    for (double& x : v) x = rng.normal();
    std::ostringstream id;
    id << "b" << std::setw(6) << std::setfill('0') << i;
    pool.add({id.str(), std::move(v), std::nullopt, std::nullopt, std::nullopt});
    r[i] = rng.uniform(0.05, 1.0);
  }
  std::vector<std::string> ids;
  for (const auto& rec : pool.records()) ids.push_back(rec.id);
  const WeightedKernel k = weight_kernel(build_kernel(pool), r, std::move(ids));
  const double setup_ms = elapsed_ms(t0);

  auto best_of = [&](std::size_t m) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < repeats; ++i) {
      const auto t = std::chrono::steady_clock::now();
      const ProxySelection sel = greedy_map(k, m);
      best = std::min(best, elapsed_ms(t));
      if (sel.selected_ids.size() != m) {
        throw Error(ErrorKind::kInsufficientRank, "bench: short selection");
      }
    }
    return best;
  };

  Json timings = Json::array();
  std::map<std::size_t, double> total;
  for (std::size_t m : grid) {
    total[m] = best_of(m);
    timings.push_back({{"m", m}, {"greedy_ms", total[m]}});
  }
  // Mean cost of greedy steps m+1 .. m+window, each step timed inside one
  // run and taken as the best over `repeats` runs.
  const std::size_t steps = std::max(ratio_m[0], ratio_m[1]) + window;
  Vector fastest(steps, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < repeats; ++i) {
    const ProxySelection sel = greedy_map(k, steps);
    for (std::size_t s = 0; s < steps; ++s) {
      fastest[s] = std::min(fastest[s], sel.step_ms[s]);
    }
  }
  auto step_ms = [&](std::size_t m) {
    double sum = 0.0;
    for (std::size_t s = m; s < m + window; ++s) sum += fastest[s];
    return sum / static_cast<double>(window);
  };
  const double s_lo = step_ms(ratio_m[0]);
  const double s_hi = step_ms(ratio_m[1]);
  const double step_ratio = s_lo > 0 ? s_hi / s_lo : 0.0;
  const std::size_t m_max = *std::max_element(grid.begin(), grid.end());

  Json j;
  j["n"] = n;
  j["dimension"] = dim;
  j["setup_ms"] = setup_ms;
  j["timings"] = timings;
  j["step_ms"] = {{std::to_string(ratio_m[0]), s_lo},
                  {std::to_string(ratio_m[1]), s_hi}};
  j["step_ratio"] = step_ratio;
  j["step_ratio_in_range"] = step_ratio >= 1.5 && step_ratio <= 3.0;
  if (total.contains(ratio_m[0]) && total.contains(ratio_m[1])) {
    j["total_ratio"] = total[ratio_m[1]] / total[ratio_m[0]];
  }
  j["full_selection_ms"] = setup_ms + total[m_max];
  j["full_selection_m"] = m_max;
  j["config"] = {{"n", n},          {"dimension", dim}, {"m_grid", grid},
                 {"repeats", repeats}, {"window", window}, {"ratio_m", ratio_m},
                 {"seed", seed}};
  write_output(opt.out, dump(j), out);
  return kExitOk;
}

int cmd_project(const Options& opt, std::ostream& out) {
  const Json file = read_config(opt.config);
  const bool with_private =
      bool_field(file, "project", "include_private", false);
  const SelectionRun run =
      run_selection(file, opt, "project", {"include_private"});

  // Random and top-k selections draw from the whole public set.
  std::vector<std::string> pool_ids = run.result.pool;
  if (pool_ids.empty()) {
    for (const auto& r : run.public_means.records()) pool_ids.push_back(r.id);
  }
  const EmbeddingSet pool =
      select_samples(run.public_means, pool_ids, SetRole::kPublic);
  const EmbeddingSet points =
      with_private ? concat(pool, run.private_means, SetRole::kPublic) : pool;
  const Projection proj = pca_project_2d(points);

  const auto& chosen = run.result.selection.selected_ids;
  const std::set<std::string> selected(chosen.begin(), chosen.end());
  std::string csv = "id,x,y,marker\n";
  for (std::size_t i = 0; i < proj.points.size(); ++i) {
    const ProjectedPoint& p = proj.points[i];
    const char* marker = i >= pool.size()          ? "private"
                         : selected.contains(p.id) ? "selected"
                                                   : "pool";
    csv += p.id + "," + fmt_double(p.x) + "," + fmt_double(p.y) + "," +
           marker + "\n";
  }
  write_output(opt.out, csv, out);
  return kExitOk;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDiverged:
    case ErrorKind::kNotPositiveDefinite:
    case ErrorKind::kNonPositiveSchur:
    case ErrorKind::kIncompatibleExperts:
      return kExitInternal;
    default:
      return kExitInput;
  }
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Proxy selection, toy mixture-of-experts simulation and "
               "routing-vector privacy analysis.",
               "proxymoe"};
  app.require_subcommand(1, 1);
  Options opt;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "JSON config file");
    sub->add_option("--out", opt.out, "output path (default: stdout)");
    sub->add_option("--seed", seed, "overrides every seed in the config");
  };
  CLI::App* select = app.add_subcommand("select", "select proxy samples for one client");
  common(select);
  select->add_option("--scores", opt.scores, "write relevance scores as CSV id,score");
  CLI::App* simulate = app.add_subcommand("simulate", "run the full pipeline on synthetic domains");
  common(simulate);
  CLI::App* privacy = app.add_subcommand("privacy-report", "routing-vector sensitivity report");
  common(privacy);
  CLI::App* bench = app.add_subcommand("bench", "time greedy MAP selection");
  common(bench);
  CLI::App* project = app.add_subcommand("project", "2-D projection of the candidate pool as CSV");
  common(project);

  std::vector<std::string> reversed;
  if (args.size() > 1) reversed.assign(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "UsageError: " << one_line(e.what()) << "\n";
    return kExitInput;
  }
  for (CLI::App* sub : app.get_subcommands()) {
    if (sub->count("--seed") > 0) opt.seed = seed;
  }

  try {
    if (select->parsed()) return cmd_select(opt, out);
    if (simulate->parsed()) return cmd_simulate(opt, out);
    if (privacy->parsed()) return cmd_privacy_report(opt, out);
    if (bench->parsed()) return cmd_bench(opt, out);
    return cmd_project(opt, out);
  } catch (const Error& e) {
    err << one_line(e.what()) << "\n";  // already "Kind: message"
    return exit_code(e.kind());
  } catch (const UsageError& e) {
    err << "UsageError: " << one_line(e.what()) << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "InternalError: " << one_line(e.what()) << "\n";
    return kExitInternal;
  }
}

}  // namespace proxymoe::cli
