#include "hlpp/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "hlpp/construct.hpp"
#include "hlpp/env.hpp"
#include "hlpp/error.hpp"
#include "hlpp/format.hpp"
#include "hlpp/lpp.hpp"
#include "hlpp/stats.hpp"
#include "json.hpp"

namespace hlpp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw InternalError("sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Collects output files and their digests for the manifest.
class OutputDir {
 public:
  explicit OutputDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(root_ / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (root_ / name).string());
    f << content;
    digests_[name] = sha256_hex(content);
  }

  void finish(std::string_view command, const json& config, const std::string& started) {
    json outputs = json::object();
    for (const auto& [name, digest] : digests_) outputs[name] = {{"sha256", digest}};
    json manifest{{"tool", kToolName},     {"version", kVersion}, {"command", command},
                  {"config", config},      {"started", started},  {"finished", utc_now()},
                  {"outputs", outputs}};
    std::ofstream f(root_ / "manifest.json", std::ios::binary);
    f << manifest.dump(2) << '\n';
  }

 private:
  fs::path root_;
  std::map<std::string, std::string> digests_;
};

struct EnvFlags {
  std::string model = "iid-pareto2";
  std::optional<std::int64_t> n;
  int d = 1;
  double beta = 1.2;
  double t0 = 1.0;
  std::optional<int> layers;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out = "out";
};

void add_env_flags(CLI::App* cmd, EnvFlags& f) {
  cmd->add_option("--model", f.model, "iid-pareto2 | iid-logcorrected | brw | poisson")
      ->capture_default_str();
  cmd->add_option("--n", f.n, "grid size");
  cmd->add_option("--d", f.d, "transverse dimension")->capture_default_str();
  cmd->add_option("--beta", f.beta, "log-correction exponent")->capture_default_str();
  cmd->add_option("--t0", f.t0, "Pareto scale")->capture_default_str();
  cmd->add_option("--layers", f.layers, "poisson layer count (default log2 n + 1)");
  cmd->add_option("--seed", f.seed, "master seed (required)");
  cmd->add_option("--threads", f.threads, "worker threads")->capture_default_str();
  cmd->add_option("--out", f.out, "output directory")->capture_default_str();
}

EnvironmentSpec spec_from(const EnvFlags& f) {
  if (!f.n) throw DomainError("--n is required");
  if (!f.seed) throw DomainError("--seed is required");
  if (f.threads < 1) throw DomainError("--threads must be at least 1");
  EnvironmentSpec spec;
  spec.kind = parse_kind(f.model);
  spec.n = *f.n;
  spec.d = f.d;
  spec.seed = *f.seed;
  spec.params.t0 = f.t0;
  spec.params.beta = f.beta;
  spec.params.layer_count = f.layers;
  spec.validate();
  return spec;
}

std::string to_string(auto&& writer) {
  std::ostringstream os;
  writer(os);
  return os.str();
}

int cmd_solve(const EnvFlags& f, bool want_geodesic, std::ostream& out) {
  const std::string started = utc_now();
  const EnvironmentSpec spec = spec_from(f);
  if (spec.kind != EnvKind::PoissonLayers) check_dp_budget(spec);
  const json config{{"environment", to_json(spec)},
                    {"geodesic", want_geodesic},
                    {"threads", f.threads}};
  OutputDir dir(f.out);
  ReplicateRecord rec;
  rec.model = std::string(kind_name(spec.kind));
  rec.n = spec.n;
  rec.d = spec.d;
  rec.seed = spec.seed;

  std::string geodesic_csv;
  if (spec.kind == EnvKind::PoissonLayers) {
    const auto pl = gen_poisson_layers(spec.n, f.layers.value_or(floor_log2(spec.n) + 1), spec.seed);
    std::vector<ChainPoint> pts;
    for (const auto& layer : pl.layers) {
      for (const auto& p : layer.points) pts.push_back({p[0], p[1], layer.weight});
    }
    const auto chain = max_weight_chain(pts);
    rec.L = chain.value;
    rec.scales = poisson_chain_composition(pl);
    if (want_geodesic) {
      std::ostringstream os;
      os << "x,y\n";
      for (auto i : chain.chain) os << format_double(pts[i].x) << ',' << format_double(pts[i].y) << '\n';
      geodesic_csv = os.str();
    }
  } else {
    const WeightField field(spec);
    auto result = geodesic(field);
    rec.L = result.value;
    rec.scales = result.scale_sums;
    rec.transversal = result.transversal;
    if (want_geodesic) geodesic_csv = to_string([&](std::ostream& os) { write_path_csv(os, *result.geodesic); });
  }

  const std::vector<ReplicateRecord> records{rec};
  dir.write("records.csv", to_string([&](std::ostream& os) { write_records_csv(os, records); }));
  dir.write("scales.csv", to_string([&](std::ostream& os) { write_scales_csv(os, records); }));
  if (want_geodesic) dir.write("geodesic_" + std::to_string(spec.seed) + ".csv", geodesic_csv);
  dir.finish("solve", config, started);
  out << "L = " << format_double(rec.L) << '\n';
  return kOk;
}

int cmd_construct(const EnvFlags& f, std::optional<int> s, std::optional<int> M, bool paper,
                  std::ostream& out) {
  const std::string started = utc_now();
  const EnvKind kind = parse_kind(f.model);
  const bool heavy = kind == EnvKind::IidPareto2 || kind == EnvKind::IidLogCorrected;
  if (!f.n) throw DomainError("--n is required");
  if (paper && (s || M)) throw DomainError("--paper-params excludes --s and --M");

  // Degeneracy is a property of (n, s, M) alone, so it is reported before the seed check.
  std::optional<MultiScaleParams> params;
  if (heavy) {
    if (paper) {
      params = heavy_params(*f.n);
      if (params->degenerate) {
        throw DegenerateError("degenerate: M=0 (paper-asymptotic s=" + std::to_string(params->s) +
                              " gives M=floor(log2 n/(10 s))=0 at n=" + std::to_string(*f.n) +
                              "); pass --s and --M for a desk-scale construction");
      }
    } else {
      ScaleOverride o = desk_preset(*f.n);
      if (s) o.s = *s;
      if (M) o.M = *M;
      params = heavy_params(*f.n, o);
      if (params->degenerate) throw DegenerateError("degenerate: M=0");
    }
  } else if (kind == EnvKind::Brw) {
    if (M) throw DomainError("--M is derived as floor(log2 n / s) for brw");
    if (paper) s = std::max(1, static_cast<int>(std::lround(std::log2(std::log2(*f.n)))));
    if (s && *s > floor_log2(*f.n)) {
      throw DegenerateError("degenerate: s=" + std::to_string(*s) + " exceeds log2 n");
    }
  } else {
    throw DomainError("construct supports iid-pareto2, iid-logcorrected and brw");
  }

  const EnvironmentSpec spec = spec_from(f);
  if (spec.d != 1) throw DomainError("constructions are implemented for d = 1");
  OutputDir dir(f.out);
  const WeightField field(spec);
  const std::string levels_name = "levels_" + std::to_string(spec.seed) + ".csv";
  json config{{"environment", to_json(spec)}, {"paper_params", paper}};
  json summary;

  if (heavy) {
    config["s"] = params->s;
    config["M"] = params->M;
    const auto built = build_heavy_path(field, *params);
    const auto report = verify_apriori(built.levels, *params);
    json hits = json::array();
    for (const auto& h : cylinder_hit_stats(built.levels)) {
      hits.push_back({{"level", h.level},
                      {"scanned", h.scanned},
                      {"hit", h.hit},
                      {"fraction", h.fraction ? json(*h.fraction) : json()},
                      {"benchmark", kHitBenchmark}});
    }
    json sizes = json::array();
    for (const auto& v : built.levels.vertices) sizes.push_back(v.size());
    const double weight = path_weight(built.path, field);
    summary = {{"construction", "heavy"},
               {"params", {{"s", params->s}, {"M", params->M}, {"lambda", params->lambda},
                           {"rho", params->rho}, {"r", params->r()},
                           {"source", params->source == ParamSource::DeskOverride
                                          ? "desk-override" : "paper-asymptotic"}}},
               {"level_sizes", sizes},
               {"apriori_all_true", report.all_ok()},
               {"apriori_checks", report.checks.size()},
               {"cylinder_hits", hits},
               {"constructed_L", weight},
               {"reference_bound", reference_bound(static_cast<double>(spec.n),
                                                   ReferenceModel::Heavy, spec.params.beta, 1)}};
    dir.write(levels_name,
              to_string([&](std::ostream& os) { write_level_sets_csv(os, built.levels, field); }));
    out << "constructed L = " << format_double(weight)
        << ", apriori " << (report.all_ok() ? "all true" : "FAILED") << '\n';
  } else {
    const int sep = s.value_or(2);
    config["s"] = sep;
    const auto built = build_brw_path(field, sep);
    summary = {{"construction", "brw"},
               {"s", built.s},
               {"M", built.M},
               {"squares_per_level", built.squares_per_level},
               {"choices", built.choices.size()},
               {"constructed_L", built.weight},
               {"L1", built.L1},
               {"L2", built.L2},
               {"reference_bound",
                reference_bound(static_cast<double>(spec.n), ReferenceModel::Brw, 0.0, 1)}};
    dir.write(levels_name,
              to_string([&](std::ostream& os) { write_skeleton_choices_csv(os, built.choices); }));
    out << "constructed L = " << format_double(built.weight) << ", " << built.choices.size()
        << " skeleton choices\n";
  }
  dir.write("summary.json", summary.dump(2) + "\n");
  dir.finish("construct", config, started);
  return kOk;
}

int cmd_experiment(const std::string& config_path, std::optional<int> threads,
                   const std::string& out_dir, std::ostream& out) {
  const std::string started = utc_now();
  std::ifstream in(config_path);
  if (!in) throw DomainError("cannot read config " + config_path);
  json raw;
  try {
    raw = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DomainError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig config = experiment_from_json(raw);
  if (threads) {
    config.threads = *threads;
    config.validate();
  }
  const auto records = run_experiment(config);
  OutputDir dir(out_dir);
  dir.write("records.csv", to_string([&](std::ostream& os) { write_records_csv(os, records); }));
  if (config.wants(Measure::ScaleSums)) {
    dir.write("scales.csv", to_string([&](std::ostream& os) { write_scales_csv(os, records); }));
  }
  dir.write("summary.json", summarize(config, records).dump(2) + "\n");
  dir.finish("experiment", to_json(config), started);
  out << records.size() << " records written to " << out_dir << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Last passage percolation in hierarchical random environments", "lppsim"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  EnvFlags solve_flags;
  bool want_geodesic = false;
  auto* solve = app.add_subcommand("solve", "exact last passage value, scale sums, geodesic");
  add_env_flags(solve, solve_flags);
  solve->add_flag("--geodesic", want_geodesic, "write the geodesic CSV");

  EnvFlags construct_flags;
  std::optional<int> s;
  std::optional<int> M;
  bool paper = false;
  auto* construct = app.add_subcommand("construct", "multi-scale or skeleton lower-bound path");
  add_env_flags(construct, construct_flags);
  construct->add_option("--s", s, "scale separation");
  construct->add_option("--M", M, "number of levels");
  construct->add_flag("--paper-params", paper, "asymptotic parameter formulas");

  std::string config_path;
  std::optional<int> threads;
  std::string out_dir = "out";
  auto* experiment = app.add_subcommand("experiment", "replicate experiment from a JSON config");
  experiment->add_option("--config", config_path, "ExperimentConfig JSON")->required();
  experiment->add_option("--threads", threads, "override the config's worker count");
  experiment->add_option("--out", out_dir, "output directory")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  }

  try {
    if (*solve) return cmd_solve(solve_flags, want_geodesic, out);
    if (*construct) return cmd_construct(construct_flags, s, M, paper, out);
    return cmd_experiment(config_path, threads, out_dir, out);
  } catch (const SizeError& e) {
    err << "size guard: " << e.what() << '\n';
    return kSize;
  } catch (const DegenerateError& e) {
    err << e.what() << '\n';
    return kDegenerate;
  } catch (const DomainError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kInvalid;
  } catch (const InfeasibleError& e) {
    err << "infeasible parameters: " << e.what() << '\n';
    return kInvalid;
  } catch (const UnsupportedError& e) {
    err << "unsupported: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace hlpp::cli
