// Command-line front end. run_cli() is the whole program; tools/geodesy.cpp
// only forwards argv, which lets the tests drive it in-process.
#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "geodesy/config.hpp"
#include "geodesy/io.hpp"

#ifndef GEODESY_VERSION
#define GEODESY_VERSION "0.0.0"
#endif

namespace geodesy::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kBadInput = 2, kInfeasible = 3, kMargin = 4 };

/// Bad flag value; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultMemoryCapGiB = 4.0;

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline int parse_int(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  int x = 0;
  try {
    x = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw UsageError("bad integer \"" + s + "\" in " + what);
  }
  if (used != s.size()) throw UsageError("bad integer \"" + s + "\" in " + what);
  return x;
}

inline double parse_real(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(s, &used);
  } catch (const std::exception&) {
    throw UsageError("bad number \"" + s + "\" in " + what);
  }
  if (used != s.size()) throw UsageError("bad number \"" + s + "\" in " + what);
  return x;
}

inline std::vector<int> parse_ints(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (const auto& part : split(s, ',')) out.push_back(parse_int(part, what));
  if (out.empty()) throw UsageError("empty coordinate list in " + what);
  return out;
}

template <std::size_t D>
Vertex<D> parse_vertex(const std::string& s, const std::string& what) {
  const auto xs = parse_ints(s, what);
  if (xs.size() != D)
    throw UsageError(what + " needs " + std::to_string(D) + " coordinates, got \"" + s + "\"");
  Vertex<D> v{};
  std::copy(xs.begin(), xs.end(), v.begin());
  return v;
}

/// "R" is [-R, R]^D; "lo0,lo1:hi0,hi1" gives the corners.
template <std::size_t D>
Box<D> parse_box(const std::string& s) {
  const auto parts = split(s, ':');
  try {
    if (parts.size() == 1) {
      const int r = parse_int(parts[0], "--box");
      if (r < 0) throw UsageError("--box radius must be >= 0");
      return Box<D>::cube(r);
    }
    if (parts.size() == 2) return Box<D>(parse_vertex<D>(parts[0], "--box"), parse_vertex<D>(parts[1], "--box"));
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--box: ") + e.what());
  }
  throw UsageError("--box must be R or lo0,lo1,...:hi0,hi1,...");
}

/// Number of coordinates a box flag implies, 0 when it is a bare radius.
inline std::size_t box_dim(const std::string& s) {
  const auto parts = split(s, ':');
  return parts.size() == 2 ? split(parts[0], ',').size() : 0;
}

/// exponential:RATE | uniform:A,B | shifted_exponential:SHIFT,RATE | a JSON object
inline DistributionSpec parse_dist(const std::string& s) {
  try {
    if (!s.empty() && s.front() == '{') return distribution_from_json(nlohmann::json::parse(s));
    const auto colon = s.find(':');
    const std::string kind = s.substr(0, colon);
    const auto args = colon == std::string::npos ? std::vector<std::string>{} : split(s.substr(colon + 1), ',');
    auto arg = [&](std::size_t i) {
      if (i >= args.size()) throw UsageError("--dist " + kind + " is missing a parameter");
      return parse_real(args[i], "--dist");
    };
    DistributionSpec d;
    if (kind == "exponential") {
      d = Exponential{args.empty() ? 1.0 : arg(0)};
    } else if (kind == "uniform") {
      d = Uniform{arg(0), arg(1)};
    } else if (kind == "shifted_exponential" || kind == "shifted-exponential") {
      d = ShiftedExponential{arg(0), arg(1)};
    } else {
      throw UsageError("unknown distribution \"" + s + "\"");
    }
    validate(d);
    return d;
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(std::string("--dist: ") + e.what());
  }
}

inline bool is_fixture(const std::string& dist) { return dist.rfind("fixture:", 0) == 0; }

inline nlohmann::json load_json_file(const std::string& path, const std::string& what) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw UsageError(what + ": " + e.what());
  }
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(what + ": malformed JSON in " + path + ": " + e.what());
  }
}

struct EnvFlags {
  std::uint64_t seed = 0;
  std::string dist = "exponential:1";
  std::string box;
  int dim = 0;
  double memory_cap_gib = kDefaultMemoryCapGiB;
};

/// Dimension implied by the flags: a fixture's box, an explicit box, or
/// the coordinates of `hint`.
inline std::size_t resolve_dim(const EnvFlags& f, const std::string& hint) {
  std::size_t d = 0;
  if (is_fixture(f.dist)) d = fixture_dim(load_json_file(f.dist.substr(8), "--dist fixture"));
  if (!d) d = box_dim(f.box);
  if (!d && f.dim) d = std::size_t(f.dim);
  if (!d && !hint.empty()) d = split(hint, ',').size();
  if (!d) d = 2;
  if (d != 2 && d != 3) throw UsageError("only dimensions 2 and 3 are supported");
  return d;
}

template <std::size_t D>
WeightField<D> make_env(const EnvFlags& f) {
  WeightField<D> env = [&] {
    if (is_fixture(f.dist)) {
      const auto j = load_json_file(f.dist.substr(8), "--dist fixture");
      try {
        auto fx = fixture_from_json<D>(j);
        if (!f.box.empty() && !(parse_box<D>(f.box) == fx.box())) throw UsageError("--box disagrees with the fixture box");
        return fx;
      } catch (const UsageError&) {
        throw;
      } catch (const std::exception& e) {
        throw UsageError(std::string("--dist fixture: ") + e.what());
      }
    }
    if (f.box.empty()) throw UsageError("--box is required unless --dist fixture:PATH is given");
    return make_environment<D>(f.seed, parse_dist(f.dist), parse_box<D>(f.box));
  }();
  const double bytes = double(estimated_solve_bytes<D>(env.box()));
  if (bytes > f.memory_cap_gib * double(1ull << 30))
    throw UsageError("box needs about " + std::to_string(bytes / double(1ull << 30)) + " GiB, above the " +
                     std::to_string(f.memory_cap_gib) + " GiB cap");
  return env;
}

/// point:x,y | set:x,y;x,y | halfspace:r0,r1:alpha
template <std::size_t D>
TargetSpec<D> parse_target(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw UsageError("--target must be point:..., set:... or halfspace:...");
  const auto kind = s.substr(0, colon), rest = s.substr(colon + 1);
  if (kind == "point") return point_target<D>(parse_vertex<D>(rest, "--target"));
  if (kind == "set") {
    std::vector<Vertex<D>> vs;
    for (const auto& p : split(rest, ';')) vs.push_back(parse_vertex<D>(p, "--target"));
    return vertex_set_target<D>(vs);
  }
  if (kind == "halfspace") {
    const auto parts = split(rest, ':');
    if (parts.size() != 2) throw UsageError("--target halfspace needs rho:alpha");
    RealVector<D> rho{};
    const auto rs = split(parts[0], ',');
    if (rs.size() != D) throw UsageError("--target halfspace normal has the wrong dimension");
    for (std::size_t i = 0; i < D; ++i) rho[i] = parse_real(rs[i], "--target");
    TargetSpec<D> t = half_space_target<D>(rho, parse_real(parts[1], "--target"));
    try {
      validate_target<D>(t);
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--target: ") + e.what());
    }
    return t;
  }
  throw UsageError("unknown target kind \"" + kind + "\"");
}

/// full | half-plane | half-plane:AXIS:THRESHOLD
inline SubgraphMask parse_mask(const std::string& s, std::size_t dim) {
  if (s.empty() || s == "full") return SubgraphMask::full();
  const auto parts = split(s, ':');
  if (parts[0] != "half-plane") throw UsageError("--mask must be full or half-plane[:axis:threshold]");
  if (parts.size() == 1) return SubgraphMask::half_plane();
  if (parts.size() != 3) throw UsageError("--mask half-plane takes axis:threshold");
  const int axis = parse_int(parts[1], "--mask");
  if (axis < 0 || std::size_t(axis) >= dim) throw UsageError("--mask axis out of range");
  return SubgraphMask::half_plane(axis, parse_int(parts[2], "--mask"));
}

inline void add_env_flags(CLI::App* cmd, EnvFlags& f) {
  cmd->add_option("--seed", f.seed, "environment seed (unsigned 64-bit)");
  cmd->add_option("--dist", f.dist,
                  "exponential:RATE | uniform:A,B | shifted_exponential:SHIFT,RATE | fixture:PATH")
      ->capture_default_str();
  cmd->add_option("--box", f.box, "R for [-R,R]^d, or lo0,lo1:hi0,hi1");
  cmd->add_option("--dim", f.dim, "dimension when --box is a radius")->check(CLI::Range(2, 3));
  cmd->add_option("--memory-cap", f.memory_cap_gib, "memory cap in GiB")->capture_default_str();
}

template <std::size_t D>
int cmd_passage(const EnvFlags& f, const std::string& source, const std::string& target, const std::string& mask_s,
                const std::filesystem::path& out_dir, std::ostream& out) {
  const auto env = make_env<D>(f);
  const auto x = parse_vertex<D>(source, "--source");
  const auto tgt = parse_target<D>(target);
  const auto mask = parse_mask(mask_s, D);
  if (!env.box().contains(x)) throw UsageError("--source " + source + " lies outside the box");
  const PassageEngine<D> engine(env);
  const auto map = engine.solve(tgt, mask);
  const auto d = map.distance(x);
  if (!d) throw InfeasibleTarget("source " + source + " cannot reach the target under the mask");
  atomic_write(out_dir / "passage.csv", passage_csv<D>(map));
  atomic_write(out_dir / "geodesic.json", geodesic_json<D>(map.geodesic(x)).dump() + "\n");
  out << format_fixed(*d, 9) << '\n';
  return kOk;
}

template <std::size_t D>
int cmd_env(const EnvFlags& f, const std::filesystem::path& path, std::ostream& out) {
  const auto env = make_env<D>(f);
  atomic_write(path, fixture_to_json<D>(env).dump(1) + "\n");
  out << "wrote " << path.string() << " (" << env.box().size() << " vertices)\n";
  return kOk;
}

template <std::size_t D>
int cmd_tree(const EnvFlags& f, const std::string& root_s, bool verify, const std::filesystem::path& path,
             std::ostream& out) {
  const auto env = make_env<D>(f);
  const auto root = root_s.empty() ? origin<D>() : parse_vertex<D>(root_s, "--root");
  if (!env.box().contains(root)) throw UsageError("--root lies outside the box");
  const PassageEngine<D> engine(env);
  const auto tree = geodesic_tree<D>(engine, root);
  atomic_write(path, tree_json<D>(tree).dump() + "\n");
  out << "edges " << tree.edge_count() << " reachable " << tree.reachable_count() << '\n';
  if (verify) {
    const auto r = verify_tree<D>(tree, engine, 100, f.seed);
    out << "acyclic " << r.acyclic << " max_deviation " << format_real(r.max_deviation) << " subpath_violations "
        << r.subpath_violations << '\n';
    if (!r.ok()) return kFailure;
  }
  return kOk;
}

template <std::size_t D>
int cmd_partition(const EnvFlags& f, const std::string& seeds_s, const std::filesystem::path& path,
                  std::ostream& out) {
  const auto env = make_env<D>(f);
  std::vector<Vertex<D>> seeds;
  for (const auto& p : split(seeds_s, ';')) seeds.push_back(parse_vertex<D>(p, "--seeds"));
  for (const auto& s : seeds)
    if (!env.box().contains(s)) throw UsageError("seed " + to_string<D>(s) + " lies outside the box");
  InfectionPartition<D> part;
  try {
    part = infection_partition<D>(env, seeds);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  atomic_write(path, partition_json<D>(part).dump() + "\n");
  const auto c = part.counts();
  for (std::size_t i = 1; i < c.size(); ++i)
    out << "label " << i << ": " << c[i] << " vertices, boundary " << (part.boundary_reach[i - 1] ? "yes" : "no")
        << '\n';
  out << "contested " << part.contested << '\n';
  return kOk;
}

inline unsigned effective_workers(unsigned flag) {
  if (const char* env = std::getenv("GEODESY_WORKERS"); env && *env) {
    try {
      const int w = parse_int(env, "GEODESY_WORKERS");
      if (w < 0) throw UsageError("GEODESY_WORKERS must be >= 0");
      return unsigned(w);
    } catch (const UsageError&) {
      throw;
    }
  }
  return flag;
}

inline int cmd_experiment(const std::string& config_path, unsigned workers_flag, const std::filesystem::path& results,
                          std::ostream& out, std::ostream& err) {
  std::string text;
  try {
    text = read_file(config_path);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  ExperimentConfig cfg;
  try {
    cfg = parse_config(text);
  } catch (const ConfigError& e) {
    err << config_path << ":" << e.line() << ": " << e.message() << '\n';
    return kBadInput;
  }
  const unsigned workers = effective_workers(workers_flag);
  const auto started = std::chrono::system_clock::now();
  const auto outcome = run_experiment(cfg, workers);
  const auto finished = std::chrono::system_clock::now();

  const auto hash = config_hash(text);
  const auto dir = results / hash;
  atomic_write(dir / "records.csv", outcome.records_csv);
  atomic_write(dir / "summary.json", outcome.summary.dump(2) + "\n");
  RunManifest m;
  m.config_hash = hash;
  m.tool_version = GEODESY_VERSION;
  m.seed0 = cfg.seed0;
  m.started = utc_timestamp(started);
  m.finished = utc_timestamp(finished);
  m.outputs = {"records.csv", "summary.json"};
  atomic_write(dir / "manifest.json", m.to_json().dump(2) + "\n");

  out << dir.string() << '\n';
  out << "estimate " << format_real(outcome.summary.value("estimate", nlohmann::json()).is_number()
                                        ? outcome.summary["estimate"].get<double>()
                                        : std::nan(""))
      << '\n';
  if (outcome.excluded_fraction() > 0.2) {
    err << "margin: " << outcome.excluded << " of " << outcome.units
        << " records touched the boundary band (more than 20%)\n";
    return kMargin;
  }
  return kOk;
}

inline std::vector<GeodesicPath<2>> load_highlight(const std::string& path) {
  if (path.empty()) return {};
  const auto j = load_json_file(path, "--highlight");
  try {
    // a single path [[x,y],...] or a list of them
    if (j.is_array() && !j.empty() && j[0].is_array() && !j[0].empty() && j[0][0].is_array()) {
      std::vector<GeodesicPath<2>> out;
      for (const auto& p : j) out.push_back(geodesic_from_json<2>(p));
      return out;
    }
    return {geodesic_from_json<2>(j)};
  } catch (const std::exception& e) {
    throw UsageError(std::string("--highlight: ") + e.what());
  }
}

}  // namespace detail

/// Runs the command line; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace detail;
  CLI::App app{"Lattice first-passage percolation laboratory", "geodesy"};
  app.set_version_flag("--version", GEODESY_VERSION);
  app.require_subcommand(1);

  EnvFlags pf;
  std::string source = "0,0", target, mask = "full", out_dir = ".";
  auto* passage = app.add_subcommand("passage", "passage time, distance map and geodesic");
  add_env_flags(passage, pf);
  passage->add_option("--source", source, "start vertex x")->capture_default_str();
  passage->add_option("--target", target, "point:x,y | set:x,y;x,y | halfspace:r0,r1:alpha")->required();
  passage->add_option("--mask", mask, "full | half-plane[:axis:threshold]")->capture_default_str();
  passage->add_option("--out", out_dir, "output directory")->capture_default_str();

  std::string config;
  unsigned workers = 1;
  std::string results = "results";
  auto* experiment = app.add_subcommand("experiment", "run a configured experiment");
  experiment->add_option("--config", config, "JSON config")->required();
  experiment->add_option("--workers", workers, "worker threads (0 = all cores)")->capture_default_str();
  experiment->add_option("--results", results, "results root directory")->capture_default_str();

  std::string input, svg_out, highlight;
  auto* render = app.add_subcommand("render", "SVG of a tree or partition JSON");
  render->add_option("--input", input, "tree or partition JSON")->required();
  render->add_option("--out", svg_out, "SVG file")->required();
  render->add_option("--highlight", highlight, "path JSON to overlay");

  EnvFlags ef;
  std::string env_out;
  auto* envc = app.add_subcommand("env", "dump an environment as a fixture document");
  add_env_flags(envc, ef);
  envc->add_option("--out", env_out, "fixture JSON")->required();

  EnvFlags tf;
  std::string root, tree_out;
  bool verify = false;
  auto* tree = app.add_subcommand("tree", "geodesic tree out of a root");
  add_env_flags(tree, tf);
  tree->add_option("--root", root, "root vertex (default origin)");
  tree->add_option("--out", tree_out, "tree JSON")->required();
  tree->add_flag("--verify", verify, "run the structural checks");

  EnvFlags cf;
  std::string seeds, part_out;
  auto* part = app.add_subcommand("partition", "competition partition between seeds");
  add_env_flags(part, cf);
  part->add_option("--seeds", seeds, "x,y;x,y;...")->required();
  part->add_option("--out", part_out, "partition JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kBadInput;
  }

  try {
    if (*passage) {
      return resolve_dim(pf, source) == 2 ? cmd_passage<2>(pf, source, target, mask, out_dir, out)
                                          : cmd_passage<3>(pf, source, target, mask, out_dir, out);
    }
    if (*experiment) return cmd_experiment(config, workers, results, out, err);
    if (*render) {
      const auto doc = load_json_file(input, "--input");
      std::string svg;
      try {
        svg = render_svg(doc, load_highlight(highlight));
      } catch (const UsageError&) {
        throw;
      } catch (const std::exception& e) {
        throw UsageError(std::string("--input: ") + e.what());
      }
      atomic_write(svg_out, svg);
      return kOk;
    }
    if (*envc) return resolve_dim(ef, "") == 2 ? cmd_env<2>(ef, env_out, out) : cmd_env<3>(ef, env_out, out);
    if (*tree)
      return resolve_dim(tf, root) == 2 ? cmd_tree<2>(tf, root, verify, tree_out, out)
                                        : cmd_tree<3>(tf, root, verify, tree_out, out);
    if (*part) {
      const auto first = split(seeds, ';');
      return resolve_dim(cf, first.empty() ? "" : first[0]) == 2 ? cmd_partition<2>(cf, seeds, part_out, out)
                                                                  : cmd_partition<3>(cf, seeds, part_out, out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const InfeasibleTarget& e) {
    err << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const Unreachable& e) {
    err << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const MarginError& e) {
    err << "margin: " << e.what() << '\n';
    return kMargin;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    err << "failed: " << e.what() << '\n';
    return kFailure;
  }
  return kBadInput;
}

}  // namespace geodesy::cli
