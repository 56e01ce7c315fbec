// Experiment configuration documents and the runner shared by the CLI and tests.
#pragma once

#include <cstdint>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "geodesy/experiments.hpp"
#include "geodesy/format.hpp"

namespace geodesy {

/// Schema violation in a config document, tagged with a 1-based line number.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line), message_(msg) {}
  int line() const { return line_; }
  const std::string& message() const { return message_; }

 private:
  int line_;
  std::string message_;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"shape", "coexistence", "directedness", "coalescence", "halfplane", "gm"};
  return names;
}

struct ExperimentConfig {
  std::string experiment;
  DistributionSpec dist = Exponential{1.0};
  int L = 0;
  std::size_t reps = 0;
  std::uint64_t seed0 = 0;
  int dim = 2;
  nlohmann::json params = nlohmann::json::object();
  std::string text;  // the document as read
};

namespace detail {

inline int line_at(const std::string& text, std::size_t pos) {
  int line = 1;
  for (std::size_t i = 0; i < pos && i < text.size(); ++i) line += text[i] == '\n';
  return line;
}

/// Line of the first `"key"` at or after `from`; the line of `from` if absent.
inline int line_of_key(const std::string& text, const std::string& key, std::size_t from = 0) {
  const auto pos = text.find('"' + key + '"', from);
  return line_at(text, pos == std::string::npos ? from : pos);
}

class Checker {
 public:
  Checker(const std::string& text, const nlohmann::json& obj, std::size_t from = 0)
      : text_(text), obj_(obj), from_(from) {}

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(line_of_key(text_, key, from_), msg);
  }

  bool has(const std::string& key) const { return obj_.contains(key); }
  const nlohmann::json& raw(const std::string& key) const { return obj_.at(key); }

  void only(const std::set<std::string>& allowed) const {
    for (const auto& [k, v] : obj_.items())
      if (!allowed.count(k)) fail(k, "unknown field \"" + k + "\"");
  }

  void require(const std::string& key) const {
    if (!has(key)) throw ConfigError(line_at(text_, from_), "missing required field \"" + key + "\"");
  }

  long long integer(const std::string& key, long long lo, long long hi) const {
    require(key);
    const auto& v = obj_.at(key);
    if (!v.is_number_integer()) fail(key, "\"" + key + "\" must be an integer");
    const auto x = v.get<long long>();
    if (x < lo || x > hi)
      fail(key, "\"" + key + "\" must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
  }

  long long integer_or(const std::string& key, long long dflt, long long lo, long long hi) const {
    return has(key) ? integer(key, lo, hi) : dflt;
  }

  double real(const std::string& key) const {
    require(key);
    const auto& v = obj_.at(key);
    if (!v.is_number()) fail(key, "\"" + key + "\" must be a number");
    return v.get<double>();
  }

  double real_or(const std::string& key, double dflt) const { return has(key) ? real(key) : dflt; }

  std::uint64_t seed(const std::string& key) const {
    require(key);
    const auto& v = obj_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<long long>() >= 0) return std::uint64_t(v.get<long long>());
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (!s.empty() && s.find_first_not_of("0123456789") == std::string::npos && s.size() <= 20) {
        try {
          return std::stoull(s);
        } catch (const std::out_of_range&) {
        }
      }
    }
    fail(key, "\"" + key + "\" must be an unsigned 64-bit decimal integer");
  }

  std::vector<double> reals(const std::string& key) const {
    require(key);
    const auto& v = obj_.at(key);
    if (!v.is_array() || v.empty()) fail(key, "\"" + key + "\" must be a nonempty array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) fail(key, "\"" + key + "\" must be a nonempty array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  std::vector<int> ints(const std::string& key) const {
    require(key);
    const auto& v = obj_.at(key);
    if (!v.is_array() || v.empty()) fail(key, "\"" + key + "\" must be a nonempty array of integers");
    std::vector<int> out;
    for (const auto& x : v) {
      if (!x.is_number_integer()) fail(key, "\"" + key + "\" must be a nonempty array of integers");
      out.push_back(x.get<int>());
    }
    return out;
  }

  template <std::size_t D>
  std::vector<Vertex<D>> vertices(const std::string& key) const {
    require(key);
    const auto& v = obj_.at(key);
    const std::string msg = "\"" + key + "\" must be a nonempty array of " + std::to_string(D) + "-vectors of integers";
    if (!v.is_array() || v.empty()) fail(key, msg);
    std::vector<Vertex<D>> out;
    for (const auto& p : v) {
      if (!p.is_array() || p.size() != D) fail(key, msg);
      Vertex<D> x{};
      for (std::size_t i = 0; i < D; ++i) {
        if (!p[i].is_number_integer()) fail(key, msg);
        x[i] = p[i].get<int>();
      }
      out.push_back(x);
    }
    return out;
  }

  template <std::size_t D>
  RealVector<D> vector(const std::string& key) const {
    const auto xs = reals(key);
    if (xs.size() != D) fail(key, "\"" + key + "\" must have " + std::to_string(D) + " components");
    RealVector<D> r{};
    for (std::size_t i = 0; i < D; ++i) r[i] = xs[i];
    return r;
  }

 private:
  const std::string& text_;
  const nlohmann::json& obj_;
  std::size_t from_;
};

}  // namespace detail

/// Parses and validates a config document.
inline ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(detail::line_at(text, e.byte == 0 ? 0 : e.byte - 1), std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError(1, "config must be a JSON object");
  const detail::Checker top(text, doc);
  top.only({"experiment", "dist", "L", "reps", "seed0", "dim", "params"});

  ExperimentConfig cfg;
  cfg.text = text;
  top.require("experiment");
  if (!doc["experiment"].is_string()) top.fail("experiment", "\"experiment\" must be a string");
  cfg.experiment = doc["experiment"].get<std::string>();
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), cfg.experiment) == names.end())
    top.fail("experiment", "unknown experiment \"" + cfg.experiment + "\"");

  top.require("dist");
  try {
    cfg.dist = distribution_from_json(doc["dist"]);
  } catch (const std::exception& e) {
    top.fail("dist", std::string("invalid \"dist\": ") + e.what());
  }
  cfg.L = int(top.integer("L", 1, 1 << 20));
  cfg.reps = std::size_t(top.integer("reps", 1, 100'000'000));
  cfg.seed0 = top.seed("seed0");
  cfg.dim = int(top.integer_or("dim", 2, 2, 3));
  if (top.has("params")) {
    if (!doc["params"].is_object()) top.fail("params", "\"params\" must be an object");
    cfg.params = doc["params"];
  }
  if (cfg.experiment == "halfplane" && cfg.dim != 2) top.fail("dim", "the halfplane experiment requires dim = 2");

  // check the params block against the experiment's schema now, so bad
  // configs fail before any computation
  const auto from = text.find("\"params\"");
  const detail::Checker p(text, cfg.params, from == std::string::npos ? 0 : from);
  const std::string& e = cfg.experiment;
  auto check_dims = [&](auto tag) {
    constexpr std::size_t D = decltype(tag)::value;
    if (e == "shape") {
      p.only({"directions", "sizes"});
      if (p.has("directions") && !p.raw("directions").is_number_integer()) {
        for (const auto& d : p.raw("directions"))
          if (!d.is_array() || d.size() != D) p.fail("directions", "\"directions\" must be a count or a list of vectors");
      } else if (p.has("directions") && p.integer("directions", 3, 4096) && D != 2) {
        p.fail("directions", "a direction count is only meaningful for dim = 2");
      }
      if (p.has("sizes")) p.ints("sizes");
    } else if (e == "coexistence") {
      p.only({"ell", "seeds"});
      if (p.has("ell") && p.has("seeds")) p.fail("seeds", "give either \"ell\" or \"seeds\", not both");
      if (p.has("ell")) p.integer("ell", 1, 1 << 20);
      if (p.has("seeds")) p.template vertices<D>("seeds");
    } else if (e == "directedness") {
      p.only({"zeta", "alphas"});
      if (p.has("zeta")) p.template vector<D>("zeta");
      p.reals("alphas");
    } else if (e == "coalescence") {
      p.only({"offsets", "alpha", "bin_width"});
      p.template vertices<D>("offsets");
      p.real("alpha");
      p.integer_or("bin_width", 10, 1, 1 << 20);
    } else if (e == "halfplane") {
      p.only({"alpha"});
      if (p.real("alpha") <= 0) p.fail("alpha", "\"alpha\" must be positive");
    } else if (e == "gm") {
      p.only({"ell", "n"});
      p.integer("ell", 1, 1 << 20);
      p.integer("n", 1, 1 << 20);
    }
  };
  if (cfg.dim == 2)
    check_dims(std::integral_constant<std::size_t, 2>{});
  else
    check_dims(std::integral_constant<std::size_t, 3>{});
  return cfg;
}

/// Records and summary of one run.
struct ExperimentOutcome {
  std::string records_csv;
  nlohmann::json summary;
  std::size_t units = 0;     // records subject to the margin policy
  std::size_t excluded = 0;  // of which excluded

  double excluded_fraction() const { return units ? double(excluded) / double(units) : 0.0; }
};

namespace detail {

inline std::string bit(bool b) { return b ? "1" : "0"; }

template <std::size_t D>
nlohmann::json vertex_json(const Vertex<D>& v) {
  return nlohmann::json(std::vector<int>(v.begin(), v.end()));
}

template <std::size_t D>
nlohmann::json real_json(const RealVector<D>& v) {
  return nlohmann::json(std::vector<double>(v.begin(), v.end()));
}

inline nlohmann::json interval_json(const Interval& i) { return {{"lo", i.lo}, {"hi", i.hi}}; }

inline nlohmann::json base_summary(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["experiment"] = cfg.experiment;
  nlohmann::json d;
  to_json(d, cfg.dist);
  j["dist"] = d;
  j["L"] = cfg.L;
  j["dim"] = cfg.dim;
  j["reps"] = cfg.reps;
  j["seed0"] = cfg.seed0;
  j["params"] = cfg.params;
  return j;
}

template <std::size_t D>
ExperimentOutcome run_shape(const ExperimentConfig& cfg, unsigned workers) {
  const detail::Checker p(cfg.text, cfg.params);
  std::vector<RealVector<D>> dirs;
  if (!p.has("directions")) {
    dirs = default_directions<D>();
  } else if (p.raw("directions").is_number_integer()) {
    dirs = default_directions<D>(std::size_t(p.raw("directions").get<int>()));
  } else {
    for (const auto& d : p.raw("directions")) {
      RealVector<D> r{};
      for (std::size_t i = 0; i < D; ++i) r[i] = d[i].get<double>();
      dirs.push_back(r);
    }
  }
  const auto sizes = p.has("sizes") ? p.ints("sizes") : std::vector<int>{64, 128, 256};
  const auto est = estimate_shape<D>(cfg.dist, dirs, sizes, cfg.L, cfg.reps, cfg.seed0, workers);

  ExperimentOutcome out;
  std::ostringstream csv;
  csv << "rep,seed,direction,size," << coord_header<D>() << ",passage,g,subadditivity_violations,excluded\n";
  for (const auto& r : est.records)
    for (std::size_t k = 0; k < est.directions.size(); ++k)
      for (std::size_t s = 0; s < est.sizes.size(); ++s) {
        const auto& v = est.points[k][s];
        csv << r.rep << ',' << r.seed << ',' << k << ',' << est.sizes[s] << ',' << join_coords<D>(v) << ','
            << format_real(r.passage[k][s]) << ',' << format_real(r.passage[k][s] / euclidean_norm<D>(v)) << ','
            << r.subadditivity_violations << ',' << bit(r.excluded) << '\n';
      }
  out.records_csv = csv.str();
  out.units = est.reps;
  out.excluded = est.excluded;

  auto j = base_summary(cfg);
  j["estimate"] = est.g_hat(0).mean;
  j["stderr"] = est.g_hat(0).stderr_;
  nlohmann::json gs = nlohmann::json::array();
  for (std::size_t k = 0; k < est.directions.size(); ++k) {
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t s = 0; s < est.sizes.size(); ++s)
      per.push_back({{"n", est.sizes[s]},
                     {"point", vertex_json<D>(est.points[k][s])},
                     {"mean", est.g[k][s].mean},
                     {"stderr", est.g[k][s].stderr_}});
    gs.push_back({{"direction", real_json<D>(est.directions[k])},
                  {"boundary", real_json<D>(est.boundary[k])},
                  {"sizes", per}});
  }
  j["g_hat"] = gs;
  nlohmann::json sym = nlohmann::json::array();
  for (const auto& c : est.symmetry)
    sym.push_back({{"i", c.i}, {"j", c.j}, {"difference", c.difference}, {"combined_stderr", c.combined_stderr},
                   {"ok", c.ok}});
  j["symmetry"] = sym;
  nlohmann::json conv = nlohmann::json::array();
  for (const auto& c : est.convexity)
    conv.push_back({{"k", c.k}, {"slack", c.slack.mean}, {"stderr", c.slack.stderr_}, {"ok", c.ok}});
  j["convexity"] = conv;
  j["symmetric"] = est.symmetric();
  j["convex"] = est.convex();
  j["subadditivity_checks"] = est.subadditivity_checks;
  j["subadditivity_violations"] = est.subadditivity_violations;
  j["excluded"] = est.excluded;
  out.summary = j;
  return out;
}

template <std::size_t D>
ExperimentOutcome run_coexistence(const ExperimentConfig& cfg, unsigned workers) {
  const detail::Checker p(cfg.text, cfg.params);
  const auto s = p.has("seeds")
                     ? competition_experiment<D>(cfg.dist, p.template vertices<D>("seeds"), cfg.L, cfg.reps,
                                                 cfg.seed0, workers)
                     : coexistence_experiment<D>(cfg.dist, int(p.integer_or("ell", 4, 1, 1 << 20)), cfg.L, cfg.reps,
                                                 cfg.seed0, workers);
  ExperimentOutcome out;
  std::ostringstream csv;
  csv << "rep,seed";
  for (std::size_t i = 1; i <= s.seeds.size(); ++i) csv << ",count" << i << ",reach" << i << ",inner_reach" << i;
  csv << ",coexist,contested,connectivity_violations\n";
  for (const auto& r : s.records) {
    csv << r.rep << ',' << r.seed;
    for (std::size_t i = 0; i < s.seeds.size(); ++i)
      csv << ',' << r.counts[i + 1] << ',' << bit(r.reach[i]) << ',' << bit(r.inner_reach[i]);
    csv << ',' << bit(r.all_reach) << ',' << r.contested << ',' << r.connectivity_violations << '\n';
  }
  out.records_csv = csv.str();
  out.units = s.reps;

  auto j = base_summary(cfg);
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& v : s.seeds) seeds.push_back(vertex_json<D>(v));
  j["seeds"] = seeds;
  j["estimate"] = s.fraction;
  j["stderr"] = std::sqrt(s.fraction * (1.0 - s.fraction) / double(s.reps));
  j["successes"] = s.successes;
  j["ci95"] = interval_json(s.ci95);
  j["ci99"] = interval_json(s.ci99);
  j["contested"] = s.contested;
  j["connectivity_violations"] = s.connectivity_violations;
  j["excluded"] = 0;
  out.summary = j;
  return out;
}

template <std::size_t D>
ExperimentOutcome run_directedness(const ExperimentConfig& cfg, unsigned workers) {
  const detail::Checker p(cfg.text, cfg.params);
  const RealVector<D> zeta = p.has("zeta") ? p.template vector<D>("zeta") : as_real<D>(unit<D>(0));
  const auto st = directedness_experiment<D>(cfg.dist, zeta, p.reals("alphas"), cfg.L, cfg.reps, cfg.seed0, workers);
  ExperimentOutcome out;
  std::ostringstream csv;
  csv << "rep,seed,alpha," << coord_header<D>("hit") << ",angle,length,degenerate,excluded\n";
  for (const auto& r : st.records)
    csv << r.rep << ',' << r.seed << ',' << format_real(r.alpha) << ',' << join_coords<D>(r.hit) << ','
        << format_real(r.angle) << ',' << r.length << ',' << bit(r.degenerate) << ',' << bit(r.excluded) << '\n';
  out.records_csv = csv.str();
  for (const auto& r : st.records) out.units += !r.degenerate;
  out.excluded = st.excluded;

  auto j = base_summary(cfg);
  j["zeta"] = real_json<D>(st.zeta);
  nlohmann::json sp = nlohmann::json::array();
  for (const auto& a : st.spreads)
    sp.push_back({{"alpha", a.alpha},
                  {"used", a.used},
                  {"degenerate", a.degenerate},
                  {"excluded", a.excluded},
                  {"q25", a.q25},
                  {"median", a.median},
                  {"q75", a.q75},
                  {"iqr", a.iqr},
                  {"iqr_stderr", a.iqr_stderr},
                  {"mean_abs", a.mean_abs}});
  j["spreads"] = sp;
  j["estimate"] = st.spreads.back().iqr;
  j["stderr"] = st.spreads.back().iqr_stderr;
  j["excluded"] = st.excluded;
  out.summary = j;
  return out;
}

template <std::size_t D>
ExperimentOutcome run_coalescence(const ExperimentConfig& cfg, unsigned workers) {
  const detail::Checker p(cfg.text, cfg.params);
  const auto s = coalescence_experiment<D>(cfg.dist, p.template vertices<D>("offsets"), p.real("alpha"), cfg.L,
                                           cfg.reps, cfg.seed0, workers,
                                           std::size_t(p.integer_or("bin_width", 10, 1, 1 << 20)));
  ExperimentOutcome out;
  std::ostringstream csv;
  csv << "rep,seed,offset," << coord_header<D>("o") << ",met,merged,depth,suffix_identical,excluded\n";
  for (const auto& r : s.records)
    csv << r.rep << ',' << r.seed << ',' << r.offset_index << ',' << join_coords<D>(s.offsets[r.offset_index].offset)
        << ',' << bit(r.met) << ',' << bit(r.merged) << ',' << r.depth << ',' << bit(r.suffix_identical) << ','
        << bit(r.excluded) << '\n';
  out.records_csv = csv.str();
  out.units = s.records.size();
  out.excluded = s.excluded;

  auto j = base_summary(cfg);
  nlohmann::json offs = nlohmann::json::array();
  for (const auto& f : s.offsets)
    offs.push_back({{"offset", vertex_json<D>(f.offset)},
                    {"used", f.used},
                    {"merged", f.merged},
                    {"frequency", f.frequency},
                    {"stderr", f.stderr_},
                    {"ci95", interval_json(f.ci95)},
                    {"depth_histogram", f.depth_histogram}});
  j["offsets"] = offs;
  j["bin_width"] = s.bin_width;
  j["estimate"] = s.offsets.front().frequency;
  j["stderr"] = s.offsets.front().stderr_;
  j["suffix_violations"] = s.suffix_violations;
  j["excluded"] = s.excluded;
  out.summary = j;
  return out;
}

template <std::size_t D>
ExperimentOutcome run_halfplane(const ExperimentConfig& cfg, unsigned workers) {
  const detail::Checker p(cfg.text, cfg.params);
  const auto s = halfplane_compare<D>(cfg.dist, p.real("alpha"), cfg.L, cfg.reps, cfg.seed0, workers);
  ExperimentOutcome out;
  std::ostringstream csv;
  csv << "rep,seed,a0,a1,b0,b1,busemann_top,busemann_bottom,delta_proxy,crossing,c0,c1,violation,excluded\n";
  for (const auto& r : s.records) {
    const auto c = r.crossing_vertex.value_or(Vertex<2>{0, 0});
    csv << r.rep << ',' << r.seed << ',' << join_coords<2>(r.hit_top) << ',' << join_coords<2>(r.hit_bottom) << ','
        << format_real(r.busemann_top) << ',' << format_real(r.busemann_bottom) << ','
        << format_real(r.delta_proxy) << ',' << bit(r.crossing_vertex.has_value()) << ','
        << (r.crossing_vertex ? join_coords<2>(c) : std::string(",")) << ',' << bit(r.violation) << ','
        << bit(r.excluded) << '\n';
  }
  out.records_csv = csv.str();
  out.units = s.reps;
  out.excluded = s.excluded;

  auto j = base_summary(cfg);
  j["estimate"] = s.delta.mean;
  j["stderr"] = s.delta.stderr_;
  j["crossings"] = s.crossings;
  j["violations"] = s.violations;
  j["excluded"] = s.excluded;
  out.summary = j;
  return out;
}

template <std::size_t D>
ExperimentOutcome run_gm(const ExperimentConfig& cfg, unsigned workers) {
  const detail::Checker p(cfg.text, cfg.params);
  const auto s = gm_statistic<D>(cfg.dist, int(p.integer("ell", 1, 1 << 20)), int(p.integer("n", 1, 1 << 20)), cfg.L,
                                 cfg.reps, cfg.seed0, workers);
  ExperimentOutcome out;
  std::ostringstream csv;
  csv << "rep,seed,mean_busemann,scaled_passage,passage_ell,bound_violations,excluded\n";
  for (const auto& r : s.records)
    csv << r.rep << ',' << r.seed << ',' << format_real(r.mean_busemann) << ',' << format_real(r.scaled_passage) << ','
        << format_real(r.passage_ell) << ',' << r.bound_violations << ',' << bit(r.excluded) << '\n';
  out.records_csv = csv.str();
  out.units = s.reps;
  out.excluded = s.excluded;

  auto j = base_summary(cfg);
  j["estimate"] = s.difference;
  j["stderr"] = s.combined_stderr;
  j["busemann"] = {{"mean", s.busemann.mean}, {"stderr", s.busemann.stderr_}};
  j["passage"] = {{"mean", s.passage.mean}, {"stderr", s.passage.stderr_}};
  j["consistent"] = s.consistent();
  j["bound_violations"] = s.bound_violations;
  j["excluded"] = s.excluded;
  out.summary = j;
  return out;
}

template <std::size_t D>
ExperimentOutcome run_dim(const ExperimentConfig& cfg, unsigned workers) {
  const auto& e = cfg.experiment;
  if (e == "shape") return run_shape<D>(cfg, workers);
  if (e == "coexistence") return run_coexistence<D>(cfg, workers);
  if (e == "directedness") return run_directedness<D>(cfg, workers);
  if (e == "coalescence") return run_coalescence<D>(cfg, workers);
  if (e == "halfplane") return run_halfplane<D>(cfg, workers);
  if (e == "gm") return run_gm<D>(cfg, workers);
  throw std::invalid_argument("unknown experiment " + e);
}

}  // namespace detail

/// Runs a validated config. Throws MarginError when the requested geometry
/// does not fit in the box.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg, unsigned workers = 1) {
  return cfg.dim == 2 ? detail::run_dim<2>(cfg, workers) : detail::run_dim<3>(cfg, workers);
}

}  // namespace geodesy
