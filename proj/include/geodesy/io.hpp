#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "geodesy/busemann.hpp"
#include "geodesy/format.hpp"
#include "geodesy/geostruct.hpp"

namespace geodesy {

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes through a sibling temporary file and renames it into place, so a
/// reader never sees a partial file.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw std::runtime_error("short write to " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

/// FNV-1a over the bytes of `s`.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

inline std::string config_hash(const std::string& config_text) { return hex64(fnv1a64(config_text)); }

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string config_hash;
  std::string tool_version;
  std::uint64_t seed0 = 0;
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const {
    return {{"config_hash", config_hash}, {"tool_version", tool_version}, {"seed0", seed0},
            {"started", started},         {"finished", finished},         {"outputs", outputs}};
  }
};

// ---------------------------------------------------------------------------
// Serializers

template <std::size_t D>
nlohmann::json box_json(const Box<D>& box) {
  return {{"lo", std::vector<int>(box.lo().begin(), box.lo().end())},
          {"hi", std::vector<int>(box.hi().begin(), box.hi().end())}};
}

/// One row per box vertex: coordinates, T (or "inf"), predecessor axis and sign.
template <std::size_t D>
std::string passage_csv(const PassageMap<D>& map) {
  std::ostringstream out;
  out << coord_header<D>() << ",dist,pred_axis,pred_sign\n";
  const auto& box = map.box();
  for (std::size_t i = 0; i < box.size(); ++i) {
    out << join_coords<D>(box.vertex(i)) << ',' << format_real(map.raw(i)) << ',';
    const auto code = map.pred_code(i);
    if (code != kNoDirection) out << code / 2 << ',' << ((code & 1) ? "+" : "-");
    else out << ',';
    out << '\n';
  }
  return out.str();
}

template <std::size_t D>
nlohmann::json geodesic_json(const GeodesicPath<D>& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& v : path.vertices) arr.push_back(std::vector<int>(v.begin(), v.end()));
  return arr;
}

template <std::size_t D>
GeodesicPath<D> geodesic_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("path must be an array of vertices");
  GeodesicPath<D> path;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != D) throw std::invalid_argument("path vertex has the wrong dimension");
    Vertex<D> v{};
    for (std::size_t i = 0; i < D; ++i) v[i] = p.at(i).get<int>();
    path.vertices.push_back(v);
  }
  return path;
}

/// {"kind": "tree", "root", "box", "parent": [direction code per vertex], "dist"}
template <std::size_t D>
nlohmann::json tree_json(const GeodesicTree<D>& tree) {
  nlohmann::json dist = nlohmann::json::array();
  for (double d : tree.dist) dist.push_back(std::isfinite(d) ? nlohmann::json(d) : nlohmann::json(nullptr));
  std::vector<int> parent(tree.parent.begin(), tree.parent.end());
  return {{"kind", "tree"},
          {"root", std::vector<int>(tree.root.begin(), tree.root.end())},
          {"box", box_json<D>(tree.box)},
          {"parent", parent},
          {"dist", dist}};
}

/// {"kind": "partition", "seeds", "box", "labels": [label per vertex], "boundary_reach"}
template <std::size_t D>
nlohmann::json partition_json(const InfectionPartition<D>& part) {
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& s : part.seeds) seeds.push_back(std::vector<int>(s.begin(), s.end()));
  return {{"kind", "partition"},
          {"seeds", seeds},
          {"box", box_json<D>(part.box)},
          {"labels", part.label},
          {"boundary_reach", std::vector<bool>(part.boundary_reach.begin(), part.boundary_reach.end())},
          {"contested", part.contested},
          {"connectivity_violations", part.connectivity_violations}};
}

template <std::size_t D>
std::string ray_csv(const RaySequence<D>& seq) {
  std::ostringstream out;
  out << "n,term\n";
  for (std::size_t k = 0; k < seq.terms.size(); ++k) out << seq.indices[k] << ',' << format_real(seq.terms[k]) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Fixtures

template <std::size_t D>
Box<D> box_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("lo") || !j.contains("hi")) throw std::invalid_argument("box needs lo and hi");
  const auto lo = j.at("lo").get<std::vector<int>>();
  const auto hi = j.at("hi").get<std::vector<int>>();
  if (lo.size() != D || hi.size() != D) throw std::invalid_argument("box has the wrong dimension");
  Vertex<D> l{}, h{};
  std::copy(lo.begin(), lo.end(), l.begin());
  std::copy(hi.begin(), hi.end(), h.begin());
  return Box<D>(l, h);
}

/// Dimension of a fixture document ({"box": {"lo": [...], ...}, ...}).
inline std::size_t fixture_dim(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("box") || !j["box"].contains("lo") || !j["box"]["lo"].is_array())
    throw std::invalid_argument("fixture needs a box with lo and hi");
  return j["box"]["lo"].size();
}

/// {"box": {"lo", "hi"}, "edges": [{"u": [..], "v": [..], "w": weight}, ...]}
/// listing every edge of the box exactly once.
template <std::size_t D>
WeightField<D> fixture_from_json(const nlohmann::json& j) {
  const auto box = box_from_json<D>(j.at("box"));
  if (!j.contains("edges") || !j["edges"].is_array()) throw std::invalid_argument("fixture needs an edges array");
  WeightTable<D> table;
  for (const auto& e : j["edges"]) {
    Vertex<D> u{}, v{};
    const auto us = e.at("u").get<std::vector<int>>();
    const auto vs = e.at("v").get<std::vector<int>>();
    if (us.size() != D || vs.size() != D) throw std::invalid_argument("fixture edge has the wrong dimension");
    std::copy(us.begin(), us.end(), u.begin());
    std::copy(vs.begin(), vs.end(), v.begin());
    const auto id = make_edge<D>(u, v);
    if (table.count(id)) throw std::invalid_argument("fixture lists edge " + to_string<D>(u) + " twice");
    table[id] = e.at("w").get<double>();
  }
  return WeightField<D>::fixture(box, table);
}

template <std::size_t D>
nlohmann::json fixture_to_json(const WeightField<D>& env) {
  nlohmann::json edges = nlohmann::json::array();
  const auto& box = env.box();
  for (std::size_t i = 0; i < box.size(); ++i) {
    const auto v = box.vertex(i);
    for (std::size_t a = 0; a < D; ++a) {
      if (v[a] == box.hi()[a]) continue;
      const auto u = v + unit<D>(int(a));
      edges.push_back({{"u", std::vector<int>(v.begin(), v.end())},
                       {"v", std::vector<int>(u.begin(), u.end())},
                       {"w", env.weight(EdgeId<D>{v, int(a)})}});
    }
  }
  return {{"box", box_json<D>(box)}, {"edges", edges}};
}

// ---------------------------------------------------------------------------
// SVG

namespace detail {

inline const char* label_colour(int label) {
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  if (label == kContested) return "#000000";
  if (label == kUnlabelled) return "#ffffff";
  return palette[std::size_t(label - 1) % 10];
}

inline std::string grey(double t) {
  const int c = int(std::lround(235.0 - 200.0 * std::clamp(t, 0.0, 1.0)));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c, c, c);
  return buf;
}

}  // namespace detail

/// Renders a 2-d tree or partition document as an SVG grid, one cell per
/// vertex. Trees are shaded by depth; partitions coloured by label.
inline std::string render_svg(const nlohmann::json& doc, const std::vector<GeodesicPath<2>>& highlight = {}) {
  if (!doc.is_object() || !doc.contains("kind")) throw std::invalid_argument("render input needs a \"kind\" field");
  const auto kind = doc.at("kind").get<std::string>();
  if (kind != "tree" && kind != "partition") throw std::invalid_argument("render input kind must be tree or partition");
  const auto box = box_from_json<2>(doc.at("box"));
  const std::size_t n = box.size();
  constexpr int cell = 12;
  constexpr int legend_h = 40;
  const int w = box.extent(0) * cell, h = box.extent(1) * cell;

  std::vector<std::string> fill(n);
  std::vector<std::pair<std::string, std::string>> legend;
  if (kind == "partition") {
    const auto labels = doc.at("labels").get<std::vector<int>>();
    if (labels.size() != n) throw std::invalid_argument("partition labels do not match the box");
    int k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      fill[i] = detail::label_colour(labels[i]);
      k = std::max(k, labels[i]);
    }
    for (int l = 1; l <= k; ++l) legend.emplace_back(detail::label_colour(l), "label " + std::to_string(l));
    legend.emplace_back(detail::label_colour(kContested), "contested");
  } else {
    const auto parent = doc.at("parent").get<std::vector<int>>();
    if (parent.size() != n) throw std::invalid_argument("tree parents do not match the box");
    std::vector<long> depth(n, -1);
    long max_depth = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::size_t> chain;
      std::size_t cur = i;
      while (depth[cur] < 0 && parent[cur] != kNoDirection) {
        chain.push_back(cur);
        if (chain.size() > n) throw std::invalid_argument("tree parents contain a cycle");
        const auto next = box.vertex(cur) + step<2>(std::int8_t(parent[cur]));
        if (!box.contains(next)) throw std::invalid_argument("tree parent leaves the box");
        cur = box.index(next);
      }
      if (depth[cur] < 0) depth[cur] = 0;
      for (std::size_t k = 0; k < chain.size(); ++k) depth[chain[k]] = depth[cur] + long(chain.size() - k);
      for (auto c : chain) max_depth = std::max(max_depth, depth[c]);
    }
    for (std::size_t i = 0; i < n; ++i) fill[i] = detail::grey(max_depth ? double(depth[i]) / double(max_depth) : 0.0);
    legend.emplace_back(detail::grey(0.0), "depth 0");
    legend.emplace_back(detail::grey(1.0), "depth " + std::to_string(max_depth));
  }

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << std::max(w, 160) << "\" height=\"" << h + legend_h
      << "\" viewBox=\"0 0 " << std::max(w, 160) << ' ' << h + legend_h << "\">\n";
  svg << "<g id=\"cells\">\n";
  // row 0 of the picture is the top (largest second coordinate)
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = box.vertex(i);
    const int x = (v[0] - box.lo()[0]) * cell, y = (box.hi()[1] - v[1]) * cell;
    svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
        << fill[i] << "\"/>\n";
  }
  svg << "</g>\n";
  if (kind == "tree") {
    const auto root = doc.at("root").get<std::vector<int>>();
    svg << "<circle id=\"root\" cx=\"" << (root.at(0) - box.lo()[0]) * cell + cell / 2 << "\" cy=\""
        << (box.hi()[1] - root.at(1)) * cell + cell / 2 << "\" r=\"" << cell / 3 << "\" fill=\"#d62728\"/>\n";
  }
  for (std::size_t p = 0; p < highlight.size(); ++p) {
    svg << "<polyline class=\"highlight\" fill=\"none\" stroke=\"#e41a1c\" stroke-width=\"3\" points=\"";
    for (std::size_t i = 0; i < highlight[p].size(); ++i) {
      const auto& v = highlight[p][i];
      if (i) svg << ' ';
      svg << (v[0] - box.lo()[0]) * cell + cell / 2 << ',' << (box.hi()[1] - v[1]) * cell + cell / 2;
    }
    svg << "\"/>\n";
  }
  svg << "<g id=\"legend\" font-family=\"monospace\" font-size=\"10\">\n";
  int lx = 4;
  for (const auto& [colour, text] : legend) {
    svg << "<rect x=\"" << lx << "\" y=\"" << h + 8 << "\" width=\"10\" height=\"10\" fill=\"" << colour
        << "\" stroke=\"#000000\"/>";
    svg << "<text x=\"" << lx + 14 << "\" y=\"" << h + 17 << "\">" << text << "</text>\n";
    lx += 20 + int(text.size()) * 7;
  }
  if (!highlight.empty())
    svg << "<line x1=\"4\" y1=\"" << h + 30 << "\" x2=\"14\" y2=\"" << h + 30
        << "\" stroke=\"#e41a1c\" stroke-width=\"3\"/><text x=\"18\" y=\"" << h + 34 << "\">path</text>\n";
  svg << "</g>\n</svg>\n";
  return svg.str();
}

}  // namespace geodesy
