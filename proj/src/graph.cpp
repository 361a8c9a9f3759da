#include "lpal/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "lpal/error.hpp"
#include "lpal/io.hpp"

namespace lpal {

double similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw InvalidArgument("similarity: dimension mismatch");
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw InvalidArgument("similarity: zero vector");
  const double cosine = std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
  const double pos = std::max(0.0, cosine);
  return pos * pos * pos;
}

CsrMatrix csr_from_edges(std::size_t n, std::span<const Edge> edges) {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(n);
  for (const auto& e : edges) {
    if (e.i >= n || e.j >= n) throw InvalidArgument("edge index out of range");
    if (e.i == e.j) throw InvalidArgument("self loop at node " + std::to_string(e.i));
    rows[e.i].emplace_back(static_cast<std::uint32_t>(e.j), e.weight);
    rows[e.j].emplace_back(static_cast<std::uint32_t>(e.i), e.weight);
  }
  CsrMatrix w;
  w.n = n;
  w.row_ptr.assign(1, 0);
  for (auto& r : rows) {
    std::sort(r.begin(), r.end());
    for (std::size_t t = 0; t < r.size(); ++t) {
      if (t > 0 && r[t].first == r[t - 1].first) throw InvalidArgument("duplicate edge");
      w.col.push_back(r[t].first);
      w.val.push_back(r[t].second);
    }
    w.row_ptr.push_back(w.col.size());
  }
  return w;
}

SparseGraph build_reciprocal_knn(const Matrix& features, std::size_t k, Exec exec) {
  const std::size_t n = features.rows();
  if (k == 0) throw InvalidArgument("build_reciprocal_knn: k must be positive");
  if (k >= n)
    throw InvalidArgument("build_reciprocal_knn: k = " + std::to_string(k) + " must be < n = " +
                          std::to_string(n));
  const Matrix unit = kernels::normalize_rows(features, exec);
  const auto lists = kernels::top_k_neighbors(unit, k, exec);

  std::vector<std::vector<std::uint32_t>> sorted = lists;
  for (auto& l : sorted) std::sort(l.begin(), l.end());
  auto lists_contains = [&](std::size_t a, std::size_t b) {
    return std::binary_search(sorted[a].begin(), sorted[a].end(), static_cast<std::uint32_t>(b));
  };

  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (auto j : sorted[i]) {
      if (j <= i || !lists_contains(j, i)) continue;
      double cosine = 0.0;
      const auto ui = unit.row(i);
      const auto uj = unit.row(j);
      for (std::size_t t = 0; t < ui.size(); ++t) cosine += ui[t] * uj[t];
      const double pos = std::clamp(cosine, 0.0, 1.0);
      const double weight = pos * pos * pos;
      if (weight > 0.0) edges.push_back({i, j, weight});
    }
  }
  return make_graph(csr_from_edges(n, edges));
}

CsrMatrix normalize(const CsrMatrix& w) {
  if (!w.is_symmetric()) throw InvalidArgument("normalize: adjacency is not symmetric");
  std::vector<double> inv_sqrt(w.n, 0.0);
  for (std::size_t r = 0; r < w.n; ++r) {
    double d = 0.0;
    for (std::size_t e = w.row_ptr[r]; e < w.row_ptr[r + 1]; ++e) d += w.val[e];
    inv_sqrt[r] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  CsrMatrix out = w;
  for (std::size_t r = 0; r < w.n; ++r) {
    for (std::size_t e = w.row_ptr[r]; e < w.row_ptr[r + 1]; ++e) {
      // scale product is commutative, so (r,c) and (c,r) stay bitwise equal
      out.val[e] = w.val[e] * (inv_sqrt[r] * inv_sqrt[w.col[e]]);
    }
  }
  return out;
}

SparseGraph make_graph(CsrMatrix w) {
  if (w.row_ptr.size() != w.n + 1 || w.col.size() != w.val.size())
    throw InvalidArgument("make_graph: malformed CSR");
  for (std::size_t r = 0; r < w.n; ++r) {
    for (std::size_t e = w.row_ptr[r]; e < w.row_ptr[r + 1]; ++e) {
      if (w.col[e] == r) throw InvalidArgument("make_graph: nonzero diagonal at " + std::to_string(r));
      if (!(w.val[e] >= 0.0) || !std::isfinite(w.val[e]))
        throw InvalidArgument("make_graph: negative or non-finite weight");
    }
  }
  SparseGraph g;
  g.normalized = normalize(w);
  g.degrees.assign(w.n, 0.0);
  for (std::size_t r = 0; r < w.n; ++r)
    for (std::size_t e = w.row_ptr[r]; e < w.row_ptr[r + 1]; ++e) g.degrees[r] += w.val[e];
  g.adjacency = std::move(w);
  return g;
}

std::string format_edge_list(const CsrMatrix& w) {
  std::string out;
  char buf[64];
  for (std::size_t r = 0; r < w.n; ++r) {
    for (std::size_t e = w.row_ptr[r]; e < w.row_ptr[r + 1]; ++e) {
      if (w.col[e] <= r) continue;
      out += std::to_string(r) + ' ' + std::to_string(w.col[e]) + ' ';
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), w.val[e]);
      out.append(buf, ptr);
      out += '\n';
    }
  }
  return out;
}

void write_edge_list(const std::filesystem::path& path, const CsrMatrix& w) {
  write_file_atomic(path, format_edge_list(w));
}

CsrMatrix read_edge_list(const std::filesystem::path& path, std::size_t min_nodes) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::size_t n = min_nodes;
  std::vector<Edge> edges;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Edge e{};
    std::string extra;
    if (!(ls >> e.i >> e.j >> e.weight) || (ls >> extra)) throw ParseError("expected 'i j weight'", lineno);
    if (e.i == e.j) throw ParseError("self loop", lineno);
    if (e.weight < 0.0 || !std::isfinite(e.weight)) throw ParseError("bad edge weight", lineno);
    n = std::max(n, std::max(e.i, e.j) + 1);
    edges.push_back(e);
  }
  return csr_from_edges(n, edges);
}

}  // namespace lpal
