// Serial reference vs OpenMP kernels on synthetic inputs.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <random>

#include "lpal/graph.hpp"
#include "lpal/kernels.hpp"
#include "lpal/propagate.hpp"
#include "lpal/synthetic.hpp"

using namespace lpal;

template <typename F>
double time_ms(F&& f, int reps = 3) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double parallel, bool same) {
  std::printf("%-22s serial %9.2f ms  omp %9.2f ms  speedup %5.2fx  %s\n", name, serial, parallel,
              serial / parallel, same ? "identical" : "MISMATCH");
}

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::stoul(argv[1]) : 4000;
  const std::size_t d = 32;
  std::printf("n = %zu, d = %zu, threads = %d\n", n, d, omp_get_max_threads());
  const Dataset ds = make_blobs(n, 10, d, 2.0, 5.0, 1);
  const Matrix& x = ds.features();

  Matrix us, up;
  const double t_ns = time_ms([&] { us = kernels::normalize_rows(x, Exec::serial); });
  const double t_np = time_ms([&] { up = kernels::normalize_rows(x, Exec::parallel); });
  report("normalize_rows", t_ns, t_np, us == up);

  std::vector<std::vector<std::uint32_t>> ks, kp;
  const double t_ks = time_ms([&] { ks = kernels::top_k_neighbors(us, 50, Exec::serial); }, 1);
  const double t_kp = time_ms([&] { kp = kernels::top_k_neighbors(us, 50, Exec::parallel); }, 1);
  report("top_k_neighbors", t_ks, t_kp, ks == kp);

  const SparseGraph g = build_reciprocal_knn(x, 50);
  std::vector<double> v(n, 1.0), ys(n), yp(n);
  const double t_ss = time_ms([&] { for (int i = 0; i < 100; ++i) kernels::spmv(g.normalized, v, ys, Exec::serial); });
  const double t_sp = time_ms([&] { for (int i = 0; i < 100; ++i) kernels::spmv(g.normalized, v, yp, Exec::parallel); });
  report("spmv x100", t_ss, t_sp, ys == yp);

  Matrix centroids(100, d);
  for (std::size_t c = 0; c < 100; ++c)
    for (std::size_t j = 0; j < d; ++j) centroids(c, j) = x(c * (n / 100), j);
  std::vector<int> as(n), ap(n);
  std::vector<double> ds2(n), dp2(n);
  const double t_as = time_ms([&] { kernels::assign_nearest(x, centroids, as, ds2, Exec::serial); });
  const double t_ap = time_ms([&] { kernels::assign_nearest(x, centroids, ap, dp2, Exec::parallel); });
  report("assign_nearest", t_as, t_ap, as == ap && ds2 == dp2);

  std::vector<std::size_t> cand(n);
  for (std::size_t i = 0; i < n; ++i) cand[i] = i;
  std::vector<double> ms(n, 1e300), mp(n, 1e300);
  const double t_rs = time_ms([&] { for (std::size_t q = 0; q < 200; ++q) kernels::relax_min_distance(x, cand, x.row(q), ms, Exec::serial); });
  const double t_rp = time_ms([&] { for (std::size_t q = 0; q < 200; ++q) kernels::relax_min_distance(x, cand, x.row(q), mp, Exec::parallel); });
  report("relax_min_distance", t_rs, t_rp, ms == mp);

  Matrix y(n, 10);
  for (std::size_t i = 0; i < n; i += 50) y(i, i % 10) = 1.0;
  Matrix hs, hp;
  const double t_ps = time_ms([&] { hs = solve_propagation(g, y, 0.99, {}, false); }, 1);
  const double t_pp = time_ms([&] { hp = solve_propagation(g, y, 0.99, {}, true); }, 1);
  report("solve_propagation", t_ps, t_pp, hs == hp);
  return 0;
}
