// Serial reference vs OpenMP kernels on training-sized inputs.
// Usage: bench_kernels [repetitions]
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>

#include "pclmp/kernels.hpp"

using namespace pclmp;
namespace k = pclmp::kernels;

namespace {

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (auto& x : m.data) x = g(rng);
  return m;
}

Matrix unit_rows(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  Matrix m = random_matrix(rng, r, c);
  for (std::size_t i = 0; i < r; ++i) l2_normalize_inplace(m.row(i));
  return m;
}

double best_ms(int reps, const std::function<void()>& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const char* name, double serial, double parallel, bool same) {
  std::printf("%-26s %10.3f %10.3f %8.2fx  %s\n", name, serial, parallel, serial / parallel,
              same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = argc > 1 ? std::atoi(argv[1]) : 5;
  std::mt19937_64 rng(1);
  std::printf("threads: %d, best of %d\n", k::max_threads(), reps);
  std::printf("%-26s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  // One modality of the 50-identity benchmark: 800 embeddings of size 64.
  const Matrix emb = unit_rows(rng, 800, 64);
  k::NeighborLists ns, np;
  const double rq_s = best_ms(reps, [&] { ns = k::serial::region_query_all(emb, 0.6); });
  const double rq_p = best_ms(reps, [&] { np = k::parallel::region_query_all(emb, 0.6); });
  row("region_query_all 800x64", rq_s, rq_p, ns == np);

  const Matrix gallery = unit_rows(rng, 800, 64);
  Matrix ss, sp;
  const double sim_s = best_ms(reps, [&] { ss = k::serial::similarity(emb, gallery); });
  const double sim_p = best_ms(reps, [&] { sp = k::parallel::similarity(emb, gallery); });
  row("similarity 800x800x64", sim_s, sim_p, ss == sp);

  // First encoder layer over a full modality: 800 x 32 -> 128.
  const Matrix x = random_matrix(rng, 800, 32), w = random_matrix(rng, 128, 32);
  const Vec b(128, 0.1);
  Matrix fs, fp;
  const double fw_s = best_ms(reps, [&] { fs = k::serial::affine_forward(x, w, b); });
  const double fw_p = best_ms(reps, [&] { fp = k::parallel::affine_forward(x, w, b); });
  row("affine_forward 800x32->128", fw_s, fw_p, fs == fp);

  const Matrix delta = random_matrix(rng, 800, 128);
  Matrix gws(128, 32), gwp(128, 32);
  Vec gbs(128), gbp(128);
  const double pg_s = best_ms(reps, [&] {
    std::fill(gws.data.begin(), gws.data.end(), 0.0);
    std::fill(gbs.begin(), gbs.end(), 0.0);
    k::serial::affine_param_grad(delta, x, gws, gbs);
  });
  const double pg_p = best_ms(reps, [&] {
    std::fill(gwp.data.begin(), gwp.data.end(), 0.0);
    std::fill(gbp.begin(), gbp.end(), 0.0);
    k::parallel::affine_param_grad(delta, x, gwp, gbp);
  });
  row("affine_param_grad", pg_s, pg_p, gws == gwp && gbs == gbp);

  Matrix is, ip;
  const double ig_s = best_ms(reps, [&] { is = k::serial::affine_input_grad(delta, w); });
  const double ig_p = best_ms(reps, [&] { ip = k::parallel::affine_input_grad(delta, w); });
  row("affine_input_grad", ig_s, ig_p, is == ip);
  return 0;
}
