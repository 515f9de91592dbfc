#include <sstream>

#include "adc/launch.hpp"
#include "adc/parser.hpp"
#include "adc/tooling.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace adc;
using namespace adc::testing;

namespace {

Module kernels_with_derivatives() {
  Module m = load_corpus("kernels.dsl");
  ensure_called_derivatives(m);
  return m;
}

}  // namespace

TEST_CASE("launch configuration from N/256+1 x 256") {
  const int64_t n = 512;
  LaunchConfig cfg{n / 256 + 1, 256, n};
  CHECK(cfg.grid_dim == 3);
  CHECK(cfg.block_dim == 256);
  CHECK(cfg.grid_dim * cfg.block_dim == 768);
  CHECK_NOTHROW(cfg.validate());
  CHECK_THROWS_WITH_AS((LaunchConfig{1, 256, 512}.validate()),
                       doctest::Contains("does not cover"), Error);
  CHECK_THROWS_WITH_AS((LaunchConfig{0, 256, 512}.validate()),
                       doctest::Contains("positive"), Error);
}

TEST_CASE("global index arithmetic: block 1, thread 3 of 256 is 259") {
  Module m = parse_or_throw(
      "global void widx(real[] out) { integer i = blockIdx * blockDim + threadIdx; if (i < N) { "
      "out[i] = i; } }");
  Program p(std::move(m));
  BufferSet buffers;
  buffers.arrays["out"] = std::vector<double>(512, -1.0);
  launch(p, "widx", {3, 256, 512}, buffers);
  const auto& out = buffers.arrays["out"];
  CHECK(out[259] == 259.0);
  for (int64_t i = 0; i < 512; ++i) CHECK(out[static_cast<size_t>(i)] == static_cast<double>(i));
}

TEST_CASE("auto-derivation fills in gauss gradients called by kernels") {
  Module m = load_corpus("kernels.dsl");
  std::vector<std::string> added = ensure_called_derivatives(m);
  CHECK(m.find("gauss_grad_0_1") != nullptr);
  CHECK(m.find("gauss_grad") != nullptr);
  CHECK(added.size() == 2);
}

TEST_CASE("race classification of the Listing-style kernel and the shared-slot variant") {
  Module m = kernels_with_derivatives();

  AccessReport ok = race_check(m, "compute");
  CHECK(!ok.has_hazard());
  CHECK(ok.find("x")->access == Access::SharedRead);
  CHECK(ok.find("p")->access == Access::SharedRead);
  CHECK(ok.find("sigma")->access == Access::SharedRead);
  CHECK(ok.find("dx")->access == Access::PrivatePerThread);
  CHECK(ok.find("dp")->access == Access::PrivatePerThread);

  AccessReport bad = race_check(m, "compute_shared");
  CHECK(bad.has_hazard());
  CHECK(bad.find("dx")->access == Access::PrivatePerThread);
  CHECK(bad.find("dsigma")->access == Access::SharedWriteHazard);

  AccessReport empty = race_check(m, "noop");
  CHECK(empty.entries.empty());

  CHECK_THROWS_WITH_AS(race_check(m, "gauss"), doctest::Contains("not a global kernel"), Error);
}

TEST_CASE("parallel launch is bit-identical to the sequential loop") {
  Module m = kernels_with_derivatives();
  Program p(std::move(m));
  const int64_t n = 512;
  LaunchConfig cfg{n / 256 + 1, 256, n};

  PointSampler s(31337);
  std::vector<double> x(n), px(n);
  for (int64_t i = 0; i < n; ++i) {
    x[static_cast<size_t>(i)] = s.uniform(-3, 3);
    px[static_cast<size_t>(i)] = s.uniform(-2, 2);
  }
  const double sigma = 1.3;

  // Independent oracle: one kernel frame per index, plain loop.
  std::vector<double> dx_seq(n, 0.0), dp_seq(n, 0.0);
  {
    ArgPack args;
    args.add_array(x).add_array(px).add_real(sigma).add_array(dx_seq).add_array(dp_seq);
    for (int64_t g = 0; g < cfg.grid_dim * cfg.block_dim; ++g) {
      EvalOptions opts;
      opts.has_thread_ctx = true;
      opts.block_idx = g / cfg.block_dim;
      opts.block_dim = cfg.block_dim;
      opts.thread_idx = g % cfg.block_dim;
      opts.problem_n = n;
      p.eval("compute", args, opts);
    }
  }

  BufferSet buffers;
  buffers.arrays["x"] = x;
  buffers.arrays["p"] = px;
  buffers.scalars["sigma"] = sigma;
  buffers.arrays["dx"] = std::vector<double>(n, 0.0);
  buffers.arrays["dp"] = std::vector<double>(n, 0.0);
  LaunchStats stats = launch(p, "compute", cfg, buffers);

  CHECK(buffers.arrays["dx"] == dx_seq);
  CHECK(buffers.arrays["dp"] == dp_seq);

  // Coverage: 512 threads ran the guarded call (3 statements), the padding
  // 256 ran only the index declaration and the guard (2 statements).
  REQUIRE(stats.thread_statements.size() == 768);
  int active = 0, idle = 0;
  for (uint32_t c : stats.thread_statements) {
    if (c == 3) ++active;
    else if (c == 2) ++idle;
  }
  CHECK(active == 512);
  CHECK(idle == 256);
}

TEST_CASE("hazardous launches are refused unless forced") {
  Module m = kernels_with_derivatives();
  Program p(std::move(m));
  const int64_t n = 64;
  BufferSet buffers;
  PointSampler s(5);
  buffers.arrays["x"] = s.rng() % 2 ? std::vector<double>(n, 0.5) : std::vector<double>(n, 0.25);
  buffers.arrays["p"] = std::vector<double>(n, 0.0);
  buffers.scalars["sigma"] = 1.0;
  buffers.arrays["dx"] = std::vector<double>(n, 0.0);
  buffers.arrays["dp"] = std::vector<double>(n, 0.0);
  buffers.arrays["dsigma"] = std::vector<double>(1, 0.0);

  LaunchConfig cfg{1, 64, n};
  CHECK_THROWS_WITH_AS(launch(p, "compute_shared", cfg, buffers),
                       doctest::Contains("launch refused"), Error);

  // Forced sequential run still matches the unforced accumulation exactly.
  LaunchOptions forced;
  forced.unsafe = true;
  forced.sequential = true;
  CHECK_NOTHROW(launch(p, "compute_shared", cfg, buffers, forced));
  double seq_total = buffers.arrays["dsigma"][0];
  CHECK(seq_total != 0.0);

  // Forced parallel run is race-free (atomic accumulation) but the
  // summation order is unspecified; the total stays finite.
  buffers.arrays["dsigma"][0] = 0.0;
  buffers.arrays["dx"].assign(static_cast<size_t>(n), 0.0);
  buffers.arrays["dp"].assign(static_cast<size_t>(n), 0.0);
  LaunchOptions par;
  par.unsafe = true;
  CHECK_NOTHROW(launch(p, "compute_shared", cfg, buffers, par));
  CHECK(std::isfinite(buffers.arrays["dsigma"][0]));
  CHECK(rel_diff(buffers.arrays["dsigma"][0], seq_total) < 1e-9);
}

TEST_CASE("buffer validation") {
  Module m = kernels_with_derivatives();
  Program p(std::move(m));
  BufferSet buffers;
  buffers.arrays["x"] = std::vector<double>(10, 0.0);  // too short for n=512
  buffers.arrays["p"] = std::vector<double>(512, 0.0);
  buffers.scalars["sigma"] = 1.0;
  buffers.arrays["dx"] = std::vector<double>(512, 0.0);
  buffers.arrays["dp"] = std::vector<double>(512, 0.0);
  CHECK_THROWS_WITH_AS(launch(p, "compute", {3, 256, 512}, buffers),
                       doctest::Contains("length"), Error);
  buffers.arrays.erase("x");
  CHECK_THROWS_WITH_AS(launch(p, "compute", {3, 256, 512}, buffers),
                       doctest::Contains("missing buffer 'x'"), Error);
}

TEST_CASE("CSV buffer format round-trips") {
  CsvTable t;
  t.names = {"x", "dx"};
  t.columns = {{1.5, 2.25, -3.0}, {0.0, 0.5, 1.0}};
  std::ostringstream out;
  write_csv(out, t);
  std::istringstream in(out.str());
  CsvTable back = read_csv(in);
  CHECK(back.names == t.names);
  CHECK(back.columns == t.columns);
}
