#include <sstream>

#include "adc/fit.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace adc;
using namespace adc::testing;

TEST_CASE("sampling the Fig-2a single Gaussian reproduces its moments") {
  Histogram h = sample_histogram({1.0, 0.0, 1.5}, 100000, 1000, -5, 5, 42);
  double total = 0;
  for (double c : h.counts) total += c;
  CHECK(total == 100000.0);
  CHECK(std::fabs(h.mean() - 0.0) <= 0.02);
  CHECK(std::fabs(h.stddev() - 1.5) <= 0.02);
}

TEST_CASE("sampling is deterministic in the seed") {
  Histogram a = sample_histogram({1.0, 0.0, 1.5}, 20000, 500, -5, 5, 7);
  Histogram b = sample_histogram({1.0, 0.0, 1.5}, 20000, 500, -5, 5, 7);
  CHECK(a.counts == b.counts);
  Histogram c = sample_histogram({1.0, 0.0, 1.5}, 20000, 500, -5, 5, 8);
  CHECK(a.counts != c.counts);
}

TEST_CASE("degenerate ranges and counts are rejected") {
  CHECK_THROWS_WITH_AS(sample_histogram({1, 0, 1.5}, 100, 10, 2.0, 2.0, 1),
                       doctest::Contains("degenerate"), Error);
  CHECK_THROWS_AS(sample_histogram({1, 0, 1.5}, 0, 10, -5, 5, 1), Error);
}

TEST_CASE("chi2 core: perfect fit and quadratic scaling") {
  std::vector<double> counts = {4, 9, 16, 25};
  CHECK(chi2_from_predictions(counts, counts) == 0.0);

  std::vector<double> pred = {5, 7, 18, 22};
  double base = chi2_from_predictions(counts, pred);
  std::vector<double> pred2(4);
  for (int i = 0; i < 4; ++i) pred2[i] = counts[i] - 2 * (counts[i] - pred[i]);
  CHECK(chi2_from_predictions(counts, pred2) == doctest::Approx(4.0 * base).epsilon(1e-12));

  // Empty bins are skipped.
  std::vector<double> with_zero = {0, 9, 16, 25};
  CHECK(chi2_from_predictions(with_zero, pred) ==
        doctest::Approx(chi2_from_predictions({9, 16, 25}, {7, 18, 22})).epsilon(1e-12));
}

TEST_CASE("chi2 per degree of freedom is order one at the generating parameters") {
  FitEngine engine;
  Histogram h = sample_histogram({1.0, 0.0, 1.5}, 100000, 1000, -5, 5, 42);
  double chi2 = engine.chi2(h, {1.0, 0.0, 1.5});
  int nonempty = 0;
  for (double c : h.counts)
    if (c > 0) ++nonempty;
  double per_dof = chi2 / nonempty;
  CAPTURE(per_dof);
  CHECK(per_dof >= 0.5);
  CHECK(per_dof <= 2.0);
}

TEST_CASE("provider equivalence: per-bin model partials agree to 1e-6") {
  FitEngine engine;
  for (int k : {1, 2}) {
    std::vector<double> q = gauss_sum::default_truth(k, -5, 5);
    Histogram h = sample_histogram(q, 1000, 100, -5, 5, 3);
    std::vector<double> ad, num;
    for (int j = 0; j < h.bins; ++j) {
      engine.model_gradient(h.center(j), q, GradientProvider::AdReverse, ad);
      engine.model_gradient(h.center(j), q, GradientProvider::Numeric, num);
      REQUIRE(ad.size() == num.size());
      for (size_t i = 0; i < ad.size(); ++i) {
        CAPTURE(k);
        CAPTURE(j);
        CHECK(std::fabs(ad[i] - num[i]) <= 1e-6 * std::max(1.0, std::fabs(num[i])));
      }
    }
  }
}

TEST_CASE("K=1 fit converges near the generating parameters") {
  FitEngine engine;
  Histogram h = sample_histogram({1.0, 0.0, 1.5}, 30000, 400, -5, 5, 42);
  FitOptions opts;
  opts.budget = 300;
  FitResult r = engine.fit(h, GradientProvider::AdReverse, {0.8, 0.3, 1.2}, opts);
  CHECK(r.converged);
  REQUIRE(r.params.size() == 3);
  CHECK(std::fabs(r.params[1] - 0.0) <= 0.05);   // mean
  CHECK(std::fabs(r.params[2] - 1.5) <= 0.05);   // sigma
  CHECK(r.gradient_evals > 0);
  CHECK(r.iterations > 0);
}

TEST_CASE("providers walk the same iterate sequence for the first 10 steps") {
  FitEngine engine;
  Histogram h = sample_histogram({1.0, 0.0, 1.5}, 20000, 400, -5, 5, 9);
  FitOptions opts;
  opts.budget = 10;
  opts.trace_iterates = 10;
  FitResult ad = engine.fit(h, GradientProvider::AdReverse, {0.8, 0.3, 1.2}, opts);
  FitResult num = engine.fit(h, GradientProvider::Numeric, {0.8, 0.3, 1.2}, opts);
  REQUIRE(ad.iterates.size() == num.iterates.size());
  for (size_t it = 0; it < ad.iterates.size(); ++it)
    for (size_t i = 0; i < 3; ++i) {
      CAPTURE(it);
      CHECK(rel_diff(ad.iterates[it][i], num.iterates[it][i]) < 1e-5);
    }
}

TEST_CASE("budget zero returns the init unchanged and unconverged") {
  FitEngine engine;
  Histogram h = sample_histogram({1.0, 0.0, 1.5}, 5000, 100, -5, 5, 17);
  FitOptions opts;
  opts.budget = 0;
  FitResult r = engine.fit(h, GradientProvider::AdReverse, {0.8, 0.3, 1.2}, opts);
  CHECK(!r.converged);
  CHECK(r.iterations == 0);
  CHECK(r.params == std::vector<double>{0.8, 0.3, 1.2});
}

TEST_CASE("monotone objective along accepted iterations") {
  FitEngine engine;
  Histogram h = sample_histogram({1.0, 0.0, 1.5}, 20000, 300, -5, 5, 21);
  FitOptions opts;
  opts.budget = 40;
  opts.trace_iterates = 40;
  FitResult r = engine.fit(h, GradientProvider::AdReverse, {0.7, 0.5, 1.1}, opts);
  double prev = engine.chi2(h, r.iterates[0]);
  for (size_t i = 1; i < r.iterates.size(); ++i) {
    double cur = engine.chi2(h, r.iterates[i]);
    CHECK(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("sigma clamp engages instead of crossing zero") {
  FitEngine engine;
  Histogram h = sample_histogram({1.0, 0.0, 1.5}, 5000, 100, -5, 5, 29);
  FitOptions opts;
  opts.budget = 5;
  FitResult r = engine.fit(h, GradientProvider::AdReverse, {0.8, 0.3, -2.0}, opts);
  CHECK(r.sigma_clamps > 0);
  CHECK(r.params[2] >= opts.sigma_min);
}

TEST_CASE("newton flag is available and converges on K=1") {
  FitEngine engine;
  Histogram h = sample_histogram({1.0, 0.0, 1.5}, 20000, 300, -5, 5, 33);
  FitOptions opts;
  opts.budget = 60;
  opts.use_hessian = true;
  FitResult r = engine.fit(h, GradientProvider::AdReverse, {0.8, 0.3, 1.2}, opts);
  CHECK(r.converged);
  CHECK(std::fabs(r.params[1]) <= 0.05);
  CHECK(std::fabs(r.params[2] - 1.5) <= 0.05);
}

TEST_CASE("bench rows, CSV shape and reproducibility") {
  BenchConfig cfg;
  cfg.k_list = {1};
  cfg.events = 5000;
  cfg.bins = 120;
  cfg.repeats = 1;
  cfg.fit.budget = 40;
  std::vector<BenchRow> rows = bench_scaling(cfg);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].provider == GradientProvider::AdReverse);
  CHECK(rows[1].provider == GradientProvider::Numeric);
  CHECK(rows[0].params == 3);
  CHECK(rows[1].grad_opcount == 2 * 3 * rows[1].primal_opcount);

  std::string csv = bench_csv(rows);
  CHECK(csv.find("K,params,provider,median_wall_ns,grad_evals,primal_opcount,grad_opcount,"
                 "converged\n") == 0);
  CHECK(csv.find("ad-reverse") != std::string::npos);
  CHECK(csv.find("numeric") != std::string::npos);

  // Bit-identical rerun, wall columns excluded.
  std::vector<BenchRow> again = bench_scaling(cfg);
  REQUIRE(again.size() == rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].grad_evals == again[i].grad_evals);
    CHECK(rows[i].primal_opcount == again[i].primal_opcount);
    CHECK(rows[i].grad_opcount == again[i].grad_opcount);
    CHECK(rows[i].converged == again[i].converged);
    CHECK(rows[i].final_params == again[i].final_params);
  }

  std::string plot = bench_plot_table(csv);
  CHECK(plot.find("# params ad_reverse_wall_ns numeric_wall_ns\n") == 0);
  CHECK(plot.find("\n3 ") != std::string::npos);
}

TEST_CASE("empty K list is rejected") {
  BenchConfig cfg;
  CHECK_THROWS_WITH_AS(bench_scaling(cfg), doctest::Contains("empty K list"), Error);
}
