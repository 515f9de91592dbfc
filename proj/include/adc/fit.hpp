/// Gaussian-sum histogram fitting with interchangeable gradient providers:
/// reverse-mode AD of the DSL model versus central finite differences of the
/// same model. Both run through the same interpreter, so operation counters
/// and wall time are directly comparable.
///
/// Objective (documented here because upstream tooling leaves it open):
///   m_j   = model(center_j)                        (DSL gsum)
///   S     = sum over all bins of m_j
///   pred_j = events * m_j / S
///   chi2  = sum over bins with count_j > 0 of (count_j - pred_j)^2 / count_j
/// Weights are the observed counts (Neyman convention); empty bins are
/// skipped in the sum but still contribute to the normalization S.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adc/eval.hpp"

namespace adc {

struct Histogram {
  int bins = 0;
  double lo = 0.0;
  double hi = 0.0;
  uint64_t events = 0;
  std::vector<double> counts;

  double width() const { return (hi - lo) / bins; }
  double center(int i) const { return lo + (i + 0.5) * width(); }
  double mean() const;
  double stddev() const;
};

/// Flat parameter layout [a0, mu0, sg0, a1, mu1, sg1, ...].
namespace gauss_sum {
double eval(double x, const std::vector<double>& q);              // closed form
std::vector<double> default_truth(int k, double lo, double hi);   // k=1 -> {1, 0, 1.5}
std::vector<double> perturbed_init(const std::vector<double>& truth);
}  // namespace gauss_sum

/// Draws `events` samples from the normalized model over [lo, hi) by
/// rejection sampling, deterministically from the seed, and bins them.
Histogram sample_histogram(const std::vector<double>& params, int64_t events, int bins,
                           double lo, double hi, uint64_t seed);

/// Core quadratic form, exposed for direct testing.
double chi2_from_predictions(const std::vector<double>& counts,
                             const std::vector<double>& predictions);

enum class GradientProvider { AdReverse, Numeric };

const char* provider_name(GradientProvider p);

struct FitOptions {
  int budget = 400;
  double grad_tol = 1e-6;       // max-norm stopping threshold
  double chi2_rel_tol = 1e-12;  // relative decrease stopping threshold
  double sigma_min = 1e-3;      // lower clamp for sigma coordinates
  double armijo_c1 = 1e-4;      // sufficient-decrease constant; shrink is 0.5
  bool use_hessian = false;     // Newton step from a numerical Hessian of the
                                // provided gradient (off by default)
  int trace_iterates = 0;       // record the first N accepted iterates
};

struct FitResult {
  std::vector<double> params;
  double chi2 = 0.0;
  int iterations = 0;
  uint64_t gradient_evals = 0;
  uint64_t gradient_wall_ns = 0;  // wall clock around gradient computation only
  bool converged = false;
  int sigma_clamps = 0;
  std::vector<std::vector<double>> iterates;
  OpCounters primal_call_counts;    // one model evaluation
  OpCounters gradient_call_counts;  // one per-bin model gradient
};

/// Owns the compiled DSL model and its generated gradient. Thread-safe for
/// concurrent const use.
class FitEngine {
 public:
  FitEngine();
  ~FitEngine();
  FitEngine(FitEngine&&) noexcept;
  FitEngine& operator=(FitEngine&&) noexcept;

  double model(double x, const std::vector<double>& q) const;
  OpCounters model_counts(double x, const std::vector<double>& q) const;

  /// Per-bin model partials dm/dq at x, from the chosen provider.
  void model_gradient(double x, const std::vector<double>& q, GradientProvider provider,
                      std::vector<double>& out) const;
  OpCounters model_gradient_counts(double x, const std::vector<double>& q,
                                   GradientProvider provider) const;

  double chi2(const Histogram& h, const std::vector<double>& q) const;
  /// Full objective gradient, chained through the bin sum and the shared
  /// normalization S with per-bin model partials from the provider.
  void chi2_gradient(const Histogram& h, const std::vector<double>& q,
                     GradientProvider provider, std::vector<double>& out) const;

  FitResult fit(const Histogram& h, GradientProvider provider, std::vector<double> init,
                const FitOptions& opts = {}) const;

  const std::string& gradient_fn_name() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct BenchConfig {
  std::vector<int> k_list;
  int64_t events = 100000;
  int repeats = 1;
  uint64_t seed = 42;
  int bins = 1000;
  double lo = -5.0;
  double hi = 5.0;
  FitOptions fit;
};

struct BenchRow {
  int k = 0;
  int params = 0;
  GradientProvider provider{};
  uint64_t median_wall_ns = 0;
  uint64_t grad_evals = 0;
  uint64_t primal_opcount = 0;
  uint64_t grad_opcount = 0;
  bool converged = false;
  std::vector<double> final_params;
};

std::vector<BenchRow> bench_scaling(const BenchConfig& cfg);

/// CSV columns: K,params,provider,median_wall_ns,grad_evals,primal_opcount,
/// grad_opcount,converged.
std::string bench_csv(const std::vector<BenchRow>& rows);

/// gnuplot-ready whitespace table of wall time vs parameter count, one
/// column per provider, from a previously written CSV.
std::string bench_plot_table(const std::string& csv_text);

}  // namespace adc
