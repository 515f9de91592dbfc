#include "adc/fit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "adc/numdiff.hpp"
#include "adc/parser.hpp"
#include "adc/transform.hpp"

namespace adc {

double Histogram::mean() const {
  double sum = 0.0, total = 0.0;
  for (int i = 0; i < bins; ++i) {
    sum += counts[i] * center(i);
    total += counts[i];
  }
  return total > 0 ? sum / total : 0.0;
}

double Histogram::stddev() const {
  double mu = mean();
  double sum = 0.0, total = 0.0;
  for (int i = 0; i < bins; ++i) {
    double d = center(i) - mu;
    sum += counts[i] * d * d;
    total += counts[i];
  }
  return total > 0 ? std::sqrt(sum / total) : 0.0;
}

namespace gauss_sum {

double eval(double x, const std::vector<double>& q) {
  double acc = 0.0;
  for (size_t j = 0; j + 2 < q.size(); j += 3) {
    double z = (x - q[j + 1]) / q[j + 2];
    acc += q[j] * std::exp(-0.5 * z * z);
  }
  return acc;
}

std::vector<double> default_truth(int k, double lo, double hi) {
  static const double sigmas[3] = {1.5, 1.0, 0.75};
  std::vector<double> q;
  q.reserve(static_cast<size_t>(k) * 3);
  for (int j = 0; j < k; ++j) {
    q.push_back(1.0);
    q.push_back(lo + (hi - lo) * (j + 1) / (k + 1));
    q.push_back(sigmas[j % 3]);
  }
  return q;
}

std::vector<double> perturbed_init(const std::vector<double>& truth) {
  std::vector<double> q = truth;
  for (size_t j = 0; j + 2 < q.size(); j += 3) {
    q[j] *= 0.8;
    q[j + 1] += 0.3;
    q[j + 2] *= 0.8;
  }
  return q;
}

}  // namespace gauss_sum

Histogram sample_histogram(const std::vector<double>& params, int64_t events, int bins,
                           double lo, double hi, uint64_t seed) {
  if (!(hi > lo)) throw Error(ErrorKind::Eval, "degenerate histogram range");
  if (events <= 0 || bins <= 0) throw Error(ErrorKind::Eval, "events and bins must be positive");
  // Envelope for rejection sampling: grid maximum with headroom.
  double peak = 0.0;
  const int grid = 2048;
  for (int i = 0; i <= grid; ++i) {
    double x = lo + (hi - lo) * i / grid;
    peak = std::max(peak, gauss_sum::eval(x, params));
  }
  if (!(peak > 0.0)) throw Error(ErrorKind::Eval, "model is zero over the range");
  peak *= 1.05;

  Histogram h;
  h.bins = bins;
  h.lo = lo;
  h.hi = hi;
  h.events = static_cast<uint64_t>(events);
  h.counts.assign(static_cast<size_t>(bins), 0.0);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int64_t accepted = 0;
  while (accepted < events) {
    double x = lo + (hi - lo) * u01(rng);
    double y = peak * u01(rng);
    if (y < gauss_sum::eval(x, params)) {
      int idx = std::min(bins - 1, static_cast<int>((x - lo) / h.width()));
      h.counts[static_cast<size_t>(idx)] += 1.0;
      ++accepted;
    }
  }
  return h;
}

double chi2_from_predictions(const std::vector<double>& counts,
                             const std::vector<double>& predictions) {
  double sum = 0.0;
  for (size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] <= 0.0) continue;
    double r = counts[i] - predictions[i];
    sum += r * r / counts[i];
  }
  return sum;
}

const char* provider_name(GradientProvider p) {
  return p == GradientProvider::AdReverse ? "ad-reverse" : "numeric";
}

namespace {

// The DSL model shared by every fit; k is a runtime argument so one compiled
// program serves all component counts.
constexpr const char* kModelSource = R"(
device host real gsum(real x, real[] q, integer k) {
  real acc = 0;
  for (integer j = 0; j < k; j += 1) {
    integer b = 3 * j;
    real amp = q[b];
    real mu = q[b + 1];
    real sg = q[b + 2];
    real z = (x - mu) / sg;
    acc = acc + amp * exp(-0.5 * z * z);
  }
  return acc;
}
)";

}  // namespace

struct FitEngine::Impl {
  std::unique_ptr<Program> prog;
  std::string grad_name;

  ArgPack pack(double x, const std::vector<double>& q) const {
    ArgPack args;
    args.add_real(x);
    // gsum only reads q; the interpreter shares the buffer, no copy.
    args.add_array(const_cast<double*>(q.data()), static_cast<int64_t>(q.size()));
    args.add_int(static_cast<int64_t>(q.size()) / 3);
    return args;
  }
};

FitEngine::FitEngine() : impl_(std::make_unique<Impl>()) {
  Module m = parse_or_throw(kModelSource);
  AdjointProgram grad = differentiate_gradient(*m.find("gsum"), {"q"});
  impl_->grad_name = grad.derived.name;
  m.functions.push_back(std::move(grad.derived));
  impl_->prog = std::make_unique<Program>(std::move(m));
}

FitEngine::~FitEngine() = default;
FitEngine::FitEngine(FitEngine&&) noexcept = default;
FitEngine& FitEngine::operator=(FitEngine&&) noexcept = default;

const std::string& FitEngine::gradient_fn_name() const { return impl_->grad_name; }

double FitEngine::model(double x, const std::vector<double>& q) const {
  ArgPack args = impl_->pack(x, q);
  return *impl_->prog->eval("gsum", args).value;
}

OpCounters FitEngine::model_counts(double x, const std::vector<double>& q) const {
  ArgPack args = impl_->pack(x, q);
  return impl_->prog->eval("gsum", args).counts;
}

void FitEngine::model_gradient(double x, const std::vector<double>& q,
                               GradientProvider provider, std::vector<double>& out) const {
  out.assign(q.size(), 0.0);
  if (provider == GradientProvider::AdReverse) {
    ArgPack args = impl_->pack(x, q);
    args.add_array(out.data(), static_cast<int64_t>(out.size()));
    impl_->prog->eval(impl_->grad_name, args);
  } else {
    ArgPack args = impl_->pack(x, q);
    CentralGradient g = central_gradient(*impl_->prog, "gsum", args, {"q"});
    out = std::move(g.values);
  }
}

OpCounters FitEngine::model_gradient_counts(double x, const std::vector<double>& q,
                                            GradientProvider provider) const {
  if (provider == GradientProvider::AdReverse) {
    std::vector<double> slot(q.size(), 0.0);
    ArgPack args = impl_->pack(x, q);
    args.add_array(slot);
    return impl_->prog->eval(impl_->grad_name, args).counts;
  }
  ArgPack args = impl_->pack(x, q);
  return central_gradient(*impl_->prog, "gsum", args, {"q"}).counts;
}

double FitEngine::chi2(const Histogram& h, const std::vector<double>& q) const {
  double s = 0.0;
  std::vector<double> m(static_cast<size_t>(h.bins));
  for (int j = 0; j < h.bins; ++j) {
    m[static_cast<size_t>(j)] = model(h.center(j), q);
    s += m[static_cast<size_t>(j)];
  }
  double sum = 0.0;
  const double scale = static_cast<double>(h.events) / s;
  for (int j = 0; j < h.bins; ++j) {
    double c = h.counts[static_cast<size_t>(j)];
    if (c <= 0.0) continue;
    double r = c - scale * m[static_cast<size_t>(j)];
    sum += r * r / c;
  }
  return sum;
}

void FitEngine::chi2_gradient(const Histogram& h, const std::vector<double>& q,
                              GradientProvider provider, std::vector<double>& out) const {
  const size_t np = q.size();
  out.assign(np, 0.0);
  const double events = static_cast<double>(h.events);

  std::vector<double> m(static_cast<size_t>(h.bins));
  double s = 0.0;
  for (int j = 0; j < h.bins; ++j) {
    m[static_cast<size_t>(j)] = model(h.center(j), q);
    s += m[static_cast<size_t>(j)];
  }
  // chi2 depends on each bin's model value directly and through the shared
  // normalization S: d chi2 / d m_l = -2 r_l/c_l * E/S + (E/S^2) * T.
  double t_sum = 0.0;
  for (int j = 0; j < h.bins; ++j) {
    double c = h.counts[static_cast<size_t>(j)];
    if (c <= 0.0) continue;
    double r = c - events * m[static_cast<size_t>(j)] / s;
    t_sum += 2.0 * r * m[static_cast<size_t>(j)] / c;
  }
  const double s_coef = events / (s * s) * t_sum;

  std::vector<double> bin_grad(np);
  for (int j = 0; j < h.bins; ++j) {
    double c = h.counts[static_cast<size_t>(j)];
    double w = s_coef;
    if (c > 0.0) {
      double r = c - events * m[static_cast<size_t>(j)] / s;
      w += -2.0 * r / c * events / s;
    }
    if (w == 0.0) continue;
    model_gradient(h.center(j), q, provider, bin_grad);
    for (size_t i = 0; i < np; ++i) out[i] += w * bin_grad[i];
  }
}

namespace {

struct ClampResult {
  std::vector<double> params;
  int clamps = 0;
};

ClampResult clamp_sigmas(std::vector<double> q, double sigma_min) {
  ClampResult r;
  for (size_t j = 2; j < q.size(); j += 3) {
    if (q[j] < sigma_min) {
      q[j] = sigma_min;
      ++r.clamps;
    }
  }
  r.params = std::move(q);
  return r;
}

// Solves (H + lambda I) d = g in place by Gaussian elimination with partial
// pivoting; returns false on a vanishing pivot.
bool solve_damped(std::vector<double> h, std::vector<double> g, double lambda, int n,
                  std::vector<double>& out) {
  for (int i = 0; i < n; ++i) h[static_cast<size_t>(i) * n + i] += lambda;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(h[static_cast<size_t>(r) * n + col]) >
          std::fabs(h[static_cast<size_t>(pivot) * n + col]))
        pivot = r;
    if (std::fabs(h[static_cast<size_t>(pivot) * n + col]) < 1e-30) return false;
    if (pivot != col) {
      for (int c = 0; c < n; ++c)
        std::swap(h[static_cast<size_t>(pivot) * n + c], h[static_cast<size_t>(col) * n + c]);
      std::swap(g[static_cast<size_t>(pivot)], g[static_cast<size_t>(col)]);
    }
    for (int r = col + 1; r < n; ++r) {
      double f = h[static_cast<size_t>(r) * n + col] / h[static_cast<size_t>(col) * n + col];
      for (int c = col; c < n; ++c)
        h[static_cast<size_t>(r) * n + c] -= f * h[static_cast<size_t>(col) * n + c];
      g[static_cast<size_t>(r)] -= f * g[static_cast<size_t>(col)];
    }
  }
  out.assign(static_cast<size_t>(n), 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double v = g[static_cast<size_t>(r)];
    for (int c = r + 1; c < n; ++c) v -= h[static_cast<size_t>(r) * n + c] * out[static_cast<size_t>(c)];
    out[static_cast<size_t>(r)] = v / h[static_cast<size_t>(r) * n + r];
  }
  return true;
}

}  // namespace

FitResult FitEngine::fit(const Histogram& h, GradientProvider provider,
                         std::vector<double> init, const FitOptions& opts) const {
  using clock = std::chrono::steady_clock;
  FitResult res;
  ClampResult start = clamp_sigmas(std::move(init), opts.sigma_min);
  res.sigma_clamps += start.clamps;
  std::vector<double> q = std::move(start.params);
  const size_t np = q.size();

  res.primal_call_counts = model_counts(h.center(h.bins / 2), q);
  res.gradient_call_counts = model_gradient_counts(h.center(h.bins / 2), q, provider);

  double cur = chi2(h, q);
  if (opts.trace_iterates > 0) res.iterates.push_back(q);

  std::vector<double> g(np), direction(np), hess;
  for (int iter = 0; iter < opts.budget; ++iter) {
    auto t0 = clock::now();
    chi2_gradient(h, q, provider, g);
    res.gradient_wall_ns +=
        static_cast<uint64_t>(std::chrono::nanoseconds(clock::now() - t0).count());
    ++res.gradient_evals;

    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::fabs(v));
    if (gmax <= opts.grad_tol) {
      res.converged = true;
      break;
    }

    direction = g;
    if (opts.use_hessian) {
      // The paper-era setup: second order from numerical differentiation of
      // the provided gradient.
      const int n = static_cast<int>(np);
      hess.assign(np * np, 0.0);
      std::vector<double> gp(np), gm(np);
      std::vector<double> probe = q;
      for (int c = 0; c < n; ++c) {
        double x = probe[static_cast<size_t>(c)];
        double step = std::cbrt(2.220446049250313e-16) * std::max(1.0, std::fabs(x));
        probe[static_cast<size_t>(c)] = x + step;
        auto h0 = clock::now();
        chi2_gradient(h, probe, provider, gp);
        probe[static_cast<size_t>(c)] = x - step;
        chi2_gradient(h, probe, provider, gm);
        res.gradient_wall_ns +=
            static_cast<uint64_t>(std::chrono::nanoseconds(clock::now() - h0).count());
        res.gradient_evals += 2;
        probe[static_cast<size_t>(c)] = x;
        for (int r = 0; r < n; ++r)
          hess[static_cast<size_t>(r) * n + c] =
              (gp[static_cast<size_t>(r)] - gm[static_cast<size_t>(r)]) / (2.0 * step);
      }
      double lambda = 0.0;
      bool ok = false;
      for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
        ok = solve_damped(hess, g, lambda, n, direction);
        if (ok) {
          double descent = 0.0;
          for (size_t i = 0; i < np; ++i) descent += g[i] * direction[i];
          ok = descent > 0.0;
        }
        lambda = lambda == 0.0 ? 1e-6 : lambda * 10.0;
      }
      if (!ok) direction = g;  // fall back to steepest descent
    }

    double gd = 0.0;
    for (size_t i = 0; i < np; ++i) gd += g[i] * direction[i];

    double t = 1.0;
    bool accepted = false;
    double next = 0.0;
    std::vector<double> cand;
    while (t >= 1e-18) {
      std::vector<double> trial = q;
      for (size_t i = 0; i < np; ++i) trial[i] -= t * direction[i];
      ClampResult cl = clamp_sigmas(std::move(trial), opts.sigma_min);
      double c2 = chi2(h, cl.params);
      if (c2 <= cur - opts.armijo_c1 * t * gd) {
        accepted = true;
        next = c2;
        cand = std::move(cl.params);
        res.sigma_clamps += cl.clamps;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // No admissible decrease down to the step floor: the achievable
      // relative decrease is below threshold, i.e. numerical stationarity.
      res.converged = true;
      break;
    }

    double rel_dec = (cur - next) / std::max(1.0, std::fabs(cur));
    q = std::move(cand);
    cur = next;
    ++res.iterations;
    if (opts.trace_iterates > res.iterations) res.iterates.push_back(q);
    if (rel_dec <= opts.chi2_rel_tol) {
      res.converged = true;
      break;
    }
  }

  res.params = std::move(q);
  res.chi2 = cur;
  return res;
}

std::vector<BenchRow> bench_scaling(const BenchConfig& cfg) {
  if (cfg.k_list.empty()) throw Error(ErrorKind::Eval, "empty K list");
  FitEngine engine;
  std::vector<BenchRow> rows;
  for (int k : cfg.k_list) {
    std::vector<double> truth = gauss_sum::default_truth(k, cfg.lo, cfg.hi);
    Histogram h = sample_histogram(truth, cfg.events, cfg.bins, cfg.lo, cfg.hi,
                                   cfg.seed + static_cast<uint64_t>(k));
    std::vector<double> init = gauss_sum::perturbed_init(truth);
    for (GradientProvider provider : {GradientProvider::AdReverse, GradientProvider::Numeric}) {
      std::vector<uint64_t> walls;
      FitResult last;
      for (int rep = 0; rep < std::max(1, cfg.repeats); ++rep) {
        last = engine.fit(h, provider, init, cfg.fit);
        walls.push_back(last.gradient_wall_ns);
      }
      std::sort(walls.begin(), walls.end());
      BenchRow row;
      row.k = k;
      row.params = 3 * k;
      row.provider = provider;
      row.median_wall_ns = walls[walls.size() / 2];
      row.grad_evals = last.gradient_evals;
      row.primal_opcount = last.primal_call_counts.total();
      row.grad_opcount = last.gradient_call_counts.total();
      row.converged = last.converged;
      row.final_params = last.params;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "K,params,provider,median_wall_ns,grad_evals,primal_opcount,grad_opcount,converged\n";
  for (const auto& r : rows) {
    out << r.k << ',' << r.params << ',' << provider_name(r.provider) << ',' << r.median_wall_ns
        << ',' << r.grad_evals << ',' << r.primal_opcount << ',' << r.grad_opcount << ','
        << (r.converged ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string bench_plot_table(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Io, "empty CSV");
  struct Point {
    long params = 0;
    double ad = 0.0, numeric = 0.0;
    bool has_ad = false, has_numeric = false;
  };
  std::vector<Point> points;
  auto point_for = [&](long params) -> Point& {
    for (auto& p : points)
      if (p.params == params) return p;
    points.push_back({params, 0.0, 0.0, false, false});
    return points.back();
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 8) throw Error(ErrorKind::Io, "malformed CSV row: " + line);
    Point& p = point_for(std::strtol(cells[1].c_str(), nullptr, 10));
    double wall = std::strtod(cells[3].c_str(), nullptr);
    if (cells[2] == "ad-reverse") {
      p.ad = wall;
      p.has_ad = true;
    } else {
      p.numeric = wall;
      p.has_numeric = true;
    }
  }
  std::sort(points.begin(), points.end(),
            [](const Point& a, const Point& b) { return a.params < b.params; });
  std::ostringstream out;
  out << "# params ad_reverse_wall_ns numeric_wall_ns\n";
  for (const auto& p : points) {
    if (!p.has_ad || !p.has_numeric) continue;
    out << p.params << ' ' << static_cast<uint64_t>(p.ad) << ' '
        << static_cast<uint64_t>(p.numeric) << '\n';
  }
  return out.str();
}

}  // namespace adc
