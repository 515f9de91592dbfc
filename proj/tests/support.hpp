// Shared helpers for the unit and acceptance suites: corpus loading, sample
// points away from intrinsic singularities, and a harness that evaluates the
// same gradient through reverse mode, forward mode and central differences.
#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "adc/eval.hpp"
#include "adc/numdiff.hpp"
#include "adc/parser.hpp"
#include "adc/tooling.hpp"
#include "adc/transform.hpp"

namespace adc::testing {

inline std::string corpus_path(const std::string& name) {
  return std::string(ADC_CORPUS_DIR) + "/" + name;
}

inline std::string golden_path(const std::string& name) {
  return std::string(ADC_GOLDEN_DIR) + "/" + name;
}

inline Module load_corpus(const std::string& name) {
  return load_module_file(corpus_path(name));
}

inline double rel_diff(double a, double b) {
  double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) / scale;
}

struct PointSampler {
  std::mt19937_64 rng;
  explicit PointSampler(uint64_t seed) : rng(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  }
};

/// One sampled argument set for a corpus function.
struct SampledArgs {
  std::vector<double> reals;                 // real params, in order
  std::vector<std::vector<double>> arrays;   // array params, in order
  std::vector<int64_t> ints;                 // integer params, in order
};

/// Samples well-conditioned points: away from branch boundaries and fabs
/// kinks, |divisors| >= 0.1, log/sqrt arguments >= 0.1.
inline SampledArgs sample_args(const std::string& fn, PointSampler& s, size_t array_len = 6) {
  SampledArgs a;
  if (fn == "gauss") {
    a.reals = {s.uniform(-2, 2), s.uniform(-2, 2), s.uniform(0.5, 2.5)};
  } else if (fn == "poly") {
    a.reals = {s.uniform(-3, 3), s.uniform(-3, 3)};
  } else if (fn == "rational") {
    a.reals = {s.uniform(-2, 2), s.uniform(-2, 2)};
  } else if (fn == "branchy") {
    while (true) {
      double x = s.uniform(0.2, 2.0) * (s.uniform(0, 1) < 0.5 ? -1 : 1);
      double y = s.uniform(-2.0, 2.0);
      if (std::fabs(x - y) > 0.1) {
        a.reals = {x, y};
        break;
      }
    }
  } else if (fn == "sumn") {
    a.arrays.emplace_back();
    for (size_t i = 0; i < array_len; ++i) a.arrays[0].push_back(s.uniform(0.3, 2.0));
    a.ints = {static_cast<int64_t>(array_len)};
  } else if (fn == "gsum") {
    a.reals = {s.uniform(-3, 3)};
    a.arrays.emplace_back();
    size_t k = array_len / 3;
    for (size_t j = 0; j < k; ++j) {
      a.arrays[0].push_back(s.uniform(0.5, 2.0));    // amplitude
      a.arrays[0].push_back(s.uniform(-2.0, 2.0));   // mean
      a.arrays[0].push_back(s.uniform(0.8, 2.0));    // sigma
    }
    a.ints = {static_cast<int64_t>(k)};
  } else if (fn == "looped") {
    a.reals = {s.uniform(0.3, 1.8)};
    a.ints = {5};
  }
  return a;
}

inline ArgPack build_args(const FunctionDef& f, SampledArgs& a) {
  ArgPack pack;
  size_t ri = 0, ai = 0, ii = 0;
  for (const auto& p : f.params) {
    switch (p.type) {
      case ValType::Real: pack.add_real(a.reals.at(ri++)); break;
      case ValType::RealArray: pack.add_array(a.arrays.at(ai++)); break;
      case ValType::Integer: pack.add_int(a.ints.at(ii++)); break;
    }
  }
  return pack;
}

/// Compiles a corpus function together with its reverse gradient and one
/// forward tangent per differentiable parameter, then evaluates all three
/// derivative routes on demand. Coordinates are ordered by parameter, arrays
/// expanded element-wise.
class DiffHarness {
 public:
  DiffHarness(const std::string& file, const std::string& fn) : fn_(fn) {
    Module m = load_corpus(file);
    const FunctionDef* f = m.find(fn);
    primal_ = clone(*f);
    for (const auto& p : primal_.params)
      if (p.type != ValType::Integer) wrt_.push_back(p.name);
    AdjointProgram grad = differentiate_gradient(primal_, wrt_);
    grad_name_ = grad.derived.name;
    m.functions.push_back(std::move(grad.derived));
    for (const auto& w : wrt_) {
      TangentProgram t = differentiate_forward(primal_, w);
      tangent_names_.push_back(t.derived.name);
      m.functions.push_back(std::move(t.derived));
    }
    prog_ = std::make_unique<Program>(std::move(m));
  }

  const FunctionDef& primal() const { return primal_; }
  const Program& program() const { return *prog_; }
  const std::vector<std::string>& wrt() const { return wrt_; }
  const std::string& gradient_name() const { return grad_name_; }

  double value(SampledArgs& a) const {
    ArgPack pack = build_args(primal_, a);
    return *prog_->eval(fn_, pack).value;
  }

  std::vector<double> reverse_gradient(SampledArgs& a) const {
    ArgPack pack = build_args(primal_, a);
    std::vector<std::vector<double>> slots;
    slots.reserve(wrt_.size());
    for (const auto& w : wrt_) {
      int idx = primal_.param_index(w);
      size_t len = primal_.params[idx].type == ValType::RealArray
                       ? array_arg(a, idx).size()
                       : 1;
      slots.emplace_back(len, 0.0);
      pack.add_array(slots.back());
    }
    prog_->eval(grad_name_, pack);
    std::vector<double> flat;
    for (const auto& s : slots) flat.insert(flat.end(), s.begin(), s.end());
    return flat;
  }

  std::vector<double> forward_gradient(SampledArgs& a) const {
    std::vector<double> flat;
    for (size_t w = 0; w < wrt_.size(); ++w) {
      int idx = primal_.param_index(wrt_[w]);
      if (primal_.params[idx].type == ValType::Real) {
        ArgPack pack = build_args(primal_, a);
        flat.push_back(*prog_->eval(tangent_names_[w], pack).value);
      } else {
        size_t len = array_arg(a, idx).size();
        for (size_t e = 0; e < len; ++e) {
          ArgPack pack = build_args(primal_, a);
          std::vector<double> seed(len, 0.0);
          seed[e] = 1.0;
          pack.add_array(seed);
          flat.push_back(*prog_->eval(tangent_names_[w], pack).value);
        }
      }
    }
    return flat;
  }

  std::vector<double> numeric_gradient(SampledArgs& a, CentralGradient* details = nullptr) const {
    ArgPack pack = build_args(primal_, a);
    CentralGradient g = central_gradient(*prog_, fn_, pack, wrt_);
    if (details != nullptr) *details = g;
    return g.values;
  }

 private:
  const std::vector<double>& array_arg(const SampledArgs& a, int param_idx) const {
    size_t ai = 0;
    for (int i = 0; i < param_idx; ++i)
      if (primal_.params[static_cast<size_t>(i)].type == ValType::RealArray) ++ai;
    return a.arrays.at(ai);
  }

  std::string fn_;
  FunctionDef primal_;
  std::vector<std::string> wrt_;
  std::string grad_name_;
  std::vector<std::string> tangent_names_;
  std::unique_ptr<Program> prog_;
};

struct CorpusEntry {
  const char* file;
  const char* fn;
};

/// The six acceptance-corpus functions.
inline const std::vector<CorpusEntry>& acceptance_corpus() {
  static const std::vector<CorpusEntry> k = {
      {"gauss.dsl", "gauss"},   {"poly.dsl", "poly"}, {"rational.dsl", "rational"},
      {"branchy.dsl", "branchy"}, {"sumn.dsl", "sumn"}, {"gsum.dsl", "gsum"},
  };
  return k;
}

}  // namespace adc::testing
