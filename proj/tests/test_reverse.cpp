#include "adc/printer.hpp"
#include "adc/sema.hpp"
#include "adc/transform.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace adc;
using namespace adc::testing;

TEST_CASE("product rule through slots") {
  Module m = parse_or_throw("real f(real x, real y) { return x * y; }");
  AdjointProgram g = differentiate_gradient(m.functions[0], {"x", "y"});
  CHECK(g.derived.name == "f_grad");
  CHECK(g.derived.returns_void);
  Module work;
  work.functions.push_back(std::move(g.derived));
  Program p(std::move(work));
  std::vector<double> dx = {0.0}, dy = {0.0};
  ArgPack args;
  args.add_real(3).add_real(5).add_array(dx).add_array(dy);
  p.eval("f_grad", args);
  CHECK(dx[0] == 5.0);
  CHECK(dy[0] == 3.0);

  SUBCASE("slots accumulate: a second call doubles them") {
    p.eval("f_grad", args);
    CHECK(dx[0] == 10.0);
    CHECK(dy[0] == 6.0);
  }
}

TEST_CASE("Listing-style naming and signature convention") {
  Module m = load_corpus("gauss.dsl");
  const FunctionDef& gauss = m.functions[0];

  AdjointProgram g = differentiate_gradient(gauss, {"x", "p"});
  CHECK(g.derived.name == "gauss_grad_0_1");
  REQUIRE(g.derived.params.size() == 5);
  CHECK(g.derived.params[0].name == "x");
  CHECK(g.derived.params[1].name == "p");
  CHECK(g.derived.params[2].name == "sigma");
  CHECK(g.derived.params[3].name == "_d_x");
  CHECK(g.derived.params[3].type == ValType::RealArray);
  CHECK(g.derived.params[4].name == "_d_p");
  CHECK(g.derived.returns_void);
  CHECK(g.derived.qualifiers.device);
  CHECK(g.derived.qualifiers.host);

  // Name indices are sorted positions; slots follow request order.
  AdjointProgram rev = differentiate_gradient(gauss, {"p", "x"});
  CHECK(rev.derived.name == "gauss_grad_0_1");
  CHECK(rev.derived.params[3].name == "_d_p");
  CHECK(rev.derived.params[4].name == "_d_x");

  AdjointProgram all = differentiate_gradient(gauss, {"x", "p", "sigma"});
  CHECK(all.derived.name == "gauss_grad");

  AdjointProgram one = differentiate_gradient(gauss, {"sigma"});
  CHECK(one.derived.name == "gauss_grad_2");
}

TEST_CASE("frozen gauss_grad_0_1 source") {
  Module m = load_corpus("gauss.dsl");
  AdjointProgram g = differentiate_gradient(m.functions[0], {"x", "p"});
  std::string printed = print(g.derived);
  CHECK(printed == read_file(golden_path("gauss_grad_0_1.golden")));
}

TEST_CASE("gauss gradient values and antisymmetry in x and p") {
  Module m = load_corpus("gauss.dsl");
  AdjointProgram g = differentiate_gradient(m.functions[0], {"x", "p"});
  Module work = load_corpus("gauss.dsl");
  work.functions.push_back(std::move(g.derived));
  Program p(std::move(work));
  std::vector<double> dx = {0.0}, dp = {0.0};
  ArgPack args;
  args.add_real(1).add_real(0).add_real(1).add_array(dx).add_array(dp);
  p.eval("gauss_grad_0_1", args);
  CHECK(rel_diff(dx[0], -0.2419707245191434) < 1e-12);
  CHECK(rel_diff(dp[0], +0.2419707245191434) < 1e-12);
  CHECK(dx[0] == -dp[0]);
}

TEST_CASE("emitted gradients re-parse and re-resolve for the whole corpus") {
  for (const auto& entry : acceptance_corpus()) {
    Module m = load_corpus(entry.file);
    const FunctionDef& f = *m.find(entry.fn);
    std::vector<std::string> wrt;
    for (const auto& p : f.params)
      if (p.type != ValType::Integer) wrt.push_back(p.name);
    AdjointProgram g = differentiate_gradient(f, wrt);
    CAPTURE(entry.fn);
    Module round = parse_or_throw(print(g.derived));
    REQUIRE(round.functions.size() == 1);
    CHECK_NOTHROW(resolve(round.functions[0]));
    CHECK(structurally_equal(round.functions[0], g.derived));
    CHECK(g.derived.qualifiers == propagate_qualifiers(f));
  }
}

TEST_CASE("mode agreement: reverse equals forward to 1e-12 at 100 points") {
  for (const auto& entry : acceptance_corpus()) {
    DiffHarness h(entry.file, entry.fn);
    PointSampler sampler(0xBEEF + std::hash<std::string>{}(entry.fn));
    for (int i = 0; i < 100; ++i) {
      SampledArgs a = sample_args(entry.fn, sampler);
      std::vector<double> rev = h.reverse_gradient(a);
      std::vector<double> fwd = h.forward_gradient(a);
      REQUIRE(rev.size() == fwd.size());
      for (size_t c = 0; c < rev.size(); ++c) {
        CAPTURE(entry.fn);
        CAPTURE(i);
        CAPTURE(c);
        CHECK(rel_diff(rev[c], fwd[c]) < 1e-12);
      }
    }
  }
}

TEST_CASE("mode agreement holds across branch-in-loop overwrites (looped)") {
  DiffHarness h("looped.dsl", "looped");
  PointSampler sampler(505);
  for (int i = 0; i < 100; ++i) {
    SampledArgs a = sample_args("looped", sampler);
    std::vector<double> rev = h.reverse_gradient(a);
    SampledArgs b = a;
    std::vector<double> fwd = h.forward_gradient(b);
    REQUIRE(rev.size() == 1);
    CHECK(rel_diff(rev[0], fwd[0]) < 1e-12);
  }
}

TEST_CASE("finite-difference agreement for the reverse mode") {
  for (const auto& entry : acceptance_corpus()) {
    DiffHarness h(entry.file, entry.fn);
    PointSampler sampler(0xCAFE + std::hash<std::string>{}(entry.fn));
    for (int i = 0; i < 100; ++i) {
      SampledArgs a = sample_args(entry.fn, sampler);
      std::vector<double> rev = h.reverse_gradient(a);
      std::vector<double> num = h.numeric_gradient(a);
      for (size_t c = 0; c < rev.size(); ++c) {
        CAPTURE(entry.fn);
        CHECK(std::fabs(rev[c] - num[c]) <= 1e-6 * std::max(1.0, std::fabs(num[c])));
      }
    }
  }
}

TEST_CASE("tape traffic balances on branchy and loopy gradients") {
  for (const char* name : {"branchy", "looped", "gsum", "sumn"}) {
    std::string file = std::string(name) + ".dsl";
    DiffHarness h(file, name);
    PointSampler sampler(11);
    SampledArgs a = sample_args(name, sampler);
    ArgPack pack = build_args(h.primal(), a);
    std::vector<std::vector<double>> storage;
    storage.reserve(8);
    ArgPack gargs = make_derivative_args(*h.program().module().find(h.gradient_name()),
                                         h.primal(), pack, storage);
    EvalResult r = h.program().eval(h.gradient_name(), gargs);
    CAPTURE(name);
    CHECK(r.counts.tape_pushes == r.counts.tape_pops);
    // An imbalanced tape would have thrown inside eval already.
  }
}

TEST_CASE("activity pruning changes op counts, never results") {
  Module m = load_corpus("gauss.dsl");
  ReverseOptions keep;
  keep.prune_inactive = false;
  AdjointProgram pruned = differentiate_gradient(m.functions[0], {"x"});
  AdjointProgram full = differentiate_gradient(m.functions[0], {"x"}, keep);
  Module work;
  std::string pruned_name = "gauss_grad_0";
  FunctionDef full_fn = std::move(full.derived);
  full_fn.name = "gauss_grad_0_unpruned";
  work.functions.push_back(std::move(pruned.derived));
  work.functions.push_back(std::move(full_fn));
  Program p(std::move(work));
  PointSampler s(3);
  for (int i = 0; i < 30; ++i) {
    double x = s.uniform(-2, 2), mu = s.uniform(-2, 2), sg = s.uniform(0.5, 2.5);
    std::vector<double> d1 = {0.0}, d2 = {0.0};
    ArgPack a1;
    a1.add_real(x).add_real(mu).add_real(sg).add_array(d1);
    ArgPack a2;
    a2.add_real(x).add_real(mu).add_real(sg).add_array(d2);
    EvalResult r1 = p.eval(pruned_name, a1);
    EvalResult r2 = p.eval("gauss_grad_0_unpruned", a2);
    CHECK(d1[0] == d2[0]);
    CHECK(r1.counts.total() <= r2.counts.total());
    if (i == 0) CHECK(r1.counts.total() < r2.counts.total());
  }
}

TEST_CASE("cheap gradient: op-count ratio at most 5 on every corpus function") {
  for (const auto& entry : acceptance_corpus()) {
    DiffHarness h(entry.file, entry.fn);
    PointSampler sampler(21);
    SampledArgs a = sample_args(entry.fn, sampler);
    ArgPack pack = build_args(h.primal(), a);
    CostRatioResult r = cost_ratio(h.program(), entry.fn, h.gradient_name(), pack);
    CAPTURE(entry.fn);
    CAPTURE(r.ratio);
    CHECK(r.ratio <= 5.0);
    CHECK(r.ratio > 0.0);
  }
}

TEST_CASE("reverse cost is flat in the input count on sumn") {
  DiffHarness h("sumn.dsl", "sumn");
  std::vector<double> ratios;
  for (size_t n : {4, 16, 64}) {
    PointSampler sampler(1000 + n);
    SampledArgs a = sample_args("sumn", sampler, n);
    ArgPack pack = build_args(h.primal(), a);
    CostRatioResult r = cost_ratio(h.program(), "sumn", h.gradient_name(), pack);
    ratios.push_back(r.ratio);
  }
  double avg = (ratios[0] + ratios[1] + ratios[2]) / 3.0;
  for (double r : ratios) {
    CAPTURE(r);
    CAPTURE(avg);
    CHECK(std::fabs(r - avg) <= 0.10 * avg);
  }
}

TEST_CASE("forward-mode full gradient grows linearly with the input count") {
  DiffHarness h("sumn.dsl", "sumn");
  for (size_t n : {4, 16, 64}) {
    PointSampler sampler(2000 + n);
    SampledArgs a = sample_args("sumn", sampler, n);
    ArgPack primal_pack = build_args(h.primal(), a);
    uint64_t primal_ops = h.program().eval("sumn", primal_pack).counts.total();

    // n tangent passes with unit seeds.
    uint64_t forward_total = 0;
    for (size_t e = 0; e < n; ++e) {
      SampledArgs b = a;
      ArgPack pack = build_args(h.primal(), b);
      std::vector<double> seed(n, 0.0);
      seed[e] = 1.0;
      pack.add_array(seed);
      forward_total += h.program().eval("sumn_darg0", pack).counts.total();
    }
    CAPTURE(n);
    CHECK(forward_total >= n * primal_ops);
  }
}

TEST_CASE("reverse transform rejections") {
  Module k = load_corpus("kernels.dsl");
  CHECK_THROWS_WITH_AS(differentiate_gradient(*k.find("compute"), {"sigma"}),
                       doctest::Contains("cannot be differentiated"), Error);

  Module m = load_corpus("gauss.dsl");
  CHECK_THROWS_WITH_AS(differentiate_gradient(m.functions[0], {}),
                       doctest::Contains("empty wrt"), Error);
  CHECK_THROWS_WITH_AS(differentiate_gradient(m.functions[0], {"x", "x"}),
                       doctest::Contains("duplicate wrt"), Error);
  CHECK_THROWS_WITH_AS(differentiate_gradient(m.functions[0], {"zeta"}),
                       doctest::Contains("not a parameter"), Error);

  Module s = load_corpus("sumn.dsl");
  CHECK_THROWS_WITH_AS(differentiate_gradient(*s.find("sumn"), {"n"}),
                       doctest::Contains("integer parameter"), Error);

  Module v = parse_or_throw("void f(real x) { }");
  CHECK_THROWS_WITH_AS(differentiate_gradient(v.functions[0], {"x"}),
                       doctest::Contains("only scalar functions"), Error);

  Module calls = parse_or_throw(
      "device void helper(real x) { } "
      "device real f(real x) { helper(x); return x * x; }");
  CHECK_THROWS_WITH_AS(differentiate_gradient(*calls.find("f"), {"x"}),
                       doctest::Contains("user calls"), Error);

  Module arr = parse_or_throw("real f(real[] a, real x) { a[0] = x * 2; return a[0]; }");
  CHECK_THROWS_WITH_AS(differentiate_gradient(arr.functions[0], {"a"}),
                       doctest::Contains("array"), Error);
  CHECK_THROWS_WITH_AS(differentiate_gradient(arr.functions[0], {"x"}),
                       doctest::Contains("array"), Error);

  Module intre = parse_or_throw(
      "real f(real x, integer n) { integer m = n; m = m + 1; return x; }");
  CHECK_THROWS_WITH_AS(differentiate_gradient(intre.functions[0], {"x"}),
                       doctest::Contains("integer variable"), Error);
}

TEST_CASE("nested loops with dependent bounds reverse correctly") {
  Module m = parse_or_throw(
      "real nested(real[] a, integer n) {"
      "  real s = 0;"
      "  for (integer i = 0; i < n; i += 1) {"
      "    for (integer j = 0; j < i; j += 1) {"
      "      s = s + a[i] * a[j];"
      "    }"
      "  }"
      "  return s;"
      "}");
  AdjointProgram g = differentiate_gradient(m.functions[0], {"a"});
  Module work;
  work.functions.push_back(std::move(g.derived));
  Program p(std::move(work));
  std::vector<double> a = {1, 2, 3, 4};
  std::vector<double> da(4, 0.0);
  ArgPack args;
  args.add_array(a).add_int(4).add_array(da);
  EvalResult r = p.eval("nested_grad", args);
  // d/da_k of sum_{i>j} a_i a_j: a[0] pairs with 2,3,4 and so on.
  CHECK(da == std::vector<double>{9, 8, 7, 6});
  CHECK(r.counts.tape_pushes == r.counts.tape_pops);
}

TEST_CASE("active pow exponents reverse through the exp/log rewrite") {
  Module m = parse_or_throw("real f(real x, real y) { return pow(x, y) + pow(x, 3); }");
  AdjointProgram g = differentiate_gradient(m.functions[0], {"x", "y"});
  Module work;
  work.functions.push_back(std::move(g.derived));
  Program p(std::move(work));
  std::vector<double> dx = {0.0}, dy = {0.0};
  ArgPack args;
  args.add_real(2).add_real(1.5).add_array(dx).add_array(dy);
  p.eval("f_grad", args);
  CHECK(rel_diff(dx[0], 1.5 * std::pow(2.0, 0.5) + 12.0) < 1e-12);
  CHECK(rel_diff(dy[0], std::pow(2.0, 1.5) * std::log(2.0)) < 1e-12);

  // The rewrite inherits the log domain: u <= 0 is a runtime error.
  std::vector<double> dx2 = {0.0}, dy2 = {0.0};
  ArgPack bad;
  bad.add_real(-1).add_real(1.5).add_array(dx2).add_array(dy2);
  CHECK_THROWS_WITH_AS(p.eval("f_grad", bad), doctest::Contains("log of non-positive"), Error);
}

TEST_CASE("gradient of a parameter-overwriting body keeps the accumulation contract") {
  Module m = parse_or_throw("real f(real x) { x = x * x; return x; }");
  AdjointProgram g = differentiate_gradient(m.functions[0], {"x"});
  Module work;
  work.functions.push_back(std::move(g.derived));
  Program p(std::move(work));
  std::vector<double> dx = {0.0};
  ArgPack args;
  args.add_real(3).add_array(dx);
  p.eval("f_grad", args);
  CHECK(dx[0] == 6.0);
  p.eval("f_grad", args);
  CHECK(dx[0] == 12.0);  // accumulate, never assign
}

TEST_CASE("parameter overwritten inside a loop: repeated squaring") {
  Module m = parse_or_throw(
      "real f(real x, integer n) { for (integer i = 0; i < n; i += 1) { x = x * x; } return x; "
      "}");
  AdjointProgram g = differentiate_gradient(m.functions[0], {"x"});
  Module work;
  work.functions.push_back(std::move(g.derived));
  Program p(std::move(work));
  // f = x^(2^n), df/dx = 2^n * x^(2^n - 1).
  std::vector<double> dx = {0.0};
  ArgPack args;
  args.add_real(1.1).add_int(3).add_array(dx);
  EvalResult r = p.eval("f_grad", args);
  CHECK(rel_diff(dx[0], 8.0 * std::pow(1.1, 7.0)) < 1e-14);
  CHECK(r.counts.tape_pushes == r.counts.tape_pops);
  p.eval("f_grad", args);
  CHECK(rel_diff(dx[0], 16.0 * std::pow(1.1, 7.0)) < 1e-14);
}

TEST_CASE("repeated overwrites in straight-line code restore correctly") {
  Module m = parse_or_throw(
      "real f(real x) { real t = x * x; t = t + sin(x); t = t * 2; return t; }");
  AdjointProgram g = differentiate_gradient(m.functions[0], {"x"});
  Module work;
  work.functions.push_back(std::move(g.derived));
  Program p(std::move(work));
  PointSampler s(17);
  for (int i = 0; i < 20; ++i) {
    double x = s.uniform(-2, 2);
    std::vector<double> dx = {0.0};
    ArgPack args;
    args.add_real(x).add_array(dx);
    p.eval("f_grad", args);
    CHECK(rel_diff(dx[0], 2.0 * (2.0 * x + std::cos(x))) < 1e-14);
  }
}

TEST_CASE("pow with a runtime inactive exponent") {
  Module m = parse_or_throw("real f(real x, real w) { return pow(x, w); }");
  AdjointProgram g = differentiate_gradient(m.functions[0], {"x"});
  CHECK(g.derived.name == "f_grad_0");
  Module work;
  work.functions.push_back(std::move(g.derived));
  Program p(std::move(work));
  std::vector<double> dx = {0.0};
  ArgPack args;
  args.add_real(2).add_real(2.5).add_array(dx);
  p.eval("f_grad_0", args);
  CHECK(rel_diff(dx[0], 2.5 * std::pow(2.0, 1.5)) < 1e-14);
}

TEST_CASE("zero-trip loops yield zero gradients") {
  DiffHarness h("gsum.dsl", "gsum");
  SampledArgs a;
  a.reals = {0.7};
  a.arrays = {{}};
  a.ints = {0};
  CHECK(h.value(a) == 0.0);
  SampledArgs b = a;
  std::vector<double> rev = h.reverse_gradient(b);
  CHECK(rev.empty());  // zero-length slot for the empty parameter vector

  DiffHarness hs("sumn.dsl", "sumn");
  SampledArgs c;
  c.arrays = {{1.0, 2.0}};
  c.ints = {0};  // n = 0: elements exist but the loop never runs
  std::vector<double> rev2 = hs.reverse_gradient(c);
  CHECK(rev2 == std::vector<double>{0.0, 0.0});
}
