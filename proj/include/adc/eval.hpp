/// Deterministic interpreter with per-call elementary-operation counters.
///
/// Counting model: one arithmetic AST node evaluated = one op. Unary
/// negation and +/- count as adds, * as muls, / as divs, math intrinsics as
/// one intrinsic call each. Comparisons and tape traffic are tallied in
/// their own counters and excluded from total(). Assignments, declarations,
/// loop bookkeeping and user-function calls are free.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adc/ast.hpp"
#include "adc/diag.hpp"

namespace adc {

struct OpCounters {
  uint64_t adds = 0;
  uint64_t muls = 0;
  uint64_t divs = 0;
  uint64_t intrinsics = 0;
  uint64_t comparisons = 0;
  uint64_t tape_pushes = 0;
  uint64_t tape_pops = 0;

  uint64_t total() const { return adds + muls + divs + intrinsics; }
  OpCounters& operator+=(const OpCounters& o);
  bool operator==(const OpCounters&) const = default;
};

struct ArrayRef {
  double* data = nullptr;
  int64_t len = 0;
};

/// Typed argument list; arrays are passed by reference and may be mutated
/// (adjoint slots accumulate in place).
class ArgPack {
 public:
  struct Arg {
    ValType type{};
    double real = 0.0;
    int64_t integer = 0;
    ArrayRef array;
  };

  ArgPack& add_real(double v);
  ArgPack& add_int(int64_t v);
  ArgPack& add_array(std::vector<double>& storage);
  ArgPack& add_array(double* data, int64_t len);

  const std::vector<Arg>& args() const { return args_; }
  std::vector<Arg>& args() { return args_; }

 private:
  std::vector<Arg> args_;
};

/// Observation hook for dynamic analyses: invoked after every store to a
/// real scalar variable, in execution order.
using StoreObserver = std::function<void(const std::string& var, double value)>;

struct EvalOptions {
  // Thread context for kernel bodies (blockIdx, blockDim, threadIdx, N).
  bool has_thread_ctx = false;
  int64_t block_idx = 0;
  int64_t block_dim = 0;
  int64_t thread_idx = 0;
  int64_t problem_n = 0;
  // Route array-element writes through atomics (forced hazardous launches).
  bool atomic_array_writes = false;
  const StoreObserver* observer = nullptr;
};

struct EvalResult {
  std::optional<double> value;
  OpCounters counts;
  uint64_t top_statements = 0;  // statements executed in the entry frame
};

/// A module compiled for interpretation: variable references are resolved to
/// frame slots once. Immutable after construction and safe to share across
/// threads; all mutable state lives in per-call frames.
class Program {
 public:
  explicit Program(Module m);
  ~Program();
  Program(Program&&) noexcept;
  Program& operator=(Program&&) noexcept;

  const Module& module() const;

  EvalResult eval(const std::string& fn, ArgPack& args, const EvalOptions& opts = {}) const;

  struct Impl;  // internal compiled form

 private:
  std::unique_ptr<Impl> impl_;
};

struct CostRatioResult {
  double ratio = 0.0;  // +infinity sentinel when the primal costs nothing
  OpCounters primal;
  OpCounters gradient;
  std::string warning;
};

/// OpCount(gradient) / OpCount(primal) on the same arguments; gradient slots
/// are allocated zero-initialized. Tape pushes/pops are reported in the
/// counters but excluded from the ratio.
CostRatioResult cost_ratio(const Program& p, const std::string& primal,
                           const std::string& gradient, const ArgPack& primal_args);

/// Builds the argument list for a derivative of `primal`: forwards
/// primal_args, then appends one zeroed array per extra array parameter
/// (slots and tangent seeds), sized 1 for scalar sources and matching the
/// primal array length for array sources. Storage is appended to `storage`
/// (which must outlive the returned pack and must not reallocate; reserve
/// enough capacity up front).
ArgPack make_derivative_args(const FunctionDef& derived, const FunctionDef& primal,
                             const ArgPack& primal_args,
                             std::vector<std::vector<double>>& storage);

}  // namespace adc
