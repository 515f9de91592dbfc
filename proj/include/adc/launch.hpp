/// CUDA-style batch dispatch over the interpreter, plus the static analysis
/// that guards it: the adjoint of a shared read is a shared write, so a
/// gradient callee can turn a safe kernel into a racy one.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adc/eval.hpp"

namespace adc {

struct LaunchConfig {
  int64_t grid_dim = 0;   // blocks
  int64_t block_dim = 0;  // threads per block
  int64_t n = 0;          // problem size

  void validate() const;  // positive dims, full coverage grid*block >= n
};

enum class Access { PrivatePerThread, SharedRead, SharedWriteHazard };

const char* access_name(Access a);

struct AccessReport {
  struct Entry {
    std::string param;
    ValType type{};
    Access access{};
    bool indexed_by_thread = false;  // any [i] access with the thread index
    std::string note;
  };
  std::vector<Entry> entries;

  bool has_hazard() const;
  const Entry* find(const std::string& param) const;
};

/// Classifies every kernel parameter's memory behaviour, following writes
/// through called functions (adjoint slots are writes). Total: anything the
/// analysis cannot prove private or read-only is reported as a hazard.
AccessReport race_check(const Module& m, const std::string& kernel);

struct BufferSet {
  std::map<std::string, std::vector<double>> arrays;
  std::map<std::string, double> scalars;
  std::map<std::string, int64_t> integers;
};

struct LaunchOptions {
  bool unsafe = false;    // skip the hazard refusal; writes become atomic
  unsigned workers = 0;   // 0 = hardware concurrency
  bool sequential = false;
};

struct LaunchStats {
  std::vector<uint32_t> thread_statements;  // kernel-frame statements per thread
  OpCounters counts;
};

/// Runs the kernel once per global index in [0, grid*block); the kernel's
/// own bounds guard keeps indices >= n idle. Buffers are updated in place.
/// Refuses to run when race_check reports a hazard unless opts.unsafe.
LaunchStats launch(const Program& p, const std::string& kernel, const LaunchConfig& cfg,
                   BufferSet& buffers, const LaunchOptions& opts = {});

}  // namespace adc
