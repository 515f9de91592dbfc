#include "adc/launch.hpp"

#include <algorithm>
#include <set>
#include <thread>

namespace adc {

void LaunchConfig::validate() const {
  if (grid_dim <= 0 || block_dim <= 0 || n <= 0)
    throw Error(ErrorKind::Launch, "launch configuration must be positive (grid " +
                                       std::to_string(grid_dim) + ", block " +
                                       std::to_string(block_dim) + ", n " + std::to_string(n) +
                                       ")");
  if (grid_dim * block_dim < n)
    throw Error(ErrorKind::Launch,
                "grid " + std::to_string(grid_dim) + " x block " + std::to_string(block_dim) +
                    " does not cover problem size " + std::to_string(n));
}

const char* access_name(Access a) {
  switch (a) {
    case Access::PrivatePerThread: return "private-per-thread";
    case Access::SharedRead: return "shared-read";
    case Access::SharedWriteHazard: return "shared-write-hazard";
  }
  return "?";
}

bool AccessReport::has_hazard() const {
  for (const auto& e : entries)
    if (e.access == Access::SharedWriteHazard) return true;
  return false;
}

const AccessReport::Entry* AccessReport::find(const std::string& param) const {
  for (const auto& e : entries)
    if (e.param == param) return &e;
  return nullptr;
}

namespace {

// Parameter indices a function writes into (element stores, directly or via
// a call that writes the forwarded array).
class WriteSummary {
 public:
  explicit WriteSummary(const Module& m) : m_(m) {}

  const std::set<int>& of(const FunctionDef& f) {
    auto it = memo_.find(f.name);
    if (it != memo_.end()) return it->second;
    auto& result = memo_[f.name];  // insert first to cut recursion cycles
    std::set<std::string> written;
    collect(f, f.body, written);
    for (size_t i = 0; i < f.params.size(); ++i)
      if (written.count(f.params[i].name) > 0) result.insert(static_cast<int>(i));
    return result;
  }

 private:
  void collect(const FunctionDef& f, const Block& b, std::set<std::string>& written) {
    for (const auto& s : b) {
      if (s->kind == StmtKind::Assign && s->target_indexed) written.insert(s->target);
      if (s->kind == StmtKind::CallStmt && s->callee != kPushName &&
          s->callee != kPushCtlName) {
        const FunctionDef* callee = m_.find(s->callee);
        if (callee != nullptr) {
          const std::set<int>& callee_writes = of(*callee);
          for (int idx : callee_writes) {
            if (static_cast<size_t>(idx) >= s->call_args.size()) continue;
            const Expr& a = *s->call_args[idx];
            if (a.kind == ExprKind::VarRef || a.kind == ExprKind::Index) written.insert(a.name);
          }
        }
      }
      collect(f, s->then_block, written);
      collect(f, s->else_block, written);
    }
  }

  const Module& m_;
  std::map<std::string, std::set<int>> memo_;
};

// Locates the canonical thread-index variable: the first integer local
// initialized with blockIdx * blockDim + threadIdx.
std::string find_thread_index_var(const FunctionDef& kernel) {
  for (const auto& s : kernel.body) {
    if (s->kind != StmtKind::VarDecl || s->decl_type != ValType::Integer) continue;
    const Expr& e = *s->expr;
    if (e.kind != ExprKind::Binary || e.op != BinOp::Add) continue;
    const Expr& mul = *e.args[0];
    const Expr& tid = *e.args[1];
    if (mul.kind != ExprKind::Binary || mul.op != BinOp::Mul) continue;
    if (mul.args[0]->kind == ExprKind::VarRef && mul.args[0]->name == "blockIdx" &&
        mul.args[1]->kind == ExprKind::VarRef && mul.args[1]->name == "blockDim" &&
        tid.kind == ExprKind::VarRef && tid.name == "threadIdx")
      return s->target;
  }
  return {};
}

struct ParamUse {
  bool read = false;
  bool written = false;
  bool all_writes_thread_indexed = true;
  bool indexed_by_thread = false;
  std::string note;
};

class KernelAnalyzer {
 public:
  KernelAnalyzer(const Module& m, const FunctionDef& kernel)
      : m_(m), kernel_(kernel), writes_(m), thread_var_(find_thread_index_var(kernel)) {}

  AccessReport run() {
    for (const auto& p : kernel_.params) use_[p.name];  // materialize rows in order
    walk(kernel_.body);

    AccessReport report;
    for (const auto& p : kernel_.params) {
      const ParamUse& u = use_[p.name];
      AccessReport::Entry e;
      e.param = p.name;
      e.type = p.type;
      e.indexed_by_thread = u.indexed_by_thread;
      if (p.type != ValType::RealArray) {
        e.access = Access::SharedRead;
        e.note = "scalar argument, read-only by value";
      } else if (!u.written) {
        e.access = Access::SharedRead;
        e.note = u.read ? "read-only" : "unaccessed";
      } else if (u.all_writes_thread_indexed) {
        e.access = Access::PrivatePerThread;
        e.note = "written only at the thread's own index";
      } else {
        e.access = Access::SharedWriteHazard;
        e.note = u.note.empty() ? "written at an index the analysis cannot prove private"
                                : u.note;
      }
      report.entries.push_back(std::move(e));
    }
    return report;
  }

 private:
  bool is_param(const std::string& name) const {
    return kernel_.param_index(name) >= 0;
  }

  bool index_is_thread_var(const Expr& idx) const {
    return !thread_var_.empty() && idx.kind == ExprKind::VarRef && idx.name == thread_var_;
  }

  void walk_expr(const Expr& e) {
    if (e.kind == ExprKind::Index && is_param(e.name)) {
      ParamUse& u = use_[e.name];
      u.read = true;
      if (index_is_thread_var(*e.args[0])) u.indexed_by_thread = true;
    }
    if (e.kind == ExprKind::VarRef && is_param(e.name)) use_[e.name].read = true;
    for (const auto& a : e.args) walk_expr(*a);
  }

  void note_write(const std::string& param, const Expr* idx, const std::string& how) {
    ParamUse& u = use_[param];
    u.written = true;
    if (idx != nullptr && index_is_thread_var(*idx)) {
      u.indexed_by_thread = true;
    } else {
      u.all_writes_thread_indexed = false;
      u.note = how;
    }
  }

  void walk(const Block& b) {
    for (const auto& s : b) {
      switch (s->kind) {
        case StmtKind::Assign:
          if (s->target_indexed && is_param(s->target))
            note_write(s->target, s->index.get(), "written at a non-thread index");
          if (s->index) walk_expr(*s->index);
          walk_expr(*s->expr);
          break;
        case StmtKind::VarDecl:
        case StmtKind::Return:
          if (s->expr) walk_expr(*s->expr);
          break;
        case StmtKind::If:
          walk_expr(*s->expr);
          walk(s->then_block);
          walk(s->else_block);
          break;
        case StmtKind::For:
          walk_expr(*s->lo);
          walk_expr(*s->hi);
          walk(s->then_block);
          break;
        case StmtKind::CallStmt: {
          if (s->callee == kPushName || s->callee == kPushCtlName) {
            for (const auto& a : s->call_args) walk_expr(*a);
            break;
          }
          const FunctionDef* callee = m_.find(s->callee);
          const std::set<int>* callee_writes =
              callee != nullptr ? &writes_.of(*callee) : nullptr;
          for (size_t i = 0; i < s->call_args.size(); ++i) {
            const Expr& a = *s->call_args[i];
            bool arg_written = callee_writes == nullptr ||
                               callee_writes->count(static_cast<int>(i)) > 0;
            if (callee == nullptr) arg_written = true;  // unknown callee: conservative
            if ((a.kind == ExprKind::VarRef || a.kind == ExprKind::Index) && is_param(a.name)) {
              use_[a.name].read = true;
              if (a.kind == ExprKind::Index && index_is_thread_var(*a.args[0]))
                use_[a.name].indexed_by_thread = true;
              if (arg_written) {
                if (a.kind == ExprKind::Index) {
                  note_write(a.name, a.args[0].get(),
                             "slice passed to a writing callee at a non-thread index");
                } else {
                  note_write(a.name, nullptr,
                             "whole array shared with a writing callee across threads");
                }
              }
            }
            for (const auto& sub : a.args) walk_expr(*sub);
          }
          break;
        }
      }
    }
  }

  const Module& m_;
  const FunctionDef& kernel_;
  WriteSummary writes_;
  std::string thread_var_;
  std::map<std::string, ParamUse> use_;
};

}  // namespace

AccessReport race_check(const Module& m, const std::string& kernel) {
  const FunctionDef* k = m.find(kernel);
  if (k == nullptr) throw Error(ErrorKind::Launch, "unknown kernel '" + kernel + "'");
  if (!k->qualifiers.global)
    throw Error(ErrorKind::Launch, "'" + kernel + "' is not a global kernel");
  return KernelAnalyzer(m, *k).run();
}

LaunchStats launch(const Program& p, const std::string& kernel, const LaunchConfig& cfg,
                   BufferSet& buffers, const LaunchOptions& opts) {
  cfg.validate();
  const FunctionDef* k = p.module().find(kernel);
  if (k == nullptr) throw Error(ErrorKind::Launch, "unknown kernel '" + kernel + "'");
  if (!k->qualifiers.global)
    throw Error(ErrorKind::Launch, "'" + kernel + "' is not a global kernel");

  AccessReport report = race_check(p.module(), kernel);
  if (report.has_hazard() && !opts.unsafe) {
    std::string msg = "launch refused, hazardous parameter(s):";
    for (const auto& e : report.entries)
      if (e.access == Access::SharedWriteHazard) msg += " " + e.param + " (" + e.note + ")";
    msg += "; pass the unsafe flag to force";
    throw Error(ErrorKind::Launch, msg);
  }

  // Bind buffers by parameter name and validate lengths for [i]-indexed
  // arrays.
  ArgPack base;
  for (const auto& param : k->params) {
    switch (param.type) {
      case ValType::RealArray: {
        auto it = buffers.arrays.find(param.name);
        if (it == buffers.arrays.end())
          throw Error(ErrorKind::Launch, "missing buffer '" + param.name + "'");
        const AccessReport::Entry* e = report.find(param.name);
        if (e != nullptr && e->indexed_by_thread &&
            static_cast<int64_t>(it->second.size()) < cfg.n)
          throw Error(ErrorKind::Launch,
                      "buffer '" + param.name + "' has length " +
                          std::to_string(it->second.size()) + " but is indexed by thread over " +
                          std::to_string(cfg.n) + " elements");
        base.add_array(it->second);
        break;
      }
      case ValType::Real: {
        auto it = buffers.scalars.find(param.name);
        if (it == buffers.scalars.end())
          throw Error(ErrorKind::Launch, "missing scalar value '" + param.name + "'");
        base.add_real(it->second);
        break;
      }
      case ValType::Integer: {
        auto it = buffers.integers.find(param.name);
        if (it == buffers.integers.end())
          throw Error(ErrorKind::Launch, "missing integer value '" + param.name + "'");
        base.add_int(it->second);
        break;
      }
    }
  }

  const int64_t total = cfg.grid_dim * cfg.block_dim;
  LaunchStats stats;
  stats.thread_statements.assign(static_cast<size_t>(total), 0);

  unsigned workers = opts.sequential ? 1
                                     : (opts.workers != 0 ? opts.workers
                                                          : std::thread::hardware_concurrency());
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(total)));

  std::vector<OpCounters> worker_counts(workers);
  std::vector<std::thread> pool;
  const int64_t chunk = (total + workers - 1) / workers;

  auto body = [&](unsigned w) {
    ArgPack args = base;
    EvalOptions eopts;
    eopts.has_thread_ctx = true;
    eopts.block_dim = cfg.block_dim;
    eopts.problem_n = cfg.n;
    eopts.atomic_array_writes = opts.unsafe;
    const int64_t begin = static_cast<int64_t>(w) * chunk;
    const int64_t end = std::min<int64_t>(total, begin + chunk);
    for (int64_t g = begin; g < end; ++g) {
      eopts.block_idx = g / cfg.block_dim;
      eopts.thread_idx = g % cfg.block_dim;
      EvalResult r = p.eval(kernel, args, eopts);
      stats.thread_statements[static_cast<size_t>(g)] =
          static_cast<uint32_t>(r.top_statements);
      worker_counts[w] += r.counts;
    }
  };

  if (workers == 1) {
    body(0);
  } else {
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& c : worker_counts) stats.counts += c;
  return stats;
}

}  // namespace adc
