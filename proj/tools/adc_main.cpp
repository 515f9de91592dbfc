// adc: parse, analyze, differentiate, run and benchmark DSL modules.
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "adc/eval.hpp"
#include "adc/fit.hpp"
#include "adc/hessian.hpp"
#include "adc/launch.hpp"
#include "adc/numdiff.hpp"
#include "adc/parser.hpp"
#include "adc/printer.hpp"
#include "adc/sema.hpp"
#include "adc/tooling.hpp"
#include "adc/transform.hpp"

namespace {

using namespace adc;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(part);
  return out;
}

std::vector<double> parse_reals(const std::string& s) {
  std::vector<double> out;
  for (const auto& p : split_list(s)) out.push_back(std::stod(p));
  return out;
}

int count_stmts(const Block& b) {
  int n = 0;
  for (const auto& s : b) {
    ++n;
    n += count_stmts(s->then_block);
    n += count_stmts(s->else_block);
  }
  return n;
}

Module load_and_derive(const std::string& path) {
  Module m = load_module_file(path);
  std::vector<std::string> added = ensure_called_derivatives(m);
  for (const auto& name : added)
    std::cerr << "note: derived '" << name << "' on demand\n";
  return m;
}

int cmd_parse(const std::string& path) {
  ParseResult r = parse(read_file(path));
  if (!r.ok()) {
    std::cerr << path << ": " << r.error->to_string() << "\n";
    return 1;
  }
  for (const auto& f : r.module->functions) {
    std::cout << f.name << ": ";
    std::string quals = qualifiers_to_string(f.qualifiers);
    if (!quals.empty()) std::cout << "[" << quals << "] ";
    std::cout << (f.returns_void ? "void" : "real") << ", " << f.params.size()
              << " parameter(s), " << count_stmts(f.body) << " statement(s)\n";
  }
  std::cout << r.module->functions.size() << " function(s) parsed\n";
  return 0;
}

int cmd_check(const std::string& path) {
  Module m = load_and_derive(path);
  check_module(m);
  for (const auto& f : m.functions) {
    std::cout << f.name << ":\n";
    std::cout << "  qualifiers: "
              << (f.qualifiers.empty() ? "(none)" : qualifiers_to_string(f.qualifiers)) << "\n";
    SymbolTable table = resolve(f);
    for (const auto& [name, sym] : table.symbols) {
      const char* kind = sym.kind == SymbolKind::Param     ? "param"
                         : sym.kind == SymbolKind::Local   ? "local"
                         : sym.kind == SymbolKind::LoopVar ? "loop-var"
                                                           : "builtin";
      std::cout << "  " << name << ": " << kind << " " << type_name(sym.type) << "\n";
    }
  }
  return 0;
}

int cmd_diff(const std::string& path, const std::string& fn, const std::string& mode,
             const std::string& wrt, const std::string& out_path, bool no_prune) {
  Module m = load_module_file(path);
  const FunctionDef* f = m.find(fn);
  if (f == nullptr) throw Error(ErrorKind::Transform, "no function '" + fn + "' in " + path);
  FunctionDef derived;
  if (mode == "forward") {
    std::vector<std::string> names = split_list(wrt);
    if (names.size() != 1)
      throw Error(ErrorKind::Transform, "forward mode takes exactly one wrt parameter");
    derived = differentiate_forward(*f, names[0]).derived;
  } else if (mode == "reverse") {
    ReverseOptions opts;
    opts.prune_inactive = !no_prune;
    derived = differentiate_gradient(*f, split_list(wrt), opts).derived;
  } else {
    throw Error(ErrorKind::Transform, "mode must be 'forward' or 'reverse'");
  }
  if (!out_path.empty()) {
    Module out;
    out.functions.push_back(clone(*f));
    out.functions.push_back(std::move(derived));
    std::ofstream os(out_path);
    if (!os) throw Error(ErrorKind::Io, "cannot write '" + out_path + "'");
    os << print(out);
    std::cout << "wrote " << out_path << "\n";
  } else {
    std::cout << print(derived);
  }
  return 0;
}

int cmd_run(const std::string& path, const std::string& fn, const std::string& args_str,
            bool count_ops) {
  Module m = load_and_derive(path);
  const FunctionDef* f = m.find(fn);
  if (f == nullptr) throw Error(ErrorKind::Eval, "no function '" + fn + "' in " + path);
  ArgPack args;
  std::vector<std::vector<double>> arrays;
  arrays.reserve(f->params.size());
  std::vector<std::string> parts = args_str.empty() ? std::vector<std::string>{}
                                                    : split_list(args_str);
  if (parts.size() != f->params.size())
    throw Error(ErrorKind::Eval, "'" + fn + "' takes " + std::to_string(f->params.size()) +
                                     " argument(s), got " + std::to_string(parts.size()));
  for (size_t i = 0; i < parts.size(); ++i) {
    switch (f->params[i].type) {
      case ValType::Real: args.add_real(std::stod(parts[i])); break;
      case ValType::Integer: args.add_int(std::stoll(parts[i])); break;
      case ValType::RealArray: {
        // Array arguments are colon-separated element lists.
        std::vector<double> data;
        std::stringstream ss(parts[i]);
        std::string cell;
        while (std::getline(ss, cell, ':')) data.push_back(std::stod(cell));
        arrays.push_back(std::move(data));
        args.add_array(arrays.back());
        break;
      }
    }
  }
  Program prog(std::move(m));
  EvalResult r = prog.eval(fn, args);
  if (r.value.has_value())
    std::cout << fn << " = " << format_double(*r.value) << "\n";
  else
    std::cout << fn << " returned\n";
  for (size_t i = 0; i < f->params.size(); ++i) {
    if (f->params[i].type != ValType::RealArray) continue;
    size_t ai = 0;
    for (size_t j = 0; j < i; ++j)
      if (f->params[j].type == ValType::RealArray) ++ai;
    std::cout << "  " << f->params[i].name << " = [";
    for (size_t e = 0; e < arrays[ai].size(); ++e)
      std::cout << (e ? ", " : "") << format_double(arrays[ai][e]);
    std::cout << "]\n";
  }
  if (count_ops) {
    const OpCounters& c = r.counts;
    std::cout << "ops: total " << c.total() << " (adds " << c.adds << ", muls " << c.muls
              << ", divs " << c.divs << ", intrinsics " << c.intrinsics << ", comparisons "
              << c.comparisons << "); tape pushes " << c.tape_pushes << ", pops " << c.tape_pops
              << "\n";
  }
  return 0;
}

int cmd_numdiff(const std::string& path, const std::string& fn, const std::string& at,
                const std::string& wrt) {
  Module m = load_module_file(path);
  const FunctionDef* f = m.find(fn);
  if (f == nullptr) throw Error(ErrorKind::Eval, "no function '" + fn + "' in " + path);
  std::vector<double> point = parse_reals(at);
  if (point.size() != f->params.size())
    throw Error(ErrorKind::Eval, "--at needs one value per parameter");
  ArgPack args;
  for (size_t i = 0; i < point.size(); ++i) {
    switch (f->params[i].type) {
      case ValType::Real: args.add_real(point[i]); break;
      case ValType::Integer: args.add_int(static_cast<int64_t>(point[i])); break;
      case ValType::RealArray:
        throw Error(ErrorKind::Eval, "numdiff CLI supports scalar parameters only");
    }
  }
  std::vector<std::string> wrt_names = split_list(wrt);
  Program prog(std::move(m));
  CentralGradient g = central_gradient(prog, fn, args, wrt_names);
  for (size_t i = 0; i < wrt_names.size(); ++i)
    std::cout << "d" << fn << "/d" << wrt_names[i] << " = " << format_double(g.values[i]) << "\n";
  std::cout << "evaluations: " << g.evaluations << ", total ops: " << g.counts.total() << "\n";
  return 0;
}

int cmd_hessian(const std::string& path, const std::string& fn, const std::string& at,
                const std::string& wrt) {
  Module m = load_module_file(path);
  std::vector<std::string> wrt_names = split_list(wrt);
  HessianResult h = hessian(m, fn, wrt_names, parse_reals(at));
  for (int i = 0; i < h.n; ++i) {
    for (int j = 0; j < h.n; ++j) std::cout << (j ? " " : "") << format_double(h.at(i, j));
    std::cout << "\n";
  }
  return 0;
}

int cmd_race_check(const std::string& path, const std::string& kernel) {
  Module m = load_and_derive(path);
  check_module(m);
  AccessReport report = race_check(m, kernel);
  for (const auto& e : report.entries)
    std::cout << e.param << ": " << access_name(e.access) << " (" << e.note << ")\n";
  return report.has_hazard() ? 2 : 0;
}

int cmd_launch(const std::string& path, const std::string& kernel, int64_t n, int64_t block,
               const std::string& init_csv, const std::string& out_path, bool unsafe) {
  Module m = load_and_derive(path);
  const FunctionDef* k = m.find(kernel);
  if (k == nullptr) throw Error(ErrorKind::Launch, "no kernel '" + kernel + "' in " + path);

  BufferSet buffers;
  if (!init_csv.empty()) {
    CsvTable table = read_csv_file(init_csv);
    for (size_t c = 0; c < table.names.size(); ++c) {
      const std::string& name = table.names[c];
      int pi = k->param_index(name);
      if (pi < 0) continue;
      switch (k->params[static_cast<size_t>(pi)].type) {
        case ValType::RealArray: buffers.arrays[name] = table.columns[c]; break;
        case ValType::Real:
          if (table.columns[c].empty())
            throw Error(ErrorKind::Io, "column '" + name + "' has no rows");
          buffers.scalars[name] = table.columns[c][0];
          break;
        case ValType::Integer:
          if (table.columns[c].empty())
            throw Error(ErrorKind::Io, "column '" + name + "' has no rows");
          buffers.integers[name] = static_cast<int64_t>(table.columns[c][0]);
          break;
      }
    }
  }
  // Unmentioned array parameters default to zeroed length-n buffers (output
  // slots in the Listing-style kernels).
  for (const auto& p : k->params) {
    if (p.type == ValType::RealArray && buffers.arrays.find(p.name) == buffers.arrays.end())
      buffers.arrays[p.name] = std::vector<double>(static_cast<size_t>(n), 0.0);
  }

  LaunchConfig cfg{n / block + 1, block, n};
  Program prog(std::move(m));
  LaunchOptions opts;
  opts.unsafe = unsafe;
  LaunchStats stats = launch(prog, kernel, cfg, buffers, opts);

  CsvTable out;
  for (const auto& p : k->params) {
    if (p.type != ValType::RealArray) continue;
    out.names.push_back(p.name);
    out.columns.push_back(buffers.arrays[p.name]);
  }
  if (out_path.empty()) {
    write_csv(std::cout, out);
  } else {
    std::ofstream os(out_path);
    if (!os) throw Error(ErrorKind::Io, "cannot write '" + out_path + "'");
    write_csv(os, out);
    std::cerr << "wrote " << out_path << "\n";
  }
  uint64_t active = 0;
  for (uint32_t c : stats.thread_statements)
    if (c > 2) ++active;
  std::cerr << "launched " << cfg.grid_dim << " block(s) x " << cfg.block_dim << " thread(s), "
            << active << " active of " << stats.thread_statements.size() << "\n";
  return 0;
}

int cmd_bench_fit(const std::string& gaussians, int64_t events, int repeats, uint64_t seed,
                  const std::string& out_path, const std::string& plot_csv, int budget,
                  bool use_hessian) {
  if (!plot_csv.empty()) {
    std::cout << bench_plot_table(read_file(plot_csv));
    return 0;
  }
  BenchConfig cfg;
  for (const auto& p : split_list(gaussians)) cfg.k_list.push_back(std::stoi(p));
  cfg.events = events;
  cfg.repeats = repeats;
  cfg.seed = seed;
  cfg.fit.budget = budget;
  cfg.fit.use_hessian = use_hessian;
  std::string csv = bench_csv(bench_scaling(cfg));
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream os(out_path);
    if (!os) throw Error(ErrorKind::Io, "cannot write '" + out_path + "'");
    os << csv;
    std::cerr << "wrote " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adc - differentiable DSL compiler and benchmark driver"};
  app.require_subcommand(1);

  std::string file, fn, wrt, mode = "reverse", at, args_str, out_path, init_csv;
  std::string gaussians = "1,2,4,8", plot_csv;
  bool count_ops = false, no_prune = false, unsafe = false, use_hessian = false;
  int64_t n = 512, block = 256, events = 100000;
  int repeats = 1, budget = 400;
  uint64_t seed = 42;
  std::string kernel = "compute";

  auto* parse_cmd = app.add_subcommand("parse", "parse a module and print a summary");
  parse_cmd->add_option("file", file)->required();

  auto* check_cmd = app.add_subcommand("check", "symbol and qualifier report");
  check_cmd->add_option("file", file)->required();

  auto* diff_cmd = app.add_subcommand("diff", "emit derivative source");
  diff_cmd->add_option("file", file)->required();
  diff_cmd->add_option("--fn", fn)->required();
  diff_cmd->add_option("--mode", mode)->check(CLI::IsMember({"forward", "reverse"}));
  diff_cmd->add_option("--wrt", wrt)->required();
  diff_cmd->add_option("--o,--out", out_path, "write primal + derivative module");
  diff_cmd->add_flag("--no-prune", no_prune, "keep adjoints of inactive variables");

  auto* run_cmd = app.add_subcommand("run", "evaluate a function");
  run_cmd->add_option("file", file)->required();
  run_cmd->add_option("--fn", fn)->required();
  run_cmd->add_option("--args", args_str,
                      "comma-separated arguments; array elements separated by ':'");
  run_cmd->add_flag("--count-ops", count_ops);

  auto* numdiff_cmd = app.add_subcommand("numdiff", "central finite-difference gradient");
  numdiff_cmd->add_option("file", file)->required();
  numdiff_cmd->add_option("--fn", fn)->required();
  numdiff_cmd->add_option("--at", at)->required();
  numdiff_cmd->add_option("--wrt", wrt)->required();

  auto* hessian_cmd = app.add_subcommand("hessian", "forward-over-reverse Hessian");
  hessian_cmd->add_option("file", file)->required();
  hessian_cmd->add_option("--fn", fn)->required();
  hessian_cmd->add_option("--at", at)->required();
  hessian_cmd->add_option("--wrt", wrt)->required();

  auto* race_cmd = app.add_subcommand("race-check", "classify kernel buffer accesses");
  race_cmd->add_option("file", file)->required();
  race_cmd->add_option("--kernel", kernel)->required();

  auto* launch_cmd = app.add_subcommand("launch", "emulate a kernel launch");
  launch_cmd->add_option("file", file)->required();
  launch_cmd->add_option("--kernel", kernel)->required();
  launch_cmd->add_option("--n", n);
  launch_cmd->add_option("--block", block);
  launch_cmd->add_option("--init", init_csv, "CSV of input buffers");
  launch_cmd->add_option("--out", out_path, "write result buffers as CSV");
  launch_cmd->add_flag("--unsafe", unsafe, "force a launch flagged as hazardous");

  auto* bench_cmd = app.add_subcommand("bench", "benchmarks");
  auto* fit_cmd = bench_cmd->add_subcommand("fit", "gaussian-sum fit scaling");
  fit_cmd->add_option("--gaussians", gaussians);
  fit_cmd->add_option("--events", events);
  fit_cmd->add_option("--repeats", repeats);
  fit_cmd->add_option("--seed", seed);
  fit_cmd->add_option("--budget", budget);
  fit_cmd->add_option("--out", out_path);
  fit_cmd->add_option("--plot", plot_csv, "emit a gnuplot table from an existing CSV");
  fit_cmd->add_flag("--use-hessian", use_hessian);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*parse_cmd) return cmd_parse(file);
    if (*check_cmd) return cmd_check(file);
    if (*diff_cmd) return cmd_diff(file, fn, mode, wrt, out_path, no_prune);
    if (*run_cmd) return cmd_run(file, fn, args_str, count_ops);
    if (*numdiff_cmd) return cmd_numdiff(file, fn, at, wrt);
    if (*hessian_cmd) return cmd_hessian(file, fn, at, wrt);
    if (*race_cmd) return cmd_race_check(file, kernel);
    if (*launch_cmd) return cmd_launch(file, kernel, n, block, init_csv, out_path, unsafe);
    if (*bench_cmd) {
      if (*fit_cmd)
        return cmd_bench_fit(gaussians, events, repeats, seed, out_path, plot_csv, budget,
                             use_hessian);
      std::cerr << "bench requires a subcommand\n";
      return 1;
    }
  } catch (const adc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
