#include "adc/tooling.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "adc/diag.hpp"
#include "adc/parser.hpp"
#include "adc/printer.hpp"
#include "adc/transform.hpp"

namespace adc {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Module load_module_file(const std::string& path) {
  ParseResult r = parse(read_file(path));
  if (!r.ok()) throw Error(ErrorKind::Semantic, path + ": " + r.error->to_string(), r.error->pos);
  return std::move(*r.module);
}

namespace {

void collect_callees(const Block& b, std::set<std::string>& out) {
  for (const auto& s : b) {
    if (s->kind == StmtKind::CallStmt && s->callee != kPushName && s->callee != kPushCtlName)
      out.insert(s->callee);
    collect_callees(s->then_block, out);
    collect_callees(s->else_block, out);
  }
}

// Splits "<base>_grad" / "<base>_grad_0_1" / "<base>_darg2" into a request
// against an existing function. Returns false when the name does not follow
// a derivative convention or the base function is missing.
bool try_derive(Module& m, const std::string& name) {
  auto derive_grad = [&](const std::string& base, const std::string& suffix) -> bool {
    const FunctionDef* f = m.find(base);
    if (f == nullptr) return false;
    std::vector<std::string> wrt;
    if (suffix.empty()) {
      for (const auto& p : f->params)
        if (p.type != ValType::Integer) wrt.push_back(p.name);
    } else {
      std::stringstream ss(suffix);
      std::string part;
      while (std::getline(ss, part, '_')) {
        if (part.empty()) return false;
        char* end = nullptr;
        long idx = std::strtol(part.c_str(), &end, 10);
        if (end == nullptr || *end != '\0') return false;
        if (idx < 0 || static_cast<size_t>(idx) >= f->params.size()) return false;
        wrt.push_back(f->params[static_cast<size_t>(idx)].name);
      }
    }
    if (wrt.empty()) return false;
    AdjointProgram ap = differentiate_gradient(*f, wrt);
    if (ap.derived.name != name) return false;  // convention mismatch
    m.functions.push_back(std::move(ap.derived));
    return true;
  };

  size_t grad_pos = name.rfind("_grad");
  if (grad_pos != std::string::npos) {
    std::string base = name.substr(0, grad_pos);
    std::string rest = name.substr(grad_pos + 5);
    if (rest.empty()) {
      if (derive_grad(base, "")) return true;
    } else if (rest[0] == '_') {
      if (derive_grad(base, rest.substr(1))) return true;
    }
  }
  size_t darg_pos = name.rfind("_darg");
  if (darg_pos != std::string::npos) {
    std::string base = name.substr(0, darg_pos);
    std::string idx_str = name.substr(darg_pos + 5);
    const FunctionDef* f = m.find(base);
    if (f != nullptr && !idx_str.empty()) {
      char* end = nullptr;
      long idx = std::strtol(idx_str.c_str(), &end, 10);
      if (end != nullptr && *end == '\0' && idx >= 0 &&
          static_cast<size_t>(idx) < f->params.size()) {
        TangentProgram tp = differentiate_forward(*f, f->params[static_cast<size_t>(idx)].name);
        if (tp.derived.name == name) {
          m.functions.push_back(std::move(tp.derived));
          return true;
        }
      }
    }
  }
  return false;
}

}  // namespace

std::vector<std::string> ensure_called_derivatives(Module& m) {
  std::vector<std::string> added;
  bool progress = true;
  while (progress) {
    progress = false;
    std::set<std::string> callees;
    for (const auto& f : m.functions) collect_callees(f.body, callees);
    for (const auto& name : callees) {
      if (m.find(name) != nullptr) continue;
      if (try_derive(m, name)) {
        added.push_back(name);
        progress = true;
      }
    }
  }
  return added;
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Io, "empty CSV input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::stringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) table.names.push_back(cell);
  table.columns.resize(table.names.size());
  size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      if (col >= table.names.size())
        throw Error(ErrorKind::Io, "row " + std::to_string(row) + " has too many columns");
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str())
        throw Error(ErrorKind::Io, "row " + std::to_string(row) + ": bad number '" + cell + "'");
      table.columns[col].push_back(v);
      ++col;
    }
    if (col != table.names.size())
      throw Error(ErrorKind::Io, "row " + std::to_string(row) + " has too few columns");
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return read_csv(in);
}

void write_csv(std::ostream& out, const CsvTable& table) {
  for (size_t i = 0; i < table.names.size(); ++i) {
    if (i) out << ',';
    out << table.names[i];
  }
  out << '\n';
  size_t rows = 0;
  for (const auto& c : table.columns) rows = std::max(rows, c.size());
  for (size_t r = 0; r < rows; ++r) {
    for (size_t i = 0; i < table.columns.size(); ++i) {
      if (i) out << ',';
      if (r < table.columns[i].size()) out << format_double(table.columns[i][r]);
    }
    out << '\n';
  }
}

}  // namespace adc
