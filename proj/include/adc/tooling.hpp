/// File loading, on-demand derivative generation for modules that call
/// generated gradients by name, and the CSV buffer format used by the
/// launch CLI.
#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "adc/ast.hpp"

namespace adc {

std::string read_file(const std::string& path);
Module load_module_file(const std::string& path);

/// Derives any function a call statement references by generated-derivative
/// name: `<base>_grad` (all differentiable parameters), `<base>_grad_<i...>`
/// (specific parameter indices) or `<base>_darg<i>`. Appends the derived
/// functions to m. Returns the names added.
std::vector<std::string> ensure_called_derivatives(Module& m);

/// CSV with a header row of buffer names and one row per index. Columns are
/// returned in header order.
struct CsvTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);
void write_csv(std::ostream& out, const CsvTable& table);

}  // namespace adc
