#include "adc/numdiff.hpp"

#include <cmath>
#include <limits>

namespace adc {

double DiffConfig::step_for(const std::string& param, double x) const {
  auto it = step_override.find(param);
  if (it != step_override.end()) return it->second;
  static const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  return h0 * std::max(1.0, std::fabs(x));
}

namespace {

struct Coord {
  size_t arg_index;
  int64_t elem = -1;  // -1 for scalars
  std::string param;
};

double read_coord(const ArgPack& args, const Coord& c) {
  const auto& a = args.args()[c.arg_index];
  return c.elem < 0 ? a.real : a.array.data[c.elem];
}

void write_coord(ArgPack& args, const Coord& c, double v) {
  auto& a = args.args()[c.arg_index];
  if (c.elem < 0)
    a.real = v;
  else
    a.array.data[c.elem] = v;
}

}  // namespace

CentralGradient central_gradient(const Program& p, const std::string& fn, const ArgPack& args,
                                 const std::vector<std::string>& wrt, const DiffConfig& cfg) {
  const FunctionDef* f = p.module().find(fn);
  if (f == nullptr) throw Error(ErrorKind::Eval, "unknown function '" + fn + "'");

  std::vector<Coord> coords;
  for (const auto& w : wrt) {
    int idx = f->param_index(w);
    if (idx < 0)
      throw Error(ErrorKind::Eval, "'" + w + "' is not a parameter of '" + fn + "'");
    const Param& param = f->params[idx];
    if (param.type == ValType::Integer)
      throw Error(ErrorKind::Eval, "cannot differentiate with respect to integer '" + w + "'");
    if (param.type == ValType::Real) {
      coords.push_back({static_cast<size_t>(idx), -1, w});
    } else {
      int64_t len = args.args()[static_cast<size_t>(idx)].array.len;
      for (int64_t e = 0; e < len; ++e) coords.push_back({static_cast<size_t>(idx), e, w});
    }
  }

  CentralGradient out;
  out.values.reserve(coords.size());
  ArgPack work = args;
  for (const Coord& c : coords) {
    double x = read_coord(work, c);
    double h = cfg.step_for(c.param, x);
    double f_plus = 0.0, f_minus = 0.0;
    for (int sign : {+1, -1}) {
      double probe = x + sign * h;
      write_coord(work, c, probe);
      try {
        EvalResult r = p.eval(fn, work);
        out.counts += r.counts;
        ++out.evaluations;
        (sign > 0 ? f_plus : f_minus) = *r.value;
      } catch (const Error& e) {
        write_coord(work, c, x);
        throw Error(e.kind(),
                    std::string(e.what()) + " (while perturbing '" + c.param +
                        (c.elem >= 0 ? "[" + std::to_string(c.elem) + "]" : "") + "' to " +
                        std::to_string(probe) + ")",
                    e.pos());
      }
    }
    write_coord(work, c, x);
    out.values.push_back((f_plus - f_minus) / (2.0 * h));
  }
  return out;
}

}  // namespace adc
