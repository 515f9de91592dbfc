#include "adc/hessian.hpp"

#include "adc/diag.hpp"
#include "adc/eval.hpp"
#include "adc/transform.hpp"

namespace adc {

HessianResult hessian(const Module& m, const std::string& fn,
                      const std::vector<std::string>& wrt, const std::vector<double>& point) {
  const FunctionDef* f = m.find(fn);
  if (f == nullptr) throw Error(ErrorKind::Transform, "unknown function '" + fn + "'");
  if (point.size() != f->params.size())
    throw Error(ErrorKind::Transform,
                "'" + fn + "' takes " + std::to_string(f->params.size()) + " values, got " +
                    std::to_string(point.size()));
  for (const auto& p : f->params)
    if (p.type != ValType::Real)
      throw Error(ErrorKind::Transform,
                  "hessian requires scalar real parameters ('" + p.name + "' is " +
                      std::string(type_name(p.type)) + ")");

  AdjointProgram grad = differentiate_gradient(*f, wrt);
  const int n = static_cast<int>(wrt.size());

  HessianResult h;
  h.n = n;
  h.values.assign(static_cast<size_t>(n) * n, 0.0);

  for (int col = 0; col < n; ++col) {
    TangentProgram tangent = differentiate_forward(grad.derived, wrt[col]);
    Module work;
    work.functions.push_back(clone(tangent.derived));
    Program prog(std::move(work));

    // Arguments: point, one zeroed slot per wrt entry, then one zeroed
    // tangent shadow per slot (appended by the forward transform in the
    // same order).
    ArgPack args;
    for (double v : point) args.add_real(v);
    std::vector<std::vector<double>> slots(static_cast<size_t>(n), std::vector<double>(1, 0.0));
    std::vector<std::vector<double>> shadows(static_cast<size_t>(n), std::vector<double>(1, 0.0));
    for (auto& s : slots) args.add_array(s);
    for (auto& s : shadows) args.add_array(s);
    prog.eval(tangent.derived.name, args);
    for (int row = 0; row < n; ++row)
      h.values[static_cast<size_t>(row) * n + col] = shadows[static_cast<size_t>(row)][0];
  }
  return h;
}

}  // namespace adc
