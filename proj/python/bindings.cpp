#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "bichain/cli.hpp"
#include "bichain/compile.hpp"
#include "bichain/error.hpp"
#include "bichain/model.hpp"
#include "bichain/predicate.hpp"
#include "bichain/prism.hpp"
#include "bichain/reach.hpp"
#include "bichain/semantics.hpp"
#include "bichain/sir.hpp"

namespace py = pybind11;
using namespace bichain;

namespace {

// Rationals cross the boundary as "p/q" strings; the Python package turns
// them into fractions.Fraction.
py::object value_of(const Rational& x) { return py::str(to_string(x)); }
py::object value_of(double x) { return py::float_(x); }

NumericBackend backend_of(const std::string& name, int r) {
  if (name != "rational" && name != "double") throw DomainError("backend must be 'rational' or 'double'");
  return {name == "double" ? Backend::Double : Backend::Rational, r};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read model file '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

template <class Num>
py::object eoe_impl(const BinomialChain& chain, const std::string& engine, const NumericBackend& backend) {
  bool sir = engine == "sir" || (engine == "auto" && match_sir(chain));
  if (sir) {
    SirChain<Num> sc = to_sir_chain<Num>(chain, backend);
    return value_of(sir_expected_eoe(sc).at(sc.s0, sc.r0));
  }
  Kernel<Num> kernel(chain, backend);
  auto ec = sort_canonical(build_reachable(kernel));
  return value_of(expected_hitting_times(ec)[ec.initial]);
}

template <class Num>
py::dict successors_impl(const BinomialChain& chain, const StateVector& u, const NumericBackend& backend) {
  Kernel<Num> kernel(chain, backend);
  py::dict out;
  for (const auto& [w, p] : successors(kernel, u)) out[py::tuple(py::cast(w))] = value_of(p);
  return out;
}

template <class Num>
py::object until_impl(const BinomialChain& chain, const std::string& safe, const std::string& target,
                      const NumericBackend& backend) {
  Kernel<Num> kernel(chain, backend);
  auto ec = sort_canonical(build_reachable(kernel));
  return value_of(until_probability(ec, Predicate::parse(safe, chain), Predicate::parse(target, chain)));
}

}  // namespace

PYBIND11_MODULE(_bichain, m) {
  m.doc() = "Markov binomial chain analysis";

  static py::exception<Error> base(m, "Error");
  static py::exception<InputError> input(m, "InputError", base.ptr());
  static py::exception<ResourceError> resource(m, "ResourceError", base.ptr());
  static py::exception<InvariantError> invariant(m, "InvariantError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InputError& e) {
      PyErr_SetString(input.ptr(), e.what());
    } catch (const ResourceError& e) {
      PyErr_SetString(resource.ptr(), e.what());
    } catch (const InvariantError& e) {
      PyErr_SetString(invariant.ptr(), e.what());
    } catch (const Error& e) {
      PyErr_SetString(base.ptr(), e.what());
    }
  });

  py::class_<BinomialChain>(m, "Chain")
      .def_static("from_json", [](const std::string& text) { return parse_model(text); })
      .def_static("load", [](const std::string& path) { return parse_model(read_file(path)); })
      .def("to_json", &serialize_model)
      .def_property_readonly("names", &BinomialChain::names)
      .def_property_readonly("initial", &BinomialChain::initial)
      .def_property_readonly("has_exp_table", [](const BinomialChain& c) { return c.exp_table().has_value(); })
      .def("with_initial", &BinomialChain::with_initial)
      .def("support", [](const BinomialChain& c) { return support(c); })
      .def("is_simple", [](const BinomialChain& c) { return is_simple(c); })
      .def("is_closed", [](const BinomialChain& c) { return is_closed(c); })
      .def("is_acyclic", [](const BinomialChain& c) { return is_acyclic(c); })
      .def("is_sir", [](const BinomialChain& c) { return match_sir(c).has_value(); })
      .def("topo_order", [](const BinomialChain& c) { return topo_order(c); })
      .def("__len__", &BinomialChain::size);

  m.def(
      "_eoe",
      [](const BinomialChain& chain, const std::string& engine, const std::string& backend, int r) {
        if (engine != "auto" && engine != "sir" && engine != "general") throw DomainError("unknown engine");
        if (engine == "sir" && !match_sir(chain)) throw ModelError("model does not have the SIR shape");
        auto b = backend_of(backend, r);
        return b.mode == Backend::Double ? eoe_impl<double>(chain, engine, b) : eoe_impl<Rational>(chain, engine, b);
      },
      py::arg("chain"), py::arg("engine") = "auto", py::arg("backend") = "rational", py::arg("error_exponent") = 64);

  m.def(
      "_successors",
      [](const BinomialChain& chain, const StateVector& u, const std::string& backend, int r) {
        auto b = backend_of(backend, r);
        if (u.size() != chain.size()) throw DomainError("state has the wrong length");
        return b.mode == Backend::Double ? successors_impl<double>(chain, u, b) : successors_impl<Rational>(chain, u, b);
      },
      py::arg("chain"), py::arg("state"), py::arg("backend") = "rational", py::arg("error_exponent") = 64);

  m.def(
      "_until_probability",
      [](const BinomialChain& chain, const std::string& safe, const std::string& target, const std::string& backend,
         int r) {
        auto b = backend_of(backend, r);
        return b.mode == Backend::Double ? until_impl<double>(chain, safe, target, b)
                                         : until_impl<Rational>(chain, safe, target, b);
      },
      py::arg("chain"), py::arg("safe"), py::arg("target"), py::arg("backend") = "rational",
      py::arg("error_exponent") = 64);

  m.def(
      "_approx_exp", [](std::uint64_t a, std::uint64_t b, int r) { return value_of(taylor_exp_neg(a, b, r)); },
      py::arg("a"), py::arg("b"), py::arg("r"));

  m.def(
      "simulate",
      [](const BinomialChain& chain, std::uint64_t runs, std::uint64_t seed) {
        Kernel<double> kernel(chain, NumericBackend{Backend::Double, 64});
        MonteCarloResult mc = monte_carlo_hitting(kernel, runs, seed);
        py::dict out;
        out["mean"] = mc.mean;
        out["std_error"] = mc.std_error;
        out["half_width"] = mc.half_width;
        out["runs"] = mc.runs;
        py::dict finals;
        for (const auto& [u, n] : mc.final_states) finals[py::tuple(py::cast(u))] = n;
        out["final_states"] = finals;
        return out;
      },
      py::arg("chain"), py::arg("runs") = 10000, py::arg("seed") = 1);

  m.def(
      "export_prism",
      [](const BinomialChain& chain, const std::vector<std::string>& properties, std::optional<Count> bound_cap,
         int r) {
        std::vector<PropertyKind> kinds;
        for (const auto& p : properties) kinds.push_back(parse_property_kind(p));
        BinomialChain c = chain.exp_table() ? chain : chain.with_exp_table(synthesize_exp_table(chain, r));
        CompiledScm compiled = compile_bc_to_scm(c);
        PrismBounds bounds = certified_bounds(compiled, c, bound_cap);
        return py::make_tuple(export_prism(compiled, c, bounds), emit_properties(compiled, c, kinds));
      },
      py::arg("chain"), py::arg("properties") = std::vector<std::string>{"PopInc", "OS", "EoE"},
      py::arg("bound_cap") = py::none(), py::arg("error_exponent") = 64);

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "bichain");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
