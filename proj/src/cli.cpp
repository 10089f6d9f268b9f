#include "bichain/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <new>
#include <sstream>

#include "bichain/compile.hpp"
#include "bichain/error.hpp"
#include "bichain/model.hpp"
#include "bichain/predicate.hpp"
#include "bichain/prism.hpp"
#include "bichain/reach.hpp"
#include "bichain/semantics.hpp"
#include "bichain/sir.hpp"

namespace bichain {

namespace {

struct RunConfig {
  std::string model_path;
  std::string engine = "auto";
  std::string backend = "rational";
  int error_exponent = 64;
  std::uint64_t state_cap = Limits{}.state_cap;
  std::uint64_t witness_cap = Limits{}.witness_cap;
  std::uint64_t seed = 1;
  std::uint64_t runs = 10'000;
  bool machine = false;
  bool per_state = false;
  bool trace = false;
  std::string safe = "true";
  std::string target;
  std::string property;
  std::string out_model, out_props;
  std::vector<std::string> properties{"PopInc", "OS", "EoE"};
  std::optional<Count> bound_cap;
  std::uint64_t a = 0, b = 0;
  int r = 0;
};

class Printer {
 public:
  Printer(std::ostream& out, bool machine) : out_(out), machine_(machine) {}
  void field(const std::string& key, const std::string& label, const std::string& value) {
    if (machine_) {
      out_ << key << "=" << value << "\n";
    } else {
      out_ << label << ": " << value << "\n";
    }
  }
  std::ostream& raw() { return out_; }
  bool machine() const { return machine_; }

 private:
  std::ostream& out_;
  bool machine_;
};

std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}
std::string fmt(const Rational& x) { return to_string(x); }

std::string yes_no(bool b) { return b ? "yes" : "no"; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read model file '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path + "'");
  f << text;
  if (!f) throw InputError("write to '" + path + "' failed");
}

NumericBackend backend_of(const RunConfig& cfg) {
  return {cfg.backend == "double" ? Backend::Double : Backend::Rational, cfg.error_exponent};
}

Limits limits_of(const RunConfig& cfg) {
  Limits l;
  l.state_cap = cfg.state_cap;
  l.witness_cap = cfg.witness_cap;
  return l;
}

std::string render_fn(const LinearFn& fn, const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t l = 0; l < fn.coeffs.size(); ++l) {
    if (sgn(fn.coeffs[l]) == 0) continue;
    if (!out.empty()) out += " + ";
    out += to_string(fn.coeffs[l]) + "*" + names[l];
  }
  if (sgn(fn.offset) != 0 || out.empty()) out += (out.empty() ? "" : " + ") + to_string(fn.offset);
  return out;
}

std::string render_state(const StateVector& u, const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < u.size(); ++i) out += (i ? " " : "") + names[i] + "=" + std::to_string(u[i]);
  return out;
}

// Machine-output keys: counts only, so every line splits at its first '='.
std::string state_key(const StateVector& u) {
  std::string out;
  for (std::size_t i = 0; i < u.size(); ++i) out += (i ? "," : "") + std::to_string(u[i]);
  return out;
}

// ---------------------------------------------------------------------------

int cmd_validate(const RunConfig& cfg, Printer& p) {
  BinomialChain chain = parse_model(read_file(cfg.model_path));
  const auto& names = chain.names();
  std::string comps;
  for (const auto& n : names) comps += (comps.empty() ? "" : " ") + n;
  p.field("compartments", "compartments", comps);
  p.field("population", "population", std::to_string(one_norm(chain.initial())));
  const bool acyclic = is_acyclic(chain);
  p.field("simple", "simple", yes_no(is_simple(chain)));
  p.field("closed", "closed", yes_no(is_closed(chain)));
  p.field("acyclic", "acyclic", yes_no(acyclic));
  for (const auto& [i, j] : support(chain)) {
    p.field("transfer." + names[i] + "." + names[j], "transfer " + names[i] + " -> " + names[j],
            render_fn(*chain.transfer(i, j), names));
  }
  if (acyclic) {
    std::vector<std::size_t> pos = topo_order(chain);
    std::vector<std::string> seq(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i) seq[pos[i]] = names[i];
    std::string order;
    for (const auto& n : seq) order += (order.empty() ? "" : " ") + n;
    p.field("topo_order", "topological order", order);
    p.field("dag_depth", "DAG depth", std::to_string(dag_depth(chain)));
  }
  p.field("sir_shape", "SIR shape", yes_no(match_sir(chain).has_value()));
  p.field("exp_table", "exp_table", yes_no(chain.exp_table().has_value()));
  for (const auto& w : model_warnings(chain)) p.field("warning", "warning", w);
  return 0;
}

template <class Num>
int eoe_sir(const BinomialChain& chain, const RunConfig& cfg, Printer& p) {
  SirShape shape = *match_sir(chain);
  SirChain<Num> sc = to_sir_chain<Num>(chain, backend_of(cfg));
  SirHittingTimes<Num> h = sir_expected_eoe(sc);
  const Num& value = h.at(sc.s0, sc.r0);
  p.field("engine", "engine", "sir");
  p.field("backend", "backend", cfg.backend);
  p.field("eoe", "expected steps to termination", fmt(value));
  if constexpr (std::is_same_v<Num, Rational>) p.field("eoe_decimal", "decimal", fmt(value.get_d()));
  if (cfg.per_state) {
    const auto& names = chain.names();
    for (const SirState& m : h.colex_order()) {
      StateVector u(3);
      u[shape.s] = m[0];
      u[shape.i] = m[1];
      u[shape.r] = m[2];
      p.field("state[" + state_key(u) + "]", "  " + render_state(u, names), fmt(h.at(m[0], m[2])));
    }
  }
  return 0;
}

template <class Num>
int eoe_general(const BinomialChain& chain, const RunConfig& cfg, Printer& p) {
  Kernel<Num> kernel(chain, backend_of(cfg), limits_of(cfg));
  ExplicitChain<Num> ec = sort_canonical(build_reachable(kernel));
  std::vector<Num> x = expected_hitting_times(ec);
  p.field("engine", "engine", "general");
  p.field("backend", "backend", cfg.backend);
  p.field("states", "reachable states", std::to_string(ec.size()));
  p.field("eoe", "expected steps to termination", fmt(x[ec.initial]));
  if constexpr (std::is_same_v<Num, Rational>) p.field("eoe_decimal", "decimal", fmt(x[ec.initial].get_d()));
  if (cfg.per_state) {
    for (std::size_t s = 0; s < ec.size(); ++s) {
      p.field("state[" + state_key(ec.states[s]) + "]", "  " + render_state(ec.states[s], chain.names()), fmt(x[s]));
    }
  }
  return 0;
}

int cmd_eoe(const RunConfig& cfg, Printer& p) {
  BinomialChain chain = parse_model(read_file(cfg.model_path));
  if (!is_acyclic(chain)) throw ModelError("expected time to termination needs an acyclic chain");
  bool sir = cfg.engine == "sir" || (cfg.engine == "auto" && match_sir(chain));
  if (cfg.engine == "sir" && !match_sir(chain)) throw ModelError("model does not have the SIR shape");
  if (cfg.backend == "double") return sir ? eoe_sir<double>(chain, cfg, p) : eoe_general<double>(chain, cfg, p);
  return sir ? eoe_sir<Rational>(chain, cfg, p) : eoe_general<Rational>(chain, cfg, p);
}

template <class Num>
int prob_with(const BinomialChain& chain, const RunConfig& cfg, Printer& p) {
  Kernel<Num> kernel(chain, backend_of(cfg), limits_of(cfg));
  ExplicitChain<Num> ec = sort_canonical(build_reachable(kernel));
  Num value;
  if (!cfg.property.empty()) {
    PropertyKind kind = parse_property_kind(cfg.property);
    value = evaluate_property(kernel, ec, kind);
    p.field("property", "property", property_name(kind));
  } else {
    Predicate safe = Predicate::parse(cfg.safe, chain);
    Predicate target = Predicate::parse(cfg.target, chain);
    value = until_probability(ec, safe, target);
    p.field("safe", "safe", safe.text());
    p.field("target", "target", target.text());
  }
  p.field("states", "reachable states", std::to_string(ec.size()));
  p.field("value", "value", fmt(value));
  if constexpr (std::is_same_v<Num, Rational>) p.field("value_decimal", "decimal", fmt(value.get_d()));
  return 0;
}

int cmd_prob(const RunConfig& cfg, Printer& p) {
  BinomialChain chain = parse_model(read_file(cfg.model_path));
  if (cfg.property.empty() && cfg.target.empty()) throw DomainError("prob needs --target or --property");
  if (!cfg.property.empty() && !cfg.target.empty()) throw DomainError("--target and --property are exclusive");
  if (!is_acyclic(chain)) throw ModelError("reachability queries need an acyclic chain");
  return cfg.backend == "double" ? prob_with<double>(chain, cfg, p) : prob_with<Rational>(chain, cfg, p);
}

int cmd_simulate(const RunConfig& cfg, Printer& p) {
  BinomialChain chain = parse_model(read_file(cfg.model_path));
  NumericBackend backend = backend_of(cfg);
  backend.mode = Backend::Double;
  Kernel<double> kernel(chain, backend, limits_of(cfg));
  const auto& names = chain.names();
  if (cfg.trace) {
    Rng rng(cfg.seed);
    StateVector u = chain.initial();
    std::uint64_t step = 0;
    p.field("trace." + std::to_string(step), "step " + std::to_string(step), render_state(u, names));
    while (!kernel.is_absorbing(u)) {
      if (step == 1'000'000) throw ResourceError("trajectory exceeded 1000000 steps");
      u = sample_transition(kernel, u, rng);
      ++step;
      p.field("trace." + std::to_string(step), "step " + std::to_string(step), render_state(u, names));
    }
    return 0;
  }
  MonteCarloResult mc = monte_carlo_hitting(kernel, cfg.runs, cfg.seed);
  p.field("runs", "runs", std::to_string(mc.runs));
  p.field("seed", "seed", std::to_string(cfg.seed));
  p.field("mean", "mean steps", fmt(mc.mean));
  p.field("std_error", "standard error", fmt(mc.std_error));
  p.field("ci95_low", "95% CI low", fmt(mc.mean - mc.half_width));
  p.field("ci95_high", "95% CI high", fmt(mc.mean + mc.half_width));
  for (const auto& [u, count] : mc.final_states) {
    const std::string st = render_state(u, names);
    double frac = static_cast<double>(count) / static_cast<double>(mc.runs);
    p.field("final[" + state_key(u) + "]", "final " + st, std::to_string(count) + " " + fmt(frac));
  }
  return 0;
}

int cmd_export(const RunConfig& cfg, Printer& p) {
  std::vector<PropertyKind> kinds;
  for (const auto& name : cfg.properties) kinds.push_back(parse_property_kind(name));
  BinomialChain chain = parse_model(read_file(cfg.model_path));
  if (!chain.exp_table()) chain = chain.with_exp_table(synthesize_exp_table(chain, cfg.error_exponent));
  CompiledScm c = compile_bc_to_scm(chain);
  PrismBounds bounds = certified_bounds(c, chain, cfg.bound_cap);
  std::string model = export_prism(c, chain, bounds);
  std::string props = emit_properties(c, chain, kinds);
  if (cfg.out_model.empty()) {
    p.raw() << model;
  } else {
    write_file(cfg.out_model, model);
    p.field("model", "model written to", cfg.out_model);
  }
  if (cfg.out_props.empty()) {
    p.raw() << props;
  } else {
    write_file(cfg.out_props, props);
    p.field("props", "properties written to", cfg.out_props);
  }
  if (!cfg.out_model.empty()) {
    p.field("locations", "locations", std::to_string(c.scm.states.size()));
    p.field("counters", "counters", std::to_string(c.scm.counters.size()));
  }
  return 0;
}

int cmd_approx_exp(const RunConfig& cfg, Printer& p) {
  Rational v = taylor_exp_neg(cfg.a, cfg.b, cfg.r);
  p.field("value", "value", fmt(v));
  p.field("decimal", "decimal", fmt(v.get_d()));
  p.field("terms", "terms", std::to_string(taylor_terms(cfg.a, cfg.r)));
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Markov binomial chain analysis", "bichain"};
  app.require_subcommand(1);
  app.add_flag("--machine-output", cfg.machine, "Print key=value lines");

  auto model_arg = [&](CLI::App* sub) { sub->add_option("model", cfg.model_path, "Model file (JSON)")->required(); };
  auto numeric_opts = [&](CLI::App* sub) {
    sub->add_option("--backend", cfg.backend, "Number type")->check(CLI::IsMember({"rational", "double"}));
    sub->add_option("--error-exponent", cfg.error_exponent, "Taylor precision r, error <= 2^-r")
        ->check(CLI::Range(1, 1 << 20));
    sub->add_option("--state-cap", cfg.state_cap, "Maximum explicit states")->check(CLI::PositiveNumber);
    sub->add_option("--witness-cap", cfg.witness_cap, "Maximum witnesses per state")->check(CLI::PositiveNumber);
  };

  CLI::App* validate = app.add_subcommand("validate", "Check and classify a model");
  model_arg(validate);

  CLI::App* eoe = app.add_subcommand("eoe", "Expected number of steps to termination");
  model_arg(eoe);
  numeric_opts(eoe);
  eoe->add_option("--engine", cfg.engine, "Solver")->check(CLI::IsMember({"auto", "sir", "general"}));
  eoe->add_flag("--per-state", cfg.per_state, "Print the value of every state");

  CLI::App* prob = app.add_subcommand("prob", "Probability of staying in SAFE until TARGET");
  model_arg(prob);
  numeric_opts(prob);
  prob->add_option("--safe", cfg.safe, "Safe predicate");
  prob->add_option("--target", cfg.target, "Target predicate");
  prob->add_option("--property", cfg.property, "PopInc, OS or EoE, answered internally");

  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo steps to termination (double backend)");
  model_arg(simulate);
  numeric_opts(simulate);
  simulate->add_option("--runs", cfg.runs, "Number of runs")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", cfg.seed, "Random seed");
  simulate->add_flag("--trace", cfg.trace, "Print one trajectory instead of statistics");

  CLI::App* exp = app.add_subcommand("export", "Compile to a PRISM model and property file");
  model_arg(exp);
  exp->add_option("--error-exponent", cfg.error_exponent, "Precision of synthesized exponentials")
      ->check(CLI::Range(1, 1 << 20));
  exp->add_option("--out-model", cfg.out_model, "PRISM model path (stdout when absent)");
  exp->add_option("--out-props", cfg.out_props, "Property file path (stdout when absent)");
  exp->add_option("--properties", cfg.properties, "Comma-separated subset of PopInc,OS,EoE")->delimiter(',');
  exp->add_option("--bound-cap", cfg.bound_cap, "Largest counter bound allowed")->check(CLI::PositiveNumber);

  CLI::App* approx = app.add_subcommand("approx-exp", "Rational approximation of e^{-a/b} within 2^-r");
  approx->add_option("a", cfg.a, "Numerator")->required()->check(CLI::PositiveNumber);
  approx->add_option("b", cfg.b, "Denominator")->required()->check(CLI::PositiveNumber);
  approx->add_option("r", cfg.r, "Error exponent")->required()->check(CLI::Range(1, 1 << 20));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  Printer p(out, cfg.machine);
  try {
    if (*validate) return cmd_validate(cfg, p);
    if (*eoe) return cmd_eoe(cfg, p);
    if (*prob) return cmd_prob(cfg, p);
    if (*simulate) return cmd_simulate(cfg, p);
    if (*exp) return cmd_export(cfg, p);
    if (*approx) return cmd_approx_exp(cfg, p);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return 3;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}

}  // namespace bichain
