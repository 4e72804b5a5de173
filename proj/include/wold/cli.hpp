#pragma once

// Front end shared by the woldcli tool and its tests: loads or builds a
// representation, runs the checks for the requested command and assembles
// one JSON document plus a short text summary.

#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "wold/decomposition.hpp"
#include "wold/generators.hpp"
#include "wold/io.hpp"

namespace wold::cli {

using io::json;
using linalg::Complex;

enum class Command { Check, Decompose, Multi, Demo };

inline std::optional<Command> parse_command(const std::string& s) {
  if (s == "check") return Command::Check;
  if (s == "decompose") return Command::Decompose;
  if (s == "multi") return Command::Multi;
  if (s == "demo") return Command::Demo;
  return std::nullopt;
}

inline std::string to_string(Command c) {
  switch (c) {
    case Command::Check: return "check";
    case Command::Decompose: return "decompose";
    case Command::Multi: return "multi";
    case Command::Demo: return "demo";
  }
  return "?";
}

struct RunConfig {
  Command command = Command::Check;
  std::optional<std::string> input_path;
  std::optional<std::string> demo_name;
  std::size_t level_cap = 6;
  ToleranceConfig tolerances;
  std::optional<std::string> output_path;
  bool json_only = false;
};

struct RunResult {
  int exit_code = 0;
  json document;
  std::string summary;
};

inline const std::vector<std::string>& demo_names() {
  static const std::vector<std::string> names{"scaled-isometry", "weighted-cyclic", "truncated-fock",
                                              "twisted-fock-pair", "block-mixed", "four-block"};
  return names;
}

/// Named constructions with fixed parameters:
///   scaled-isometry   0.5 x (a seeded unitary on C^4), d = 1
///   weighted-cyclic   one direction on C^6, every weight 0.8
///   truncated-fock    d = 2, levels 0..3, W = 1
///   twisted-fock-pair omega = exp(2 pi i / 5), N = 3, W = 1
///   block-mixed       nilpotent shift on C^3 (window e0, e1) + seeded unitary on C^2
///   four-block        Fock/cyclic blocks with N = 2, c = 2, omega = 1, W = 1
inline io::LoadedRep build_demo(const std::string& name, const ToleranceConfig& tol) {
  io::LoadedRep out;
  if (name == "scaled-isometry") {
    out.single = gen::gen_scaled_isometry(gen::unitary_rep(4), 0.5, tol);
  } else if (name == "weighted-cyclic") {
    out.single = gen::gen_weighted_cyclic_shift(1, 6, ComplexMatrix::Constant(1, 6, 0.8));
  } else if (name == "truncated-fock") {
    out.single = gen::gen_truncated_fock(2, 3, 1, tol.max_dim);
  } else if (name == "block-mixed") {
    out.single = gen::gen_block_direct_sum({gen::gen_truncated_fock(1, 2, 1, tol.max_dim), gen::unitary_rep(2)});
  } else if (name == "twisted-fock-pair") {
    out.product = true;
    out.psr = gen::gen_twisted_fock_pair(std::polar(1.0, 2.0 * std::numbers::pi / 5.0), 3, 1, tol);
  } else if (name == "four-block") {
    out.product = true;
    out.psr = gen::gen_four_block_pair(2, 2, Complex(1.0, 0.0), 1, tol);
  } else {
    std::string known;
    for (const auto& n : demo_names()) known += (known.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::BadParams, "unknown demo '" + name + "' (known: " + known + ")");
  }
  return out;
}

namespace detail {

/// Reports in emission order, plus the names whose failure fails the run.
struct Section {
  std::vector<CheckReport> reports;
  std::vector<std::string> required;

  void add(CheckReport r, bool is_required) {
    if (is_required) required.push_back(r.name);
    reports.push_back(std::move(r));
  }

  const CheckReport* find(const std::string& name) const {
    for (const auto& r : reports) {
      if (r.name == name) return &r;
    }
    return nullptr;
  }

  json to_json() const {
    json arr = json::array();
    for (const auto& r : reports) {
      json j = io::report_to_json(r);
      j["required"] = std::find(required.begin(), required.end(), r.name) != required.end();
      arr.push_back(std::move(j));
    }
    return arr;
  }
};

inline CheckReport error_report(const std::string& name, const Error& e) {
  CheckReport r;
  r.name = name;
  r.passed = false;
  r.residual = std::numeric_limits<double>::infinity();
  r.note = e.what();
  return r;
}

/// Either both near-isometry conditions or one of the three operator
/// inequalities, on the window when the model has one.
inline CheckReport single_admissibility(const Section& hyps, bool window, const ToleranceConfig& tol) {
  auto get = [&](const std::string& base) { return hyps.find(hyp::scoped(base, window)); };
  const CheckReport* a = get("near_isometric_a");
  const CheckReport* b = get("near_isometric_b");
  CheckReport r;
  r.name = "hypotheses_admissible";
  r.tolerance = tol.eq_tol;
  r.window_restricted = window;
  r.residual = std::numeric_limits<double>::infinity();
  std::string via;
  if (a && b) {
    r.residual = std::max(a->residual, b->residual);
    if (a->passed && b->passed) via = "near_isometric";
  }
  for (int c = 1; c <= 3; ++c) {
    const CheckReport* m = get("mt1_condition_" + std::to_string(c));
    if (!m) continue;
    r.residual = std::min(r.residual, m->residual);
    if (m->passed && via.empty()) via = "mt1_condition_" + std::to_string(c);
  }
  const CheckReport* cov = hyps.find("covariance");
  const bool cov_ok = cov && cov->passed;
  r.passed = cov_ok && !via.empty();
  if (!cov_ok) {
    r.note = "covariance fails";
  } else {
    r.note = via.empty() ? "neither near-isometry nor any operator inequality holds" : "satisfied via " + via;
  }
  if (r.passed) r.residual = std::min(r.residual, tol.eq_tol);
  return r;
}

inline Section single_hypotheses(const CovariantRep& rep, const ToleranceConfig& tol) {
  Section s;
  for (auto& [name, r] : decomp::hypothesis_flags(rep, tol)) s.add(r, false);
  s.add(hyp::check_left_invertible(rep, tol, Scope::Full), false);
  if (rep.window_mask) s.add(hyp::check_left_invertible(rep, tol, Scope::Window), false);
  s.add(single_admissibility(s, rep.window_mask.has_value(), tol), true);
  return s;
}

inline Section product_hypotheses(const ProductSystemRep& psr, const ToleranceConfig& tol) {
  Section s;
  const bool win = psr.window_mask.has_value();
  s.add(hyp::check_twist_family(psr, tol), true);
  std::vector<Scope> scopes{Scope::Full};
  if (win) scopes.push_back(Scope::Window);
  for (Scope sc : scopes) {
    const bool req = (sc == Scope::Window) == win;
    const auto tw = hyp::check_twisted(psr, tol, sc);
    const auto db = hyp::check_doubly_twisted(psr, tol, sc, &tw.relations);
    s.add(tw.relations, req);
    s.add(tw.consistency, req);
    s.add(db.relation, req);
    s.add(db.consistency, req);
  }
  for (std::size_t i = 0; i < psr.k(); ++i) {
    const CovariantRep rep = psr.direction(i);
    const std::string tag = "dir" + std::to_string(i + 1) + ":";
    CheckReport cov = check_covariance(rep, tol);
    cov.name = tag + cov.name;
    s.add(cov, true);
    CheckReport li = hyp::check_left_invertible(rep, tol, win ? Scope::Window : Scope::Full);
    li.name = tag + li.name;
    s.add(li, true);
  }
  return s;
}

inline Section product_structure(const ProductSystemRep& psr, std::size_t cap, const ToleranceConfig& tol,
                                 bool required) {
  Section s;
  try {
    for (auto& r : structure::verify_structure_identities(psr, cap, tol, Scope::Window)) s.add(r, required);
  } catch (const Error& e) {
    s.add(error_report("structure_identities", e), required);
  }
  if (psr.k() <= decomp::kMaxDirections) {
    for (std::uint32_t mask = 1; mask < (1u << psr.k()); ++mask) {
      try {
        for (auto& r : structure::verify_N_beta_properties(psr, DirectionSet{mask, psr.k()}, tol)) s.add(r, required);
      } catch (const Error& e) {
        s.add(error_report("N" + DirectionSet{mask, psr.k()}.label() + "_properties", e), required);
      }
    }
  }
  return s;
}

/// Residual thresholds applied to decomposition outputs; ranks and
/// bookkeeping entries are reported but not thresholded.
inline bool is_defect(const std::string& key) { return key.rfind("rank_", 0) != 0; }

inline void add_residual_reports(Section& s, const std::map<std::string, double>& residuals,
                                 const ToleranceConfig& tol, const std::string& prefix) {
  for (const auto& [k, v] : residuals) {
    if (!is_defect(k)) continue;
    s.add(scalar_report(prefix + k, v, tol.eq_tol), true);
  }
}

inline CheckReport stabilization_report(const std::string& name, bool stabilized, std::size_t cap) {
  CheckReport r = scalar_report(name, stabilized ? 0.0 : 1.0, 0.0);
  if (!stabilized) r.note = "chains did not stabilize within level cap " + std::to_string(cap);
  return r;
}

inline json residual_map(const std::map<std::string, double>& m) {
  json out = json::object();
  for (const auto& [k, v] : m) out[k] = v;
  return out;
}

inline std::string format_line(const CheckReport& r, bool required) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "  %-4s %-42s residual %.3e  tol %.1e%s", r.passed ? "PASS" : "FAIL",
                r.name.c_str(), r.residual, r.tolerance, required ? "  [required]" : "");
  std::string line(buf);
  if (!r.note.empty()) line += "  (" + r.note + ")";
  return line + "\n";
}

inline std::string section_text(const std::string& title, const Section& s) {
  if (s.reports.empty()) return {};
  std::string out = title + ":\n";
  for (const auto& r : s.reports) {
    out += format_line(r, std::find(s.required.begin(), s.required.end(), r.name) != s.required.end());
  }
  return out;
}

inline bool all_required_pass(const std::vector<const Section*>& sections) {
  for (const Section* s : sections) {
    for (const auto& r : s->reports) {
      if (!r.passed && std::find(s->required.begin(), s->required.end(), r.name) != s->required.end()) return false;
    }
  }
  return true;
}

}  // namespace detail

/// Runs one command. Load and parse failures give exit 2 with a diagnostic
/// document; failed required reports give exit 1.
inline RunResult run(const RunConfig& config) {
  RunResult out;
  json meta = {{"tool", "woldcli"},
               {"command", to_string(config.command)},
               {"level_cap", config.level_cap},
               {"tolerances",
                {{"rank_tol", config.tolerances.rank_tol},
                 {"eq_tol", config.tolerances.eq_tol},
                 {"psd_tol", config.tolerances.psd_tol},
                 {"max_dim", config.tolerances.max_dim},
                 {"max_gram_cond", config.tolerances.max_gram_cond}}}};
  if (config.input_path) meta["input"] = *config.input_path;
  if (config.demo_name) meta["demo"] = *config.demo_name;

  auto fail_load = [&](const std::string& code, const std::string& msg) {
    out.exit_code = 2;
    out.document = {{"meta", meta}, {"error", {{"code", code}, {"message", msg}}}};
    out.summary = "error: " + msg + "\n";
    return out;
  };

  if (config.input_path.has_value() == config.demo_name.has_value()) {
    return fail_load("BadParams", "exactly one of --input and --demo is required");
  }
  if (config.level_cap < 1) return fail_load("BadParams", "--cap must be at least 1");

  io::LoadedRep rep;
  try {
    config.tolerances.validate();
    rep = config.input_path ? io::rep_from_file(*config.input_path) : build_demo(*config.demo_name, config.tolerances);
  } catch (const Error& e) {
    return fail_load(std::string(wold::to_string(e.code())), e.what());
  }
  meta["mode"] = rep.product ? "product" : "single";
  meta["K_dim"] = rep.product ? rep.psr.K_dim : rep.single.K_dim;

  const ToleranceConfig& tol = config.tolerances;
  const std::size_t cap = config.level_cap;
  Command cmd = config.command;
  if (cmd == Command::Demo) cmd = rep.product ? Command::Multi : Command::Decompose;
  if (cmd == Command::Decompose && rep.product) {
    if (rep.psr.k() != 1) return fail_load("BadParams", "decompose needs a single representation; use multi");
    rep.single = rep.psr.direction(0);
    rep.product = false;
  }
  if (cmd == Command::Multi && !rep.product) {
    rep.psr = gen::as_product_system(rep.single);
    rep.product = true;
  }

  detail::Section hyps;
  detail::Section structure_section;
  detail::Section decomp_section;
  json decomposition = nullptr;
  json residuals = json::object();

  try {
    if (!rep.product) {
      hyps = detail::single_hypotheses(rep.single, tol);
      if (cmd == Command::Decompose) {
        const decomp::SingleDecomposition dec = decomp::wold_single(rep.single, cap, tol);
        decomposition = io::single_decomposition_to_json(dec);
        residuals = detail::residual_map(dec.residuals);
        detail::add_residual_reports(decomp_section, dec.residuals, tol, "");
        decomp_section.add(detail::stabilization_report("stabilized", dec.stabilized, cap), true);
      }
    } else {
      const ProductSystemRep& psr = rep.psr;
      hyps = detail::product_hypotheses(psr, tol);
      const CheckReport* dbl = hyps.find(hyp::scoped("doubly_twisted", psr.window_mask.has_value()));
      structure_section = detail::product_structure(psr, cap, tol, dbl && dbl->passed);
      if (cmd == Command::Multi) {
        if (psr.k() > decomp::kMaxDirections) throw Error(ErrorCode::BadParams, "too many directions for multi");
        const std::vector<std::size_t> caps(psr.k(), cap);
        const decomp::MultiDecomposition dec = decomp::wold_multi(psr, caps, tol);
        decomposition = io::multi_decomposition_to_json(dec);
        residuals = detail::residual_map(dec.residuals);
        detail::add_residual_reports(decomp_section, dec.residuals, tol, "");
        decomp_section.add(detail::stabilization_report("stabilized", dec.stabilized, cap), true);
        ResidualTracker oracle;
        json angles = json::object();
        for (const auto& s : dec.summands) {
          const Frame o = decomp::brute_force_oracle(psr, s.beta, caps, tol);
          const double angle = linalg::max_principal_angle(o, s.K);
          angles[s.beta.label()] = angle;
          oracle.add(s.beta.label(), angle, ComplexVector::Zero(static_cast<Index>(psr.K_dim)));
        }
        CheckReport orc = oracle.finish("oracle_agreement", tol.eq_tol, false);
        orc.witness.reset();
        decomp_section.add(orc, true);
        decomposition["oracle_max_angle"] = angles;
        residuals["oracle_max_angle"] = orc.residual;
      }
    }
  } catch (const Error& e) {
    out.exit_code = 1;
    detail::Section err;
    err.add(detail::error_report("pipeline", e), true);
    decomp_section = err;
  }

  const bool ok = detail::all_required_pass({&hyps, &structure_section, &decomp_section});
  if (out.exit_code == 0) out.exit_code = ok ? 0 : 1;

  json decomposition_section = {{"reports", decomp_section.to_json()}, {"result", decomposition}};
  out.document = {{"meta", meta},
                  {"hypotheses", hyps.to_json()},
                  {"structure_identities", structure_section.to_json()},
                  {"decomposition", decomposition_section},
                  {"residuals", residuals},
                  {"passed", out.exit_code == 0}};

  std::string text = "woldcli " + to_string(config.command) + " (" + (rep.product ? "product" : "single") +
                     ", K_dim " + std::to_string(rep.product ? rep.psr.K_dim : rep.single.K_dim) + ")\n";
  text += detail::section_text("hypotheses", hyps);
  text += detail::section_text("structure identities", structure_section);
  text += detail::section_text("decomposition", decomp_section);
  if (!decomposition.is_null()) {
    if (decomposition["kind"] == "single") {
      text += "  rank K1 = " + decomposition["K1"]["rank"].dump() + ", rank K2 = " + decomposition["K2"]["rank"].dump() +
              ", grade ranks " + decomposition["grade_ranks"].dump() + "\n";
    } else {
      for (const auto& s : decomposition["summands"]) {
        text += "  summand " + s["beta"].get<std::string>() + ": rank " + s["rank"].dump() + "\n";
      }
    }
  }
  text += out.exit_code == 0 ? "result: PASS\n" : "result: FAIL\n";
  out.summary = text;
  return out;
}

}  // namespace wold::cli
