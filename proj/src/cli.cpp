#include "sirb/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "sirb/format.hpp"

namespace sirb::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::array<const char*, kSpecies> kSpeciesNames{"S", "I", "R", "B"};

std::string join_path(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("field '" + path + "': " + what);
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(path, "must be finite");
  return x;
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<int>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

std::vector<double> as_numbers(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    out.push_back(as_number(v[k], path + "[" + std::to_string(k) + "]"));
  }
  return out;
}

State4 as_state(const json& v, const std::string& path) {
  const auto xs = as_numbers(v, path);
  if (xs.size() != kSpecies) fail(path, "expected 4 numbers (S, I, R, B)");
  return {xs[0], xs[1], xs[2], xs[3]};
}

/// Object reader that records consumed keys so leftovers can be reported.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  const json* optional(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    used_.insert(key);
    return &j_.at(key);
  }
  const json& required(const std::string& key) {
    const json* v = optional(key);
    if (v == nullptr) fail(where(key), "missing required field");
    return *v;
  }
  std::string where(const std::string& key) const { return join_path(path_, key); }

  /// Rejects keys that were never read.
  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key())) fail(where(item.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

json state_json(const State4& z) { return json::array({z[0], z[1], z[2], z[3]}); }

json coefficient_json(const CoefficientField& a) {
  return std::visit(
      [](const auto& k) -> json {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, CoefficientField::Constant>) {
          return k.value;
        } else if constexpr (std::is_same_v<T, CoefficientField::Samples>) {
          return json{{"samples", k.values}};
        } else {
          return json{{"profile", to_string(k.profile)}, {"params", k.params}};
        }
      },
      a.kind());
}

CoefficientField parse_coefficient(const json& v, const std::string& path, const Grid& g) {
  try {
    if (v.is_number()) return CoefficientField::constant(as_number(v, path));
    Reader r(v, path);
    CoefficientField out;
    if (const json* s = r.optional("samples")) {
      auto values = as_numbers(*s, r.where("samples"));
      if (values.size() != g.size()) {
        fail(r.where("samples"), "expected " + std::to_string(g.size()) + " values (one per cell)");
      }
      out = CoefficientField::samples(std::move(values));
    } else {
      const Profile prof = parse_profile(as_string(r.required("profile"), r.where("profile")));
      out = CoefficientField::analytic(prof, as_numbers(r.required("params"), r.where("params")));
    }
    r.finish();
    return out;
  } catch (const DomainError& e) {
    fail(path, e.what());
  }
}

Grid parse_grid(const json& v, const std::string& path) {
  Reader r(v, path);
  const auto lengths = as_numbers(r.required("lengths"), r.where("lengths"));
  const json& cj = r.required("cells");
  if (!cj.is_array()) fail(r.where("cells"), "expected an array of integers");
  std::vector<int> cells;
  for (std::size_t k = 0; k < cj.size(); ++k) {
    cells.push_back(as_int(cj[k], r.where("cells") + "[" + std::to_string(k) + "]"));
  }
  r.finish();
  if (lengths.size() != cells.size() || lengths.empty() || lengths.size() > 2) {
    fail(path, "lengths and cells must both have 1 or 2 entries");
  }
  try {
    return lengths.size() == 1 ? Grid::line(lengths[0], cells[0])
                               : Grid::rectangle(lengths[0], lengths[1], cells[0], cells[1]);
  } catch (const DomainError& e) {
    fail(path, e.what());
  }
}

json grid_json(const Grid& g) {
  json lengths = json::array(), cells = json::array();
  for (int a = 0; a < g.dim(); ++a) {
    lengths.push_back(g.length(a));
    cells.push_back(g.cells(a));
  }
  return json{{"lengths", lengths}, {"cells", cells}};
}

InitialSpec parse_initial(const json& v, const std::string& path) {
  Reader r(v, path);
  const std::string type = as_string(r.required("type"), r.where("type"));
  InitialSpec out;
  if (type == "constant") {
    out = initial::Constant{as_state(r.required("value"), r.where("value"))};
  } else if (type == "gaussian") {
    initial::Gaussian g;
    g.background = as_state(r.required("background"), r.where("background"));
    g.amplitude = as_state(r.required("amplitude"), r.where("amplitude"));
    const auto c = as_numbers(r.required("center"), r.where("center"));
    if (c.empty() || c.size() > 2) fail(r.where("center"), "expected 1 or 2 coordinates");
    g.center = {c[0], c.size() > 1 ? c[1] : 0.0};
    g.width = as_number(r.required("width"), r.where("width"));
    if (!(g.width > 0.0)) fail(r.where("width"), "must be > 0");
    out = g;
  } else if (type == "steady_perturbation") {
    PerturbationSpec sp;
    const json& base = r.required("base");
    if (base.is_string()) {
      sp.base = base.get<std::string>();
    } else {
      sp.base = as_state(base, r.where("base"));
    }
    sp.epsilon = as_number(r.required("epsilon"), r.where("epsilon"));
    if (!(sp.epsilon >= 0.0)) fail(r.where("epsilon"), "must be >= 0");
    sp.mode = as_int(r.required("mode"), r.where("mode"));
    if (sp.mode < 0) fail(r.where("mode"), "must be >= 0");
    if (const json* d = r.optional("direction")) sp.direction = as_state(*d, r.where("direction"));
    out = sp;
  } else if (type == "random") {
    initial::Random rnd;
    rnd.mean = as_state(r.required("mean"), r.where("mean"));
    rnd.spread = as_state(r.required("spread"), r.where("spread"));
    if (const json* s = r.optional("seed")) {
      if (!s->is_number_unsigned()) fail(r.where("seed"), "expected a nonnegative integer");
      rnd.seed = s->get<std::uint64_t>();
    }
    out = rnd;
  } else {
    fail(r.where("type"), "unknown initial profile '" + type +
                              "' (constant, gaussian, steady_perturbation, random)");
  }
  r.finish();
  return out;
}

json initial_json(const InitialSpec& ic) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, initial::Constant>) {
          return json{{"type", "constant"}, {"value", state_json(v.value)}};
        } else if constexpr (std::is_same_v<T, initial::Gaussian>) {
          return json{{"type", "gaussian"},
                      {"background", state_json(v.background)},
                      {"amplitude", state_json(v.amplitude)},
                      {"center", json::array({v.center[0], v.center[1]})},
                      {"width", v.width}};
        } else if constexpr (std::is_same_v<T, PerturbationSpec>) {
          json base = std::holds_alternative<std::string>(v.base)
                          ? json(std::get<std::string>(v.base))
                          : state_json(std::get<State4>(v.base));
          return json{{"type", "steady_perturbation"},
                      {"base", base},
                      {"epsilon", v.epsilon},
                      {"mode", v.mode},
                      {"direction", state_json(v.direction)}};
        } else {
          return json{{"type", "random"},
                      {"mean", state_json(v.mean)},
                      {"spread", state_json(v.spread)},
                      {"seed", v.seed}};
        }
      },
      ic);
}

std::string iso_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Writes through a temporary file so readers never see a partial file.
void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << content;
    if (!os) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

const SteadyState* find_state(const std::vector<SteadyState>& states, const std::string& name) {
  for (const auto& z : states) {
    if (to_string(z.tag) == name || z.label() == name) return &z;
  }
  return nullptr;
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

json to_json(const ModelParams& p) {
  json j = json::object();
  for (const auto& name : ModelParams::field_names()) j[name] = p.get(name);
  return j;
}

ModelParams params_from_json(const json& j, const std::string& path) {
  Reader r(j, path);
  ModelParams p;
  for (const auto& name : ModelParams::field_names()) {
    p.set(name, as_number(r.required(name), r.where(name)));
  }
  r.finish();
  try {
    p.validate();
  } catch (const DomainError& e) {
    // The message already names the parameter.
    throw ConfigError(path + ": " + e.what());
  }
  return p;
}

json to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["params"] = to_json(s.params);
  j["grid"] = grid_json(s.grid);
  json diff = json::array();
  for (const auto& a : s.diffusion) diff.push_back(coefficient_json(a));
  j["diffusion"] = diff;
  if (s.b0_field) j["b0_field"] = coefficient_json(*s.b0_field);
  if (s.g0_field) j["g0_field"] = coefficient_json(*s.g0_field);
  j["initial"] = initial_json(s.initial);
  j["run"] = json{{"t_end", s.run.t_end},
                  {"dt", s.run.dt},
                  {"adaptive", s.run.adaptive},
                  {"record_every", s.run.record_every},
                  {"record_modes", s.run.record_modes},
                  {"snapshot_times", s.run.snapshot_times}};
  j["analysis"] = json{{"modes", s.analysis.modes}, {"steady", s.analysis.steady}};
  return j;
}

Scenario parse_scenario(const json& j) {
  Reader r(j, "");
  Scenario s;
  if (const json* v = r.optional("name")) s.name = as_string(*v, "name");
  s.params = params_from_json(r.required("params"), "params");
  if (const json* v = r.optional("grid")) s.grid = parse_grid(*v, "grid");
  if (const json* v = r.optional("diffusion")) {
    if (!v->is_array() || v->size() != kSpecies) {
      fail("diffusion", "expected 4 coefficients (a1, a2, a3, a4)");
    }
    for (int k = 0; k < kSpecies; ++k) {
      s.diffusion[k] = parse_coefficient((*v)[k], "diffusion[" + std::to_string(k) + "]", s.grid);
    }
  }
  if (const json* v = r.optional("b0_field")) s.b0_field = parse_coefficient(*v, "b0_field", s.grid);
  if (const json* v = r.optional("g0_field")) s.g0_field = parse_coefficient(*v, "g0_field", s.grid);
  if (const json* v = r.optional("initial")) s.initial = parse_initial(*v, "initial");
  if (const json* v = r.optional("run")) {
    Reader rr(*v, "run");
    if (const json* x = rr.optional("t_end")) s.run.t_end = as_number(*x, "run.t_end");
    if (const json* x = rr.optional("dt")) s.run.dt = as_number(*x, "run.dt");
    if (const json* x = rr.optional("adaptive")) s.run.adaptive = as_bool(*x, "run.adaptive");
    if (const json* x = rr.optional("record_every")) {
      s.run.record_every = as_int(*x, "run.record_every");
    }
    if (const json* x = rr.optional("record_modes")) {
      if (!x->is_array()) fail("run.record_modes", "expected an array of mode indices");
      for (std::size_t k = 0; k < x->size(); ++k) {
        const std::string at = "run.record_modes[" + std::to_string(k) + "]";
        const int m = as_int((*x)[k], at);
        if (m < 0) fail(at, "must be >= 0");
        s.run.record_modes.push_back(m);
      }
    }
    if (const json* x = rr.optional("snapshot_times")) {
      s.run.snapshot_times = as_numbers(*x, "run.snapshot_times");
    }
    rr.finish();
    if (!(s.run.t_end > 0.0)) fail("run.t_end", "must be > 0");
    if (!(s.run.dt > 0.0)) fail("run.dt", "must be > 0");
    if (s.run.record_every < 1) fail("run.record_every", "must be >= 1");
    for (double t : s.run.snapshot_times) {
      if (!(t >= 0.0 && t <= s.run.t_end)) fail("run.snapshot_times", "times must lie in [0, t_end]");
    }
  }
  if (const json* v = r.optional("analysis")) {
    Reader ra(*v, "analysis");
    if (const json* x = ra.optional("modes")) {
      s.analysis.modes = as_int(*x, "analysis.modes");
      if (s.analysis.modes < 1) fail("analysis.modes", "must be >= 1");
    }
    if (const json* x = ra.optional("steady")) {
      if (!x->is_array()) fail("analysis.steady", "expected an array of steady-state tags");
      for (std::size_t k = 0; k < x->size(); ++k) {
        const std::string at = "analysis.steady[" + std::to_string(k) + "]";
        const std::string tag = as_string((*x)[k], at);
        try {
          parse_steady_tag(tag);
        } catch (const DomainError& e) {
          fail(at, e.what());
        }
        s.analysis.steady.push_back(tag);
      }
    }
    ra.finish();
  }
  r.finish();
  return s;
}

json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const long line = 1 + std::count(text.begin(), text.begin() + upto, '\n');
    throw ConfigError(source + ":" + std::to_string(line) + ": invalid JSON (" + e.what() + ")");
  }
}

Scenario load_scenario(const fs::path& path) {
  return parse_scenario(parse_json_text(read_file(path), path.string()));
}

SimConfig build_sim_config(const Scenario& s, std::optional<std::uint64_t> seed) {
  SimConfig cfg;
  cfg.grid = s.grid;
  cfg.params = s.params;
  cfg.diffusion = s.diffusion;
  cfg.b0_field = s.b0_field;
  cfg.g0_field = s.g0_field;
  cfg.t_end = s.run.t_end;
  cfg.dt = s.run.dt;
  cfg.adaptive = s.run.adaptive;
  cfg.record_every = s.run.record_every;
  cfg.snapshot_times = s.run.snapshot_times;

  int highest = 0;
  for (int m : s.run.record_modes) highest = std::max(highest, m);
  if (const auto* sp = std::get_if<PerturbationSpec>(&s.initial)) {
    highest = std::max(highest, sp->mode);
  }
  const ModeSpectrum spectrum = neumann_modes(s.grid, highest + 1);
  for (int m : s.run.record_modes) {
    const Mode& mode = spectrum[static_cast<std::size_t>(m)];
    try {
      mode_profile(s.grid, mode);
    } catch (const DomainError& e) {
      fail("run.record_modes", e.what());
    }
    cfg.record_modes.push_back(mode);
  }

  std::visit(
      [&](const auto& ic) {
        using T = std::decay_t<decltype(ic)>;
        if constexpr (std::is_same_v<T, PerturbationSpec>) {
          initial::SteadyPerturbation out;
          if (const auto* name = std::get_if<std::string>(&ic.base)) {
            const auto states = steady_states(s.params);
            const SteadyState* z = find_state(states, *name);
            if (z == nullptr) {
              fail("initial.base", "steady state '" + *name + "' does not exist for these parameters");
            }
            out.base = z->value;
          } else {
            out.base = std::get<State4>(ic.base);
          }
          out.epsilon = ic.epsilon;
          out.mode = spectrum[static_cast<std::size_t>(ic.mode)];
          out.direction = ic.direction;
          cfg.initial = out;
        } else if constexpr (std::is_same_v<T, initial::Random>) {
          initial::Random out = ic;
          if (seed) out.seed = *seed;
          cfg.initial = out;
        } else {
          cfg.initial = ic;
        }
      },
      s.initial);
  try {
    cfg.validate();
    make_initial(cfg);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("initial: ") + e.what());
  }
  return cfg;
}

DiffusionMatrix constant_diffusion(const Scenario& s) {
  if (s.b0_field || s.g0_field) {
    throw ConfigError("stability analysis needs constant b0 and g0 (b0_field/g0_field are set)");
  }
  DiffusionMatrix a;
  for (int k = 0; k < kSpecies; ++k) {
    const auto* c = std::get_if<CoefficientField::Constant>(&s.diffusion[k].kind());
    if (c == nullptr) {
      fail("diffusion[" + std::to_string(k) + "]",
           "stability analysis needs constant diffusion coefficients");
    }
    a.a[k] = c->value;
  }
  return a;
}

std::vector<SteadyState> steady_states(const ModelParams& p) {
  auto out = trivial_states(p);
  const auto endemic = solve_endemic(p);
  out.insert(out.end(), endemic.states.begin(), endemic.states.end());
  return out;
}

json to_json(const SteadyState& z) {
  return json{{"tag", z.label()}, {"value", state_json(z.value)}, {"residual", z.residual}};
}

json steady_report(const ModelParams& p) {
  json trivial = json::array();
  for (const auto& z : trivial_states(p)) trivial.push_back(to_json(z));
  const auto endemic = solve_endemic(p);
  json states = json::array();
  for (const auto& z : endemic.states) states.push_back(to_json(z));
  const auto& d = endemic.diagnostics;
  return json{{"params", to_json(p)},
              {"trivial", trivial},
              {"endemic",
               {{"status", to_string(endemic.status)},
                {"threshold_holds", d.condition_lhs > d.condition_rhs && p.b0 > p.d1},
                {"diagnostics",
                 {{"i_star", d.i_star},
                  {"condition_lhs", d.condition_lhs},
                  {"condition_rhs", d.condition_rhs},
                  {"branch_intersections", d.branch_intersections}}},
                {"states", states}}}};
}

json to_json(const StabilityReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json modes = json::array();
  for (const auto& m : r.modes) {
    json ev = json::array();
    for (const auto& e : m.eigenvalues) ev.push_back(json::array({e.real(), e.imag()}));
    json row{{"index", m.index},
             {"lambda", m.lambda},
             {"eigenvalues", ev},
             {"max_real", m.max_real},
             {"verdict", to_string(m.verdict)},
             {"closed_form", m.closed_form ? json(to_string(*m.closed_form)) : json(nullptr)}};
    if (m.cubic) row["cubic"] = json{{"p", m.cubic->p}, {"q", m.cubic->q}, {"h", m.cubic->h}};
    modes.push_back(row);
  }
  json conditions = json::array();
  for (const auto& c : r.margins.conditions.conditions) {
    conditions.push_back(
        json{{"description", c.description}, {"margin", c.margin}, {"satisfied", c.satisfied()}});
  }
  return json{
      {"state", to_json(r.state)},
      {"overall", to_string(r.overall)},
      {"turing", r.turing},
      {"tail_threshold", r.tail_threshold},
      {"tail_certified", r.tail_certified},
      {"reduction_agrees", r.reduction_agrees ? json(*r.reduction_agrees) : json(nullptr)},
      {"aux",
       {{"m0", opt(r.aux.m0)},
        {"M1", opt(r.aux.M1)},
        {"M2", opt(r.aux.M2)},
        {"L0", opt(r.aux.L0)},
        {"p0", opt(r.aux.p0)},
        {"q0", opt(r.aux.q0)},
        {"h0", opt(r.aux.h0)},
        {"B0", r.aux.B0},
        {"G0", r.aux.G0}}},
      {"margins",
       {{"B0", r.margins.b0_bound},
        {"G0", r.margins.g0_bound},
        {"d1_minus_B0", r.margins.margin_b},
        {"d4_minus_G0", r.margins.margin_g},
        {"conditions", conditions},
        {"all_satisfied", r.margins.conditions.all_satisfied()}}},
      {"modes", modes}};
}

json stability_report(const Scenario& s, int modes) {
  const DiffusionMatrix a = constant_diffusion(s);
  const ModeSpectrum spectrum = neumann_modes(s.grid, modes);
  json reports = json::array();
  for (const auto& z : steady_states(s.params)) {
    if (!s.analysis.steady.empty()) {
      const bool wanted =
          std::any_of(s.analysis.steady.begin(), s.analysis.steady.end(),
                      [&](const std::string& t) { return t == to_string(z.tag) || t == z.label(); });
      if (!wanted) continue;
    }
    reports.push_back(to_json(classify_state(z, s.params, a, spectrum)));
  }
  return json{{"name", s.name},
              {"params", to_json(s.params)},
              {"diffusion", json::array({a.a[0], a.a[1], a.a[2], a.a[3]})},
              {"modes", modes},
              {"reports", reports}};
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const std::vector<Mode>& modes) {
  os << "t,dt";
  for (const char* stat : {"sup", "min", "l1"}) {
    for (const char* sp : kSpeciesNames) os << ',' << sp << '_' << stat;
  }
  os << ",mass";
  for (const auto& m : modes) {
    for (const char* sp : kSpeciesNames) os << ",mode" << m.index << '_' << sp;
  }
  os << '\n';
  for (const auto& s : traj.samples) {
    os << format_double(s.t) << ',' << format_double(s.dt);
    for (const auto* arr : {&s.sup, &s.min, &s.l1}) {
      for (double v : *arr) os << ',' << format_double(v);
    }
    os << ',' << format_double(s.mass);
    for (const auto& amp : s.amplitudes) {
      for (double v : amp) os << ',' << format_double(v);
    }
    os << '\n';
  }
}

json run_metadata(const Scenario& s, const Trajectory& traj, std::optional<std::uint64_t> seed,
                  const std::string& status, const std::string& error) {
  json violations = json::array();
  for (const auto& v : traj.violations) {
    violations.push_back(json{{"t", v.t}, {"kind", v.kind}, {"detail", v.detail}});
  }
  return json{{"scenario", to_json(s)},
              {"seed", seed ? json(*seed) : json(nullptr)},
              {"status", status},
              {"error", error.empty() ? json(nullptr) : json(error)},
              {"steps", traj.steps},
              {"samples", traj.samples.size()},
              {"cor21_regime", traj.cor21_regime},
              {"violations", violations},
              {"timestamp", iso_timestamp()}};
}

const std::vector<std::string>& sweep_output_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out{"z2_exists",       "z3_exists",      "endemic_exists",
                                 "endemic_status",  "endemic_count",  "branch_intersections",
                                 "turing_any"};
    for (const char* tag : {"Z1", "Z2", "Z3", "Z4-branch-S1", "Z4-branch-S2"}) {
      for (const char* field : {"overall", "max_real0", "turing", "tail_certified"}) {
        out.push_back(std::string(tag) + "." + field);
      }
    }
    return out;
  }();
  return names;
}

std::vector<std::string> default_sweep_outputs() {
  return {"endemic_exists", "endemic_count", "Z1.overall",           "Z2.overall",
          "Z3.overall",     "Z4-branch-S1.overall", "Z4-branch-S2.overall", "turing_any"};
}

SweepSpec parse_sweep(const json& j) {
  Reader r(j, "");
  SweepSpec spec;
  spec.base = parse_scenario(r.required("base"));
  if (const json* axes = r.optional("axes")) {
    if (!axes->is_array()) fail("axes", "expected an array");
    std::size_t total = 1;
    for (std::size_t k = 0; k < axes->size(); ++k) {
      const std::string at = "axes[" + std::to_string(k) + "]";
      Reader ra((*axes)[k], at);
      SweepAxis axis;
      axis.param = as_string(ra.required("param"), ra.where("param"));
      const bool diffusion_axis = axis.param.size() == 2 && axis.param[0] == 'a' &&
                                  axis.param[1] >= '1' && axis.param[1] <= '4';
      if (!diffusion_axis) {
        const auto& names = ModelParams::field_names();
        if (std::find(names.begin(), names.end(), axis.param) == names.end()) {
          fail(ra.where("param"), "unknown parameter '" + axis.param + "'");
        }
      }
      axis.values = as_numbers(ra.required("values"), ra.where("values"));
      if (axis.values.empty()) fail(ra.where("values"), "must not be empty");
      ra.finish();
      total *= axis.values.size();
      if (total > kMaxSweepPoints) {
        fail("axes", "more than " + std::to_string(kMaxSweepPoints) + " combinations");
      }
      spec.axes.push_back(std::move(axis));
    }
  }
  if (const json* outs = r.optional("outputs")) {
    if (!outs->is_array()) fail("outputs", "expected an array of field names");
    const auto& names = sweep_output_names();
    for (std::size_t k = 0; k < outs->size(); ++k) {
      const std::string at = "outputs[" + std::to_string(k) + "]";
      const std::string name = as_string((*outs)[k], at);
      if (std::find(names.begin(), names.end(), name) == names.end()) {
        fail(at, "unknown output '" + name + "'");
      }
      spec.outputs.push_back(name);
    }
  } else {
    spec.outputs = default_sweep_outputs();
  }
  r.finish();
  return spec;
}

SweepSpec load_sweep(const fs::path& path) {
  return parse_sweep(parse_json_text(read_file(path), path.string()));
}

namespace {

/// All output cells of one sweep point, keyed by output name.
std::map<std::string, std::string> evaluate_point(Scenario s, int modes, std::string& error) {
  std::map<std::string, std::string> cells;
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  try {
    s.params.validate();
    const ModelParams& p = s.params;
    cells["z2_exists"] = flag(p.b0 > p.d1);
    cells["z3_exists"] = flag(p.g0 > p.d4);
    const auto endemic = solve_endemic(p);
    const auto& d = endemic.diagnostics;
    cells["endemic_exists"] = flag(p.b0 > p.d1 && d.condition_lhs > d.condition_rhs);
    cells["endemic_status"] = to_string(endemic.status);
    cells["endemic_count"] = std::to_string(endemic.states.size());
    cells["branch_intersections"] = std::to_string(d.branch_intersections);

    const DiffusionMatrix a = constant_diffusion(s);
    const ModeSpectrum spectrum = neumann_modes(s.grid, modes);
    auto states = trivial_states(p);
    states.insert(states.end(), endemic.states.begin(), endemic.states.end());
    bool turing_any = false;
    std::set<std::string> seen;
    for (const auto& z : states) {
      const auto rep = classify_state(z, p, a, spectrum);
      turing_any |= rep.turing;
      const std::string tag = to_string(z.tag);
      if (!seen.insert(tag).second) continue;
      cells[tag + ".overall"] = to_string(rep.overall);
      cells[tag + ".max_real0"] = format_double(rep.modes.front().max_real);
      cells[tag + ".turing"] = flag(rep.turing);
      cells[tag + ".tail_certified"] = flag(rep.tail_certified);
    }
    cells["turing_any"] = flag(turing_any);
  } catch (const std::exception& e) {
    error = e.what();
  }
  return cells;
}

}  // namespace

SweepTable run_sweep(const SweepSpec& spec, int jobs, int modes) {
  SweepTable table;
  for (const auto& axis : spec.axes) table.header.push_back(axis.param);
  for (const auto& o : spec.outputs) table.header.push_back(o);
  table.header.push_back("error");

  std::size_t total = 1;
  for (const auto& axis : spec.axes) total *= axis.values.size();
  table.rows.resize(total);

  auto work = [&](std::size_t row) {
    // Decode the row index with the last axis varying fastest.
    std::vector<std::size_t> idx(spec.axes.size());
    std::size_t rest = row;
    for (std::size_t k = spec.axes.size(); k-- > 0;) {
      idx[k] = rest % spec.axes[k].values.size();
      rest /= spec.axes[k].values.size();
    }
    Scenario s = spec.base;
    std::vector<std::string> out;
    std::string error;
    for (std::size_t k = 0; k < spec.axes.size(); ++k) {
      const auto& axis = spec.axes[k];
      const double v = axis.values[idx[k]];
      out.push_back(format_double(v));
      try {
        if (axis.param[0] == 'a' && axis.param.size() == 2) {
          s.diffusion[axis.param[1] - '1'] = CoefficientField::constant(v);
        } else {
          s.params.set(axis.param, v);
        }
      } catch (const std::exception& e) {
        if (error.empty()) error = e.what();
      }
    }
    std::map<std::string, std::string> cells;
    if (error.empty()) cells = evaluate_point(s, modes, error);
    for (const auto& o : spec.outputs) {
      const auto it = cells.find(o);
      out.push_back(it == cells.end() ? std::string() : it->second);
    }
    out.push_back(error);
    table.rows[row] = std::move(out);
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(jobs, total));
  if (workers == 1) {
    for (std::size_t row = 0; row < total; ++row) work(row);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t row = next++; row < total; row = next++) work(row);
      });
    }
  }
  return table;
}

void write_csv(std::ostream& os, const SweepTable& table) {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k > 0) os << ',';
      os << csv_cell(cells[k]);
    }
    os << '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) line(row);
}

int cmd_simulate(const fs::path& config, const fs::path& out_dir, const Options& opt,
                 std::ostream& err) {
  Scenario s;
  SimConfig cfg;
  try {
    s = load_scenario(config);
    cfg = build_sim_config(s, opt.seed);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  fs::create_directories(out_dir);

  Trajectory traj;
  std::string status = "ok", error;
  int code = kExitOk;
  try {
    traj = simulate(cfg);
    if (!traj.violations.empty()) {
      const auto& v = traj.violations.front();
      status = "violation";
      error = v.kind + " at t = " + format_double(v.t) + ": " + v.detail;
      code = kExitNumerical;
    }
  } catch (const SimulationError& e) {
    traj = e.trajectory;
    status = "failed";
    error = std::string(e.what()) + " (t = " + format_double(e.time) + ")";
    code = kExitNumerical;
  } catch (const std::exception& e) {
    status = "failed";
    error = e.what();
    code = kExitNumerical;
  }

  std::ostringstream csv;
  write_trajectory_csv(csv, traj, cfg.record_modes);
  write_atomic(out_dir / "trajectory.csv", csv.str());
  if (!traj.snapshots.empty()) {
    const fs::path dir = out_dir / "snapshots";
    fs::create_directories(dir);
    for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
      for (int sp = 0; sp < kSpecies; ++sp) {
        std::ostringstream os;
        write_csv(os, traj.snapshots[k].state.u[sp], kSpeciesNames[sp]);
        char name[64];
        std::snprintf(name, sizeof name, "snapshot_%04zu_%s.csv", k, kSpeciesNames[sp]);
        write_atomic(dir / name, os.str());
      }
    }
  }
  json meta = run_metadata(s, traj, opt.seed, status, error);
  json times = json::array();
  for (const auto& snap : traj.snapshots) times.push_back(snap.t);
  meta["snapshot_times"] = times;
  write_atomic(out_dir / "meta.json", meta.dump(2) + "\n");
  if (code != kExitOk) err << "error: " << error << '\n';
  return code;
}

int cmd_steady(const fs::path& config, std::ostream& out, std::ostream& err) {
  try {
    const Scenario s = load_scenario(config);
    const json report = steady_report(s.params);
    out << report.dump(2) << '\n';
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

int cmd_stability(const fs::path& config, const Options& opt, std::ostream& out,
                  std::ostream& err) {
  try {
    const Scenario s = load_scenario(config);
    const int modes = opt.modes.value_or(s.analysis.modes);
    if (modes < 1) throw ConfigError("--modes must be >= 1");
    const json report = stability_report(s, modes);
    out << report.dump(2) << '\n';
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ConsistencyError& e) {
    err << "internal consistency failure: " << e.what() << '\n';
    return kExitConsistency;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

int cmd_sweep(const fs::path& spec_path, const fs::path& out_dir, const Options& opt,
              std::ostream& err) {
  SweepSpec spec;
  try {
    spec = load_sweep(spec_path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  const int modes = opt.modes.value_or(spec.base.analysis.modes);
  if (modes < 1) {
    err << "error: --modes must be >= 1\n";
    return kExitConfig;
  }
  const SweepTable table = run_sweep(spec, std::max(1, opt.jobs), modes);
  fs::create_directories(out_dir);
  std::ostringstream os;
  write_csv(os, table);
  write_atomic(out_dir / "sweep.csv", os.str());
  return kExitOk;
}

int main(int argc, char** argv) {
  CLI::App app{"Reaction-diffusion SIRB model: simulation, steady states and stability"};
  app.require_subcommand(1);

  Options opt;
  std::string config, out_dir;
  int modes = 0;
  std::uint64_t seed = 0;

  auto* sim = app.add_subcommand("simulate", "Integrate a scenario in time");
  sim->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out_dir, "Output directory")->required();
  auto* sim_seed = sim->add_option("--seed", seed, "Seed for randomized initial profiles");

  auto* steady = app.add_subcommand("steady", "List constant steady states as JSON");
  steady->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  steady->add_option("--out", out_dir, "Also write steady.json into this directory");

  auto* stab = app.add_subcommand("stability", "Linear stability report as JSON");
  stab->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  stab->add_option("--out", out_dir, "Also write stability.json into this directory");
  auto* stab_modes = stab->add_option("--modes", modes, "Number of Neumann modes (default 32)")
                         ->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "Tabulate stability over a parameter grid");
  sweep->add_option("--config", config, "Sweep JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out_dir, "Output directory")->required();
  sweep->add_option("--jobs", opt.jobs, "Parallel workers")->check(CLI::PositiveNumber);
  auto* sweep_modes = sweep->add_option("--modes", modes, "Number of Neumann modes (default 32)")
                          ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (sim_seed->count() > 0) opt.seed = seed;
  if (stab_modes->count() > 0 || sweep_modes->count() > 0) opt.modes = modes;

  if (*sim) return cmd_simulate(config, out_dir, opt, std::cerr);
  if (*sweep) return cmd_sweep(config, out_dir, opt, std::cerr);

  std::ostringstream buf;
  const int code = *steady ? cmd_steady(config, buf, std::cerr)
                           : cmd_stability(config, opt, buf, std::cerr);
  if (code != kExitOk) return code;
  std::cout << buf.str();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_atomic(fs::path(out_dir) / (*steady ? "steady.json" : "stability.json"), buf.str());
  }
  return kExitOk;
}

}  // namespace sirb::cli
