#include "batch.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"

#include "ctrlkit/lincontrol.hpp"
#include "ctrlkit/models.hpp"
#include "ctrlkit/optctrl.hpp"
#include "ctrlkit/specpde.hpp"
#include "ctrlkit/stabilize.hpp"

namespace ctrl::batch {

// generated from specs/*.json
extern const std::vector<std::pair<std::string, std::string>> kBuiltinSpecs;

namespace {

using json = nlohmann::json;

constexpr int kFormatVersion = 1;

// ---------- spec access ----------

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void allow(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw InputError(path.empty() ? "(root)" : path, "expected an object");
  for (auto& [k, v] : obj.items()) {
    bool ok = std::any_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; });
    if (!ok) throw InputError(join(path, k), "unknown field");
  }
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double num(const json& j, const std::string& path) {
  if (!j.is_number()) throw InputError(path, "expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) throw InputError(path, "expected a finite number");
  return v;
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) throw InputError(path, "expected an integer");
  return j.get<int>();
}

std::string str(const json& j, const std::string& path) {
  if (!j.is_string()) throw InputError(path, "expected a string");
  return j.get<std::string>();
}

Vector vec(const json& j, const std::string& path) {
  if (!j.is_array()) throw InputError(path, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = num(j[i], index(path, i));
  return v;
}

Matrix mat(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw InputError(path, "expected a non-empty array of rows");
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array()) throw InputError(index(path, i), "expected a row array");
    if (i == 0) cols = j[i].size();
    if (j[i].size() != cols) throw InputError(index(path, i), "ragged matrix row");
  }
  if (cols == 0) throw InputError(path, "matrix has no columns");
  Matrix M(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < cols; ++k)
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = num(j[i][k], index(index(path, i), k));
  return M;
}

std::vector<Complex> complex_list(const json& j, const std::string& path) {
  if (!j.is_array()) throw InputError(path, "expected an array of numbers or [re, im] pairs");
  std::vector<Complex> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    auto p = index(path, i);
    if (j[i].is_array()) {
      if (j[i].size() != 2) throw InputError(p, "complex values are [re, im]");
      out.emplace_back(num(j[i][0], p), num(j[i][1], p));
    } else {
      out.emplace_back(num(j[i], p), 0.0);
    }
  }
  return out;
}

// Reads the params object of a builtin, filling defaults for missing keys.
class Params {
 public:
  Params(const json& spec, std::initializer_list<const char*> keys) {
    if (auto p = find(spec, "params")) {
      allow(*p, "params", keys);
      obj_ = *p;
    }
  }
  double get(const char* key, double fallback) const {
    auto it = obj_.find(key);
    return it == obj_.end() ? fallback : num(*it, join("params", key));
  }

 private:
  json obj_ = json::object();
};

// ---------- output helpers ----------

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) rows.push_back(to_json(Vector(M.row(i).transpose())));
  return rows;
}

json to_json(Complex z) { return json::array({z.real(), z.imag()}); }

json to_json(const std::vector<Complex>& zs) {
  std::vector<Complex> sorted = zs;
  std::sort(sorted.begin(), sorted.end(), [](Complex a, Complex b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  json out = json::array();
  for (auto z : sorted) out.push_back(to_json(z));
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  void names(const std::string& stem, int count) {
    for (int i = 1; i <= count; ++i) header.push_back(stem + std::to_string(i));
  }
  std::string str() const {
    if (header.empty()) return {};
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
    out += "\n";
    for (auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + fmt(r[i]);
      out += "\n";
    }
    return out;
  }
};

void append(std::vector<double>& row, const Vector& v) { row.insert(row.end(), v.data(), v.data() + v.size()); }

std::vector<double> split_numbers(const std::string& text, const std::string& where) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      double v = std::stod(item, &used);
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw InputError(where, "cannot parse number '" + item + "'");
    }
  }
  if (out.empty()) throw InputError(where, "empty number list");
  return out;
}

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

// ---------- context ----------

struct Ctx {
  const std::string& command;
  const std::map<std::string, std::string>& options;
  const json& spec;
  json results = json::object();
  json diagnostics = json::object();
  Csv csv;

  bool has(const char* key) const { return options.count(key) > 0; }
  std::optional<double> opt(const char* key) const {
    auto it = options.find(key);
    if (it == options.end()) return {};
    return split_numbers(it->second, "--" + std::string(key)).at(0);
  }
  double tol(double fallback) const { return opt("tol").value_or(fallback); }

  int steps(int fallback) const {
    if (auto s = opt("steps")) {
      if (*s < 1 || *s != std::floor(*s)) throw InputError("--steps", "expected a positive integer");
      return static_cast<int>(*s);
    }
    if (auto p = find(spec, "steps")) return integer(*p, "steps");
    return fallback;
  }
  int even_steps(int fallback) const {
    int s = steps(fallback);
    if (s % 2) throw InputError("steps", "Simpson quadrature needs an even step count");
    return s;
  }

  // option override, then spec field, then fallback
  double number(const char* key, double fallback) const {
    if (auto o = opt(key)) return *o;
    if (auto p = find(spec, key)) return num(*p, key);
    return fallback;
  }
  std::optional<double> maybe_number(const char* key) const {
    if (auto o = opt(key)) return o;
    if (auto p = find(spec, key)) return num(*p, key);
    return {};
  }
  int count(const char* key, int fallback) const {
    if (auto o = opt(key)) {
      if (*o != std::floor(*o)) throw InputError(std::string("--") + key, "expected an integer");
      return static_cast<int>(*o);
    }
    if (auto p = find(spec, key)) return integer(*p, key);
    return fallback;
  }
  std::optional<Vector> vector_field(const char* key) const {
    if (auto p = find(spec, key)) return vec(*p, key);
    return {};
  }
};

// ---------- linear analysis ----------

json kalman_json(const KalmanReport& k) {
  return {{"rank", k.rank}, {"controllable", k.controllable}, {"kalman_matrix", to_json(k.kalman_matrix)}};
}

json gramian_json(const GramianReport& g) {
  return {{"T", g.T}, {"G", to_json(g.G)}, {"eigenvalues", to_json(g.eigenvalues)}, {"C_T", g.C_T},
          {"invertible", g.invertible}};
}

void lti_analysis(Ctx& c, const LtiSystem& sys) {
  const double tol = c.tol(kRankTol);
  auto k = kalman_test(sys, tol);
  auto h = hautus_test(sys, tol);
  c.results["controllable"] = k.controllable;
  c.results["kalman"] = kalman_json(k);
  json per = json::array();
  for (auto& e : h.per_eigenvalue) per.push_back({{"lambda", to_json(e.lambda)}, {"rank", e.rank}});
  c.results["hautus"] = {{"controllable", h.controllable}, {"eigenvalues", per}};
  auto d = controllable_decomposition(sys, tol);
  c.results["decomposition"] = {{"r", d.r}, {"P", to_json(d.P)}, {"A1", to_json(d.A1)}, {"A2", to_json(d.A2)},
                                {"A3", to_json(d.A3)}, {"B1", to_json(d.B1)}};
  if (sys.m() == 1 && k.controllable) {
    auto b = brunovski_form(sys, tol);
    c.results["brunovski"] = {{"char_poly", to_json(b.char_poly)}, {"companion", to_json(b.companion)},
                              {"P", to_json(b.P)}};
  }
  c.diagnostics["rank_tolerance"] = tol;
}

// States along a sampled control on an odd-node grid, as in simulate_sampled.
std::vector<Vector> sampled_states(const LtvSystem& sys, const Vector& x0, double T, const std::vector<Vector>& u) {
  const int steps = static_cast<int>(u.size()) - 1;
  const double h = T / steps;
  std::vector<Vector> xs{x0};
  Vector x = x0;
  for (int k = 0; k + 2 <= steps; k += 2) {
    double t = k * h;
    auto f = [&](double s, const Vector& y, const Vector& v) {
      Vector d = sys.A(s) * y + sys.B(s) * v;
      if (sys.r) d += sys.r(s);
      return d;
    };
    Vector k1 = f(t, x, u[k]);
    Vector k2 = f(t + h, x + h * k1, u[k + 1]);
    Vector k3 = f(t + h, x + h * k2, u[k + 1]);
    Vector k4 = f(t + 2 * h, x + 2 * h * k3, u[k + 2]);
    x += (2 * h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    xs.push_back(x);
  }
  return xs;
}

void gramian_and_hum(Ctx& c, const LtvSystem& sys, double T) {
  const int steps = c.even_steps(2000);
  auto g = gramian(sys, T, steps);
  c.results["gramian"] = gramian_json(g);
  c.diagnostics["gramian_steps"] = steps;
  // steering runs when a target is given; the start defaults to the origin
  auto x0_given = c.vector_field("x0");
  auto x1 = c.vector_field("x1");
  if (!x1) return;
  Vector x0 = x0_given.value_or(Vector::Zero(sys.n));
  if (x0.size() != sys.n) throw InputError("x0", "state dimension mismatch");
  if (x1->size() != sys.n) throw InputError("x1", "state dimension mismatch");
  if (!g.invertible) {
    c.results["hum"] = nullptr;
    c.diagnostics["hum_skipped"] = "Gramian is singular";
    return;
  }
  auto hum = hum_control_finite(sys, T, x0, *x1, steps);
  c.results["hum"] = {{"cost", hum.cost}, {"psi", to_json(hum.psi)}, {"endpoint", to_json(hum.endpoint)},
                      {"endpoint_error", hum.endpoint_error}};
  auto xs = sampled_states(sys, x0, T, hum.u);
  c.csv.header = {"t"};
  c.csv.names("x", sys.n);
  c.csv.names("u", sys.m);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    std::vector<double> row{hum.times[2 * k]};
    append(row, xs[k]);
    append(row, hum.u[2 * k]);
    c.csv.rows.push_back(std::move(row));
  }
}

// ---------- system construction ----------

LtiSystem lti_from_spec(const json& s) {
  if (auto b = find(s, "builtin")) {
    if (find(s, "A") || find(s, "B")) throw InputError("builtin", "give either a builtin or A and B, not both");
    auto name = str(*b, "builtin");
    if (name == "rlc") {
      Params p(s, {"L", "C", "R"});
      return models::rlc(p.get("L", 1), p.get("C", 1), p.get("R", 1));
    }
    if (name == "coupled-springs") {
      Params p(s, {"k1", "k2"});
      return models::coupled_springs(p.get("k1", 1), p.get("k2", 1));
    }
    if (name == "alpha-system") {
      Params p(s, {"alpha"});
      return models::alpha_system(p.get("alpha", 2));
    }
    if (name == "double-integrator") {
      Params p(s, {});
      return models::double_integrator();
    }
    if (name == "pendulum-linear") {
      Params p(s, {"m", "M", "l", "g"});
      return models::pendulum_linear({p.get("m", 1), p.get("M", 1), p.get("l", 1), p.get("g", 1)});
    }
    throw InputError("builtin", "unknown lti builtin '" + name + "'");
  }
  if (find(s, "params")) throw InputError("params", "params only apply to builtins");
  auto a = find(s, "A");
  auto b = find(s, "B");
  if (!a || !b) throw InputError(a ? "B" : "A", "missing field");
  LtiSystem sys{mat(*a, "A"), mat(*b, "B"), {}};
  if (sys.A.rows() != sys.A.cols()) throw InputError("A", "A must be square");
  if (sys.B.rows() != sys.A.rows()) throw InputError("B", "B must have as many rows as A");
  return sys;
}

struct Nonlinear {
  std::string name;
  Dynamics f;
  DynamicsJacobian jac;
  int n = 0, m = 0;
  std::optional<VectorFieldSet> fields;
};

Nonlinear nonlinear_from_spec(const json& s) {
  auto b = find(s, "builtin");
  if (!b) throw InputError("builtin", "missing field");
  Nonlinear out;
  out.name = str(*b, "builtin");
  if (out.name == "pendulum") {
    Params p(s, {"m", "M", "l", "g"});
    models::PendulumParams pp{p.get("m", 1), p.get("M", 1), p.get("l", 1), p.get("g", 1)};
    out.f = models::pendulum(pp);
    out.jac = models::pendulum_jacobian(pp);
    out.n = 4;
    out.m = 1;
  } else if (out.name == "maxwell-bloch") {
    Params p(s, {});
    out.f = models::maxwell_bloch();
    out.jac = models::maxwell_bloch_jacobian();
    out.n = 3;
    out.m = 2;
  } else if (out.name == "heisenberg") {
    Params p(s, {});
    auto fs = models::heisenberg();
    out.fields = fs;
    out.n = fs.n;
    out.m = static_cast<int>(fs.fields.size());
    out.f = [fs](const Vector& x, const Vector& u) {
      Vector d = Vector::Zero(fs.n);
      for (std::size_t i = 0; i < fs.fields.size(); ++i) d += u(static_cast<Eigen::Index>(i)) * fs.fields[i].value(x);
      return d;
    };
    out.jac = [fs](const Vector& x, const Vector& u) {
      LtiSystem lin;
      lin.A = Matrix::Zero(fs.n, fs.n);
      lin.B.resize(fs.n, static_cast<Eigen::Index>(fs.fields.size()));
      for (std::size_t i = 0; i < fs.fields.size(); ++i) {
        lin.A += u(static_cast<Eigen::Index>(i)) * fs.fields[i].jacobian(x);
        lin.B.col(static_cast<Eigen::Index>(i)) = fs.fields[i].value(x);
      }
      return lin;
    };
  } else {
    throw InputError("builtin", "unknown nonlinear builtin '" + out.name + "'");
  }
  return out;
}

std::pair<Vector, Vector> equilibrium(const json& s, const Nonlinear& nl) {
  Vector x = Vector::Zero(nl.n), u = Vector::Zero(nl.m);
  if (auto e = find(s, "equilibrium")) {
    allow(*e, "equilibrium", {"x", "u"});
    if (auto p = find(*e, "x")) x = vec(*p, "equilibrium.x");
    if (auto p = find(*e, "u")) u = vec(*p, "equilibrium.u");
  }
  if (x.size() != nl.n) throw InputError("equilibrium.x", "expected " + std::to_string(nl.n) + " components");
  if (u.size() != nl.m) throw InputError("equilibrium.u", "expected " + std::to_string(nl.m) + " components");
  return {x, u};
}

Matrix lerp_table(const std::vector<double>& ts, const std::vector<Matrix>& tab, double t) {
  if (t <= ts.front()) return tab.front();
  if (t >= ts.back()) return tab.back();
  auto it = std::upper_bound(ts.begin(), ts.end(), t);
  std::size_t k = static_cast<std::size_t>(it - ts.begin()) - 1;
  double w = (t - ts[k]) / (ts[k + 1] - ts[k]);
  return (1 - w) * tab[k] + w * tab[k + 1];
}

LtvSystem ltv_from_spec(const json& s) {
  if (auto b = find(s, "builtin")) {
    for (auto k : {"times", "A", "B"})
      if (find(s, k)) throw InputError(k, "give either a builtin or tables, not both");
    auto name = str(*b, "builtin");
    if (name == "dubins") {
      Params p(s, {"period"});
      double period = p.get("period", 1);
      if (!(period > 0)) throw InputError("params.period", "must be positive");
      return models::dubins_linearized(period);
    }
    if (name == "rotating-frame") {
      Params p(s, {});
      return models::rotating_frame();
    }
    if (name == "diag-example") {
      Params p(s, {});
      return models::diag_example();
    }
    throw InputError("builtin", "unknown ltv builtin '" + name + "'");
  }
  if (find(s, "params")) throw InputError("params", "params only apply to builtins");
  auto tj = find(s, "times");
  auto aj = find(s, "A");
  auto bj = find(s, "B");
  if (!tj || !aj || !bj) throw InputError(!tj ? "times" : !aj ? "A" : "B", "missing field");
  Vector tv = vec(*tj, "times");
  std::vector<double> ts(tv.data(), tv.data() + tv.size());
  if (ts.size() < 2) throw InputError("times", "need at least two nodes");
  for (std::size_t i = 1; i < ts.size(); ++i)
    if (!(ts[i] > ts[i - 1])) throw InputError(index("times", i), "nodes must be strictly increasing");
  if (!aj->is_array() || aj->size() != ts.size()) throw InputError("A", "need one matrix per time node");
  if (!bj->is_array() || bj->size() != ts.size()) throw InputError("B", "need one matrix per time node");
  std::vector<Matrix> As, Bs;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    As.push_back(mat((*aj)[i], index("A", i)));
    Bs.push_back(mat((*bj)[i], index("B", i)));
    if (As[i].rows() != As[i].cols() || As[i].rows() != As[0].rows()) throw InputError(index("A", i), "shape mismatch");
    if (Bs[i].rows() != As[0].rows() || Bs[i].cols() != Bs[0].cols()) throw InputError(index("B", i), "shape mismatch");
  }
  LtvSystem sys;
  sys.n = static_cast<int>(As[0].rows());
  sys.m = static_cast<int>(Bs[0].cols());
  sys.A = [ts, As](double t) { return lerp_table(ts, As, t); };
  sys.B = [ts, Bs](double t) { return lerp_table(ts, Bs, t); };
  return sys;
}

// ---------- commands ----------

void analyze(Ctx& c, const std::string& kind) {
  const json& s = c.spec;
  if (kind == "lti") {
    allow(s, "", {"version", "kind", "name", "builtin", "params", "A", "B", "T", "x0", "x1", "W", "U", "Q", "poles",
                  "steps"});
    auto sys = lti_from_spec(s);
    lti_analysis(c, sys);
    double T = c.number("T", 1.0);
    gramian_and_hum(c, LtvSystem::from_lti(sys), T);
  } else if (kind == "ltv-tabulated") {
    allow(s, "", {"version", "kind", "name", "builtin", "params", "times", "A", "B", "t", "depth", "T", "x0", "x1",
                  "steps"});
    auto sys = ltv_from_spec(s);
    double t = c.number("t", 0.0);
    int depth = c.count("depth", 2);
    double tol = c.tol(kRankTol);
    auto lk = ltv_kalman_test(sys, t, depth, tol);
    c.results["ltv"] = {{"t", t}, {"depth", depth}, {"rank", lk.rank}, {"satisfied", lk.satisfied},
                        {"columns", to_json(lk.columns)}};
    // frozen-time pair at t
    LtiSystem frozen{sys.A(t), sys.B(t), {}};
    c.results["frozen_kalman"] = kalman_json(kalman_test(frozen, tol));
    c.diagnostics["rank_tolerance"] = tol;
    c.diagnostics["derivatives"] = sys.dB ? "analytic first derivative" : "finite differences";
    double T = c.number("T", 1.0);
    gramian_and_hum(c, sys, T);
    c.results["controllable"] = c.results["gramian"]["invertible"];
  } else if (kind == "nonlinear-builtin") {
    allow(s, "", {"version", "kind", "name", "builtin", "params", "equilibrium", "poles", "x0", "T", "x", "depth",
                  "steps"});
    auto nl = nonlinear_from_spec(s);
    auto [xb, ub] = equilibrium(s, nl);
    auto lin = linearize(nl.f, nl.jac, xb, ub);
    c.results["linearization"] = {{"A", to_json(lin.A)}, {"B", to_json(lin.B)}};
    lti_analysis(c, lin);
    if (nl.fields) {
      Vector x = c.vector_field("x").value_or(xb);
      if (x.size() != nl.n) throw InputError("x", "state dimension mismatch");
      int depth = c.count("depth", 2);
      auto lr = larc_rank(*nl.fields, x, depth, c.tol(kRankTol));
      c.results["larc"] = {{"x", to_json(x)}, {"depth", depth}, {"rank", lr.rank}, {"satisfied", lr.satisfied},
                           {"brackets", lr.brackets}};
    }
  } else {
    throw InputError("kind", "analyze does not handle kind '" + kind + "'");
  }
}

std::pair<Vector, std::vector<Complex>> target_poly(const Ctx& c, int n) {
  std::vector<Complex> poles;
  if (c.has("poles")) {
    for (double v : split_numbers(c.options.at("poles"), "--poles")) poles.emplace_back(v, 0.0);
  } else if (auto p = find(c.spec, "poles")) {
    poles = complex_list(*p, "poles");
  } else {
    throw InputError("poles", "no target poles (use the spec field or --poles)");
  }
  if (static_cast<int>(poles.size()) != n)
    throw InputError("poles", "expected " + std::to_string(n) + " poles, got " + std::to_string(poles.size()));
  for (auto z : poles) {
    if (z.imag() == 0) continue;
    bool paired = std::count(poles.begin(), poles.end(), std::conj(z)) == std::count(poles.begin(), poles.end(), z);
    if (!paired) throw InputError("poles", "complex poles must come in conjugate pairs");
  }
  return {poly_from_roots(poles), poles};
}

void routh_only(Ctx& c) {
  Vector p;
  {
    auto v = split_numbers(c.options.at("routh"), "--routh");
    p = Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  auto r = routh(p);
  json table = json::array();
  for (auto& row : r.table) table.push_back(row);
  c.results["polynomial"] = to_json(p);
  c.results["routh"] = {{"table", table}, {"complete", r.complete}, {"first_column", to_json(r.first_column)},
                        {"sign_changes", r.sign_changes}, {"hurwitz", r.hurwitz}};
  bool h = r.hurwitz;
  if (p(0) > 0) {
    auto hz = hurwitz(p);
    c.results["hurwitz_minors"] = to_json(hz.minors);
    h = hz.hurwitz;
  }
  c.results["hurwitz"] = h;
  c.results["roots"] = to_json(poly_roots(p));
}

void stabilize_cmd(Ctx& c, const std::string& kind) {
  const json& s = c.spec;
  LtiSystem sys;
  Dynamics f;
  Vector xb, ub;
  if (kind == "lti") {
    allow(s, "", {"version", "kind", "name", "builtin", "params", "A", "B", "T", "x0", "x1", "W", "U", "Q", "poles",
                  "steps"});
    sys = lti_from_spec(s);
    xb = Vector::Zero(sys.n());
    ub = Vector::Zero(sys.m());
    Matrix A = sys.A, B = sys.B;
    f = [A, B](const Vector& x, const Vector& u) { return Vector(A * x + B * u); };
  } else if (kind == "nonlinear-builtin") {
    allow(s, "", {"version", "kind", "name", "builtin", "params", "equilibrium", "poles", "x0", "T", "x", "depth",
                  "steps"});
    auto nl = nonlinear_from_spec(s);
    std::tie(xb, ub) = equilibrium(s, nl);
    sys = linearize(nl.f, nl.jac, xb, ub);
    f = nl.f;
    c.results["linearization"] = {{"A", to_json(sys.A)}, {"B", to_json(sys.B)}};
  } else {
    throw InputError("kind", "stabilize does not handle kind '" + kind + "'");
  }
  auto [target, target_roots] = target_poly(c, sys.n());
  double tol = c.tol(1e-6);
  auto pp = pole_place(sys, target, tol);
  Matrix Acl = sys.A + sys.B * pp.K;
  c.results["target_poly"] = to_json(target);
  c.results["K"] = to_json(pp.K);
  c.results["closed_loop"] = to_json(pp.closed_loop);
  c.results["closed_loop_poly"] = to_json(pp.closed_loop_poly);
  c.results["coeff_residual"] = pp.coeff_residual;
  c.results["spectrum_error"] = multiset_distance(pp.closed_loop, target_roots);
  c.results["placement_method"] = pp.method;
  if (pp.y.size()) c.results["reduction_direction"] = to_json(pp.y);
  c.diagnostics["placement_tolerance"] = tol;

  bool stable = std::all_of(target_roots.begin(), target_roots.end(), [](Complex z) { return z.real() < 0; });
  Matrix P;
  if (stable) {
    P = lyapunov_solve(Acl);
    c.results["lyapunov_P"] = to_json(P);
  }
  auto x0 = c.vector_field("x0");
  if (!x0) return;
  if (x0->size() != sys.n()) throw InputError("x0", "state dimension mismatch");
  double T = c.number("T", 10.0);
  int steps = c.steps(2000);
  Matrix K = pp.K;
  FeedbackLaw law = [K, xb, ub](const Vector& x) { return Vector(ub + K * (x - xb)); };
  ScalarField V;
  if (stable) V = [P, xb](const Vector& x) { return (x - xb).dot(P * (x - xb)); };
  auto run = simulate_closed_loop(f, law, *x0, T, steps, V);
  c.results["simulation"] = {{"T", T}, {"initial_deviation", (*x0 - xb).norm()},
                             {"final_deviation", (run.traj.back() - xb).norm()}, {"final_state", to_json(run.traj.back())}};
  if (!run.V.empty()) {
    bool mono = true;
    for (std::size_t k = 1; k < run.V.size(); ++k) mono = mono && run.V[k] <= run.V[k - 1] * (1 + 1e-12);
    c.results["simulation"]["V_initial"] = run.V.front();
    c.results["simulation"]["V_final"] = run.V.back();
    c.results["simulation"]["V_monotone"] = mono;
  }
  c.diagnostics["simulation_steps"] = steps;
  c.csv.header = {"t"};
  c.csv.names("x", sys.n());
  c.csv.names("u", sys.m());
  for (std::size_t k = 0; k < run.traj.size(); ++k) {
    std::vector<double> row{run.traj.times[k]};
    append(row, run.traj.states[k]);
    append(row, run.u[k]);
    c.csv.rows.push_back(std::move(row));
  }
}

void lq_cmd(Ctx& c, const std::string& kind) {
  if (kind != "lti") throw InputError("kind", "lq does not handle kind '" + kind + "'");
  const json& s = c.spec;
  allow(s, "", {"version", "kind", "name", "builtin", "params", "A", "B", "T", "x0", "x1", "W", "U", "Q", "poles",
                "steps"});
  auto sys = lti_from_spec(s);
  const int n = sys.n(), m = sys.m();
  auto sq = [&](const char* key, Matrix fallback, int dim) {
    Matrix M = fallback;
    if (auto p = find(s, key)) M = mat(*p, key);
    if (M.rows() != dim || M.cols() != dim) throw InputError(key, "expected a " + std::to_string(dim) + "x" +
                                                                      std::to_string(dim) + " matrix");
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1 + M.cwiseAbs().maxCoeff()))
      throw InputError(key, "weight must be symmetric");
    return M;
  };
  Matrix W = sq("W", Matrix::Identity(n, n), n);
  Matrix U = sq("U", Matrix::Identity(m, m), m);
  Matrix Q = sq("Q", Matrix::Zero(n, n), n);
  if (U.ldlt().info() != Eigen::Success || U.ldlt().vectorD().minCoeff() <= 0)
    throw InputError("U", "control weight must be positive definite");
  double T = c.number("T", 1.0);
  if (!(T > 0)) throw InputError("T", "horizon must be positive");
  int steps = c.steps(2000);
  auto p = LqProblem::constant(sys, W, U, Q, T);
  auto sol = riccati_solve(p, steps);
  auto law = lq_feedback(sol, p);
  Matrix gain0(m, n);
  for (int i = 0; i < n; ++i) gain0.col(i) = law(0.0, Vector::Unit(n, i));
  double asym = 0;
  for (auto& E : sol.E) asym = std::max(asym, (E - E.transpose()).cwiseAbs().maxCoeff());
  c.results["T"] = T;
  c.results["E0"] = to_json(sol.E.front());
  c.results["E_T"] = to_json(sol.E.back());
  c.results["gain0"] = to_json(gain0);
  c.diagnostics["riccati_steps"] = steps;
  c.diagnostics["riccati_asymmetry"] = asym;
  auto x0 = c.vector_field("x0");
  if (!x0) {
    c.csv.header = {"t"};
    for (int i = 1; i <= n; ++i)
      for (int k = 1; k <= n; ++k) c.csv.header.push_back("E" + std::to_string(i) + "_" + std::to_string(k));
    for (std::size_t k = 0; k < sol.grid.size(); ++k) {
      std::vector<double> row{sol.grid[k]};
      for (int i = 0; i < n; ++i) append(row, Vector(sol.E[k].row(i).transpose()));
      c.csv.rows.push_back(std::move(row));
    }
    return;
  }
  if (x0->size() != n) throw InputError("x0", "state dimension mismatch");
  c.results["value"] = x0->dot(-sol.E.front() * *x0);
  c.results["closed_loop_cost"] = lq_closed_loop_cost(p, law, *x0, steps);
  Matrix A = sys.A, B = sys.B;
  auto traj = integrate({[&](double t, const Vector& x) { return Vector(A * x + B * law(t, x)); }, 0.0, *x0, T, steps});
  c.csv.header = {"t"};
  c.csv.names("x", n);
  c.csv.names("u", m);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    std::vector<double> row{traj.times[k]};
    append(row, traj.states[k]);
    append(row, law(traj.times[k], traj.states[k]));
    c.csv.rows.push_back(std::move(row));
  }
}

void shoot_cmd(Ctx& c, const std::string& kind) {
  if (kind != "oc-problem") throw InputError("kind", "shoot does not handle kind '" + kind + "'");
  const json& s = c.spec;
  allow(s, "", {"version", "kind", "name", "builtin", "params", "x0", "guess", "steps"});
  auto b = find(s, "builtin");
  if (!b) throw InputError("builtin", "missing field");
  auto name = str(*b, "builtin");
  models::OcExample ex;
  if (name == "zermelo") {
    Params p(s, {"v", "ell"});
    ex = models::zermelo(p.get("v", 0.5), p.get("ell", 1));
  } else if (name == "brachistochrone") {
    Params p(s, {"x1", "g"});
    double x1 = c.opt("x1").value_or(p.get("x1", 1));
    double g = p.get("g", 9.81);
    if (!(x1 > 0) || !(g > 0)) throw InputError("params", "x1 and g must be positive");
    ex = models::brachistochrone(x1, g);
  } else if (name == "predator-prey") {
    Params p(s, {"a", "b", "c", "M", "T", "x0", "y0"});
    models::PredatorPreyParams q;
    q = {p.get("a", q.a), p.get("b", q.b), p.get("c", q.c), p.get("M", q.M), p.get("T", q.T), p.get("x0", q.x0),
         p.get("y0", q.y0)};
    ex = models::predator_prey(q);
  } else if (name == "double-integrator-min-time") {
    Params p(s, {});
    Vector x0 = c.vector_field("x0").value_or(Vector::Unit(2, 0));
    if (x0.size() != 2) throw InputError("x0", "expected 2 components");
    ex = models::double_integrator_min_time(x0);
  } else if (name == "scalar-lq") {
    Params p(s, {"T", "x0"});
    ex = models::scalar_lq(p.get("T", 2), p.get("x0", 1));
  } else {
    throw InputError("builtin", "unknown optimal control builtin '" + name + "'");
  }
  if (name != "double-integrator-min-time" && find(s, "x0")) throw InputError("x0", "only used by the min-time builtin");
  if (auto g = find(s, "guess")) {
    allow(*g, "guess", {"p", "T"});
    if (auto p = find(*g, "p")) {
      ex.guess.p = vec(*p, "guess.p");
      if (ex.guess.p.size() != ex.problem.n) throw InputError("guess.p", "adjoint dimension mismatch");
    }
    if (auto t = find(*g, "T")) {
      if (!ex.problem.free_time) throw InputError("guess.T", "horizon is fixed for this problem");
      ex.guess.T = num(*t, "guess.T");
    }
  }
  ShootOptions opt;
  opt.steps = c.steps(opt.steps);
  opt.tol = c.tol(opt.tol);
  auto e = pmp_shoot(ex.problem, ex.guess, opt);
  auto d = check_extremal(e, ex.problem);
  c.results["converged"] = e.converged;
  c.results["tf"] = e.tf;
  c.results["p0"] = e.p0;
  c.results["p_initial"] = to_json(e.adjoint.states.front());
  c.results["final_state"] = to_json(e.state.back());
  c.results["switch_times"] = e.switch_times;
  c.results["singular_arc"] = e.singular_arc;
  c.diagnostics["iterations"] = e.iterations;
  c.diagnostics["residual_norm"] = e.residual.norm();
  c.diagnostics["residual_history"] = e.residual_history;
  c.diagnostics["steps"] = opt.steps;
  c.diagnostics["tolerance"] = opt.tol;
  c.diagnostics["hamiltonian_deviation"] = d.hamiltonian_deviation;
  c.diagnostics["transversality"] = d.transversality;
  c.diagnostics["nontriviality"] = d.nontriviality;
  c.diagnostics["free_time_residual"] = d.free_time_residual;
  c.csv.header = {"t"};
  c.csv.names("x", ex.problem.n);
  c.csv.names("u", ex.problem.m);
  for (std::size_t k = 0; k < e.state.size(); ++k) {
    std::vector<double> row{e.state.times[k]};
    append(row, e.state.states[k]);
    append(row, e.control.at(k));
    c.csv.rows.push_back(std::move(row));
  }
}

// ---------- spectral problems ----------

pde::IntervalUnion intervals(const json& j, const std::string& path) {
  if (!j.is_array()) throw InputError(path, "expected an array of [lo, hi] intervals");
  pde::IntervalUnion u;
  for (std::size_t i = 0; i < j.size(); ++i) {
    auto p = index(path, i);
    if (!j[i].is_array() || j[i].size() != 2) throw InputError(p, "expected [lo, hi]");
    u.parts.emplace_back(num(j[i][0], p), num(j[i][1], p));
  }
  return u;
}

Vector padded(const json& j, const std::string& path, int N) {
  Vector v = vec(j, path);
  if (v.size() > N) throw InputError(path, "more coefficients than modes (N = " + std::to_string(N) + ")");
  Vector out = Vector::Zero(N);
  out.head(v.size()) = v;
  return out;
}

pde::WaveState wave_state(const json* j, const std::string& path, int N) {
  auto s = pde::WaveState::zero(N);
  if (!j) return s;
  allow(*j, path, {"a", "b"});
  if (auto a = find(*j, "a")) s.a = padded(*a, join(path, "a"), N);
  if (auto b = find(*j, "b")) s.b = padded(*b, join(path, "b"), N);
  return s;
}

pde::SineBasis basis_from(const Ctx& c, double L_default = 1.0) {
  double L = c.number("L", L_default);
  int N = c.count("N", 8);
  if (!(L > 0)) throw InputError("L", "length must be positive");
  if (N < 1) throw InputError("N", "need at least one mode");
  return {L, N};
}

void wave_hum(Ctx& c) {
  allow(c.spec, "", {"version", "kind", "name", "problem", "L", "N", "T", "y0", "y1", "pivot", "force", "steps"});
  auto basis = basis_from(c);
  double T = c.number("T", 2 * basis.L);
  pde::HumWaveOptions o;
  o.steps = c.even_steps(o.steps);
  std::string pivot = "L2xH-1";
  if (c.has("pivot")) pivot = c.options.at("pivot");
  else if (auto p = find(c.spec, "pivot")) pivot = str(*p, "pivot");
  if (pivot == "L2xH-1") o.pivot = pde::Pivot::L2xHm1;
  else if (pivot == "H10xL2") o.pivot = pde::Pivot::H10xL2;
  else throw InputError("pivot", "expected L2xH-1 or H10xL2");
  o.force = c.has("force");
  if (auto f = find(c.spec, "force")) {
    if (!f->is_boolean()) throw InputError("force", "expected true or false");
    o.force = o.force || f->get<bool>();
  }
  auto y0 = wave_state(find(c.spec, "y0"), "y0", basis.N);
  auto y1 = wave_state(find(c.spec, "y1"), "y1", basis.N);
  auto r = pde::hum_wave_boundary(basis, y0, y1, T, o);
  c.results["L"] = basis.L;
  c.results["N"] = basis.N;
  c.results["T"] = T;
  c.results["z"] = {{"a", to_json(r.z.a)}, {"b", to_json(r.z.b)}};
  c.results["endpoint"] = {{"a", to_json(r.endpoint.a)}, {"b", to_json(r.endpoint.b)}};
  c.results["endpoint_error"] = r.endpoint_error;
  c.results["control_norm2"] = r.control_norm2;
  c.results["gz_z"] = r.gz_z;
  c.diagnostics["gramian_condition"] = r.condition;
  c.diagnostics["gramian_min_singular"] = r.min_singular;
  c.diagnostics["steps"] = o.steps;
  c.diagnostics["pivot"] = pivot;
  c.diagnostics["forced"] = o.force;
  c.csv.header = {"t", "u"};
  for (std::size_t k = 0; k < r.times.size(); ++k) c.csv.rows.push_back({r.times[k], r.u[k]});
}

void wave_observe(Ctx& c) {
  allow(c.spec, "", {"version", "kind", "name", "problem", "L", "N", "T", "omega", "y0", "steps"});
  auto basis = basis_from(c);
  double T = c.number("T", 2 * basis.L);
  int steps = c.even_steps(4000);
  auto y0 = wave_state(find(c.spec, "y0"), "y0", basis.N);
  double E = pde::wave_energy(basis, y0);
  if (!(E > 0)) throw InputError("y0", "initial state must be nonzero");
  double obs = pde::boundary_observation_energy(basis, y0, T, steps);
  c.results["T"] = T;
  c.results["energy"] = E;
  c.results["boundary_observation"] = obs;
  c.results["boundary_ratio"] = obs / E;
  if (auto w = find(c.spec, "omega")) {
    auto omega = intervals(*w, "omega");
    omega.check(basis.L);
    double internal = pde::internal_wave_observation(basis, y0, omega, T, steps);
    double diag = 0, min_mass = INFINITY;
    for (int j = 1; j <= basis.N; ++j) {
      double mass = pde::sin_product(omega, j, j, basis.L);
      diag += (y0.a(j - 1) * y0.a(j - 1) + y0.b(j - 1) * y0.b(j - 1)) * mass;
      min_mass = std::min(min_mass, mass);
    }
    c.results["internal_observation"] = internal;
    c.results["internal_ratio"] = internal / E;
    c.results["diagonal_formula_at_2L"] = basis.L * diag;
    c.results["sin2_min_mass"] = min_mass;
    c.results["sin2_lower_bound"] = pde::sin2_lower_bound(omega.measure(), basis.L);
  }
  c.diagnostics["steps"] = steps;
  const int samples = 200;
  c.csv.header = {"t"};
  c.csv.names("a", basis.N);
  c.csv.names("b", basis.N);
  for (int k = 0; k <= samples; ++k) {
    double t = T * k / samples;
    auto s = pde::wave_evolve(basis, y0, t);
    std::vector<double> row{t};
    append(row, s.a);
    append(row, s.b);
    c.csv.rows.push_back(std::move(row));
  }
}

void moment_heat(Ctx& c) {
  allow(c.spec, "", {"version", "kind", "name", "problem", "L", "N", "T", "omega", "y0", "steps"});
  double L = c.number("L", std::numbers::pi);
  if (std::abs(L - std::numbers::pi) > 1e-12) throw InputError("L", "the moment method is set on (0, pi)");
  int N = c.count("N", 4);
  double T = c.number("T", 1.0);
  int steps = c.even_steps(4000);
  pde::IntervalUnion omega({{0.0, std::numbers::pi / 2}});
  if (auto w = find(c.spec, "omega")) omega = intervals(*w, "omega");
  auto y0p = find(c.spec, "y0");
  if (!y0p) throw InputError("y0", "missing field");
  if (N < 1) throw InputError("N", "need at least one mode");
  Vector y0 = padded(*y0p, "y0", N);
  auto r = pde::moment_heat_control(omega, y0, T, N, steps);
  c.results["N"] = N;
  c.results["T"] = T;
  c.results["final_coeffs"] = to_json(r.final_coeffs);
  c.results["max_final_coeff"] = r.final_coeffs.cwiseAbs().maxCoeff();
  c.results["max_residual"] = r.max_residual;
  c.results["denominators"] = to_json(r.denominators);
  c.diagnostics["gram_condition"] = r.gram_condition;
  c.diagnostics["steps"] = steps;
  c.csv.header = {"t"};
  c.csv.names("c", N);
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    std::vector<double> row{r.times[k]};
    append(row, Vector(r.amplitude.row(static_cast<Eigen::Index>(k)).transpose()));
    c.csv.rows.push_back(std::move(row));
  }
}

void damping(Ctx& c) {
  allow(c.spec, "", {"version", "kind", "name", "problem", "L", "N", "omega", "T_fit", "samples", "y0"});
  auto basis = basis_from(c);
  auto w = find(c.spec, "omega");
  if (!w) throw InputError("omega", "missing field");
  auto omega = intervals(*w, "omega");
  double T_fit = c.number("T_fit", 10.0);
  int samples = c.count("samples", 1000);
  std::optional<pde::WaveState> init;
  if (auto y = find(c.spec, "y0")) init = wave_state(y, "y0", basis.N);
  auto r = pde::damping_decay_experiment(basis, omega, T_fit, samples, init ? &*init : nullptr);
  double worst = 0;
  for (std::size_t k = 0; k < r.times.size(); ++k)
    worst = std::max(worst, r.energy[k] / (r.C1 * r.energy[0] * std::exp(-r.delta * r.times[k])));
  c.results["delta"] = r.delta;
  c.results["C1"] = r.C1;
  c.results["observability"] = r.observability;
  c.results["energy_initial"] = r.energy.front();
  c.results["energy_final"] = r.energy.back();
  c.results["envelope_ratio_max"] = worst;
  c.diagnostics["samples"] = samples;
  c.csv.header = {"t", "energy"};
  for (std::size_t k = 0; k < r.times.size(); ++k) c.csv.rows.push_back({r.times[k], r.energy[k]});
}

void semilinear(Ctx& c) {
  allow(c.spec, "", {"version", "kind", "name", "problem", "L", "f", "n", "N_sim", "gamma", "T_sim", "y0", "steps"});
  pde::SemilinearPlant plant;
  plant.L = c.number("L", 1.0);
  auto fj = find(c.spec, "f");
  if (!fj) throw InputError("f", "missing field (polynomial coefficients, constant term first)");
  Vector coef = vec(*fj, "f");
  if (coef.size() == 0) throw InputError("f", "empty polynomial");
  plant.f = [coef](double y) {
    double v = 0;
    for (Eigen::Index i = coef.size() - 1; i >= 0; --i) v = v * y + coef(i);
    return v;
  };
  plant.f_prime_0 = coef.size() > 1 ? coef(1) : 0.0;
  plant.n = c.count("n", 0);
  plant.N_sim = c.count("N_sim", 0);
  plant.gamma = c.number("gamma", 0.0);
  double T = c.opt("T").value_or(c.number("T_sim", 10.0));
  auto y0p = find(c.spec, "y0");
  if (!y0p) throw InputError("y0", "missing field");
  Vector y0 = vec(*y0p, "y0");
  int steps = c.steps(0);
  auto r = pde::semilinear_stabilize(plant, y0, T, steps);
  c.results["n"] = r.n;
  c.results["N_sim"] = r.N_sim;
  c.results["gamma"] = r.gamma;
  c.results["K"] = to_json(r.K);
  c.results["kalman_det"] = r.kalman_det;
  c.results["closed_loop_real_parts"] = to_json(r.closed_loop);
  c.results["initial_size"] = r.initial_size;
  c.results["final_size"] = r.final_size;
  c.results["decay_ratio"] = r.final_size / r.initial_size;
  c.results["V_initial"] = r.V.front();
  c.results["V_final"] = r.V.back();
  c.results["V_monotone"] = r.V_monotone;
  c.diagnostics["steps"] = r.steps;
  c.csv.header = {"t"};
  c.csv.names("z", r.N_sim);
  c.csv.header.push_back("u");
  c.csv.header.push_back("V");
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    std::vector<double> row{r.times[k]};
    append(row, r.z[k]);
    row.push_back(r.u[k]);
    row.push_back(r.V[k]);
    c.csv.rows.push_back(std::move(row));
  }
}

void biorthogonal(Ctx& c) {
  allow(c.spec, "", {"version", "kind", "name", "problem", "mu", "T", "K"});
  auto mj = find(c.spec, "mu");
  if (!mj) throw InputError("mu", "missing field");
  Vector mu = vec(*mj, "mu");
  double T = c.number("T", 1.0);
  int K = c.count("K", static_cast<int>(mu.size()));
  if (K > mu.size()) throw InputError("K", "K exceeds the number of exponents");
  std::vector<double> m(mu.data(), mu.data() + K);
  auto b = pde::biorthogonal_family(m, T, K);
  c.results["K"] = K;
  c.results["T"] = T;
  c.results["C"] = to_json(b.C);
  c.diagnostics["gram_condition"] = b.condition;
  const int samples = 200;
  c.csv.header = {"t"};
  c.csv.names("theta", K);
  for (int k = 0; k <= samples; ++k) {
    double t = T * k / samples;
    std::vector<double> row{t};
    for (int i = 0; i < K; ++i) row.push_back(b.theta(i, t));
    c.csv.rows.push_back(std::move(row));
  }
}

void pde_cmd(Ctx& c, const std::string& kind) {
  if (kind != "spectral-1d") throw InputError("kind", "pde does not handle kind '" + kind + "'");
  auto p = find(c.spec, "problem");
  if (!p) throw InputError("problem", "missing field");
  auto name = str(*p, "problem");
  if (name == "wave-hum") wave_hum(c);
  else if (name == "wave-observe") wave_observe(c);
  else if (name == "moment-heat") moment_heat(c);
  else if (name == "damping") damping(c);
  else if (name == "semilinear-heat") semilinear(c);
  else if (name == "biorthogonal") biorthogonal(c);
  else throw InputError("problem", "unknown spectral problem '" + name + "'");
  c.results["problem"] = name;
}

const std::set<std::string> kCommands = {"analyze", "stabilize", "lq", "shoot", "pde"};
const std::set<std::string> kNumericOptions = {"tol", "steps", "T", "t", "depth", "x1", "L", "N"};
const std::set<std::string> kOtherOptions = {"poles", "routh", "force", "timing", "pivot"};

}  // namespace

Job::Job(std::string command, std::string spec, std::string source)
    : command_(std::move(command)), spec_(std::move(spec)), source_(std::move(source)) {
  if (!kCommands.count(command_)) throw InputError("command", "unknown command '" + command_ + "'");
}

void Job::set_option(const std::string& key, const std::string& value) {
  if (kNumericOptions.count(key)) {
    split_numbers(value, "--" + key);
  } else if (key == "poles" || key == "routh") {
    split_numbers(value, "--" + key);
  } else if (!kOtherOptions.count(key)) {
    throw InputError("--" + key, "unknown option");
  }
  options_[key] = value;
}

Output Job::run() const {
  auto start = std::chrono::steady_clock::now();
  json spec = json::object();
  std::string kind;
  const bool routh_mode = command_ == "stabilize" && options_.count("routh");
  if (!spec_.empty() || !routh_mode) {
    try {
      spec = json::parse(spec_);
    } catch (const json::parse_error& e) {
      throw InputError(line_col(spec_, e.byte), "malformed spec: " + std::string(e.what()));
    }
    if (!spec.is_object()) throw InputError("(root)", "spec must be an object");
    auto v = find(spec, "version");
    if (!v) throw InputError("version", "missing mandatory field");
    if (integer(*v, "version") != kFormatVersion)
      throw InputError("version", "unsupported format version (expected " + std::to_string(kFormatVersion) + ")");
    auto k = find(spec, "kind");
    if (!k) throw InputError("kind", "missing field");
    kind = str(*k, "kind");
    static const std::set<std::string> kinds = {"lti", "ltv-tabulated", "nonlinear-builtin", "spectral-1d",
                                                "oc-problem"};
    if (!kinds.count(kind)) throw InputError("kind", "unknown kind '" + kind + "'");
    if (auto n = find(spec, "name")) str(*n, "name");
  }
  Ctx c{command_, options_, spec};
  if (routh_mode) {
    kind = "polynomial";
    routh_only(c);
  } else if (command_ == "analyze") {
    analyze(c, kind);
  } else if (command_ == "stabilize") {
    stabilize_cmd(c, kind);
  } else if (command_ == "lq") {
    lq_cmd(c, kind);
  } else if (command_ == "shoot") {
    shoot_cmd(c, kind);
  } else {
    pde_cmd(c, kind);
  }
  json report;
  report["version"] = kFormatVersion;
  report["command"] = command_;
  report["source"] = source_;
  report["options"] = options_;
  report["kind"] = kind;
  report["input_digest"] = "sha256:" + sha256_hex(spec_);
  report["results"] = std::move(c.results);
  report["diagnostics"] = std::move(c.diagnostics);
  if (options_.count("timing")) {
    std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    report["timing"] = {{"seconds", dt.count()}};
  }
  return {report.dump(2) + "\n", c.csv.str()};
}

const std::string* builtin_spec(const std::string& name) {
  for (auto& [n, text] : kBuiltinSpecs)
    if (n == name) return &text;
  return nullptr;
}

std::vector<std::string> builtin_names() {
  std::vector<std::string> out;
  for (auto& [n, text] : kBuiltinSpecs) out.push_back(n);
  return out;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Input:
    case ErrorKind::Dimension:
    case ErrorKind::UnsupportedShape:
    case ErrorKind::Configuration:
    case ErrorKind::Grid:
    case ErrorKind::NormalizeFirst:
    case ErrorKind::ZeroLeading:
    case ErrorKind::TimeDirection:
      return 2;
    default:
      return 3;
  }
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
    throw Error(ErrorKind::Numerical, "sha256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

}  // namespace ctrl::batch
