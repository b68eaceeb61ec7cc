#include "cfurllc/gp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <Eigen/Dense>

namespace cfurllc::gp {

// ---------------------------------------------------------------------------
// Expression algebra

namespace {

void normalize(std::vector<std::pair<int, double>>& exps) {
  std::sort(exps.begin(), exps.end());
  std::vector<std::pair<int, double>> merged;
  for (const auto& [id, a] : exps) {
    if (!merged.empty() && merged.back().first == id) {
      merged.back().second += a;
    } else {
      merged.emplace_back(id, a);
    }
  }
  std::erase_if(merged, [](const auto& e) { return e.second == 0.0; });
  exps = std::move(merged);
}

}  // namespace

Monomial Monomial::constant(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw std::invalid_argument("monomial coefficient must be positive and finite");
  }
  return Monomial{std::log(c), {}};
}

Monomial Monomial::variable(int id, double power) {
  Monomial m;
  if (power != 0.0) m.exponents.emplace_back(id, power);
  return m;
}

double Monomial::coeff() const { return std::exp(log_coeff); }

double Monomial::log_eval(std::span<const double> y) const {
  double z = log_coeff;
  for (const auto& [id, a] : exponents) z += a * y[static_cast<std::size_t>(id)];
  return z;
}

double Monomial::eval(std::span<const double> x) const {
  double z = log_coeff;
  for (const auto& [id, a] : exponents) z += a * std::log(x[static_cast<std::size_t>(id)]);
  return std::exp(z);
}

Monomial& Monomial::operator*=(const Monomial& other) {
  log_coeff += other.log_coeff;
  exponents.insert(exponents.end(), other.exponents.begin(), other.exponents.end());
  normalize(exponents);
  return *this;
}

Monomial Monomial::pow(double p) const {
  Monomial m{log_coeff * p, exponents};
  for (auto& e : m.exponents) e.second *= p;
  normalize(m.exponents);
  return m;
}

Monomial Monomial::scaled(double c) const {
  if (!(c > 0.0)) throw std::invalid_argument("monomial scale must be positive");
  Monomial m = *this;
  m.log_coeff += std::log(c);
  return m;
}

Monomial operator*(Monomial a, const Monomial& b) { return a *= b; }

Posynomial& Posynomial::operator+=(const Posynomial& other) {
  terms.insert(terms.end(), other.terms.begin(), other.terms.end());
  return *this;
}

Posynomial& Posynomial::operator*=(const Monomial& m) {
  for (auto& t : terms) t *= m;
  return *this;
}

double Posynomial::eval(std::span<const double> x) const {
  double s = 0.0;
  for (const auto& t : terms) s += t.eval(x);
  return s;
}

Posynomial operator+(Posynomial a, const Posynomial& b) { return a += b; }
Posynomial operator*(Posynomial a, const Monomial& m) { return a *= m; }

Posynomial operator*(const Posynomial& a, const Posynomial& b) {
  Posynomial out;
  out.terms.reserve(a.terms.size() * b.terms.size());
  for (const auto& ta : a.terms) {
    for (const auto& tb : b.terms) out.terms.push_back(ta * tb);
  }
  return out;
}

int Program::add_variable(std::string name, double lower, double upper) {
  if (lower < 0.0 || !(upper > 0.0) || lower > upper) {
    throw std::invalid_argument("invalid bounds for GP variable " + name);
  }
  variables_.push_back({std::move(name), lower, upper});
  return static_cast<int>(variables_.size()) - 1;
}

void Program::add_constraint(Posynomial constraint, std::string label) {
  constraints_.push_back(std::move(constraint));
  labels_.push_back(std::move(label));
}

void Program::validate() const {
  if (variables_.empty()) throw std::invalid_argument("GP has no variables");
  if (objective_.terms.empty()) throw std::invalid_argument("GP objective is empty");
  auto check = [&](const Posynomial& p, const char* what) {
    if (p.terms.empty()) throw std::invalid_argument(std::string("empty posynomial in ") + what);
    for (const auto& t : p.terms) {
      if (!std::isfinite(t.log_coeff)) {
        throw std::invalid_argument(std::string("non-finite coefficient in ") + what);
      }
      for (const auto& [id, a] : t.exponents) {
        if (id < 0 || id >= num_variables() || !std::isfinite(a)) {
          throw std::invalid_argument(std::string("undeclared variable in ") + what);
        }
      }
    }
  };
  check(objective_, "objective");
  for (const auto& c : constraints_) check(c, "constraint");
}

const char* to_string(Status s) {
  switch (s) {
    case Status::kOptimal: return "optimal";
    case Status::kInfeasible: return "infeasible";
    case Status::kUnbounded: return "unbounded";
    case Status::kMaxIter: return "max-iter";
  }
  return "unknown";
}

double KktReport::residual() const {
  return std::max({stationarity, complementarity, primal_infeasibility});
}

// ---------------------------------------------------------------------------
// Log-domain functions: F(y) = log sum_t exp(b_t + a_t . y)

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct LogTerm {
  double b = 0.0;
  std::vector<std::pair<int, double>> a;  // local indices into support
};

struct LogFn {
  std::vector<int> support;  // global variable ids
  std::vector<LogTerm> terms;
  bool linear = false;       // single term

  double value(const VectorXd& y) const {
    if (linear) return term_value(terms.front(), y);
    double zmax = -std::numeric_limits<double>::infinity();
    thread_local std::vector<double> z;
    z.resize(terms.size());
    for (std::size_t t = 0; t < terms.size(); ++t) {
      z[t] = term_value(terms[t], y);
      zmax = std::max(zmax, z[t]);
    }
    double s = 0.0;
    for (double zt : z) s += std::exp(zt - zmax);
    return zmax + std::log(s);
  }

  double term_value(const LogTerm& t, const VectorXd& y) const {
    double z = t.b;
    for (const auto& [j, a] : t.a) z += a * y(support[static_cast<std::size_t>(j)]);
    return z;
  }

  // Value, local gradient and local Hessian.
  double derivs(const VectorXd& y, VectorXd& g, MatrixXd& H) const {
    const auto s = static_cast<Eigen::Index>(support.size());
    g.setZero(s);
    H.setZero(s, s);
    if (linear) {
      for (const auto& [j, a] : terms.front().a) g(j) += a;
      return term_value(terms.front(), y);
    }
    thread_local std::vector<double> z;
    z.resize(terms.size());
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < terms.size(); ++t) {
      z[t] = term_value(terms[t], y);
      zmax = std::max(zmax, z[t]);
    }
    double sum = 0.0;
    for (double& zt : z) {
      zt = std::exp(zt - zmax);
      sum += zt;
    }
    for (std::size_t t = 0; t < terms.size(); ++t) {
      const double w = z[t] / sum;
      if (w == 0.0) continue;
      const auto& a = terms[t].a;
      for (const auto& [i, ai] : a) {
        g(i) += w * ai;
        for (const auto& [j, aj] : a) H(i, j) += w * ai * aj;
      }
    }
    H.noalias() -= g * g.transpose();
    return zmax + std::log(sum);
  }
};

LogFn compile(const Posynomial& p, int shift_var = -1) {
  LogFn fn;
  std::map<int, int> local;
  auto local_id = [&](int id) {
    auto [it, inserted] = local.emplace(id, static_cast<int>(fn.support.size()));
    if (inserted) fn.support.push_back(id);
    return it->second;
  };
  for (const auto& m : p.terms) {
    LogTerm t;
    t.b = m.log_coeff;
    for (const auto& [id, a] : m.exponents) t.a.emplace_back(local_id(id), a);
    if (shift_var >= 0) t.a.emplace_back(local_id(shift_var), -1.0);
    fn.terms.push_back(std::move(t));
  }
  fn.linear = fn.terms.size() == 1;
  return fn;
}

LogFn bound_fn(int var, double log_bound, bool upper, int shift_var = -1) {
  // upper: y - log ub <= 0 ; lower: log lb - y <= 0
  LogFn fn;
  fn.support.push_back(var);
  LogTerm t;
  t.b = upper ? -log_bound : log_bound;
  t.a.emplace_back(0, upper ? 1.0 : -1.0);
  if (shift_var >= 0) {
    fn.support.push_back(shift_var);
    t.a.emplace_back(1, -1.0);
  }
  fn.terms.push_back(std::move(t));
  fn.linear = true;
  return fn;
}

struct Compiled {
  LogFn objective;
  std::vector<LogFn> constraints;  // user constraints then bounds
};

Compiled compile_program(const Program& prog, bool phase1) {
  const int n = prog.num_variables();
  const int shift = phase1 ? n : -1;
  Compiled c;
  if (phase1) {
    c.objective = bound_fn(n, 0.0, true);  // minimize log s
  } else {
    c.objective = compile(prog.objective());
  }
  for (const auto& con : prog.constraints()) c.constraints.push_back(compile(con, shift));
  for (int j = 0; j < n; ++j) {
    const auto& v = prog.variables()[static_cast<std::size_t>(j)];
    if (v.lower > 0.0) c.constraints.push_back(bound_fn(j, std::log(v.lower), false, shift));
    if (std::isfinite(v.upper)) c.constraints.push_back(bound_fn(j, std::log(v.upper), true, shift));
  }
  return c;
}

struct BarrierState {
  VectorXd y;
  double t = 1.0;
  int steps = 0;
};

constexpr double kMaxLogStep = 5.0;

enum class CenterResult { kCentered, kStalled, kBudget, kDiverged, kPhase1Done };

class BarrierSolver {
 public:
  BarrierSolver(const Compiled& c, int n, double tol, int budget)
      : c_(c), n_(n), tol_(tol), budget_(budget) {}

  // Barrier value; +inf outside the strict interior.
  double merit(const VectorXd& y, double t) const {
    double phi = t * c_.objective.value(y);
    for (const auto& fn : c_.constraints) {
      const double f = fn.value(y);
      if (!(f < 0.0)) return std::numeric_limits<double>::infinity();
      phi -= std::log(-f);
    }
    return phi;
  }

  double assemble(const VectorXd& y, double t, VectorXd& g, MatrixXd& H) const {
    g.setZero(n_);
    H.setZero(n_, n_);
    VectorXd gl;
    MatrixXd Hl;
    double phi = t * c_.objective.derivs(y, gl, Hl);
    scatter(c_.objective.support, gl, Hl, t, 0.0, g, H);
    for (const auto& fn : c_.constraints) {
      const double f = fn.derivs(y, gl, Hl);
      phi -= std::log(-f);
      scatter(fn.support, gl, Hl, 1.0 / (-f), 1.0 / (f * f), g, H);
    }
    return phi;
  }

  // Newton centering at fixed t. `phase1_stop` ends early once the shift
  // variable falls below the threshold.
  CenterResult center(BarrierState& st, const double* phase1_stop) const {
    VectorXd g, d;
    MatrixXd H;
    const double stat_target = 0.1 * tol_ * st.t;
    for (;;) {
      if (st.steps >= budget_) return CenterResult::kBudget;
      if (st.y.cwiseAbs().maxCoeff() > 700.0) return CenterResult::kDiverged;
      if (phase1_stop && st.y(n_ - 1) < *phase1_stop) return CenterResult::kPhase1Done;
      const double phi = assemble(st.y, st.t, g, H);
      if (!std::isfinite(phi)) return CenterResult::kStalled;
      if (g.norm() <= stat_target) return CenterResult::kCentered;
      if (!newton_direction(H, g, d)) return CenterResult::kStalled;
      const double dec = -g.dot(d);
      if (dec <= 0.0) return CenterResult::kStalled;
      // Merit values carry about 1e-16 |phi| of rounding noise.
      const double floor = std::max(1e-12, 1e-13 * std::abs(phi));
      if (0.5 * dec <= floor) return CenterResult::kCentered;

      ++st.steps;
      const double dmax = d.cwiseAbs().maxCoeff();
      double step = dmax > kMaxLogStep ? kMaxLogStep / dmax : 1.0;
      bool moved = false;
      while (step > 1e-14) {
        VectorXd trial = st.y + step * d;
        if (trial == st.y) return CenterResult::kCentered;
        const double m = merit(trial, st.t);
        if (std::isfinite(m) && m <= phi - 0.25 * step * dec) {
          st.y = std::move(trial);
          moved = true;
          break;
        }
        // Inside the quadratic region a rejected full step means the
        // barrier value has hit its rounding floor.
        if (dec < 1e6 * floor && std::isfinite(m)) return CenterResult::kCentered;
        step *= 0.5;
      }
      if (!moved) return CenterResult::kStalled;
    }
  }

  int num_constraints() const { return static_cast<int>(c_.constraints.size()); }

 private:
  static void scatter(const std::vector<int>& support, const VectorXd& gl, const MatrixXd& Hl,
                      double wg, double wgg, VectorXd& g, MatrixXd& H) {
    const auto s = static_cast<Eigen::Index>(support.size());
    for (Eigen::Index i = 0; i < s; ++i) {
      const int gi = support[static_cast<std::size_t>(i)];
      g(gi) += wg * gl(i);
      for (Eigen::Index j = 0; j < s; ++j) {
        const int gj = support[static_cast<std::size_t>(j)];
        H(gi, gj) += wg * Hl(i, j) + wgg * gl(i) * gl(j);
      }
    }
  }

  static bool newton_direction(const MatrixXd& H, const VectorXd& g, VectorXd& d) {
    const double scale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    for (double reg = 1e-14; reg < 1e-2; reg *= 100.0) {
      MatrixXd Hr = H;
      Hr.diagonal().array() += reg * scale;
      Eigen::LLT<MatrixXd> llt(Hr);
      if (llt.info() != Eigen::Success) continue;
      d = llt.solve(-g);
      if (d.allFinite()) return true;
    }
    return false;
  }

  const Compiled& c_;
  int n_;
  double tol_;
  int budget_;
};

// Lawson-Hanson non-negative least squares: min ||A x - b|| s.t. x >= 0.
VectorXd nnls(const MatrixXd& A, const VectorXd& b) {
  const Eigen::Index n = A.cols();
  VectorXd x = VectorXd::Zero(n);
  if (n == 0) return x;
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double wtol = 1e-14 * std::max(1.0, A.cwiseAbs().maxCoeff() * b.cwiseAbs().maxCoeff());

  auto solve_passive = [&]() {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j) if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    MatrixXd Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) Ap.col(static_cast<Eigen::Index>(c)) = A.col(idx[c]);
    VectorXd sp = Ap.colPivHouseholderQr().solve(b);
    VectorXd s = VectorXd::Zero(n);
    for (std::size_t c = 0; c < idx.size(); ++c) s(idx[c]) = sp(static_cast<Eigen::Index>(c));
    return s;
  };

  for (int outer = 0; outer < 3 * n + 10; ++outer) {
    VectorXd w = A.transpose() * (b - A * x);
    Eigen::Index best = -1;
    double wmax = wtol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > wmax) {
        wmax = w(j);
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;
    for (int inner = 0; inner < 3 * n + 10; ++inner) {
      VectorXd s = solve_passive();
      bool all_positive = true;
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) {
          all_positive = false;
          alpha = std::min(alpha, x(j) / (x(j) - s(j)));
        }
      }
      if (all_positive) {
        x = s;
        break;
      }
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x(j) <= 1e-300) {
          passive[static_cast<std::size_t>(j)] = false;
          x(j) = 0.0;
        }
      }
    }
  }
  return x;
}

VectorXd initial_point(const Program& prog, const Options& opt) {
  const int n = prog.num_variables();
  VectorXd y = VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    if (!opt.initial.empty()) {
      const double x0 = opt.initial[static_cast<std::size_t>(j)];
      if (x0 > 0.0 && std::isfinite(x0)) y(j) = std::log(x0);
    }
    const auto& v = prog.variables()[static_cast<std::size_t>(j)];
    const double lo = v.lower > 0.0 ? std::log(v.lower) : -std::numeric_limits<double>::infinity();
    const double hi = std::isfinite(v.upper) ? std::log(v.upper) : std::numeric_limits<double>::infinity();
    if (std::isfinite(lo) && std::isfinite(hi)) {
      const double margin = std::min(1e-3, 0.25 * (hi - lo));
      y(j) = std::clamp(y(j), lo + margin, hi - margin);
    } else if (std::isfinite(lo)) {
      y(j) = std::max(y(j), lo + 1e-3);
    } else if (std::isfinite(hi)) {
      y(j) = std::min(y(j), hi - 1e-3);
    }
  }
  return y;
}

}  // namespace

Solution solve(const Program& program, const Options& options) {
  program.validate();
  if (!options.initial.empty() &&
      static_cast<int>(options.initial.size()) != program.num_variables()) {
    throw std::invalid_argument("initial point has the wrong dimension");
  }
  const int n = program.num_variables();
  Solution sol;
  VectorXd y = initial_point(program, options);

  const Compiled main = compile_program(program, false);
  const int m = static_cast<int>(main.constraints.size());

  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& fn : main.constraints) worst = std::max(worst, fn.value(y));
  sol.phase1_value = worst;

  int steps = 0;
  if (m > 0 && !(worst < 0.0)) {
    // Phase 1: minimize s subject to posynomial_i / s <= 1.
    const Compiled p1 = compile_program(program, true);
    BarrierSolver solver(p1, n + 1, 1e-9, options.max_newton_steps);
    BarrierState st;
    st.y.resize(n + 1);
    st.y.head(n) = y;
    st.y(n) = worst + 1.0;
    const double stop = -0.05;
    const int m1 = solver.num_constraints();
    // central path offset m1 / t starts at about one unit of log slack
    st.t = std::max(1.0, static_cast<double>(m1));
    bool done = false;
    for (;;) {
      const auto r = solver.center(st, &stop);
      if (r == CenterResult::kPhase1Done) { done = true; break; }
      if (r == CenterResult::kBudget) break;
      if (r == CenterResult::kDiverged) { done = st.y(n) < 0.0; break; }
      if (m1 / st.t <= 1e-10) break;
      st.t *= 10.0;
    }
    steps = st.steps;
    worst = -std::numeric_limits<double>::infinity();
    for (const auto& fn : main.constraints) worst = std::max(worst, fn.value(st.y.head(n)));
    sol.phase1_value = worst;
    if (!done && !(worst < 0.0)) {
      sol.status = steps >= options.max_newton_steps ? Status::kMaxIter : Status::kInfeasible;
      sol.newton_steps = steps;
      sol.x.resize(static_cast<std::size_t>(n));
      for (int j = 0; j < n; ++j) sol.x[static_cast<std::size_t>(j)] = std::exp(st.y(j));
      return sol;
    }
    y = st.y.head(n);
  }

  BarrierSolver solver(main, n, options.tol, options.max_newton_steps - steps);
  BarrierState st;
  st.y = y;
  st.t = 1.0;
  Status status = Status::kOptimal;
  for (;;) {
    const auto r = solver.center(st, nullptr);
    if (r == CenterResult::kDiverged || main.objective.value(st.y) < -700.0) {
      status = Status::kUnbounded;
      break;
    }
    if (r == CenterResult::kBudget) {
      status = Status::kMaxIter;
      break;
    }
    if (m == 0 || m / st.t <= 0.1 * options.tol) break;
    st.t *= 10.0;
  }

  sol.newton_steps = steps + st.steps;
  sol.x.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) sol.x[static_cast<std::size_t>(j)] = std::exp(st.y(j));
  sol.objective = std::exp(main.objective.value(st.y));
  sol.kkt = check_kkt(program, sol.x, options.tol);
  sol.duals = sol.kkt.duals;
  if (status == Status::kOptimal && !sol.kkt.passed) status = Status::kMaxIter;
  sol.status = status;
  return sol;
}

KktReport check_kkt(const Program& program, std::span<const double> x, double tol) {
  program.validate();
  const int n = program.num_variables();
  if (static_cast<int>(x.size()) != n) throw std::invalid_argument("point has the wrong dimension");
  VectorXd y(n);
  for (int j = 0; j < n; ++j) {
    if (!(x[static_cast<std::size_t>(j)] > 0.0)) {
      throw std::invalid_argument("check_kkt needs a strictly positive point");
    }
    y(j) = std::log(x[static_cast<std::size_t>(j)]);
  }
  const Compiled c = compile_program(program, false);
  const auto m = static_cast<Eigen::Index>(c.constraints.size());

  auto dense_grad = [&](const LogFn& fn, double& value) {
    VectorXd gl;
    MatrixXd Hl;
    value = fn.derivs(y, gl, Hl);
    VectorXd g = VectorXd::Zero(n);
    for (std::size_t i = 0; i < fn.support.size(); ++i) g(fn.support[i]) += gl(static_cast<Eigen::Index>(i));
    return g;
  };

  KktReport rep;
  double f0 = 0.0;
  const VectorXd g0 = dense_grad(c.objective, f0);
  rep.log_slack.resize(static_cast<std::size_t>(m));
  rep.duals.assign(static_cast<std::size_t>(m), 0.0);

  std::vector<Eigen::Index> near;
  std::vector<VectorXd> grads(static_cast<std::size_t>(m));
  std::vector<double> values(static_cast<std::size_t>(m));
  const double near_threshold = std::max(1e-2, 100.0 * tol);
  for (Eigen::Index i = 0; i < m; ++i) {
    double f = 0.0;
    grads[static_cast<std::size_t>(i)] = dense_grad(c.constraints[static_cast<std::size_t>(i)], f);
    values[static_cast<std::size_t>(i)] = f;
    rep.log_slack[static_cast<std::size_t>(i)] = -f;
    rep.primal_infeasibility = std::max(rep.primal_infeasibility, f);
    if (-f <= near_threshold) near.push_back(i);
  }

  // Duals minimize ||grad F0 + sum lambda_i grad F_i||^2 + ||lambda_i F_i||^2.
  const auto p = static_cast<Eigen::Index>(near.size());
  MatrixXd A = MatrixXd::Zero(n + p, p);
  VectorXd b = VectorXd::Zero(n + p);
  b.head(n) = -g0;
  for (Eigen::Index c_idx = 0; c_idx < p; ++c_idx) {
    const auto i = static_cast<std::size_t>(near[static_cast<std::size_t>(c_idx)]);
    A.block(0, c_idx, n, 1) = grads[i];
    A(n + c_idx, c_idx) = values[i];
  }
  const VectorXd lam = nnls(A, b);
  VectorXd r = g0;
  for (Eigen::Index c_idx = 0; c_idx < p; ++c_idx) {
    const auto i = static_cast<std::size_t>(near[static_cast<std::size_t>(c_idx)]);
    rep.duals[i] = lam(c_idx);
    r += lam(c_idx) * grads[i];
    rep.complementarity = std::max(rep.complementarity, std::abs(lam(c_idx) * values[i]));
  }
  rep.stationarity = r.cwiseAbs().maxCoeff();
  rep.passed = rep.residual() <= tol;
  return rep;
}

}  // namespace cfurllc::gp
