#pragma once

#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cfurllc::gp {

/// c * prod_j x_j^{a_j} with c > 0. The coefficient is kept in log form so
/// products of many large factors stay representable.
struct Monomial {
  double log_coeff = 0.0;
  std::vector<std::pair<int, double>> exponents;  // sorted by variable id

  static Monomial constant(double c);
  static Monomial variable(int id, double power = 1.0);

  double coeff() const;
  double eval(std::span<const double> x) const;
  double log_eval(std::span<const double> y) const;  // y = log x

  Monomial& operator*=(const Monomial& other);
  Monomial pow(double p) const;
  Monomial inverse() const { return pow(-1.0); }
  Monomial scaled(double c) const;
};

Monomial operator*(Monomial a, const Monomial& b);

struct Posynomial {
  std::vector<Monomial> terms;

  Posynomial() = default;
  Posynomial(Monomial m) { terms.push_back(std::move(m)); }  // NOLINT implicit

  Posynomial& operator+=(const Posynomial& other);
  Posynomial& operator*=(const Monomial& m);
  double eval(std::span<const double> x) const;
};

Posynomial operator+(Posynomial a, const Posynomial& b);
Posynomial operator*(Posynomial a, const Monomial& m);
Posynomial operator*(const Posynomial& a, const Posynomial& b);

struct Variable {
  std::string name;
  double lower = 0.0;  // 0 means unbounded below
  double upper = std::numeric_limits<double>::infinity();
};

/// minimize objective(x) s.t. constraint_i(x) <= 1, lower <= x <= upper, x > 0.
class Program {
 public:
  int add_variable(std::string name, double lower = 0.0,
                   double upper = std::numeric_limits<double>::infinity());
  void set_objective(Posynomial objective) { objective_ = std::move(objective); }
  void add_constraint(Posynomial constraint, std::string label = {});

  int num_variables() const { return static_cast<int>(variables_.size()); }
  const std::vector<Variable>& variables() const { return variables_; }
  const Posynomial& objective() const { return objective_; }
  const std::vector<Posynomial>& constraints() const { return constraints_; }
  const std::vector<std::string>& labels() const { return labels_; }

  /// Throws std::invalid_argument if a term references an undeclared
  /// variable, the objective is empty or there are no variables.
  void validate() const;

 private:
  std::vector<Variable> variables_;
  Posynomial objective_;
  std::vector<Posynomial> constraints_;
  std::vector<std::string> labels_;
};

enum class Status { kOptimal, kInfeasible, kUnbounded, kMaxIter };
const char* to_string(Status s);

struct Options {
  double tol = 1e-8;
  int max_newton_steps = 2000;
  /// Starting point in x-space; empty means x = 1 (clamped into bounds).
  std::vector<double> initial;
};

/// Per-constraint slack is -log(posynomial) (>= 0 when satisfied). Bound
/// constraints follow the user constraints, lower then upper per variable.
struct KktReport {
  std::vector<double> log_slack;
  std::vector<double> duals;
  double stationarity = 0.0;
  double complementarity = 0.0;
  double primal_infeasibility = 0.0;
  bool passed = false;

  double residual() const;
};

struct Solution {
  Status status = Status::kMaxIter;
  std::vector<double> x;
  double objective = 0.0;
  std::vector<double> duals;  // same layout as KktReport
  int newton_steps = 0;
  double phase1_value = 0.0;  // max log-constraint value found by phase 1
  KktReport kkt;
};

Solution solve(const Program& program, const Options& options = {});

KktReport check_kkt(const Program& program, std::span<const double> x, double tol);

}  // namespace cfurllc::gp
