#pragma once

#include <Eigen/SparseLU>
#include <memory>

#include "isq/operators.hpp"

namespace isq {

enum class Direction { BackwardFromT, ForwardFromZero };

// Backward problems follow (d/dt + A) u = F with u(T) given; forward problems follow
// (d/dt - A) v = G with v(0) given. Fields live on interior unknowns and the returned
// trajectory is indexed by time level, level k at t = k dt.
struct EvolutionProblem {
  const TwistedOperator* op = nullptr;
  Direction direction = Direction::BackwardFromT;
  Field data;
  TimeField forcing;  // one field per level, or empty
  TimeGrid time;
};

enum class StepKind { Euler, CrankNicolson, HalfEulerPair };

// Time stepper for du/ds = A u + s(s); factorizations are computed once.
class Stepper {
 public:
  Stepper(const TwistedOperator& op, const TimeGrid& grid);

  // Kinds of steps 1..N in propagation order.
  std::vector<StepKind> kinds() const;
  // One step of size dt from u with sources at the old, mid and new times.
  Field step(StepKind kind, const Field& u, const Field* s_old, const Field* s_mid, const Field* s_new) const;
  // Steps from u0 through all N steps; sources are indexed by propagation level. With
  // reversed_kinds the kind sequence runs backwards, which is what an adjoint sweep needs.
  Field propagate(const Field& u0, const TimeField& sources, std::vector<Field>* levels, bool reversed_kinds) const;

  const TimeGrid& grid() const { return grid_; }
  const TwistedOperator& op() const { return *op_; }

 private:
  const TwistedOperator* op_;
  TimeGrid grid_;
  SpMat A_;
  std::shared_ptr<Eigen::SparseLU<SpMat>> full_, half_;
};

// Returns levels 0..N (t = k dt). NaN detection throws with the step index.
TimeField solve(const EvolutionProblem& prob);

struct EnergyLedger {
  std::vector<double> t, l2, h1, twisted, second;  // squared norms per level
  double sup_l2 = 0.0;
  double twisted_time_integral = 0.0;
  double second_time_integral = 0.0;
  double sup_h1 = 0.0;
  double data_l2 = 0.0, data_h1 = 0.0, forcing_l2 = 0.0;
  double K_mild = 0.0;    // (sup ||u||^2 + int ||y^k grad(y^-k u)||^2) / (||u_T||^2 + ||F||^2)
  double K_strict = 0.0;  // (sup ||grad u||^2 + int ||twisted second||^2) / (||u_T||_{H1}^2 + ||F||^2)
  bool finite = true;
};

EnergyLedger energy_report(const TimeField& u, const TwistedOperator& op, const TimeGrid& grid,
                           const TimeField& forcing = {}, Direction dir = Direction::BackwardFromT);

// max over levels of ||u(t) - e^{(T-t)A} u_T + int_t^T e^{(s-t)A} F ds||_M, with dense
// exponentials and trapezoid quadrature in s.
double duhamel_residual(const TimeField& u, const TwistedOperator& op, const TimeGrid& grid,
                        const TimeField& forcing = {});

}  // namespace isq
