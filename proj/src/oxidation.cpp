#include "tubeox/oxidation.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <tuple>

#include <fmt/format.h>

#include "tubeox/errors.hpp"

namespace tubeox {

namespace {
constexpr double kConcentrationSlack = 1e-8;
}

void KineticsParams::check() const {
  if (!(sh1 > 0)) throw ConfigError(fmt::format("sh1 must be positive (got {})", sh1));
  if (!(sh2_inv >= 0)) throw ConfigError(fmt::format("sh2_inv must be non-negative (got {})", sh2_inv));
  if (!(pe > 0)) throw ConfigError(fmt::format("pe must be positive (got {})", pe));
}

RobinCoefficient robin_coefficient(double d, const KineticsParams& k) {
  const double a = 1.0 / (1.0 / k.sh1 + k.sh2_inv * d);
  return {a, -k.sh2_inv * a * a};
}

// ---------------------------------------------------------------- model

TransportModel::TransportModel(const P2Mesh& mesh, const FlowField& flow, double pe) : mesh_(&mesh), pe_(pe) {
  if (!(pe > 0)) throw ConfigError("pe must be positive");
  const DofMap p1 = DofMap::p1(mesh);
  const VelocityField vel{&mesh, &flow.u};

  mass_ = assemble(Form{FormKind::Mass}, mesh, p1);
  Form diff{FormKind::Diffusion, 1.0 / pe};
  Form conv{FormKind::Convection};
  conv.velocity = vel;
  Form out{FormKind::OutflowFlux};
  out.tags = {BoundaryTag::outlet()};
  out.velocity = vel;
  // −∫ c u·∇s is the transpose of ∫ (u·∇c) s.
  const SparseMatrix c_t = assemble(conv, mesh, p1).transpose();
  transport_ = assemble(diff, mesh, p1).combine(1.0, c_t, -1.0).combine(1.0, assemble(out, mesh, p1), 1.0);

  wall_ = tube_wall_nodes(mesh);
  inlet_ = boundary_nodes(mesh, BoundaryTag::inlet()).nodes;

  const Tabulation& tab = tabulate(1);
  for (std::size_t t = 0; t < mesh.base.triangle_count(); ++t) {
    const ElementGeometry g = element_geometry(mesh.base, t);
    const double h = std::max({distance(g.v[0], g.v[1]), distance(g.v[1], g.v[2]), distance(g.v[2], g.v[0])});
    const Vec2 u = vel.at_element(t, tab.p2[0]);
    cell_peclet_ = std::max(cell_peclet_, norm(u) * h * pe / 2);
  }
}

OxidationState TransportModel::initial_state() const {
  OxidationState s;
  s.c = Vector::Zero(static_cast<Eigen::Index>(concentration_dofs()));
  for (int v : inlet_) s.c[v] = 1.0;
  s.d = Vector::Zero(static_cast<Eigen::Index>(film_dofs()));
  return s;
}

// ---------------------------------------------------------------- step

TransportStep::TransportStep(const TransportModel& model, const KineticsParams& k, double tau, double theta)
    : model_(&model), k_(k), tau_(tau), theta_(theta) {
  k_.check();
  if (!(tau > 0)) throw ConfigError("time step must be positive");
  if (!(theta > 0 && theta <= 1)) throw ConfigError("theta must lie in (0, 1]");
  const std::size_t nv = model.concentration_dofs();
  const std::size_t nw = model.film_dofs();
  const auto& wall = model.wall();

  a_ = model.mass().combine(1.0 / tau, model.transport(), theta);
  inlet_mask_.assign(nv, 0);
  for (int v : model.inlet_vertices()) inlet_mask_[v] = 1;

  SparsityBuilder sb(nv + nw, nv + nw);
  for (std::size_t i = 0; i < nv; ++i)
    for (std::size_t p = a_.row_ptr[i]; p < a_.row_ptr[i + 1]; ++p) sb.add(static_cast<int>(i), a_.col[p]);
  for (std::size_t k2 = 0; k2 < nw; ++k2) {
    const int v = wall.nodes[k2];
    const int fd = static_cast<int>(nv + k2);
    sb.add(v, v);
    sb.add(v, fd);
    sb.add(fd, v);
    sb.add(fd, fd);
  }
  base_ = sb.build();
  for (std::size_t i = 0; i < nv; ++i) {
    if (inlet_mask_[i]) {
      base_.val[base_.find(i, static_cast<int>(i))] = 1.0;
      continue;
    }
    for (std::size_t p = a_.row_ptr[i]; p < a_.row_ptr[i + 1]; ++p)
      if (!inlet_mask_[a_.col[p]]) base_.add(i, a_.col[p], a_.val[p]);
  }
  for (std::size_t k2 = 0; k2 < nw; ++k2) {
    const int v = wall.nodes[k2];
    const int fd = static_cast<int>(nv + k2);
    wall_diag_.push_back(static_cast<std::size_t>(base_.find(v, v)));
    cd_pos_.push_back(static_cast<std::size_t>(base_.find(v, fd)));
    dc_pos_.push_back(static_cast<std::size_t>(base_.find(fd, v)));
    dd_pos_.push_back(static_cast<std::size_t>(base_.find(fd, fd)));
  }
  jac_ = base_;
}

std::size_t TransportStep::size() const { return model_->concentration_dofs() + model_->film_dofs(); }

Vector TransportStep::stack(const OxidationState& s) const {
  Vector z(static_cast<Eigen::Index>(size()));
  z << s.c, s.d;
  return z;
}

void TransportStep::set_previous(const OxidationState& prev) {
  prev_ = prev;
  rhs_prev_ = model_->transport().multiply(prev.c) * (1.0 - theta_) - model_->mass().multiply(prev.c) / tau_;
}

Vector TransportStep::residual(const Vector& z) const {
  const auto nv = static_cast<Eigen::Index>(model_->concentration_dofs());
  const auto& wall = model_->wall();
  const Vector c = z.head(nv);
  Vector r = Vector::Zero(z.size());
  r.head(nv) = a_.multiply(c) + rhs_prev_;
  for (std::size_t k2 = 0; k2 < wall.size(); ++k2) {
    const int v = wall.nodes[k2];
    const auto fd = nv + static_cast<Eigen::Index>(k2);
    const double w = wall.weights[k2];
    const double dm = theta_ * z[fd] + (1 - theta_) * prev_.d[static_cast<Eigen::Index>(k2)];
    const double cm = theta_ * c[v] + (1 - theta_) * prev_.c[v];
    const double alpha = robin_coefficient(dm, k_).value;
    if (!sink_off_) r[v] += w * alpha * cm;
    r[fd] = w * ((z[fd] - prev_.d[static_cast<Eigen::Index>(k2)]) / tau_ - alpha * cm);
  }
  for (std::size_t i = 0; i < inlet_mask_.size(); ++i)
    if (inlet_mask_[i]) r[static_cast<Eigen::Index>(i)] = 0.0;
  return r;
}

const SparseMatrix& TransportStep::jacobian(const Vector& z) {
  const auto nv = static_cast<Eigen::Index>(model_->concentration_dofs());
  const auto& wall = model_->wall();
  std::copy(base_.val.begin(), base_.val.end(), jac_.val.begin());
  for (std::size_t k2 = 0; k2 < wall.size(); ++k2) {
    const int v = wall.nodes[k2];
    const auto fd = nv + static_cast<Eigen::Index>(k2);
    const double w = wall.weights[k2];
    const double dm = theta_ * z[fd] + (1 - theta_) * prev_.d[static_cast<Eigen::Index>(k2)];
    const double cm = theta_ * z[v] + (1 - theta_) * prev_.c[v];
    const auto rc = robin_coefficient(dm, k_);
    const bool inlet = inlet_mask_[v] != 0;
    if (!sink_off_ && !inlet) {
      jac_.val[wall_diag_[k2]] += theta_ * w * rc.value;
      jac_.val[cd_pos_[k2]] += theta_ * w * rc.derivative * cm;
    }
    if (!inlet) jac_.val[dc_pos_[k2]] += -theta_ * w * rc.value;
    jac_.val[dd_pos_[k2]] += w * (1.0 / tau_ - theta_ * rc.derivative * cm);
  }
  return jac_;
}

Vector TransportStep::newton_correction(const Vector& z, const Vector& r) {
  if (method_ == LinearMethod::Gmres) {
    GmresOptions g;
    g.tol = 1e-13;
    g.fallback_to_lu = true;
    return gmres_solve(jacobian(z), -r, g).first;
  }
  const bool linear = k_.sh2_inv == 0.0;
  if (!(linear && lu_fixed_)) {
    lu_.factor(jacobian(z));
    lu_fixed_ = linear;
  } else {
    jacobian(z);
  }
  return lu_solve(lu_, jac_, -r).first;
}

// ---------------------------------------------------------------- film

Vector film_residual(const Vector& d_prev, const Vector& d_next, const Vector& c_wall_prev, const Vector& c_wall_next,
                     const Vector& weights, double tau, const KineticsParams& k) {
  Vector r(d_next.size());
  for (Eigen::Index i = 0; i < d_next.size(); ++i) {
    const double alpha = robin_coefficient(0.5 * (d_next[i] + d_prev[i]), k).value;
    r[i] = weights[i] * ((d_next[i] - d_prev[i]) / tau - alpha * 0.5 * (c_wall_next[i] + c_wall_prev[i]));
  }
  return r;
}

double film_step(double d_prev, double c_prev, double c_next, double tau, const KineticsParams& k) {
  const double cm = 0.5 * (c_prev + c_next);
  double d = d_prev + tau * robin_coefficient(d_prev, k).value * cm;
  for (int it = 0; it < 50; ++it) {
    const auto rc = robin_coefficient(0.5 * (d + d_prev), k);
    const double f = (d - d_prev) / tau - rc.value * cm;
    const double df = 1.0 / tau - 0.5 * rc.derivative * cm;
    const double step = f / df;
    d -= step;
    if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(d))) break;
  }
  return d;
}

// ---------------------------------------------------------------- Newton

std::pair<OxidationState, StepReport> coupled_newton_step(TransportStep& step, const OxidationState& prev,
                                                          const StepOptions& options) {
  step.set_previous(prev);
  const auto nv = static_cast<Eigen::Index>(step.model().concentration_dofs());
  StepReport rep;
  rep.tau = step.tau();
  Vector z = step.stack(prev);
  Vector r = step.residual(z);
  const double r0 = r.norm();
  rep.residuals.push_back(r0);
  auto done = [&] { return rep.residuals.back() <= options.atol || rep.residuals.back() <= options.rtol * r0; };
  rep.converged = done();
  while (!rep.converged && rep.iterations < options.max_iterations) {
    z += step.newton_correction(z, r);
    r = step.residual(z);
    ++rep.iterations;
    rep.residuals.push_back(r.norm());
    if (!std::isfinite(rep.residuals.back())) break;
    rep.converged = done();
  }
  if (!rep.converged)
    throw NonConvergenceError(fmt::format("transport step at t = {} did not converge in {} Newton iterations",
                                          prev.t + step.tau(), options.max_iterations),
                              rep.residuals);

  OxidationState next;
  next.c = z.head(nv);
  next.d = z.tail(z.size() - nv);
  next.t = prev.t + step.tau();
  // The discrete maximum principle holds only up to kConcentrationSlack, so the
  // film may lose at most Sh1 * slack * t; anything below that is rejected.
  const double floor = -kConcentrationSlack * step.kinetics().sh1 * next.t;
  for (Eigen::Index i = 0; i < next.d.size(); ++i)
    if (next.d[i] < floor)
      throw StepRejectedError(fmt::format("negative film thickness {:.3e} at wall node {} (t = {})", next.d[i],
                                          step.model().wall().nodes[static_cast<std::size_t>(i)], next.t));

  const auto& wall = step.model().wall();
  for (std::size_t k2 = 0; k2 < wall.size(); ++k2)
    rep.absorbed += wall.weights[k2] * (next.d[static_cast<Eigen::Index>(k2)] - prev.d[static_cast<Eigen::Index>(k2)]);
  return {std::move(next), rep};
}

TransientResult run_transient(const TransportModel& model, const KineticsParams& k, double tau, double t_end,
                              const std::vector<double>& snapshot_times, const TransientObserver& observer,
                              const StepOptions& options) {
  if (!(tau > 0)) throw ConfigError("time step must be positive");
  if (!(t_end >= 0)) throw ConfigError("final time must be non-negative");
  const double ratio = t_end / tau;
  const long n_steps = std::lround(ratio);
  if (std::abs(ratio - static_cast<double>(n_steps)) > 1e-12 * std::max(1.0, ratio))
    throw ConfigError(fmt::format("time step {} does not divide the final time {}", tau, t_end));

  TransientResult out;
  OxidationState state = model.initial_state();
  auto snapshot_due = [&](long n) {
    for (double ts : snapshot_times)
      if (std::lround(ts / tau) == n) return true;
    return false;
  };
  if (observer) observer(state, nullptr);
  if (snapshot_due(0)) out.snapshots.push_back(state);

  TransportStep step(model, k, tau);
  step.set_linear_method(options.linear);
  std::unique_ptr<TransportStep> half;
  if (options.implicit_startup > 0) {
    half = std::make_unique<TransportStep>(model, k, 0.5 * tau, 1.0);
    half->set_linear_method(options.linear);
  }
  for (long n = 1; n <= n_steps; ++n) {
    try {
      OxidationState next;
      StepReport rep;
      if (n <= options.implicit_startup) {
        auto [mid, r1] = coupled_newton_step(*half, state, options);
        std::tie(next, rep) = coupled_newton_step(*half, mid, options);
        rep.iterations += r1.iterations;
        rep.absorbed += r1.absorbed;
        rep.residuals.insert(rep.residuals.begin(), r1.residuals.begin(), r1.residuals.end());
        rep.tau = tau;
      } else {
        std::tie(next, rep) = coupled_newton_step(step, state, options);
      }
      rep.step = static_cast<int>(n);
      next.t = static_cast<double>(n) * tau;
      state = std::move(next);
      if (observer) observer(state, &rep);
      out.steps.push_back(std::move(rep));
    } catch (const NonConvergenceError& e) {
      throw NonConvergenceError(fmt::format("step {}: {}", n, e.what()), e.residuals());
    } catch (const StepRejectedError& e) {
      throw StepRejectedError(fmt::format("step {}: {}", n, e.what()));
    }
    if (snapshot_due(n)) out.snapshots.push_back(state);
  }
  out.final_state = std::move(state);
  return out;
}

}  // namespace tubeox
