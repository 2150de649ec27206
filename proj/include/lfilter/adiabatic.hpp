#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "lfilter/circuit.hpp"
#include "lfilter/expm.hpp"
#include "lfilter/filter.hpp"
#include "lfilter/observables.hpp"
#include "lfilter/schedule.hpp"
#include "lfilter/sparse_operator.hpp"
#include "lfilter/state.hpp"

namespace lfilter {

/// Diagnostics collected along an evolution. Parent energies are recorded in
/// both conventions: the instantaneous rescaled generator at the checkpoint,
/// and the raw parent Hamiltonian at the final filter width.
struct TrajectoryPoint {
  int step = 0;
  double s = 0.0;
  double delta_inv = 0.0;
  double energy_rescaled = 0.0;   // <H_par(s)> / (1 + delta_inv(s)^2)
  double energy_raw_final = 0.0;  // <H_par(delta_inv_max)>, unrescaled
  double fidelity = 0.0;          // vs the exact filtered state (NaN if unknown)
  double norm = 0.0;
  std::optional<Vector> state;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  Vector final_state;
};

struct EvolveOptions {
  double expm_tol = 1e-9;
  int checkpoint_every = 0;  // 0 = auto, ~20 checkpoints
  const Vector* reference = nullptr;  // exact filtered state, else computed where possible
  int explicit_max_sites = 14;
  bool store_states = false;
};

namespace detail {

struct ScheduledParentOp {
  const ParentHamiltonian* ph;
  double alpha;
  Eigen::Index dim() const { return ph->dim(); }
  Vector apply(const Vector& v) const {
    return ph->apply_at(alpha, v) * (1.0 / (1.0 + alpha * alpha));
  }
};

inline int auto_stride(int steps, int checkpoint_every) {
  if (checkpoint_every > 0) return checkpoint_every;
  return std::max(1, steps / 20);
}

}  // namespace detail

/// Discrete adiabatic evolution of the product state under the rescaled
/// parent Hamiltonian: prod_l exp(-i tau Hr(delta_inv(l tau / T))) |psi>,
/// with the schedule evaluated at the end of each step.
inline Trajectory adiabatic_evolve(const Vector& psi, std::span<const PauliString> h_terms,
                                   std::span<const PauliString> projector_terms, double e_f,
                                   const ScheduleSpec& sched, EvolveOptions opts = {}) {
  const int steps = sched.steps();
  FilterParams fp(e_f, sched.delta_inv_max);
  ParentBuildOptions build_opts;
  build_opts.explicit_max_sites = opts.explicit_max_sites;
  build_opts.warn_stream = nullptr;
  const ParentHamiltonian ph = build_parent(h_terms, projector_terms, fp, build_opts);
  if (psi.size() != ph.dim()) throw std::invalid_argument("adiabatic_evolve: dimension mismatch");

  // the initial state must be annihilated by the projector sum
  {
    const double p0 = psi.dot(ph.projector_sum.apply(psi)).real() / psi.squaredNorm();
    if (std::abs(p0) > 1e-8 * ph.n_sites)
      throw std::invalid_argument("adiabatic_evolve: psi is not the projector-sum ground state");
  }

  Vector reference;
  if (opts.reference) {
    reference = *opts.reference;
  } else {
    reference = filtered_state(ph.hamiltonian, psi, fp);
  }

  const int stride = detail::auto_stride(steps, opts.checkpoint_every);
  Trajectory traj;

  auto record = [&](int step, double s, double alpha, const Vector& state) {
    TrajectoryPoint pt;
    pt.step = step;
    pt.s = s;
    pt.delta_inv = alpha;
    const double nsq = state.squaredNorm();
    pt.energy_rescaled =
        state.dot(ph.apply_at(alpha, state)).real() / nsq / (1.0 + alpha * alpha);
    pt.energy_raw_final = state.dot(ph.apply_raw(state)).real() / nsq;
    pt.fidelity = fidelity(reference, state);
    pt.norm = std::sqrt(nsq);
    if (opts.store_states) pt.state = state;
    traj.points.push_back(std::move(pt));
  };

  Vector state = psi;
  record(0, 0.0, sched.value_at(0.0), state);
  for (int l = 1; l <= steps; ++l) {
    const double s = static_cast<double>(l) / steps;
    const double alpha = sched.value_at(s);
    detail::ScheduledParentOp op{&ph, alpha};
    state = expm_apply(op, state, sched.tau, opts.expm_tol);
    if (l % stride == 0 || l == steps) record(l, s, alpha, state);
  }
  traj.final_state = std::move(state);
  return traj;
}

inline Trajectory adiabatic_evolve(const Vector& psi, const std::vector<PauliString>& h_terms,
                                   const std::vector<PauliString>& projector_terms, double e_f,
                                   const ScheduleSpec& sched, EvolveOptions opts = {}) {
  return adiabatic_evolve(psi, std::span<const PauliString>(h_terms),
                          std::span<const PauliString>(projector_terms), e_f, sched, opts);
}

namespace detail {

struct CompiledRotation {
  CompiledPauli axis;
  double coeff;  // real coefficient of the string
  int part;      // 1, 2 or 3: which delta_inv power it scales with
  bool identity;
};

/// v <- exp(-i angle S) v with S a unit Pauli string: cos(a) v - i sin(a) S v.
inline void apply_rotation(const CompiledRotation& rot, double angle, Vector& v, Vector& tmp) {
  if (rot.identity) {
    v *= std::exp(Complex(0.0, -angle));
    return;
  }
  const double c = std::cos(angle), s = std::sin(angle);
  const auto dim = v.size();
  tmp.setZero();
  for (Eigen::Index b = 0; b < dim; ++b) {
    const auto src = static_cast<std::uint64_t>(b);
    tmp[static_cast<Eigen::Index>(rot.axis.target(src))] += rot.axis.amplitude(src) * v[b];
  }
  v = c * v - Complex(0.0, s) * tmp;
}

}  // namespace detail

/// First-order Trotterized version of the same evolution: one rotation per
/// decomposition string per step, applied in the decomposition's fixed order.
/// Coefficients of the commutator and sandwich parts are rescaled from the
/// decomposition's width to the scheduled width at each step.
inline Trajectory trotter_evolve(const Vector& psi, const TermDecomposition& dec,
                                 const ScheduleSpec& sched, int order = 1,
                                 EvolveOptions opts = {}) {
  if (order != 1) throw std::invalid_argument("trotter_evolve: only first order is implemented");
  const int steps = sched.steps();
  const Eigen::Index dim = dim_of_sites(dec.n_sites);
  if (psi.size() != dim) throw std::invalid_argument("trotter_evolve: dimension mismatch");
  const double alpha_ref = dec.params.delta_inv;
  if (sched.delta_inv_max > 0.0 && alpha_ref == 0.0)
    throw std::invalid_argument(
        "trotter_evolve: decomposition was built at delta_inv = 0 but the schedule is not");

  std::vector<detail::CompiledRotation> rots;
  auto add_part = [&](const std::vector<PauliString>& part, int which) {
    for (const auto& s : part) {
      PauliString axis = s;
      axis.coeff = Complex(1.0, 0.0);
      rots.push_back({CompiledPauli(axis), s.coeff.real(), which, s.is_identity()});
    }
  };
  add_part(dec.part1, 1);
  add_part(dec.part2, 2);
  add_part(dec.part3, 3);

  const int stride = detail::auto_stride(steps, opts.checkpoint_every);
  Trajectory traj;
  Vector state = psi;
  Vector tmp(dim);

  // <H_par(alpha)> via the string expansion, used for checkpoint diagnostics
  auto parent_energy = [&](const Vector& v, double alpha) -> double {
    const double r1 = 1.0;
    const double r2 = alpha_ref > 0.0 ? alpha / alpha_ref : 0.0;
    const double r3 = r2 * r2;
    Vector acc = Vector::Zero(dim);
    for (const auto& rot : rots) {
      const double scale = rot.part == 1 ? r1 : (rot.part == 2 ? r2 : r3);
      if (scale == 0.0) continue;
      const double c = rot.coeff * scale;
      if (rot.identity) {
        acc += c * v;
        continue;
      }
      for (Eigen::Index b = 0; b < dim; ++b) {
        const auto src = static_cast<std::uint64_t>(b);
        acc[static_cast<Eigen::Index>(rot.axis.target(src))] += c * rot.axis.amplitude(src) * v[b];
      }
    }
    return v.dot(acc).real() / v.squaredNorm();
  };

  auto record = [&](int step, double s, double alpha) {
    TrajectoryPoint pt;
    pt.step = step;
    pt.s = s;
    pt.delta_inv = alpha;
    pt.energy_rescaled = parent_energy(state, alpha) / (1.0 + alpha * alpha);
    pt.energy_raw_final = parent_energy(state, sched.delta_inv_max);
    pt.fidelity = opts.reference ? fidelity(*opts.reference, state)
                                 : std::numeric_limits<double>::quiet_NaN();
    pt.norm = state.norm();
    if (opts.store_states) pt.state = state;
    traj.points.push_back(std::move(pt));
  };

  record(0, 0.0, sched.value_at(0.0));
  for (int l = 1; l <= steps; ++l) {
    const double s = static_cast<double>(l) / steps;
    const double alpha = sched.value_at(s);
    const double rescale = 1.0 / (1.0 + alpha * alpha);
    const double r2 = alpha_ref > 0.0 ? alpha / alpha_ref : 0.0;
    const double r3 = r2 * r2;
    for (const auto& rot : rots) {
      const double scale = rot.part == 1 ? 1.0 : (rot.part == 2 ? r2 : r3);
      if (scale == 0.0) continue;
      detail::apply_rotation(rot, sched.tau * rot.coeff * scale * rescale, state, tmp);
    }
    if (l % stride == 0 || l == steps) record(l, s, alpha);
  }
  traj.final_state = std::move(state);
  return traj;
}

}  // namespace lfilter
