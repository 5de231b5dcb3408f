#include "qmeas/walk.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "qmeas/errors.hpp"

namespace qmeas {

std::pair<ComplexMatrix, ComplexMatrix> step_operators(const HermitianOperator& e,
                                                       double delta) {
  if (delta < 0.0) throw InputError("step_operators: delta must be >= 0");
  EigenSystem es = eigensystem(e);
  const int n = e.dim();
  Eigen::VectorXd c(n), s(n);
  for (int i = 0; i < n; ++i) {
    c[i] = std::cos(delta * es.eigenvalues[i]);
    s[i] = std::sin(delta * es.eigenvalues[i]);
  }
  const ComplexMatrix& u = es.frame.matrix();
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  ComplexMatrix cosm = u * c.asDiagonal() * u.adjoint();
  ComplexMatrix sinm = u * s.asDiagonal() * u.adjoint();
  return {inv_sqrt2 * (cosm - sinm), inv_sqrt2 * (cosm + sinm)};
}

int WalkConfig::boundary_steps() const {
  return static_cast<int>(std::llround(boundary / delta));
}

void WalkConfig::validate(const Tolerances& tol) const {
  if (!(delta > 0.0)) throw InputError("WalkConfig: delta must be positive");
  if (!(boundary > 0.0)) throw InputError("WalkConfig: boundary must be positive");
  const int n_steps = boundary_steps();
  if (n_steps < 1 || std::abs(boundary - n_steps * delta) > 1e-9 * std::max(1.0, boundary))
    throw InputError("WalkConfig: boundary must be an integral multiple of delta");
  if (psi0.size() != schedule.dim())
    throw InputError("WalkConfig: state dimension does not match schedule");
  if (std::abs(std::sqrt(psi0.squaredNorm()) - 1.0) > 1e-12)
    throw InputError("WalkConfig: psi0 must be a unit vector");
  const double slack = 1e-9 * std::max(1.0, boundary);
  if (schedule.x_max() < boundary - slack || schedule.x_min() > -boundary + slack)
    throw InputError("WalkConfig: schedule range does not cover the walk");
  (void)tol;
}

StepTable build_step_table(const ControlSchedule& schedule, double delta, int boundary_n) {
  const int n = schedule.dim();
  StepTable t;
  t.n = n;
  t.boundary = boundary_n;
  t.delta = delta;
  const int sites = 2 * boundary_n - 1;
  t.mplus.resize(static_cast<std::size_t>(sites) * n * n);
  t.mminus.resize(static_cast<std::size_t>(sites) * n * n);
  for (int j = -(boundary_n - 1); j <= boundary_n - 1; ++j) {
    auto [mp, mm] = step_operators(schedule.evaluate(j * delta), delta);
    kernels::cd* dp = t.mplus.data() + static_cast<std::size_t>(j + boundary_n - 1) * n * n;
    kernels::cd* dm = t.mminus.data() + static_cast<std::size_t>(j + boundary_n - 1) * n * n;
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        dp[r * n + c] = mp(r, c);
        dm[r * n + c] = mm(r, c);
      }
  }
  return t;
}

StepOutcome walk_step(double x, const Eigen::VectorXcd& psi, const ControlSchedule& schedule,
                      double delta, SplitMix64& rng) {
  auto [mp, mm] = step_operators(schedule.evaluate(x), delta);
  Eigen::VectorXcd vp = mp * psi;
  Eigen::VectorXcd vm = mm * psi;
  const double pp = vp.squaredNorm();
  const double pm = vm.squaredNorm();
  if (std::abs(pp + pm - psi.squaredNorm()) > 1e-9)
    throw SimulationError("walk_step: step probabilities do not sum to 1");
  StepOutcome out;
  out.p_plus = pp;
  out.p_minus = pm;
  if (rng.uniform() < pp) {
    out.outcome = Outcome::Plus;
    out.x_new = x + delta;
    out.psi = vp / std::sqrt(pp);
  } else {
    out.outcome = Outcome::Minus;
    out.x_new = x - delta;
    out.psi = vm / std::sqrt(pm);
  }
  return out;
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv_step(std::uint64_t h, unsigned char c) {
  h ^= c;
  h *= kFnvPrime;
  return h;
}

}  // namespace

TrajectoryRecord run_trajectory(const WalkConfig& config, const StepTable& table,
                                std::uint64_t index, const Tolerances& tol) {
  const int n = table.n;
  const int nb = table.boundary;
  const std::uint64_t cap =
      tol.runaway_factor * static_cast<std::uint64_t>(nb) * static_cast<std::uint64_t>(nb);
  SplitMix64 rng = stream_rng(config.seed, index);

  Eigen::VectorXcd psi = config.psi0;
  Eigen::VectorXcd scratch(n);
  std::uint64_t checksum = kFnvOffset;
  std::uint64_t steps = 0;
  int j = 0;
  while (std::abs(j) < nb) {
    if (steps >= cap) {
      std::ostringstream os;
      os << "run_trajectory: walk exceeded " << cap << " steps (index " << index << ")";
      throw SimulationError(os.str());
    }
    const double pp = kernels::matvec_norm2(table.plus(j), psi.data(), scratch.data(), n);
    const bool go_plus = rng.uniform() < pp;
    if (!go_plus) kernels::matvec(table.minus(j), psi.data(), scratch.data(), n);
    const double nrm2 = go_plus ? pp : kernels::norm2(scratch.data(), n);
    const double inv = 1.0 / std::sqrt(nrm2);
    for (int i = 0; i < n; ++i) psi[i] = scratch[i] * inv;
    j += go_plus ? 1 : -1;
    checksum = fnv_step(checksum, go_plus ? '+' : '-');
    ++steps;
  }
  TrajectoryRecord rec;
  rec.outcome = j >= nb ? Outcome::Plus : Outcome::Minus;
  rec.steps = steps;
  rec.final_state = psi / std::sqrt(psi.squaredNorm());
  rec.path_checksum = checksum;
  return rec;
}

std::vector<TrajectoryRecord> run_trajectories(const WalkConfig& config,
                                               const Tolerances& tol, int threads) {
  config.validate(tol);
  StepTable table = build_step_table(config.schedule, config.delta, config.boundary_steps());
  const int count = config.trajectories;
  std::vector<TrajectoryRecord> out(count);
  if (count == 0) return out;

  if (threads <= 0) {
    if (const char* env = std::getenv("QMEAS_THREADS")) threads = std::atoi(env);
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 1;
  }
  threads = std::min(threads, count);

  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count || failed.load()) break;
      try {
        out[i] = run_trajectory(config, table, static_cast<std::uint64_t>(i), tol);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lk(error_mutex);
        if (!failed.exchange(true)) first_error = e.what();
        break;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) throw SimulationError(first_error);
  return out;
}

namespace {

// RK4 on dM/ds = dir * eps(dir * s) M, used as the independent route against
// the step-operator product.
ComplexMatrix propagate_ode(const ControlSchedule& schedule, double x_boundary,
                            double delta, double dir) {
  const int n = schedule.dim();
  const int steps = static_cast<int>(std::llround(x_boundary / delta));
  ComplexMatrix m = ComplexMatrix::Identity(n, n);
  auto rhs = [&](double s, const ComplexMatrix& v) -> ComplexMatrix {
    return -dir * (schedule.evaluate(dir * s).matrix() * v);
  };
  const double h = x_boundary / steps;
  for (int j = 0; j < steps; ++j) {
    const double s = j * h;
    ComplexMatrix k1 = rhs(s, m);
    ComplexMatrix k2 = rhs(s + 0.5 * h, m + 0.5 * h * k1);
    ComplexMatrix k3 = rhs(s + 0.5 * h, m + 0.5 * h * k2);
    ComplexMatrix k4 = rhs(s + h, m + h * k3);
    m += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return m;
}

}  // namespace

WalkOperators total_walk_operator(const ControlSchedule& schedule, double x_boundary,
                                  double delta, const Tolerances& tol) {
  (void)tol;
  if (!(delta > 0.0) || !(x_boundary > 0.0))
    throw InputError("total_walk_operator: positive delta and boundary required");
  const int steps = static_cast<int>(std::llround(x_boundary / delta));
  if (steps < 1 || std::abs(x_boundary - steps * delta) > 1e-9 * std::max(1.0, x_boundary))
    throw InputError("total_walk_operator: boundary must be an integral multiple of delta");
  const int n = schedule.dim();

  WalkOperators w;
  w.m_plus = ComplexMatrix::Identity(n, n);
  w.m_minus = ComplexMatrix::Identity(n, n);
  std::vector<kernels::cd> factor(n * n), acc(n * n), tmp(n * n);
  double max_eps_norm = 0.0;
  auto accumulate = [&](ComplexMatrix& total, const ComplexMatrix& f) {
    // total <- f * total via the kernels (row-major copies).
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        factor[r * n + c] = f(r, c);
        acc[r * n + c] = total(r, c);
      }
    kernels::matmul(factor.data(), acc.data(), tmp.data(), n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) total(r, c) = tmp[r * n + c];
  };
  const double sqrt2 = std::sqrt(2.0);
  for (int j = 0; j < steps; ++j) {
    HermitianOperator ep = schedule.evaluate(j * delta);
    HermitianOperator em = schedule.evaluate(-j * delta);
    max_eps_norm = std::max(max_eps_norm, ep.matrix().norm());
    max_eps_norm = std::max(max_eps_norm, em.matrix().norm());
    auto [mp, mm_unused] = step_operators(ep, delta);
    auto [mp_unused, mm] = step_operators(em, delta);
    accumulate(w.m_plus, sqrt2 * mp);
    accumulate(w.m_minus, sqrt2 * mm);
  }

  ComplexMatrix ode_plus = propagate_ode(schedule, x_boundary, delta, +1.0);
  ComplexMatrix ode_minus = propagate_ode(schedule, x_boundary, delta, -1.0);
  w.ode_gap = std::max((w.m_plus - ode_plus).norm(), (w.m_minus - ode_minus).norm());
  // The product carries an O(delta) normalization drift relative to the bare
  // propagation equation; the bound scales accordingly.
  const double growth = std::max({w.m_plus.norm(), w.m_minus.norm(), 1.0});
  const double gap_tol =
      50.0 * delta * x_boundary * (1.0 + max_eps_norm) * (1.0 + max_eps_norm) * growth;
  if (w.ode_gap > gap_tol) {
    std::ostringstream os;
    os << "total_walk_operator: product and propagation integration disagree ("
       << w.ode_gap << " > " << gap_tol << ")";
    throw SimulationError(os.str());
  }

  if (schedule.kind() == ControlSchedule::Kind::ClosedForm) {
    const ComplexMatrix& f = schedule.frame().matrix();
    ComplexMatrix rp = f.adjoint() * w.m_plus * f;
    ComplexMatrix rm = f.adjoint() * w.m_minus * f;
    w.n_diag_plus = rp.diagonal();
    w.n_diag_minus = rm.diagonal();
    ComplexMatrix op = rp, om = rm;
    op.diagonal().setZero();
    om.diagonal().setZero();
    w.offdiag_mass = std::max(op.norm(), om.norm());
    w.diag_frame = schedule.frame();
  }
  return w;
}

MeasurementPair endpoint_pair(const WalkOperators& w, const Tolerances& tol) {
  const int n = static_cast<int>(w.m_plus.rows());
  ComplexMatrix a = w.m_plus.adjoint() * w.m_plus;
  ComplexMatrix b = w.m_minus.adjoint() * w.m_minus;
  const double aa = hs_inner(a, a).real();
  const double ab = hs_inner(a, b).real();
  const double bb = hs_inner(b, b).real();
  const double ra = a.trace().real();
  const double rb = b.trace().real();

  double u, v;
  const double det = aa * bb - ab * ab;
  if (det > 1e-12 * aa * bb) {
    u = (bb * ra - ab * rb) / det;
    v = (aa * rb - ab * ra) / det;
  } else {
    // Products proportional (e.g. identity walks): minimal-norm solution.
    u = v = (ra + rb) / (aa + 2.0 * ab + bb);
  }
  if (u < 0.0 || v < 0.0) {
    if (u > -1e-12 && v > -1e-12) {
      u = std::max(u, 0.0);
      v = std::max(v, 0.0);
    } else {
      throw SimulationError("endpoint_pair: normalization failure (negative weights)");
    }
  }
  MeasurementPair out;
  out.completeness_residual =
      (u * a + v * b - ComplexMatrix::Identity(n, n)).norm();
  if (out.completeness_residual > tol.endpoint_residual) {
    std::ostringstream os;
    os << "endpoint_pair: normalization failure, completeness residual "
       << out.completeness_residual << " (non-reversible schedule?)";
    throw SimulationError(os.str());
  }
  out.a = std::sqrt(u);
  out.b = std::sqrt(v);
  out.m1 = out.a * w.m_plus;
  out.m2 = out.b * w.m_minus;
  return out;
}

namespace {

struct BucketList {
  std::vector<PathBucket> buckets;
};

double log2_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log2(1.0 + std::exp2(b - a));
}

// Merge (state, prob, log2mult) into the list at merge_tol. Returns the
// smallest infidelity to a pre-existing bucket when a new one had to be
// created (so callers can tell genuine new states from slow drift), or -1 on
// a plain merge.
double merge_into(std::vector<PathBucket>& list, const Eigen::VectorXcd& state, double prob,
                  double log2mult, double merge_tol) {
  double nearest = 2.0;
  for (auto& b : list) {
    const std::complex<double> ov =
        kernels::dot(b.state.data(), state.data(), static_cast<int>(state.size()));
    const double infid = 1.0 - std::norm(ov);
    if (infid <= merge_tol) {
      b.probability += prob;
      b.log2_multiplicity = log2_add(b.log2_multiplicity, log2mult);
      return -1.0;
    }
    nearest = std::min(nearest, infid);
  }
  list.push_back(PathBucket{state, prob, log2mult});
  return nearest;
}

}  // namespace

EnumerateResult enumerate_paths(const WalkConfig& config, const Tolerances& tol,
                                const EnumerateOptions& opts) {
  config.validate(tol);
  const int nb = config.boundary_steps();
  const int n = static_cast<int>(config.psi0.size());
  StepTable table = build_step_table(config.schedule, config.delta, nb);
  const std::uint64_t max_steps =
      opts.max_steps ? opts.max_steps
                     : tol.runaway_factor * static_cast<std::uint64_t>(nb) * nb;

  const int sites = 2 * nb - 1;  // live sites j in [-(nb-1), nb-1]
  std::vector<BucketList> live(sites);
  auto site_index = [&](int j) { return j + nb - 1; };
  live[site_index(0)].buckets.push_back(PathBucket{config.psi0, 1.0, 0.0});

  EnumerateResult res;
  // Last observed single-bucket representative per site, for stability
  // detection across the parity alternation.
  std::vector<Eigen::VectorXcd> last_state(sites);
  std::vector<char> seen(sites, 0);
  std::uint64_t last_change = 0;
  const bool allow_chain_solve = nb > 12;

  Eigen::VectorXcd vp(n), vm(n);
  std::uint64_t sweep = 0;
  double live_mass = 1.0;
  while (live_mass > opts.tail_stop && sweep < max_steps) {
    ++sweep;
    std::vector<BucketList> next(sites);
    bool structural_change = false;
    std::size_t total_buckets = 0;

    // A bucket creation is structural only when the state is genuinely new at
    // the stability scale; slow flow drift at the merge scale is not. Live
    // lists start empty every sweep, so their first bucket is judged by the
    // per-site representative below, not here.
    auto track_live = [&](const std::vector<PathBucket>& list, double created_infid) {
      if (created_infid >= 0.0 && list.size() > 1 &&
          created_infid > tol.stability_infidelity)
        structural_change = true;
    };
    auto track_absorbed = [&](const std::vector<PathBucket>& list, double created_infid) {
      if (created_infid >= 0.0 &&
          (list.size() == 1 || created_infid > tol.stability_infidelity))
        structural_change = true;
    };
    for (int j = -(nb - 1); j <= nb - 1; ++j) {
      BucketList& src = live[site_index(j)];
      if (src.buckets.empty()) continue;
      for (const PathBucket& bucket : src.buckets) {
        const double pp =
            kernels::matvec_norm2(table.plus(j), bucket.state.data(), vp.data(), n);
        const double pm =
            kernels::matvec_norm2(table.minus(j), bucket.state.data(), vm.data(), n);
        if (bucket.probability * pp > 1e-300) {
          Eigen::VectorXcd sp = vp / std::sqrt(pp);
          const double mass = bucket.probability * pp;
          if (j + 1 >= nb) {
            const double created = merge_into(res.plus_states, sp, mass,
                                              bucket.log2_multiplicity,
                                              tol.merge_infidelity);
            track_absorbed(res.plus_states, created);
            res.p_plus += mass;
          } else {
            auto& list = next[site_index(j + 1)].buckets;
            track_live(list, merge_into(list, sp, mass, bucket.log2_multiplicity,
                                        tol.merge_infidelity));
          }
        }
        if (bucket.probability * pm > 1e-300) {
          Eigen::VectorXcd sm = vm / std::sqrt(pm);
          const double mass = bucket.probability * pm;
          if (j - 1 <= -nb) {
            const double created = merge_into(res.minus_states, sm, mass,
                                              bucket.log2_multiplicity,
                                              tol.merge_infidelity);
            track_absorbed(res.minus_states, created);
            res.p_minus += mass;
          } else {
            auto& list = next[site_index(j - 1)].buckets;
            track_live(list, merge_into(list, sm, mass, bucket.log2_multiplicity,
                                        tol.merge_infidelity));
          }
        }
      }
    }

    // Per-site stability: all buckets must sit within the stability ball of
    // the site's representative (the state seen when its parity last fired).
    for (int s = 0; s < sites; ++s) {
      const auto& bl = next[s].buckets;
      total_buckets += bl.size();
      if (bl.empty()) continue;
      if (!seen[s]) {
        seen[s] = 1;
        last_state[s] = bl.front().state;
        structural_change = true;
        continue;
      }
      for (const auto& b : bl) {
        const std::complex<double> ov = kernels::dot(last_state[s].data(), b.state.data(), n);
        if (1.0 - std::norm(ov) > tol.stability_infidelity) {
          last_state[s] = bl.front().state;
          structural_change = true;
          break;
        }
      }
    }
    if (structural_change) last_change = sweep;
    const std::size_t absorbed_now = res.plus_states.size() + res.minus_states.size();
    if (total_buckets + absorbed_now > static_cast<std::size_t>(tol.bucket_cap)) {
      std::ostringstream os;
      os << "enumerate_paths: bucket cap " << tol.bucket_cap << " exceeded at sweep "
         << sweep << " (boundary too far for exhaustive enumeration)";
      throw ResourceError(os.str());
    }

    live.swap(next);
    live_mass = 0.0;
    for (const auto& bl : live)
      for (const auto& b : bl.buckets) live_mass += b.probability;

    // Path-independent regime: states per site are frozen, so absorption
    // probabilities follow a fixed birth-death chain. Finish exactly.
    if (allow_chain_solve && sweep - last_change >= static_cast<std::uint64_t>(4 * nb) &&
        live_mass > 0.0) {
      Eigen::VectorXd pplus(sites);
      for (int s = 0; s < sites; ++s) {
        if (!seen[s]) {
          pplus[s] = 0.5;  // never-populated site; unreachable mass anyway
          continue;
        }
        const int j = s - (nb - 1);
        pplus[s] = kernels::matvec_norm2(table.plus(j), last_state[s].data(), vp.data(), n);
      }
      Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(sites, sites);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(sites);
      for (int s = 0; s < sites; ++s) {
        const double pp = pplus[s];
        if (s + 1 < sites)
          sys(s, s + 1) -= pp;
        else
          rhs[s] += pp;
        if (s - 1 >= 0) sys(s, s - 1) -= (1.0 - pp);
      }
      Eigen::VectorXd u = sys.partialPivLu().solve(rhs);
      double add_plus = 0.0, add_minus = 0.0;
      for (int s = 0; s < sites; ++s)
        for (const auto& b : live[s].buckets) {
          add_plus += b.probability * u[s];
          add_minus += b.probability * (1.0 - u[s]);
        }
      res.p_plus += add_plus;
      res.p_minus += add_minus;
      // The surviving mass joins the already-collected endpoint states.
      if (!res.plus_states.empty() && add_plus > 0.0) {
        double total = res.p_plus;
        for (auto& b : res.plus_states) b.probability *= total / (total - add_plus);
      }
      if (!res.minus_states.empty() && add_minus > 0.0) {
        double total = res.p_minus;
        for (auto& b : res.minus_states) b.probability *= total / (total - add_minus);
      }
      res.chain_solved = true;
      live_mass = 0.0;
      break;
    }
  }
  res.tail = live_mass;
  res.sweeps = sweep;
  return res;
}

void write_trajectories_csv(std::ostream& os, const WalkConfig& config,
                            const std::vector<TrajectoryRecord>& records) {
  const int n = static_cast<int>(config.psi0.size());
  os << "seed,index,outcome,steps,path_checksum";
  for (int i = 0; i < n; ++i) os << ",final_state_re_" << i;
  for (int i = 0; i < n; ++i) os << ",final_state_im_" << i;
  os << "\n";
  char buf[64];
  for (std::size_t idx = 0; idx < records.size(); ++idx) {
    const TrajectoryRecord& r = records[idx];
    os << config.seed << "," << idx << ","
       << (r.outcome == Outcome::Plus ? "Plus" : "Minus") << "," << r.steps << ","
       << r.path_checksum;
    for (int i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", r.final_state[i].real());
      os << "," << buf;
    }
    for (int i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", r.final_state[i].imag());
      os << "," << buf;
    }
    os << "\n";
  }
}

}  // namespace qmeas
