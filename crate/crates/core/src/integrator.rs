//! Adaptive integration of the Newtonian three-body problem.
//!
//! The base method is a drift-kick-drift leapfrog, optionally run in the
//! logarithmic-Hamiltonian time transformation (`dt = ds / (T + B)` on drifts,
//! `dt = ds / U` on kicks). A symmetric base method admits an error expansion
//! in even powers of the step, so Gragg-Bulirsch-Stoer polynomial
//! extrapolation on top of it gives high order with an embedded error
//! estimate from neighbouring tableau entries.
//!
//! The system is evolved in Jacobi coordinates of the closest pair: the pair
//! separation is stored directly, so near-collisions keep full relative
//! precision. The pairing is switched between steps when another pair becomes
//! clearly closer.

use serde::{Deserialize, Serialize};

use crate::classifier::HierarchySnapshot;
use crate::dynamics::{total_angular_momentum, total_energy, BodyState, PairId, ThreeBodyState};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Maximum number of tableau rows; row `j` uses `2 (j + 1)` leapfrog substeps.
const MAX_ROWS: usize = 10;
const DIM: usize = 13;
const MAX_CONSECUTIVE_REJECTS: usize = 60;
/// Switch pairing when the current pair is this much wider than the closest.
const PAIR_SWITCH_RATIO: f64 = 1.25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Real + Deserialize<'de>", serialize = "T: Serialize"))]
pub struct IntegratorConfig<T> {
    /// Per-step relative error bound on separations, velocities and time.
    pub relative_tolerance: T,
    pub max_steps: u64,
    /// Simulated-time cap; reaching it ends the run with [`Termination::MaxTime`].
    pub max_time: T,
    /// Relative energy / angular momentum drift that flags a trajectory.
    pub conservation_alarm: T,
    /// The alarm is only evaluated mid-run while the potential stays below
    /// this multiple of |E0|; inside deeper encounters the drift of the
    /// Cartesian state is amplified by U / |E0|. Final states are always checked.
    pub alarm_potential_ratio: T,
    pub time_transform: bool,
    /// Upper bound on a single step in the integration variable (fictitious
    /// time with the transform, physical time without). Keeps the per-step
    /// classification cadence dense enough to resolve passages.
    pub max_step: T,
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            relative_tolerance: T::lit(1e-12),
            max_steps: 50_000_000,
            max_time: T::lit(1e5),
            conservation_alarm: T::lit(1e-6),
            alarm_potential_ratio: T::lit(1e3),
            time_transform: true,
            max_step: T::lit(DEFAULT_MAX_STEP),
        }
    }
}

/// Default cap on the fictitious step. One orbit of a binary with energy
/// `eps` spans `2 pi sqrt(k / (2 |eps|))` in fictitious time, about 580 for
/// the reference circular binary.
pub const DEFAULT_MAX_STEP: f64 = 20.0;

impl<T: Real> IntegratorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let rtol = self.relative_tolerance;
        if !(rtol > T::zero() && rtol <= T::lit(1e-6)) {
            return Err(Error::InvalidInput(format!(
                "relative_tolerance must lie in (0, 1e-6], got {rtol}"
            )));
        }
        if !(self.conservation_alarm >= rtol) {
            return Err(Error::InvalidInput(
                "conservation_alarm must not be below relative_tolerance".into(),
            ));
        }
        if !(self.alarm_potential_ratio > T::zero()) {
            return Err(Error::InvalidInput("alarm_potential_ratio must be positive".into()));
        }
        if !(self.max_step > T::zero()) {
            return Err(Error::InvalidInput("max_step must be positive".into()));
        }
        if !(self.max_time > T::zero()) {
            return Err(Error::InvalidInput("max_time must be positive".into()));
        }
        Ok(())
    }
}

/// Observer invoked after every accepted step. Monitors see the state by
/// shared reference only.
pub trait StepMonitor<T: Real> {
    fn observe(&mut self, state: &ThreeBodyState<T>, snapshot: &HierarchySnapshot<T>);
}

impl<T: Real, F: FnMut(&ThreeBodyState<T>, &HierarchySnapshot<T>)> StepMonitor<T> for F {
    fn observe(&mut self, state: &ThreeBodyState<T>, snapshot: &HierarchySnapshot<T>) {
        self(state, snapshot)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    /// The terminator predicate fired.
    Terminator,
    /// Energy or angular momentum drift exceeded the alarm.
    ConservationAlarm,
    MaxSteps,
    MaxTime,
}

#[derive(Clone, Copy, Debug)]
pub struct IntegrationOutcome<T> {
    pub final_state: ThreeBodyState<T>,
    pub reason: Termination,
    pub steps: u64,
    pub energy_drift: T,
    pub angular_momentum_drift: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Clock {
    Transformed,
    Physical,
}

/// Jacobi coordinates of `pair`: `rho1 = r_b - r_a`, `rho2 = r_s - cm_ab`.
#[derive(Clone, Copy, Debug)]
struct Jacobi<T> {
    pair: PairId,
    y: [T; DIM],
}

#[derive(Clone, Copy, Debug)]
struct PairMasses<T> {
    ma: T,
    mb: T,
    ms: T,
    mab: T,
    total: T,
    mu1: T,
    mu2: T,
}

impl<T: Real> PairMasses<T> {
    fn new(masses: [T; 3], pair: PairId) -> Self {
        let (a, b) = pair.members();
        let s = pair.single();
        let (ma, mb, ms) = (masses[a], masses[b], masses[s]);
        let mab = ma + mb;
        let total = mab + ms;
        Self {
            ma,
            mb,
            ms,
            mab,
            total,
            mu1: ma * mb / mab,
            mu2: mab * ms / total,
        }
    }
}

#[inline]
fn get<T: Real>(y: &[T; DIM], i: usize) -> Vec3<T> {
    Vec3::new(y[i], y[i + 1], y[i + 2])
}

#[inline]
fn put<T: Real>(y: &mut [T; DIM], i: usize, v: Vec3<T>) {
    y[i] = v.x;
    y[i + 1] = v.y;
    y[i + 2] = v.z;
}

const R1: usize = 0;
const R2: usize = 3;
const V1: usize = 6;
const V2: usize = 9;
const TIME: usize = 12;

/// Accelerations of the Jacobi vectors and the potential `U > 0`.
#[inline]
fn jacobi_forces<T: Real>(m: &PairMasses<T>, rho1: Vec3<T>, rho2: Vec3<T>) -> (Vec3<T>, Vec3<T>, T) {
    let r_ab = rho1;
    let r_as = rho2 + rho1 * (m.mb / m.mab);
    let r_bs = rho2 - rho1 * (m.ma / m.mab);
    let d_ab = r_ab.norm();
    let d_as = r_as.norm();
    let d_bs = r_bs.norm();
    let c_ab = r_ab / (d_ab * d_ab * d_ab);
    let c_as = r_as / (d_as * d_as * d_as);
    let c_bs = r_bs / (d_bs * d_bs * d_bs);
    let acc1 = -(c_ab * m.mab) + (c_bs - c_as) * m.ms;
    let acc2 = -(c_as * m.ma + c_bs * m.mb) * (m.total / m.mab);
    let u = m.ma * m.mb / d_ab + m.ma * m.ms / d_as + m.mb * m.ms / d_bs;
    (acc1, acc2, u)
}

#[inline]
fn potential<T: Real>(m: &PairMasses<T>, rho1: Vec3<T>, rho2: Vec3<T>) -> T {
    let d_ab = rho1.norm();
    let d_as = (rho2 + rho1 * (m.mb / m.mab)).norm();
    let d_bs = (rho2 - rho1 * (m.ma / m.mab)).norm();
    m.ma * m.mb / d_ab + m.ma * m.ms / d_as + m.mb * m.ms / d_bs
}

#[inline]
fn kinetic<T: Real>(m: &PairMasses<T>, v1: Vec3<T>, v2: Vec3<T>) -> T {
    T::lit(0.5) * (m.mu1 * v1.norm_sq() + m.mu2 * v2.norm_sq())
}

/// One accepted-step integrator for a single trajectory.
#[derive(Clone, Debug)]
pub struct Integrator<T> {
    cfg: IntegratorConfig<T>,
    masses: [T; 3],
    pm: PairMasses<T>,
    jac: Jacobi<T>,
    /// `B = -E0` in the transformed drift.
    binding: T,
    energy0: T,
    angmom0: Vec3<T>,
    h_transformed: T,
    h_physical: Option<T>,
    target_row: usize,
    steps: u64,
    rejected: u64,
}

struct Attempt<T> {
    y: [T; DIM],
    accepted: bool,
    h_next: T,
    row_next: usize,
}

impl<T: Real> Integrator<T> {
    pub fn new(state: &ThreeBodyState<T>, cfg: IntegratorConfig<T>) -> Result<Self> {
        cfg.validate()?;
        let energy0 = total_energy(state)?;
        let angmom0 = total_angular_momentum(state);
        let masses = state.masses();
        let mut s = *state;
        s.recenter();
        let pair = closest_pair(&s.separations());
        let pm = PairMasses::new(masses, pair);
        let jac = to_jacobi(&s, pair, &pm);
        let mut it = Self {
            cfg,
            masses,
            pm,
            jac,
            binding: -energy0,
            energy0,
            angmom0,
            h_transformed: T::zero(),
            h_physical: None,
            target_row: 4,
            steps: 0,
            rejected: 0,
        };
        it.h_transformed = it.initial_step();
        Ok(it)
    }

    pub fn config(&self) -> &IntegratorConfig<T> {
        &self.cfg
    }

    pub fn time(&self) -> T {
        self.jac.y[TIME]
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn rejected_steps(&self) -> u64 {
        self.rejected
    }

    pub fn initial_energy(&self) -> T {
        self.energy0
    }

    /// Current state in the center-of-mass frame.
    pub fn state(&self) -> ThreeBodyState<T> {
        from_jacobi(&self.jac, &self.pm, self.masses)
    }

    /// Energy evaluated in the internal coordinates.
    pub fn energy(&self) -> T {
        let y = &self.jac.y;
        kinetic(&self.pm, get(y, V1), get(y, V2)) - potential(&self.pm, get(y, R1), get(y, R2))
    }

    pub fn angular_momentum(&self) -> Vec3<T> {
        let y = &self.jac.y;
        get(y, R1).cross(get(y, V1)) * self.pm.mu1 + get(y, R2).cross(get(y, V2)) * self.pm.mu2
    }

    /// |E - E0| / |E0|.
    pub fn energy_drift(&self) -> T {
        ((self.energy() - self.energy0) / self.energy0).abs()
    }

    /// |L - L0| / |L0| (absolute when L0 vanishes).
    pub fn angular_momentum_drift(&self) -> T {
        let d = (self.angular_momentum() - self.angmom0).norm();
        let l0 = self.angmom0.norm();
        if l0 > T::zero() {
            d / l0
        } else {
            d
        }
    }

    pub fn conservation_violated(&self) -> bool {
        let alarm = self.cfg.conservation_alarm;
        !(self.energy_drift() <= alarm) || !(self.angular_momentum_drift() <= alarm)
    }

    /// True when the configuration is shallow enough for the drift to be
    /// meaningful; see [`IntegratorConfig::alarm_potential_ratio`].
    pub fn drift_measurable(&self) -> bool {
        let y = &self.jac.y;
        potential(&self.pm, get(y, R1), get(y, R2)) <= self.cfg.alarm_potential_ratio * self.energy0.abs()
    }

    fn initial_step(&self) -> T {
        let y = &self.jac.y;
        let (r1, r2) = (get(y, R1), get(y, R2));
        let d1 = r1.norm();
        let d2 = r2.norm();
        let t1 = (d1 * d1 * d1 / self.pm.mab).sqrt();
        let t2 = (d2 * d2 * d2 / self.pm.total).sqrt();
        let tdyn = t1.min(t2);
        let u = potential(&self.pm, r1, r2);
        let h = if self.cfg.time_transform {
            T::lit(0.05) * tdyn * u
        } else {
            T::lit(0.05) * tdyn
        };
        h.min(self.cfg.max_step)
    }

    /// Advances by one accepted step.
    pub fn step(&mut self) -> Result<()> {
        self.maybe_switch_pair();
        let clock = if self.cfg.time_transform {
            Clock::Transformed
        } else {
            Clock::Physical
        };
        let mut h = match clock {
            Clock::Transformed => self.h_transformed,
            Clock::Physical => self.h_physical.unwrap_or_else(|| self.initial_step()),
        };
        let mut rejects = 0;
        loop {
            h = h.min(self.cfg.max_step);
            let att = self.attempt(h, clock);
            if att.accepted {
                self.commit(att.y)?;
                self.target_row = att.row_next;
                match clock {
                    Clock::Transformed => self.h_transformed = att.h_next,
                    Clock::Physical => self.h_physical = Some(att.h_next),
                }
                return Ok(());
            }
            self.rejected += 1;
            rejects += 1;
            self.target_row = att.row_next;
            h = att.h_next;
            if rejects > MAX_CONSECUTIVE_REJECTS || !(h > T::zero()) {
                return Err(Error::StepUnderflow {
                    time: self.time().to_f64_lossy(),
                });
            }
        }
    }

    /// Integrates to exactly `t_end` (forward in time).
    pub fn advance_to(&mut self, t_end: T) -> Result<()> {
        while self.time() < t_end {
            let remaining = t_end - self.time();
            if self.cfg.time_transform {
                let y = &self.jac.y;
                let u = potential(&self.pm, get(y, R1), get(y, R2));
                let predicted = self.h_transformed.min(self.cfg.max_step) / u;
                if predicted < T::lit(0.5) * remaining {
                    self.step()?;
                    continue;
                }
            }
            self.physical_step_capped(remaining)?;
        }
        Ok(())
    }

    /// One accepted physical-time step of length at most `cap`.
    fn physical_step_capped(&mut self, cap: T) -> Result<()> {
        self.maybe_switch_pair();
        let mut h = self
            .h_physical
            .unwrap_or_else(|| {
                let y = &self.jac.y;
                let u = potential(&self.pm, get(y, R1), get(y, R2));
                self.h_transformed / u
            })
            .min(cap);
        let mut rejects = 0;
        loop {
            let att = self.attempt(h, Clock::Physical);
            if att.accepted {
                if h == cap {
                    let mut y = att.y;
                    // land exactly on the requested time
                    y[TIME] = self.jac.y[TIME] + cap;
                    self.commit(y)?;
                } else {
                    self.commit(att.y)?;
                }
                self.h_physical = Some(att.h_next);
                self.target_row = att.row_next;
                return Ok(());
            }
            self.rejected += 1;
            rejects += 1;
            self.target_row = att.row_next;
            h = att.h_next.min(cap);
            if rejects > MAX_CONSECUTIVE_REJECTS || !(h > T::zero()) {
                return Err(Error::StepUnderflow {
                    time: self.time().to_f64_lossy(),
                });
            }
        }
    }

    fn commit(&mut self, y: [T; DIM]) -> Result<()> {
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::StepUnderflow {
                time: self.time().to_f64_lossy(),
            });
        }
        if !(y[TIME] > self.jac.y[TIME]) {
            return Err(Error::StepUnderflow {
                time: self.time().to_f64_lossy(),
            });
        }
        self.jac.y = y;
        self.steps += 1;
        Ok(())
    }

    fn maybe_switch_pair(&mut self) {
        let p = positions_from_jacobi(&self.jac.y, &self.pm, self.jac.pair);
        let sep = PairId::ALL.map(|q| {
            let (a, b) = q.members();
            (p[b] - p[a]).norm()
        });
        let closest = closest_pair(&sep);
        if closest != self.jac.pair
            && sep[self.jac.pair.index()] > T::lit(PAIR_SWITCH_RATIO) * sep[closest.index()]
        {
            let v = velocities_from_jacobi(&self.jac.y, &self.pm, self.jac.pair);
            let pm = PairMasses::new(self.masses, closest);
            let (c, d) = closest.members();
            let e = closest.single();
            let mut y = [T::zero(); DIM];
            put(&mut y, R1, p[d] - p[c]);
            put(
                &mut y,
                R2,
                ((p[e] - p[c]) * pm.ma + (p[e] - p[d]) * pm.mb) / pm.mab,
            );
            put(&mut y, V1, v[d] - v[c]);
            put(
                &mut y,
                V2,
                ((v[e] - v[c]) * pm.ma + (v[e] - v[d]) * pm.mb) / pm.mab,
            );
            y[TIME] = self.jac.y[TIME];
            self.jac = Jacobi { pair: closest, y };
            self.pm = pm;
        }
    }

    /// Leapfrog with `n` substeps over a step `h` of the integration variable.
    /// The time slot of the result holds the elapsed time.
    fn leapfrog(&self, h: T, n: usize, clock: Clock) -> [T; DIM] {
        let m = &self.pm;
        let y = &self.jac.y;
        let mut r1 = get(y, R1);
        let mut r2 = get(y, R2);
        let mut v1 = get(y, V1);
        let mut v2 = get(y, V2);
        // the time increment is extrapolated from zero so its error estimate
        // is not swamped by the rounding of a large absolute time
        let mut t = T::zero();
        let sub = h / T::from_usize_lossy(n);
        let half = sub * T::lit(0.5);
        let drift = |ds: T, r1: &mut Vec3<T>, r2: &mut Vec3<T>, v1: Vec3<T>, v2: Vec3<T>, t: &mut T| {
            let dt = match clock {
                Clock::Transformed => ds / (kinetic(m, v1, v2) + self.binding),
                Clock::Physical => ds,
            };
            *r1 += v1 * dt;
            *r2 += v2 * dt;
            *t = *t + dt;
        };
        drift(half, &mut r1, &mut r2, v1, v2, &mut t);
        for i in 0..n {
            let (a1, a2, u) = jacobi_forces(m, r1, r2);
            let dt = match clock {
                Clock::Transformed => sub / u,
                Clock::Physical => sub,
            };
            v1 += a1 * dt;
            v2 += a2 * dt;
            let ds = if i + 1 < n { sub } else { half };
            drift(ds, &mut r1, &mut r2, v1, v2, &mut t);
        }
        let mut out = [T::zero(); DIM];
        put(&mut out, R1, r1);
        put(&mut out, R2, r2);
        put(&mut out, V1, v1);
        put(&mut out, V2, v2);
        out[TIME] = t;
        out
    }

    /// Scaled error norm between two candidate end states; <= 1 passes.
    fn error_norm(&self, a: &[T; DIM], b: &[T; DIM]) -> T {
        let tol = self.cfg.relative_tolerance;
        let tiny = T::min_positive_value().sqrt();
        let d = |i: usize| (get(a, i) - get(b, i)).norm();
        let r1 = get(a, R1).norm();
        let r2 = get(a, R2).norm();
        let v1s = get(a, V1).norm().max((self.pm.mab / r1).sqrt());
        let v2s = get(a, V2).norm().max((self.pm.total / r2).sqrt());
        let dt_step = a[TIME].abs().max(tiny);
        let e = (d(R1) / r1)
            .max(d(R2) / r2)
            .max(d(V1) / v1s)
            .max(d(V2) / v2s)
            .max((a[TIME] - b[TIME]).abs() / dt_step);
        if e.is_finite() {
            e / tol
        } else {
            T::infinity()
        }
    }

    fn attempt(&self, h: T, clock: Clock) -> Attempt<T> {
        let k = self.target_row.clamp(2, MAX_ROWS - 2);
        let seq = |j: usize| T::from_usize_lossy(2 * (j + 1));
        let mut prev_row: Vec<[T; DIM]> = Vec::with_capacity(MAX_ROWS);
        let mut cost = [T::zero(); MAX_ROWS];
        let mut acc = 1usize;
        for (j, c) in cost.iter_mut().enumerate() {
            acc += 2 * (j + 1);
            *c = T::from_usize_lossy(acc);
        }
        let mut h_opt = [T::zero(); MAX_ROWS];
        let mut work = [T::infinity(); MAX_ROWS];
        let mut last = self.jac.y;
        for j in 0..=k + 1 {
            // Aitken-Neville in h^2
            let mut row: Vec<[T; DIM]> = Vec::with_capacity(j + 1);
            row.push(self.leapfrog(h, 2 * (j + 1), clock));
            for m in 1..=j {
                let ratio = seq(j) / seq(j - m);
                let denom = ratio * ratio - T::one();
                let (hi, lo) = (&row[m - 1], &prev_row[m - 1]);
                let mut next = [T::zero(); DIM];
                for i in 0..DIM {
                    next[i] = hi[i] + (hi[i] - lo[i]) / denom;
                }
                row.push(next);
            }
            last = row[j];
            if j == 0 {
                prev_row = row;
                continue;
            }
            let err = self.error_norm(&row[j], &row[j - 1]);
            let expo = T::one() / T::from_usize_lossy(2 * j + 1);
            let fac = if err > T::zero() {
                (T::lit(0.94) * (T::lit(0.65) / err).powf(expo))
                    .max(T::lit(0.02))
                    .min(T::lit(4.0))
            } else {
                T::lit(4.0)
            };
            h_opt[j] = h * fac;
            work[j] = cost[j] / h_opt[j];
            prev_row = row;

            if j + 1 < k {
                continue;
            }
            if err <= T::one() {
                let mut next = j;
                let mut h_next = h_opt[j];
                if j >= 2 && work[j - 1] < T::lit(0.8) * work[j] {
                    next = j - 1;
                    h_next = h_opt[j - 1];
                } else if j + 1 <= MAX_ROWS - 2 && work[j] < T::lit(0.9) * work[j - 1] {
                    next = j + 1;
                    h_next = h_opt[j] * cost[j + 1] / cost[j];
                }
                let mut y = last;
                y[TIME] = self.jac.y[TIME] + y[TIME];
                return Attempt {
                    y,
                    accepted: true,
                    h_next,
                    row_next: next.clamp(2, MAX_ROWS - 2),
                };
            }
            // reject early when the remaining rows cannot plausibly converge
            let hopeless = if j + 1 == k {
                let r = seq(k + 1) * seq(k) / (seq(0) * seq(0));
                err > r * r
            } else if j == k {
                let r = seq(k + 1) / seq(0);
                err > r * r
            } else {
                true
            };
            if hopeless {
                let next = if j + 1 == k { (k - 1).max(2) } else { k };
                return Attempt {
                    y: last,
                    accepted: false,
                    h_next: h_opt[j].min(h * T::lit(0.7)),
                    row_next: next,
                };
            }
        }
        Attempt {
            y: last,
            accepted: false,
            h_next: h * T::lit(0.5),
            row_next: k,
        }
    }
}

fn closest_pair<T: Real>(sep: &[T; 3]) -> PairId {
    let mut best = PairId::P12;
    for p in [PairId::P13, PairId::P23] {
        if sep[p.index()] < sep[best.index()] {
            best = p;
        }
    }
    best
}

fn to_jacobi<T: Real>(s: &ThreeBodyState<T>, pair: PairId, pm: &PairMasses<T>) -> Jacobi<T> {
    let (a, b) = pair.members();
    let c = pair.single();
    let ba = &s.bodies[a];
    let bb = &s.bodies[b];
    let bs = &s.bodies[c];
    let mut y = [T::zero(); DIM];
    put(&mut y, R1, bb.position - ba.position);
    put(
        &mut y,
        R2,
        ((bs.position - ba.position) * pm.ma + (bs.position - bb.position) * pm.mb) / pm.mab,
    );
    put(&mut y, V1, bb.velocity - ba.velocity);
    put(
        &mut y,
        V2,
        ((bs.velocity - ba.velocity) * pm.ma + (bs.velocity - bb.velocity) * pm.mb) / pm.mab,
    );
    y[TIME] = s.time;
    Jacobi { pair, y }
}

/// Positions in the center-of-mass frame, indexed by body.
fn positions_from_jacobi<T: Real>(y: &[T; DIM], pm: &PairMasses<T>, pair: PairId) -> [Vec3<T>; 3] {
    split_from_jacobi(get(y, R1), get(y, R2), pm, pair)
}

fn velocities_from_jacobi<T: Real>(y: &[T; DIM], pm: &PairMasses<T>, pair: PairId) -> [Vec3<T>; 3] {
    split_from_jacobi(get(y, V1), get(y, V2), pm, pair)
}

fn split_from_jacobi<T: Real>(
    rho1: Vec3<T>,
    rho2: Vec3<T>,
    pm: &PairMasses<T>,
    pair: PairId,
) -> [Vec3<T>; 3] {
    let (a, b) = pair.members();
    let s = pair.single();
    let outer = rho2 * (pm.ms / pm.total);
    let mut out = [Vec3::zero(); 3];
    out[a] = -(rho1 * (pm.mb / pm.mab)) - outer;
    out[b] = rho1 * (pm.ma / pm.mab) - outer;
    out[s] = rho2 * (pm.mab / pm.total);
    out
}

fn from_jacobi<T: Real>(j: &Jacobi<T>, pm: &PairMasses<T>, masses: [T; 3]) -> ThreeBodyState<T> {
    let p = positions_from_jacobi(&j.y, pm, j.pair);
    let v = velocities_from_jacobi(&j.y, pm, j.pair);
    ThreeBodyState::from_raw(
        [0, 1, 2].map(|i| BodyState::new(masses[i], p[i], v[i])),
        j.y[TIME],
    )
}

/// Advances `state` by one accepted adaptive step.
pub fn advance_step<T: Real>(
    state: &ThreeBodyState<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<ThreeBodyState<T>> {
    let mut it = Integrator::new(state, *cfg)?;
    it.step()?;
    Ok(it.state())
}

/// Steps until `terminator` fires, the conservation alarm trips, or a cap is
/// hit. Monitors and the terminator see every accepted state, the initial one
/// included.
pub fn integrate_until<T: Real, F>(
    state: &ThreeBodyState<T>,
    cfg: &IntegratorConfig<T>,
    monitors: &mut [&mut dyn StepMonitor<T>],
    mut terminator: F,
) -> Result<IntegrationOutcome<T>>
where
    F: FnMut(&ThreeBodyState<T>, &HierarchySnapshot<T>) -> bool,
{
    let mut it = Integrator::new(state, *cfg)?;
    let finish = |it: &Integrator<T>, reason| IntegrationOutcome {
        final_state: it.state(),
        reason,
        steps: it.steps(),
        energy_drift: it.energy_drift(),
        angular_momentum_drift: it.angular_momentum_drift(),
    };
    let mut current = it.state();
    loop {
        let snap = HierarchySnapshot::of(&current)?;
        for m in monitors.iter_mut() {
            m.observe(&current, &snap);
        }
        let stop = if terminator(&current, &snap) {
            Some(Termination::Terminator)
        } else if it.steps() >= cfg.max_steps {
            Some(Termination::MaxSteps)
        } else if it.time() >= cfg.max_time {
            Some(Termination::MaxTime)
        } else {
            None
        };
        if (stop.is_some() || it.drift_measurable()) && it.conservation_violated() {
            return Ok(finish(&it, Termination::ConservationAlarm));
        }
        if let Some(reason) = stop {
            return Ok(finish(&it, reason));
        }
        it.step()?;
        current = it.state();
    }
}
