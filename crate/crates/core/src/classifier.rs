//! Online classification of three-body trajectories.
//!
//! Every accepted integrator step yields a [`HierarchySnapshot`]. Streams of
//! snapshots drive the democratic-configuration counter, the excursion
//! detector and the final-breakup detector, which together decide the
//! verdicts of the absorptivity and outcome experiments.

use std::cmp::Reverse;

use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;

use crate::dynamics::{decompose, most_bound_pair, Decomposition, PairId, ThreeBodyState};
use crate::error::{Error, Result};
use crate::integrator::{integrate_until, IntegratorConfig, Termination};
use crate::kepler::{cartesian_to_elements, OrbitalElements};
use crate::scalar::Real;
use crate::vec3::Vec3;

pub use crate::dynamics::homology_radius;

/// Thresholds of the classification scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Real + Deserialize<'de>", serialize = "T: Serialize"))]
pub struct ClassifierConfig<T> {
    /// Homology-radius level whose up-down crossing is a democratic configuration.
    pub democracy_threshold: T,
    /// Minimum democratic count for absorption and chaotic escape.
    pub min_democratic: u32,
    /// Lifetime cut for chaotic escapes, code time units.
    pub lifetime_cut: T,
    pub escape_tidal_threshold: T,
    /// Breakup needs the single beyond this many binary semi-major axes.
    pub escape_separation_multiple: T,
    /// Consecutive receding snapshots needed before breakup fires.
    pub receding_snapshots: u32,
}

impl<T: Real> Default for ClassifierConfig<T> {
    fn default() -> Self {
        Self {
            democracy_threshold: T::lit(0.33),
            min_democratic: 4,
            // 50 yr at 2 pi code units per year
            lifetime_cut: T::lit(100.0 * std::f64::consts::PI),
            escape_tidal_threshold: T::lit(1e-3),
            escape_separation_multiple: T::lit(20.0),
            receding_snapshots: 3,
        }
    }
}

impl<T: Real> ClassifierConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let t = self.democracy_threshold;
        if !(t > T::zero() && t < T::one()) {
            return Err(Error::InvalidInput("democracy_threshold must lie in (0, 1)".into()));
        }
        if !(self.lifetime_cut >= T::zero()) {
            return Err(Error::InvalidInput("lifetime_cut must be non-negative".into()));
        }
        if !(self.escape_tidal_threshold > T::zero() && self.escape_tidal_threshold < T::one()) {
            return Err(Error::InvalidInput("escape_tidal_threshold must lie in (0, 1)".into()));
        }
        if !(self.escape_separation_multiple > T::zero()) {
            return Err(Error::InvalidInput(
                "escape_separation_multiple must be positive".into(),
            ));
        }
        if self.receding_snapshots == 0 {
            return Err(Error::InvalidInput("receding_snapshots must be at least 1".into()));
        }
        Ok(())
    }
}

/// Hierarchy state of the triple at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HierarchySnapshot<T> {
    pub time: T,
    /// Most bound pair and the binary / outer decomposition for it.
    pub decomposition: Decomposition<T>,
    pub binary_mass: T,
    pub single_mass: T,
    /// Semi-major axis of the inner pair; `None` when it is unbound.
    pub semi_major_axis: Option<T>,
    pub eccentricity: T,
    pub f_tid: T,
    pub homology_radius: T,
    pub single_bound: bool,
    /// Distance of the single from the binary's center of mass.
    pub separation: T,
    pub radial_velocity: T,
}

impl<T: Real> HierarchySnapshot<T> {
    pub fn of(state: &ThreeBodyState<T>) -> Result<Self> {
        let (pairing, _) = most_bound_pair(state)?;
        let d = decompose(state, pairing)?;
        let (a, b) = pairing.members();
        let ma = state.bodies[a].mass;
        let mb = state.bodies[b].mass;
        let ms = state.bodies[pairing.single()].mass;
        let m_bin = ma + mb;
        let mu = ma * mb / m_bin;
        let sep = d.outer_position.norm();
        let rel = d.rel_position.norm();
        let spec = d.eps_b / mu;
        let h = d.l_b.norm() / mu;
        let ecc = (T::one() + T::lit(2.0) * spec * h * h / (m_bin * m_bin))
            .max(T::zero())
            .sqrt();
        let (sma, reach) = if d.eps_b < T::zero() {
            let sma = ma * mb / (-T::lit(2.0) * d.eps_b);
            (Some(sma), sma * (T::one() + ecc))
        } else {
            (None, rel)
        };
        let r = state.separations();
        Ok(Self {
            time: state.time,
            decomposition: d,
            binary_mass: m_bin,
            single_mass: ms,
            semi_major_axis: sma,
            eccentricity: ecc,
            f_tid: tidal_expression(m_bin, ms, ma, mb, reach, sep),
            homology_radius: crate::dynamics::homology_radius_from_separations(r),
            single_bound: d.eps_f < T::zero(),
            separation: sep,
            radial_velocity: d.radial_velocity(),
        })
    }

    pub fn pairing(&self) -> PairId {
        self.decomposition.pairing
    }

    /// Period of the inner binary, if bound.
    pub fn binary_period(&self) -> Option<T> {
        self.semi_major_axis
            .map(|a| T::TAU() * (a * a * a / self.binary_mass).sqrt())
    }

    /// Full Keplerian elements of the inner pair's relative orbit.
    pub fn binary_elements(&self) -> Result<OrbitalElements<T>> {
        cartesian_to_elements(
            self.decomposition.rel_position,
            self.decomposition.rel_velocity,
            self.binary_mass,
        )
    }
}

#[inline]
fn tidal_expression<T: Real>(m_bin: T, ms: T, ma: T, mb: T, reach: T, sep: T) -> T {
    let x = reach / sep;
    T::lit(2.0) * m_bin * ms / (ma * mb) * x * x * x
}

/// Ratio of the single's tidal force on the pair to the pair's own force at
/// apocenter, `2 m_bin m_s / (m_a m_b) (a (1 + e) / R)^3`. An unbound pair
/// uses its current separation in place of `a (1 + e)`.
pub fn tidal_factor<T: Real>(state: &ThreeBodyState<T>, pairing: PairId) -> Result<T> {
    let d = decompose(state, pairing)?;
    let (a, b) = pairing.members();
    let ma = state.bodies[a].mass;
    let mb = state.bodies[b].mass;
    let ms = state.bodies[pairing.single()].mass;
    let m_bin = ma + mb;
    let reach = if d.eps_b < T::zero() {
        let el = cartesian_to_elements(d.rel_position, d.rel_velocity, m_bin)?;
        el.semi_major_axis() * (T::one() + el.eccentricity)
    } else {
        d.rel_position.norm()
    };
    Ok(tidal_expression(m_bin, ms, ma, mb, reach, d.outer_position.norm()))
}

/// Counts complete rises above and falls below the homology threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DemocracyCounter<T> {
    pub count: u32,
    pub above_threshold: bool,
    pub threshold: T,
}

impl<T: Real> DemocracyCounter<T> {
    pub fn new(threshold: T) -> Self {
        Self {
            count: 0,
            above_threshold: false,
            threshold,
        }
    }

    /// Feeds one homology-radius sample; returns true when it completes a
    /// democratic configuration.
    pub fn update(&mut self, r_h: T) -> bool {
        if !self.above_threshold {
            if r_h > self.threshold {
                self.above_threshold = true;
            }
            false
        } else if r_h < self.threshold {
            self.above_threshold = false;
            self.count += 1;
            true
        } else {
            false
        }
    }

    /// Clears the count; a configuration in progress keeps its rising edge.
    pub fn reset(&mut self) {
        self.count = 0;
    }
}

/// Functional form of [`DemocracyCounter::update`].
pub fn update_democracy<T: Real>(mut counter: DemocracyCounter<T>, r_h: T) -> DemocracyCounter<T> {
    counter.update(r_h);
    counter
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExcursionRecord<T> {
    pub start_time: T,
    pub end_time: T,
    pub median_binary_period: T,
    pub accepted: bool,
}

/// Streaming median over `f64` samples (two heaps).
#[derive(Clone, Debug, Default)]
struct RunningMedian {
    low: BinaryHeap<OrdF64>,
    high: BinaryHeap<Reverse<OrdF64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

impl RunningMedian {
    fn push(&mut self, x: f64) {
        match self.low.peek() {
            Some(top) if x > top.0 => self.high.push(Reverse(OrdF64(x))),
            _ => self.low.push(OrdF64(x)),
        }
        if self.low.len() > self.high.len() + 1 {
            let v = self.low.pop().expect("non-empty");
            self.high.push(Reverse(v));
        } else if self.high.len() > self.low.len() {
            let Reverse(v) = self.high.pop().expect("non-empty");
            self.low.push(v);
        }
    }

    fn median(&self) -> Option<f64> {
        let lo = self.low.peek()?.0;
        if self.low.len() > self.high.len() {
            Some(lo)
        } else {
            Some(0.5 * (lo + self.high.peek().expect("balanced").0 .0))
        }
    }

    fn clear(&mut self) {
        self.low.clear();
        self.high.clear();
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExcursionEvent<T> {
    /// A candidate opened at this snapshot.
    Opened,
    /// The open candidate has just outlasted the median binary period.
    Accepted,
    /// The candidate closed.
    Closed(ExcursionRecord<T>),
}

/// Online excursion detector.
///
/// A candidate opens when the single is bound and `f_tid < 1`, and closes
/// when `f_tid >= 1`. It is accepted as soon as its running duration exceeds
/// the running median of the binary periods sampled during it.
#[derive(Clone, Debug, Default)]
pub struct ExcursionDetector<T> {
    open_since: Option<T>,
    accepted_online: bool,
    periods: RunningMedian,
    accepted: u32,
}

impl<T: Real> ExcursionDetector<T> {
    pub fn new() -> Self {
        Self {
            open_since: None,
            accepted_online: false,
            periods: RunningMedian::default(),
            accepted: 0,
        }
    }

    pub fn is_open(&self) -> bool {
        self.open_since.is_some()
    }

    /// Number of candidates accepted so far.
    pub fn accepted_count(&self) -> u32 {
        self.accepted
    }

    fn median(&self) -> T {
        self.periods.median().map(T::lit).unwrap_or(T::infinity())
    }

    pub fn update(&mut self, snap: &HierarchySnapshot<T>) -> Option<ExcursionEvent<T>> {
        match self.open_since {
            None => {
                if snap.single_bound && snap.f_tid < T::one() {
                    self.open_since = Some(snap.time);
                    self.accepted_online = false;
                    self.periods.clear();
                    if let Some(p) = snap.binary_period() {
                        self.periods.push(p.to_f64_lossy());
                    }
                    return Some(ExcursionEvent::Opened);
                }
                None
            }
            Some(start) => {
                if snap.f_tid >= T::one() {
                    let median = self.median();
                    let accepted = snap.time - start > median;
                    self.open_since = None;
                    if accepted && !self.accepted_online {
                        self.accepted += 1;
                    }
                    return Some(ExcursionEvent::Closed(ExcursionRecord {
                        start_time: start,
                        end_time: snap.time,
                        median_binary_period: median,
                        accepted,
                    }));
                }
                if let Some(p) = snap.binary_period() {
                    self.periods.push(p.to_f64_lossy());
                }
                if !self.accepted_online && snap.time - start > self.median() {
                    self.accepted_online = true;
                    self.accepted += 1;
                    return Some(ExcursionEvent::Accepted);
                }
                None
            }
        }
    }

    /// Record of the candidate still open at time `now`, if any.
    pub fn pending(&self, now: T) -> Option<ExcursionRecord<T>> {
        let start = self.open_since?;
        let median = self.median();
        Some(ExcursionRecord {
            start_time: start,
            end_time: now,
            median_binary_period: median,
            accepted: now - start > median,
        })
    }
}

/// First excursion candidate in a time-ordered snapshot stream. A candidate
/// still open when the stream ends is reported up to the last snapshot.
pub fn detect_excursion<'a, T: Real, I>(snapshots: I) -> Option<ExcursionRecord<T>>
where
    I: IntoIterator<Item = &'a HierarchySnapshot<T>>,
{
    let mut det = ExcursionDetector::new();
    let mut last = None;
    for s in snapshots {
        if let Some(ExcursionEvent::Closed(rec)) = det.update(s) {
            return Some(rec);
        }
        last = Some(s.time);
    }
    last.and_then(|t| det.pending(t))
}

/// Quantities recorded when the final breakup fires.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BreakupEvent<T> {
    pub time: T,
    pub decomposition: Decomposition<T>,
}

/// Online final-breakup detector.
#[derive(Clone, Copy, Debug)]
pub struct BreakupDetector<T> {
    cfg: ClassifierConfig<T>,
    receding: u32,
}

impl<T: Real> BreakupDetector<T> {
    pub fn new(cfg: ClassifierConfig<T>) -> Self {
        Self { cfg, receding: 0 }
    }

    pub fn update(&mut self, snap: &HierarchySnapshot<T>) -> Option<BreakupEvent<T>> {
        let ok = snap.decomposition.eps_f > T::zero()
            && snap.f_tid < self.cfg.escape_tidal_threshold
            && snap
                .semi_major_axis
                .is_some_and(|a| snap.separation > self.cfg.escape_separation_multiple * a)
            && snap.radial_velocity > T::zero();
        if ok {
            self.receding += 1;
        } else {
            self.receding = 0;
        }
        (self.receding >= self.cfg.receding_snapshots).then_some(BreakupEvent {
            time: snap.time,
            decomposition: snap.decomposition,
        })
    }
}

/// First breakup in a time-ordered snapshot stream.
pub fn detect_final_breakup<'a, T: Real, I>(
    snapshots: I,
    cfg: &ClassifierConfig<T>,
) -> Option<BreakupEvent<T>>
where
    I: IntoIterator<Item = &'a HierarchySnapshot<T>>,
{
    let mut det = BreakupDetector::new(*cfg);
    snapshots.into_iter().find_map(|s| det.update(s))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Absorbed,
    #[serde(rename = "regular")]
    RegularEjection,
    Escape,
    Undecided,
}

impl VerdictKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictKind::Absorbed => "absorbed",
            VerdictKind::RegularEjection => "regular",
            VerdictKind::Escape => "escape",
            VerdictKind::Undecided => "undecided",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "absorbed" => VerdictKind::Absorbed,
            "regular" => VerdictKind::RegularEjection,
            "escape" => VerdictKind::Escape,
            "undecided" => VerdictKind::Undecided,
            _ => return None,
        })
    }
}

/// Why the classification run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Excursion,
    Escape,
    MaxSteps,
    MaxTime,
    ConservationAlarm,
    StepUnderflow,
    /// Initial conditions or the integration raised an error.
    Failed,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Excursion => "excursion",
            StopReason::Escape => "escape",
            StopReason::MaxSteps => "max_steps",
            StopReason::MaxTime => "max_time",
            StopReason::ConservationAlarm => "conservation_alarm",
            StopReason::StepUnderflow => "step_underflow",
            StopReason::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "excursion" => StopReason::Excursion,
            "escape" => StopReason::Escape,
            "max_steps" => StopReason::MaxSteps,
            "max_time" => StopReason::MaxTime,
            "conservation_alarm" => StopReason::ConservationAlarm,
            "step_underflow" => StopReason::StepUnderflow,
            "failed" => StopReason::Failed,
            _ => return None,
        })
    }

    /// Runs stopped by the conservation alarm, an underflow or an error are flagged.
    pub fn is_flagged(self) -> bool {
        matches!(
            self,
            StopReason::ConservationAlarm | StopReason::StepUnderflow | StopReason::Failed
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryVerdict<T> {
    pub kind: VerdictKind,
    pub reason: StopReason,
    /// Escaping body's pair (the pair left behind); `Escape` only.
    pub escaper: Option<PairId>,
    pub eps_b: T,
    pub l_b: Vec3<T>,
    pub eps_f: T,
    pub l_f: Vec3<T>,
    pub lifetime: T,
    /// Democratic configurations since the last accepted excursion.
    pub democratic_count: u32,
    pub excursion_count: u32,
    pub energy_drift: T,
    pub angular_momentum_drift: T,
    pub steps: u64,
}

impl<T: Real> TrajectoryVerdict<T> {
    fn undecided(reason: StopReason, time: T, nd: u32, ex: u32) -> Self {
        Self {
            kind: VerdictKind::Undecided,
            reason,
            escaper: None,
            eps_b: T::nan(),
            l_b: Vec3::new(T::nan(), T::nan(), T::nan()),
            eps_f: T::nan(),
            l_f: Vec3::new(T::nan(), T::nan(), T::nan()),
            lifetime: time,
            democratic_count: nd,
            excursion_count: ex,
            energy_drift: T::nan(),
            angular_momentum_drift: T::nan(),
            steps: 0,
        }
    }
}

fn stop_from_termination(t: Termination) -> StopReason {
    match t {
        Termination::ConservationAlarm => StopReason::ConservationAlarm,
        Termination::MaxSteps => StopReason::MaxSteps,
        Termination::MaxTime => StopReason::MaxTime,
        Termination::Terminator => unreachable!("handled by caller"),
    }
}

enum Event<T> {
    Excursion,
    Escape(BreakupEvent<T>),
}

/// Shared driver: integrates while feeding the detectors and stops at the
/// first event `stop_on_excursion` / breakup asks for.
fn run_classified<T: Real>(
    state: &ThreeBodyState<T>,
    icfg: &IntegratorConfig<T>,
    ccfg: &ClassifierConfig<T>,
    stop_on_excursion: bool,
) -> Result<TrajectoryVerdict<T>> {
    ccfg.validate()?;
    let mut democracy = DemocracyCounter::new(ccfg.democracy_threshold);
    let mut excursions = ExcursionDetector::new();
    let mut breakup = BreakupDetector::new(*ccfg);
    let mut event: Option<Event<T>> = None;
    let mut last_time = state.time;
    let res = integrate_until(state, icfg, &mut [], |_, snap| {
        last_time = snap.time;
        democracy.update(snap.homology_radius);
        if let Some(ExcursionEvent::Accepted) = excursions.update(snap) {
            if stop_on_excursion {
                event = Some(Event::Excursion);
                return true;
            }
            democracy.reset();
        }
        if let Some(b) = breakup.update(snap) {
            event = Some(Event::Escape(b));
            return true;
        }
        false
    });
    let nd = democracy.count;
    let nex = excursions.accepted_count();
    let out = match res {
        Ok(o) => o,
        Err(Error::StepUnderflow { .. }) => {
            return Ok(TrajectoryVerdict::undecided(
                StopReason::StepUnderflow,
                last_time,
                nd,
                nex,
            ))
        }
        Err(e) => return Err(e),
    };
    let mut v = TrajectoryVerdict::undecided(StopReason::MaxTime, out.final_state.time, nd, nex);
    v.energy_drift = out.energy_drift;
    v.angular_momentum_drift = out.angular_momentum_drift;
    v.steps = out.steps;
    if out.reason != Termination::Terminator {
        v.reason = stop_from_termination(out.reason);
        return Ok(v);
    }
    let absorbed_kind = if nd >= ccfg.min_democratic {
        VerdictKind::Absorbed
    } else {
        VerdictKind::RegularEjection
    };
    match event.expect("terminator fired without an event") {
        Event::Excursion => {
            v.kind = absorbed_kind;
            v.reason = StopReason::Excursion;
        }
        Event::Escape(b) => {
            v.kind = if stop_on_excursion {
                absorbed_kind
            } else {
                VerdictKind::Escape
            };
            v.reason = StopReason::Escape;
            v.escaper = Some(b.decomposition.pairing);
            v.eps_b = b.decomposition.eps_b;
            v.l_b = b.decomposition.l_b;
            v.eps_f = b.decomposition.eps_f;
            v.l_f = b.decomposition.l_f;
            v.lifetime = b.time;
        }
    }
    Ok(v)
}

/// Absorptivity verdict: integrate to the first ejection (accepted
/// excursion onset or escape); absorbed iff the democratic count reached the
/// configured minimum. Caps and alarms give `Undecided`.
pub fn classify_absorption<T: Real>(
    state: &ThreeBodyState<T>,
    icfg: &IntegratorConfig<T>,
    ccfg: &ClassifierConfig<T>,
) -> Result<TrajectoryVerdict<T>> {
    run_classified(state, icfg, ccfg, true)
}

/// Outcome run: integrate to the final breakup. The democratic count restarts
/// at every accepted excursion.
pub fn run_outcome<T: Real>(
    state: &ThreeBodyState<T>,
    icfg: &IntegratorConfig<T>,
    ccfg: &ClassifierConfig<T>,
) -> Result<TrajectoryVerdict<T>> {
    run_classified(state, icfg, ccfg, false)
}

/// Chaotic-escape cut: lifetime above `lifetime_cut` and at least
/// `min_democratic` democratic configurations after the last excursion.
pub fn classify_chaotic_escape<T: Real>(
    verdict: &TrajectoryVerdict<T>,
    lifetime_cut: T,
    min_democratic: u32,
) -> Result<bool> {
    if verdict.kind != VerdictKind::Escape {
        return Err(Error::InvalidInput(format!(
            "chaotic-escape cut applies to escapes, got {:?}",
            verdict.kind
        )));
    }
    Ok(chaotic_cut(verdict.lifetime, verdict.democratic_count, lifetime_cut, min_democratic))
}

/// The chaotic-escape cut on recorded lifetime and democratic count.
pub fn chaotic_cut<T: Real>(lifetime: T, democratic_count: u32, lifetime_cut: T, min_democratic: u32) -> bool {
    lifetime > lifetime_cut && democratic_count >= min_democratic
}
