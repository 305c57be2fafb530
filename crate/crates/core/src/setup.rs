//! Initial conditions for the absorptivity and outcome experiments.

use rand::Rng;

use crate::dynamics::{binary_constant, BodyState, ThreeBodyState};
use crate::error::{Error, Result};
use crate::kepler::{elements_to_cartesian, OrbitalElements};
use crate::scalar::Real;
use crate::vec3::Vec3;

/// How the binary angular momentum of an absorptivity point is specified.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BinaryAngularMomentum<T> {
    /// Magnitude only; `l_F` is drawn uniformly in `[L - l_B, L + l_B]`.
    Magnitude(T),
    /// Components along and across the total angular momentum; fixes `l_F`.
    Components { along: T, across: T },
}

impl<T: Real> BinaryAngularMomentum<T> {
    pub fn magnitude(&self) -> T {
        match *self {
            BinaryAngularMomentum::Magnitude(l) => l,
            BinaryAngularMomentum::Components { along, across } => along.hypot(across),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbsorptivityConfig<T> {
    pub energy: T,
    pub angular_momentum: T,
    pub masses: [T; 3],
    pub eps_b: T,
    pub l_b: BinaryAngularMomentum<T>,
    /// Initial binary-single distance in binary semi-major axes.
    pub separation_multiple: T,
}

impl<T: Real> AbsorptivityConfig<T> {
    /// Reference charges E = -27, L = 75 sqrt(3/2), equal masses 15.
    pub fn reference(eps_b: T, l_b: BinaryAngularMomentum<T>) -> Self {
        Self {
            energy: T::lit(-27.0),
            angular_momentum: T::lit(75.0 * 1.5f64.sqrt()),
            masses: [T::lit(15.0); 3],
            eps_b,
            l_b,
            separation_multiple: T::lit(20.0),
        }
    }

    /// Binary constant of bodies 1 and 2.
    pub fn k(&self) -> T {
        binary_constant(self.masses[0], self.masses[1])
    }

    pub fn validate(&self) -> Result<()> {
        if self.masses.iter().any(|m| !(*m > T::zero())) {
            return Err(Error::InvalidInput("masses must be positive".into()));
        }
        let eps = self.eps_b;
        let l = self.l_b.magnitude();
        let forbidden = || Error::ForbiddenRegion {
            eps_b: eps.to_f64_lossy(),
            l_b: l.to_f64_lossy(),
        };
        if !(eps < T::zero()) || !(l >= T::zero()) {
            return Err(forbidden());
        }
        // relative slack lets nodes placed exactly on the circular boundary through
        if -T::lit(2.0) * eps * l * l > self.k() * (T::one() + T::lit(1e-12)) || eps > self.energy {
            return Err(forbidden());
        }
        if !(self.energy - eps > T::zero()) {
            return Err(Error::InfeasibleGeometry(
                "outer orbit must be unbound (E - eps_B > 0)".into(),
            ));
        }
        if l > self.angular_momentum {
            return Err(Error::InfeasibleGeometry(format!(
                "l_B = {l} exceeds L = {}",
                self.angular_momentum
            )));
        }
        if !(self.separation_multiple > T::zero()) {
            return Err(Error::InvalidInput("separation_multiple must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutcomeConfig<T> {
    pub masses: [T; 3],
    pub semi_major_axis: T,
    pub distance: T,
}

impl<T: Real> OutcomeConfig<T> {
    /// Total energy shared by every realization.
    pub fn energy(&self) -> T {
        let [m1, m2, m3] = self.masses;
        -(m1 * m2) / (T::lit(2.0) * self.semi_major_axis) - m3 * (m1 + m2) / self.distance
    }

    /// Magnitude of the total angular momentum (the circular binary's).
    pub fn angular_momentum(&self) -> T {
        let [m1, m2, _] = self.masses;
        m1 * m2 / (m1 + m2) * ((m1 + m2) * self.semi_major_axis).sqrt()
    }
}

impl<T: Real> Default for OutcomeConfig<T> {
    fn default() -> Self {
        Self {
            masses: [T::lit(15.0); 3],
            semi_major_axis: T::lit(5.0),
            distance: T::lit(100.0),
        }
    }
}

/// Uniform draw of `l_F` in `[L - l_B, L + l_B]`.
pub fn sample_l_f<T: Real, R: Rng + ?Sized>(l_total: T, l_b: T, rng: &mut R) -> Result<T> {
    if !(l_b >= T::zero()) || l_b > l_total {
        return Err(Error::InvalidInput(format!(
            "need 0 <= l_B <= L, got l_B = {l_b}, L = {l_total}"
        )));
    }
    let u: f64 = rng.random();
    Ok(l_total - l_b + T::lit(2.0 * u) * l_b)
}

fn uniform_angle<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.random::<f64>() * std::f64::consts::TAU)
}

/// Places the pair relative state and the single's relative state into
/// absolute coordinates and re-centers.
fn assemble<T: Real>(
    masses: [T; 3],
    rel: (Vec3<T>, Vec3<T>),
    outer: (Vec3<T>, Vec3<T>),
) -> Result<ThreeBodyState<T>> {
    let [m1, m2, m3] = masses;
    let mb = m1 + m2;
    let total = mb + m3;
    // pair center of mass sits at -m3/M * outer so the system CM is at rest at 0
    let cm_r = -(outer.0 * (m3 / total));
    let cm_v = -(outer.1 * (m3 / total));
    let b1 = BodyState::new(m1, cm_r - rel.0 * (m2 / mb), cm_v - rel.1 * (m2 / mb));
    let b2 = BodyState::new(m2, cm_r + rel.0 * (m1 / mb), cm_v + rel.1 * (m1 / mb));
    let b3 = BodyState::new(m3, cm_r + outer.0, cm_v + outer.1);
    ThreeBodyState::new([b1, b2, b3], T::zero())
}

/// Hyperbolic binary-single encounter at fixed charges and binary state.
///
/// The binary lies in the x-y plane with its pericenter on the x axis and a
/// random mean anomaly. The outer orbit has energy `E - eps_B` and is tilted
/// so the angular momenta close to `L`; its node and pericenter argument are
/// uniform. The single starts on the incoming branch.
pub fn build_absorptivity_ic<T: Real, R: Rng + ?Sized>(
    cfg: &AbsorptivityConfig<T>,
    rng: &mut R,
) -> Result<ThreeBodyState<T>> {
    cfg.validate()?;
    let two = T::lit(2.0);
    let [m1, m2, m3] = cfg.masses;
    let mb = m1 + m2;
    let total = mb + m3;
    let mu_f = mb * m3 / total;
    let l_total = cfg.angular_momentum;
    let l_b = cfg.l_b.magnitude();

    let l_max = (cfg.k() / (-two * cfg.eps_b)).sqrt();
    let a_b = m1 * m2 / (-two * cfg.eps_b);
    let ratio = (l_b / l_max).min(T::one());
    let e_b = (T::one() - ratio * ratio).max(T::zero()).sqrt();
    let mut binary = OrbitalElements::elliptic(
        a_b,
        e_b,
        T::zero(),
        T::zero(),
        T::zero(),
        uniform_angle(rng),
        mb,
    );
    binary.radial = l_b == T::zero();
    if binary.radial {
        binary.eccentricity = T::one();
    }
    let rel = elements_to_cartesian(&binary)?;

    let l_f = match cfg.l_b {
        BinaryAngularMomentum::Magnitude(_) => sample_l_f(l_total, l_b, rng)?,
        BinaryAngularMomentum::Components { along, .. } => {
            (l_total * l_total + l_b * l_b - two * l_total * along)
                .max(T::zero())
                .sqrt()
        }
    };
    let cos_incl = if l_b > T::zero() && l_f > T::zero() {
        let c = (l_total * l_total - l_b * l_b - l_f * l_f) / (two * l_b * l_f);
        let slack = T::lit(1e-12);
        if c > T::one() + slack || c < -T::one() - slack {
            return Err(Error::InfeasibleGeometry(format!(
                "no inclination closes l_B = {l_b}, l_F = {l_f} to L = {l_total}"
            )));
        }
        c.max(-T::one()).min(T::one())
    } else {
        // a radial binary carries no angular momentum: any orientation closes
        T::lit(2.0 * rng.random::<f64>() - 1.0)
    };
    if !(l_f > T::zero()) {
        return Err(Error::InfeasibleGeometry("outer orbit would be radial".into()));
    }

    let eps_f = cfg.energy - cfg.eps_b;
    let spec_f = eps_f / mu_f;
    let h_f = l_f / mu_f;
    let e_f = (T::one() + two * spec_f * h_f * h_f / (total * total)).sqrt();
    let a_h = total / (two * spec_f);
    let r0 = cfg.separation_multiple * a_b;
    let q = a_h * (e_f - T::one());
    if r0 <= q {
        return Err(Error::InfeasibleGeometry(format!(
            "initial separation {r0} inside the outer pericenter {q}"
        )));
    }
    let big_h = -((r0 / a_h + T::one()) / e_f).acosh();
    let mean_f = e_f * big_h.sinh() - big_h;
    let node = uniform_angle(rng);
    let psi_f = uniform_angle(rng);
    let outer_el = OrbitalElements::hyperbolic(
        spec_f,
        e_f,
        cos_incl.acos(),
        node,
        psi_f,
        mean_f,
        total,
    );
    let outer = elements_to_cartesian(&outer_el)?;
    assemble(cfg.masses, rel, outer)
}

/// Circular binary with the single at rest at `distance` from its center of
/// mass. The binary phase is uniform and the cosine of its inclination to
/// the binary-single line is uniform in `[-1, 1]`.
pub fn build_outcome_ic<T: Real, R: Rng + ?Sized>(
    cfg: &OutcomeConfig<T>,
    rng: &mut R,
) -> Result<ThreeBodyState<T>> {
    if cfg.masses.iter().any(|m| !(*m > T::zero()))
        || !(cfg.semi_major_axis > T::zero())
        || !(cfg.distance > cfg.semi_major_axis)
    {
        return Err(Error::InvalidInput("invalid outcome configuration".into()));
    }
    let phase: T = uniform_angle(rng);
    let cos_i = T::lit(2.0 * rng.random::<f64>() - 1.0);
    let mb = cfg.masses[0] + cfg.masses[1];
    let binary = OrbitalElements::elliptic(
        cfg.semi_major_axis,
        T::zero(),
        cos_i.acos(),
        T::zero(),
        T::zero(),
        phase,
        mb,
    );
    let rel = elements_to_cartesian(&binary)?;
    let outer = (Vec3::new(T::zero(), T::zero(), cfg.distance), Vec3::zero());
    assemble(cfg.masses, rel, outer)
}
