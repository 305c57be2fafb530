//! Keplerian elements for elliptic and hyperbolic two-body orbits, and the
//! anomaly solvers needed to place bodies along them.
//!
//! Elements are expressed per unit reduced mass: `specific_energy` is
//! `v^2/2 - GM/r` of the relative orbit and `total_mass` is `GM` (G = 1).
//! The physical two-body energy is `mu * specific_energy`.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

const MAX_ITERATIONS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrbitClass {
    Elliptic,
    Hyperbolic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitalElements<T> {
    pub orbit_class: OrbitClass,
    /// `v^2/2 - M/r` of the relative orbit.
    pub specific_energy: T,
    pub eccentricity: T,
    pub inclination: T,
    pub node_longitude: T,
    pub pericenter_argument: T,
    /// Mean anomaly (elliptic, in `[0, 2pi)`) or hyperbolic mean anomaly.
    pub mean_anomaly: T,
    pub total_mass: T,
    /// Set for radial (zero angular momentum) orbits, reported with `e = 1`.
    pub radial: bool,
}

impl<T: Real> OrbitalElements<T> {
    /// Elliptic elements from a semi-major axis.
    pub fn elliptic(
        semi_major_axis: T,
        eccentricity: T,
        inclination: T,
        node_longitude: T,
        pericenter_argument: T,
        mean_anomaly: T,
        total_mass: T,
    ) -> Self {
        Self {
            orbit_class: OrbitClass::Elliptic,
            specific_energy: -total_mass / (T::lit(2.0) * semi_major_axis),
            eccentricity,
            inclination,
            node_longitude,
            pericenter_argument,
            mean_anomaly,
            total_mass,
            radial: false,
        }
    }

    /// Hyperbolic elements from the specific energy (> 0).
    pub fn hyperbolic(
        specific_energy: T,
        eccentricity: T,
        inclination: T,
        node_longitude: T,
        pericenter_argument: T,
        mean_anomaly: T,
        total_mass: T,
    ) -> Self {
        Self {
            orbit_class: OrbitClass::Hyperbolic,
            specific_energy,
            eccentricity,
            inclination,
            node_longitude,
            pericenter_argument,
            mean_anomaly,
            total_mass,
            radial: false,
        }
    }

    /// Semi-major axis; negative for hyperbolic orbits.
    pub fn semi_major_axis(&self) -> T {
        -self.total_mass / (T::lit(2.0) * self.specific_energy)
    }

    /// Specific angular momentum magnitude.
    pub fn specific_angular_momentum(&self) -> T {
        let a = self.semi_major_axis().abs();
        let e2 = self.eccentricity * self.eccentricity;
        let f = match self.orbit_class {
            OrbitClass::Elliptic => T::one() - e2,
            OrbitClass::Hyperbolic => e2 - T::one(),
        };
        (self.total_mass * a * f.max(T::zero())).sqrt()
    }

    /// Orbital period of an elliptic orbit.
    pub fn period(&self) -> Option<T> {
        match self.orbit_class {
            OrbitClass::Elliptic => {
                let a = self.semi_major_axis();
                Some(T::TAU() * (a * a * a / self.total_mass).sqrt())
            }
            OrbitClass::Hyperbolic => None,
        }
    }

    pub fn pericenter(&self) -> T {
        self.semi_major_axis().abs()
            * match self.orbit_class {
                OrbitClass::Elliptic => T::one() - self.eccentricity,
                OrbitClass::Hyperbolic => self.eccentricity - T::one(),
            }
    }

    pub fn apocenter(&self) -> Option<T> {
        match self.orbit_class {
            OrbitClass::Elliptic => Some(self.semi_major_axis() * (T::one() + self.eccentricity)),
            OrbitClass::Hyperbolic => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let e = self.eccentricity;
        let ok = self.total_mass > T::zero()
            && match self.orbit_class {
                OrbitClass::Elliptic => {
                    self.specific_energy < T::zero()
                        && e >= T::zero()
                        && (e < T::one() || (self.radial && e == T::one()))
                }
                OrbitClass::Hyperbolic => self.specific_energy > T::zero() && e > T::one(),
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "{:?} orbit with energy {} and eccentricity {}",
                self.orbit_class, self.specific_energy, e
            )))
        }
    }
}

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_two_pi<T: Real>(x: T) -> T {
    let tau = T::TAU();
    let r = x % tau;
    let r = if r < T::zero() { r + tau } else { r };
    if r >= tau {
        T::zero()
    } else {
        r
    }
}

/// Newton iteration on a bracketed monotone function, falling back to
/// bisection whenever the Newton update leaves the bracket or stalls.
fn safeguarded_newton<T: Real>(
    f: impl Fn(T) -> (T, T),
    mut lo: T,
    mut hi: T,
    start: T,
    tol: T,
) -> Option<T> {
    let mut x = start.max(lo).min(hi);
    for _ in 0..MAX_ITERATIONS {
        let (fx, dfx) = f(x);
        if fx.abs() <= tol {
            return Some(x);
        }
        if fx < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx > T::zero() && newton > lo && newton < hi {
            newton
        } else {
            T::lit(0.5) * (lo + hi)
        };
        if next == x {
            // no representable progress; residual is at rounding level
            return Some(x);
        }
        x = next;
    }
    let (fx, _) = f(x);
    (fx.abs() <= tol).then_some(x)
}

/// Solves `E - e sin E = M` for the eccentric anomaly, `0 <= e < 1`.
pub fn solve_kepler_elliptic<T: Real>(mean_anomaly: T, eccentricity: T) -> Result<T> {
    let e = eccentricity;
    if !(e >= T::zero() && e < T::one()) || !mean_anomaly.is_finite() {
        return Err(Error::InvalidInput(format!(
            "elliptic Kepler equation needs 0 <= e < 1, got e = {e}"
        )));
    }
    elliptic_root(mean_anomaly, e)
}

/// Root of Kepler's equation for `0 <= e <= 1`; `e = 1` covers radial orbits.
fn elliptic_root<T: Real>(mean_anomaly: T, e: T) -> Result<T> {
    let tau = T::TAU();
    let reduced = wrap_two_pi(mean_anomaly);
    let turns = mean_anomaly - reduced;
    let tol = T::lit(1e-13) * (T::one() + reduced.abs());
    let start = if e < T::lit(0.8) { reduced } else { T::PI() };
    let f = |x: T| (x - e * x.sin() - reduced, T::one() - e * x.cos());
    let root = safeguarded_newton(f, T::zero(), tau, start, tol).ok_or(
        Error::SolverNonConvergence {
            mean_anomaly: mean_anomaly.to_f64_lossy(),
            eccentricity: e.to_f64_lossy(),
            iterations: MAX_ITERATIONS,
        },
    )?;
    Ok(root + turns)
}

/// Solves `e sinh H - H = M` for the hyperbolic anomaly, `e > 1`.
pub fn solve_kepler_hyperbolic<T: Real>(mean_anomaly: T, eccentricity: T) -> Result<T> {
    let e = eccentricity;
    if !(e > T::one()) || !mean_anomaly.is_finite() {
        return Err(Error::InvalidInput(format!(
            "hyperbolic Kepler equation needs e > 1, got e = {e}"
        )));
    }
    if mean_anomaly == T::zero() {
        return Ok(T::zero());
    }
    let m = mean_anomaly.abs();
    let f = |x: T| (e * x.sinh() - x - m, e * x.cosh() - T::one());
    // grow the upper bracket until f changes sign
    let mut hi = (m / (e - T::one())).min((T::lit(2.0) * m / e).asinh() + T::one());
    let mut guard = 0;
    while f(hi).0 < T::zero() {
        hi = hi * T::lit(2.0);
        guard += 1;
        if guard > 200 {
            break;
        }
    }
    let tol = T::lit(1e-13) * (T::one() + m);
    let start = (m / e).asinh().max(T::zero()).min(hi);
    let root = safeguarded_newton(f, T::zero(), hi, start, tol).ok_or(
        Error::SolverNonConvergence {
            mean_anomaly: mean_anomaly.to_f64_lossy(),
            eccentricity: e.to_f64_lossy(),
            iterations: MAX_ITERATIONS,
        },
    )?;
    Ok(if mean_anomaly < T::zero() { -root } else { root })
}

/// Relative position and velocity (second body minus first) on the orbit.
pub fn elements_to_cartesian<T: Real>(elem: &OrbitalElements<T>) -> Result<(Vec3<T>, Vec3<T>)> {
    elem.validate()?;
    let gm = elem.total_mass;
    let e = elem.eccentricity;
    let a = elem.semi_major_axis().abs();
    let (pos, vel) = match elem.orbit_class {
        OrbitClass::Elliptic => {
            let ea = elliptic_root(elem.mean_anomaly, e)?;
            let (s, c) = ea.sin_cos();
            let root = (T::one() - e * e).max(T::zero()).sqrt();
            let r = a * (T::one() - e * c);
            let pos = Vec3::new(a * (c - e), a * root * s, T::zero());
            let k = (gm * a).sqrt() / r;
            let vel = Vec3::new(-k * s, k * root * c, T::zero());
            (pos, vel)
        }
        OrbitClass::Hyperbolic => {
            let ha = solve_kepler_hyperbolic(elem.mean_anomaly, e)?;
            let (s, c) = (ha.sinh(), ha.cosh());
            let root = (e * e - T::one()).sqrt();
            let pos = Vec3::new(a * (e - c), a * root * s, T::zero());
            let k = (gm / a).sqrt() / (e * c - T::one());
            let vel = Vec3::new(-k * s, k * root * c, T::zero());
            (pos, vel)
        }
    };
    Ok((
        perifocal_to_inertial(pos, elem),
        perifocal_to_inertial(vel, elem),
    ))
}

fn perifocal_to_inertial<T: Real>(v: Vec3<T>, elem: &OrbitalElements<T>) -> Vec3<T> {
    v.rotate_z(elem.pericenter_argument)
        .rotate_x(elem.inclination)
        .rotate_z(elem.node_longitude)
}

/// Orbital elements of a relative state. Inverse of [`elements_to_cartesian`].
///
/// A degenerate node (inclination 0 or pi) puts the line of nodes on the x
/// axis; a circular orbit measures the anomaly from the line of nodes.
pub fn cartesian_to_elements<T: Real>(
    position: Vec3<T>,
    velocity: Vec3<T>,
    total_mass: T,
) -> Result<OrbitalElements<T>> {
    let r = position.norm();
    if !(r > T::zero()) {
        return Err(Error::InvalidInput("zero separation".into()));
    }
    if !(total_mass > T::zero()) {
        return Err(Error::InvalidInput("non-positive total mass".into()));
    }
    let gm = total_mass;
    let energy = T::lit(0.5) * velocity.norm_sq() - gm / r;
    let scale = gm / r;
    if energy.abs() < T::lit(1e-12) * scale.max(T::one()) {
        return Err(Error::ParabolicOrbit(energy.to_f64_lossy()));
    }
    let h = position.cross(velocity);
    let h_norm = h.norm();
    let orbit_class = if energy < T::zero() {
        OrbitClass::Elliptic
    } else {
        OrbitClass::Hyperbolic
    };
    let a = -gm / (T::lit(2.0) * energy);

    // radial orbit: e = 1 on a line
    let radial_scale = (gm * r).sqrt();
    if h_norm <= T::lit(1e-14) * radial_scale * (T::one() + r) {
        let dir = position / r;
        return Ok(OrbitalElements {
            orbit_class,
            specific_energy: energy,
            eccentricity: T::one(),
            inclination: T::zero(),
            node_longitude: T::zero(),
            pericenter_argument: wrap_two_pi(dir.y.atan2(dir.x) + T::PI()),
            mean_anomaly: radial_mean_anomaly(r, position.dot(velocity), a, gm, orbit_class),
            total_mass,
            radial: true,
        });
    }

    let h_hat = h / h_norm;
    let e_vec = velocity.cross(h) / gm - position / r;
    let e = e_vec.norm();
    let inclination = h_hat.z.max(-T::one()).min(T::one()).acos();
    let node = Vec3::new(-h.y, h.x, T::zero());
    let (node_hat, node_longitude) = match node.normalized() {
        Some(n) if node.norm() > T::lit(1e-13) * h_norm => {
            (n, wrap_two_pi(n.y.atan2(n.x)))
        }
        _ => (Vec3::unit_x(), T::zero()),
    };
    let in_plane = h_hat.cross(node_hat);
    let circular = e < T::lit(1e-13);
    let pericenter_argument = if circular {
        T::zero()
    } else {
        wrap_two_pi(e_vec.dot(in_plane).atan2(e_vec.dot(node_hat)))
    };
    let peri_hat = if circular {
        node_hat
    } else {
        e_vec / e
    };
    let peri_perp = h_hat.cross(peri_hat);
    let nu = position.dot(peri_perp).atan2(position.dot(peri_hat));
    let mean_anomaly = match orbit_class {
        OrbitClass::Elliptic => {
            let ea = if circular {
                nu
            } else {
                let (s, c) = nu.sin_cos();
                let root = (T::one() - e * e).max(T::zero()).sqrt();
                (root * s).atan2(e + c)
            };
            wrap_two_pi(ea - e * ea.sin())
        }
        OrbitClass::Hyperbolic => {
            let (s, c) = nu.sin_cos();
            let root = (e * e - T::one()).sqrt();
            // tanh(H/2) = sqrt((e-1)/(e+1)) tan(nu/2), written via sinh H
            let sinh_h = root * s / (T::one() + e * c);
            let ha = sinh_h.asinh();
            e * sinh_h - ha
        }
    };
    Ok(OrbitalElements {
        orbit_class,
        specific_energy: energy,
        eccentricity: e,
        inclination,
        node_longitude,
        pericenter_argument,
        mean_anomaly,
        total_mass,
        radial: false,
    })
}

fn radial_mean_anomaly<T: Real>(r: T, rdotv: T, a: T, gm: T, class: OrbitClass) -> T {
    match class {
        OrbitClass::Elliptic => {
            // r = a (1 - cos E), r rdot = sqrt(GM a) sin E
            let c = (T::one() - r / a).max(-T::one()).min(T::one());
            let s = rdotv / (gm * a).sqrt();
            let ea = s.atan2(c);
            wrap_two_pi(ea - ea.sin())
        }
        OrbitClass::Hyperbolic => {
            let aa = a.abs();
            let sinh_h = rdotv / (gm * aa).sqrt();
            sinh_h - sinh_h.asinh()
        }
    }
}
