//! Newtonian three-body state, conserved charges, and binary + single
//! decomposition. Units have G = 1.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodyState<T> {
    pub mass: T,
    pub position: Vec3<T>,
    pub velocity: Vec3<T>,
}

impl<T: Real> BodyState<T> {
    pub fn new(mass: T, position: Vec3<T>, velocity: Vec3<T>) -> Self {
        Self {
            mass,
            position,
            velocity,
        }
    }

    pub fn momentum(&self) -> Vec3<T> {
        self.velocity * self.mass
    }
}

/// Phase-space point of the three-body system plus simulation time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreeBodyState<T> {
    pub bodies: [BodyState<T>; 3],
    pub time: T,
}

impl<T: Real> ThreeBodyState<T> {
    /// Builds a state and moves it into the center-of-mass frame.
    pub fn new(bodies: [BodyState<T>; 3], time: T) -> Result<Self> {
        for (i, b) in bodies.iter().enumerate() {
            if !(b.mass > T::zero()) || !b.mass.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "body {} has non-positive mass",
                    i + 1
                )));
            }
            if !b.position.is_finite() || !b.velocity.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "body {} has non-finite coordinates",
                    i + 1
                )));
            }
        }
        let mut s = Self { bodies, time };
        s.recenter();
        Ok(s)
    }

    /// Wraps bodies as given; no validation and no re-centering.
    pub fn from_raw(bodies: [BodyState<T>; 3], time: T) -> Self {
        Self { bodies, time }
    }

    pub fn masses(&self) -> [T; 3] {
        [
            self.bodies[0].mass,
            self.bodies[1].mass,
            self.bodies[2].mass,
        ]
    }

    pub fn total_mass(&self) -> T {
        self.bodies.iter().map(|b| b.mass).sum()
    }

    pub fn center_of_mass(&self) -> (Vec3<T>, Vec3<T>) {
        let m = self.total_mass();
        let mut r = Vec3::zero();
        let mut v = Vec3::zero();
        for b in &self.bodies {
            r += b.position * b.mass;
            v += b.velocity * b.mass;
        }
        (r / m, v / m)
    }

    pub fn recenter(&mut self) {
        let (rc, vc) = self.center_of_mass();
        for b in &mut self.bodies {
            b.position -= rc;
            b.velocity -= vc;
        }
    }

    pub fn separation(&self, i: usize, j: usize) -> T {
        (self.bodies[i].position - self.bodies[j].position).norm()
    }

    /// Pairwise distances ordered as (1,2), (1,3), (2,3).
    pub fn separations(&self) -> [T; 3] {
        PairId::ALL.map(|p| {
            let (a, b) = p.members();
            self.separation(a, b)
        })
    }

    pub fn linear_momentum(&self) -> Vec3<T> {
        let mut p = Vec3::zero();
        for b in &self.bodies {
            p += b.momentum();
        }
        p
    }

    /// Time-reversed copy (velocities negated).
    pub fn reversed(&self) -> Self {
        let mut s = *self;
        for b in &mut s.bodies {
            b.velocity = -b.velocity;
        }
        s
    }

    pub fn cast<U: Real>(&self) -> ThreeBodyState<U> {
        ThreeBodyState {
            bodies: self.bodies.map(|b| BodyState {
                mass: U::lit(b.mass.to_f64_lossy()),
                position: b.position.cast(),
                velocity: b.velocity.cast(),
            }),
            time: U::lit(self.time.to_f64_lossy()),
        }
    }
}

/// Total energy, angular momentum and linear momentum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConservedCharges<T> {
    pub energy: T,
    pub angular_momentum: Vec3<T>,
    pub linear_momentum: Vec3<T>,
}

impl<T: Real> ConservedCharges<T> {
    pub fn of(state: &ThreeBodyState<T>) -> Result<Self> {
        Ok(Self {
            energy: total_energy(state)?,
            angular_momentum: total_angular_momentum(state),
            linear_momentum: state.linear_momentum(),
        })
    }
}

/// One of the three pairs, together with the complementary single.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairId {
    P12,
    P13,
    P23,
}

impl PairId {
    /// Ordered by pair index; this order is the tie-break.
    pub const ALL: [PairId; 3] = [PairId::P12, PairId::P13, PairId::P23];

    /// Zero-based pair member indices.
    pub fn members(self) -> (usize, usize) {
        match self {
            PairId::P12 => (0, 1),
            PairId::P13 => (0, 2),
            PairId::P23 => (1, 2),
        }
    }

    /// Zero-based index of the single.
    pub fn single(self) -> usize {
        match self {
            PairId::P12 => 2,
            PairId::P13 => 1,
            PairId::P23 => 0,
        }
    }

    /// Escaper identity s in {1, 2, 3}.
    pub fn escaper(self) -> u8 {
        self.single() as u8 + 1
    }

    /// Pair whose single is the given one-based escaper identity.
    pub fn from_escaper(s: u8) -> Option<Self> {
        match s {
            1 => Some(PairId::P23),
            2 => Some(PairId::P13),
            3 => Some(PairId::P12),
            _ => None,
        }
    }

    /// Position in [`PairId::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

fn check_separations<T: Real>(state: &ThreeBodyState<T>) -> Result<[T; 3]> {
    let r = state.separations();
    for (p, d) in PairId::ALL.iter().zip(r) {
        if !(d > T::zero()) {
            let (a, b) = p.members();
            return Err(Error::SingularConfiguration(a + 1, b + 1));
        }
    }
    Ok(r)
}

/// Kinetic plus potential energy with G = 1.
pub fn total_energy<T: Real>(state: &ThreeBodyState<T>) -> Result<T> {
    let r = check_separations(state)?;
    let m = state.masses();
    let kinetic: T = state
        .bodies
        .iter()
        .map(|b| T::lit(0.5) * b.mass * b.velocity.norm_sq())
        .sum();
    let potential = -(m[0] * m[1] / r[0] + m[0] * m[2] / r[1] + m[1] * m[2] / r[2]);
    Ok(kinetic + potential)
}

/// Total angular momentum about the center of mass.
pub fn total_angular_momentum<T: Real>(state: &ThreeBodyState<T>) -> Vec3<T> {
    let (rc, vc) = state.center_of_mass();
    let mut l = Vec3::zero();
    for b in &state.bodies {
        l += (b.position - rc).cross(b.velocity - vc) * b.mass;
    }
    l
}

/// Binary constant k = mu (m_a m_b)^2 with G = 1.
pub fn binary_constant<T: Real>(mass_a: T, mass_b: T) -> T {
    let mu = mass_a * mass_b / (mass_a + mass_b);
    let g = mass_a * mass_b;
    mu * g * g
}

/// Two-body energy of a pair: kinetic energy of the relative motion plus the
/// pair potential.
pub fn pair_energy<T: Real>(state: &ThreeBodyState<T>, pair: PairId) -> Result<T> {
    let (a, b) = pair.members();
    let ba = &state.bodies[a];
    let bb = &state.bodies[b];
    let r = (bb.position - ba.position).norm();
    if !(r > T::zero()) {
        return Err(Error::SingularConfiguration(a + 1, b + 1));
    }
    let mu = ba.mass * bb.mass / (ba.mass + bb.mass);
    let v2 = (bb.velocity - ba.velocity).norm_sq();
    Ok(T::lit(0.5) * mu * v2 - ba.mass * bb.mass / r)
}

/// The pair with minimal two-body energy. Ties go to the lowest pair index.
pub fn most_bound_pair<T: Real>(state: &ThreeBodyState<T>) -> Result<(PairId, T)> {
    let mut best = (PairId::P12, pair_energy(state, PairId::P12)?);
    for p in [PairId::P13, PairId::P23] {
        let e = pair_energy(state, p)?;
        if e < best.1 {
            best = (p, e);
        }
    }
    Ok(best)
}

/// Binary and outer-orbit quantities for a given pairing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decomposition<T> {
    pub pairing: PairId,
    /// Binary energy eps_B.
    pub eps_b: T,
    /// Binary angular momentum l_B.
    pub l_b: Vec3<T>,
    /// Outer-orbit energy eps_F of the single about the collapsed binary.
    pub eps_f: T,
    /// Outer-orbit angular momentum l_F.
    pub l_f: Vec3<T>,
    /// Relative position of the pair, r_b - r_a.
    pub rel_position: Vec3<T>,
    pub rel_velocity: Vec3<T>,
    /// Position of the single relative to the pair's center of mass.
    pub outer_position: Vec3<T>,
    pub outer_velocity: Vec3<T>,
}

impl<T: Real> Decomposition<T> {
    pub fn binary_mass(&self, state: &ThreeBodyState<T>) -> T {
        let (a, b) = self.pairing.members();
        state.bodies[a].mass + state.bodies[b].mass
    }

    /// Radial velocity of the single away from the binary.
    pub fn radial_velocity(&self) -> T {
        let r = self.outer_position.norm();
        self.outer_position.dot(self.outer_velocity) / r
    }
}

/// Splits the state into the pair's internal motion and the single's motion
/// relative to the pair's center of mass. `l_b + l_f` equals the total
/// angular momentum identically.
pub fn decompose<T: Real>(state: &ThreeBodyState<T>, pairing: PairId) -> Result<Decomposition<T>> {
    let (a, b) = pairing.members();
    let s = pairing.single();
    let (ba, bb, bs) = (&state.bodies[a], &state.bodies[b], &state.bodies[s]);
    let m_bin = ba.mass + bb.mass;
    let mu_b = ba.mass * bb.mass / m_bin;
    let rel_r = bb.position - ba.position;
    let rel_v = bb.velocity - ba.velocity;
    let r = rel_r.norm();
    if !(r > T::zero()) {
        return Err(Error::SingularConfiguration(a + 1, b + 1));
    }
    let eps_b = T::lit(0.5) * mu_b * rel_v.norm_sq() - ba.mass * bb.mass / r;
    let l_b = rel_r.cross(rel_v) * mu_b;

    let cm_r = (ba.position * ba.mass + bb.position * bb.mass) / m_bin;
    let cm_v = (ba.velocity * ba.mass + bb.velocity * bb.mass) / m_bin;
    let out_r = bs.position - cm_r;
    let out_v = bs.velocity - cm_v;
    let big_r = out_r.norm();
    if !(big_r > T::zero()) {
        return Err(Error::SingularConfiguration(s + 1, s + 1));
    }
    let mu_f = m_bin * bs.mass / (m_bin + bs.mass);
    let eps_f = T::lit(0.5) * mu_f * out_v.norm_sq() - m_bin * bs.mass / big_r;
    let l_f = out_r.cross(out_v) * mu_f;

    Ok(Decomposition {
        pairing,
        eps_b,
        l_b,
        eps_f,
        l_f,
        rel_position: rel_r,
        rel_velocity: rel_v,
        outer_position: out_r,
        outer_velocity: out_v,
    })
}

/// Modified homology radius 3 r_min^2 / (r12^2 + r13^2 + r23^2); 1 for an
/// equilateral triangle and tending to 0 for hierarchical configurations.
pub fn homology_radius<T: Real>(state: &ThreeBodyState<T>) -> Result<T> {
    let r = check_separations(state)?;
    Ok(homology_radius_from_separations(r))
}

pub(crate) fn homology_radius_from_separations<T: Real>(r: [T; 3]) -> T {
    let rmin = r[0].min(r[1]).min(r[2]);
    let denom = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    (T::lit(3.0) * rmin * rmin / denom).min(T::one())
}
