//! Exact Jones-calculus algebra for fully polarized light.
//!
//! States are normalized two-component complex vectors, operators are 2×2
//! complex matrices. Waveplate constructors keep their conventional global
//! phases (e^{-iπ/2} for half-wave, e^{-iπ/4} for quarter-wave) so matrix
//! identities hold entrywise; [`fidelity`] is phase-blind, so downstream
//! clustering never sees them.
//!
//! Conventions: all angles are radians; waveplate matrices are π-periodic in
//! their fast-axis angle; the Poincaré coordinates are the orientation angle
//! ψ ∈ [0, π) and ellipticity angle χ ∈ [−π/4, π/4], with (2ψ, 2χ) the
//! azimuth/latitude on the sphere.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance for algebraic identities (unitarity, involutions, norms).
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Tolerance on s1²+s2²+s3² = s0² for pure states.
pub const PURITY_TOL: f64 = 1e-10;

/// Wraps an angle into the canonical waveplate range [0, π).
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(PI);
    // rem_euclid can round up to π itself for tiny negative inputs.
    if w >= PI {
        0.0
    } else {
        w
    }
}

fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {value}")))
    }
}

/// A normalized polarization state (single-qubit state).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector {
    pub ex: Complex64,
    pub ey: Complex64,
}

impl JonesVector {
    /// Builds a state from complex amplitudes, normalizing them.
    pub fn new(ex: Complex64, ey: Complex64) -> Result<Self> {
        for (name, c) in [("ex", ex), ("ey", ey)] {
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite, got {c}")));
            }
        }
        let norm = (ex.norm_sqr() + ey.norm_sqr()).sqrt();
        if norm <= 0.0 {
            return Err(Error::invalid("cannot normalize the zero vector"));
        }
        Ok(Self {
            ex: ex / norm,
            ey: ey / norm,
        })
    }

    /// Horizontal polarization |h⟩ = (1, 0), the fixed input of the bench.
    pub fn horizontal() -> Self {
        Self {
            ex: Complex64::new(1.0, 0.0),
            ey: Complex64::new(0.0, 0.0),
        }
    }

    /// Vertical polarization |v⟩ = (0, 1).
    pub fn vertical() -> Self {
        Self {
            ex: Complex64::new(0.0, 0.0),
            ey: Complex64::new(1.0, 0.0),
        }
    }

    /// State at the given Poincaré coordinates (standard polarization ellipse).
    pub fn from_sphere(angles: SphereAngles) -> Self {
        let (sp, cp) = angles.psi.sin_cos();
        let (sc, cc) = angles.chi.sin_cos();
        Self {
            ex: Complex64::new(cp * cc, -sp * sc),
            ey: Complex64::new(sp * cc, cp * sc),
        }
    }

    /// State with the given (not necessarily unit) Bloch/Stokes direction.
    pub fn from_bloch(s1: f64, s2: f64, s3: f64) -> Result<Self> {
        for (name, v) in [("s1", s1), ("s2", s2), ("s3", s3)] {
            ensure_finite(name, v)?;
        }
        let r = (s1 * s1 + s2 * s2 + s3 * s3).sqrt();
        if r <= 0.0 {
            return Err(Error::invalid("zero Bloch vector has no direction"));
        }
        let psi = wrap_angle(0.5 * s2.atan2(s1));
        let chi = 0.5 * (s3 / r).clamp(-1.0, 1.0).asin();
        Ok(Self::from_sphere(SphereAngles { psi, chi }))
    }

    pub fn norm(&self) -> f64 {
        (self.ex.norm_sqr() + self.ey.norm_sqr()).sqrt()
    }

    /// Stokes parameters of this (pure) state; s0 = 1.
    pub fn to_stokes(&self) -> StokesVector {
        let cross = self.ex.conj() * self.ey;
        StokesVector {
            s0: self.ex.norm_sqr() + self.ey.norm_sqr(),
            s1: self.ex.norm_sqr() - self.ey.norm_sqr(),
            s2: 2.0 * cross.re,
            s3: 2.0 * cross.im,
        }
    }
}

/// Squared overlap |⟨u|v⟩|² between two normalized states, in [0, 1].
///
/// Invariant under a global phase on either argument.
pub fn fidelity(u: &JonesVector, v: &JonesVector) -> f64 {
    let overlap = u.ex.conj() * v.ex + u.ey.conj() * v.ey;
    overlap.norm_sqr().clamp(0.0, 1.0)
}

/// A 2×2 complex operator acting on [`JonesVector`]s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesMatrix {
    pub m00: Complex64,
    pub m01: Complex64,
    pub m10: Complex64,
    pub m11: Complex64,
}

impl JonesMatrix {
    pub fn identity() -> Self {
        Self {
            m00: Complex64::new(1.0, 0.0),
            m01: Complex64::new(0.0, 0.0),
            m10: Complex64::new(0.0, 0.0),
            m11: Complex64::new(1.0, 0.0),
        }
    }

    /// Ideal half-wave plate with fast axis at `beta`:
    ///
    /// e^{-iπ/2} · [[cos²β − sin²β, 2 cosβ sinβ], [2 cosβ sinβ, sin²β − cos²β]]
    pub fn hwp(beta: f64) -> Result<Self> {
        ensure_finite("beta", beta)?;
        let (s, c) = beta.sin_cos();
        let phase = Complex64::new(0.0, -1.0); // e^{-iπ/2}
        let diag = c * c - s * s;
        let off = 2.0 * c * s;
        Ok(Self {
            m00: phase * diag,
            m01: phase * off,
            m10: phase * off,
            m11: phase * -diag,
        })
    }

    /// Ideal quarter-wave plate with fast axis at `alpha`:
    ///
    /// e^{-iπ/4} · [[cos²α + i sin²α, (1−i) cosα sinα], [(1−i) cosα sinα, sin²α + i cos²α]]
    pub fn qwp(alpha: f64) -> Result<Self> {
        ensure_finite("alpha", alpha)?;
        let (s, c) = alpha.sin_cos();
        let phase = Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2); // e^{-iπ/4}
        let off = Complex64::new(1.0, -1.0) * (c * s);
        Ok(Self {
            m00: phase * Complex64::new(c * c, s * s),
            m01: phase * off,
            m10: phase * off,
            m11: phase * Complex64::new(s * s, c * c),
        })
    }

    /// General linear retarder with retardance `delta` and fast axis `theta`:
    ///
    /// e^{-iδ/2} · [[cos²θ + e^{iδ} sin²θ, (1 − e^{iδ}) cosθ sinθ],
    ///              [(1 − e^{iδ}) cosθ sinθ, sin²θ + e^{iδ} cos²θ]]
    ///
    /// Reduces to [`hwp`](Self::hwp) at δ = π and [`qwp`](Self::qwp) at δ = π/2.
    pub fn retarder(delta: f64, theta: f64) -> Result<Self> {
        ensure_finite("delta", delta)?;
        ensure_finite("theta", theta)?;
        let (s, c) = theta.sin_cos();
        let eid = Complex64::new(delta.cos(), delta.sin());
        let phase = Complex64::new((delta / 2.0).cos(), -(delta / 2.0).sin());
        let off = (Complex64::new(1.0, 0.0) - eid) * (c * s);
        Ok(Self {
            m00: phase * (Complex64::new(c * c, 0.0) + eid * (s * s)),
            m01: phase * off,
            m10: phase * off,
            m11: phase * (Complex64::new(s * s, 0.0) + eid * (c * c)),
        })
    }

    /// Matrix product `self · rhs` (rhs acts first).
    pub fn mul(&self, rhs: &Self) -> Self {
        Self {
            m00: self.m00 * rhs.m00 + self.m01 * rhs.m10,
            m01: self.m00 * rhs.m01 + self.m01 * rhs.m11,
            m10: self.m10 * rhs.m00 + self.m11 * rhs.m10,
            m11: self.m10 * rhs.m01 + self.m11 * rhs.m11,
        }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self {
            m00: self.m00.conj(),
            m01: self.m10.conj(),
            m10: self.m01.conj(),
            m11: self.m11.conj(),
        }
    }

    /// Collapses an application-ordered plate list into one matrix, so that
    /// `compose([a, b]).apply(v) == b.apply(&a.apply(v))`.
    pub fn compose(plates: &[JonesMatrix]) -> Result<Self> {
        let mut iter = plates.iter();
        let first = *iter
            .next()
            .ok_or_else(|| Error::invalid("compose requires at least one plate"))?;
        Ok(iter.fold(first, |acc, m| m.mul(&acc)))
    }

    /// Applies the operator to a state. The result is renormalized only when
    /// numerical drift exceeds the algebraic tolerance.
    pub fn apply(&self, v: &JonesVector) -> JonesVector {
        let ex = self.m00 * v.ex + self.m01 * v.ey;
        let ey = self.m10 * v.ex + self.m11 * v.ey;
        let norm = (ex.norm_sqr() + ey.norm_sqr()).sqrt();
        if (norm - 1.0).abs() > ALGEBRA_TOL && norm > 0.0 {
            JonesVector {
                ex: ex / norm,
                ey: ey / norm,
            }
        } else {
            JonesVector { ex, ey }
        }
    }

    /// Largest entrywise deviation of M†M from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let g = self.dagger().mul(self);
        let id = Self::identity();
        [
            g.m00 - id.m00,
            g.m01 - id.m01,
            g.m10 - id.m10,
            g.m11 - id.m11,
        ]
        .iter()
        .map(|d| d.norm())
        .fold(0.0, f64::max)
    }
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Intensity-normalized Stokes parameters as read by a polarimeter.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StokesVector {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesVector {
    /// Degree of polarization √(s1²+s2²+s3²)/s0; 1 for pure states.
    pub fn purity(&self) -> f64 {
        (self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3).sqrt() / self.s0
    }

    /// Unit Bloch direction (s1, s2, s3)/s0.
    pub fn bloch(&self) -> [f64; 3] {
        [self.s1 / self.s0, self.s2 / self.s0, self.s3 / self.s0]
    }

    /// Poincaré coordinates of a pure state.
    ///
    /// Fails with [`Error::DegradedPurity`] when the state departs from the
    /// sphere surface by more than 1e-6. At the circular-polarization poles
    /// the orientation ψ is undefined and fixed to 0 by convention.
    pub fn to_sphere(&self) -> Result<SphereAngles> {
        if !(self.s0 > 0.0) {
            return Err(Error::invalid(format!("s0 must be positive, got {}", self.s0)));
        }
        let purity = self.purity();
        if (purity - 1.0).abs() > 1e-6 {
            return Err(Error::DegradedPurity { purity });
        }
        let linear = self.s1.hypot(self.s2) / self.s0;
        let psi = if linear < 1e-12 {
            0.0
        } else {
            let half = 0.5 * self.s2.atan2(self.s1);
            wrap_angle(half)
        };
        let chi = 0.5 * (self.s3 / self.s0).clamp(-1.0, 1.0).asin();
        Ok(SphereAngles { psi, chi })
    }
}

/// Poincaré-sphere coordinates: orientation ψ ∈ [0, π), ellipticity χ ∈ [−π/4, π/4].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SphereAngles {
    pub psi: f64,
    pub chi: f64,
}

impl SphereAngles {
    pub fn new(psi: f64, chi: f64) -> Result<Self> {
        ensure_finite("psi", psi)?;
        ensure_finite("chi", chi)?;
        if !(0.0..PI).contains(&psi) {
            return Err(Error::invalid(format!("psi {psi} outside [0, π)")));
        }
        if !(-FRAC_PI_4..=FRAC_PI_4).contains(&chi) {
            return Err(Error::invalid(format!("chi {chi} outside [−π/4, π/4]")));
        }
        Ok(Self { psi, chi })
    }

    /// Great-circle-aware distance used to compare sphere coordinates:
    /// ψ wraps with period π, χ does not. Faithful away from the poles.
    pub fn distance(&self, other: &SphereAngles) -> f64 {
        let dpsi_raw = (self.psi - other.psi).abs();
        let dpsi = dpsi_raw.min(PI - dpsi_raw);
        let dchi = (self.chi - other.chi).abs();
        dpsi.hypot(dchi)
    }

    /// Unit Bloch direction of the state at these coordinates.
    pub fn bloch(&self) -> [f64; 3] {
        let (s2p, c2p) = (2.0 * self.psi).sin_cos();
        let (s2c, c2c) = (2.0 * self.chi).sin_cos();
        [c2c * c2p, c2c * s2p, s2c]
    }

    /// Half the great-circle angle between the two states on the Poincaré
    /// sphere. Comparable to [`distance`](Self::distance) at small
    /// separations but well defined at the ψ-degenerate poles.
    pub fn sphere_distance(&self, other: &SphereAngles) -> f64 {
        let a = self.bloch();
        let b = other.bloch();
        let cross = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        0.5 * sin.atan2(cos)
    }
}
