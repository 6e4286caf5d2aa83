//! Mapping from the data feature space onto the Poincaré sphere and down to
//! preparation-plate angles.
//!
//! A dataset's bounding box is sent affinely onto a window of sphere
//! coordinates (kept away from the ψ wrap-around at 0/π and from the
//! ψ-degenerate poles so the embedding stays injective), then each target is
//! realized as H(β)·Q(α)·|h⟩ either through the exact closed form or through
//! a precomputed look-up-table mirroring the hardware path.

use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt::Write as _;

use crate::datasets::{DataPoint, Dataset, FeatureBounds};
use crate::error::{Error, Result};
use crate::polarization::{wrap_angle, JonesMatrix, JonesVector, SphereAngles};

/// Default sphere window: ψ ∈ [0.05π, 0.95π], χ ∈ [−0.2, 0.2] rad.
pub const DEFAULT_WINDOW: SphereWindow = SphereWindow {
    psi_lo: 0.05 * PI,
    psi_hi: 0.95 * PI,
    chi_lo: -0.2,
    chi_hi: 0.2,
};
/// Default fraction of the window kept as padding on each side.
pub const DEFAULT_MARGIN: f64 = 0.05;
/// Default look-up-table grid step (≈ 0.29°, comparable to the rotary-stage
/// accuracy of 0.08° after angle doubling on the sphere).
pub const DEFAULT_LUT_RESOLUTION: f64 = 0.005;

/// Fast-axis orientations of a (QWP, HWP) pair, radians, canonicalized to
/// [0, π) by plate π-periodicity. Serializes as an `[alpha, beta]` pair.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(into = "[f64; 2]", from = "[f64; 2]")]
pub struct PlateAngles {
    pub alpha: f64,
    pub beta: f64,
}

impl From<PlateAngles> for [f64; 2] {
    fn from(p: PlateAngles) -> Self {
        [p.alpha, p.beta]
    }
}

impl From<[f64; 2]> for PlateAngles {
    fn from(pair: [f64; 2]) -> Self {
        PlateAngles::new(pair[0], pair[1])
    }
}

impl PlateAngles {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha: wrap_angle(alpha),
            beta: wrap_angle(beta),
        }
    }

    /// Forward model of the preparation stage: H(β)·Q(α)·|h⟩.
    pub fn prepared_state(&self) -> JonesVector {
        let q = JonesMatrix::qwp(self.alpha).expect("canonical angle is finite");
        let h = JonesMatrix::hwp(self.beta).expect("canonical angle is finite");
        h.apply(&q.apply(&JonesVector::horizontal()))
    }
}

/// Rectangular region of sphere coordinates targeted by the embedding.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SphereWindow {
    pub psi_lo: f64,
    pub psi_hi: f64,
    pub chi_lo: f64,
    pub chi_hi: f64,
}

impl SphereWindow {
    fn validate(&self) -> Result<()> {
        if !(0.0 < self.psi_lo && self.psi_lo < self.psi_hi && self.psi_hi < PI) {
            return Err(Error::invalid(format!(
                "psi window [{}, {}] must sit strictly inside (0, π)",
                self.psi_lo, self.psi_hi
            )));
        }
        if !(-FRAC_PI_4 < self.chi_lo && self.chi_lo < self.chi_hi && self.chi_hi < FRAC_PI_4) {
            return Err(Error::invalid(format!(
                "chi window [{}, {}] must sit strictly inside (−π/4, π/4)",
                self.chi_lo, self.chi_hi
            )));
        }
        Ok(())
    }
}

/// Affine map from a dataset's feature bounding box onto a sphere window.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EmbeddingMap {
    pub bounds: FeatureBounds,
    pub window: SphereWindow,
    pub margin: f64,
    degenerate_x: bool,
    degenerate_y: bool,
}

/// Which angle source realizes a sphere target.
#[derive(Clone, Copy)]
pub enum EmbedMode<'a> {
    /// Exact closed-form inversion.
    Analytic,
    /// Nearest-node table lookup, mirroring the experimental bijection.
    Lut(&'a LookUpTable),
}

/// Fits the default-window embedding for a dataset.
///
/// A zero-width feature range cannot be scaled; that axis maps every point to
/// the window midpoint and the condition is reported through
/// [`EmbeddingMap::degenerate_axes`].
pub fn fit_embedding(dataset: &Dataset, margin: f64) -> Result<EmbeddingMap> {
    fit_embedding_with_window(dataset, margin, DEFAULT_WINDOW)
}

pub fn fit_embedding_with_window(
    dataset: &Dataset,
    margin: f64,
    window: SphereWindow,
) -> Result<EmbeddingMap> {
    if !(0.0..0.5).contains(&margin) {
        return Err(Error::invalid(format!("margin {margin} outside [0, 0.5)")));
    }
    window.validate()?;
    let bounds = dataset.bounds();
    Ok(EmbeddingMap {
        bounds,
        window,
        margin,
        degenerate_x: bounds.x.0 == bounds.x.1,
        degenerate_y: bounds.y.0 == bounds.y.1,
    })
}

impl EmbeddingMap {
    /// (x-axis degenerate, y-axis degenerate) warning flags.
    pub fn degenerate_axes(&self) -> (bool, bool) {
        (self.degenerate_x, self.degenerate_y)
    }

    /// Window shrunk by the margin fraction on each side; this is the actual
    /// affine target so that clamped points still stay off the window edge.
    pub fn effective_window(&self) -> SphereWindow {
        let pw = self.window.psi_hi - self.window.psi_lo;
        let cw = self.window.chi_hi - self.window.chi_lo;
        SphereWindow {
            psi_lo: self.window.psi_lo + self.margin * pw,
            psi_hi: self.window.psi_hi - self.margin * pw,
            chi_lo: self.window.chi_lo + self.margin * cw,
            chi_hi: self.window.chi_hi - self.margin * cw,
        }
    }

    /// Sphere target for a point; the flag reports bound clamping.
    pub fn target_for(&self, p: &DataPoint) -> (SphereAngles, bool) {
        let eff = self.effective_window();
        let (tx, clamped_x) = unit_coord(p.x, self.bounds.x, self.degenerate_x);
        let (ty, clamped_y) = unit_coord(p.y, self.bounds.y, self.degenerate_y);
        let psi = eff.psi_lo + tx * (eff.psi_hi - eff.psi_lo);
        let chi = eff.chi_lo + ty * (eff.chi_hi - eff.chi_lo);
        (SphereAngles { psi, chi }, clamped_x || clamped_y)
    }

    /// Preparation angles for a point under the given mode.
    pub fn plates_for(&self, p: &DataPoint, mode: EmbedMode<'_>) -> (PlateAngles, bool) {
        let (target, clamped) = self.target_for(p);
        let plates = match mode {
            EmbedMode::Analytic => sphere_to_plates(target),
            EmbedMode::Lut(lut) => lut.lookup(target),
        };
        (plates, clamped)
    }

    /// Forward-simulated embedded state for a point; the flag reports
    /// bound clamping.
    pub fn embed(&self, p: &DataPoint, mode: EmbedMode<'_>) -> (JonesVector, bool) {
        let (plates, clamped) = self.plates_for(p, mode);
        (plates.prepared_state(), clamped)
    }
}

fn unit_coord(v: f64, (lo, hi): (f64, f64), degenerate: bool) -> (f64, bool) {
    if degenerate {
        return (0.5, false);
    }
    let t = (v - lo) / (hi - lo);
    if (0.0..=1.0).contains(&t) {
        (t, false)
    } else {
        (t.clamp(0.0, 1.0), true)
    }
}

/// Closed-form preparation angles reaching a sphere target.
///
/// The QWP acting on |h⟩ produces orientation α and ellipticity −α for
/// α ∈ [−π/4, π/4]; the HWP then reflects the ellipse, sending orientation
/// ψ to 2β − ψ and flipping the ellipticity sign. Choosing α = χ and
/// β = (ψ + χ)/2 therefore lands exactly on (ψ, χ).
pub fn sphere_to_plates(target: SphereAngles) -> PlateAngles {
    PlateAngles::new(target.chi, 0.5 * (target.psi + target.chi))
}

/// Regular (ψ, χ) grid of precomputed preparation angles over the full
/// sphere-coordinate ranges ψ ∈ [0, π), χ ∈ [−π/4, π/4].
#[derive(Debug, Clone, PartialEq)]
pub struct LookUpTable {
    resolution: f64,
    n_psi: usize,
    n_chi: usize,
    entries: Vec<PlateAngles>, // row-major, ψ index outer
}

/// Builds a look-up-table at the given grid step (radians, in (0, 0.1]).
pub fn build_lut(resolution: f64) -> Result<LookUpTable> {
    if !(resolution > 0.0 && resolution <= 0.1) {
        return Err(Error::invalid(format!(
            "resolution {resolution} outside (0, 0.1]"
        )));
    }
    let n_psi = (PI / resolution).ceil() as usize;
    let n_chi = ((FRAC_PI_4 * 2.0) / resolution).ceil() as usize;
    let mut entries = Vec::with_capacity(n_psi * n_chi);
    for i in 0..n_psi {
        let psi = i as f64 * resolution;
        for j in 0..n_chi {
            let chi = -FRAC_PI_4 + j as f64 * resolution;
            entries.push(sphere_to_plates(SphereAngles { psi, chi }));
        }
    }
    Ok(LookUpTable {
        resolution,
        n_psi,
        n_chi,
        entries,
    })
}

impl LookUpTable {
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Grid dimensions (ψ nodes, χ nodes).
    pub fn shape(&self) -> (usize, usize) {
        (self.n_psi, self.n_chi)
    }

    /// Sphere coordinates of a grid node.
    pub fn node(&self, i_psi: usize, i_chi: usize) -> SphereAngles {
        SphereAngles {
            psi: i_psi as f64 * self.resolution,
            chi: -FRAC_PI_4 + i_chi as f64 * self.resolution,
        }
    }

    /// Plate angles stored at a grid node.
    pub fn entry(&self, i_psi: usize, i_chi: usize) -> PlateAngles {
        self.entries[i_psi * self.n_chi + i_chi]
    }

    /// Nearest-node lookup; ties break toward smaller indices and the ψ axis
    /// wraps with period π.
    pub fn lookup(&self, target: SphereAngles) -> PlateAngles {
        let i_psi = self.nearest_psi(target.psi);
        let i_chi = self.nearest_chi(target.chi);
        self.entry(i_psi, i_chi)
    }

    fn nearest_psi(&self, psi: f64) -> usize {
        let psi = wrap_angle(psi);
        let t = psi / self.resolution;
        let i0 = (t.floor() as usize).min(self.n_psi - 1);
        let (i1, psi1) = if i0 + 1 >= self.n_psi {
            (0, PI) // wrap: node 0 seen from above
        } else {
            (i0 + 1, (i0 + 1) as f64 * self.resolution)
        };
        let d0 = (psi - i0 as f64 * self.resolution).abs();
        let d1 = (psi1 - psi).abs();
        match d0.partial_cmp(&d1).expect("grid distances are finite") {
            std::cmp::Ordering::Less => i0,
            std::cmp::Ordering::Greater => i1,
            std::cmp::Ordering::Equal => i0.min(i1),
        }
    }

    fn nearest_chi(&self, chi: f64) -> usize {
        let t = (chi + FRAC_PI_4) / self.resolution;
        let i0 = (t.floor().max(0.0) as usize).min(self.n_chi - 1);
        let i1 = (i0 + 1).min(self.n_chi - 1);
        let d0 = (chi - self.node(0, i0).chi).abs();
        let d1 = (self.node(0, i1).chi - chi).abs();
        if d1 < d0 {
            i1
        } else {
            i0
        }
    }

    /// CSV form: header `psi,chi,alpha,beta`, radians at 12 significant
    /// digits, rows in row-major grid order (ψ outer, χ inner).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("psi,chi,alpha,beta\n");
        for i in 0..self.n_psi {
            for j in 0..self.n_chi {
                let node = self.node(i, j);
                let p = self.entry(i, j);
                let _ = writeln!(
                    out,
                    "{:.11e},{:.11e},{:.11e},{:.11e}",
                    node.psi, node.chi, p.alpha, p.beta
                );
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty file".into(),
        })?;
        if header.trim() != "psi,chi,alpha,beta" {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `psi,chi,alpha,beta`, got `{header}`"),
            });
        }
        let mut rows: Vec<(SphereAngles, PlateAngles)> = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let mut vals = [0.0f64; 4];
            for (slot, field) in vals.iter_mut().zip(&fields) {
                *slot = field.trim().parse().map_err(|e| Error::Parse {
                    line: idx + 1,
                    message: format!("bad number `{field}`: {e}"),
                })?;
            }
            rows.push((
                SphereAngles {
                    psi: vals[0],
                    chi: vals[1],
                },
                PlateAngles {
                    alpha: vals[2],
                    beta: vals[3],
                },
            ));
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "no data rows".into(),
            });
        }
        // Infer the grid shape from the χ-inner ordering.
        let n_chi = rows
            .iter()
            .position(|(node, _)| node.psi > rows[0].0.psi)
            .unwrap_or(rows.len());
        if rows.len() % n_chi != 0 {
            return Err(Error::Parse {
                line: rows.len() + 1,
                message: format!(
                    "row count {} is not a multiple of χ node count {n_chi}",
                    rows.len()
                ),
            });
        }
        let n_psi = rows.len() / n_chi;
        let resolution = if n_chi > 1 {
            rows[1].0.chi - rows[0].0.chi
        } else if n_psi > 1 {
            rows[n_chi].0.psi - rows[0].0.psi
        } else {
            return Err(Error::Parse {
                line: 2,
                message: "cannot infer resolution from a single node".into(),
            });
        };
        if !(resolution > 0.0 && resolution <= 0.1) {
            return Err(Error::Parse {
                line: 2,
                message: format!("inferred resolution {resolution} outside (0, 0.1]"),
            });
        }
        Ok(Self {
            resolution,
            n_psi,
            n_chi,
            entries: rows.into_iter().map(|(_, p)| p).collect(),
        })
    }
}
