//! Synthetic Gaussian-blob datasets with controlled separation, plus CSV IO.
//!
//! Separation is parameterized by d/σ, the ratio of the minimum inter-center
//! distance to the blob standard deviation. File format: header `x,y,label`
//! with the label column optional, values at 12 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single observation: two features and an optional ground-truth label
/// used only for evaluation, never by the clustering itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataPoint {
    pub x: f64,
    pub y: f64,
    pub true_label: Option<usize>,
}

/// Per-feature [min, max] ranges of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureBounds {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

/// A non-empty ordered collection of two-feature points.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<DataPoint>,
    bounds: FeatureBounds,
}

impl Dataset {
    pub fn new(points: Vec<DataPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("dataset must contain at least one point"));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::invalid(format!(
                    "point {i} has non-finite features ({}, {})",
                    p.x, p.y
                )));
            }
        }
        let bounds = FeatureBounds {
            x: min_max(points.iter().map(|p| p.x)),
            y: min_max(points.iter().map(|p| p.y)),
        };
        Ok(Self { points, bounds })
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounds(&self) -> FeatureBounds {
        self.bounds
    }

    /// Ground-truth labels, present only when every point carries one.
    pub fn truth_labels(&self) -> Option<Vec<usize>> {
        self.points.iter().map(|p| p.true_label).collect()
    }
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// Geometric arrangement of the blob centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// k centers evenly spaced on a circle sized so adjacent centers sit at
    /// exactly distance d (k = 1 puts the single center at the origin).
    #[default]
    Ring,
    /// Centers on a square grid with spacing d.
    Grid,
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(Layout::Ring),
            "grid" => Ok(Layout::Grid),
            other => Err(Error::invalid(format!("unknown layout `{other}`"))),
        }
    }
}

/// Generation recipe for a blob dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub k: usize,
    pub n_per_blob: usize,
    pub d_over_sigma: f64,
    pub sigma: f64,
    pub layout: Layout,
    pub seed: u64,
}

impl BlobSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.n_per_blob < 1 {
            return Err(Error::invalid("n_per_blob must be at least 1"));
        }
        if !(self.d_over_sigma > 0.0) {
            return Err(Error::invalid("d_over_sigma must be positive"));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::invalid("sigma must be positive"));
        }
        Ok(())
    }

    /// Blob center coordinates for this spec.
    pub fn centers(&self) -> Vec<[f64; 2]> {
        let d = self.d_over_sigma * self.sigma;
        match self.layout {
            Layout::Ring => {
                if self.k == 1 {
                    return vec![[0.0, 0.0]];
                }
                // Adjacent centers on the ring sit at 2R sin(π/k) = d.
                let radius = d / (2.0 * (std::f64::consts::PI / self.k as f64).sin());
                (0..self.k)
                    .map(|j| {
                        let theta = std::f64::consts::TAU * j as f64 / self.k as f64;
                        [radius * theta.cos(), radius * theta.sin()]
                    })
                    .collect()
            }
            Layout::Grid => {
                let cols = (self.k as f64).sqrt().ceil() as usize;
                (0..self.k)
                    .map(|j| [(j % cols) as f64 * d, (j / cols) as f64 * d])
                    .collect()
            }
        }
    }
}

/// Draws the dataset described by `spec`, deterministic in the seed.
pub fn gaussian_blobs(spec: &BlobSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, spec.sigma).expect("sigma checked positive");
    let mut points = Vec::with_capacity(spec.k * spec.n_per_blob);
    for (label, center) in spec.centers().into_iter().enumerate() {
        for _ in 0..spec.n_per_blob {
            points.push(DataPoint {
                x: center[0] + normal.sample(&mut rng),
                y: center[1] + normal.sample(&mut rng),
                true_label: Some(label),
            });
        }
    }
    Dataset::new(points)
}

/// Serializes a dataset as `x,y,label` CSV (label column omitted when any
/// point lacks one) with 12 significant digits.
pub fn dataset_to_csv(ds: &Dataset) -> String {
    let labeled = ds.truth_labels().is_some();
    let mut out = String::new();
    out.push_str(if labeled { "x,y,label\n" } else { "x,y\n" });
    for p in ds.points() {
        match (labeled, p.true_label) {
            (true, Some(l)) => {
                let _ = writeln!(out, "{:.11e},{:.11e},{l}", p.x, p.y);
            }
            _ => {
                let _ = writeln!(out, "{:.11e},{:.11e}", p.x, p.y);
            }
        }
    }
    out
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, dataset_to_csv(ds))?;
    Ok(())
}

/// Parses a dataset from CSV text. Errors carry 1-based line numbers.
pub fn dataset_from_csv(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let labeled = match columns.as_slice() {
        ["x", "y"] => false,
        ["x", "y", "label"] => true,
        cols if cols.len() > 2 => {
            return Err(Error::UnsupportedDimension(cols.len() - usize::from(cols.last() == Some(&"label"))))
        }
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `x,y[,label]`, got `{header}`"),
            })
        }
    };

    let mut points = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let expected = if labeled { 3 } else { 2 };
        if fields.len() != expected {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {expected} fields, got {}", fields.len()),
            });
        }
        let parse_f64 = |field: &str, name: &str| -> Result<f64> {
            field.parse::<f64>().map_err(|e| Error::Parse {
                line: lineno,
                message: format!("bad {name} `{field}`: {e}"),
            })
        };
        let x = parse_f64(fields[0], "x")?;
        let y = parse_f64(fields[1], "y")?;
        let true_label = if labeled {
            Some(fields[2].parse::<usize>().map_err(|e| Error::Parse {
                line: lineno,
                message: format!("bad label `{}`: {e}", fields[2]),
            })?)
        } else {
            None
        };
        points.push(DataPoint { x, y, true_label });
    }
    if points.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }
    Dataset::new(points)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    dataset_from_csv(&fs::read_to_string(path)?)
}

/// Writes the generation metadata sidecar (spec echo including seed).
pub fn save_blob_metadata(spec: &BlobSpec, path: impl AsRef<Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(spec)?;
    fs::write(path, json + "\n")?;
    Ok(())
}
