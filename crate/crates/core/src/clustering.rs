//! The clustering cost and its self-consistent bookkeeping.
//!
//! The cost couples feature-space geometry with state-space fidelities:
//!
//!   H = ½ Σ_{i,j} ( d(x_i, x_j) + λ·d(x_i, c_i) ) · Σ_a (1 − f_i^a)(1 − f_j^a)
//!
//! with d the Euclidean norm, c_i the centroid of point i's current cluster,
//! and f_i^a the fidelity between point i's transformed state and reference
//! state a. Assignments and centroids are recomputed inside every evaluation
//! from the candidate circuit parameters; nothing is cached across optimizer
//! steps.

use itertools::Itertools;
use serde::Serialize;

use crate::circuit::{batch_states, fidelity_matrix, CircuitParams, FidelityMatrix};
use crate::datasets::{DataPoint, Dataset};
use crate::embedding::{EmbedMode, EmbeddingMap, PlateAngles};
use crate::error::{Error, Result};
use crate::hardware::PlateDevice;
use crate::polarization::{fidelity, JonesVector};

/// Largest dataset accepted for the precomputed pairwise distance matrix.
pub const MAX_POINTS: usize = 10_000;

/// Per-point cluster indices in [0, k).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    labels: Vec<usize>,
    k: usize,
}

impl Assignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::invalid(format!("label {bad} outside [0, {k})")));
        }
        Ok(Self { labels, k })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Feature-space cluster means with occupancy counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    points: Vec<[f64; 2]>,
    counts: Vec<usize>,
    reseeded: bool,
}

impl Centroids {
    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// True when at least one empty cluster had its centroid reseeded.
    pub fn reseeded(&self) -> bool {
        self.reseeded
    }
}

/// Maximally separated reference states on the Poincaré sphere, one per
/// cluster, oriented so the first is |h⟩ where the configuration allows it:
/// k=1 {|h⟩}; k=2 antipodal; k=3 equatorial triangle; k=4 tetrahedron;
/// k=5 triangular bipyramid; k=6 octahedron.
pub fn reference_states(k: usize) -> Result<Vec<JonesVector>> {
    let third = std::f64::consts::TAU / 3.0;
    let bloch: Vec<[f64; 3]> = match k {
        1 => vec![[1.0, 0.0, 0.0]],
        2 => vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        3 => vec![
            [1.0, 0.0, 0.0],
            [third.cos(), third.sin(), 0.0],
            [third.cos(), -third.sin(), 0.0],
        ],
        4 => {
            let r = 8.0f64.sqrt() / 3.0;
            vec![
                [1.0, 0.0, 0.0],
                [-1.0 / 3.0, r, 0.0],
                [-1.0 / 3.0, r * third.cos(), r * third.sin()],
                [-1.0 / 3.0, r * third.cos(), -r * third.sin()],
            ]
        }
        5 => vec![
            [1.0, 0.0, 0.0],
            [third.cos(), third.sin(), 0.0],
            [third.cos(), -third.sin(), 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ],
        6 => vec![
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ],
        other => return Err(Error::UnsupportedK(other)),
    };
    bloch
        .into_iter()
        .map(|[s1, s2, s3]| JonesVector::from_bloch(s1, s2, s3))
        .collect()
}

/// Each point joins the cluster of highest fidelity; ties take the lowest
/// cluster index.
pub fn assign(fids: &FidelityMatrix) -> Assignment {
    let labels = (0..fids.n())
        .map(|i| {
            let row = fids.row(i);
            let mut best = 0;
            for (a, &f) in row.iter().enumerate() {
                if f > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect();
    Assignment {
        labels,
        k: fids.k(),
    }
}

fn euclidean(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Per-cluster feature means. An empty cluster gets its centroid reseeded at
/// the dataset point farthest from its own cluster's centroid, restricted to
/// points that are not sole members of their cluster, and the result is
/// flagged through [`Centroids::reseeded`].
pub fn centroids(dataset: &Dataset, asg: &Assignment, k: usize) -> Centroids {
    let pts = dataset.points();
    let mut sums = vec![[0.0f64; 2]; k];
    let mut counts = vec![0usize; k];
    for (p, &label) in pts.iter().zip(asg.labels()) {
        sums[label][0] += p.x;
        sums[label][1] += p.y;
        counts[label] += 1;
    }
    let mut points: Vec<[f64; 2]> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| {
            if c > 0 {
                [s[0] / c as f64, s[1] / c as f64]
            } else {
                [f64::NAN, f64::NAN]
            }
        })
        .collect();

    let mut reseeded = false;
    for cluster in 0..k {
        if counts[cluster] > 0 {
            continue;
        }
        reseeded = true;
        let mut best: Option<(f64, usize)> = None;
        for (i, p) in pts.iter().enumerate() {
            let own = asg.labels()[i];
            if counts[own] < 2 {
                continue;
            }
            let d = euclidean((p.x, p.y), (points[own][0], points[own][1]));
            if best.map_or(true, |(bd, _)| d > bd) {
                best = Some((d, i));
            }
        }
        // All occupied clusters are singletons: fall back to the first point.
        let idx = best.map_or(0, |(_, i)| i);
        points[cluster] = [pts[idx].x, pts[idx].y];
    }

    Centroids {
        points,
        counts,
        reseeded,
    }
}

/// Best label agreement over all cluster relabelings, in [0, 1].
pub fn success_ratio(asg: &Assignment, truth: &[usize]) -> Result<f64> {
    if truth.len() != asg.len() {
        return Err(Error::invalid(format!(
            "truth has {} labels for {} points",
            truth.len(),
            asg.len()
        )));
    }
    let k = asg
        .k()
        .max(truth.iter().copied().max().map_or(0, |m| m + 1));
    if k > 6 {
        return Err(Error::UnsupportedK(k));
    }
    let best = (0..k)
        .permutations(k)
        .map(|relabel| {
            asg.labels()
                .iter()
                .zip(truth)
                .filter(|(&pred, &t)| relabel[pred] == t)
                .count()
        })
        .max()
        .unwrap_or(0);
    Ok(best as f64 / asg.len() as f64)
}

/// [`success_ratio`] against a dataset's ground truth; fails when any point
/// lacks a label.
pub fn evaluate_success(asg: &Assignment, dataset: &Dataset) -> Result<f64> {
    let truth = dataset.truth_labels().ok_or(Error::EvaluationUnavailable)?;
    success_ratio(asg, &truth)
}

/// One cost evaluation: the value plus everything recomputed on the way.
#[derive(Debug, Clone)]
pub struct CostReport {
    pub value: f64,
    pub assignment: Assignment,
    pub centroids: Centroids,
    pub fidelities: FidelityMatrix,
    /// Number of points clamped to the feature bounds during embedding.
    pub clamped: usize,
}

impl CostReport {
    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics {
            cost: self.value,
            labels: self.assignment.labels().to_vec(),
            centroids: self.centroids.points().to_vec(),
            per_point_max_fidelity: (0..self.fidelities.n())
                .map(|i| {
                    self.fidelities
                        .row(i)
                        .iter()
                        .fold(0.0f64, |acc, &f| acc.max(f))
                })
                .collect(),
            reseeded: self.centroids.reseeded(),
            clamped_points: self.clamped,
        }
    }
}

/// JSON-exportable summary of a cost evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub cost: f64,
    pub labels: Vec<usize>,
    pub centroids: Vec<[f64; 2]>,
    pub per_point_max_fidelity: Vec<f64>,
    pub reseeded: bool,
    pub clamped_points: usize,
}

/// A clustering instance: dataset, cluster count, regularization, reference
/// states, embedding, and circuit depth, with the embedded states and the
/// pairwise distance matrix precomputed.
#[derive(Debug, Clone)]
pub struct ClusterProblem {
    dataset: Dataset,
    k: usize,
    lambda: f64,
    layers: usize,
    refs: Vec<JonesVector>,
    embedding: EmbeddingMap,
    exclude_diagonal: bool,
    embedded: Vec<JonesVector>,
    prep_angles: Vec<PlateAngles>,
    pair_dist: Vec<f64>, // row-major N×N
    clamped: usize,
}

impl ClusterProblem {
    pub fn new(
        dataset: Dataset,
        k: usize,
        lambda: f64,
        layers: usize,
        embedding: EmbeddingMap,
        mode: EmbedMode<'_>,
    ) -> Result<Self> {
        let refs = reference_states(k)?;
        Self::with_reference_states(dataset, k, lambda, layers, embedding, mode, refs)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_reference_states(
        dataset: Dataset,
        k: usize,
        lambda: f64,
        layers: usize,
        embedding: EmbeddingMap,
        mode: EmbedMode<'_>,
        refs: Vec<JonesVector>,
    ) -> Result<Self> {
        if k < 1 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if refs.len() != k {
            return Err(Error::invalid(format!(
                "{} reference states for k = {k}",
                refs.len()
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda {lambda} must be ≥ 0")));
        }
        for (a, b) in (0..refs.len()).tuple_combinations() {
            if fidelity(&refs[a], &refs[b]) >= 1.0 - 1e-9 {
                return Err(Error::invalid(format!(
                    "reference states {a} and {b} are not distinct"
                )));
            }
        }
        let n = dataset.len();
        if n > MAX_POINTS {
            return Err(Error::invalid(format!(
                "dataset has {n} points, above the {MAX_POINTS} pairwise-matrix guard"
            )));
        }

        let mut embedded = Vec::with_capacity(n);
        let mut prep_angles = Vec::with_capacity(n);
        let mut clamped = 0;
        for p in dataset.points() {
            let (plates, was_clamped) = embedding.plates_for(p, mode);
            clamped += usize::from(was_clamped);
            prep_angles.push(plates);
            embedded.push(plates.prepared_state());
        }

        let pts = dataset.points();
        let mut pair_dist = vec![0.0f64; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = euclidean((pts[i].x, pts[i].y), (pts[j].x, pts[j].y));
                pair_dist[i * n + j] = d;
                pair_dist[j * n + i] = d;
            }
        }

        Ok(Self {
            dataset,
            k,
            lambda,
            layers,
            refs,
            embedding,
            exclude_diagonal: false,
            embedded,
            prep_angles,
            pair_dist,
            clamped,
        })
    }

    /// Drops the i = j terms of the double sum (config flag, default off).
    pub fn set_exclude_diagonal(&mut self, exclude: bool) {
        self.exclude_diagonal = exclude;
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Variational circuit depth m this problem is optimized with.
    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn reference_states(&self) -> &[JonesVector] {
        &self.refs
    }

    pub fn embedding(&self) -> &EmbeddingMap {
        &self.embedding
    }

    /// Embedded states before the variational stack.
    pub fn embedded_states(&self) -> &[JonesVector] {
        &self.embedded
    }

    /// Preparation angles per point (the device path's angle table).
    pub fn preparation_angles(&self) -> &[PlateAngles] {
        &self.prep_angles
    }

    /// Full cost evaluation through the ideal Jones pipeline.
    pub fn cost(&self, params: &CircuitParams) -> CostReport {
        let states = batch_states(params, &self.embedded);
        let fids = fidelity_matrix(&states, &self.refs);
        self.cost_from_fidelities(fids)
    }

    /// Full cost evaluation driving a (simulated or remote) device: per point
    /// the preparation and variational angles are sent to the rotary stages
    /// and the fidelities are reconstructed from the measured Stokes vector.
    pub fn cost_on_device(
        &self,
        params: &CircuitParams,
        device: &mut dyn PlateDevice,
    ) -> Result<CostReport> {
        let ref_bloch: Vec<[f64; 3]> = self.refs.iter().map(|r| r.to_stokes().bloch()).collect();
        let variational: Vec<f64> = params
            .to_flat()
            .iter()
            .map(|rad| rad.to_degrees())
            .collect();
        let mut data = Vec::with_capacity(self.dataset.len() * self.k);
        let mut angles_deg = Vec::with_capacity(2 + variational.len());
        for prep in &self.prep_angles {
            angles_deg.clear();
            angles_deg.push(prep.alpha.to_degrees());
            angles_deg.push(prep.beta.to_degrees());
            angles_deg.extend_from_slice(&variational);
            device.set_plate_angles(&angles_deg)?;
            let bloch = device.measure_stokes()?.bloch();
            for rb in &ref_bloch {
                let dot = bloch[0] * rb[0] + bloch[1] * rb[1] + bloch[2] * rb[2];
                data.push((0.5 * (1.0 + dot)).clamp(0.0, 1.0));
            }
        }
        let fids = FidelityMatrix::from_rows(self.dataset.len(), self.k, data)?;
        Ok(self.cost_from_fidelities(fids))
    }

    /// Assignment, centroids, and cost value from a fidelity matrix.
    pub fn cost_from_fidelities(&self, fids: FidelityMatrix) -> CostReport {
        let assignment = assign(&fids);
        let cents = centroids(&self.dataset, &assignment, self.k);
        let value = self.hamiltonian(&fids, &assignment, &cents);
        CostReport {
            value,
            assignment,
            centroids: cents,
            fidelities: fids,
            clamped: self.clamped,
        }
    }

    fn hamiltonian(&self, fids: &FidelityMatrix, asg: &Assignment, cents: &Centroids) -> f64 {
        let n = self.dataset.len();
        let pts = self.dataset.points();
        let dc: Vec<f64> = pts
            .iter()
            .zip(asg.labels())
            .map(|(p, &l)| {
                let c = cents.points()[l];
                euclidean((p.x, p.y), (c[0], c[1]))
            })
            .collect();

        // Every addend is non-negative, so the factored accumulation below is
        // numerically benign. The λ part factorizes because d(x_i, c_i) only
        // depends on i: Σ_{i,j} λ dc_i g_i g_j = λ (Σ_i dc_i g_i)(Σ_j g_j).
        let mut total = 0.0;
        let mut g = vec![0.0f64; n];
        for a in 0..self.k {
            for (i, slot) in g.iter_mut().enumerate() {
                *slot = 1.0 - fids.get(i, a);
            }
            let mut quad = 0.0;
            for i in 0..n {
                let gi = g[i];
                if gi == 0.0 {
                    continue;
                }
                let row = &self.pair_dist[i * n..(i + 1) * n];
                let mut acc = 0.0;
                for (d, gj) in row.iter().zip(&g) {
                    acc += d * gj;
                }
                quad += gi * acc;
            }
            let sum_g: f64 = g.iter().sum();
            let sum_dc_g: f64 = dc.iter().zip(&g).map(|(d, gi)| d * gi).sum();
            let mut lam = self.lambda * sum_dc_g * sum_g;
            if self.exclude_diagonal {
                lam -= self.lambda * dc.iter().zip(&g).map(|(d, gi)| d * gi * gi).sum::<f64>();
            }
            total += quad + lam;
        }
        0.5 * total
    }
}

/// Reference double-loop evaluation of the cost, written against the formula
/// with no factoring or precomputation. Test oracle; kept in the public
/// surface so the acceptance suite can call it.
pub fn naive_cost(
    points: &[DataPoint],
    labels: &[usize],
    centroid_points: &[[f64; 2]],
    fids: &FidelityMatrix,
    lambda: f64,
    exclude_diagonal: bool,
) -> f64 {
    let n = points.len();
    let k = fids.k();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if exclude_diagonal && i == j {
                continue;
            }
            let d_ij = euclidean((points[i].x, points[i].y), (points[j].x, points[j].y));
            let c = centroid_points[labels[i]];
            let d_ic = euclidean((points[i].x, points[i].y), (c[0], c[1]));
            let mut inner = 0.0;
            for a in 0..k {
                inner += (1.0 - fids.get(i, a)) * (1.0 - fids.get(j, a));
            }
            total += (d_ij + lambda * d_ic) * inner;
        }
    }
    0.5 * total
}
