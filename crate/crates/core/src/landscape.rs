//! Cost-landscape scans: the cost evaluated over a 2-D grid of two chosen
//! parameters with the others held fixed, plus optimizer-trajectory overlays
//! and strict local-minima detection.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::CircuitParams;
use crate::clustering::ClusterProblem;
use crate::error::{Error, Result};
use crate::optimizer::Trace;

/// What to scan: two parameter indices, their ranges, and the grid size.
pub struct ScanSpec<'a> {
    pub problem: &'a ClusterProblem,
    pub base: CircuitParams,
    pub axes: (usize, usize),
    /// Inclusive [lo, hi] per axis, radians. A full-period axis (span π)
    /// makes the last grid line the wrap of the first.
    pub ranges: [(f64, f64); 2],
    /// Grid points per axis, endpoints included.
    pub resolution: usize,
}

impl ScanSpec<'_> {
    fn validate(&self) -> Result<()> {
        let n_params = self.base.len();
        let (a0, a1) = self.axes;
        if a0 == a1 {
            return Err(Error::invalid("scan axes must be distinct"));
        }
        if a0 >= n_params || a1 >= n_params {
            return Err(Error::invalid(format!(
                "axis index out of range for {n_params} parameters"
            )));
        }
        if self.resolution < 2 {
            return Err(Error::invalid("resolution must be at least 2"));
        }
        for (lo, hi) in self.ranges {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!("bad scan range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// A grid node reported as a strict local minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridNode {
    pub i: usize,
    pub j: usize,
    pub cost: f64,
}

/// Scan output: axis grids, the cost matrix, and any overlaid trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub axes: (usize, usize),
    pub ranges: [(f64, f64); 2],
    pub axis_values: [Vec<f64>; 2],
    /// Row-major: entry (i, j) is axis-0 node i, axis-1 node j.
    pub costs: Vec<f64>,
    pub base: CircuitParams,
    /// Projections of optimizer traces onto the scan plane as
    /// (axis-0 value, axis-1 value, cost) points.
    pub trajectories: Vec<Vec<[f64; 3]>>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + i as f64 * step).collect()
}

/// Evaluates the cost at every grid node. Rows are computed in parallel and
/// assembled in index order, so the result is schedule-independent.
pub fn scan(spec: &ScanSpec<'_>) -> Result<ScanResult> {
    spec.validate()?;
    let res = spec.resolution;
    let axis0 = linspace(spec.ranges[0].0, spec.ranges[0].1, res);
    let axis1 = linspace(spec.ranges[1].0, spec.ranges[1].1, res);
    let base_flat = spec.base.to_flat();

    let rows: Result<Vec<Vec<f64>>> = axis0
        .par_iter()
        .map(|&v0| {
            axis1
                .iter()
                .map(|&v1| {
                    let mut flat = base_flat.clone();
                    flat[spec.axes.0] = v0;
                    flat[spec.axes.1] = v1;
                    Ok(spec.problem.cost(&CircuitParams::from_flat(&flat)?).value)
                })
                .collect()
        })
        .collect();
    let costs = rows?.into_iter().flatten().collect();

    Ok(ScanResult {
        axes: spec.axes,
        ranges: spec.ranges,
        axis_values: [axis0, axis1],
        costs,
        base: spec.base.clone(),
        trajectories: Vec::new(),
    })
}

impl ScanResult {
    pub fn resolution(&self) -> usize {
        self.axis_values[0].len()
    }

    pub fn cost_at(&self, i: usize, j: usize) -> f64 {
        self.costs[i * self.resolution() + j]
    }

    /// Appends a trace's projection onto the scan plane. The cost matrix is
    /// untouched.
    pub fn overlay_trajectory(&mut self, trace: &Trace) {
        let needed = self.axes.0.max(self.axes.1);
        let path: Vec<[f64; 3]> = trace
            .records
            .iter()
            .filter(|r| r.params.len() > needed)
            .map(|r| {
                let flat = r.params.to_flat();
                [flat[self.axes.0], flat[self.axes.1], r.cost]
            })
            .collect();
        self.trajectories.push(path);
    }

    /// Whether an axis spans a full plate period (π), making it wrap.
    fn periodic(&self, axis: usize) -> bool {
        let (lo, hi) = self.ranges[axis];
        ((hi - lo) - PI).abs() < 1e-9
    }

    /// Grid nodes strictly below all existing neighbors (8-connected; wraps
    /// on full-period axes), sorted by cost ascending.
    pub fn find_local_minima(&self) -> Result<Vec<GridNode>> {
        let res = self.resolution();
        if res < 3 {
            return Err(Error::invalid("find_local_minima needs resolution ≥ 3"));
        }
        // On a periodic axis the last grid line duplicates the first; skip it
        // so a wrap-straddling minimum is not compared against its own copy.
        let eff = [
            if self.periodic(0) { res - 1 } else { res },
            if self.periodic(1) { res - 1 } else { res },
        ];
        let neighbor = |idx: usize, delta: i64, axis: usize| -> Option<usize> {
            let n = eff[axis] as i64;
            let raw = idx as i64 + delta;
            if self.periodic(axis) {
                Some(raw.rem_euclid(n) as usize)
            } else if (0..n).contains(&raw) {
                Some(raw as usize)
            } else {
                None
            }
        };

        let mut minima = Vec::new();
        for i in 0..eff[0] {
            for j in 0..eff[1] {
                let c = self.cost_at(i, j);
                let mut strict = true;
                'probe: for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let (Some(ni), Some(nj)) = (neighbor(i, di, 0), neighbor(j, dj, 1))
                        else {
                            continue;
                        };
                        if self.cost_at(ni, nj) <= c {
                            strict = false;
                            break 'probe;
                        }
                    }
                }
                if strict {
                    minima.push(GridNode { i, j, cost: c });
                }
            }
        }
        minima.sort_by(|a, b| a.cost.total_cmp(&b.cost));
        Ok(minima)
    }

    /// Cost matrix as CSV (rows follow axis 0, columns axis 1), 12
    /// significant digits.
    pub fn matrix_to_csv(&self) -> String {
        let res = self.resolution();
        let mut out = String::new();
        for i in 0..res {
            for j in 0..res {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{:.11e}", self.cost_at(i, j));
            }
            out.push('\n');
        }
        out
    }

    /// Sidecar metadata (axes, ranges, base parameters, trajectories).
    pub fn sidecar_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            axes: [usize; 2],
            ranges: [(f64, f64); 2],
            resolution: usize,
            base_params: &'a CircuitParams,
            trajectories: &'a [Vec<[f64; 3]>],
        }
        Ok(serde_json::to_string_pretty(&Sidecar {
            axes: [self.axes.0, self.axes.1],
            ranges: self.ranges,
            resolution: self.resolution(),
            base_params: &self.base,
            trajectories: &self.trajectories,
        })?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{gaussian_blobs, BlobSpec, Layout};
    use crate::embedding::{fit_embedding, EmbedMode};
    use crate::optimizer::{Phase, TraceRecord};

    fn four_blob_problem(n_per_blob: usize) -> ClusterProblem {
        let ds = gaussian_blobs(&BlobSpec {
            k: 4,
            n_per_blob,
            d_over_sigma: 8.0,
            sigma: 1.0,
            layout: Layout::Ring,
            seed: 71,
        })
        .unwrap();
        let map = fit_embedding(&ds, 0.05).unwrap();
        ClusterProblem::new(ds, 4, 1.0, 2, map, EmbedMode::Analytic).unwrap()
    }

    fn spec_for<'a>(
        problem: &'a ClusterProblem,
        resolution: usize,
        ranges: [(f64, f64); 2],
    ) -> ScanSpec<'a> {
        ScanSpec {
            problem,
            base: CircuitParams::from_flat(&[0.3, 0.8, 1.1, 2.0]).unwrap(),
            axes: (0, 1),
            ranges,
            resolution,
        }
    }

    #[test]
    fn minimal_scan_matches_direct_cost_calls() {
        let problem = four_blob_problem(5);
        let spec = spec_for(&problem, 2, [(0.2, 0.9), (0.4, 1.3)]);
        let result = scan(&spec).unwrap();
        assert_eq!(result.costs.len(), 4);
        for (i, &v0) in result.axis_values[0].iter().enumerate() {
            for (j, &v1) in result.axis_values[1].iter().enumerate() {
                let mut flat = spec.base.to_flat();
                flat[0] = v0;
                flat[1] = v1;
                let direct = problem.cost(&CircuitParams::from_flat(&flat).unwrap()).value;
                assert_eq!(result.cost_at(i, j), direct);
            }
        }
    }

    #[test]
    fn full_period_rows_and_columns_wrap() {
        let problem = four_blob_problem(4);
        let spec = spec_for(&problem, 9, [(0.0, PI), (0.0, PI)]);
        let result = scan(&spec).unwrap();
        let res = result.resolution();
        for j in 0..res {
            assert!((result.cost_at(0, j) - result.cost_at(res - 1, j)).abs() < 1e-10);
            assert!((result.cost_at(j, 0) - result.cost_at(j, res - 1)).abs() < 1e-10);
        }
    }

    #[test]
    fn repeated_scans_are_bit_identical() {
        let problem = four_blob_problem(4);
        let a = scan(&spec_for(&problem, 5, [(0.0, PI), (0.0, PI)])).unwrap();
        let b = scan(&spec_for(&problem, 5, [(0.0, PI), (0.0, PI)])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_axes_are_rejected() {
        let problem = four_blob_problem(3);
        let mut spec = spec_for(&problem, 3, [(0.0, PI), (0.0, PI)]);
        spec.axes = (1, 1);
        assert!(scan(&spec).is_err());
        let mut spec = spec_for(&problem, 3, [(0.0, PI), (0.0, PI)]);
        spec.axes = (0, 7);
        assert!(scan(&spec).is_err());
    }

    #[test]
    fn overlay_appends_without_touching_costs() {
        let problem = four_blob_problem(3);
        let mut result = scan(&spec_for(&problem, 3, [(0.0, PI), (0.0, PI)])).unwrap();
        let costs_before = result.costs.clone();

        result.overlay_trajectory(&Trace::default());
        assert_eq!(result.trajectories.len(), 1);
        assert!(result.trajectories[0].is_empty());

        let trace = Trace {
            records: vec![TraceRecord {
                iter: 0,
                phase: Phase::Descent,
                cost: 1.25,
                params: CircuitParams::from_flat(&[0.1, 0.2, 0.3, 0.4]).unwrap(),
            }],
        };
        result.overlay_trajectory(&trace);
        assert_eq!(result.trajectories[1], vec![[0.1, 0.2, 1.25]]);
        assert_eq!(result.costs, costs_before);
    }

    #[test]
    fn constant_matrix_has_no_strict_minima() {
        let result = ScanResult {
            axes: (0, 1),
            ranges: [(0.0, 1.0), (0.0, 1.0)],
            axis_values: [linspace(0.0, 1.0, 4), linspace(0.0, 1.0, 4)],
            costs: vec![2.0; 16],
            base: CircuitParams::from_flat(&[0.0, 0.0]).unwrap(),
            trajectories: Vec::new(),
        };
        assert!(result.find_local_minima().unwrap().is_empty());
    }

    #[test]
    fn synthetic_bowl_has_exactly_one_minimum() {
        let n = 7;
        let axis = linspace(0.0, 1.0, n);
        let mut costs = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (axis[i] - 0.52, axis[j] - 0.47);
                costs.push(x * x + y * y);
            }
        }
        let result = ScanResult {
            axes: (0, 1),
            ranges: [(0.0, 1.0), (0.0, 1.0)],
            axis_values: [axis.clone(), axis],
            costs,
            base: CircuitParams::from_flat(&[0.0, 0.0]).unwrap(),
            trajectories: Vec::new(),
        };
        let minima = result.find_local_minima().unwrap();
        assert_eq!(minima.len(), 1);
        assert_eq!((minima[0].i, minima[0].j), (3, 3));
    }

    #[test]
    fn reported_minima_beat_all_neighbors() {
        let problem = four_blob_problem(6);
        let result = scan(&spec_for(&problem, 21, [(0.0, PI), (0.0, PI)])).unwrap();
        let minima = result.find_local_minima().unwrap();
        let eff = result.resolution() - 1; // both axes periodic
        for node in &minima {
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ni = (node.i as i64 + di).rem_euclid(eff as i64) as usize;
                    let nj = (node.j as i64 + dj).rem_euclid(eff as i64) as usize;
                    assert!(
                        result.cost_at(ni, nj) > node.cost,
                        "node ({}, {}) not strict against ({ni}, {nj})",
                        node.i,
                        node.j
                    );
                }
            }
        }
        // Sorted ascending.
        for pair in minima.windows(2) {
            assert!(pair[0].cost <= pair[1].cost);
        }
    }

    #[test]
    fn four_blob_landscape_is_multimodal() {
        let problem = four_blob_problem(10);
        let result = scan(&spec_for(&problem, 50, [(0.0, PI), (0.0, PI)])).unwrap();
        let minima = result.find_local_minima().unwrap();
        assert!(minima.len() >= 2, "found {} minima", minima.len());
    }

    #[test]
    fn csv_matrix_has_resolution_rows() {
        let problem = four_blob_problem(3);
        let result = scan(&spec_for(&problem, 4, [(0.0, 1.0), (0.0, 1.0)])).unwrap();
        let csv = result.matrix_to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), 4);
        let sidecar = result.sidecar_json().unwrap();
        assert!(sidecar.contains("\"axes\""));
    }
}
