//! The variational circuit: an ordered stack of m (QWP, HWP) pairs applied
//! after state preparation. One set of angles transforms every embedded
//! point, exactly as a single physical plate stack does.

use serde::{Deserialize, Serialize};

use crate::embedding::PlateAngles;
use crate::error::{Error, Result};
use crate::polarization::{fidelity, JonesMatrix, JonesVector};

/// Variational parameters: per layer a QWP angle α_k and an HWP angle β_k,
/// canonicalized to [0, π). Serializes as a JSON array of [alpha, beta]
/// pairs in radians.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CircuitParams {
    layers: Vec<PlateAngles>,
}

impl CircuitParams {
    pub fn new(layers: Vec<PlateAngles>) -> Self {
        Self {
            layers: layers
                .into_iter()
                .map(|p| PlateAngles::new(p.alpha, p.beta))
                .collect(),
        }
    }

    /// Builds from a flat angle vector [α_1, β_1, α_2, β_2, ...], wrapping
    /// each angle into [0, π).
    pub fn from_flat(angles: &[f64]) -> Result<Self> {
        if angles.len() % 2 != 0 {
            return Err(Error::invalid(format!(
                "flat parameter vector must have even length, got {}",
                angles.len()
            )));
        }
        Ok(Self::new(
            angles
                .chunks_exact(2)
                .map(|pair| PlateAngles::new(pair[0], pair[1]))
                .collect(),
        ))
    }

    /// Flat angle vector [α_1, β_1, α_2, β_2, ...].
    pub fn to_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|p| [p.alpha, p.beta])
            .collect()
    }

    pub fn layers(&self) -> &[PlateAngles] {
        &self.layers
    }

    /// Number of (QWP, HWP) layers m.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Number of scalar parameters, 2m.
    pub fn len(&self) -> usize {
        2 * self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Plate matrices in application order [Q_1, H_1, ..., Q_m, H_m].
    pub fn plate_matrices(&self) -> Vec<JonesMatrix> {
        self.layers
            .iter()
            .flat_map(|p| {
                [
                    JonesMatrix::qwp(p.alpha).expect("canonical angle is finite"),
                    JonesMatrix::hwp(p.beta).expect("canonical angle is finite"),
                ]
            })
            .collect()
    }
}

/// Applies the stack layer by layer, QWP before HWP within each layer.
/// m = 0 returns the input unchanged.
pub fn run_circuit(params: &CircuitParams, input: &JonesVector) -> JonesVector {
    let mut state = *input;
    for layer in params.layers() {
        let q = JonesMatrix::qwp(layer.alpha).expect("canonical angle is finite");
        let h = JonesMatrix::hwp(layer.beta).expect("canonical angle is finite");
        state = h.apply(&q.apply(&state));
    }
    state
}

/// Elementwise [`run_circuit`] preserving input order.
pub fn batch_states(params: &CircuitParams, embedded: &[JonesVector]) -> Vec<JonesVector> {
    embedded.iter().map(|v| run_circuit(params, v)).collect()
}

/// N×k matrix of fidelities between transformed states and references.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityMatrix {
    n: usize,
    k: usize,
    data: Vec<f64>, // row-major
}

impl FidelityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, a: usize) -> f64 {
        self.data[i * self.k + a]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    /// Builds directly from precomputed entries (row-major, n×k).
    pub fn from_rows(n: usize, k: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * k {
            return Err(Error::invalid(format!(
                "fidelity data length {} does not match {n}×{k}",
                data.len()
            )));
        }
        Ok(Self { n, k, data })
    }
}

/// Entry (i, a) = fidelity(states[i], refs[a]); all entries in [0, 1].
pub fn fidelity_matrix(states: &[JonesVector], refs: &[JonesVector]) -> FidelityMatrix {
    let k = refs.len();
    let data = states
        .iter()
        .flat_map(|s| refs.iter().map(move |r| fidelity(s, r)))
        .collect();
    FidelityMatrix {
        n: states.len(),
        k,
        data,
    }
}
