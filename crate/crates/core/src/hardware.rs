//! Simulated optical bench: rotary-stage quantization, waveplate retardance
//! errors, and polarimeter readout noise, behind the same interface a remote
//! bench would expose.
//!
//! Plate order matches the optical path: index 0 is the preparation QWP,
//! index 1 the preparation HWP, then alternating variational (QWP, HWP)
//! pairs. Even indices are quarter-wave plates (retardance π/2 + error), odd
//! indices half-wave plates (retardance π + error). Angles cross this
//! boundary in degrees; everything behind it is radians.

pub mod protocol;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::{JonesMatrix, JonesVector, StokesVector};

/// Physical imperfection model of the bench.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    /// Rotary-stage resolution, degrees.
    pub angle_quantum_deg: f64,
    /// Rotary-stage speed, degrees per second.
    pub max_speed_deg_per_s: f64,
    /// Departure of half-wave retardance from π, radians.
    pub hwp_retardance_error: f64,
    /// Departure of quarter-wave retardance from π/2, radians.
    pub qwp_retardance_error: f64,
    /// Std-dev of Gaussian readout noise per Stokes component.
    pub stokes_noise_sigma: f64,
    pub seed: u64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            angle_quantum_deg: 0.08,
            max_speed_deg_per_s: 450.0,
            hwp_retardance_error: 0.0,
            qwp_retardance_error: 0.0,
            stokes_noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl DeviceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.angle_quantum_deg > 0.0) {
            return Err(Error::invalid("angle_quantum_deg must be positive"));
        }
        if !(self.max_speed_deg_per_s > 0.0) {
            return Err(Error::invalid("max_speed_deg_per_s must be positive"));
        }
        if !(self.stokes_noise_sigma >= 0.0) {
            return Err(Error::invalid("stokes_noise_sigma must be ≥ 0"));
        }
        for (name, v) in [
            ("hwp_retardance_error", self.hwp_retardance_error),
            ("qwp_retardance_error", self.qwp_retardance_error),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Current plate orientations (quantized, degrees) and the cumulative time
/// the stages have spent moving.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    pub angles_deg: Vec<f64>,
    pub motion_time_s: f64,
}

impl DeviceState {
    pub fn new(plate_count: usize) -> Self {
        Self {
            angles_deg: vec![0.0; plate_count],
            motion_time_s: 0.0,
        }
    }

    pub fn plate_count(&self) -> usize {
        self.angles_deg.len()
    }
}

/// Rounds to the nearest multiple of `quantum`, ties toward zero.
pub fn quantize_angle(angle_deg: f64, quantum_deg: f64) -> f64 {
    let steps = angle_deg / quantum_deg;
    let rounded = (steps.abs() - 0.5).ceil().max(0.0);
    rounded.copysign(steps) * quantum_deg
}

/// Static device description exposed over the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceInfo {
    pub plate_count: usize,
    pub angle_quantum_deg: f64,
    pub motion_time_s: f64,
}

/// Common surface of the in-process simulator and the remote client, so the
/// optimization loop is oblivious to where the bench lives.
pub trait PlateDevice {
    /// Rotates every stage to the target angles (degrees). Angles are
    /// quantized to the stage resolution; motion time advances by the
    /// largest move divided by the stage speed (stages move simultaneously).
    fn set_plate_angles(&mut self, targets_deg: &[f64]) -> Result<()>;

    /// Sends |h⟩ through the current plate stack and reads the polarimeter.
    fn measure_stokes(&mut self) -> Result<StokesVector>;

    fn info(&mut self) -> Result<DeviceInfo>;
}

/// In-process bench simulation.
#[derive(Debug, Clone)]
pub struct SimulatedDevice {
    config: DeviceConfig,
    state: DeviceState,
    rng: ChaCha8Rng,
}

impl SimulatedDevice {
    pub fn new(plate_count: usize, config: DeviceConfig) -> Result<Self> {
        config.validate()?;
        if plate_count == 0 {
            return Err(Error::invalid("device needs at least one plate"));
        }
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self {
            config,
            state: DeviceState::new(plate_count),
            rng,
        })
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.config
    }

    pub fn state(&self) -> &DeviceState {
        &self.state
    }

    /// Jones matrix of plate `index` at its current angle, including the
    /// configured retardance error.
    fn plate_matrix(&self, index: usize) -> JonesMatrix {
        let theta = self.state.angles_deg[index].to_radians();
        let delta = if index % 2 == 0 {
            std::f64::consts::FRAC_PI_2 + self.config.qwp_retardance_error
        } else {
            std::f64::consts::PI + self.config.hwp_retardance_error
        };
        JonesMatrix::retarder(delta, theta).expect("finite retardance and angle")
    }

    /// Measurement with an explicit input state (the wire protocol always
    /// uses |h⟩, the bench's fixed source polarization).
    pub fn measure_stokes_of(&mut self, input: &JonesVector) -> StokesVector {
        let mut state = *input;
        for index in 0..self.state.plate_count() {
            state = self.plate_matrix(index).apply(&state);
        }
        let mut s = state.to_stokes();
        if self.config.stokes_noise_sigma > 0.0 {
            let noise = Normal::new(0.0, self.config.stokes_noise_sigma)
                .expect("sigma checked non-negative");
            s.s1 += noise.sample(&mut self.rng);
            s.s2 += noise.sample(&mut self.rng);
            s.s3 += noise.sample(&mut self.rng);
            let r = (s.s1 * s.s1 + s.s2 * s.s2 + s.s3 * s.s3).sqrt();
            if r > s.s0 {
                let scale = s.s0 / r;
                s.s1 *= scale;
                s.s2 *= scale;
                s.s3 *= scale;
            }
        }
        s
    }
}

impl PlateDevice for SimulatedDevice {
    fn set_plate_angles(&mut self, targets_deg: &[f64]) -> Result<()> {
        if targets_deg.len() != self.state.plate_count() {
            return Err(Error::invalid(format!(
                "{} target angles for {} plates",
                targets_deg.len(),
                self.state.plate_count()
            )));
        }
        for (i, t) in targets_deg.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::invalid(format!("target angle {i} is not finite")));
            }
        }
        let mut largest_move = 0.0f64;
        for (current, target) in self.state.angles_deg.iter_mut().zip(targets_deg) {
            let quantized = quantize_angle(*target, self.config.angle_quantum_deg);
            largest_move = largest_move.max((quantized - *current).abs());
            *current = quantized;
        }
        self.state.motion_time_s += largest_move / self.config.max_speed_deg_per_s;
        Ok(())
    }

    fn measure_stokes(&mut self) -> Result<StokesVector> {
        Ok(self.measure_stokes_of(&JonesVector::horizontal()))
    }

    fn info(&mut self) -> Result<DeviceInfo> {
        Ok(DeviceInfo {
            plate_count: self.state.plate_count(),
            angle_quantum_deg: self.config.angle_quantum_deg,
            motion_time_s: self.state.motion_time_s,
        })
    }
}
