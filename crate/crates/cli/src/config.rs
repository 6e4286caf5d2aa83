//! Layered run configuration: CLI flags override config-file values, which
//! override built-in defaults.

use std::path::Path;

use polclust_core::optimizer::OptimizerConfig;
use polclust_core::{DeviceConfig, Error, Result};
use serde::Deserialize;

/// Optional JSON config file. Every field may be omitted; the schema mirrors
/// the cluster/landscape flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub k: Option<usize>,
    pub lambda: Option<f64>,
    pub layers: Option<usize>,
    pub margin: Option<f64>,
    pub embed_mode: Option<String>,
    pub lut_resolution: Option<f64>,
    pub restarts: Option<usize>,
    pub mc_samples: Option<usize>,
    pub mc_step: Option<f64>,
    pub mc_temperature: Option<f64>,
    pub lr: Option<f64>,
    pub fd_eps: Option<f64>,
    pub max_iters: Option<usize>,
    pub rel_tol: Option<f64>,
    pub patience: Option<usize>,
    pub seed: Option<u64>,
    pub device: Option<String>,
    pub angle_quantum_deg: Option<f64>,
    pub max_speed_deg_per_s: Option<f64>,
    pub stokes_sigma: Option<f64>,
    pub hwp_retardance_error: Option<f64>,
    pub qwp_retardance_error: Option<f64>,
    pub device_seed: Option<u64>,
    pub normalize_cost: Option<bool>,
    pub exclude_diagonal: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidArgument(format!("config file: {e}")))
            }
        }
    }
}

/// Picks CLI value, then file value, then default.
pub fn layer<T: Clone>(cli: Option<T>, file: Option<T>, default: T) -> T {
    cli.or(file).unwrap_or(default)
}

pub fn optimizer_config(
    file: &FileConfig,
    restarts: Option<usize>,
    mc_samples: Option<usize>,
    mc_step: Option<f64>,
    mc_temperature: Option<f64>,
    lr: Option<f64>,
    fd_eps: Option<f64>,
    max_iters: Option<usize>,
    rel_tol: Option<f64>,
    patience: Option<usize>,
    seed: Option<u64>,
) -> OptimizerConfig {
    let d = OptimizerConfig::default();
    OptimizerConfig {
        n_restarts: layer(restarts, file.restarts, d.n_restarts),
        mc_samples: layer(mc_samples, file.mc_samples, d.mc_samples),
        mc_step: layer(mc_step, file.mc_step, d.mc_step),
        mc_temperature: mc_temperature.or(file.mc_temperature).or(d.mc_temperature),
        lr: layer(lr, file.lr, d.lr),
        fd_eps: layer(fd_eps, file.fd_eps, d.fd_eps),
        max_iters: layer(max_iters, file.max_iters, d.max_iters),
        rel_tol: layer(rel_tol, file.rel_tol, d.rel_tol),
        patience: layer(patience, file.patience, d.patience),
        seed: layer(seed, file.seed, d.seed),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn device_config(
    file: &FileConfig,
    angle_quantum_deg: Option<f64>,
    max_speed: Option<f64>,
    stokes_sigma: Option<f64>,
    hwp_retardance_error: Option<f64>,
    qwp_retardance_error: Option<f64>,
    device_seed: Option<u64>,
) -> DeviceConfig {
    let d = DeviceConfig::default();
    DeviceConfig {
        angle_quantum_deg: layer(angle_quantum_deg, file.angle_quantum_deg, d.angle_quantum_deg),
        max_speed_deg_per_s: layer(max_speed, file.max_speed_deg_per_s, d.max_speed_deg_per_s),
        hwp_retardance_error: layer(
            hwp_retardance_error,
            file.hwp_retardance_error,
            d.hwp_retardance_error,
        ),
        qwp_retardance_error: layer(
            qwp_retardance_error,
            file.qwp_retardance_error,
            d.qwp_retardance_error,
        ),
        stokes_noise_sigma: layer(stokes_sigma, file.stokes_sigma, d.stokes_noise_sigma),
        seed: layer(device_seed, file.device_seed, d.seed),
    }
}
