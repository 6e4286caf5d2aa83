//! Acceptance suite. Each test prints one pass/fail line (visible with
//! `cargo test --test acceptance -- --nocapture`) and asserts the criterion
//! at its stated tolerance.

use std::f64::consts::{FRAC_PI_4, PI};
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polclust_core::circuit::{batch_states, fidelity_matrix, run_circuit, CircuitParams};
use polclust_core::clustering::{naive_cost, ClusterProblem};
use polclust_core::datasets::{gaussian_blobs, BlobSpec, Layout};
use polclust_core::embedding::{build_lut, fit_embedding, sphere_to_plates, EmbedMode};
use polclust_core::hardware::protocol::{serve_device, DeviceClient};
use polclust_core::hardware::{DeviceConfig, PlateDevice, SimulatedDevice};
use polclust_core::landscape::{scan, ScanSpec};
use polclust_core::optimizer::{fd_gradient, optimize, optimize_on_device, OptimizerConfig, Phase};
use polclust_core::polarization::{fidelity, JonesMatrix, JonesVector, SphereAngles};

/// Circuit depth used throughout (the multi-blob runs are specified with two
/// variational layers; the two-blob runs use the same default).
const LAYERS: usize = 2;

fn report(criterion: u32, label: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion:2} [{}] {label}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn blob_spec(k: usize, n_per_blob: usize, seed: u64) -> BlobSpec {
    BlobSpec {
        k,
        n_per_blob,
        d_over_sigma: 8.0,
        sigma: 1.0,
        layout: Layout::Ring,
        seed,
    }
}

fn blob_problem(k: usize, n_per_blob: usize, seed: u64) -> ClusterProblem {
    let ds = gaussian_blobs(&blob_spec(k, n_per_blob, seed)).unwrap();
    let map = fit_embedding(&ds, 0.05).unwrap();
    ClusterProblem::new(ds, k, 1.0, LAYERS, map, EmbedMode::Analytic).unwrap()
}

fn defaults_with_seed(seed: u64) -> OptimizerConfig {
    OptimizerConfig {
        seed,
        ..OptimizerConfig::default()
    }
}

#[test]
fn criterion_01_two_blob_clustering() {
    let start = Instant::now();
    let mut perfect = 0;
    for seed in 0..10u64 {
        let problem = blob_problem(2, 100, seed);
        let result = optimize(&problem, &defaults_with_seed(1000 + seed)).unwrap();
        if result.success_ratio == Some(1.0) {
            perfect += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = perfect >= 9 && elapsed < Duration::from_secs(60);
    report(
        1,
        "two-blob clustering",
        pass,
        &format!("perfect {perfect}/10 seeds, elapsed {elapsed:.2?} (< 60 s)"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_multi_blob_clustering() {
    let start = Instant::now();
    let mut all_pass = true;
    let mut details = Vec::new();
    for k in [3usize, 4, 5] {
        let mut good = 0;
        for seed in 0..10u64 {
            let problem = blob_problem(k, 50, seed);
            let result = optimize(&problem, &defaults_with_seed(1000 + seed)).unwrap();
            if result.success_ratio.unwrap() >= 0.90 {
                good += 1;
            }
        }
        details.push(format!("k={k}: {good}/10 seeds ≥ 90%"));
        all_pass &= good >= 8;
    }
    let elapsed = start.elapsed();
    let pass = all_pass && elapsed < Duration::from_secs(300);
    report(
        2,
        "multi-blob clustering",
        pass,
        &format!("{}, elapsed {elapsed:.2?} (< 5 min)", details.join("; ")),
    );
    assert!(pass);
}

#[test]
fn criterion_03_local_minima_spectrum() {
    let problem = blob_problem(4, 50, 402);
    let mut costs = Vec::new();
    let mut perfect = 0;
    for run in 0..20u64 {
        let cfg = OptimizerConfig {
            n_restarts: 1,
            ..defaults_with_seed(9000 + run)
        };
        let result = optimize(&problem, &cfg).unwrap();
        costs.push(result.best_cost);
        if result.success_ratio == Some(1.0) {
            perfect += 1;
        }
    }
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let distinct_levels = costs.iter().filter(|&&c| (c - min) / min > 0.01).count();
    let pass = distinct_levels >= 1 && perfect >= 1;
    report(
        3,
        "local-minima spectrum",
        pass,
        &format!(
            "{} runs >1% above the best level, {perfect}/20 runs at 100% success",
            distinct_levels
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_convergence_profile() {
    let mut fast = 0;
    let mut total = 0;
    let mut within_budget = true;
    for seed in 0..10u64 {
        let problem = blob_problem(2, 100, seed);
        let cfg = defaults_with_seed(1000 + seed);
        let result = optimize(&problem, &cfg).unwrap();
        let descent: Vec<_> = result.traces[result.best_restart]
            .phase_records(Phase::Descent)
            .collect();
        let final_cost = descent.last().unwrap().cost;
        let first_close = descent
            .iter()
            .find(|r| r.cost <= 1.05 * final_cost)
            .map(|r| r.iter)
            .unwrap();
        total += 1;
        if first_close <= 15 {
            fast += 1;
        }
        for trace in &result.traces {
            let steps = trace
                .phase_records(Phase::Descent)
                .map(|r| r.iter)
                .max()
                .unwrap_or(0);
            within_budget &= steps <= cfg.max_iters;
        }
    }
    let pass = fast * 10 >= total * 8 && within_budget;
    report(
        4,
        "convergence profile",
        pass,
        &format!(
            "{fast}/{total} best restarts within 5% of final cost by descent iteration 15; \
             all traces ≤ 30 descent iterations: {within_budget}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_noise_robustness() {
    let mut perfect = 0;
    for seed in 0..10u64 {
        let problem = blob_problem(2, 100, seed);
        let device_cfg = DeviceConfig {
            angle_quantum_deg: 0.08,
            stokes_noise_sigma: 0.01,
            seed: 500 + seed,
            ..DeviceConfig::default()
        };
        let mut device =
            SimulatedDevice::new(2 + 2 * problem.layers(), device_cfg).unwrap();
        let result =
            optimize_on_device(&problem, &mut device, &defaults_with_seed(1000 + seed)).unwrap();
        if result.success_ratio == Some(1.0) {
            perfect += 1;
        }
    }
    let pass = perfect >= 8;
    report(
        5,
        "noise robustness",
        pass,
        &format!("perfect {perfect}/10 seeds through the imperfect-device layer"),
    );
    assert!(pass);
}

#[test]
fn criterion_06_algebraic_invariants() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let samples = 10_000;
    let mut worst: [f64; 6] = [0.0; 6];
    for _ in 0..samples {
        let angle = rng.random_range(0.0..PI);
        let h = JonesMatrix::hwp(angle).unwrap();
        let q = JonesMatrix::qwp(angle).unwrap();

        // Unitarity.
        worst[0] = worst[0].max(h.unitarity_defect()).max(q.unitarity_defect());

        // hwp² = e^{-iπ}·I entrywise.
        let h2 = h.mul(&h);
        let d = [
            h2.m00 + Complex64::new(1.0, 0.0),
            h2.m01,
            h2.m10,
            h2.m11 + Complex64::new(1.0, 0.0),
        ];
        worst[1] = worst[1].max(d.iter().map(|c| c.norm()).fold(0.0, f64::max));

        // qwp² = hwp entrywise.
        let q2 = q.mul(&q);
        let d = [
            q2.m00 - h.m00,
            q2.m01 - h.m01,
            q2.m10 - h.m10,
            q2.m11 - h.m11,
        ];
        worst[2] = worst[2].max(d.iter().map(|c| c.norm()).fold(0.0, f64::max));

        // Stokes purity of a random normalized state.
        let state = JonesVector::new(
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        )
        .unwrap_or(JonesVector::horizontal());
        let s = state.to_stokes();
        worst[3] = worst[3].max(((s.s1 * s.s1 + s.s2 * s.s2 + s.s3 * s.s3) - 1.0).abs());

        // Fidelity bounds and phase invariance.
        let other = q.apply(&state);
        let f = fidelity(&state, &other);
        worst[4] = worst[4].max((f.min(0.0)).abs()).max((f - 1.0).max(0.0));
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let phase = Complex64::new(phi.cos(), phi.sin());
        let shifted = JonesVector {
            ex: other.ex * phase,
            ey: other.ey * phase,
        };
        worst[4] = worst[4].max((fidelity(&state, &shifted) - f).abs());

        // π-periodicity entrywise.
        let hp = JonesMatrix::hwp(angle + PI).unwrap();
        let qp = JonesMatrix::qwp(angle + PI).unwrap();
        let d = [
            hp.m00 - h.m00,
            hp.m01 - h.m01,
            hp.m10 - h.m10,
            hp.m11 - h.m11,
            qp.m00 - q.m00,
            qp.m01 - q.m01,
            qp.m10 - q.m10,
            qp.m11 - q.m11,
        ];
        worst[5] = worst[5].max(d.iter().map(|c| c.norm()).fold(0.0, f64::max));
    }
    let elapsed = start.elapsed();
    let pass = worst[0] < 1e-12
        && worst[1] < 1e-12
        && worst[2] < 1e-12
        && worst[3] < 1e-10
        && worst[4] < 1e-12
        && worst[5] < 1e-12
        && elapsed < Duration::from_secs(10);
    report(
        6,
        "algebraic invariant suite",
        pass,
        &format!(
            "{samples} samples; worst: unitarity {:.1e}, hwp² {:.1e}, qwp²−hwp {:.1e}, \
             purity {:.1e}, fidelity {:.1e}, periodicity {:.1e}; elapsed {elapsed:.2?}",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_oracle_equivalences() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);

    // Cost vs naive double loop, 100 random instances with N ≤ 10.
    let mut worst_cost = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=10);
        let k = rng.random_range(1..=6);
        let points = (0..n)
            .map(|_| polclust_core::datasets::DataPoint {
                x: rng.random_range(-5.0..5.0),
                y: rng.random_range(-5.0..5.0),
                true_label: None,
            })
            .collect();
        let ds = polclust_core::datasets::Dataset::new(points).unwrap();
        let map = fit_embedding(&ds, 0.05).unwrap();
        let lambda = rng.random_range(0.0..3.0);
        let problem = ClusterProblem::new(ds, k, lambda, LAYERS, map, EmbedMode::Analytic).unwrap();
        let params = random_params(&mut rng);
        let report = problem.cost(&params);
        let oracle = naive_cost(
            problem.dataset().points(),
            report.assignment.labels(),
            report.centroids.points(),
            &report.fidelities,
            lambda,
            false,
        );
        worst_cost = worst_cost.max((report.value - oracle).abs() / oracle.abs().max(1.0));
    }

    // run_circuit vs apply∘compose.
    let mut worst_circuit = 0.0f64;
    for _ in 0..200 {
        let params = random_params(&mut rng);
        let input = JonesMatrix::qwp(rng.random_range(0.0..PI))
            .unwrap()
            .apply(&JonesVector::horizontal());
        let direct = run_circuit(&params, &input);
        let composed = JonesMatrix::compose(&params.plate_matrices())
            .unwrap()
            .apply(&input);
        worst_circuit = worst_circuit
            .max((direct.ex - composed.ex).norm())
            .max((direct.ey - composed.ey).norm());
    }

    // fd_gradient vs a 5-point stencil on the clustering cost at
    // assignment-stable points. At ε = 1e-5 the central-difference
    // truncation O(ε²·f''') sits far below the 1e-6 gate while float noise
    // on the cost stays negligible against the 2ε spacing.
    let problem = blob_problem(3, 6, 77); // N = 18
    let eps = 1e-5;
    let mut checked = 0;
    let mut worst_grad = 0.0f64;
    'outer: for _ in 0..40 {
        let params = random_params(&mut rng);
        let flat = params.to_flat();
        let base_labels = problem.cost(&params).assignment.labels().to_vec();
        // Stability probe: every ±ε and ±2ε displacement must keep the
        // assignment unchanged, otherwise the point straddles a switch.
        for j in 0..flat.len() {
            for step in [-2.0 * eps, -eps, eps, 2.0 * eps] {
                let mut probe = flat.clone();
                probe[j] += step;
                let labels = problem
                    .cost(&CircuitParams::from_flat(&probe).unwrap())
                    .assignment
                    .labels()
                    .to_vec();
                if labels != base_labels {
                    continue 'outer;
                }
            }
        }
        let mut cost_fn = |p: &CircuitParams| {
            Ok::<f64, polclust_core::Error>(problem.cost(p).value)
        };
        let grad = fd_gradient(&mut cost_fn, &params, eps).unwrap();
        let mut stencil = Vec::with_capacity(flat.len());
        for j in 0..flat.len() {
            let eval = |offset: f64| {
                let mut probe = flat.clone();
                probe[j] += offset;
                problem.cost(&CircuitParams::from_flat(&probe).unwrap()).value
            };
            stencil.push(
                (-eval(2.0 * eps) + 8.0 * eval(eps) - 8.0 * eval(-eps) + eval(-2.0 * eps))
                    / (12.0 * eps),
            );
        }
        let scale = stencil.iter().fold(1.0f64, |m, s| m.max(s.abs()));
        for (g, s) in grad.iter().zip(&stencil) {
            worst_grad = worst_grad.max((g - s).abs() / scale);
        }
        checked += 1;
    }

    let pass = worst_cost <= 1e-12 && worst_circuit <= 1e-12 && checked >= 10 && worst_grad <= 1e-6;
    report(
        7,
        "oracle equivalences",
        pass,
        &format!(
            "cost-vs-naive worst {worst_cost:.2e} (≤1e-12), circuit-vs-compose worst \
             {worst_circuit:.2e} (≤1e-12), gradient-vs-stencil worst {worst_grad:.2e} \
             over {checked} stable points (≤1e-6)"
        ),
    );
    assert!(pass);
}

fn random_params(rng: &mut impl Rng) -> CircuitParams {
    let flat: Vec<f64> = (0..2 * LAYERS).map(|_| rng.random_range(0.0..PI)).collect();
    CircuitParams::from_flat(&flat).unwrap()
}

#[test]
fn criterion_08_embedding_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst_analytic = 0.0f64;
    for _ in 0..1000 {
        let target = SphereAngles {
            psi: rng.random_range(0.0..PI),
            chi: rng.random_range(-FRAC_PI_4..FRAC_PI_4),
        };
        let reached = sphere_to_plates(target)
            .prepared_state()
            .to_stokes()
            .to_sphere()
            .unwrap();
        worst_analytic = worst_analytic.max(reached.distance(&target));
    }

    let lut = build_lut(0.005).unwrap();
    let half_diag = 0.5 * 0.005 * std::f64::consts::SQRT_2;
    let mut worst_lut = 0.0f64;
    for _ in 0..1000 {
        let target = SphereAngles {
            psi: rng.random_range(0.0..PI),
            chi: rng.random_range(-FRAC_PI_4..FRAC_PI_4),
        };
        let reached = lut
            .lookup(target)
            .prepared_state()
            .to_stokes()
            .to_sphere()
            .unwrap();
        worst_lut = worst_lut.max(reached.sphere_distance(&target));
    }

    let pass = worst_analytic < 1e-9 && worst_lut <= half_diag;
    report(
        8,
        "embedding round trip",
        pass,
        &format!(
            "analytic worst {worst_analytic:.2e} (<1e-9), LUT worst {worst_lut:.2e} \
             (≤ half-cell diagonal {half_diag:.2e})"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_landscape_scan() {
    let start = Instant::now();
    let problem = blob_problem(4, 50, 402);
    let spec = ScanSpec {
        problem: &problem,
        base: CircuitParams::from_flat(&[0.3, 0.8, 1.1, 2.0]).unwrap(),
        axes: (0, 1),
        ranges: [(0.0, PI), (0.0, PI)],
        resolution: 100,
    };
    let result = scan(&spec).unwrap();
    let elapsed = start.elapsed();

    let res = result.resolution();
    let mut worst_period = 0.0f64;
    for j in 0..res {
        worst_period = worst_period
            .max((result.cost_at(0, j) - result.cost_at(res - 1, j)).abs())
            .max((result.cost_at(j, 0) - result.cost_at(j, res - 1)).abs());
    }
    let minima = result.find_local_minima().unwrap();

    let pass =
        elapsed < Duration::from_secs(120) && worst_period < 1e-10 && minima.len() >= 2;
    report(
        9,
        "landscape scan",
        pass,
        &format!(
            "100×100 grid in {elapsed:.2?} (< 2 min), periodicity worst {worst_period:.2e} \
             (<1e-10), {} strict local minima (≥2)",
            minima.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_protocol_conformance() {
    // Zero-noise loopback equals the in-process device bit-exactly.
    let config = DeviceConfig::default();
    let server = serve_device(
        SimulatedDevice::new(6, config.clone()).unwrap(),
        "127.0.0.1:0",
        false,
    )
    .unwrap();
    let addr = server.local_addr();

    let mut remote = DeviceClient::connect(addr).unwrap();
    let mut local = SimulatedDevice::new(6, config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut bit_exact = true;
    for _ in 0..25 {
        let angles: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..180.0)).collect();
        remote.set_plate_angles(&angles).unwrap();
        local.set_plate_angles(&angles).unwrap();
        let a = remote.measure_stokes().unwrap();
        let b = local.measure_stokes().unwrap();
        bit_exact &= a == b;
    }

    // Malformed request answered with bad-request; the server stays up.
    let mut raw = TcpStream::connect(addr).unwrap();
    raw.write_all(b"{not json}\n").unwrap();
    let mut line = String::new();
    BufReader::new(raw.try_clone().unwrap())
        .read_line(&mut line)
        .unwrap();
    let malformed_handled = line.contains("\"bad-request\"");
    drop(raw);

    // Three concurrent clients all served.
    let handles: Vec<_> = (0..3)
        .map(|_| {
            std::thread::spawn(move || {
                let mut client = DeviceClient::connect(addr).unwrap();
                for _ in 0..10 {
                    client.set_plate_angles(&[1.0; 6]).unwrap();
                    client.measure_stokes().unwrap();
                }
                client.info().unwrap().plate_count == 6
            })
        })
        .collect();
    let concurrent_ok = handles.into_iter().all(|h| h.join().unwrap());
    server.shutdown();

    let pass = bit_exact && malformed_handled && concurrent_ok;
    report(
        10,
        "protocol conformance",
        pass,
        &format!(
            "loopback bit-exact: {bit_exact}; bad-request on malformed: {malformed_handled}; \
             3 concurrent clients served: {concurrent_ok}"
        ),
    );
    assert!(pass);
}
