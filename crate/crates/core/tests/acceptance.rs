//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use plasim_core::evolution::{propagator_columns, EvolutionPlan, Evolver};
use plasim_core::noise::{
    calibrate_length, deviation, perturbed_mpp, DetectorModel, PerturbationSource,
};
use plasim_core::photonstats::{
    count_coincidences, g2_estimate, run_trials, simulate_source, CoincidenceCounts, Detector,
    EventStream, SourceConfig, SourceKind, StreamSet,
};
use plasim_core::pla::{
    align_global_phase, build_mpp, extract_point, extract_trajectory, find_classical_position,
    scan_pair, FindOptions, MppCurve, TrajectoryConfig, DEFAULT_MASK_FLOOR,
};
use plasim_core::propagators::{
    chapman_kolmogorov, classical_trajectory, free_propagator, harmonic_propagator, Endpoints,
};
use plasim_core::protocol::{
    measure_wavefunction, reconstruct_propagator, reference_drift, scan_propagator, ScanAxis,
    ScanRequest, DEFAULT_DIVISION_FLOOR,
};
use plasim_core::{gaussian_packet, grin_omega, ComplexField, Error, Potential, SpatialGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAMBDA: f64 = 795e-6;
const WAIST: f64 = 0.4;
const DX: f64 = 2.67e-3;
const N: usize = 4096;

fn k() -> f64 {
    2.0 * PI / LAMBDA
}

fn omega() -> f64 {
    grin_omega(1.643, 0.043, Some(30.26)).expect("GRIN cycle")
}

fn harmonic() -> Potential {
    Potential::Harmonic { omega: omega() }
}

fn production_grid() -> SpatialGrid {
    SpatialGrid::new(N, DX, 0.0).expect("production grid")
}

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

fn max_relative(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm() / y.norm())
        .fold(0.0, f64::max)
}

/// Noiseless free-space reconstruction at z = 4, 5, 6 mm.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut drift = 0.0f64;
    for z in [4.0, 5.0, 6.0] {
        let grid = SpatialGrid::fresnel_critical(N, LAMBDA, z, 0.0).map_err(err)?;
        let psi = gaussian_packet(&grid, WAIST, 0.0).map_err(err)?;
        let peak = psi.max_abs();
        let positions: Vec<f64> = (0..grid.n())
            .filter(|&j| psi.amps()[j].norm() > 0.01 * peak)
            .map(|j| grid.x(j))
            .collect();
        let req = ScanRequest::noiseless(
            ScanAxis::FinalPosition,
            Potential::Free,
            k(),
            0.0,
            z,
            0.0,
            positions,
        );
        let kpp = scan_propagator(&psi, &req).map_err(err)?;
        let plan = EvolutionPlan::new(Potential::Free, 0.0, z, 1, k()).map_err(err)?;
        let reference = Evolver::new(grid, plan).evolve(&psi).map_err(err)?;
        let psi_a = psi.at(0.0).map_err(err)?;
        let measured =
            reconstruct_propagator(&kpp, &reference, psi_a, DEFAULT_DIVISION_FLOOR).map_err(err)?;
        let exact: Vec<Complex64> = measured
            .x
            .iter()
            .map(|&x| free_propagator(x, z, 0.0, 0.0, k()))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        let align = align_global_phase(&measured.values, &exact).map_err(err)?;
        let aligned: Vec<Complex64> = measured.values.iter().map(|v| v * align.factor()).collect();
        worst = worst.max(max_relative(&aligned, &exact));
        drift = drift.max(reference_drift(&psi, 0.0, z, k(), 0.01).map_err(err)?);
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst < 1e-3 && secs < 10.0,
        format!(
            "max relative error {worst:.2e} (< 1e-3), runtime {secs:.2} s (< 10 s); stationary-reference deviation {drift:.2e}"
        ),
    )
}

fn least_squares_slope(z: &[f64], x: &[f64]) -> f64 {
    let n = z.len() as f64;
    let (mz, mx) = (z.iter().sum::<f64>() / n, x.iter().sum::<f64>() / n);
    let num: f64 = z.iter().zip(x).map(|(a, b)| (a - mz) * (b - mx)).sum();
    let den: f64 = z.iter().map(|a| (a - mz).powi(2)).sum();
    num / den
}

fn trajectory_config(refine: bool) -> TrajectoryConfig {
    let mut cfg = TrajectoryConfig::new(production_grid(), k(), WAIST);
    cfg.find.refine = refine;
    cfg
}

/// Free-space trajectories are straight lines.
fn criterion_2() -> Outcome {
    let cfg = trajectory_config(true);
    let z_list: Vec<f64> = (1..=9).map(f64::from).collect();
    let mut worst = 0.0f64;
    let mut slope_err = 0.0f64;
    for x_b in [0.043, 0.0, -0.043] {
        let e = Endpoints::new(0.0, 0.0, x_b, 10.0).map_err(err)?;
        let est = extract_trajectory(&e, &Potential::Free, &z_list, &cfg).map_err(err)?;
        if !est.failures.is_empty() {
            return Err(format!("x_b = {x_b}: {} failed points", est.failures.len()));
        }
        for p in &est.points {
            worst = worst.max((p.x_cl - x_b * p.z / 10.0).abs());
        }
        if x_b != 0.0 {
            let zs: Vec<f64> = est.points.iter().map(|p| p.z).collect();
            let xs: Vec<f64> = est.points.iter().map(|p| p.x_cl).collect();
            let slope = least_squares_slope(&zs, &xs);
            slope_err = slope_err.max(((slope - x_b / 10.0) / (x_b / 10.0)).abs());
        }
    }
    check(
        worst <= DX && slope_err < 0.02,
        format!(
            "max |x_cl - line| {:.3} µm (<= 2.67 µm), worst slope error {:.2}% (< 2%)",
            worst * 1e3,
            slope_err * 100.0
        ),
    )
}

/// Harmonic trajectories follow the sine-weighted classical path.
fn criterion_3() -> Outcome {
    let cfg = trajectory_config(false);
    let e = Endpoints::new(0.040, 0.0, 0.016, 10.0).map_err(err)?;
    let z_list: Vec<f64> = (1..=9).map(f64::from).collect();
    let est = extract_trajectory(&e, &harmonic(), &z_list, &cfg).map_err(err)?;
    if !est.failures.is_empty() {
        return Err(format!("{} failed points", est.failures.len()));
    }
    let mut worst = 0.0f64;
    for p in &est.points {
        let truth = classical_trajectory(&e, &harmonic(), p.z).map_err(err)?;
        worst = worst.max((p.x_cl - truth).abs());
    }
    check(
        worst <= DX,
        format!(
            "max |x_cl - x_classical| {:.3} µm (<= 2.67 µm)",
            worst * 1e3
        ),
    )
}

/// Composition law over an intermediate slice.
fn criterion_4() -> Outcome {
    let cases = [
        (
            Endpoints::new(0.0, 0.0, 0.043, 10.0).map_err(err)?,
            Potential::Free,
            5.0,
        ),
        (
            Endpoints::new(0.040, 0.0, 0.016, 10.0).map_err(err)?,
            harmonic(),
            4.0,
        ),
        (
            Endpoints::new(0.040, 0.0, 0.016, 20.0).map_err(err)?,
            harmonic(),
            1.1 * PI / omega(),
        ),
    ];
    let mut detail = Vec::new();
    let mut ok = true;
    for (e, p, z) in cases {
        let r = chapman_kolmogorov(&e, &p, z, k(), 40.0, 4096).map_err(err)?;
        ok &= r.relative_error < 1e-3 && r.span >= 20.0 * r.width;
        detail.push(format!("{} z={z:.2}: {:.1e}", p.name(), r.relative_error));
    }
    check(
        ok,
        format!(
            "relative errors over 40 widths: {} (< 1e-3)",
            detail.join(", ")
        ),
    )
}

type Kernel = Box<dyn Fn(f64) -> Result<Complex64, Error>>;

fn column_error(grid: &SpatialGrid, plan: &EvolutionPlan, regions: f64) -> Result<f64, String> {
    let j = grid.n() / 2;
    let col = propagator_columns(grid, plan, &[j]).map_err(err)?;
    let z = plan.duration();
    let (width, exact): (f64, Kernel) = match plan.potential {
        Potential::Free => (
            (z / k()).sqrt(),
            Box::new(move |x| free_propagator(x, z, 0.0, 0.0, k())),
        ),
        Potential::Harmonic { omega } => (
            ((omega * z).sin().abs() / (omega * k())).sqrt(),
            Box::new(move |x| harmonic_propagator(x, z, 0.0, 0.0, k(), omega)),
        ),
    };
    let mut worst = 0.0f64;
    for i in 0..grid.n() {
        let x = grid.x(i);
        if x.abs() < regions * width {
            let e = exact(x).map_err(err)?;
            worst = worst.max((col.entry(i, j) - e).norm() / e.norm());
        }
    }
    Ok(worst)
}

/// Propagator-matrix columns against the closed-form kernels.
fn criterion_5() -> Outcome {
    let n = 2048;
    let free_grid = SpatialGrid::fresnel_critical(n, LAMBDA, 5.0, 0.0).map_err(err)?;
    let free_plan = EvolutionPlan::new(Potential::Free, 0.0, 5.0, 1, k()).map_err(err)?;
    let free_err = column_error(&free_grid, &free_plan, 3.0)?;
    let osc_grid = SpatialGrid::oscillator_matched(n, LAMBDA, omega(), 0.0).map_err(err)?;
    let mut harm_err = 0.0f64;
    for z in [5.0, 30.26 / 4.0, 10.0] {
        let plan = EvolutionPlan::with_default_steps(harmonic(), 0.0, z, k()).map_err(err)?;
        harm_err = harm_err.max(column_error(&osc_grid, &plan, 3.0)?);
    }
    let quarter = 30.26 / 4.0;
    let coarse = column_error(
        &osc_grid,
        &EvolutionPlan::new(harmonic(), 0.0, quarter, 10, k()).map_err(err)?,
        3.0,
    )?;
    let fine = column_error(
        &osc_grid,
        &EvolutionPlan::new(harmonic(), 0.0, quarter, 20, k()).map_err(err)?,
        3.0,
    )?;
    let ratio = coarse / fine;
    check(
        free_err < 1e-3 && harm_err < 1e-3 && (3.0..=5.0).contains(&ratio),
        format!(
            "free {free_err:.1e}, harmonic {harm_err:.1e} (< 1e-3, n = {n}); error ratio on halving dz {ratio:.2} (≈ 4)"
        ),
    )
}

/// Time-perturbation robustness at z = 1.1 π/ω.
fn criterion_6() -> Outcome {
    let grid = production_grid();
    let e = Endpoints::new(0.0, 0.0, 0.0, 20.0).map_err(err)?;
    let z = 1.1 * PI / omega();
    let eps = 0.003 * e.duration();
    let centre = grid.nearest_index(0.0).map_err(err)?;
    let half = 200;
    let x: Vec<f64> = (centre - half..=centre + half).map(|j| grid.x(j)).collect();
    let source = PerturbationSource::Analytic { k: k(), x };
    let (m, m_eps) = perturbed_mpp(&e, &harmonic(), z, eps, &source).map_err(err)?;
    let lengths: Vec<f64> = (1..half).map(|i| 2.0 * i as f64 * DX).collect();
    let cal = calibrate_length(&m, &m_eps, 0.6853, &lengths).ok_or("F(L) never crosses 0.6853")?;
    let r = cal.report;
    let dev = deviation(&m, &m_eps);
    let opts = FindOptions {
        search: Some((-0.5 * r.length, 0.5 * r.length)),
        ..FindOptions::default()
    };
    let at = find_classical_position(&m, &opts).map_err(err)?.index;
    let dev_max = dev.iter().copied().fold(0.0, f64::max);
    check(
        r.x_cl_shift < 1e-3 * r.length && dev[at] < 0.1 * dev_max,
        format!(
            "F = {:.4} at L = {:.4} mm (bracket {:.4}..{:.4}), x_cl shift {:.1e} mm (< {:.1e}), deviation at x_cl {:.1e} vs max {:.3}",
            r.fidelity,
            r.length,
            cal.bracket.0.fidelity,
            cal.bracket.1.fidelity,
            r.x_cl_shift,
            1e-3 * r.length,
            dev[at],
            dev_max
        ),
    )
}

fn noisy_hits(photons: f64, window: usize, trials: u64) -> Result<(u64, f64, f64), String> {
    let e = Endpoints::new(0.0, 0.0, 0.043, 10.0).map_err(err)?;
    let z = 5.0;
    let mut base = trajectory_config(false);
    base.find.window = window;
    let clean = extract_point(&e, &Potential::Free, z, &base, 0).map_err(err)?;
    let mut hits = 0;
    for seed in 0..trials {
        let mut cfg = base.clone();
        cfg.detector = Some(DetectorModel::camera(photons, seed).map_err(err)?);
        if let Ok(p) = extract_point(&e, &Potential::Free, z, &cfg, 0) {
            if (p.x_cl - clean.x_cl).abs() <= 2.0 * DX + 1e-12 {
                hits += 1;
            }
        }
    }
    let truth = classical_trajectory(&e, &Potential::Free, z).map_err(err)?;
    Ok((hits, clean.x_cl, truth))
}

/// Extraction under camera noise at the minimum photon budget.
fn criterion_7() -> Outcome {
    // Widest smoothing window the 53-sample scan allows.
    let (hits, clean, truth) = noisy_hits(1e6, 13, 100)?;
    let (default_hits, _, _) = noisy_hits(1e7, 5, 100)?;
    check(
        hits >= 95 && (clean - truth).abs() <= DX,
        format!(
            "{hits}/100 trials within 2 grid steps (>= 95) at 1e6 photons per scan, QE 0.32, 4.68 e- readout, \
             smoothing window 13 (noiseless x_cl {:.2} µm from the classical path); default window 5 needs 1e7 photons: {default_hits}/100",
            (clean - truth).abs() * 1e3
        ),
    )
}

/// Quadratic oracle: each partner click belongs to its nearest herald
/// (earliest on ties) when within half a window.
fn brute_force(s: &StreamSet, window: f64) -> CoincidenceCounts {
    let heralds = &s[0].timestamps;
    let attributed = |other: &EventStream| {
        let mut hit = vec![false; heralds.len()];
        for &p in &other.timestamps {
            let mut best = 0;
            for (i, &h) in heralds.iter().enumerate() {
                if (h - p).abs() < (heralds[best] - p).abs() {
                    best = i;
                }
            }
            if !heralds.is_empty() && (heralds[best] - p).abs() <= 0.5 * window {
                hit[best] = true;
            }
        }
        hit
    };
    let (a, b) = (attributed(&s[1]), attributed(&s[2]));
    CoincidenceCounts {
        n1: heralds.len() as u64,
        n12: a.iter().filter(|&&v| v).count() as u64,
        n13: b.iter().filter(|&&v| v).count() as u64,
        n123: a.iter().zip(&b).filter(|(x, y)| **x && **y).count() as u64,
        window,
    }
}

/// Heralded-correlation estimator.
fn criterion_8() -> Outcome {
    // Ideal: unit herald efficiency, no background, no timing jitter.
    let mut ideal = SourceConfig::new(SourceKind::HeraldedSingle, 1e4, 5.0, 11);
    ideal.jitter = 0.0;
    let ideal_g2 = g2_estimate(&run_trials(&ideal, 12, 12.0).map_err(err)?)
        .map_err(err)?
        .g2;

    let coherent = SourceConfig::new(SourceKind::Coherent, 1e4, 5.0, 12);
    let est = g2_estimate(&run_trials(&coherent, 12, 12.0).map_err(err)?).map_err(err)?;
    let sigma = est.sigma.ok_or("no spread with 12 trials")?;

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut exact = true;
    for _ in 0..5 {
        let mut stream = |d| {
            let ts: Vec<f64> = (0..1000).map(|_| rng.random::<f64>() * 2e5).collect();
            EventStream::new(d, ts, 2e-4)
        };
        let s = [
            stream(Detector::D1).map_err(err)?,
            stream(Detector::D2).map_err(err)?,
            stream(Detector::D3).map_err(err)?,
        ];
        exact &= count_coincidences(&s, 12.0).map_err(err)? == brute_force(&s, 12.0);
    }
    // One simulated stream set as well, with realistic clustering.
    let mut thermal = SourceConfig::new(SourceKind::Thermal, 5e3, 0.2, 14);
    thermal.mean_photons = 0.5;
    let sim = simulate_source(&thermal).map_err(err)?;
    exact &= count_coincidences(&sim, 12.0).map_err(err)? == brute_force(&sim, 12.0);

    check(
        ideal_g2 == 0.0 && (est.g2 - 1.0).abs() <= 3.0 * sigma && exact,
        format!(
            "ideal heralded g2 = {ideal_g2}, coherent g2 = {:.3} ± {:.3} (12 × 5 s at 1e4 Hz), brute-force agreement {}",
            est.g2, sigma, exact
        ),
    )
}

/// Gauge invariance and unit modulus of M''.
fn criterion_9() -> Outcome {
    let cfg = trajectory_config(false);
    let grid = cfg.grid;
    let psi0 = gaussian_packet(&grid, WAIST, 0.0).map_err(err)?;
    let mut ok = true;
    let mut modulus = 0.0f64;
    let cases = [
        (
            Endpoints::new(0.0, 0.0, 0.043, 10.0).map_err(err)?,
            Potential::Free,
            3.0,
        ),
        (
            Endpoints::new(0.040, 0.0, 0.016, 10.0).map_err(err)?,
            harmonic(),
            6.0,
        ),
    ];
    for (e, p, z) in cases {
        let (left, right) = scan_pair(&e, &p, z, &cfg, 0).map_err(err)?;
        let base = build_mpp(&left, &right, DEFAULT_MASK_FLOOR).map_err(err)?;
        let index = |m: &MppCurve| {
            find_classical_position(m, &cfg.find)
                .map(|r| r.index)
                .map_err(err)
        };
        let reference = index(&base)?;
        for s in [Complex64::new(-2.5, 0.7), Complex64::from_polar(1e-4, 2.0)] {
            ok &= index(&build_mpp(&left.scaled(s), &right, DEFAULT_MASK_FLOOR).map_err(err)?)?
                == reference;
            ok &= index(&build_mpp(&left, &right.scaled(s), DEFAULT_MASK_FLOOR).map_err(err)?)?
                == reference;
        }
        // Reconstructed-K pathway: divide out the wavefunction factors first.
        let k_left = reconstruct_propagator(
            &left,
            &psi0,
            psi0.at(e.x_a).map_err(err)?,
            DEFAULT_DIVISION_FLOOR,
        )
        .map_err(err)?;
        let k_right = reconstruct_propagator(
            &right,
            &psi0,
            psi0.at(e.x_b).map_err(err)?,
            DEFAULT_DIVISION_FLOOR,
        )
        .map_err(err)?;
        let product: Vec<Complex64> = k_left
            .values
            .iter()
            .zip(&k_right.values)
            .map(|(a, b)| a * b)
            .collect();
        let via_k = MppCurve::from_product(k_left.x.clone(), &product, z, DEFAULT_MASK_FLOOR)
            .map_err(err)?;
        ok &= index(&via_k)? == reference;
        for (m, &r) in base.m.iter().zip(&base.retained) {
            if r {
                modulus = modulus.max((m.norm() - 1.0).abs());
            }
        }
    }
    check(
        ok && modulus < 1e-12,
        format!(
            "argmin identical under scaling and K pathway: {ok}; max ||M''| - 1| = {modulus:.1e}"
        ),
    )
}

fn reconstruction_error(psi: &ComplexField) -> Result<f64, String> {
    let out = measure_wavefunction(psi).map_err(err)?;
    let align = align_global_phase(out.psi.amps(), psi.amps()).map_err(err)?;
    let peak = psi.max_abs();
    Ok(out
        .psi
        .amps()
        .iter()
        .zip(psi.amps())
        .map(|(a, b)| (a * align.factor() - b).norm() / peak)
        .fold(0.0, f64::max))
}

/// Direct wavefunction measurement.
fn criterion_10() -> Outcome {
    let grid = production_grid();
    let gauss = gaussian_packet(&grid, WAIST, 0.0).map_err(err)?;
    let g_err = reconstruction_error(&gauss)?;
    let v = gauss.with_phase(plasim_core::field::v_phase(20.0, 0.0));
    let v_err = reconstruction_error(&v)?;
    let odd = ComplexField::from_fn(grid, |x| {
        Complex64::new(x * (-x * x / (2.0 * WAIST * WAIST)).exp(), 0.0)
    });
    let odd_rejected = matches!(
        measure_wavefunction(&odd),
        Err(Error::VanishingZeroMomentum { .. })
    );
    check(
        g_err < 1e-6 && v_err < 1e-6 && odd_rejected,
        format!("Gaussian {g_err:.1e}, V-phase {v_err:.1e} (< 1e-6 of peak); odd input rejected: {odd_rejected}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("free-space propagator reconstruction", criterion_1),
        ("free trajectory straightness", criterion_2),
        ("harmonic trajectory", criterion_3),
        ("Chapman-Kolmogorov composition", criterion_4),
        ("numerical vs analytic kernels", criterion_5),
        ("time-perturbation robustness", criterion_6),
        ("noise tolerance", criterion_7),
        ("g2 estimator", criterion_8),
        ("gauge invariance", criterion_9),
        ("direct wavefunction measurement", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!(
                "PASS criterion {:>2} ({name}): {detail} [{secs:.1} s]",
                i + 1
            ),
            Err(detail) => {
                failed += 1;
                println!(
                    "FAIL criterion {:>2} ({name}): {detail} [{secs:.1} s]",
                    i + 1
                );
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
