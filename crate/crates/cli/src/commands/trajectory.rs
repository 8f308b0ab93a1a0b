use plasim_core::pla::{align_curves, extract_trajectory, MppCurve};
use plasim_core::propagators::{classical_trajectory, pi_product};
use plasim_core::Complex64;

use super::RunOutput;
use crate::config::{Resolved, RunConfig};
use crate::error::CliError;
use crate::output::{z_tag, ResultBundle, Table};

/// Minimum fraction of intermediate times that must yield a position.
const MIN_SUCCESS_FRACTION: f64 = 0.8;

/// Extracts `x_cl(z)` for every requested time, with the analytic path and
/// the per-time `M''` curves alongside.
pub fn run(cfg: &RunConfig, r: &Resolved, mut bundle: ResultBundle) -> Result<RunOutput, CliError> {
    let scan = cfg.scan()?;
    let e = r
        .endpoints
        .ok_or_else(|| CliError::Config("trajectory needs endpoints".into()))?;
    let tcfg = cfg.trajectory_config(r)?;
    let est = extract_trajectory(&e, &r.potential, &scan.z, &tcfg)?;

    let mut path = Table::new(
        "trajectory",
        &[
            ("z", "mm"),
            ("x_cl", "mm"),
            ("x_classical", "mm"),
            ("deviation", "mm"),
            ("residual", "mm^-2"),
        ],
    );
    let mut worst = 0.0f64;
    for p in &est.points {
        let truth = classical_trajectory(&e, &r.potential, p.z)?;
        worst = worst.max((p.x_cl - truth).abs());
        path.push_floats(&[p.z, p.x_cl, truth, p.x_cl - truth, p.residual]);
    }
    bundle.tables.push(path);

    for p in &est.points {
        if scan.curves.as_ref().is_some_and(|c| !c.contains(&p.z)) {
            continue;
        }
        bundle.tables.push(curve_table(&p.curve, &e, r, p.z)?);
    }

    let failures: Vec<toml::Value> = est
        .failures
        .iter()
        .map(|f| {
            let mut t = toml::Table::new();
            t.insert("z".into(), f.z.into());
            t.insert("reason".into(), f.reason.clone().into());
            toml::Value::Table(t)
        })
        .collect();
    let fraction = est.success_fraction();
    bundle
        .summary
        .insert("potential".into(), r.potential.name().into());
    bundle
        .summary
        .insert("noisy".into(), r.detector.is_some().into());
    bundle
        .summary
        .insert("points".into(), (est.points.len() as i64).into());
    bundle
        .summary
        .insert("success_fraction".into(), fraction.into());
    bundle.summary.insert("max_deviation".into(), worst.into());
    bundle
        .summary
        .insert("grid_step".into(), r.grid.dx().into());
    bundle.summary.insert("failures".into(), failures.into());

    let partial = (fraction < MIN_SUCCESS_FRACTION).then(|| {
        format!(
            "only {} of {} intermediate times yielded a classical position",
            est.points.len(),
            scan.z.len()
        )
    });
    Ok(RunOutput { bundle, partial })
}

fn curve_table(
    curve: &MppCurve,
    e: &plasim_core::Endpoints,
    r: &Resolved,
    z: f64,
) -> Result<Table, CliError> {
    let k = r.params.k();
    let pi: Vec<Complex64> = curve
        .x
        .iter()
        .map(|&x| pi_product(x, z, e, &r.potential, k))
        .collect::<Result<_, _>>()?;
    let analytic = MppCurve::from_product(curve.x.clone(), &pi, z, 0.0)?;
    // Fall back to the raw curve when the alignment has too little overlap.
    let measured = align_curves(curve, &analytic)
        .map(|(m, _)| m)
        .unwrap_or_else(|_| curve.clone());
    let mut table = Table::new(
        format!("mpp_{}", z_tag(z)),
        &[
            ("x", "mm"),
            ("re_m", "1"),
            ("im_m", "1"),
            ("retained", "1"),
            ("re_m_analytic", "1"),
            ("im_m_analytic", "1"),
        ],
    );
    for i in 0..curve.len() {
        let (m, a) = (measured.m[i], analytic.m[i]);
        table.push_floats(&[
            curve.x[i],
            m.re,
            m.im,
            f64::from(u8::from(curve.retained[i])),
            a.re,
            a.im,
        ]);
    }
    Ok(table)
}
