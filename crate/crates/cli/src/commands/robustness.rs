use plasim_core::noise::{
    calibrate_length, deviation, fidelity_sweep, perturbed_mpp, PerturbationSource,
};

use crate::config::{CurveSource, Resolved, RunConfig};
use crate::error::CliError;
use crate::output::{ResultBundle, Table};

/// Sweeps the fidelity `F(L)` between `M''` and its time-perturbed version
/// and calibrates the length that reproduces the target fidelity.
pub fn run(
    cfg: &RunConfig,
    r: &Resolved,
    mut bundle: ResultBundle,
) -> Result<ResultBundle, CliError> {
    let rob = cfg.robustness()?;
    let e = r
        .endpoints
        .ok_or_else(|| CliError::Config("robustness needs endpoints".into()))?;
    let mut tcfg = cfg.trajectory_config(r)?;
    tcfg.half_width = rob.half_width;
    // The perturbation study is noiseless by construction.
    tcfg.detector = None;
    let source = match rob.source {
        CurveSource::Analytic => PerturbationSource::Analytic {
            k: r.params.k(),
            x: tcfg.scan_positions(&e)?,
        },
        CurveSource::Simulated => PerturbationSource::Simulated(tcfg.clone()),
    };
    let (m, m_eps) = perturbed_mpp(&e, &r.potential, rob.z, rob.epsilon, &source)?;
    let dx = r.grid.dx();
    let lengths: Vec<f64> = (1..rob.half_width).map(|i| 2.0 * i as f64 * dx).collect();

    let mut sweep = Table::new(
        "fidelity",
        &[
            ("length", "mm"),
            ("fidelity", "1"),
            ("x_cl", "mm"),
            ("x_cl_eps", "mm"),
            ("x_cl_shift", "mm"),
        ],
    );
    for f in fidelity_sweep(&m, &m_eps, &lengths) {
        sweep.push_floats(&[f.length, f.fidelity, f.x_cl, f.x_cl_eps, f.x_cl_shift]);
    }
    let dev = deviation(&m, &m_eps);
    let mut curves = Table::new(
        "deviation",
        &[
            ("x", "mm"),
            ("re_m", "1"),
            ("im_m", "1"),
            ("re_m_eps", "1"),
            ("im_m_eps", "1"),
            ("deviation", "1"),
        ],
    );
    for (i, d) in dev.iter().enumerate() {
        curves.push_floats(&[
            m.x[i],
            m.m[i].re,
            m.m[i].im,
            m_eps.m[i].re,
            m_eps.m[i].im,
            *d,
        ]);
    }
    bundle.tables.push(sweep);
    bundle.tables.push(curves);

    bundle
        .summary
        .insert("potential".into(), r.potential.name().into());
    bundle.summary.insert("z".into(), rob.z.into());
    bundle.summary.insert("epsilon".into(), rob.epsilon.into());
    bundle.summary.insert("target".into(), rob.target.into());
    bundle.summary.insert(
        "source".into(),
        match rob.source {
            CurveSource::Analytic => "analytic",
            CurveSource::Simulated => "simulated",
        }
        .into(),
    );
    match calibrate_length(&m, &m_eps, rob.target, &lengths) {
        Some(cal) => {
            let rep = cal.report;
            let mut t = toml::Table::new();
            t.insert("length".into(), rep.length.into());
            t.insert("fidelity".into(), rep.fidelity.into());
            t.insert("x_cl".into(), rep.x_cl.into());
            t.insert("x_cl_shift".into(), rep.x_cl_shift.into());
            t.insert(
                "shift_below_1e-3_length".into(),
                (rep.x_cl_shift < 1e-3 * rep.length).into(),
            );
            t.insert(
                "bracket_lengths".into(),
                vec![cal.bracket.0.length, cal.bracket.1.length].into(),
            );
            t.insert(
                "bracket_fidelities".into(),
                vec![cal.bracket.0.fidelity, cal.bracket.1.fidelity].into(),
            );
            bundle.summary.insert("bracketed".into(), true.into());
            bundle.summary.insert("calibration".into(), t.into());
        }
        None => {
            log::warn!(
                "F(L) never crosses {} within the scanned lengths",
                rob.target
            );
            bundle.summary.insert("bracketed".into(), false.into());
        }
    }
    Ok(bundle)
}
