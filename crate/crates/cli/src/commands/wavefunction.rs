use plasim_core::field::v_phase;
use plasim_core::gaussian_packet;
use plasim_core::pla::align_global_phase;
use plasim_core::protocol::measure_wavefunction;

use crate::config::{Resolved, RunConfig};
use crate::error::CliError;
use crate::output::{ResultBundle, Table};

/// Direct measurement of a Gaussian mode with an optional V-shaped phase.
pub fn run(
    cfg: &RunConfig,
    r: &Resolved,
    mut bundle: ResultBundle,
) -> Result<ResultBundle, CliError> {
    let w = cfg.wavefunction.clone().unwrap_or_default();
    let mut psi = gaussian_packet(&r.grid, r.params.waist, w.center)?;
    if w.v_slope != 0.0 {
        psi = psi.with_phase(v_phase(w.v_slope, w.v_vertex));
    }
    let out = measure_wavefunction(&psi)?;
    let align = align_global_phase(out.psi.amps(), psi.amps())?;
    let peak = psi.max_abs();

    let mut table = Table::new(
        "wavefunction",
        &[
            ("x", "mm"),
            ("re_true", "mm^-1/2"),
            ("im_true", "mm^-1/2"),
            ("re_measured", "mm^-1/2"),
            ("im_measured", "mm^-1/2"),
            ("arg_true", "rad"),
            ("arg_measured", "rad"),
        ],
    );
    let mut worst = 0.0f64;
    for (j, (t, m)) in psi.amps().iter().zip(out.psi.amps()).enumerate() {
        let m = m * align.factor();
        worst = worst.max((m - t).norm() / peak);
        table.push_floats(&[r.grid.x(j), t.re, t.im, m.re, m.im, t.arg(), m.arg()]);
    }
    bundle.tables.push(table);
    bundle
        .summary
        .insert("max_error_over_peak".into(), worst.into());
    bundle.summary.insert("phi0_re".into(), out.phi0.re.into());
    bundle.summary.insert("phi0_im".into(), out.phi0.im.into());
    bundle
        .summary
        .insert("alignment_delta".into(), align.delta.into());
    bundle.summary.insert("v_slope".into(), w.v_slope.into());
    Ok(bundle)
}
