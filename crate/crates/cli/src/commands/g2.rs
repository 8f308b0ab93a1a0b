use plasim_core::photonstats::{
    expected_g2_heralded, expected_g2_thermal, g2_estimate, g2_from_counts, run_trials, SourceKind,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{num, ResultBundle, Table};

/// Repeated acquisitions, per-trial counts and the pooled `g²_c` estimate.
pub fn run(cfg: &RunConfig, mut bundle: ResultBundle) -> Result<ResultBundle, CliError> {
    let section = cfg
        .g2
        .as_ref()
        .ok_or_else(|| CliError::Config("g2 needs a [g2] section".into()))?;
    let source = cfg.g2_source()?;
    let counts = run_trials(&source, section.trials, section.window)?;
    let estimate = g2_estimate(&counts)?;

    let mut table = Table::new(
        "g2_trials",
        &[
            ("trial", "1"),
            ("n1", "1"),
            ("n12", "1"),
            ("n13", "1"),
            ("n123", "1"),
            ("g2", "1"),
        ],
    );
    for (i, c) in counts.iter().enumerate() {
        let g2 = g2_from_counts(c).map(num).unwrap_or_else(|_| "nan".into());
        table.push(vec![
            i.to_string(),
            c.n1.to_string(),
            c.n12.to_string(),
            c.n13.to_string(),
            c.n123.to_string(),
            g2,
        ]);
    }
    bundle.tables.push(table);

    let total = |f: fn(&plasim_core::photonstats::CoincidenceCounts) -> u64| {
        toml::Value::Integer(counts.iter().map(f).sum::<u64>() as i64)
    };
    bundle.summary.insert("g2".into(), estimate.g2.into());
    if let Some(s) = estimate.sigma {
        bundle.summary.insert("sigma".into(), s.into());
    }
    bundle
        .summary
        .insert("single_photon".into(), estimate.single_photon.into());
    bundle
        .summary
        .insert("trials".into(), (counts.len() as i64).into());
    bundle
        .summary
        .insert("window_ns".into(), section.window.into());
    bundle.summary.insert("n1".into(), total(|c| c.n1));
    bundle.summary.insert("n12".into(), total(|c| c.n12));
    bundle.summary.insert("n13".into(), total(|c| c.n13));
    bundle.summary.insert("n123".into(), total(|c| c.n123));
    let expected = match source.kind {
        SourceKind::Thermal => Some(expected_g2_thermal(
            source.herald_efficiency,
            source.mean_photons,
        )),
        SourceKind::HeraldedSingle => Some(expected_g2_heralded(
            source.herald_efficiency,
            source.background_rate,
            section.window,
        )),
        SourceKind::Coherent => Some(1.0),
    };
    if let Some(v) = expected {
        bundle.summary.insert("expected_g2".into(), v.into());
    }
    Ok(bundle)
}
