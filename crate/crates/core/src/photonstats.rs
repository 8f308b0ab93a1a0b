//! Time-tagged photon streams and the heralded second-order correlation `g²_c`.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{rng_for, trial_seed};

/// Default coincidence window (ns), symmetric about the herald.
pub const DEFAULT_WINDOW_NS: f64 = 12.0;

/// Default full width of the uniform timing jitter (ns).
pub const DEFAULT_JITTER_NS: f64 = 3.0;

/// Upper bound of `g²_c` for a source to count as a single-photon source.
pub const SINGLE_PHOTON_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Detector {
    /// Herald detector.
    D1,
    /// Transmitted port of the 50:50 splitter.
    D2,
    /// Reflected port of the 50:50 splitter.
    D3,
}

impl Detector {
    pub fn id(self) -> u8 {
        match self {
            Detector::D1 => 1,
            Detector::D2 => 2,
            Detector::D3 => 3,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(Detector::D1),
            2 => Some(Detector::D2),
            3 => Some(Detector::D3),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub detector: Detector,
    /// Ascending click times (ns).
    pub timestamps: Vec<f64>,
    /// Acquisition time (s).
    pub duration: f64,
}

impl EventStream {
    pub fn new(detector: Detector, mut timestamps: Vec<f64>, duration: f64) -> Result<Self> {
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(Error::param(
                "duration",
                format!("must be >= 0, got {duration}"),
            ));
        }
        let end = duration * 1e9;
        if let Some(bad) = timestamps.iter().find(|t| !(**t >= 0.0 && **t <= end)) {
            return Err(Error::param(
                "timestamps",
                format!("{bad} ns lies outside [0, {end}] ns"),
            ));
        }
        timestamps.sort_by(f64::total_cmp);
        Ok(Self {
            detector,
            timestamps,
            duration,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// The three streams of a heralded HBT measurement, ordered D1, D2, D3.
pub type StreamSet = [EventStream; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    /// One photon per herald, routed to D2 or D3 by a fair splitter.
    HeraldedSingle,
    /// Poissonian photon number per herald.
    Coherent,
    /// Exponentially distributed intensity per herald (doubly stochastic Poisson).
    Thermal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub kind: SourceKind,
    /// Herald rate (Hz).
    pub rate: f64,
    /// Acquisition time per trial (s).
    pub duration: f64,
    /// Probability that a photon reaching the splitter is detected.
    pub herald_efficiency: f64,
    /// Mean photon number per herald (coherent and thermal sources).
    pub mean_photons: f64,
    /// Uncorrelated background rate on each of D2 and D3 (Hz).
    pub background_rate: f64,
    /// Full width of the uniform timing jitter (ns).
    pub jitter: f64,
    pub seed: u64,
}

impl SourceConfig {
    pub fn new(kind: SourceKind, rate: f64, duration: f64, seed: u64) -> Self {
        Self {
            kind,
            rate,
            duration,
            herald_efficiency: 1.0,
            mean_photons: 1.0,
            background_rate: 0.0,
            jitter: DEFAULT_JITTER_NS,
            seed,
        }
    }

    /// Checks rates, efficiencies and jitter without simulating anything.
    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(
                    name,
                    format!("must be finite and >= 0, got {v}"),
                ))
            }
        };
        positive("rate", self.rate)?;
        positive("duration", self.duration)?;
        positive("mean_photons", self.mean_photons)?;
        positive("background_rate", self.background_rate)?;
        positive("jitter", self.jitter)?;
        if !(self.herald_efficiency >= 0.0 && self.herald_efficiency <= 1.0) {
            return Err(Error::param(
                "herald_efficiency",
                format!("must lie in [0, 1], got {}", self.herald_efficiency),
            ));
        }
        if self.rate * self.duration < 1e3 {
            log::warn!(
                "only {:.0} expected heralds; g2 statistics will be poor",
                self.rate * self.duration
            );
        }
        Ok(())
    }
}

fn poisson_times<R: Rng>(rng: &mut R, rate: f64, duration: f64) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    if rate <= 0.0 || duration <= 0.0 {
        return Ok(out);
    }
    let gap = Exp::new(rate).map_err(|e| Error::param("rate", e.to_string()))?;
    let mut t = gap.sample(rng);
    while t <= duration {
        out.push(t * 1e9);
        t += gap.sample(rng);
    }
    Ok(out)
}

fn clicks<R: Rng>(rng: &mut R, mean: f64) -> Result<bool> {
    if mean <= 0.0 {
        return Ok(false);
    }
    // A click detector fires when at least one photon arrives.
    let n: f64 = Poisson::new(mean)
        .map_err(|e| Error::param("mean_photons", e.to_string()))?
        .sample(rng);
    Ok(n >= 1.0)
}

/// Simulates herald, transmitted and reflected click streams.
pub fn simulate_source(cfg: &SourceConfig) -> Result<StreamSet> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, 0);
    let heralds = poisson_times(&mut rng, cfg.rate, cfg.duration)?;
    let end = cfg.duration * 1e9;
    let mut d2 = Vec::new();
    let mut d3 = Vec::new();
    let eta = cfg.herald_efficiency;
    let thermal = Exp::new(1.0).map_err(|e| Error::param("mean_photons", e.to_string()))?;
    for &t in &heralds {
        let (hit2, hit3) = match cfg.kind {
            SourceKind::HeraldedSingle => {
                if rng.random::<f64>() < eta {
                    let to_d2 = rng.random::<bool>();
                    (to_d2, !to_d2)
                } else {
                    (false, false)
                }
            }
            SourceKind::Coherent => {
                let m = 0.5 * eta * cfg.mean_photons;
                (clicks(&mut rng, m)?, clicks(&mut rng, m)?)
            }
            SourceKind::Thermal => {
                let intensity: f64 = cfg.mean_photons * thermal.sample(&mut rng);
                let m = 0.5 * eta * intensity;
                (clicks(&mut rng, m)?, clicks(&mut rng, m)?)
            }
        };
        for (hit, out) in [(hit2, &mut d2), (hit3, &mut d3)] {
            if hit {
                let jitter = if cfg.jitter > 0.0 {
                    cfg.jitter * (rng.random::<f64>() - 0.5)
                } else {
                    0.0
                };
                let ts = t + jitter;
                if (0.0..=end).contains(&ts) {
                    out.push(ts);
                }
            }
        }
    }
    d2.extend(poisson_times(&mut rng, cfg.background_rate, cfg.duration)?);
    d3.extend(poisson_times(&mut rng, cfg.background_rate, cfg.duration)?);
    Ok([
        EventStream::new(Detector::D1, heralds, cfg.duration)?,
        EventStream::new(Detector::D2, d2, cfg.duration)?,
        EventStream::new(Detector::D3, d3, cfg.duration)?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceCounts {
    pub n1: u64,
    pub n12: u64,
    pub n13: u64,
    pub n123: u64,
    /// Full window width (ns).
    pub window: f64,
}

/// Attributes every partner click to its nearest D1 click (the earlier one
/// on ties) and keeps the attribution when it lies within `±window/2`.
/// Returns, per herald, whether at least one partner was attributed to it.
///
/// Each herald is counted at most once, and since a click's nearest herald
/// does not depend on the window, enlarging the window only adds
/// coincidences.
fn attributed_heralds(heralds: &[f64], partners: &[f64], window: f64) -> Vec<bool> {
    let half = 0.5 * window;
    let mut hit = vec![false; heralds.len()];
    for &p in partners {
        let above = heralds.partition_point(|&h| h < p);
        let below = above
            .checked_sub(1)
            .map(|i| heralds.partition_point(|&h| h < heralds[i]));
        let nearest = match (below, heralds.get(above)) {
            (Some(b), Some(&h)) if h - p < p - heralds[b] => Some(above),
            (Some(b), _) => Some(b),
            (None, Some(_)) => Some(above),
            (None, None) => None,
        };
        if let Some(i) = nearest.filter(|&i| (heralds[i] - p).abs() <= half) {
            hit[i] = true;
        }
    }
    hit
}

/// Counts heralds, double and triple coincidences with a symmetric window.
pub fn count_coincidences(streams: &StreamSet, window: f64) -> Result<CoincidenceCounts> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::param("window", format!("must be > 0, got {window}")));
    }
    let [d1, d2, d3] = streams;
    let m2 = attributed_heralds(&d1.timestamps, &d2.timestamps, window);
    let m3 = attributed_heralds(&d1.timestamps, &d3.timestamps, window);
    let n12 = m2.iter().filter(|&&m| m).count() as u64;
    let n13 = m3.iter().filter(|&&m| m).count() as u64;
    let n123 = m2.iter().zip(&m3).filter(|(a, b)| **a && **b).count() as u64;
    Ok(CoincidenceCounts {
        n1: d1.len() as u64,
        n12,
        n13,
        n123,
        window,
    })
}

/// `g²_c = N1 N123 / (N12 N13)` for one acquisition.
pub fn g2_from_counts(c: &CoincidenceCounts) -> Result<f64> {
    if c.n12 == 0 || c.n13 == 0 {
        return Err(Error::UndefinedEstimate(format!(
            "no double coincidences (N12 = {}, N13 = {}, N1 = {}, window = {} ns)",
            c.n12, c.n13, c.n1, c.window
        )));
    }
    Ok(c.n1 as f64 * c.n123 as f64 / (c.n12 as f64 * c.n13 as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct G2Estimate {
    /// Mean over trials.
    pub g2: f64,
    /// Sample standard deviation over trials; `None` for a single trial.
    pub sigma: Option<f64>,
    pub per_trial: Vec<f64>,
    pub single_photon: bool,
}

/// Mean `g²_c` over repeated acquisitions with the trial-to-trial spread.
pub fn g2_estimate(trials: &[CoincidenceCounts]) -> Result<G2Estimate> {
    if trials.is_empty() {
        return Err(Error::UndefinedEstimate("no trials".into()));
    }
    let per_trial: Vec<f64> = trials.iter().map(g2_from_counts).collect::<Result<_>>()?;
    let n = per_trial.len() as f64;
    let g2 = per_trial.iter().sum::<f64>() / n;
    let sigma = (per_trial.len() > 1)
        .then(|| (per_trial.iter().map(|v| (v - g2).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    Ok(G2Estimate {
        g2,
        sigma,
        per_trial,
        single_photon: (0.0..=SINGLE_PHOTON_THRESHOLD).contains(&g2),
    })
}

/// Simulates and counts `n_trials` independent acquisitions in parallel.
pub fn run_trials(
    cfg: &SourceConfig,
    n_trials: usize,
    window: f64,
) -> Result<Vec<CoincidenceCounts>> {
    (0..n_trials as u64)
        .into_par_iter()
        .map(|i| {
            let trial = SourceConfig {
                seed: trial_seed(cfg.seed, i),
                ..*cfg
            };
            count_coincidences(&simulate_source(&trial)?, window)
        })
        .collect()
}

/// Expected `g²_c` of a thermal source seen through click detectors.
pub fn expected_g2_thermal(herald_efficiency: f64, mean_photons: f64) -> f64 {
    let x = 0.5 * herald_efficiency * mean_photons;
    2.0 * (1.0 + x) / (1.0 + 2.0 * x)
}

/// Expected `g²_c` of a heralded single-photon source with uncorrelated
/// background at `background_rate` (Hz) per detector and window `window` (ns).
pub fn expected_g2_heralded(herald_efficiency: f64, background_rate: f64, window: f64) -> f64 {
    let q = 1.0 - (-background_rate * window * 1e-9).exp();
    let eta = herald_efficiency;
    let single = 0.5 * eta + (1.0 - 0.5 * eta) * q;
    (eta * q + (1.0 - eta) * q * q) / (single * single)
}

/// Writes all events as `detector_id<TAB>timestamp_ns` lines in time order.
pub fn write_events<W: Write>(streams: &StreamSet, mut out: W) -> std::io::Result<()> {
    let mut events: Vec<(f64, u8)> = streams
        .iter()
        .flat_map(|s| s.timestamps.iter().map(move |&t| (t, s.detector.id())))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (t, id) in events {
        writeln!(out, "{id}\t{t}")?;
    }
    Ok(())
}

/// Reads `detector_id<TAB>timestamp_ns` lines; blank lines and `#` comments
/// are skipped. The duration is taken as the last timestamp.
pub fn read_events<R: BufRead>(input: R) -> Result<StreamSet> {
    let mut times: [Vec<f64>; 3] = Default::default();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parse_err = |reason: String| Error::Parse {
            line: line_no,
            reason,
        };
        let (id, ts) = trimmed
            .split_once('\t')
            .ok_or_else(|| parse_err("expected `detector_id<TAB>timestamp_ns`".into()))?;
        let id: u8 = id
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("bad detector id `{id}`")))?;
        let detector = Detector::from_id(id)
            .ok_or_else(|| parse_err(format!("detector id {id} is not 1, 2 or 3")))?;
        let t: f64 = ts
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("bad timestamp `{ts}`")))?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(parse_err(format!("timestamp {t} must be finite and >= 0")));
        }
        times[(detector.id() - 1) as usize].push(t);
    }
    let last = times.iter().flatten().cloned().fold(0.0, f64::max);
    let duration = last * 1e-9;
    let [t1, t2, t3] = times;
    Ok([
        EventStream::new(Detector::D1, t1, duration)?,
        EventStream::new(Detector::D2, t2, duration)?,
        EventStream::new(Detector::D3, t3, duration)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn streams(t1: Vec<f64>, t2: Vec<f64>, t3: Vec<f64>) -> StreamSet {
        let end = t1.iter().chain(&t2).chain(&t3).cloned().fold(0.0, f64::max) * 1e-9 + 1e-6;
        [
            EventStream::new(Detector::D1, t1, end).unwrap(),
            EventStream::new(Detector::D2, t2, end).unwrap(),
            EventStream::new(Detector::D3, t3, end).unwrap(),
        ]
    }

    /// Quadratic reference implementation of the same attribution rule.
    fn brute_force(s: &StreamSet, window: f64) -> CoincidenceCounts {
        let pair = |partners: &[f64]| -> Vec<bool> {
            let h = &s[0].timestamps;
            let mut hit = vec![false; h.len()];
            for &p in partners {
                let mut best: Option<usize> = None;
                for i in 0..h.len() {
                    if best.is_none_or(|b| (h[i] - p).abs() < (h[b] - p).abs()) {
                        best = Some(i);
                    }
                }
                if let Some(b) = best.filter(|&b| (h[b] - p).abs() <= 0.5 * window) {
                    hit[b] = true;
                }
            }
            hit
        };
        let a = pair(&s[1].timestamps);
        let b = pair(&s[2].timestamps);
        CoincidenceCounts {
            n1: s[0].len() as u64,
            n12: a.iter().filter(|&&v| v).count() as u64,
            n13: b.iter().filter(|&&v| v).count() as u64,
            n123: a.iter().zip(&b).filter(|(x, y)| **x && **y).count() as u64,
            window,
        }
    }

    #[test]
    fn empty_streams() {
        let c = count_coincidences(&streams(vec![], vec![], vec![]), 12.0).unwrap();
        assert_eq!((c.n1, c.n12, c.n13, c.n123), (0, 0, 0, 0));
    }

    #[test]
    fn single_triple() {
        let c = count_coincidences(&streams(vec![0.0], vec![0.0], vec![0.0]), 12.0).unwrap();
        assert_eq!((c.n1, c.n12, c.n13, c.n123), (1, 1, 1, 1));
    }

    #[test]
    fn each_herald_counted_once() {
        let c =
            count_coincidences(&streams(vec![10.0], vec![9.0, 11.0, 12.0], vec![]), 12.0).unwrap();
        assert_eq!(c.n12, 1);
        let c =
            count_coincidences(&streams(vec![10.0, 30.0], vec![11.0, 50.0], vec![]), 12.0).unwrap();
        assert_eq!(c.n12, 1);
    }

    #[test]
    fn partners_go_to_nearest_herald() {
        // Two heralds closer than the window, one photon to each arm.
        let c =
            count_coincidences(&streams(vec![10.0, 14.0], vec![10.5], vec![14.2]), 12.0).unwrap();
        assert_eq!((c.n12, c.n13, c.n123), (1, 1, 0));
        // Equidistant click goes to the earlier herald.
        let c =
            count_coincidences(&streams(vec![10.0, 14.0], vec![12.0], vec![11.0]), 12.0).unwrap();
        assert_eq!(c.n123, 1);
        let s = streams(
            vec![5.0, 5.0, 9.0, 9.0],
            vec![7.0, 9.0, 4.0],
            vec![6.0, 8.0],
        );
        assert_eq!(count_coincidences(&s, 12.0).unwrap(), brute_force(&s, 12.0));
    }

    #[test]
    fn rejects_bad_window() {
        assert!(count_coincidences(&streams(vec![], vec![], vec![]), 0.0).is_err());
    }

    #[test]
    fn matches_brute_force_on_random_streams() {
        let mut cfg = SourceConfig::new(SourceKind::Coherent, 1e4, 0.1, 11);
        cfg.mean_photons = 1.5;
        cfg.background_rate = 2e6;
        cfg.jitter = 20.0;
        let s = simulate_source(&cfg).unwrap();
        assert!(s[0].len() > 500);
        for w in [1.0, 5.0, 12.0, 40.0, 300.0] {
            assert_eq!(count_coincidences(&s, w).unwrap(), brute_force(&s, w));
        }
    }

    #[test]
    fn ideal_heralded_has_no_triples() {
        // Long enough for several herald pairs closer than the window.
        let mut cfg = SourceConfig::new(SourceKind::HeraldedSingle, 1e4, 5.0, 5);
        cfg.jitter = 0.0;
        let c = count_coincidences(&simulate_source(&cfg).unwrap(), DEFAULT_WINDOW_NS).unwrap();
        assert_eq!(c.n123, 0);
        assert!(c.n12 > 0 && c.n13 > 0);
        assert_eq!(g2_from_counts(&c).unwrap(), 0.0);
    }

    #[test]
    fn undefined_without_doubles() {
        let c = CoincidenceCounts {
            n1: 10,
            n12: 0,
            n13: 3,
            n123: 0,
            window: 12.0,
        };
        assert!(matches!(
            g2_from_counts(&c),
            Err(Error::UndefinedEstimate(_))
        ));
    }

    #[test]
    fn thermal_bunching() {
        let mut cfg = SourceConfig::new(SourceKind::Thermal, 1e4, 5.0, 21);
        cfg.mean_photons = 0.2;
        let est = g2_estimate(&run_trials(&cfg, 12, DEFAULT_WINDOW_NS).unwrap()).unwrap();
        let truth = expected_g2_thermal(1.0, 0.2);
        let sigma = est.sigma.unwrap();
        assert!(
            (est.g2 - truth).abs() < 3.0 * sigma,
            "{} vs {truth} ± {sigma}",
            est.g2
        );
        assert!(truth > 1.8);
        assert!(!est.single_photon);
    }

    #[test]
    fn heralded_with_background_matches_configured_truth() {
        let mut cfg = SourceConfig::new(SourceKind::HeraldedSingle, 1e4, 5.0, 8);
        cfg.herald_efficiency = 0.2;
        cfg.background_rate = 3.9e5;
        let est = g2_estimate(&run_trials(&cfg, 12, DEFAULT_WINDOW_NS).unwrap()).unwrap();
        let truth = expected_g2_heralded(0.2, 3.9e5, DEFAULT_WINDOW_NS);
        assert!((truth - 0.094).abs() < 0.01, "{truth}");
        assert!(
            (est.g2 - truth).abs() < 2.0 * est.sigma.unwrap(),
            "{} vs {truth}",
            est.g2
        );
        assert!(est.single_photon);
    }

    #[test]
    fn coherent_estimate_converges() {
        // The trial spread shrinks roughly as duration^{-1/2}.
        let mut spreads = Vec::new();
        for duration in [0.05, 0.5, 5.0] {
            let mut cfg = SourceConfig::new(SourceKind::Coherent, 1e4, duration, 77);
            cfg.mean_photons = 0.5;
            let est = g2_estimate(&run_trials(&cfg, 12, DEFAULT_WINDOW_NS).unwrap()).unwrap();
            assert!((est.g2 - 1.0).abs() < 3.0 * est.sigma.unwrap());
            spreads.push(est.sigma.unwrap());
        }
        let slope = (spreads[2] / spreads[0]).log10() / 2.0;
        assert!((slope + 0.5).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = SourceConfig::new(SourceKind::Coherent, 1e4, 0.05, 3);
        cfg.background_rate = 1e4;
        let s = simulate_source(&cfg).unwrap();
        let mut buf = Vec::new();
        write_events(&s, &mut buf).unwrap();
        let back = read_events(buf.as_slice()).unwrap();
        for (a, b) in s.iter().zip(&back) {
            assert_eq!(a.timestamps, b.timestamps);
            assert_eq!(a.detector, b.detector);
        }
    }

    #[test]
    fn text_parse_errors() {
        assert!(matches!(
            read_events("1\t5\n4\t3\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            read_events("1 5\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            read_events("2\tabc\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        let s = read_events("# header\n\n1\t5\n2\t6.5\n".as_bytes()).unwrap();
        assert_eq!(s[0].timestamps, vec![5.0]);
        assert_eq!(s[1].timestamps, vec![6.5]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn counts_monotone_and_consistent(
            t1 in prop::collection::vec(0.0f64..2000.0, 0..40),
            t2 in prop::collection::vec(0.0f64..2000.0, 0..40),
            t3 in prop::collection::vec(0.0f64..2000.0, 0..40),
            w in 0.5f64..80.0,
            extra in 0.0f64..80.0,
        ) {
            let s = streams(t1, t2, t3);
            let a = count_coincidences(&s, w).unwrap();
            let b = count_coincidences(&s, w + extra).unwrap();
            prop_assert_eq!(a, brute_force(&s, w));
            prop_assert!(a.n123 <= a.n12.min(a.n13));
            prop_assert!(a.n12 <= a.n1 && a.n13 <= a.n1);
            prop_assert!(b.n12 >= a.n12 && b.n13 >= a.n13 && b.n123 >= a.n123);
        }
    }
}
