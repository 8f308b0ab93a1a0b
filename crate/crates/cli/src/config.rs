//! Run configuration: a TOML document with one section per subsystem.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use plasim_core::grid::{DEFAULT_DX, DEFAULT_N};
use plasim_core::noise::{DetectorModel, CAMERA_QE, CAMERA_READOUT_NOISE};
use plasim_core::params::{GRIN_CYCLE_MM, WAIST_MM, WAVELENGTH_795NM};
use plasim_core::photonstats::{SourceConfig, SourceKind, DEFAULT_JITTER_NS, DEFAULT_WINDOW_NS};
use plasim_core::pla::{DEFAULT_MASK_FLOOR, DEFAULT_SCAN_HALF_WIDTH, DEFAULT_SMOOTHING_WINDOW};
use plasim_core::{check_paraxial, Endpoints, PhysicalParams, Potential, SpatialGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    PropagatorScan,
    Trajectory,
    Robustness,
    G2,
    Wavefunction,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::PropagatorScan => "propagator-scan",
            Experiment::Trajectory => "trajectory",
            Experiment::Robustness => "robustness",
            Experiment::G2 => "g2",
            Experiment::Wavefunction => "wavefunction",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub physics: PhysicsSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoints: Option<EndpointsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector: Option<DetectorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robustness: Option<RobustnessSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g2: Option<G2Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavefunction: Option<WavefunctionSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    Free,
    Harmonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    /// Wavelength (mm).
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
    /// Gaussian waist `a_x` (mm).
    #[serde(default = "default_waist")]
    pub waist: f64,
    #[serde(default = "default_potential")]
    pub potential: PotentialKind,
    /// Harmonic frequency (rad/mm); derived from `grin_cycle` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// GRIN cycle length (mm).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grin_cycle: Option<f64>,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self {
            wavelength: default_wavelength(),
            waist: default_waist(),
            potential: default_potential(),
            omega: None,
            grin_cycle: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// Uses `dx` as given.
    Fixed,
    /// Per-distance spacing `dx = sqrt(λ z / n)` (propagator scans only).
    FresnelCritical,
    /// `dx = sqrt(λ / (n ω))` (harmonic potential only).
    OscillatorMatched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_n")]
    pub n: usize,
    /// Grid spacing (mm).
    #[serde(default = "default_dx")]
    pub dx: f64,
    /// Grid centre (mm).
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "default_sampling")]
    pub sampling: Sampling,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n: default_n(),
            dx: default_dx(),
            x0: 0.0,
            sampling: default_sampling(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointsSection {
    pub x_a: f64,
    #[serde(default)]
    pub z_a: f64,
    pub x_b: f64,
    pub z_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    /// Intermediate times (trajectory) or propagation distances (propagator scan), mm.
    pub z: Vec<f64>,
    /// Slit position for propagator scans (mm).
    #[serde(default)]
    pub slit_x: f64,
    /// Propagator scans cover samples where `|ψ| >` this fraction of its peak.
    #[serde(default = "default_region_threshold")]
    pub region_threshold: f64,
    #[serde(default = "default_half_width")]
    pub half_width: usize,
    #[serde(default = "default_smoothing_window")]
    pub smoothing_window: usize,
    #[serde(default)]
    pub refine: bool,
    #[serde(default = "default_mask_floor")]
    pub mask_floor: f64,
    /// Probe-branch step count; default policy when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Times whose `M''` curves are written; all successful times when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    #[serde(default = "default_qe")]
    pub quantum_efficiency: f64,
    /// Readout noise (electrons rms).
    #[serde(default = "default_readout_noise")]
    pub readout_noise: f64,
    pub photons_per_scan: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveSource {
    Analytic,
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessSection {
    /// Intermediate time (mm).
    pub z: f64,
    /// Time perturbation of the left factor (mm).
    pub epsilon: f64,
    #[serde(default = "default_target_fidelity")]
    pub target: f64,
    /// Samples either side of the endpoints' midpoint; bounds the largest L.
    #[serde(default = "default_robustness_half_width")]
    pub half_width: usize,
    #[serde(default = "default_curve_source")]
    pub source: CurveSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceSection {
    Heralded,
    Coherent,
    Thermal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G2Section {
    pub source: SourceSection,
    /// Herald (or pulse) rate (Hz).
    pub rate: f64,
    /// Acquisition time per trial (s).
    pub duration: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Full coincidence window (ns).
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_one")]
    pub herald_efficiency: f64,
    #[serde(default = "default_one")]
    pub mean_photons: f64,
    /// Uncorrelated background per detector (Hz).
    #[serde(default)]
    pub background_rate: f64,
    /// Timing jitter (ns, rms).
    #[serde(default = "default_jitter")]
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavefunctionSection {
    /// Packet centre (mm).
    #[serde(default)]
    pub center: f64,
    /// Slope of the V-shaped phase (rad/mm); zero for a flat phase.
    #[serde(default)]
    pub v_slope: f64,
    /// Vertex of the V-shaped phase (mm).
    #[serde(default)]
    pub v_vertex: f64,
}

fn default_wavelength() -> f64 {
    WAVELENGTH_795NM
}
fn default_waist() -> f64 {
    WAIST_MM
}
fn default_potential() -> PotentialKind {
    PotentialKind::Free
}
fn default_n() -> usize {
    DEFAULT_N
}
fn default_dx() -> f64 {
    DEFAULT_DX
}
fn default_sampling() -> Sampling {
    Sampling::Fixed
}
fn default_region_threshold() -> f64 {
    0.01
}
fn default_half_width() -> usize {
    DEFAULT_SCAN_HALF_WIDTH
}
fn default_smoothing_window() -> usize {
    DEFAULT_SMOOTHING_WINDOW
}
fn default_mask_floor() -> f64 {
    DEFAULT_MASK_FLOOR
}
fn default_qe() -> f64 {
    CAMERA_QE
}
fn default_readout_noise() -> f64 {
    CAMERA_READOUT_NOISE
}
fn default_target_fidelity() -> f64 {
    0.6853
}
fn default_robustness_half_width() -> usize {
    200
}
fn default_curve_source() -> CurveSource {
    CurveSource::Analytic
}
fn default_trials() -> usize {
    12
}
fn default_window() -> f64 {
    DEFAULT_WINDOW_NS
}
fn default_one() -> f64 {
    1.0
}
fn default_jitter() -> f64 {
    DEFAULT_JITTER_NS
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    /// SHA-256 of the canonical serialization, so formatting and comments
    /// in the source file do not change it.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Checks every precondition the requested experiment depends on.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let p = &self.physics;
        let omega = match p.potential {
            PotentialKind::Free => {
                if p.omega.is_some() || p.grin_cycle.is_some() {
                    return Err(config(
                        "physics: omega/grin_cycle require potential = \"harmonic\"",
                    ));
                }
                0.0
            }
            PotentialKind::Harmonic => match (p.omega, p.grin_cycle) {
                (Some(_), Some(_)) => {
                    return Err(config("physics: give either omega or grin_cycle, not both"))
                }
                (Some(w), None) => w,
                (None, cycle) => 2.0 * PI / cycle.unwrap_or(GRIN_CYCLE_MM),
            },
        };
        if p.potential == PotentialKind::Harmonic && !(omega > 0.0 && omega.is_finite()) {
            return Err(config(format!("physics: omega must be > 0, got {omega}")));
        }
        let params = PhysicalParams::new(p.wavelength, p.waist, omega).map_err(core_config)?;
        let paraxial = check_paraxial(&params, plasim_core::params::DEFAULT_PARAXIAL_THRESHOLD);
        if !paraxial.passes {
            log::warn!(
                "k·a_x = {:.1} is below {}; the paraxial model may be inaccurate",
                paraxial.ratio,
                paraxial.threshold
            );
        }
        let potential = match p.potential {
            PotentialKind::Free => Potential::Free,
            PotentialKind::Harmonic => Potential::Harmonic { omega },
        };

        let g = &self.grid;
        let grid = match g.sampling {
            Sampling::Fixed => SpatialGrid::new(g.n, g.dx, g.x0),
            Sampling::FresnelCritical => {
                if self.experiment != Experiment::PropagatorScan {
                    return Err(config(
                        "grid: fresnel-critical sampling is only available for propagator-scan",
                    ));
                }
                // The spacing is set per distance; validate n and x0 here.
                SpatialGrid::new(g.n, g.dx, g.x0)
            }
            Sampling::OscillatorMatched => {
                if p.potential != PotentialKind::Harmonic {
                    return Err(config(
                        "grid: oscillator-matched sampling needs potential = \"harmonic\"",
                    ));
                }
                SpatialGrid::oscillator_matched(g.n, p.wavelength, omega, g.x0)
            }
        }
        .map_err(core_config)?;

        let detector = self
            .detector
            .as_ref()
            .map(|d| {
                DetectorModel::new(
                    d.quantum_efficiency,
                    d.readout_noise,
                    d.photons_per_scan,
                    self.seed,
                )
            })
            .transpose()
            .map_err(core_config)?;

        let endpoints = self
            .endpoints
            .as_ref()
            .map(|e| Endpoints::new(e.x_a, e.z_a, e.x_b, e.z_b))
            .transpose()
            .map_err(core_config)?;

        let resolved = Resolved {
            params,
            potential,
            grid,
            detector,
            endpoints,
        };
        match self.experiment {
            Experiment::PropagatorScan => self.check_propagator_scan(&resolved)?,
            Experiment::Trajectory => self.check_trajectory(&resolved)?,
            Experiment::Robustness => self.check_robustness(&resolved)?,
            Experiment::G2 => {
                self.g2_source()?;
            }
            Experiment::Wavefunction => {
                let w = self.wavefunction.clone().unwrap_or_default();
                resolved.grid.nearest_index(w.center).map_err(core_config)?;
                if !(w.v_slope.is_finite() && w.v_vertex.is_finite()) {
                    return Err(config("wavefunction: v_slope and v_vertex must be finite"));
                }
            }
        }
        Ok(resolved)
    }

    pub fn scan(&self) -> Result<&ScanSection, CliError> {
        self.scan
            .as_ref()
            .ok_or_else(|| config(format!("{} needs a [scan] section", self.experiment)))
    }

    pub fn robustness(&self) -> Result<&RobustnessSection, CliError> {
        self.robustness
            .as_ref()
            .ok_or_else(|| config("robustness needs a [robustness] section"))
    }

    fn check_propagator_scan(&self, r: &Resolved) -> Result<(), CliError> {
        let scan = self.scan()?;
        check_z_list(&scan.z, 0.0, f64::INFINITY)?;
        if !(scan.region_threshold > 0.0 && scan.region_threshold < 1.0) {
            return Err(config(format!(
                "scan: region_threshold must lie in (0, 1), got {}",
                scan.region_threshold
            )));
        }
        if self.grid.sampling != Sampling::FresnelCritical {
            r.grid.nearest_index(scan.slit_x).map_err(core_config)?;
        }
        if let Potential::Harmonic { omega } = r.potential {
            for &z in &scan.z {
                if (omega * z).sin().abs() < plasim_core::propagators::FOCAL_TOLERANCE {
                    return Err(config(format!(
                        "scan: z = {z} mm is a focal point of the harmonic potential"
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_trajectory(&self, r: &Resolved) -> Result<(), CliError> {
        let scan = self.scan()?;
        let e = r
            .endpoints
            .ok_or_else(|| config("trajectory needs an [endpoints] section"))?;
        check_z_list(&scan.z, e.z_a, e.z_b)?;
        if let Some(curves) = &scan.curves {
            if let Some(z) = curves.iter().find(|z| !scan.z.contains(z)) {
                return Err(config(format!("scan: curve time {z} is not in the z list")));
            }
        }
        self.trajectory_config(r)?
            .scan_positions(&e)
            .map_err(core_config)?;
        check_window(scan.smoothing_window, 2 * scan.half_width + 1)?;
        Ok(())
    }

    fn check_robustness(&self, r: &Resolved) -> Result<(), CliError> {
        let rob = self.robustness()?;
        let e = r
            .endpoints
            .ok_or_else(|| config("robustness needs an [endpoints] section"))?;
        check_z_list(&[rob.z], e.z_a, e.z_b)?;
        if !(rob.epsilon >= 0.0 && rob.z - rob.epsilon > e.z_a) {
            return Err(config(format!(
                "robustness: epsilon must be >= 0 with z - epsilon > z_a, got {}",
                rob.epsilon
            )));
        }
        if !(rob.target > 0.0 && rob.target < 1.0) {
            return Err(config(format!(
                "robustness: target must lie in (0, 1), got {}",
                rob.target
            )));
        }
        if rob.half_width < 2 {
            return Err(config("robustness: half_width must be at least 2"));
        }
        let mut cfg = self.trajectory_config(r)?;
        cfg.half_width = rob.half_width;
        cfg.scan_positions(&e).map_err(core_config)?;
        Ok(())
    }

    /// Trajectory settings shared by the trajectory and robustness runs.
    pub fn trajectory_config(
        &self,
        r: &Resolved,
    ) -> Result<plasim_core::pla::TrajectoryConfig, CliError> {
        let mut cfg = plasim_core::pla::TrajectoryConfig::new(r.grid, r.params.k(), r.params.waist);
        if let Some(scan) = &self.scan {
            cfg.half_width = scan.half_width;
            cfg.mask_floor = scan.mask_floor;
            cfg.find.window = scan.smoothing_window;
            cfg.find.refine = scan.refine;
            cfg.n_steps = scan.steps;
            if !(scan.mask_floor >= 0.0) {
                return Err(config(format!(
                    "scan: mask_floor must be >= 0, got {}",
                    scan.mask_floor
                )));
            }
            if scan.steps == Some(0) {
                return Err(config("scan: steps must be >= 1"));
            }
        }
        cfg.detector = r.detector;
        Ok(cfg)
    }

    pub fn g2_source(&self) -> Result<SourceConfig, CliError> {
        let g = self
            .g2
            .as_ref()
            .ok_or_else(|| config("g2 needs a [g2] section"))?;
        let kind = match g.source {
            SourceSection::Heralded => SourceKind::HeraldedSingle,
            SourceSection::Coherent => SourceKind::Coherent,
            SourceSection::Thermal => SourceKind::Thermal,
        };
        if g.trials == 0 {
            return Err(config("g2: trials must be >= 1"));
        }
        if !(g.window > 0.0 && g.window.is_finite()) {
            return Err(config(format!("g2: window must be > 0, got {}", g.window)));
        }
        let mut cfg = SourceConfig::new(kind, g.rate, g.duration, self.seed);
        cfg.herald_efficiency = g.herald_efficiency;
        cfg.mean_photons = g.mean_photons;
        cfg.background_rate = g.background_rate;
        cfg.jitter = g.jitter;
        if !(g.rate > 0.0 && g.duration > 0.0) {
            return Err(config("g2: rate and duration must be > 0"));
        }
        cfg.validate().map_err(core_config)?;
        Ok(cfg)
    }
}

impl Default for WavefunctionSection {
    fn default() -> Self {
        Self {
            center: 0.0,
            v_slope: 0.0,
            v_vertex: 0.0,
        }
    }
}

/// Validated physical setup shared by all experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub params: PhysicalParams,
    pub potential: Potential,
    pub grid: SpatialGrid,
    pub detector: Option<DetectorModel>,
    pub endpoints: Option<Endpoints>,
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn core_config(e: plasim_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn check_z_list(z: &[f64], lo: f64, hi: f64) -> Result<(), CliError> {
    if z.is_empty() {
        return Err(config("scan: z list is empty"));
    }
    if z.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(config("scan: z values must be strictly increasing"));
    }
    if let Some(v) = z.iter().find(|&&v| !(v > lo && v < hi)) {
        return Err(config(format!("z = {v} mm lies outside ({lo}, {hi})")));
    }
    Ok(())
}

fn check_window(window: usize, samples: usize) -> Result<(), CliError> {
    let max = (samples / 4).max(1);
    if window.is_multiple_of(2) || window > max {
        return Err(config(format!(
            "scan: smoothing_window must be odd and at most {max} for {samples} samples, got {window}"
        )));
    }
    Ok(())
}
