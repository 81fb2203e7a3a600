//! Run configuration: a flat TOML file whose keys mirror the sweep
//! parameters, plus output and unit settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::{RegimeThresholds, SeedScheme, SweepSpec, TimeGrid};
use crate::error::{Error, Result};
use crate::hamiltonian::{Surmise, HBAR_MEV_PS};
use crate::observables::{SpacingOptions, Unfolding};
use crate::thermal::{PanelPolicy, DEFAULT_PANEL_CEILING};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "CHAOTIC_TC_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Energies are either dimensionless (times in inverse energy units) or in
/// meV with times reported in ps through ħ = 0.6582119 meV·ps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitMode {
    #[default]
    Dimensionless,
    #[serde(rename = "mev_ps", alias = "meV_ps")]
    MevPs,
}

impl UnitMode {
    /// Factor converting internal times (ħ = 1) to reported times.
    pub fn time_factor(self) -> f64 {
        match self {
            UnitMode::Dimensionless => 1.0,
            UnitMode::MevPs => HBAR_MEV_PS,
        }
    }

    pub fn time_unit(self) -> &'static str {
        match self {
            UnitMode::Dimensionless => "hbar/energy",
            UnitMode::MevPs => "ps",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnfoldingKind {
    #[default]
    Polynomial,
    Mean,
}

/// Every key is optional in the file; missing keys take the documented defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sites: usize,
    pub sigma: f64,
    pub omega0: f64,
    pub g_over_sigma: Vec<f64>,
    pub realizations: usize,
    pub subsystem_size: usize,
    /// Number of sampled subsystems; 0 selects the exhaustive panel.
    pub panel_count: usize,
    /// 0 derives the panel stream from `master_seed`.
    pub panel_seed: u64,
    /// Defaults to `200 / sigma`.
    pub t_max: Option<f64>,
    pub steps: usize,
    pub master_seed: u64,
    pub seed_scheme: SeedScheme,
    pub tail_fraction: f64,
    pub smoothing_window: usize,
    pub workers: usize,
    pub output_dir: Option<PathBuf>,
    pub output_format: OutputFormat,
    pub unit_mode: UnitMode,
    pub log_level: String,
    pub unfolding: UnfoldingKind,
    pub unfolding_order: usize,
    pub unfolding_trim: f64,
    pub bins: usize,
    pub s_max: f64,
    pub surmise: Surmise,
    /// Replace spectra with an equally spaced ladder (histogram self-check).
    pub picket_fence: bool,
    pub ergodic_tail_ipr: f64,
    pub ergodic_trace_distance: f64,
    pub nonergodic_max_ipr: f64,
    pub nonergodic_trace_distance: f64,
    pub tau_jump: f64,
    /// Directory for cached N=2 decompositions.
    pub cache_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let spec = SweepSpec::new(40, vec![0.1, 0.3, 0.5, 1.0, 2.0, 5.0, 10.0]);
        let thresholds = RegimeThresholds::default();
        let spacing = SpacingOptions::default();
        let (order, trim) = match spacing.unfolding {
            Unfolding::Polynomial { order, trim } => (order, trim),
            Unfolding::Mean => (6, 0.1),
        };
        Self {
            sites: spec.sites,
            sigma: spec.sigma,
            omega0: spec.omega0,
            g_over_sigma: spec.g_over_sigma,
            realizations: spec.realizations,
            subsystem_size: spec.subsystem_size,
            panel_count: 20,
            panel_seed: 0,
            t_max: None,
            steps: spec.time_grid.steps,
            master_seed: spec.master_seed,
            seed_scheme: spec.seed_scheme,
            tail_fraction: spec.tail_fraction,
            smoothing_window: spec.smoothing_window,
            workers: 1,
            output_dir: None,
            output_format: OutputFormat::Csv,
            unit_mode: UnitMode::Dimensionless,
            log_level: "info".into(),
            unfolding: UnfoldingKind::Polynomial,
            unfolding_order: order,
            unfolding_trim: trim,
            bins: spacing.bins,
            s_max: spacing.s_max,
            surmise: spacing.surmise,
            picket_fence: false,
            ergodic_tail_ipr: thresholds.ergodic_tail_ipr,
            ergodic_trace_distance: thresholds.ergodic_trace_distance,
            nonergodic_max_ipr: thresholds.nonergodic_max_ipr,
            nonergodic_trace_distance: thresholds.nonergodic_trace_distance,
            tau_jump: thresholds.tau_jump,
            cache_dir: None,
        }
    }
}

impl RunConfig {
    /// Parse TOML text. Syntax and type errors carry the toml crate's line
    /// and column; semantic errors name the offending key and its line.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate().map_err(|e| match e {
            Error::Config(msg) => Error::Config(locate(text, &msg)),
            other => other,
        })?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks every key; errors are `Config` messages starting with the key name.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::Config(format!("{key}: {msg}")));
        if self.g_over_sigma.is_empty() {
            return bad("g_over_sigma", "list is empty".into());
        }
        if let Some(g) = self.g_over_sigma.iter().find(|g| !g.is_finite() || **g < 0.0) {
            return bad("g_over_sigma", format!("{g} is not a finite non-negative ratio"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma", format!("{} must be positive", self.sigma));
        }
        if !self.omega0.is_finite() {
            return bad("omega0", "must be finite".into());
        }
        if self.realizations == 0 {
            return bad("realizations", "must be at least 1".into());
        }
        if self.steps < 2 {
            return bad("steps", format!("{} must be at least 2", self.steps));
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return bad("t_max", format!("{t} must be positive"));
            }
        }
        if self.workers == 0 {
            return bad("workers", "must be at least 1".into());
        }
        if self.bins == 0 {
            return bad("bins", "must be at least 1".into());
        }
        if !(self.unfolding_trim >= 0.0 && self.unfolding_trim < 0.5) {
            return bad("unfolding_trim", format!("{} must lie in [0, 0.5)", self.unfolding_trim));
        }
        if !["error", "warn", "info", "debug", "trace", "off"].contains(&self.log_level.as_str()) {
            return bad("log_level", format!("unknown level {:?}", self.log_level));
        }
        if self.sites == 0 || self.sites > crate::basis::MAX_SITES {
            return bad("sites", format!("{} must be between 1 and {}", self.sites, crate::basis::MAX_SITES));
        }
        if self.subsystem_size == 0 || 2 * self.subsystem_size > self.sites {
            return bad("subsystem_size", format!("{} must be between 1 and sites/2", self.subsystem_size));
        }
        self.sweep_spec()
            .validate()
            .map_err(|e| Error::Config(format!("sweep: {e}")))
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        let panel = if self.panel_count == 0 {
            PanelPolicy::Exhaustive { max_sets: DEFAULT_PANEL_CEILING }
        } else {
            PanelPolicy::Sampled { count: self.panel_count, seed: self.panel_seed }
        };
        SweepSpec {
            sites: self.sites,
            sigma: self.sigma,
            omega0: self.omega0,
            g_over_sigma: self.g_over_sigma.clone(),
            realizations: self.realizations,
            subsystem_size: self.subsystem_size,
            panel,
            time_grid: TimeGrid { t_max: self.t_max.unwrap_or(200.0 / self.sigma), steps: self.steps },
            master_seed: self.master_seed,
            seed_scheme: self.seed_scheme,
            tail_fraction: self.tail_fraction,
            smoothing_window: self.smoothing_window,
        }
    }

    pub fn spacing_options(&self) -> SpacingOptions {
        let unfolding = match self.unfolding {
            UnfoldingKind::Mean => Unfolding::Mean,
            UnfoldingKind::Polynomial => {
                Unfolding::Polynomial { order: self.unfolding_order, trim: self.unfolding_trim }
            }
        };
        SpacingOptions { unfolding, bins: self.bins, s_max: self.s_max, surmise: self.surmise }
    }

    pub fn thresholds(&self) -> RegimeThresholds {
        RegimeThresholds {
            ergodic_tail_ipr: self.ergodic_tail_ipr,
            ergodic_trace_distance: self.ergodic_trace_distance,
            nonergodic_max_ipr: self.nonergodic_max_ipr,
            nonergodic_trace_distance: self.nonergodic_trace_distance,
            tau_jump: self.tau_jump,
        }
    }

    /// Explicit `output_dir`, else the environment variable, else `./output`.
    pub fn resolved_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("output"))
    }
}

/// Prefix a `key: ...` message with the line the key appears on.
fn locate(text: &str, msg: &str) -> String {
    let key = msg.split(':').next().unwrap_or("").trim();
    let line = text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    });
    match line {
        Some(n) => format!("line {}: {msg}", n + 1),
        None => msg.to_string(),
    }
}
