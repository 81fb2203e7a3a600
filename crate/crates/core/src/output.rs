//! Command drivers and deterministic table output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{OutputFormat, RunConfig};
use crate::ensemble::{
    mean_std, regime_classifier, run_spectrum_sweep, run_sweep_with, SpectrumSweep, SweepOptions, SweepResult,
};
use crate::error::{Error, Result};
use crate::observables::{level_spacings, SpacingOptions, Unfolding};
use crate::signal::{autocorrelate, TimeSeries};
use crate::spectral::DecompositionCache;

/// One table cell. `Missing` is written as an empty cell; every table that
/// can contain one also has a `status` column.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Missing,
}

impl Cell {
    fn num(x: f64) -> Self {
        if x.is_finite() {
            Cell::Num(x)
        } else {
            Cell::Missing
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// CSV with a leading `# manifest` comment line, then the header.
    pub fn to_csv(&self, run_id: &str) -> String {
        let mut out = format!("# manifest: manifest.json run {run_id}\n{}\n", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(x) => format!("{x:.16e}"),
                    Cell::Int(i) => i.to_string(),
                    Cell::Text(s) => s.clone(),
                    Cell::Missing => String::new(),
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    /// JSON object with the manifest reference and one object per row.
    pub fn to_json(&self, run_id: &str) -> Result<String> {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let map = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(k, c)| {
                        let v = match c {
                            // Strings keep all 17 digits independent of the JSON float printer.
                            Cell::Num(x) => json!(format!("{x:.16e}")),
                            Cell::Int(i) => json!(i),
                            Cell::Text(s) => json!(s),
                            Cell::Missing => serde_json::Value::Null,
                        };
                        (k.clone(), v)
                    })
                    .collect::<serde_json::Map<_, _>>();
                serde_json::Value::Object(map)
            })
            .collect();
        Ok(serde_json::to_string_pretty(&json!({ "manifest": "manifest.json", "run": run_id, "rows": rows }))?)
    }

    pub fn file_name(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => format!("{}.csv", self.name),
            OutputFormat::Json => format!("{}.json", self.name),
        }
    }
}

/// Outcome of a command: files written and whether any point failed.
#[derive(Clone, Debug, Serialize)]
pub struct CommandReport {
    pub command: String,
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    /// True when some realization failed; outputs are still written.
    pub incomplete: bool,
    pub failures: Vec<String>,
}

/// Short identifier of a configuration: leading hex of SHA-256 over its TOML.
/// Hash of the physics-relevant configuration; worker count, output
/// location, logging and cache settings do not change results.
pub fn run_id(config: &RunConfig) -> Result<String> {
    let mut canonical = config.clone();
    canonical.workers = 1;
    canonical.output_dir = None;
    canonical.cache_dir = None;
    canonical.log_level = RunConfig::default().log_level;
    let text = canonical.to_toml()?;
    Ok(hex::encode(Sha256::digest(text.as_bytes()))[..16].to_string())
}

struct Writer<'a> {
    config: &'a RunConfig,
    dir: PathBuf,
    run_id: String,
    files: Vec<String>,
}

impl<'a> Writer<'a> {
    fn new(config: &'a RunConfig) -> Result<Self> {
        let dir = config.resolved_output_dir();
        fs::create_dir_all(&dir)
            .map_err(|e| Error::Config(format!("output_dir {}: {e}", dir.display())))?;
        Ok(Self { config, dir, run_id: run_id(config)?, files: vec![] })
    }

    fn table(&mut self, table: &Table) -> Result<()> {
        let name = table.file_name(self.config.output_format);
        let body = match self.config.output_format {
            OutputFormat::Csv => table.to_csv(&self.run_id),
            OutputFormat::Json => table.to_json(&self.run_id)?,
        };
        fs::write(self.dir.join(&name), body)?;
        self.files.push(name);
        Ok(())
    }

    fn manifest(self, command: &str, extra: serde_json::Value, wall: f64, failures: Vec<String>) -> Result<CommandReport> {
        let manifest = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "run": self.run_id,
            "config": self.config,
            "time_unit": self.config.unit_mode.time_unit(),
            "files": self.files,
            "wall_seconds": wall,
            "failures": failures,
            "details": extra,
        });
        fs::write(self.dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(CommandReport {
            command: command.into(),
            output_dir: self.dir,
            files: self.files,
            incomplete: !failures.is_empty(),
            failures,
        })
    }
}

fn status(ok: bool) -> Cell {
    Cell::Text(if ok { "ok" } else { "failed" }.into())
}

/// Spacing histograms, KS distances and normalized energies per realization.
pub fn cmd_spectrum(config: &RunConfig) -> Result<CommandReport> {
    config.validate()?;
    let start = Instant::now();
    let mut writer = Writer::new(config)?;
    let mut hist = Table::new("spacing_histogram", &["g_over_sigma", "realization", "s_bin_center", "density"]);
    let mut energy = Table::new(
        "normalized_energy",
        &["g_over_sigma", "realization", "seed", "normalized_energy", "ks_distance", "status"],
    );
    let mut failures = vec![];

    if config.picket_fence {
        let d = crate::basis::sector_dimension(config.sites, crate::basis::Sector::UpToTwo);
        let ladder: Vec<f64> = (0..d).map(|k| k as f64).collect();
        let options = SpacingOptions { unfolding: Unfolding::Mean, ..config.spacing_options() };
        let h = level_spacings(&ladder, &options)?;
        for (c, p) in h.bin_centers().zip(&h.densities) {
            hist.push(vec![Cell::Num(0.0), Cell::Int(0), Cell::Num(c), Cell::Num(*p)]);
        }
        energy.push(vec![
            Cell::Num(0.0),
            Cell::Int(0),
            Cell::Int(0),
            Cell::Missing,
            Cell::Num(h.ks_distance),
            Cell::Text("picket_fence".into()),
        ]);
        writer.table(&hist)?;
        writer.table(&energy)?;
        return writer.manifest("spectrum", json!({ "picket_fence": true, "levels": d }), start.elapsed().as_secs_f64(), failures);
    }

    let spec = config.sweep_spec();
    let sweep = run_spectrum_sweep(&spec, &config.spacing_options(), config.workers)?;
    for rec in &sweep.records {
        if let Some(h) = &rec.histogram {
            for (c, p) in h.bin_centers().zip(&h.densities) {
                hist.push(vec![
                    Cell::Num(rec.g_over_sigma),
                    Cell::Int(rec.realization as u64),
                    Cell::Num(c),
                    Cell::Num(*p),
                ]);
            }
        }
        if let Some(reason) = &rec.failure {
            failures.push(format!("g/sigma={} realization={}: {reason}", rec.g_over_sigma, rec.realization));
        }
        energy.push(vec![
            Cell::Num(rec.g_over_sigma),
            Cell::Int(rec.realization as u64),
            Cell::Int(rec.seed),
            Cell::num(rec.normalized_energy),
            rec.histogram.as_ref().map_or(Cell::Missing, |h| Cell::num(h.ks_distance)),
            status(rec.failure.is_none()),
        ]);
    }
    writer.table(&hist)?;
    writer.table(&energy)?;
    writer.table(&spectrum_summary(&sweep))?;
    let seeds: Vec<u64> = sweep.records.iter().map(|r| r.seed).collect();
    writer.manifest("spectrum", json!({ "spec": spec, "seeds": seeds }), start.elapsed().as_secs_f64(), failures)
}

fn spectrum_summary(sweep: &SpectrumSweep) -> Table {
    let mut t = Table::new(
        "spectrum_summary",
        &["g_over_sigma", "mean_ks_distance", "mean_normalized_energy", "status"],
    );
    for (k, g) in sweep.spec.g_over_sigma.iter().enumerate() {
        let complete = sweep.at(k).iter().all(|r| r.failure.is_none());
        t.push(vec![
            Cell::Num(*g),
            sweep.mean_ks(k).map_or(Cell::Missing, Cell::num),
            sweep.mean_normalized_energy(k).map_or(Cell::Missing, Cell::num),
            status(complete),
        ]);
    }
    t
}

fn run_dynamics(config: &RunConfig) -> Result<SweepResult> {
    let spec = config.sweep_spec();
    let cache = config.cache_dir.as_ref().map(DecompositionCache::open).transpose()?;
    run_sweep_with(&spec, config.workers, SweepOptions { cache: cache.as_ref() })
}

fn failures_of(result: &SweepResult) -> Vec<String> {
    result
        .points
        .iter()
        .flat_map(|p| p.records.iter())
        .filter_map(|r| {
            r.failure
                .as_ref()
                .map(|f| format!("g/sigma={} realization={}: {f}", r.g_over_sigma, r.realization))
        })
        .collect()
}

/// Tables of trajectory bands, the averaged normalized autocorrelation and
/// the per-coupling summary.
pub fn dynamics_tables(config: &RunConfig, result: &SweepResult) -> Result<Vec<Table>> {
    let tf = config.unit_mode.time_factor();
    let mut ipr = Table::new("ipr", &["g_over_sigma", "t", "ipr_mean", "ipr_std"]);
    let mut td = Table::new("trace_distance", &["g_over_sigma", "t", "mean_trace_distance", "std"]);
    let mut nc = Table::new("cavity_population", &["g_over_sigma", "t", "n_c_mean", "n_c_std"]);
    let mut corr = Table::new("autocorrelation", &["g_over_sigma", "tau", "C_normalized_mean", "C_normalized_std"]);
    let mut summary = Table::new(
        "dynamics_summary",
        &[
            "g_over_sigma",
            "tau_c",
            "tau_c_std",
            "tau_window",
            "representative_trace_distance",
            "representative_trace_distance_std",
            "tail_trace_distance_std",
            "normalized_energy",
            "tail_ipr",
            "max_ipr",
            "realizations_used",
            "status",
        ],
    );
    let dt = result.spec.time_grid.dt();
    for point in &result.points {
        let g = Cell::Num(point.g_over_sigma);
        if let Some(agg) = &point.aggregate {
            for (k, &t) in result.times.iter().enumerate() {
                let t = Cell::Num(t * tf);
                ipr.push(vec![g.clone(), t.clone(), Cell::Num(agg.ipr.mean[k]), Cell::Num(agg.ipr.std[k])]);
                td.push(vec![
                    g.clone(),
                    t.clone(),
                    Cell::Num(agg.trace_distance.mean[k]),
                    Cell::Num(agg.trace_distance.std[k]),
                ]);
                nc.push(vec![g.clone(), t, Cell::Num(agg.n_c.mean[k]), Cell::Num(agg.n_c.std[k])]);
            }
            // Normalized autocorrelation per realization, then averaged.
            let mut rows: Vec<Vec<f64>> = vec![];
            for rec in point.records.iter().filter(|r| r.failure.is_none()) {
                let c = autocorrelate(&TimeSeries::new(0.0, dt, rec.n_c.clone())?)?;
                let c0 = c.c[0];
                rows.push(c.c.iter().map(|x| if c0 > 0.0 { x / c0 } else { 0.0 }).collect());
            }
            for k in 0..result.times.len() {
                let column: Vec<f64> = rows.iter().map(|r| r[k]).collect();
                let (m, s) = mean_std(&column);
                corr.push(vec![g.clone(), Cell::Num(k as f64 * dt * tf), Cell::Num(m), Cell::Num(s)]);
            }
        }
        let a = point.aggregate.as_ref();
        let f = |v: Option<f64>| v.map_or(Cell::Missing, Cell::num);
        summary.push(vec![
            g,
            f(a.map(|a| a.tau_c * tf)),
            f(a.map(|a| a.tau_c_std * tf)),
            f(a.map(|a| a.tau_window * tf)),
            f(a.map(|a| a.representative_trace_distance)),
            f(a.map(|a| a.representative_trace_distance_std)),
            f(a.map(|a| a.tail_trace_distance_std)),
            f(a.map(|a| a.normalized_energy)),
            f(a.map(|a| a.tail_ipr)),
            f(a.map(|a| a.max_ipr)),
            Cell::Int(a.map_or(0, |a| a.realizations_used) as u64),
            status(point.complete),
        ]);
    }
    Ok(vec![ipr, td, nc, corr, summary])
}

fn sweep_details(result: &SweepResult) -> serde_json::Value {
    json!({
        "spec": result.spec,
        "dimension": result.dim,
        "seeds": result.seeds(),
        "panel": result.panel,
        "unit_seconds": result.timings,
    })
}

/// IPR, trace distance, cavity population and autocorrelation outputs.
pub fn cmd_dynamics(config: &RunConfig) -> Result<CommandReport> {
    config.validate()?;
    let start = Instant::now();
    let mut writer = Writer::new(config)?;
    let result = run_dynamics(config)?;
    for table in dynamics_tables(config, &result)? {
        writer.table(&table)?;
    }
    writer.manifest("dynamics", sweep_details(&result), start.elapsed().as_secs_f64(), failures_of(&result))
}

/// Representative trace distance per coupling with regime labels.
pub fn cmd_regimes(config: &RunConfig) -> Result<CommandReport> {
    config.validate()?;
    if config.g_over_sigma.len() < 3 {
        return Err(Error::Config("g_over_sigma: regime labels need at least 3 couplings".into()));
    }
    let start = Instant::now();
    let mut writer = Writer::new(config)?;
    let result = run_dynamics(config)?;
    let mut table = Table::new(
        "regimes",
        &["g_over_sigma", "representative_trace_distance", "std", "regime_label", "status"],
    );
    let labels = if result.points.iter().filter(|p| p.aggregate.is_some()).count() >= 3 {
        regime_classifier(&result, &config.thresholds())?
    } else {
        result.points.iter().map(|p| (p.g_over_sigma, None)).collect()
    };
    for (point, (_, label)) in result.points.iter().zip(labels) {
        let a = point.aggregate.as_ref();
        table.push(vec![
            Cell::Num(point.g_over_sigma),
            a.map_or(Cell::Missing, |a| Cell::num(a.representative_trace_distance)),
            a.map_or(Cell::Missing, |a| Cell::num(a.representative_trace_distance_std)),
            label.map_or(Cell::Missing, |l| Cell::Text(l.as_str().into())),
            status(point.complete),
        ]);
    }
    writer.table(&table)?;
    let summary = dynamics_tables(config, &result)?.pop().expect("summary table");
    writer.table(&summary)?;
    let mut details = sweep_details(&result);
    details["thresholds"] = serde_json::to_value(config.thresholds())?;
    writer.manifest("regimes", details, start.elapsed().as_secs_f64(), failures_of(&result))
}

/// Result of one built-in check.
#[derive(Clone, Debug, Serialize)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Fast analytic checks of the numerical core.
pub fn selftest() -> Vec<SelfCheck> {
    use crate::basis::{Sector, SectorBasis};
    use crate::hamiltonian::{assemble, sample_disorder, ModelParams};
    use crate::observables::PhotonLadder;
    use crate::spectral::{decompose, StateVector};
    use crate::thermal::match_beta;

    let mut out = vec![];
    let mut check = |name: &'static str, f: &dyn Fn() -> Result<(bool, String)>| {
        let (passed, detail) = f().unwrap_or_else(|e| (false, e.to_string()));
        out.push(SelfCheck { name, passed, detail });
    };
    check("basis_dimension", &|| {
        let d = SectorBasis::build(80, Sector::Two)?.dim();
        Ok((d == 3241, format!("d = {d}")))
    });
    check("rabi_single_site", &|| {
        let g = 0.8;
        let basis = SectorBasis::build(1, Sector::Two)?;
        let dis = sample_disorder(1, 1.0, 0)?;
        let dec = decompose(&assemble(&basis, &dis, &ModelParams::new(1.0, g, 1)?)?)?;
        let prop = dec.propagator(&StateVector::basis_state(basis.dim(), 0))?;
        let err = (0..200)
            .map(|k| {
                let t = k as f64 * 0.05;
                (prop.at(t).amplitudes()[0].norm_sqr() - (2f64.sqrt() * g * t).cos().powi(2)).abs()
            })
            .fold(0.0, f64::max);
        Ok((err < 1e-10, format!("max deviation {err:e}")))
    });
    check("beta_two_level", &|| {
        let b = match_beta(&[0.0, 1.0], 0.25)?.beta;
        Ok(((b - 3f64.ln()).abs() < 1e-8, format!("beta = {b}")))
    });
    check("picket_fence", &|| {
        let ladder: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let h = level_spacings(&ladder, &SpacingOptions { unfolding: Unfolding::Mean, ..Default::default() })?;
        let ok = h.spacings.iter().all(|s| (s - 1.0).abs() < 1e-12);
        Ok((ok, format!("ks = {:.4}", h.ks_distance)))
    });
    check("g2_fock", &|| {
        let dis = sample_disorder(3, 1.0, 1)?;
        let ladder = PhotonLadder::build(&dis, &ModelParams::new(1.0, 0.0, 3)?)?;
        let psi = StateVector::basis_state(ladder.two_excitation().dim(), 0);
        let v = ladder.g2(&psi, 1.0, 2.0, crate::observables::G2_FLOOR)?;
        Ok(((v - 0.5).abs() < 1e-12, format!("g2 = {v}")))
    });
    out
}

/// Run the self-checks and write them as a table.
pub fn cmd_selftest(config: &RunConfig) -> Result<(CommandReport, Vec<SelfCheck>)> {
    let start = Instant::now();
    let checks = selftest();
    let mut writer = Writer::new(config)?;
    let mut table = Table::new("selftest", &["check", "passed", "detail"]);
    for c in &checks {
        table.push(vec![
            Cell::Text(c.name.into()),
            Cell::Text(c.passed.to_string()),
            Cell::Text(c.detail.replace(',', ";")),
        ]);
    }
    writer.table(&table)?;
    let failures = checks.iter().filter(|c| !c.passed).map(|c| c.name.to_string()).collect();
    let report = writer.manifest("selftest", json!({}), start.elapsed().as_secs_f64(), failures)?;
    Ok((report, checks))
}

/// Read a table file back as text, for comparisons.
pub fn read_output(dir: &Path, name: &str) -> Result<String> {
    Ok(fs::read_to_string(dir.join(name))?)
}
