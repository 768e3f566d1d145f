//! Experiment configs, run manifests and the command implementations behind
//! the `levy-sde` binary.

mod table;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::alpha_est::{estimate_alpha_mcmc, HistogramBin, McmcConfig};
use crate::error::{Error, Result};
use crate::estimator::{central_mean, fit_two_step, DiffusionModel, FitConfig, FitOutcome};
use crate::io_util::write_atomic;
use crate::neural::Checkpoint;
use crate::sde_sim::{builtin_system, generate_snapshots, uniform_grid, SnapshotDataset, SystemSpec};

pub use table::{find_row, TableRow, TABLE_ROWS};

/// Fewest samples accepted by the α estimator command.
pub const MIN_ALPHA_SAMPLES: usize = 100;

/// Initial points: a tensor grid over the domain plus optional extra points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct X0Spec {
    pub per_axis: usize,
    /// Defaults to the system's domain.
    #[serde(default)]
    pub domain: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub extra: Vec<Vec<f64>>,
}

/// One experiment: which system to simulate and how to fit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: String,
    pub alpha: f64,
    pub x0: X0Spec,
    pub reps: usize,
    pub h: f64,
    /// Defaults to the mode matching `alpha`.
    #[serde(default)]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Repetitions per initial point at the published scale, for reference.
    #[serde(default)]
    pub published_reps: Option<usize>,
}

impl ExperimentConfig {
    /// Reads a config file, or the config echoed inside a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let inner = match value.get("config") {
            Some(c) if value.get("command").is_some() => c.clone(),
            _ => value,
        };
        let cfg: Self = serde_json::from_value(inner)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn system_spec(&self) -> Result<SystemSpec> {
        builtin_system(&self.system)
    }

    pub fn validate(&self) -> Result<()> {
        let sys = self.system_spec()?;
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::config(format!("alpha must lie in (0, 2], got {}", self.alpha)));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::config(format!("h must be positive, got {}", self.h)));
        }
        if self.reps == 0 || self.x0.per_axis == 0 {
            return Err(Error::config("reps and x0.per_axis must be at least 1"));
        }
        if let Some(dom) = &self.x0.domain {
            if dom.len() != sys.dim || dom.iter().any(|&(lo, hi)| !(lo <= hi)) {
                return Err(Error::config("x0.domain must give lo <= hi for every dimension"));
            }
        }
        if self.x0.extra.iter().any(|p| p.len() != sys.dim) {
            return Err(Error::config(format!(
                "extra initial points must have dimension {}",
                sys.dim
            )));
        }
        self.fit_config().validate()
    }

    pub fn x0_points(&self) -> Result<Vec<Vec<f64>>> {
        let sys = self.system_spec()?;
        let domain = self.x0.domain.clone().unwrap_or(sys.domain);
        let mut pts = uniform_grid(&domain, self.x0.per_axis);
        pts.extend(self.x0.extra.iter().cloned());
        Ok(pts)
    }

    /// Fit settings with α and seed taken from this config.
    pub fn fit_config(&self) -> FitConfig {
        let mut fit = self.fit.clone().unwrap_or_else(|| FitConfig::for_alpha(self.alpha));
        fit.alpha = self.alpha;
        fit.seed = self.seed;
        fit
    }

    pub fn simulate(&self) -> Result<SnapshotDataset> {
        let sys = self.system_spec()?;
        generate_snapshots(&sys, self.alpha, &self.x0_points()?, self.reps, self.h, self.seed)
    }
}

/// Record of one command run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub library_version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub artifacts: Vec<String>,
    pub wall_clock_seconds: f64,
    pub l2_f: Option<f64>,
    pub l2_g: Option<f64>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: Vec::new(),
            artifacts: Vec::new(),
            wall_clock_seconds: 0.0,
            l2_f: None,
            l2_g: None,
            warnings: Vec::new(),
        }
    }

    fn finish(mut self, out: &Path, started: Instant) -> Result<Self> {
        self.wall_clock_seconds = started.elapsed().as_secs_f64();
        let path = out.join("manifest.json");
        self.artifacts.push(path.display().to_string());
        write_json(&path, &self)?;
        Ok(self)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Simulates the configured system and writes `data.csv` plus sidecar.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    let started = Instant::now();
    cfg.validate()?;
    ensure_dir(out)?;
    let mut manifest = RunManifest::new("simulate", serde_json::to_value(cfg)?);
    let ds = cfg.simulate()?;
    let csv = out.join("data.csv");
    ds.write(&csv)?;
    manifest.artifacts.push(csv.display().to_string());
    manifest
        .artifacts
        .push(SnapshotDataset::sidecar_path(&csv).display().to_string());
    manifest.finish(out, started)
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum DiffusionArtifact<'a> {
    Network { checkpoint: Checkpoint },
    Pooled { values: &'a [f64] },
    PerGroup { x0: &'a [Vec<f64>], values: &'a [Vec<f64>] },
    FixedTruth { system: &'a str },
}

fn diffusion_artifact(model: &DiffusionModel) -> DiffusionArtifact<'_> {
    match model {
        DiffusionModel::Network(net) => DiffusionArtifact::Network {
            checkpoint: net.to_checkpoint(),
        },
        DiffusionModel::Constant(v) => DiffusionArtifact::Pooled { values: v },
        DiffusionModel::Groups { x0, values } => DiffusionArtifact::PerGroup { x0, values },
        DiffusionModel::Known(sys) => DiffusionArtifact::FixedTruth { system: &sys.name },
    }
}

fn write_fit_outputs(outcome: &FitOutcome, out: &Path, manifest: &mut RunManifest) -> Result<()> {
    let files: [(&str, String); 5] = [
        ("report.json", serde_json::to_string_pretty(&outcome.report)? + "\n"),
        ("drift_grid.csv", outcome.report.drift_csv()),
        ("diffusion_grid.csv", outcome.report.diffusion_csv()),
        ("drift_net.json", outcome.drift.to_json()? + "\n"),
        (
            "diffusion_model.json",
            serde_json::to_string_pretty(&diffusion_artifact(&outcome.diffusion))? + "\n",
        ),
    ];
    for (name, body) in files {
        let path = out.join(name);
        write_atomic(&path, body.as_bytes())?;
        manifest.artifacts.push(path.display().to_string());
    }
    manifest.l2_f = outcome.report.l2_f;
    manifest.l2_g = outcome.report.l2_g;
    Ok(())
}

/// Fits the data set at `data` (or freshly simulated data when `None`) and
/// writes the report, grid CSVs and model files.
pub fn cmd_fit(cfg: &ExperimentConfig, data: Option<&Path>, out: &Path) -> Result<RunManifest> {
    let started = Instant::now();
    cfg.validate()?;
    ensure_dir(out)?;
    let mut manifest = RunManifest::new("fit", serde_json::to_value(cfg)?);
    let mut ds = match data {
        Some(path) => {
            manifest.inputs.push(path.display().to_string());
            SnapshotDataset::read(path)?
        }
        None => {
            let ds = cfg.simulate()?;
            let csv = out.join("data.csv");
            ds.write(&csv)?;
            manifest.artifacts.push(csv.display().to_string());
            manifest
                .artifacts
                .push(SnapshotDataset::sidecar_path(&csv).display().to_string());
            ds
        }
    };
    if ds.alpha().is_nan() {
        manifest.warnings.push(format!(
            "data set has no alpha metadata; using config alpha {}",
            cfg.alpha
        ));
    } else if ds.alpha() != cfg.alpha {
        manifest.warnings.push(format!(
            "data set alpha {} differs from config alpha {}; config wins",
            ds.alpha(),
            cfg.alpha
        ));
    }
    ds.set_alpha(cfg.alpha);
    if let Some(sys) = &ds.system {
        if sys != &cfg.system {
            manifest.warnings.push(format!(
                "data set was generated by `{sys}` but config names `{}`; config wins",
                cfg.system
            ));
        }
    }
    let truth = cfg.system_spec()?;
    let outcome = fit_two_step(&ds, &cfg.fit_config(), Some(&truth))?;
    write_fit_outputs(&outcome, out, &mut manifest)?;
    manifest.finish(out, started)
}

/// Result of one reproduced benchmark row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowResult {
    pub row: String,
    pub system: String,
    pub alpha: f64,
    pub records: usize,
    pub published_l2_f: f64,
    pub l2_f: f64,
    pub published_l2_g: f64,
    pub l2_g: f64,
}

pub fn table_csv(results: &[RowResult]) -> String {
    let mut s = String::from("row,system,alpha,records,published_l2_f,ours_l2_f,published_l2_g,ours_l2_g\n");
    for r in results {
        let _ = writeln!(
            s,
            "{},{},{:?},{},{:.4},{:.6},{:.4},{:.6}",
            r.row, r.system, r.alpha, r.records, r.published_l2_f, r.l2_f, r.published_l2_g, r.l2_g
        );
    }
    s
}

/// Resolves row ids; `all` selects every row.
pub fn select_rows(ids: &[String]) -> Result<Vec<&'static TableRow>> {
    if ids.is_empty() {
        return Err(Error::config(format!(
            "no rows selected; choose from: all, {}",
            TABLE_ROWS.iter().map(|r| r.id).collect::<Vec<_>>().join(", ")
        )));
    }
    if ids.iter().any(|i| i == "all") {
        return Ok(TABLE_ROWS.iter().collect());
    }
    ids.iter()
        .map(|id| {
            find_row(id).ok_or_else(|| {
                Error::config(format!(
                    "unknown row `{id}`; choose from: all, {}",
                    TABLE_ROWS.iter().map(|r| r.id).collect::<Vec<_>>().join(", ")
                ))
            })
        })
        .collect()
}

/// Simulates and fits each selected row, writing per-row outputs under
/// `out/<row>/` and the comparison table to `out/table.csv`.
pub fn cmd_reproduce(ids: &[String], full: bool, seed: u64, out: &Path) -> Result<(Vec<RowResult>, RunManifest)> {
    let started = Instant::now();
    let rows = select_rows(ids)?;
    ensure_dir(out)?;
    let mut manifest = RunManifest::new(
        "reproduce",
        serde_json::json!({ "rows": rows.iter().map(|r| r.id).collect::<Vec<_>>(), "full": full, "seed": seed }),
    );
    let mut results = Vec::new();
    for row in rows {
        let cfg = row.experiment(full, seed);
        let dir = out.join(row.id);
        ensure_dir(&dir)?;
        write_json(&dir.join("config.json"), &cfg)?;
        manifest.artifacts.push(dir.join("config.json").display().to_string());
        let ds = cfg.simulate()?;
        let csv = dir.join("data.csv");
        ds.write(&csv)?;
        manifest.artifacts.push(csv.display().to_string());
        manifest
            .artifacts
            .push(SnapshotDataset::sidecar_path(&csv).display().to_string());
        let outcome = fit_two_step(&ds, &cfg.fit_config(), Some(&cfg.system_spec()?))?;
        write_fit_outputs(&outcome, &dir, &mut manifest)?;
        results.push(RowResult {
            row: row.id.to_string(),
            system: row.system.to_string(),
            alpha: row.alpha,
            records: ds.len(),
            published_l2_f: row.published_l2_f,
            l2_f: outcome.report.l2_f.unwrap_or(f64::NAN),
            published_l2_g: row.published_l2_g,
            l2_g: outcome.report.l2_g.unwrap_or(f64::NAN),
        });
    }
    let path = out.join("table.csv");
    write_atomic(&path, table_csv(&results).as_bytes())?;
    manifest.artifacts.push(path.display().to_string());
    manifest.l2_f = None;
    manifest.l2_g = None;
    let manifest = manifest.finish(out, started)?;
    Ok((results, manifest))
}

/// Parses a one-column CSV of samples. A single non-numeric header line is
/// allowed.
pub fn parse_samples(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let field = line.trim();
        if field.is_empty() {
            continue;
        }
        if idx == 0 && field.chars().all(|c| c.is_ascii_alphabetic() || c == '_') {
            continue;
        }
        if field.contains(',') {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected one column, got `{field}`"),
            });
        }
        let v: f64 = field.parse().map_err(|e| Error::Parse {
            line: idx + 1,
            msg: format!("{e} (`{field}`)"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("non-finite sample `{field}`"),
            });
        }
        out.push(v);
    }
    Ok(out)
}

/// Noise samples from a snapshot data set: each x1 minus the central
/// trimmed mean of its group, over all dimensions.
pub fn residuals_from_dataset(ds: &SnapshotDataset) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(ds.len() * ds.dim());
    let mut column = Vec::new();
    for range in ds.groups()? {
        for k in 0..ds.dim() {
            column.clear();
            column.extend(range.clone().map(|i| ds.x1(i)[k]));
            let centre = central_mean(&mut column.clone());
            out.extend(column.iter().map(|v| v - centre));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct AlphaSummary<'a> {
    samples: usize,
    posterior_mean_alpha: f64,
    posterior_sd_alpha: f64,
    posterior_mean_sigma: f64,
    acceptance_rate: f64,
    acceptance_warning: &'a Option<String>,
    histogram: &'a [HistogramBin],
    config: &'a McmcConfig,
}

/// Runs the α sampler on a sample file (or on residuals of a data set) and
/// writes `alpha.json` and `trace.csv`.
pub fn cmd_estimate_alpha(
    samples_path: &Path,
    from_dataset: bool,
    cfg: &McmcConfig,
    out: &Path,
) -> Result<RunManifest> {
    let started = Instant::now();
    cfg.validate()?;
    let samples = if from_dataset {
        residuals_from_dataset(&SnapshotDataset::read(samples_path)?)?
    } else {
        let text = std::fs::read_to_string(samples_path).map_err(|e| Error::io(samples_path, e))?;
        parse_samples(&text)?
    };
    if samples.len() < MIN_ALPHA_SAMPLES {
        return Err(Error::config(format!(
            "insufficient data: {} samples, at least {MIN_ALPHA_SAMPLES} required",
            samples.len()
        )));
    }
    ensure_dir(out)?;
    let mut manifest = RunManifest::new("estimate-alpha", serde_json::to_value(cfg)?);
    manifest.inputs.push(samples_path.display().to_string());
    let result = estimate_alpha_mcmc(&samples, cfg)?;
    if let Some(w) = &result.acceptance_warning {
        manifest.warnings.push(w.clone());
    }
    let summary = AlphaSummary {
        samples: samples.len(),
        posterior_mean_alpha: result.posterior_mean_alpha,
        posterior_sd_alpha: result.posterior_sd_alpha,
        posterior_mean_sigma: result.posterior_mean_sigma,
        acceptance_rate: result.acceptance_rate,
        acceptance_warning: &result.acceptance_warning,
        histogram: &result.histogram,
        config: cfg,
    };
    let json = out.join("alpha.json");
    write_json(&json, &summary)?;
    let trace = out.join("trace.csv");
    write_atomic(&trace, result.trace_csv().as_bytes())?;
    manifest.artifacts.push(json.display().to_string());
    manifest.artifacts.push(trace.display().to_string());
    manifest.finish(out, started)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou_config() -> ExperimentConfig {
        ExperimentConfig {
            system: "ou_add".into(),
            alpha: 1.5,
            x0: X0Spec {
                per_axis: 5,
                domain: None,
                extra: Vec::new(),
            },
            reps: 1000,
            h: 0.1,
            fit: None,
            seed: 3,
            output_dir: None,
            published_reps: None,
        }
    }

    #[test]
    fn simulate_writes_rows_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let m = cmd_simulate(&ou_config(), dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("data.csv")).unwrap();
        assert_eq!(csv.lines().count(), 5001);
        assert!(dir.path().join("data.json").exists());
        assert!(m.artifacts.iter().all(|p| Path::new(p).exists()));
    }

    #[test]
    fn unknown_system_lists_registry() {
        let mut cfg = ou_config();
        cfg.system = "lorenz".into();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("double_well_add"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn empty_row_selection_is_an_error() {
        assert!(select_rows(&[]).is_err());
        assert!(select_rows(&["nope".into()]).is_err());
        assert_eq!(select_rows(&["all".into()]).unwrap().len(), TABLE_ROWS.len());
    }

    #[test]
    fn sample_parsing() {
        assert_eq!(parse_samples("x\n1.5\n-2\n\n3e-1\n").unwrap(), vec![1.5, -2.0, 0.3]);
        match parse_samples("1.0\n2.0\nabc\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_samples("1,2\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn too_few_samples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "0.5\n").unwrap();
        let err = cmd_estimate_alpha(&path, false, &McmcConfig::default(), dir.path()).unwrap_err();
        assert!(err.to_string().contains("insufficient data"), "{err}");
    }

    #[test]
    fn manifest_config_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        cmd_simulate(&ou_config(), dir.path()).unwrap();
        let back = ExperimentConfig::load(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(back, ou_config());
    }

    #[test]
    fn fit_records_alpha_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ou_config();
        cfg.reps = 20;
        cmd_simulate(&cfg, dir.path()).unwrap();
        let mut other = cfg.clone();
        other.alpha = 1.4;
        let mut fit = FitConfig::general(1.4);
        fit.drift_stage.epochs = 5;
        fit.diffusion_stage.epochs = 1;
        other.fit = Some(fit);
        let out = dir.path().join("fit");
        let m = cmd_fit(&other, Some(&dir.path().join("data.csv")), &out).unwrap();
        assert!(m.warnings.iter().any(|w| w.contains("config wins")), "{:?}", m.warnings);
        assert!(m.l2_f.is_some() && m.l2_g.is_some());
        assert!(m.artifacts.iter().all(|p| Path::new(p).exists()));
    }

    #[test]
    fn simulate_is_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        cmd_simulate(&ou_config(), a.path()).unwrap();
        cmd_simulate(&ou_config(), b.path()).unwrap();
        for f in ["data.csv", "data.json"] {
            assert_eq!(
                std::fs::read(a.path().join(f)).unwrap(),
                std::fs::read(b.path().join(f)).unwrap()
            );
        }
    }

    #[test]
    fn per_group_cauchy_without_grouping_fails() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = find_row("cauchy_ou_mult").unwrap().experiment(false, 0);
        cfg.reps = 20;
        let mut ds = cfg.simulate().unwrap();
        ds.clear_grouping();
        let csv = dir.path().join("data.csv");
        ds.write(&csv).unwrap();
        let err = cmd_fit(&cfg, Some(&csv), &dir.path().join("fit")).unwrap_err();
        assert!(matches!(err, Error::MissingGrouping), "{err}");
        assert_eq!(err.exit_code(), 2);
    }
}
