//! Scenario runners that turn a [`ScenarioConfig`] into CSV tables and
//! Wigner grid files.
//!
//! Each scan point runs single-threaded; points run in parallel on a rayon
//! pool and are assembled in axis order, so the output bytes do not depend
//! on the number of jobs.

mod blockade;
mod cat;
pub mod config;
mod fidelity;
pub mod geometric;
pub mod output;
pub mod presets;

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::warn;
use rayon::prelude::*;
use serde_json::{json, Value};

pub use config::{AxisSpec, HamiltonianChoice, KittenTarget, Knobs, ScenarioConfig, ScenarioKind, SeriesInitial};
pub use output::{Manifest, Table};

use crate::error::{Error, Result};
use crate::fock::{LEAKAGE_LIMIT, LEAKAGE_WARN};
use crate::linalg::C64;
use crate::model::{self, DerivedParams, SystemParams};
use crate::observables::WignerGrid;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CROSSKERR_OUT_DIR";

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads for scan points; rayon's default when `None`.
    pub jobs: Option<usize>,
    /// Recorded in the metadata only; nothing here is stochastic.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct NamedWigner {
    pub name: String,
    /// Scan point the field belongs to.
    pub point: usize,
    pub label: Value,
    pub field: WignerGrid,
}

/// Everything a run produced, before anything is written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ScenarioConfig,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub tables: Vec<Table>,
    pub wigners: Vec<NamedWigner>,
    pub leakage_max: [f64; 2],
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
}

impl RunOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn wigner(&self, name: &str) -> Option<&NamedWigner> {
        self.wigners.iter().find(|w| w.name == name)
    }

    pub fn flagged_rows(&self) -> usize {
        self.tables.iter().map(Table::flagged_rows).sum()
    }

    /// 0 when clean, 2 when some rows were flagged.
    pub fn exit_code(&self) -> i32 {
        if self.flagged_rows() > 0 {
            2
        } else {
            0
        }
    }

    fn metadata(&self, extra: Value) -> Result<Value> {
        let mut meta = json!({
            "scenario": self.config.scenario.name(),
            "config_hash": self.config_hash,
            "version": VERSION,
            "config": serde_json::to_value(&self.config)?,
            "leakage_max": self.leakage_max,
            "seed": self.seed,
            "flagged_rows": self.flagged_rows(),
        });
        if let (Some(m), Value::Object(e)) = (meta.as_object_mut(), extra) {
            m.extend(e);
        }
        Ok(meta)
    }

    pub fn table_csv(&self, t: &Table) -> Result<Vec<u8>> {
        t.to_csv(&self.metadata(json!({ "table": t.name }))?)
    }

    pub fn wigner_csv(&self, w: &NamedWigner) -> Result<Vec<u8>> {
        let meta = self.metadata(json!({
            "field": w.name,
            "point": w.point,
            "label": w.label,
            "grid": w.field.grid,
            "truncation_warning": w.field.truncation_warning,
        }))?;
        output::wigner_csv(&w.field, &meta)
    }

    /// Write every table, every Wigner field and `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Manifest> {
        let mut files = Vec::new();
        for t in &self.tables {
            let name = format!("{}.csv", t.name);
            output::write_file(dir, &name, &self.table_csv(t)?)?;
            files.push(name);
        }
        for w in &self.wigners {
            let name = format!("{}.csv", w.name);
            output::write_file(dir, &name, &self.wigner_csv(w)?)?;
            files.push(name);
        }
        let manifest = Manifest {
            scenario: self.config.scenario.name().into(),
            config_hash: self.config_hash.clone(),
            version: VERSION.into(),
            seed: self.seed,
            wall_time_s: self.wall_time_s,
            flagged_rows: self.flagged_rows(),
            leakage_max: self.leakage_max,
            files,
            warnings: self.warnings.clone(),
        };
        output::write_file(dir, "manifest.json", serde_json::to_string_pretty(&manifest)?.as_bytes())?;
        Ok(manifest)
    }
}

/// Output directory: explicit flag, then the config, then the environment,
/// then `./out`.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &ScenarioConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// One unit of work: the scan-axis assignments of a table row group.
#[derive(Debug, Clone)]
pub(crate) struct Point {
    pub index: usize,
    pub assign: Vec<(String, f64)>,
}

impl Point {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.assign.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Rows, fields and bookkeeping from one point.
#[derive(Debug, Default)]
pub(crate) struct PointOutput {
    /// `(table index, values, flag)`
    pub rows: Vec<(usize, Vec<f64>, Option<String>)>,
    pub wigners: Vec<NamedWigner>,
    pub leakage: [f64; 2],
    pub warnings: Vec<String>,
}

impl PointOutput {
    pub fn note_leakage(&mut self, l: [f64; 2]) {
        self.leakage[0] = self.leakage[0].max(l[0]);
        self.leakage[1] = self.leakage[1].max(l[1]);
    }

    /// Flag text when the point's leakage exceeds the hard limit.
    pub fn leakage_flag(&mut self, index: usize) -> Option<String> {
        let l = self.leakage[0].max(self.leakage[1]);
        if l > LEAKAGE_LIMIT {
            Some(format!("truncation leakage {l:.3e} above {LEAKAGE_LIMIT:e}"))
        } else {
            if l > LEAKAGE_WARN {
                self.warnings.push(format!("point {index}: truncation leakage {l:.3e}"));
            }
            None
        }
    }
}

/// Parameters and knobs of one point with the axis values applied.
pub(crate) fn apply_point(cfg: &ScenarioConfig, p: &Point) -> Result<(SystemParams, Knobs)> {
    let mut params = cfg.params;
    let mut knobs = cfg.knobs.clone();
    for (name, v) in &p.assign {
        let v = *v;
        match name.as_str() {
            "beta_ss_mag" => knobs.beta_ss_mag = Some(v),
            "chi" => params.chi = v,
            "delta_b" => params.delta_b = v,
            "gamma" => {
                params.gamma_a = v;
                params.gamma_b = v;
            }
            "gamma_a" => params.gamma_a = v,
            "gamma_b" => params.gamma_b = v,
            "nbar_a" => params.nbar_a = v,
            "nbar_b" => params.nbar_b = v,
            "drive_ratio" => knobs.drive_ratio = Some(v),
            "g0" => knobs.g0 = v,
            "alpha" => knobs.alpha = C64::new(v, 0.0),
            "target_n" | "target_m" => {}
            other => return Err(Error::Config(format!("unknown axis '{other}'"))),
        }
    }
    params.check_rates()?;
    Ok((params, knobs))
}

/// Displaced-frame quantities: `|β_ss|` from the knob when given, the
/// drive otherwise; `ω'_a` and `Δ'_a` overridable.
pub(crate) fn frame(params: &SystemParams, knobs: &Knobs) -> Result<DerivedParams> {
    let mut d = match knobs.beta_ss_mag {
        Some(b) => {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::InvalidArgument(format!("beta_ss_mag must be >= 0, got {b}")));
            }
            DerivedParams::from_beta(params, C64::new(b, 0.0))
        }
        None => model::derive(params)?,
    };
    if let Some(w) = knobs.omega_a_prime {
        d.omega_a_prime = w;
    }
    if let Some(w) = knobs.delta_a_prime {
        d.delta_a_prime = w;
    }
    Ok(d)
}

/// Mode-b cutoff for a displacement bounded by `x`: `⌈1.3x² + 8x + 10⌉`.
pub fn displaced_cutoff(x: f64) -> usize {
    (1.3 * x * x + 8.0 * x + 10.0).ceil() as usize
}

/// Extra levels so a thermal occupation `nbar` leaves at most `eps` in the
/// top two levels.
pub fn thermal_margin(nbar: f64, eps: f64) -> usize {
    if nbar <= 0.0 {
        return 0;
    }
    let r = nbar / (nbar + 1.0);
    ((eps * (nbar + 1.0) / 2.0).ln() / r.ln()).ceil().max(0.0) as usize + 2
}

/// Margin used for every thermal bath.
pub const THERMAL_EPS: f64 = 1e-4;

pub(crate) fn nan_row(prefix: Vec<f64>, width: usize) -> Vec<f64> {
    let mut r = prefix;
    r.resize(width, f64::NAN);
    r
}

/// Run a scenario and collect its output in memory.
pub fn run(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    // keep dense kernels sequential so results are thread-count independent
    faer::set_global_parallelism(faer::Par::Seq);
    let config_hash = cfg.content_hash()?;

    let mut points: Vec<Point> = cfg
        .points()?
        .into_iter()
        .enumerate()
        .map(|(index, assign)| Point { index, assign })
        .collect();
    if cfg.scenario == ScenarioKind::Geometric {
        points = geometric::expand_targets(cfg, points)?;
    }

    let mut tables = match cfg.scenario {
        ScenarioKind::FidelityScan => fidelity::tables(),
        ScenarioKind::BlockadeScan => blockade::tables(),
        ScenarioKind::CatModeB => cat::tables(),
        ScenarioKind::Geometric => geometric::tables(),
    };
    let widths: Vec<usize> = tables.iter().map(|t| t.columns.len()).collect();

    let work = |p: &Point| -> PointOutput {
        let res = match cfg.scenario {
            ScenarioKind::FidelityScan => fidelity::run_point(cfg, p),
            ScenarioKind::BlockadeScan => blockade::run_point(cfg, p),
            ScenarioKind::CatModeB => cat::run_point(cfg, p),
            ScenarioKind::Geometric => geometric::run_point(cfg, p),
        };
        res.unwrap_or_else(|e| {
            let prefix = match cfg.scenario {
                ScenarioKind::FidelityScan => fidelity::prefix(cfg, p),
                ScenarioKind::BlockadeScan => blockade::prefix(cfg, p),
                ScenarioKind::CatModeB => cat::prefix(cfg, p),
                ScenarioKind::Geometric => geometric::prefix(cfg, p),
            }
            .unwrap_or_else(|_| vec![p.index as f64]);
            let flag = format!("failed: {e}");
            PointOutput {
                rows: widths.iter().enumerate().map(|(t, w)| (t, nan_row(prefix.clone(), *w), Some(flag.clone()))).collect(),
                warnings: vec![format!("point {}: {e}", p.index)],
                ..Default::default()
            }
        })
    };

    let results: Vec<PointOutput> = match opts.jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| points.par_iter().map(work).collect())
        }
        None => points.par_iter().map(work).collect(),
    };

    let mut wigners = Vec::new();
    let mut leakage_max = [0.0f64; 2];
    let mut warnings = Vec::new();
    for r in results {
        for (t, row, flag) in r.rows {
            tables[t].push(row, flag)?;
        }
        wigners.extend(r.wigners);
        leakage_max[0] = leakage_max[0].max(r.leakage[0]);
        leakage_max[1] = leakage_max[1].max(r.leakage[1]);
        warnings.extend(r.warnings);
    }
    for t in &tables {
        t.check_nan()?;
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(RunOutput {
        config: cfg.clone(),
        config_hash,
        seed: opts.seed,
        tables,
        wigners,
        leakage_max,
        warnings,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
