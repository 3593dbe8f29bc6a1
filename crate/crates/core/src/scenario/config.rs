//! Scenario configuration: presets, file loading, `key=value` overrides and
//! the content hash that labels every output.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolve::{SteadyStateMethod, TimeGrid};
use crate::linalg::C64;
use crate::model::{complex_serde, SystemParams};
use crate::observables::PhaseGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    FidelityScan,
    BlockadeScan,
    CatModeB,
    Geometric,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] =
        [ScenarioKind::FidelityScan, ScenarioKind::BlockadeScan, ScenarioKind::CatModeB, ScenarioKind::Geometric];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::FidelityScan => "fidelity-scan",
            ScenarioKind::BlockadeScan => "blockade-scan",
            ScenarioKind::CatModeB => "cat-mode-b",
            ScenarioKind::Geometric => "geometric",
        }
    }

    /// Names accepted as scan axes.
    pub fn axis_names(self) -> &'static [&'static str] {
        match self {
            ScenarioKind::FidelityScan => &["beta_ss_mag", "chi", "delta_b"],
            ScenarioKind::BlockadeScan => {
                &["beta_ss_mag", "chi", "gamma", "gamma_a", "gamma_b", "nbar_a", "nbar_b", "drive_ratio"]
            }
            ScenarioKind::CatModeB => &["beta_ss_mag", "chi", "gamma", "gamma_a", "gamma_b", "nbar_b"],
            ScenarioKind::Geometric => &["gamma", "gamma_a", "gamma_b", "g0", "alpha"],
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisScale {
    #[default]
    Linear,
    Log,
}

/// One scan axis: explicit `values`, or `min`/`max`/`n_points` on a linear or
/// logarithmic scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
    #[serde(default)]
    pub scale: AxisScale,
}

impl AxisSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        let bad = |why: &str| Error::Config(format!("axis '{}': {why}", self.name));
        let v = match (&self.values, self.min, self.max, self.n_points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(lo), Some(hi), Some(n)) => {
                if n == 0 || !(hi >= lo) {
                    return Err(bad("needs n_points >= 1 and max >= min"));
                }
                match self.scale {
                    AxisScale::Linear => crate::ode::linspace(lo, hi, n),
                    AxisScale::Log => {
                        if !(lo > 0.0) {
                            return Err(bad("log scale needs min > 0"));
                        }
                        crate::ode::linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
                    }
                }
            }
            _ => return Err(bad("give either 'values' or all of 'min', 'max', 'n_points'")),
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(bad("values must be finite and non-empty"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HamiltonianChoice {
    /// Displaced frame with the cross-Kerr term kept.
    Tra,
    /// Displaced frame without it.
    App,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesInitial {
    /// `|1⟩_a|0⟩_b`
    One,
    /// `(|0⟩_a + |1⟩_a)/√2 ⊗ |0⟩_b`
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KittenTarget {
    pub n: u32,
    pub m: u32,
}

fn default_targets() -> Vec<KittenTarget> {
    vec![KittenTarget { n: 2, m: 1 }, KittenTarget { n: 3, m: 1 }]
}

fn default_alpha() -> C64 {
    C64::new(2.0, 0.0)
}

fn default_one() -> f64 {
    1.0
}

fn default_m() -> u32 {
    1
}

fn default_drive_ratio() -> Option<f64> {
    Some(0.1)
}

fn default_steady() -> SteadyStateMethod {
    SteadyStateMethod::Auto
}

/// Scenario-specific settings. Unused knobs are ignored by the other
/// scenarios but still enter the config hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Knobs {
    /// Fixes `|β_ss|` directly; the mode-b drive is then ignored.
    pub beta_ss_mag: Option<f64>,
    /// Overrides `ω_a + χ|β_ss|²`.
    pub omega_a_prime: Option<f64>,
    /// Overrides the single-photon resonance `g0²/(Δ_b + χ)`.
    pub delta_a_prime: Option<f64>,
    /// `Ω_a/γ_a`; `null` keeps `omega_drive_a` from the parameters.
    pub drive_ratio: Option<f64>,
    /// Initial photon number of mode a in the fidelity scan.
    pub m: u32,
    /// Only evaluate at `t_s = π/Δ_b` (fidelity heatmaps).
    pub checkpoint_only: bool,
    pub hamiltonian: Option<HamiltonianChoice>,
    pub series_initial: Option<SeriesInitial>,
    /// Coupling of the geometric scenario, which sets the time unit.
    pub g0: f64,
    #[serde(with = "complex_serde")]
    pub alpha: C64,
    pub targets: Vec<KittenTarget>,
    pub renormalize: bool,
    pub wigner: Option<PhaseGrid>,
    pub steady_state: SteadyStateMethod,
}

impl Default for Knobs {
    fn default() -> Self {
        Self {
            beta_ss_mag: None,
            omega_a_prime: None,
            delta_a_prime: None,
            drive_ratio: default_drive_ratio(),
            m: default_m(),
            checkpoint_only: false,
            hamiltonian: None,
            series_initial: None,
            g0: default_one(),
            alpha: default_alpha(),
            targets: default_targets(),
            renormalize: true,
            wigner: None,
            steady_state: default_steady(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsSpec {
    pub n_a: usize,
    pub n_b: usize,
}

/// Fully resolved scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub params: SystemParams,
    #[serde(default)]
    pub knobs: Knobs,
    /// Truncation; chosen per row from the parameters when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<DimsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeGrid>,
    #[serde(default)]
    pub axes: Vec<AxisSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn new(scenario: ScenarioKind) -> Self {
        Self {
            scenario,
            preset: None,
            params: SystemParams::default(),
            knobs: Knobs::default(),
            dims: None,
            time: None,
            axes: Vec::new(),
            output_dir: None,
        }
    }

    /// Resolve a JSON document: merge it over its preset, apply overrides,
    /// then deserialize and validate.
    pub fn from_value(doc: Value, overrides: &[String]) -> Result<Self> {
        let mut doc = doc;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let doc = match doc.get("preset").and_then(Value::as_str) {
            Some(name) => {
                let mut base = super::presets::find(name)?.config()?;
                merge(&mut base, doc);
                base
            }
            None => doc,
        };
        let mut doc = doc;
        // the geometric gate runs on resonance unless told otherwise
        if doc.get("scenario").and_then(Value::as_str) == Some("geometric") {
            if let Some(obj) = doc.as_object_mut() {
                let params = obj.entry("params").or_insert_with(|| Value::Object(Map::new()));
                if let Some(p) = params.as_object_mut() {
                    p.entry("delta_b").or_insert(Value::from(0.0));
                }
            }
        }
        let cfg: ScenarioConfig = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let doc: Value =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_value(doc, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.check_rates()?;
        let allowed = self.scenario.axis_names();
        for (i, ax) in self.axes.iter().enumerate() {
            if !allowed.contains(&ax.name.as_str()) {
                return Err(Error::Config(format!(
                    "{} does not scan '{}' (allowed: {})",
                    self.scenario,
                    ax.name,
                    allowed.join(", ")
                )));
            }
            if self.axes[..i].iter().any(|o| o.name == ax.name) {
                return Err(Error::Config(format!("axis '{}' given twice", ax.name)));
            }
            ax.values()?;
        }
        if let Some(t) = &self.time {
            t.validate()?;
        }
        if let Some(d) = &self.dims {
            crate::fock::ModeDims::new(d.n_a, d.n_b)?;
        }
        if let Some(g) = &self.knobs.wigner {
            g.validate()?;
        }
        Ok(())
    }

    /// Canonical JSON (sorted keys) of the resolved config.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&serde_json::to_value(self)?)?)
    }

    /// Git-style content hash: SHA-256 of `"blob <len>\0<canonical json>"`.
    pub fn content_hash(&self) -> Result<String> {
        let body = self.canonical_json()?;
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", body.len()).as_bytes());
        h.update(body.as_bytes());
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Cartesian product of the axes, first axis outermost.
    pub fn points(&self) -> Result<Vec<Vec<(String, f64)>>> {
        let mut points: Vec<Vec<(String, f64)>> = vec![vec![]];
        for ax in &self.axes {
            let vals = ax.values()?;
            points = points
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((ax.name.clone(), *v));
                        q
                    })
                })
                .collect();
        }
        Ok(points)
    }
}

/// Deep merge: objects merge key by key, everything else is replaced.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `a.b.c=value`; the value is parsed as JSON and taken as a string when
/// that fails.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) =
        spec.split_once('=').ok_or_else(|| Error::Config(format!("override '{spec}' is not key=value")))?;
    let path = path.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override '{spec}' has an empty key")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut cur = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if !cur.is_object() {
            if cur.is_null() {
                *cur = Value::Object(Map::new());
            } else {
                return Err(Error::Config(format!("override '{spec}': '{key}' is not inside an object")));
            }
        }
        let obj = cur.as_object_mut().expect("checked above");
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(key.to_string()).or_insert(Value::Object(Map::new()));
    }
    unreachable!("path has at least one key")
}
