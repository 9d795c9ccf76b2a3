//! Run configuration: a TOML document with one table per subsystem.
//!
//! Every field has a default, unknown keys are rejected, and the resolved
//! document (defaults included) is echoed into each run manifest.

use serde::{Deserialize, Serialize};
use std::path::Path;

use nf_core::solve::DioParams;
use nf_dnls::DnlsConfig;
use nf_engine::{BirkhoffConfig, KamOptions, KamSchedule};
use nf_lab::{KamRecipe, MeasureConfig, PipelineConfig, StabilityConfig, ThresholdMode};

use crate::error::RunError;

/// `1 + 1/(1 + 1/(8 + 1/phi))`, a noble ratio for the two tangent frequencies.
pub fn noble_ratio() -> f64 {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    1.0 + 1.0 / (1.0 + 1.0 / (8.0 + 1.0 / phi))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub modes: ModesSection,
    pub domain: DomainSection,
    pub kam: KamSection,
    pub birkhoff: BirkhoffSection,
    pub dnls: DnlsSection,
    pub simulate: SimulateSection,
    pub stability: StabilitySection,
    pub measure: MeasureSection,
    pub selftest: SelftestSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 20_240_917,
            modes: ModesSection::default(),
            domain: DomainSection::default(),
            kam: KamSection::default(),
            birkhoff: BirkhoffSection::default(),
            dnls: DnlsSection::default(),
            simulate: SimulateSection::default(),
            stability: StabilitySection::default(),
            measure: MeasureSection::default(),
            selftest: SelftestSection::default(),
            output: OutputSection::default(),
        }
    }
}

/// Lattice and truncation.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModesSection {
    pub tangent: Vec<i32>,
    pub jmax: i32,
    /// Fourier cutoff of the series.
    pub k_cut: u32,
    /// Degree cutoff of the series.
    pub d_cut: u32,
}

impl Default for ModesSection {
    fn default() -> Self {
        ModesSection { tangent: vec![1, 2], jmax: 12, k_cut: 8, d_cut: 4 }
    }
}

/// Analytic domains and the Diophantine data.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSection {
    /// Starting strip width and radius.
    pub chi: f64,
    pub eta: f64,
    pub tau: f64,
    pub gamma0: f64,
    pub gamma: f64,
    pub k_scan: u32,
}

impl Default for DomainSection {
    fn default() -> Self {
        DomainSection { chi: 0.5, eta: 0.1, tau: 3.0, gamma0: 0.1, gamma: 0.1, k_scan: 8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct KamSection {
    pub steps: usize,
    /// The `eps` of the schedule `eps_m`.
    pub schedule_eps: f64,
    pub lie_order_cap: usize,
    pub residual_rel: f64,
    pub divergence_ratio: f64,
    pub scan_k: u32,
    /// Write every generator and the final perturbation as text series.
    pub checkpoints: bool,
}

impl Default for KamSection {
    fn default() -> Self {
        let o = KamOptions::default();
        KamSection {
            steps: 3,
            schedule_eps: 1e-3,
            lie_order_cap: o.lie_order_cap,
            residual_rel: o.residual_rel,
            divergence_ratio: o.divergence_ratio,
            scan_k: o.scan_k,
            checkpoints: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BirkhoffSection {
    pub enabled: bool,
    pub m: u32,
    pub n_split: i32,
    pub rho: f64,
    pub c0: f64,
    pub eta_acute: f64,
    pub lie_order_cap: usize,
    pub residual_rel: f64,
}

impl Default for BirkhoffSection {
    fn default() -> Self {
        let b = BirkhoffConfig::default();
        BirkhoffSection {
            enabled: true,
            m: b.m,
            n_split: b.n_split,
            rho: b.rho,
            c0: b.c0,
            eta_acute: b.eta_acute,
            lie_order_cap: b.lie_order_cap,
            residual_rel: b.residual_rel,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DnlsSection {
    pub eps: f64,
    /// Seed of the normal-site parameters; negative keeps the midpoints.
    pub xi_seed: i64,
    /// Retune the second tangent parameter to the ratio below.
    pub tune_ratio: bool,
    pub ratio: f64,
    /// Tangent actions; empty means the default 1.5 each.
    pub zeta: Vec<f64>,
}

impl Default for DnlsSection {
    fn default() -> Self {
        DnlsSection { eps: 1e-3, xi_seed: 7, tune_ratio: true, ratio: noble_ratio(), zeta: vec![] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub delta: f64,
    pub samples: usize,
    pub dt: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { delta: 0.05, samples: 40, dt: 1e-2 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySection {
    pub deltas: Vec<f64>,
    pub m: u32,
    pub p: f64,
    pub z_sites: Vec<i32>,
    pub x0: Vec<f64>,
    pub start_fraction: f64,
    pub samples: usize,
    pub dt: f64,
    pub x_removal: bool,
    pub torus_grid: usize,
    pub rk4_steps: usize,
}

impl Default for StabilitySection {
    fn default() -> Self {
        let s = StabilityConfig::default();
        StabilitySection {
            deltas: vec![0.02, 0.05],
            m: s.m,
            p: s.p,
            z_sites: s.z_sites,
            x0: s.x0,
            start_fraction: s.start_fraction,
            samples: s.samples,
            dt: s.dt,
            x_removal: s.x_removal,
            torus_grid: s.torus_grid,
            rk4_steps: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdChoice {
    Paper,
    Eta6Eps,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureSection {
    pub tangent: Vec<i32>,
    pub jmax: i32,
    pub n_split: i32,
    pub m: u32,
    pub kmax: u32,
    pub tau: f64,
    pub mode: ThresholdChoice,
    pub eps: f64,
    pub table_slack: f64,
    /// `eta` grid: `eta_count` log-spaced values on `[eta_lo, eta_hi]`.
    pub eta_lo: f64,
    pub eta_hi: f64,
    pub eta_count: usize,
    pub samples: usize,
    /// Use the post-KAM frequency table of the `[dnls]` model instead of the unperturbed one.
    pub post_kam: bool,
    /// Parameter sites for the frequency-derivative check; empty skips it.
    pub derivative_params: Vec<i32>,
    pub derivative_step: f64,
}

impl Default for MeasureSection {
    fn default() -> Self {
        MeasureSection {
            tangent: vec![1, 2],
            jmax: 12,
            n_split: 1,
            m: 2,
            kmax: 4,
            tau: 3.0,
            mode: ThresholdChoice::Paper,
            eps: 1e-3,
            table_slack: 1e-2,
            eta_lo: 1e-3,
            eta_hi: 1e-2,
            eta_count: 6,
            samples: 20_000,
            post_kam: false,
            derivative_params: vec![],
            derivative_step: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SelftestSection {
    pub triples: usize,
    pub momentum_pairs: usize,
    pub oracle_instances: usize,
    pub estimate_inputs: usize,
    pub estimate_random: usize,
}

impl Default for SelftestSection {
    fn default() -> Self {
        SelftestSection { triples: 200, momentum_pairs: 500, oracle_instances: 100, estimate_inputs: 10, estimate_random: 100 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    /// Also write the long-format plot tables.
    pub plotdata: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "runs".into(), plotdata: true }
    }
}

/// Turn the right-hand side of `key=value` into a TOML value; bare words become strings.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Apply one `a.b.c=value` override to a raw document.
pub fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<(), RunError> {
    let (key, value) = spec.split_once('=').ok_or_else(|| RunError::Schema(format!("override `{spec}` is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(RunError::Schema(format!("bad override key `{key}`")));
    }
    let mut table = doc;
    for part in &path[..path.len() - 1] {
        let entry = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(RunError::Schema(format!("override `{key}`: `{part}` is not a table"))),
        };
    }
    table.insert(path[path.len() - 1].to_string(), parse_value(value.trim()));
    Ok(())
}

impl RunConfig {
    /// Parse a document, apply overrides, then validate.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, RunError> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| RunError::Schema(e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(doc).try_into().map_err(|e: toml::de::Error| RunError::Schema(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, RunError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| RunError::Schema(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Schema(m));
        if self.modes.tangent.is_empty() || self.modes.jmax < 1 {
            return bad(format!("modes: tangent {:?}, jmax {}", self.modes.tangent, self.modes.jmax));
        }
        if self.dnls.tune_ratio && self.modes.tangent.len() < 2 {
            return bad("dnls.tune_ratio needs two tangent sites".into());
        }
        if !self.dnls.zeta.is_empty() && self.dnls.zeta.len() != self.modes.tangent.len() {
            return bad("dnls.zeta must have one entry per tangent site".into());
        }
        if self.stability.deltas.is_empty() || self.stability.deltas.iter().any(|d| !(*d > 0.0)) {
            return bad(format!("stability.deltas {:?}", self.stability.deltas));
        }
        if !(self.measure.eta_lo > 0.0 && self.measure.eta_hi >= self.measure.eta_lo && self.measure.eta_count >= 1) {
            return bad("measure: need 0 < eta_lo <= eta_hi and eta_count >= 1".into());
        }
        self.dnls_config()?;
        self.schedule()?;
        self.dio()?;
        Ok(())
    }

    pub fn dnls_config(&self) -> Result<DnlsConfig, RunError> {
        let mut cfg = DnlsConfig::new(self.modes.tangent.clone(), self.modes.jmax, self.dnls.eps).map_err(schema)?;
        if self.dnls.xi_seed >= 0 {
            cfg = cfg.with_seeded_xi(self.dnls.xi_seed as u64);
        }
        if self.dnls.tune_ratio {
            let (a, b) = (self.modes.tangent[0], self.modes.tangent[1]);
            cfg.set_xi(b, self.dnls.ratio * cfg.lambda(a) - (b * b) as f64).map_err(schema)?;
        }
        if !self.dnls.zeta.is_empty() {
            cfg.zeta = self.dnls.zeta.clone();
            cfg.validate().map_err(schema)?;
        }
        Ok(cfg)
    }

    pub fn schedule(&self) -> Result<KamSchedule, RunError> {
        KamSchedule::new(self.domain.eta, self.kam.schedule_eps, self.domain.chi, self.domain.tau).map_err(schema)
    }

    pub fn dio(&self) -> Result<DioParams, RunError> {
        DioParams::new(self.domain.gamma0, self.domain.gamma, self.domain.tau, self.domain.k_scan).map_err(schema)
    }

    pub fn kam_options(&self) -> KamOptions {
        KamOptions {
            lie_order_cap: self.kam.lie_order_cap,
            residual_rel: self.kam.residual_rel,
            divergence_ratio: self.kam.divergence_ratio,
            scan_k: self.kam.scan_k,
            ..KamOptions::default()
        }
    }

    pub fn birkhoff_config(&self) -> BirkhoffConfig {
        let b = &self.birkhoff;
        BirkhoffConfig {
            m: b.m,
            n_split: b.n_split,
            rho: b.rho,
            c0: b.c0,
            eta_acute: b.eta_acute,
            tau: self.domain.tau,
            lie_order_cap: b.lie_order_cap,
            residual_rel: b.residual_rel,
            ..BirkhoffConfig::default()
        }
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig, RunError> {
        Ok(PipelineConfig {
            dnls: self.dnls_config()?,
            k_cut: self.modes.k_cut,
            d_cut: self.modes.d_cut,
            kam_steps: self.kam.steps,
            schedule: self.schedule()?,
            dio: self.dio()?,
            kam_options: self.kam_options(),
            birkhoff: self.birkhoff.enabled.then(|| self.birkhoff_config()),
            rk4_steps: self.stability.rk4_steps,
        })
    }

    pub fn stability_config(&self, delta: f64, samples: usize, dt: f64) -> StabilityConfig {
        let s = &self.stability;
        StabilityConfig {
            delta,
            m: s.m,
            p: s.p,
            z_sites: s.z_sites.clone(),
            x0: s.x0.clone(),
            start_fraction: s.start_fraction,
            samples,
            dt,
            seed: self.seed,
            x_removal: s.x_removal,
            torus_grid: s.torus_grid,
        }
    }

    pub fn measure_config(&self) -> MeasureConfig {
        let m = &self.measure;
        MeasureConfig {
            tangent: m.tangent.clone(),
            jmax: m.jmax,
            n_split: m.n_split,
            m: m.m,
            kmax: m.kmax,
            tau: m.tau,
            mode: match m.mode {
                ThresholdChoice::Paper => ThresholdMode::Paper,
                ThresholdChoice::Eta6Eps => ThresholdMode::Eta6Eps,
            },
            eps: m.eps,
            table_slack: m.table_slack,
        }
    }

    pub fn etas(&self) -> Vec<f64> {
        let m = &self.measure;
        if m.eta_count == 1 {
            return vec![m.eta_lo];
        }
        let (a, b) = (m.eta_lo.log10(), m.eta_hi.log10());
        (0..m.eta_count).map(|i| 10f64.powf(a + (b - a) * i as f64 / (m.eta_count - 1) as f64)).collect()
    }

    pub fn kam_recipe(&self) -> Result<KamRecipe, RunError> {
        Ok(KamRecipe {
            k_cut: self.modes.k_cut,
            d_cut: self.modes.d_cut,
            steps: self.kam.steps,
            schedule: self.schedule()?,
            dio: self.dio()?,
            options: self.kam_options(),
        })
    }
}

fn schema<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Schema(e.to_string())
}
