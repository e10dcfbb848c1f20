use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use icapm_core::data::IngestConfig;
use icapm_core::inference::MONTHLY_LAMBDA;
use icapm_core::qml::{BhhhOptions, EstimationOptions};
use icapm_core::simulation::InstrumentProcess;
use icapm_core::{Variant, Window, YearMonth};
use serde::{Deserialize, Serialize};

use crate::Flags;

/// Everything a run depends on. Written back, with paths made absolute, into
/// every manifest so the run can be repeated from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub returns: Option<PathBuf>,
    pub global: Option<PathBuf>,
    /// Local instrument file per non-world asset.
    pub local: BTreeMap<String, PathBuf>,
    pub world: String,
    pub model: Variant,
    /// `YYYY-MM:YYYY-MM`, inclusive.
    pub window: Option<String>,
    pub hypotheses: Vec<String>,
    pub hp_lambda: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub emit_prices: bool,
    pub estimation: EstimationSettings,
    /// Fit artifact consumed by `test`, `correlations`, `hp` and `simulate`.
    pub fit: Option<PathBuf>,
    /// Fit of a nested model, for the likelihood-ratio test.
    pub restricted_fit: Option<PathBuf>,
    pub simulation: SimulationSettings,
    /// CSV file and column filtered by `hp` when no fit is given.
    pub hp_input: Option<PathBuf>,
    pub hp_column: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            returns: None,
            global: None,
            local: BTreeMap::new(),
            world: "World".into(),
            model: Variant::Asymmetric,
            window: None,
            hypotheses: Vec::new(),
            hp_lambda: MONTHLY_LAMBDA,
            seed: 0,
            out: PathBuf::from("out"),
            emit_prices: false,
            estimation: EstimationSettings::default(),
            fit: None,
            restricted_fit: None,
            simulation: SimulationSettings::default(),
            hp_input: None,
            hp_column: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationSettings {
    /// Simplex evaluations; defaults to 200 per parameter.
    pub simplex_budget: Option<usize>,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub relative_tolerance: f64,
    pub max_halvings: usize,
    pub h_init_passes: usize,
}

impl Default for EstimationSettings {
    fn default() -> Self {
        let b = BhhhOptions::default();
        Self {
            simplex_budget: None,
            max_iterations: b.max_iterations,
            gradient_tolerance: b.gradient_tolerance,
            relative_tolerance: b.relative_tolerance,
            max_halvings: b.max_halvings,
            h_init_passes: 1,
        }
    }
}

impl EstimationSettings {
    pub fn options(&self, theta0: Option<Vec<f64>>) -> EstimationOptions {
        EstimationOptions {
            simplex_budget: self.simplex_budget,
            bhhh: BhhhOptions {
                max_iterations: self.max_iterations,
                gradient_tolerance: self.gradient_tolerance,
                relative_tolerance: self.relative_tolerance,
                max_halvings: self.max_halvings,
                ..BhhhOptions::default()
            },
            theta0,
            h_init_passes: self.h_init_passes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    pub periods: usize,
    /// Asset names, world last. Empty means `A1..A{N-1}, World`.
    pub assets: Vec<String>,
    pub n_assets: usize,
    pub n_global: usize,
    pub n_local: usize,
    pub instruments: InstrumentProcess,
    pub burn_in: usize,
    pub start: YearMonth,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            periods: 407,
            assets: Vec::new(),
            n_assets: 5,
            n_global: 5,
            n_local: 4,
            instruments: InstrumentProcess::default(),
            burn_in: 200,
            start: YearMonth::new(1970, 2).expect("valid month"),
        }
    }
}

/// Digests recorded by a previous run, checked when re-running from its
/// manifest.
#[derive(Debug, Clone, Default)]
pub struct Provenance {
    pub command: Option<String>,
    pub inputs: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct ManifestView {
    command: Option<String>,
    config: RunConfig,
    #[serde(default)]
    inputs: BTreeMap<String, String>,
}

impl RunConfig {
    /// Reads a TOML config, a JSON config, or a run manifest (a JSON object
    /// with a `config` key). Relative paths are taken relative to the file.
    pub fn load(path: &Path) -> Result<(Self, Provenance)> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let (mut cfg, prov) = if is_json {
            let value: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            if value.get("config").is_some() {
                let m: ManifestView =
                    serde_json::from_value(value).with_context(|| format!("reading manifest {}", path.display()))?;
                (
                    m.config,
                    Provenance {
                        command: m.command,
                        inputs: m.inputs,
                    },
                )
            } else {
                let cfg = serde_json::from_value(value).with_context(|| format!("parsing {}", path.display()))?;
                (cfg, Provenance::default())
            }
        } else {
            let cfg = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            (cfg, Provenance::default())
        };
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.rebase(&base);
        Ok((cfg, prov))
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            self.returns.as_mut(),
            self.global.as_mut(),
            self.fit.as_mut(),
            self.restricted_fit.as_mut(),
            self.hp_input.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        for p in self.local.values_mut() {
            fix(p);
        }
        fix(&mut self.out);
    }

    /// Command-line values override the file.
    pub fn apply(&mut self, flags: &Flags) -> Result<()> {
        if let Some(m) = &flags.model {
            self.model = m.parse()?;
        }
        if let Some(w) = &flags.window {
            self.window = Some(w.clone());
        }
        if let Some(l) = flags.hp_lambda {
            self.hp_lambda = l;
        }
        if let Some(s) = flags.seed {
            self.seed = s;
        }
        if let Some(o) = &flags.out {
            self.out = o.clone();
        }
        if flags.emit_prices {
            self.emit_prices = true;
        }
        if let Some(p) = &flags.returns {
            self.returns = Some(p.clone());
        }
        if let Some(p) = &flags.global {
            self.global = Some(p.clone());
        }
        for entry in &flags.local {
            let (name, path) = entry
                .split_once('=')
                .with_context(|| format!("--local expects ASSET=PATH, got `{entry}`"))?;
            self.local.insert(name.to_string(), PathBuf::from(path));
        }
        if let Some(w) = &flags.world {
            self.world = w.clone();
        }
        if !flags.hypothesis.is_empty() {
            self.hypotheses = flags.hypothesis.clone();
        }
        if let Some(p) = &flags.fit {
            self.fit = Some(p.clone());
        }
        if let Some(p) = &flags.restricted_fit {
            self.restricted_fit = Some(p.clone());
        }
        if let Some(n) = flags.periods {
            self.simulation.periods = n;
        }
        if let Some(p) = &flags.input {
            self.hp_input = Some(p.clone());
        }
        if let Some(c) = &flags.column {
            self.hp_column = Some(c.clone());
        }
        Ok(())
    }

    /// Makes every path absolute and checks the scalar settings.
    pub fn finalize(&mut self) -> Result<()> {
        let cwd = std::env::current_dir().context("reading the working directory")?;
        self.rebase(&cwd);
        if let Some(w) = &self.window {
            w.parse::<Window>()?;
        }
        if !(self.hp_lambda > 0.0 && self.hp_lambda.is_finite()) {
            bail!("hp_lambda must be positive, got {}", self.hp_lambda);
        }
        Ok(())
    }

    pub fn window(&self) -> Result<Option<Window>> {
        Ok(self.window.as_deref().map(str::parse).transpose()?)
    }

    pub fn ingest_config(&self) -> Result<IngestConfig> {
        let returns = self.returns.clone().context("no returns file (set `returns` or --returns)")?;
        let global = self.global.clone().context("no global instrument file (set `global` or --global)")?;
        Ok(IngestConfig {
            returns,
            global,
            local: self.local.clone(),
            world: self.world.clone(),
        })
    }

    /// Files whose contents determine the run's outputs.
    pub fn input_files(&self) -> Vec<PathBuf> {
        let mut files: Vec<PathBuf> = [&self.returns, &self.global, &self.fit, &self.restricted_fit, &self.hp_input]
            .into_iter()
            .flatten()
            .cloned()
            .collect();
        files.extend(self.local.values().cloned());
        files
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_paths_are_relative_to_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(
            &path,
            r#"
returns = "data/returns.csv"
global = "/abs/global.csv"
model = "symmetric"
window = "1970-02:1987-12"

[local]
UK = "data/local_UK.csv"

[estimation]
max_iterations = 50
"#,
        )
        .unwrap();
        let (cfg, prov) = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.returns.unwrap(), dir.path().join("data/returns.csv"));
        assert_eq!(cfg.global.unwrap(), PathBuf::from("/abs/global.csv"));
        assert_eq!(cfg.local["UK"], dir.path().join("data/local_UK.csv"));
        assert_eq!(cfg.model, Variant::Symmetric);
        assert_eq!(cfg.estimation.max_iterations, 50);
        assert_eq!(cfg.estimation.h_init_passes, 1);
        assert!(prov.command.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "modle = \"symmetric\"\n").unwrap();
        assert!(RunConfig::load(&path).is_err());
    }

    #[test]
    fn manifest_config_key_is_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let cfg = RunConfig {
            seed: 7,
            ..RunConfig::default()
        };
        let body = serde_json::json!({ "command": "simulate", "config": cfg, "inputs": {} });
        fs::write(&path, body.to_string()).unwrap();
        let (read, prov) = RunConfig::load(&path).unwrap();
        assert_eq!(read.seed, 7);
        assert_eq!(prov.command.as_deref(), Some("simulate"));
    }
}
