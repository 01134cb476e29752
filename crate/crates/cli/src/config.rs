//! Experiment configuration: a flat `key = value` text file. Flags override
//! individual keys after loading; the file round-trips losslessly through
//! `to_text` / `parse`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use greenwalk_core::error::{Error, Result};
use greenwalk_core::thermo::GridSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Path of the model file, or `builtin:f2`, `builtin:f3`, `builtin:z2z3`.
    pub model: String,
    /// Path of the step-distribution file, or `uniform`.
    pub step_dist: String,
    /// Optional automaton file (default: built-in construction).
    pub automaton: Option<String>,
    pub output_dir: String,
    pub seed: u64,

    // Walk budgets.
    pub steps: usize,
    pub replicas: usize,

    // Thermodynamics.
    pub grid: GridSpec,
    pub sphere_depth: usize,
    pub cylinder_depth: usize,
    pub horizon: usize,

    // Boundary diagnostics.
    pub shadow_radius: u32,
    pub gibbs_apexes: usize,
    pub gibbs_depth: usize,
    pub stationarity_depth: usize,
    pub mc_walks: usize,
    pub mc_buffer: usize,

    // Finitary experiments.
    pub hitting_n: usize,
    pub hitting_walks: usize,
    pub hitting_a: Vec<f64>,
    pub step_cap: usize,
    pub confine_a: f64,
    pub confine_nmax: usize,
    pub calib_walks: usize,
    pub calib_steps: usize,

    pub budget: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: "builtin:f2".into(),
            step_dist: "uniform".into(),
            automaton: None,
            output_dir: "out".into(),
            seed: 1,
            steps: 2000,
            replicas: 64,
            grid: GridSpec { lo: -2.0, hi: 2.0, step: 0.05 },
            sphere_depth: 12,
            cylinder_depth: 0, // 0 = auto: exact on tree-like, 4 on generic
            horizon: 20,
            shadow_radius: 0,
            gibbs_apexes: 200,
            gibbs_depth: 8,
            stationarity_depth: 2,
            mc_walks: 20_000,
            mc_buffer: 20,
            hitting_n: 10,
            hitting_walks: 100_000,
            hitting_a: vec![0.25, 0.5, 0.75],
            step_cap: 10_000,
            confine_a: 0.2,
            confine_nmax: 14,
            calib_walks: 800,
            calib_steps: 300,
            budget: 20_000_000,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &str) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, lineno, "expected key = value"))?;
            let key = key.trim();
            let value = value.trim();
            if seen.insert(key.to_string(), lineno).is_some() {
                return Err(Error::parse(path, lineno, format!("duplicate key {key:?}")));
            }
            let bad = |what: &str| Error::parse(path, lineno, format!("bad {what}: {value:?}"));
            match key {
                "model" => cfg.model = value.to_string(),
                "step_dist" => cfg.step_dist = value.to_string(),
                "automaton" => cfg.automaton = Some(value.to_string()),
                "output_dir" => cfg.output_dir = value.to_string(),
                "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
                "steps" => cfg.steps = value.parse().map_err(|_| bad("steps"))?,
                "replicas" => cfg.replicas = value.parse().map_err(|_| bad("replicas"))?,
                "grid" => cfg.grid = GridSpec::parse(value)?,
                "sphere_depth" => {
                    cfg.sphere_depth = value.parse().map_err(|_| bad("sphere_depth"))?
                }
                "cylinder_depth" => {
                    cfg.cylinder_depth = value.parse().map_err(|_| bad("cylinder_depth"))?
                }
                "horizon" => cfg.horizon = value.parse().map_err(|_| bad("horizon"))?,
                "shadow_radius" => {
                    cfg.shadow_radius = value.parse().map_err(|_| bad("shadow_radius"))?
                }
                "gibbs_apexes" => {
                    cfg.gibbs_apexes = value.parse().map_err(|_| bad("gibbs_apexes"))?
                }
                "gibbs_depth" => cfg.gibbs_depth = value.parse().map_err(|_| bad("gibbs_depth"))?,
                "stationarity_depth" => {
                    cfg.stationarity_depth =
                        value.parse().map_err(|_| bad("stationarity_depth"))?
                }
                "mc_walks" => cfg.mc_walks = value.parse().map_err(|_| bad("mc_walks"))?,
                "mc_buffer" => cfg.mc_buffer = value.parse().map_err(|_| bad("mc_buffer"))?,
                "hitting_n" => cfg.hitting_n = value.parse().map_err(|_| bad("hitting_n"))?,
                "hitting_walks" => {
                    cfg.hitting_walks = value.parse().map_err(|_| bad("hitting_walks"))?
                }
                "hitting_a" => {
                    cfg.hitting_a = value
                        .split(',')
                        .map(|s| s.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("hitting_a"))?;
                }
                "step_cap" => cfg.step_cap = value.parse().map_err(|_| bad("step_cap"))?,
                "confine_a" => cfg.confine_a = value.parse().map_err(|_| bad("confine_a"))?,
                "confine_nmax" => {
                    cfg.confine_nmax = value.parse().map_err(|_| bad("confine_nmax"))?
                }
                "calib_walks" => cfg.calib_walks = value.parse().map_err(|_| bad("calib_walks"))?,
                "calib_steps" => cfg.calib_steps = value.parse().map_err(|_| bad("calib_steps"))?,
                "budget" => cfg.budget = value.parse().map_err(|_| bad("budget"))?,
                other => {
                    return Err(Error::parse(path, lineno, format!("unknown key {other:?}")))
                }
            }
        }
        if cfg.steps == 0 || cfg.replicas == 0 || cfg.budget == 0 {
            return Err(Error::parse(path, 0, "budgets must be positive"));
        }
        Ok(cfg)
    }

    pub fn load(path: &str) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| greenwalk_core::error::Error::Io { path: path.into(), source: e })?;
        Self::parse(&text, path)
    }

    /// Canonical serialization; `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model = {}", self.model);
        let _ = writeln!(s, "step_dist = {}", self.step_dist);
        if let Some(a) = &self.automaton {
            let _ = writeln!(s, "automaton = {a}");
        }
        let _ = writeln!(s, "output_dir = {}", self.output_dir);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "replicas = {}", self.replicas);
        let _ = writeln!(s, "grid = {}", self.grid);
        let _ = writeln!(s, "sphere_depth = {}", self.sphere_depth);
        let _ = writeln!(s, "cylinder_depth = {}", self.cylinder_depth);
        let _ = writeln!(s, "horizon = {}", self.horizon);
        let _ = writeln!(s, "shadow_radius = {}", self.shadow_radius);
        let _ = writeln!(s, "gibbs_apexes = {}", self.gibbs_apexes);
        let _ = writeln!(s, "gibbs_depth = {}", self.gibbs_depth);
        let _ = writeln!(s, "stationarity_depth = {}", self.stationarity_depth);
        let _ = writeln!(s, "mc_walks = {}", self.mc_walks);
        let _ = writeln!(s, "mc_buffer = {}", self.mc_buffer);
        let _ = writeln!(s, "hitting_n = {}", self.hitting_n);
        let _ = writeln!(s, "hitting_walks = {}", self.hitting_walks);
        let hit_a: Vec<String> = self.hitting_a.iter().map(|a| a.to_string()).collect();
        let _ = writeln!(s, "hitting_a = {}", hit_a.join(","));
        let _ = writeln!(s, "step_cap = {}", self.step_cap);
        let _ = writeln!(s, "confine_a = {}", self.confine_a);
        let _ = writeln!(s, "confine_nmax = {}", self.confine_nmax);
        let _ = writeln!(s, "calib_walks = {}", self.calib_walks);
        let _ = writeln!(s, "calib_steps = {}", self.calib_steps);
        let _ = writeln!(s, "budget = {}", self.budget);
        s
    }

    /// FNV-1a hash of the canonical serialization, for the manifest.
    /// The output directory is excluded: it addresses the artifacts but is
    /// not part of the experiment's identity.
    pub fn hash(&self) -> u64 {
        let filtered: String = self
            .to_text()
            .lines()
            .filter(|l| !l.starts_with("output_dir"))
            .collect::<Vec<_>>()
            .join("\n");
        fnv1a(filtered.as_bytes())
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
