//! Flat `key = value` run configuration with namespaced keys and presets.
//!
//! Namespaces: `problem.*` (what is approximated), `greedy.*` (offline
//! loop), `metric.*`, `train.*` and `out.*`. A `preset = NAME` line applies
//! one of the built-in experiment setups before the remaining keys.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;
use std::path::{Path, PathBuf};

use crate::backend::{AnalyticFamily, AnalyticL2, BoundaryData, CdConfig, ErrorNorm, GalerkinCd, LinearMap, ProblemBackend, SpatialGrid};
use crate::domain::ParameterDomain;
use crate::error::{Error, Result};
use crate::field::Interpolation;
use crate::greedy::{MetricMode, OfflineConfig, TrainingMode};

pub const PRESETS: [&str; 4] = ["test1", "test2", "test3", "test4"];

/// Ordered key/value pairs; later assignments win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

const KNOWN: &[&str] = &[
    "problem.family",
    "problem.lower",
    "problem.upper",
    "problem.grid",
    "problem.norm",
    "problem.xi1",
    "problem.xi2",
    "problem.cells",
    "problem.degree",
    "problem.boundary",
    "greedy.n",
    "greedy.tol",
    "greedy.seed",
    "greedy.random_start",
    "greedy.max_samples",
    "greedy.stagnation",
    "metric.mode",
    "metric.delta",
    "metric.interpolation",
    "train.mode",
    "train.n",
    "train.q_min",
    "train.q_max",
    "out.dir",
    "out.snapshots",
];

impl RunConfig {
    /// Defaults shared by all presets.
    pub fn new() -> Self {
        let mut c = Self::default();
        for (k, v) in [
            ("problem.family", "f1"),
            ("problem.lower", "-0.5,-0.5"),
            ("problem.upper", "0.5,0.5"),
            ("problem.grid", "75"),
            ("problem.norm", "linf"),
            ("greedy.n", "20"),
            ("greedy.tol", "1e-4"),
            ("greedy.seed", "0"),
            ("greedy.random_start", "false"),
            ("greedy.max_samples", "5000"),
            ("greedy.stagnation", "3"),
            ("metric.mode", "anisotropic"),
            ("metric.interpolation", "auto"),
            ("train.mode", "fixed"),
            ("train.n", "75"),
            ("train.q_min", "200"),
            ("train.q_max", "4000"),
            ("out.dir", "out"),
            ("out.snapshots", "true"),
        ] {
            c.values.insert(k.into(), v.into());
        }
        c
    }

    pub fn preset(name: &str) -> Result<Self> {
        let mut c = Self::new();
        let pairs: &[(&str, &str)] = match name {
            "test1" => &[("problem.family", "f1"), ("greedy.n", "20")],
            "test2" => &[("problem.family", "f2"), ("greedy.n", "5")],
            "test3" => &[("problem.family", "f3"), ("greedy.n", "10")],
            "test4" => &[
                ("problem.family", "cd"),
                ("problem.norm", "l2"),
                ("problem.cells", "80"),
                ("problem.degree", "1"),
                ("problem.boundary", "sawtooth"),
                ("greedy.n", "20"),
                ("train.n", "41"),
            ],
            other => return Err(Error::Config(format!("unknown preset `{other}` (known: {})", PRESETS.join(", ")))),
        };
        for (k, v) in pairs {
            c.values.insert((*k).into(), (*v).into());
        }
        if name == "test4" {
            c.values.insert("problem.lower".into(), format!("-2.5,{}", -FRAC_PI_4));
            c.values.insert("problem.upper".into(), format!("0,{FRAC_PI_4}"));
        }
        c.values.insert("preset".into(), name.into());
        Ok(c)
    }

    /// Applies one assignment. `preset` resets everything to that preset.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        if key == "preset" {
            *self = Self::preset(value)?;
            return Ok(());
        }
        if !KNOWN.contains(&key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.values.insert(key.into(), value.into());
        Ok(())
    }

    /// Parses `key=value` (as given to `--set`).
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{pair}`")))?;
        self.set(k, v)
    }

    /// Applies a config text: one `key = value` per line, `#` comments.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.set_pair(line).map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut c = Self::new();
        c.apply_text(&text)?;
        Ok(c)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// All pairs in key order, as written to output headers.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Canonical text form that [`RunConfig::apply_text`] reads back.
    pub fn to_text(&self) -> String {
        self.pairs().filter(|(k, _)| *k != "preset").map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.required(key)?;
        v.parse().map_err(|_| Error::Config(format!("cannot parse `{v}` for `{key}`")))
    }

    fn list(&self, key: &str) -> Result<Vec<f64>> {
        self.required(key)?
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Config(format!("cannot parse `{s}` in `{key}`"))))
            .collect()
    }

    pub fn family(&self) -> Result<String> {
        Ok(self.required("problem.family")?.to_string())
    }

    pub fn domain(&self) -> Result<ParameterDomain> {
        ParameterDomain::new(self.list("problem.lower")?, self.list("problem.upper")?)
    }

    pub fn seed(&self) -> Result<u64> {
        self.parse("greedy.seed")
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        Ok(PathBuf::from(self.required("out.dir")?))
    }

    pub fn build_backend(&self) -> Result<ProblemBackend> {
        let family = self.family()?;
        let norm_key = self.required("problem.norm")?;
        let norm = ErrorNorm::parse(norm_key).ok_or_else(|| Error::Config(format!("unknown norm `{norm_key}`")))?;
        if family == "cd" {
            let mut cd = CdConfig { norm, ..CdConfig::default() };
            if self.get("problem.cells").is_some() {
                cd.cells = self.parse("problem.cells")?;
            }
            if self.get("problem.degree").is_some() {
                cd.degree = self.parse("problem.degree")?;
            }
            if let Some(b) = self.get("problem.boundary") {
                cd.boundary = BoundaryData::parse(b).ok_or_else(|| Error::Config(format!("unknown boundary data `{b}`")))?;
            }
            return Ok(ProblemBackend::GalerkinCd(GalerkinCd::new(cd, &self.domain()?)?));
        }
        let mut fam = AnalyticFamily::parse(&family)?;
        if let AnalyticFamily::F3Xi { xi1, xi2 } = &mut fam {
            for (key, map) in [("problem.xi1", xi1), ("problem.xi2", xi2)] {
                if self.get(key).is_some() {
                    let c = self.list(key)?;
                    if c.len() != 2 {
                        return Err(Error::Config(format!("`{key}` takes two coefficients")));
                    }
                    *map = LinearMap::new(c[0], c[1]);
                }
            }
        }
        let n: usize = self.parse("problem.grid")?;
        let grid = SpatialGrid::square(n, -1.0, 1.0)?;
        if self.domain()?.dim() != 2 {
            return Err(Error::Config("the analytic families take two parameters".into()));
        }
        Ok(ProblemBackend::AnalyticL2(AnalyticL2::new(fam, grid, norm)?))
    }

    pub fn offline_config(&self) -> Result<OfflineConfig> {
        let domain = self.domain()?;
        let mut oc = OfflineConfig::new(domain, self.parse("greedy.n")?, self.parse("greedy.tol")?);
        oc.training = match self.required("train.mode")? {
            "fixed" => TrainingMode::Fixed { n: self.parse("train.n")? },
            "adaptive" => TrainingMode::Adaptive { q_min: self.parse("train.q_min")?, q_max: self.parse("train.q_max")? },
            other => return Err(Error::Config(format!("unknown training mode `{other}`"))),
        };
        let m = self.required("metric.mode")?;
        oc.metric = MetricMode::parse(m).ok_or_else(|| Error::Config(format!("unknown metric mode `{m}`")))?;
        if self.get("metric.delta").is_some() {
            oc.delta = Some(self.list("metric.delta")?);
        }
        let i = self.required("metric.interpolation")?;
        oc.interpolation = Interpolation::parse(i).ok_or_else(|| Error::Config(format!("unknown interpolation `{i}`")))?;
        oc.seed = self.seed()?;
        oc.random_start = self.parse("greedy.random_start")?;
        oc.max_samples = self.parse("greedy.max_samples")?;
        oc.stagnation_window = self.parse("greedy.stagnation")?;
        oc.keep_snapshots = self.parse("out.snapshots")?;
        oc.problem = self
            .pairs()
            .filter_map(|(k, v)| k.strip_prefix("problem.").map(|k| (k.to_string(), v.to_string())))
            .collect();
        oc.validate()?;
        Ok(oc)
    }

    /// Checks every key parses; returns the first problem found.
    pub fn validate(&self) -> Result<()> {
        self.build_backend()?;
        self.offline_config()?;
        self.out_dir()?;
        Ok(())
    }
}

/// Rebuilds the truth backend recorded in a bundle's problem map.
pub fn backend_from_problem(problem: &BTreeMap<String, String>) -> Result<ProblemBackend> {
    let mut c = RunConfig::new();
    for (k, v) in problem {
        c.set(&format!("problem.{k}"), v)?;
    }
    c.build_backend()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for p in PRESETS {
            let c = RunConfig::preset(p).unwrap();
            c.offline_config().unwrap();
        }
        let c = RunConfig::preset("test1").unwrap();
        assert!(c.build_backend().is_ok());
    }

    #[test]
    fn text_round_trip_and_overrides() {
        let mut c = RunConfig::preset("test2").unwrap();
        c.apply_text("# comment\ngreedy.tol = 1e-3\nmetric.mode=isotropic\n").unwrap();
        assert_eq!(c.get("greedy.tol"), Some("1e-3"));
        let mut d = RunConfig::new();
        d.apply_text(&c.to_text()).unwrap();
        assert_eq!(d.offline_config().unwrap().metric, MetricMode::Isotropic);
        assert!(c.set_pair("nope.key=1").is_err());
        assert!(c.set_pair("greedy.tol").is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let mut c = RunConfig::new();
        c.set("greedy.tol", "2").unwrap();
        assert!(matches!(c.offline_config(), Err(Error::Config(_))));
        let mut c = RunConfig::new();
        c.set("train.n", "1").unwrap();
        assert!(c.offline_config().is_err());
        let mut c = RunConfig::new();
        c.set("train.mode", "adaptive").unwrap();
        c.set("train.q_min", "10").unwrap();
        c.set("train.q_max", "5").unwrap();
        assert!(c.offline_config().is_err());
    }

    #[test]
    fn problem_map_rebuilds_backend() {
        let oc = RunConfig::preset("test3").unwrap().offline_config().unwrap();
        let b = backend_from_problem(&oc.problem).unwrap();
        assert!(!b.is_galerkin());
    }
}
