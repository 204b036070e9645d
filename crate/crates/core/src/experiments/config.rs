//! Flat `key = value` experiment configuration.
//!
//! Every key has a default; a file or the command line only lists what it
//! changes. Unknown and repeated keys are rejected, and all values are checked
//! before any computation starts, including the stability of every `ω_S`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::bath::{ModelParams, SpectralDensityParams};
use crate::darwinism::fraction_grid;
use crate::error::{Error, Result};
use crate::memory::{default_ensemble, ProbePair};

pub const KEYS: &[&str] = &[
    "n_osc",
    "omega0",
    "omega_r",
    "kappa",
    "squeezing_r",
    "omega_s",
    "omega_s_min",
    "omega_s_max",
    "omega_s_points",
    "t_max",
    "dt",
    "redundancy_dt",
    "delta",
    "fraction_step",
    "n_samples",
    "master_seed",
    "probe_pairs",
    "output_dir",
];

const SWEEP_KEYS: [&str; 3] = ["omega_s_min", "omega_s_max", "omega_s_points"];

/// Which members of the default probe ensemble enter `𝒩`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeSelection {
    All,
    Labels(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_osc: usize,
    pub omega0: f64,
    pub omega_r: f64,
    pub kappa: f64,
    pub squeezing_r: f64,
    pub omega_s: Vec<f64>,
    pub t_max: f64,
    pub dt: f64,
    pub redundancy_dt: f64,
    pub delta: f64,
    pub fraction_step: f64,
    pub n_samples: usize,
    pub master_seed: u64,
    pub probe_pairs: ProbeSelection,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_osc: 300,
            omega0: 0.3,
            omega_r: 0.7,
            kappa: 0.05,
            squeezing_r: 10.0,
            omega_s: vec![0.5],
            t_max: 150.0,
            dt: 0.1,
            redundancy_dt: 1.0,
            delta: 0.05,
            fraction_step: 0.02,
            n_samples: 25,
            master_seed: 1,
            probe_pairs: ProbeSelection::All,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Splits config text into `(key, value)` entries in file order.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config("line", format!("line {} is not `key = value`: {raw:?}", lineno + 1)));
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(Error::config(key, format!("unknown key on line {}", lineno + 1)));
        }
        if out.iter().any(|(k, _)| k == key) {
            return Err(Error::config(key, format!("repeated on line {}", lineno + 1)));
        }
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

fn number(field: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::config(field, format!("expected a finite number, got {value:?}")))
}

fn count(field: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| Error::config(field, format!("expected a non-negative integer, got {value:?}")))
}

fn number_list(field: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| number(field, v.trim())).collect()
}

/// `n` evenly spaced points from `lo` to `hi`, both included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// The grid `0, step, 2·step, ..., t_max`; `t_max` must be a multiple of `step`.
pub fn time_grid(t_max: f64, step: f64, field: &str) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::config(field, format!("must be positive, got {step}")));
    }
    if !(t_max >= 0.0) {
        return Err(Error::config("t_max", format!("must be non-negative, got {t_max}")));
    }
    let n = (t_max / step).round();
    if (n * step - t_max).abs() > 1e-9 * t_max.max(1.0) {
        return Err(Error::config(field, format!("t_max = {t_max} is not a multiple of {step}")));
    }
    Ok((0..=n as usize).map(|i| i as f64 * step).collect())
}

impl ExperimentConfig {
    /// Parses and validates a config file's contents.
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_sources(text, &[])
    }

    /// Parses a config file and applies command-line overrides on top of it.
    /// Setting `omega_s` replaces a range given by `omega_s_min/max/points`, and
    /// the other way round.
    pub fn from_sources(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut entries: BTreeMap<String, String> = parse_entries(text)?.into_iter().collect();
        let mut seen = Vec::new();
        for (key, value) in overrides {
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::config(key, "unknown key"));
            }
            if seen.contains(key) {
                return Err(Error::config(key, "repeated on the command line"));
            }
            seen.push(key.clone());
            if key == "omega_s" {
                entries.retain(|k, _| !SWEEP_KEYS.contains(&k.as_str()));
            } else if SWEEP_KEYS.contains(&key.as_str()) {
                entries.remove("omega_s");
            }
            entries.insert(key.clone(), value.clone());
        }
        let cfg = Self::from_map(&entries)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_map(entries: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let get = |k: &str| entries.get(k).map(String::as_str);
        if let Some(v) = get("n_osc") {
            cfg.n_osc = count("n_osc", v)?;
        }
        for (key, slot) in [
            ("omega0", &mut cfg.omega0),
            ("omega_r", &mut cfg.omega_r),
            ("kappa", &mut cfg.kappa),
            ("squeezing_r", &mut cfg.squeezing_r),
            ("t_max", &mut cfg.t_max),
            ("dt", &mut cfg.dt),
            ("redundancy_dt", &mut cfg.redundancy_dt),
            ("delta", &mut cfg.delta),
            ("fraction_step", &mut cfg.fraction_step),
        ] {
            if let Some(v) = get(key) {
                *slot = number(key, v)?;
            }
        }
        if let Some(v) = get("n_samples") {
            cfg.n_samples = count("n_samples", v)?;
        }
        if let Some(v) = get("master_seed") {
            cfg.master_seed = v
                .parse()
                .map_err(|_| Error::config("master_seed", format!("expected an unsigned integer, got {v:?}")))?;
        }
        if let Some(v) = get("output_dir") {
            cfg.output_dir = PathBuf::from(v);
        }
        if let Some(v) = get("probe_pairs") {
            cfg.probe_pairs = if v == "all" {
                ProbeSelection::All
            } else {
                ProbeSelection::Labels(v.split(',').map(|s| s.trim().to_string()).collect())
            };
        }
        let range: Vec<Option<&str>> = SWEEP_KEYS.iter().map(|k| get(k)).collect();
        match (get("omega_s"), range.iter().any(Option::is_some)) {
            (Some(_), true) => {
                return Err(Error::config("omega_s", "give either a list or omega_s_min/max/points, not both"));
            }
            (Some(v), false) => cfg.omega_s = number_list("omega_s", v)?,
            (None, true) => {
                let [lo, hi, n] = [range[0], range[1], range[2]];
                let (Some(lo), Some(hi), Some(n)) = (lo, hi, n) else {
                    return Err(Error::config(
                        "omega_s_points",
                        "a range needs all of omega_s_min, omega_s_max and omega_s_points",
                    ));
                };
                let (lo, hi, n) = (number("omega_s_min", lo)?, number("omega_s_max", hi)?, count("omega_s_points", n)?);
                if n == 0 {
                    return Err(Error::config("omega_s_points", "must be at least 1"));
                }
                if n > 1 && hi <= lo {
                    return Err(Error::config("omega_s_max", format!("must exceed omega_s_min = {lo}")));
                }
                cfg.omega_s = linspace(lo, hi, n);
            }
            (None, false) => {}
        }
        Ok(cfg)
    }

    pub fn spectral(&self) -> Result<SpectralDensityParams> {
        SpectralDensityParams::new(self.kappa, self.omega0, self.omega_r)
    }

    /// Model at one system frequency; instability is reported against `omega_s`.
    pub fn model(&self, omega_s: f64) -> Result<ModelParams> {
        ModelParams::new(omega_s, self.squeezing_r, self.spectral()?, self.n_osc).map_err(|e| match e {
            Error::Unstable { min_eigenvalue } => Error::config(
                "omega_s",
                format!(
                    "omega_s = {omega_s} is unstable at kappa = {} (potential minimum eigenvalue {min_eigenvalue:e})",
                    self.kappa
                ),
            ),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_osc == 0 {
            return Err(Error::config("n_osc", "must be at least 1"));
        }
        self.spectral()?;
        if self.omega_s.is_empty() {
            return Err(Error::config("omega_s", "no system frequency given"));
        }
        if self.omega_s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("omega_s", "frequencies must be strictly increasing"));
        }
        self.times()?;
        self.redundancy_times()?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("delta", format!("must lie in (0, 1), got {}", self.delta)));
        }
        fraction_grid(self.fraction_step)?;
        if self.n_samples == 0 {
            return Err(Error::config("n_samples", "must be at least 1"));
        }
        self.probe_ensemble(self.omega_s[0])?;
        for &w in &self.omega_s {
            self.model(w)?;
        }
        Ok(())
    }

    /// Grid on which fidelities are sampled.
    pub fn times(&self) -> Result<Vec<f64>> {
        time_grid(self.t_max, self.dt, "dt")
    }

    /// The same span at half the step, used to check that `𝒩` is resolved.
    pub fn half_step_times(&self) -> Result<Vec<f64>> {
        time_grid(self.t_max, self.dt / 2.0, "dt")
    }

    /// Grid on which `f_δ(t)` is evaluated.
    pub fn redundancy_times(&self) -> Result<Vec<f64>> {
        time_grid(self.t_max, self.redundancy_dt, "redundancy_dt")
    }

    pub fn fractions(&self) -> Result<Vec<f64>> {
        fraction_grid(self.fraction_step)
    }

    pub fn probe_ensemble(&self, omega_s: f64) -> Result<Vec<ProbePair>> {
        let all = default_ensemble(omega_s);
        match &self.probe_pairs {
            ProbeSelection::All => Ok(all),
            ProbeSelection::Labels(labels) => {
                if labels.is_empty() {
                    return Err(Error::config("probe_pairs", "the probe ensemble is empty"));
                }
                labels
                    .iter()
                    .map(|l| {
                        all.iter()
                            .find(|p| &p.label == l)
                            .cloned()
                            .ok_or_else(|| Error::config("probe_pairs", format!("no probe pair named {l:?}")))
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(e: Error) -> String {
        match e {
            Error::Config { field, .. } => field,
            other => panic!("expected a config error, got {other}"),
        }
    }

    fn small(extra: &str) -> String {
        format!("n_osc = 20\nt_max = 10\ndt = 0.5\nredundancy_dt = 1\n{extra}")
    }

    #[test]
    fn defaults_are_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_comments_lists_and_ranges() {
        let text = "# header\nkappa = 0.02   # inline\n\nomega_s_min = 0.2\nomega_s_max = 0.8\nomega_s_points = 4\n";
        let cfg = ExperimentConfig::parse(&small(text)).unwrap();
        assert_eq!(cfg.kappa, 0.02);
        assert_eq!(cfg.omega_s.len(), 4);
        assert_eq!(cfg.omega_s[0], 0.2);
        assert_eq!(cfg.omega_s[3], 0.8);
        assert!((cfg.omega_s[1] - 0.4).abs() < 1e-15);

        let cfg = ExperimentConfig::parse(&small("omega_s = 0.3, 0.7,1.0\nprobe_pairs = coherent-x-1, squeezed-axis-0.5")).unwrap();
        assert_eq!(cfg.omega_s, vec![0.3, 0.7, 1.0]);
        assert_eq!(cfg.probe_ensemble(0.3).unwrap().len(), 2);
        assert_eq!(cfg.times().unwrap().len(), 21);
        assert_eq!(cfg.redundancy_times().unwrap().len(), 11);
        assert_eq!(cfg.half_step_times().unwrap().len(), 41);
    }

    #[test]
    fn each_rejection_names_its_field() {
        let cases = [
            ("bogus = 1", "bogus"),
            ("kappa = 0.1\nkappa = 0.2", "kappa"),
            ("omega0 = 0.7\nomega_r = 0.3", "omega_r"),
            ("delta = 1.0", "delta"),
            ("delta = 0", "delta"),
            ("omega_s = 0.5, 0.4", "omega_s"),
            ("omega_s = 0.02", "omega_s"),
            ("dt = 0.3", "dt"),
            ("redundancy_dt = 3", "redundancy_dt"),
            ("fraction_step = 0.3", "fraction_step"),
            ("n_samples = 0", "n_samples"),
            ("n_osc = 0", "n_osc"),
            ("kappa = abc", "kappa"),
            ("probe_pairs = nope", "probe_pairs"),
            ("omega_s = 0.5\nomega_s_min = 0.3", "omega_s"),
            ("omega_s_min = 0.3", "omega_s_points"),
            ("omega_s_min = 0.8\nomega_s_max = 0.3\nomega_s_points = 3", "omega_s_max"),
            ("master_seed = -1", "master_seed"),
            ("no equals sign", "line"),
        ];
        for (text, field) in cases {
            let err = ExperimentConfig::parse(&small(text)).unwrap_err();
            assert_eq!(field_of(err), field, "case {text:?}");
        }
    }

    #[test]
    fn unstable_frequency_is_named() {
        let err = ExperimentConfig::parse(&small("kappa = 0.1\nomega_s = 0.05, 0.5")).unwrap_err();
        assert!(err.to_string().contains("omega_s = 0.05"), "{err}");
    }

    #[test]
    fn overrides_replace_file_values() {
        let text = small("omega_s_min = 0.2\nomega_s_max = 0.8\nomega_s_points = 4");
        let ov = vec![("omega_s".to_string(), "0.45".to_string()), ("master_seed".to_string(), "9".to_string())];
        let cfg = ExperimentConfig::from_sources(&text, &ov).unwrap();
        assert_eq!(cfg.omega_s, vec![0.45]);
        assert_eq!(cfg.master_seed, 9);

        let ov = vec![("omega_s_points".to_string(), "2".to_string())];
        let err = ExperimentConfig::from_sources(&small("omega_s = 0.5"), &ov).unwrap_err();
        assert_eq!(field_of(err), "omega_s_points");

        let ov = vec![("nope".to_string(), "1".to_string())];
        assert_eq!(field_of(ExperimentConfig::from_sources("", &ov).unwrap_err()), "nope");
    }

    #[test]
    fn grids() {
        assert_eq!(linspace(1.0, 2.0, 1), vec![1.0]);
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        assert_eq!(time_grid(0.0, 0.1, "dt").unwrap(), vec![0.0]);
        let g = time_grid(150.0, 0.1, "dt").unwrap();
        assert_eq!(g.len(), 1501);
        assert_eq!(*g.last().unwrap(), 150.0);
    }
}
