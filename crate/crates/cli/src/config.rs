//! Experiment configuration: defaults, presets and flat `key=value` files.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use chansim::matching::Protocol;
use chansim::{CommonRandomness, DistributionSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    RsCoding,
    ErsCoding,
    Matching,
    Wz,
    GrsExample,
    Bounds,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::RsCoding,
        Experiment::ErsCoding,
        Experiment::Matching,
        Experiment::Wz,
        Experiment::GrsExample,
        Experiment::Bounds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::RsCoding => "rs-coding",
            Experiment::ErsCoding => "ers-coding",
            Experiment::Matching => "matching",
            Experiment::Wz => "wz",
            Experiment::GrsExample => "grs-example",
            Experiment::Bounds => "bounds",
        }
    }

    /// Keys accepted in addition to the common ones.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Experiment::RsCoding => &["sigma2"],
            Experiment::ErsCoding => &["sigma2", "n", "points"],
            Experiment::Matching => &["party_a", "party_b", "proposal", "n", "protocols", "bins"],
            Experiment::Wz => &["sigma2", "n", "log2v", "n_joint", "feedback", "eps", "bound_samples", "sigma2_xprime"],
            Experiment::GrsExample => &["k"],
            Experiment::Bounds => &["party_a", "party_b", "proposal", "n", "eps", "y_lo", "y_hi", "y_points"],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| anyhow!("unknown experiment {s:?}"))
    }
}

const COMMON_KEYS: &[&str] = &["experiment", "seed", "trials", "out", "strict", "threads"];

/// Named configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig2,
    Fig3,
    Fig4,
    Fig5Desk,
    Fig5Paper,
    Grs,
}

impl Preset {
    pub const ALL: [Preset; 6] = [Preset::Fig2, Preset::Fig3, Preset::Fig4, Preset::Fig5Desk, Preset::Fig5Paper, Preset::Grs];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5Desk => "fig5-desk",
            Preset::Fig5Paper => "fig5-paper",
            Preset::Grs => "grs",
        }
    }

    pub fn experiment(self) -> Experiment {
        match self {
            Preset::Fig2 => Experiment::RsCoding,
            Preset::Fig3 => Experiment::ErsCoding,
            Preset::Fig4 => Experiment::Matching,
            Preset::Fig5Desk | Preset::Fig5Paper => Experiment::Wz,
            Preset::Grs => Experiment::GrsExample,
        }
    }

    /// Runs far beyond desk scale (many hours).
    pub fn long_running(self) -> bool {
        self == Preset::Fig5Paper
    }

    /// Settings layered over the experiment defaults.
    pub fn settings(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Preset::Fig2 => &[("trials", "100000"), ("sigma2", "0.01,0.03,0.05,0.1")],
            Preset::Fig3 => &[
                ("trials", "100000"),
                ("points", "1e-4:32,5e-4:32,1e-3:32,5e-3:32,1e-3:2,1e-3:8,1e-3:128,1e-3:512"),
            ],
            Preset::Fig4 => &[
                ("trials", "20000"),
                ("party_a", "kind=gaussian mean=0.5 var=0.7"),
                ("party_b", "kind=gaussian mean=-0.5 var=0.7"),
                ("proposal", "kind=gaussian mean=0 var=100"),
                ("n", "1,2,4,8,16,32,64,128,256,512,1024"),
                ("bins", "20"),
            ],
            Preset::Fig5Desk => &[
                ("trials", "10000"),
                ("n", "4096"),
                ("sigma2", "0.02,0.05"),
                ("log2v", "6,7,8,9,10,11,12"),
                ("n_joint", "1,2,4"),
                ("feedback", "off,on"),
            ],
            Preset::Fig5Paper => &[
                ("trials", "1000000"),
                ("n", "1048576"),
                ("sigma2", "0.005"),
                ("log2v", "9.6,10.6,11.6,12.6"),
                ("n_joint", "4"),
                ("feedback", "off"),
            ],
            Preset::Grs => &[("trials", "100000"), ("k", "1,4,16")],
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| anyhow!("unknown preset {s:?}"))
    }
}

/// Full description of one run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Canonical hex form of the shared-randomness key.
    pub seed: String,
    pub trials: u64,
    pub out: Option<PathBuf>,
    pub strict: bool,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
    /// Target variance (coding) or decoder-side distortion target (wz).
    pub sigma2: Vec<f64>,
    pub n: Vec<u64>,
    /// Explicit `(sigma2, N)` pairs; overrides the `sigma2 x n` product.
    pub points: Vec<(f64, u64)>,
    pub k: Vec<u32>,
    pub party_a: DistributionSpec,
    pub party_b: DistributionSpec,
    pub proposal: DistributionSpec,
    pub protocols: Vec<Protocol>,
    pub bins: usize,
    pub log2v: Vec<f64>,
    pub n_joint: Vec<u32>,
    pub feedback: Vec<bool>,
    pub eps: f64,
    pub bound_samples: u64,
    pub sigma2_xprime: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub y_points: usize,
}

fn gaussian(mean: f64, var: f64) -> DistributionSpec {
    DistributionSpec::Gaussian { mean, var }
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    let out: Vec<T> = v
        .split(',')
        .map(|s| s.trim().parse::<T>().map_err(|e| anyhow!("{key}: bad item {s:?}: {e}")))
        .collect::<Result<_>>()?;
    if out.is_empty() {
        bail!("{key}: empty list");
    }
    Ok(out)
}

fn scalar<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.trim().parse::<T>().map_err(|e| anyhow!("{key}: bad value {v:?}: {e}"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        other => bail!("{key}: expected on/off, got {other:?}"),
    }
}

impl ExperimentConfig {
    /// Defaults of each experiment: the desk-scale versions of the shipped
    /// configurations.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut c = ExperimentConfig {
            experiment,
            seed: "0xa1".into(),
            trials: 10_000,
            out: None,
            strict: false,
            threads: None,
            sigma2: vec![0.01, 0.03, 0.05, 0.1],
            n: vec![32],
            points: Vec::new(),
            k: vec![1, 4, 16],
            party_a: gaussian(0.5, 0.7),
            party_b: gaussian(-0.5, 0.7),
            proposal: gaussian(0.0, 100.0),
            protocols: Protocol::ALL.to_vec(),
            bins: 20,
            log2v: vec![6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0],
            n_joint: vec![1, 2, 4],
            feedback: vec![false, true],
            eps: 0.0,
            bound_samples: 100_000,
            sigma2_xprime: 0.01,
            y_lo: -3.0,
            y_hi: 3.0,
            y_points: 61,
        };
        match experiment {
            Experiment::ErsCoding => c.sigma2 = vec![1e-3],
            Experiment::Matching | Experiment::Bounds => c.n = vec![1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024],
            Experiment::Wz => {
                c.sigma2 = vec![0.02, 0.05];
                c.n = vec![4096];
            }
            _ => {}
        }
        c
    }

    pub fn from_preset(preset: Preset) -> Result<Self> {
        let mut c = Self::defaults(preset.experiment());
        for (k, v) in preset.settings() {
            c.set(k, v)?;
        }
        Ok(c)
    }

    /// Applies one setting; keys that the experiment does not use are
    /// rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        if !COMMON_KEYS.contains(&key) && !self.experiment.keys().contains(&key) {
            bail!("unknown key {key:?} for experiment {}", self.experiment);
        }
        match key {
            "experiment" => {
                let e: Experiment = value.trim().parse()?;
                if e != self.experiment {
                    bail!("config is for {e}, but the run is {}", self.experiment);
                }
            }
            "seed" => self.seed = CommonRandomness::from_hex(value)?.seed_hex(),
            "trials" => self.trials = scalar(key, value)?,
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "strict" => self.strict = parse_bool(key, value)?,
            "threads" => self.threads = Some(scalar(key, value)?),
            "sigma2" => self.sigma2 = list(key, value)?,
            "n" => self.n = list(key, value)?,
            "points" => {
                self.points = value
                    .split(',')
                    .map(|p| {
                        let (s, n) = p.split_once(':').ok_or_else(|| anyhow!("points: expected sigma2:N, got {p:?}"))?;
                        Ok((scalar::<f64>(key, s)?, scalar::<u64>(key, n)?))
                    })
                    .collect::<Result<_>>()?
            }
            "k" => self.k = list(key, value)?,
            "party_a" => self.party_a = value.trim().parse()?,
            "party_b" => self.party_b = value.trim().parse()?,
            "proposal" => self.proposal = value.trim().parse()?,
            "protocols" => self.protocols = list(key, value)?,
            "bins" => self.bins = scalar(key, value)?,
            "log2v" => self.log2v = list(key, value)?,
            "n_joint" => self.n_joint = list(key, value)?,
            "feedback" => self.feedback = value.split(',').map(|v| parse_bool(key, v)).collect::<Result<_>>()?,
            "eps" => self.eps = scalar(key, value)?,
            "bound_samples" => self.bound_samples = scalar(key, value)?,
            "sigma2_xprime" => self.sigma2_xprime = scalar(key, value)?,
            "y_lo" => self.y_lo = scalar(key, value)?,
            "y_hi" => self.y_hi = scalar(key, value)?,
            "y_points" => self.y_points = scalar(key, value)?,
            _ => unreachable!("key lists and match arms disagree on {key:?}"),
        }
        Ok(())
    }

    /// Applies a flat `key=value` text, one setting per line. Blank lines and
    /// lines starting with `#` are skipped. Values may contain `=`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key=value", i + 1))?;
            self.set(k, v).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn randomness(&self) -> Result<CommonRandomness> {
        Ok(CommonRandomness::from_hex(&self.seed)?)
    }

    /// `(sigma2, N)` grid of the ERS coding experiment.
    pub fn coding_points(&self) -> Vec<(f64, u64)> {
        if !self.points.is_empty() {
            return self.points.clone();
        }
        self.sigma2.iter().flat_map(|s| self.n.iter().map(move |n| (*s, *n))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 2 {
            bail!("trials must be at least 2");
        }
        if self.threads == Some(0) {
            bail!("threads must be at least 1");
        }
        if self.sigma2.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            bail!("sigma2 values must be positive");
        }
        if self.n.contains(&0) {
            bail!("N values must be at least 1");
        }
        match self.experiment {
            Experiment::Wz if self.trials < 1000 => bail!("wz needs at least 1000 trials"),
            Experiment::Wz if self.bound_samples < 1000 => bail!("bound_samples must be at least 1000"),
            Experiment::Bounds if self.y_points < 2 || !(self.y_lo < self.y_hi) => bail!("need y_lo < y_hi and y_points >= 2"),
            Experiment::GrsExample if self.k.contains(&0) => bail!("k values must be at least 1"),
            Experiment::Wz if self.feedback.contains(&true) => {
                let n_ok = self.n.iter().all(|n| n.is_power_of_two());
                let v_ok = self.log2v.iter().all(|v| v.fract() == 0.0 && *v >= 0.0);
                let fits = self.log2v.iter().all(|v| self.n.iter().all(|n| 2f64.powf(*v) <= *n as f64));
                if !(n_ok && v_ok && fits) {
                    bail!("feedback needs power-of-two N, integral log2v and V <= N");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// The effective settings in `key=value` form; reading it back with
    /// [`ExperimentConfig::apply_text`] reproduces the run.
    pub fn to_text(&self) -> String {
        fn join<T: fmt::Display>(v: &[T]) -> String {
            v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
        }
        let mut lines = vec![
            format!("experiment={}", self.experiment),
            format!("seed={}", self.seed),
            format!("trials={}", self.trials),
        ];
        for key in self.experiment.keys() {
            let v = match *key {
                "sigma2" => join(&self.sigma2),
                "n" => join(&self.n),
                "points" if self.points.is_empty() => continue,
                "points" => self.points.iter().map(|(s, n)| format!("{s}:{n}")).collect::<Vec<_>>().join(","),
                "k" => join(&self.k),
                "party_a" => self.party_a.to_string(),
                "party_b" => self.party_b.to_string(),
                "proposal" => self.proposal.to_string(),
                "protocols" => join(&self.protocols),
                "bins" => self.bins.to_string(),
                "log2v" => join(&self.log2v),
                "n_joint" => join(&self.n_joint),
                "feedback" => self.feedback.iter().map(|b| if *b { "on" } else { "off" }).collect::<Vec<_>>().join(","),
                "eps" => self.eps.to_string(),
                "bound_samples" => self.bound_samples.to_string(),
                "sigma2_xprime" => self.sigma2_xprime.to_string(),
                "y_lo" => self.y_lo.to_string(),
                "y_hi" => self.y_hi.to_string(),
                "y_points" => self.y_points.to_string(),
                _ => continue,
            };
            lines.push(format!("{key}={v}"));
        }
        lines.join("\n") + "\n"
    }
}
