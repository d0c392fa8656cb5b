//! Flat `key = value` sweep configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimators::PgdOptions;
use crate::model::{make_hadamard_basis, make_random_basis, GroundTruthModel};

/// The bottom-edge softness grid, ascending.
pub const ALPHA_GRID: [f64; 7] = [0.0, 0.05, 0.1, 0.3, 1.0, 3.0, f64::INFINITY];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Hadamard,
    Random,
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hadamard" => Ok(BasisKind::Hadamard),
            "random" => Ok(BasisKind::Random),
            other => Err(Error::Config(format!("unknown basis {other:?}, expected hadamard or random"))),
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisKind::Hadamard => "hadamard",
            BasisKind::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub basis: BasisKind,
    pub d: usize,
    pub m: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl ModelSpec {
    pub fn build(&self) -> Result<GroundTruthModel> {
        let basis = match self.basis {
            BasisKind::Hadamard => make_hadamard_basis(self.d, self.m)?,
            BasisKind::Random => make_random_basis(self.d, self.m, self.seed)?,
        };
        GroundTruthModel::new(basis, self.sigma)
    }
}

/// A coordinate on the supervision/softness plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanePoint {
    pub alpha: f64,
    pub n_sup: usize,
}

impl PlanePoint {
    pub fn new(alpha: f64, n_sup: usize) -> Self {
        Self { alpha, n_sup }
    }
}

impl fmt::Display for PlanePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "alpha={}, n_sup={}", self.alpha, self.n_sup)
    }
}

/// Named trajectories across the plane.
pub fn trajectory_presets(name: &str, n: usize) -> Result<Vec<PlanePoint>> {
    let scaled = |i: usize, steps: usize| ((i * n) as f64 / steps as f64).round() as usize;
    match name {
        "bottom-edge" => Ok(ALPHA_GRID.iter().map(|&a| PlanePoint::new(a, n)).collect()),
        "right-edge" => Ok((0..=8).map(|i| PlanePoint::new(f64::INFINITY, scaled(i, 8))).collect()),
        "diagonal" => {
            let steps = ALPHA_GRID.len() - 1;
            Ok(ALPHA_GRID
                .iter()
                .enumerate()
                .map(|(i, &a)| PlanePoint::new(a, scaled(i, steps)))
                .collect())
        }
        other => Err(Error::Config(format!(
            "unknown trajectory {other:?}, expected bottom-edge, right-edge or diagonal"
        ))),
    }
}

/// How the out-of-sample column is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutOfSampleMode {
    Analytic,
    /// Eigen-coordinate formula for PCA fits; other fits fall back to analytic.
    Spectral,
    MonteCarlo,
}

impl FromStr for OutOfSampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(OutOfSampleMode::Analytic),
            "spectral" => Ok(OutOfSampleMode::Spectral),
            "monte-carlo" => Ok(OutOfSampleMode::MonteCarlo),
            other => Err(Error::Config(format!(
                "unknown e_out mode {other:?}, expected analytic, spectral or monte-carlo"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotMode {
    Curves,
    Heatmap,
}

impl FromStr for PlotMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "curves" => Ok(PlotMode::Curves),
            "heatmap" => Ok(PlotMode::Heatmap),
            other => Err(Error::Config(format!("unknown plot mode {other:?}, expected curves or heatmap"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub model: ModelSpec,
    pub n: usize,
    pub trajectory: Vec<PlanePoint>,
    /// Target dimensions for unsupervised points; supervised points always use `m`.
    pub k_values: Vec<usize>,
    pub p_min: usize,
    pub p_max: usize,
    pub num_orders: usize,
    pub pgd: PgdOptions,
    pub e_out: OutOfSampleMode,
    pub n_test: usize,
    pub plot: PlotMode,
    pub out_csv: Option<PathBuf>,
    pub out_plot: Option<PathBuf>,
}

impl SweepConfig {
    /// Pure regression (alpha = inf, n_sup = n) over p = m..=d, Hadamard
    /// basis, 10 orders. `"".parse()` yields this with d=64, m=20, n=32,
    /// sigma=0.5.
    pub fn fully_supervised(d: usize, m: usize, n: usize, sigma: f64) -> Self {
        Self {
            model: ModelSpec { basis: BasisKind::Hadamard, d, m, sigma, seed: 0 },
            n,
            trajectory: vec![PlanePoint::new(f64::INFINITY, n)],
            k_values: vec![m],
            p_min: m,
            p_max: d,
            num_orders: 10,
            pgd: PgdOptions::default(),
            e_out: OutOfSampleMode::Analytic,
            n_test: 1000,
            plot: PlotMode::Curves,
            out_csv: None,
            out_plot: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }

    pub fn p_values(&self) -> std::ops::RangeInclusive<usize> {
        self.p_min..=self.p_max
    }

    pub fn validate(&self) -> Result<()> {
        let ModelSpec { d, m, sigma, .. } = self.model;
        if m == 0 || m >= d {
            return Err(Error::Config(format!("need 0 < m < d, got m={m}, d={d}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        if self.n < 2 {
            return Err(Error::Config(format!("n must be >= 2, got {}", self.n)));
        }
        if self.trajectory.is_empty() {
            return Err(Error::Config("trajectory is empty".into()));
        }
        if self.num_orders == 0 {
            return Err(Error::Config("num_orders must be >= 1".into()));
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::Config("k_values must be a non-empty list of positive integers".into()));
        }
        if self.p_min == 0 || self.p_min > self.p_max || self.p_max > d {
            return Err(Error::Config(format!(
                "p range {}..={} must lie within 1..={d}",
                self.p_min, self.p_max
            )));
        }
        if self.e_out == OutOfSampleMode::MonteCarlo && self.n_test == 0 {
            return Err(Error::Config("n_test must be >= 1 for monte-carlo e_out".into()));
        }
        self.pgd.validate().map_err(|e| Error::Config(e.to_string()))?;
        for pt in &self.trajectory {
            if pt.alpha.is_nan() || pt.alpha < 0.0 {
                return Err(Error::Config(format!("alpha must be >= 0 or inf, got {}", pt.alpha)));
            }
            if pt.n_sup > self.n {
                return Err(Error::Config(format!("n_sup={} exceeds n={}", pt.n_sup, self.n)));
            }
            let regression = pt.alpha.is_infinite() && pt.n_sup == self.n;
            if pt.n_sup > 0 && !regression && self.p_min < m {
                return Err(Error::Config(format!(
                    "constrained point ({pt}) needs p_min >= m={m}, got {}",
                    self.p_min
                )));
            }
        }
        Ok(())
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_alpha(key: &str, v: &str) -> Result<f64> {
    let a = match v {
        "inf" | "+inf" => f64::INFINITY,
        _ => parse_num::<f64>(key, v)?,
    };
    if a.is_nan() || a < 0.0 {
        return Err(Error::Config(format!("{key}: alpha must be >= 0 or inf, got {v}")));
    }
    Ok(a)
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| parse_num(key, s.trim())).collect()
}

fn parse_points(v: &str) -> Result<Vec<PlanePoint>> {
    v.split(',')
        .map(|item| {
            let (a, ns) = item.trim().split_once(':').ok_or_else(|| {
                Error::Config(format!("points: expected alpha:n_sup, got {:?}", item.trim()))
            })?;
            Ok(PlanePoint::new(parse_alpha("points", a.trim())?, parse_num("points", ns.trim())?))
        })
        .collect()
}

const KEYS: &[&str] = &[
    "basis", "d", "m", "sigma", "seed", "n", "trajectory", "points", "k_values", "p_min", "p_max",
    "num_orders", "max_iters", "rel_tol", "initial_step", "line_search_factors", "e_out", "n_test",
    "plot", "out_csv", "out_plot",
];

impl FromStr for SweepConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key {k:?}", lineno + 1)));
            }
            if kv.insert(k, v).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {k:?}", lineno + 1)));
            }
        }
        if kv.contains_key("trajectory") && kv.contains_key("points") {
            return Err(Error::Config("give either trajectory or points, not both".into()));
        }

        let get = |k: &str| kv.get(k).copied();
        let basis = get("basis").map(str::parse).transpose()?.unwrap_or(BasisKind::Hadamard);
        let d = get("d").map(|v| parse_num("d", v)).transpose()?.unwrap_or(64);
        let m = get("m").map(|v| parse_num("m", v)).transpose()?.unwrap_or(20);
        let sigma = get("sigma").map(|v| parse_num("sigma", v)).transpose()?.unwrap_or(0.5);
        let seed = get("seed").map(|v| parse_num("seed", v)).transpose()?.unwrap_or(0);
        let n = get("n").map(|v| parse_num("n", v)).transpose()?.unwrap_or(32);

        let mut cfg = SweepConfig::fully_supervised(d, m, n, sigma);
        cfg.model.basis = basis;
        cfg.model.seed = seed;
        if let Some(name) = get("trajectory") {
            cfg.trajectory = trajectory_presets(name, n)?;
        }
        if let Some(v) = get("points") {
            cfg.trajectory = parse_points(v)?;
        }
        if let Some(v) = get("k_values") {
            cfg.k_values = parse_list("k_values", v)?;
        }
        let k_min = cfg.k_values.iter().copied().min().unwrap_or(m);
        cfg.p_min = get("p_min").map(|v| parse_num("p_min", v)).transpose()?.unwrap_or(m.min(k_min));
        cfg.p_max = get("p_max").map(|v| parse_num("p_max", v)).transpose()?.unwrap_or(d);
        if let Some(v) = get("num_orders") {
            cfg.num_orders = parse_num("num_orders", v)?;
        }
        if let Some(v) = get("max_iters") {
            cfg.pgd.max_iters = parse_num("max_iters", v)?;
        }
        if let Some(v) = get("rel_tol") {
            cfg.pgd.rel_tol = parse_num("rel_tol", v)?;
        }
        if let Some(v) = get("initial_step") {
            cfg.pgd.initial_step = Some(parse_num("initial_step", v)?);
        }
        if let Some(v) = get("line_search_factors") {
            cfg.pgd.line_search_factors = parse_list("line_search_factors", v)?;
        }
        if let Some(v) = get("e_out") {
            cfg.e_out = v.parse()?;
        }
        if let Some(v) = get("n_test") {
            cfg.n_test = parse_num("n_test", v)?;
        }
        if let Some(v) = get("plot") {
            cfg.plot = v.parse()?;
        }
        cfg.out_csv = get("out_csv").map(PathBuf::from);
        cfg.out_plot = get("out_plot").map(PathBuf::from);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_their_definitions() {
        let right: Vec<usize> = trajectory_presets("right-edge", 32).unwrap().iter().map(|p| p.n_sup).collect();
        assert_eq!(right, vec![0, 4, 8, 12, 16, 20, 24, 28, 32]);
        assert!(trajectory_presets("right-edge", 32).unwrap().iter().all(|p| p.alpha.is_infinite()));

        let diag = trajectory_presets("diagonal", 32).unwrap();
        assert_eq!(diag.first(), Some(&PlanePoint::new(0.0, 0)));
        assert_eq!(diag.last(), Some(&PlanePoint::new(f64::INFINITY, 32)));
        assert!(diag.windows(2).all(|w| w[0].alpha < w[1].alpha && w[0].n_sup <= w[1].n_sup));

        let bottom = trajectory_presets("bottom-edge", 32).unwrap();
        assert!(bottom.contains(&PlanePoint::new(0.0, 32)));
        assert!(bottom.contains(&PlanePoint::new(f64::INFINITY, 32)));
        assert!(bottom.iter().any(|p| p.alpha > 0.0 && p.alpha.is_finite()));

        assert!(matches!(trajectory_presets("left-edge", 32), Err(Error::Config(_))));
    }

    #[test]
    fn parses_full_config() {
        let cfg: SweepConfig = "
            # mixed supervision
            basis = random
            d = 16
            m = 4
            sigma = 0.25
            seed = 9
            n = 8
            points = 0:0, 0.5:4, inf:8
            k_values = 2, 4
            p_min = 4
            p_max = 12
            num_orders = 3
            max_iters = 50
            rel_tol = 1e-6
            initial_step = 0.01
            line_search_factors = 0.25, 1, 4
            e_out = monte-carlo
            n_test = 200
            plot = heatmap
            out_csv = a.csv
        "
        .parse()
        .unwrap();
        assert_eq!(cfg.model.basis, BasisKind::Random);
        assert_eq!(cfg.trajectory[2], PlanePoint::new(f64::INFINITY, 8));
        assert_eq!(cfg.k_values, vec![2, 4]);
        assert_eq!(cfg.pgd.initial_step, Some(0.01));
        assert_eq!(cfg.pgd.line_search_factors, vec![0.25, 1.0, 4.0]);
        assert_eq!(cfg.e_out, OutOfSampleMode::MonteCarlo);
        assert_eq!(cfg.plot, PlotMode::Heatmap);
        assert_eq!(cfg.out_csv, Some(PathBuf::from("a.csv")));
        assert_eq!(cfg.out_plot, None);
    }

    #[test]
    fn defaults_are_the_regression_setup() {
        let cfg: SweepConfig = "".parse().unwrap();
        assert_eq!(cfg, SweepConfig::fully_supervised(64, 20, 32, 0.5));
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            "colour = red",
            "d = 8\nd = 16",
            "d = sixty",
            "points = 0.5",
            "points = -1:4",
            "points = 1:40",
            "trajectory = right-edge\npoints = inf:32",
            "m = 64",
            "p_max = 65",
            "points = 0.5:32\np_min = 4",
            "basis = fourier",
            "line_search_factors = 0.5, 2",
            "e_out = bootstrap",
            "no equals sign",
        ] {
            assert!(matches!(bad.parse::<SweepConfig>(), Err(Error::Config(_))), "{bad}");
        }
    }
}
