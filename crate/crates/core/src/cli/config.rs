//! Flat `key = value` run configuration.
//!
//! ```text
//! # LQ benchmark at one resolution
//! problem = lq1d
//! dx = 0.024
//! mode = quadrature
//! ```
//!
//! Omitted keys take the defaults of the selected problem: for `lq1d`,
//! `dt = dx^(2/3) / 2`, `eps = sqrt(dt)` and `theta = 1`; for
//! `congestion2d`, `dt = dx^(2/3)`, `eps = sqrt(dt) / 2` and `theta = 0.5`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::hjb::ControlSettings;
use crate::mfg::{FixedPointConfig, SolveConfig};
use crate::problem::CongestionParams;
use crate::transport::{Deposit, IntegralMode};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}`: cannot parse `{value}` ({reason})")]
    Value { key: String, value: String, reason: String },
    #[error("key `{key}`: {reason}")]
    Constraint { key: String, reason: String },
}

fn constraint(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Constraint {
        key: key.to_string(),
        reason: reason.into(),
    }
}

/// Parameters of the 1D linear-quadratic benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct LqParams {
    pub horizon: f64,
    pub mean: f64,
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
    pub control_radius: f64,
}

impl Default for LqParams {
    fn default() -> Self {
        LqParams {
            horizon: 0.25,
            mean: 0.1,
            variance: 0.105,
            lower: -2.0,
            upper: 2.0,
            control_radius: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemConfig {
    Lq1d(LqParams),
    Congestion2d(CongestionParams),
}

impl ProblemConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemConfig::Lq1d(_) => "lq1d",
            ProblemConfig::Congestion2d(_) => "congestion2d",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ProblemConfig::Lq1d(_) => 1,
            ProblemConfig::Congestion2d(_) => 2,
        }
    }
}

/// Which LG integral approximation to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Quadrature,
    AreaWeighted,
}

impl Variant {
    pub fn tag(&self) -> &'static str {
        match self {
            Variant::Quadrature => "quadrature",
            Variant::AreaWeighted => "area_weighted",
        }
    }

    fn parse(key: &str, s: &str) -> Result<Self, ConfigError> {
        match s {
            "quadrature" => Ok(Variant::Quadrature),
            "area_weighted" => Ok(Variant::AreaWeighted),
            _ => Err(ConfigError::Value {
                key: key.to_string(),
                value: s.to_string(),
                reason: "expected `quadrature` or `area_weighted`".into(),
            }),
        }
    }
}

/// Fully resolved run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    /// Required by `solve`; `sweep` uses `dx_list`.
    pub dx: Option<f64>,
    /// Overrides of the problem's schedule.
    pub dt: Option<f64>,
    pub eps: Option<f64>,
    pub mode: Variant,
    /// Quadrature subcells per axis; `None` means the default for `dx`.
    pub subdivisions: Option<usize>,
    pub deposit: Deposit,
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub controls: usize,
    pub refine: bool,
    pub output: PathBuf,
    pub dx_list: Vec<f64>,
    pub variants: Vec<Variant>,
}

const KEYS: &[&str] = &[
    "problem",
    "dx",
    "dt",
    "eps",
    "mode",
    "subdivisions",
    "deposit",
    "theta",
    "tol",
    "max_iter",
    "controls",
    "refine",
    "output",
    "dx_list",
    "variants",
    "horizon",
    "control_radius",
    "mean",
    "variance",
    "lower",
    "upper",
    "gamma",
    "target",
    "cap",
    "sigma",
    "ell",
    "start",
    "start_sigma",
];

const LQ_ONLY: &[&str] = &["mean", "variance", "lower", "upper"];
const CONGESTION_ONLY: &[&str] = &["gamma", "target", "cap", "sigma", "ell", "start", "start_sigma"];

/// The benchmark refinement sequence.
pub const BENCHMARK_DX: [f64; 4] = [4.8e-2, 2.4e-2, 1.2e-2, 6.0e-3];

struct Entries(BTreeMap<String, String>);

impl Entries {
    fn take(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.take(key).map(|v| parse_f64(key, &v)).transpose()
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.take(key)
            .map(|v| {
                v.parse::<usize>().map_err(|e| ConfigError::Value {
                    key: key.to_string(),
                    value: v.clone(),
                    reason: e.to_string(),
                })
            })
            .transpose()
    }

    fn vec(&mut self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.take(key)
            .map(|v| v.split(',').map(|s| parse_f64(key, s.trim())).collect())
            .transpose()
    }

    fn point(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.vec(key)? {
            Some(p) if p.len() != default.len() => {
                Err(constraint(key, format!("expected {} coordinates", default.len())))
            }
            Some(p) => Ok(p),
            None => Ok(default.to_vec()),
        }
    }
}

/// Shortest round-trip text for `x`, in exponent form when very small or large.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64, ConfigError> {
    let v: f64 = s.parse().map_err(|e: std::num::ParseFloatError| ConfigError::Value {
        key: key.to_string(),
        value: s.to_string(),
        reason: e.to_string(),
    })?;
    if !v.is_finite() {
        return Err(constraint(key, "must be finite"));
    }
    Ok(v)
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(constraint(key, format!("must be positive, got {v}")))
    }
}

/// Reads and parses a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_str(&text)
}

/// Parses config text; unknown keys, duplicates and out-of-range values are
/// errors.
pub fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            text: content.to_string(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                text: content.to_string(),
            });
        }
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(ConfigError::Duplicate {
                line,
                key: key.to_string(),
            });
        }
    }
    let mut e = Entries(map);

    let problem_name = e.take("problem").ok_or(ConfigError::Missing("problem"))?;
    let problem = match problem_name.as_str() {
        "lq1d" => {
            if let Some(k) = CONGESTION_ONLY.iter().find(|k| e.0.contains_key(**k)) {
                return Err(constraint(k, "does not apply to problem lq1d"));
            }
            let d = LqParams::default();
            let p = LqParams {
                horizon: e.f64_or("horizon", d.horizon)?,
                mean: e.f64_or("mean", d.mean)?,
                variance: e.f64_or("variance", d.variance)?,
                lower: e.f64_or("lower", d.lower)?,
                upper: e.f64_or("upper", d.upper)?,
                control_radius: e.f64_or("control_radius", d.control_radius)?,
            };
            positive("horizon", p.horizon)?;
            positive("variance", p.variance)?;
            positive("control_radius", p.control_radius)?;
            if p.upper <= p.lower {
                return Err(constraint("upper", "must exceed lower"));
            }
            if !(p.mean > p.lower && p.mean < p.upper) {
                return Err(constraint("mean", "must lie inside (lower, upper)"));
            }
            ProblemConfig::Lq1d(p)
        }
        "congestion2d" => {
            if let Some(k) = LQ_ONLY.iter().find(|k| e.0.contains_key(**k)) {
                return Err(constraint(k, "does not apply to problem congestion2d"));
            }
            let d = CongestionParams::default();
            let p = CongestionParams {
                gamma: e.f64_or("gamma", d.gamma)?,
                target: e.point("target", &d.target)?,
                cap: e.f64_or("cap", d.cap)?,
                sigma: e.f64_or("sigma", d.sigma)?,
                ell: e.f64_or("ell", d.ell)?,
                start: e.point("start", &d.start)?,
                start_sigma: e.f64_or("start_sigma", d.start_sigma)?,
                horizon: e.f64_or("horizon", d.horizon)?,
                control_radius: e.f64_or("control_radius", d.control_radius)?,
            };
            if p.gamma < 0.0 {
                return Err(constraint("gamma", "must be nonnegative"));
            }
            p.validate().map_err(|err| match err {
                crate::Error::InvalidParameter { name, reason } => constraint(name, reason),
                other => constraint("problem", other.to_string()),
            })?;
            ProblemConfig::Congestion2d(p)
        }
        other => {
            return Err(ConfigError::Value {
                key: "problem".into(),
                value: other.to_string(),
                reason: "expected `lq1d` or `congestion2d`".into(),
            })
        }
    };
    let dim = problem.dim();

    let dx = e.f64("dx")?;
    let dx_list = e.vec("dx_list")?;
    if dx.is_none() && dx_list.is_none() {
        return Err(ConfigError::Missing("dx"));
    }
    if let Some(v) = dx {
        positive("dx", v)?;
    }
    if let Some(list) = &dx_list {
        for &v in list {
            positive("dx_list", v)?;
        }
    }
    let dt = e.f64("dt")?;
    let eps = e.f64("eps")?;
    if let Some(v) = dt {
        positive("dt", v)?;
    }
    if let Some(v) = eps {
        positive("eps", v)?;
    }
    let mode = match e.take("mode") {
        Some(s) => Variant::parse("mode", &s)?,
        None => Variant::AreaWeighted,
    };
    let subdivisions = e.usize("subdivisions")?;
    if subdivisions == Some(0) {
        return Err(constraint("subdivisions", "must be at least 1"));
    }
    let deposit = match e.take("deposit").as_deref() {
        None | Some("overlap") => Deposit::Overlap,
        Some("point") => Deposit::Point,
        Some(other) => {
            return Err(ConfigError::Value {
                key: "deposit".into(),
                value: other.to_string(),
                reason: "expected `overlap` or `point`".into(),
            })
        }
    };
    let default_theta = if dim == 1 { 1.0 } else { 0.5 };
    let theta = e.f64_or("theta", default_theta)?;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(constraint("theta", format!("must lie in (0, 1], got {theta}")));
    }
    let tol = e.f64_or("tol", 1e-3)?;
    positive("tol", tol)?;
    let max_iter = e.usize("max_iter")?.unwrap_or(200);
    if max_iter == 0 {
        return Err(constraint("max_iter", "must be at least 1"));
    }
    let controls = e
        .usize("controls")?
        .unwrap_or(ControlSettings::default_for_dim(dim).samples_per_side);
    if controls == 0 {
        return Err(constraint("controls", "must be at least 1"));
    }
    let refine = match e.take("refine").as_deref() {
        None | Some("true") => true,
        Some("false") => false,
        Some(other) => {
            return Err(ConfigError::Value {
                key: "refine".into(),
                value: other.to_string(),
                reason: "expected `true` or `false`".into(),
            })
        }
    };
    let output = PathBuf::from(e.take("output").unwrap_or_else(|| "output".to_string()));
    let variants = match e.take("variants") {
        Some(s) => {
            let v = s
                .split(',')
                .map(|t| Variant::parse("variants", t.trim()))
                .collect::<Result<Vec<_>, _>>()?;
            if v.is_empty() {
                return Err(constraint("variants", "must name at least one variant"));
            }
            v
        }
        None => vec![Variant::Quadrature, Variant::AreaWeighted],
    };
    debug_assert!(e.0.is_empty(), "unhandled keys: {:?}", e.0.keys());

    Ok(RunConfig {
        problem,
        dx,
        dt,
        eps,
        mode,
        subdivisions,
        deposit,
        theta,
        tol,
        max_iter,
        controls,
        refine,
        output,
        dx_list: dx_list.unwrap_or_else(|| BENCHMARK_DX.to_vec()),
        variants,
    })
}

impl RunConfig {
    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    /// `dt` for spacing `dx`: the override if set, else the problem schedule.
    pub fn dt_for(&self, dx: f64) -> f64 {
        self.dt.unwrap_or_else(|| match self.problem {
            ProblemConfig::Lq1d(_) => dx.powf(2.0 / 3.0) / 2.0,
            ProblemConfig::Congestion2d(_) => dx.powf(2.0 / 3.0),
        })
    }

    pub fn eps_for(&self, dx: f64) -> f64 {
        self.eps.unwrap_or_else(|| {
            let dt = self.dt_for(dx);
            match self.problem {
                ProblemConfig::Lq1d(_) => dt.sqrt(),
                ProblemConfig::Congestion2d(_) => dt.sqrt() / 2.0,
            }
        })
    }

    pub fn subdivisions_for(&self, dx: f64) -> usize {
        self.subdivisions
            .unwrap_or_else(|| IntegralMode::default_subdivisions(self.dim(), dx))
    }

    pub fn mode_for(&self, variant: Variant, dx: f64) -> IntegralMode {
        match variant {
            Variant::Quadrature => IntegralMode::Quadrature {
                subdivisions: self.subdivisions_for(dx),
                deposit: self.deposit,
            },
            Variant::AreaWeighted => IntegralMode::AreaWeighted,
        }
    }

    /// Discretization for one resolution and variant.
    pub fn solve_config(&self, dx: f64, variant: Variant) -> SolveConfig {
        SolveConfig {
            dx,
            dt: self.dt_for(dx),
            eps: self.eps_for(dx),
            controls: ControlSettings {
                samples_per_side: self.controls,
                refine: self.refine,
            },
            mode: self.mode_for(variant, dx),
            fixed_point: FixedPointConfig {
                damping: self.theta,
                tolerance: self.tol,
                max_iterations: self.max_iter,
            },
        }
    }

    /// Copy with every schedule default written out for `dx`.
    pub fn resolved(&self, dx: f64) -> RunConfig {
        let mut out = self.clone();
        out.dx = Some(dx);
        out.dt = Some(self.dt_for(dx));
        out.eps = Some(self.eps_for(dx));
        out.subdivisions = Some(self.subdivisions_for(dx));
        out
    }

    /// Config text that parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let list = |v: &[f64]| v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(", ");
        kv("problem", self.problem.name().to_string());
        match &self.problem {
            ProblemConfig::Lq1d(p) => {
                kv("horizon", fmt_num(p.horizon));
                kv("mean", fmt_num(p.mean));
                kv("variance", fmt_num(p.variance));
                kv("lower", fmt_num(p.lower));
                kv("upper", fmt_num(p.upper));
                kv("control_radius", fmt_num(p.control_radius));
            }
            ProblemConfig::Congestion2d(p) => {
                kv("horizon", fmt_num(p.horizon));
                kv("gamma", fmt_num(p.gamma));
                kv("target", list(&p.target));
                kv("cap", fmt_num(p.cap));
                kv("sigma", fmt_num(p.sigma));
                kv("ell", fmt_num(p.ell));
                kv("start", list(&p.start));
                kv("start_sigma", fmt_num(p.start_sigma));
                kv("control_radius", fmt_num(p.control_radius));
            }
        }
        if let Some(v) = self.dx {
            kv("dx", fmt_num(v));
        }
        if let Some(v) = self.dt {
            kv("dt", fmt_num(v));
        }
        if let Some(v) = self.eps {
            kv("eps", fmt_num(v));
        }
        kv("mode", self.mode.tag().to_string());
        if let Some(v) = self.subdivisions {
            kv("subdivisions", v.to_string());
        }
        kv("deposit", self.deposit.tag().to_string());
        kv("theta", fmt_num(self.theta));
        kv("tol", fmt_num(self.tol));
        kv("max_iter", self.max_iter.to_string());
        kv("controls", self.controls.to_string());
        kv("refine", self.refine.to_string());
        kv("output", self.output.display().to_string());
        kv("dx_list", list(&self.dx_list));
        kv(
            "variants",
            self.variants.iter().map(Variant::tag).collect::<Vec<_>>().join(", "),
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_lq_config_gets_schedule() {
        let c = parse_str("problem = lq1d\ndx = 0.024\n").unwrap();
        let s = c.solve_config(0.024, c.mode);
        let dt = 0.024f64.powf(2.0 / 3.0) / 2.0;
        assert_eq!(s.dt, dt);
        assert_eq!(s.eps, dt.sqrt());
        assert_eq!(s.fixed_point.damping, 1.0);
        assert_eq!(s.fixed_point.tolerance, 1e-3);
        assert_eq!(c.subdivisions_for(0.024), 166);
        assert_eq!(c.problem, ProblemConfig::Lq1d(LqParams::default()));
    }

    #[test]
    fn congestion_defaults() {
        let c = parse_str("problem = congestion2d\ndx = 0.05\ngamma = 3\n").unwrap();
        let s = c.solve_config(0.05, c.mode);
        let dt = 0.05f64.powf(2.0 / 3.0);
        assert_eq!(s.dt, dt);
        assert_eq!(s.eps, dt.sqrt() / 2.0);
        assert_eq!(s.fixed_point.damping, 0.5);
        assert_eq!(s.mode, IntegralMode::AreaWeighted);
        match c.problem {
            ProblemConfig::Congestion2d(p) => assert_eq!(p.gamma, 3.0),
            _ => panic!(),
        }
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = parse_str("# header\n\nproblem = lq1d   # trailing\n  dx=0.05\n").unwrap();
        assert_eq!(c.dx, Some(0.05));
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            ("problem = lq1d\ndx = 0.05\nfoo = 1\n", "foo"),
            ("problem = lq1d\ndx = 0\n", "dx"),
            ("problem = lq1d\ndx = 0.05\ntheta = 0\n", "theta"),
            ("problem = lq1d\ndx = 0.05\ntheta = 1.5\n", "theta"),
            ("problem = lq1d\ndx = abc\n", "dx"),
            ("problem = lq1d\n", "dx"),
            ("dx = 0.05\n", "problem"),
            ("problem = lq1d\ndx = 0.05\ngamma = 3\n", "gamma"),
            ("problem = lq1d\ndx = 0.05\ndx = 0.1\n", "dx"),
            ("problem = lq1d\ndx = 0.05\ntol = -1\n", "tol"),
            ("problem = lq1d\ndx = 0.05\nmode = exact\n", "mode"),
            ("problem = congestion2d\ndx = 0.05\ntarget = 1, 2, 3\n", "target"),
            ("problem = congestion2d\ndx = 0.05\nsigma = 0\n", "sigma"),
        ];
        for (text, key) in cases {
            let err = parse_str(text).unwrap_err().to_string();
            assert!(err.contains(key), "{text:?} -> {err}");
        }
        assert!(matches!(
            parse_str("problem = lq1d\ndx 0.05\n"),
            Err(ConfigError::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn missing_file() {
        let err = parse_config(Path::new("/nonexistent/run.cfg")).unwrap_err();
        assert!(matches!(err, ConfigError::Read { .. }));
        assert!(err.to_string().contains("/nonexistent/run.cfg"));
    }

    #[test]
    fn text_round_trip() {
        for text in [
            "problem = lq1d\ndx = 0.012\nmode = quadrature\ndeposit = point\n",
            "problem = congestion2d\ndx = 0.05\ngamma = 3\ntarget = 1.5, 1.25\nrefine = false\n",
            "problem = lq1d\ndx_list = 0.1, 0.05\nvariants = area_weighted\n",
        ] {
            let c = parse_str(text).unwrap();
            assert_eq!(parse_str(&c.to_text()).unwrap(), c);
            let r = c.resolved(0.05);
            assert_eq!(parse_str(&r.to_text()).unwrap(), r);
        }
    }
}
