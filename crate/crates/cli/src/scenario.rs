//! Scenario configuration: a flat, line-oriented `key = value` format with
//! `[section]` headers, chosen for diff-friendly scenario archives.
//!
//! Grammar (see README for the full key reference):
//!
//! ```text
//! # comment
//! [scenario]
//! kind = peakons            # peakons | lagrangian | closed-form
//! t0 = -3.0
//! t1 = -0.1
//!
//! [initial]                 # either explicit peakon arrays ...
//! q = -1.0, 1.0
//! p = 0.6, -0.6
//! s = 0.1, -0.1
//! # ... or an antisymmetric two-peakon case:
//! # antisym_s = 0.5
//! # antisym_p0 = ...        # optional; default: collision-centered at t0
//! # antisym_q0 = ...
//! # rescale = false
//!
//! [solver]
//! rel_tol = 1e-10           # peakon integrator
//! n = 2048                  # Lagrangian grid nodes
//! dt = 1e-3                 # fixed Lagrangian step / closed-form sampling
//! ...
//!
//! [output]
//! trajectory = true
//! invariants = true
//! circle = false
//! eulerian_times = 0.0, 1.5
//! ```
//!
//! Parsing is strict: unknown sections or keys are rejected with their path.

use std::collections::HashMap;
use std::fmt;

use m2ch_core::closed_form::normalization_residual;

#[derive(Debug)]
pub enum ScenarioError {
    Syntax { line: usize, text: String },
    UnknownKey { path: String },
    DuplicateKey { path: String },
    BadValue { path: String, detail: String },
    MissingKey { path: String },
    Inconsistent { detail: String },
    BadNormalization { residual: f64 },
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Syntax { line, text } => write!(f, "line {line}: expected `key = value` or `[section]`, got `{text}`"),
            Self::UnknownKey { path } => write!(f, "unknown key `{path}`"),
            Self::DuplicateKey { path } => write!(f, "duplicate key `{path}`"),
            Self::BadValue { path, detail } => write!(f, "bad value for `{path}`: {detail}"),
            Self::MissingKey { path } => write!(f, "missing required key `{path}`"),
            Self::Inconsistent { detail } => write!(f, "inconsistent scenario: {detail}"),
            Self::BadNormalization { residual } => write!(
                f,
                "antisym initial data violates the energy normalization (p0²+s²)(1−e^q0) = 1 \
                 by {residual:e}; set `initial.rescale = true` to rescale"
            ),
        }
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Peakons,
    Lagrangian,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Peakons { q: Vec<f64>, p: Vec<f64>, s: Vec<f64> },
    /// Antisymmetric two-peakon case with density amplitude `s`.  With
    /// `p0`/`q0` unset the run starts from the collision-centered closed form
    /// at t0.  `rescale` requests the scaling symmetry (u, ρ̄, t) → (αu, αρ̄,
    /// t/α) to restore the E = ½ normalization when (p0, q0) violate it.
    Antisym {
        s: f64,
        p0: Option<f64>,
        q0: Option<f64>,
        rescale: bool,
    },
}

/// Solver options; unused entries are ignored by kinds that do not need them.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOpts {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub sample_dt: f64,
    /// Hand the state to the Lagrangian solver when a peakon run collides.
    pub continue_lagrangian: bool,
    /// Gap, in time units, between the recorded hand-off state and the
    /// detected collision.
    pub handoff_gap: f64,
    pub n: usize,
    pub dt: f64,
    pub xi_min: f64,
    pub xi_max: f64,
    pub sample_stride: usize,
}

impl Default for SolverOpts {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.1,
            sample_dt: 0.05,
            continue_lagrangian: false,
            handoff_gap: 0.2,
            n: 2048,
            dt: 1e-3,
            xi_min: -25.0,
            xi_max: 25.0,
            sample_stride: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputOpts {
    pub trajectory: bool,
    pub invariants: bool,
    pub circle: bool,
    pub eulerian_times: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
}

impl Default for OutputOpts {
    fn default() -> Self {
        Self {
            trajectory: true,
            invariants: true,
            circle: false,
            eulerian_times: Vec::new(),
            x_min: -20.0,
            x_max: 20.0,
            nx: 801,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: Kind,
    pub t0: f64,
    pub t1: f64,
    pub initial: Initial,
    pub solver: SolverOpts,
    pub output: OutputOpts,
}

/// Raw `section.key → value` map with strict duplicate detection.
fn tokenize(text: &str) -> Result<HashMap<String, String>, ScenarioError> {
    let mut map = HashMap::new();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ScenarioError::Syntax {
                line: idx + 1,
                text: line.to_string(),
            });
        };
        let path = if section.is_empty() {
            key.trim().to_string()
        } else {
            format!("{section}.{}", key.trim())
        };
        if map.insert(path.clone(), value.trim().to_string()).is_some() {
            return Err(ScenarioError::DuplicateKey { path });
        }
    }
    Ok(map)
}

struct Reader {
    map: HashMap<String, String>,
}

impl Reader {
    fn take(&mut self, path: &str) -> Option<String> {
        self.map.remove(path)
    }

    fn f64(&mut self, path: &str) -> Result<Option<f64>, ScenarioError> {
        self.take(path)
            .map(|v| {
                v.parse::<f64>().map_err(|e| ScenarioError::BadValue {
                    path: path.to_string(),
                    detail: e.to_string(),
                })
            })
            .transpose()
    }

    fn usize(&mut self, path: &str) -> Result<Option<usize>, ScenarioError> {
        self.take(path)
            .map(|v| {
                v.parse::<usize>().map_err(|e| ScenarioError::BadValue {
                    path: path.to_string(),
                    detail: e.to_string(),
                })
            })
            .transpose()
    }

    fn bool(&mut self, path: &str) -> Result<Option<bool>, ScenarioError> {
        self.take(path)
            .map(|v| {
                v.parse::<bool>().map_err(|_| ScenarioError::BadValue {
                    path: path.to_string(),
                    detail: "expected true or false".to_string(),
                })
            })
            .transpose()
    }

    fn f64_list(&mut self, path: &str) -> Result<Option<Vec<f64>>, ScenarioError> {
        self.take(path)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<f64>().map_err(|e| ScenarioError::BadValue {
                            path: path.to_string(),
                            detail: format!("`{s}`: {e}"),
                        })
                    })
                    .collect::<Result<Vec<f64>, _>>()
            })
            .transpose()
    }
}

fn require<T>(value: Option<T>, path: &str) -> Result<T, ScenarioError> {
    value.ok_or_else(|| ScenarioError::MissingKey {
        path: path.to_string(),
    })
}

fn positive(value: f64, path: &str) -> Result<f64, ScenarioError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(ScenarioError::BadValue {
            path: path.to_string(),
            detail: format!("must be positive, got {value}"),
        })
    }
}

/// Parse and validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut r = Reader {
        map: tokenize(text)?,
    };

    let kind = match require(r.take("scenario.kind"), "scenario.kind")?.as_str() {
        "peakons" => Kind::Peakons,
        "lagrangian" => Kind::Lagrangian,
        "closed-form" => Kind::ClosedForm,
        other => {
            return Err(ScenarioError::BadValue {
                path: "scenario.kind".to_string(),
                detail: format!("`{other}` is not one of peakons | lagrangian | closed-form"),
            })
        }
    };
    let t0 = require(r.f64("scenario.t0")?, "scenario.t0")?;
    let t1 = require(r.f64("scenario.t1")?, "scenario.t1")?;

    let initial = parse_initial(&mut r, t0)?;

    let d = SolverOpts::default();
    let mut solver = SolverOpts {
        rel_tol: r.f64("solver.rel_tol")?.unwrap_or(d.rel_tol),
        abs_tol: r.f64("solver.abs_tol")?.unwrap_or(d.abs_tol),
        max_step: r.f64("solver.max_step")?.unwrap_or(d.max_step),
        sample_dt: r.f64("solver.sample_dt")?.unwrap_or(d.sample_dt),
        continue_lagrangian: false,
        handoff_gap: r.f64("solver.handoff_gap")?.unwrap_or(d.handoff_gap),
        n: r.usize("solver.n")?.unwrap_or(d.n),
        dt: r.f64("solver.dt")?.unwrap_or(d.dt),
        xi_min: r.f64("solver.xi_min")?.unwrap_or(d.xi_min),
        xi_max: r.f64("solver.xi_max")?.unwrap_or(d.xi_max),
        sample_stride: r.usize("solver.sample_stride")?.unwrap_or(d.sample_stride),
    };
    if let Some(cont) = r.take("solver.continue") {
        solver.continue_lagrangian = match cont.as_str() {
            "lagrangian" => true,
            "none" => false,
            other => {
                return Err(ScenarioError::BadValue {
                    path: "solver.continue".to_string(),
                    detail: format!("`{other}` is not one of none | lagrangian"),
                })
            }
        };
    }
    for (path, value) in [
        ("solver.rel_tol", solver.rel_tol),
        ("solver.abs_tol", solver.abs_tol),
        ("solver.max_step", solver.max_step),
        ("solver.sample_dt", solver.sample_dt),
        ("solver.handoff_gap", solver.handoff_gap),
        ("solver.dt", solver.dt),
    ] {
        positive(value, path)?;
    }
    if solver.n < 2 {
        return Err(ScenarioError::BadValue {
            path: "solver.n".to_string(),
            detail: "grid needs at least 2 nodes".to_string(),
        });
    }
    if !(solver.xi_max > solver.xi_min) {
        return Err(ScenarioError::BadValue {
            path: "solver.xi_max".to_string(),
            detail: "must exceed solver.xi_min".to_string(),
        });
    }

    let od = OutputOpts::default();
    let output = OutputOpts {
        trajectory: r.bool("output.trajectory")?.unwrap_or(od.trajectory),
        invariants: r.bool("output.invariants")?.unwrap_or(od.invariants),
        circle: r.bool("output.circle")?.unwrap_or(od.circle),
        eulerian_times: r.f64_list("output.eulerian_times")?.unwrap_or_default(),
        x_min: r.f64("output.x_min")?.unwrap_or(od.x_min),
        x_max: r.f64("output.x_max")?.unwrap_or(od.x_max),
        nx: r.usize("output.nx")?.unwrap_or(od.nx),
    };
    if !(output.x_max > output.x_min) || output.nx < 2 {
        return Err(ScenarioError::BadValue {
            path: "output.x_max".to_string(),
            detail: "Eulerian grid needs x_max > x_min and nx >= 2".to_string(),
        });
    }

    if let Some(path) = r.map.keys().min().cloned() {
        return Err(ScenarioError::UnknownKey { path });
    }

    if kind == Kind::ClosedForm && !matches!(initial, Initial::Antisym { .. }) {
        return Err(ScenarioError::Inconsistent {
            detail: "kind = closed-form requires antisym initial data".to_string(),
        });
    }

    Ok(Scenario {
        kind,
        t0,
        t1,
        initial,
        solver,
        output,
    })
}

fn parse_initial(r: &mut Reader, _t0: f64) -> Result<Initial, ScenarioError> {
    let has_arrays = r.map.contains_key("initial.q");
    let has_antisym = r.map.contains_key("initial.antisym_s");
    match (has_arrays, has_antisym) {
        (true, true) => Err(ScenarioError::Inconsistent {
            detail: "give either peakon arrays (q, p, s) or antisym_* keys, not both".to_string(),
        }),
        (false, false) => Err(ScenarioError::MissingKey {
            path: "initial.q (or initial.antisym_s)".to_string(),
        }),
        (true, false) => {
            let q = require(r.f64_list("initial.q")?, "initial.q")?;
            let p = require(r.f64_list("initial.p")?, "initial.p")?;
            let s = require(r.f64_list("initial.s")?, "initial.s")?;
            if q.len() != p.len() || q.len() != s.len() || q.is_empty() {
                return Err(ScenarioError::Inconsistent {
                    detail: format!(
                        "q, p, s must be equal-length nonempty lists (got {}, {}, {})",
                        q.len(),
                        p.len(),
                        s.len()
                    ),
                });
            }
            if q.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(ScenarioError::BadValue {
                    path: "initial.q".to_string(),
                    detail: "positions must be strictly increasing".to_string(),
                });
            }
            Ok(Initial::Peakons { q, p, s })
        }
        (false, true) => {
            let s = require(r.f64("initial.antisym_s")?, "initial.antisym_s")?;
            if s < 0.0 {
                return Err(ScenarioError::BadValue {
                    path: "initial.antisym_s".to_string(),
                    detail: "density amplitude must be nonnegative".to_string(),
                });
            }
            let p0 = r.f64("initial.antisym_p0")?;
            let q0 = r.f64("initial.antisym_q0")?;
            let rescale = r.bool("initial.rescale")?.unwrap_or(false);
            if p0.is_some() != q0.is_some() {
                return Err(ScenarioError::Inconsistent {
                    detail: "antisym_p0 and antisym_q0 must be given together".to_string(),
                });
            }
            if let (Some(p0v), Some(q0v)) = (p0, q0) {
                if !(q0v < 0.0) {
                    return Err(ScenarioError::BadValue {
                        path: "initial.antisym_q0".to_string(),
                        detail: "gap must be negative".to_string(),
                    });
                }
                let residual = normalization_residual(s, p0v, q0v);
                if residual.abs() > 1e-12 && !rescale {
                    return Err(ScenarioError::BadNormalization { residual });
                }
            }
            Ok(Initial::Antisym { s, p0, q0, rescale })
        }
    }
}

/// Apply the scaling symmetry to antisym data that misses the E = ½
/// normalization: (p0, s) → α(p0, s) with α = ((p0²+s²)(1−e^{q0}))^{−1/2};
/// time windows of the caller must be divided by α accordingly.  Returns the
/// rescaled (s, p0) and α.
pub fn rescale_antisym(s: f64, p0: f64, q0: f64) -> (f64, f64, f64) {
    let val = -(p0 * p0 + s * s) * f64::exp_m1(q0);
    let alpha = 1.0 / val.sqrt();
    (alpha * s, alpha * p0, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
[scenario]
kind = peakons
t0 = 0.0
t1 = 2.0

[initial]
q = 0.0
p = 1.0
s = 0.0
";

    #[test]
    fn minimal_single_peakon() {
        let sc = parse_scenario(MINIMAL).unwrap();
        assert_eq!(sc.kind, Kind::Peakons);
        assert_eq!(
            sc.initial,
            Initial::Peakons {
                q: vec![0.0],
                p: vec![1.0],
                s: vec![0.0]
            }
        );
        assert_eq!(sc.solver, SolverOpts::default());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = format!("# header\n\n{MINIMAL}\n# trailing");
        assert!(parse_scenario(&text).is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let text = format!("{MINIMAL}\n[solver]\nfancy = 1\n");
        match parse_scenario(&text) {
            Err(ScenarioError::UnknownKey { path }) => assert_eq!(path, "solver.fancy"),
            other => panic!("expected unknown-key error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[initial]\nq = 1.0\n");
        assert!(matches!(
            parse_scenario(&text),
            Err(ScenarioError::DuplicateKey { .. })
        ));
    }

    #[test]
    fn bad_normalization_reports_residual() {
        let text = "\
[scenario]
kind = closed-form
t0 = -1.0
t1 = 1.0

[initial]
antisym_s = 1.5
antisym_p0 = 1.0
antisym_q0 = -1.0
";
        // (1+2.25)(1−e^{−1}) − 1 ≈ 1.0543918
        match parse_scenario(text) {
            Err(ScenarioError::BadNormalization { residual }) => {
                assert!((residual - 1.0543918).abs() < 1e-6, "residual {residual}");
            }
            other => panic!("expected normalization error, got {other:?}"),
        }
    }

    #[test]
    fn rescale_restores_normalization() {
        let (s, p0, _alpha) = rescale_antisym(1.5, 1.0, -1.0);
        let res = normalization_residual(s, p0, -1.0);
        assert!(res.abs() < 1e-12, "residual after rescale {res}");

        let text = "\
[scenario]
kind = closed-form
t0 = -1.0
t1 = 1.0

[initial]
antisym_s = 1.5
antisym_p0 = 1.0
antisym_q0 = -1.0
rescale = true
";
        assert!(parse_scenario(text).is_ok());
    }

    #[test]
    fn disordered_positions_are_rejected() {
        let text = MINIMAL.replace("q = 0.0", "q = 1.0, 0.5").replace(
            "p = 1.0",
            "p = 1.0, 1.0",
        );
        let text = text.replace("s = 0.0", "s = 0.0, 0.0");
        assert!(matches!(
            parse_scenario(&text),
            Err(ScenarioError::BadValue { .. })
        ));
    }

    #[test]
    fn missing_time_window_is_reported() {
        let text = MINIMAL.replace("t1 = 2.0", "");
        assert!(matches!(
            parse_scenario(&text),
            Err(ScenarioError::MissingKey { .. })
        ));
    }
}
