//! Flat key-value run configuration with section headers.
//!
//! ```text
//! [run]
//! mode = solve              # geometry-only | solve | p-sweep | n-sweep | limit-sweep
//!
//! [geometry]
//! base = triangle           # triangle | square | pentagon | hexagon
//! alpha = 3.0
//! n = 2                     # single level; sweeps use `levels`
//! levels = 1,2,3,4
//!
//! [problem]
//! p = 3.0
//! p_schedule = 4,8,16,32,64,128,256
//! q = 2.0
//! k = 0.5
//! f = 60*max(0, 1 - 16*((x1-0.82)^2 + (x2-0.18)^2))
//! g = 0.3*x1
//! phi1 = -inf
//! phi2 = inf
//! lipschitz = 0.3
//! limit_mode = capped-q     # or lipschitz (limit-sweep only)
//!
//! [mesh]
//! h_max = 0.06
//! grading = 2.0
//! angle_floor = 20.0
//!
//! [solver]
//! tol = 1e-8
//! max_iters = 50000
//! viol_tol = 1e-4
//! penalty_schedule = 1e2,1e3,1e4,1e5,1e6,1e7
//! p_continuation = 8,16,32,64,128,256
//! bb_stabilization = true
//!
//! [diagnostics]
//! integrability_eps = 0.05,0.1
//! vi_probes = 50
//!
//! [output]
//! dir = out
//! ```
//!
//! Field expressions use the arithmetic grammar of `kochfem::expr`. Every
//! value is validated against the preconditions of the target operation
//! before any compute starts; errors carry the line number.

use kochfem::expr::Expr;
use kochfem::fem::ProblemInstance;
use kochfem::geometry::{regular_polygon, IfsParams};
use kochfem::mesh::MeshOptions;
use kochfem::point::Point2;
use kochfem::solver::SolverConfig;
use kochfem::sweeps::LimitMode;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, &self.field) {
            (Some(l), Some(k)) => write!(f, "line {l}, field '{k}': {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "field '{k}': {}", self.message),
            (None, None) => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        field: Some(field.to_string()),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    GeometryOnly,
    Solve,
    PSweep,
    NSweep,
    LimitSweep,
}

impl RunMode {
    pub fn label(self) -> &'static str {
        match self {
            RunMode::GeometryOnly => "geometry-only",
            RunMode::Solve => "solve",
            RunMode::PSweep => "p-sweep",
            RunMode::NSweep => "n-sweep",
            RunMode::LimitSweep => "limit-sweep",
        }
    }
}

pub struct RunConfig {
    pub mode: RunMode,
    pub base: Vec<Point2>,
    pub base_name: String,
    pub ifs: IfsParams,
    pub level: u32,
    pub levels: Vec<u32>,
    pub instance: ProblemInstance,
    pub p_schedule: Vec<f64>,
    pub limit_mode: LimitMode,
    pub mesh: MeshOptions,
    pub solver: SolverConfig,
    pub integrability_eps: Vec<f64>,
    pub vi_probes: usize,
    pub out_dir: String,
}

struct Raw {
    /// (section.key) -> (line, value)
    entries: BTreeMap<String, (usize, String)>,
    used: std::cell::RefCell<std::collections::BTreeSet<String>>,
}

impl Raw {
    fn parse(text: &str) -> Result<Raw, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            let line = match line.find('#') {
                Some(pos) => &line[..pos],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(ConfigError {
                    line: Some(ln),
                    field: None,
                    message: "unterminated section header".into(),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError {
                    line: Some(ln),
                    field: None,
                    message: format!("expected 'key = value', got '{line}'"),
                });
            };
            let full = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            if entries.contains_key(&full) {
                return Err(ConfigError {
                    line: Some(ln),
                    field: Some(full),
                    message: "duplicate key".into(),
                });
            }
            entries.insert(full, (ln, value.trim().to_string()));
        }
        Ok(Raw {
            entries,
            used: Default::default(),
        })
    }

    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.used.borrow_mut().insert(key.to_string());
        self.entries.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some((ln, v)) => v
                .parse()
                .map_err(|e| err(Some(ln), key, format!("bad number: {e}"))),
        }
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some((ln, v)) => v
                .parse()
                .map_err(|e| err(Some(ln), key, format!("bad integer: {e}"))),
        }
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some((ln, v)) => match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(err(
                    Some(ln),
                    key,
                    format!("expected boolean, got '{other}'"),
                )),
            },
        }
    }

    fn string(&self, key: &str, default: &str) -> String {
        self.get(key)
            .map(|(_, v)| v.to_string())
            .unwrap_or_else(|| default.to_string())
    }

    fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some((ln, v)) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|e| err(Some(ln), key, format!("bad number '{s}': {e}")))
                })
                .collect(),
        }
    }

    fn expr(&self, key: &str, default: &str) -> Result<Arc<Expr>, ConfigError> {
        let (ln, text) = match self.get(key) {
            Some((ln, v)) => (Some(ln), v.to_string()),
            None => (None, default.to_string()),
        };
        // Allow optional surrounding quotes.
        let text = text.trim().trim_matches('"');
        Expr::parse(text)
            .map(Arc::new)
            .map_err(|e| err(ln, key, e.to_string()))
    }

    fn unknown_keys(&self) -> Vec<(usize, String)> {
        let used = self.used.borrow();
        self.entries
            .iter()
            .filter(|(k, _)| !used.contains(*k))
            .map(|(k, (ln, _))| (*ln, k.clone()))
            .collect()
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw = Raw::parse(text)?;

    let mode = match raw.string("run.mode", "solve").as_str() {
        "geometry-only" => RunMode::GeometryOnly,
        "solve" => RunMode::Solve,
        "p-sweep" => RunMode::PSweep,
        "n-sweep" => RunMode::NSweep,
        "limit-sweep" => RunMode::LimitSweep,
        other => {
            let ln = raw.get("run.mode").map(|(l, _)| l);
            return Err(err(ln, "run.mode", format!("unknown mode '{other}'")));
        }
    };

    let base_name = raw.string("geometry.base", "triangle");
    let base = match base_name.as_str() {
        "triangle" => regular_polygon(3),
        "square" => regular_polygon(4),
        "pentagon" => regular_polygon(5),
        "hexagon" => regular_polygon(6),
        other => {
            let ln = raw.get("geometry.base").map(|(l, _)| l);
            return Err(err(
                ln,
                "geometry.base",
                format!("unknown base polygon '{other}' (use triangle|square|pentagon|hexagon)"),
            ));
        }
    };
    let alpha = raw.f64("geometry.alpha", 3.0)?;
    let ifs = IfsParams::new(alpha).map_err(|e| {
        err(
            raw.get("geometry.alpha").map(|(l, _)| l),
            "geometry.alpha",
            e.to_string(),
        )
    })?;
    let level = raw.usize("geometry.n", 2)? as u32;
    let levels: Vec<u32> = raw
        .f64_list("geometry.levels", &[1.0, 2.0, 3.0, 4.0])?
        .into_iter()
        .map(|x| x as u32)
        .collect();
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(err(
            raw.get("geometry.levels").map(|(l, _)| l),
            "geometry.levels",
            "levels must be strictly increasing",
        ));
    }

    let p = raw.f64("problem.p", 3.0)?;
    let q = raw.f64("problem.q", 2.0)?;
    let k = raw.f64("problem.k", 0.5)?;
    let lip = raw.f64("problem.lipschitz", 0.3)?;
    let f = raw.expr("problem.f", "0")?;
    let g = raw.expr("problem.g", "0.3*x1")?;
    let phi1 = raw.expr("problem.phi1", "-inf")?;
    let phi2 = raw.expr("problem.phi2", "inf")?;
    let instance = ProblemInstance::new(p, q, k, f, g, phi1, phi2, lip).map_err(|e| {
        err(
            raw.get("problem.p").map(|(l, _)| l),
            "problem.p",
            e.to_string(),
        )
    })?;
    let p_schedule = raw.f64_list(
        "problem.p_schedule",
        &[4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0],
    )?;
    if p_schedule.windows(2).any(|w| w[0] >= w[1]) || p_schedule.iter().any(|&x| x <= q) {
        return Err(err(
            raw.get("problem.p_schedule").map(|(l, _)| l),
            "problem.p_schedule",
            "schedule must be strictly increasing with every entry > q",
        ));
    }
    let limit_mode = match raw.string("problem.limit_mode", "capped-q").as_str() {
        "capped-q" => LimitMode::CappedQ,
        "lipschitz" => LimitMode::Lipschitz,
        other => {
            return Err(err(
                raw.get("problem.limit_mode").map(|(l, _)| l),
                "problem.limit_mode",
                format!("unknown limit mode '{other}'"),
            ))
        }
    };

    let h_max = raw.f64("mesh.h_max", 0.06)?;
    if h_max.is_nan() || h_max <= 0.0 {
        return Err(err(
            raw.get("mesh.h_max").map(|(l, _)| l),
            "mesh.h_max",
            "h_max must be positive",
        ));
    }
    let grading = raw.f64("mesh.grading", 2.0)?;
    if grading.is_nan() || grading < 1.0 {
        return Err(err(
            raw.get("mesh.grading").map(|(l, _)| l),
            "mesh.grading",
            "grading must be >= 1",
        ));
    }
    let mesh = MeshOptions {
        angle_floor_deg: raw.f64("mesh.angle_floor", 20.0)?,
        ..MeshOptions::new(h_max, grading)
    };

    let solver = SolverConfig {
        tol: raw.f64("solver.tol", 1e-8)?,
        max_iters: raw.usize("solver.max_iters", 50_000)?,
        viol_tol: raw.f64("solver.viol_tol", 1e-4)?,
        bb_stabilization: raw.bool("solver.bb_stabilization", true)?,
        penalty_schedule: raw
            .f64_list("solver.penalty_schedule", &[1e2, 1e3, 1e4, 1e5, 1e6, 1e7])?,
        p_continuation: raw.f64_list(
            "solver.p_continuation",
            &[8.0, 16.0, 32.0, 64.0, 128.0, 256.0],
        )?,
        trace: true,
        ..SolverConfig::default()
    };
    if solver.tol.is_nan() || solver.tol <= 0.0 {
        return Err(err(
            raw.get("solver.tol").map(|(l, _)| l),
            "solver.tol",
            "tol must be positive",
        ));
    }

    let integrability_eps = raw.f64_list("diagnostics.integrability_eps", &[])?;
    let vi_probes = raw.usize("diagnostics.vi_probes", 0)?;
    let out_dir = raw.string("output.dir", "out");

    let unknown = raw.unknown_keys();
    if let Some((ln, key)) = unknown.first() {
        return Err(ConfigError {
            line: Some(*ln),
            field: Some(key.clone()),
            message: "unknown configuration key".into(),
        });
    }

    Ok(RunConfig {
        mode,
        base,
        base_name,
        ifs,
        level,
        levels,
        instance,
        p_schedule,
        limit_mode,
        mesh,
        solver,
        integrability_eps,
        vi_probes,
        out_dir,
    })
}
