//! TOML problem files.
//!
//! ```toml
//! dimension = 2
//! delta = 2
//! Delta = 3
//! edges = [[1, 2], [2, 1]]
//!
//! [[matrices]]
//! name = "A1"
//! entries = [0.5, 1.0, 0.0, 2.0]   # row-major
//!
//! [options]
//! m_max = 64
//! ```

use serde::{Deserialize, Serialize};

use crate::certificate::SearchOptions;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::system::{validate_instance, Instance, RawInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dimension: usize,
    pub delta: u32,
    #[serde(rename = "Delta")]
    pub max_dwell: u32,
    pub edges: Vec<[usize; 2]>,
    pub matrices: Vec<NamedMatrix>,
    #[serde(default)]
    pub options: ProblemOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedMatrix {
    pub name: String,
    pub entries: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemOptions {
    pub m_max: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_interior: Option<usize>,
    pub allow_stable: bool,
    pub retry_larger_m: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub seed: u64,
    pub horizon: u64,
    pub trials: usize,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        let search = SearchOptions::default();
        Self {
            m_max: search.m_max,
            max_interior: search.max_interior,
            allow_stable: search.allow_stable,
            retry_larger_m: search.retry_larger_m,
            lambda: search.lambda,
            seed: 1,
            horizon: 500,
            trials: 100,
        }
    }
}

impl ProblemOptions {
    pub fn search(&self) -> SearchOptions {
        SearchOptions {
            m_max: self.m_max,
            max_interior: self.max_interior,
            allow_stable: self.allow_stable,
            retry_larger_m: self.retry_larger_m,
            lambda: self.lambda,
        }
    }
}

/// Parses and shape-checks a problem file. Errors carry a line/column or a
/// field path.
pub fn parse_problem(text: &str) -> Result<ProblemFile> {
    let problem: ProblemFile = toml::from_str(text).map_err(|e| Error::Parse {
        location: e
            .span()
            .map_or_else(|| "document".to_string(), |s| line_col(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    check_shapes(&problem)?;
    Ok(problem)
}

fn line_col(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |k| k + 1) + 1;
    format!("line {line}, column {col}")
}

fn check_shapes(problem: &ProblemFile) -> Result<()> {
    let fail = |location: String, message: String| Err(Error::Parse { location, message });
    let d = problem.dimension;
    if d == 0 {
        return fail("dimension".into(), "must be positive".into());
    }
    if let Some(l) = problem.options.lambda {
        if !(l.is_finite() && l > 0.0) {
            return fail(
                "options.lambda".into(),
                format!("must be positive, got {l}"),
            );
        }
    }
    if problem.options.m_max == 0 {
        return fail("options.m_max".into(), "must be positive".into());
    }
    for (k, m) in problem.matrices.iter().enumerate() {
        let at = format!("matrices[{k}] ({})", m.name);
        if m.entries.len() != d * d {
            return fail(
                at,
                format!(
                    "expected {} entries for dimension {d}, got {}",
                    d * d,
                    m.entries.len()
                ),
            );
        }
        if let Some(v) = m.entries.iter().find(|v| !v.is_finite()) {
            return fail(at, format!("non-finite entry {v}"));
        }
    }
    Ok(())
}

/// Validates the instance described by `problem`.
pub fn to_instance(problem: &ProblemFile) -> Result<Instance> {
    let d = problem.dimension;
    let matrices = problem
        .matrices
        .iter()
        .map(|m| Matrix::new(d, d, &m.entries))
        .collect::<Result<Vec<_>>>()?;
    let raw = RawInstance {
        matrices,
        delta: problem.delta,
        max_dwell: problem.max_dwell,
        edges: problem.edges.iter().map(|&[u, v]| (u, v)).collect(),
    };
    validate_instance(raw, problem.options.allow_stable).map_err(Error::Validation)
}

pub fn emit_problem(problem: &ProblemFile) -> Result<String> {
    toml::to_string(problem)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize problem: {e}")))
}
