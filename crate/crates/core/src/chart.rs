//! Coordinate charts: a dimension, named coordinates, a symmetric matrix of
//! metric-component expressions, and optional per-coordinate domains.
//!
//! Chart file format (UTF-8 text, `#` starts a comment, blank lines ignored):
//!
//! ```text
//! dim = 2
//! coords = th ph
//! g 0 0 = 1
//! g 1 1 = sin(th)^2
//! domain th = (0, 3.141592653589793)
//! ```
//!
//! Metric entries are given for `i ≤ j` only; the `(j, i)` entry mirrors the
//! text. Omitted entries are zero.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::expr::{is_function_name, parse_expression, Expr};
use crate::jet::Jet;

/// Open interval for a coordinate; infinite ends use `±inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainInterval {
    pub lo: f64,
    pub hi: f64,
}

/// A coordinate domain with symbolic metric components.
#[derive(Clone)]
pub struct Chart {
    name: String,
    coords: Vec<String>,
    /// Row-major n×n matrix; entry (i, j) for i > j mirrors (j, i).
    metric: Vec<Expr>,
    domains: Vec<Option<DomainInterval>>,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Chart({}, dim {}, coords {:?})", self.name, self.dim(), self.coords)
    }
}

impl Chart {
    /// Assemble a chart from expression strings for the upper-triangular
    /// entries, given as `(i, j, text)` with `i ≤ j`. Omitted entries are 0.
    pub fn from_entries(
        name: &str,
        coords: &[&str],
        entries: &[(usize, usize, &str)],
    ) -> Result<Chart> {
        let mut text = String::new();
        text.push_str(&format!("dim = {}\n", coords.len()));
        text.push_str(&format!("coords = {}\n", coords.join(" ")));
        for (i, j, e) in entries {
            text.push_str(&format!("g {i} {j} = {e}\n"));
        }
        Chart::parse(&text, name)
    }

    /// Load a chart from a file.
    pub fn load(path: impl AsRef<Path>) -> Result<Chart> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Chart::parse(&text, &path.display().to_string())
    }

    /// Parse chart text; `source` names the origin in error messages.
    pub fn parse(text: &str, source: &str) -> Result<Chart> {
        let fail = |line: usize, message: String| Error::ChartFormat {
            file: source.to_string(),
            line,
            message,
        };

        let mut dim: Option<usize> = None;
        let mut coords: Vec<String> = Vec::new();
        let mut entries: Vec<(usize, usize, Expr, usize)> = Vec::new();
        let mut domains: Vec<(String, DomainInterval, usize)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = match line.split_once('=') {
                Some((k, v)) => (k.trim(), v.trim()),
                None => return Err(fail(lineno, format!("expected `key = value`, got `{line}`"))),
            };
            let mut key_parts = key.split_whitespace();
            match key_parts.next() {
                Some("dim") => {
                    if dim.is_some() {
                        return Err(fail(lineno, "duplicate `dim`".into()));
                    }
                    let n: usize = value
                        .parse()
                        .map_err(|_| fail(lineno, format!("`dim` must be an integer, got `{value}`")))?;
                    if n == 0 {
                        return Err(fail(lineno, "`dim` must be at least 1".into()));
                    }
                    dim = Some(n);
                }
                Some("coords") => {
                    if !coords.is_empty() {
                        return Err(fail(lineno, "duplicate `coords`".into()));
                    }
                    for name in value.split_whitespace() {
                        if is_function_name(name) {
                            return Err(fail(
                                lineno,
                                format!("coordinate `{name}` shadows a built-in function"),
                            ));
                        }
                        if coords.iter().any(|c| c == name) {
                            return Err(fail(lineno, format!("duplicate coordinate name `{name}`")));
                        }
                        coords.push(name.to_string());
                    }
                }
                Some("g") => {
                    let i: usize = key_parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| fail(lineno, "expected `g <i> <j> = <expression>`".into()))?;
                    let j: usize = key_parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| fail(lineno, "expected `g <i> <j> = <expression>`".into()))?;
                    if key_parts.next().is_some() {
                        return Err(fail(lineno, "too many indices on `g` entry".into()));
                    }
                    if coords.is_empty() {
                        return Err(fail(lineno, "`coords` must be declared before `g` entries".into()));
                    }
                    if i > j {
                        return Err(fail(
                            lineno,
                            format!("metric entries use i ≤ j; give g {j} {i} instead of g {i} {j}"),
                        ));
                    }
                    let e = parse_expression(value, &coords)
                        .map_err(|err| fail(lineno, format!("{err}")))?;
                    entries.push((i, j, e, lineno));
                }
                Some("domain") => {
                    let coord = key_parts
                        .next()
                        .ok_or_else(|| fail(lineno, "expected `domain <name> = (<lo>, <hi>)`".into()))?;
                    let interval = parse_interval(value)
                        .ok_or_else(|| fail(lineno, format!("malformed interval `{value}`")))?;
                    domains.push((coord.to_string(), interval, lineno));
                }
                Some(other) => {
                    return Err(fail(lineno, format!("unknown key `{other}`")));
                }
                None => unreachable!("split_once guarantees a non-empty key side"),
            }
        }

        let n = dim.ok_or_else(|| fail(0, "missing required field `dim`".into()))?;
        if coords.is_empty() {
            return Err(fail(0, "missing required field `coords`".into()));
        }
        if coords.len() != n {
            return Err(fail(
                0,
                format!("dim = {n} but {} coordinate names declared", coords.len()),
            ));
        }

        let mut metric: Vec<Option<Expr>> = vec![None; n * n];
        for (i, j, e, lineno) in entries {
            if i >= n || j >= n {
                return Err(fail(
                    lineno,
                    format!("metric entry g {i} {j} out of range for a {n}x{n} metric (dimension mismatch)"),
                ));
            }
            if metric[i * n + j].is_some() {
                return Err(fail(lineno, format!("duplicate metric entry g {i} {j}")));
            }
            metric[i * n + j] = Some(e.clone());
            if i != j {
                metric[j * n + i] = Some(e);
            }
        }
        let metric: Vec<Expr> = metric
            .into_iter()
            .map(|e| e.unwrap_or(Expr::Number(0.0)))
            .collect();

        let mut domain_vec: Vec<Option<DomainInterval>> = vec![None; n];
        for (coord, interval, lineno) in domains {
            let k = coords
                .iter()
                .position(|c| *c == coord)
                .ok_or_else(|| fail(lineno, format!("domain for undeclared coordinate `{coord}`")))?;
            domain_vec[k] = Some(interval);
        }

        Ok(Chart {
            name: source.to_string(),
            coords,
            metric,
            domains: domain_vec,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn domain(&self, i: usize) -> Option<DomainInterval> {
        self.domains[i]
    }

    /// Metric component expression `g_ij` (already mirrored).
    pub fn metric_expr(&self, i: usize, j: usize) -> &Expr {
        &self.metric[i * self.dim() + j]
    }

    /// Check that a point has the right length and respects every declared
    /// coordinate interval.
    pub fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::Shape(format!(
                "point has {} coordinates, chart `{}` has dimension {}",
                point.len(),
                self.name,
                self.dim()
            )));
        }
        for (i, (&x, dom)) in point.iter().zip(&self.domains).enumerate() {
            if let Some(DomainInterval { lo, hi }) = dom {
                if !(x > *lo && x < *hi) {
                    return Err(Error::OutsideDomain {
                        coord: self.coords[i].clone(),
                        value: x,
                        lo: *lo,
                        hi: *hi,
                    });
                }
            }
        }
        Ok(())
    }

    /// Evaluate every metric component as a jet of the given order.
    /// Row-major n×n. No positive-definiteness check here; see
    /// [`crate::curvature::metric_at`].
    pub fn metric_jets(&self, point: &[f64], order: usize) -> Result<Vec<Jet>> {
        self.check_point(point)?;
        self.metric.iter().map(|e| e.eval(point, order)).collect()
    }
}

fn parse_interval(value: &str) -> Option<DomainInterval> {
    let inner = value.strip_prefix('(')?.strip_suffix(')')?;
    let (lo, hi) = inner.split_once(',')?;
    let parse_end = |s: &str| -> Option<f64> {
        match s.trim() {
            "inf" | "+inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            t => t.parse().ok(),
        }
    };
    Some(DomainInterval {
        lo: parse_end(lo)?,
        hi: parse_end(hi)?,
    })
}
