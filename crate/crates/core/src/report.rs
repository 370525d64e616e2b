//! One-stop analysis of a chart at a point, collected into a
//! machine-readable report with a full configuration echo.

use serde::Serialize;

use crate::chart::Chart;
use crate::curvature::point_geometry;
use crate::error::Result;
use crate::stabilization::{flatness_check, level_cap, parallelness_check, stabilize_capped};
use crate::weyl::{cohomogeneity_at, enumerate_patterns, evaluate_invariant, H_PROBE};

/// Every knob of an analysis run. A report embeds the configuration it was
/// produced with, so a report alone suffices to reproduce the run.
#[derive(Clone, Debug, Serialize)]
pub struct AnalysisConfig {
    /// Cap on the total derivative order of enumerated invariants.
    pub max_order: usize,
    /// Cap on the total valence of enumerated invariants.
    pub max_valence: usize,
    /// Cap on filtration levels (defaults to the hard stabilization bound).
    pub tower_depth: usize,
    /// Relative singular-value threshold for every rank decision.
    pub rank_tol: f64,
    /// Transport steps per segment or grid cell.
    pub steps: usize,
    /// Probe distance for the cohomogeneity regularity heuristic.
    pub h_probe: f64,
    /// Step used by the parallel-subbundle residual check.
    pub h_parallel: f64,
}

impl AnalysisConfig {
    /// Defaults for a chart of dimension `n`: invariant order capped at
    /// `min(n(n−1)/2, 4)`, valence 8, ranks at 1e-8.
    pub fn for_dim(n: usize) -> Self {
        AnalysisConfig {
            max_order: (n * (n - 1) / 2).min(4),
            max_valence: 8,
            tower_depth: level_cap(n),
            rank_tol: 1e-8,
            steps: 100,
            h_probe: H_PROBE,
            h_parallel: 1e-3,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantValue {
    pub pattern: String,
    pub value: f64,
}

/// Full analysis of one point. Field order is frozen; serialization is
/// byte-deterministic for identical inputs.
#[derive(Clone, Debug, Serialize)]
pub struct PointReport {
    pub version: String,
    pub chart: String,
    pub point: Vec<f64>,
    pub config: AnalysisConfig,
    pub invariants: Vec<InvariantValue>,
    pub cohomogeneity: usize,
    pub cohomogeneity_singular: bool,
    pub dims: Vec<usize>,
    pub singer_invariant: usize,
    pub killing_dim: usize,
    pub orbit_dim: usize,
    pub isotropy_dim: usize,
    pub homogeneous: bool,
    pub flatness_residual: f64,
    pub parallelness_residual: f64,
}

impl PointReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }
}

/// Run the whole pipeline at one point: invariant values, cohomogeneity,
/// the stabilizing filtration, and the flatness/parallelness diagnostics.
pub fn analyze_point(chart: &Chart, point: &[f64], config: &AnalysisConfig) -> Result<PointReport> {
    let n = chart.dim();
    let inv_set = enumerate_patterns(n, config.max_order, config.max_valence)?;

    let eval_depth = inv_set
        .patterns
        .iter()
        .flat_map(|p| p.factors().iter().copied())
        .max()
        .unwrap_or(0);
    let geo = point_geometry(chart, point, eval_depth, 0)?;
    let g = geo.metric.values();
    let g_inv = geo.metric_inv.values();
    let tower: Vec<_> = geo.tower.iter().map(|t| t.values()).collect();
    let invariants = inv_set
        .patterns
        .iter()
        .map(|p| {
            Ok(InvariantValue {
                pattern: p.descriptor(),
                value: evaluate_invariant(p, &tower, &g, &g_inv)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let cohom = cohomogeneity_at(chart, point, &inv_set, config.rank_tol)?;
    let stab = stabilize_capped(chart, point, config.rank_tol, config.tower_depth)?;

    let mut flatness_residual = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut x = vec![0.0; n];
            let mut y = vec![0.0; n];
            x[i] = 1.0;
            y[j] = 1.0;
            flatness_residual = flatness_residual.max(flatness_check(chart, point, &stab, &x, &y)?);
        }
    }
    let mut parallelness_residual = 0.0f64;
    for i in 0..n {
        let mut x = vec![0.0; n];
        x[i] = 1.0;
        parallelness_residual =
            parallelness_residual.max(parallelness_check(chart, point, &stab, &x, config.h_parallel)?);
    }

    Ok(PointReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        chart: chart.name().to_string(),
        point: point.to_vec(),
        config: config.clone(),
        invariants,
        cohomogeneity: cohom.codim,
        cohomogeneity_singular: cohom.singular,
        dims: stab.dims.clone(),
        singer_invariant: stab.singer_invariant,
        killing_dim: stab.killing_dim(),
        orbit_dim: stab.orbit_dim,
        isotropy_dim: stab.isotropy_dim,
        homogeneous: stab.homogeneous,
        flatness_residual,
        parallelness_residual,
    })
}

/// Header of the per-point scan CSV.
pub fn scan_csv_header(coords: &[String]) -> String {
    let mut cols: Vec<String> = coords.to_vec();
    cols.extend(
        [
            "status",
            "cohomogeneity",
            "killing_dim",
            "singer_invariant",
            "orbit_dim",
            "isotropy_dim",
            "homogeneous",
            "flatness_residual",
            "parallelness_residual",
        ]
        .map(str::to_string),
    );
    cols.join(",")
}

/// One scan row; `report` is `None` for nodes where the metric degenerates.
pub fn scan_csv_row(point: &[f64], report: Option<&PointReport>) -> String {
    let mut fields: Vec<String> = point.iter().map(|x| format!("{x:.16e}")).collect();
    match report {
        Some(r) => {
            fields.push("ok".into());
            fields.push(r.cohomogeneity.to_string());
            fields.push(r.killing_dim.to_string());
            fields.push(r.singer_invariant.to_string());
            fields.push(r.orbit_dim.to_string());
            fields.push(r.isotropy_dim.to_string());
            fields.push(r.homogeneous.to_string());
            fields.push(format!("{:.16e}", r.flatness_residual));
            fields.push(format!("{:.16e}", r.parallelness_residual));
        }
        None => {
            fields.push("degenerate".into());
            fields.extend(std::iter::repeat_n(String::new(), 8));
        }
    }
    fields.join(",")
}
