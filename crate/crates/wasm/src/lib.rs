//! Browser bindings for the chart analyzer: string-in/JSON-out wrappers
//! around the core pipeline, kept thin so the page's JavaScript stays a
//! plain fetch-render loop.
//!
//! Build with `wasm-pack build crates/wasm --target web --out-dir www/pkg`
//! and serve `crates/wasm/www`.

use wasm_bindgen::prelude::*;

use geoscope_core::chart::Chart;
use geoscope_core::curvature::point_geometry;
use geoscope_core::extension::{extend_killing, killing_residual, GridSpec};
use geoscope_core::report::{analyze_point, AnalysisConfig};
use geoscope_core::stabilization::stabilize;
use geoscope_core::weyl::{enumerate_patterns, evaluate_invariant};

fn parse_point(text: &str, n: usize) -> Result<Vec<f64>, String> {
    let point: Vec<f64> = text
        .split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|_| format!("bad point `{text}`")))
        .collect::<Result<_, _>>()?;
    if point.len() != n {
        return Err(format!("point has {} coordinates, chart needs {n}", point.len()));
    }
    Ok(point)
}

fn analyze_impl(chart_text: &str, point_csv: &str) -> Result<String, String> {
    let chart = Chart::parse(chart_text, "chart").map_err(|e| e.to_string())?;
    let point = parse_point(point_csv, chart.dim())?;
    let config = AnalysisConfig::for_dim(chart.dim());
    let report = analyze_point(&chart, &point, &config).map_err(|e| e.to_string())?;
    Ok(report.to_json())
}

fn scalar_field_impl(chart_text: &str, grid_text: &str) -> Result<String, String> {
    let chart = Chart::parse(chart_text, "chart").map_err(|e| e.to_string())?;
    if chart.dim() != 2 {
        return Err("the field view needs a 2-dimensional chart".into());
    }
    let grid = GridSpec::parse(grid_text).map_err(|e| e.to_string())?;
    if grid.dim() != 2 {
        return Err("grid must have 2 axes".into());
    }
    let scal = enumerate_patterns(2, 0, 4).map_err(|e| e.to_string())?.patterns[0].clone();
    let mut values: Vec<Option<f64>> = Vec::with_capacity(grid.node_count());
    for idx in grid.indices() {
        let point = grid.node(&idx);
        let value = point_geometry(&chart, &point, 0, 0).ok().and_then(|geo| {
            evaluate_invariant(
                &scal,
                &[geo.tower[0].values()],
                &geo.metric.values(),
                &geo.metric_inv.values(),
            )
            .ok()
        });
        values.push(value);
    }
    let counts: Vec<usize> = grid.axes.iter().map(|a| a.count).collect();
    let axes: Vec<Vec<f64>> = grid
        .axes
        .iter()
        .map(|a| (0..a.count).map(|i| a.coordinate(i)).collect())
        .collect();
    serde_json::to_string(&serde_json::json!({
        "counts": counts,
        "axes": axes,
        "scalar_curvature": values,
    }))
    .map_err(|e| e.to_string())
}

fn killing_field_impl(
    chart_text: &str,
    base_csv: &str,
    element: usize,
    grid_text: &str,
    steps: usize,
) -> Result<String, String> {
    let chart = Chart::parse(chart_text, "chart").map_err(|e| e.to_string())?;
    if chart.dim() != 2 {
        return Err("the field view needs a 2-dimensional chart".into());
    }
    let base = parse_point(base_csv, 2)?;
    let grid = GridSpec::parse(grid_text).map_err(|e| e.to_string())?;
    let stab = stabilize(&chart, &base, 1e-8).map_err(|e| e.to_string())?;
    if stab.stable_basis.is_empty() {
        return Err("no stable element at this base point".into());
    }
    if element >= stab.stable_basis.len() {
        return Err(format!(
            "element {element} out of range (stable basis has {})",
            stab.stable_basis.len()
        ));
    }
    let sample = extend_killing(&chart, &base, &stab.stable_basis[element], &grid, steps.max(1))
        .map_err(|e| e.to_string())?;
    let residuals = killing_residual(&chart, &sample).ok();
    let mut nodes = Vec::new();
    let mut vectors = Vec::new();
    for idx in sample.grid.indices() {
        let p = sample.grid.node(&idx);
        let e = sample.value_at(&idx);
        nodes.push(p);
        vectors.push(vec![e.v[0], e.v[1]]);
    }
    serde_json::to_string(&serde_json::json!({
        "killing_dim": stab.stable_basis.len(),
        "homogeneous": stab.homogeneous,
        "nodes": nodes,
        "vectors": vectors,
        "max_sym_residual": residuals.map(|r| r.max_sym_residual),
        "max_tangency_residual": residuals.map(|r| r.max_tangency_residual),
    }))
    .map_err(|e| e.to_string())
}

/// Full point analysis; returns the JSON report.
#[wasm_bindgen]
pub fn analyze(chart_text: &str, point_csv: &str) -> Result<String, JsValue> {
    analyze_impl(chart_text, point_csv).map_err(|e| JsValue::from_str(&e))
}

/// Scalar curvature sampled over a grid, as JSON (`null` at degenerate
/// nodes).
#[wasm_bindgen]
pub fn scalar_field(chart_text: &str, grid_text: &str) -> Result<String, JsValue> {
    scalar_field_impl(chart_text, grid_text).map_err(|e| JsValue::from_str(&e))
}

/// Extend a stable element from a base point over a grid; returns the
/// sampled vector field and its Killing residuals as JSON.
#[wasm_bindgen]
pub fn killing_field(
    chart_text: &str,
    base_csv: &str,
    element: usize,
    grid_text: &str,
    steps: usize,
) -> Result<String, JsValue> {
    killing_field_impl(chart_text, base_csv, element, grid_text, steps)
        .map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPHERE: &str = "dim = 2\ncoords = th ph\ng 0 0 = 1\ng 1 1 = sin(th)^2\ndomain th = (0, 3.141592653589793)\n";
    const BUMP: &str = "dim = 2\ncoords = x y\ng 0 0 = 1\ng 1 1 = (1 + x^2)^2\n";

    #[test]
    fn analyze_report_shape() {
        let json = analyze_impl(SPHERE, "1.0472, 0").unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["killing_dim"], 3);
        assert_eq!(v["homogeneous"], true);
    }

    #[test]
    fn scalar_field_marks_degenerate_nodes() {
        let json = scalar_field_impl(SPHERE, "[0,1.6]x[0,1]:2x2").unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let vals = v["scalar_curvature"].as_array().unwrap();
        assert!(vals[0].is_null()); // th = 0 pole
        let last = vals[3].as_f64().unwrap();
        assert!((last - 2.0).abs() < 1e-8);
    }

    #[test]
    fn killing_field_extends_bump_translation() {
        let json = killing_field_impl(BUMP, "0,0", 0, "[-1,1]x[-1,1]:3x3", 50).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["killing_dim"], 1);
        assert_eq!(v["homogeneous"], false);
        let vectors = v["vectors"].as_array().unwrap();
        assert_eq!(vectors.len(), 9);
        for w in vectors {
            assert!(w[0].as_f64().unwrap().abs() < 1e-6);
            assert!(w[1].as_f64().unwrap() > 0.0);
        }
    }

    #[test]
    fn errors_are_strings() {
        assert!(analyze_impl("dim = 1\n", "0").is_err());
        assert!(scalar_field_impl(SPHERE, "nonsense").is_err());
        assert!(killing_field_impl(BUMP, "0,0", 7, "[-1,1]x[-1,1]:3x3", 10).is_err());
    }
}
