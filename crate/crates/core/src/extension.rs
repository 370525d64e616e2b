//! Numerical extension of a Killing field from a single fiber element at a
//! base point, by parallel transport over a rectangular grid, with
//! residual checks that the extension really is Killing.
//!
//! Transport follows axis-ordered polylines (first axis 1, then axis 2, …)
//! from the base to every node; flatness of the stable subbundle is what
//! makes the result path-independent, and [`path_independence`] measures
//! exactly that.

use nalgebra::DMatrix;

use crate::bundle::{parallel_transport, KostantElement};
use crate::chart::Chart;
use crate::curvature::point_geometry;
use crate::error::{Error, Result};
use crate::weyl::{enumerate_patterns, invariant_gradients, InvariantSet};

/// One grid axis: an inclusive range and a node count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl AxisSpec {
    /// Node spacing; falls back to the range length for single-node axes.
    pub fn spacing(&self) -> f64 {
        if self.count > 1 {
            (self.max - self.min) / (self.count - 1) as f64
        } else {
            (self.max - self.min).abs().max(1.0)
        }
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        if self.count == 1 {
            self.min
        } else {
            self.min + i as f64 * (self.max - self.min) / (self.count - 1) as f64
        }
    }
}

/// Rectangular lattice in chart coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub axes: Vec<AxisSpec>,
}

impl GridSpec {
    /// Parse `"[lo,hi]x[lo,hi]:CxC"`: one bracketed range per axis joined
    /// by `x`, a colon, then the per-axis node counts joined by `x`.
    pub fn parse(text: &str) -> Result<GridSpec> {
        let bad = |msg: &str| Error::InvalidArgument(format!("grid `{text}`: {msg}"));
        let (ranges_part, counts_part) = text
            .split_once(':')
            .ok_or_else(|| bad("missing `:` before node counts"))?;
        let mut ranges = Vec::new();
        let mut rest = ranges_part.trim();
        loop {
            let inner_end = rest.find(']').ok_or_else(|| bad("unterminated `[`"))?;
            let inner = rest
                .get(..inner_end)
                .and_then(|s| s.strip_prefix('['))
                .ok_or_else(|| bad("expected `[lo,hi]`"))?;
            let (lo, hi) = inner.split_once(',').ok_or_else(|| bad("expected `lo,hi`"))?;
            let lo: f64 = lo.trim().parse().map_err(|_| bad("bad range bound"))?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad("bad range bound"))?;
            ranges.push((lo, hi));
            rest = &rest[inner_end + 1..];
            if rest.is_empty() {
                break;
            }
            rest = rest
                .strip_prefix('x')
                .ok_or_else(|| bad("ranges must be joined by `x`"))?;
        }
        let counts: Vec<usize> = counts_part
            .split('x')
            .map(|c| c.trim().parse::<usize>().map_err(|_| bad("bad node count")))
            .collect::<Result<_>>()?;
        if counts.len() != ranges.len() {
            return Err(bad("range and count lists have different lengths"));
        }
        if counts.contains(&0) {
            return Err(bad("node counts must be at least 1"));
        }
        let axes = ranges
            .into_iter()
            .zip(counts)
            .map(|((min, max), count)| AxisSpec { min, max, count })
            .collect();
        Ok(GridSpec { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    /// Row-major node indices (first axis slowest).
    pub fn indices(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(self.node_count());
        let mut idx = vec![0usize; self.dim()];
        loop {
            out.push(idx.clone());
            let mut axis = self.dim();
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < self.axes[axis].count {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }

    pub fn node(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.coordinate(i))
            .collect()
    }

    fn flat(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for (i, a) in idx.iter().zip(&self.axes) {
            f = f * a.count + i;
        }
        f
    }
}

/// A transported section sampled over a grid.
#[derive(Clone, Debug)]
pub struct FieldSample {
    pub grid: GridSpec,
    /// One element per node, row-major over the grid.
    pub values: Vec<KostantElement>,
}

impl FieldSample {
    pub fn value_at(&self, idx: &[usize]) -> &KostantElement {
        &self.values[self.grid.flat(idx)]
    }

    /// CSV export: header `coord_1,…,coord_n,v_1,…,v_n,B_11,…,B_nn`, one
    /// row per node in row-major order, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.grid.dim();
        let mut out = String::new();
        for i in 1..=n {
            out.push_str(&format!("coord_{i},"));
        }
        for i in 1..=n {
            out.push_str(&format!("v_{i},"));
        }
        for i in 1..=n {
            for j in 1..=n {
                out.push_str(&format!("B_{i}{j}"));
                if !(i == n && j == n) {
                    out.push(',');
                }
            }
        }
        out.push('\n');
        for idx in self.grid.indices() {
            let point = self.grid.node(&idx);
            let e = self.value_at(&idx);
            let mut fields: Vec<String> = Vec::with_capacity(n + n + n * n);
            fields.extend(point.iter().map(|x| format!("{x:.16e}")));
            fields.extend(e.v.iter().map(|x| format!("{x:.16e}")));
            for i in 0..n {
                for j in 0..n {
                    fields.push(format!("{:.16e}", e.b[(i, j)]));
                }
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

/// Axis-ordered polyline from `base` to `node`, and the per-segment step
/// counts scaled by the number of grid cells each segment spans.
fn path_to(
    base: &[f64],
    node: &[f64],
    grid: &GridSpec,
    steps_per_cell: usize,
    axis_order: &[usize],
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut waypoints = vec![base.to_vec()];
    let mut steps = Vec::new();
    let mut current = base.to_vec();
    for &axis in axis_order {
        if current[axis] != node[axis] {
            let length = (node[axis] - current[axis]).abs();
            let cells = length / grid.axes[axis].spacing();
            current[axis] = node[axis];
            waypoints.push(current.clone());
            steps.push(((steps_per_cell as f64 * cells).round() as usize).max(1));
        }
    }
    (waypoints, steps)
}

fn transport_along(
    chart: &Chart,
    waypoints: &[Vec<f64>],
    steps: &[usize],
    e0: &KostantElement,
) -> Result<KostantElement> {
    let mut e = e0.clone();
    for (seg, &count) in waypoints.windows(2).zip(steps) {
        e = parallel_transport(chart, &[seg[0].clone(), seg[1].clone()], &e, count)?;
    }
    Ok(e)
}

/// Extend a fiber element from `base` over the grid: each node receives the
/// parallel transport of `e0` along the axis-ordered polyline from the base.
/// Deterministic given `steps_per_cell`.
pub fn extend_killing(
    chart: &Chart,
    base: &[f64],
    e0: &KostantElement,
    grid: &GridSpec,
    steps_per_cell: usize,
) -> Result<FieldSample> {
    let n = chart.dim();
    if grid.dim() != n {
        return Err(Error::Shape(format!(
            "grid has {} axes on a dimension-{n} chart",
            grid.dim()
        )));
    }
    chart.check_point(base)?;
    let axis_order: Vec<usize> = (0..n).collect();
    let mut values = Vec::with_capacity(grid.node_count());
    for idx in grid.indices() {
        let node = grid.node(&idx);
        let (waypoints, steps) = path_to(base, &node, grid, steps_per_cell, &axis_order);
        values.push(transport_along(chart, &waypoints, &steps, e0)?);
    }
    Ok(FieldSample {
        grid: grid.clone(),
        values,
    })
}

/// Residuals of the Killing property over a sampled field.
#[derive(Clone, Copy, Debug)]
pub struct ResidualReport {
    /// Largest Frobenius norm, over interior nodes, of the metric-symmetric
    /// part of `∇v` (finite differences for `∂v` plus exact Γ corrections).
    pub max_sym_residual: f64,
    /// Largest `|dI(v)|` over interior nodes and all enumerated invariant
    /// gradients: tangency of the field to the invariant level sets.
    pub max_tangency_residual: f64,
}

/// Default invariant set used for the tangency residual.
pub fn default_invariants(n: usize) -> Result<InvariantSet> {
    enumerate_patterns(n, (n * (n - 1) / 2).min(4), 8)
}

/// Check the Killing equation on a sampled field. The derivative of `v`
/// comes from central finite differences on the grid, so every axis needs
/// at least 3 nodes.
pub fn killing_residual(chart: &Chart, sample: &FieldSample) -> Result<ResidualReport> {
    let n = chart.dim();
    if sample.grid.axes.iter().any(|a| a.count < 3) {
        return Err(Error::InvalidArgument(
            "killing_residual needs at least 3 nodes per axis".into(),
        ));
    }
    let inv_set = default_invariants(n)?;
    let mut max_sym = 0.0f64;
    let mut max_tan = 0.0f64;
    for idx in sample.grid.indices() {
        if idx
            .iter()
            .zip(&sample.grid.axes)
            .any(|(&i, a)| i == 0 || i + 1 == a.count)
        {
            continue;
        }
        let point = sample.grid.node(&idx);
        let e = sample.value_at(&idx);

        // A^i_j = ∂_j v^i + Γ^i_{jm} v^m with centered differences for ∂v
        let geo = point_geometry(chart, &point, 0, 0)?;
        let gamma = geo.gamma.values();
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut up = idx.clone();
            let mut dn = idx.clone();
            up[j] += 1;
            dn[j] -= 1;
            let h = sample.grid.axes[j].spacing();
            let vp = &sample.value_at(&up).v;
            let vm = &sample.value_at(&dn).v;
            for i in 0..n {
                a[(i, j)] = (vp[i] - vm[i]) / (2.0 * h);
            }
        }
        for i in 0..n {
            for j in 0..n {
                for m in 0..n {
                    a[(i, j)] += gamma.get(&[i, j, m]) * e.v[m];
                }
            }
        }
        let gm = {
            let g = geo.metric.values();
            DMatrix::from_fn(n, n, |i, j| *g.get(&[i, j]))
        };
        let g_inv = gm.clone().try_inverse().ok_or_else(|| {
            Error::SingularMatrix("metric inverse in killing_residual".into())
        })?;
        let sym = (&a + &g_inv * a.transpose() * &gm) * 0.5;
        max_sym = max_sym.max(sym.norm());

        let grads = invariant_gradients(chart, &point, &inv_set)?;
        for grad in &grads {
            let pairing: f64 = grad.iter().zip(e.v.iter()).map(|(gi, vi)| gi * vi).sum();
            max_tan = max_tan.max(pairing.abs());
        }
    }
    Ok(ResidualReport {
        max_sym_residual: max_sym,
        max_tangency_residual: max_tan,
    })
}

/// Transport `e0` from `base` to `target` along the two L-shaped polylines
/// (axis 1 first versus axis 2 first) and return the norm of the difference
/// at the target. Small exactly when the element generates a consistent
/// local extension; large for generic elements on curved charts.
pub fn path_independence(
    chart: &Chart,
    base: &[f64],
    e0: &KostantElement,
    target: &[f64],
    steps: usize,
) -> Result<f64> {
    let n = chart.dim();
    if base.len() != n || target.len() != n {
        return Err(Error::Shape("path_independence: point dimension".into()));
    }
    let order_a: Vec<usize> = (0..n).collect();
    let mut order_b = order_a.clone();
    if n >= 2 {
        order_b.swap(0, 1);
    }
    let make_waypoints = |order: &[usize]| -> Vec<Vec<f64>> {
        let mut w = vec![base.to_vec()];
        let mut current = base.to_vec();
        for &axis in order {
            if current[axis] != target[axis] {
                current[axis] = target[axis];
                w.push(current.clone());
            }
        }
        w
    };
    let ea = parallel_transport(chart, &make_waypoints(&order_a), e0, steps)?;
    let eb = parallel_transport(chart, &make_waypoints(&order_b), e0, steps)?;
    Ok(ea.sub(&eb).norm())
}

/// Scale the tangent part of every node value by `1 + x_axis` (the node's
/// coordinate along `axis`); a deliberately corrupted copy used as a
/// sensitivity control for [`killing_residual`].
pub fn corrupt_sample(sample: &FieldSample, axis: usize) -> FieldSample {
    let mut out = sample.clone();
    for idx in out.grid.indices() {
        let point = out.grid.node(&idx);
        let f = out.grid.flat(&idx);
        let scale = 1.0 + point[axis];
        out.values[f].v *= scale;
    }
    out
}
