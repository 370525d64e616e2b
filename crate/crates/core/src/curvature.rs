//! Levi-Civita connection and curvature from a chart's metric expressions:
//! Christoffel symbols, the curvature operator, the fully lowered curvature
//! tensor, and its covariant derivatives at a point.
//!
//! Conventions. `R(X,Y)Z = ∇_X ∇_Y Z − ∇_Y ∇_X Z − ∇_{[X,Y]} Z`; the operator
//! tensor stores `(R(∂_a, ∂_b) ∂_d)^l` in slot order `[l; a, b, d]`, and the
//! lowered tensor is `R_{abcd} = g_{cl} (R(∂_a, ∂_b) ∂_d)^l`, which makes the
//! unit sphere's `R_{θφθφ} = sin²θ` positive and its scalar curvature `+2`.
//! Covariant derivatives prepend their direction slot, outermost first:
//! `(∇^s R)_{e₁…e_s; abcd} = (∇_{e₁} ∇^{s−1} R)_{e₂…e_s; abcd}`.

use nalgebra::DMatrix;

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::tensor::{index_tuples, GTensor, JetTensor, Tensor, Variance};

/// Eigenvalue floor for the positive-definiteness test of the metric.
pub const PD_TOL: f64 = 1e-10;

/// Evaluate the metric as a jet tensor of order `order`, rejecting points
/// where the value matrix is not positive definite.
pub fn metric_at(chart: &Chart, point: &[f64], order: usize) -> Result<JetTensor> {
    let n = chart.dim();
    let jets = chart.metric_jets(point, order)?;
    let values = DMatrix::from_fn(n, n, |i, j| jets[i * n + j].value());
    let eig = values.symmetric_eigenvalues();
    let smallest = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if smallest.is_nan() || smallest <= PD_TOL {
        return Err(Error::NotPositiveDefinite {
            point: point.to_vec(),
            smallest_eigenvalue: smallest,
        });
    }
    Ok(GTensor::from_fn(
        n,
        vec![Variance::Lower, Variance::Lower],
        |idx| jets[idx[0] * n + idx[1]].clone(),
    ))
}

/// Jet-valued inverse of a rank-2 tensor by Gauss-Jordan elimination with
/// partial pivoting on the value parts.
pub fn invert_metric(g: &JetTensor) -> Result<JetTensor> {
    let n = g.dim();
    if g.rank() != 2 {
        return Err(Error::Shape("invert_metric: expected a rank-2 tensor".into()));
    }
    let order = g.jet_order();
    let one = Jet::constant(1.0, n, order);
    let zero = Jet::constant(0.0, n, order);
    // augmented system [g | I], row-major
    let mut a: Vec<Vec<Jet>> = (0..n)
        .map(|i| (0..n).map(|j| g.get(&[i, j]).clone()).collect())
        .collect();
    let mut inv: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { one.clone() } else { zero.clone() })
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| {
                a[r][col]
                    .value()
                    .abs()
                    .total_cmp(&a[s][col].value().abs())
            })
            .unwrap();
        if a[pivot_row][col].value().abs() == 0.0 {
            return Err(Error::SingularMatrix(
                "metric value matrix is singular".into(),
            ));
        }
        a.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let pivot = a[col][col].clone();
        for j in 0..n {
            a[col][j] = a[col][j].try_div(&pivot)?;
            inv[col][j] = inv[col][j].try_div(&pivot)?;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[r][col].clone();
            if factor.max_abs_coeff() == 0.0 {
                continue;
            }
            for j in 0..n {
                a[r][j] = &a[r][j] - &(&factor * &a[col][j]);
                inv[r][j] = &inv[r][j] - &(&factor * &inv[col][j]);
            }
        }
    }
    Ok(GTensor::from_fn(
        n,
        vec![Variance::Upper, Variance::Upper],
        |idx| inv[idx[0]][idx[1]].clone(),
    ))
}

/// Christoffel symbols `Γ^k_{ij} = ½ g^{kl} (∂_i g_jl + ∂_j g_il − ∂_l g_ij)`,
/// one jet order below the metric. Signature `[upper, lower, lower]` in slot
/// order `[k; i, j]`, symmetric in the lower slots.
pub fn christoffel(chart: &Chart, point: &[f64], order: usize) -> Result<JetTensor> {
    if order == 0 {
        return Err(Error::InvalidArgument(
            "christoffel needs metric jets of order ≥ 1".into(),
        ));
    }
    let g = metric_at(chart, point, order)?;
    let g_inv = invert_metric(&g)?;
    christoffel_from(&g, &g_inv)
}

pub(crate) fn christoffel_from(g: &JetTensor, g_inv: &JetTensor) -> Result<JetTensor> {
    let n = g.dim();
    let order = g.jet_order();
    if order == 0 {
        return Err(Error::OrderExhausted(
            "christoffel needs metric jets of order ≥ 1".into(),
        ));
    }
    // partials ∂_i g_jl, one order lower
    let mut dg = vec![Vec::new(); n];
    for (i, row) in dg.iter_mut().enumerate() {
        *row = Vec::with_capacity(n * n);
        for j in 0..n {
            for l in 0..n {
                row.push(g.get(&[j, l]).partial(i)?);
            }
        }
    }
    let ginv_t = g_inv.truncated(order - 1);
    let half = 0.5;
    let mut data = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc: Option<Jet> = None;
                for l in 0..n {
                    let bracket = &(&dg[i][j * n + l] + &dg[j][i * n + l]) - &dg[l][i * n + j];
                    let term = ginv_t.get(&[k, l]) * &bracket;
                    acc = Some(match acc {
                        Some(a) => &a + &term,
                        None => term,
                    });
                }
                data.push(&acc.unwrap() * half);
            }
        }
    }
    let mut iter = data.into_iter();
    Ok(GTensor::from_fn(
        n,
        vec![Variance::Upper, Variance::Lower, Variance::Lower],
        |_| iter.next().unwrap(),
    ))
}

/// Covariant derivative of a jet tensor, prepending one lower slot for the
/// direction: partial derivative plus one Christoffel correction per slot,
/// `+Γ` for upper slots and `−Γ` for lower slots. The result is one jet
/// order below `t`.
pub fn covariant_derivative(t: &JetTensor, gamma: &JetTensor) -> Result<JetTensor> {
    let n = t.dim();
    let order = t.jet_order();
    if order == 0 {
        return Err(Error::OrderExhausted(
            "covariant derivative of an order-0 jet tensor".into(),
        ));
    }
    let gamma_t = gamma.truncated(order - 1);
    let rank = t.rank();
    let mut signature = vec![Variance::Lower];
    signature.extend_from_slice(t.signature());
    let mut out = Vec::with_capacity(n * t.data().len());
    for full in index_tuples(n, rank + 1) {
        let e = full[0];
        let idx = &full[1..];
        let mut acc = t.get(idx).partial(e)?;
        let mut swapped = idx.to_vec();
        for slot in 0..rank {
            let own = idx[slot];
            for m in 0..n {
                swapped[slot] = m;
                let correction = match t.signature()[slot] {
                    // (+) Γ^{i_slot}_{e m} T[... m ...]
                    Variance::Upper => {
                        gamma_t.get(&[own, e, m]) * &t.get(&swapped).truncated(order - 1)
                    }
                    // (−) Γ^{m}_{e i_slot} T[... m ...]
                    Variance::Lower => {
                        -&(gamma_t.get(&[m, e, own]) * &t.get(&swapped).truncated(order - 1))
                    }
                };
                acc = &acc + &correction;
            }
            swapped[slot] = own;
        }
        out.push(acc);
    }
    let mut iter = out.into_iter();
    Ok(GTensor::from_fn(n, signature, |_| iter.next().unwrap()))
}

/// Everything the rest of the crate needs at one point, jet-valued: metric,
/// inverse, Christoffel symbols, the curvature operator, and the lowered
/// curvature tower `[R, ∇R, ..., ∇^depth R]`.
pub struct PointGeometry {
    pub metric: JetTensor,
    pub metric_inv: JetTensor,
    /// `Γ^k_{ij}` in slots `[k; i, j]`.
    pub gamma: JetTensor,
    /// Curvature operator `(R(∂_a, ∂_b) ∂_d)^l` in slots `[l; a, b, d]`.
    pub operator: JetTensor,
    /// Lowered tower; entry `s` is `∇^s R` with `4 + s` lower slots.
    pub tower: Vec<JetTensor>,
}

/// Compute a [`PointGeometry`] whose deepest tower entry still carries jets
/// of order ≥ `extra_order` (use 1 to read off point-gradients of tower
/// components, 0 for plain values).
pub fn point_geometry(
    chart: &Chart,
    point: &[f64],
    depth: usize,
    extra_order: usize,
) -> Result<PointGeometry> {
    let n = chart.dim();
    let base_order = depth + 2 + extra_order;
    let g = metric_at(chart, point, base_order)?;
    let g_inv = invert_metric(&g)?;
    let gamma = christoffel_from(&g, &g_inv)?;

    // operator F^l_{abd} = ∂_a Γ^l_{bd} − ∂_b Γ^l_{ad}
    //                      + Γ^m_{bd} Γ^l_{am} − Γ^m_{ad} Γ^l_{bm}
    let op_order = base_order - 2;
    let gamma_t = gamma.truncated(op_order);
    let mut op_data = Vec::with_capacity(n * n * n * n);
    for idx in index_tuples(n, 4) {
        let (l, a, b, d) = (idx[0], idx[1], idx[2], idx[3]);
        let mut acc = &gamma.get(&[l, b, d]).partial(a)? - &gamma.get(&[l, a, d]).partial(b)?;
        for m in 0..n {
            let quad = &(gamma_t.get(&[m, b, d]) * gamma_t.get(&[l, a, m]))
                - &(gamma_t.get(&[m, a, d]) * gamma_t.get(&[l, b, m]));
            acc = &acc + &quad;
        }
        op_data.push(acc);
    }
    let mut op_iter = op_data.into_iter();
    let operator = GTensor::from_fn(
        n,
        vec![
            Variance::Upper,
            Variance::Lower,
            Variance::Lower,
            Variance::Lower,
        ],
        |_| op_iter.next().unwrap(),
    );

    // lowered R_{abcd} = g_{cl} F^l_{abd}
    let g_t = g.truncated(op_order);
    let lowered = GTensor::from_fn(n, vec![Variance::Lower; 4], |idx| {
        let (a, b, c, d) = (idx[0], idx[1], idx[2], idx[3]);
        let mut acc: Option<Jet> = None;
        for l in 0..n {
            let term = g_t.get(&[c, l]) * operator.get(&[l, a, b, d]);
            acc = Some(match acc {
                Some(s) => &s + &term,
                None => term,
            });
        }
        acc.unwrap()
    });

    let mut tower = vec![lowered];
    for _ in 0..depth {
        let next = covariant_derivative(tower.last().unwrap(), &gamma)?;
        tower.push(next);
    }

    Ok(PointGeometry {
        metric: g,
        metric_inv: g_inv,
        gamma,
        operator,
        tower,
    })
}

/// Numeric curvature tower `[R, ∇R, ..., ∇^{s_max} R]` at a point. Entry `s`
/// has `4 + s` lower slots; derivative slots come first, outermost first.
pub fn curvature_tower(chart: &Chart, point: &[f64], s_max: usize) -> Result<Vec<Tensor>> {
    let geo = point_geometry(chart, point, s_max, 0)?;
    Ok(geo.tower.iter().map(|t| t.values()).collect())
}

/// Scalar curvature: the double metric trace of the lowered curvature
/// tensor over slot pairs (0, 2) and (1, 3).
pub fn scalar_curvature(r_lowered: &Tensor, g: &Tensor, g_inv: &Tensor) -> Result<f64> {
    let ricci = r_lowered.contract(0, 2, g, g_inv)?;
    let scal = ricci.contract(0, 1, g, g_inv)?;
    Ok(*scal.scalar())
}
