//! The bundle over a chart whose fiber at `p` is `T_pM ⊕ so(T_pM)`, with the
//! connection whose parallel sections are exactly the canonical lifts of
//! Killing fields:
//!
//! ```text
//! D_X (v, B) = (∇_X v − B·X,  ∇_X B − R_{X,v})
//! ```
//!
//! where `R_{X,v}` is the curvature operator `Z ↦ R(X,v)Z`. The curvature of
//! this connection has no tangent component:
//!
//! ```text
//! K_{X,Y}(v, B) = (0, (∇_v R)_{X,Y} − (B.R)_{X,Y})
//! ```
//!
//! with `B` acting on the curvature operator as a derivation,
//! `(B.R)_{X,Y} = [B, R_{X,Y}] − R_{BX,Y} − R_{X,BY}`.
//!
//! The orientation of `R_{X,v}` is pinned by the requirement that canonical
//! lifts of verified Killing fields be parallel; a sign error flips that
//! test, so the convention is self-checking.

use nalgebra::{DMatrix, DVector};

use crate::chart::Chart;
use crate::curvature::{covariant_derivative, point_geometry};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::tensor::{GTensor, Tensor, Variance};

/// A fiber element: tangent vector plus endomorphism, both in coordinate
/// components. The endomorphism is skew-symmetric with respect to the metric
/// at its base point: `g·B + (g·B)ᵀ = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct KostantElement {
    pub v: DVector<f64>,
    pub b: DMatrix<f64>,
}

impl KostantElement {
    pub fn new(v: DVector<f64>, b: DMatrix<f64>) -> Self {
        KostantElement { v, b }
    }

    pub fn zero(n: usize) -> Self {
        KostantElement {
            v: DVector::zeros(n),
            b: DMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    /// Euclidean norm of the stacked components.
    pub fn norm(&self) -> f64 {
        (self.v.norm_squared() + self.b.iter().map(|x| x * x).sum::<f64>()).sqrt()
    }

    /// `‖g·B + (g·B)ᵀ‖`, zero exactly when `B` is skew with respect to `g`.
    pub fn skewness_defect(&self, g: &DMatrix<f64>) -> f64 {
        let gb = g * &self.b;
        (&gb + gb.transpose()).norm()
    }

    pub fn scaled(&self, s: f64) -> Self {
        KostantElement {
            v: &self.v * s,
            b: &self.b * s,
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        KostantElement {
            v: &self.v + &rhs.v,
            b: &self.b + &rhs.b,
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        KostantElement {
            v: &self.v - &rhs.v,
            b: &self.b - &rhs.b,
        }
    }

    /// Flatten to `n + n²` reals (`v` first, then `B` row-major).
    pub fn stack(&self) -> DVector<f64> {
        let n = self.dim();
        let mut out = DVector::zeros(n + n * n);
        out.rows_mut(0, n).copy_from(&self.v);
        for i in 0..n {
            for j in 0..n {
                out[n + i * n + j] = self.b[(i, j)];
            }
        }
        out
    }

    pub fn from_stack(stack: &DVector<f64>, n: usize) -> Self {
        let v = DVector::from_fn(n, |i, _| stack[i]);
        let b = DMatrix::from_fn(n, n, |i, j| stack[n + i * n + j]);
        KostantElement { v, b }
    }
}

/// Local data of a section at a point: its value and first coordinate
/// partials, enough to apply the connection there.
#[derive(Clone, Debug)]
pub struct SectionJet {
    pub point: Vec<f64>,
    pub value: KostantElement,
    /// `dv[(i, e)] = ∂_e v^i`.
    pub dv: DMatrix<f64>,
    /// `db[e][(i, j)] = ∂_e B^i_j`.
    pub db: Vec<DMatrix<f64>>,
}

/// Γ and curvature-operator values at one point, the coefficients of the
/// transport ODE.
struct ConnectionData {
    gamma: Tensor,
    /// `(R(∂_a, ∂_b) ∂_d)^l` in slots `[l; a, b, d]`.
    operator: Tensor,
    metric: DMatrix<f64>,
}

fn connection_data(chart: &Chart, point: &[f64]) -> Result<ConnectionData> {
    let geo = point_geometry(chart, point, 0, 0)?;
    let n = chart.dim();
    let g = geo.metric.values();
    Ok(ConnectionData {
        gamma: geo.gamma.values(),
        operator: geo.operator.values(),
        metric: DMatrix::from_fn(n, n, |i, j| *g.get(&[i, j])),
    })
}

impl ConnectionData {
    /// `(R_{x,v})^i_j = F^i_{abj} x^a v^b`.
    fn curvature_endomorphism(&self, x: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
        let n = x.len();
        DMatrix::from_fn(n, n, |i, j| {
            let mut acc = 0.0;
            for a in 0..n {
                for b in 0..n {
                    acc += self.operator.get(&[i, a, b, j]) * x[a] * v[b];
                }
            }
            acc
        })
    }

    /// Right-hand side of the parallel-transport ODE at velocity `dir`.
    fn transport_rhs(&self, dir: &DVector<f64>, e: &KostantElement) -> KostantElement {
        let n = dir.len();
        let r = self.curvature_endomorphism(dir, &e.v);
        let v_dot = DVector::from_fn(n, |i, _| {
            let mut acc = 0.0;
            for k in 0..n {
                for m in 0..n {
                    acc -= self.gamma.get(&[i, k, m]) * dir[k] * e.v[m];
                }
            }
            acc + (&e.b * dir)[i]
        });
        let b_dot = DMatrix::from_fn(n, n, |i, j| {
            let mut acc = r[(i, j)];
            for k in 0..n {
                for m in 0..n {
                    acc -= self.gamma.get(&[i, k, m]) * dir[k] * e.b[(m, j)];
                    acc += self.gamma.get(&[m, k, j]) * dir[k] * e.b[(i, m)];
                }
            }
            acc
        });
        KostantElement { v: v_dot, b: b_dot }
    }
}

fn eval_field(z: &[Expr], point: &[f64], order: usize) -> Result<Vec<crate::jet::Jet>> {
    z.iter().map(|e| e.eval(point, order)).collect()
}

/// Canonical lift of the vector field `Z` (one expression per component):
/// the pair `(Z(p), skew part of ∇Z at p)`, the skew part taken with respect
/// to the metric, `½ (A − g⁻¹ Aᵀ g)` with `A = ∇Z`.
pub fn canonical_lift(chart: &Chart, z: &[Expr], point: &[f64]) -> Result<KostantElement> {
    Ok(lift_section_inner(chart, z, point, 0)?.value)
}

/// Canonical lift together with its exact first partials, ready for
/// [`connection_apply`].
pub fn canonical_lift_section(chart: &Chart, z: &[Expr], point: &[f64]) -> Result<SectionJet> {
    lift_section_inner(chart, z, point, 1)
}

fn lift_section_inner(
    chart: &Chart,
    z: &[Expr],
    point: &[f64],
    extra: usize,
) -> Result<SectionJet> {
    let n = chart.dim();
    if z.len() != n {
        return Err(Error::Shape(format!(
            "vector field has {} components on a dimension-{n} chart",
            z.len()
        )));
    }
    let geo = point_geometry(chart, point, 0, extra)?;
    let z_jets = eval_field(z, point, 1 + extra)?;
    let gamma = geo.gamma.truncated(extra);
    let g = geo.metric.truncated(extra);
    let g_inv = geo.metric_inv.truncated(extra);

    // A^i_j = ∂_j Z^i + Γ^i_{jm} Z^m, jets of order `extra`
    let a = GTensor::from_fn(n, vec![Variance::Upper, Variance::Lower], |idx| {
        let (i, j) = (idx[0], idx[1]);
        let mut acc = z_jets[i].partial(j).unwrap().truncated(extra);
        for m in 0..n {
            acc = &acc + &(gamma.get(&[i, j, m]) * &z_jets[m].truncated(extra));
        }
        acc
    });
    // B = ½ (A − g⁻¹ Aᵀ g)
    let b_jets = GTensor::from_fn(n, vec![Variance::Upper, Variance::Lower], |idx| {
        let (i, j) = (idx[0], idx[1]);
        let mut adj = g.get(&[0, 0]).zero_like();
        for p in 0..n {
            for q in 0..n {
                // (g⁻¹ Aᵀ g)^i_j = g^{ip} A^q_p g_{qj}
                adj = &adj + &(&(g_inv.get(&[i, p]) * a.get(&[q, p])) * g.get(&[q, j]));
            }
        }
        &(a.get(&[i, j]) - &adj) * 0.5
    });

    let value = KostantElement {
        v: DVector::from_fn(n, |i, _| z_jets[i].value()),
        b: DMatrix::from_fn(n, n, |i, j| b_jets.get(&[i, j]).value()),
    };
    let (dv, db) = if extra >= 1 {
        let dv = DMatrix::from_fn(n, n, |i, e| z_jets[i].gradient()[e]);
        let db = (0..n)
            .map(|e| DMatrix::from_fn(n, n, |i, j| b_jets.get(&[i, j]).gradient()[e]))
            .collect();
        (dv, db)
    } else {
        (DMatrix::zeros(n, n), vec![DMatrix::zeros(n, n); n])
    };
    Ok(SectionJet {
        point: point.to_vec(),
        value,
        dv,
        db,
    })
}

/// Apply the connection to a section at its base point, in direction `x`:
/// `(∇_X v − B·X, ∇_X B − R_{X,v})`. Vanishes for canonical lifts of
/// Killing fields.
pub fn connection_apply(chart: &Chart, sj: &SectionJet, x: &[f64]) -> Result<KostantElement> {
    let n = chart.dim();
    if x.len() != n || sj.value.dim() != n {
        return Err(Error::Shape("connection_apply: mismatched dimensions".into()));
    }
    let data = connection_data(chart, &sj.point)?;
    let xv = DVector::from_row_slice(x);
    let (v, b) = (&sj.value.v, &sj.value.b);

    let mut nabla_v = DVector::zeros(n);
    for i in 0..n {
        let mut acc = 0.0;
        for e in 0..n {
            acc += x[e] * sj.dv[(i, e)];
            for m in 0..n {
                acc += x[e] * data.gamma.get(&[i, e, m]) * v[m];
            }
        }
        nabla_v[i] = acc;
    }
    let first = nabla_v - b * &xv;

    let mut nabla_b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for e in 0..n {
                acc += x[e] * sj.db[e][(i, j)];
                for m in 0..n {
                    acc += x[e] * data.gamma.get(&[i, e, m]) * b[(m, j)];
                    acc -= x[e] * data.gamma.get(&[m, e, j]) * b[(i, m)];
                }
            }
            nabla_b[(i, j)] = acc;
        }
    }
    let second = nabla_b - data.curvature_endomorphism(&xv, v);
    Ok(KostantElement { v: first, b: second })
}

/// Curvature of the connection applied to a fiber element:
/// `(0, (∇_v R)_{X,Y} − (B.R)_{X,Y})`. The tangent component is zero by
/// construction and returned as exact zeros.
pub fn bundle_curvature(
    chart: &Chart,
    point: &[f64],
    x: &[f64],
    y: &[f64],
    e: &KostantElement,
) -> Result<KostantElement> {
    let n = chart.dim();
    if x.len() != n || y.len() != n || e.dim() != n {
        return Err(Error::Shape("bundle_curvature: mismatched dimensions".into()));
    }
    let geo = point_geometry(chart, point, 1, 0)?;
    let nabla_f = covariant_derivative(&geo.operator, &geo.gamma)?.values();
    let f = geo.operator.values();

    // (∇_v R)_{X,Y} as an endomorphism
    let m1 = DMatrix::from_fn(n, n, |l, d| {
        let mut acc = 0.0;
        for ei in 0..n {
            for a in 0..n {
                for bi in 0..n {
                    acc += nabla_f.get(&[ei, l, a, bi, d]) * e.v[ei] * x[a] * y[bi];
                }
            }
        }
        acc
    });

    let r_of = |xx: &DVector<f64>, yy: &DVector<f64>| -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |l, d| {
            let mut acc = 0.0;
            for a in 0..n {
                for bi in 0..n {
                    acc += f.get(&[l, a, bi, d]) * xx[a] * yy[bi];
                }
            }
            acc
        })
    };
    let xv = DVector::from_row_slice(x);
    let yv = DVector::from_row_slice(y);
    let r_xy = r_of(&xv, &yv);
    // (B.R)_{X,Y} = [B, R_{X,Y}] − R_{BX,Y} − R_{X,BY}
    let m2 = (&e.b * &r_xy - &r_xy * &e.b) - r_of(&(&e.b * &xv), &yv) - r_of(&xv, &(&e.b * &yv));

    Ok(KostantElement {
        v: DVector::zeros(n),
        b: m1 - m2,
    })
}

/// Parallel transport of a fiber element along a polyline, by classical
/// fixed-step fourth-order Runge-Kutta integration of the linear transport
/// ODE on each segment. The endpoint's skewness defect is re-checked against
/// the endpoint metric.
pub fn parallel_transport(
    chart: &Chart,
    waypoints: &[Vec<f64>],
    e0: &KostantElement,
    steps_per_segment: usize,
) -> Result<KostantElement> {
    let n = chart.dim();
    if steps_per_segment == 0 {
        return Err(Error::InvalidArgument(
            "steps_per_segment must be at least 1".into(),
        ));
    }
    if waypoints.is_empty() {
        return Err(Error::InvalidArgument("empty transport curve".into()));
    }
    if e0.dim() != n {
        return Err(Error::Shape("parallel_transport: element dimension".into()));
    }
    let mut e = e0.clone();
    let mut last_data: Option<ConnectionData> = None;
    for seg in waypoints.windows(2) {
        let (a, b) = (&seg[0], &seg[1]);
        if a.len() != n || b.len() != n {
            return Err(Error::Shape("waypoint dimension".into()));
        }
        let dir = DVector::from_fn(n, |i, _| b[i] - a[i]);
        if dir.norm() == 0.0 {
            continue;
        }
        let dt = 1.0 / steps_per_segment as f64;
        let pos_at = |t: f64| -> Vec<f64> { (0..n).map(|i| a[i] + t * (b[i] - a[i])).collect() };
        for step in 0..steps_per_segment {
            let t0 = step as f64 * dt;
            let d0 = connection_data(chart, &pos_at(t0))?;
            let dh = connection_data(chart, &pos_at(t0 + 0.5 * dt))?;
            let d1 = connection_data(chart, &pos_at(t0 + dt))?;
            let k1 = d0.transport_rhs(&dir, &e);
            let k2 = dh.transport_rhs(&dir, &e.add(&k1.scaled(0.5 * dt)));
            let k3 = dh.transport_rhs(&dir, &e.add(&k2.scaled(0.5 * dt)));
            let k4 = d1.transport_rhs(&dir, &e.add(&k3.scaled(dt)));
            let incr = k1
                .add(&k2.scaled(2.0))
                .add(&k3.scaled(2.0))
                .add(&k4.scaled(1.0))
                .scaled(dt / 6.0);
            e = e.add(&incr);
            last_data = Some(d1);
        }
    }
    if let Some(data) = &last_data {
        // the exact solution stays skew with respect to the endpoint metric;
        // integration drift off that constraint is re-projected away, and
        // gross drift is reported instead of hidden
        let defect = e.skewness_defect(&data.metric);
        let scale = e.b.norm().max(1.0);
        if defect > 1e-6 * scale {
            return Err(Error::TransportDrift { defect });
        }
        let g = &data.metric;
        let g_inv = g.clone().try_inverse().ok_or_else(|| {
            Error::SingularMatrix("endpoint metric in parallel transport".into())
        })?;
        e.b = (&e.b - g_inv * e.b.transpose() * g) * 0.5;
    }
    Ok(e)
}
