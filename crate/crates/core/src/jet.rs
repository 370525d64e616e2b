//! Truncated multivariate Taylor arithmetic ("jets").
//!
//! A [`Jet`] holds every Taylor coefficient of a scalar function at a point,
//! up to a truncation order `K`, in `n` variables. Arithmetic on jets is
//! exact on polynomials of degree ≤ K up to floating-point roundoff, so the
//! coefficients are exact partial derivatives (divided by the multi-index
//! factorial) of whatever expression produced them.
//!
//! Coefficients are stored as Taylor coefficients, i.e. `∂^α f / α!`, which
//! keeps the Cauchy product free of factorials; [`Jet::partial_raw`] converts
//! back to a raw partial derivative. Storage is dense over the `C(n+K, K)`
//! multi-indices of degree ≤ K, which is cheap at the dimensions this crate
//! targets (n ≤ 4, K ≤ 10).

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Exponent vector of one Taylor monomial: `x1^a1 · x2^a2 · ...`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    /// Exponent of axis `i`.
    pub fn exponent(&self, i: usize) -> u32 {
        self.0[i]
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    /// Total degree, the sum of all exponents.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `α! = a1! · a2! · ...`, as a float (exact for the small exponents
    /// that occur here).
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&a| (1..=a as u64).product::<u64>() as f64)
            .product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Shared index bookkeeping for all jets with a given dimension and order:
/// the graded-lexicographic list of multi-indices, the position lookup, and
/// the precomputed Cauchy-product pair lists.
struct SpaceData {
    dim: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    position: HashMap<MultiIndex, usize>,
    /// For each result slot `k`, `pairs[offsets[k]..offsets[k+1]]` lists the
    /// (lhs, rhs) coefficient slots whose monomials multiply into slot `k`.
    prod_offsets: Vec<usize>,
    prod_pairs: Vec<(u32, u32)>,
}

/// Handle to a cached [`SpaceData`]; cloning is cheap.
#[derive(Clone)]
pub struct JetSpace(Arc<SpaceData>);

fn space_cache() -> &'static Mutex<HashMap<(usize, usize), JetSpace>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), JetSpace>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// All multi-indices in `dim` variables with degree ≤ `order`, graded
/// lexicographic: sorted by degree first, then lexicographically.
fn enumerate_indices(dim: usize, order: usize) -> Vec<MultiIndex> {
    fn rec(dim: usize, degree: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() == dim - 1 {
            prefix.push(degree);
            out.push(MultiIndex::new(prefix.clone()));
            prefix.pop();
            return;
        }
        for a in (0..=degree).rev() {
            prefix.push(a);
            rec(dim, degree - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for d in 0..=order as u32 {
        let mut prefix = Vec::with_capacity(dim);
        // descending first component gives ascending lexicographic order of
        // the remaining slots within a degree block; the exact tie-break only
        // needs to be deterministic.
        rec(dim, d, &mut prefix, &mut out);
    }
    out
}

impl JetSpace {
    /// Cached space for jets of dimension `dim` truncated at `order`.
    pub fn get(dim: usize, order: usize) -> JetSpace {
        assert!(dim >= 1, "jet dimension must be at least 1");
        let mut cache = space_cache().lock().unwrap();
        if let Some(s) = cache.get(&(dim, order)) {
            return s.clone();
        }
        let indices = enumerate_indices(dim, order);
        let position: HashMap<MultiIndex, usize> = indices
            .iter()
            .enumerate()
            .map(|(k, mi)| (mi.clone(), k))
            .collect();
        let mut prod_offsets = Vec::with_capacity(indices.len() + 1);
        let mut prod_pairs = Vec::new();
        for target in &indices {
            prod_offsets.push(prod_pairs.len());
            // every componentwise split target = α + β
            let mut alpha = vec![0u32; dim];
            loop {
                let beta: Vec<u32> = target
                    .exponents()
                    .iter()
                    .zip(&alpha)
                    .map(|(&t, &a)| t - a)
                    .collect();
                let i = position[&MultiIndex::new(alpha.clone())];
                let j = position[&MultiIndex::new(beta)];
                prod_pairs.push((i as u32, j as u32));
                // odometer over alpha ≤ target
                let mut axis = 0;
                loop {
                    if axis == dim {
                        break;
                    }
                    if alpha[axis] < target.exponent(axis) {
                        alpha[axis] += 1;
                        break;
                    }
                    alpha[axis] = 0;
                    axis += 1;
                }
                if axis == dim {
                    break;
                }
            }
        }
        prod_offsets.push(prod_pairs.len());
        let space = JetSpace(Arc::new(SpaceData {
            dim,
            order,
            indices,
            position,
            prod_offsets,
            prod_pairs,
        }));
        cache.insert((dim, order), space.clone());
        space
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn order(&self) -> usize {
        self.0.order
    }

    /// Number of stored coefficients, `C(dim + order, order)`.
    pub fn len(&self) -> usize {
        self.0.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.0.indices
    }

    fn pos(&self, mi: &MultiIndex) -> Option<usize> {
        self.0.position.get(mi).copied()
    }

    fn same_space(&self, other: &JetSpace) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.dim() == other.dim() && self.order() == other.order())
    }
}

/// Elementary functions liftable to jets.
#[derive(Clone, Copy, PartialEq, Debug)]
pub enum JetFn {
    Exp,
    Log,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Sqrt,
    /// Real power with a fixed exponent. Integer exponents are evaluated by
    /// repeated multiplication and therefore accept any base; non-integer
    /// exponents require a strictly positive base value.
    Pow(f64),
}

impl fmt::Display for JetFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JetFn::Exp => write!(f, "exp"),
            JetFn::Log => write!(f, "log"),
            JetFn::Sin => write!(f, "sin"),
            JetFn::Cos => write!(f, "cos"),
            JetFn::Tan => write!(f, "tan"),
            JetFn::Sinh => write!(f, "sinh"),
            JetFn::Cosh => write!(f, "cosh"),
            JetFn::Tanh => write!(f, "tanh"),
            JetFn::Sqrt => write!(f, "sqrt"),
            JetFn::Pow(r) => write!(f, "pow({r})"),
        }
    }
}

/// Truncated Taylor expansion of a scalar function at a point.
#[derive(Clone)]
pub struct Jet {
    space: JetSpace,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Jet(dim={}, order={}, value={}, coeffs={:?})",
            self.dim(),
            self.order(),
            self.value(),
            self.coeffs
        )
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.space.same_space(&other.space) && self.coeffs == other.coeffs
    }
}

impl Jet {
    /// The jet of the constant function `c`.
    pub fn constant(c: f64, dim: usize, order: usize) -> Jet {
        let space = JetSpace::get(dim, order);
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = c;
        Jet { space, coeffs }
    }

    /// The jet of the coordinate function `x_i` at the point where it takes
    /// the value `x0`.
    pub fn variable(i: usize, x0: f64, dim: usize, order: usize) -> Result<Jet> {
        if i >= dim {
            return Err(Error::InvalidArgument(format!(
                "coordinate index {i} out of range for dimension {dim}"
            )));
        }
        let mut jet = Jet::constant(x0, dim, order);
        if order >= 1 {
            let mut e = vec![0u32; dim];
            e[i] = 1;
            let k = jet.space.pos(&MultiIndex::new(e)).unwrap();
            jet.coeffs[k] = 1.0;
        }
        Ok(jet)
    }

    /// Build a jet directly from its Taylor coefficient vector, ordered as
    /// in [`JetSpace::indices`].
    pub fn from_coeffs(dim: usize, order: usize, coeffs: Vec<f64>) -> Result<Jet> {
        let space = JetSpace::get(dim, order);
        if coeffs.len() != space.len() {
            return Err(Error::Shape(format!(
                "jet of dimension {dim} order {order} stores {} coefficients, got {}",
                space.len(),
                coeffs.len()
            )));
        }
        Ok(Jet { space, coeffs })
    }

    /// Taylor coefficients in [`JetSpace::indices`] order.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn zero_like(&self) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: vec![0.0; self.coeffs.len()],
        }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn order(&self) -> usize {
        self.space.order()
    }

    pub fn space(&self) -> &JetSpace {
        &self.space
    }

    /// The constant (degree-0) coefficient: the function value.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor coefficient of the given monomial (zero if above order).
    pub fn coeff(&self, mi: &MultiIndex) -> f64 {
        match self.space.pos(mi) {
            Some(k) => self.coeffs[k],
            None => 0.0,
        }
    }

    /// Raw partial derivative `∂^α f`, i.e. the Taylor coefficient scaled
    /// back by `α!`.
    pub fn partial_raw(&self, mi: &MultiIndex) -> f64 {
        self.coeff(mi) * mi.factorial()
    }

    /// First-order raw partials `(∂_0 f, ..., ∂_{n-1} f)`.
    pub fn gradient(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let mut e = vec![0u32; self.dim()];
                e[i] = 1;
                self.coeff(&MultiIndex::new(e))
            })
            .collect()
    }

    /// Derivative with respect to axis `a`, one order lower.
    pub fn partial(&self, a: usize) -> Result<Jet> {
        if a >= self.dim() {
            return Err(Error::InvalidArgument(format!(
                "axis {a} out of range for dimension {}",
                self.dim()
            )));
        }
        if self.order() == 0 {
            return Err(Error::OrderExhausted(
                "cannot differentiate an order-0 jet".into(),
            ));
        }
        let target = JetSpace::get(self.dim(), self.order() - 1);
        let coeffs = target
            .indices()
            .iter()
            .map(|beta| {
                let mut shifted = beta.exponents().to_vec();
                shifted[a] += 1;
                let k = self.space.pos(&MultiIndex::new(shifted)).unwrap();
                self.coeffs[k] * (beta.exponent(a) + 1) as f64
            })
            .collect();
        Ok(Jet {
            space: target,
            coeffs,
        })
    }

    /// The same expansion truncated at a lower order. Truncation commutes
    /// exactly with all jet arithmetic.
    pub fn truncated(&self, new_order: usize) -> Jet {
        if new_order >= self.order() {
            return self.clone();
        }
        let target = JetSpace::get(self.dim(), new_order);
        let coeffs = target
            .indices()
            .iter()
            .map(|mi| self.coeffs[self.space.pos(mi).unwrap()])
            .collect();
        Jet {
            space: target,
            coeffs,
        }
    }

    fn check_space(&self, other: &Jet, op: &str) {
        assert!(
            self.space.same_space(&other.space),
            "jet {op}: operands live in different spaces \
             ({}d order {} vs {}d order {})",
            self.dim(),
            self.order(),
            other.dim(),
            other.order()
        );
    }

    fn mul_impl(&self, rhs: &Jet) -> Jet {
        let data = &self.space.0;
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(i, j) in &data.prod_pairs[data.prod_offsets[k]..data.prod_offsets[k + 1]] {
                acc += self.coeffs[i as usize] * rhs.coeffs[j as usize];
            }
            *c = acc;
        }
        Jet {
            space: self.space.clone(),
            coeffs,
        }
    }

    /// Division, solving `self = rhs · q` coefficient by coefficient in
    /// graded order. Fails when the divisor's value is zero.
    pub fn try_div(&self, rhs: &Jet) -> Result<Jet> {
        self.check_space(rhs, "div");
        let b0 = rhs.value();
        if b0 == 0.0 {
            return Err(Error::Domain {
                context: "jet division".into(),
                message: "division by a jet with zero constant term".into(),
                value: 0.0,
            });
        }
        let data = &self.space.0;
        let mut q = vec![0.0; self.coeffs.len()];
        for k in 0..q.len() {
            let mut acc = self.coeffs[k];
            for &(i, j) in &data.prod_pairs[data.prod_offsets[k]..data.prod_offsets[k + 1]] {
                // the (i=0, j=k) split is the b0·q[k] term being solved for
                if j as usize != k {
                    acc -= rhs.coeffs[i as usize] * q[j as usize];
                }
            }
            q[k] = acc / b0;
        }
        Ok(Jet {
            space: self.space.clone(),
            coeffs: q,
        })
    }

    /// Integer power by binary exponentiation; exact for any base.
    pub fn powi(&self, mut e: i64) -> Result<Jet> {
        if e < 0 {
            let positive = self.powi(-e)?;
            return Jet::constant(1.0, self.dim(), self.order()).try_div(&positive);
        }
        let mut result = Jet::constant(1.0, self.dim(), self.order());
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_impl(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_impl(&base);
            }
        }
        Ok(result)
    }

    /// Apply an elementary function by composing its univariate Taylor
    /// series at `self.value()` with the nilpotent part of `self`.
    pub fn apply(&self, f: JetFn) -> Result<Jet> {
        if let JetFn::Pow(r) = f {
            if r.fract() == 0.0 && r.abs() <= 1e9 {
                return self.powi(r as i64);
            }
        }
        if let JetFn::Tan = f {
            let s = self.apply(JetFn::Sin)?;
            let c = self.apply(JetFn::Cos)?;
            return s.try_div(&c).map_err(|_| Error::Domain {
                context: "tan".into(),
                message: "cosine vanishes at the expansion point".into(),
                value: self.value(),
            });
        }
        if let JetFn::Tanh = f {
            let s = self.apply(JetFn::Sinh)?;
            let c = self.apply(JetFn::Cosh)?;
            return s.try_div(&c);
        }
        let coeffs = univariate_series(f, self.value(), self.order())?;
        // Horner in the nilpotent part u = self − value
        let mut u = self.clone();
        u.coeffs[0] = 0.0;
        let mut result = Jet::constant(coeffs[self.order()], self.dim(), self.order());
        for m in (0..self.order()).rev() {
            result = result.mul_impl(&u);
            result.coeffs[0] += coeffs[m];
        }
        Ok(result)
    }

    /// Largest absolute coefficient; a cheap magnitude proxy in tests.
    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Taylor coefficients `f^(m)(x0) / m!` for `m = 0..=order`.
fn univariate_series(f: JetFn, x0: f64, order: usize) -> Result<Vec<f64>> {
    let k = order;
    let mut c = vec![0.0; k + 1];
    let mut factorial = 1.0;
    match f {
        JetFn::Exp => {
            let e = x0.exp();
            for (m, cm) in c.iter_mut().enumerate() {
                if m > 0 {
                    factorial *= m as f64;
                }
                *cm = e / factorial;
            }
        }
        JetFn::Log => {
            if x0 <= 0.0 {
                return Err(domain_error("log", "argument must be positive", x0));
            }
            c[0] = x0.ln();
            let mut pow = 1.0;
            for (m, cm) in c.iter_mut().enumerate().skip(1) {
                pow *= x0;
                let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
                *cm = sign / (m as f64 * pow);
            }
        }
        JetFn::Sin | JetFn::Cos => {
            let (s, co) = x0.sin_cos();
            let cycle = if matches!(f, JetFn::Sin) {
                [s, co, -s, -co]
            } else {
                [co, -s, -co, s]
            };
            for (m, cm) in c.iter_mut().enumerate() {
                if m > 0 {
                    factorial *= m as f64;
                }
                *cm = cycle[m % 4] / factorial;
            }
        }
        JetFn::Sinh | JetFn::Cosh => {
            let (sh, ch) = (x0.sinh(), x0.cosh());
            for (m, cm) in c.iter_mut().enumerate() {
                if m > 0 {
                    factorial *= m as f64;
                }
                let even = m % 2 == 0;
                let base = match (f, even) {
                    (JetFn::Sinh, true) | (JetFn::Cosh, false) => sh,
                    _ => ch,
                };
                *cm = base / factorial;
            }
        }
        JetFn::Sqrt => return univariate_series(JetFn::Pow(0.5), x0, order),
        JetFn::Pow(r) => {
            if x0 <= 0.0 {
                return Err(domain_error(
                    "pow",
                    "non-integer exponent requires a positive base",
                    x0,
                ));
            }
            c[0] = x0.powf(r);
            for m in 1..=k {
                // c_m = c_{m-1} · (r − m + 1) / (m · x0)
                c[m] = c[m - 1] * (r - (m as f64) + 1.0) / (m as f64 * x0);
            }
        }
        JetFn::Tan | JetFn::Tanh => unreachable!("handled via sin/cos ratio"),
    }
    Ok(c)
}

fn domain_error(context: &str, message: &str, value: f64) -> Error {
    Error::Domain {
        context: context.into(),
        message: message.into(),
        value,
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.check_space(rhs, "add");
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Jet {
            space: self.space.clone(),
            coeffs,
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.check_space(rhs, "sub");
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Jet {
            space: self.space.clone(),
            coeffs,
        }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.check_space(rhs, "mul");
        self.mul_impl(rhs)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        let coeffs = self.coeffs.iter().map(|a| a * rhs).collect();
        Jet {
            space: self.space.clone(),
            coeffs,
        }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    #[test]
    fn constant_jet_has_no_derivatives() {
        let j = Jet::constant(3.0, 2, 2);
        assert_eq!(j.value(), 3.0);
        assert_eq!(j.coeff(&mi(&[1, 0])), 0.0);
        assert_eq!(j.coeff(&mi(&[0, 2])), 0.0);

        let z = Jet::constant(0.0, 3, 4);
        assert!(z.coeffs.iter().all(|&c| c == 0.0));

        let degenerate = Jet::constant(1.0, 1, 0);
        assert_eq!(degenerate.space.len(), 1);
        assert_eq!(degenerate.value(), 1.0);
    }

    #[test]
    fn variable_jet_seeds_one_slot() {
        let x = Jet::variable(0, 2.0, 2, 2).unwrap();
        assert_eq!(x.value(), 2.0);
        assert_eq!(x.coeff(&mi(&[1, 0])), 1.0);
        assert_eq!(x.coeff(&mi(&[0, 1])), 0.0);

        let y = Jet::variable(1, 0.0, 2, 1).unwrap();
        assert_eq!(y.value(), 0.0);
        assert_eq!(y.coeff(&mi(&[0, 1])), 1.0);

        // K = 0 truncates the first-order slot away
        let trunc = Jet::variable(0, 5.0, 1, 0).unwrap();
        assert_eq!(trunc.value(), 5.0);
        assert_eq!(trunc.space.len(), 1);

        assert!(Jet::variable(2, 0.0, 2, 1).is_err());
    }

    #[test]
    fn square_of_one_plus_x() {
        let one = Jet::constant(1.0, 1, 2);
        let x = Jet::variable(0, 0.0, 1, 2).unwrap();
        let p = &one + &x;
        let sq = &p * &p;
        assert_eq!(sq.coeff(&mi(&[0])), 1.0);
        assert_eq!(sq.coeff(&mi(&[1])), 2.0);
        assert_eq!(sq.coeff(&mi(&[2])), 1.0);
    }

    #[test]
    fn geometric_series_from_division() {
        let one = Jet::constant(1.0, 1, 2);
        let x = Jet::variable(0, 0.0, 1, 2).unwrap();
        let q = one.try_div(&(&one + &x)).unwrap();
        assert_eq!(q.coeff(&mi(&[0])), 1.0);
        assert_eq!(q.coeff(&mi(&[1])), -1.0);
        assert_eq!(q.coeff(&mi(&[2])), 1.0);
    }

    #[test]
    fn division_by_zero_value_rejected() {
        let zero = Jet::variable(0, 0.0, 1, 2).unwrap();
        let one = Jet::constant(1.0, 1, 2);
        assert!(matches!(one.try_div(&zero), Err(Error::Domain { .. })));
    }

    #[test]
    fn mul_div_round_trip() {
        // random-ish fixed jets; (a·b)/b = a within 1e-13 relative
        let mut a = Jet::constant(1.7, 2, 3);
        let mut b = Jet::constant(-2.3, 2, 3);
        for (k, (ca, cb)) in a.coeffs.iter_mut().zip(b.coeffs.iter_mut()).enumerate().skip(1) {
            *ca = (k as f64 * 0.37).sin() * 3.0;
            *cb = (k as f64 * 0.71).cos() * 2.0;
        }
        let prod = &a * &b;
        let back = prod.try_div(&b).unwrap();
        for (x, y) in back.coeffs.iter().zip(&a.coeffs) {
            assert_relative_eq!(x, y, max_relative = 1e-13, epsilon = 1e-13);
        }
    }

    #[test]
    fn sin_maclaurin() {
        let x = Jet::variable(0, 0.0, 1, 3).unwrap();
        let s = x.apply(JetFn::Sin).unwrap();
        assert_relative_eq!(s.coeff(&mi(&[1])), 1.0, epsilon = 1e-15);
        assert_relative_eq!(s.coeff(&mi(&[2])), 0.0, epsilon = 1e-15);
        assert_relative_eq!(s.coeff(&mi(&[3])), -1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn exp_of_zero_constant() {
        let z = Jet::constant(0.0, 2, 3);
        let e = z.apply(JetFn::Exp).unwrap();
        assert_eq!(e.value(), 1.0);
        assert!(e.coeffs[1..].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn log_and_sqrt_domain_checks() {
        let bad = Jet::constant(-1.0, 1, 2);
        assert!(bad.apply(JetFn::Log).is_err());
        assert!(bad.apply(JetFn::Sqrt).is_err());
        let zero = Jet::constant(0.0, 1, 2);
        assert!(zero.apply(JetFn::Sqrt).is_err());
        // integer powers accept any base
        assert_eq!(bad.apply(JetFn::Pow(2.0)).unwrap().value(), 1.0);
        assert!(bad.apply(JetFn::Pow(0.5)).is_err());
    }

    #[test]
    fn partials_of_sin_xy_match_finite_differences() {
        let f = |x: f64, y: f64| (x * y).sin();
        let (x0, y0) = (0.7, 1.3);
        let jx = Jet::variable(0, x0, 2, 2).unwrap();
        let jy = Jet::variable(1, y0, 2, 2).unwrap();
        let j = (&jx * &jy).apply(JetFn::Sin).unwrap();

        let h = 1e-5;
        let fd_x = (f(x0 + h, y0) - f(x0 - h, y0)) / (2.0 * h);
        let fd_y = (f(x0, y0 + h) - f(x0, y0 - h)) / (2.0 * h);
        let fd_xx = (f(x0 + h, y0) - 2.0 * f(x0, y0) + f(x0 - h, y0)) / (h * h);
        let fd_yy = (f(x0, y0 + h) - 2.0 * f(x0, y0) + f(x0, y0 - h)) / (h * h);
        let fd_xy = (f(x0 + h, y0 + h) - f(x0 + h, y0 - h) - f(x0 - h, y0 + h)
            + f(x0 - h, y0 - h))
            / (4.0 * h * h);

        assert_relative_eq!(j.partial_raw(&mi(&[1, 0])), fd_x, epsilon = 1e-7);
        assert_relative_eq!(j.partial_raw(&mi(&[0, 1])), fd_y, epsilon = 1e-7);
        assert_relative_eq!(j.partial_raw(&mi(&[2, 0])), fd_xx, epsilon = 1e-7, max_relative = 1e-5);
        assert_relative_eq!(j.partial_raw(&mi(&[0, 2])), fd_yy, epsilon = 1e-7, max_relative = 1e-5);
        assert_relative_eq!(j.partial_raw(&mi(&[1, 1])), fd_xy, epsilon = 1e-7, max_relative = 1e-5);
    }

    #[test]
    fn partial_lowers_order() {
        // d/dx of x^2 y at (2, 3), K=3 → 2xy with K=2
        let x = Jet::variable(0, 2.0, 2, 3).unwrap();
        let y = Jet::variable(1, 3.0, 2, 3).unwrap();
        let f = &(&x * &x) * &y;
        let fx = f.partial(0).unwrap();
        assert_eq!(fx.order(), 2);
        assert_relative_eq!(fx.value(), 12.0, epsilon = 1e-14);
        assert_relative_eq!(fx.coeff(&mi(&[1, 0])), 6.0, epsilon = 1e-14);
        assert_relative_eq!(fx.coeff(&mi(&[0, 1])), 4.0, epsilon = 1e-14);
        assert!(Jet::constant(1.0, 2, 0).partial(0).is_err());
    }

    #[test]
    fn integer_pow_by_repeated_multiplication() {
        let x = Jet::variable(0, -2.0, 1, 3).unwrap();
        let p = x.apply(JetFn::Pow(3.0)).unwrap();
        assert_eq!(p.value(), -8.0);
        assert_eq!(p.coeff(&mi(&[1])), 12.0);
        assert_eq!(p.coeff(&mi(&[2])), -6.0);
        assert_eq!(p.coeff(&mi(&[3])), 1.0);
        // negative exponent goes through the reciprocal
        let q = x.apply(JetFn::Pow(-2.0)).unwrap();
        assert_relative_eq!(q.value(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(q.coeff(&mi(&[1])), 0.25, epsilon = 1e-15);
    }
}
