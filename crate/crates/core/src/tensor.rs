//! Dense tensors at a point: a dimension, a variance signature, and a
//! row-major component array. Generic over the component type so the same
//! algebra serves plain numbers and jets.

use crate::error::{Error, Result};
use crate::jet::Jet;

/// Variance of one tensor slot.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Variance {
    Upper,
    Lower,
}

/// Scalar-like component: the operations tensor algebra needs.
pub trait Component: Clone {
    fn zero_like(&self) -> Self;
    fn add_assign_ref(&mut self, rhs: &Self);
    fn mul_ref(&self, rhs: &Self) -> Self;
    fn neg_ref(&self) -> Self;
}

impl Component for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add_assign_ref(&mut self, rhs: &Self) {
        *self += rhs;
    }
    fn mul_ref(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg_ref(&self) -> Self {
        -self
    }
}

impl Component for Jet {
    fn zero_like(&self) -> Self {
        Jet::zero_like(self)
    }
    fn add_assign_ref(&mut self, rhs: &Self) {
        *self = &*self + rhs;
    }
    fn mul_ref(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg_ref(&self) -> Self {
        -self
    }
}

/// Dense tensor with `dim^rank` components, row-major (last slot fastest).
#[derive(Clone, Debug)]
pub struct GTensor<T> {
    dim: usize,
    signature: Vec<Variance>,
    data: Vec<T>,
}

/// Numeric tensor at a point.
pub type Tensor = GTensor<f64>;
/// Jet-valued tensor at a point (all component jets share dim and order).
pub type JetTensor = GTensor<Jet>;

/// Iterate all index tuples of the given rank in row-major order.
pub fn index_tuples(dim: usize, rank: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = dim.pow(rank as u32);
    (0..total).map(move |mut flat| {
        let mut idx = vec![0usize; rank];
        for slot in (0..rank).rev() {
            idx[slot] = flat % dim;
            flat /= dim;
        }
        idx
    })
}

impl<T: Component> GTensor<T> {
    pub fn from_fn(
        dim: usize,
        signature: Vec<Variance>,
        mut f: impl FnMut(&[usize]) -> T,
    ) -> Self {
        let data = index_tuples(dim, signature.len()).map(|idx| f(&idx)).collect();
        GTensor {
            dim,
            signature,
            data,
        }
    }

    /// A tensor filled with zeros shaped like `proto`.
    pub fn zeros_like_component(dim: usize, signature: Vec<Variance>, proto: &T) -> Self {
        let len = dim.pow(signature.len() as u32);
        GTensor {
            dim,
            signature,
            data: vec![proto.zero_like(); len],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.signature.len()
    }

    pub fn signature(&self) -> &[Variance] {
        &self.signature
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        let mut f = 0;
        for &i in idx {
            debug_assert!(i < self.dim);
            f = f * self.dim + i;
        }
        f
    }

    pub fn get(&self, idx: &[usize]) -> &T {
        &self.data[self.flat(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: T) {
        let f = self.flat(idx);
        self.data[f] = value;
    }

    /// The scalar component of a rank-0 tensor.
    pub fn scalar(&self) -> &T {
        assert_eq!(self.rank(), 0, "scalar() requires a rank-0 tensor");
        &self.data[0]
    }

    pub fn map<U: Component>(&self, f: impl Fn(&T) -> U) -> GTensor<U> {
        GTensor {
            dim: self.dim,
            signature: self.signature.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        if self.dim != rhs.dim || self.signature != rhs.signature {
            return Err(Error::Shape("tensor add: mismatched shapes".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            a.add_assign_ref(b);
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.add(&rhs.map(|c| c.neg_ref()))
    }

    /// Tensor product; `rhs` slots are appended after `self` slots.
    pub fn outer(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "tensor outer: mismatched dimensions");
        let mut signature = self.signature.clone();
        signature.extend_from_slice(&rhs.signature);
        let mut data = Vec::with_capacity(self.data.len() * rhs.data.len());
        for a in &self.data {
            for b in &rhs.data {
                data.push(a.mul_ref(b));
            }
        }
        GTensor {
            dim: self.dim,
            signature,
            data,
        }
    }

    /// Metric contraction of slots `i` and `j` (i ≠ j). Mixed-variance pairs
    /// trace directly; two lower slots contract with `g_inv`, two upper slots
    /// with `g`. The result drops both slots, keeping the remaining order.
    pub fn contract(&self, i: usize, j: usize, g: &Self, g_inv: &Self) -> Result<Self> {
        let r = self.rank();
        if i == j || i >= r || j >= r {
            return Err(Error::Shape(format!(
                "contract: slot pair ({i}, {j}) invalid for rank {r}"
            )));
        }
        let (i, j) = (i.min(j), i.max(j));
        let weight: Option<&Self> = match (self.signature[i], self.signature[j]) {
            (Variance::Lower, Variance::Lower) => Some(g_inv),
            (Variance::Upper, Variance::Upper) => Some(g),
            _ => None,
        };
        if let Some(w) = weight {
            if w.rank() != 2 || w.dim != self.dim {
                return Err(Error::Shape("contract: metric tensor has wrong shape".into()));
            }
        }
        let mut signature = self.signature.clone();
        signature.remove(j);
        signature.remove(i);
        let n = self.dim;
        let out = GTensor::from_fn(n, signature, |rest| {
            // rebuild the full index with p at slot i, q at slot j
            let mut full = vec![0usize; r];
            let mut acc: Option<T> = None;
            for p in 0..n {
                for q in 0..n {
                    let mut it = rest.iter();
                    for (slot, v) in full.iter_mut().enumerate() {
                        *v = if slot == i {
                            p
                        } else if slot == j {
                            q
                        } else {
                            *it.next().unwrap()
                        };
                    }
                    let term = match weight {
                        Some(w) => w.get(&[p, q]).mul_ref(self.get(&full)),
                        None => {
                            if p != q {
                                continue;
                            }
                            self.get(&full).clone()
                        }
                    };
                    match acc.as_mut() {
                        Some(a) => a.add_assign_ref(&term),
                        None => acc = Some(term),
                    }
                }
            }
            acc.expect("dim >= 1 guarantees at least one term")
        });
        Ok(out)
    }

    /// Frobenius-style maximum absolute entry, through a caller-supplied
    /// magnitude function.
    pub fn max_by(&self, magnitude: impl Fn(&T) -> f64) -> f64 {
        self.data.iter().map(magnitude).fold(0.0, f64::max)
    }
}

impl Tensor {
    pub fn zeros(dim: usize, signature: Vec<Variance>) -> Tensor {
        GTensor::zeros_like_component(dim, signature, &0.0)
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.max_by(|c| c.abs())
    }
}

impl JetTensor {
    /// Value parts as a numeric tensor.
    pub fn values(&self) -> Tensor {
        self.map(|j| j.value())
    }

    /// All component jets truncated to `order`.
    pub fn truncated(&self, order: usize) -> JetTensor {
        self.map(|j| j.truncated(order))
    }

    /// Shared jet order of the components.
    pub fn jet_order(&self) -> usize {
        self.data[0].order()
    }
}
