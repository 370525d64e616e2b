//! Scalar curvature invariants as complete traces of tensor products of
//! covariant derivatives of the curvature tensor, and the level-set
//! geometry they induce: values, point-gradients, and the codimension of
//! the regular level foliation.
//!
//! A [`TracePattern`] is a multiset of derivative orders `m_1 ≤ … ≤ m_ℓ`
//! (one per `∇^{m_i} R` factor) together with a perfect matching on the
//! `Σ (m_i + 4)` tensor slots; every matched pair is contracted with the
//! inverse metric. Patterns are kept in a canonical form that quotients the
//! syntactic symmetries out: permutations of equal-order factors, the
//! antisymmetry flips of each curvature block (which only change sign), and
//! the exchange of the two antisymmetric index pairs. Patterns forced to
//! vanish by those symmetries (for instance a trace across an antisymmetric
//! pair) are discarded. Linearly dependent but syntactically distinct
//! patterns are deliberately kept; rank computations downstream make the
//! redundancy harmless.

use nalgebra::DMatrix;

use crate::chart::Chart;
use crate::curvature::point_geometry;
use crate::error::{Error, Result};
use crate::tensor::{Component, GTensor, Tensor};

/// Probe step (in chart coordinates) for the level-set regularity heuristic.
pub const H_PROBE: f64 = 1e-3;

/// One complete-trace invariant: factor derivative orders and slot pairing.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct TracePattern {
    /// Non-decreasing derivative orders of the `∇^{m} R` factors.
    factors: Vec<usize>,
    /// Perfect matching on the global slots, each pair `(a, b)` with `a < b`,
    /// sorted ascending; slots of factor `f` start at `Σ_{g<f} (m_g + 4)`.
    pairing: Vec<(usize, usize)>,
}

impl TracePattern {
    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn pairing(&self) -> &[(usize, usize)] {
        &self.pairing
    }

    /// Total derivative order `Σ m_i`.
    pub fn order(&self) -> usize {
        self.factors.iter().sum()
    }

    /// Total number of slots `Σ (m_i + 4)`.
    pub fn valence(&self) -> usize {
        self.factors.iter().map(|m| m + 4).sum()
    }

    /// Stable report string: `tr[m1,...,ml | (a,b)(c,d)...]` with 0-based
    /// global slot indices.
    pub fn descriptor(&self) -> String {
        let ms: Vec<String> = self.factors.iter().map(|m| m.to_string()).collect();
        let pairs: String = self
            .pairing
            .iter()
            .map(|(a, b)| format!("({a},{b})"))
            .collect();
        format!("tr[{} | {}]", ms.join(","), pairs)
    }
}

/// A deduplicated list of trace patterns up to a derivative-order cap.
#[derive(Clone, Debug)]
pub struct InvariantSet {
    pub patterns: Vec<TracePattern>,
    pub max_order: usize,
}

/// One symmetry of a factor list: a permutation of the global slots and the
/// sign it contributes.
struct SlotSymmetry {
    perm: Vec<usize>,
    sign: i8,
}

fn factor_offsets(factors: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(factors.len());
    let mut acc = 0;
    for m in factors {
        offsets.push(acc);
        acc += m + 4;
    }
    offsets
}

/// All permutations of `0..k`, deterministic order.
fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let smaller = permutations(k - 1);
    for p in smaller {
        for insert_at in 0..=p.len() {
            let mut q = p.clone();
            q.insert(insert_at, k - 1);
            out.push(q);
        }
    }
    out
}

/// The syntactic symmetry group of a factor list, as slot permutations with
/// signs: per factor the two antisymmetry flips (sign −1 each) and the
/// exchange of the two antisymmetric pairs (sign +1), composed with block
/// permutations of equal-order factors.
fn symmetry_group(factors: &[usize]) -> Vec<SlotSymmetry> {
    let offsets = factor_offsets(factors);
    let total: usize = factors.iter().map(|m| m + 4).sum();

    // per-factor elements: flip1^e1 · flip2^e2 · exchange^d
    let mut per_factor: Vec<Vec<(Vec<usize>, i8)>> = Vec::new();
    for (f, &m) in factors.iter().enumerate() {
        let base = offsets[f] + m; // first of the four curvature slots
        let mut elems = Vec::with_capacity(8);
        for flags in 0..8u8 {
            let (e1, e2, d) = (flags & 1 != 0, flags & 2 != 0, flags & 4 != 0);
            let mut perm: Vec<usize> = (0..total).collect();
            if e1 {
                perm.swap(base, base + 1);
            }
            if e2 {
                perm.swap(base + 2, base + 3);
            }
            if d {
                // exchange the (a,b) pair block with the (c,d) pair block
                let img: Vec<usize> = vec![perm[base + 2], perm[base + 3], perm[base], perm[base + 1]];
                perm[base..base + 4].copy_from_slice(&img);
            }
            let sign = if e1 != e2 { -1 } else { 1 };
            elems.push((perm, sign));
        }
        per_factor.push(elems);
    }

    // cartesian product of the per-factor elements
    let mut inner: Vec<SlotSymmetry> = vec![SlotSymmetry {
        perm: (0..total).collect(),
        sign: 1,
    }];
    for elems in &per_factor {
        let mut next = Vec::with_capacity(inner.len() * elems.len());
        for s in &inner {
            for (perm, sign) in elems {
                // factor blocks are disjoint, composition is pointwise
                let composed: Vec<usize> = (0..total).map(|i| perm[s.perm[i]]).collect();
                next.push(SlotSymmetry {
                    perm: composed,
                    sign: s.sign * sign,
                });
            }
        }
        inner = next;
    }

    // block permutations within runs of equal m
    let mut runs: Vec<(usize, usize)> = Vec::new(); // (start factor, len)
    let mut i = 0;
    while i < factors.len() {
        let mut j = i;
        while j < factors.len() && factors[j] == factors[i] {
            j += 1;
        }
        runs.push((i, j - i));
        i = j;
    }
    let mut block_perms: Vec<Vec<usize>> = vec![(0..total).collect()];
    for &(start, len) in &runs {
        if len < 2 {
            continue;
        }
        let mut next = Vec::new();
        for base_perm in &block_perms {
            for p in permutations(len) {
                let mut perm = base_perm.clone();
                for (local, &target) in p.iter().enumerate() {
                    let from = offsets[start + local];
                    let to = offsets[start + target];
                    let size = factors[start + local] + 4;
                    perm[from..from + size].copy_from_slice(&base_perm[to..to + size]);
                }
                next.push(perm);
            }
        }
        block_perms = next;
    }

    let mut group = Vec::with_capacity(inner.len() * block_perms.len());
    for bp in &block_perms {
        for s in &inner {
            let composed: Vec<usize> = (0..total).map(|i| bp[s.perm[i]]).collect();
            group.push(SlotSymmetry {
                perm: composed,
                sign: s.sign,
            });
        }
    }
    group
}

fn normalize_matching(mut pairs: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    for p in pairs.iter_mut() {
        if p.0 > p.1 {
            *p = (p.1, p.0);
        }
    }
    pairs.sort_unstable();
    pairs
}

fn apply_perm(pairs: &[(usize, usize)], perm: &[usize]) -> Vec<(usize, usize)> {
    normalize_matching(pairs.iter().map(|&(a, b)| (perm[a], perm[b])).collect())
}

/// Canonical representative of a matching under the symmetry group, or
/// `None` when the symmetries force the invariant to vanish identically.
fn canonicalize(
    factors: &[usize],
    pairs: &[(usize, usize)],
    group: &[SlotSymmetry],
) -> Option<Vec<(usize, usize)>> {
    let _ = factors;
    let mut best: Option<Vec<(usize, usize)>> = None;
    let mut seen: Vec<(Vec<(usize, usize)>, i8)> = Vec::new();
    for g in group {
        let image = apply_perm(pairs, &g.perm);
        if let Some((_, prev_sign)) = seen.iter().find(|(m, _)| *m == image) {
            if *prev_sign != g.sign {
                // the pattern equals its own negative
                return None;
            }
        } else {
            seen.push((image.clone(), g.sign));
        }
        if best.as_ref().is_none_or(|b| image < *b) {
            best = Some(image);
        }
    }
    best
}

/// All perfect matchings on `0..total`.
fn perfect_matchings(total: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(free: &[usize], acc: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if free.is_empty() {
            out.push(acc.clone());
            return;
        }
        let a = free[0];
        for k in 1..free.len() {
            let b = free[k];
            let rest: Vec<usize> = free
                .iter()
                .copied()
                .filter(|&s| s != a && s != b)
                .collect();
            acc.push((a, b));
            rec(&rest, acc, out);
            acc.pop();
        }
    }
    if !total.is_multiple_of(2) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let free: Vec<usize> = (0..total).collect();
    rec(&free, &mut Vec::new(), &mut out);
    out
}

/// Non-decreasing factor lists with `Σ m ≤ max_order`, `Σ (m+4) ≤ max_valence`.
fn factor_lists(max_order: usize, max_valence: usize) -> Vec<Vec<usize>> {
    fn rec(
        min_m: usize,
        order_left: usize,
        valence_left: usize,
        acc: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if !acc.is_empty() {
            out.push(acc.clone());
        }
        for m in min_m..=order_left {
            if m + 4 > valence_left {
                break;
            }
            acc.push(m);
            rec(m, order_left - m, valence_left - (m + 4), acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, max_order, max_valence, &mut Vec::new(), &mut out);
    out
}

/// Enumerate all canonical trace patterns with total derivative order at
/// most `max_order` and total valence at most `max_valence`, deduplicated
/// and in a deterministic order. The enumeration itself does not depend on
/// the dimension `n`; the parameter fixes the associated default caps in
/// callers and is kept for interface clarity.
pub fn enumerate_patterns(n: usize, max_order: usize, max_valence: usize) -> Result<InvariantSet> {
    let _ = n;
    if max_valence < 4 || !max_valence.is_multiple_of(2) {
        return Err(Error::InvalidArgument(
            "max_valence must be an even number ≥ 4".into(),
        ));
    }
    let mut patterns = Vec::new();
    for factors in factor_lists(max_order, max_valence) {
        let total: usize = factors.iter().map(|m| m + 4).sum();
        if !total.is_multiple_of(2) {
            continue;
        }
        let group = symmetry_group(&factors);
        let mut canonical_seen: Vec<Vec<(usize, usize)>> = Vec::new();
        for matching in perfect_matchings(total) {
            if let Some(canon) = canonicalize(&factors, &matching, &group) {
                if !canonical_seen.contains(&canon) {
                    canonical_seen.push(canon.clone());
                    patterns.push(TracePattern {
                        factors: factors.clone(),
                        pairing: canon,
                    });
                }
            }
        }
    }
    patterns.sort_by(|p, q| {
        (p.order(), p.valence(), &p.factors, &p.pairing)
            .cmp(&(q.order(), q.valence(), &q.factors, &q.pairing))
    });
    Ok(InvariantSet {
        patterns,
        max_order,
    })
}

/// Complete trace of `⊗_i ∇^{m_i} R` along the pairing, with every pair
/// contracted through the inverse metric. Generic so the same path serves
/// numeric evaluation and jet-valued gradients.
pub(crate) fn trace_evaluate<T: Component>(
    pattern: &TracePattern,
    factor_tensors: &[&GTensor<T>],
    g: &GTensor<T>,
    g_inv: &GTensor<T>,
) -> Result<T> {
    let total = pattern.valence();
    let mut acc: Option<GTensor<T>> = None;
    let mut pos: Vec<Option<usize>> = vec![None; total];
    let mut consumed = vec![false; total];
    let mut offset = 0;
    for t in factor_tensors {
        let prev_rank = acc.as_ref().map_or(0, |a| a.rank());
        acc = Some(match acc {
            Some(a) => a.outer(t),
            None => (*t).clone(),
        });
        for s in 0..t.rank() {
            pos[offset + s] = Some(prev_rank + s);
        }
        offset += t.rank();
        for &(a, b) in &pattern.pairing {
            if consumed[a] || pos[a].is_none() || pos[b].is_none() {
                continue;
            }
            let (pa, pb) = (pos[a].unwrap(), pos[b].unwrap());
            let (lo, hi) = (pa.min(pb), pa.max(pb));
            acc = Some(acc.take().unwrap().contract(lo, hi, g, g_inv)?);
            consumed[a] = true;
            consumed[b] = true;
            pos[a] = None;
            pos[b] = None;
            for p in pos.iter_mut().flatten() {
                let mut shift = 0;
                if *p > lo {
                    shift += 1;
                }
                if *p > hi {
                    shift += 1;
                }
                *p -= shift;
            }
        }
    }
    let result = acc.ok_or_else(|| Error::InvalidArgument("empty trace pattern".into()))?;
    if result.rank() != 0 {
        return Err(Error::Shape(
            "trace pattern pairing does not cover every slot".into(),
        ));
    }
    Ok(result.scalar().clone())
}

/// Evaluate a pattern on a numeric curvature tower.
pub fn evaluate_invariant(
    pattern: &TracePattern,
    tower: &[Tensor],
    g: &Tensor,
    g_inv: &Tensor,
) -> Result<f64> {
    let need = pattern.factors.iter().copied().max().unwrap_or(0);
    if tower.len() <= need {
        return Err(Error::InvalidArgument(format!(
            "pattern needs tower depth {} but only {} entries are available",
            need + 1,
            tower.len()
        )));
    }
    let factor_tensors: Vec<&Tensor> = pattern.factors.iter().map(|&m| &tower[m]).collect();
    trace_evaluate(pattern, &factor_tensors, g, g_inv)
}

/// Coordinate differential of the invariant at a point, computed by
/// evaluating the trace with jet-valued components of order 1.
pub fn invariant_gradient(pattern: &TracePattern, chart: &Chart, point: &[f64]) -> Result<Vec<f64>> {
    let set = InvariantSet {
        patterns: vec![pattern.clone()],
        max_order: pattern.order(),
    };
    Ok(invariant_gradients(chart, point, &set)?.pop().unwrap())
}

/// Gradients of every pattern in the set at one point, sharing a single
/// jet-valued geometry computation.
pub fn invariant_gradients(
    chart: &Chart,
    point: &[f64],
    inv_set: &InvariantSet,
) -> Result<Vec<Vec<f64>>> {
    let depth = inv_set
        .patterns
        .iter()
        .flat_map(|p| p.factors.iter().copied())
        .max()
        .unwrap_or(0);
    let geo = point_geometry(chart, point, depth, 1)?;
    let g = geo.metric.truncated(1);
    let g_inv = geo.metric_inv.truncated(1);
    let tower: Vec<_> = geo.tower.iter().map(|t| t.truncated(1)).collect();
    inv_set
        .patterns
        .iter()
        .map(|pattern| {
            let factor_refs: Vec<_> = pattern.factors.iter().map(|&m| &tower[m]).collect();
            let jet = trace_evaluate(pattern, &factor_refs, &g, &g_inv)?;
            Ok(jet.gradient())
        })
        .collect()
}

/// Cohomogeneity verdict at a point.
#[derive(Clone, Debug)]
pub struct CohomogeneityReport {
    /// Numerical rank of the invariant-gradient matrix: the codimension of
    /// the local level foliation of the invariants.
    pub codim: usize,
    /// Patterns whose gradients span the row space, picked greedily in
    /// enumeration order.
    pub rank_basis: Vec<TracePattern>,
    /// Set when the rank differs at any probe point nearby (or a probe
    /// fails to evaluate): the point may be non-regular for the foliation.
    pub singular: bool,
}

fn gradient_rank(
    chart: &Chart,
    point: &[f64],
    inv_set: &InvariantSet,
    rank_tol: f64,
) -> Result<(usize, Vec<Vec<f64>>)> {
    let n = chart.dim();
    let rows = invariant_gradients(chart, point, inv_set)?;
    if rows.is_empty() {
        return Ok((0, rows));
    }
    let mat = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let svd = mat.svd(false, false);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let threshold = rank_tol * sigma_max.max(1.0);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > threshold)
        .count();
    Ok((rank, rows))
}

/// Codimension of the regular level sets of the invariant set at a point:
/// the numerical rank of the stacked invariant gradients. Singular values
/// count toward the rank when they exceed `rank_tol · max(σ_max, 1)`; the
/// `max(…, 1)` floor keeps exactly-zero gradient stacks (flat or otherwise
/// locally homogeneous metrics, where everything is roundoff noise) at
/// rank 0 on unit-scale metrics.
pub fn cohomogeneity_at(
    chart: &Chart,
    point: &[f64],
    inv_set: &InvariantSet,
    rank_tol: f64,
) -> Result<CohomogeneityReport> {
    let n = chart.dim();
    let (codim, rows) = gradient_rank(chart, point, inv_set, rank_tol)?;

    // greedy spanning subset of the rows, in enumeration order
    let mut rank_basis = Vec::new();
    let mut basis_rows: Vec<Vec<f64>> = Vec::new();
    let scale = rows
        .iter()
        .flat_map(|r| r.iter().map(|x| x.abs()))
        .fold(0.0, f64::max)
        .max(1.0);
    for (p, row) in inv_set.patterns.iter().zip(&rows) {
        if rank_basis.len() == codim {
            break;
        }
        let mut residual = row.clone();
        for b in &basis_rows {
            let dot: f64 = residual.iter().zip(b).map(|(x, y)| x * y).sum();
            let norm2: f64 = b.iter().map(|y| y * y).sum();
            for (r, y) in residual.iter_mut().zip(b) {
                *r -= dot / norm2 * y;
            }
        }
        let res_norm = residual.iter().map(|x| x * x).sum::<f64>().sqrt();
        if res_norm > rank_tol * scale {
            rank_basis.push(p.clone());
            basis_rows.push(residual);
        }
    }

    // regularity heuristic: the rank must be stable at 2n probe points
    let mut singular = false;
    'probes: for axis in 0..n {
        for dir in [-1.0, 1.0] {
            let mut probe = point.to_vec();
            probe[axis] += dir * H_PROBE;
            match gradient_rank(chart, &probe, inv_set, rank_tol) {
                Ok((r, _)) if r == codim => {}
                _ => {
                    singular = true;
                    break 'probes;
                }
            }
        }
    }

    Ok(CohomogeneityReport {
        codim,
        rank_basis,
        singular,
    })
}
