//! One kernel step: the synthetic channels `W^(1..l)` of a channel `W`.
//!
//! `W^(j)` has input `U_j` and output `(Y_1..Y_l, U_1..U_{j-1})`, where
//! `U = X G^{-1}` and the `X_k` are i.i.d. with law `Q`. Its joint table is
//! `sum over u_{j+1..l} of prod_k W(x_k, y_k)` with `x = u G`, so the input
//! law of each child is the exact marginal of `U_j`.

use alloc::vec;
use alloc::vec::Vec;

use libm::pow;

use crate::channel::{canonicalize, degrade_merge, params, Dmc, ParamSet};
use crate::error::{invalid, Error, Result};
use crate::gf::{Elem, Field};
use crate::kernel::Kernel;

/// Upper limit on `|Y|^l * q^l`, the number of joint terms enumerated.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;
/// Default output cap for degraded deep recursion.
pub const DEFAULT_MERGE_CAP: usize = 512;

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub children: Vec<Dmc>,
    pub params: Vec<ParamSet>,
    pub merged_output_sizes: Vec<usize>,
}

fn enumeration_size(m: usize, q: usize, l: usize) -> u128 {
    (m as u128).saturating_pow(l as u32).saturating_mul((q as u128).saturating_pow(l as u32))
}

/// Degrades `w` until the enumeration fits, or fails with a guard error
/// when no cap was offered.
fn fit_input(w: &Dmc, l: usize, merge_cap: Option<usize>) -> Result<Dmc> {
    let q = w.q();
    let base = canonicalize(w);
    let need = enumeration_size(base.num_outputs(), q, l);
    if need <= ENUMERATION_LIMIT {
        return Ok(base);
    }
    let Some(cap) = merge_cap else {
        return Err(Error::Guard { what: "synthetic channel enumeration", needed: need, limit: ENUMERATION_LIMIT });
    };
    let mut m = cap.min(base.num_outputs());
    while m > q && enumeration_size(m, q, l) > ENUMERATION_LIMIT {
        m -= 1;
    }
    if enumeration_size(m, q, l) > ENUMERATION_LIMIT {
        return Err(Error::Guard {
            what: "synthetic channel enumeration even at the smallest merge cap",
            needed: enumeration_size(m, q, l),
            limit: ENUMERATION_LIMIT,
        });
    }
    degrade_merge(&base, m)
}

/// Accumulates one child's output columns; columns whose rounded
/// posteriors agree are merged when the child is finished.
struct ChildAcc {
    q: usize,
    keys: Vec<i64>,
    cols: Vec<f64>,
}

impl ChildAcc {
    fn new(q: usize) -> ChildAcc {
        ChildAcc { q, keys: Vec::new(), cols: Vec::new() }
    }

    fn push(&mut self, col: &[f64]) {
        let s: f64 = col.iter().sum();
        if s <= 0.0 {
            return;
        }
        self.keys.extend(col.iter().map(|&v| libm::round(v / s * 1e12) as i64));
        self.cols.extend_from_slice(col);
    }

    fn finish(self, f: &Field) -> Result<Dmc> {
        let q = self.q;
        let n = self.cols.len() / q;
        let key = |i: usize| &self.keys[i * q..(i + 1) * q];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_unstable_by(|&a, &b| key(a).cmp(key(b)));
        let mut joint: Vec<f64> = Vec::new();
        let mut prev: Option<usize> = None;
        for &i in &order {
            let same = prev.is_some_and(|p| key(p) == key(i));
            if !same {
                joint.extend(core::iter::repeat(0.0).take(q));
            }
            let base = joint.len() - q;
            for x in 0..q {
                joint[base + x] += self.cols[i * q + x];
            }
            prev = Some(i);
        }
        let nout = joint.len() / q;
        // product tables sum to 1 only up to rounding; renormalize
        let s: f64 = joint.iter().sum();
        joint.iter_mut().for_each(|v| *v /= s);
        Dmc::from_joint(f, joint, nout)
    }
}

/// Core enumeration: for every output tuple, the table `p(u) = prod W(x_k, y_k)`
/// is built once and block-summed into each requested child.
fn synthesize_children(w: &Dmc, k: &Kernel, which: &[usize]) -> Result<Vec<Dmc>> {
    let f = w.field();
    let q = w.q();
    let l = k.size();
    let m = w.num_outputs();
    let nu = q.pow(l as u32);
    // x = u G for every u, u_1 the most significant digit
    let mut xs: Vec<Elem> = Vec::with_capacity(nu * l);
    let mut u = vec![0 as Elem; l];
    for idx in 0..nu {
        let mut r = idx;
        for d in (0..l).rev() {
            u[d] = (r % q) as Elem;
            r /= q;
        }
        xs.extend(k.apply(&u));
    }
    let joint = w.joint();
    let mut accs: Vec<ChildAcc> = which.iter().map(|_| ChildAcc::new(q)).collect();
    let mut y = vec![0usize; l];
    let mut p = vec![0.0f64; nu];
    let mut col = vec![0.0f64; q];
    loop {
        for idx in 0..nu {
            let x = &xs[idx * l..(idx + 1) * l];
            let mut v = 1.0;
            for kk in 0..l {
                v *= joint[y[kk] * q + x[kk] as usize];
                if v == 0.0 {
                    break;
                }
            }
            p[idx] = v;
        }
        for (acc, &j) in accs.iter_mut().zip(which) {
            // prefix (u_1..u_j) indexes blocks of size q^{l-j}
            let block = q.pow((l - j) as u32);
            let prefixes = q.pow((j - 1) as u32);
            for a in 0..prefixes {
                for uj in 0..q {
                    let start = (a * q + uj) * block;
                    col[uj] = p[start..start + block].iter().sum();
                }
                acc.push(&col);
            }
        }
        // next output tuple
        let mut d = l;
        loop {
            if d == 0 {
                return accs.into_iter().map(|a| a.finish(f)).collect();
            }
            d -= 1;
            y[d] += 1;
            if y[d] < m {
                break;
            }
            y[d] = 0;
        }
    }
}

fn check_kernel(w: &Dmc, k: &Kernel) -> Result<()> {
    if w.field() != k.field() {
        return Err(invalid("channel and kernel live over different fields"));
    }
    Ok(())
}

fn finish_child(c: Dmc, degraded_input: bool, merge_cap: Option<usize>) -> Result<Dmc> {
    let c = c.mark_degraded(degraded_input);
    match merge_cap {
        Some(cap) if c.num_outputs() > cap => degrade_merge(&c, cap),
        _ => Ok(c),
    }
}

/// The synthetic channel `W^(j)`, `j` in `1..=l`.
pub fn synthesize(w: &Dmc, k: &Kernel, j: usize, merge_cap: Option<usize>) -> Result<Dmc> {
    check_kernel(w, k)?;
    let l = k.size();
    if j == 0 || j > l {
        return Err(invalid(alloc::format!("child index {j} outside 1..={l}")));
    }
    let base = fit_input(w, l, merge_cap)?;
    let c = synthesize_children(&base, k, &[j])?.pop().unwrap();
    finish_child(c, base.is_degraded(), merge_cap)
}

/// All `l` children at once, sharing the enumeration.
pub fn synthesize_all(w: &Dmc, k: &Kernel, merge_cap: Option<usize>) -> Result<SynthesisResult> {
    check_kernel(w, k)?;
    let l = k.size();
    let base = fit_input(w, l, merge_cap)?;
    let which: Vec<usize> = (1..=l).collect();
    let raw = synthesize_children(&base, k, &which)?;
    let mut children = Vec::with_capacity(l);
    let mut sizes = Vec::with_capacity(l);
    for c in raw {
        sizes.push(c.num_outputs());
        children.push(finish_child(c, base.is_degraded(), merge_cap)?);
    }
    let params = children.iter().map(params).collect();
    Ok(SynthesisResult { children, params, merged_output_sizes: sizes })
}

/// The one-output channel whose input law is `Q`; its synthetic channels
/// track the input-distribution process.
pub fn q_as_channel(f: &Field, q_dist: &[f64]) -> Result<Dmc> {
    if q_dist.len() != f.q() {
        return Err(invalid("distribution length differs from q"));
    }
    let trans: Vec<Vec<f64>> = (0..f.q()).map(|_| vec![1.0]).collect();
    Dmc::from_trans(f, q_dist, &trans, Some(vec!["*".into()]))
}

/// Erasure-pattern counts for the closed-form erasure children.
///
/// `counts[j][w]` is the number of erasure patterns of size `w` that leave
/// `U_{j+1}` undetermined given the outputs and `U_1..U_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BecMaps {
    pub l: usize,
    pub counts: Vec<Vec<u64>>,
}

/// Largest kernel size accepted by [`bec_maps`].
pub const BEC_MAX_L: usize = 20;

/// Binary incremental span membership with bitmask vectors.
struct BitBasis {
    pivots: [u32; 32],
}

impl BitBasis {
    fn new() -> BitBasis {
        BitBasis { pivots: [0; 32] }
    }
    fn reduce(&self, mut v: u32) -> u32 {
        while v != 0 {
            let b = 31 - v.leading_zeros() as usize;
            if self.pivots[b] == 0 {
                return v;
            }
            v ^= self.pivots[b];
        }
        0
    }
    fn insert(&mut self, v: u32) {
        let r = self.reduce(v);
        if r != 0 {
            let b = 31 - r.leading_zeros() as usize;
            self.pivots[b] = r;
        }
    }
}

/// General-field incremental span membership.
struct VecBasis<'a> {
    f: &'a Field,
    /// (pivot position, vector normalized to 1 at the pivot)
    rows: Vec<(usize, Vec<Elem>)>,
}

impl<'a> VecBasis<'a> {
    fn reduce(&self, v: &[Elem]) -> Vec<Elem> {
        let mut v = v.to_vec();
        for (p, r) in &self.rows {
            let c = v[*p];
            if c != 0 {
                self.f.axpy(&mut v, self.f.neg(c), r);
            }
        }
        v
    }
    fn insert(&mut self, v: &[Elem]) {
        let mut r = self.reduce(v);
        if let Some(p) = r.iter().position(|&x| x != 0) {
            let s = self.f.inv(r[p]).unwrap();
            r.iter_mut().for_each(|x| *x = self.f.mul(*x, s));
            // keep the basis fully reduced at existing pivots
            for (_, row) in self.rows.iter_mut() {
                let c = row[p];
                if c != 0 {
                    self.f.axpy(row, self.f.neg(c), &r);
                }
            }
            self.rows.push((p, r));
        }
    }
}

/// Precomputes [`BecMaps`] for a kernel of size at most 20.
pub fn bec_maps(k: &Kernel) -> Result<BecMaps> {
    let l = k.size();
    if l > BEC_MAX_L {
        return Err(Error::Guard { what: "erasure pattern enumeration (kernel size)", needed: l as u128, limit: BEC_MAX_L as u128 });
    }
    let f = k.field();
    let g = k.matrix();
    let mut counts = vec![vec![0u64; l + 1]; l];
    if f.q() == 2 {
        // column k as a bitmask over u coordinates
        let cols: Vec<u32> = (0..l)
            .map(|c| (0..l).fold(0u32, |acc, r| acc | ((g.get(r, c) as u32) << r)))
            .collect();
        for mask in 0u32..(1u32 << l) {
            // bit set = erased
            let w = mask.count_ones() as usize;
            let mut b = BitBasis::new();
            for (c, &col) in cols.iter().enumerate() {
                if mask >> c & 1 == 0 {
                    b.insert(col);
                }
            }
            for j in 0..l {
                let e = 1u32 << j;
                if b.reduce(e) != 0 {
                    counts[j][w] += 1;
                }
                b.insert(e);
            }
        }
    } else {
        let cols: Vec<Vec<Elem>> = (0..l).map(|c| g.col(c)).collect();
        for mask in 0u32..(1u32 << l) {
            let w = mask.count_ones() as usize;
            let mut b = VecBasis { f, rows: Vec::new() };
            for (c, col) in cols.iter().enumerate() {
                if mask >> c & 1 == 0 {
                    b.insert(col);
                }
            }
            for j in 0..l {
                let mut e = vec![0 as Elem; l];
                e[j] = 1;
                if b.reduce(&e).iter().any(|&x| x != 0) {
                    counts[j][w] += 1;
                }
                b.insert(&e);
            }
        }
    }
    Ok(BecMaps { l, counts })
}

impl BecMaps {
    /// Erasure probabilities of the `l` children of an erasure channel.
    pub fn apply(&self, eps: f64) -> Vec<f64> {
        let l = self.l;
        // eps^w (1-eps)^{l-w} for each w
        let weights: Vec<f64> = (0..=l).map(|w| pow(eps, w as f64) * pow(1.0 - eps, (l - w) as f64)).collect();
        self.counts
            .iter()
            .map(|c| {
                let v: f64 = c.iter().zip(&weights).map(|(&n, &p)| n as f64 * p).sum();
                v.clamp(0.0, 1.0)
            })
            .collect()
    }

    pub fn apply_one(&self, eps: f64, j: usize) -> f64 {
        let l = self.l;
        let v: f64 = self.counts[j]
            .iter()
            .enumerate()
            .map(|(w, &n)| n as f64 * pow(eps, w as f64) * pow(1.0 - eps, (l - w) as f64))
            .sum();
        v.clamp(0.0, 1.0)
    }
}

/// Erasure probabilities of the children of an erasure channel with
/// erasure probability `eps`.
pub fn bec_synthesize(eps: f64, k: &Kernel) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(invalid("erasure probability outside [0, 1]"));
    }
    Ok(bec_maps(k)?.apply(eps))
}
