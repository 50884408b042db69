//! Code construction: frozen sets from leaf parameters, pruned trees from
//! stopping rules, and the bookkeeping of rate, design error and
//! encoder/decoder unit counts.
//!
//! Positions are indexed by the path `(j_1..j_n)` read as a base-`l` number
//! with `j_1` most significant. A pruned leaf at depth `d` owns the
//! `l^{n-d}` consecutive positions below it.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, pow};

use crate::channel::{params, Dmc, ParamSet};
use crate::error::{invalid, Error, Result};
use crate::exec::Executor;
use crate::kernel::Kernel;
use crate::process::{erasure_params, erasure_prob, impossible_combination, stop_rule, StopCause};
use crate::transform::{bec_maps, synthesize_all, BecMaps};

/// Largest block length a code may have.
pub const MAX_BLOCK: u128 = 1 << 24;
/// Largest `l^n` for constructions that need every depth-`n` channel table.
pub const TABLE_LEAF_LIMIT: u128 = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct PrunedLeaf {
    pub path: Vec<u16>,
    pub cause: StopCause,
    pub info: bool,
    pub z: f64,
    pub z_mxd: f64,
    pub s_max: f64,
    /// `T(Q_s)` when the input-law process is tracked.
    pub t_q: Option<f64>,
    /// `T(W)` and `Z(Q)` both small, a combination that cannot occur.
    pub impossible: bool,
}

impl PrunedLeaf {
    pub fn depth(&self) -> usize {
        self.path.len()
    }
}

/// Leaves in depth-first (lexicographic) order plus internal-node counts.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedTree {
    pub l: usize,
    pub n: usize,
    pub leaves: Vec<PrunedLeaf>,
    /// Number of internal nodes at each depth `0..n`.
    pub internal_per_depth: Vec<u64>,
}

impl PrunedTree {
    /// `sum over leaves of l^{n - depth}`; equals `l^n` for a valid tree.
    pub fn leaf_weight(&self) -> u128 {
        self.leaves.iter().map(|lf| pow_u(self.l, self.n - lf.depth())).sum()
    }

    /// Measure-weighted mean leaf depth.
    pub fn mean_depth(&self) -> f64 {
        let num: u128 = self.leaves.iter().map(|lf| lf.depth() as u128 * pow_u(self.l, self.n - lf.depth())).sum();
        num as f64 / pow_u(self.l, self.n) as f64
    }

    pub fn max_depth(&self) -> usize {
        self.leaves.iter().map(PrunedLeaf::depth).max().unwrap_or(0)
    }

    /// Encoder/decoder units: each internal node at depth `d` is `l^{n-d-1}`
    /// copies of the kernel, so the total is `(N / l) E[s]`.
    pub fn eu_du_pairs(&self) -> u128 {
        self.internal_per_depth.iter().enumerate().map(|(d, &c)| c as u128 * pow_u(self.l, self.n - d - 1)).sum()
    }

    /// Rebuilds a tree from its leaves, which must be in depth-first order
    /// and tile the full tree.
    pub fn from_leaves(l: usize, n: usize, leaves: Vec<PrunedLeaf>) -> Result<PrunedTree> {
        if l < 2 {
            return Err(invalid("tree arity must be at least 2"));
        }
        block_len(l, n)?;
        let mut internal = vec![0u64; n];
        // consecutive aligned blocks starting at 0 tile the positions
        let mut pos: u128 = 0;
        for lf in &leaves {
            if lf.depth() > n || lf.path.iter().any(|&b| b as usize >= l) {
                return Err(invalid("leaf path out of range"));
            }
            let start: u128 = lf.path.iter().enumerate().map(|(d, &b)| b as u128 * pow_u(l, n - 1 - d)).sum();
            if start != pos {
                return Err(invalid("leaves are not in depth-first order or do not tile the tree"));
            }
            pos += pow_u(l, n - lf.depth());
        }
        // internal nodes are the distinct proper prefixes
        let mut prefixes: Vec<Vec<u16>> = Vec::new();
        for lf in &leaves {
            for d in 0..lf.depth() {
                prefixes.push(lf.path[..d].to_vec());
            }
        }
        prefixes.sort();
        prefixes.dedup();
        for p in &prefixes {
            internal[p.len()] += 1;
        }
        let tree = PrunedTree { l, n, leaves, internal_per_depth: internal };
        if tree.leaves.is_empty() || tree.leaf_weight() != pow_u(l, n) {
            return Err(invalid("leaves do not cover the tree"));
        }
        Ok(tree)
    }

    pub fn cause_weight(&self, c: StopCause) -> u128 {
        self.leaves.iter().filter(|lf| lf.cause == c).map(|lf| pow_u(self.l, self.n - lf.depth())).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeSpec {
    pub kernel: Kernel,
    pub n: usize,
    /// Per position: true for information, false for frozen.
    pub info: Vec<bool>,
    pub pruned: Option<PrunedTree>,
    /// Union bound on block error: `sum over selected positions of (q/2) Z`
    /// (plus `T(Q_s)` for asymmetric constructions).
    pub design_pe: f64,
    /// The guaranteed ceiling on `design_pe` (`qN theta`, or `3qN theta`
    /// for asymmetric constructions), when a threshold was used.
    pub design_bound: Option<f64>,
    pub rate: f64,
    pub eu_du_pairs: u128,
    pub mean_s: f64,
    pub theta: Option<f64>,
    /// Leaf parameters came from degraded tables.
    pub degraded: bool,
}

impl CodeSpec {
    pub fn block_len(&self) -> usize {
        self.info.len()
    }
    pub fn info_len(&self) -> usize {
        self.info.iter().filter(|&&b| b).count()
    }
    /// Frozen positions in increasing order.
    pub fn frozen_positions(&self) -> Vec<usize> {
        self.info.iter().enumerate().filter(|(_, &b)| !b).map(|(i, _)| i).collect()
    }
}

fn pow_u(l: usize, e: usize) -> u128 {
    (l as u128).pow(e as u32)
}

fn block_len(l: usize, n: usize) -> Result<usize> {
    let big = (l as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if big > MAX_BLOCK {
        return Err(Error::Guard { what: "block length", needed: big, limit: MAX_BLOCK });
    }
    Ok(big as usize)
}

/// Per-position design error of one selected synthetic channel.
fn pe_bound(q: usize, z: f64) -> f64 {
    (q as f64 / 2.0 * z).min(1.0)
}

/// The default pruning threshold `1 / (3 q N^2)`.
pub fn default_theta(q: usize, l: usize, n: usize) -> f64 {
    let nn = pow(l as f64, n as f64);
    1.0 / (3.0 * q as f64 * nn * nn)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Threshold(f64),
    TopK(usize),
}

/// Leaf parameters of the full depth-`n` tree, in position order.
pub fn leaf_params<E: Executor>(w: &Dmc, k: &Kernel, n: usize, merge_cap: Option<usize>, exec: &E) -> Result<(Vec<ParamSet>, bool)> {
    let l = k.size();
    let nlen = block_len(l, n)?;
    let q = w.q();
    if let Some(eps) = erasure_prob(w) {
        let maps = bec_maps(k)?;
        let mut level = vec![eps];
        for _ in 0..n {
            level = level.iter().flat_map(|&e| maps.apply(e)).collect();
        }
        return Ok((level.into_iter().map(|e| erasure_params(q, e)).collect(), false));
    }
    if nlen as u128 > TABLE_LEAF_LIMIT {
        return Err(Error::Guard { what: "depth-n channel tables", needed: nlen as u128, limit: TABLE_LEAF_LIMIT });
    }
    let mut level = vec![w.clone()];
    for _ in 0..n {
        let next = exec.map(level, |c| synthesize_all(&c, k, merge_cap).map(|r| r.children));
        level = Vec::with_capacity(next.len() * l);
        for r in next {
            level.extend(r?);
        }
    }
    let degraded = level.iter().any(Dmc::is_degraded);
    Ok((level.iter().map(params).collect(), degraded))
}

/// A full-depth code selecting positions by `Z`.
pub fn build_frozen<E: Executor>(
    w: &Dmc,
    k: &Kernel,
    n: usize,
    strategy: Strategy,
    merge_cap: Option<usize>,
    exec: &E,
) -> Result<CodeSpec> {
    let (leaves, degraded) = leaf_params(w, k, n, merge_cap, exec)?;
    frozen_from_params(k, n, &leaves, strategy, degraded)
}

/// Selection step of [`build_frozen`] on precomputed leaf parameters.
pub fn frozen_from_params(k: &Kernel, n: usize, leaves: &[ParamSet], strategy: Strategy, degraded: bool) -> Result<CodeSpec> {
    let l = k.size();
    let nlen = block_len(l, n)?;
    if leaves.len() != nlen {
        return Err(invalid("leaf parameter count differs from l^n"));
    }
    let q = k.field().q();
    let mut info = vec![false; nlen];
    let theta = match strategy {
        Strategy::Threshold(t) => {
            for (i, p) in leaves.iter().enumerate() {
                info[i] = p.z < t;
            }
            Some(t)
        }
        Strategy::TopK(kk) => {
            if kk > nlen {
                return Err(invalid("K exceeds the block length"));
            }
            let mut order: Vec<usize> = (0..nlen).collect();
            // stable: equal Z keeps lexicographic path order
            order.sort_by(|&a, &b| leaves[a].z.total_cmp(&leaves[b].z));
            for &i in &order[..kk] {
                info[i] = true;
            }
            None
        }
    };
    let design_pe = leaves.iter().zip(&info).filter(|(_, &b)| b).map(|(p, _)| pe_bound(q, p.z)).sum();
    let count = info.iter().filter(|&&b| b).count();
    Ok(CodeSpec {
        kernel: k.clone(),
        n,
        info,
        pruned: None,
        design_pe,
        design_bound: None,
        rate: count as f64 / nlen as f64,
        eu_du_pairs: pow_u(l, n.saturating_sub(1)) * n as u128,
        mean_s: n as f64,
        theta,
        degraded,
    })
}

/// A node during pruned construction.
enum NodeVal {
    Erasure(f64),
    Table { w: Dmc, pw: ParamSet, q: Option<(Dmc, ParamSet)> },
}

struct Pruner<'a> {
    k: &'a Kernel,
    q: usize,
    maps: Option<BecMaps>,
    merge_cap: Option<usize>,
    degraded: bool,
}

impl Pruner<'_> {
    /// `(z, z_mxd, s_max, q params)` of a node.
    fn summary(&self, v: &NodeVal) -> (f64, f64, f64, Option<(f64, f64, f64)>) {
        match v {
            NodeVal::Erasure(e) => {
                let p = erasure_params(self.q, *e);
                (p.z, p.z_mxd, p.s_max, None)
            }
            NodeVal::Table { pw, q, .. } => (pw.z, pw.z_mxd, pw.s_max, q.as_ref().map(|(_, p)| (p.z_mxd, p.s_max, p.t))),
        }
    }

    fn children(&mut self, v: &NodeVal) -> Result<Vec<NodeVal>> {
        match v {
            NodeVal::Erasure(e) => Ok(self.maps.as_ref().unwrap().apply(*e).into_iter().map(NodeVal::Erasure).collect()),
            NodeVal::Table { w, q, .. } => {
                let rw = synthesize_all(w, self.k, self.merge_cap)?;
                let rq = match q {
                    Some((qc, _)) => Some(synthesize_all(qc, self.k, self.merge_cap)?),
                    None => None,
                };
                let mut out = Vec::with_capacity(rw.children.len());
                for (j, (c, p)) in rw.children.into_iter().zip(rw.params).enumerate() {
                    self.degraded |= c.is_degraded();
                    let qn = rq.as_ref().map(|r| (r.children[j].clone(), r.params[j].clone()));
                    out.push(NodeVal::Table { w: c, pw: p, q: qn });
                }
                Ok(out)
            }
        }
    }
}

fn prune(w: &Dmc, asym_q: Option<&Dmc>, k: &Kernel, n: usize, theta: f64, merge_cap: Option<usize>) -> Result<(PrunedTree, bool)> {
    if !(theta >= 0.0) {
        return Err(invalid("theta must be non-negative"));
    }
    let l = k.size();
    block_len(l, n)?;
    let q = w.q();
    let root = match (asym_q, erasure_prob(w)) {
        (None, Some(e)) => NodeVal::Erasure(e),
        _ => NodeVal::Table { w: w.clone(), pw: params(w), q: asym_q.map(|c| (c.clone(), params(c))) },
    };
    let maps = match root {
        NodeVal::Erasure(_) => Some(bec_maps(k)?),
        _ => None,
    };
    let mut pr = Pruner { k, q, maps, merge_cap, degraded: w.is_degraded() };
    let mut leaves = Vec::new();
    let mut internal = vec![0u64; n];
    let mut stack: Vec<(NodeVal, Vec<u16>)> = vec![(root, Vec::new())];
    while let Some((v, path)) = stack.pop() {
        let d = path.len();
        let (z, z_mxd, s_max, qs) = pr.summary(&v);
        let rule = stop_rule((z_mxd, s_max), qs.map(|(zq, sq, _)| (zq, sq)), theta);
        let cause = match (rule, d == n) {
            (Some(c), _) => Some(c),
            (None, true) => Some(StopCause::DepthOut),
            (None, false) => None,
        };
        match cause {
            Some(c) => {
                let impossible = qs.is_some_and(|(zq, sq, _)| impossible_combination((z_mxd, s_max), (zq, sq), theta));
                leaves.push(PrunedLeaf {
                    path,
                    cause: c,
                    info: c == StopCause::ZStop,
                    z,
                    z_mxd,
                    s_max,
                    t_q: qs.map(|x| x.2),
                    impossible,
                });
            }
            None => {
                internal[d] += 1;
                let kids = pr.children(&v)?;
                for (j, c) in kids.into_iter().enumerate().rev() {
                    let mut p = path.clone();
                    p.push(j as u16);
                    stack.push((c, p));
                }
            }
        }
    }
    let degraded = pr.degraded;
    Ok((PrunedTree { l, n, leaves, internal_per_depth: internal }, degraded))
}

/// The code carried by a pruned tree: information leaves own their
/// consecutive block of positions. `asym` selects the `3qN theta` bound.
pub fn code_from_tree(k: &Kernel, tree: PrunedTree, theta: f64, degraded: bool, asym: bool) -> Result<CodeSpec> {
    if tree.l != k.size() {
        return Err(invalid("tree arity differs from the kernel size"));
    }
    let l = tree.l;
    let n = tree.n;
    let q = k.field().q();
    let nlen = block_len(l, n)?;
    let mut info = vec![false; nlen];
    let mut pos = 0usize;
    let mut design_pe = 0.0;
    let mut info_weight: u128 = 0;
    for lf in &tree.leaves {
        let m = pow_u(l, n - lf.depth()) as usize;
        if lf.info {
            info[pos..pos + m].iter_mut().for_each(|b| *b = true);
            info_weight += m as u128;
            design_pe += m as f64 * (pe_bound(q, lf.z) + lf.t_q.unwrap_or(0.0));
        }
        pos += m;
    }
    debug_assert_eq!(pos, nlen);
    let factor = if asym { 3.0 } else { 1.0 };
    Ok(CodeSpec {
        kernel: k.clone(),
        n,
        design_pe,
        design_bound: Some(factor * q as f64 * nlen as f64 * theta),
        rate: info_weight as f64 / nlen as f64,
        eu_du_pairs: tree.eu_du_pairs(),
        mean_s: tree.mean_depth(),
        theta: Some(theta),
        degraded,
        info,
        pruned: Some(tree),
    })
}

/// A code from the channel tree pruned at `theta`: a node becomes a leaf
/// once `Z_mxd` (information) or `S_max` (frozen) drops below `theta`, or
/// at depth `n` (frozen).
pub fn build_pruned(w: &Dmc, k: &Kernel, n: usize, theta: f64, merge_cap: Option<usize>) -> Result<CodeSpec> {
    let (tree, degraded) = prune(w, None, k, n, theta, merge_cap)?;
    code_from_tree(k, tree, theta, degraded, false)
}

/// Pruning that tracks the input law `q_dist` as a channel along every
/// path. A node stops when both processes have a small parameter and is an
/// information leaf when `Z_mxd(W)` and `S_max(Q)` are both small.
pub fn build_pruned_asymmetric(w: &Dmc, q_dist: &[f64], k: &Kernel, n: usize, theta: f64, merge_cap: Option<usize>) -> Result<CodeSpec> {
    let qc = crate::transform::q_as_channel(w.field(), q_dist)?;
    let (tree, degraded) = prune(w, Some(&qc), k, n, theta, merge_cap)?;
    code_from_tree(k, tree, theta, degraded, true)
}

/// Weight of leaves in the impossible combination.
pub fn impossible_weight(tree: &PrunedTree) -> u128 {
    tree.leaves.iter().filter(|lf| lf.impossible).map(|lf| pow_u(tree.l, tree.n - lf.depth())).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaFamily {
    /// `4^{-n}`
    Pow4,
    /// `exp(-n^tau)`
    ExpNTau(f64),
    /// `exp(-l^{pi n})`
    Elpin(f64),
    /// `1 / (3 q N^2)`
    Default,
}

impl ThetaFamily {
    pub fn theta(&self, q: usize, l: usize, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            ThetaFamily::Pow4 => pow(4.0, -nf),
            ThetaFamily::ExpNTau(tau) => exp(-pow(nf, tau)),
            ThetaFamily::Elpin(pi) => exp(-pow(l as f64, pi * nf)),
            ThetaFamily::Default => default_theta(q, l, n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub theta: f64,
    pub mean_s: f64,
    pub rate: f64,
    pub design_pe: f64,
    pub design_bound: f64,
    pub eu_du_pairs: u128,
    pub degraded: bool,
}

/// One pruned construction per depth in `n_list`.
pub fn tradeoff_sweep<E: Executor>(
    w: &Dmc,
    k: &Kernel,
    n_list: &[usize],
    family: ThetaFamily,
    merge_cap: Option<usize>,
    exec: &E,
) -> Result<Vec<SweepRow>> {
    let q = w.q();
    let l = k.size();
    let rows = exec.map(n_list.to_vec(), |n| -> Result<SweepRow> {
        let theta = family.theta(q, l, n);
        let spec = build_pruned(w, k, n, theta, merge_cap)?;
        Ok(SweepRow {
            n,
            theta,
            mean_s: spec.mean_s,
            rate: spec.rate,
            design_pe: spec.design_pe,
            design_bound: spec.design_bound.unwrap_or(0.0),
            eu_du_pairs: spec.eu_du_pairs,
            degraded: spec.degraded,
        })
    });
    rows.into_iter().collect()
}
