//! The channel process `W_0 = W, W_{n+1} = W_n^{(J_{n+1})}` with `J`
//! uniform on `1..=l`, and the parameter processes it carries.
//!
//! Three regimes: the full tree at small depth, closed-form density
//! evolution for erasure channels, and seeded path sampling otherwise.
//! Sampled runs draw each trial's branches from its own stream and reduce in
//! trial order, so results do not depend on the executor.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, sqrt};
use rand::Rng;

use crate::channel::{params, Dmc, ParamSet};
use crate::error::{invalid, Error, Result};
use crate::exec::{chunks, Executor};
use crate::kernel::Kernel;
use crate::math::kahan_sum;
use crate::rng::stream;
use crate::transform::{bec_maps, synthesize_all, BecMaps};

/// Statistic order inside a [`Stat4`].
pub const STAT_NAMES: [&str; 4] = ["H", "Z_mxd", "T", "S_max"];
pub type Stat4 = [f64; 4];

/// Largest number of leaves the full tree may have.
pub const TREE_LEAF_LIMIT: u128 = 1 << 20;
/// Largest `l^n` for exact erasure density evolution.
pub const BEC_EXACT_LIMIT: u128 = 10_000_000;

const CHUNK: u64 = 512;

pub fn stat4(p: &ParamSet) -> Stat4 {
    [p.h, p.z_mxd, p.t, p.s_max]
}

/// Parameters of the q-ary erasure channel in closed form.
pub fn erasure_params(q: usize, eps: f64) -> ParamSet {
    let qf = q as f64;
    let mut z_d = vec![eps; q];
    z_d[0] = 1.0;
    ParamSet {
        h: eps,
        i: 1.0 - eps,
        pe: eps * (qf - 1.0) / qf,
        z: eps,
        z_d,
        z_mxd: eps,
        t: 2.0 * (1.0 - eps) * (qf - 1.0) / qf,
        s: 1.0 - eps,
        s_max: 1.0 - eps,
    }
}

fn erasure_stat(q: usize, eps: f64) -> Stat4 {
    stat4(&erasure_params(q, eps))
}

/// The erasure probability when `w` is equivalent to an erasure channel:
/// uniform input and every posterior either a point mass or uniform.
pub fn erasure_prob(w: &Dmc) -> Option<f64> {
    if !w.is_uniform_input() {
        return None;
    }
    let q = w.q();
    let u = 1.0 / q as f64;
    let mut eps = 0.0;
    for y in 0..w.num_outputs() {
        let col = w.joint_col(y);
        let s: f64 = col.iter().sum();
        if s <= 0.0 {
            continue;
        }
        let uniform = col.iter().all(|&v| fabs(v / s - u) < 1e-12);
        let point = col.iter().filter(|&&v| v / s > 1e-12).count() == 1;
        if uniform {
            eps += s;
        } else if !point {
            return None;
        }
    }
    Some(eps.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthRecord {
    pub depth: usize,
    pub samples: u64,
    pub mean: Stat4,
    /// Population variance in exact mode, sample variance otherwise.
    pub var: Stat4,
    /// Every value at this depth (exact modes), or the per-trial values at
    /// the final depth (sampled modes).
    pub values: Option<Vec<Stat4>>,
}

impl DepthRecord {
    /// Standard error of the mean of statistic `i`.
    pub fn stderr(&self, i: usize) -> f64 {
        if self.samples == 0 {
            return 0.0;
        }
        sqrt(self.var[i] / self.samples as f64)
    }

    fn exact(depth: usize, vals: &[Stat4], keep: bool) -> DepthRecord {
        let n = vals.len() as f64;
        let mut mean = [0.0; 4];
        let mut var = [0.0; 4];
        for i in 0..4 {
            mean[i] = kahan_sum(vals.iter().map(|v| v[i])) / n;
            var[i] = kahan_sum(vals.iter().map(|v| (v[i] - mean[i]) * (v[i] - mean[i]))) / n;
        }
        DepthRecord { depth, samples: vals.len() as u64, mean, var, values: keep.then(|| vals.to_vec()) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthStats {
    pub exact: bool,
    pub degraded: bool,
    pub seed: Option<u64>,
    pub trials: u64,
    pub records: Vec<DepthRecord>,
}

impl DepthStats {
    pub fn record(&self, depth: usize) -> Option<&DepthRecord> {
        self.records.get(depth)
    }

    /// Reduces per-trial traces (trial order) into per-depth records.
    fn from_traces(traces: &[Vec<Stat4>], n: usize, seed: u64, degraded: bool) -> DepthStats {
        let t = traces.len();
        let mut records = Vec::with_capacity(n + 1);
        if t > 0 {
            for d in 0..=n {
                let mut mean = [0.0; 4];
                let mut var = [0.0; 4];
                for i in 0..4 {
                    mean[i] = kahan_sum(traces.iter().map(|tr| tr[d][i])) / t as f64;
                    if t > 1 {
                        let ss = kahan_sum(traces.iter().map(|tr| (tr[d][i] - mean[i]) * (tr[d][i] - mean[i])));
                        var[i] = ss / (t - 1) as f64;
                    }
                }
                let values = (d == n).then(|| traces.iter().map(|tr| tr[d]).collect());
                records.push(DepthRecord { depth: d, samples: t as u64, mean, var, values });
            }
        }
        DepthStats { exact: false, degraded, seed: Some(seed), trials: t as u64, records }
    }
}

fn leaf_count(l: usize, n: usize) -> u128 {
    (l as u128).saturating_pow(n as u32)
}

/// Every node of the channel tree down to depth `n`, each depth-`m` node
/// weighted `l^-m`. Erasure channels take the closed-form route.
pub fn enumerate_tree<E: Executor>(
    w: &Dmc,
    k: &Kernel,
    n: usize,
    merge_cap: Option<usize>,
    exec: &E,
) -> Result<DepthStats> {
    let l = k.size();
    let leaves = leaf_count(l, n);
    if leaves > TREE_LEAF_LIMIT {
        return Err(Error::Guard { what: "channel tree leaves", needed: leaves, limit: TREE_LEAF_LIMIT });
    }
    let q = w.q();
    let mut records = Vec::with_capacity(n + 1);
    let mut degraded = w.is_degraded();
    if let Some(eps) = erasure_prob(w) {
        let maps = bec_maps(k)?;
        let mut level = vec![eps];
        for d in 0..=n {
            let vals: Vec<Stat4> = level.iter().map(|&e| erasure_stat(q, e)).collect();
            records.push(DepthRecord::exact(d, &vals, true));
            if d < n {
                level = level.iter().flat_map(|&e| maps.apply(e)).collect();
            }
        }
    } else {
        let mut level = vec![w.clone()];
        for d in 0..=n {
            let vals: Vec<Stat4> = level.iter().map(|c| stat4(&params(c))).collect();
            records.push(DepthRecord::exact(d, &vals, true));
            if d < n {
                let next = exec.map(level, |c| synthesize_all(&c, k, merge_cap).map(|r| r.children));
                level = Vec::with_capacity(next.len() * l);
                for r in next {
                    level.extend(r?);
                }
                degraded |= level.iter().any(Dmc::is_degraded);
            }
        }
    }
    Ok(DepthStats { exact: true, degraded, seed: None, trials: 0, records })
}

/// Depth-`n` erasure probabilities in tree order.
pub fn bec_exact_values(eps: f64, maps: &BecMaps, n: usize) -> Result<Vec<f64>> {
    let need = leaf_count(maps.l, n);
    if need > BEC_EXACT_LIMIT {
        return Err(Error::Guard { what: "exact erasure density leaves", needed: need, limit: BEC_EXACT_LIMIT });
    }
    let mut level = vec![eps];
    for _ in 0..n {
        let mut next = Vec::with_capacity(level.len() * maps.l);
        for &e in &level {
            next.extend(maps.apply(e));
        }
        level = next;
    }
    Ok(level)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityMode {
    Exact,
    Sampled { trials: u64, seed: u64 },
}

/// Branch choices `0..l` of one trial.
pub fn branches(seed: u64, trial: u64, n: usize, l: usize) -> Vec<u16> {
    let mut rng = stream(seed, trial);
    (0..n).map(|_| rng.gen_range(0..l) as u16).collect()
}

fn bec_trace(maps: &BecMaps, q: usize, eps: f64, path: &[u16]) -> Vec<Stat4> {
    let mut e = eps;
    let mut out = Vec::with_capacity(path.len() + 1);
    out.push(erasure_stat(q, e));
    for &j in path {
        e = maps.apply_one(e, j as usize);
        out.push(erasure_stat(q, e));
    }
    out
}

/// Erasure-probability process of a q-ary erasure channel. Exact mode
/// keeps every value at depth `n` only; lower depths carry moments.
pub fn bec_density<E: Executor>(eps: f64, k: &Kernel, n: usize, mode: DensityMode, exec: &E) -> Result<DepthStats> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(invalid("erasure probability outside [0, 1]"));
    }
    let maps = bec_maps(k)?;
    let q = k.field().q();
    match mode {
        DensityMode::Exact => {
            let need = leaf_count(maps.l, n);
            if need > BEC_EXACT_LIMIT {
                return Err(Error::Guard { what: "exact erasure density leaves", needed: need, limit: BEC_EXACT_LIMIT });
            }
            let mut records = Vec::with_capacity(n + 1);
            let mut level = vec![eps];
            for d in 0..=n {
                let vals: Vec<Stat4> = level.iter().map(|&e| erasure_stat(q, e)).collect();
                records.push(DepthRecord::exact(d, &vals, d == n));
                if d < n {
                    level = level.iter().flat_map(|&e| maps.apply(e)).collect();
                }
            }
            Ok(DepthStats { exact: true, degraded: false, seed: None, trials: 0, records })
        }
        DensityMode::Sampled { trials, seed } => {
            let l = maps.l;
            let parts = exec.map(chunks(trials, CHUNK), |(a, b)| {
                (a..b).map(|t| bec_trace(&maps, q, eps, &branches(seed, t, n, l))).collect::<Vec<_>>()
            });
            let traces: Vec<Vec<Stat4>> = parts.into_iter().flatten().collect();
            Ok(DepthStats::from_traces(&traces, n, seed, false))
        }
    }
}

/// A node of the memoized sampling tree.
#[derive(Clone)]
struct Node {
    w: Dmc,
    pw: ParamSet,
    q: Option<(Dmc, ParamSet)>,
}

type Level = BTreeMap<Vec<u16>, Node>;

/// Builds the nodes at the prefixes in `needed` from their parents in `prev`.
fn expand<E: Executor>(prev: &Level, needed: &BTreeSet<Vec<u16>>, k: &Kernel, cap: Option<usize>, exec: &E) -> Result<Level> {
    let mut parents: BTreeMap<&[u16], Vec<usize>> = BTreeMap::new();
    for p in needed {
        let (last, head) = p.split_last().expect("non-root prefix");
        parents.entry(head).or_default().push(*last as usize);
    }
    let jobs: Vec<(&[u16], &Node)> = parents.keys().map(|h| (*h, &prev[*h])).collect();
    let out = exec.map(jobs, |(_, node)| -> Result<(Vec<Dmc>, Vec<ParamSet>, Option<(Vec<Dmc>, Vec<ParamSet>)>)> {
        let rw = synthesize_all(&node.w, k, cap)?;
        let rq = match &node.q {
            Some((qc, _)) => {
                let r = synthesize_all(qc, k, cap)?;
                Some((r.children, r.params))
            }
            None => None,
        };
        Ok((rw.children, rw.params, rq))
    });
    let mut level = Level::new();
    for ((head, want), r) in parents.into_iter().zip(out) {
        let (cw, pw, rq) = r?;
        for j in want {
            let mut key = head.to_vec();
            key.push(j as u16);
            let q = rq.as_ref().map(|(c, p)| (c[j].clone(), p[j].clone()));
            level.insert(key, Node { w: cw[j].clone(), pw: pw[j].clone(), q });
        }
    }
    Ok(level)
}

fn root_level(w: &Dmc, q: Option<&Dmc>) -> Level {
    let mut root = Level::new();
    root.insert(Vec::new(), Node { w: w.clone(), pw: params(w), q: q.map(|c| (c.clone(), params(c))) });
    root
}

/// Seeded Monte Carlo traces of `(H, Z_mxd, T, S_max)` along `trials`
/// independent paths. Non-erasure channels share synthesized nodes between
/// paths with a common prefix and are degraded to `merge_cap` outputs.
pub fn sample_paths<E: Executor>(
    w: &Dmc,
    k: &Kernel,
    n: usize,
    trials: u64,
    seed: u64,
    merge_cap: Option<usize>,
    exec: &E,
) -> Result<DepthStats> {
    if trials == 0 {
        return Ok(DepthStats { exact: false, degraded: false, seed: Some(seed), trials: 0, records: Vec::new() });
    }
    let l = k.size();
    if let Some(eps) = erasure_prob(w) {
        let maps = bec_maps(k)?;
        let q = w.q();
        let parts = exec.map(chunks(trials, CHUNK), |(a, b)| {
            (a..b).map(|t| bec_trace(&maps, q, eps, &branches(seed, t, n, l))).collect::<Vec<_>>()
        });
        let traces: Vec<Vec<Stat4>> = parts.into_iter().flatten().collect();
        return Ok(DepthStats::from_traces(&traces, n, seed, false));
    }
    let paths: Vec<Vec<u16>> = (0..trials).map(|t| branches(seed, t, n, l)).collect();
    let mut traces: Vec<Vec<Stat4>> = vec![Vec::with_capacity(n + 1); trials as usize];
    let mut level = root_level(w, None);
    let mut degraded = w.is_degraded();
    for d in 0..=n {
        if d > 0 {
            let needed: BTreeSet<Vec<u16>> = paths.iter().map(|p| p[..d].to_vec()).collect();
            level = expand(&level, &needed, k, merge_cap, exec)?;
        }
        for (tr, p) in traces.iter_mut().zip(&paths) {
            let node = &level[&p[..d]];
            degraded |= node.w.is_degraded();
            tr.push(stat4(&node.pw));
        }
    }
    Ok(DepthStats::from_traces(&traces, n, seed, degraded))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StopCause {
    /// `Z_mxd` small (asymmetric: `Z_mxd(W)` and `S_max(Q)` small): an
    /// information position.
    ZStop,
    /// Any other stop: a frozen position.
    SStop,
    DepthOut,
}

pub const STOP_CAUSES: [StopCause; 3] = [StopCause::ZStop, StopCause::SStop, StopCause::DepthOut];

impl StopCause {
    pub fn index(self) -> usize {
        self as usize
    }
    pub fn name(self) -> &'static str {
        match self {
            StopCause::ZStop => "z-stop",
            StopCause::SStop => "s-stop",
            StopCause::DepthOut => "depth-out",
        }
    }
}

/// Stop decision at one node, `None` to keep going.
pub fn stop_rule(w: (f64, f64), q: Option<(f64, f64)>, theta: f64) -> Option<StopCause> {
    let (zw, sw) = w;
    match q {
        None => {
            if zw < theta {
                Some(StopCause::ZStop)
            } else if sw < theta {
                Some(StopCause::SStop)
            } else {
                None
            }
        }
        Some((zq, sq)) => {
            if zw.min(sw) < theta && zq.min(sq) < theta {
                if zw < theta && sq < theta {
                    Some(StopCause::ZStop)
                } else {
                    Some(StopCause::SStop)
                }
            } else {
                None
            }
        }
    }
}

/// True when `T(W)` and `Z(Q)` are both small, which cannot happen.
pub fn impossible_combination(w: (f64, f64), q: (f64, f64), theta: f64) -> bool {
    w.1 < theta && q.0 < theta
}

/// Distribution of the stopping time. Weights are trial counts in sampled
/// mode and `l^{n_max - s}` in exact mode, so `total` is `trials` or
/// `l^{n_max}` and every frequency is an exact ratio of integers.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppedStats {
    pub exact: bool,
    pub degraded: bool,
    pub seed: Option<u64>,
    pub theta: f64,
    pub n_max: usize,
    pub total: u128,
    pub s_weights: Vec<u128>,
    pub cause_weights: [u128; 3],
    /// Weight of stopped leaves whose `T(W)` and `Z(Q)` are both small.
    pub impossible: u128,
    /// Weighted mean of `(H, Z_mxd, T, S_max)` of `W_s`.
    pub mean_stopped: Stat4,
}

impl StoppedStats {
    fn new(theta: f64, n_max: usize, exact: bool, seed: Option<u64>) -> StoppedStats {
        StoppedStats {
            exact,
            degraded: false,
            seed,
            theta,
            n_max,
            total: 0,
            s_weights: vec![0; n_max + 1],
            cause_weights: [0; 3],
            impossible: 0,
            mean_stopped: [0.0; 4],
        }
    }

    fn add(&mut self, s: usize, cause: StopCause, weight: u128, stat: Stat4, impossible: bool) {
        self.total += weight;
        self.s_weights[s] += weight;
        self.cause_weights[cause.index()] += weight;
        if impossible {
            self.impossible += weight;
        }
        for (m, v) in self.mean_stopped.iter_mut().zip(stat) {
            *m += weight as f64 * v;
        }
    }

    fn finish(mut self) -> StoppedStats {
        if self.total > 0 {
            let t = self.total as f64;
            self.mean_stopped.iter_mut().for_each(|m| *m /= t);
        }
        self
    }

    pub fn mean_s(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let num: u128 = self.s_weights.iter().enumerate().map(|(s, &w)| s as u128 * w).sum();
        num as f64 / self.total as f64
    }

    /// Standard error of `mean_s` (sampled mode; 0 in exact mode).
    pub fn stderr_s(&self) -> f64 {
        if self.exact || self.total < 2 {
            return 0.0;
        }
        let m = self.mean_s();
        let t = self.total as f64;
        let ss: f64 = self.s_weights.iter().enumerate().map(|(s, &w)| w as f64 * (s as f64 - m) * (s as f64 - m)).sum();
        sqrt(ss / (t - 1.0) / t)
    }

    pub fn cause_freq(&self, c: StopCause) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.cause_weights[c.index()] as f64 / self.total as f64
    }
}

fn check_theta(theta: f64, n_max: usize) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid("theta must lie in (0, 1)"));
    }
    if n_max == 0 {
        return Err(invalid("n_max must be at least 1"));
    }
    Ok(())
}

/// Sampled stopping times `s = n_max ∧ min{m : stop}` with the rule of
/// [`stop_rule`]; `asym_q` is the input law seen as a channel
/// (see [`crate::transform::q_as_channel`]) and is tracked on the same path.
#[allow(clippy::too_many_arguments)]
pub fn stopped_paths<E: Executor>(
    w: &Dmc,
    k: &Kernel,
    theta: f64,
    n_max: usize,
    trials: u64,
    seed: u64,
    asym_q: Option<&Dmc>,
    merge_cap: Option<usize>,
    exec: &E,
) -> Result<StoppedStats> {
    check_theta(theta, n_max)?;
    let l = k.size();
    let mut out = StoppedStats::new(theta, n_max, false, Some(seed));
    if trials == 0 {
        return Ok(out);
    }
    if asym_q.is_none() {
        if let Some(eps) = erasure_prob(w) {
            let maps = bec_maps(k)?;
            let q = w.q();
            let parts = exec.map(chunks(trials, CHUNK), |(a, b)| {
                (a..b)
                    .map(|t| {
                        let path = branches(seed, t, n_max, l);
                        let mut e = eps;
                        for (m, &j) in path.iter().enumerate() {
                            let st = erasure_stat(q, e);
                            if let Some(c) = stop_rule((st[1], st[3]), None, theta) {
                                return (m, c, st);
                            }
                            e = maps.apply_one(e, j as usize);
                        }
                        let st = erasure_stat(q, e);
                        let c = stop_rule((st[1], st[3]), None, theta).unwrap_or(StopCause::DepthOut);
                        (n_max, c, st)
                    })
                    .collect::<Vec<_>>()
            });
            for (s, c, st) in parts.into_iter().flatten() {
                out.add(s, c, 1, st, false);
            }
            return Ok(out.finish());
        }
    }
    let paths: Vec<Vec<u16>> = (0..trials).map(|t| branches(seed, t, n_max, l)).collect();
    let mut active: Vec<usize> = (0..paths.len()).collect();
    let mut results: Vec<Option<(usize, StopCause, Stat4, bool)>> = vec![None; paths.len()];
    let mut level = root_level(w, asym_q);
    let mut degraded = w.is_degraded();
    for d in 0..=n_max {
        if d > 0 {
            let needed: BTreeSet<Vec<u16>> = active.iter().map(|&t| paths[t][..d].to_vec()).collect();
            level = expand(&level, &needed, k, merge_cap, exec)?;
        }
        let mut still = Vec::with_capacity(active.len());
        for &t in &active {
            let node = &level[&paths[t][..d]];
            degraded |= node.w.is_degraded();
            let pw = (node.pw.z_mxd, node.pw.s_max);
            let pq = node.q.as_ref().map(|(_, p)| (p.z_mxd, p.s_max));
            let rule = stop_rule(pw, pq, theta);
            let cause = match (rule, d == n_max) {
                (Some(c), _) => Some(c),
                (None, true) => Some(StopCause::DepthOut),
                (None, false) => None,
            };
            match cause {
                Some(c) => {
                    let imp = pq.is_some_and(|pq| impossible_combination(pw, pq, theta));
                    results[t] = Some((d, c, stat4(&node.pw), imp));
                }
                None => still.push(t),
            }
        }
        active = still;
        if active.is_empty() {
            break;
        }
    }
    for r in results {
        let (s, c, st, imp) = r.expect("every path stops by n_max");
        out.add(s, c, 1, st, imp);
    }
    out.degraded = degraded;
    Ok(out.finish())
}

/// Exact stopping-time distribution for an erasure channel, each leaf at
/// depth `s` weighted `l^{n_max - s}`.
pub fn stopped_bec_exact(eps: f64, k: &Kernel, theta: f64, n_max: usize) -> Result<StoppedStats> {
    check_theta(theta, n_max)?;
    let maps = bec_maps(k)?;
    let l = maps.l;
    if libm::log2(l as f64) * n_max as f64 > 120.0 {
        return Err(Error::Guard { what: "stopping-time weights", needed: leaf_count(l, n_max), limit: 1 << 120 });
    }
    let q = k.field().q();
    let mut out = StoppedStats::new(theta, n_max, true, None);
    let mut stack = vec![(eps, 0usize)];
    while let Some((e, d)) = stack.pop() {
        let st = erasure_stat(q, e);
        let cause = stop_rule((st[1], st[3]), None, theta).or((d == n_max).then_some(StopCause::DepthOut));
        match cause {
            Some(c) => out.add(d, c, leaf_count(l, n_max - d), st, false),
            None => {
                for c in maps.apply(e).into_iter().rev() {
                    stack.push((c, d + 1));
                }
            }
        }
    }
    Ok(out.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Dmc;
    use crate::exec::Sequential;
    use crate::gf::Field;
    use crate::math::LN2;
    use crate::transform::q_as_channel;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        fabs(a - b) <= tol
    }

    #[test]
    fn erasure_closed_form_matches_tables() {
        for q in [2usize, 3, 4, 5] {
            let f = Field::with_order(q as u32).unwrap();
            for eps in [0.0, 0.2, 0.5, 0.9, 1.0] {
                let w = Dmc::erasure(&f, eps).unwrap();
                assert!(close(erasure_prob(&w).unwrap(), eps, 1e-12));
                let a = params(&w);
                let b = erasure_params(q, eps);
                for (x, y) in [(a.h, b.h), (a.i, b.i), (a.pe, b.pe), (a.z, b.z), (a.z_mxd, b.z_mxd), (a.t, b.t), (a.s, b.s), (a.s_max, b.s_max)] {
                    assert!(close(x, y, 1e-12), "q={q} eps={eps}: {x} vs {y}");
                }
            }
        }
        assert!(erasure_prob(&Dmc::bsc(0.1).unwrap()).is_none());
    }

    #[test]
    fn tree_depth_one_is_synthesis() {
        let w = Dmc::bsc(0.11).unwrap();
        let k = Kernel::arikan();
        let st = enumerate_tree(&w, &k, 1, None, &Sequential).unwrap();
        let r = synthesize_all(&w, &k, None).unwrap();
        let vals = st.records[1].values.as_ref().unwrap();
        for (v, p) in vals.iter().zip(&r.params) {
            assert_eq!(*v, stat4(p));
        }
    }

    #[test]
    fn tree_martingale() {
        let f = Field::with_order(3).unwrap();
        let w = crate::channel::random_dmc(&f, 3, false, &mut stream(1, 0));
        let k = Kernel::from_rows(&f, &[&[1, 0], &[2, 1]]).unwrap();
        let st = enumerate_tree(&w, &k, 2, None, &Sequential).unwrap();
        let h0 = params(&w).h;
        for r in &st.records {
            assert!(close(r.mean[0], h0, 1e-9), "depth {}: {} vs {h0}", r.depth, r.mean[0]);
        }
        assert!(!st.degraded);
        let w = Dmc::bsc(0.11).unwrap();
        let st = enumerate_tree(&w, &Kernel::arikan(), 4, None, &Sequential).unwrap();
        assert!(st.records.iter().all(|r| close(r.mean[0], params(&w).h, 1e-9)));
    }

    #[test]
    fn bec_tree_multiset() {
        let w = Dmc::bec(0.5).unwrap();
        let st = enumerate_tree(&w, &Kernel::arikan(), 2, None, &Sequential).unwrap();
        let mut v: Vec<f64> = st.records[2].values.as_ref().unwrap().iter().map(|s| s[0]).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in v.iter().zip([0.0625, 0.4375, 0.5625, 0.9375]) {
            assert!(close(*a, b, 1e-15));
        }
    }

    #[test]
    fn bec_density_exact() {
        let k = Kernel::arikan();
        let st = bec_density(0.3, &k, 0, DensityMode::Exact, &Sequential).unwrap();
        assert_eq!(st.records[0].values.as_ref().unwrap()[0][0], 0.3);
        let st = bec_density(0.3, &k, 16, DensityMode::Exact, &Sequential).unwrap();
        for r in &st.records {
            assert!(close(r.mean[0], 0.3, 1e-12));
        }
        // Z is a martingale here too, so its mean is flat; T = 1 - Z
        for w in st.records.windows(2) {
            assert!(w[1].mean[1] <= w[0].mean[1] + 1e-12);
        }
        assert!(bec_density(0.3, &k, 24, DensityMode::Exact, &Sequential).is_err());
    }

    #[test]
    fn sampled_bec_is_seed_deterministic() {
        let k = Kernel::arikan();
        let m = DensityMode::Sampled { trials: 2000, seed: 7 };
        let a = bec_density(0.5, &k, 12, m, &Sequential).unwrap();
        let b = bec_density(0.5, &k, 12, m, &Sequential).unwrap();
        assert_eq!(a, b);
        let r = &a.records[12];
        assert!(fabs(r.mean[0] - 0.5) < 4.0 * r.stderr(0) + 1e-12);
    }

    #[test]
    fn sample_paths_empty_and_martingale() {
        let w = Dmc::bsc(0.11).unwrap();
        let k = Kernel::arikan();
        let st = sample_paths(&w, &k, 5, 0, 1, Some(64), &Sequential).unwrap();
        assert!(st.records.is_empty());
        let st = sample_paths(&w, &k, 6, 2000, 3, Some(64), &Sequential).unwrap();
        let h0 = params(&w).h;
        for r in &st.records {
            assert!(fabs(r.mean[0] - h0) <= 4.0 * r.stderr(0) + 1e-9, "depth {}", r.depth);
        }
    }

    #[test]
    fn common_fate_on_sampled_nodes() {
        let k = Kernel::arikan();
        for w in [Dmc::bsc(0.11).unwrap(), bsc_like_z()] {
            let st = sample_paths(&w, &k, 5, 300, 11, Some(64), &Sequential).unwrap();
            for r in &st.records {
                let (h, z) = (r.mean[0], r.mean[1]);
                // means of a pointwise inequality keep it (Z >= H, 1 - Z >= (1 - H) ln 2)
                assert!(z >= h - 1e-9);
                assert!(1.0 - z >= (1.0 - h) * LN2 - 1e-9);
            }
            for v in st.records.last().unwrap().values.as_ref().unwrap() {
                let (h, z) = (v[0], v[1]);
                assert!(z >= h - 1e-9 && z * z <= h + 1e-9 && 1.0 - z >= (1.0 - h) * LN2 - 1e-9);
            }
        }
    }

    fn bsc_like_z() -> Dmc {
        crate::channel::symmetrize(
            &Dmc::from_trans(&Field::binary(), &[0.5, 0.5], &[vec![1.0, 0.0], vec![0.3, 0.7]], None).unwrap(),
        )
    }

    #[test]
    fn stop_rule_cases() {
        assert_eq!(stop_rule((0.1, 0.9), None, 0.2), Some(StopCause::ZStop));
        assert_eq!(stop_rule((0.1, 0.1), None, 0.2), Some(StopCause::ZStop));
        assert_eq!(stop_rule((0.9, 0.1), None, 0.2), Some(StopCause::SStop));
        assert_eq!(stop_rule((0.9, 0.9), None, 0.2), None);
        assert_eq!(stop_rule((0.1, 0.9), Some((0.9, 0.9)), 0.2), None);
        assert_eq!(stop_rule((0.1, 0.9), Some((0.9, 0.1)), 0.2), Some(StopCause::ZStop));
        assert_eq!(stop_rule((0.1, 0.9), Some((0.1, 0.9)), 0.2), Some(StopCause::SStop));
    }

    #[test]
    fn stopped_trivial_and_bounded() {
        let k = Kernel::arikan();
        let w = Dmc::bec(0.5).unwrap();
        let st = stopped_paths(&w, &k, 0.6, 8, 100, 1, None, None, &Sequential).unwrap();
        assert_eq!(st.s_weights[0], 100);
        let st = stopped_paths(&w, &k, 1e-3, 8, 500, 1, None, None, &Sequential).unwrap();
        assert_eq!(st.total, 500);
        assert!(st.s_weights.len() == 9);
        let ex = stopped_bec_exact(0.5, &k, 1e-3, 8).unwrap();
        assert_eq!(ex.cause_weights.iter().sum::<u128>(), ex.total);
        assert_eq!(ex.total, 256);
        assert!(fabs(st.mean_s() - ex.mean_s()) < 4.0 * st.stderr_s() + 1e-9);
    }

    #[test]
    fn stopped_table_route_is_deterministic() {
        let k = Kernel::arikan();
        let w = Dmc::bsc(0.11).unwrap();
        let a = stopped_paths(&w, &k, 1e-2, 6, 300, 5, None, Some(64), &Sequential).unwrap();
        let b = stopped_paths(&w, &k, 1e-2, 6, 300, 5, None, Some(64), &Sequential).unwrap();
        assert_eq!(a, b);
        assert!(a.s_weights.iter().enumerate().all(|(s, &c)| s <= 6 || c == 0));
    }

    #[test]
    fn asymmetric_uniform_q_reduces() {
        let k = Kernel::arikan();
        let w = Dmc::bsc(0.11).unwrap();
        let qc = q_as_channel(&Field::binary(), &[0.5, 0.5]).unwrap();
        let a = stopped_paths(&w, &k, 1e-2, 6, 300, 5, None, Some(64), &Sequential).unwrap();
        let b = stopped_paths(&w, &k, 1e-2, 6, 300, 5, Some(&qc), Some(64), &Sequential).unwrap();
        assert_eq!(a.s_weights, b.s_weights);
        assert_eq!(a.cause_weights, b.cause_weights);
        assert_eq!(b.impossible, 0);
    }

    #[test]
    fn asymmetric_never_impossible() {
        let k = Kernel::arikan();
        let f = Field::binary();
        let qd = [0.7, 0.3];
        let w = Dmc::from_trans(&f, &qd, &[vec![0.9, 0.1], vec![0.2, 0.8]], None).unwrap();
        let qc = q_as_channel(&f, &qd).unwrap();
        let st = stopped_paths(&w, &k, 1e-2, 8, 400, 2, Some(&qc), Some(64), &Sequential).unwrap();
        assert_eq!(st.impossible, 0);
        assert_eq!(st.total, 400);
    }
}
