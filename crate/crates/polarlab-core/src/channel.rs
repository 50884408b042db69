//! q-ary discrete memoryless channels and their parameters.
//!
//! A [`Dmc`] is stored as its joint distribution `W(x, y) = Q(x) W(y|x)`,
//! output-major, because every parameter and the kernel transform are
//! expectations over the joint. Entropies `H`, `I` are in log-q units;
//! Gallager's `E0` is in nats.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use libm::{cos, fabs, log, log2, pow, sin, sqrt};

use crate::error::{invalid, Error, Result};
use crate::gf::Field;
use crate::math::{h2, neg_xlnx};

const STOCHASTIC_TOL: f64 = 1e-12;
/// Posterior vectors are compared after rounding to this many units.
const MERGE_SCALE: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct Dmc {
    field: Field,
    q_dist: Vec<f64>,
    /// `joint[y * q + x] = W(x, y)`
    joint: Vec<f64>,
    nout: usize,
    labels: Option<Vec<String>>,
    degraded: bool,
}

/// The named channel families accepted by [`make_channel`].
#[derive(Debug, Clone)]
pub enum ChannelKind {
    /// Erasure channel over `field` (binary: outputs 0, 1, ?).
    Erasure { field: Field, epsilon: f64 },
    Bsc { crossover: f64 },
    /// q-ary symmetric channel: a symbol error of probability `p` lands
    /// uniformly on the other q-1 symbols.
    Qsc { field: Field, p: f64 },
    Dmc {
        field: Field,
        q_dist: Option<Vec<f64>>,
        trans: Vec<Vec<f64>>,
        labels: Option<Vec<String>>,
    },
}

pub fn make_channel(kind: ChannelKind) -> Result<Dmc> {
    match kind {
        ChannelKind::Erasure { field, epsilon } => Dmc::erasure(&field, epsilon),
        ChannelKind::Bsc { crossover } => Dmc::bsc(crossover),
        ChannelKind::Qsc { field, p } => Dmc::qsc(&field, p),
        ChannelKind::Dmc { field, q_dist, trans, labels } => {
            let q = field.q();
            let qd = q_dist.unwrap_or_else(|| vec![1.0 / q as f64; q]);
            Dmc::from_trans(&field, &qd, &trans, labels)
        }
    }
}

fn check_prob(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(invalid(format!("{what} = {p} is not a probability")));
    }
    Ok(())
}

fn check_distribution(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|&x| x.is_nan() || x < 0.0) {
        return Err(invalid(format!("{what} has a negative or NaN entry")));
    }
    let s: f64 = v.iter().sum();
    if fabs(s - 1.0) > STOCHASTIC_TOL {
        return Err(invalid(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

impl Dmc {
    /// Channel from transition rows `trans[x][y]` and input distribution.
    pub fn from_trans(
        field: &Field,
        q_dist: &[f64],
        trans: &[Vec<f64>],
        labels: Option<Vec<String>>,
    ) -> Result<Dmc> {
        let q = field.q();
        if q_dist.len() != q || trans.len() != q {
            return Err(invalid(format!("expected {q} inputs")));
        }
        check_distribution(q_dist, "input distribution")?;
        let nout = trans[0].len();
        if nout == 0 {
            return Err(invalid("channel needs at least one output"));
        }
        for (x, row) in trans.iter().enumerate() {
            if row.len() != nout {
                return Err(invalid("transition rows differ in length"));
            }
            check_distribution(row, &format!("transition row {x}"))?;
        }
        if let Some(l) = &labels {
            if l.len() != nout {
                return Err(invalid("label count differs from output count"));
            }
        }
        let mut joint = vec![0.0; nout * q];
        for x in 0..q {
            for y in 0..nout {
                joint[y * q + x] = q_dist[x] * trans[x][y];
            }
        }
        Ok(Dmc {
            field: field.clone(),
            q_dist: q_dist.to_vec(),
            joint,
            nout,
            labels,
            degraded: false,
        })
    }

    /// Channel from an output-major joint table. The input distribution is
    /// its marginal.
    pub fn from_joint(field: &Field, joint: Vec<f64>, nout: usize) -> Result<Dmc> {
        let q = field.q();
        if joint.len() != nout * q || nout == 0 {
            return Err(invalid("joint table has the wrong size"));
        }
        check_distribution(&joint, "joint distribution").or_else(|e| {
            // long products accumulate a few ulps; renormalize anything close
            let s: f64 = joint.iter().sum();
            if joint.iter().all(|&x| x >= 0.0) && fabs(s - 1.0) < 1e-9 {
                Ok(())
            } else {
                Err(e)
            }
        })?;
        let mut q_dist = vec![0.0; q];
        for y in 0..nout {
            for x in 0..q {
                q_dist[x] += joint[y * q + x];
            }
        }
        Ok(Dmc {
            field: field.clone(),
            q_dist,
            joint,
            nout,
            labels: None,
            degraded: false,
        })
    }

    pub fn erasure(field: &Field, epsilon: f64) -> Result<Dmc> {
        check_prob(epsilon, "erasure probability")?;
        let q = field.q();
        let trans: Vec<Vec<f64>> = (0..q)
            .map(|x| {
                let mut row = vec![0.0; q + 1];
                row[x] = 1.0 - epsilon;
                row[q] = epsilon;
                row
            })
            .collect();
        let mut labels: Vec<String> = (0..q).map(|x| format!("{x}")).collect();
        labels.push("?".into());
        Dmc::from_trans(field, &vec![1.0 / q as f64; q], &trans, Some(labels))
    }

    pub fn bec(epsilon: f64) -> Result<Dmc> {
        Dmc::erasure(&Field::binary(), epsilon)
    }

    pub fn bsc(crossover: f64) -> Result<Dmc> {
        Dmc::qsc(&Field::binary(), crossover)
    }

    pub fn qsc(field: &Field, p: f64) -> Result<Dmc> {
        check_prob(p, "symbol error probability")?;
        let q = field.q();
        let off = p / (q - 1) as f64;
        let trans: Vec<Vec<f64>> = (0..q)
            .map(|x| (0..q).map(|y| if x == y { 1.0 - p } else { off }).collect())
            .collect();
        let labels = (0..q).map(|y| format!("{y}")).collect();
        Dmc::from_trans(field, &vec![1.0 / q as f64; q], &trans, Some(labels))
    }

    /// Same transition law under a different input distribution.
    pub fn with_input(&self, q_dist: &[f64]) -> Result<Dmc> {
        let trans: Vec<Vec<f64>> = (0..self.q()).map(|x| self.trans_row(x)).collect();
        Dmc::from_trans(&self.field, q_dist, &trans, self.labels.clone())
    }

    pub fn field(&self) -> &Field {
        &self.field
    }
    pub fn q(&self) -> usize {
        self.field.q()
    }
    pub fn num_outputs(&self) -> usize {
        self.nout
    }
    pub fn input_dist(&self) -> &[f64] {
        &self.q_dist
    }
    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }
    pub fn is_degraded(&self) -> bool {
        self.degraded
    }
    pub(crate) fn mark_degraded(mut self, flag: bool) -> Dmc {
        self.degraded |= flag;
        self
    }
    /// Output-major joint table, `joint()[y * q + x] = W(x, y)`.
    pub fn joint(&self) -> &[f64] {
        &self.joint
    }
    /// The column `W(., y)`.
    pub fn joint_col(&self, y: usize) -> &[f64] {
        let q = self.q();
        &self.joint[y * q..(y + 1) * q]
    }
    pub fn output_prob(&self, y: usize) -> f64 {
        self.joint_col(y).iter().sum()
    }
    /// `W(y | x)`. For an input of probability zero the conditional law is
    /// not recorded by the joint; a uniform row is returned.
    pub fn trans(&self, x: usize, y: usize) -> f64 {
        let qx = self.q_dist[x];
        if qx > 0.0 {
            self.joint[y * self.q() + x] / qx
        } else {
            1.0 / self.nout as f64
        }
    }
    pub fn trans_row(&self, x: usize) -> Vec<f64> {
        (0..self.nout).map(|y| self.trans(x, y)).collect()
    }
    pub fn is_uniform_input(&self) -> bool {
        let u = 1.0 / self.q() as f64;
        self.q_dist.iter().all(|&v| fabs(v - u) < 1e-12)
    }
}

/// Every parameter of a q-ary channel. `z_d[d]` is indexed by the shift
/// `d` in `1..q` (`z_d[0]` is unused and 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub h: f64,
    pub i: f64,
    pub pe: f64,
    pub z: f64,
    pub z_d: Vec<f64>,
    pub z_mxd: f64,
    pub t: f64,
    pub s: f64,
    pub s_max: f64,
}

/// Real and imaginary parts of the additive character on each element.
fn character_table(f: &Field) -> Vec<(f64, f64)> {
    let p = f.p() as f64;
    (0..f.q())
        .map(|x| {
            let ang = 2.0 * core::f64::consts::PI * f.trace(x as u8) as f64 / p;
            (cos(ang), sin(ang))
        })
        .collect()
}

pub fn params(w: &Dmc) -> ParamSet {
    let q = w.q();
    let f = &w.field;
    let lnq = log(q as f64);
    let chi = character_table(f);
    let mut h = 0.0;
    let mut pe = 0.0;
    let mut z_d = vec![0.0; q];
    let mut t = 0.0;
    let mut s_w = vec![0.0; q];
    for y in 0..w.nout {
        let col = w.joint_col(y);
        let wy: f64 = col.iter().sum();
        if wy <= 0.0 {
            continue;
        }
        let mut mx = 0.0f64;
        for x in 0..q {
            let v = col[x];
            if v > 0.0 {
                h -= v * log(v / wy);
            }
            mx = mx.max(v);
            t += fabs(v - wy / q as f64);
        }
        pe += wy - mx;
        for d in 1..q {
            let mut acc = 0.0;
            for x in 0..q {
                let x2 = f.add(x as u8, d as u8) as usize;
                acc += sqrt(col[x] * col[x2]);
            }
            z_d[d] += acc;
        }
        // W(y) |M(w|y)| = |sum_z W(z, y) chi(wz)|
        for wv in 1..q {
            let (mut re, mut im) = (0.0, 0.0);
            for z in 0..q {
                let (c, s) = chi[f.mul(wv as u8, z as u8) as usize];
                re += col[z] * c;
                im += col[z] * s;
            }
            s_w[wv] += sqrt(re * re + im * im);
        }
    }
    h /= lnq;
    let hq: f64 = w.q_dist.iter().map(|&v| neg_xlnx(v)).sum::<f64>() / lnq;
    z_d[0] = 1.0;
    let nz = &z_d[1..];
    let ns = &s_w[1..];
    let qm1 = (q - 1) as f64;
    ParamSet {
        h,
        i: hq - h,
        pe,
        z: nz.iter().sum::<f64>() / qm1,
        z_mxd: nz.iter().cloned().fold(0.0, f64::max),
        z_d,
        t,
        s: ns.iter().sum::<f64>() / qm1,
        s_max: ns.iter().cloned().fold(0.0, f64::max),
    }
}

/// Symmetrization by a uniform flag: input `X - F` is uniform, the output
/// is `(F, Y)` and `W~(f, y | x) = Q(x + f) W(y | x + f)`. Output index is
/// `f * |Y| + y`.
pub fn symmetrize(w: &Dmc) -> Dmc {
    let q = w.q();
    let m = w.nout;
    let f = &w.field;
    let mut joint = vec![0.0; q * m * q];
    for fl in 0..q {
        for y in 0..m {
            let out = fl * m + y;
            for x in 0..q {
                let shifted = f.add(x as u8, fl as u8) as usize;
                joint[out * q + x] = w.joint[y * q + shifted] / q as f64;
            }
        }
    }
    let mut s = Dmc::from_joint(f, joint, q * m).expect("symmetrization preserves mass");
    s.degraded = w.degraded;
    s
}

/// Rounded posterior vector; `None` for a zero-probability output.
fn posterior_key(col: &[f64]) -> Option<Vec<i64>> {
    let wy: f64 = col.iter().sum();
    if wy <= 0.0 {
        return None;
    }
    Some(col.iter().map(|&v| libm::round(v / wy * MERGE_SCALE) as i64).collect())
}

/// Drops zero-probability outputs and merges outputs with equal posterior
/// vectors (after rounding to 1e-12). Outputs come out sorted by posterior.
pub fn canonicalize(w: &Dmc) -> Dmc {
    let q = w.q();
    let mut keys: Vec<i64> = Vec::with_capacity(w.nout * q);
    let mut ys: Vec<usize> = Vec::with_capacity(w.nout);
    for y in 0..w.nout {
        if let Some(key) = posterior_key(w.joint_col(y)) {
            keys.extend(key);
            ys.push(y);
        }
    }
    let key = |i: usize| &keys[i * q..(i + 1) * q];
    let mut order: Vec<usize> = (0..ys.len()).collect();
    // stable, so the first member of a class is its smallest output index
    order.sort_by(|&a, &b| key(a).cmp(key(b)));
    let mut joint: Vec<f64> = Vec::with_capacity(order.len() * q);
    let mut labels = w.labels.as_ref().map(|_| Vec::new());
    let mut prev: Option<usize> = None;
    for &i in &order {
        if prev.is_none_or(|p| key(p) != key(i)) {
            joint.extend(core::iter::repeat(0.0).take(q));
            if let (Some(l), Some(src)) = (labels.as_mut(), w.labels.as_ref()) {
                l.push(src[ys[i]].clone());
            }
        }
        let base = joint.len() - q;
        for (x, v) in w.joint_col(ys[i]).iter().enumerate() {
            joint[base + x] += v;
        }
        prev = Some(i);
    }
    let nout = joint.len() / q;
    Dmc {
        field: w.field.clone(),
        q_dist: w.q_dist.clone(),
        joint,
        nout,
        labels,
        degraded: w.degraded,
    }
}

/// `sum_x -v_x ln(v_x / sum v)`: one output's share of the equivocation.
fn part_entropy(v: &[f64]) -> f64 {
    let s: f64 = v.iter().sum();
    if s <= 0.0 {
        return 0.0;
    }
    v.iter().map(|&x| if x > 0.0 { -x * log(x / s) } else { 0.0 }).sum()
}

#[derive(PartialEq)]
struct Cost(f64);
impl Eq for Cost {}
impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

const BATCH_SLACK: usize = 4;

fn batch_merge(mut cols: Vec<f64>, q: usize, target: usize) -> Vec<f64> {
    loop {
        let n = cols.len() / q;
        if n <= target {
            return cols;
        }
        let ent: Vec<f64> = (0..n).map(|y| part_entropy(&cols[y * q..(y + 1) * q])).collect();
        let mut cost: Vec<(f64, usize)> = (0..n - 1)
            .map(|i| {
                let (a, b) = (&cols[i * q..(i + 1) * q], &cols[(i + 1) * q..(i + 2) * q]);
                let s: f64 = a.iter().chain(b).sum();
                let mut merged = 0.0;
                for (x, y) in a.iter().zip(b) {
                    let v = x + y;
                    if v > 0.0 {
                        merged -= v * log(v / s);
                    }
                }
                (merged - ent[i] - ent[i + 1], i)
            })
            .collect();
        cost.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let want = (n - target).min(n / 3).max(1);
        let mut taken = vec![false; n];
        let mut merge_with_next = vec![false; n];
        let mut k = 0;
        for &(_, i) in &cost {
            if k == want {
                break;
            }
            if !taken[i] && !taken[i + 1] {
                taken[i] = true;
                taken[i + 1] = true;
                merge_with_next[i] = true;
                k += 1;
            }
        }
        let mut out = Vec::with_capacity((n - k) * q);
        let mut i = 0;
        while i < n {
            if merge_with_next[i] {
                for x in 0..q {
                    out.push(cols[i * q + x] + cols[(i + 1) * q + x]);
                }
                i += 2;
            } else {
                out.extend_from_slice(&cols[i * q..(i + 1) * q]);
                i += 1;
            }
        }
        cols = out;
    }
}

/// Degrading merge down to at most `max_outputs` outputs.
///
/// Outputs are ordered by posterior vector and the pair of neighbours whose
/// merge raises the equivocation least is merged, repeatedly. Merging
/// outputs is a post-processing of `Y`, so `H` cannot drop and `Z` cannot
/// shrink.
pub fn degrade_merge(w: &Dmc, max_outputs: usize) -> Result<Dmc> {
    let q = w.q();
    if max_outputs < q {
        return Err(invalid(format!("merge cap {max_outputs} is below q = {q}")));
    }
    let base = canonicalize(w);
    if base.nout <= max_outputs {
        return Ok(base);
    }
    // far above the cap, merge in batches of cheapest disjoint neighbour
    // pairs first; the heap pass below then finishes one merge at a time
    let mut cols = batch_merge(base.joint.clone(), q, BATCH_SLACK * max_outputs);
    let n = cols.len() / q;
    let mut ent: Vec<f64> = (0..n).map(|y| part_entropy(&cols[y * q..(y + 1) * q])).collect();
    let mut prev: Vec<Option<usize>> = (0..n).map(|i| i.checked_sub(1)).collect();
    let mut next: Vec<Option<usize>> = (0..n).map(|i| if i + 1 < n { Some(i + 1) } else { None }).collect();
    let mut version = vec![0u32; n];
    let mut alive = vec![true; n];
    // entropy increase of merging outputs a and b
    let merge_cost = |cols: &[f64], ent: &[f64], a: usize, b: usize| -> f64 {
        let (ca, cb) = (&cols[a * q..(a + 1) * q], &cols[b * q..(b + 1) * q]);
        let s: f64 = ca.iter().chain(cb).sum();
        let mut merged = 0.0;
        for (x, y) in ca.iter().zip(cb) {
            let v = x + y;
            if v > 0.0 {
                merged -= v * log(v / s);
            }
        }
        merged - ent[a] - ent[b]
    };
    let mut heap = BinaryHeap::with_capacity(2 * n);
    for i in 0..n - 1 {
        heap.push(Reverse((Cost(merge_cost(&cols, &ent, i, i + 1)), i, 0u32, i + 1, 0u32)));
    }
    let mut remaining = n;
    while remaining > max_outputs {
        let Some(Reverse((_, a, va, b, vb))) = heap.pop() else {
            break;
        };
        if !alive[a] || !alive[b] || version[a] != va || version[b] != vb {
            continue;
        }
        // fold b into a
        for x in 0..q {
            cols[a * q + x] += cols[b * q + x];
        }
        ent[a] = part_entropy(&cols[a * q..(a + 1) * q]);
        alive[b] = false;
        next[a] = next[b];
        if let Some(nb) = next[b] {
            prev[nb] = Some(a);
        }
        version[a] += 1;
        remaining -= 1;
        if let Some(pa) = prev[a] {
            heap.push(Reverse((Cost(merge_cost(&cols, &ent, pa, a)), pa, version[pa], a, version[a])));
        }
        if let Some(na) = next[a] {
            heap.push(Reverse((Cost(merge_cost(&cols, &ent, a, na)), a, version[a], na, version[na])));
        }
    }
    let mut joint = Vec::with_capacity(remaining * q);
    for i in 0..n {
        if alive[i] {
            joint.extend_from_slice(&cols[i * q..(i + 1) * q]);
        }
    }
    Ok(Dmc {
        field: base.field.clone(),
        q_dist: base.q_dist.clone(),
        joint,
        nout: remaining,
        labels: None,
        degraded: true,
    })
}

/// Gallager's `E0(t)` and its complement `E0bar(t)`, in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct E0Pair {
    pub e0: f64,
    pub e0bar: f64,
}

pub fn gallager_e0(w: &Dmc, t: f64) -> Result<E0Pair> {
    if !(-0.4..=1.0).contains(&t) {
        return Err(Error::Domain(format!("t = {t} is outside [-2/5, 1]")));
    }
    let q = w.q();
    let r = 1.0 / (1.0 + t);
    let (mut a, mut b) = (0.0, 0.0);
    for y in 0..w.nout {
        let col = w.joint_col(y);
        let (mut sa, mut sb) = (0.0, 0.0);
        for x in 0..q {
            let qx = w.q_dist[x];
            if qx > 0.0 && col[x] > 0.0 {
                sa += qx * pow(col[x] / qx, r);
                sb += pow(col[x], r);
            }
        }
        a += pow(sa, 1.0 + t);
        b += pow(sb, 1.0 + t);
    }
    Ok(E0Pair { e0: -log(a), e0bar: log(b) })
}

/// `sum_i w_i ln(w_i)^2` over a probability vector.
pub fn second_moment(w: &[f64]) -> f64 {
    w.iter().map(|&x| if x > 0.0 { x * log(x) * log(x) } else { 0.0 }).sum()
}

/// One checked inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Toll {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl Toll {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

/// The parameter sandwich inequalities between `Pe`, `Z`, `T`, `S`, `H`
/// and the explicit Hölder tolls, evaluated on one parameter set.
pub fn tolls(p: &ParamSet, q: usize) -> Vec<Toll> {
    let qf = q as f64;
    let q1 = qf - 1.0;
    let q2 = qf - 2.0;
    let q3 = qf * qf * qf;
    let lg_q = log2(qf);
    let mut v = vec![
        Toll {
            name: "pe >= z lower",
            lhs: q1 / (qf * qf) * {
                let d = sqrt((1.0 + q1 * p.z).max(0.0)) - sqrt((1.0 - p.z).max(0.0));
                d * d
            },
            rhs: p.pe,
        },
        Toll { name: "pe <= (q-1) z / 2", lhs: p.pe, rhs: q1 * p.z / 2.0 },
        Toll { name: "t/2 >= (q-1)/q - pe", lhs: q1 / qf - p.pe, rhs: p.t / 2.0 },
        Toll {
            name: "t/2 <= t upper",
            lhs: p.t / 2.0,
            rhs: q1 / qf - (q1 * qf * p.pe - q1 * q2) / qf,
        },
        Toll { name: "s >= 1 - q pe/(q-1)", lhs: 1.0 - qf / q1 * p.pe, rhs: p.s },
        Toll {
            name: "s <= s upper",
            lhs: p.s,
            rhs: q1 * qf * (q1 / qf - p.pe) * sqrt((1.0 - qf / q1 * (q2 / q1)).max(0.0)),
        },
        Toll { name: "fano", lhs: p.h * lg_q, rhs: h2(p.pe) + p.pe * log2(q1) },
        Toll { name: "h lg q >= 2 pe", lhs: 2.0 * p.pe, rhs: p.h * lg_q },
        Toll { name: "zmxd <= q^3 sqrt(h)", lhs: p.z_mxd, rhs: q3 * sqrt(p.h.max(0.0)) },
        Toll { name: "h <= q^3 sqrt(zmxd)", lhs: p.h, rhs: q3 * sqrt(p.z_mxd) },
        Toll { name: "smax <= q^3 sqrt(1-h)", lhs: p.s_max, rhs: q3 * sqrt((1.0 - p.h).max(0.0)) },
        Toll { name: "1-h <= q^3 sqrt(smax)", lhs: 1.0 - p.h, rhs: q3 * sqrt(p.s_max) },
        Toll { name: "z <= zmxd", lhs: p.z, rhs: p.z_mxd },
        Toll { name: "zmxd <= (q-1) z", lhs: p.z_mxd, rhs: q1 * p.z },
        Toll { name: "s <= smax", lhs: p.s, rhs: p.s_max },
        Toll { name: "smax <= (q-1) s", lhs: p.s_max, rhs: q1 * p.s },
    ];
    if q > 2 {
        // the second lower bound degenerates at q = 2 (log2(q-1) = 0 times a
        // finite slope), where it reads h >= 2 pe * 1 - 0 and is implied
        v.push(Toll {
            name: "h lg q >= second lower",
            lhs: q1 * qf * log2(qf / q1) * (p.pe - q2 / q1) + log2(q1),
            rhs: p.h * lg_q,
        });
    }
    v
}

/// The universal quadratic lower bound on `E0` at `t`:
/// returns `(E0(t), I t ln q - t^2 ln^2 q)`.
pub fn e0_quadratic(w: &Dmc, p: &ParamSet, t: f64) -> Result<(f64, f64)> {
    let lnq = log(w.q() as f64);
    let e = gallager_e0(w, t)?;
    Ok((e.e0, p.i * t * lnq - t * t * lnq * lnq))
}

/// A random channel: Dirichlet(1) rows over `nout` outputs and either a
/// uniform or a Dirichlet(1) input distribution.
pub fn random_dmc<R: rand::Rng + ?Sized>(f: &Field, nout: usize, uniform_input: bool, rng: &mut R) -> Dmc {
    let q = f.q();
    let trans: Vec<Vec<f64>> = (0..q).map(|_| random_simplex(nout, rng)).collect();
    let qd = if uniform_input { vec![1.0 / q as f64; q] } else { random_simplex(q, rng) };
    let mut w = Dmc::from_trans(f, &qd, &trans, None);
    if w.is_err() {
        // renormalization rounding: fold the residual into the largest entry
        let fix = |mut v: Vec<f64>| {
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= s);
            v
        };
        let trans: Vec<Vec<f64>> = trans.into_iter().map(fix).collect();
        w = Dmc::from_trans(f, &fix(qd), &trans, None);
    }
    w.expect("normalized random channel")
}

/// A uniform point on the probability simplex (normalized exponentials),
/// with some coordinates occasionally zeroed to reach the boundary.
pub fn random_simplex<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = rng.gen::<f64>();
                if n > 1 && u < 0.05 {
                    0.0
                } else {
                    -log(1.0 - rng.gen::<f64>())
                }
            })
            .collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            v.iter_mut().for_each(|x| *x /= s);
            return v;
        }
    }
}
