//! Recursive encoder and successive-cancellation decoder for full and
//! pruned codes.
//!
//! A node of size `L = l * L'` combines its children's words `v^(1..l)`
//! (each of length `L'`) as `x[c L' + r] = ((v^(1)_r, .., v^(l)_r) G)_c`, so
//! a full-depth code is `u G^{(x) n}` in natural path order. Pruned leaves
//! take shortcuts: an information leaf sends its symbols raw, a frozen leaf
//! sends the fill pushed through its whole subtree.
//!
//! Erasure mode passes "known value or erased" messages and is exact; soft
//! mode passes log-probability vectors and marginalizes every kernel step
//! exhaustively.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log};
use rand::Rng;

use crate::channel::Dmc;
use crate::construct::CodeSpec;
use crate::error::{invalid, Error, Result};
use crate::exec::{chunks, Executor};
use crate::gf::{Elem, Field, Mat};
use crate::math::wilson;
use crate::process::erasure_prob;
use crate::rng::{categorical, stream};

/// Soft decoding enumerates `q^l` words per kernel step.
pub const SOFT_MAX_L: usize = 8;
pub const SOFT_MAX_Q: usize = 4;
/// Largest `q^K` searched by [`consistent_infos`].
pub const ML_LIMIT: u128 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrozenFill {
    #[default]
    Zeros,
    Seeded(u64),
}

/// The fill value of every position (information positions included, where
/// it is ignored).
pub fn fill_vector(spec: &CodeSpec, fill: FrozenFill) -> Vec<Elem> {
    let n = spec.block_len();
    match fill {
        FrozenFill::Zeros => vec![0; n],
        FrozenFill::Seeded(seed) => {
            let q = spec.kernel.field().q();
            let mut rng = stream(seed, u64::MAX);
            (0..n).map(|_| rng.gen_range(0..q) as Elem).collect()
        }
    }
}

/// Walks the leaves of a spec in position order.
struct Leaves<'a> {
    spec: &'a CodeSpec,
    cursor: usize,
}

impl<'a> Leaves<'a> {
    fn new(spec: &'a CodeSpec) -> Leaves<'a> {
        Leaves { spec, cursor: 0 }
    }

    /// `Some(info)` when the node at `depth` is a leaf.
    fn leaf(&mut self, depth: usize, start: usize) -> Option<bool> {
        match &self.spec.pruned {
            None => (depth == self.spec.n).then(|| self.spec.info[start]),
            Some(t) => {
                let lf = t.leaves.get(self.cursor)?;
                if lf.depth() == depth {
                    self.cursor += 1;
                    Some(lf.info)
                } else {
                    None
                }
            }
        }
    }
}

struct Kern<'a> {
    f: &'a Field,
    g: &'a Mat,
    l: usize,
}

impl Kern<'_> {
    fn combine(&self, parts: &[Vec<Elem>]) -> Vec<Elem> {
        let lp = parts[0].len();
        let mut x = vec![0 as Elem; lp * self.l];
        for r in 0..lp {
            for c in 0..self.l {
                let mut acc = 0;
                for (j, v) in parts.iter().enumerate() {
                    acc = self.f.add(acc, self.f.mul(v[r], self.g.get(j, c)));
                }
                x[c * lp + r] = acc;
            }
        }
        x
    }

    /// `u G^{(x) m}` for a block of length `l^m`.
    fn full(&self, u: &[Elem]) -> Vec<Elem> {
        if u.len() == 1 {
            return u.to_vec();
        }
        let lp = u.len() / self.l;
        let parts: Vec<Vec<Elem>> = (0..self.l).map(|j| self.full(&u[j * lp..(j + 1) * lp])).collect();
        self.combine(&parts)
    }
}

fn kern(spec: &CodeSpec) -> Kern<'_> {
    Kern { f: spec.kernel.field(), g: spec.kernel.matrix(), l: spec.kernel.size() }
}

fn encode_node(k: &Kern, leaves: &mut Leaves, u: &[Elem], depth: usize, start: usize) -> Vec<Elem> {
    match leaves.leaf(depth, start) {
        Some(true) => u.to_vec(),
        Some(false) => k.full(u),
        None => {
            let lp = u.len() / k.l;
            let parts: Vec<Vec<Elem>> =
                (0..k.l).map(|j| encode_node(k, leaves, &u[j * lp..(j + 1) * lp], depth + 1, start + j * lp)).collect();
            k.combine(&parts)
        }
    }
}

/// Places `info` on the information positions and the fill elsewhere.
fn assemble(spec: &CodeSpec, info: &[Elem], fill: &[Elem]) -> Result<Vec<Elem>> {
    if info.len() != spec.info_len() {
        return Err(invalid(alloc::format!("expected {} information symbols, got {}", spec.info_len(), info.len())));
    }
    let q = spec.kernel.field().q();
    if info.iter().any(|&s| s as usize >= q) {
        return Err(invalid("information symbol outside the field"));
    }
    let mut it = info.iter();
    Ok(spec.info.iter().zip(fill).map(|(&b, &f)| if b { *it.next().unwrap() } else { f }).collect())
}

pub fn encode(spec: &CodeSpec, info: &[Elem], fill: FrozenFill) -> Result<Vec<Elem>> {
    let fv = fill_vector(spec, fill);
    encode_with(spec, info, &fv)
}

fn encode_with(spec: &CodeSpec, info: &[Elem], fill: &[Elem]) -> Result<Vec<Elem>> {
    let u = assemble(spec, info, fill)?;
    let k = kern(spec);
    Ok(encode_node(&k, &mut Leaves::new(spec), &u, 0, 0))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Received {
    /// Per position: the symbol, or `None` for an erasure.
    Erasure(Vec<Option<Elem>>),
    /// Per position: `q` log-likelihoods of the input symbol.
    Soft(Vec<Vec<f64>>),
}

impl Received {
    fn len(&self) -> usize {
        match self {
            Received::Erasure(v) => v.len(),
            Received::Soft(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub info: Vec<Elem>,
    /// False when an erasure-mode information symbol was undetermined.
    pub success: bool,
    /// Sum of node sizes over visited nodes.
    pub op_count: u64,
}

/// Message arrays at one node.
enum Msgs {
    Er(Vec<Option<Elem>>),
    /// `L * q` log-probabilities.
    Soft(Vec<f64>),
}

struct Decoder<'a> {
    k: Kern<'a>,
    q: usize,
    fill: &'a [Elem],
    u_hat: Vec<Elem>,
    success: bool,
    ops: u64,
    tables: &'a KernelTables,
}

/// Per-kernel lookup tables shared by every frame.
pub struct KernelTables {
    /// `soft[j]`: the words `(0..0, a, tail) G` for every `a, tail`, `a`
    /// the most significant digit (empty when soft decoding is out of range).
    soft: Vec<Vec<Vec<Elem>>>,
    /// `erasure[j][mask]`: when `v_j` is determined by the observations in
    /// `mask` and `v_{<j}`, the coefficients `(alpha, beta)` with
    /// `v_j = sum alpha_c x_c + sum beta_i v_i`.
    erasure: Vec<Vec<Option<(Vec<Elem>, Vec<Elem>)>>>,
}

/// Erasure solve tables are built for kernels up to this size.
const ER_TABLE_MAX_L: usize = 10;

impl KernelTables {
    pub fn new(spec: &CodeSpec) -> KernelTables {
        let k = kern(spec);
        let q = k.f.q();
        let soft = if k.l <= SOFT_MAX_L && q <= SOFT_MAX_Q { soft_words(k.f, k.g, k.l) } else { Vec::new() };
        let erasure = if k.l <= ER_TABLE_MAX_L {
            (0..k.l).map(|j| (0..1usize << k.l).map(|mask| er_solve(&k, mask, j)).collect()).collect()
        } else {
            Vec::new()
        };
        KernelTables { soft, erasure }
    }

    #[cfg(test)]
    fn without_erasure_table(spec: &CodeSpec) -> KernelTables {
        KernelTables { erasure: Vec::new(), ..KernelTables::new(spec) }
    }
}

/// Symbolic elimination for `v_j` given the columns in `mask`.
fn er_solve(k: &Kern, mask: usize, j: usize) -> Option<(Vec<Elem>, Vec<Elem>)> {
    let f = k.f;
    let l = k.l;
    let m = l - j;
    // rows: coefficients of v_j..v_{l-1}, then the combination of x's
    let mut rows: Vec<Vec<Elem>> = Vec::new();
    for c in (0..l).filter(|c| mask >> c & 1 == 1) {
        let mut row: Vec<Elem> = (j..l).map(|i| k.g.get(i, c)).collect();
        row.extend((0..l).map(|cc| (cc == c) as Elem));
        rows.push(row);
    }
    let mut r = 0;
    let mut first = None;
    for col in 0..m {
        let Some(pr) = (r..rows.len()).find(|&i| rows[i][col] != 0) else {
            continue;
        };
        rows.swap(r, pr);
        let s = f.inv(rows[r][col]).unwrap();
        rows[r].iter_mut().for_each(|x| *x = f.mul(*x, s));
        let piv = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && row[col] != 0 {
                let c = f.neg(row[col]);
                f.axpy(row, c, &piv);
            }
        }
        if col == 0 {
            first = Some(r);
        }
        r += 1;
    }
    let row = &rows[first?];
    if row[1..m].iter().any(|&x| x != 0) {
        return None;
    }
    let alpha = row[m..].to_vec();
    let beta = (0..j)
        .map(|i| {
            let mut acc = 0;
            for c in 0..l {
                acc = f.add(acc, f.mul(alpha[c], k.g.get(i, c)));
            }
            f.neg(acc)
        })
        .collect();
    Some((alpha, beta))
}

fn logsumexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + log(exp(a - m) + exp(b - m))
}

/// Argmax with ties to the smaller element.
fn argmax(v: &[f64]) -> Elem {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best as Elem
}

impl Decoder<'_> {
    /// Erasure message for `v_j` given the `l` observations and `v_{<j}`.
    fn er_child(&self, obs: &[Option<Elem>], prev: &[Elem], j: usize) -> Option<Elem> {
        let f = self.k.f;
        if !self.tables.erasure.is_empty() {
            let mask = obs.iter().enumerate().fold(0usize, |m, (c, o)| m | ((o.is_some() as usize) << c));
            let (alpha, beta) = self.tables.erasure[j][mask].as_ref()?;
            let mut v = 0;
            for (c, o) in obs.iter().enumerate() {
                if let Some(x) = o {
                    v = f.add(v, f.mul(alpha[c], *x));
                }
            }
            for (i, &p) in prev.iter().enumerate() {
                v = f.add(v, f.mul(beta[i], p));
            }
            return Some(v);
        }
        let g = self.k.g;
        let l = self.k.l;
        let m = l - j;
        // rows: [coefficients of v_j..v_{l-1} | rhs]
        let mut rows: Vec<Vec<Elem>> = Vec::new();
        for (c, o) in obs.iter().enumerate() {
            if let Some(x) = o {
                let mut rhs = *x;
                for (i, &p) in prev.iter().enumerate() {
                    rhs = f.sub(rhs, f.mul(p, g.get(i, c)));
                }
                let mut row: Vec<Elem> = (j..l).map(|i| g.get(i, c)).collect();
                row.push(rhs);
                rows.push(row);
            }
        }
        // reduced row echelon form
        let mut r = 0;
        let mut pivot_row_of_first = None;
        for col in 0..m {
            let Some(pr) = (r..rows.len()).find(|&i| rows[i][col] != 0) else {
                continue;
            };
            rows.swap(r, pr);
            let s = f.inv(rows[r][col]).unwrap();
            rows[r].iter_mut().for_each(|x| *x = f.mul(*x, s));
            let piv = rows[r].clone();
            for (i, row) in rows.iter_mut().enumerate() {
                if i != r && row[col] != 0 {
                    let c = f.neg(row[col]);
                    f.axpy(row, c, &piv);
                }
            }
            if col == 0 {
                pivot_row_of_first = Some(r);
            }
            r += 1;
        }
        let pr = pivot_row_of_first?;
        let row = &rows[pr];
        row[1..m].iter().all(|&x| x == 0).then_some(row[m])
    }

    fn soft_child(&self, obs: &[f64], prev: &[Elem], j: usize, out: &mut [f64]) {
        let f = self.k.f;
        let q = self.q;
        let l = self.k.l;
        // prefix contribution (prev, 0, .., 0) G
        let mut base = vec![0 as Elem; l];
        for (i, &p) in prev.iter().enumerate() {
            if p != 0 {
                for (c, b) in base.iter_mut().enumerate() {
                    *b = f.add(*b, f.mul(p, self.k.g.get(i, c)));
                }
            }
        }
        out.iter_mut().for_each(|o| *o = f64::NEG_INFINITY);
        let words = &self.tables.soft[j];
        let per_a = words.len() / q;
        for (idx, wd) in words.iter().enumerate() {
            let a = idx / per_a;
            let mut s = 0.0;
            for c in 0..l {
                s += obs[c * q + f.add(base[c], wd[c]) as usize];
                if s == f64::NEG_INFINITY {
                    break;
                }
            }
            out[a] = logsumexp(out[a], s);
        }
        let mx = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if mx.is_finite() {
            out.iter_mut().for_each(|o| *o -= mx);
        }
    }

    fn node(&mut self, leaves: &mut Leaves, msgs: Msgs, depth: usize, start: usize) -> Vec<Elem> {
        let q = self.q;
        let len = match &msgs {
            Msgs::Er(v) => v.len(),
            Msgs::Soft(v) => v.len() / q,
        };
        self.ops += len as u64;
        match leaves.leaf(depth, start) {
            Some(true) => {
                let vals: Vec<Elem> = match &msgs {
                    Msgs::Er(v) => v
                        .iter()
                        .map(|o| {
                            o.unwrap_or_else(|| {
                                self.success = false;
                                0
                            })
                        })
                        .collect(),
                    Msgs::Soft(v) => v.chunks(q).map(argmax).collect(),
                };
                self.u_hat[start..start + len].copy_from_slice(&vals);
                vals
            }
            Some(false) => {
                let fill = &self.fill[start..start + len];
                self.u_hat[start..start + len].copy_from_slice(fill);
                self.k.full(fill)
            }
            None => {
                let l = self.k.l;
                let lp = len / l;
                let mut parts: Vec<Vec<Elem>> = Vec::with_capacity(l);
                for j in 0..l {
                    let child = match &msgs {
                        Msgs::Er(v) => {
                            let mut out = Vec::with_capacity(lp);
                            let mut obs = vec![None; l];
                            let mut prev = vec![0 as Elem; j];
                            for r in 0..lp {
                                for c in 0..l {
                                    obs[c] = v[c * lp + r];
                                }
                                for (i, p) in prev.iter_mut().enumerate() {
                                    *p = parts[i][r];
                                }
                                out.push(self.er_child(&obs, &prev, j));
                            }
                            Msgs::Er(out)
                        }
                        Msgs::Soft(v) => {
                            let mut out = vec![0.0; lp * q];
                            let mut obs = vec![0.0; l * q];
                            let mut prev = vec![0 as Elem; j];
                            for r in 0..lp {
                                for c in 0..l {
                                    obs[c * q..(c + 1) * q].copy_from_slice(&v[(c * lp + r) * q..(c * lp + r + 1) * q]);
                                }
                                for (i, p) in prev.iter_mut().enumerate() {
                                    *p = parts[i][r];
                                }
                                self.soft_child(&obs, &prev, j, &mut out[r * q..(r + 1) * q]);
                            }
                            Msgs::Soft(out)
                        }
                    };
                    let v = self.node(leaves, child, depth + 1, start + j * lp);
                    parts.push(v);
                }
                self.k.combine(&parts)
            }
        }
    }
}

fn soft_words(f: &Field, g: &Mat, l: usize) -> Vec<Vec<Vec<Elem>>> {
    let q = f.q();
    (0..l)
        .map(|j| {
            let m = l - j;
            let count = q.pow(m as u32);
            (0..count)
                .map(|idx| {
                    let mut u = vec![0 as Elem; l];
                    let mut r = idx;
                    for d in (j..l).rev() {
                        u[d] = (r % q) as Elem;
                        r /= q;
                    }
                    g.vec_mul(f, &u)
                })
                .collect()
        })
        .collect()
}

pub fn sc_decode(spec: &CodeSpec, received: &Received, fill: FrozenFill) -> Result<Decoded> {
    let fv = fill_vector(spec, fill);
    decode_with(spec, received, &fv, &KernelTables::new(spec))
}

fn decode_with(spec: &CodeSpec, received: &Received, fill: &[Elem], tables: &KernelTables) -> Result<Decoded> {
    let n = spec.block_len();
    if received.len() != n {
        return Err(invalid(alloc::format!("received word has length {}, expected {n}", received.len())));
    }
    let k = kern(spec);
    let q = k.f.q();
    let msgs = match received {
        Received::Erasure(v) => Msgs::Er(v.clone()),
        Received::Soft(v) => {
            if k.l > SOFT_MAX_L || q > SOFT_MAX_Q {
                return Err(Error::Guard {
                    what: "soft decoding kernel size",
                    needed: q.pow(k.l as u32) as u128,
                    limit: SOFT_MAX_Q.pow(SOFT_MAX_L as u32) as u128,
                });
            }
            if v.iter().any(|row| row.len() != q) {
                return Err(invalid("soft message width differs from q"));
            }
            let mut flat = Vec::with_capacity(n * q);
            for row in v {
                flat.extend_from_slice(row);
            }
            Msgs::Soft(flat)
        }
    };
    let mut dec = Decoder { k, q, fill, u_hat: vec![0; n], success: true, ops: 0, tables };
    dec.node(&mut Leaves::new(spec), msgs, 0, 0);
    let info = spec.info.iter().zip(&dec.u_hat).filter(|(&b, _)| b).map(|(_, &u)| u).collect();
    Ok(Decoded { info, success: dec.success, op_count: dec.ops })
}

/// Every information word whose codeword agrees with the unerased
/// positions. Exhaustive; an independent check on SC decisions.
pub fn consistent_infos(spec: &CodeSpec, received: &[Option<Elem>], fill: FrozenFill) -> Result<Vec<Vec<Elem>>> {
    let q = spec.kernel.field().q();
    let kk = spec.info_len();
    let total = (q as u128).saturating_pow(kk as u32);
    if total > ML_LIMIT {
        return Err(Error::Guard { what: "exhaustive information words", needed: total, limit: ML_LIMIT });
    }
    let fv = fill_vector(spec, fill);
    let mut out = Vec::new();
    let mut info = vec![0 as Elem; kk];
    for idx in 0..total as usize {
        let mut r = idx;
        for d in (0..kk).rev() {
            info[d] = (r % q) as Elem;
            r /= q;
        }
        let x = encode_with(spec, &info, &fv)?;
        if x.iter().zip(received).all(|(a, b)| b.is_none_or(|b| b == *a)) {
            out.push(info.clone());
        }
    }
    Ok(out)
}

/// One simulated transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub info: Vec<Elem>,
    pub codeword: Vec<Elem>,
    pub received: Received,
    pub decoded: Vec<Elem>,
    pub success: bool,
    pub op_count: u64,
}

impl Frame {
    pub fn is_error(&self) -> bool {
        !self.success || self.decoded != self.info
    }
}

/// Sampling tables for a channel driven by a code.
struct ChannelSim<'a> {
    w: &'a Dmc,
    rows: Vec<Vec<f64>>,
    /// Per output: `Some(x)` when it reveals `x`, `None` when erased.
    reveal: Option<Vec<Option<Elem>>>,
    /// `ln W(y|x)` for each output, `q` wide.
    llr: Vec<Vec<f64>>,
}

impl<'a> ChannelSim<'a> {
    fn new(w: &'a Dmc) -> ChannelSim<'a> {
        let q = w.q();
        let rows: Vec<Vec<f64>> = (0..q).map(|x| w.trans_row(x)).collect();
        let reveal = erasure_prob(w).map(|_| {
            (0..w.num_outputs())
                .map(|y| {
                    let col = w.joint_col(y);
                    let s: f64 = col.iter().sum();
                    let nz: Vec<usize> = (0..q).filter(|&x| s > 0.0 && col[x] / s > 1e-12).collect();
                    (nz.len() == 1).then(|| nz[0] as Elem)
                })
                .collect()
        });
        let llr = (0..w.num_outputs())
            .map(|y| (0..q).map(|x| { let p = w.trans(x, y); if p > 0.0 { log(p) } else { f64::NEG_INFINITY } }).collect())
            .collect();
        ChannelSim { w, rows, reveal, llr }
    }

    fn transmit<R: Rng>(&self, x: &[Elem], rng: &mut R) -> Received {
        let ys: Vec<usize> = x.iter().map(|&s| categorical(rng, &self.rows[s as usize])).collect();
        match &self.reveal {
            Some(rev) => Received::Erasure(ys.iter().map(|&y| rev[y]).collect()),
            None => Received::Soft(ys.iter().map(|&y| self.llr[y].clone()).collect()),
        }
    }
}

/// Runs trial `t`: uniform information symbols, zero fill, one channel use
/// per position, SC decoding.
fn run_frame(spec: &CodeSpec, sim: &ChannelSim, fill: &[Elem], tables: &KernelTables, seed: u64, t: u64) -> Result<Frame> {
    let q = sim.w.q();
    let mut rng = stream(seed, t);
    let info: Vec<Elem> = (0..spec.info_len()).map(|_| rng.gen_range(0..q) as Elem).collect();
    let codeword = encode_with(spec, &info, fill)?;
    let received = sim.transmit(&codeword, &mut rng);
    let d = decode_with(spec, &received, fill, tables)?;
    Ok(Frame { info, codeword, received, decoded: d.info, success: d.success, op_count: d.op_count })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FerBlock {
    pub trials: u64,
    pub errors: u64,
    pub ops: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FerResult {
    pub trials: u64,
    pub errors: u64,
    pub fer: f64,
    /// Wilson 95% interval.
    pub ci: (f64, f64),
    pub avg_op_count: f64,
    /// Consecutive trial blocks in trial order.
    pub blocks: Vec<FerBlock>,
}

/// Monte Carlo frame error rate, `block` trials per reported block.
pub fn simulate_fer<E: Executor>(spec: &CodeSpec, w: &Dmc, trials: u64, seed: u64, block: u64, exec: &E) -> Result<FerResult> {
    if w.field() != spec.kernel.field() {
        return Err(invalid("channel and code live over different fields"));
    }
    let sim = ChannelSim::new(w);
    let fill = fill_vector(spec, FrozenFill::Zeros);
    let tables = KernelTables::new(spec);
    let parts = exec.map(chunks(trials, block), |(a, b)| -> Result<FerBlock> {
        let mut blk = FerBlock { trials: b - a, errors: 0, ops: 0 };
        for t in a..b {
            let fr = run_frame(spec, &sim, &fill, &tables, seed, t)?;
            blk.errors += fr.is_error() as u64;
            blk.ops += fr.op_count;
        }
        Ok(blk)
    });
    let blocks: Vec<FerBlock> = parts.into_iter().collect::<Result<_>>()?;
    let errors: u64 = blocks.iter().map(|b| b.errors).sum();
    let ops: u64 = blocks.iter().map(|b| b.ops).sum();
    let (fer, avg) = if trials == 0 { (0.0, 0.0) } else { (errors as f64 / trials as f64, ops as f64 / trials as f64) };
    Ok(FerResult { trials, errors, fer, ci: wilson(errors, trials, 1.96), avg_op_count: avg, blocks })
}

/// A single frame, for inspection.
pub fn simulate_frame(spec: &CodeSpec, w: &Dmc, seed: u64, trial: u64) -> Result<Frame> {
    let sim = ChannelSim::new(w);
    let fill = fill_vector(spec, FrozenFill::Zeros);
    run_frame(spec, &sim, &fill, &KernelTables::new(spec), seed, trial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{build_frozen, build_pruned, Strategy};
    use crate::exec::Sequential;
    use crate::kernel::{kron_power, Kernel};

    fn full_code(k: &Kernel, n: usize, info: Vec<bool>) -> CodeSpec {
        let rate = info.iter().filter(|&&b| b).count() as f64 / info.len() as f64;
        CodeSpec {
            kernel: k.clone(),
            n,
            info,
            pruned: None,
            design_pe: 0.0,
            design_bound: None,
            rate,
            eu_du_pairs: 0,
            mean_s: n as f64,
            theta: None,
            degraded: false,
        }
    }

    #[test]
    fn encode_single_kernel_and_example() {
        let k = Kernel::arikan();
        let spec = full_code(&k, 1, vec![true, true]);
        assert_eq!(encode(&spec, &[1, 0], FrozenFill::Zeros).unwrap(), vec![1, 0]);
        assert_eq!(encode(&spec, &[0, 1], FrozenFill::Zeros).unwrap(), vec![1, 1]);
        let spec = full_code(&k, 2, vec![false, false, false, true]);
        assert_eq!(encode(&spec, &[1], FrozenFill::Zeros).unwrap(), vec![1, 1, 1, 1]);
        let spec = full_code(&k, 3, vec![false; 8]);
        assert_eq!(encode(&spec, &[], FrozenFill::Zeros).unwrap(), vec![0; 8]);
        assert!(encode(&spec, &[1], FrozenFill::Zeros).is_err());
    }

    #[test]
    fn full_encode_is_kron_power() {
        let f = Field::with_order(3).unwrap();
        let k = Kernel::from_rows(&f, &[&[1, 0], &[2, 1]]).unwrap();
        let big = kron_power(&k, 3).unwrap();
        let spec = full_code(&k, 3, vec![true; 8]);
        let mut rng = stream(4, 0);
        for _ in 0..20 {
            let u: Vec<Elem> = (0..8).map(|_| rng.gen_range(0..3) as Elem).collect();
            assert_eq!(encode(&spec, &u, FrozenFill::Zeros).unwrap(), big.apply(&u));
        }
    }

    #[test]
    fn erasure_roundtrip_and_all_erased() {
        let k = Kernel::arikan();
        let w = Dmc::bec(0.5).unwrap();
        let spec = build_pruned(&w, &k, 8, 1e-3, None).unwrap();
        let mut rng = stream(9, 0);
        for fill in [FrozenFill::Zeros, FrozenFill::Seeded(3)] {
            for _ in 0..100 {
                let u: Vec<Elem> = (0..spec.info_len()).map(|_| rng.gen_range(0..2) as Elem).collect();
                let x = encode(&spec, &u, fill).unwrap();
                let d = sc_decode(&spec, &Received::Erasure(x.iter().map(|&s| Some(s)).collect()), fill).unwrap();
                assert!(d.success);
                assert_eq!(d.info, u);
            }
        }
        assert!(spec.info_len() > 0);
        let d = sc_decode(&spec, &Received::Erasure(vec![None; 256]), FrozenFill::Zeros).unwrap();
        assert!(!d.success);
    }

    #[test]
    fn soft_roundtrip_noiseless() {
        let k = Kernel::g_ye();
        let f = k.field().clone();
        let spec = full_code(&k, 2, (0..9).map(|i| i % 2 == 1).collect());
        let q = f.q();
        let mut rng = stream(2, 0);
        for _ in 0..20 {
            let u: Vec<Elem> = (0..spec.info_len()).map(|_| rng.gen_range(0..q) as Elem).collect();
            let x = encode(&spec, &u, FrozenFill::Zeros).unwrap();
            let soft = x.iter().map(|&s| (0..q).map(|a| if a == s as usize { 0.0 } else { -30.0 }).collect()).collect();
            let d = sc_decode(&spec, &Received::Soft(soft), FrozenFill::Zeros).unwrap();
            assert_eq!(d.info, u);
        }
    }

    #[test]
    fn op_count_full_tree() {
        let k = Kernel::arikan();
        for n in 1..7usize {
            let nn = 1usize << n;
            let spec = full_code(&k, n, vec![true; nn]);
            let d = sc_decode(&spec, &Received::Erasure(vec![Some(0); nn]), FrozenFill::Zeros).unwrap();
            assert_eq!(d.op_count, (nn * (n + 1)) as u64);
        }
    }

    #[test]
    fn op_count_pruned_is_n_mean_s_plus_n() {
        let k = Kernel::arikan();
        let w = Dmc::bec(0.5).unwrap();
        let spec = build_pruned(&w, &k, 10, 1e-4, None).unwrap();
        let d = sc_decode(&spec, &Received::Erasure(vec![Some(0); 1024]), FrozenFill::Zeros).unwrap();
        let expect = 1024.0 * (spec.mean_s + 1.0);
        assert!((d.op_count as f64 - expect).abs() < 1e-6);
    }

    #[test]
    fn linear_in_info() {
        let f = Field::with_order(4).unwrap();
        let k = Kernel::from_rows(&f, &[&[1, 0], &[2, 1]]).unwrap();
        let spec = full_code(&k, 3, (0..8).map(|i| i != 0 && i != 3).collect());
        let mut rng = stream(5, 0);
        for _ in 0..100 {
            let a: Vec<Elem> = (0..6).map(|_| rng.gen_range(0..4) as Elem).collect();
            let b: Vec<Elem> = (0..6).map(|_| rng.gen_range(0..4) as Elem).collect();
            let s: Vec<Elem> = a.iter().zip(&b).map(|(x, y)| f.add(*x, *y)).collect();
            let xa = encode(&spec, &a, FrozenFill::Zeros).unwrap();
            let xb = encode(&spec, &b, FrozenFill::Zeros).unwrap();
            let xs = encode(&spec, &s, FrozenFill::Zeros).unwrap();
            let sum: Vec<Elem> = xa.iter().zip(&xb).map(|(x, y)| f.add(*x, *y)).collect();
            assert_eq!(xs, sum);
        }
    }

    #[test]
    fn erasure_table_matches_direct_elimination() {
        let f = Field::with_order(3).unwrap();
        for seed in 0..5 {
            let k = crate::kernel::random_kernel(&f, 3, 77, seed);
            let spec = full_code(&k, 2, (0..9).map(|i| i % 3 != 0).collect());
            let fast = KernelTables::new(&spec);
            let slow = KernelTables::without_erasure_table(&spec);
            let fv = fill_vector(&spec, FrozenFill::Zeros);
            let mut rng = stream(seed, 1);
            for _ in 0..50 {
                let u: Vec<Elem> = (0..spec.info_len()).map(|_| rng.gen_range(0..3) as Elem).collect();
                let x = encode(&spec, &u, FrozenFill::Zeros).unwrap();
                let r = Received::Erasure(x.iter().map(|&s| (rng.gen_range(0..10) < 6).then_some(s)).collect());
                assert_eq!(decode_with(&spec, &r, &fv, &fast).unwrap(), decode_with(&spec, &r, &fv, &slow).unwrap());
            }
        }
    }

    #[test]
    fn sc_success_means_unique_ml() {
        let k = Kernel::arikan();
        let mut rng = stream(6, 0);
        for mask in 0u32..256 {
            let spec = full_code(&k, 3, (0..8).map(|i| mask >> i & 1 == 1).collect());
            let u: Vec<Elem> = (0..spec.info_len()).map(|_| rng.gen_range(0..2) as Elem).collect();
            let x = encode(&spec, &u, FrozenFill::Zeros).unwrap();
            for pat in (0u32..256).step_by(7) {
                let r: Vec<Option<Elem>> = x.iter().enumerate().map(|(i, &s)| (pat >> i & 1 == 0).then_some(s)).collect();
                let d = sc_decode(&spec, &Received::Erasure(r.clone()), FrozenFill::Zeros).unwrap();
                if d.success {
                    let all = consistent_infos(&spec, &r, FrozenFill::Zeros).unwrap();
                    assert_eq!(all, vec![d.info.clone()]);
                }
            }
        }
    }

    #[test]
    fn fer_empty_and_deterministic() {
        let k = Kernel::arikan();
        let w = Dmc::bec(0.5).unwrap();
        let spec = build_frozen(&w, &k, 6, Strategy::Threshold(1e-2), None, &Sequential).unwrap();
        let r = simulate_fer(&spec, &w, 0, 1, 100, &Sequential).unwrap();
        assert_eq!((r.trials, r.errors, r.fer), (0, 0, 0.0));
        let a = simulate_fer(&spec, &w, 500, 1, 100, &Sequential).unwrap();
        let b = simulate_fer(&spec, &w, 500, 1, 37, &Sequential).unwrap();
        assert_eq!((a.errors, a.avg_op_count), (b.errors, b.avg_op_count));
    }

    #[test]
    fn soft_bsc_fer_under_design() {
        let k = Kernel::arikan();
        let w = Dmc::bsc(0.02).unwrap();
        let spec = build_frozen(&w, &k, 6, Strategy::Threshold(1e-3), None, &Sequential).unwrap();
        assert!(spec.info_len() > 0);
        let r = simulate_fer(&spec, &w, 2000, 3, 500, &Sequential).unwrap();
        let sigma = libm::sqrt(spec.design_pe * (1.0 - spec.design_pe) / 2000.0);
        assert!(r.fer <= spec.design_pe + 3.0 * sigma + 1e-3, "{} vs {}", r.fer, spec.design_pe);
    }
}
