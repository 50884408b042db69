//! Distributed lossless compression: joint-source entropies, the
//! Slepian–Wolf region (with an optional helper), and source splitting.
//!
//! Sources are indexed from 0 in this module. A joint pmf is flattened
//! row-major with source 0 the most significant digit.
//!
//! Source splitting places fragment `X[m]<l>` (1-based `m`, `l`) at
//! `(2l - 1) / 2^m` on the number line. Compressor `m` compresses each of
//! its fragments given every fragment to its right and the knob `Q`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use libm::{fabs, log2};

use crate::error::{invalid, Error, Result};
use crate::math::bisect;

/// Largest augmented support handled exactly.
pub const AUGMENTED_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct JointSource {
    pub alphabets: Vec<usize>,
    pub pmf: Vec<f64>,
}

impl JointSource {
    pub fn new(alphabets: Vec<usize>, pmf: Vec<f64>) -> Result<JointSource> {
        if alphabets.is_empty() || alphabets.contains(&0) {
            return Err(invalid("alphabets must be nonempty and positive"));
        }
        let size = alphabets.iter().try_fold(1usize, |a, &b| a.checked_mul(b));
        if size != Some(pmf.len()) {
            return Err(invalid(format!("pmf has {} entries, alphabets need {:?}", pmf.len(), size)));
        }
        if pmf.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(invalid("pmf entries must be finite and nonnegative"));
        }
        let s: f64 = pmf.iter().sum();
        if fabs(s - 1.0) > 1e-12 {
            return Err(invalid(format!("pmf sums to {s}, not 1")));
        }
        Ok(JointSource { alphabets, pmf })
    }

    /// `X[0]` uniform on `{0,1}` and `X[1] = X[0] xor Bern(p)`.
    pub fn dsbs(p: f64) -> JointSource {
        JointSource { alphabets: vec![2, 2], pmf: vec![(1.0 - p) / 2.0, p / 2.0, p / 2.0, (1.0 - p) / 2.0] }
    }

    pub fn sources(&self) -> usize {
        self.alphabets.len()
    }

    fn support(&self) -> Dist {
        let mut out = Vec::new();
        for (i, &p) in self.pmf.iter().enumerate() {
            if p > 0.0 {
                out.push((self.digits(i), p));
            }
        }
        Dist(out)
    }

    fn digits(&self, mut i: usize) -> Vec<u16> {
        let mut d = vec![0u16; self.alphabets.len()];
        for k in (0..self.alphabets.len()).rev() {
            d[k] = (i % self.alphabets[k]) as u16;
            i /= self.alphabets[k];
        }
        d
    }
}

/// Sparse distribution over tuples.
#[derive(Debug, Clone)]
struct Dist(Vec<(Vec<u16>, f64)>);

impl Dist {
    /// Entropy in bits of the marginal on `vars`.
    fn entropy(&self, vars: &[usize]) -> f64 {
        if vars.is_empty() {
            return 0.0;
        }
        let mut keyed: Vec<(Vec<u16>, f64)> =
            self.0.iter().map(|(x, p)| (vars.iter().map(|&v| x[v]).collect(), *p)).collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        let mut h = 0.0;
        let mut i = 0;
        while i < keyed.len() {
            let mut p = 0.0;
            let mut j = i;
            while j < keyed.len() && keyed[j].0 == keyed[i].0 {
                p += keyed[j].1;
                j += 1;
            }
            if p > 0.0 {
                h -= p * log2(p);
            }
            i = j;
        }
        h
    }

    /// `H(A | C)` in bits.
    fn cond(&self, a: &[usize], c: &[usize]) -> f64 {
        let mut ac: Vec<usize> = a.to_vec();
        ac.extend_from_slice(c);
        (self.entropy(&ac) - self.entropy(c)).max(0.0)
    }
}

fn check_sets(m: usize, s: &[usize], t: &[usize]) -> Result<()> {
    for &i in s.iter().chain(t) {
        if i >= m {
            return Err(invalid(format!("source index {i} out of range for {m} sources")));
        }
    }
    if s.iter().any(|i| t.contains(i)) {
        return Err(invalid("conditioned and conditioning sets overlap"));
    }
    Ok(())
}

/// `H(X[S] | X[T])` in bits.
pub fn cond_entropy_set(p: &JointSource, s: &[usize], t: &[usize]) -> Result<f64> {
    check_sets(p.sources(), s, t)?;
    Ok(p.support().cond(s, t))
}

/// Nonempty subsets of `0..m` as bitmasks, in increasing order.
fn subsets(m: usize) -> impl Iterator<Item = u32> {
    1u32..(1u32 << m)
}

fn members(mask: u32, m: usize) -> Vec<usize> {
    (0..m).filter(|&i| mask >> i & 1 == 1).collect()
}

/// A helper observing the last source through a test channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Helper {
    /// `channel[x][u] = P(U = u | X_helper = x)`.
    pub channel: Vec<Vec<f64>>,
    pub rate: f64,
}

/// Tolerance for the boundary of the region.
pub const REGION_TOL: f64 = 1e-12;

/// Subset lower bounds `H(X[S] | X[S^c])` (and `U` when helped), by mask.
pub fn subset_bounds(p: &JointSource, helper: Option<&Helper>) -> Result<Vec<(u32, f64)>> {
    let (dist, m, extra) = match helper {
        None => (p.support(), p.sources(), Vec::new()),
        Some(h) => {
            let m = p.sources() - 1;
            if m == 0 {
                return Err(invalid("a helped source needs at least one sender"));
            }
            (with_helper(p, h)?, m, vec![m])
        }
    };
    Ok(subsets(m)
        .map(|mask| {
            let s = members(mask, m);
            let mut c: Vec<usize> = (0..m).filter(|i| !s.contains(i)).collect();
            c.extend_from_slice(&extra);
            (mask, dist.cond(&s, &c))
        })
        .collect())
}

/// Senders plus `U`, with the helper source marginalized out.
fn with_helper(p: &JointSource, h: &Helper) -> Result<Dist> {
    let m = p.sources() - 1;
    let hx = p.alphabets[m];
    if h.channel.len() != hx {
        return Err(invalid("helper channel needs one row per helper symbol"));
    }
    for row in &h.channel {
        if row.iter().any(|&v| !(v >= 0.0)) || fabs(row.iter().sum::<f64>() - 1.0) > 1e-9 {
            return Err(invalid("helper channel rows must be distributions"));
        }
    }
    let mut out = Vec::new();
    for (x, px) in p.support().0 {
        for (u, &pu) in h.channel[x[m] as usize].iter().enumerate() {
            if pu > 0.0 {
                let mut k = x[..m].to_vec();
                k.push(u as u16);
                out.push((k, px * pu));
            }
        }
    }
    Ok(Dist(out))
}

/// `I(X_helper; U)` in bits.
pub fn helper_information(p: &JointSource, h: &Helper) -> Result<f64> {
    let m = p.sources() - 1;
    let mut out = Vec::new();
    for (x, px) in p.support().0 {
        for (u, &pu) in h.channel.get(x[m] as usize).ok_or_else(|| invalid("helper channel too short"))?.iter().enumerate() {
            if pu > 0.0 {
                out.push((vec![x[m], u as u16], px * pu));
            }
        }
    }
    let d = Dist(out);
    Ok((d.entropy(&[1]) - d.cond(&[1], &[0])).max(0.0))
}

/// Membership in the rate region; every subset inequality and, if helped,
/// `R_helper >= I(X_helper; U)`.
pub fn region_check(p: &JointSource, rates: &[f64], helper: Option<&Helper>) -> Result<bool> {
    let m = if helper.is_some() { p.sources() - 1 } else { p.sources() };
    if rates.len() != m {
        return Err(invalid(format!("expected {m} rates, got {}", rates.len())));
    }
    for (mask, bound) in subset_bounds(p, helper)? {
        let r: f64 = members(mask, m).iter().map(|&i| rates[i]).sum();
        if r < bound - REGION_TOL {
            return Ok(false);
        }
    }
    if let Some(h) = helper {
        if h.rate < helper_information(p, h)? - REGION_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Vertex of the dominant face for a compression order: `perm[0]` is
/// compressed given all later sources, and so on.
pub fn permutation_vertex(p: &JointSource, perm: &[usize]) -> Result<Vec<f64>> {
    let m = p.sources();
    let mut sorted = perm.to_vec();
    sorted.sort_unstable();
    if sorted != (0..m).collect::<Vec<_>>() {
        return Err(invalid("not a permutation of the sources"));
    }
    let d = p.support();
    let mut b = vec![0.0; m];
    for (k, &s) in perm.iter().enumerate() {
        b[s] = d.cond(&[s], &perm[k + 1..]);
    }
    Ok(b)
}

/// Vertices of the dominant face by brute-force enumeration: every choice
/// of `m - 1` tight subset inequalities plus the sum equality, kept when
/// feasible, deduplicated within `tol`.
pub fn face_vertices(p: &JointSource, tol: f64) -> Result<Vec<Vec<f64>>> {
    let m = p.sources();
    if m > 4 {
        return Err(Error::Guard { what: "vertex enumeration (sources)", needed: m as u128, limit: 4 });
    }
    let bounds = subset_bounds(p, None)?;
    let full = (1u32 << m) - 1;
    let total = bounds.iter().find(|b| b.0 == full).unwrap().1;
    let proper: Vec<(u32, f64)> = bounds.iter().cloned().filter(|b| b.0 != full).collect();
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut pick = Vec::new();
    choose(&proper, m - 1, 0, &mut pick, &mut |rows: &[(u32, f64)]| {
        let mut a: Vec<Vec<f64>> = rows.iter().map(|(mask, _)| (0..m).map(|i| (mask >> i & 1) as f64).collect()).collect();
        let mut rhs: Vec<f64> = rows.iter().map(|r| r.1).collect();
        a.push(vec![1.0; m]);
        rhs.push(total);
        if let Some(x) = solve_dense(a, rhs) {
            let feasible = bounds.iter().all(|(mask, b)| {
                members(*mask, m).iter().map(|&i| x[i]).sum::<f64>() >= b - tol
            });
            if feasible && !out.iter().any(|v| v.iter().zip(&x).all(|(a, b)| fabs(a - b) <= tol)) {
                out.push(x);
            }
        }
    });
    Ok(out)
}

fn choose<F: FnMut(&[(u32, f64)])>(items: &[(u32, f64)], k: usize, start: usize, pick: &mut Vec<(u32, f64)>, f: &mut F) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in start..items.len() {
        pick.push(items[i]);
        choose(items, k, i + 1, pick, f);
        pick.pop();
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| fabs(a[i][c]).partial_cmp(&fabs(a[j][c])).unwrap())?;
        if fabs(a[p][c]) < 1e-12 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                if f != 0.0 {
                    for k in c..n {
                        a[r][k] -= f * a[c][k];
                    }
                    b[r] -= f * b[c];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// `H(XY|Z) + H(YZ|X) - H(Y|XZ) - H(XYZ)` for a three-source pmf; never
/// positive.
pub fn supermodularity_gap(p: &JointSource) -> Result<f64> {
    if p.sources() != 3 {
        return Err(invalid("supermodularity gap needs three sources"));
    }
    let d = p.support();
    Ok(d.cond(&[0, 1], &[2]) + d.cond(&[1, 2], &[0]) - d.cond(&[1], &[0, 2]) - d.entropy(&[0, 1, 2]))
}

/// One row of the three-source splitting table: the fragment index `l`
/// carrying the true value for sources 1, 2, 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitRow {
    pub name: &'static str,
    pub perm: [usize; 3],
    pub l: [usize; 3],
}

/// The eight rows; `312` and `213` each have two assignments.
pub const ROWS3: [SplitRow; 8] = [
    SplitRow { name: "123", perm: [0, 1, 2], l: [1, 2, 4] },
    SplitRow { name: "132", perm: [0, 2, 1], l: [1, 2, 3] },
    SplitRow { name: "312a", perm: [2, 0, 1], l: [1, 2, 2] },
    SplitRow { name: "312b", perm: [2, 0, 1], l: [1, 2, 1] },
    SplitRow { name: "321", perm: [2, 1, 0], l: [1, 1, 1] },
    SplitRow { name: "231", perm: [1, 2, 0], l: [1, 1, 2] },
    SplitRow { name: "213a", perm: [1, 0, 2], l: [1, 1, 3] },
    SplitRow { name: "213b", perm: [1, 0, 2], l: [1, 1, 4] },
];

/// Rows visited in order around the hexagon (first assignment of duplicates).
pub const TOUR3: [usize; 6] = [0, 1, 2, 4, 5, 6];

/// Knob distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitConfig {
    /// `P{Q = 2}`; `Q = 1` exposes `X[2]` before `X[1]`.
    Two { p2: f64 },
    /// Weights over [`ROWS3`].
    Three { weights: [f64; 8] },
}

impl SplitConfig {
    pub fn deterministic3(row: usize) -> SplitConfig {
        let mut weights = [0.0; 8];
        weights[row] = 1.0;
        SplitConfig::Three { weights }
    }

    fn knob(&self) -> Result<Vec<(usize, f64)>> {
        let w: Vec<f64> = match self {
            SplitConfig::Two { p2 } => vec![1.0 - p2, *p2],
            SplitConfig::Three { weights } => weights.to_vec(),
        };
        if w.iter().any(|&x| !(x >= -1e-15)) || fabs(w.iter().sum::<f64>() - 1.0) > 1e-9 {
            return Err(invalid("knob weights must form a distribution"));
        }
        Ok(w.into_iter().enumerate().filter(|&(_, x)| x > 0.0).collect())
    }

    fn sources(&self) -> usize {
        match self {
            SplitConfig::Two { .. } => 2,
            SplitConfig::Three { .. } => 3,
        }
    }
}

/// Fragments `(source, l)` (both 1-based) in number-line order.
pub fn fragment_order(m: usize) -> Vec<(usize, usize)> {
    let mut f: Vec<(usize, usize)> =
        (1..=m).flat_map(|s| (1..=1usize << (s - 1)).map(move |l| (s, l))).collect();
    // (2l - 1) / 2^s compared exactly via a common denominator 2^m
    f.sort_by_key(|&(s, l)| (2 * l - 1) << (m - s));
    f
}

/// Fragment index carrying the true value of each source for knob value `q`.
fn true_positions(m: usize, q: usize) -> [usize; 3] {
    match m {
        2 => [1, q + 1, 0],
        _ => ROWS3[q].l,
    }
}

/// Fragment values for one source outcome; `None` is the placeholder.
pub fn split(m: usize, q: usize, x: &[u16]) -> Vec<Option<u16>> {
    let pos = true_positions(m, q);
    fragment_order(m).iter().map(|&(s, l)| if pos[s - 1] == l { Some(x[s - 1]) } else { None }).collect()
}

/// Inverse of [`split`].
pub fn unsplit(m: usize, frags: &[Option<u16>]) -> Option<Vec<u16>> {
    let mut x = vec![None; m];
    for (&(s, _), v) in fragment_order(m).iter().zip(frags) {
        if let Some(v) = v {
            if x[s - 1].replace(*v).is_some() {
                return None;
            }
        }
    }
    x.into_iter().collect()
}

/// A compression duty: compressor `source` handles fragment `l` given the
/// listed fragments and `Q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub source: usize,
    pub l: usize,
    pub given: Vec<(usize, usize)>,
}

pub fn tasks(m: usize) -> Vec<Task> {
    let order = fragment_order(m);
    order.iter().enumerate().map(|(i, &(s, l))| Task { source: s, l, given: order[i + 1..].to_vec() }).collect()
}

pub fn fragment_name(f: (usize, usize)) -> String {
    format!("X[{}]<{}>", f.0, f.1)
}

/// Per-compressor duty `B`, computed exactly on the joint law of the
/// fragments and the knob.
pub fn duty_point(p: &JointSource, cfg: &SplitConfig) -> Result<Vec<f64>> {
    let m = cfg.sources();
    if p.sources() != m {
        return Err(invalid(format!("split configuration is for {m} sources, source has {}", p.sources())));
    }
    let knob = cfg.knob()?;
    let base = p.support();
    let states = base.0.len().saturating_mul(knob.len());
    if states > AUGMENTED_LIMIT {
        return Err(Error::Guard { what: "augmented support", needed: states as u128, limit: AUGMENTED_LIMIT as u128 });
    }
    let k = fragment_order(m).len();
    let mut aug = Vec::with_capacity(states);
    for (x, px) in &base.0 {
        for &(q, pq) in &knob {
            // the placeholder is one extra symbol past each alphabet
            let mut key: Vec<u16> = split(m, q, x)
                .iter()
                .zip(fragment_order(m))
                .map(|(v, (s, _))| v.unwrap_or(p.alphabets[s - 1] as u16))
                .collect();
            key.push(q as u16);
            aug.push((key, px * pq));
        }
    }
    let aug = Dist(aug);
    let mut b = vec![0.0; m];
    for (i, t) in tasks(m).iter().enumerate() {
        let given: Vec<usize> = (i + 1..=k).collect();
        b[t.source - 1] += aug.cond(&[i], &given);
    }
    Ok(b)
}

/// Deterministic duty for one row, i.e. a vertex of the face.
fn row_duty(p: &JointSource, m: usize, row: usize) -> Result<Vec<f64>> {
    match m {
        2 => duty_point(p, &SplitConfig::Two { p2: row as f64 }),
        _ => duty_point(p, &SplitConfig::deterministic3(row)),
    }
}

/// Checks that `target` sits on the dominant face within `tol`.
pub fn on_face(p: &JointSource, target: &[f64], tol: f64) -> Result<bool> {
    let m = p.sources();
    if target.len() != m {
        return Err(invalid(format!("expected {m} rates, got {}", target.len())));
    }
    let bounds = subset_bounds(p, None)?;
    let full = (1u32 << m) - 1;
    for (mask, b) in bounds {
        let r: f64 = members(mask, m).iter().map(|&i| target[i]).sum();
        if r < b - tol || (mask == full && r > b + tol) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Finds a knob whose duty point is `target`.
///
/// Two sources: bisection on `P{Q = 2}`. Three sources: a vertex gives a
/// deterministic knob, a hexagon edge is bisected along its two-row
/// mixture, anything else is solved by fan triangulation from the first
/// vertex (the duty is linear in the knob weights since `Q` is always
/// observed).
pub fn solve_knob(p: &JointSource, target: &[f64], tol: f64) -> Result<SplitConfig> {
    let m = p.sources();
    if !(m == 2 || m == 3) {
        return Err(invalid("source splitting is implemented for two or three sources"));
    }
    if !on_face(p, target, tol)? {
        return Err(Error::Domain(format!("target {target:?} is not on the dominant face")));
    }
    if m == 2 {
        let lo = row_duty(p, 2, 0)?[0];
        let hi = row_duty(p, 2, 1)?[0];
        if fabs(target[0] - lo) <= tol {
            return Ok(SplitConfig::Two { p2: 0.0 });
        }
        if fabs(target[0] - hi) <= tol {
            return Ok(SplitConfig::Two { p2: 1.0 });
        }
        let f = |t: f64| duty_point(p, &SplitConfig::Two { p2: t }).map(|b| b[0] - target[0]).unwrap_or(f64::NAN);
        let t = bisect(0.0, 1.0, 1e-15, f).ok_or_else(|| Error::Domain("target outside the knob range".into()))?;
        return Ok(SplitConfig::Two { p2: t });
    }
    let verts: Vec<Vec<f64>> = TOUR3.iter().map(|&r| row_duty(p, 3, r)).collect::<Result<_>>()?;
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| fabs(x - y)).fold(0.0, f64::max);
    for (i, v) in verts.iter().enumerate() {
        if dist(v, target) <= tol {
            return Ok(SplitConfig::deterministic3(TOUR3[i]));
        }
    }
    for i in 0..6 {
        let (a, b) = (&verts[i], &verts[(i + 1) % 6]);
        if let Some(t) = segment_param(a, b, target, tol) {
            // refine against the exact duty on the two-row mixture
            let c = (0..3).max_by(|&x, &y| fabs(b[x] - a[x]).partial_cmp(&fabs(b[y] - a[y])).unwrap()).unwrap();
            let mix = |t: f64| {
                let mut w = [0.0; 8];
                w[TOUR3[i]] += 1.0 - t;
                w[TOUR3[(i + 1) % 6]] += t;
                SplitConfig::Three { weights: w }
            };
            let f = |s: f64| duty_point(p, &mix(s)).map(|d| d[c] - target[c]).unwrap_or(f64::NAN);
            let s = bisect(0.0, 1.0, 1e-15, f).unwrap_or(t);
            return Ok(mix(s));
        }
    }
    for i in 1..5 {
        let (a, b, c) = (&verts[0], &verts[i], &verts[i + 1]);
        if let Some((wa, wb, wc)) = barycentric(a, b, c, target, tol) {
            let mut w = [0.0; 8];
            w[TOUR3[0]] += wa;
            w[TOUR3[i]] += wb;
            w[TOUR3[i + 1]] += wc;
            return Ok(SplitConfig::Three { weights: w });
        }
    }
    Err(Error::Domain("target on the face but not reached by any knob (numerical gap)".into()))
}

/// Parameter of `x` on segment `[a, b]` if it lies there within `tol`.
fn segment_param(a: &[f64], b: &[f64], x: &[f64], tol: f64) -> Option<f64> {
    let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
    let dd: f64 = d.iter().map(|v| v * v).sum();
    if dd <= tol * tol {
        return None;
    }
    let t = x.iter().zip(a).zip(&d).map(|((x, a), d)| (x - a) * d).sum::<f64>() / dd;
    if !(-tol..=1.0 + tol).contains(&t) {
        return None;
    }
    let t = t.clamp(0.0, 1.0);
    let off = x.iter().zip(a).zip(&d).map(|((x, a), d)| fabs(a + t * d - x)).fold(0.0, f64::max);
    (off <= tol).then_some(t)
}

/// Barycentric weights in the plane of the face (first two coordinates).
fn barycentric(a: &[f64], b: &[f64], c: &[f64], x: &[f64], tol: f64) -> Option<(f64, f64, f64)> {
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    if fabs(det) < 1e-14 {
        return None;
    }
    let wb = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
    let wc = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
    let wa = 1.0 - wb - wc;
    let eps = tol.max(1e-12);
    if wa < -eps || wb < -eps || wc < -eps {
        return None;
    }
    let (wa, wb, wc) = (wa.max(0.0), wb.max(0.0), wc.max(0.0));
    let s = wa + wb + wc;
    Some((wa / s, wb / s, wc / s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::h2;
    use crate::rng::stream;
    use rand::Rng;

    fn random_source(alphabets: Vec<usize>, seed: u64, idx: u64) -> JointSource {
        let mut rng = stream(seed, idx);
        let n: usize = alphabets.iter().product();
        let mut pmf: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let s: f64 = pmf.iter().sum();
        pmf.iter_mut().for_each(|v| *v /= s);
        let s: f64 = pmf.iter().sum();
        pmf[0] += 1.0 - s;
        JointSource { alphabets, pmf }
    }

    fn three_dsbs() -> JointSource {
        // X1 fair, X2 = X1 + Bern(0.1), X3 = X2 + Bern(0.2)
        let mut pmf = vec![0.0; 8];
        for x1 in 0..2 {
            for x2 in 0..2 {
                for x3 in 0..2 {
                    let a = if x1 == x2 { 0.9 } else { 0.1 };
                    let b = if x2 == x3 { 0.8 } else { 0.2 };
                    pmf[x1 * 4 + x2 * 2 + x3] = 0.5 * a * b;
                }
            }
        }
        JointSource::new(vec![2, 2, 2], pmf).unwrap()
    }

    #[test]
    fn conditional_entropy_examples() {
        let ind = JointSource::new(vec![2, 2], vec![0.25; 4]).unwrap();
        assert!(fabs(cond_entropy_set(&ind, &[0], &[1]).unwrap() - 1.0) < 1e-12);
        let eq = JointSource::new(vec![2, 2], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!(cond_entropy_set(&eq, &[1], &[0]).unwrap().abs() < 1e-12);
        let d = JointSource::dsbs(0.1);
        assert!(fabs(cond_entropy_set(&d, &[1], &[0]).unwrap() - 0.46900) < 1e-5);
        assert!(cond_entropy_set(&d, &[0], &[0]).is_err());
    }

    #[test]
    fn region_examples() {
        let d = JointSource::dsbs(0.1);
        let h12 = cond_entropy_set(&d, &[0], &[1]).unwrap();
        let h2_ = cond_entropy_set(&d, &[1], &[]).unwrap();
        assert!(region_check(&d, &[h12, h2_], None).unwrap());
        assert!(!region_check(&d, &[h12 - 0.01, h2_], None).unwrap());
        let h_all = cond_entropy_set(&d, &[0, 1], &[]).unwrap();
        assert!(region_check(&d, &[h_all / 2.0, h_all / 2.0], None).unwrap());
    }

    #[test]
    fn helper_region() {
        // sender X1, helper source X2 = X1 + Bern(0.1), U = X2 exactly
        let d = JointSource::dsbs(0.1);
        let id = Helper { channel: vec![vec![1.0, 0.0], vec![0.0, 1.0]], rate: 1.0 };
        assert!(fabs(helper_information(&d, &id).unwrap() - 1.0) < 1e-12);
        assert!(region_check(&d, &[h2(0.1)], Some(&id)).unwrap());
        assert!(!region_check(&d, &[h2(0.1) - 0.01], Some(&id)).unwrap());
        let cheap = Helper { rate: 0.5, ..id };
        assert!(!region_check(&d, &[h2(0.1)], Some(&cheap)).unwrap());
        // useless helper: the sender needs the full entropy
        let blind = Helper { channel: vec![vec![1.0], vec![1.0]], rate: 0.0 };
        assert!(region_check(&d, &[1.0], Some(&blind)).unwrap());
        assert!(!region_check(&d, &[0.99], Some(&blind)).unwrap());
    }

    #[test]
    fn two_source_duties() {
        let d = JointSource::dsbs(0.1);
        let b = duty_point(&d, &SplitConfig::Two { p2: 0.0 }).unwrap();
        assert!(fabs(b[0] - 1.0) < 1e-12 && fabs(b[1] - h2(0.1)) < 1e-12);
        let b = duty_point(&d, &SplitConfig::Two { p2: 1.0 }).unwrap();
        assert!(fabs(b[0] - h2(0.1)) < 1e-12 && fabs(b[1] - 1.0) < 1e-12);
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let b = duty_point(&d, &SplitConfig::Two { p2: i as f64 / 99.0 }).unwrap();
            assert!(b[0] <= prev + 1e-12);
            assert!(fabs(b[0] + b[1] - (1.0 + h2(0.1))) < 1e-12);
            prev = b[0];
        }
    }

    #[test]
    fn three_source_vertices() {
        let p = random_source(vec![2, 3, 2], 7, 0);
        for row in ROWS3 {
            let b = duty_point(&p, &SplitConfig::Three { weights: {
                let mut w = [0.0; 8];
                w[ROWS3.iter().position(|r| r == &row).unwrap()] = 1.0;
                w
            } }).unwrap();
            let v = permutation_vertex(&p, &row.perm).unwrap();
            for k in 0..3 {
                assert!(fabs(b[k] - v[k]) < 1e-12, "{} {b:?} {v:?}", row.name);
            }
        }
        // 231 -> (H(1), H(2|31), H(3|1))
        let v = permutation_vertex(&p, &[1, 2, 0]).unwrap();
        assert!(fabs(v[0] - cond_entropy_set(&p, &[0], &[]).unwrap()) < 1e-12);
        assert!(fabs(v[1] - cond_entropy_set(&p, &[1], &[0, 2]).unwrap()) < 1e-12);
        assert!(fabs(v[2] - cond_entropy_set(&p, &[2], &[0]).unwrap()) < 1e-12);
    }

    #[test]
    fn face_has_six_vertices() {
        let p = random_source(vec![2, 2, 3], 5, 1);
        let mut verts = face_vertices(&p, 1e-9).unwrap();
        assert_eq!(verts.len(), 6);
        for r in TOUR3 {
            let v = permutation_vertex(&p, &ROWS3[r].perm).unwrap();
            let i = verts.iter().position(|u| u.iter().zip(&v).all(|(a, b)| fabs(a - b) < 1e-9)).unwrap();
            verts.remove(i);
        }
    }

    #[test]
    fn fragment_layout() {
        assert_eq!(fragment_order(2), vec![(2, 1), (1, 1), (2, 2)]);
        assert_eq!(fragment_order(3), vec![(3, 1), (2, 1), (3, 2), (1, 1), (3, 3), (2, 2), (3, 4)]);
        // Q = 231 exposes X[2]<1> and X[3]<2>
        let f = split(3, 5, &[0, 1, 1]);
        assert_eq!(f, vec![None, Some(1), Some(1), Some(0), None, None, None]);
        for q in 0..8 {
            for x in 0..12u16 {
                let x = [x % 2, (x / 2) % 3, x / 6];
                assert_eq!(unsplit(3, &split(3, q, &x)).unwrap(), x.to_vec());
            }
        }
    }

    #[test]
    fn solve_midpoint_and_hexagon() {
        let d = JointSource::dsbs(0.1);
        let mid = [(1.0 + h2(0.1)) / 2.0; 2];
        let cfg = solve_knob(&d, &mid, 1e-9).unwrap();
        let b = duty_point(&d, &cfg).unwrap();
        assert!(fabs(b[0] - mid[0]) < 1e-6 && fabs(b[1] - mid[1]) < 1e-6);
        assert!(solve_knob(&d, &[1.0, 1.0], 1e-9).is_err());

        let p = three_dsbs();
        let verts: Vec<Vec<f64>> = TOUR3.iter().map(|&r| permutation_vertex(&p, &ROWS3[r].perm).unwrap()).collect();
        assert_eq!(solve_knob(&p, &verts[3], 1e-9).unwrap(), SplitConfig::deterministic3(TOUR3[3]));
        let edge: Vec<f64> = (0..3).map(|k| 0.3 * verts[1][k] + 0.7 * verts[2][k]).collect();
        let center: Vec<f64> = (0..3).map(|k| verts.iter().map(|v| v[k]).sum::<f64>() / 6.0).collect();
        for t in [edge, center] {
            let b = duty_point(&p, &solve_knob(&p, &t, 1e-9).unwrap()).unwrap();
            for k in 0..3 {
                assert!(fabs(b[k] - t[k]) < 1e-9);
            }
        }
    }

    #[test]
    fn supermodularity_random() {
        for i in 0..200 {
            let p = random_source(vec![2, 3, 2], 11, i);
            assert!(supermodularity_gap(&p).unwrap() <= 1e-10);
        }
    }
}
