//! Kernels: invertible matrices over F_q, their lowered form, ergodicity,
//! coset distances and the cumulant / Cramér data derived from them.

use alloc::vec;
use alloc::vec::Vec;

use libm::{ceil, log, pow};

use crate::error::{invalid, Error, Result};
use crate::gf::{self, Elem, Field, Mat};
use crate::math::golden_max;

#[derive(Debug, Clone)]
pub struct Kernel {
    field: Field,
    g: Mat,
    ginv: Mat,
    lowered: Option<Mat>,
}

impl PartialEq for Kernel {
    fn eq(&self, other: &Self) -> bool {
        self.field == other.field && self.g == other.g
    }
}
impl Eq for Kernel {}

/// Whether a kernel's lowered form generates the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ergodicity {
    Ergodic,
    NotErgodic,
    /// The lowered form does not exist, so the notion is not defined.
    Undetermined,
}

impl Kernel {
    pub fn new(field: &Field, g: Mat) -> Result<Kernel> {
        g.validate(field)?;
        if !g.is_square() || g.rows == 0 {
            return Err(invalid("a kernel must be a nonempty square matrix"));
        }
        let ginv = g
            .inverse(field)
            .ok_or_else(|| invalid("kernel matrix is singular"))?;
        let lowered = lowered_form(field, &g);
        Ok(Kernel { field: field.clone(), g, ginv, lowered })
    }

    pub fn from_rows(field: &Field, rows: &[&[Elem]]) -> Result<Kernel> {
        Kernel::new(field, Mat::from_rows(rows))
    }

    /// `[[1, 0], [1, 1]]` over F_2.
    pub fn arikan() -> Kernel {
        Kernel::from_rows(&Field::binary(), &[&[1, 0], &[1, 1]]).unwrap()
    }

    pub fn identity(field: &Field, l: usize) -> Kernel {
        Kernel::new(field, Mat::identity(l)).unwrap()
    }

    /// The 3x3 binary kernel with coset distances {1, 1, 3}.
    pub fn g_ye() -> Kernel {
        Kernel::from_rows(&Field::binary(), &[&[1, 0, 0], &[0, 1, 0], &[1, 1, 1]]).unwrap()
    }

    /// The 3x3 binary kernel with coset distances {1, 2, 2}.
    pub fn g_barg() -> Kernel {
        Kernel::from_rows(&Field::binary(), &[&[1, 0, 0], &[1, 1, 0], &[1, 0, 1]]).unwrap()
    }

    pub fn field(&self) -> &Field {
        &self.field
    }
    pub fn size(&self) -> usize {
        self.g.rows
    }
    pub fn matrix(&self) -> &Mat {
        &self.g
    }
    pub fn inverse(&self) -> &Mat {
        &self.ginv
    }
    pub fn lowered(&self) -> Option<&Mat> {
        self.lowered.as_ref()
    }

    pub fn ergodicity(&self) -> Ergodicity {
        match &self.lowered {
            None => Ergodicity::Undetermined,
            Some(lf) => {
                let l = lf.rows;
                let off: Vec<Elem> = (0..l)
                    .flat_map(|r| (0..r).map(move |c| (r, c)))
                    .map(|(r, c)| lf.get(r, c))
                    .filter(|&v| v != 0)
                    .collect();
                if !off.is_empty() && generated_subalgebra_size(&self.field, &off) == self.field.q() {
                    Ergodicity::Ergodic
                } else {
                    Ergodicity::NotErgodic
                }
            }
        }
    }

    pub fn is_ergodic(&self) -> Ergodicity {
        self.ergodicity()
    }

    /// The kernel whose coset distances are this kernel's dual coset
    /// distances in reverse order: `G^{-T}` with its rows reversed.
    pub fn dual(&self) -> Kernel {
        let t = self.ginv.transpose();
        let l = t.rows;
        let mut m = Mat::zeros(l, l);
        for r in 0..l {
            for c in 0..l {
                m.set(r, c, t.get(l - 1 - r, c));
            }
        }
        Kernel::new(&self.field, m).expect("inverse transpose is invertible")
    }

    /// `x = u G`.
    pub fn apply(&self, u: &[Elem]) -> Vec<Elem> {
        self.g.vec_mul(&self.field, u)
    }

    /// `u = x G^{-1}`.
    pub fn unapply(&self, x: &[Elem]) -> Vec<Elem> {
        self.ginv.vec_mul(&self.field, x)
    }
}

/// Size of the F_p-subalgebra of F_q generated by `gens`.
fn generated_subalgebra_size(f: &Field, gens: &[Elem]) -> usize {
    let q = f.q();
    let mut inside = vec![false; q];
    let mut members: Vec<Elem> = Vec::new();
    // the prime field is encoded as 0..p
    for a in 0..f.p() as usize {
        inside[a] = true;
        members.push(a as Elem);
    }
    for &g in gens {
        if !inside[g as usize] {
            inside[g as usize] = true;
            members.push(g);
        }
    }
    loop {
        let mut grew = false;
        let snapshot = members.clone();
        for &a in &snapshot {
            for &b in &snapshot {
                for c in [f.add(a, b), f.mul(a, b)] {
                    if !inside[c as usize] {
                        inside[c as usize] = true;
                        members.push(c);
                        grew = true;
                    }
                }
            }
        }
        if !grew {
            return members.len();
        }
    }
}

/// The lower-unitriangular `L` with `L G^{-1}` upper triangular, obtained by
/// clearing each row's above-diagonal part with the rows beneath it. `None`
/// when a pivot vanishes (no such factorization without permutations).
pub fn lowered_form(f: &Field, g: &Mat) -> Option<Mat> {
    let l = g.rows;
    let mut a = g.clone();
    for i in (0..l).rev() {
        for k in (i + 1..l).rev() {
            let c = a.get(i, k);
            if c != 0 {
                gf::add_row(f, &mut a, i, k, f.neg(c));
            }
        }
        let d = a.get(i, i);
        if d == 0 {
            return None;
        }
        let s = f.inv(d).ok()?;
        for c in 0..l {
            let v = a.get(i, c);
            a.set(i, c, f.mul(v, s));
        }
    }
    Some(a)
}

/// Coset and dual coset distances with full weight enumerators.
/// Index `j` is zero-based: `dz[j]` is the distance of row `j + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceProfile {
    pub l: usize,
    pub dz: Vec<usize>,
    pub ds: Vec<usize>,
    /// `fz[j][w]`: number of words of weight `w` in `r_j + span(rows below)`.
    pub fz: Vec<Vec<u64>>,
    /// `fs[j][w]`: same for `c_j + span(columns before)` of `G^{-1}`.
    pub fs: Vec<Vec<u64>>,
}

fn min_degree(poly: &[u64]) -> usize {
    poly.iter().position(|&c| c > 0).unwrap_or(0)
}

/// Exhaustive coset enumeration for every index; the span dimension is
/// capped at `cap` (see [`gf::coset_weight_enumerator`]).
pub fn distances(k: &Kernel, cap: usize) -> Result<DistanceProfile> {
    let f = &k.field;
    let l = k.size();
    let rows: Vec<Vec<Elem>> = (0..l).map(|r| k.g.row(r).to_vec()).collect();
    let cols: Vec<Vec<Elem>> = (0..l).map(|c| k.ginv.col(c)).collect();
    let mut fz = Vec::with_capacity(l);
    let mut fs = Vec::with_capacity(l);
    for j in 0..l {
        let below: Vec<&[Elem]> = rows[j + 1..].iter().map(|v| v.as_slice()).collect();
        fz.push(gf::coset_weight_enumerator(f, &rows[j], &below, cap)?);
        let before: Vec<&[Elem]> = cols[..j].iter().map(|v| v.as_slice()).collect();
        fs.push(gf::coset_weight_enumerator(f, &cols[j], &before, cap)?);
    }
    Ok(DistanceProfile {
        l,
        dz: fz.iter().map(|p| min_degree(p)).collect(),
        ds: fs.iter().map(|p| min_degree(p)).collect(),
        fz,
        fs,
    })
}

/// Only the coset distances, without enumerators for the dual side.
pub fn coset_distances(k: &Kernel, cap: usize) -> Result<Vec<usize>> {
    let f = &k.field;
    let l = k.size();
    let rows: Vec<Vec<Elem>> = (0..l).map(|r| k.g.row(r).to_vec()).collect();
    (0..l)
        .map(|j| {
            let below: Vec<&[Elem]> = rows[j + 1..].iter().map(|v| v.as_slice()).collect();
            gf::coset_min_weight(f, &rows[j], &below, cap)
        })
        .collect()
}

/// Evaluates an enumerator polynomial (coefficients by degree) at `z`.
pub fn eval_enumerator(poly: &[u64], z: f64) -> f64 {
    poly.iter().rev().fold(0.0, |acc, &c| acc * z + c as f64)
}

/// Per-index check of `D_Z^(j) >= ceil(j^2 / 3l)` and
/// `D_S^(l-j+1) >= ceil(j^2 / 3l)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileCheck {
    pub ok: bool,
    pub per_j: Vec<bool>,
}

pub fn typical_bound(j: usize, l: usize) -> usize {
    ceil((j * j) as f64 / (3 * l) as f64) as usize
}

pub fn check_random_profile(p: &DistanceProfile) -> ProfileCheck {
    let l = p.l;
    let per_j: Vec<bool> = (1..=l)
        .map(|j| {
            let b = typical_bound(j, l);
            p.dz[j - 1] >= b && p.ds[l - j] >= b
        })
        .collect();
    ProfileCheck { ok: per_j.iter().all(|&x| x), per_j }
}

/// Cumulant and Cramér data of `log_l D` for `D` uniform over a profile.
#[derive(Debug, Clone)]
pub struct DistanceStats {
    l: f64,
    d: Vec<f64>,
}

/// Lower end of the search interval for `t` in the convex conjugate.
pub const T_MIN: f64 = -60.0;

impl DistanceStats {
    pub fn new(profile: &[usize]) -> Result<DistanceStats> {
        Self::with_base(profile, profile.len())
    }

    /// `base` is the logarithm base `l` (normally the profile length).
    pub fn with_base(profile: &[usize], base: usize) -> Result<DistanceStats> {
        if profile.is_empty() || profile.contains(&0) {
            return Err(invalid("profile must be nonempty with positive distances"));
        }
        if base < 2 {
            return Err(invalid("logarithm base must be at least 2"));
        }
        Ok(DistanceStats { l: base as f64, d: profile.iter().map(|&x| x as f64).collect() })
    }

    /// `K(t) = log_l E[D^t]`.
    pub fn cumulant(&self, t: f64) -> f64 {
        let m: f64 = self.d.iter().map(|&d| pow(d, t)).sum::<f64>() / self.d.len() as f64;
        log(m) / log(self.l)
    }

    /// `L(s) = sup_{t <= 0} (s t - K(t))`, searched on `[T_MIN, 0]`.
    pub fn cramer(&self, s: f64) -> f64 {
        let (_, v) = golden_max(T_MIN, 0.0, 1e-10, |t| s * t - self.cumulant(t));
        v.max(0.0)
    }

    /// `E[log_l D]`, where `L` reaches zero.
    pub fn mean_log(&self) -> f64 {
        self.d.iter().map(|&d| log(d) / log(self.l)).sum::<f64>() / self.d.len() as f64
    }

    /// `E[D^{-1/2}]`.
    pub fn inv_sqrt_moment(&self) -> f64 {
        self.d.iter().map(|&d| pow(d, -0.5)).sum::<f64>() / self.d.len() as f64
    }
}

/// `K^{(x) m}`.
pub fn kron_power(k: &Kernel, m: usize) -> Result<Kernel> {
    if m == 0 {
        return Err(invalid("Kronecker power must be at least 1"));
    }
    let l = k.size();
    let total = (l as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if total > 4096 {
        return Err(Error::Guard { what: "Kronecker power size", needed: total, limit: 4096 });
    }
    let mut g = k.g.clone();
    for _ in 1..m {
        g = g.kron(&k.field, &k.g);
    }
    Kernel::new(&k.field, g)
}

/// The typical profile `ceil(j^2 / 3l)` for `j = 1..=l`.
pub fn typical_profile(l: usize) -> Vec<usize> {
    (1..=l).map(|j| typical_bound(j, l)).collect()
}

/// Exact probability that a uniformly random nonzero binary word of
/// length `l` has weight at least `w`.
pub fn binary_tail_nonzero(l: usize, w: usize) -> f64 {
    let mut c = 1.0f64;
    let mut tail = 0.0;
    for k in 0..=l {
        if k >= w && k > 0 {
            tail += c;
        }
        c = c * (l - k) as f64 / (k + 1) as f64;
    }
    tail / (pow(2.0, l as f64) - 1.0)
}

/// Random kernel from `GL(l, q)` and its profile check, keyed by stream.
pub fn random_kernel(f: &Field, l: usize, seed: u64, index: u64) -> Kernel {
    let mut rng = crate::rng::stream(seed, index);
    Kernel::new(f, gf::sample_gl(f, l, &mut rng)).expect("sampled matrices are invertible")
}

pub fn describe(e: Ergodicity) -> &'static str {
    match e {
        Ergodicity::Ergodic => "ergodic",
        Ergodicity::NotErgodic => "not ergodic",
        Ergodicity::Undetermined => "undetermined",
    }
}
