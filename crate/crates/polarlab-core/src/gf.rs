//! Finite fields F_q (q = p^k <= 256) and dense linear algebra over them.
//!
//! Elements are encoded as integers `0..q`: the base-p digits of the encoding
//! are the coefficients (low to high) of a polynomial reduced modulo a fixed
//! monic primitive polynomial. The polynomial is the first primitive one in
//! lexicographic order of its coefficient vector, so the encoding only depends
//! on `(p, k)` and is reported through [`Field::modulus`].

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::error::{invalid, Error, Result};

pub type Elem = u8;

/// Default limit on the dimension of an exhaustively enumerated span.
pub const DEFAULT_SPAN_CAP: usize = 24;

struct Tables {
    p: u32,
    k: u32,
    q: u32,
    modulus: Vec<u32>,
    add: Vec<Elem>,
    mul: Vec<Elem>,
    neg: Vec<Elem>,
    inv: Vec<Elem>,
    trace: Vec<u32>,
}

/// A finite field with table-driven arithmetic. Cloning is cheap.
#[derive(Clone)]
pub struct Field(Arc<Tables>);

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({}^{})", self.0.p, self.0.k)
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.0.p == other.0.p && self.0.k == other.0.k
    }
}
impl Eq for Field {}

fn is_prime(n: u32) -> bool {
    n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

fn digits(mut x: u32, p: u32, k: u32) -> Vec<u32> {
    let mut d = vec![0; k as usize];
    for slot in d.iter_mut() {
        *slot = x % p;
        x /= p;
    }
    d
}

fn undigits(d: &[u32], p: u32) -> u32 {
    d.iter().rev().fold(0, |acc, &c| acc * p + c)
}

/// Multiplies two residues (digit vectors) modulo the monic `modulus`.
fn polymulmod(a: &[u32], b: &[u32], modulus: &[u32], p: u32) -> Vec<u32> {
    let k = modulus.len() - 1;
    let mut prod = vec![0u32; 2 * k];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + x * y) % p;
        }
    }
    for d in (k..prod.len()).rev() {
        let c = prod[d];
        if c != 0 {
            for (t, &m) in modulus.iter().enumerate().take(k) {
                let idx = d - k + t;
                prod[idx] = (prod[idx] + (p - c) * m % p) % p;
            }
            prod[d] = 0;
        }
    }
    prod.truncate(k);
    prod
}

/// True when x has multiplicative order p^k - 1 modulo `modulus`.
fn is_primitive(modulus: &[u32], p: u32) -> bool {
    let k = modulus.len() - 1;
    let q = p.pow(k as u32);
    let mut x = vec![0u32; k];
    if k == 1 {
        return false;
    }
    x[1] = 1;
    let mut acc = x.clone();
    let mut one = vec![0u32; k];
    one[0] = 1;
    for i in 1..q - 1 {
        if acc == one {
            return i == q - 1;
        }
        acc = polymulmod(&acc, &x, modulus, p);
    }
    acc == one
}

impl Field {
    /// Builds F_{p^k}. Fails unless p is prime and p^k <= 256.
    pub fn new(p: u32, k: u32) -> Result<Field> {
        if !is_prime(p) {
            return Err(invalid(alloc::format!("characteristic {p} is not prime")));
        }
        if k == 0 {
            return Err(invalid("extension degree must be at least 1"));
        }
        let q = (p as u64).pow(k);
        if q > 256 {
            return Err(invalid(alloc::format!("field order {q} exceeds 256")));
        }
        let q = q as u32;
        let modulus = if k == 1 {
            // F_p itself; the "polynomial" is x, reduction is the identity
            vec![0, 1]
        } else {
            let mut found = None;
            for low in 0..q {
                let mut m = digits(low, p, k);
                m.push(1);
                if m[0] != 0 && is_primitive(&m, p) {
                    found = Some(m);
                    break;
                }
            }
            found.expect("a primitive polynomial exists for every degree")
        };
        let qs = q as usize;
        let mut add = vec![0; qs * qs];
        let mut mul = vec![0; qs * qs];
        let dig: Vec<Vec<u32>> = (0..q).map(|x| digits(x, p, k)).collect();
        for a in 0..qs {
            for b in 0..qs {
                let s: Vec<u32> = dig[a].iter().zip(&dig[b]).map(|(x, y)| (x + y) % p).collect();
                add[a * qs + b] = undigits(&s, p) as Elem;
                let m = if k == 1 {
                    ((a as u32 * b as u32) % p) as Elem
                } else {
                    undigits(&polymulmod(&dig[a], &dig[b], &modulus, p), p) as Elem
                };
                mul[a * qs + b] = m;
            }
        }
        let mut neg = vec![0; qs];
        let mut inv = vec![0; qs];
        for a in 0..qs {
            neg[a] = (0..qs).find(|&b| add[a * qs + b] == 0).unwrap() as Elem;
            if a != 0 {
                inv[a] = (0..qs).find(|&b| mul[a * qs + b] == 1).unwrap() as Elem;
            }
        }
        let mut trace = vec![0; qs];
        for a in 0..qs {
            // tr(a) = a + a^p + ... + a^{p^{k-1}}
            let mut t: Elem = 0;
            let mut pw = a as Elem;
            for _ in 0..k {
                t = add[t as usize * qs + pw as usize];
                let mut next: Elem = 1;
                for _ in 0..p {
                    next = mul[next as usize * qs + pw as usize];
                }
                pw = next;
            }
            debug_assert!((t as u32) < p, "trace lands in the prime subfield");
            trace[a] = t as u32;
        }
        Ok(Field(Arc::new(Tables {
            p,
            k,
            q,
            modulus,
            add,
            mul,
            neg,
            inv,
            trace,
        })))
    }

    /// F_q from its order.
    pub fn with_order(q: u32) -> Result<Field> {
        for p in 2..=q {
            if is_prime(p) && q % p == 0 {
                let mut k = 0;
                let mut r = q;
                while r % p == 0 {
                    r /= p;
                    k += 1;
                }
                if r != 1 {
                    break;
                }
                return Field::new(p, k);
            }
        }
        Err(invalid(alloc::format!("{q} is not a prime power")))
    }

    pub fn binary() -> Field {
        Field::new(2, 1).unwrap()
    }

    pub fn p(&self) -> u32 {
        self.0.p
    }
    pub fn k(&self) -> u32 {
        self.0.k
    }
    pub fn q(&self) -> usize {
        self.0.q as usize
    }
    /// Coefficients (low to high) of the defining polynomial.
    pub fn modulus(&self) -> &[u32] {
        &self.0.modulus
    }

    #[inline]
    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        self.0.add[a as usize * self.q() + b as usize]
    }
    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        self.0.mul[a as usize * self.q() + b as usize]
    }
    #[inline]
    pub fn neg(&self, a: Elem) -> Elem {
        self.0.neg[a as usize]
    }
    #[inline]
    pub fn sub(&self, a: Elem, b: Elem) -> Elem {
        self.add(a, self.neg(b))
    }
    pub fn inv(&self, a: Elem) -> Result<Elem> {
        if a == 0 {
            return Err(Error::Domain("inverse of zero".into()));
        }
        Ok(self.0.inv[a as usize])
    }
    pub fn pow(&self, a: Elem, mut e: u64) -> Elem {
        let mut base = a;
        let mut acc = 1;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }
    /// Field trace onto F_p, as an integer in `0..p`.
    pub fn trace(&self, a: Elem) -> u32 {
        self.0.trace[a as usize]
    }
    pub fn contains(&self, a: Elem) -> bool {
        (a as usize) < self.q()
    }

    /// `y += a * x` elementwise.
    pub fn axpy(&self, y: &mut [Elem], a: Elem, x: &[Elem]) {
        if a == 0 {
            return;
        }
        let row = &self.0.mul[a as usize * self.q()..(a as usize + 1) * self.q()];
        for (yi, &xi) in y.iter_mut().zip(x) {
            *yi = self.add(*yi, row[xi as usize]);
        }
    }

    /// Named field operation, used by the CLI.
    pub fn arith(&self, op: FieldOp, a: Elem, b: Elem) -> Result<Elem> {
        if !self.contains(a) || !self.contains(b) {
            return Err(invalid("operand outside the field"));
        }
        Ok(match op {
            FieldOp::Add => self.add(a, b),
            FieldOp::Mul => self.mul(a, b),
            FieldOp::Neg => self.neg(a),
            FieldOp::Inv => self.inv(a)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldOp {
    Add,
    Mul,
    Neg,
    Inv,
}

/// Dense row-major matrix of field elements. The field is passed to each
/// operation rather than stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Elem>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<Elem>) -> Result<Mat> {
        if data.len() != rows * cols {
            return Err(invalid(alloc::format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }
    pub fn from_rows(rows: &[&[Elem]]) -> Mat {
        let cols = rows.first().map_or(0, |r| r.len());
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Mat { rows: rows.len(), cols, data }
    }
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, data: vec![0; rows * cols] }
    }
    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Elem {
        self.data[r * self.cols + c]
    }
    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Elem) {
        self.data[r * self.cols + c] = v;
    }
    pub fn row(&self, r: usize) -> &[Elem] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
    pub fn col(&self, c: usize) -> Vec<Elem> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
    pub fn validate(&self, f: &Field) -> Result<()> {
        if self.data.len() != self.rows * self.cols {
            return Err(invalid("entry count does not match the shape"));
        }
        if self.data.iter().any(|&x| !f.contains(x)) {
            return Err(invalid("matrix entry outside the field"));
        }
        Ok(())
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn mul(&self, f: &Field, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(invalid("inner dimensions differ"));
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                f.axpy(dst, self.get(r, k), other.row(k));
            }
        }
        Ok(out)
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, f: &Field, v: &[Elem]) -> Vec<Elem> {
        let mut out = vec![0; self.cols];
        for (k, &a) in v.iter().enumerate() {
            f.axpy(&mut out, a, self.row(k));
        }
        out
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, f: &Field, other: &Mat) -> Mat {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = Mat::zeros(rows, cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a == 0 {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.set(i * other.rows + k, j * other.cols + l, f.mul(a, other.get(k, l)));
                    }
                }
            }
        }
        out
    }

    /// Rank by Gaussian elimination.
    pub fn rank(&self, f: &Field) -> usize {
        let mut m = self.clone();
        eliminate(f, &mut m, None)
    }

    /// Rank, and the inverse when the matrix is square and full rank.
    pub fn rank_inverse(&self, f: &Field) -> (usize, Option<Mat>) {
        if !self.is_square() {
            return (self.rank(f), None);
        }
        let n = self.rows;
        let mut m = self.clone();
        let mut inv = Mat::identity(n);
        let r = eliminate(f, &mut m, Some(&mut inv));
        if r == n {
            (r, Some(inv))
        } else {
            (r, None)
        }
    }

    pub fn inverse(&self, f: &Field) -> Option<Mat> {
        self.rank_inverse(f).1
    }
}

/// Reduced row echelon form in place, mirroring row operations on `aux`.
/// Returns the rank.
fn eliminate(f: &Field, m: &mut Mat, mut aux: Option<&mut Mat>) -> usize {
    let (rows, cols) = (m.rows, m.cols);
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&r| m.get(r, c) != 0) else {
            continue;
        };
        swap_rows(m, p, rank);
        if let Some(a) = aux.as_deref_mut() {
            swap_rows(a, p, rank);
        }
        let s = f.inv(m.get(rank, c)).unwrap();
        scale_row(f, m, rank, s);
        if let Some(a) = aux.as_deref_mut() {
            scale_row(f, a, rank, s);
        }
        for r in 0..rows {
            if r != rank {
                let factor = m.get(r, c);
                if factor != 0 {
                    let nf = f.neg(factor);
                    add_row(f, m, r, rank, nf);
                    if let Some(a) = aux.as_deref_mut() {
                        add_row(f, a, r, rank, nf);
                    }
                }
            }
        }
        rank += 1;
    }
    rank
}

fn swap_rows(m: &mut Mat, a: usize, b: usize) {
    if a != b {
        for c in 0..m.cols {
            m.data.swap(a * m.cols + c, b * m.cols + c);
        }
    }
}

fn scale_row(f: &Field, m: &mut Mat, r: usize, s: Elem) {
    for c in 0..m.cols {
        let v = m.get(r, c);
        m.set(r, c, f.mul(v, s));
    }
}

/// row[dst] += factor * row[src]
pub(crate) fn add_row(f: &Field, m: &mut Mat, dst: usize, src: usize, factor: Elem) {
    for c in 0..m.cols {
        let v = f.add(m.get(dst, c), f.mul(factor, m.get(src, c)));
        m.set(dst, c, v);
    }
}

/// Hamming weight of `v`.
pub fn hwt(v: &[Elem]) -> usize {
    v.iter().filter(|&&x| x != 0).count()
}

/// Hamming weight of `v`, or the distance to `w` when given.
pub fn hamming(v: &[Elem], w: Option<&[Elem]>) -> Result<usize> {
    match w {
        None => Ok(hwt(v)),
        Some(w) if w.len() != v.len() => Err(invalid("vectors have different lengths")),
        Some(w) => Ok(v.iter().zip(w).filter(|(a, b)| a != b).count()),
    }
}

/// Visits `v + sum_i c_i basis_i` for every coefficient vector `c` in F_q^m.
///
/// Coefficients advance like an odometer over the element encodings; each
/// step adds `(c' - c) basis_i`, so a full sweep costs O(q^m * len) on
/// average.
pub fn for_each_in_coset(f: &Field, v: &[Elem], basis: &[&[Elem]], mut visit: impl FnMut(&[Elem])) {
    let q = f.q();
    // step[c]: the multiplier taking coefficient c to its successor (cyclically)
    let step: Vec<Elem> = (0..q).map(|c| f.sub(((c + 1) % q) as Elem, c as Elem)).collect();
    let mut cur = v.to_vec();
    let mut coef = vec![0usize; basis.len()];
    visit(&cur);
    'outer: loop {
        for (i, b) in basis.iter().enumerate() {
            f.axpy(&mut cur, step[coef[i]], b);
            coef[i] += 1;
            if coef[i] < q {
                visit(&cur);
                continue 'outer;
            }
            coef[i] = 0;
        }
        break;
    }
}

fn check_span(f: &Field, dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        return Err(Error::Guard {
            what: "exhaustive span enumeration (use the weight-enumerator path for larger spans)",
            needed: (f.q() as u128).saturating_pow(dim as u32),
            limit: (f.q() as u128).saturating_pow(cap as u32),
        });
    }
    Ok(())
}

/// min over c in span(basis) of hwt(v + c), by exhaustive enumeration.
pub fn coset_min_weight(f: &Field, v: &[Elem], basis: &[&[Elem]], cap: usize) -> Result<usize> {
    if basis.iter().any(|b| b.len() != v.len()) {
        return Err(invalid("basis vectors and v differ in length"));
    }
    check_span(f, basis.len(), cap)?;
    let mut best = usize::MAX;
    for_each_in_coset(f, v, basis, |x| best = best.min(hwt(x)));
    Ok(best)
}

/// Histogram of Hamming weights over the coset `v + span(basis)`;
/// entry `w` counts the vectors of weight `w`.
pub fn coset_weight_enumerator(
    f: &Field,
    v: &[Elem],
    basis: &[&[Elem]],
    cap: usize,
) -> Result<Vec<u64>> {
    check_span(f, basis.len(), cap)?;
    let mut hist = vec![0u64; v.len() + 1];
    for_each_in_coset(f, v, basis, |x| hist[hwt(x)] += 1);
    Ok(hist)
}

/// A uniformly distributed invertible matrix, by rejection sampling.
pub fn sample_gl<R: Rng + ?Sized>(f: &Field, l: usize, rng: &mut R) -> Mat {
    let q = f.q() as u32;
    loop {
        let data = (0..l * l).map(|_| rng.gen_range(0..q) as Elem).collect();
        let m = Mat { rows: l, cols: l, data };
        if m.rank(f) == l {
            return m;
        }
    }
}

/// [`sample_gl`] driven by the stream `(seed, 0)`.
pub fn sample_gl_seeded(f: &Field, l: usize, seed: u64) -> Mat {
    sample_gl(f, l, &mut crate::rng::stream(seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop, prop_assert, prop_assert_eq, proptest};
    use std::collections::BTreeMap;

    fn all_fields() -> Vec<Field> {
        [2u32, 3, 4, 5, 7, 8, 9, 11, 13, 16]
            .iter()
            .map(|&q| Field::with_order(q).unwrap())
            .collect()
    }

    #[test]
    fn f2_one_plus_one() {
        let f = Field::binary();
        assert_eq!(f.add(1, 1), 0);
    }

    #[test]
    fn f4_omega() {
        let f = Field::new(2, 2).unwrap();
        assert_eq!(f.modulus(), &[1, 1, 1]);
        // omega = x (encoded 2), omega + 1 encoded 3
        assert_eq!(f.mul(2, 2), 3);
        assert_eq!(f.inv(2).unwrap(), 3);
        assert!(f.inv(0).is_err());
    }

    #[test]
    fn axioms_exhaustive_small_fields() {
        for f in all_fields() {
            let q = f.q() as Elem;
            for a in 0..q {
                for b in 0..q {
                    assert_eq!(f.add(a, b), f.add(b, a));
                    assert_eq!(f.mul(a, b), f.mul(b, a));
                    for c in 0..q {
                        assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
                        assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                        assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                    }
                }
                if a != 0 {
                    assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
                    assert_eq!(f.pow(a, q as u64 - 1), 1, "group order is q-1");
                }
                assert_eq!(f.add(a, f.neg(a)), 0);
            }
        }
    }

    #[test]
    fn large_field_sampled_axioms() {
        let f = Field::new(2, 8).unwrap();
        let mut rng = crate::rng::stream(3, 0);
        for _ in 0..2000 {
            let (a, b, c): (Elem, Elem, Elem) = (rng.gen(), rng.gen(), rng.gen());
            assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
            if a != 0 {
                assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
            }
        }
        assert_eq!(f.q(), 256);
        assert!(Field::new(2, 9).is_err());
        assert!(Field::new(4, 1).is_err());
    }

    #[test]
    fn trace_is_additive_and_onto() {
        for f in all_fields() {
            let q = f.q() as Elem;
            let mut seen = vec![false; f.p() as usize];
            for a in 0..q {
                seen[f.trace(a) as usize] = true;
                for b in 0..q {
                    let lhs = f.trace(f.add(a, b));
                    assert_eq!(lhs, (f.trace(a) + f.trace(b)) % f.p());
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn rank_inverse_examples() {
        let f = Field::binary();
        let (r, inv) = Mat::identity(3).rank_inverse(&f);
        assert_eq!(r, 3);
        assert_eq!(inv.unwrap(), Mat::identity(3));
        let g = Mat::from_rows(&[&[1, 0], &[1, 1]]);
        assert_eq!(g.inverse(&f).unwrap(), g);
        let s = Mat::from_rows(&[&[1, 1], &[1, 1]]);
        assert_eq!(s.rank_inverse(&f), (1, None));
    }

    #[test]
    fn kron_examples() {
        let f = Field::binary();
        let g = Mat::from_rows(&[&[1, 0], &[1, 1]]);
        let gg = g.kron(&f, &g);
        assert_eq!(gg.row(0), &[1, 0, 0, 0]);
        assert_eq!(gg.row(3), &[1, 1, 1, 1]);
        let a = Mat::from_rows(&[&[1, 1, 0], &[0, 1, 1], &[1, 0, 1]]);
        let k = Mat::identity(2).kron(&f, &a);
        assert_eq!((k.rows, k.cols), (6, 6));
        for r in 0..3 {
            assert_eq!(&k.row(r)[..3], a.row(r));
            assert_eq!(&k.row(r + 3)[3..], a.row(r));
            assert_eq!(&k.row(r)[3..], &[0, 0, 0]);
        }
        assert_eq!(g.kron(&f, &a).rows, 6);
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming(&[0, 0, 0], None).unwrap(), 0);
        assert_eq!(hamming(&[1, 2, 3], Some(&[1, 2, 3])).unwrap(), 0);
        assert_eq!(hamming(&[1, 2, 0], None).unwrap(), 2);
        assert!(hamming(&[1], Some(&[1, 0])).is_err());
    }

    #[test]
    fn coset_min_weight_examples() {
        let f = Field::binary();
        assert_eq!(coset_min_weight(&f, &[1, 0, 1], &[], 24).unwrap(), 2);
        assert_eq!(coset_min_weight(&f, &[1, 0], &[&[1, 1]], 24).unwrap(), 1);
        assert_eq!(coset_min_weight(&f, &[1, 1, 0], &[&[1, 0, 0], &[0, 1, 0]], 24).unwrap(), 0);
        let z: &[Elem] = &[0; 30];
        let e = coset_min_weight(&f, z, &[z; 25], 24);
        assert!(matches!(e, Err(Error::Guard { .. })));
    }

    #[test]
    fn coset_enumeration_visits_every_combination_once() {
        let f = Field::with_order(3).unwrap();
        let b1: &[Elem] = &[1, 0, 0];
        let b2: &[Elem] = &[0, 1, 0];
        let mut seen = BTreeMap::new();
        for_each_in_coset(&f, &[0, 0, 2], &[b1, b2], |x| *seen.entry(x.to_vec()).or_insert(0) += 1);
        assert_eq!(seen.len(), 9);
        assert!(seen.values().all(|&c| c == 1));
        // extension fields: every multiple of a basis vector must be reached
        let f4 = Field::with_order(4).unwrap();
        let mut seen = BTreeMap::new();
        for_each_in_coset(&f4, &[0, 0], &[&[1, 0], &[0, 1]], |x| *seen.entry(x.to_vec()).or_insert(0) += 1);
        assert_eq!(seen.len(), 16);
    }

    #[test]
    fn gl2_f2_is_uniform() {
        // the six invertible binary 2x2 matrices, found by enumerating all 16
        let f = Field::binary();
        let mut counts = BTreeMap::new();
        let mut rng = crate::rng::stream(11, 0);
        for _ in 0..6000 {
            *counts.entry(sample_gl(&f, 2, &mut rng).data).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 6);
        let chi2: f64 = counts.values().map(|&c| (c as f64 - 1000.0).powi(2) / 1000.0).sum();
        // chi-square with 5 dof, p = 0.001 critical value 20.515
        assert!(chi2 < 20.515, "chi2 = {chi2}");
    }

    #[test]
    fn gl2_f3_order() {
        let f = Field::with_order(3).unwrap();
        let mut n = 0;
        for code in 0..81u32 {
            let data = (0..4).map(|i| ((code / 3u32.pow(i)) % 3) as Elem).collect();
            if Mat::new(2, 2, data).unwrap().rank(&f) == 2 {
                n += 1;
            }
        }
        assert_eq!(n, 48);
        let m = sample_gl_seeded(&f, 4, 9);
        assert_eq!(m.rank(&f), 4);
    }

    #[test]
    fn gl_acceptance_rate_binary() {
        let f = Field::binary();
        let mut rng = crate::rng::stream(5, 0);
        let mut accepted = 0;
        let draws = 4000;
        for _ in 0..draws {
            let data = (0..100).map(|_| rng.gen_range(0..2u32) as Elem).collect();
            if Mat::new(10, 10, data).unwrap().rank(&f) == 10 {
                accepted += 1;
            }
        }
        assert!(accepted as f64 / draws as f64 >= 0.28);
    }

    /// hdis(u (x) v, u (x) V + U (x) ambient) >= hdis(u, U) hdis(v, V), exhaustively
    /// over small binary instances.
    #[test]
    fn tensor_distance_lower_bound() {
        let f = Field::binary();
        let mut rng = crate::rng::stream(21, 0);
        for _ in 0..60 {
            let a = rng.gen_range(1..=3usize);
            let b = rng.gen_range(1..=3usize);
            let rand_vec = |rng: &mut crate::rng::StreamRng, n: usize| -> Vec<Elem> {
                (0..n).map(|_| rng.gen_range(0..2u32) as Elem).collect()
            };
            let u = rand_vec(&mut rng, a);
            let v = rand_vec(&mut rng, b);
            let ubasis: Vec<Vec<Elem>> = (0..rng.gen_range(0..a)).map(|_| rand_vec(&mut rng, a)).collect();
            let vbasis: Vec<Vec<Elem>> = (0..rng.gen_range(0..b)).map(|_| rand_vec(&mut rng, b)).collect();
            let du = coset_min_weight(&f, &u, &ubasis.iter().map(|x| x.as_slice()).collect::<Vec<_>>(), 24).unwrap();
            let dv = coset_min_weight(&f, &v, &vbasis.iter().map(|x| x.as_slice()).collect::<Vec<_>>(), 24).unwrap();
            let outer = |x: &[Elem], y: &[Elem]| -> Vec<Elem> {
                x.iter().flat_map(|&s| y.iter().map(move |&t| s & t)).collect()
            };
            let mut big: Vec<Vec<Elem>> = vbasis.iter().map(|w| outer(&u, w)).collect();
            for ub in &ubasis {
                for i in 0..b {
                    let mut e = vec![0; b];
                    e[i] = 1;
                    big.push(outer(ub, &e));
                }
            }
            let refs: Vec<&[Elem]> = big.iter().map(|x| x.as_slice()).collect();
            let d = coset_min_weight(&f, &outer(&u, &v), &refs, 24).unwrap();
            assert!(d >= du * dv, "{d} < {du}*{dv}");
        }
    }

    proptest! {
        #[test]
        fn inverse_is_two_sided(seed in any::<u64>(), q in prop::sample::select(vec![2u32, 3, 4, 5, 8]), n in 1usize..6) {
            let f = Field::with_order(q).unwrap();
            let mut rng = crate::rng::stream(seed, 0);
            let data = (0..n * n).map(|_| rng.gen_range(0..q) as Elem).collect();
            let m = Mat::new(n, n, data).unwrap();
            let (r, inv) = m.rank_inverse(&f);
            prop_assert!(r <= n);
            if let Some(inv) = inv {
                prop_assert_eq!(m.mul(&f, &inv).unwrap(), Mat::identity(n));
                prop_assert_eq!(inv.mul(&f, &m).unwrap(), Mat::identity(n));
            } else {
                prop_assert!(r < n);
            }
        }
    }
}
