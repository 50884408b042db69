//! Moderate-deviations region, BEC eigen ratios and scaling exponents.
//!
//! The region is the set of `(pi, rho)` lying strictly below the lower
//! convex envelope of the point `(0, rho0)` and the Cramér function `L` on
//! `[0, varpi]`, where `varpi` is the mean log-distance (the zero of `L`).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use libm::{fabs, log, pow, sqrt};

use crate::error::{Error, Result};
use crate::kernel::{DistanceStats, Kernel};
use crate::math::{bisect, golden_max, h2};
use crate::transform::bec_maps;

/// Scaling exponent for symmetric binary channels, `1/4.714`.
pub const RHO_SBDMC: f64 = 1.0 / 4.714;
/// Scaling exponent for the erasure channel under the Arıkan kernel, `1/3.627`.
pub const RHO_BEC: f64 = 1.0 / 3.627;

/// Step for the central difference of `L`.
pub const DERIV_STEP: f64 = 1e-6;
/// Tolerance of the tangent bisection.
pub const TANGENT_TOL: f64 = 1e-10;
/// Margin used by [`in_region`].
pub const REGION_MARGIN: f64 = 1e-9;

/// Source of the Cramér function.
#[derive(Debug, Clone)]
pub enum Cramer {
    /// `1 - h2(s)`, the profile `{1, 2}` in closed form.
    Binary,
    Profile(DistanceStats),
}

impl Cramer {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Cramer::Binary => {
                if s >= 0.5 {
                    0.0
                } else {
                    1.0 - h2(s.max(0.0))
                }
            }
            Cramer::Profile(d) => d.cramer(s),
        }
    }

    pub fn varpi(&self) -> f64 {
        match self {
            Cramer::Binary => 0.5,
            Cramer::Profile(d) => d.mean_log(),
        }
    }

    fn deriv(&self, s: f64) -> f64 {
        (self.eval(s + DERIV_STEP) - self.eval(s - DERIV_STEP)) / (2.0 * DERIV_STEP)
    }
}

#[derive(Debug, Clone)]
pub struct RegionSpec {
    pub rho0: f64,
    pub cramer: Cramer,
}

impl RegionSpec {
    pub fn binary(rho0: f64) -> RegionSpec {
        RegionSpec { rho0, cramer: Cramer::Binary }
    }

    pub fn from_profile(rho0: f64, profile: &[usize]) -> Result<RegionSpec> {
        Ok(RegionSpec { rho0, cramer: Cramer::Profile(DistanceStats::new(profile)?) })
    }
}

/// Shape of the envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Straight segment from `(0, rho0)` tangent to `L`, then `L`.
    Tangent,
    /// `rho0 >= L(0)`: the point does not stick out and the boundary is `L`.
    Degenerate,
    /// `rho0 <= 0`: the chord to `(varpi, 0)`, which encloses nothing.
    Empty,
}

impl BoundaryKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryKind::Tangent => "tangent",
            BoundaryKind::Degenerate => "degenerate",
            BoundaryKind::Empty => "empty",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Boundary {
    pub kind: BoundaryKind,
    pub rho0: f64,
    pub varpi: f64,
    /// End of the straight part: the tangent point, or `(varpi, 0)` when empty.
    pub tangent: Option<(f64, f64)>,
    /// `(pi, boundary(pi))` on a uniform grid over `[0, varpi]`.
    pub samples: Vec<(f64, f64)>,
    cramer: Cramer,
}

impl Boundary {
    pub fn at(&self, pi: f64) -> f64 {
        if pi < 0.0 || pi >= self.varpi {
            return 0.0;
        }
        match (self.kind, self.tangent) {
            (BoundaryKind::Degenerate, _) | (_, None) => self.cramer.eval(pi),
            (_, Some((pt, rt))) => {
                if pi <= pt {
                    self.rho0 + (rt - self.rho0) * pi / pt
                } else {
                    self.cramer.eval(pi)
                }
            }
        }
    }

    pub fn pi_intercept(&self) -> f64 {
        self.varpi
    }

    pub fn rho_intercept(&self) -> f64 {
        self.rho0.min(self.cramer.eval(0.0))
    }

    /// Slope of the straight part, if any.
    pub fn slope(&self) -> Option<f64> {
        self.tangent.map(|(pt, rt)| (rt - self.rho0) / pt)
    }
}

/// Lower convex envelope of `(0, rho0)` and `L`, sampled at `grid` points.
pub fn region_boundary(spec: &RegionSpec, grid: usize) -> Boundary {
    let c = &spec.cramer;
    let varpi = c.varpi();
    let l0 = c.eval(0.0);
    let rho0 = spec.rho0;
    let (kind, tangent) = if rho0 >= l0 {
        (BoundaryKind::Degenerate, None)
    } else if rho0 <= 0.0 {
        (BoundaryKind::Empty, Some((varpi, 0.0)))
    } else {
        // g decreases from L(0) - rho0 > 0 to -rho0 < 0 on [0, varpi]
        let g = |p: f64| c.eval(p) - p * c.deriv(p) - rho0;
        let lo = 2.0 * DERIV_STEP;
        let hi = varpi - 2.0 * DERIV_STEP;
        match bisect(lo, hi, TANGENT_TOL, g) {
            Some(p) => (BoundaryKind::Tangent, Some((p, c.eval(p)))),
            None => (BoundaryKind::Degenerate, None),
        }
    };
    let mut b = Boundary { kind, rho0, varpi, tangent, samples: Vec::new(), cramer: c.clone() };
    let grid = grid.max(2);
    b.samples = (0..grid)
        .map(|i| {
            let p = varpi * i as f64 / (grid - 1) as f64;
            let r = if i == 0 { b.rho_intercept() } else { b.at(p) };
            (p, r)
        })
        .collect();
    b
}

/// Strict membership in the region with a `1e-9` margin.
pub fn in_region(pi: f64, rho: f64, spec: &RegionSpec) -> bool {
    in_region_with(pi, rho, &region_boundary(spec, 2))
}

/// Membership against an already computed boundary.
pub fn in_region_with(pi: f64, rho: f64, b: &Boundary) -> bool {
    if pi < 0.0 || rho < 0.0 || pi >= b.varpi - REGION_MARGIN {
        return false;
    }
    rho < b.at(pi) - REGION_MARGIN
}

/// Test functions for the eigen ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EigenFn {
    /// `sqrt(z (1 - z))`
    SqrtZ1mZ,
    /// `sqrt(min(z, 1 - z))`
    SqrtMin,
    /// `min(z, 1 - z)^alpha`
    PowerAlpha(f64),
}

impl EigenFn {
    pub fn eval(self, z: f64) -> f64 {
        let z = z.clamp(0.0, 1.0);
        match self {
            EigenFn::SqrtZ1mZ => sqrt(z * (1.0 - z)),
            EigenFn::SqrtMin => sqrt(z.min(1.0 - z)),
            EigenFn::PowerAlpha(a) => pow(z.min(1.0 - z), a),
        }
    }
}

/// `sup_z (1/l) sum_j h(eps_j(z)) / h(z)` over the erasure channels.
///
/// The supremum is taken on `grid` interior points and refined by
/// golden-section search around the best one.
pub fn bec_eigen_ratio(k: &Kernel, h: EigenFn, grid: usize) -> Result<f64> {
    let maps = bec_maps(k)?;
    let l = maps.l as f64;
    let ratio = |z: f64| {
        let hz = h.eval(z);
        if hz <= 0.0 {
            return 0.0;
        }
        maps.apply(z).iter().map(|&e| h.eval(e)).sum::<f64>() / (l * hz)
    };
    let grid = grid.max(3);
    let step = 1.0 / (grid + 1) as f64;
    let mut best = (0.5, ratio(0.5));
    for i in 1..=grid {
        let z = i as f64 * step;
        let r = ratio(z);
        if r > best.1 {
            best = (z, r);
        }
    }
    let a = (best.0 - step).max(step * 1e-3);
    let b = (best.0 + step).min(1.0 - step * 1e-3);
    let (_, v) = golden_max(a, b, 1e-12, ratio);
    Ok(v.max(best.1))
}

#[derive(Debug, Clone)]
pub struct Scaling {
    pub lambda: f64,
    pub rho: f64,
    pub iterations: usize,
    /// Final eigenfunction on the nodes `i / (grid + 1)`, max-normalized.
    pub eigenfunction: Vec<f64>,
}

pub const SCALING_MAX_ITER: usize = 100_000;

/// Power iteration of `T[h](z) = (1/l) sum_j h(eps_j(z))` on a uniform
/// grid with linear interpolation and `h(0) = h(1) = 0`.
pub fn bec_scaling_exponent(k: &Kernel, grid: usize, tol: f64) -> Result<Scaling> {
    if grid < 3 {
        return Err(Error::Invalid(format!("scaling grid needs at least 3 points, got {grid}")));
    }
    let maps = bec_maps(k)?;
    let l = maps.l;
    let m = grid + 1;
    // interpolation stencil per (node, child): left index and right weight
    let mut stencil: Vec<(usize, f64)> = Vec::with_capacity((m + 1) * l);
    for i in 0..=m {
        let z = i as f64 / m as f64;
        for e in maps.apply(z) {
            let x = e * m as f64;
            let lo = (libm::floor(x) as usize).min(m - 1);
            stencil.push((lo, x - lo as f64));
        }
    }
    let mut h: Vec<f64> = (0..=m).map(|i| EigenFn::SqrtZ1mZ.eval(i as f64 / m as f64)).collect();
    let mut next = vec![0.0; m + 1];
    let mut lambda = f64::NAN;
    for it in 1..=SCALING_MAX_ITER {
        for i in 1..m {
            let mut s = 0.0;
            for &(lo, w) in &stencil[i * l..(i + 1) * l] {
                s += h[lo] * (1.0 - w) + h[lo + 1] * w;
            }
            next[i] = s / l as f64;
        }
        next[0] = 0.0;
        next[m] = 0.0;
        let num: f64 = next.iter().sum();
        let den: f64 = h.iter().sum();
        if den <= 0.0 {
            return Err(Error::NoConvergence("eigenfunction collapsed to zero".into()));
        }
        let new = num / den;
        let peak = next.iter().cloned().fold(0.0, f64::max);
        if peak <= 0.0 {
            return Err(Error::NoConvergence("eigenfunction collapsed to zero".into()));
        }
        next.iter_mut().for_each(|v| *v /= peak);
        core::mem::swap(&mut h, &mut next);
        if fabs(new - lambda) < tol {
            let rho = -log(new) / log(l as f64);
            return Ok(Scaling { lambda: new, rho: if rho == 0.0 { 0.0 } else { rho }, iterations: it, eigenfunction: h });
        }
        lambda = new;
    }
    Err(Error::NoConvergence(format!("power iteration did not settle in {SCALING_MAX_ITER} iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::Field;
    use crate::kernel::typical_profile;

    #[test]
    fn arikan_eigen_ratio() {
        let r = bec_eigen_ratio(&Kernel::arikan(), EigenFn::SqrtZ1mZ, 1000).unwrap();
        assert!(fabs(r - sqrt(3.0) / 2.0) < 1e-6, "{r}");
        let r = bec_eigen_ratio(&Kernel::arikan(), EigenFn::SqrtMin, 1000).unwrap();
        assert!(r < 1.0);
        let id = Kernel::identity(&Field::with_order(2).unwrap(), 2);
        for h in [EigenFn::SqrtZ1mZ, EigenFn::SqrtMin, EigenFn::PowerAlpha(0.3)] {
            assert!(fabs(bec_eigen_ratio(&id, h, 200).unwrap() - 1.0) < 1e-12);
        }
    }

    #[test]
    fn scaling_exponent_arikan() {
        let s = bec_scaling_exponent(&Kernel::arikan(), 10_000, 1e-12).unwrap();
        assert!(s.rho >= 1.0 / 3.70 && s.rho <= 1.0 / 3.56, "{}", s.rho);
        let weak = log(2.0 / sqrt(3.0)) / log(2.0);
        assert!(weak <= s.rho);
        assert_eq!(s.eigenfunction[0], 0.0);
        assert!(s.eigenfunction.iter().all(|&v| v >= 0.0));
        // unimodal
        let peak = s.eigenfunction.iter().enumerate().fold((0, 0.0), |a, (i, &v)| if v > a.1 { (i, v) } else { a }).0;
        assert!(s.eigenfunction[..=peak].windows(2).all(|w| w[1] >= w[0] - 1e-9));
        assert!(s.eigenfunction[peak..].windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn scaling_exponent_identity() {
        let id = Kernel::identity(&Field::with_order(2).unwrap(), 2);
        let s = bec_scaling_exponent(&id, 1000, 1e-12).unwrap();
        assert!(fabs(s.lambda - 1.0) < 1e-12);
        assert!(fabs(s.rho) < 1e-12);
    }

    #[test]
    fn binary_tangent_point() {
        let spec = RegionSpec::binary(RHO_SBDMC);
        let b = region_boundary(&spec, 101);
        assert_eq!(b.kind, BoundaryKind::Tangent);
        let (p, r) = b.tangent.unwrap();
        assert!(fabs(p - 0.4208) < 2e-3 && fabs(r - 0.0182) < 2e-3, "{p} {r}");
        assert!(fabs(b.at(0.4208) - 0.0182) < 2e-3);
        assert_eq!(b.samples[0], (0.0, RHO_SBDMC));
        assert!(fabs(b.at(0.5 - 1e-12)) < 1e-8);
        // slope of the straight part matches L' at the tangent
        assert!(fabs(b.slope().unwrap() - spec.cramer.deriv(p)) < 1e-4);
    }

    #[test]
    fn membership_examples() {
        let spec = RegionSpec::binary(RHO_SBDMC);
        assert!(in_region(0.0, RHO_SBDMC - 1e-6, &spec));
        assert!(!in_region(0.5 + 1e-6, 1e-6, &spec));
        assert!(!in_region(0.1, RHO_SBDMC, &spec));
        assert!(in_region(0.45, 0.005, &spec));
    }

    #[test]
    fn profile_cramer_matches_closed_form() {
        let d = DistanceStats::new(&[1, 2]).unwrap();
        for i in 0..=50 {
            let s = 0.01 + 0.49 * i as f64 / 50.0;
            assert!(fabs(d.cramer(s) - (1.0 - h2(s))) < 1e-6, "s={s}");
        }
    }

    #[test]
    fn degenerate_and_empty() {
        let b = region_boundary(&RegionSpec::binary(1.5), 11);
        assert_eq!(b.kind, BoundaryKind::Degenerate);
        assert!(fabs(b.rho_intercept() - 1.0) < 1e-12);
        let b = region_boundary(&RegionSpec::binary(-0.2), 11);
        assert_eq!(b.kind, BoundaryKind::Empty);
        assert!(!in_region_with(0.1, 0.0, &b));
        assert_eq!(b.rho_intercept(), -0.2);
    }

    #[test]
    fn sixteen_profile_inside_triangle() {
        let spec = RegionSpec::from_profile(0.5, &typical_profile(16)).unwrap();
        let b = region_boundary(&spec, 50);
        assert!(b.pi_intercept() < 1.0);
        assert!(b.rho_intercept() <= 0.5);
        for &(p, r) in &b.samples {
            assert!(r <= 0.5 * (1.0 - p) + 1e-9, "({p}, {r})");
        }
    }
}
