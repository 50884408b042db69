use polarlab_core::channel::{canonicalize, degrade_merge, params, random_dmc, second_moment, tolls, Dmc};
use polarlab_core::codec::{encode, sc_decode, FrozenFill, Received};
use polarlab_core::construct::{build_pruned, Strategy, build_frozen};
use polarlab_core::exec::Sequential;
use polarlab_core::gf::{sample_gl, Field};
use polarlab_core::kernel::{distances, random_kernel, DistanceStats, Kernel};
use polarlab_core::mdp::{in_region_with, region_boundary, RegionSpec, RHO_SBDMC};
use polarlab_core::multiterminal::{cond_entropy_set, duty_point, split, supermodularity_gap, unsplit, JointSource, SplitConfig};
use polarlab_core::process::{bec_density, stopped_bec_exact, DensityMode};
use polarlab_core::rng::stream;
use polarlab_core::transform::synthesize_all;
use proptest::prelude::*;
use rand::Rng;

const ORDERS: [u32; 9] = [2, 3, 4, 5, 7, 8, 9, 16, 27];

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn field_axioms(qi in 0..ORDERS.len(), a in any::<u8>(), b in any::<u8>(), c in any::<u8>()) {
        let f = Field::with_order(ORDERS[qi]).unwrap();
        let q = f.q() as u16;
        let (a, b, c) = ((a as u16 % q) as u8, (b as u16 % q) as u8, (c as u16 % q) as u8);
        prop_assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
        prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        if a != 0 {
            prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
        }
    }

    #[test]
    fn sampled_inverse_is_two_sided(qi in 0..4usize, l in 1usize..7, seed in any::<u64>()) {
        let f = Field::with_order(ORDERS[qi]).unwrap();
        let m = sample_gl(&f, l, &mut stream(seed, 0));
        let inv = m.inverse(&f).unwrap();
        let id = polarlab_core::gf::Mat::identity(l);
        prop_assert_eq!(m.mul(&f, &inv).unwrap(), id.clone());
        prop_assert_eq!(inv.mul(&f, &m).unwrap(), id);
    }

    #[test]
    fn channel_parameter_tolls(qi in 0..4usize, nout in 2usize..6, uniform in any::<bool>(), seed in any::<u64>()) {
        let q = [2u32, 3, 4, 5][qi];
        let f = Field::with_order(q).unwrap();
        let w = random_dmc(&f, nout, uniform, &mut stream(seed, 0));
        let p = params(&w);
        for t in tolls(&p, q as usize) {
            prop_assert!(t.holds(1e-9), "{} {} > {}", t.name, t.lhs, t.rhs);
        }
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p.h));
        if q == 2 {
            prop_assert!((p.z - p.z_mxd).abs() < 1e-12);
            prop_assert!((p.s - p.t).abs() < 1e-9 && (p.s_max - p.t).abs() < 1e-9);
            prop_assert!((p.t - (1.0 - 2.0 * p.pe)).abs() < 1e-9);
        }
    }

    #[test]
    fn canonicalize_is_idempotent(qi in 0..3usize, nout in 2usize..7, seed in any::<u64>()) {
        let f = Field::with_order([2u32, 3, 4][qi]).unwrap();
        let w = random_dmc(&f, nout, true, &mut stream(seed, 1));
        let a = canonicalize(&w);
        let b = canonicalize(&a);
        prop_assert_eq!(a.joint(), b.joint());
    }

    #[test]
    fn merging_degrades(nout in 4usize..30, cap in 2usize..6, seed in any::<u64>()) {
        let w = random_dmc(&Field::binary(), nout, true, &mut stream(seed, 2));
        let m = degrade_merge(&w, cap).unwrap();
        prop_assert!(m.num_outputs() <= cap);
        prop_assert!(params(&m).h >= params(&w).h - 1e-12);
    }

    #[test]
    fn second_moment_bound(n in 2usize..8, seed in any::<u64>()) {
        let mut rng = stream(seed, 3);
        let w = polarlab_core::channel::random_simplex(n, &mut rng);
        let l = (n as f64).ln();
        prop_assert!(second_moment(&w) <= 1.2 * l * l + 1e-12);
    }

    #[test]
    fn entropy_is_conserved(qi in 0..3usize, l in 2usize..4, seed in any::<u64>()) {
        let f = Field::with_order([2u32, 3, 4][qi]).unwrap();
        let w = random_dmc(&f, 2, false, &mut stream(seed, 4));
        let k = random_kernel(&f, l, seed, 5);
        let r = synthesize_all(&w, &k, None).unwrap();
        let total: f64 = r.params.iter().map(|p| p.h).sum();
        prop_assert!((total - l as f64 * params(&w).h).abs() < 1e-9);
    }

    #[test]
    fn enumerators_at_one(qi in 0..3usize, l in 2usize..6, seed in any::<u64>()) {
        let f = Field::with_order([2u32, 3, 4][qi]).unwrap();
        let q = f.q() as u64;
        let k = random_kernel(&f, l, seed, 6);
        let p = distances(&k, 24).unwrap();
        for j in 0..l {
            prop_assert_eq!(p.fz[j].iter().sum::<u64>(), q.pow((l - 1 - j) as u32));
            prop_assert_eq!(p.fs[j].iter().sum::<u64>(), q.pow(j as u32));
            prop_assert_eq!(p.fz[j].iter().position(|&c| c > 0).unwrap(), p.dz[j]);
        }
    }

    #[test]
    fn cramer_is_convex_and_nonnegative(profile in prop::collection::vec(1usize..40, 2..12)) {
        let d = DistanceStats::new(&profile).unwrap();
        let v = d.mean_log();
        prop_assert!(d.cramer(v) < 1e-8);
        let pts: Vec<f64> = (0..=20).map(|i| v * i as f64 / 20.0).collect();
        let ls: Vec<f64> = pts.iter().map(|&s| d.cramer(s)).collect();
        prop_assert!(ls.iter().all(|&x| x >= 0.0));
        for w in ls.windows(3) {
            prop_assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-7);
        }
    }

    #[test]
    fn pruned_tree_bookkeeping(eps in 0.05f64..0.95, n in 1usize..9, e in 1.0f64..12.0) {
        let theta = 10f64.powf(-e);
        let spec = build_pruned(&Dmc::bec(eps).unwrap(), &Kernel::arikan(), n, theta, None).unwrap();
        let tree = spec.pruned.as_ref().unwrap();
        let measure: f64 = tree.leaves.iter().map(|lf| 2f64.powi(-(lf.depth() as i32))).sum();
        prop_assert!((measure - 1.0).abs() < 1e-12);
        prop_assert!(tree.max_depth() <= n);
        let big_n = 1usize << n;
        prop_assert_eq!(spec.info_len() + spec.frozen_positions().len(), big_n);
        prop_assert!((spec.rate - spec.info_len() as f64 / big_n as f64).abs() < 1e-15);
        prop_assert!(spec.design_pe <= 2.0 * big_n as f64 * theta + 1e-15);
    }

    #[test]
    fn stopped_causes_sum_to_one(eps in 0.05f64..0.95, n in 1usize..12, e in 1.0f64..8.0) {
        let st = stopped_bec_exact(eps, &Kernel::arikan(), 10f64.powf(-e), n).unwrap();
        prop_assert_eq!(st.cause_weights.iter().sum::<u128>(), st.total);
        prop_assert_eq!(st.total, 1u128 << n);
    }

    #[test]
    fn codec_linear_and_noiseless(n in 1usize..7, k_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let f = Field::with_order(4).unwrap();
        let k = Kernel::new(&f, polarlab_core::gf::Mat::from_rows(&[&[1, 0], &[2, 1]])).unwrap();
        let big_n = 1usize << n;
        let kk = ((big_n as f64) * k_frac) as usize;
        let spec = build_frozen(&Dmc::erasure(&f, 0.3).unwrap(), &k, n, Strategy::TopK(kk), None, &Sequential).unwrap();
        let mut rng = stream(seed, 7);
        let a: Vec<u8> = (0..kk).map(|_| rng.gen_range(0..4)).collect();
        let b: Vec<u8> = (0..kk).map(|_| rng.gen_range(0..4)).collect();
        let s: Vec<u8> = a.iter().zip(&b).map(|(&x, &y)| f.add(x, y)).collect();
        let (ea, eb, es) = (encode(&spec, &a, FrozenFill::Zeros).unwrap(), encode(&spec, &b, FrozenFill::Zeros).unwrap(), encode(&spec, &s, FrozenFill::Zeros).unwrap());
        let sum: Vec<u8> = ea.iter().zip(&eb).map(|(&x, &y)| f.add(x, y)).collect();
        prop_assert_eq!(&es, &sum);
        let d = sc_decode(&spec, &Received::Erasure(ea.iter().map(|&x| Some(x)).collect()), FrozenFill::Zeros).unwrap();
        prop_assert!(d.success);
        prop_assert_eq!(d.info, a);
    }

    #[test]
    fn pruned_noiseless_roundtrip(n in 1usize..8, e in 1.0f64..6.0, seed in any::<u64>()) {
        let spec = build_pruned(&Dmc::bec(0.4).unwrap(), &Kernel::arikan(), n, 10f64.powf(-e), None).unwrap();
        let mut rng = stream(seed, 8);
        let info: Vec<u8> = (0..spec.info_len()).map(|_| rng.gen_range(0..2)).collect();
        let fill = FrozenFill::Seeded(seed);
        let x = encode(&spec, &info, fill).unwrap();
        let d = sc_decode(&spec, &Received::Erasure(x.iter().map(|&v| Some(v)).collect()), fill).unwrap();
        prop_assert_eq!(d.info, info);
    }

    #[test]
    fn region_is_monotone(pi in 0.0f64..0.5, rho in 0.0f64..0.25, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let bd = region_boundary(&RegionSpec::binary(RHO_SBDMC), 2);
        if in_region_with(pi, rho, &bd) {
            prop_assert!(in_region_with(pi * a, rho * b, &bd));
        }
    }

    #[test]
    fn supermodularity(seed in any::<u64>(), a in 2usize..4, b in 2usize..4, c in 2usize..4) {
        let p = random_source(vec![a, b, c], seed);
        prop_assert!(supermodularity_gap(&p).unwrap() <= 1e-10);
    }

    #[test]
    fn duties_sum_to_joint_entropy(seed in any::<u64>(), w in prop::array::uniform8(0.0f64..1.0)) {
        let p = random_source(vec![2, 3, 2], seed);
        let s: f64 = w.iter().sum::<f64>().max(1e-9);
        let mut weights = w.map(|x| x / s);
        let r: f64 = weights.iter().sum();
        weights[0] += 1.0 - r;
        if weights[0] < 0.0 { weights = [0.125; 8]; }
        let bsum: f64 = duty_point(&p, &SplitConfig::Three { weights }).unwrap().iter().sum();
        let h = cond_entropy_set(&p, &[0, 1, 2], &[]).unwrap();
        prop_assert!((bsum - h).abs() < 1e-12);
    }

    #[test]
    fn fragments_biject(q in 0usize..8, x in prop::array::uniform3(0u16..5)) {
        prop_assert_eq!(unsplit(3, &split(3, q, &x)).unwrap(), x.to_vec());
        prop_assert_eq!(unsplit(2, &split(2, q % 2, &x[..2])).unwrap(), x[..2].to_vec());
    }
}

fn random_source(alphabets: Vec<usize>, seed: u64) -> JointSource {
    let mut rng = stream(seed, 9);
    let n: usize = alphabets.iter().product();
    let mut pmf: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let s: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|v| *v /= s);
    let r: f64 = pmf.iter().sum();
    pmf[0] += 1.0 - r;
    JointSource { alphabets, pmf }
}

#[test]
fn exact_bec_mean_z_is_nonincreasing() {
    let st = bec_density(0.37, &Kernel::arikan(), 12, DensityMode::Exact, &Sequential).unwrap();
    // erasure Z is epsilon itself, a martingale; the mean must never grow
    let means: Vec<f64> = st.records.iter().map(|r| r.mean[1]).collect();
    for w in means.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
}
