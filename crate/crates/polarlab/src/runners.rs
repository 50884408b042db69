//! One function per subcommand, returning the primary output text.

use polarlab_core::channel::{degrade_merge, params, symmetrize, tolls, Dmc};
use polarlab_core::construct::{
    build_frozen, build_pruned, build_pruned_asymmetric, default_theta, tradeoff_sweep, Strategy, ThetaFamily,
};
use polarlab_core::codec::simulate_fer;
use polarlab_core::exec::Executor;
use polarlab_core::gf::{Field, Mat, DEFAULT_SPAN_CAP};
use polarlab_core::kernel::{check_random_profile, describe, distances, random_kernel, DistanceStats, Kernel};
use polarlab_core::math::wilson;
use polarlab_core::mdp::{bec_scaling_exponent, region_boundary, RegionSpec};
use polarlab_core::multiterminal::{
    cond_entropy_set, duty_point, fragment_name, fragment_order, region_check, solve_knob, subset_bounds, JointSource,
    SplitConfig, ROWS3,
};
use polarlab_core::process::{
    enumerate_tree, erasure_prob, sample_paths, stopped_bec_exact, stopped_paths, StoppedStats, STAT_NAMES,
    STOP_CAUSES,
};
use polarlab_core::transform::{q_as_channel, synthesize_all};
use serde_json::{json, Value};

use crate::cli::{ChannelArgs, ConstructArgs, ProcessArgs, RegionArgs, ScalingArgs, SimArgs, SwCmd, TransformArgs};
use crate::formats::*;

/// Distance at which the face solver accepts a target.
pub const FACE_TOL: f64 = 1e-9;
const K_TS: [f64; 9] = [-8.0, -4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];
const L_POINTS: usize = 11;

fn meta_for(command: &str, seed: u64, field: Option<&Field>, inputs: Vec<InputDigest>) -> Meta {
    let mut m = Meta::new(command, Some(seed));
    m.inputs = inputs;
    m.modulus = field.map(|f| f.modulus().to_vec());
    m
}

fn rows_json(m: &Mat) -> Value {
    Value::Array((0..m.rows).map(|r| json!(m.row(r))).collect())
}

fn cap_channel(w: Dmc, cap: Option<usize>) -> AppResult<Dmc> {
    match cap {
        Some(c) if w.num_outputs() > c => Ok(degrade_merge(&w, c)?),
        _ => Ok(w),
    }
}

fn same_field(w: &Dmc, k: &Kernel) -> AppResult<()> {
    if w.field() != k.field() {
        return Err(input_err("channel and kernel live over different fields"));
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> AppResult<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| input_err(format!("bad {what} entry {x:?}"))))
        .collect()
}

fn parse_depths(s: &str) -> AppResult<Vec<usize>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| input_err(format!("bad depth range {s:?}")))?;
        let b: usize = b.trim().parse().map_err(|_| input_err(format!("bad depth range {s:?}")))?;
        if a > b {
            return Err(input_err(format!("empty depth range {s:?}")));
        }
        return Ok((a..=b).collect());
    }
    parse_list(s, "depth")
}

pub fn parse_family(s: &str) -> AppResult<ThetaFamily> {
    let num = |x: &str| x.parse::<f64>().map_err(|_| input_err(format!("bad family parameter in {s:?}")));
    match s.split_once(':') {
        None if s == "pow4" => Ok(ThetaFamily::Pow4),
        None if s == "default" => Ok(ThetaFamily::Default),
        Some(("exp", t)) => Ok(ThetaFamily::ExpNTau(num(t)?)),
        Some(("elpin", p)) => Ok(ThetaFamily::Elpin(num(p)?)),
        _ => Err(input_err(format!("unknown theta family {s:?}"))),
    }
}

pub fn channel(a: &ChannelArgs, seed: u64) -> AppResult<String> {
    let (w, d) = load_channel(&a.file)?;
    let w = if a.symmetrize { symmetrize(&w) } else { w };
    let w = cap_channel(w, a.merge.cap())?;
    let p = params(&w);
    let t: Vec<Value> = tolls(&p, w.q())
        .iter()
        .map(|t| json!({"name": t.name, "lhs": t.lhs, "rhs": t.rhs, "holds": t.holds(1e-9)}))
        .collect();
    let body = json!({
        "q": w.q(),
        "outputs": w.num_outputs(),
        "uniform_input": w.is_uniform_input(),
        "degraded": w.is_degraded(),
        "params": params_json(&p),
        "tolls": t,
    });
    Ok(json_document(&meta_for("channel", seed, Some(w.field()), vec![d]), body))
}

pub fn transform(a: &TransformArgs, seed: u64) -> AppResult<String> {
    let (w, dw) = load_channel(&a.file)?;
    let (k, dk) = load_kernel(&a.kernel)?;
    same_field(&w, &k)?;
    let r = synthesize_all(&w, &k, a.merge.cap())?;
    let children: Vec<Value> = r
        .children
        .iter()
        .zip(&r.params)
        .enumerate()
        .map(|(j, (c, p))| json!({"index": j, "outputs": c.num_outputs(), "degraded": c.is_degraded(), "params": params_json(p)}))
        .collect();
    let body = json!({
        "kernel_size": k.size(),
        "children": children,
        "merged_output_sizes": r.merged_output_sizes,
    });
    Ok(json_document(&meta_for("transform", seed, Some(w.field()), vec![dw, dk]), body))
}

pub fn kernel_analyze(spec: &str, seed: u64) -> AppResult<String> {
    let (k, d) = load_kernel(spec)?;
    let prof = distances(&k, DEFAULT_SPAN_CAP)?;
    let check = check_random_profile(&prof);
    let stats = DistanceStats::new(&prof.dz)?;
    let k_samples: Vec<Value> = K_TS.iter().map(|&t| json!([t, stats.cumulant(t)])).collect();
    let l_samples: Vec<Value> = (0..L_POINTS)
        .map(|i| {
            let s = i as f64 / (L_POINTS - 1) as f64;
            json!([s, stats.cramer(s)])
        })
        .collect();
    let body = json!({
        "size": k.size(),
        "dz": prof.dz,
        "ds": prof.ds,
        "fz": prof.fz,
        "fs": prof.fs,
        "ergodic": describe(k.ergodicity()),
        "lowered": k.lowered().map(rows_json),
        "varpi": stats.mean_log(),
        "K_samples": k_samples,
        "L_samples": l_samples,
        "random_profile_check": {"ok": check.ok, "per_j": check.per_j},
    });
    Ok(json_document(&meta_for("kernel analyze", seed, Some(k.field()), vec![d]), body))
}

/// The output doubles as a matrix file for other commands.
pub fn kernel_sample(size: usize, q: u32, index: u64, seed: u64) -> AppResult<String> {
    if size == 0 {
        return Err(input_err("kernel size must be at least 1"));
    }
    let f = Field::with_order(q)?;
    let k = random_kernel(&f, size, seed, index);
    let mut body = matrix_json(&f, k.matrix());
    body["index"] = json!(index);
    body["dz"] = match distances(&k, DEFAULT_SPAN_CAP) {
        Ok(p) => json!(p.dz),
        Err(_) => Value::Null,
    };
    Ok(json_document(&meta_for("kernel sample", seed, Some(&f), vec![]), body))
}

const PROCESS_HEADER: [&str; 5] = ["depth", "statistic", "value", "samples", "degraded_flag"];

fn row(depth: usize, stat: &str, value: f64, samples: impl ToString, degraded: bool) -> Vec<String> {
    vec![depth.to_string(), stat.to_string(), fmt_f64(value), samples.to_string(), (degraded as u8).to_string()]
}

fn stopped_rows(s: &StoppedStats) -> Vec<Vec<String>> {
    let n = s.n_max;
    let mut rows = vec![
        row(n, "theta", s.theta, s.total, s.degraded),
        row(n, "mean_s", s.mean_s(), s.total, s.degraded),
        row(n, "stderr_s", s.stderr_s(), s.total, s.degraded),
    ];
    for c in STOP_CAUSES {
        rows.push(row(n, &format!("freq_{}", c.name()), s.cause_freq(c), s.total, s.degraded));
    }
    let total = (s.total as f64).max(1.0);
    rows.push(row(n, "freq_impossible", s.impossible as f64 / total, s.total, s.degraded));
    for (i, name) in STAT_NAMES.iter().enumerate() {
        rows.push(row(n, &format!("stopped_mean_{name}"), s.mean_stopped[i], s.total, s.degraded));
    }
    for (m, &w) in s.s_weights.iter().enumerate() {
        rows.push(row(m, "p_s", w as f64 / total, s.total, s.degraded));
    }
    rows
}

pub fn process<E: Executor>(a: &ProcessArgs, seed: u64, exec: &E) -> AppResult<String> {
    let (w, dw) = load_channel(&a.channel)?;
    let (k, dk) = load_kernel(&a.kernel)?;
    same_field(&w, &k)?;
    let cap = a.merge.cap();
    let mut meta = meta_for("process", seed, Some(w.field()), vec![dw, dk]);
    let rows = match a.theta {
        Some(theta) => {
            let q_chan = if a.asym_q { Some(q_as_channel(w.field(), w.input_dist())?) } else { None };
            let s = match (a.trials, erasure_prob(&w), &q_chan) {
                (None, Some(eps), None) => stopped_bec_exact(eps, &k, theta, a.depth)?,
                (None, _, _) => return Err(input_err("exact stopped statistics need an erasure channel; pass --trials")),
                (Some(t), _, q) => stopped_paths(&w, &k, theta, a.depth, t, seed, q.as_ref(), cap, exec)?,
            };
            meta.note("mode", if s.exact { "stopped exact" } else { "stopped sampled" });
            stopped_rows(&s)
        }
        None => {
            if a.asym_q {
                return Err(input_err("--asym-q needs --theta"));
            }
            let st = match a.trials {
                Some(t) => sample_paths(&w, &k, a.depth, t, seed, cap, exec)?,
                None => enumerate_tree(&w, &k, a.depth, cap, exec)?,
            };
            meta.note("mode", if st.exact { "exact" } else { "sampled" });
            let mut rows = Vec::new();
            for r in &st.records {
                for (i, name) in STAT_NAMES.iter().enumerate() {
                    rows.push(row(r.depth, &format!("mean_{name}"), r.mean[i], r.samples, st.degraded));
                    rows.push(row(r.depth, &format!("var_{name}"), r.var[i], r.samples, st.degraded));
                }
            }
            rows
        }
    };
    Ok(csv_document(&meta, &PROCESS_HEADER, &rows))
}

pub fn construct<E: Executor>(a: &ConstructArgs, seed: u64, exec: &E) -> AppResult<String> {
    let (w, dw) = load_channel(&a.channel)?;
    let (k, dk) = load_kernel(&a.kernel)?;
    same_field(&w, &k)?;
    let cap = a.merge.cap();
    let mut meta = meta_for("construct", seed, Some(w.field()), vec![dw, dk]);
    if let Some(list) = &a.sweep {
        let ns = parse_depths(list)?;
        let family = parse_family(&a.family)?;
        meta.note("family", &a.family);
        let rows: Vec<Vec<String>> = tradeoff_sweep(&w, &k, &ns, family, cap, exec)?
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    fmt_f64(r.theta),
                    fmt_f64(r.mean_s),
                    fmt_f64(r.rate),
                    fmt_f64(r.design_pe),
                    fmt_f64(r.design_bound),
                    r.eu_du_pairs.to_string(),
                    (r.degraded as u8).to_string(),
                ]
            })
            .collect();
        let header = ["n", "theta", "mean_s", "rate", "design_pe", "design_bound", "eu_du_pairs", "degraded_flag"];
        return Ok(csv_document(&meta, &header, &rows));
    }
    let n = a.depth.ok_or_else(|| input_err("--depth is required"))?;
    let spec = match (a.top_k, a.threshold) {
        (Some(kk), _) => build_frozen(&w, &k, n, Strategy::TopK(kk), cap, exec)?,
        (None, Some(z)) => build_frozen(&w, &k, n, Strategy::Threshold(z), cap, exec)?,
        (None, None) => {
            let theta = a.theta.unwrap_or_else(|| default_theta(w.q(), k.size(), n));
            if a.asym_q {
                build_pruned_asymmetric(&w, w.input_dist(), &k, n, theta, cap)?
            } else {
                build_pruned(&w, &k, n, theta, cap)?
            }
        }
    };
    Ok(json_document(&meta, code_json(&spec, a.asym_q)))
}

pub fn sim<E: Executor>(a: &SimArgs, seed: u64, exec: &E) -> AppResult<String> {
    let (spec, ds) = load_code(&a.spec)?;
    let (w, dw) = load_channel(&a.channel)?;
    if a.block == 0 {
        return Err(input_err("--block must be positive"));
    }
    let r = simulate_fer(&spec, &w, a.trials, seed, a.block, exec)?;
    let per = |t: u64| if t == 0 { 0.0 } else { 1.0 / t as f64 };
    let mut rows: Vec<Vec<String>> = r
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let (lo, hi) = wilson(b.errors, b.trials, 1.96);
            vec![
                i.to_string(),
                b.errors.to_string(),
                fmt_f64(b.errors as f64 * per(b.trials)),
                fmt_f64(lo),
                fmt_f64(hi),
                fmt_f64(b.ops as f64 * per(b.trials)),
            ]
        })
        .collect();
    rows.push(vec![
        "total".into(),
        r.errors.to_string(),
        fmt_f64(r.fer),
        fmt_f64(r.ci.0),
        fmt_f64(r.ci.1),
        fmt_f64(r.avg_op_count),
    ]);
    let mut meta = meta_for("sim", seed, Some(w.field()), vec![ds, dw]);
    meta.note("trials", a.trials);
    meta.note("block_length", spec.block_len());
    meta.note("info_count", spec.info_len());
    Ok(csv_document(&meta, &["trial_block", "errors", "fer", "ci_low", "ci_high", "ops_per_frame"], &rows))
}

pub fn region(a: &RegionArgs, seed: u64) -> AppResult<String> {
    let mut inputs = Vec::new();
    let spec = match (a.binary, a.profile.as_deref()) {
        (true, _) | (false, Some("binary")) => RegionSpec::binary(a.rho0),
        (false, Some(path)) => {
            let (k, d) = load_kernel(path)?;
            inputs.push(d);
            RegionSpec::from_profile(a.rho0, &distances(&k, DEFAULT_SPAN_CAP)?.dz)?
        }
        (false, None) => return Err(input_err("pass --binary or --profile")),
    };
    if !a.rho0.is_finite() {
        return Err(input_err("--rho0 must be finite"));
    }
    let b = region_boundary(&spec, a.grid);
    let mut meta = meta_for("region", seed, None, inputs);
    meta.note("rho0", a.rho0);
    meta.note("boundary", b.kind.name());
    meta.note("varpi", b.varpi);
    if let Some((p, r)) = b.tangent {
        meta.note("tangent", format!("{p} {r}"));
    }
    let rows: Vec<Vec<String>> = b.samples.iter().map(|&(p, r)| vec![fmt_f64(p), fmt_f64(r)]).collect();
    Ok(csv_document(&meta, &["pi", "rho_boundary"], &rows))
}

pub fn scaling(a: &ScalingArgs, seed: u64) -> AppResult<String> {
    let (k, d) = load_kernel(&a.kernel)?;
    if a.grid < 2 || !(a.tol > 0.0) {
        return Err(input_err("--grid must be at least 2 and --tol positive"));
    }
    let s = bec_scaling_exponent(&k, a.grid, a.tol)?;
    let body = json!({
        "lambda": s.lambda,
        "rho": s.rho,
        "inverse_rho": 1.0 / s.rho,
        "iterations": s.iterations,
        "grid": a.grid,
    });
    Ok(json_document(&meta_for("scaling", seed, Some(k.field()), vec![d]), body))
}

fn load_source(path: &str) -> AppResult<(JointSource, InputDigest)> {
    let (bytes, d) = read_input(path)?;
    Ok((source_from_json(&parse_json(&bytes, "source")?)?, d))
}

fn config_json(c: &SplitConfig) -> Value {
    match c {
        SplitConfig::Two { p2 } => json!({"p2": p2}),
        SplitConfig::Three { weights } => {
            let w: serde_json::Map<String, Value> =
                ROWS3.iter().zip(weights).map(|(r, &x)| (r.name.to_string(), json!(x))).collect();
            json!({"weights": w})
        }
    }
}

fn duty_body(p: &JointSource, cfg: &SplitConfig) -> AppResult<Value> {
    let m = p.sources();
    let duty = duty_point(p, cfg)?;
    let all: Vec<usize> = (0..m).collect();
    let frags: Vec<String> = fragment_order(m).into_iter().map(fragment_name).collect();
    Ok(json!({
        "config": config_json(cfg),
        "fragments": frags,
        "duty": duty,
        "sum": duty.iter().sum::<f64>(),
        "joint_entropy": cond_entropy_set(p, &all, &[])?,
    }))
}

pub fn sw(c: &SwCmd, seed: u64) -> AppResult<String> {
    let (command, src) = match c {
        SwCmd::Duty { source, .. } => ("sw duty", source),
        SwCmd::Solve { source, .. } => ("sw solve", source),
        SwCmd::Check { source, .. } => ("sw check", source),
    };
    let (p, d) = load_source(src)?;
    let mut meta = meta_for(command, seed, None, vec![d]);
    let m = p.sources();
    let body = match c {
        SwCmd::Duty { p2, row, weights, .. } => {
            let cfg = match (m, p2, row, weights) {
                (2, Some(x), None, None) => SplitConfig::Two { p2: *x },
                (3, None, Some(r), None) => {
                    let i = ROWS3
                        .iter()
                        .position(|x| x.name == r || x.name.trim_end_matches(['a', 'b']) == r)
                        .ok_or_else(|| input_err(format!("unknown row {r:?}")))?;
                    SplitConfig::deterministic3(i)
                }
                (3, None, None, Some(ws)) => {
                    let v: Vec<f64> = parse_list(ws, "weight")?;
                    let weights: [f64; 8] = v.try_into().map_err(|_| input_err("--weights needs eight values"))?;
                    SplitConfig::Three { weights }
                }
                (2, ..) => return Err(input_err("two sources take --p2")),
                (3, ..) => return Err(input_err("three sources take --row or --weights")),
                _ => return Err(input_err("rate splitting supports two or three sources")),
            };
            duty_body(&p, &cfg)?
        }
        SwCmd::Solve { target, .. } => {
            let t: Vec<f64> = parse_list(target, "rate")?;
            let cfg = solve_knob(&p, &t, FACE_TOL)?;
            let mut b = duty_body(&p, &cfg)?;
            b["target"] = json!(t);
            b
        }
        SwCmd::Check { rates, helper, .. } => {
            let r: Vec<f64> = parse_list(rates, "rate")?;
            let h = match helper {
                Some(path) => {
                    let (bytes, dh) = read_input(path)?;
                    meta.inputs.push(dh);
                    Some(helper_from_json(&parse_json(&bytes, "helper")?)?)
                }
                None => None,
            };
            let inside = region_check(&p, &r, h.as_ref())?;
            let bounds: Vec<Value> = subset_bounds(&p, h.as_ref())?
                .into_iter()
                .map(|(mask, b)| {
                    let set: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect();
                    let sum: f64 = set.iter().map(|&i| r[i - 1]).sum();
                    json!({"sources": set, "bound": b, "rate_sum": sum, "holds": sum >= b - 1e-12})
                })
                .collect();
            json!({"rates": r, "inside": inside, "bounds": bounds})
        }
    };
    Ok(json_document(&meta, body))
}
