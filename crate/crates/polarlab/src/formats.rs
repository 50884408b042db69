//! JSON and CSV formats, output metadata and the error type shared by the
//! runners and the command line.

use std::fmt;
use std::path::Path;

use polarlab_core::channel::{make_channel, ChannelKind, Dmc, ParamSet};
use polarlab_core::construct::{code_from_tree, CodeSpec, PrunedLeaf, PrunedTree};
use polarlab_core::gf::{Elem, Field, Mat};
use polarlab_core::kernel::Kernel;
use polarlab_core::multiterminal::{Helper, JointSource};
use polarlab_core::process::StopCause;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "polarlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Input problems exit with 2, computation failures with 1.
#[derive(Debug, Clone, PartialEq)]
pub enum AppError {
    Input(String),
    Compute(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Input(_) => 2,
            AppError::Compute(_) => 1,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Input(m) => write!(f, "input error: {m}"),
            AppError::Compute(m) => write!(f, "computation error: {m}"),
        }
    }
}

impl std::error::Error for AppError {}

impl From<polarlab_core::Error> for AppError {
    fn from(e: polarlab_core::Error) -> Self {
        use polarlab_core::Error as E;
        match e {
            E::Invalid(_) | E::Domain(_) => AppError::Input(e.to_string()),
            E::Guard { .. } | E::NoConvergence(_) => AppError::Compute(e.to_string()),
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;

pub fn input_err(m: impl Into<String>) -> AppError {
    AppError::Input(m.into())
}

/// A consumed input: a display name and the SHA-256 of its bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(name: impl Into<String>, bytes: &[u8]) -> InputDigest {
        InputDigest { name: name.into(), sha256: hex::encode(Sha256::digest(bytes)) }
    }
}

/// Metadata embedded in every output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Meta {
    pub command: String,
    pub seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
    pub modulus: Option<Vec<u32>>,
    /// Extra `key: value` facts about the run.
    pub notes: Vec<(String, String)>,
}

impl Meta {
    pub fn new(command: &str, seed: Option<u64>) -> Meta {
        Meta { command: command.into(), seed, ..Meta::default() }
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.into(), value.to_string()));
    }

    pub fn json(&self) -> Value {
        let mut m = Map::new();
        m.insert("tool".into(), json!(TOOL));
        m.insert("version".into(), json!(VERSION));
        m.insert("command".into(), json!(self.command));
        m.insert("seed".into(), json!(self.seed));
        m.insert(
            "inputs".into(),
            Value::Array(self.inputs.iter().map(|i| json!({"name": i.name, "sha256": i.sha256})).collect()),
        );
        if let Some(md) = &self.modulus {
            m.insert("modulus".into(), json!(md));
        }
        for (k, v) in &self.notes {
            m.insert(k.clone(), json!(v));
        }
        Value::Object(m)
    }

    /// `#`-prefixed header lines for CSV outputs.
    pub fn csv_header(&self) -> String {
        let mut s = format!("# {TOOL} {VERSION}\n# command: {}\n", self.command);
        match self.seed {
            Some(seed) => s.push_str(&format!("# seed: {seed}\n")),
            None => s.push_str("# seed: none\n"),
        }
        for i in &self.inputs {
            s.push_str(&format!("# input: {} sha256={}\n", i.name, i.sha256));
        }
        if let Some(md) = &self.modulus {
            s.push_str(&format!("# modulus: {md:?}\n"));
        }
        for (k, v) in &self.notes {
            s.push_str(&format!("# {k}: {v}\n"));
        }
        s
    }
}

/// `{"meta": ..., ...body}` pretty-printed with a trailing newline.
pub fn json_document(meta: &Meta, body: Value) -> String {
    let mut obj = match body {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("result".into(), other);
            m
        }
    };
    obj.insert("meta".into(), meta.json());
    let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("values serialize");
    s.push('\n');
    s
}

/// CSV text with the metadata header.
pub fn csv_document(meta: &Meta, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields");
    meta.csv_header() + &body
}

pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0"
        "0".into()
    } else {
        format!("{x}")
    }
}

/// Reads a file and records its digest.
pub fn read_input(path: &str) -> AppResult<(Vec<u8>, InputDigest)> {
    let bytes = std::fs::read(Path::new(path)).map_err(|e| input_err(format!("cannot read {path}: {e}")))?;
    let d = InputDigest::of(path, &bytes);
    Ok((bytes, d))
}

pub fn parse_json(bytes: &[u8], what: &str) -> AppResult<Value> {
    serde_json::from_slice(bytes).map_err(|e| input_err(format!("malformed {what} JSON: {e}")))
}

fn get_u32(v: &Value, key: &str, default: Option<u32>) -> AppResult<u32> {
    match v.get(key) {
        None | Some(Value::Null) => default.ok_or_else(|| input_err(format!("missing field {key:?}"))),
        Some(x) => x
            .as_u64()
            .and_then(|n| u32::try_from(n).ok())
            .ok_or_else(|| input_err(format!("field {key:?} must be a nonnegative integer"))),
    }
}

fn get_f64(v: &Value, key: &str) -> AppResult<f64> {
    v.get(key).and_then(Value::as_f64).ok_or_else(|| input_err(format!("field {key:?} must be a number")))
}

fn f64_list(v: &Value, what: &str) -> AppResult<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| input_err(format!("{what} must be an array")))?
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| input_err(format!("{what} must hold numbers"))))
        .collect()
}

fn field_of(v: &Value) -> AppResult<Field> {
    let p = get_u32(v, "p", Some(2))?;
    let k = get_u32(v, "k", Some(1))?;
    Ok(Field::new(p, k)?)
}

pub fn matrix_json(f: &Field, m: &Mat) -> Value {
    json!({
        "p": f.p(),
        "k": f.k(),
        "rows": m.rows,
        "cols": m.cols,
        "entries": m.data,
        "modulus": f.modulus(),
    })
}

pub fn matrix_from_json(v: &Value) -> AppResult<(Field, Mat)> {
    let f = field_of(v)?;
    let rows = get_u32(v, "rows", None)? as usize;
    let cols = get_u32(v, "cols", None)? as usize;
    let entries = v
        .get("entries")
        .and_then(Value::as_array)
        .ok_or_else(|| input_err("field \"entries\" must be an array"))?
        .iter()
        .map(|x| {
            x.as_u64()
                .filter(|&e| (e as usize) < f.q())
                .map(|e| e as Elem)
                .ok_or_else(|| input_err(format!("matrix entries must be integers below {}", f.q())))
        })
        .collect::<AppResult<Vec<Elem>>>()?;
    if let Some(md) = v.get("modulus") {
        if !md.is_null() {
            let given: Vec<u32> = md
                .as_array()
                .ok_or_else(|| input_err("modulus must be an array"))?
                .iter()
                .map(|x| x.as_u64().map(|c| c as u32).ok_or_else(|| input_err("modulus coefficients must be integers")))
                .collect::<AppResult<_>>()?;
            if given != f.modulus() {
                return Err(input_err(format!("modulus {given:?} differs from the field's {:?}", f.modulus())));
            }
        }
    }
    Ok((f, Mat::new(rows, cols, entries)?))
}

/// Built-in kernels addressable by name.
pub fn named_kernel(name: &str) -> Option<Kernel> {
    match name {
        "arikan" => Some(Kernel::arikan()),
        "g_ye" | "gye" => Some(Kernel::g_ye()),
        "g_barg" | "gbarg" => Some(Kernel::g_barg()),
        _ => None,
    }
}

/// A kernel from a built-in name or a matrix file.
pub fn load_kernel(spec: &str) -> AppResult<(Kernel, InputDigest)> {
    if let Some(k) = named_kernel(spec) {
        let text = matrix_json(k.field(), k.matrix()).to_string();
        return Ok((k, InputDigest::of(format!("builtin:{spec}"), text.as_bytes())));
    }
    let (bytes, d) = read_input(spec)?;
    Ok((kernel_from_json(&parse_json(&bytes, "matrix")?)?, d))
}

pub fn kernel_from_json(v: &Value) -> AppResult<Kernel> {
    let (f, m) = matrix_from_json(v)?;
    Ok(Kernel::new(&f, m)?)
}

pub fn channel_from_json(v: &Value) -> AppResult<Dmc> {
    let kind = v.get("kind").and_then(Value::as_str).ok_or_else(|| input_err("channel needs a \"kind\""))?;
    let field = field_of(v)?;
    let kind = match kind {
        "bec" | "erasure" => ChannelKind::Erasure { field, epsilon: get_f64(v, "epsilon")? },
        "bsc" => {
            if field.q() != 2 {
                return Err(input_err("bsc is binary; use qsc for larger fields"));
            }
            ChannelKind::Bsc { crossover: get_f64(v, "crossover")? }
        }
        "qsc" => ChannelKind::Qsc { field, p: get_f64(v, "crossover")? },
        "dmc" => {
            let trans = v
                .get("trans")
                .and_then(Value::as_array)
                .ok_or_else(|| input_err("dmc needs \"trans\" rows"))?
                .iter()
                .map(|r| f64_list(r, "trans row"))
                .collect::<AppResult<Vec<_>>>()?;
            let q_dist = match v.get("Q") {
                None | Some(Value::Null) => None,
                Some(q) => Some(f64_list(q, "Q")?),
            };
            let labels = match v.get("outputs") {
                None | Some(Value::Null) => None,
                Some(o) => Some(
                    o.as_array()
                        .ok_or_else(|| input_err("outputs must be an array of labels"))?
                        .iter()
                        .map(|x| x.as_str().map(String::from).ok_or_else(|| input_err("output labels must be strings")))
                        .collect::<AppResult<Vec<_>>>()?,
                ),
            };
            ChannelKind::Dmc { field, q_dist, trans, labels }
        }
        other => return Err(input_err(format!("unknown channel kind {other:?}"))),
    };
    Ok(make_channel(kind)?)
}

pub fn load_channel(path: &str) -> AppResult<(Dmc, InputDigest)> {
    let (bytes, d) = read_input(path)?;
    Ok((channel_from_json(&parse_json(&bytes, "channel")?)?, d))
}

pub fn params_json(p: &ParamSet) -> Value {
    json!({
        "H": p.h,
        "I": p.i,
        "Pe": p.pe,
        "Z": p.z,
        "Z_d": p.z_d,
        "Z_mxd": p.z_mxd,
        "T": p.t,
        "S": p.s,
        "S_max": p.s_max,
    })
}

pub fn source_from_json(v: &Value) -> AppResult<JointSource> {
    let alphabets = v
        .get("alphabets")
        .and_then(Value::as_array)
        .ok_or_else(|| input_err("source needs \"alphabets\""))?
        .iter()
        .map(|x| x.as_u64().map(|n| n as usize).ok_or_else(|| input_err("alphabet sizes must be integers")))
        .collect::<AppResult<Vec<_>>>()?;
    let pmf = f64_list(v.get("pmf").ok_or_else(|| input_err("source needs \"pmf\""))?, "pmf")?;
    Ok(JointSource::new(alphabets, pmf)?)
}

pub fn helper_from_json(v: &Value) -> AppResult<Helper> {
    let channel = v
        .get("channel")
        .and_then(Value::as_array)
        .ok_or_else(|| input_err("helper needs \"channel\" rows"))?
        .iter()
        .map(|r| f64_list(r, "helper channel row"))
        .collect::<AppResult<Vec<_>>>()?;
    Ok(Helper { channel, rate: get_f64(v, "rate")? })
}

const DIGITS: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";

/// A path as a base-`l` string, most significant branch first.
pub fn path_string(path: &[u16]) -> String {
    path.iter().map(|&b| DIGITS[b as usize] as char).collect()
}

fn parse_path(s: &str, l: usize) -> AppResult<Vec<u16>> {
    s.chars()
        .map(|c| {
            c.to_digit(36)
                .filter(|&d| (d as usize) < l)
                .map(|d| d as u16)
                .ok_or_else(|| input_err(format!("bad branch digit {c:?} in path {s:?}")))
        })
        .collect()
}

fn position_path(mut pos: usize, l: usize, n: usize) -> Vec<u16> {
    let mut p = vec![0u16; n];
    for d in (0..n).rev() {
        p[d] = (pos % l) as u16;
        pos /= l;
    }
    p
}

fn leaf_json(lf: &PrunedLeaf) -> Value {
    json!({
        "label": if lf.info { "info" } else { "frozen" },
        "cause": lf.cause.name(),
        "z": lf.z,
        "z_mxd": lf.z_mxd,
        "s_max": lf.s_max,
        "t_q": lf.t_q,
        "impossible": lf.impossible,
    })
}

/// Nested arrays: an internal node lists its `l` children, a leaf is an
/// object with its label and stop data.
fn tree_json(tree: &PrunedTree) -> Value {
    fn build(leaves: &[PrunedLeaf], i: &mut usize, depth: usize, l: usize) -> Value {
        let lf = &leaves[*i];
        if lf.depth() == depth {
            *i += 1;
            return leaf_json(lf);
        }
        Value::Array((0..l).map(|_| build(leaves, i, depth + 1, l)).collect())
    }
    let mut i = 0;
    build(&tree.leaves, &mut i, 0, tree.l)
}

fn tree_from_json(v: &Value, l: usize, n: usize) -> AppResult<PrunedTree> {
    fn walk(v: &Value, path: &mut Vec<u16>, l: usize, out: &mut Vec<PrunedLeaf>) -> AppResult<()> {
        match v {
            Value::Array(children) => {
                if children.len() != l {
                    return Err(input_err(format!("internal node with {} children, expected {l}", children.len())));
                }
                for (b, c) in children.iter().enumerate() {
                    path.push(b as u16);
                    walk(c, path, l, out)?;
                    path.pop();
                }
                Ok(())
            }
            Value::Object(_) => {
                let info = match v.get("label").and_then(Value::as_str) {
                    Some("info") => true,
                    Some("frozen") => false,
                    _ => return Err(input_err("leaf label must be \"info\" or \"frozen\"")),
                };
                let cause = match v.get("cause").and_then(Value::as_str) {
                    Some("z-stop") => StopCause::ZStop,
                    Some("s-stop") => StopCause::SStop,
                    Some("depth-out") => StopCause::DepthOut,
                    _ => return Err(input_err("leaf cause must be z-stop, s-stop or depth-out")),
                };
                out.push(PrunedLeaf {
                    path: path.clone(),
                    cause,
                    info,
                    z: get_f64(v, "z")?,
                    z_mxd: get_f64(v, "z_mxd")?,
                    s_max: get_f64(v, "s_max")?,
                    t_q: v.get("t_q").and_then(Value::as_f64),
                    impossible: v.get("impossible").and_then(Value::as_bool).unwrap_or(false),
                });
                Ok(())
            }
            _ => Err(input_err("tree nodes must be arrays or leaf objects")),
        }
    }
    let mut leaves = Vec::new();
    walk(v, &mut Vec::new(), l, &mut leaves)?;
    Ok(PrunedTree::from_leaves(l, n, leaves)?)
}

/// The CodeSpec file body. Frozen entries are base-`l` path strings: the
/// frozen leaves of a pruned code, the frozen positions of a full code.
pub fn code_json(spec: &CodeSpec, asymmetric: bool) -> Value {
    let k = &spec.kernel;
    let l = k.size();
    let frozen: Vec<String> = match &spec.pruned {
        Some(t) => t.leaves.iter().filter(|lf| !lf.info).map(|lf| path_string(&lf.path)).collect(),
        None => spec.frozen_positions().into_iter().map(|p| path_string(&position_path(p, l, spec.n))).collect(),
    };
    json!({
        "kernel": matrix_json(k.field(), k.matrix()),
        "n": spec.n,
        "block_length": spec.block_len(),
        "info_count": spec.info_len(),
        "frozen": frozen,
        "pruned": spec.pruned.as_ref().map(tree_json),
        "asymmetric": asymmetric,
        "design_pe": spec.design_pe,
        "design_bound": spec.design_bound,
        "rate": spec.rate,
        "eu_du_pairs": spec.eu_du_pairs as u64,
        "mean_s": spec.mean_s,
        "theta": spec.theta,
        "degraded": spec.degraded,
    })
}

pub fn code_from_json(v: &Value) -> AppResult<CodeSpec> {
    let k = kernel_from_json(v.get("kernel").ok_or_else(|| input_err("code needs a \"kernel\""))?)?;
    let l = k.size();
    let n = get_u32(v, "n", None)? as usize;
    let degraded = v.get("degraded").and_then(Value::as_bool).unwrap_or(false);
    let frozen: Vec<Vec<u16>> = v
        .get("frozen")
        .and_then(Value::as_array)
        .ok_or_else(|| input_err("code needs \"frozen\" paths"))?
        .iter()
        .map(|s| s.as_str().ok_or_else(|| input_err("frozen paths must be strings")).and_then(|s| parse_path(s, l)))
        .collect::<AppResult<_>>()?;
    match v.get("pruned") {
        Some(t) if !t.is_null() => {
            let tree = tree_from_json(t, l, n)?;
            let theta = v.get("theta").and_then(Value::as_f64).unwrap_or(0.0);
            let asym = v.get("asymmetric").and_then(Value::as_bool).unwrap_or(false);
            let listed: Vec<&Vec<u16>> = tree.leaves.iter().filter(|lf| !lf.info).map(|lf| &lf.path).collect();
            if listed.len() != frozen.len() || listed.iter().zip(&frozen).any(|(a, b)| *a != b) {
                return Err(input_err("frozen list disagrees with the pruned tree"));
            }
            Ok(code_from_tree(&k, tree, theta, degraded, asym)?)
        }
        _ => {
            let big = (l as u128).checked_pow(n as u32).filter(|&b| b <= polarlab_core::construct::MAX_BLOCK);
            let big = big.ok_or_else(|| input_err("block length too large"))? as usize;
            let mut info = vec![true; big];
            for p in &frozen {
                if p.len() != n {
                    return Err(input_err("full-code frozen paths must have n digits"));
                }
                let pos = p.iter().fold(0usize, |a, &b| a * l + b as usize);
                info[pos] = false;
            }
            let kcount = info.iter().filter(|&&b| b).count();
            Ok(CodeSpec {
                kernel: k,
                n,
                info,
                pruned: None,
                design_pe: v.get("design_pe").and_then(Value::as_f64).unwrap_or(f64::NAN),
                design_bound: v.get("design_bound").and_then(Value::as_f64),
                rate: kcount as f64 / big as f64,
                eu_du_pairs: v.get("eu_du_pairs").and_then(Value::as_u64).unwrap_or(0) as u128,
                mean_s: v.get("mean_s").and_then(Value::as_f64).unwrap_or(n as f64),
                theta: v.get("theta").and_then(Value::as_f64),
                degraded,
            })
        }
    }
}

pub fn load_code(path: &str) -> AppResult<(CodeSpec, InputDigest)> {
    let (bytes, d) = read_input(path)?;
    Ok((code_from_json(&parse_json(&bytes, "code")?)?, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use polarlab_core::construct::{build_frozen, build_pruned, Strategy};
    use polarlab_core::exec::Sequential;

    #[test]
    fn matrix_roundtrip_and_modulus_check() {
        let f = Field::with_order(4).unwrap();
        let m = Mat::from_rows(&[&[1, 2], &[0, 3]]);
        let v = matrix_json(&f, &m);
        let (f2, m2) = matrix_from_json(&v).unwrap();
        assert_eq!(f2, f);
        assert_eq!(m2, m);
        let mut bad = v.clone();
        bad["modulus"] = json!([1, 0, 1]);
        assert!(matrix_from_json(&bad).is_err());
    }

    #[test]
    fn code_roundtrip_full_and_pruned() {
        let w = Dmc::bec(0.5).unwrap();
        let k = Kernel::arikan();
        let full = build_frozen(&w, &k, 4, Strategy::Threshold(0.3), None, &Sequential).unwrap();
        let back = code_from_json(&code_json(&full, false)).unwrap();
        assert_eq!(back.info, full.info);
        assert_eq!(back.design_pe, full.design_pe);
        let pruned = build_pruned(&w, &k, 7, 1e-3, None).unwrap();
        let text = code_json(&pruned, false).to_string();
        let back = code_from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, pruned);
    }

    #[test]
    fn channel_kinds() {
        let v = json!({"kind": "dmc", "trans": [[0.9, 0.1], [0.2, 0.8]], "outputs": ["a", "b"]});
        assert_eq!(channel_from_json(&v).unwrap().num_outputs(), 2);
        let v = json!({"kind": "bec", "p": 3, "k": 1, "epsilon": 0.25});
        assert_eq!(channel_from_json(&v).unwrap().q(), 3);
        assert!(channel_from_json(&json!({"kind": "awgn"})).is_err());
        assert!(channel_from_json(&json!({"kind": "bsc"})).is_err());
    }

    #[test]
    fn csv_has_header_block() {
        let mut m = Meta::new("region", Some(7));
        m.inputs.push(InputDigest::of("x", b"abc"));
        let s = csv_document(&m, &["a", "b"], &[vec!["1".into(), "2".into()]]);
        assert!(s.starts_with("# polarlab "));
        assert!(s.contains("# seed: 7\n"));
        assert!(s.contains("sha256=ba7816bf"));
        assert!(s.ends_with("a,b\n1,2\n"));
    }
}
