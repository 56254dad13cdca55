//! Single-file container for offline artifacts.
//!
//! Layout: a UTF-8 header of `key = value` lines, one `section` line per
//! binary array (name, element count, FNV-1a checksum), a terminating `end`
//! line, then the arrays as little-endian binary64 in declared order.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::backend::CoefficientKind;
use crate::domain::{ParameterDomain, ParameterPoint};
use crate::error::{Error, Result};
use crate::field::{FieldNode, Interpolation, MetricField};
use crate::greedy::IterationRecord;
use crate::metric::MetricTensor;
use crate::online::{metrics_at, ReducedAffine};

pub const FORMAT_TAG: &str = "ANISORB-BUNDLE";
pub const FORMAT_VERSION: u32 = 1;

/// Everything the online stage needs, plus run metadata.
#[derive(Debug, Clone)]
pub struct OfflineBundle {
    /// Problem definition as configuration pairs with the `problem.`
    /// namespace stripped.
    pub problem: BTreeMap<String, String>,
    pub domain: ParameterDomain,
    /// Local space size `N`.
    pub n_local: usize,
    pub tol: f64,
    /// Sample points `S_K` in selection order.
    pub points: Vec<ParameterPoint>,
    /// Full truth vectors of the samples, if kept.
    pub snapshots: Option<Vec<Vec<f64>>>,
    /// `gram[(i, j)] = <v_j, v_i>` in the approximation space.
    pub gram: DMatrix<f64>,
    pub affine: Option<ReducedAffine>,
    pub field: MetricField,
    /// Tensor of `field` at each sample, `p * p` column-major values each.
    pub sample_metrics: Vec<f64>,
    pub history: Vec<IterationRecord>,
    /// Free-form scalar metadata (counters, seed, modes).
    pub meta: BTreeMap<String, String>,
}

impl OfflineBundle {
    /// Builds a bundle, deriving the per-sample tensors from `field`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        problem: BTreeMap<String, String>,
        domain: ParameterDomain,
        n_local: usize,
        tol: f64,
        points: Vec<ParameterPoint>,
        snapshots: Option<Vec<Vec<f64>>>,
        gram: DMatrix<f64>,
        affine: Option<ReducedAffine>,
        field: MetricField,
    ) -> Result<Self> {
        let sample_metrics = metrics_at(&field, &points);
        let b = Self {
            problem,
            domain,
            n_local,
            tol,
            points,
            snapshots,
            gram,
            affine,
            field,
            sample_metrics,
            history: Vec::new(),
            meta: BTreeMap::new(),
        };
        b.validate()?;
        Ok(b)
    }

    /// Number of samples `K`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn without_snapshots(mut self) -> Self {
        self.snapshots = None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.len();
        let p = self.domain.dim();
        let bad = |m: String| Err(Error::Invariant(m));
        if self.gram.nrows() != k || self.gram.ncols() != k {
            return bad(format!("gram is {}x{} for {k} samples", self.gram.nrows(), self.gram.ncols()));
        }
        for (i, pt) in self.points.iter().enumerate() {
            if pt.dim() != p || !self.domain.contains(pt.coords()) {
                return bad(format!("sample {i} at {:?} is not in the parameter domain", pt.coords()));
            }
        }
        let mut keys = std::collections::HashSet::new();
        if !self.points.iter().all(|pt| keys.insert(pt.key())) {
            return bad("duplicate sample points".into());
        }
        let scale = self.gram.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..k {
            if !(self.gram[(i, i)] > 0.0) {
                return bad(format!("gram diagonal entry {i} is not positive"));
            }
            for j in 0..i {
                let (a, b) = (self.gram[(i, j)], self.gram[(j, i)]);
                if !a.is_finite() || (a - b).abs() > 1e-12 * scale {
                    return bad(format!("gram is not symmetric at ({i}, {j}): {a} vs {b}"));
                }
            }
        }
        if let Some(s) = &self.snapshots {
            if s.len() != k {
                return bad(format!("{} snapshots for {k} samples", s.len()));
            }
            if let Some(first) = s.first() {
                if s.iter().any(|v| v.len() != first.len() || v.iter().any(|x| !x.is_finite())) {
                    return bad("snapshots have inconsistent length or non-finite entries".into());
                }
            }
        }
        if let Some(a) = &self.affine {
            if a.a.is_empty() || a.f.is_empty() {
                return bad("affine blocks must have at least one term".into());
            }
            if a.a.len() != a.kind.q_a() || a.f.len() != a.kind.q_f() {
                return bad("affine block count does not match the coefficient functions".into());
            }
            if a.a.iter().any(|m| m.nrows() != k || m.ncols() != k) || a.f.iter().any(|f| f.len() != k) {
                return bad("affine block dimensions do not match the sample count".into());
            }
        }
        if self.field.dim() != p {
            return bad("metric field dimension differs from the domain".into());
        }
        if self.sample_metrics.len() != k * p * p {
            return bad("sample metric tensors do not match the sample count".into());
        }
        if !(self.tol > 0.0) || self.n_local == 0 {
            return bad("tolerance and local size must be positive".into());
        }
        Ok(())
    }
}

/// 64-bit FNV-1a hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn join(v: impl IntoIterator<Item = f64>) -> String {
    v.into_iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ")
}

fn to_bytes(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Writes `bundle` to `path`. An existing file is only replaced with `force`.
pub fn save_bundle(bundle: &OfflineBundle, path: &Path, force: bool) -> Result<()> {
    bundle.validate()?;
    if path.exists() && !force {
        return Err(Error::WouldOverwrite(path.to_path_buf()));
    }
    let k = bundle.len();
    let p = bundle.domain.dim();
    let mut header = String::new();
    let mut line = |key: &str, value: String| {
        header.push_str(key);
        header.push_str(" = ");
        header.push_str(&value);
        header.push('\n');
    };
    line("dim", p.to_string());
    line("lower", join(bundle.domain.lower().iter().copied()));
    line("upper", join(bundle.domain.upper().iter().copied()));
    line("n_local", bundle.n_local.to_string());
    line("tol", format!("{}", bundle.tol));
    line("samples", k.to_string());
    let truth_len = bundle.snapshots.as_ref().and_then(|s| s.first()).map_or(0, |v| v.len());
    line("snapshots", if bundle.snapshots.is_some() { "present" } else { "absent" }.to_string());
    line("truth_len", truth_len.to_string());
    match &bundle.affine {
        Some(a) => {
            line("affine", a.kind.name().to_string());
            line("q_a", a.a.len().to_string());
            line("q_f", a.f.len().to_string());
        }
        None => line("affine", "none".to_string()),
    }
    line("field_nodes", bundle.field.nodes().len().to_string());
    line("field_mode", bundle.field.mode().name().to_string());
    line("history_rows", bundle.history.len().to_string());
    for (key, value) in &bundle.problem {
        line(&format!("problem.{key}"), value.clone());
    }
    for (key, value) in &bundle.meta {
        line(&format!("meta.{key}"), value.clone());
    }

    let mut sections: Vec<(&str, Vec<f64>)> = Vec::new();
    sections.push(("points", bundle.points.iter().flat_map(|q| q.coords().to_vec()).collect()));
    sections.push(("gram", bundle.gram.as_slice().to_vec()));
    if let Some(s) = &bundle.snapshots {
        sections.push(("snapshots", s.iter().flatten().copied().collect()));
    }
    if let Some(a) = &bundle.affine {
        sections.push(("affine_a", a.a.iter().flat_map(|m| m.as_slice().to_vec()).collect()));
        sections.push(("affine_f", a.f.iter().flat_map(|f| f.as_slice().to_vec()).collect()));
    }
    let nodes = bundle.field.nodes();
    sections.push(("field_points", nodes.iter().flat_map(|n| n.point.coords().to_vec()).collect()));
    sections.push(("field_tensors", nodes.iter().flat_map(|n| n.tensor.as_slice().to_vec()).collect()));
    sections.push(("field_radii", nodes.iter().map(|n| n.radius).collect()));
    sections.push(("sample_metrics", bundle.sample_metrics.clone()));
    sections.push((
        "history",
        bundle
            .history
            .iter()
            .flat_map(|h| [h.iteration as f64, h.samples as f64, h.max_err, h.eta_evals as f64, h.train_size as f64])
            .collect(),
    ));

    let mut payload = Vec::new();
    for (name, values) in &sections {
        let bytes = to_bytes(values);
        header.push_str(&format!("section {name} {} {:016x}\n", values.len(), fnv1a64(&bytes)));
        payload.extend_from_slice(&bytes);
    }
    header.push_str("end\n");

    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        writeln!(f, "{FORMAT_TAG} {FORMAT_VERSION}")?;
        f.write_all(header.as_bytes())?;
        f.write_all(&payload)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

struct Header {
    keys: BTreeMap<String, String>,
    sections: Vec<(String, usize, u64)>,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let fmt = |m: String| Error::Format(m);
    let mut pos = 0;
    let next_line = |pos: &mut usize| -> Result<String> {
        let rest = &bytes[*pos..];
        let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| fmt("truncated header".into()))?;
        let s = std::str::from_utf8(&rest[..end]).map_err(|_| fmt("header is not UTF-8".into()))?;
        *pos += end + 1;
        Ok(s.to_string())
    };
    let first = next_line(&mut pos)?;
    let mut parts = first.split_whitespace();
    if parts.next() != Some(FORMAT_TAG) {
        return Err(fmt("missing format tag".into()));
    }
    let version: u32 = parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| fmt("missing format version".into()))?;
    if version != FORMAT_VERSION {
        return Err(fmt(format!("unsupported format version {version} (expected {FORMAT_VERSION})")));
    }
    let mut keys = BTreeMap::new();
    let mut sections = Vec::new();
    loop {
        let l = next_line(&mut pos)?;
        if l == "end" {
            break;
        }
        if let Some(rest) = l.strip_prefix("section ") {
            let f: Vec<&str> = rest.split_whitespace().collect();
            if f.len() != 3 {
                return Err(fmt(format!("malformed section line `{l}`")));
            }
            let count = f[1].parse().map_err(|_| fmt(format!("bad element count in `{l}`")))?;
            let sum = u64::from_str_radix(f[2], 16).map_err(|_| fmt(format!("bad checksum in `{l}`")))?;
            sections.push((f[0].to_string(), count, sum));
        } else if let Some((k, v)) = l.split_once(" = ") {
            keys.insert(k.to_string(), v.to_string());
        } else {
            return Err(fmt(format!("malformed header line `{l}`")));
        }
    }
    Ok(Header { keys, sections, data_start: pos })
}

pub fn load_bundle(path: &Path) -> Result<OfflineBundle> {
    let bytes = fs::read(path)?;
    let header = parse_header(&bytes)?;
    let fmt = |m: String| Error::Format(m);
    let get = |k: &str| header.keys.get(k).ok_or_else(|| fmt(format!("missing header key `{k}`")));
    let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| fmt(format!("header key `{k}` is not an integer"))) };
    let floats = |k: &str| -> Result<Vec<f64>> {
        get(k)?
            .split_whitespace()
            .map(|x| x.parse::<f64>().map_err(|_| fmt(format!("header key `{k}` holds a non-number"))))
            .collect()
    };

    let mut arrays: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut pos = header.data_start;
    for (name, count, sum) in &header.sections {
        let len = count * 8;
        if bytes.len() < pos + len {
            return Err(fmt(format!("file truncated in section `{name}`")));
        }
        let chunk = &bytes[pos..pos + len];
        if fnv1a64(chunk) != *sum {
            return Err(fmt(format!("checksum mismatch in section `{name}`")));
        }
        arrays.insert(name.clone(), chunk.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect());
        pos += len;
    }
    if pos != bytes.len() {
        return Err(fmt(format!("{} trailing bytes after the last section", bytes.len() - pos)));
    }
    let mut take = |name: &str, expected: usize| -> Result<Vec<f64>> {
        let v = arrays.remove(name).ok_or_else(|| fmt(format!("missing section `{name}`")))?;
        if v.len() != expected {
            return Err(Error::Invariant(format!("section `{name}` has {} values, expected {expected}", v.len())));
        }
        Ok(v)
    };

    let p = num("dim")?;
    let domain = ParameterDomain::new(floats("lower")?, floats("upper")?)?;
    if domain.dim() != p {
        return Err(Error::Invariant("domain bounds do not match the dimension".into()));
    }
    let k = num("samples")?;
    let points: Vec<ParameterPoint> =
        take("points", k * p)?.chunks_exact(p.max(1)).map(|c| ParameterPoint::new(c.to_vec())).collect();
    let gram = DMatrix::from_vec(k, k, take("gram", k * k)?);
    let snapshots = match get("snapshots")?.as_str() {
        "present" => {
            let l = num("truth_len")?;
            let flat = take("snapshots", k * l)?;
            Some(if l == 0 { vec![Vec::new(); k] } else { flat.chunks_exact(l).map(<[f64]>::to_vec).collect() })
        }
        "absent" => None,
        other => return Err(fmt(format!("bad snapshots flag `{other}`"))),
    };
    let affine = match get("affine")?.as_str() {
        "none" => None,
        name => {
            let kind = CoefficientKind::parse(name).ok_or_else(|| fmt(format!("unknown affine kind `{name}`")))?;
            let (qa, qf) = (num("q_a")?, num("q_f")?);
            let a = take("affine_a", qa * k * k)?;
            let f = take("affine_f", qf * k)?;
            Some(ReducedAffine {
                kind,
                a: (0..qa).map(|q| DMatrix::from_column_slice(k, k, &a[q * k * k..(q + 1) * k * k])).collect(),
                f: (0..qf).map(|q| DVector::from_column_slice(&f[q * k..(q + 1) * k])).collect(),
            })
        }
    };
    let nf = num("field_nodes")?;
    let fp = take("field_points", nf * p)?;
    let ft = take("field_tensors", nf * p * p)?;
    let fr = take("field_radii", nf)?;
    let mode = Interpolation::parse(get("field_mode")?).ok_or_else(|| fmt("unknown interpolation mode".into()))?;
    let mut nodes = Vec::with_capacity(nf);
    for i in 0..nf {
        let t = DMatrix::from_column_slice(p, p, &ft[i * p * p..(i + 1) * p * p]);
        if t != t.transpose() {
            return Err(Error::Invariant(format!("metric tensor at field node {i} is not symmetric")));
        }
        nodes.push(FieldNode {
            point: ParameterPoint::new(fp[i * p..(i + 1) * p].to_vec()),
            tensor: MetricTensor::from_psd_unchecked(t),
            radius: fr[i],
        });
    }
    let field = MetricField::new(nodes, mode)?;
    let sample_metrics = take("sample_metrics", k * p * p)?;
    let rows = num("history_rows")?;
    let hist = take("history", rows * 5)?;
    let history = hist
        .chunks_exact(5)
        .map(|c| IterationRecord {
            iteration: c[0] as usize,
            samples: c[1] as usize,
            max_err: c[2],
            eta_evals: c[3] as u64,
            train_size: c[4] as usize,
        })
        .collect();
    let strip = |prefix: &str| -> BTreeMap<String, String> {
        header
            .keys
            .iter()
            .filter_map(|(key, v)| key.strip_prefix(prefix).map(|s| (s.to_string(), v.clone())))
            .collect()
    };
    let bundle = OfflineBundle {
        problem: strip("problem."),
        domain,
        n_local: num("n_local")?,
        tol: get("tol")?.parse().map_err(|_| fmt("bad tolerance".into()))?,
        points,
        snapshots,
        gram,
        affine,
        field,
        sample_metrics,
        history,
        meta: strip("meta."),
    };
    bundle.validate()?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn empty_bundle_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.bundle");
        let domain = ParameterDomain::cube(2, -0.5, 0.5).unwrap();
        let field = MetricField::identity(domain.centroid());
        let b = OfflineBundle::new(BTreeMap::new(), domain, 3, 1e-4, vec![], Some(vec![]), DMatrix::zeros(0, 0), None, field)
            .unwrap();
        save_bundle(&b, &path, false).unwrap();
        let l = load_bundle(&path).unwrap();
        assert_eq!(l.len(), 0);
        assert!(matches!(save_bundle(&b, &path, false), Err(Error::WouldOverwrite(_))));
        save_bundle(&b, &path, true).unwrap();
    }
}
