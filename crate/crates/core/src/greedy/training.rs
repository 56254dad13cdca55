//! Training-set sizing and metric-adapted point placement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{ParameterDomain, ParameterPoint};
use crate::error::{Error, Result};
use crate::field::MetricField;
use crate::greedy::TrainingSet;
use crate::metric::distance_raw;

/// Size of the next training set given the current maximum error:
/// logarithmic interpolation between `q_min` (at `err = 1`) and `q_max`
/// (at `err = tol`). `err` is clamped to `[tol, 1]` first.
pub fn q_of_err(err: f64, tol: f64, q_min: usize, q_max: usize) -> Result<usize> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Config(format!("tolerance {tol} must lie in (0, 1)")));
    }
    if !(err > 0.0) {
        return Err(Error::Config(format!("error {err} must be positive")));
    }
    if q_min > q_max {
        return Err(Error::Config(format!("q_min {q_min} exceeds q_max {q_max}")));
    }
    let e = err.clamp(tol, 1.0);
    let x = (q_max - q_min) as f64 / tol.ln() * e.ln() + q_min as f64;
    // the guard keeps exact integers (e.g. 550.0000000001) from rounding up
    let q = (x - 1e-9).ceil();
    Ok((q.max(q_min as f64) as usize).clamp(q_min, q_max))
}

/// Candidates drawn per requested point.
const POOL_FACTOR: usize = 8;
const LLOYD_SWEEPS: usize = 3;

/// Places `q` points in `domain` approximately uniformly with respect to
/// the scaled metric `M(mu) / r(mu)^2` of `field`. The box corners are always
/// included and kept fixed.
///
/// A candidate pool is drawn with density proportional to the metric volume
/// element, a farthest-point pass under the metric picks `q` of them, and a
/// few Lloyd sweeps relax the result. Points that started on a face stay on
/// it.
pub fn generate_training_set(field: &MetricField, q: usize, domain: &ParameterDomain, seed: u64) -> Result<TrainingSet> {
    let p = domain.dim();
    if field.dim() != p {
        return Err(Error::DimensionMismatch { expected: p, got: field.dim() });
    }
    let corners = domain.corners();
    if q < corners.len() {
        return Err(Error::TrainingTooSmall { requested: q, corners: corners.len() });
    }
    if q == corners.len() {
        return Ok(TrainingSet { points: corners, generation: 0 });
    }
    let scaled = ScaledMetric::new(field, domain);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // candidate pool: corners first, then faces, then the interior
    let mut pool: Vec<Candidate> = corners
        .iter()
        .map(|c| Candidate { coords: c.coords().to_vec(), faces: full_faces(domain, c.coords()) })
        .collect();
    let sampler = CellSampler::new(&scaled, domain, q);
    let per_face = POOL_FACTOR * (q as f64).powf((p as f64 - 1.0) / p as f64).ceil() as usize;
    if p > 1 {
        for dir in 0..p {
            for upper in [false, true] {
                for _ in 0..per_face {
                    let mut x = sampler.draw(&mut rng);
                    x[dir] = if upper { domain.upper()[dir] } else { domain.lower()[dir] };
                    let faces = full_faces(domain, &x);
                    pool.push(Candidate { coords: x, faces });
                }
            }
        }
    }
    for _ in 0..POOL_FACTOR * q {
        let x = sampler.draw(&mut rng);
        let faces = full_faces(domain, &x);
        pool.push(Candidate { coords: x, faces });
    }
    let pp = p * p;
    let mut pool_m = vec![0.0; pool.len() * pp];
    for (c, m) in pool.iter().zip(pool_m.chunks_mut(pp)) {
        scaled.eval(&c.coords, m);
    }

    // farthest-point selection seeded with the corners
    let n_corners = corners.len();
    let mut chosen: Vec<usize> = (0..n_corners).collect();
    let mut mind = vec![f64::INFINITY; pool.len()];
    let mut owner = vec![0usize; pool.len()];
    let mut scratch = vec![0.0; p];
    let mut update = |s: usize, mind: &mut [f64], owner: &mut [usize], slot: usize| {
        let ms = &pool_m[s * pp..(s + 1) * pp];
        for c in 0..pool.len() {
            let d = distance_raw(&pool_m[c * pp..(c + 1) * pp], &pool[c].coords, ms, &pool[s].coords, &mut scratch);
            if d < mind[c] {
                mind[c] = d;
                owner[c] = slot;
            }
        }
    };
    for (slot, &s) in chosen.iter().enumerate() {
        update(s, &mut mind, &mut owner, slot);
    }
    while chosen.len() < q {
        let (best, d) = mind
            .iter()
            .enumerate()
            .fold((usize::MAX, 0.0f64), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        if best == usize::MAX || d <= 0.0 {
            break;
        }
        let slot = chosen.len();
        chosen.push(best);
        update(best, &mut mind, &mut owner, slot);
    }

    // Lloyd relaxation under the metric
    let mut sites: Vec<Vec<f64>> = chosen.iter().map(|&i| pool[i].coords.clone()).collect();
    let site_faces: Vec<Vec<Option<f64>>> = chosen.iter().map(|&i| pool[i].faces.clone()).collect();
    let mut site_m = vec![0.0; sites.len() * pp];
    for (s, m) in sites.iter().zip(site_m.chunks_mut(pp)) {
        scaled.eval(s, m);
    }
    for sweep in 0..LLOYD_SWEEPS {
        if sweep > 0 {
            for c in 0..pool.len() {
                let mc = &pool_m[c * pp..(c + 1) * pp];
                let mut best = (f64::INFINITY, 0);
                for (k, s) in sites.iter().enumerate() {
                    let d = distance_raw(mc, &pool[c].coords, &site_m[k * pp..(k + 1) * pp], s, &mut scratch);
                    if d < best.0 {
                        best = (d, k);
                    }
                }
                owner[c] = best.1;
            }
        }
        let mut sum = vec![vec![0.0; p]; sites.len()];
        let mut count = vec![0usize; sites.len()];
        for (c, &k) in owner.iter().enumerate() {
            count[k] += 1;
            for (a, x) in sum[k].iter_mut().zip(&pool[c].coords) {
                *a += x;
            }
        }
        for k in n_corners..sites.len() {
            if count[k] == 0 {
                continue;
            }
            let mut x: Vec<f64> = sum[k].iter().map(|a| a / count[k] as f64).collect();
            for (xi, f) in x.iter_mut().zip(&site_faces[k]) {
                if let Some(v) = f {
                    *xi = *v;
                }
            }
            domain.clamp(&mut x);
            scaled.eval(&x, &mut site_m[k * pp..(k + 1) * pp]);
            sites[k] = x;
        }
    }

    let mut seen = std::collections::HashSet::with_capacity(sites.len());
    let points = sites
        .into_iter()
        .map(ParameterPoint::new)
        .filter(|pt| seen.insert(pt.key()))
        .collect();
    Ok(TrainingSet { points, generation: 0 })
}

struct Candidate {
    coords: Vec<f64>,
    // per direction: the bound the point sits on, if any
    faces: Vec<Option<f64>>,
}

fn full_faces(domain: &ParameterDomain, x: &[f64]) -> Vec<Option<f64>> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| (v == domain.lower()[i] || v == domain.upper()[i]).then_some(v))
        .collect()
}

/// `M(mu) / r(mu)^2` plus a floor of one unit per domain extent, so that a
/// degenerate metric still spreads points over the box.
struct ScaledMetric<'a> {
    field: &'a MetricField,
    floor: Vec<f64>,
}

impl<'a> ScaledMetric<'a> {
    fn new(field: &'a MetricField, domain: &ParameterDomain) -> Self {
        Self { field, floor: domain.extents().iter().map(|e| 1.0 / (e * e)).collect() }
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let p = x.len();
        let r = self.field.metric_into(x, out);
        let s = if r > 0.0 { 1.0 / (r * r) } else { 0.0 };
        out.iter_mut().for_each(|v| *v *= s);
        for i in 0..p {
            out[i * p + i] += self.floor[i];
        }
    }

    fn volume(&self, x: &[f64]) -> f64 {
        let p = x.len();
        let mut m = vec![0.0; p * p];
        self.eval(x, &mut m);
        nalgebra::DMatrix::from_column_slice(p, p, &m).determinant().max(0.0).sqrt()
    }
}

/// Piecewise-constant density over a cell histogram of the box.
struct CellSampler {
    lower: Vec<f64>,
    width: Vec<f64>,
    cells: usize,
    cumulative: Vec<f64>,
}

impl CellSampler {
    fn new(scaled: &ScaledMetric<'_>, domain: &ParameterDomain, q: usize) -> Self {
        let p = domain.dim();
        let cells = ((q as f64).powf(1.0 / p as f64).ceil() as usize).clamp(2, 256);
        let width: Vec<f64> = domain.extents().iter().map(|e| e / cells as f64).collect();
        let total = cells.pow(p as u32);
        let mut cumulative = Vec::with_capacity(total);
        let mut acc = 0.0;
        let mut center = vec![0.0; p];
        for idx in 0..total {
            let mut r = idx;
            for i in 0..p {
                center[i] = domain.lower()[i] + ((r % cells) as f64 + 0.5) * width[i];
                r /= cells;
            }
            acc += scaled.volume(&center);
            cumulative.push(acc);
        }
        Self { lower: domain.lower().to_vec(), width, cells, cumulative }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let total = *self.cumulative.last().expect("nonempty histogram");
        let u = rng.random::<f64>() * total;
        let mut idx = self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1);
        self.lower
            .iter()
            .zip(&self.width)
            .map(|(lo, w)| {
                let k = idx % self.cells;
                idx /= self.cells;
                lo + (k as f64 + rng.random::<f64>()) * w
            })
            .collect()
    }
}
