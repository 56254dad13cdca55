//! Basis enrichment with domains of influence.

use crate::backend::ProblemBackend;
use crate::error::Result;
use crate::field::MetricField;
use crate::greedy::samples::SampleSet;
use crate::greedy::TrainingSet;
use crate::metric::distance_raw;

/// Offline state shared by the error sweep, the metric update and the
/// enrichment pass.
#[derive(Debug, Clone)]
pub struct GreedyState {
    pub samples: SampleSet,
    pub train: TrainingSet,
    /// Field under which the cached errors were evaluated.
    pub field: MetricField,
    /// `eta(mu; W_mu)` per training point, frozen during a pass.
    pub errors: Vec<f64>,
    /// Ball radius per training point under the pass metric.
    pub radii: Vec<f64>,
    /// Pass metric per training point, `p * p` column-major values each.
    pub tensors: Vec<f64>,
    pub err: f64,
    pub iteration: usize,
    pub eta_evals: u64,
    pub n_local: usize,
    pub tol: f64,
}

impl GreedyState {
    fn tensor(&self, t: usize) -> &[f64] {
        let pp = self.train.points[t].dim().pow(2);
        &self.tensors[t * pp..(t + 1) * pp]
    }
}

/// True iff `candidate` lies in the ball of `new_point` or `new_point` lies
/// in the ball of `candidate` (both indices into the training set).
pub fn domain_of_influence_excludes(candidate: usize, new_point: usize, state: &GreedyState) -> bool {
    let c = &state.train.points[candidate];
    let n = &state.train.points[new_point];
    let mut scratch = vec![0.0; c.dim()];
    let d = distance_raw(state.tensor(candidate), c.coords(), state.tensor(new_point), n.coords(), &mut scratch);
    d <= state.radii[candidate] || d <= state.radii[new_point]
}

/// Greedy selection over frozen errors: repeatedly takes the largest error
/// among the remaining candidates (ties to the lower index), stops once it
/// is at most `tol`, and removes every candidate `c` with
/// `excludes(c, selected)` after each pick. Returns the picks in order.
pub fn select_enrichment<F>(errors: &[f64], tol: f64, mut available: Vec<bool>, mut excludes: F) -> Vec<usize>
where
    F: FnMut(usize, usize) -> bool,
{
    let mut picked = Vec::new();
    loop {
        let mut best: Option<usize> = None;
        for (i, &e) in errors.iter().enumerate() {
            if available[i] && best.is_none_or(|b| e > errors[b]) {
                best = Some(i);
            }
        }
        let Some(b) = best else { break };
        if !(errors[b] > tol) {
            break;
        }
        picked.push(b);
        available[b] = false;
        for (c, a) in available.iter_mut().enumerate() {
            if *a && excludes(c, b) {
                *a = false;
            }
        }
    }
    picked
}

/// One enrichment pass over the training set: computes snapshots for the
/// selected points and appends them to the sample set. Returns the
/// training indices that were added.
pub fn enrichment_loop(state: &mut GreedyState, backend: &ProblemBackend) -> Result<Vec<usize>> {
    let available: Vec<bool> = state.train.points.iter().map(|p| !state.samples.contains(p)).collect();
    let picked = {
        let st = &*state;
        select_enrichment(&st.errors, st.tol, available, |c, n| domain_of_influence_excludes(c, n, st))
    };
    for &t in &picked {
        state.samples.push(backend, state.train.points[t].clone())?;
    }
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nothing_above_tol_adds_nothing() {
        let picked = select_enrichment(&[0.1, 0.2], 0.5, vec![true; 2], |_, _| false);
        assert!(picked.is_empty());
    }

    #[test]
    fn single_point_above_tol() {
        let picked = select_enrichment(&[0.1, 0.9, 0.2], 0.5, vec![true; 3], |_, _| false);
        assert_eq!(picked, vec![1]);
    }

    #[test]
    fn mutual_balls_allow_one_pick() {
        // 0 and 1 are neighbours, 2 is far away
        let near = |a: usize, b: usize| (a < 2) == (b < 2);
        let picked = select_enrichment(&[0.8, 0.9, 0.7], 0.5, vec![true; 3], near);
        assert_eq!(picked, vec![1, 2]);
    }

    #[test]
    fn unavailable_points_are_skipped() {
        let picked = select_enrichment(&[0.9, 0.8], 0.5, vec![false, true], |_, _| false);
        assert_eq!(picked, vec![1]);
    }
}
