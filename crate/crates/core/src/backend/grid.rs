use crate::error::{Error, Result};

/// Tensor lattice over a box in `R^d` with trapezoidal quadrature weights.
///
/// Nodes are ordered with the first coordinate running fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    counts: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    axis_nodes: Vec<Vec<f64>>,
    axis_weights: Vec<Vec<f64>>,
}

impl SpatialGrid {
    pub fn new(counts: Vec<usize>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if counts.is_empty() || counts.len() != lower.len() || counts.len() != upper.len() {
            return Err(Error::Config("grid counts and bounds must have equal, nonzero length".into()));
        }
        let mut axis_nodes = Vec::with_capacity(counts.len());
        let mut axis_weights = Vec::with_capacity(counts.len());
        for (i, &n) in counts.iter().enumerate() {
            let (lo, hi) = (lower[i], upper[i]);
            if n < 2 {
                return Err(Error::Config(format!("grid direction {i} needs at least 2 nodes, got {n}")));
            }
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("grid bounds [{lo}, {hi}] are invalid")));
            }
            let h = (hi - lo) / (n - 1) as f64;
            let nodes: Vec<f64> = (0..n)
                .map(|k| if k + 1 == n { hi } else { lo + h * k as f64 })
                .collect();
            let mut w = vec![h; n];
            w[0] = 0.5 * h;
            w[n - 1] = 0.5 * h;
            axis_nodes.push(nodes);
            axis_weights.push(w);
        }
        Ok(Self { counts, lower, upper, axis_nodes, axis_weights })
    }

    /// `n x n` lattice on the square `[lo, hi]^2`.
    pub fn square(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![n, n], vec![lo, lo], vec![hi, hi])
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis_nodes(&self, axis: usize) -> &[f64] {
        &self.axis_nodes[axis]
    }

    pub fn axis_weights(&self, axis: usize) -> &[f64] {
        &self.axis_weights[axis]
    }

    pub fn measure(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(a, b)| b - a).product()
    }

    /// Coordinates of node `k`.
    pub fn node(&self, mut k: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        for (axis, &n) in self.counts.iter().enumerate() {
            x.push(self.axis_nodes[axis][k % n]);
            k /= n;
        }
        x
    }

    /// Full tensor-product quadrature weights, one per node.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![1.0];
        for axis in 0..self.dim() {
            let aw = &self.axis_weights[axis];
            let mut next = Vec::with_capacity(w.len() * aw.len());
            for &b in aw {
                for &a in &w {
                    next.push(a * b);
                }
            }
            w = next;
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_area() {
        let g = SpatialGrid::square(75, -1.0, 1.0).unwrap();
        let w = g.weights();
        assert_eq!(w.len(), 75 * 75);
        assert!(w.iter().all(|&x| x > 0.0));
        assert!((w.iter().sum::<f64>() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn node_ordering_first_axis_fastest() {
        let g = SpatialGrid::new(vec![3, 2], vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(g.node(1), vec![0.5, 0.0]);
        assert_eq!(g.node(3), vec![0.0, 1.0]);
        assert_eq!(g.node(5), vec![1.0, 1.0]);
    }

    #[test]
    fn rejects_single_node() {
        assert!(SpatialGrid::square(1, 0.0, 1.0).is_err());
    }
}
