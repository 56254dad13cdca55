//! Metric tensors and ball radii known at a scattered node set, queryable
//! anywhere in the parameter domain.

use std::collections::HashSet;

use nalgebra::DMatrix;
use spade::handles::FixedVertexHandle;
use spade::{DelaunayTriangulation, FloatTriangulation, HasPosition, Point2, Triangulation};

use crate::domain::ParameterPoint;
use crate::error::{Error, Result};
use crate::metric::MetricTensor;

/// How values between nodes are reconstructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Piecewise-linear on a Delaunay triangulation for `p = 2`, inverse
    /// distance weighting otherwise.
    #[default]
    Auto,
    /// Inverse-distance weighting (exponent 2) over the `2p` nearest nodes.
    InverseDistance,
}

impl Interpolation {
    pub fn name(self) -> &'static str {
        match self {
            Interpolation::Auto => "auto",
            Interpolation::InverseDistance => "idw",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "auto" | "barycentric" => Some(Self::Auto),
            "idw" | "inverse-distance" => Some(Self::InverseDistance),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldNode {
    pub point: ParameterPoint,
    pub tensor: MetricTensor,
    pub radius: f64,
}

struct Vtx {
    pos: Point2<f64>,
    idx: usize,
}

impl HasPosition for Vtx {
    type Scalar = f64;

    fn position(&self) -> Point2<f64> {
        self.pos
    }
}

/// Immutable field of `(M(mu), r(mu))` samples.
pub struct MetricField {
    p: usize,
    nodes: Vec<FieldNode>,
    mode: Interpolation,
    tri: Option<DelaunayTriangulation<Vtx>>,
}

impl std::fmt::Debug for MetricField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricField")
            .field("p", &self.p)
            .field("nodes", &self.nodes.len())
            .field("mode", &self.mode)
            .field("triangulated", &self.tri.is_some())
            .finish()
    }
}

impl Clone for MetricField {
    fn clone(&self) -> Self {
        Self::new(self.nodes.clone(), self.mode).expect("nodes were validated on construction")
    }
}

impl MetricField {
    pub fn new(nodes: Vec<FieldNode>, mode: Interpolation) -> Result<Self> {
        let Some(first) = nodes.first() else {
            return Err(Error::EmptyField);
        };
        let p = first.point.dim();
        let mut keys = HashSet::with_capacity(nodes.len());
        for n in &nodes {
            if n.point.dim() != p || n.tensor.dim() != p {
                return Err(Error::DimensionMismatch { expected: p, got: n.point.dim() });
            }
            if !(n.radius >= 0.0) {
                return Err(Error::Invariant(format!("negative radius {} in metric field", n.radius)));
            }
            if !keys.insert(n.point.key()) {
                return Err(Error::Invariant(format!(
                    "duplicate metric field node {:?}",
                    n.point.coords()
                )));
            }
        }
        let tri = if p == 2 && mode == Interpolation::Auto && nodes.len() >= 3 {
            let verts = nodes
                .iter()
                .enumerate()
                .map(|(idx, n)| Vtx { pos: Point2::new(n.point[0], n.point[1]), idx })
                .collect();
            DelaunayTriangulation::<Vtx>::bulk_load(verts)
                .ok()
                .filter(|t| t.num_inner_faces() > 0 && !t.all_vertices_on_line())
        } else {
            None
        };
        Ok(Self { p, nodes, mode, tri })
    }

    /// A single-node field: the same tensor and radius everywhere.
    pub fn uniform(center: ParameterPoint, tensor: MetricTensor, radius: f64) -> Self {
        Self::new(vec![FieldNode { point: center, tensor, radius }], Interpolation::Auto)
            .expect("single node field is valid")
    }

    /// Euclidean metric with unit radius.
    pub fn identity(center: ParameterPoint) -> Self {
        let p = center.dim();
        Self::uniform(center, MetricTensor::identity(p), 1.0)
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn nodes(&self) -> &[FieldNode] {
        &self.nodes
    }

    pub fn mode(&self) -> Interpolation {
        self.mode
    }

    pub fn is_triangulated(&self) -> bool {
        self.tri.is_some()
    }

    /// Interpolated `(M(mu), r(mu))`; exact at nodes.
    pub fn metric_at(&self, mu: &ParameterPoint) -> Result<(MetricTensor, f64)> {
        if mu.dim() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, got: mu.dim() });
        }
        let mut out = vec![0.0; self.p * self.p];
        let r = self.metric_into(mu.coords(), &mut out);
        let m = DMatrix::from_column_slice(self.p, self.p, &out);
        Ok((MetricTensor::from_psd_unchecked(m), r))
    }

    /// Writes the column-major interpolated tensor into `out` and returns the
    /// interpolated radius.
    pub fn metric_into(&self, mu: &[f64], out: &mut [f64]) -> f64 {
        let weights = self.weights(mu);
        if let [(idx, _)] = weights.as_slice() {
            let node = &self.nodes[*idx];
            out.copy_from_slice(node.tensor.as_slice());
            return node.radius;
        }
        out.iter_mut().for_each(|x| *x = 0.0);
        let mut r = 0.0;
        for &(idx, w) in &weights {
            let node = &self.nodes[idx];
            for (o, t) in out.iter_mut().zip(node.tensor.as_slice()) {
                *o += w * t;
            }
            r += w * node.radius;
        }
        clamp_psd(out, self.p);
        r
    }

    /// Interpolation weights (node index, weight), summing to one.
    pub fn weights(&self, mu: &[f64]) -> Vec<(usize, f64)> {
        if self.nodes.len() == 1 {
            return vec![(0, 1.0)];
        }
        if let Some(tri) = &self.tri {
            let mut buf: Vec<(FixedVertexHandle, f64)> = Vec::with_capacity(3);
            tri.barycentric().get_weights(Point2::new(mu[0], mu[1]), &mut buf);
            if !buf.is_empty() {
                let mut w: Vec<(usize, f64)> = buf
                    .into_iter()
                    .map(|(h, w)| (tri.vertex(h).data().idx, w.max(0.0)))
                    .collect();
                let total: f64 = w.iter().map(|x| x.1).sum();
                if total > 0.0 {
                    w.iter_mut().for_each(|x| x.1 /= total);
                    return w;
                }
            }
        }
        self.idw_weights(mu)
    }

    fn idw_weights(&self, mu: &[f64]) -> Vec<(usize, f64)> {
        let k = (2 * self.p).min(self.nodes.len());
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (i, n) in self.nodes.iter().enumerate() {
            let d2: f64 = n.point.coords().iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 == 0.0 {
                return vec![(i, 1.0)];
            }
            if best.len() < k || d2 < best[best.len() - 1].0 {
                let pos = best.partition_point(|(d, _)| *d <= d2);
                best.insert(pos, (d2, i));
                best.truncate(k);
            }
        }
        // exponent 2 on the distance, i.e. 1 / d^2
        let mut w: Vec<(usize, f64)> = best.iter().map(|&(d2, i)| (i, 1.0 / d2)).collect();
        let total: f64 = w.iter().map(|x| x.1).sum();
        w.iter_mut().for_each(|x| x.1 /= total);
        w
    }

    /// Same node set with every tensor replaced by `f(node)`.
    pub fn map_tensors<F>(&self, mut f: F) -> Self
    where
        F: FnMut(&FieldNode) -> MetricTensor,
    {
        let nodes = self
            .nodes
            .iter()
            .map(|n| FieldNode { point: n.point.clone(), tensor: f(n), radius: n.radius })
            .collect();
        Self::new(nodes, self.mode).expect("node set unchanged")
    }
}

/// Projects a column-major symmetric matrix onto the PSD cone in place.
pub fn clamp_psd(m: &mut [f64], p: usize) {
    match p {
        1 => m[0] = m[0].max(0.0),
        2 => {
            let (a, b, c) = (m[0], 0.5 * (m[1] + m[2]), m[3]);
            m[1] = b;
            m[2] = b;
            if a >= 0.0 && c >= 0.0 && a * c - b * b >= 0.0 {
                return;
            }
            let t = MetricTensor::from_symmetric_clamped(DMatrix::from_column_slice(2, 2, m));
            m.copy_from_slice(t.as_slice());
        }
        _ => {
            let t = MetricTensor::from_symmetric_clamped(DMatrix::from_column_slice(p, p, m));
            m.copy_from_slice(t.as_slice());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn node(c: &[f64], diag: &[f64], r: f64) -> FieldNode {
        FieldNode { point: ParameterPoint(c.to_vec()), tensor: MetricTensor::diagonal(diag), radius: r }
    }

    #[test]
    fn empty_field_rejected() {
        assert!(matches!(MetricField::new(vec![], Interpolation::Auto), Err(Error::EmptyField)));
    }

    #[test]
    fn duplicate_nodes_rejected() {
        let r = MetricField::new(
            vec![node(&[0.0, 0.0], &[1.0, 1.0], 1.0), node(&[0.0, 0.0], &[2.0, 2.0], 1.0)],
            Interpolation::Auto,
        );
        assert!(matches!(r, Err(Error::Invariant(_))));
    }

    #[test]
    fn single_node_is_constant() {
        let f = MetricField::uniform(
            ParameterPoint(vec![0.0, 0.0]),
            MetricTensor::from_psd_unchecked(dmatrix![2.0, 1.0; 1.0, 3.0]),
            0.7,
        );
        let (m, r) = f.metric_at(&ParameterPoint(vec![0.4, -0.9])).unwrap();
        assert_eq!(m.matrix(), &dmatrix![2.0, 1.0; 1.0, 3.0]);
        assert_eq!(r, 0.7);
    }

    #[test]
    fn two_nodes_midpoint_idw() {
        let f = MetricField::new(
            vec![node(&[0.0, 0.0], &[1.0, 1.0], 1.0), node(&[1.0, 0.0], &[3.0, 3.0], 2.0)],
            Interpolation::Auto,
        )
        .unwrap();
        assert!(!f.is_triangulated());
        let (m, r) = f.metric_at(&ParameterPoint(vec![0.5, 0.0])).unwrap();
        assert!((m.matrix() - dmatrix![2.0, 0.0; 0.0, 2.0]).amax() < 1e-14);
        assert!((r - 1.5).abs() < 1e-14);
    }

    #[test]
    fn barycentric_reproduces_linear_data_and_nodes() {
        // tensor entries linear in mu are reproduced exactly inside the hull
        let mut nodes = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                let x = i as f64 / 4.0;
                let y = j as f64 / 4.0;
                nodes.push(node(&[x, y], &[1.0 + x, 2.0 + 3.0 * y], 1.0 + x + y));
            }
        }
        let stored = nodes[7].clone();
        let f = MetricField::new(nodes, Interpolation::Auto).unwrap();
        assert!(f.is_triangulated());
        let (m, r) = f.metric_at(&ParameterPoint(vec![0.33, 0.71])).unwrap();
        assert!((m.matrix()[(0, 0)] - 1.33).abs() < 1e-12);
        assert!((m.matrix()[(1, 1)] - (2.0 + 3.0 * 0.71)).abs() < 1e-12);
        assert!((r - (1.0 + 0.33 + 0.71)).abs() < 1e-12);
        let (m, r) = f.metric_at(&stored.point).unwrap();
        assert_eq!(m, stored.tensor);
        assert_eq!(r, stored.radius);
    }

    #[test]
    fn clamp_psd_floors_negative_eigenvalue() {
        let mut m = [1.0, 2.0, 2.0, 1.0];
        clamp_psd(&mut m, 2);
        assert!((m[0] - 1.5).abs() < 1e-12 && (m[1] - 1.5).abs() < 1e-12);
    }
}
