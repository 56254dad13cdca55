//! Tensor-product `Q_k` finite elements for steady convection-diffusion on
//! the unit square with a Dirichlet lifting on the bottom edge.

use nalgebra::DMatrix;

use crate::backend::{AffineForms, CoefficientKind, ErrorNorm};
use crate::domain::ParameterDomain;
use crate::error::{Error, Result};
use crate::linalg::{BandedLu, CsrMatrix};

/// Largest accepted cell Peclet number `|beta| h / (2 eps)`.
pub const MAX_CELL_PECLET: f64 = 20.0;

/// Dirichlet data on the bottom edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryData {
    /// Continuous saw tooth through (0,0), (0.5,0.5), (0.525,-0.475), (1,0).
    SawTooth,
    /// Homogeneous data everywhere.
    Zero,
}

impl BoundaryData {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sawtooth" => Some(Self::SawTooth),
            "zero" => Some(Self::Zero),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::SawTooth => "sawtooth",
            Self::Zero => "zero",
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::SawTooth => {
                if x <= 0.5 {
                    x
                } else if x <= 0.525 {
                    0.5 + (x - 0.5) * (-0.975 / 0.025)
                } else {
                    x - 1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdConfig {
    /// Cells per direction.
    pub cells: usize,
    /// Polynomial degree per direction, 1 to 3.
    pub degree: usize,
    pub norm: ErrorNorm,
    pub boundary: BoundaryData,
}

impl Default for CdConfig {
    fn default() -> Self {
        Self { cells: 80, degree: 1, norm: ErrorNorm::L2, boundary: BoundaryData::SawTooth }
    }
}

/// Galerkin discretization of `-eps Lap u + beta . grad u = 0` on `(0,1)^2`
/// with `eps = 10^mu1`, `beta = (sin mu2, cos mu2)`.
#[derive(Debug, Clone)]
pub struct GalerkinCd {
    config: CdConfig,
    nodes_per_side: usize,
    mass: CsrMatrix,
    inner: CsrMatrix,
    forms: AffineForms,
    lifting: Vec<f64>,
    // global node -> position in the interior unknown vector
    interior_pos: Vec<Option<usize>>,
    interior: Vec<usize>,
    bandwidth: usize,
}

impl GalerkinCd {
    pub fn new(config: CdConfig, domain: &ParameterDomain) -> Result<Self> {
        let k = config.degree;
        if !(1..=3).contains(&k) {
            return Err(Error::Config(format!("element degree must be 1, 2 or 3, got {k}")));
        }
        if config.cells < 2 {
            return Err(Error::Config("at least 2 cells per direction are required".into()));
        }
        if domain.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: domain.dim() });
        }
        if config.norm == ErrorNorm::LInf {
            return Err(Error::Config("the Galerkin backend measures errors in l2 or h1".into()));
        }
        let h = 1.0 / config.cells as f64;
        let eps_min = 10f64.powf(domain.lower()[0]);
        let peclet = (h / k as f64) / (2.0 * eps_min);
        if peclet > MAX_CELL_PECLET {
            return Err(Error::Config(format!(
                "cell Peclet number {peclet:.3} exceeds {MAX_CELL_PECLET}; refine the mesh or raise the diffusion bound"
            )));
        }

        let nn = config.cells * k + 1;
        let elem = ElementMatrices::new(k, h);
        let loc = (k + 1) * (k + 1);
        let cap = config.cells * config.cells * loc * loc;
        let mut tm = Vec::with_capacity(cap);
        let mut tk = Vec::with_capacity(cap);
        let mut tx = Vec::with_capacity(cap);
        let mut ty = Vec::with_capacity(cap);
        let mut glob = vec![0usize; loc];
        for ey in 0..config.cells {
            for ex in 0..config.cells {
                for b in 0..=k {
                    for a in 0..=k {
                        glob[b * (k + 1) + a] = (ey * k + b) * nn + ex * k + a;
                    }
                }
                for r in 0..loc {
                    for c in 0..loc {
                        let (gr, gc) = (glob[r], glob[c]);
                        tm.push((gr, gc, elem.mass[(r, c)]));
                        tk.push((gr, gc, elem.stiff[(r, c)]));
                        tx.push((gr, gc, elem.conv_x[(r, c)]));
                        ty.push((gr, gc, elem.conv_y[(r, c)]));
                    }
                }
            }
        }
        let n = nn * nn;
        let mass = CsrMatrix::from_triplets(n, n, tm);
        let stiff = CsrMatrix::from_triplets(n, n, tk);
        let conv_x = CsrMatrix::from_triplets(n, n, tx);
        let conv_y = CsrMatrix::from_triplets(n, n, ty);

        let mut lifting = vec![0.0; n];
        for i in 0..nn {
            let x = if i + 1 == nn { 1.0 } else { i as f64 / (nn - 1) as f64 };
            lifting[i] = config.boundary.eval(x);
        }
        let mut interior_pos = vec![None; n];
        let mut interior = Vec::with_capacity((nn - 2) * (nn - 2));
        for j in 1..nn - 1 {
            for i in 1..nn - 1 {
                interior_pos[j * nn + i] = Some(interior.len());
                interior.push(j * nn + i);
            }
        }
        let bandwidth = k * (nn - 2) + k;

        let operators = vec![stiff, conv_x, conv_y];
        let functionals = operators
            .iter()
            .map(|a| a.matvec(&lifting).into_iter().map(|v| -v).collect())
            .collect();
        let inner = match config.norm {
            ErrorNorm::H1 => CsrMatrix::combine(&[(1.0, &mass), (1.0, &operators[0])]),
            _ => mass.clone(),
        };
        let forms = AffineForms { operators, functionals, kind: CoefficientKind::ConvectionDiffusion };
        Ok(Self { config, nodes_per_side: nn, mass, inner, forms, lifting, interior_pos, interior, bandwidth })
    }

    pub fn config(&self) -> &CdConfig {
        &self.config
    }

    pub fn nodes_per_side(&self) -> usize {
        self.nodes_per_side
    }

    pub fn len(&self) -> usize {
        self.lifting.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lifting.is_empty()
    }

    pub fn interior_len(&self) -> usize {
        self.interior.len()
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// Matrix of the inner product (mass, or mass plus stiffness for `h1`).
    pub fn inner_matrix(&self) -> &CsrMatrix {
        &self.inner
    }

    pub fn forms(&self) -> &AffineForms {
        &self.forms
    }

    pub fn lifting(&self) -> &[f64] {
        &self.lifting
    }

    /// Nodal coordinates of global node `g`.
    pub fn node(&self, g: usize) -> (f64, f64) {
        let nn = self.nodes_per_side;
        let f = |i: usize| i as f64 / (nn - 1) as f64;
        (f(g % nn), f(g / nn))
    }

    pub fn is_boundary(&self, g: usize) -> bool {
        self.interior_pos[g].is_none()
    }

    /// Full operator `sum_q g_q(mu) a_q`.
    pub fn operator(&self, mu: &[f64]) -> CsrMatrix {
        let g = self.forms.kind.theta_a(mu);
        let terms: Vec<(f64, &CsrMatrix)> = g.iter().copied().zip(&self.forms.operators).collect();
        CsrMatrix::combine(&terms)
    }

    /// Solves for the homogeneous part `u - u_g` (zero on the boundary).
    pub fn solve_homogeneous(&self, mu: &[f64]) -> Result<Vec<f64>> {
        let a = self.operator(mu);
        let m = self.interior.len();
        let mut lu = BandedLu::new(m, self.bandwidth);
        let mut rhs = vec![0.0; m];
        for (row, &g) in self.interior.iter().enumerate() {
            let mut acc = 0.0;
            for (c, v) in a.row(g) {
                match self.interior_pos[c] {
                    Some(col) => lu.add(row, col, v),
                    None => acc -= v * self.lifting[c],
                }
            }
            rhs[row] = acc;
        }
        if !lu.factor() {
            return Err(Error::SingularTruth { mu: mu.to_vec() });
        }
        lu.solve(&mut rhs);
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularTruth { mu: mu.to_vec() });
        }
        let mut u = vec![0.0; self.len()];
        for (row, &g) in self.interior.iter().enumerate() {
            u[g] = rhs[row];
        }
        Ok(u)
    }

    /// Full truth solution `u = u_hom + u_g`.
    pub fn solve(&self, mu: &[f64]) -> Result<Vec<f64>> {
        let mut u = self.solve_homogeneous(mu)?;
        for (x, g) in u.iter_mut().zip(&self.lifting) {
            *x += g;
        }
        Ok(u)
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.inner.bilinear(a, b)
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        self.inner.bilinear(v, v).max(0.0).sqrt()
    }
}

/// Reference-element matrices for a square cell of side `h`, local node
/// `(a, b)` stored at `b * (k + 1) + a`.
struct ElementMatrices {
    mass: DMatrix<f64>,
    stiff: DMatrix<f64>,
    conv_x: DMatrix<f64>,
    conv_y: DMatrix<f64>,
}

impl ElementMatrices {
    fn new(k: usize, h: f64) -> Self {
        let (pts, wts) = gauss_unit(k + 1);
        let nodes: Vec<f64> = (0..=k).map(|a| a as f64 / k as f64).collect();
        let nb = k + 1;
        // 1D matrices on [0, 1]: m = int L_a L_b, s = int L_a' L_b', c = int L_b' L_a
        let mut m1 = DMatrix::<f64>::zeros(nb, nb);
        let mut s1 = DMatrix::<f64>::zeros(nb, nb);
        let mut c1 = DMatrix::<f64>::zeros(nb, nb);
        for (&x, &w) in pts.iter().zip(&wts) {
            let val: Vec<f64> = (0..nb).map(|a| lagrange(&nodes, a, x)).collect();
            let der: Vec<f64> = (0..nb).map(|a| lagrange_deriv(&nodes, a, x)).collect();
            for a in 0..nb {
                for b in 0..nb {
                    m1[(a, b)] += w * val[a] * val[b];
                    s1[(a, b)] += w * der[a] * der[b];
                    c1[(a, b)] += w * val[a] * der[b];
                }
            }
        }
        let loc = nb * nb;
        let mut mass = DMatrix::zeros(loc, loc);
        let mut stiff = DMatrix::zeros(loc, loc);
        let mut conv_x = DMatrix::zeros(loc, loc);
        let mut conv_y = DMatrix::zeros(loc, loc);
        for tb in 0..nb {
            for ta in 0..nb {
                let r = tb * nb + ta;
                for sb in 0..nb {
                    for sa in 0..nb {
                        let c = sb * nb + sa;
                        mass[(r, c)] = h * h * m1[(ta, sa)] * m1[(tb, sb)];
                        stiff[(r, c)] = s1[(ta, sa)] * m1[(tb, sb)] + m1[(ta, sa)] * s1[(tb, sb)];
                        conv_x[(r, c)] = h * c1[(ta, sa)] * m1[(tb, sb)];
                        conv_y[(r, c)] = h * m1[(ta, sa)] * c1[(tb, sb)];
                    }
                }
            }
        }
        Self { mass, stiff, conv_x, conv_y }
    }
}

fn lagrange(nodes: &[f64], a: usize, x: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(b, _)| b != a)
        .map(|(_, &xb)| (x - xb) / (nodes[a] - xb))
        .product()
}

fn lagrange_deriv(nodes: &[f64], a: usize, x: f64) -> f64 {
    let mut total = 0.0;
    for (c, &xc) in nodes.iter().enumerate() {
        if c == a {
            continue;
        }
        let mut term = 1.0 / (nodes[a] - xc);
        for (b, &xb) in nodes.iter().enumerate() {
            if b != a && b != c {
                term *= (x - xb) / (nodes[a] - xb);
            }
        }
        total += term;
    }
    total
}

/// Gauss-Legendre rule with `n` points on `[0, 1]`.
fn gauss_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (t, w): (Vec<f64>, Vec<f64>) = match n {
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (0.6f64).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let r = 2.0 / 7.0 * (1.2f64).sqrt();
            let (a, b) = ((3.0 / 7.0 - r).sqrt(), (3.0 / 7.0 + r).sqrt());
            let s = 30f64.sqrt();
            let (wa, wb) = ((18.0 + s) / 36.0, (18.0 - s) / 36.0);
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        _ => unreachable!("degree is validated to 1..=3"),
    };
    (t.iter().map(|x| 0.5 * (x + 1.0)).collect(), w.iter().map(|x| 0.5 * x).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn domain() -> ParameterDomain {
        ParameterDomain::new(vec![-2.5, -std::f64::consts::FRAC_PI_4], vec![0.0, std::f64::consts::FRAC_PI_4]).unwrap()
    }

    fn small(degree: usize) -> GalerkinCd {
        GalerkinCd::new(CdConfig { cells: 12, degree, ..CdConfig::default() }, &ParameterDomain::new(vec![-1.0, -0.7], vec![0.0, 0.7]).unwrap())
            .unwrap()
    }

    #[test]
    fn sawtooth_breakpoints() {
        let g = BoundaryData::SawTooth;
        assert_eq!(g.eval(0.0), 0.0);
        assert_eq!(g.eval(0.5), 0.5);
        assert!((g.eval(0.525) + 0.475).abs() < 1e-12);
        assert!(g.eval(1.0).abs() < 1e-15);
    }

    #[test]
    fn mass_integrates_area_for_all_degrees() {
        for k in 1..=3 {
            let fem = small(k);
            let ones = vec![1.0; fem.len()];
            assert!((fem.mass().bilinear(&ones, &ones) - 1.0).abs() < 1e-12);
            // gradients of constants vanish
            let s = &fem.forms().operators[0];
            assert!(s.matvec(&ones).iter().all(|v| v.abs() < 1e-11));
        }
    }

    #[test]
    fn convection_of_linear_field() {
        // int d/dx (x) * 1 = 1 over the unit square
        for k in 1..=3 {
            let fem = small(k);
            let x: Vec<f64> = (0..fem.len()).map(|g| fem.node(g).0).collect();
            let ones = vec![1.0; fem.len()];
            assert!((fem.forms().operators[1].bilinear(&ones, &x) - 1.0).abs() < 1e-12);
            assert!(fem.forms().operators[2].bilinear(&ones, &x).abs() < 1e-12);
        }
    }

    #[test]
    fn solution_matches_boundary_data() {
        let fem = small(2);
        let u = fem.solve(&[-0.5, 0.3]).unwrap();
        for g in 0..fem.len() {
            if fem.is_boundary(g) {
                assert_eq!(u[g], fem.lifting()[g]);
            }
        }
    }

    #[test]
    fn peclet_guard() {
        let err = GalerkinCd::new(CdConfig { cells: 4, ..CdConfig::default() }, &domain());
        assert!(matches!(err, Err(Error::Config(_))));
        assert!(GalerkinCd::new(CdConfig::default(), &domain()).is_ok());
    }
}
