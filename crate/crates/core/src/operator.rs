//! Builders for non-negative self-adjoint operators on `L^2(mu)` and their
//! exact spectral decompositions.
//!
//! Matrices act on point-value vectors by plain matrix-vector product;
//! self-adjointness is with respect to the weighted inner product
//! `<f, g> = sum_x f(x) g(x) mu(x)`. The decomposition conjugates by
//! `diag(sqrt(mu))`, solves the plain symmetric eigenproblem, and
//! unconjugates the eigenvectors, avoiding a generalized eigenproblem.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::Space;

/// Relative tolerance for the weighted-symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues in `[-TOL_EIG * max|lambda|, 0)` are clamped to zero.
pub const TOL_EIG_REL: f64 = 1e-9;
/// Spectral gap threshold, relative to the largest eigenvalue.
pub const GAP_TOL_REL: f64 = 1e-10;

/// Operator families assembled by [`build_operator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OperatorKind {
    /// `c * I`.
    Shift { c: f64 },
    /// Second-difference Laplacian scaled by `1/h^2`.
    Laplacian,
    /// Laplacian plus a non-negative multiplication operator.
    Schrodinger { potential: Vec<f64> },
    /// `(-Delta_h)^{m_pow/2} + V`, assembled spectrally.
    Fractional { m_pow: u32, potential: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Dirichlet,
    Periodic,
}

/// Semigroup scaling used throughout: order-m (`t^m L`) or order-one (`t L`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scaling {
    OrderM,
    OrderOne,
}

/// The harmonic potential `omega^2 |x|^2` evaluated at grid points.
pub fn harmonic_potential(space: &Space, omega: f64) -> Vec<f64> {
    (0..space.len())
        .map(|i| omega * omega * space.point(i).iter().map(|c| c * c).sum::<f64>())
        .collect()
}

fn laplacian_matrix(space: &Space, boundary: Boundary) -> Result<DMatrix<f64>> {
    let desc = space.generator().ok_or(Error::NonGridSpace)?;
    let p = space.len();
    let h = desc.spacing();
    let inv_h2 = 1.0 / (h * h);
    let count = desc.count;
    let mut a = DMatrix::zeros(p, p);

    // subtracts the neighbor and adds to the diagonal
    fn couple(a: &mut DMatrix<f64>, w: f64, i: usize, j: usize) {
        a[(i, i)] += w;
        a[(i, j)] -= w;
    }
    match desc.dims {
        1 => {
            for i in 0..p {
                if i + 1 < p {
                    couple(&mut a, inv_h2, i, i + 1);
                    couple(&mut a, inv_h2, i + 1, i);
                } else if boundary == Boundary::Periodic && p > 1 {
                    couple(&mut a, inv_h2, i, 0);
                    couple(&mut a, inv_h2, 0, i);
                }
                if boundary == Boundary::Dirichlet {
                    // absorbed exterior neighbors keep the stencil 2/h^2 on the diagonal
                    if i == 0 {
                        a[(i, i)] += inv_h2;
                    }
                    if i + 1 == p {
                        a[(i, i)] += inv_h2;
                    }
                }
            }
        }
        _ => {
            let idx = |ix: usize, iy: usize| iy * count + ix;
            for iy in 0..count {
                for ix in 0..count {
                    let i = idx(ix, iy);
                    for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                        let nx = ix as i64 + dx;
                        let ny = iy as i64 + dy;
                        let inside = nx >= 0 && ny >= 0 && (nx as usize) < count && (ny as usize) < count;
                        if inside {
                            a[(i, i)] += inv_h2;
                            a[(i, idx(nx as usize, ny as usize))] -= inv_h2;
                        } else {
                            match boundary {
                                Boundary::Dirichlet => a[(i, i)] += inv_h2,
                                Boundary::Periodic => {
                                    let wx = nx.rem_euclid(count as i64) as usize;
                                    let wy = ny.rem_euclid(count as i64) as usize;
                                    a[(i, i)] += inv_h2;
                                    a[(i, idx(wx, wy))] -= inv_h2;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(a)
}

fn check_potential(v: &[f64], space: &Space) -> Result<()> {
    if v.len() != space.len() {
        return Err(Error::LengthMismatch { expected: space.len(), found: v.len() });
    }
    for (i, &val) in v.iter().enumerate() {
        if val < 0.0 {
            return Err(Error::NegativePotential { index: i, value: val });
        }
    }
    Ok(())
}

/// Assembles the matrix of the requested operator, self-adjoint with respect
/// to the weighted inner product of `space`.
pub fn build_operator(space: &Space, kind: &OperatorKind, boundary: Boundary) -> Result<DMatrix<f64>> {
    let p = space.len();
    match kind {
        OperatorKind::Shift { c } => Ok(DMatrix::identity(p, p) * *c),
        OperatorKind::Laplacian => laplacian_matrix(space, boundary),
        OperatorKind::Schrodinger { potential } => {
            check_potential(potential, space)?;
            let mut a = laplacian_matrix(space, boundary)?;
            for i in 0..p {
                a[(i, i)] += potential[i];
            }
            Ok(a)
        }
        OperatorKind::Fractional { m_pow, potential } => {
            if *m_pow < 2 || m_pow % 2 != 0 {
                return Err(Error::OddFractionalOrder(*m_pow));
            }
            check_potential(potential, space)?;
            let lap = laplacian_matrix(space, boundary)?;
            let eig = SpectralOperator::decompose(&lap, Arc::new(space.clone()), 2.0)?;
            let power = *m_pow as f64 / 2.0;
            // A = Phi diag(lambda^power) Phi^T D, then + diag(V)
            let powered: Vec<f64> = eig.eigenvalues().iter().map(|l| l.powf(power)).collect();
            let phi = eig.eigenvectors();
            let mut a = phi * DMatrix::from_diagonal(&DVector::from_vec(powered)) * phi.transpose();
            for j in 0..p {
                let mu = space.mass(j);
                for i in 0..p {
                    a[(i, j)] *= mu;
                }
            }
            for i in 0..p {
                a[(i, i)] += potential[i];
            }
            Ok(a)
        }
    }
}

/// Exact spectral decomposition of a non-negative self-adjoint operator.
///
/// Eigenvalues ascend; eigenvectors are orthonormal in the weighted inner
/// product. The value is immutable and shareable across threads; the kernel
/// cache is interior-mutable and safe for concurrent insert-or-read.
pub struct SpectralOperator {
    space: Arc<Space>,
    eigenvalues: Vec<f64>,
    /// Columns are the eigenvectors `phi_i`, weighted-orthonormal.
    eigenvectors: DMatrix<f64>,
    m: f64,
    gap_tol: f64,
    kernel_cache: KernelCache,
}

type KernelCache = Mutex<HashMap<(Scaling, u32, u64), Arc<DMatrix<f64>>>>;

impl std::fmt::Debug for SpectralOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralOperator")
            .field("points", &self.space.len())
            .field("lambda0", &self.lambda0())
            .field("m", &self.m)
            .finish()
    }
}

impl SpectralOperator {
    /// Decomposes `matrix` over `space` with semigroup order `m`.
    pub fn decompose(matrix: &DMatrix<f64>, space: Arc<Space>, m: f64) -> Result<Self> {
        if m < 2.0 {
            return Err(Error::InvalidOrder(m));
        }
        let p = space.len();
        assert_eq!(matrix.nrows(), p);
        assert_eq!(matrix.ncols(), p);

        // weighted-symmetry check: mu_i A_ij == mu_j A_ji
        let mut defect: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..p {
            for j in 0..i {
                let a = space.mass(i) * matrix[(i, j)];
                let b = space.mass(j) * matrix[(j, i)];
                defect = defect.max((a - b).abs());
                scale = scale.max(a.abs().max(b.abs()));
            }
        }
        for i in 0..p {
            scale = scale.max((space.mass(i) * matrix[(i, i)]).abs());
        }
        let tol = SYMMETRY_TOL * scale.max(1.0);
        if defect > tol {
            return Err(Error::Asymmetric { defect, tol });
        }

        // conjugate by diag(sqrt(mu)) and solve the plain symmetric problem
        let sqrt_mu: Vec<f64> = (0..p).map(|i| space.mass(i).sqrt()).collect();
        let mut conj = matrix.clone();
        for i in 0..p {
            for j in 0..p {
                conj[(i, j)] *= sqrt_mu[i] / sqrt_mu[j];
            }
        }
        let sym = (&conj + conj.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();

        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());

        let max_abs = eig.eigenvalues.iter().fold(0.0f64, |acc, l| acc.max(l.abs()));
        let tol_eig = TOL_EIG_REL * max_abs.max(1e-300);
        let mut eigenvalues = Vec::with_capacity(p);
        for &idx in &order {
            let l = eig.eigenvalues[idx];
            if l < -tol_eig {
                return Err(Error::NegativeEigenvalue { lambda: l, tol: tol_eig });
            }
            eigenvalues.push(l.max(0.0));
        }

        let mut eigenvectors = DMatrix::zeros(p, p);
        for (col, &idx) in order.iter().enumerate() {
            let v = eig.eigenvectors.column(idx);
            // unconjugate and fix the sign for determinism
            let pivot = (0..p).max_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).unwrap()).unwrap();
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            for x in 0..p {
                eigenvectors[(x, col)] = sign * v[x] / sqrt_mu[x];
            }
        }

        let max_eig = *eigenvalues.last().unwrap_or(&0.0);
        Ok(SpectralOperator {
            space,
            eigenvalues,
            eigenvectors,
            m,
            gap_tol: GAP_TOL_REL * max_eig,
            kernel_cache: Mutex::new(HashMap::new()),
        })
    }

    /// Rebuilds an operator from stored eigendata, re-checking ordering,
    /// non-negativity and sampled weighted orthonormality.
    pub fn from_eigendata(
        space: Arc<Space>,
        eigenvalues: Vec<f64>,
        eigenvectors: DMatrix<f64>,
        m: f64,
    ) -> Result<Self> {
        if m < 2.0 {
            return Err(Error::InvalidOrder(m));
        }
        let p = space.len();
        if eigenvalues.len() != p || eigenvectors.nrows() != p || eigenvectors.ncols() != p {
            return Err(Error::LengthMismatch { expected: p, found: eigenvalues.len() });
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("eigendata is not sorted ascending".into()));
        }
        if eigenvalues[0] < 0.0 {
            return Err(Error::NegativeEigenvalue { lambda: eigenvalues[0], tol: 0.0 });
        }
        let step = (p / 16).max(1);
        for i in (0..p).step_by(step) {
            for j in [i, (i + 1) % p] {
                let mut dot = 0.0;
                for x in 0..p {
                    dot += eigenvectors[(x, i)] * eigenvectors[(x, j)] * space.mass(x);
                }
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-8 {
                    return Err(Error::Config("eigendata fails weighted orthonormality".into()));
                }
            }
        }
        let max_eig = *eigenvalues.last().unwrap_or(&0.0);
        Ok(SpectralOperator {
            space,
            eigenvalues,
            eigenvectors,
            m,
            gap_tol: GAP_TOL_REL * max_eig,
            kernel_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn order(&self) -> f64 {
        self.m
    }

    /// `inf sigma(L)`.
    pub fn lambda0(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    /// Smallest eigenvalue above the gap threshold, if any.
    pub fn min_positive_eigenvalue(&self) -> Option<f64> {
        self.eigenvalues.iter().find(|&&l| l > self.gap_tol).copied()
    }

    pub fn gapped(&self) -> bool {
        self.lambda0() > self.gap_tol
    }

    pub fn gap_tol(&self) -> f64 {
        self.gap_tol
    }

    /// Eigen-coefficients `<phi_i, f>` in the weighted inner product.
    pub fn coefficients(&self, f: &[f64]) -> Vec<f64> {
        let p = self.len();
        assert_eq!(f.len(), p);
        let mut weighted = DVector::zeros(p);
        for x in 0..p {
            weighted[x] = f[x] * self.space.mass(x);
        }
        let out = self.eigenvectors.transpose() * weighted;
        out.iter().copied().collect()
    }

    /// Reassembles point values from eigen-coefficients.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let c = DVector::from_column_slice(coeffs);
        let out = &self.eigenvectors * c;
        out.iter().copied().collect()
    }

    /// Same eigenvectors, eigenvalues shifted by `eps >= 0` (i.e. `L + eps I`).
    pub fn shifted(&self, eps: f64) -> SpectralOperator {
        assert!(eps >= 0.0);
        let eigenvalues: Vec<f64> = self.eigenvalues.iter().map(|l| l + eps).collect();
        let max_eig = *eigenvalues.last().unwrap_or(&0.0);
        SpectralOperator {
            space: Arc::clone(&self.space),
            eigenvalues,
            eigenvectors: self.eigenvectors.clone(),
            m: self.m,
            gap_tol: GAP_TOL_REL * max_eig,
            kernel_cache: Mutex::new(HashMap::new()),
        }
    }

    /// Kernel of `(s L)^j e^{-s L}` with `s = t^m` or `s = t` depending on
    /// the scaling, cached per `(scaling, j, t)`.
    pub fn evolution_kernel(&self, t: f64, j: u32, scaling: Scaling) -> Arc<DMatrix<f64>> {
        let key = (scaling, j, t.to_bits());
        if let Some(k) = self.kernel_cache.lock().unwrap().get(&key) {
            return Arc::clone(k);
        }
        let s = match scaling {
            Scaling::OrderM => t.powf(self.m),
            Scaling::OrderOne => t,
        };
        let kernel = Arc::new(self.kernel(|l| {
            let x = s * l;
            x.powi(j as i32) * (-x).exp()
        }));
        self.kernel_cache.lock().unwrap().insert(key, Arc::clone(&kernel));
        kernel
    }

    /// Integral kernel `K(x,y) = sum_i F(lambda_i) phi_i(x) phi_i(y)`, so
    /// that `(F(L) f)(x) = sum_y K(x,y) f(y) mu(y)`.
    pub fn kernel(&self, func: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let vals: Vec<f64> = self.eigenvalues.iter().map(|&l| func(l)).collect();
        let scaled = &self.eigenvectors * DMatrix::from_diagonal(&DVector::from_vec(vals));
        scaled * self.eigenvectors.transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::build_grid_space;

    fn line(extent: f64, count: usize) -> Arc<Space> {
        Arc::new(build_grid_space(1, extent, count).unwrap())
    }

    #[test]
    fn shift_is_scaled_identity() {
        let s = line(4.0, 4);
        let a = build_operator(&s, &OperatorKind::Shift { c: 2.0 }, Boundary::Dirichlet).unwrap();
        assert_eq!(a, DMatrix::identity(4, 4) * 2.0);
    }

    #[test]
    fn dirichlet_laplacian_matches_closed_form_spectrum() {
        // eigenvalues of the (2,-1)/h^2 tridiagonal Toeplitz matrix:
        // (4/h^2) sin^2(j pi / (2 (P+1))), j = 1..P
        let p = 24;
        let s = line(6.0, p);
        let h = 6.0 / p as f64;
        let a = build_operator(&s, &OperatorKind::Laplacian, Boundary::Dirichlet).unwrap();
        let op = SpectralOperator::decompose(&a, s, 2.0).unwrap();
        let mut expected: Vec<f64> = (1..=p)
            .map(|j| (4.0 / (h * h)) * (std::f64::consts::PI * j as f64 / (2.0 * (p as f64 + 1.0))).sin().powi(2))
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in op.eigenvalues().iter().zip(&expected) {
            assert!((got - want).abs() <= 1e-8 * want.max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn dirichlet_laplacian_2d_spectrum_is_tensor_sum() {
        // 2-D eigenvalues are sums of the 1-D closed-form values
        let c = 6;
        let s = Arc::new(build_grid_space(2, 3.0, c).unwrap());
        let h = 0.5;
        let a = build_operator(&s, &OperatorKind::Laplacian, Boundary::Dirichlet).unwrap();
        let op = SpectralOperator::decompose(&a, s, 2.0).unwrap();
        let one_d: Vec<f64> = (1..=c)
            .map(|j| (4.0 / (h * h)) * (std::f64::consts::PI * j as f64 / (2.0 * (c as f64 + 1.0))).sin().powi(2))
            .collect();
        let mut expected: Vec<f64> = one_d
            .iter()
            .flat_map(|a| one_d.iter().map(move |b| a + b))
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in op.eigenvalues().iter().zip(&expected) {
            assert!((got - want).abs() <= 1e-8 * want.max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn schrodinger_is_laplacian_plus_diagonal() {
        let s = line(8.0, 16);
        let v = harmonic_potential(&s, 1.5);
        let lap = build_operator(&s, &OperatorKind::Laplacian, Boundary::Dirichlet).unwrap();
        let sch =
            build_operator(&s, &OperatorKind::Schrodinger { potential: v.clone() }, Boundary::Dirichlet).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let want = lap[(i, j)] + if i == j { v[i] } else { 0.0 };
                assert!((sch[(i, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn negative_potential_rejected() {
        let s = line(4.0, 4);
        let mut v = vec![0.0; 4];
        v[2] = -0.1;
        let err = build_operator(&s, &OperatorKind::Schrodinger { potential: v }, Boundary::Dirichlet);
        assert!(matches!(err, Err(Error::NegativePotential { index: 2, .. })));
    }

    #[test]
    fn fractional_requires_even_order() {
        let s = line(4.0, 4);
        let v = vec![0.0; 4];
        let err = build_operator(&s, &OperatorKind::Fractional { m_pow: 3, potential: v }, Boundary::Dirichlet);
        assert!(matches!(err, Err(Error::OddFractionalOrder(3))));
    }

    #[test]
    fn fractional_squares_the_spectrum() {
        let s = line(6.0, 12);
        let lap = build_operator(&s, &OperatorKind::Laplacian, Boundary::Dirichlet).unwrap();
        let base = SpectralOperator::decompose(&lap, s.clone(), 2.0).unwrap();
        let frac = build_operator(
            &s,
            &OperatorKind::Fractional { m_pow: 4, potential: vec![0.0; 12] },
            Boundary::Dirichlet,
        )
        .unwrap();
        let op = SpectralOperator::decompose(&frac, s, 4.0).unwrap();
        for (f, b) in op.eigenvalues().iter().zip(base.eigenvalues()) {
            assert!((f - b * b).abs() <= 1e-7 * (b * b).max(1.0), "{f} vs {}", b * b);
        }
    }

    #[test]
    fn decompose_diag_example() {
        let s = line(2.0, 2);
        // diag(1,3), but masses are 1.0 each only when extent == count
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]));
        let op = SpectralOperator::decompose(&a, s, 2.0).unwrap();
        assert!((op.eigenvalues()[0] - 1.0).abs() < 1e-12);
        assert!((op.eigenvalues()[1] - 3.0).abs() < 1e-12);
        assert!(op.gapped());
        assert!((op.lambda0() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn path_graph_laplacian_is_gapless() {
        let s = line(2.0, 2);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let op = SpectralOperator::decompose(&a, s, 2.0).unwrap();
        assert!((op.eigenvalues()[0]).abs() < 1e-12);
        assert!((op.eigenvalues()[1] - 2.0).abs() < 1e-12);
        assert!(!op.gapped());
    }

    #[test]
    fn orthonormality_and_reconstruction_on_schrodinger() {
        let s = line(16.0, 64);
        let v = harmonic_potential(&s, 1.0);
        let a = build_operator(&s, &OperatorKind::Schrodinger { potential: v }, Boundary::Dirichlet).unwrap();
        let op = SpectralOperator::decompose(&a, s.clone(), 2.0).unwrap();

        // Gram-matrix oracle in the weighted inner product
        let p = op.len();
        let mut worst = 0.0f64;
        for i in 0..p {
            for j in 0..p {
                let mut dot = 0.0;
                for x in 0..p {
                    dot += op.eigenvectors()[(x, i)] * op.eigenvectors()[(x, j)] * s.mass(x);
                }
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - want).abs());
            }
        }
        assert!(worst <= 1e-10, "orthonormality defect {worst}");

        // reconstruction: A phi_i = lambda_i phi_i
        for i in [0usize, p / 2, p - 1] {
            let phi: Vec<f64> = (0..p).map(|x| op.eigenvectors()[(x, i)]).collect();
            let av = &a * DVector::from_column_slice(&phi);
            let li = op.eigenvalues()[i];
            for x in 0..p {
                assert!(
                    (av[x] - li * phi[x]).abs() <= 1e-8 * li.max(1.0),
                    "eigenpair {i} fails at {x}"
                );
            }
        }
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let s = line(2.0, 2);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(SpectralOperator::decompose(&a, s, 2.0), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn very_negative_eigenvalue_rejected() {
        let s = line(2.0, 2);
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 3.0]));
        assert!(matches!(SpectralOperator::decompose(&a, s, 2.0), Err(Error::NegativeEigenvalue { .. })));
    }

    #[test]
    fn shift_covariance() {
        let s = line(8.0, 24);
        let v = harmonic_potential(&s, 0.7);
        let a = build_operator(&s, &OperatorKind::Schrodinger { potential: v }, Boundary::Dirichlet).unwrap();
        let base = SpectralOperator::decompose(&a, s.clone(), 2.0).unwrap();
        let c = 1.75;
        let shifted_mat = &a + DMatrix::identity(24, 24) * c;
        let shifted = SpectralOperator::decompose(&shifted_mat, s, 2.0).unwrap();
        for (l_s, l_b) in shifted.eigenvalues().iter().zip(base.eigenvalues()) {
            assert!((l_s - (l_b + c)).abs() <= 1e-8 * (l_b + c));
        }
        // eigenvectors agree up to sign
        for i in 0..24 {
            let mut dot = 0.0;
            for x in 0..24 {
                dot += shifted.eigenvectors()[(x, i)]
                    * base.eigenvectors()[(x, i)]
                    * shifted.space().mass(x);
            }
            assert!((dot.abs() - 1.0).abs() < 1e-8, "column {i} overlap {dot}");
        }
    }

    #[test]
    fn parseval_for_random_field() {
        let s = line(8.0, 32);
        let v = harmonic_potential(&s, 1.0);
        let a = build_operator(&s, &OperatorKind::Schrodinger { potential: v }, Boundary::Dirichlet).unwrap();
        let op = SpectralOperator::decompose(&a, s.clone(), 2.0).unwrap();
        // deterministic pseudo-random field
        let f: Vec<f64> = (0..32).map(|i| ((i * 2654435761usize) % 1000) as f64 / 500.0 - 1.0).collect();
        let coeffs = op.coefficients(&f);
        let sum_sq: f64 = coeffs.iter().map(|c| c * c).sum();
        let norm_sq: f64 = f.iter().enumerate().map(|(x, v)| v * v * s.mass(x)).sum();
        assert!((sum_sq - norm_sq).abs() <= 1e-10 * norm_sq);
    }
}
