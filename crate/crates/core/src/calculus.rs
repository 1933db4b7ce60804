//! Functional calculus `F(L)`, operator kernels, restricted `L^p -> L^2`
//! norms and `dt/t` quadrature.
//!
//! Integrals against `dt/t` are evaluated with the log-midpoint rule on a
//! geometric grid: nodes `t_i = t_min * q^{i + 1/2}` with weight `ln q` per
//! node. The requested ratio is adjusted so the cells tile `[t_min, t_max]`
//! exactly, which makes `sum of weights == ln(t_max / t_min)` an identity.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operator::SpectralOperator;
use crate::space::Space;

/// Geometric time grid for `dt/t` integrals.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    t_min: f64,
    t_max: f64,
    ratio: f64,
    ln_ratio: f64,
    nodes: Vec<f64>,
}

impl TimeGrid {
    /// Builds the grid with the largest ratio `<= ratio_target` whose cells
    /// tile `[t_min, t_max]` exactly.
    pub fn new(t_min: f64, t_max: f64, ratio_target: f64) -> Result<Self> {
        if t_min.is_nan() || t_max.is_nan() || t_min <= 0.0 || t_max <= t_min {
            return Err(Error::BadTimeGrid { t_min, t_max });
        }
        if ratio_target.is_nan() || ratio_target <= 1.0 {
            return Err(Error::BadGridRatio(ratio_target));
        }
        let span = (t_max / t_min).ln();
        let cells = (span / ratio_target.ln()).ceil().max(1.0) as usize;
        let ln_ratio = span / cells as f64;
        let nodes = (0..cells)
            .map(|i| t_min * (ln_ratio * (i as f64 + 0.5)).exp())
            .collect();
        Ok(TimeGrid { t_min, t_max, ratio: ln_ratio.exp(), ln_ratio, nodes })
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Effective geometric ratio after tiling adjustment.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Quadrature weight per node (`ln` of the effective ratio).
    pub fn weight(&self) -> f64 {
        self.ln_ratio
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Same bounds with the cell width halved in log space.
    pub fn refined(&self) -> TimeGrid {
        TimeGrid::new(self.t_min, self.t_max, (self.ln_ratio / 2.0).exp()).expect("refinement of a valid grid")
    }
}

/// `integral g(t) dt/t` over the grid by the log-midpoint rule.
pub fn log_integrate(g: impl Fn(f64) -> f64, grid: &TimeGrid) -> f64 {
    grid.nodes.iter().map(|&t| g(t)).sum::<f64>() * grid.ln_ratio
}

/// `F(L) f` through the spectral theorem.
pub fn apply_function(op: &SpectralOperator, func: impl Fn(f64) -> f64, f: &[f64]) -> Vec<f64> {
    let mut coeffs = op.coefficients(f);
    for (c, &l) in coeffs.iter_mut().zip(op.eigenvalues()) {
        *c *= func(l);
    }
    op.synthesize(&coeffs)
}

/// Integral kernel of `F(L)`; see [`SpectralOperator::kernel`].
pub fn operator_kernel(op: &SpectralOperator, func: impl Fn(f64) -> f64) -> DMatrix<f64> {
    op.kernel(func)
}

/// Lebesgue exponent of the domain side of a restricted norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainNorm {
    L1,
    L2,
}

impl DomainNorm {
    pub fn from_p(p: f64) -> Result<Self> {
        if p == 1.0 {
            Ok(DomainNorm::L1)
        } else if p == 2.0 {
            Ok(DomainNorm::L2)
        } else {
            Err(Error::UnsupportedNorm(p))
        }
    }

    /// The volume exponent `1/p - 1/2` of the GGE bound.
    pub fn volume_exponent(&self) -> f64 {
        match self {
            DomainNorm::L1 => 0.5,
            DomainNorm::L2 => 0.0,
        }
    }
}

/// `|| 1_{E_out} F(L) 1_{E_in} ||_{p -> 2}` from a precomputed kernel.
///
/// For `p = 1` this is the largest weighted column norm; for `p = 2` the
/// largest singular value of `sqrt(mu(x)) K(x,y) sqrt(mu(y))` restricted to
/// the given rows and columns. Empty sets give 0 by convention.
pub fn restricted_norm_kernel(
    space: &Space,
    kernel: &DMatrix<f64>,
    e_out: &[usize],
    e_in: &[usize],
    p: DomainNorm,
) -> f64 {
    if e_out.is_empty() || e_in.is_empty() {
        return 0.0;
    }
    match p {
        DomainNorm::L1 => {
            let mut best = 0.0f64;
            for &y in e_in {
                let mut sum = 0.0;
                for &x in e_out {
                    let k = kernel[(x, y)];
                    sum += k * k * space.mass(x);
                }
                best = best.max(sum.sqrt());
            }
            best
        }
        DomainNorm::L2 => {
            let mut sub = DMatrix::zeros(e_out.len(), e_in.len());
            for (r, &x) in e_out.iter().enumerate() {
                let sx = space.mass(x).sqrt();
                for (c, &y) in e_in.iter().enumerate() {
                    sub[(r, c)] = sx * kernel[(x, y)] * space.mass(y).sqrt();
                }
            }
            largest_singular_value(&sub)
        }
    }
}

/// `|| 1_{E_out} F(L) 1_{E_in} ||_{p -> 2}`, materializing the kernel.
pub fn restricted_norm(
    op: &SpectralOperator,
    func: impl Fn(f64) -> f64,
    e_out: &[usize],
    e_in: &[usize],
    p: DomainNorm,
) -> f64 {
    let kernel = op.kernel(func);
    restricted_norm_kernel(op.space(), &kernel, e_out, e_in, p)
}

pub(crate) fn largest_singular_value(mat: &DMatrix<f64>) -> f64 {
    mat.clone().svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_operator, Boundary, OperatorKind, SpectralOperator};
    use crate::space::build_grid_space;
    use std::sync::Arc;

    fn one_point_op(lambda: f64, m: f64) -> SpectralOperator {
        let s = Arc::new(build_grid_space(1, 1.0, 1).unwrap());
        let a = DMatrix::from_element(1, 1, lambda);
        SpectralOperator::decompose(&a, s, m).unwrap()
    }

    fn schrodinger_op(extent: f64, count: usize, omega: f64) -> SpectralOperator {
        let s = Arc::new(build_grid_space(1, extent, count).unwrap());
        let v = crate::operator::harmonic_potential(&s, omega);
        let a = build_operator(&s, &OperatorKind::Schrodinger { potential: v }, Boundary::Dirichlet).unwrap();
        SpectralOperator::decompose(&a, s, 2.0).unwrap()
    }

    #[test]
    fn grid_weight_sum_is_log_span() {
        let g = TimeGrid::new(0.01, 7.3, 1.02).unwrap();
        let total = g.weight() * g.len() as f64;
        assert!((total - (7.3f64 / 0.01).ln()).abs() < 1e-12);
        // nodes strictly increasing
        for w in g.nodes().windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn constant_integrand_gives_log_ratio() {
        let g = TimeGrid::new(0.5, 8.0, 1.05).unwrap();
        let val = log_integrate(|_| 1.0, &g);
        assert!((val - (16.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn gamma_tail_integral() {
        // integral_0^infty s^2 e^{-2s} ds/s = Gamma(2)/4 = 1/4
        let g = TimeGrid::new(1e-8, 50.0, 1.01).unwrap();
        let val = log_integrate(|s| s * s * (-2.0 * s).exp(), &g);
        assert!((val - 0.25).abs() < 1e-6, "got {val}");
    }

    #[test]
    fn truncated_local_integral_matches_closed_form() {
        // integral_0^1 (t lam)^2 e^{-2 t lam} dt/t = 1/4 - (lam/2 + 1/4) e^{-2 lam}
        for lam in [0.3, 1.0, 2.0, 7.5] {
            let g = TimeGrid::new(1e-8, 1.0, 1.01).unwrap();
            let val = log_integrate(|t| (t * lam).powi(2) * (-2.0 * t * lam).exp(), &g);
            let want = 0.25 - (lam / 2.0 + 0.25) * (-2.0 * lam).exp();
            assert!((val - want).abs() < 1e-6, "lam={lam}: {val} vs {want}");
        }
    }

    #[test]
    fn refinement_changes_integral_below_tolerance() {
        let g = TimeGrid::new(1e-6, 30.0, 1.02).unwrap();
        let f = |s: f64| s * s * (-2.0 * s).exp();
        let coarse = log_integrate(f, &g);
        let fine = log_integrate(f, &g.refined());
        assert!((coarse - fine).abs() < 1e-6);
    }

    #[test]
    fn apply_identity_function_is_identity() {
        let op = schrodinger_op(8.0, 24, 1.0);
        let f: Vec<f64> = (0..24).map(|i| (i as f64 * 0.37).sin()).collect();
        let out = apply_function(&op, |_| 1.0, &f);
        for (a, b) in out.iter().zip(&f) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_semigroup_to_eigenvector() {
        let op = schrodinger_op(8.0, 24, 1.0);
        let i = 3;
        let phi: Vec<f64> = (0..24).map(|x| op.eigenvectors()[(x, i)]).collect();
        let t = 0.4;
        let out = apply_function(&op, |l| (-t * l).exp(), &phi);
        let factor = (-t * op.eigenvalues()[i]).exp();
        for (a, b) in out.iter().zip(&phi) {
            assert!((a - factor * b).abs() < 1e-10);
        }
    }

    #[test]
    fn apply_lambda_matches_matrix_action() {
        let s = Arc::new(build_grid_space(1, 8.0, 24).unwrap());
        let v = crate::operator::harmonic_potential(&s, 1.0);
        let a = build_operator(&s, &OperatorKind::Schrodinger { potential: v }, Boundary::Dirichlet).unwrap();
        let op = SpectralOperator::decompose(&a, s, 2.0).unwrap();
        let f: Vec<f64> = (0..24).map(|i| ((i * 7 + 1) as f64).sin()).collect();
        let via_spectral = apply_function(&op, |l| l, &f);
        let via_matrix = &a * nalgebra::DVector::from_column_slice(&f);
        let scale = via_matrix.iter().cloned().fold(0.0f64, |m, x| m.max(x.abs()));
        for (u, v) in via_spectral.iter().zip(via_matrix.iter()) {
            assert!((u - v).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn one_point_kernel_is_f_over_mass() {
        let op = one_point_op(1.7, 2.0);
        let k = operator_kernel(&op, |l| (-0.3 * l).exp());
        let mu = op.space().mass(0);
        assert!((k[(0, 0)] - (-0.3f64 * 1.7).exp() / mu).abs() < 1e-12);
    }

    #[test]
    fn kernel_symmetry_and_identity_reproduction() {
        let op = schrodinger_op(8.0, 24, 0.8);
        let k = operator_kernel(&op, |l| (-0.2 * l).exp());
        let mut defect = 0.0f64;
        for i in 0..24 {
            for j in 0..24 {
                defect = defect.max((k[(i, j)] - k[(j, i)]).abs());
            }
        }
        assert!(defect <= 1e-12 * k.amax());

        let id = operator_kernel(&op, |_| 1.0);
        let f: Vec<f64> = (0..24).map(|i| (i as f64 * 0.11).cos()).collect();
        for x in 0..24 {
            let mut val = 0.0;
            for y in 0..24 {
                val += id[(x, y)] * f[y] * op.space().mass(y);
            }
            assert!((val - f[x]).abs() < 1e-10);
        }
    }

    #[test]
    fn restricted_norm_full_sets_match_spectral_mapping() {
        let op = schrodinger_op(8.0, 32, 1.0);
        let all: Vec<usize> = (0..32).collect();
        let t = 0.25;
        let got = restricted_norm(&op, |l| (-t * l).exp(), &all, &all, DomainNorm::L2);
        let want = op.eigenvalues().iter().map(|l| (-t * l).exp()).fold(0.0f64, f64::max);
        assert!((got - want).abs() <= 1e-10, "{got} vs {want}");
    }

    #[test]
    fn one_point_l1_norm_is_abs_f() {
        let op = one_point_op(2.5, 2.0);
        let got = restricted_norm(&op, |l| (-l).exp(), &[0], &[0], DomainNorm::L1);
        assert!((got - (-2.5f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn disjoint_sets_of_diagonal_kernel_give_zero() {
        let s = Arc::new(build_grid_space(1, 2.0, 2).unwrap());
        let a = DMatrix::identity(2, 2) * 3.0;
        let op = SpectralOperator::decompose(&a, s, 2.0).unwrap();
        let got = restricted_norm(&op, |l| (-l).exp(), &[0], &[1], DomainNorm::L2);
        assert!(got.abs() < 1e-12);
    }

    #[test]
    fn restricted_norm_monotone_in_sets() {
        let op = schrodinger_op(8.0, 24, 1.0);
        let k = op.kernel(|l| (-0.1 * l).exp());
        let small: Vec<usize> = (8..12).collect();
        let large: Vec<usize> = (6..16).collect();
        let all: Vec<usize> = (0..24).collect();
        for p in [DomainNorm::L1, DomainNorm::L2] {
            let a = restricted_norm_kernel(op.space(), &k, &small, &small, p);
            let b = restricted_norm_kernel(op.space(), &k, &large, &small, p);
            let c = restricted_norm_kernel(op.space(), &k, &large, &large, p);
            let d = restricted_norm_kernel(op.space(), &k, &all, &all, p);
            assert!(a <= b + 1e-12 && b <= c + 1e-12 && c <= d + 1e-12);
        }
    }

    #[test]
    fn empty_sets_give_zero() {
        let op = schrodinger_op(4.0, 8, 1.0);
        assert_eq!(restricted_norm(&op, |l| l, &[], &[0], DomainNorm::L2), 0.0);
    }

    #[test]
    fn unsupported_exponent_rejected() {
        assert!(DomainNorm::from_p(1.5).is_err());
        assert!(DomainNorm::from_p(1.0).is_ok());
        assert!(DomainNorm::from_p(2.0).is_ok());
    }
}
