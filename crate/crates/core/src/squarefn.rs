//! Conical square functions `S`, `S_loc`, `S_inf`, Hardy norms, and the
//! vertical spectral identity.
//!
//! Two semigroup scalings coexist: the square functions use `t^m L e^{-t^m L}`
//! while the vertical identity uses `t L e^{-t L}`. Every quantity here is
//! keyed by the [`Scaling`] it was computed with.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::calculus::TimeGrid;
use crate::error::{Error, Result};
use crate::operator::{Scaling, SpectralOperator};
use crate::space::{Ball, Space};

/// Truncation budget: the omitted `(0, t_min]` piece of each `dt/t` integral
/// is kept below this.
pub const SMALL_T_BUDGET: f64 = 1e-10;
/// Tail truncation: `e^{-2 lambda0 t_max^m}` is kept below this on gapped
/// operators.
pub const TAIL_BUDGET: f64 = 1e-12;

/// Scalar field on a [`Space`].
#[derive(Debug, Clone)]
pub struct Field {
    values: Vec<f64>,
    space: Arc<Space>,
}

impl Field {
    pub fn new(values: Vec<f64>, space: Arc<Space>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::LengthMismatch { expected: space.len(), found: values.len() });
        }
        Ok(Field { values, space })
    }

    pub fn zero(space: Arc<Space>) -> Self {
        Field { values: vec![0.0; space.len()], space }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(sum |f|^p mu)^{1/p}`.
    pub fn norm_p(&self, p: f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(x, v)| v.abs().powf(p) * self.space.mass(x))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    pub fn norm1(&self) -> f64 {
        self.values.iter().enumerate().map(|(x, v)| v.abs() * self.space.mass(x)).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.norm2_sq().sqrt()
    }

    pub fn norm2_sq(&self) -> f64 {
        self.values.iter().enumerate().map(|(x, v)| v * v * self.space.mass(x)).sum()
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        Field { values: self.values.iter().map(|v| alpha * v).collect(), space: Arc::clone(&self.space) }
    }

    /// Restriction `1_E f`.
    pub fn masked(&self, set: &[usize]) -> Field {
        let mut values = vec![0.0; self.values.len()];
        for &x in set {
            values[x] = self.values[x];
        }
        Field { values, space: Arc::clone(&self.space) }
    }
}

/// Function on `points x time-grid`, the carrier of tent atoms.
#[derive(Debug, Clone)]
pub struct TentField {
    /// One slice per grid node.
    values: Vec<Vec<f64>>,
    grid: TimeGrid,
    space: Arc<Space>,
    /// Support descriptor `(ball, r_B)` when atom-flagged.
    support: Option<Ball>,
}

impl TentField {
    pub fn new(values: Vec<Vec<f64>>, grid: TimeGrid, space: Arc<Space>, support: Option<Ball>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), found: values.len() });
        }
        for slice in &values {
            if slice.len() != space.len() {
                return Err(Error::LengthMismatch { expected: space.len(), found: slice.len() });
            }
        }
        Ok(TentField { values, grid, space, support })
    }

    pub fn slice(&self, node: usize) -> &[f64] {
        &self.values[node]
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn support(&self) -> Option<Ball> {
        self.support
    }
}

/// `(s L)^j e^{-s L} f` with `s = t^m` (order-m) or `s = t` (order-one).
pub fn evolve(op: &SpectralOperator, f: &Field, t: f64, j: u32, scaling: Scaling) -> Field {
    assert!(t > 0.0, "evolution time must be positive");
    let coeffs = op.coefficients(f.values());
    Field { values: evolve_coeffs(op, &coeffs, t, j, scaling), space: Arc::clone(f.space()) }
}

/// Same as [`evolve`] from precomputed eigen-coefficients.
pub(crate) fn evolve_coeffs(op: &SpectralOperator, coeffs: &[f64], t: f64, j: u32, scaling: Scaling) -> Vec<f64> {
    let s = match scaling {
        Scaling::OrderM => t.powf(op.order()),
        Scaling::OrderOne => t,
    };
    let evolved: Vec<f64> = coeffs
        .iter()
        .zip(op.eigenvalues())
        .map(|(c, &l)| {
            let x = s * l;
            c * x.powi(j as i32) * (-x).exp()
        })
        .collect();
    op.synthesize(&evolved)
}

/// The local/tail pair of quadrature grids split at `t = 1`; the global
/// square function integrates over their disjoint union, which makes
/// `S^2 = S_loc^2 + S_inf^2` exact on the grid.
#[derive(Debug, Clone)]
pub struct SquareGrids {
    pub local: TimeGrid,
    pub tail: TimeGrid,
}

impl SquareGrids {
    pub fn new(local: TimeGrid, tail: TimeGrid) -> Self {
        SquareGrids { local, tail }
    }
}

/// Smallest time so the omitted `(0, t_min]` part of
/// `integral (t^ord lam_max)^2 dt/t` stays below [`SMALL_T_BUDGET`].
pub fn default_t_min(op: &SpectralOperator, scaling: Scaling) -> f64 {
    let ord = match scaling {
        Scaling::OrderM => op.order(),
        Scaling::OrderOne => 1.0,
    };
    let lam_max = op.max_eigenvalue();
    if lam_max <= 0.0 {
        return 1e-4;
    }
    let target = (2.0 * ord * SMALL_T_BUDGET).sqrt() / lam_max;
    target.powf(1.0 / ord).min(0.5)
}

/// Largest time: on gapped operators `e^{-2 lambda0 t_max^ord}` falls below
/// [`TAIL_BUDGET`]; otherwise ten times the slowest positive mode.
pub fn default_t_max(op: &SpectralOperator, scaling: Scaling) -> f64 {
    let ord = match scaling {
        Scaling::OrderM => op.order(),
        Scaling::OrderOne => 1.0,
    };
    let t_max = if op.gapped() {
        ((-TAIL_BUDGET.ln()) / (2.0 * op.lambda0())).powf(1.0 / ord)
    } else {
        match op.min_positive_eigenvalue() {
            Some(l) => 10.0 * (1.0 / l).powf(1.0 / ord),
            None => 10.0,
        }
    };
    t_max.max(2.0)
}

/// Default grid pair for the order-m square functions.
pub fn default_grids(op: &SpectralOperator, ratio: f64) -> Result<SquareGrids> {
    let t_min = default_t_min(op, Scaling::OrderM);
    let t_max = default_t_max(op, Scaling::OrderM);
    Ok(SquareGrids { local: TimeGrid::new(t_min, 1.0, ratio)?, tail: TimeGrid::new(1.0, t_max, ratio)? })
}

/// Which `t` range the conical square function integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SquareRange {
    Global,
    Local,
    Tail,
}

/// Conical square function of the chosen variant:
/// `Sf(x)^2 = integral 1/mu(B(x,t)) * sum_{y in B(x,t)} |u(y,t)|^2 mu(y) dt/t`
/// with `u = t^m L e^{-t^m L} f`.
pub fn square_function(op: &SpectralOperator, f: &Field, grids: &SquareGrids, range: SquareRange) -> Field {
    let coeffs = op.coefficients(f.values());
    let space = f.space();
    let p = space.len();
    let mut acc = vec![0.0; p];

    let mut add_grid = |grid: &TimeGrid| {
        let w = grid.weight();
        for &t in grid.nodes() {
            let u = evolve_coeffs(op, &coeffs, t, 1, Scaling::OrderM);
            for (x, slot) in acc.iter_mut().enumerate() {
                let mut ball_mass = 0.0;
                let mut energy = 0.0;
                for (y, &uy) in u.iter().enumerate() {
                    if space.distance(x, y) <= t {
                        let mu = space.mass(y);
                        ball_mass += mu;
                        energy += uy * uy * mu;
                    }
                }
                *slot += w * energy / ball_mass;
            }
        }
    };
    match range {
        SquareRange::Local => add_grid(&grids.local),
        SquareRange::Tail => add_grid(&grids.tail),
        SquareRange::Global => {
            add_grid(&grids.local);
            add_grid(&grids.tail);
        }
    }
    Field { values: acc.into_iter().map(f64::sqrt).collect(), space: Arc::clone(space) }
}

/// The pair of Hardy norms and their quotient.
#[derive(Debug, Clone, Copy)]
pub struct HardyNorms {
    /// `|| S f ||_1`.
    pub global: f64,
    /// `|| S_loc f ||_1 + || f ||_1`.
    pub local: f64,
    /// `global / local`.
    pub ratio: f64,
}

/// `|| S f ||_1` and `|| S_loc f ||_1 + || f ||_1` on the same grid pair.
/// The global value comes from the exact grid identity
/// `S^2 = S_loc^2 + S_inf^2`, so the local and tail integrals are each
/// evaluated once.
pub fn hardy_norms(op: &SpectralOperator, f: &Field, grids: &SquareGrids) -> HardyNorms {
    let sloc = square_function(op, f, grids, SquareRange::Local);
    let stail = square_function(op, f, grids, SquareRange::Tail);
    let global = sloc
        .values()
        .iter()
        .zip(stail.values())
        .enumerate()
        .map(|(x, (a, b))| (a * a + b * b).sqrt() * f.space().mass(x))
        .sum();
    let local = sloc.norm1() + f.norm1();
    HardyNorms { global, local, ratio: if local > 0.0 { global / local } else { 0.0 } }
}

/// Report of the order-one vertical identity
/// `1/4 ||f||_2^2 = local energy + sum_i (lambda_i/2 + 1/4) e^{-2 lambda_i} <phi_i,f>^2`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityReport {
    /// `|1/4 ||f||^2 - local_energy - spectral_term|`.
    pub residual: f64,
    /// `integral_0^1 || t L e^{-tL} f ||_2^2 dt/t` by quadrature.
    pub local_energy: f64,
    /// The eigenvalue sum.
    pub spectral_term: f64,
    pub norm2_sq: f64,
}

/// Evaluates the vertical identity with order-one scaling on `[t_min, 1]`.
pub fn spectral_identity_residual(op: &SpectralOperator, f: &Field, ratio: f64) -> Result<IdentityReport> {
    let t_min = default_t_min(op, Scaling::OrderOne);
    let grid = TimeGrid::new(t_min, 1.0, ratio)?;
    let coeffs = op.coefficients(f.values());

    let mut local_energy = 0.0;
    for &t in grid.nodes() {
        let u = evolve_coeffs(op, &coeffs, t, 1, Scaling::OrderOne);
        let sq: f64 = u.iter().enumerate().map(|(x, v)| v * v * op.space().mass(x)).sum();
        local_energy += sq * grid.weight();
    }

    let spectral_term: f64 = coeffs
        .iter()
        .zip(op.eigenvalues())
        .map(|(c, &l)| (l / 2.0 + 0.25) * (-2.0 * l).exp() * c * c)
        .sum();
    let norm2_sq = f.norm2_sq();
    let residual = (0.25 * norm2_sq - local_energy - spectral_term).abs();
    Ok(IdentityReport { residual, local_energy, spectral_term, norm2_sq })
}

/// `c(lambda0) = (1/4 - (lambda0/2 + 1/4) e^{-2 lambda0})^{1/2}`, the lower
/// bound for the local vertical norm on gapped operators.
pub fn lower_bound_constant(lambda0: f64) -> f64 {
    (0.25 - (lambda0 / 2.0 + 0.25) * (-2.0 * lambda0).exp()).max(0.0).sqrt()
}

/// Unit-`L^2` field with standard normal eigen-coefficients, the canonical
/// seeded test field.
pub fn random_unit_field(op: &SpectralOperator, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = (0..op.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    let values = op.synthesize(&coeffs.iter().map(|c| c / norm).collect::<Vec<_>>());
    Field { values, space: Arc::clone(op.space()) }
}
