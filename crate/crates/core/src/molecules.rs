//! Reproducing-formula constants, the Calderon split, molecule and tent-atom
//! validators, and the large-time tail estimates.
//!
//! The reproducing identity resolves `f` in the range of `L` as
//!
//! `f = c_tail * integral_0^1 (t^m L)^{N+2} e^{-2 t^m L} f dt/t
//!    + sum_{j=0}^{N+1} c_j L^j e^{-2L} f`.
//!
//! The correction coefficients come from unrolling the integration-by-parts
//! recursion for `I_j(lam) = integral_1^infty (t^m lam)^j e^{-2 t^m lam} dt/t`:
//!
//! `I_{j+1}(lam) = (1/(2m)) lam^j e^{-2 lam} + (j/2) I_j(lam)`,
//!
//! which gives `c_tail = m 2^{N+2} / (N+1)!` and `c_j = 2^j / j!` for every
//! `j` (independent of `N` and `m`). Every emitted constant set is certified
//! by the scalar residual `max |Phi(lam) - 1|` on a spectral grid; constants
//! are rejected, never trusted, when the certificate fails.

use std::sync::Arc;

use serde::Serialize;

use crate::calculus::{log_integrate, TimeGrid};
use crate::error::{Error, Result};
use crate::operator::{Scaling, SpectralOperator};
use crate::space::{annuli, ball_members, Ball, Space};
use crate::squarefn::{default_t_min, evolve_coeffs, Field, SquareGrids, SquareRange, TentField};

/// Certificate tolerance for `max |Phi - 1|`.
pub const PHI_RESIDUAL_TOL: f64 = 1e-6;
/// Grid ratio used by the certificate quadrature.
pub const CERT_GRID_RATIO: f64 = 1.0005;
/// Molecule inequalities pass up to this relative slack.
pub const MARGIN_TOL: f64 = 1e-9;

/// Certified coefficients of the reproducing formula.
#[derive(Debug, Clone, Serialize)]
pub struct ReproducingConstants {
    /// Number of cancellative moments `N`.
    pub n_mol: usize,
    pub m: f64,
    /// Coefficient of the `integral_0^1` term.
    pub c_tail: f64,
    /// `c_0 .. c_{N+1}`, coefficients of `L^j e^{-2L}`.
    pub coeffs: Vec<f64>,
    /// Certified `max |Phi(lam) - 1|` over the certification grid.
    pub residual: f64,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Certification grid: log-spaced `lam in [0.1, 50]` plus the endpoints of
/// interest, optionally extended by an operator spectrum.
pub fn certification_lambdas(extra: &[f64]) -> Vec<f64> {
    let mut lams: Vec<f64> = (0..=60)
        .map(|i| 0.1 * (500.0f64.ln() * i as f64 / 60.0).exp())
        .collect();
    lams.push(0.0);
    lams.extend(extra.iter().copied().filter(|l| l.is_finite()));
    lams.sort_by(|a, b| a.partial_cmp(b).unwrap());
    lams.dedup();
    lams
}

/// Evaluates `Phi(lam)` for the given constants by quadrature of the local
/// term plus the closed correction sum.
pub fn phi_value(consts: &ReproducingConstants, lam: f64, grid: &TimeGrid) -> f64 {
    let n_pow = (consts.n_mol + 2) as i32;
    let m = consts.m;
    let tail = if lam > 0.0 {
        consts.c_tail
            * log_integrate(
                |t| {
                    let s = t.powf(m) * lam;
                    s.powi(n_pow) * (-2.0 * s).exp()
                },
                grid,
            )
    } else {
        0.0
    };
    let correction: f64 = consts
        .coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| c * lam.powi(j as i32) * (-2.0 * lam).exp())
        .sum();
    tail + correction
}

fn certificate_grid(consts: &ReproducingConstants, lam_max: f64) -> Result<TimeGrid> {
    // truncation: (t_min^m lam_max)^{N+2} / (m (N+2)) below 1e-12
    let m = consts.m;
    let n2 = (consts.n_mol + 2) as f64;
    let target = (m * n2 * 1e-12).powf(1.0 / n2) / lam_max.max(1.0);
    let t_min = target.powf(1.0 / m).min(0.5);
    TimeGrid::new(t_min, 1.0, CERT_GRID_RATIO)
}

/// Worst `|Phi - 1|` over the given spectral points.
pub fn certify_residual(consts: &ReproducingConstants, lambdas: &[f64]) -> Result<f64> {
    let lam_max = lambdas.iter().cloned().fold(1.0f64, f64::max);
    let grid = certificate_grid(consts, lam_max)?;
    Ok(lambdas
        .iter()
        .map(|&lam| (phi_value(consts, lam, &grid) - 1.0).abs())
        .fold(0.0, f64::max))
}

/// Derives and certifies the reproducing constants for `(N, m)`.
pub fn reproducing_constants(n_mol: usize, m: f64) -> Result<ReproducingConstants> {
    assert!(n_mol >= 1, "the reproducing formula needs N >= 1");
    if m < 2.0 {
        return Err(Error::InvalidOrder(m));
    }
    let c_tail = m * 2f64.powi(n_mol as i32 + 2) / factorial(n_mol + 1);
    let coeffs: Vec<f64> = (0..=n_mol + 1).map(|j| 2f64.powi(j as i32) / factorial(j)).collect();
    let mut consts = ReproducingConstants { n_mol, m, c_tail, coeffs, residual: f64::INFINITY };
    let residual = certify_residual(&consts, &certification_lambdas(&[]))?;
    if residual > PHI_RESIDUAL_TOL {
        return Err(Error::ConstantsRejected { residual, tol: PHI_RESIDUAL_TOL });
    }
    consts.residual = residual;
    Ok(consts)
}

/// `pi_1 u = c_tail * integral_0^1 (t^m L)^{N+1} e^{-t^m L} u(., t) dt/t`
/// for a tent field living on a local grid.
pub fn pi1_apply(op: &SpectralOperator, u: &TentField, consts: &ReproducingConstants) -> Field {
    let p = op.len();
    let w = u.grid().weight();
    let n_pow = consts.n_mol as i32 + 1;
    let mut acc = vec![0.0; p];
    for (node, &t) in u.grid().nodes().iter().enumerate() {
        let coeffs = op.coefficients(u.slice(node));
        let s_base = t.powf(consts.m);
        let evolved: Vec<f64> = coeffs
            .iter()
            .zip(op.eigenvalues())
            .map(|(c, &l)| {
                let s = s_base * l;
                c * s.powi(n_pow) * (-s).exp()
            })
            .collect();
        let vals = op.synthesize(&evolved);
        for x in 0..p {
            acc[x] += w * vals[x];
        }
    }
    for v in &mut acc {
        *v *= consts.c_tail;
    }
    Field::new(acc, Arc::clone(op.space())).expect("length preserved")
}

/// Builds `b = c_tail * integral_0^1 t^{m(N+1)} L e^{-t^m L} u(., t) dt/t`
/// and its chain `[b, Lb, ..., L^N b]`; the last entry equals `pi_1 u`.
pub fn tent_chain(op: &SpectralOperator, u: &TentField, consts: &ReproducingConstants) -> Vec<Field> {
    let p = op.len();
    let w = u.grid().weight();
    let m = consts.m;
    let mn1 = m * (consts.n_mol as f64 + 1.0);
    let mut b_coeffs = vec![0.0; p];
    for (node, &t) in u.grid().nodes().iter().enumerate() {
        let coeffs = op.coefficients(u.slice(node));
        let s_base = t.powf(m);
        let t_pow = t.powf(mn1);
        for (acc, (c, &l)) in b_coeffs.iter_mut().zip(coeffs.iter().zip(op.eigenvalues())) {
            *acc += w * c * t_pow * l * (-s_base * l).exp();
        }
    }
    for v in &mut b_coeffs {
        *v *= consts.c_tail;
    }
    (0..=consts.n_mol)
        .map(|j| {
            let powered: Vec<f64> = b_coeffs
                .iter()
                .zip(op.eigenvalues())
                .map(|(c, &l)| c * l.powi(j as i32))
                .collect();
            Field::new(op.synthesize(&powered), Arc::clone(op.space())).expect("length preserved")
        })
        .collect()
}

/// `pi_2 f = sum_{j=0}^{N+1} c_j L^j e^{-2L} f`.
pub fn pi2_apply(op: &SpectralOperator, f: &Field, consts: &ReproducingConstants) -> Field {
    let vals = crate::calculus::apply_function(
        op,
        |l| {
            consts
                .coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * l.powi(j as i32) * (-2.0 * l).exp())
                .sum::<f64>()
        },
        f.values(),
    );
    Field::new(vals, Arc::clone(op.space())).expect("length preserved")
}

/// Result of the Calderon split `f = pi_1 u + pi_2 f`.
#[derive(Debug, Clone)]
pub struct SplitReport {
    pub pi1: Field,
    pub pi2: Field,
    /// `||f - pi_1 u - pi_2 f||_2 / ||f||_2` on the projected field.
    pub residual: f64,
    /// Relative `L^2` mass removed by the range projection.
    pub kernel_mass: f64,
    /// Set when the input carried a kernel component above `1e-10`.
    pub flagged: bool,
}

/// Splits `f` (projected onto the range of `L`) as `pi_1 u + pi_2 f` with
/// `u(., t) = t^m L e^{-t^m L} f` on a `[t_min, 1]` grid of the given ratio.
pub fn calderon_split(
    op: &SpectralOperator,
    f: &Field,
    consts: &ReproducingConstants,
    ratio: f64,
) -> Result<SplitReport> {
    let p = op.len();
    let coeffs = op.coefficients(f.values());
    let mut projected = coeffs.clone();
    let mut removed = 0.0;
    for (c, &l) in projected.iter_mut().zip(op.eigenvalues()) {
        if l <= op.gap_tol() {
            removed += *c * *c;
            *c = 0.0;
        }
    }
    let total: f64 = coeffs.iter().map(|c| c * c).sum();
    let kernel_mass = if total > 0.0 { (removed / total).sqrt() } else { 0.0 };
    let flagged = kernel_mass > 1e-10;
    let f_range = Field::new(op.synthesize(&projected), Arc::clone(op.space()))?;

    let norm = f_range.norm2();
    if norm == 0.0 {
        return Ok(SplitReport {
            pi1: Field::zero(Arc::clone(op.space())),
            pi2: Field::zero(Arc::clone(op.space())),
            residual: 0.0,
            kernel_mass,
            flagged,
        });
    }

    let grid = TimeGrid::new(default_t_min(op, Scaling::OrderM), 1.0, ratio)?;
    let slices: Vec<Vec<f64>> = grid
        .nodes()
        .iter()
        .map(|&t| evolve_coeffs(op, &projected, t, 1, Scaling::OrderM))
        .collect();
    let u = TentField::new(slices, grid, Arc::clone(op.space()), None)?;
    let pi1 = pi1_apply(op, &u, consts);
    let pi2 = pi2_apply(op, &f_range, consts);

    let mut defect = 0.0;
    for x in 0..p {
        let d = f_range.values()[x] - pi1.values()[x] - pi2.values()[x];
        defect += d * d * op.space().mass(x);
    }
    Ok(SplitReport { pi1, pi2, residual: defect.sqrt() / norm, kernel_mass, flagged })
}

/// Tent-atom validation: support in `B x (0, r_B)` and
/// `(integral_0^{r_B} ||u||_2^2 dt/t)^{1/2} <= mu(B)^{-1/2}`.
#[derive(Debug, Clone, Serialize)]
pub struct TentAtomReport {
    pub pass: bool,
    /// First offending `(node, point, value)`, when support fails.
    pub support_violation: Option<(usize, usize, f64)>,
    pub norm: f64,
    pub norm_bound: f64,
    /// `norm_bound - norm`.
    pub margin: f64,
}

pub fn validate_tent_atom(space: &Space, u: &TentField, ball: Ball) -> TentAtomReport {
    let members = ball_members(space, ball);
    let mut inside = vec![false; space.len()];
    for &x in &members {
        inside[x] = true;
    }
    let scale = u
        .grid()
        .nodes()
        .iter()
        .enumerate()
        .flat_map(|(node, _)| u.slice(node).iter().map(|v| v.abs()))
        .fold(0.0f64, f64::max);
    let floor = 1e-14 * scale;

    let mut support_violation = None;
    let mut norm_sq = 0.0;
    'outer: for (node, &t) in u.grid().nodes().iter().enumerate() {
        let slice = u.slice(node);
        let in_time = t < ball.radius;
        for (x, &v) in slice.iter().enumerate() {
            if (!in_time || !inside[x]) && v.abs() > floor {
                support_violation = Some((node, x, v));
                break 'outer;
            }
        }
        if in_time {
            let sq: f64 = slice.iter().enumerate().map(|(x, v)| v * v * space.mass(x)).sum();
            norm_sq += sq * u.grid().weight();
        }
    }
    let norm = norm_sq.sqrt();
    let norm_bound = space.ball_mass(ball).powf(-0.5);
    let margin = norm_bound - norm;
    TentAtomReport {
        pass: support_violation.is_none() && margin >= -1e-8 * norm_bound,
        support_violation,
        norm,
        norm_bound,
        margin,
    }
}

/// Constant tent profile on `B x (0, r_B)` scaled to exactly saturate the
/// tent-atom norm bound.
pub fn saturating_tent_atom(space: &Arc<Space>, ball: Ball, grid: &TimeGrid) -> Result<TentField> {
    let members = ball_members(space, ball);
    let mu_b = space.ball_mass(ball);
    let w_total: f64 = grid.nodes().iter().filter(|&&t| t < ball.radius).count() as f64 * grid.weight();
    if w_total == 0.0 {
        return Err(Error::BadTimeGrid { t_min: grid.t_min(), t_max: ball.radius });
    }
    let gamma = 1.0 / (mu_b * w_total.sqrt());
    let slices: Vec<Vec<f64>> = grid
        .nodes()
        .iter()
        .map(|&t| {
            let mut slice = vec![0.0; space.len()];
            if t < ball.radius {
                for &x in &members {
                    slice[x] = gamma;
                }
            }
            slice
        })
        .collect();
    TentField::new(slices, grid.clone(), Arc::clone(space), Some(ball))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MoleculeKind {
    Noncancellative,
    Cancellative,
}

/// Candidate `N`-molecule associated with a ball.
#[derive(Debug, Clone)]
pub struct Molecule {
    pub values: Field,
    pub ball: Ball,
    pub n_mol: usize,
    pub kind: MoleculeKind,
    /// `[b, Lb, ..., L^N b]` for the cancellative kind.
    pub chain: Option<Vec<Field>>,
}

impl Molecule {
    /// The saturating noncancellative atom `1_B / mu(B)`: its `L^2` norm is
    /// exactly `mu(B)^{-1/2}` and it vanishes outside `B`.
    pub fn indicator(space: &Arc<Space>, ball: Ball, n_mol: usize) -> Result<Molecule> {
        let mu_b = space.ball_mass(ball);
        let mut values = vec![0.0; space.len()];
        for x in ball_members(space, ball) {
            values[x] = 1.0 / mu_b;
        }
        Ok(Molecule {
            values: Field::new(values, Arc::clone(space))?,
            ball,
            n_mol,
            kind: MoleculeKind::Noncancellative,
            chain: None,
        })
    }

    /// Rescales the candidate (and its chain) by `1/s`.
    pub fn scaled_down(&self, s: f64) -> Molecule {
        Molecule {
            values: self.values.scaled(1.0 / s),
            ball: self.ball,
            n_mol: self.n_mol,
            kind: self.kind,
            chain: self.chain.as_ref().map(|ch| ch.iter().map(|f| f.scaled(1.0 / s)).collect()),
        }
    }
}

/// One evaluated molecule inequality.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MarginRow {
    /// Chain index, `None` for the size bound on `a` itself.
    pub j: Option<usize>,
    pub k: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MoleculeReport {
    pub pass: bool,
    /// Smallest scaling `s` such that the candidate divided by `s` passes
    /// every inequality (the largest `lhs/rhs` over all rows).
    pub scaling_factor: f64,
    pub rows: Vec<MarginRow>,
    /// Which radius branch of the definition applied.
    pub branch: String,
    /// Relative defect of the supplied chain links, cancellative only.
    pub chain_defect: Option<f64>,
}

fn masked_norm2(space: &Space, values: &[f64], set: &[usize]) -> f64 {
    set.iter().map(|&x| values[x] * values[x] * space.mass(x)).sum::<f64>().sqrt()
}

/// Checks every size (and, for cancellative candidates, chain) inequality of
/// the molecule definition, reporting per-`(j,k)` margins and the smallest
/// rescaling that would make a failing candidate pass.
pub fn validate_molecule(op: &SpectralOperator, mol: &Molecule) -> Result<MoleculeReport> {
    let space = op.space();
    let r = mol.ball.radius;
    let branch = match mol.kind {
        MoleculeKind::Noncancellative => {
            if r < 1.0 {
                return Err(Error::MoleculeDefinition(format!(
                    "noncancellative molecules need r_B >= 1, got {r}"
                )));
            }
            "noncancellative (r_B >= 1)".to_string()
        }
        MoleculeKind::Cancellative => {
            if r > 2.0 {
                return Err(Error::MoleculeDefinition(format!(
                    "cancellative molecules need r_B <= 2, got {r}"
                )));
            }
            "cancellative (r_B <= 2)".to_string()
        }
    };

    let mut chain_defect = None;
    if mol.kind == MoleculeKind::Cancellative {
        let chain = mol
            .chain
            .as_ref()
            .ok_or_else(|| Error::MoleculeDefinition("cancellative molecule without chain".into()))?;
        if chain.len() != mol.n_mol + 1 {
            return Err(Error::MoleculeDefinition(format!(
                "chain must hold b..L^N b ({} entries), got {}",
                mol.n_mol + 1,
                chain.len()
            )));
        }
        // verify the chain links and a = L^N b spectrally
        let mut defect = 0.0f64;
        for j in 0..mol.n_mol {
            let next = crate::calculus::apply_function(op, |l| l, chain[j].values());
            let scale = chain[j + 1].norm2().max(1e-300);
            let mut err = 0.0;
            for (x, (a, b)) in next.iter().zip(chain[j + 1].values()).enumerate() {
                err += (a - b) * (a - b) * space.mass(x);
            }
            defect = defect.max(err.sqrt() / scale);
        }
        let mut err = 0.0;
        for x in 0..space.len() {
            let d = mol.values.values()[x] - chain[mol.n_mol].values()[x];
            err += d * d * space.mass(x);
        }
        defect = defect.max(err.sqrt() / mol.values.norm2().max(1e-300));
        if defect > 1e-6 {
            return Err(Error::MoleculeDefinition(format!(
                "chain is inconsistent with a = L^N b (defect {defect:.3e})"
            )));
        }
        chain_defect = Some(defect);
    }

    let diam = space.diameter();
    let k_end = if diam <= r { 1 } else { (diam / r).log2().ceil() as u32 + 2 };
    let mut rows = Vec::new();
    for k in 0..=k_end {
        let (annulus, _) = annuli(space, mol.ball, k);
        if annulus.is_empty() {
            continue;
        }
        let rhs_base = 2f64.powi(-(k as i32)) * space.ball_mass(mol.ball.scaled(2f64.powi(k as i32))).powf(-0.5);
        let lhs = masked_norm2(space, mol.values.values(), &annulus);
        rows.push(MarginRow { j: None, k, lhs, rhs: rhs_base, ratio: lhs / rhs_base });
        if let Some(chain) = &mol.chain {
            let rm = r.powf(op.order());
            let rhs_chain = r.powf(op.order() * mol.n_mol as f64) * rhs_base;
            for (j, link) in chain.iter().enumerate().take(mol.n_mol + 1) {
                let lhs = rm.powi(j as i32) * masked_norm2(space, link.values(), &annulus);
                rows.push(MarginRow { j: Some(j), k, lhs, rhs: rhs_chain, ratio: lhs / rhs_chain });
            }
        }
    }
    let scaling_factor = rows.iter().map(|r| r.ratio).fold(0.0f64, f64::max);
    Ok(MoleculeReport {
        pass: scaling_factor <= 1.0 + MARGIN_TOL,
        scaling_factor,
        rows,
        branch,
        chain_defect,
    })
}

/// A partition cell together with its covering unit ball.
#[derive(Debug, Clone)]
pub struct PartitionCell {
    pub members: Vec<usize>,
    pub ball: Ball,
}

/// Axis-aligned half-open cells of side at most one covering a grid space,
/// each verified to lie inside a closed ball of radius one centered at a
/// member point.
pub fn unit_partition(space: &Arc<Space>) -> Result<Vec<PartitionCell>> {
    let desc = space.generator().ok_or(Error::NonGridSpace)?;
    let dims = desc.dims as usize;
    let h = desc.spacing();
    // worst member-to-center distance is (sqrt(d)/2) (side + h)
    let side = (2.0 / (dims as f64).sqrt() - h).min(1.0).max(h * 0.999);
    let origin = -desc.extent / 2.0;

    let mut cells: std::collections::BTreeMap<Vec<i64>, Vec<usize>> = Default::default();
    for x in 0..space.len() {
        let key: Vec<i64> = space.point(x).iter().map(|c| ((c - origin) / side).floor() as i64).collect();
        cells.entry(key).or_default().push(x);
    }

    let mut out = Vec::new();
    for (idx, (_, members)) in cells.into_iter().enumerate() {
        // center: member closest to the cell centroid
        let centroid: Vec<f64> = (0..dims)
            .map(|d| members.iter().map(|&x| space.point(x)[d]).sum::<f64>() / members.len() as f64)
            .collect();
        let center = *members
            .iter()
            .min_by(|&&a, &&b| {
                let da: f64 = space.point(a).iter().zip(&centroid).map(|(p, c)| (p - c) * (p - c)).sum();
                let db: f64 = space.point(b).iter().zip(&centroid).map(|(p, c)| (p - c) * (p - c)).sum();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        let ball = Ball::new(center, 1.0);
        let worst = members.iter().map(|&x| space.distance(center, x)).fold(0.0f64, f64::max);
        if worst > 1.0 {
            return Err(Error::CellNotInUnitBall { cell: idx, worst });
        }
        out.push(PartitionCell { members, ball });
    }
    Ok(out)
}

/// Decomposes `pi_2 f` over a unit-ball partition: for each cell `Q` and
/// each `j <= N+1`, the piece `c_j L^j e^{-2L}(1_Q f)` is normalized into a
/// noncancellative molecule on `B_Q` with its scaling as the coefficient, so
/// the coefficient-weighted sum reassembles `pi_2 f` exactly.
pub fn noncancellative_atoms(
    op: &SpectralOperator,
    f: &Field,
    partition: &[PartitionCell],
    consts: &ReproducingConstants,
) -> Result<Vec<(Molecule, f64)>> {
    let mut out = Vec::new();
    for cell in partition {
        let piece = f.masked(&cell.members);
        if piece.values().iter().all(|&v| v == 0.0) {
            continue;
        }
        for (j, &cj) in consts.coeffs.iter().enumerate() {
            let g = crate::calculus::apply_function(op, |l| cj * l.powi(j as i32) * (-2.0 * l).exp(), piece.values());
            let g = Field::new(g, Arc::clone(op.space()))?;
            let candidate = Molecule {
                values: g,
                ball: cell.ball,
                n_mol: consts.n_mol,
                kind: MoleculeKind::Noncancellative,
                chain: None,
            };
            let report = validate_molecule(op, &candidate)?;
            let s = report.scaling_factor;
            if s == 0.0 {
                continue;
            }
            out.push((candidate.scaled_down(s), s));
        }
    }
    Ok(out)
}

/// One annulus row of the tail report; `est2` is defined for `k >= 1`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailRow {
    pub k: u32,
    pub est1_lhs: f64,
    pub est1_rhs: f64,
    pub est2_lhs: f64,
    pub est2_rhs: f64,
    /// Contribution of the near piece `1_{C_k^*(B)} a` to estimate 1.
    pub est1_near: f64,
    /// Contribution of the far piece `1_{M \ C_k^*(B)} a` to estimate 1.
    pub est1_far: f64,
    /// Contribution of `1_{2^k B} a` to estimate 2.
    pub est2_near: f64,
    /// Contribution of `1_{M \ 2^k B} a` to estimate 2.
    pub est2_far: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
    pub sup_ratio1: f64,
    pub sup_ratio2: f64,
    /// `|| S_inf a ||_1`.
    pub s_inf_l1: f64,
}

fn tail_integral_norm(
    op: &SpectralOperator,
    coeffs: &[f64],
    set: &[usize],
    grid: &TimeGrid,
    t_lo: f64,
) -> f64 {
    let space = op.space();
    let mut acc = 0.0;
    for &t in grid.nodes().iter().filter(|&&t| t >= t_lo) {
        let u = evolve_coeffs(op, coeffs, t, 1, Scaling::OrderM);
        let sq: f64 = set.iter().map(|&x| u[x] * u[x] * space.mass(x)).sum();
        acc += sq * grid.weight();
    }
    acc.sqrt()
}

/// Verifies the two large-time estimates
/// `(integral_1^infty ||1_{C_k(B)} t^m L e^{-t^m L} a||_2^2 dt/t)^{1/2}`
/// and
/// `(integral_{2^{k-1}}^infty ||1_{2^{k-1}B} t^m L e^{-t^m L} a||_2^2 dt/t)^{1/2}`
/// against `2^{-k} mu(2^k B)^{-1/2}`, splitting `a` into its near piece on
/// the fattened annulus and the far remainder, and reports `||S_inf a||_1`.
pub fn molecule_tail_check(op: &SpectralOperator, mol: &Molecule, grids: &SquareGrids) -> Result<TailReport> {
    if !op.gapped() {
        return Err(Error::GaplessOperator(op.lambda0()));
    }
    let report = validate_molecule(op, mol)?;
    if !report.pass {
        return Err(Error::MoleculeDefinition(format!(
            "tail checks need a validated molecule; scaling factor {:.3e}",
            report.scaling_factor
        )));
    }

    let s_inf_l1 =
        crate::squarefn::square_function(op, &mol.values, grids, SquareRange::Tail).norm1();
    if mol.kind == MoleculeKind::Cancellative {
        return Ok(TailReport { rows: Vec::new(), sup_ratio1: 0.0, sup_ratio2: 0.0, s_inf_l1 });
    }

    let space = op.space();
    let diam = space.diameter();
    let r = mol.ball.radius;
    let k_end = if diam <= r { 1 } else { (diam / r).log2().ceil() as u32 + 1 };
    let tail = &grids.tail;

    let mut rows = Vec::new();
    let mut sup_ratio1 = 0.0f64;
    let mut sup_ratio2 = 0.0f64;
    let full = op.coefficients(mol.values.values());
    for k in 0..=k_end {
        let (annulus, fattened) = annuli(space, mol.ball, k);
        if annulus.is_empty() {
            continue;
        }
        let rhs = 2f64.powi(-(k as i32)) * space.ball_mass(mol.ball.scaled(2f64.powi(k as i32))).powf(-0.5);

        let near = op.coefficients(mol.values.masked(&fattened).values());
        let far: Vec<f64> = full.iter().zip(&near).map(|(a, b)| a - b).collect();
        let est1_lhs = tail_integral_norm(op, &full, &annulus, tail, 1.0);
        let est1_near = tail_integral_norm(op, &near, &annulus, tail, 1.0);
        let est1_far = tail_integral_norm(op, &far, &annulus, tail, 1.0);
        sup_ratio1 = sup_ratio1.max(est1_lhs / rhs);

        let (mut est2_lhs, mut est2_near, mut est2_far) = (0.0, 0.0, 0.0);
        if k >= 1 {
            let half_ball = ball_members(space, mol.ball.scaled(2f64.powi(k as i32 - 1)));
            let grown = ball_members(space, mol.ball.scaled(2f64.powi(k as i32)));
            let near2 = op.coefficients(mol.values.masked(&grown).values());
            let far2: Vec<f64> = full.iter().zip(&near2).map(|(a, b)| a - b).collect();
            let t_lo = 2f64.powi(k as i32 - 1);
            // the tail grid may stop short of t_lo; the integrand there is
            // exponentially negligible by the gap decay, so the row reads 0
            est2_lhs = tail_integral_norm(op, &full, &half_ball, tail, t_lo);
            est2_near = tail_integral_norm(op, &near2, &half_ball, tail, t_lo);
            est2_far = tail_integral_norm(op, &far2, &half_ball, tail, t_lo);
            sup_ratio2 = sup_ratio2.max(est2_lhs / rhs);
        }
        rows.push(TailRow {
            k,
            est1_lhs,
            est1_rhs: rhs,
            est2_lhs,
            est2_rhs: rhs,
            est1_near,
            est1_far,
            est2_near,
            est2_far,
        });
    }
    Ok(TailReport { rows, sup_ratio1, sup_ratio2, s_inf_l1 })
}
