//! The theorem-verification suites. Each one builds its evidence from the
//! shared operator and returns a [`SuiteReport`] with pass flags, summary
//! numbers and CSV bodies.

use serde_json::json;

use crate::calculus::{TimeGrid, DomainNorm};
use crate::error::Result;
use crate::gge::{decayest_scan, gap_decay_fit, gge_fit, offdiag_default_times, offdiag_profiles};
use crate::molecules::{
    calderon_split, molecule_tail_check, noncancellative_atoms, pi2_apply, reproducing_constants,
    saturating_tent_atom, tent_chain, unit_partition, validate_molecule, validate_tent_atom,
    Molecule, MoleculeKind,
};
use crate::operator::{Scaling, SpectralOperator};
use crate::space::Ball;
use crate::squarefn::{
    default_t_min, hardy_norms, lower_bound_constant, random_unit_field, spectral_identity_residual,
    square_function, SquareRange,
};

use super::config::ExperimentConfig;
use super::report::{csv_body, fmt, SuiteReport};

/// Acceptance tolerances, pinned once.
pub const IDENTITY_RESIDUAL_TOL: f64 = 1e-6;
pub const LOWER_BOUND_TOL: f64 = 1e-6;
pub const SPLIT_RESIDUAL_TOL: f64 = 1e-4;
pub const REASSEMBLY_TOL: f64 = 1e-8;
pub const GGE_REGRESSION_TOL: f64 = 0.05;
pub const DECAY_RATE_FRACTION: f64 = 0.95;

/// Vertical identity plus the lower-bound inequality on seeded fields.
pub fn run_identity(cfg: &ExperimentConfig, op: &SpectralOperator) -> Result<SuiteReport> {
    let c_lower = lower_bound_constant(op.lambda0());
    let mut rows = Vec::new();
    let mut max_residual_rel = 0.0f64;
    let mut min_margin = f64::INFINITY;
    let mut pass = true;
    for i in 0..cfg.run.fields {
        let f = random_unit_field(op, cfg.run.seed + i as u64);
        let rep = spectral_identity_residual(op, &f, cfg.quadrature.identity_ratio)?;
        let fine = spectral_identity_residual(op, &f, cfg.quadrature.split_ratio)?;
        let lower_ratio = fine.local_energy.sqrt() / f.norm2();
        let residual_rel = rep.residual / rep.norm2_sq;
        max_residual_rel = max_residual_rel.max(residual_rel);
        min_margin = min_margin.min(lower_ratio - (c_lower - LOWER_BOUND_TOL));
        if residual_rel > IDENTITY_RESIDUAL_TOL || lower_ratio < c_lower - LOWER_BOUND_TOL {
            pass = false;
        }
        rows.push(vec![
            i.to_string(),
            fmt(rep.residual),
            fmt(rep.norm2_sq),
            fmt(lower_ratio),
            fmt(c_lower),
        ]);
    }
    let details = json!({
        "lambda0": op.lambda0(),
        "gapped": op.gapped(),
        "c_lower": c_lower,
        "fields": cfg.run.fields,
        "max_residual_rel": max_residual_rel,
        "min_lower_margin": min_margin,
        "identity_ratio": cfg.quadrature.identity_ratio,
    });
    Ok(SuiteReport::new("identity", pass, details)
        .with_csv("identity.csv", csv_body("field,residual,norm2_sq,lower_ratio,c_lambda0", &rows)))
}

/// Off-diagonal suite: GGE fit, the scalar decay-domination inequality and
/// the two annulus profiles.
pub fn run_gge(_cfg: &ExperimentConfig, op: &SpectralOperator) -> Result<SuiteReport> {
    let space = op.space();
    let desc = space.generator();
    let h = desc.map(|d| d.spacing()).unwrap_or_else(|| space.min_separation());
    let n = space.doubling_exponent();
    let center = space.len() / 2;

    // GGE_m(2,2) on the configured semigroup: fixed t, distances up to 4t
    let t_gge = 4.0 * h;
    let step = ((t_gge / (2.0 * h)).round() as usize).max(1);
    let samples: Vec<(usize, usize, f64)> = (0..9)
        .map(|j| (center, (center + j * step).min(space.len() - 1), t_gge))
        .collect();
    let gge_report = gge_fit(op, DomainNorm::L2, &samples);
    let c_fit = gge_report.fitted.unwrap_or(0.0);
    let gge_pass = c_fit > 0.0
        && gge_report.regression_residual.map(|r| r <= GGE_REGRESSION_TOL).unwrap_or(false);

    let decayest = decayest_scan(c_fit, c_fit / 2.0, n, op.order(), 100.0);

    let radius = (8.0 * h).max(1.0);
    let ball = Ball::new(center, radius);
    let k_max = (space.diameter() / radius).log2().floor().max(1.0) as u32;
    let times = offdiag_default_times(op, ball, k_max);
    let (rep1, rep2) = offdiag_profiles(op, ball, k_max, &times, DomainNorm::L2);

    let pass = gge_pass && decayest.holds && rep1.pass && rep2.pass;
    let details = json!({
        "n": n,
        "gge_c": gge_report.fitted,
        "gge_residual": gge_report.regression_residual,
        "gge_prefactor": gge_report.prefactor,
        "decayest": decayest,
        "annulus_ball_c": rep1.fitted,
        "annulus_ball_prefactor": rep1.prefactor,
        "complement_exponent": rep2.fitted,
        "complement_exponent_floor": n + 2.0 - crate::gge::SLOPE_TOL_POLY,
        "ball_radius": radius,
        "k_max": k_max,
    });
    let reports_json = serde_json::to_string_pretty(&json!({
        "gge": gge_report,
        "annulus_to_ball": rep1,
        "annulus_to_complement": rep2,
    }))
    .expect("fit reports serialize");
    Ok(SuiteReport::new("gge", pass, details)
        .with_csv("gge.csv", gge_report.to_csv())
        .with_csv("offdiag_ball.csv", rep1.to_csv())
        .with_csv("offdiag_complement.csv", rep2.to_csv())
        .with_csv("gge_reports.json", reports_json))
}

/// Exponential gap decay: rate fit on gapped operators, flag on gapless
/// ones (where the report is expected to fail).
pub fn run_decay(cfg: &ExperimentConfig, op: &SpectralOperator) -> Result<SuiteReport> {
    let p = space_len(op);
    let all: Vec<usize> = (0..p).collect();
    let left: Vec<usize> = (0..p / 2).collect();
    let right: Vec<usize> = (p / 2..p).collect();
    let sets = vec![(all.clone(), all), (left, right)];
    let times = decay_times(op);
    let report = gap_decay_fit(op, &sets, &times);

    let pass = if op.gapped() {
        report.pass
    } else {
        // the pass-criterion for a gapless configuration is the flag itself,
        // evidenced by the semigroup norm pinned at one
        let flagged = report.notes.iter().any(|n| n.contains("no spectral gap"));
        let semigroup_flat = report
            .rows
            .iter()
            .filter(|r| r.params[0] == -1.0)
            .all(|r| (r.lhs - 1.0).abs() <= 1e-9);
        !report.pass && flagged && semigroup_flat
    };
    let details = json!({
        "lambda0": op.lambda0(),
        "gapped": op.gapped(),
        "delta_fit": report.fitted,
        "delta_target": op.lambda0() / 2.0 * DECAY_RATE_FRACTION,
        "prefactor": report.prefactor,
        "notes": report.notes,
        "seed": cfg.run.seed,
    });
    Ok(SuiteReport::new("decay", pass, details).with_csv("decay.csv", report.to_csv()))
}

fn space_len(op: &SpectralOperator) -> usize {
    op.space().len()
}

/// Sample times with `t^m lambda0` spanning `[2, 20]`, where the rate
/// dominates and the norms stay well above the noise floor.
pub fn decay_times(op: &SpectralOperator) -> Vec<f64> {
    let m = op.order();
    let lambda0 = if op.gapped() { op.lambda0() } else { 1.0 };
    (0..12).map(|i| ((2.0 * 10f64.powf(i as f64 / 11.0)) / lambda0).powf(1.0 / m)).collect()
}

/// Reproducing constants, Calderon split, atom construction and validation,
/// and the large-time tail checks.
pub fn run_molecules(cfg: &ExperimentConfig, op: &SpectralOperator) -> Result<SuiteReport> {
    let mut pass = true;
    let mut notes: Vec<String> = Vec::new();

    // certified constants across the standard (N, m) panel
    let mut residuals = serde_json::Map::new();
    for n_mol in 1..=3usize {
        for m in [2.0, 4.0] {
            let consts = reproducing_constants(n_mol, m)?;
            residuals.insert(format!("N{n_mol}_m{m}"), json!(consts.residual));
        }
    }
    let n1m2 = reproducing_constants(1, 2.0)?;
    let n1m2_exact = n1m2.c_tail == 8.0 && n1m2.coeffs == vec![1.0, 2.0, 2.0];
    pass &= n1m2_exact;

    let consts = reproducing_constants(cfg.molecules.n_mol, op.order())?;
    let spectrum_residual =
        crate::molecules::certify_residual(&consts, &crate::molecules::certification_lambdas(op.eigenvalues()))?;
    pass &= spectrum_residual <= crate::molecules::PHI_RESIDUAL_TOL;

    // Calderon split on seeded fields
    let split_fields = cfg.run.fields.clamp(1, 5);
    let mut split_rows = Vec::new();
    let mut split_max = 0.0f64;
    for i in 0..split_fields {
        let f = random_unit_field(op, cfg.run.seed + i as u64);
        let rep = calderon_split(op, &f, &consts, cfg.quadrature.split_ratio)?;
        split_max = split_max.max(rep.residual);
        pass &= rep.residual <= SPLIT_RESIDUAL_TOL;
        split_rows.push(vec![i.to_string(), fmt(rep.residual), fmt(rep.kernel_mass)]);
    }

    // pi_1 of a saturating tent atom is cancellative up to a reported scaling
    let center = space_len(op) / 2;
    let tent_ball = Ball::new(center, 1.0);
    let tent_grid = TimeGrid::new(default_t_min(op, Scaling::OrderM), 1.0, cfg.quadrature.identity_ratio)?;
    let atom = saturating_tent_atom(op.space(), tent_ball, &tent_grid)?;
    let atom_report = validate_tent_atom(op.space(), &atom, tent_ball);
    pass &= atom_report.pass;
    let chain = tent_chain(op, &atom, &consts);
    let candidate = Molecule {
        values: chain[consts.n_mol].clone(),
        ball: tent_ball,
        n_mol: consts.n_mol,
        kind: MoleculeKind::Cancellative,
        chain: Some(chain),
    };
    let mol_report = validate_molecule(op, &candidate)?;
    let scaling = mol_report.scaling_factor;
    let scaled_pass = if scaling > 0.0 && scaling.is_finite() {
        validate_molecule(op, &candidate.scaled_down(scaling * (1.0 + 1e-12)))?.pass
    } else {
        false
    };
    pass &= scaled_pass;
    let margin_rows: Vec<Vec<String>> = mol_report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.j.map(|j| j.to_string()).unwrap_or_else(|| "-1".into()),
                r.k.to_string(),
                fmt(r.lhs),
                fmt(r.rhs),
                fmt(r.ratio),
            ]
        })
        .collect();

    // noncancellative atoms over the unit partition reassemble pi_2 f
    let f = random_unit_field(op, cfg.run.seed);
    let cells = unit_partition(op.space())?;
    let atoms = noncancellative_atoms(op, &f, &cells, &consts)?;
    let target = pi2_apply(op, &f, &consts);
    let mut sum = vec![0.0; space_len(op)];
    for (mol, coeff) in &atoms {
        for (acc, v) in sum.iter_mut().zip(mol.values.values()) {
            *acc += coeff * v;
        }
    }
    let mut err = 0.0;
    for (x, (s, t)) in sum.iter().zip(target.values()).enumerate() {
        err += (s - t) * (s - t) * op.space().mass(x);
    }
    let reassembly = err.sqrt() / target.norm2().max(1e-300);
    pass &= reassembly <= REASSEMBLY_TOL;

    // tail checks on the saturating indicator atom
    let mut tail_rows = Vec::new();
    let mut tail_details = json!(null);
    if op.gapped() {
        let grids = cfg.grids(op, cfg.quadrature.ratio)?;
        let indicator = Molecule::indicator(op.space(), Ball::new(center, 1.0), consts.n_mol)?;
        let tail = molecule_tail_check(op, &indicator, &grids)?;
        pass &= tail.sup_ratio1.is_finite() && tail.sup_ratio2.is_finite() && tail.s_inf_l1.is_finite();
        for r in &tail.rows {
            tail_rows.push(vec![
                r.k.to_string(),
                fmt(r.est1_lhs),
                fmt(r.est1_rhs),
                fmt(r.est2_lhs),
                fmt(r.est2_rhs),
            ]);
        }
        tail_details = json!({
            "sup_ratio1": tail.sup_ratio1,
            "sup_ratio2": tail.sup_ratio2,
            "s_inf_l1": tail.s_inf_l1,
        });
    } else {
        notes.push("tail checks skipped: operator has no spectral gap".into());
    }

    let details = json!({
        "certificate_residuals": residuals,
        "n1_m2_exact": n1m2_exact,
        "spectrum_residual": spectrum_residual,
        "split_max_residual": split_max,
        "tent_atom_margin": atom_report.margin,
        "pi1_scaling": scaling,
        "pi1_scaled_pass": scaled_pass,
        "atom_count": atoms.len(),
        "reassembly_residual": reassembly,
        "tail": tail_details,
        "notes": notes,
    });
    let report_json = serde_json::to_string_pretty(&json!({
        "constants": consts,
        "pi1_candidate": mol_report,
        "tail": tail_details,
    }))
    .expect("molecule reports serialize");
    Ok(SuiteReport::new("molecules", pass, details)
        .with_csv("split.csv", csv_body("field,residual,kernel_mass", &split_rows))
        .with_csv("molecules.csv", csv_body("j,k,lhs,rhs,ratio", &margin_rows))
        .with_csv("tail.csv", csv_body("k,est1_lhs,est1_rhs,est2_lhs,est2_rhs", &tail_rows))
        .with_csv("molecule_report.json", report_json))
}

/// Hardy-norm quotients over seeded fields, with a per-point profile of the
/// first field.
pub fn run_main_theorem(cfg: &ExperimentConfig, op: &SpectralOperator) -> Result<SuiteReport> {
    let grids = cfg.grids(op, cfg.quadrature.ratio)?;
    let mut rows = Vec::new();
    let mut ratio_max = 0.0f64;
    let mut pass = true;
    let mut profile_rows = Vec::new();
    for i in 0..cfg.run.fields {
        let f = random_unit_field(op, cfg.run.seed + i as u64);
        let norms = hardy_norms(op, &f, &grids);
        pass &= norms.ratio.is_finite() && norms.global.is_finite();
        ratio_max = ratio_max.max(norms.ratio);
        rows.push(vec![i.to_string(), fmt(norms.global), fmt(norms.local), fmt(norms.ratio)]);
        if i == 0 {
            let sloc = square_function(op, &f, &grids, SquareRange::Local);
            let stail = square_function(op, &f, &grids, SquareRange::Tail);
            for x in 0..space_len(op) {
                let a = sloc.values()[x];
                let b = stail.values()[x];
                profile_rows.push(vec![
                    x.to_string(),
                    fmt((a * a + b * b).sqrt()),
                    fmt(a),
                    fmt(b),
                ]);
            }
        }
    }
    let details = json!({
        "lambda0": op.lambda0(),
        "gapped": op.gapped(),
        "fields": cfg.run.fields,
        "ratio_max": ratio_max,
    });
    Ok(SuiteReport::new("main-theorem", pass, details)
        .with_csv("main.csv", csv_body("field,h1,h1_loc,ratio", &rows))
        .with_csv("squarefn.csv", csv_body("x_index,S,S_loc,S_tail", &profile_rows)))
}

/// Study of the gap's role: per shift `eps`, the gap, the lower-bound
/// constant, the fitted decay rate, and the worst Hardy-norm quotient.
pub fn run_gap_sweep(cfg: &ExperimentConfig, op: &SpectralOperator) -> Result<SuiteReport> {
    let p = space_len(op);
    let all: Vec<usize> = (0..p).collect();
    let mut rows = Vec::new();
    let mut detail_rows = Vec::new();
    let mut pass = true;
    for &eps in &cfg.sweep.shifts {
        let shifted = op.shifted(eps);
        let lambda0 = shifted.lambda0();
        let c_lower = lower_bound_constant(lambda0);
        let delta_fit = if shifted.gapped() {
            let report = gap_decay_fit(&shifted, &[(all.clone(), all.clone())], &decay_times(&shifted));
            report.fitted.unwrap_or(0.0)
        } else {
            0.0
        };
        let grids = cfg.grids(&shifted, cfg.quadrature.ratio)?;
        let mut ratio_max = 0.0f64;
        for i in 0..cfg.sweep.fields {
            let f = random_unit_field(&shifted, cfg.run.seed + i as u64);
            let norms = hardy_norms(&shifted, &f, &grids);
            ratio_max = ratio_max.max(norms.ratio);
            pass &= norms.ratio.is_finite();
        }
        rows.push(vec![fmt(eps), fmt(lambda0), fmt(c_lower), fmt(delta_fit), fmt(ratio_max)]);
        detail_rows.push(json!({
            "eps": eps,
            "lambda0": lambda0,
            "gapped": shifted.gapped(),
            "c_lower": c_lower,
            "delta_fit": delta_fit,
            "ratio_max": ratio_max,
        }));
    }
    let details = json!({ "rows": detail_rows, "fields": cfg.sweep.fields });
    Ok(SuiteReport::new("gap-sweep", pass, details)
        .with_csv("sweep.csv", csv_body("eps,lambda0,c_lower,delta_fit,ratio_max", &rows)))
}

/// Space artifact: the interchange JSON plus the doubling report.
pub fn space_document(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    let space = cfg.build_space()?;
    Ok(space.to_json())
}

/// Operator artifact: gap summary plus invariant residuals.
pub fn operator_document(op: &SpectralOperator, cached: bool) -> serde_json::Value {
    let space = op.space();
    let p = space.len();
    // worst weighted-orthonormality defect over a sampled Gram block
    let step = (p / 24).max(1);
    let mut ortho = 0.0f64;
    for i in (0..p).step_by(step) {
        for j in (0..p).step_by(step) {
            let mut dot = 0.0;
            for x in 0..p {
                dot += op.eigenvectors()[(x, i)] * op.eigenvectors()[(x, j)] * space.mass(x);
            }
            let want = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((dot - want).abs());
        }
    }
    json!({
        "schema_version": super::report::SCHEMA_VERSION,
        "points": p,
        "m": op.order(),
        "lambda0": op.lambda0(),
        "lambda_max": op.max_eigenvalue(),
        "gapped": op.gapped(),
        "gap_tol": op.gap_tol(),
        "orthonormality_defect": ortho,
        "eigendata_cached": cached,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::SpaceConfig;
    use crate::squarefn::Field;
    use std::sync::Arc;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            space: SpaceConfig { count: 24, extent: 12.0, ..Default::default() },
            run: crate::harness::config::RunConfig { fields: 3, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn identity_suite_passes_on_small_oscillator() {
        let cfg = small_cfg();
        let space = cfg.build_space().unwrap();
        let op = cfg.build_operator(&space).unwrap();
        let report = run_identity(&cfg, &op).unwrap();
        assert!(report.pass, "{}", report.details);
        assert_eq!(report.csv_files.len(), 1);
        // one row per field plus the header
        assert_eq!(report.csv_files[0].1.lines().count(), 1 + cfg.run.fields);
    }

    #[test]
    fn decay_suite_flags_gapless() {
        let mut cfg = small_cfg();
        cfg.operator.kind = "laplacian".into();
        cfg.operator.boundary = "periodic".into();
        let space = cfg.build_space().unwrap();
        let op = cfg.build_operator(&space).unwrap();
        assert!(!op.gapped());
        let report = run_decay(&cfg, &op).unwrap();
        assert!(report.pass, "gapless flag is the pass-criterion: {}", report.details);
        assert_eq!(report.details["gapped"], false);
    }

    #[test]
    fn one_point_identity_closed_forms() {
        // harness example: one-point space, identity suite, 1e-8 agreement
        let mut cfg = ExperimentConfig {
            space: SpaceConfig { dims: 1, extent: 1.0, count: 1 },
            ..Default::default()
        };
        cfg.operator.kind = "shift".into();
        cfg.operator.shift = 1.0;
        cfg.run.fields = 1;
        cfg.quadrature.identity_ratio = 1.001;
        cfg.quadrature.split_ratio = 1.001;
        let space = cfg.build_space().unwrap();
        let op = cfg.build_operator(&space).unwrap();
        let f = Field::new(vec![1.0], Arc::clone(op.space())).unwrap();
        let rep = spectral_identity_residual(&op, &f, cfg.quadrature.identity_ratio).unwrap();
        let lam = 1.0f64;
        let want = 0.25 - (lam / 2.0 + 0.25) * (-2.0 * lam).exp();
        assert!((rep.local_energy - want).abs() <= 1e-8, "{}", rep.local_energy);
        assert!(rep.residual <= 1e-8);
        let report = run_identity(&cfg, &op).unwrap();
        assert!(report.pass);
    }
}
