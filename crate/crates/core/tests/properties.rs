//! Property tests for the structural invariants: annulus geometry,
//! homogeneity and linearity of the square-function pipeline, norm
//! monotonicity, Parseval, and quadrature identities.

use std::sync::{Arc, LazyLock};

use proptest::prelude::*;

use hardygap::calculus::{restricted_norm_kernel, DomainNorm, TimeGrid};
use hardygap::operator::{
    build_operator, harmonic_potential, Boundary, OperatorKind, Scaling, SpectralOperator,
};
use hardygap::space::{annuli, build_grid_space, complement, Ball, Space};
use hardygap::squarefn::{default_grids, evolve, square_function, Field, SquareRange};

static SPACE: LazyLock<Arc<Space>> = LazyLock::new(|| Arc::new(build_grid_space(1, 16.0, 32).unwrap()));

static OP: LazyLock<SpectralOperator> = LazyLock::new(|| {
    let s = Arc::clone(&SPACE);
    let v = harmonic_potential(&s, 1.0);
    let a = build_operator(&s, &OperatorKind::Schrodinger { potential: v }, Boundary::Dirichlet).unwrap();
    SpectralOperator::decompose(&a, s, 2.0).unwrap()
});

fn field_strategy() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-10.0f64..10.0, 32)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn annuli_are_disjoint_and_nested(center in 0usize..32, radius in 0.3f64..4.0) {
        let ball = Ball::new(center, radius);
        let mut seen = vec![false; SPACE.len()];
        for k in 0..10u32 {
            let (ck, cks) = annuli(&SPACE, ball, k);
            for &x in &ck {
                prop_assert!(!seen[x], "point {x} appears in two annuli");
                seen[x] = true;
                prop_assert!(cks.contains(&x));
            }
        }
        // dyadic shells exhaust the space once 2^k r_B passes the diameter
        prop_assert!(seen.iter().all(|&v| v));
    }

    #[test]
    fn annulus_separated_from_complement(center in 4usize..28, k in 2u32..5) {
        let ball = Ball::new(center, 0.6);
        let (ck, cks) = annuli(&SPACE, ball, k);
        let outside = complement(&SPACE, &cks);
        let sep = 2f64.powi(k as i32 - 2) * ball.radius;
        for &u in &ck {
            for &v in &outside {
                prop_assert!(SPACE.distance(u, v) >= sep - 1e-12);
            }
        }
    }

    #[test]
    fn parseval_holds(values in field_strategy()) {
        let f = Field::new(values, Arc::clone(&SPACE)).unwrap();
        let coeffs = OP.coefficients(f.values());
        let sum: f64 = coeffs.iter().map(|c| c * c).sum();
        prop_assert!((sum - f.norm2_sq()).abs() <= 1e-10 * f.norm2_sq().max(1e-12));
    }

    #[test]
    fn evolve_is_linear(a in field_strategy(), b in field_strategy(), t in 0.05f64..3.0) {
        let fa = Field::new(a.clone(), Arc::clone(&SPACE)).unwrap();
        let fb = Field::new(b.clone(), Arc::clone(&SPACE)).unwrap();
        let sum = Field::new(
            a.iter().zip(&b).map(|(x, y)| x + y).collect(),
            Arc::clone(&SPACE),
        ).unwrap();
        let ea = evolve(&OP, &fa, t, 1, Scaling::OrderM);
        let eb = evolve(&OP, &fb, t, 1, Scaling::OrderM);
        let es = evolve(&OP, &sum, t, 1, Scaling::OrderM);
        let scale = ea.values().iter().chain(eb.values()).fold(1.0f64, |m, v| m.max(v.abs()));
        for x in 0..SPACE.len() {
            prop_assert!((es.values()[x] - ea.values()[x] - eb.values()[x]).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn square_function_is_homogeneous(values in field_strategy(), alpha in -8.0f64..8.0) {
        let f = Field::new(values, Arc::clone(&SPACE)).unwrap();
        let grids = default_grids(&OP, 1.2).unwrap();
        let s = square_function(&OP, &f, &grids, SquareRange::Global);
        let s_scaled = square_function(&OP, &f.scaled(alpha), &grids, SquareRange::Global);
        let scale = s.values().iter().fold(1e-30f64, |m, v| m.max(*v));
        for x in 0..SPACE.len() {
            prop_assert!(
                (s_scaled.values()[x] - alpha.abs() * s.values()[x]).abs() <= 1e-10 * scale * alpha.abs().max(1.0)
            );
        }
    }

    #[test]
    fn pythagoras_splits_the_square_function(values in field_strategy()) {
        let f = Field::new(values, Arc::clone(&SPACE)).unwrap();
        let grids = default_grids(&OP, 1.15).unwrap();
        let s = square_function(&OP, &f, &grids, SquareRange::Global);
        let sloc = square_function(&OP, &f, &grids, SquareRange::Local);
        let stail = square_function(&OP, &f, &grids, SquareRange::Tail);
        for x in 0..SPACE.len() {
            let lhs = s.values()[x] * s.values()[x];
            let rhs = sloc.values()[x] * sloc.values()[x] + stail.values()[x] * stail.values()[x];
            prop_assert!((lhs - rhs).abs() <= 1e-11 * lhs.max(1e-30));
        }
    }

    #[test]
    fn restricted_norm_monotone_under_enlargement(
        lo_out in 4usize..12, hi_out in 16usize..28,
        lo_in in 4usize..12, hi_in in 16usize..28,
        t in 0.1f64..2.0,
    ) {
        let kernel = OP.kernel(|l| (-t * l).exp());
        let small_out: Vec<usize> = (lo_out..16).collect();
        let large_out: Vec<usize> = (lo_out.min(4)..hi_out).collect();
        let small_in: Vec<usize> = (lo_in..16).collect();
        let large_in: Vec<usize> = (lo_in.min(4)..hi_in).collect();
        for p in [DomainNorm::L1, DomainNorm::L2] {
            let a = restricted_norm_kernel(&SPACE, &kernel, &small_out, &small_in, p);
            let b = restricted_norm_kernel(&SPACE, &kernel, &large_out, &small_in, p);
            let c = restricted_norm_kernel(&SPACE, &kernel, &large_out, &large_in, p);
            prop_assert!(a <= b + 1e-12 && b <= c + 1e-12);
        }
    }

    #[test]
    fn grid_weights_sum_to_log_span(t_min in 1e-6f64..0.1, span in 1.5f64..5e3, ratio in 1.001f64..1.5) {
        let grid = TimeGrid::new(t_min, t_min * span, ratio).unwrap();
        let total = grid.weight() * grid.len() as f64;
        prop_assert!((total - span.ln()).abs() <= 1e-9);
        prop_assert!(grid.nodes().windows(2).all(|w| w[1] > w[0]));
        prop_assert!(grid.ratio() <= ratio + 1e-12);
    }

    #[test]
    fn semigroup_contraction_for_all_times(values in field_strategy(), t in 0.01f64..5.0) {
        let f = Field::new(values, Arc::clone(&SPACE)).unwrap();
        let out = evolve(&OP, &f, t, 0, Scaling::OrderM);
        prop_assert!(out.norm2() <= f.norm2() * (1.0 + 1e-12));
    }
}
