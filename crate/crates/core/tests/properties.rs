use num_complex::Complex64;
use proptest::prelude::*;
use ristrainlab::beamforming::{sinr, solve_power_min, SolveOptions};
use ristrainlab::channel::{superimpose_stack, ChannelRealization, RcVector};
use ristrainlab::estimators::{
    dft_training_matrix, mse_stats, orthogonal_pilots, EstimationMethod,
};
use ristrainlab::numerics::{dft_matrix, inner, solve_hermitian_pd, CMatrix, RngStream};
use ristrainlab::theory::{
    equipartition_mean_cos, g_of_q, power_equipartition_upper, power_optimal,
    power_random_training, ClosedFormInputs,
};
use ristrainlab::training::{balance_residual, schedule_equipartition};

fn complex() -> impl Strategy<Value = Complex64> {
    (-3.0f64..3.0, -3.0f64..3.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec(complex(), rows * cols)
        .prop_map(move |v| CMatrix::from_vec(rows, cols, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn superimposed_channel_is_linear_in_the_rc(
        stack in matrix(3, 5),
        phases in prop::collection::vec(0.0f64..std::f64::consts::TAU, 4),
    ) {
        let rc = RcVector::from_phases(&phases);
        let h = superimpose_stack(&stack, &rc).unwrap();
        for a in 0..3 {
            let mut want = stack[(a, 0)];
            for (n, phi) in rc.as_slice().iter().enumerate() {
                want += phi.conj() * stack[(a, n + 1)];
            }
            prop_assert!((h[a] - want).norm() < 1e-12);
        }
        let ch = ChannelRealization::from_cascaded(vec![stack.clone()]).unwrap();
        prop_assert_eq!(ch.superimpose(&rc, 0).unwrap(), h);
    }

    #[test]
    fn hermitian_solve_residual(a in matrix(4, 4), b in matrix(4, 2), shift in 0.1f64..5.0) {
        let spd = &(&a * &a.adjoint()) + &CMatrix::identity(4).scale_real(shift);
        let x = solve_hermitian_pd(&spd, &b).unwrap();
        let resid = (&(&spd * &x) - &b).frobenius_norm();
        prop_assert!(resid <= 1e-9 * (1.0 + b.frobenius_norm()) * spd.frobenius_norm());
    }

    #[test]
    fn dft_rows_are_orthogonal(n in 1usize..40) {
        let f = dft_matrix(n).unwrap();
        let gram = &f * &f.adjoint();
        prop_assert!(gram.max_abs_diff(&CMatrix::identity(n).scale_real(n as f64)) < 1e-9 * n as f64);
    }

    #[test]
    fn training_matrix_gram_is_scaled_identity(n in 0usize..12, k in 1usize..4, alpha in 0.01f64..10.0) {
        let g = dft_training_matrix(n, &orthogonal_pilots(k, alpha).unwrap()).unwrap();
        let dim = k * (n + 1);
        let want = CMatrix::identity(dim).scale_real(alpha * (k * (n + 1)) as f64);
        prop_assert!((&g * &g.adjoint()).max_abs_diff(&want) < 1e-9 * want.frobenius_norm());
    }

    #[test]
    fn power_min_meets_every_target(
        h in prop::collection::vec(prop::collection::vec(complex(), 4), 1..4),
        gamma_db in -5.0f64..8.0,
        noise in 0.01f64..2.0,
    ) {
        let gamma = vec![10f64.powf(gamma_db / 10.0); h.len()];
        // skip near-degenerate draws; their targets may be infeasible
        prop_assume!(h.iter().all(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>() > 0.5));
        if let Ok((w, _)) = solve_power_min(&h, &gamma, noise, &SolveOptions::default()) {
            for (s, g) in sinr(&h, &w, noise).iter().zip(&gamma) {
                prop_assert!((s - g).abs() <= 1e-3 * g, "sinr {} target {}", s, g);
            }
            let sum: f64 = (0..h.len()).map(|k| inner(&w.precoder(k), &w.precoder(k)).re).sum();
            prop_assert!((sum - w.total).abs() <= 1e-9 * w.total);
        }
    }

    #[test]
    fn closed_forms_are_sandwiched(
        n in 1usize..200,
        q in 1usize..64,
        rho_r2 in 1e-3f64..10.0,
        rho_d2 in 0.0f64..10.0,
    ) {
        let inp = ClosedFormInputs::new(n, rho_r2, rho_d2, q);
        let incoherent = n as f64 * rho_r2 + rho_d2;
        let random = power_random_training(&inp).unwrap().0;
        let equi = power_equipartition_upper(&inp).unwrap();
        let opt = power_optimal(&inp).unwrap();
        let eps = 1e-12 * opt;
        prop_assert!(incoherent <= random + eps);
        prop_assert!(random <= equi + eps);
        prop_assert!(equi <= opt + eps);
    }

    #[test]
    fn alignment_factors_increase_towards_one(q in 1usize..300) {
        let (g0, g1) = (g_of_q(q).unwrap(), g_of_q(q + 1).unwrap());
        prop_assert!(g0 < g1 && g1 < 1.0);
        prop_assert!(g0 <= equipartition_mean_cos(q).unwrap() + 1e-12);
    }

    #[test]
    fn equipartition_schedules_balance(n in 1usize..12, q in 1usize..12, seed in any::<u64>()) {
        let s = schedule_equipartition(n, q, &mut RngStream::new(seed, 0)).unwrap();
        prop_assert_eq!(s.periods(), q);
        prop_assert!(balance_residual(&s) < 1e-9);
    }

    #[test]
    fn estimator_errors_are_ordered(n in 1usize..500, sigma2 in 0.0f64..10.0) {
        let e = |m| mse_stats(m, n, 1, sigma2).unwrap();
        let (dft, three, onoff) = (e(EstimationMethod::Dft), e(EstimationMethod::ThreePhase), e(EstimationMethod::OnOff));
        prop_assert!(dft.sigma_r2 <= three.sigma_r2 && three.sigma_r2 <= onoff.sigma_r2);
        prop_assert_eq!(dft.pilots, n + 1);
    }
}
