use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zsg::exact::{contraction_bound, optimal_relaxation};
use zsg::{
    apply_h_w, apply_t_w, contraction_probe, generate_random_game, q_dagger,
    relaxed_value_iteration, solve_exact, state_values, transform_game, IterationOptions,
    MarkovGame, OperatorChoice, QTable, RelaxationParam,
};

const TOL: f64 = 1e-11;

fn game(seed: u64, states: usize, actions: usize, self_loop: f64) -> MarkovGame {
    generate_random_game(states, actions, actions, 0.6, self_loop, (-1.0, 1.0), seed).unwrap()
}

#[test]
fn q_dagger_fixed_point_identities() {
    for seed in 0..6 {
        let g = game(
            seed,
            3 + seed as usize,
            3,
            [0.0, 0.1, 0.3][seed as usize % 3],
        );
        let exact = solve_exact(&g, &IterationOptions::with_tol(TOL)).unwrap();
        let ws = optimal_relaxation(&g);
        for w in [1.0, 0.5 * (1.0 + ws), ws] {
            let (qd, _) = q_dagger(&g, w, &IterationOptions::with_tol(TOL)).unwrap();
            // Q† - Q* = (1 - w)(J*(i) - Q*)
            for c in 0..g.num_cells() {
                let i = g.state_of(c);
                let lhs = qd.as_slice()[c] - exact.q_star.as_slice()[c];
                let rhs = (1.0 - w) * (exact.j_star.0[i] - exact.q_star.as_slice()[c]);
                assert!(
                    (lhs - rhs).abs() <= 10.0 * TOL.max(1e-10),
                    "seed {seed} w {w}: {lhs} vs {rhs}"
                );
            }
            // val[Q†(i)] = J*(i)
            let vals = state_values(&qd).unwrap();
            for (v, j) in vals.iter().zip(&exact.j_star.0) {
                assert!((v - j).abs() <= 1e-9);
            }
            // Fixed point of H_w.
            assert!(apply_h_w(&g, &qd, w).unwrap().max_dist(&qd) <= 1e-9);
            // Bound (1+α)R/(1-α)².
            let b = (1.0 + g.discount()) * g.reward_bound() / (1.0 - g.discount()).powi(2);
            assert!(qd.max_norm() <= b + 1e-9);
        }
        assert!(exact.j_star.max_norm() <= g.value_bound() + 1e-9);
        assert!(exact.q_star.max_norm() <= g.value_bound() + 1e-9);
    }
}

#[test]
fn t_w_fixes_j_star() {
    let g = game(3, 6, 3, 0.2);
    let exact = solve_exact(&g, &IterationOptions::with_tol(TOL)).unwrap();
    let ws = optimal_relaxation(&g);
    for w in [0.5, 1.0, ws] {
        let j = apply_t_w(&g, &exact.j_star, w).unwrap();
        assert!(j.max_dist(&exact.j_star) <= 2e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_equivalence(seed in any::<u64>(), frac in 0.01..1.0f64, self_loop in 0.0..0.6f64) {
        let g = generate_random_game(4, 3, 2, 0.7, self_loop, (-1.0, 1.0), seed).unwrap();
        let w = frac * optimal_relaxation(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let q = QTable::from_flat(4, 3, 2, (0..24).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap();
        let t = transform_game(&g, RelaxationParam(w)).unwrap();
        let direct = apply_h_w(&g, &q, w).unwrap();
        let via = apply_h_w(&t, &q, 1.0).unwrap();
        prop_assert!(direct.max_dist(&via) <= 1e-10);
    }

    #[test]
    fn transform_keeps_rows_stochastic(seed in any::<u64>(), frac in 0.01..1.0f64, self_loop in 0.0..0.9f64) {
        let g = generate_random_game(5, 2, 2, 0.9, self_loop, (0.0, 1.0), seed).unwrap();
        let w = frac * optimal_relaxation(&g);
        let t = transform_game(&g, RelaxationParam(w)).unwrap();
        for c in 0..t.num_cells() {
            prop_assert!((t.row(c).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(t.row(c).iter().all(|&q| q >= 0.0));
        }
    }

    #[test]
    fn w_star_range(seed in any::<u64>(), self_loop in 0.0..0.95f64, alpha in 0.0..0.99f64) {
        let g = generate_random_game(4, 2, 3, alpha, self_loop, (0.0, 1.0), seed).unwrap();
        let ws = optimal_relaxation(&g);
        prop_assert!(ws >= 1.0 && ws <= 1.0 / (1.0 - alpha) + 1e-12);
        prop_assert_eq!(ws > 1.0, alpha > 0.0 && g.min_self_loop() > 0.0);
    }
}

#[test]
fn probes_respect_contraction_bounds() {
    for seed in 0..4 {
        let g = game(seed, 5, 3, 0.2);
        let ws = optimal_relaxation(&g);
        for w in [0.5, 1.0, ws] {
            for op in [OperatorChoice::TW, OperatorChoice::HW] {
                let r = contraction_probe(&g, op, w, 100, seed).unwrap();
                assert!(r <= contraction_bound(&g, w) + 1e-7, "{op:?} w={w}: {r}");
            }
        }
        for op in [OperatorChoice::T, OperatorChoice::H] {
            assert!(contraction_probe(&g, op, 1.0, 100, seed).unwrap() <= g.discount() + 1e-7);
        }
        assert!(contraction_bound(&g, ws) < g.discount());
    }
}

#[test]
fn relaxed_iteration_is_no_slower() {
    for seed in 0..8 {
        let g = game(seed, 8, 3, 0.15);
        let ws = optimal_relaxation(&g);
        assert!(ws >= 1.05);
        let opts = IterationOptions::with_tol(1e-8);
        let (_, plain) = relaxed_value_iteration(&g, 1.0, &opts).unwrap();
        let (_, fast) = relaxed_value_iteration(&g, ws, &opts).unwrap();
        assert!(
            fast.iterations <= plain.iterations,
            "seed {seed}: {} > {}",
            fast.iterations,
            plain.iterations
        );
    }
}

#[test]
fn under_relaxation_still_converges() {
    let g = game(1, 5, 2, 0.1);
    let opts = IterationOptions::with_tol(1e-9);
    let (j_half, rep_half) = relaxed_value_iteration(&g, 0.5, &opts).unwrap();
    let (j_one, rep_one) = relaxed_value_iteration(&g, 1.0, &opts).unwrap();
    assert!(j_half.max_dist(&j_one) <= 1e-7);
    assert!(rep_half.iterations > rep_one.iterations);
}
