use proptest::prelude::*;

use relperf_core::equilibria::{
    fixed_point_oracle, mfe_strategy, solve_mfe, solve_nash, EquilibriumResult, FixedPointOptions,
    OracleInput,
};
use relperf_core::model::{empirical_distribution, expect, reparam_exclude_self, validate_type};
use relperf_core::simulation::best_response::DEFAULT_TOL;
use relperf_core::simulation::{
    best_response, best_response_mf, conditional_aggregate, exact_certainty_equivalent, exact_payoff,
    simulate_terminal, SimConfig,
};
use relperf_core::{AgentType, ExecMode, ModelKind, Population, TypeDistribution};

fn agent() -> impl Strategy<Value = AgentType> {
    (
        0.5..2.0f64,
        prop_oneof![3 => 0.2..4.0f64, 1 => Just(1.0)],
        prop_oneof![4 => 0.0..1.0f64, 1 => Just(0.0), 1 => Just(1.0)],
        0.05..1.0f64,
        prop_oneof![4 => 0.0..1.0f64, 1 => Just(0.0)],
        0.1..1.0f64,
    )
        .prop_map(|(x0, delta, theta, mu, nu, sigma)| AgentType::new(x0, delta, theta, mu, nu, sigma))
}

fn agents(max: usize) -> impl Strategy<Value = Vec<AgentType>> {
    prop::collection::vec(agent(), 1..=max)
}

fn distribution(max: usize) -> impl Strategy<Value = Vec<(AgentType, f64)>> {
    prop::collection::vec((agent(), 0.1..1.0f64), 1..=max).prop_map(|v| {
        let total: f64 = v.iter().map(|x| x.1).sum();
        let mut atoms: Vec<(AgentType, f64)> = v.into_iter().map(|(a, w)| (a, w / total)).collect();
        // Put the rounding residue on the last atom so the weights sum to 1.
        let head: f64 = atoms[..atoms.len() - 1].iter().map(|x| x.1).sum();
        atoms.last_mut().unwrap().1 = 1.0 - head;
        atoms
    })
}

fn kinds() -> impl Strategy<Value = ModelKind> {
    prop_oneof![Just(ModelKind::Cara), Just(ModelKind::Crra)]
}

/// Solvable instance with `psi <= 0.99` when CARA.
fn solve(kind: ModelKind, p: &Population) -> Option<EquilibriumResult> {
    let eq = solve_nash(kind, p).ok()?;
    (kind == ModelKind::Crra || eq.aggregates.psi <= 0.99).then_some(eq)
}

fn denominator(kind: ModelKind, a: &AgentType, n: Option<f64>) -> f64 {
    let corr = match (kind, n) {
        (_, None) => 1.0,
        (ModelKind::Cara, Some(n)) => 1.0 - a.theta / n,
        (ModelKind::Crra, Some(n)) => 1.0 + (a.delta - 1.0) * a.theta / n,
    };
    a.sigma * a.sigma + a.nu * a.nu * corr
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn nash_identity_and_best_response_formula(kind in kinds(), v in agents(10)) {
        let p = Population::new(v, kind).unwrap();
        let Some(eq) = solve(kind, &p) else { return Ok(()) };
        let n = p.len() as f64;
        let avg: f64 = p.agents().iter().zip(&eq.strategies).map(|(a, pi)| a.sigma * pi).sum::<f64>() / n;
        let s = eq.aggregate_vol();
        let gap = match kind { ModelKind::Cara => 1.0 - eq.aggregates.psi, ModelKind::Crra => 1.0 + eq.aggregates.psi };
        prop_assert!((avg - s).abs() <= 1e-10 * (1.0 + s.abs()));
        prop_assert!((s - eq.aggregates.phi / gap).abs() <= 1e-12 * (1.0 + s.abs()));
        // Each strategy is a best response to the others' aggregate.
        for (i, a) in p.agents().iter().enumerate() {
            let others: f64 = p.agents().iter().zip(&eq.strategies).enumerate()
                .filter(|(k, _)| *k != i).map(|(_, (b, pi))| b.sigma * pi).sum::<f64>() / n;
            let own_var = a.sigma * a.sigma + a.nu * a.nu;
            let br = match kind {
                ModelKind::Cara => (a.delta * a.mu + a.theta * a.sigma * others) / ((1.0 - a.theta / n) * own_var),
                ModelKind::Crra => {
                    let q = 1.0 - 1.0 / a.delta;
                    let share = 1.0 - a.theta / n;
                    (a.mu - q * a.theta * a.sigma * others) / (own_var * (1.0 - share * q))
                }
            };
            prop_assert!((br - eq.strategies[i]).abs() <= 1e-10 * (1.0 + br.abs()), "agent {}: {} vs {}", i, br, eq.strategies[i]);
        }
    }

    #[test]
    fn mean_field_identity(kind in kinds(), atoms in distribution(6)) {
        let d = TypeDistribution::new(atoms, kind).unwrap();
        let Ok(eq) = solve_mfe(kind, &d) else { return Ok(()) };
        let avg = expect_pairs(&d, &eq.strategies, |a, pi| a.sigma * pi);
        prop_assert!((avg - eq.aggregate_vol()).abs() <= 1e-10 * (1.0 + avg.abs()));
        for (atom, pi) in d.atoms().iter().zip(&eq.strategies) {
            prop_assert_eq!(mfe_strategy(kind, &atom.agent, eq.aggregate_vol()), *pi);
        }
    }

    #[test]
    fn merton_and_no_common_noise_reductions(kind in kinds(), mut v in agents(8), flat in any::<bool>()) {
        if flat {
            for a in v.iter_mut() { a.sigma = 0.0; a.nu = a.nu.max(0.1); }
        } else {
            v[0].theta = 0.0;
        }
        let p = Population::new(v.clone(), kind).unwrap();
        let d = empirical_distribution(&p);
        if let Some(eq) = solve(kind, &p) {
            for (k, a) in p.agents().iter().enumerate() {
                if k == 0 && !flat {
                    prop_assert!((eq.strategies[k] - a.merton_portfolio()).abs() <= 1e-12 * (1.0 + a.merton_portfolio()));
                }
                if flat {
                    // Without common noise the aggregate vanishes; the finite
                    // population keeps its own-noise correction.
                    prop_assert_eq!(eq.aggregates.phi, 0.0);
                    let n_merton = a.delta * a.mu / denominator(kind, a, Some(p.len() as f64));
                    prop_assert!((eq.strategies[k] - n_merton).abs() <= 1e-12 * (1.0 + n_merton));
                }
            }
        }
        if let Ok(eq) = solve_mfe(kind, &d) {
            for (atom, pi) in d.atoms().iter().zip(&eq.strategies) {
                let a = atom.agent;
                if flat || a.theta == 0.0 {
                    prop_assert!((pi - a.merton_portfolio()).abs() <= 1e-12 * (1.0 + a.merton_portfolio()));
                }
            }
        }
    }

    #[test]
    fn competition_signs(kind in kinds(), v in agents(10)) {
        let p = Population::new(v, kind).unwrap();
        let Some(eq) = solve(kind, &p) else { return Ok(()) };
        prop_assume!(eq.aggregates.phi > 0.0);
        for ((a, pi), m) in p.agents().iter().zip(&eq.strategies).zip(&eq.merton_components) {
            if a.theta > 0.0 && a.sigma > 0.0 {
                match kind {
                    ModelKind::Cara => prop_assert!(pi > m),
                    ModelKind::Crra => {
                        let extra = pi - m;
                        if a.delta == 1.0 {
                            prop_assert!(extra.abs() <= 1e-12 * m.abs());
                        } else {
                            prop_assert_eq!(extra.signum(), (1.0 - a.delta).signum());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn single_stock_nash_equals_mfe_of_empirical_law(kind in kinds(), v in agents(10), mu in 0.05..1.0f64, sigma in 0.1..1.0f64) {
        let v: Vec<AgentType> = v.into_iter().map(|a| AgentType { mu, sigma, nu: 0.0, ..a }).collect();
        let p = Population::new(v, kind).unwrap();
        let Some(eq) = solve(kind, &p) else { return Ok(()) };
        let d = empirical_distribution(&p);
        let mf = solve_mfe(kind, &d).unwrap();
        for (a, pi) in p.agents().iter().zip(&eq.strategies) {
            let k = d.atoms().iter().position(|atom| atom.agent == *a).unwrap();
            prop_assert!((pi - mf.strategies[k]).abs() <= 1e-12 * (1.0 + pi.abs()));
        }
    }

    #[test]
    fn oracle_agrees_with_closed_form(kind in kinds(), v in agents(10)) {
        let p = Population::new(v, kind).unwrap();
        let Some(eq) = solve(kind, &p) else { return Ok(()) };
        let out = fixed_point_oracle(kind, OracleInput::Population(&p), FixedPointOptions::default()).unwrap();
        let s = eq.aggregate_vol();
        let o = out.aggregates.aggregate_vol.unwrap();
        prop_assert!((o - s).abs() <= 1e-12 * (1.0 + s.abs()), "{} vs {}", o, s);
        let d = empirical_distribution(&p);
        if let Ok(mf) = solve_mfe(kind, &d) {
            if kind == ModelKind::Crra || mf.aggregates.psi <= 0.99 {
                let out = fixed_point_oracle(kind, OracleInput::Distribution(&d), FixedPointOptions::default()).unwrap();
                let o = out.aggregates.aggregate_vol.unwrap();
                prop_assert!((o - mf.aggregate_vol()).abs() <= 1e-12 * (1.0 + o.abs()));
            }
        }
    }
}

fn expect_pairs(d: &TypeDistribution, s: &[f64], f: impl Fn(&AgentType, f64) -> f64) -> f64 {
    d.atoms().iter().zip(s).map(|(a, pi)| a.weight * f(&a.agent, *pi)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn numerical_best_responses_match(kind in kinds(), v in agents(6), horizon in 0.25..3.0f64) {
        let p = Population::new(v, kind).unwrap();
        let Some(eq) = solve(kind, &p) else { return Ok(()) };
        for i in 0..p.len() {
            // A lone agent benchmarked fully against itself has a flat payoff.
            if p.len() == 1 && p.agents()[0].theta == 1.0 { continue; }
            let br = best_response(kind, i, &p, &eq.strategies, horizon, None, DEFAULT_TOL).unwrap();
            prop_assert!((br - eq.strategies[i]).abs() < 1e-6, "agent {}: {} vs {}", i, br, eq.strategies[i]);
        }
    }

    #[test]
    fn mean_field_best_responses_match(kind in kinds(), atoms in distribution(5), horizon in 0.25..3.0f64) {
        let d = TypeDistribution::new(atoms, kind).unwrap();
        let Ok(eq) = solve_mfe(kind, &d) else { return Ok(()) };
        prop_assume!(kind == ModelKind::Crra || eq.aggregates.psi <= 0.99);
        let agg = conditional_aggregate(kind, &d, &eq.strategies).unwrap();
        for (atom, pi) in d.atoms().iter().zip(&eq.strategies) {
            let br = best_response_mf(kind, &atom.agent, &agg, 0.0, horizon, None, DEFAULT_TOL).unwrap();
            prop_assert!((br - pi).abs() < 1e-6, "{} vs {}", br, pi);
        }
    }

    #[test]
    fn payoff_concavity_along_deviations(kind in kinds(), v in agents(5), lo in -5.0..0.0f64, width in 0.5..10.0f64) {
        let p = Population::new(v, kind).unwrap();
        let base: Vec<f64> = p.agents().iter().map(|a| a.merton_portfolio().min(3.0)).collect();
        let i = 0;
        let a = p.agents()[i];
        let raw_concave = kind == ModelKind::Cara || a.delta <= 1.0;
        let grid: Vec<f64> = (0..41).map(|j| lo + width * j as f64 / 40.0).collect();
        let eval = |f: &dyn Fn(&[f64]) -> f64| -> Vec<f64> {
            grid.iter().map(|&x| { let mut s = base.clone(); s[i] = x; f(&s) }).collect()
        };
        let ce = eval(&|s| exact_certainty_equivalent(kind, i, &p, s, 1.0).unwrap());
        let ce = if kind == ModelKind::Crra { ce.iter().map(|x| x.ln()).collect() } else { ce };
        check_concave(&ce)?;
        if raw_concave {
            check_concave(&eval(&|s| exact_payoff(kind, i, &p, s, 1.0).unwrap()))?;
        }
    }

    #[test]
    fn reparametrization_matches_payoffs(
        kind in kinds(),
        delta_p in 0.2..4.0f64,
        theta_p in 0.0..1.0f64,
        wealth in prop::collection::vec(0.1..5.0f64, 2..10),
    ) {
        let n = wealth.len();
        let Ok((delta, theta)) = reparam_exclude_self(kind, delta_p, theta_p, n) else {
            // Only the CRRA validity condition may fail.
            prop_assert_eq!(kind, ModelKind::Crra);
            prop_assert!((1.0 - 1.0 / delta_p) * (1.0 + theta_p / (n as f64 - 1.0)) >= 1.0);
            return Ok(());
        };
        prop_assert!(validate_type(&AgentType::new(1.0, delta, theta, 1.0, 0.0, 1.0), kind).is_ok());
        let nf = n as f64;
        match kind {
            ModelKind::Cara => {
                let others = wealth[1..].iter().sum::<f64>() / (nf - 1.0);
                let all = wealth.iter().sum::<f64>() / nf;
                let lhs = (wealth[0] - theta_p * others) / delta_p;
                let rhs = (wealth[0] - theta * all) / delta;
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            }
            ModelKind::Crra => {
                // log of x (others)^-theta' to the power (1 - 1/delta') minus
                // the include-self counterpart must not depend on wealth.
                let log_diff = |w: &[f64]| {
                    let lo = w[1..].iter().map(|x| x.ln()).sum::<f64>() / (nf - 1.0);
                    let la = w.iter().map(|x| x.ln()).sum::<f64>() / nf;
                    (1.0 - 1.0 / delta_p) * (w[0].ln() - theta_p * lo)
                        - (1.0 - 1.0 / delta) * (w[0].ln() - theta * la)
                };
                let scaled: Vec<f64> = wealth.iter().enumerate().map(|(k, x)| x * (1.0 + k as f64)).collect();
                prop_assert!((log_diff(&wealth) - log_diff(&scaled)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn expect_is_linear_and_preserved_by_empirical_law(v in agents(8), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let p = Population::new(v, ModelKind::Cara).unwrap();
        let d = empirical_distribution(&p);
        let f = |t: &AgentType| t.delta * t.mu;
        let g = |t: &AgentType| t.theta - t.sigma;
        let lhs = expect(&d, |t| a * f(t) + b * g(t)).unwrap();
        let rhs = a * expect(&d, f).unwrap() + b * expect(&d, g).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
        let direct = p.agents().iter().map(f).sum::<f64>() / p.len() as f64;
        prop_assert!((expect(&d, f).unwrap() - direct).abs() <= 1e-12);
    }
}

fn check_concave(values: &[f64]) -> Result<(), TestCaseError> {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for w in values.windows(3) {
        let second = w[0] - 2.0 * w[1] + w[2];
        prop_assert!(second <= 1e-9 * (1.0 + scale), "second difference {}", second);
    }
    Ok(())
}

#[test]
fn reproducible_wealth_matrices() {
    let v = vec![
        (AgentType::new(1.0, 2.0, 0.6, 0.3, 0.4, 0.5), 0.7),
        (AgentType::new(2.0, 0.5, 0.2, 0.2, 0.1, 0.7), -0.2),
    ];
    let mut cfg = SimConfig::new(1.0, 5000, 123);
    let a = simulate_terminal(ModelKind::Crra, &v, &cfg, true).unwrap();
    cfg.exec = ExecMode::Sequential;
    let b = simulate_terminal(ModelKind::Crra, &v, &cfg, true).unwrap();
    assert_eq!(
        a.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        b.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
    );
    assert!(a.values.iter().all(|&x| x > 0.0));
}

#[test]
fn unsolvable_cara_instances_are_reported_by_both_routes() {
    for n in 1..=5 {
        let v: Vec<AgentType> =
            (0..n).map(|k| AgentType::new(0.0, 1.0 + k as f64, 1.0, 0.5, 0.0, 0.8)).collect();
        let p = Population::new(v, ModelKind::Cara).unwrap();
        assert!(matches!(solve_nash(ModelKind::Cara, &p), Err(relperf_core::Error::NoEquilibrium { .. })));
        let opts = FixedPointOptions { max_iter: 100_000, ..Default::default() };
        assert!(matches!(
            fixed_point_oracle(ModelKind::Cara, OracleInput::Population(&p), opts),
            Err(relperf_core::Error::Divergent { .. })
        ));
    }
}
