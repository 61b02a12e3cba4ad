//! Numerical best responses over constant strategies.
//!
//! The objective is the certainty equivalent of the exact payoff (a strictly
//! increasing transform, so the argmax is unchanged). It is a concave
//! quadratic in the deviating strategy in every model; the raw CRRA payoff
//! with `delta > 1` is only quasi-concave, which golden-section search would
//! also handle but with less resolution near the top.

use super::payoff::{ConditionalAggregate, Deviation};
use crate::error::{Error, Result};
use crate::model::{AgentType, ModelKind, Population};

/// Default bracket width tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Number of times the default bracket is widened before giving up.
const WIDENINGS: usize = 3;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes a unimodal `f` on `[lo, hi]` until the bracket is narrower than
/// `tol`. Fails with `Error::Bracket` if the maximizer lies on the boundary.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::domain(format!("invalid bracket [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be > 0"));
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        // Once the interior points collapse onto each other the bracket
        // cannot shrink further.
        if !(c < d) {
            break;
        }
    }
    let x = 0.5 * (a + b);
    let edge = 2.0 * tol.max(f64::EPSILON * x.abs());
    if x - lo <= edge {
        return Err(Error::Bracket { lo, hi, at: lo });
    }
    if hi - x <= edge {
        return Err(Error::Bracket { lo, hi, at: hi });
    }
    Ok(x)
}

fn default_bracket(candidate: f64, widening: usize) -> (f64, f64) {
    let half = (10.0 * candidate.abs() + 10.0) * 10f64.powi(widening as i32);
    (candidate - half, candidate + half)
}

fn search(dev: &Deviation, bracket: Option<(f64, f64)>, tol: f64) -> Result<f64> {
    let at = |(lo, hi): (f64, f64)| {
        let x = golden_section_max(|u| dev.eval(u), lo - dev.pi_ref, hi - dev.pi_ref, tol)
            .map(|u| dev.pi_ref + u)?;
        // Far from the reference the objective differences carry rounding
        // noise of order eps * |u|, which blurs a flat top. A second pass
        // around the first answer removes it.
        let local = dev.recentered(x);
        let half = 1e-4 * (1.0 + x.abs());
        match golden_section_max(|u| local.eval(u), -half, half, tol) {
            Ok(u) if (lo..=hi).contains(&(x + u)) => Ok(x + u),
            _ => Ok(x),
        }
    };
    match bracket {
        Some(b) => at(b),
        None => {
            let mut last = Err(Error::domain("no bracket tried"));
            for w in 0..=WIDENINGS {
                last = at(default_bracket(dev.pi_ref, w));
                if !matches!(last, Err(Error::Bracket { .. })) {
                    break;
                }
            }
            last
        }
    }
}

/// Argmax over constant `pi` of agent `i`'s exact payoff when the others
/// play `strategies` (entry `i` is the candidate that centers the default
/// bracket `[-10|c| - 10, 10|c| + 10]`).
pub fn best_response(
    kind: ModelKind,
    i: usize,
    p: &Population,
    strategies: &[f64],
    horizon: f64,
    bracket: Option<(f64, f64)>,
    tol: f64,
) -> Result<f64> {
    let dev = Deviation::nash(kind, i, p, strategies, horizon)?;
    search(&dev, bracket, tol)
}

/// Argmax over constant `pi` of a representative agent's payoff against the
/// conditional aggregate `agg`; `candidate` centers the default bracket.
pub fn best_response_mf(
    kind: ModelKind,
    agent: &AgentType,
    agg: &ConditionalAggregate,
    candidate: f64,
    horizon: f64,
    bracket: Option<(f64, f64)>,
    tol: f64,
) -> Result<f64> {
    let dev = Deviation::mean_field(kind, agent, candidate, agg, horizon)?;
    search(&dev, bracket, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::solve_nash;
    use crate::model::SingleStockSpec;
    use crate::simulation::exact_payoff;

    #[test]
    fn golden_section_finds_parabola_top() {
        let x = golden_section_max(|x| -(x - 1.25f64).powi(2), -10.0, 10.0, 1e-12).unwrap();
        assert!((x - 1.25).abs() < 1e-9);
        assert!(matches!(
            golden_section_max(|x| x, 0.0, 1.0, 1e-10),
            Err(Error::Bracket { at, .. }) if at == 1.0
        ));
    }

    #[test]
    fn two_agent_nash_is_recovered() {
        let s = SingleStockSpec::new(1.0, 1.0).unwrap();
        let p =
            Population::new(vec![s.agent(0.0, 5.0, 0.5), s.agent(0.0, 7.0, 0.5)], ModelKind::Cara).unwrap();
        let eq = solve_nash(ModelKind::Cara, &p).unwrap();
        let br = best_response(ModelKind::Cara, 0, &p, &eq.strategies, 1.0, None, DEFAULT_TOL).unwrap();
        assert!((br - 11.0).abs() < 1e-8, "{br}");
        // From a poor starting candidate the bracket still contains the top.
        let br = best_response(ModelKind::Cara, 0, &p, &[0.0, 13.0], 1.0, None, DEFAULT_TOL).unwrap();
        assert!((br - 11.0).abs() < 1e-8, "{br}");
    }

    #[test]
    fn merton_points() {
        let a = AgentType::new(0.0, 2.0, 0.0, 0.3, 0.4, 0.5);
        let p = Population::new(vec![a], ModelKind::Cara).unwrap();
        let br = best_response(ModelKind::Cara, 0, &p, &[0.0], 2.0, None, DEFAULT_TOL).unwrap();
        assert!((br - a.merton_portfolio()).abs() < 1e-8);
        // The raw closed-form payoff agrees that this is the maximum.
        let top = exact_payoff(ModelKind::Cara, 0, &p, &[br], 2.0).unwrap();
        for d in [-1e-3, 1e-3] {
            assert!(exact_payoff(ModelKind::Cara, 0, &p, &[br + d], 2.0).unwrap() < top);
        }

        let log = AgentType::new(1.0, 1.0, 0.9, 0.3, 0.4, 0.5);
        let other = AgentType::new(1.0, 3.0, 0.5, 0.2, 0.1, 0.8);
        let p = Population::new(vec![log, other], ModelKind::Crra).unwrap();
        let br = best_response(ModelKind::Crra, 0, &p, &[0.1, 2.0], 1.0, None, DEFAULT_TOL).unwrap();
        assert!((br - 0.3 / 0.41).abs() < 1e-8);
    }

    #[test]
    fn explicit_bracket_too_small() {
        let a = AgentType::new(0.0, 2.0, 0.0, 0.3, 0.4, 0.5);
        let p = Population::new(vec![a], ModelKind::Cara).unwrap();
        let r = best_response(ModelKind::Cara, 0, &p, &[0.0], 1.0, Some((0.0, 1.0)), DEFAULT_TOL);
        assert!(matches!(r, Err(Error::Bracket { .. })));
    }
}
