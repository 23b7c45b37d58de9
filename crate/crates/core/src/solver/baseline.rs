use crate::market::OfferCurve;
use crate::scenario::ScenarioSet;

use super::SolverError;

/// Naive strategy: one block at 0 $/MWh sized at an empirical percentile of
/// the wind scenarios.
///
/// The percentile picks order statistic `min(floor(p * n), n - 1)` of the
/// ascending winds, so 0 gives the minimum and 1 the maximum.
pub fn percentile_strategy(scenarios: &ScenarioSet, percentile: f64) -> Result<OfferCurve, SolverError> {
    if !(0.0..=1.0).contains(&percentile) {
        return Err(SolverError::InvalidOptions(format!(
            "percentile {percentile} must lie in [0, 1]"
        )));
    }
    let mut winds: Vec<f64> = scenarios.iter().map(|s| s.p_max_wind).collect();
    winds.sort_by(f64::total_cmp);
    let n = winds.len();
    let pos = percentile * n as f64;
    // 0.3 * 10 lands a hair below 3; snap such cases.
    let pos = if (pos - pos.round()).abs() < 1e-9 { pos.round() } else { pos };
    let idx = (pos.floor() as usize).min(n - 1);
    Ok(OfferCurve::single(0.0, winds[idx])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    fn winds(w: &[f64]) -> ScenarioSet {
        ScenarioSet::new(w.iter().map(|&x| Scenario::new(20.0, 20.0, x).unwrap()).collect()).unwrap()
    }

    fn quantity(c: &OfferCurve) -> f64 {
        assert_eq!(c.len(), 1);
        assert_eq!(c.segments()[0].price, 0.0);
        c.segments()[0].quantity
    }

    #[test]
    fn extremes_and_quartile() {
        let s = winds(&[100.0, 80.0, 110.0, 90.0]);
        assert_eq!(quantity(&percentile_strategy(&s, 0.0).unwrap()), 80.0);
        assert_eq!(quantity(&percentile_strategy(&s, 1.0).unwrap()), 110.0);
        assert_eq!(quantity(&percentile_strategy(&s, 0.25).unwrap()), 90.0);
        assert_eq!(quantity(&percentile_strategy(&s, 0.5).unwrap()), 100.0);
    }

    #[test]
    fn snapping() {
        let s = winds(&(0..10).map(f64::from).collect::<Vec<_>>());
        assert_eq!(quantity(&percentile_strategy(&s, 0.3).unwrap()), 3.0);
    }

    #[test]
    fn out_of_range() {
        assert!(percentile_strategy(&winds(&[1.0]), 1.5).is_err());
        assert!(percentile_strategy(&winds(&[1.0]), -0.1).is_err());
    }
}
