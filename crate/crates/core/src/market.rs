//! Offer curves, day-ahead clearing and the two profit semantics.
//!
//! The day-ahead objective credits only the day-ahead sale and charges a
//! real-time buyback for any shortfall; excess wind earns nothing. The
//! realized two-settlement profit used for backtesting also sells the excess
//! at the real-time price.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::Scenario;

#[derive(Debug, Error, PartialEq)]
pub enum MarketError {
    #[error("segment {index}: price {price} is below the previous segment price {previous}")]
    DecreasingPrice { index: usize, price: f64, previous: f64 },
    #[error("segment {index}: quantity {quantity} must be finite and nonnegative")]
    BadQuantity { index: usize, quantity: f64 },
    #[error("segment {index}: price is not finite")]
    BadPrice { index: usize },
    #[error("curve has {len} segments, more than the limit of {limit}")]
    TooManySegments { len: usize, limit: usize },
}

/// One price/quantity block of an offer curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// $/MWh
    pub price: f64,
    /// MW
    pub quantity: f64,
}

/// Step offer curve with nondecreasing segment prices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Segment>", into = "Vec<Segment>")]
pub struct OfferCurve {
    segments: Vec<Segment>,
}

impl OfferCurve {
    pub fn new(segments: Vec<Segment>) -> Result<Self, MarketError> {
        for (index, s) in segments.iter().enumerate() {
            if !s.price.is_finite() {
                return Err(MarketError::BadPrice { index });
            }
            if !s.quantity.is_finite() || s.quantity < 0.0 {
                return Err(MarketError::BadQuantity {
                    index,
                    quantity: s.quantity,
                });
            }
            if index > 0 && s.price < segments[index - 1].price {
                return Err(MarketError::DecreasingPrice {
                    index,
                    price: s.price,
                    previous: segments[index - 1].price,
                });
            }
        }
        Ok(OfferCurve { segments })
    }

    /// Validate and additionally enforce a segment-count limit.
    pub fn with_limit(segments: Vec<Segment>, limit: usize) -> Result<Self, MarketError> {
        if segments.len() > limit {
            return Err(MarketError::TooManySegments {
                len: segments.len(),
                limit,
            });
        }
        Self::new(segments)
    }

    pub fn empty() -> Self {
        OfferCurve::default()
    }

    /// A single block offered at `price`.
    pub fn single(price: f64, quantity: f64) -> Result<Self, MarketError> {
        Self::new(vec![Segment { price, quantity }])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_quantity(&self) -> f64 {
        self.segments.iter().map(|s| s.quantity).sum()
    }

    /// Write `segment,price_dollars_per_mwh,quantity_mw,cumulative_mw` rows,
    /// segments numbered from 1.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["segment", "price_dollars_per_mwh", "quantity_mw", "cumulative_mw"])?;
        let mut cumulative = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            cumulative += s.quantity;
            w.write_record([
                (i + 1).to_string(),
                s.price.to_string(),
                s.quantity.to_string(),
                cumulative.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl TryFrom<Vec<Segment>> for OfferCurve {
    type Error = MarketError;

    fn try_from(segments: Vec<Segment>) -> Result<Self, Self::Error> {
        OfferCurve::new(segments)
    }
}

impl From<OfferCurve> for Vec<Segment> {
    fn from(curve: OfferCurve) -> Self {
        curve.segments
    }
}

/// Which segments cleared at a given day-ahead price.
#[derive(Debug, Clone, PartialEq)]
pub struct Clearing {
    pub indicator: Vec<bool>,
    pub cleared_mw: f64,
}

impl Clearing {
    /// Number of cleared segments; the indicator is this many ones followed
    /// by zeros.
    pub fn cleared_segments(&self) -> usize {
        self.indicator.iter().take_while(|u| **u).count()
    }
}

/// Full day-ahead outcome of a curve in one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClearingOutcome {
    pub indicator: Vec<bool>,
    pub cleared_mw: f64,
    /// `min(0, p_max_wind - cleared_mw)`
    pub shortfall_mw: f64,
    pub da_objective_profit: f64,
}

impl ClearingOutcome {
    pub fn evaluate(curve: &OfferCurve, scenario: &Scenario) -> Self {
        let Clearing { indicator, cleared_mw } = clear(curve, scenario.lambda_da);
        let shortfall_mw = shortfall(cleared_mw, scenario.p_max_wind);
        ClearingOutcome {
            indicator,
            cleared_mw,
            shortfall_mw,
            da_objective_profit: scenario.lambda_da * cleared_mw + scenario.lambda_rt * shortfall_mw,
        }
    }
}

/// Clear `curve` at `lambda_da`. A segment clears iff its price is at or
/// below the market price; equality clears the whole block. The comparison
/// is exact.
pub fn clear(curve: &OfferCurve, lambda_da: f64) -> Clearing {
    let cleared = curve
        .segments
        .iter()
        .take_while(|s| s.price <= lambda_da)
        .count();
    let mut indicator = vec![false; curve.segments.len()];
    indicator[..cleared].fill(true);
    let cleared_mw = curve.segments[..cleared].iter().map(|s| s.quantity).sum();
    Clearing { indicator, cleared_mw }
}

/// Real-time buyback volume: `min(0, p_max_wind - cleared_mw)`.
pub fn shortfall(cleared_mw: f64, p_max_wind: f64) -> f64 {
    (p_max_wind - cleared_mw).min(0.0)
}

/// Day-ahead objective profit of `curve` in `scenario`.
pub fn da_objective_profit(scenario: &Scenario, curve: &OfferCurve) -> f64 {
    ClearingOutcome::evaluate(curve, scenario).da_objective_profit
}

/// Realized two-settlement profit. The deviation from the day-ahead position,
/// shortfall or excess, settles at the real-time price.
pub fn settle_realtime(curve: &OfferCurve, actual_da: f64, actual_rt: f64, actual_wind: f64) -> f64 {
    let cleared = clear(curve, actual_da).cleared_mw;
    actual_da * cleared + actual_rt * (actual_wind - cleared)
}

/// Drop segments narrower than `min_width_mw`; others are kept as is.
pub fn postprocess(curve: &OfferCurve, min_width_mw: f64) -> OfferCurve {
    OfferCurve {
        segments: curve
            .segments
            .iter()
            .filter(|s| s.quantity >= min_width_mw)
            .copied()
            .collect(),
    }
}
