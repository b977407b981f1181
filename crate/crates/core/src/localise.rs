//! Source localisation by exhaustive ΔT misfit minimisation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::gp::{FittedModel, PredictiveDistribution};
use crate::synth::PAIR_COUNT;

/// Predicted ΔT maps of all sensor pairs over a fixed set of candidate points.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMaps {
    points: Vec<Point>,
    /// Indexed by `pair - 1`.
    maps: Vec<PredictiveDistribution>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Localisation {
    /// Index into the candidate points.
    pub index: usize,
    pub point: Point,
    /// `Σ_pairs (ΔT_obs − mean)²` at the chosen point.
    pub misfit: f64,
    /// Summed predictive variance at the chosen point.
    pub variance: f64,
}

impl PairMaps {
    /// `maps[k]` holds the prediction of pair `k + 1`.
    pub fn from_predictions(points: Vec<Point>, maps: Vec<Option<PredictiveDistribution>>) -> Result<Self> {
        if let Some(k) = (0..PAIR_COUNT).find(|&k| !matches!(maps.get(k), Some(Some(_)))) {
            return Err(Error::MissingModel { pair: k + 1 });
        }
        if maps.len() > PAIR_COUNT {
            return Err(Error::InvalidPair(maps.len()));
        }
        let maps: Vec<PredictiveDistribution> = maps.into_iter().flatten().collect();
        if let Some(k) = maps.iter().position(|m| m.len() != points.len()) {
            return Err(Error::InvalidArgument(format!("map of pair {} does not cover every candidate point", k + 1)));
        }
        Ok(Self { points, maps })
    }

    /// Predicts every pair model at `points`. Keys are 1-based pair indices.
    pub fn from_models(models: &BTreeMap<usize, FittedModel>, points: Vec<Point>) -> Result<Self> {
        let mut maps = Vec::with_capacity(PAIR_COUNT);
        for pair in 1..=PAIR_COUNT {
            let model = models.get(&pair).ok_or(Error::MissingModel { pair })?;
            maps.push(Some(model.predict(&points)?));
        }
        Self::from_predictions(points, maps)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn map(&self, pair: usize) -> Option<&PredictiveDistribution> {
        pair.checked_sub(1).and_then(|k| self.maps.get(k))
    }

    /// Candidate minimising the summed squared ΔT misfit; ties go to the
    /// smaller summed variance, then to the lower index.
    pub fn localise(&self, observed: &[f64]) -> Result<Localisation> {
        if observed.len() != PAIR_COUNT {
            return Err(Error::InvalidArgument(format!("expected {PAIR_COUNT} observed ΔT values, got {}", observed.len())));
        }
        if self.points.is_empty() {
            return Err(Error::InvalidArgument("no candidate points".into()));
        }
        let mut best: Option<Localisation> = None;
        for (index, &point) in self.points.iter().enumerate() {
            let mut misfit = 0.0;
            let mut variance = 0.0;
            for (map, obs) in self.maps.iter().zip(observed) {
                let r = obs - map.mean[index];
                misfit += r * r;
                variance += map.variance[index];
            }
            let better = match &best {
                None => true,
                Some(b) => misfit < b.misfit || (misfit == b.misfit && variance < b.variance),
            };
            if better {
                best = Some(Localisation { index, point, misfit, variance });
            }
        }
        Ok(best.expect("at least one candidate"))
    }
}

/// One-shot localisation: predicts all 28 maps at `points` and minimises.
pub fn localise(models: &BTreeMap<usize, FittedModel>, observed: &[f64], points: Vec<Point>) -> Result<Localisation> {
    PairMaps::from_models(models, points)?.localise(observed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn flat(points: usize, mean: f64, var: f64) -> PredictiveDistribution {
        PredictiveDistribution { mean: vec![mean; points], variance: vec![var; points], clamped: 0 }
    }

    fn points(n: usize) -> Vec<Point> {
        (0..n).map(|i| Point::new(i as f64, 0.0)).collect()
    }

    #[test]
    fn missing_pair_is_reported() {
        let mut maps: Vec<Option<PredictiveDistribution>> = (0..PAIR_COUNT).map(|_| Some(flat(3, 0.0, 1.0))).collect();
        maps[12] = None;
        assert_eq!(PairMaps::from_predictions(points(3), maps.clone()).err(), Some(Error::MissingModel { pair: 13 }));
        maps.truncate(27);
        maps[12] = Some(flat(3, 0.0, 1.0));
        assert_eq!(PairMaps::from_predictions(points(3), maps).err(), Some(Error::MissingModel { pair: 28 }));
        assert_eq!(localise(&BTreeMap::new(), &[0.0; 28], points(2)).err(), Some(Error::MissingModel { pair: 1 }));
    }

    #[test]
    fn picks_the_exhaustive_minimum() {
        let maps = (0..PAIR_COUNT)
            .map(|k| {
                let mean = (0..5).map(|i| (i as f64 - 3.0) * (k as f64 + 1.0)).collect();
                Some(PredictiveDistribution { mean, variance: vec![1.0; 5], clamped: 0 })
            })
            .collect();
        let pm = PairMaps::from_predictions(points(5), maps).unwrap();
        let observed: Vec<f64> = (0..PAIR_COUNT).map(|k| 0.1 * (k as f64 + 1.0)).collect();
        let hit = pm.localise(&observed).unwrap();
        assert_eq!(hit.index, 3);
        assert_eq!(hit.point, Point::new(3.0, 0.0));
    }

    #[test]
    fn ties_prefer_low_variance_then_low_index() {
        let maps: Vec<Option<PredictiveDistribution>> = (0..PAIR_COUNT)
            .map(|_| Some(PredictiveDistribution { mean: vec![0.0; 4], variance: vec![2.0, 2.0, 1.0, 1.0], clamped: 0 }))
            .collect();
        let pm = PairMaps::from_predictions(points(4), maps).unwrap();
        assert_eq!(pm.localise(&[0.0; 28]).unwrap().index, 2);
        assert!(pm.localise(&[0.0; 27]).is_err());
    }
}
