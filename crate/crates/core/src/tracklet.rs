//! Tracklets: time-ordered chains of detections with aggregated appearance
//! and motion state.

use std::sync::Arc;

use crate::detection::Detection;
use crate::error::{Error, Result};

/// Confidence-weighted feature statistics of a set of detections.
#[derive(Debug, Clone, PartialEq)]
pub struct Appearance {
    pub mean: Vec<f64>,
    pub mass: Vec<f64>,
}

impl Appearance {
    fn accumulate<'a>(n: usize, dets: impl Iterator<Item = &'a Detection>) -> (Vec<f64>, Vec<f64>) {
        let mut sum = vec![0.0; n];
        let mut mass = vec![0.0; n];
        for d in dets {
            for i in 0..n {
                sum[i] += d.confidences[i] * d.features[i];
                mass[i] += d.confidences[i];
            }
        }
        (sum, mass)
    }

    fn from_sums(sum: &[f64], mass: &[f64]) -> Self {
        Appearance {
            mean: sum
                .iter()
                .zip(mass)
                .map(|(s, c)| if *c > 0.0 { s / c } else { 0.0 })
                .collect(),
            mass: mass.to_vec(),
        }
    }
}

/// Which end of a tracklet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremity {
    Head,
    Tail,
}

#[derive(Debug, Clone)]
pub struct Tracklet {
    detections: Vec<Arc<Detection>>,
    weighted_sum: Vec<f64>,
    conf_mass: Vec<f64>,
    start_velocity: Vec<f64>,
    end_velocity: Vec<f64>,
    inner_cost: f64,
}

fn velocity(a: &Detection, b: &Detection) -> Vec<f64> {
    let dt = (b.frame - a.frame) as f64;
    a.position
        .iter()
        .zip(&b.position)
        .map(|(pa, pb)| (pb - pa) / dt)
        .collect()
}

impl Tracklet {
    pub fn single(det: Arc<Detection>) -> Self {
        let n = det.feature_count();
        let (weighted_sum, conf_mass) = Appearance::accumulate(n, std::iter::once(&*det));
        let dim = det.position.len();
        Tracklet {
            detections: vec![det],
            weighted_sum,
            conf_mass,
            start_velocity: vec![0.0; dim],
            end_velocity: vec![0.0; dim],
            inner_cost: 0.0,
        }
    }

    /// Concatenates a time-ordered chain of tracklets. `link_cost` is the sum
    /// of the edge weights joining consecutive parts.
    pub fn chain(parts: &[&Tracklet], link_cost: f64) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidPath("cannot merge an empty chain".into()))?;
        for pair in parts.windows(2) {
            if pair[1].t_start() <= pair[0].t_end() {
                return Err(Error::InvalidPath(format!(
                    "tracklet ending at {} cannot precede one starting at {}",
                    pair[0].t_end(),
                    pair[1].t_start()
                )));
            }
        }
        let n = first.weighted_sum.len();
        let mut weighted_sum = vec![0.0; n];
        let mut conf_mass = vec![0.0; n];
        let mut detections = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        let mut inner_cost = link_cost;
        for p in parts {
            for i in 0..n {
                weighted_sum[i] += p.weighted_sum[i];
                conf_mass[i] += p.conf_mass[i];
            }
            detections.extend(p.detections.iter().cloned());
            inner_cost += p.inner_cost;
        }
        let dim = detections[0].position.len();
        let k = detections.len();
        let (start_velocity, end_velocity) = if k >= 2 {
            (
                velocity(&detections[0], &detections[1]),
                velocity(&detections[k - 2], &detections[k - 1]),
            )
        } else {
            (vec![0.0; dim], vec![0.0; dim])
        };
        Ok(Tracklet {
            detections,
            weighted_sum,
            conf_mass,
            start_velocity,
            end_velocity,
            inner_cost,
        })
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn detections(&self) -> &[Arc<Detection>] {
        &self.detections
    }

    pub fn t_start(&self) -> u32 {
        self.detections[0].frame
    }

    pub fn t_end(&self) -> u32 {
        self.detections[self.detections.len() - 1].frame
    }

    pub fn start_position(&self) -> &[f64] {
        &self.detections[0].position
    }

    pub fn end_position(&self) -> &[f64] {
        &self.detections[self.detections.len() - 1].position
    }

    pub fn start_velocity(&self) -> &[f64] {
        &self.start_velocity
    }

    pub fn end_velocity(&self) -> &[f64] {
        &self.end_velocity
    }

    pub fn inner_cost(&self) -> f64 {
        self.inner_cost
    }

    pub fn conf_mass(&self) -> &[f64] {
        &self.conf_mass
    }

    pub fn total_conf_mass(&self) -> f64 {
        self.conf_mass.iter().sum()
    }

    pub fn feature_count(&self) -> usize {
        self.conf_mass.len()
    }

    /// Confidence-weighted mean of each feature; zero where no confidence
    /// has been accumulated.
    pub fn mean_features(&self) -> Vec<f64> {
        Appearance::from_sums(&self.weighted_sum, &self.conf_mass).mean
    }

    pub fn appearance(&self) -> Appearance {
        Appearance::from_sums(&self.weighted_sum, &self.conf_mass)
    }

    /// Mean and accumulated confidence of feature `i`, over the whole
    /// tracklet or over at most `count` detections at one end.
    pub fn feature_stat(&self, i: usize, end: Option<(Extremity, usize)>) -> (f64, f64) {
        let (sum, mass) = match end {
            None => (self.weighted_sum[i], self.conf_mass[i]),
            Some((end, count)) => {
                let k = count.min(self.len()).max(1);
                let dets = match end {
                    Extremity::Head => &self.detections[..k],
                    Extremity::Tail => &self.detections[self.len() - k..],
                };
                dets.iter().fold((0.0, 0.0), |(s, m), d| {
                    (s + d.confidences[i] * d.features[i], m + d.confidences[i])
                })
            }
        };
        (if mass > 0.0 { sum / mass } else { 0.0 }, mass)
    }

    /// Appearance built from at most `count` detections at one end.
    pub fn extremity_appearance(&self, end: Extremity, count: usize) -> Appearance {
        let n = self.feature_count();
        let k = count.min(self.len()).max(1);
        let (sum, mass) = match end {
            Extremity::Head => Appearance::accumulate(n, self.detections[..k].iter().map(|d| &**d)),
            Extremity::Tail => Appearance::accumulate(
                n,
                self.detections[self.len() - k..].iter().map(|d| &**d),
            ),
        };
        Appearance::from_sums(&sum, &mass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(frame: u32, x: f64, f: f64, c: f64) -> Arc<Detection> {
        Arc::new(Detection::new(frame, vec![x], vec![f], vec![c]).unwrap())
    }

    #[test]
    fn single_detection_tracklet() {
        let t = Tracklet::single(det(4, 2.0, 30.0, 0.5));
        assert_eq!(t.len(), 1);
        assert_eq!((t.t_start(), t.t_end()), (4, 4));
        assert_eq!(t.inner_cost(), 0.0);
        assert_eq!(t.end_velocity(), &[0.0]);
        assert_eq!(t.mean_features(), vec![30.0]);
        assert_eq!(t.conf_mass(), &[0.5]);
    }

    #[test]
    fn merge_two_singles() {
        let a = Tracklet::single(det(1, 0.0, 10.0, 0.25));
        let b = Tracklet::single(det(2, 3.0, 20.0, 0.75));
        let m = Tracklet::chain(&[&a, &b], 1.5).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!((m.t_start(), m.t_end()), (1, 2));
        assert_eq!(m.conf_mass(), &[1.0]);
        assert!((m.mean_features()[0] - 17.5).abs() < 1e-12);
        assert_eq!(m.inner_cost(), 1.5);
        assert_eq!(m.end_velocity(), &[3.0]);
        assert_eq!(m.start_velocity(), &[3.0]);
    }

    #[test]
    fn velocity_divides_by_frame_gap() {
        let a = Tracklet::single(det(0, 0.0, 0.0, 1.0));
        let b = Tracklet::single(det(1, 1.0, 0.0, 1.0));
        let c = Tracklet::single(det(5, 9.0, 0.0, 1.0));
        let m = Tracklet::chain(&[&a, &b, &c], 0.0).unwrap();
        assert_eq!(m.start_velocity(), &[1.0]);
        assert_eq!(m.end_velocity(), &[2.0]);
    }

    #[test]
    fn zero_mass_mean_is_zero() {
        let t = Tracklet::single(det(0, 0.0, 99.0, 0.0));
        assert_eq!(t.mean_features(), vec![0.0]);
    }

    #[test]
    fn chain_rejects_overlap() {
        let a = Tracklet::single(det(3, 0.0, 0.0, 1.0));
        let b = Tracklet::single(det(3, 1.0, 0.0, 1.0));
        assert!(Tracklet::chain(&[&a, &b], 0.0).is_err());
        assert!(Tracklet::chain(&[], 0.0).is_err());
    }

    #[test]
    fn extremity_appearance_uses_end_detections() {
        let parts: Vec<_> = (0..6)
            .map(|k| Tracklet::single(det(k, 0.0, k as f64 * 10.0, 1.0)))
            .collect();
        let refs: Vec<_> = parts.iter().collect();
        let m = Tracklet::chain(&refs, 0.0).unwrap();
        let head = m.extremity_appearance(Extremity::Head, 2);
        let tail = m.extremity_appearance(Extremity::Tail, 2);
        assert_eq!(head.mean, vec![5.0]);
        assert_eq!(tail.mean, vec![45.0]);
        assert_eq!(m.extremity_appearance(Extremity::Tail, 100), m.appearance());
        assert_eq!(m.feature_stat(0, Some((Extremity::Head, 2))), (5.0, 2.0));
        assert_eq!(m.feature_stat(0, None), (25.0, 6.0));
    }
}
