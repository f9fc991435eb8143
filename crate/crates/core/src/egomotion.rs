//! Egomotion tracks and their integration into orientation and translation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance when checking query times against the track span.
const SPAN_EPS: f64 = 1e-9;

/// One egomotion measurement in the agent frame at time `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoSample {
    pub t: f64,
    /// rad/s, positive turns +x towards +z (a left turn).
    pub yaw_rate: f64,
    /// `(vx, vz)` in m/s.
    pub velocity: [f64; 2],
}

/// Timestamped egomotion rates with strictly increasing times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<EgoSample>", into = "Vec<EgoSample>")]
pub struct EgomotionTrack {
    samples: Vec<EgoSample>,
}

impl TryFrom<Vec<EgoSample>> for EgomotionTrack {
    type Error = Error;
    fn try_from(samples: Vec<EgoSample>) -> Result<Self> {
        Self::new(samples)
    }
}

impl From<EgomotionTrack> for Vec<EgoSample> {
    fn from(t: EgomotionTrack) -> Self {
        t.samples
    }
}

impl EgomotionTrack {
    pub fn new(samples: Vec<EgoSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("empty egomotion track".into()));
        }
        for s in &samples {
            if !(s.t.is_finite() && s.yaw_rate.is_finite() && s.velocity.iter().all(|v| v.is_finite())) {
                return Err(Error::InvalidArgument(format!("non-finite egomotion sample at t={}", s.t)));
            }
        }
        if let Some(w) = samples.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidArgument(format!(
                "egomotion timestamps not strictly increasing: {} then {}",
                w[0].t, w[1].t
            )));
        }
        Ok(Self { samples })
    }

    /// Constant rates sampled at `times`.
    pub fn constant(times: &[f64], yaw_rate: f64, velocity: [f64; 2]) -> Result<Self> {
        Self::new(times.iter().map(|&t| EgoSample { t, yaw_rate, velocity }).collect())
    }

    pub fn samples(&self) -> &[EgoSample] {
        &self.samples
    }

    pub fn start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    fn check_span(&self, t: f64) -> Result<()> {
        if t < self.start() - SPAN_EPS || t > self.end() + SPAN_EPS || !t.is_finite() {
            return Err(Error::OutsideTrack { t, start: self.start(), end: self.end() });
        }
        Ok(())
    }

    /// ∫ over `[a, b]` of a piecewise-constant rate; `rate(k)` is the value on
    /// the interval between samples `k` and `k + 1`.
    fn integrate(&self, a: f64, b: f64, rate: impl Fn(usize) -> [f64; 2]) -> Result<[f64; 2]> {
        self.check_span(a)?;
        self.check_span(b)?;
        if b < a {
            return Err(Error::InvalidArgument(format!("integration bounds reversed: {a} > {b}")));
        }
        let mut acc = [0.0; 2];
        for k in 0..self.samples.len() - 1 {
            let lo = self.samples[k].t.max(a);
            let hi = self.samples[k + 1].t.min(b);
            if hi > lo {
                let r = rate(k);
                acc[0] += r[0] * (hi - lo);
                acc[1] += r[1] * (hi - lo);
            }
        }
        Ok(acc)
    }

    /// Heading change over `[t0, ti]`: `Σ α̇(t_j)·(t_j − t_{j−1})`, the rate
    /// sampled at the end of each interval.
    pub fn integrate_orientation(&self, t0: f64, ti: f64) -> Result<f64> {
        Ok(self.integrate(t0, ti, |k| [self.samples[k + 1].yaw_rate, 0.0])?[0])
    }

    /// Displacement over `[ti, tau]`: `Σ q̇(t_j)·(t_{j+1} − t_j)`, the rate
    /// sampled at the start of each interval.
    pub fn integrate_translation(&self, ti: f64, tau: f64) -> Result<[f64; 2]> {
        self.integrate(ti, tau, |k| self.samples[k].velocity)
    }

    /// Same track with velocities rotated into the orientation the agent had
    /// at `t0`, so integrated translations are expressed in that frame.
    pub fn aligned(&self, t0: f64) -> Result<Self> {
        self.check_span(t0)?;
        let start = self.start();
        let base = self.integrate_orientation(start, t0)?;
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let heading = self.integrate_orientation(start, s.t)? - base;
                let (sn, cs) = heading.sin_cos();
                let [vx, vz] = s.velocity;
                Ok(EgoSample { velocity: [cs * vx - sn * vz, sn * vx + cs * vz], ..*s })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { samples })
    }

    /// Samples with `a ≤ t ≤ b`.
    pub fn slice(&self, a: f64, b: f64) -> Result<Self> {
        Self::new(self.samples.iter().filter(|s| s.t >= a - SPAN_EPS && s.t <= b + SPAN_EPS).copied().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn times(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn empty_interval_is_zero() {
        let tr = EgomotionTrack::constant(&times(5, 0.1), 0.3, [1.0, 2.0]).unwrap();
        assert_eq!(tr.integrate_orientation(0.2, 0.2).unwrap(), 0.0);
        assert_eq!(tr.integrate_translation(0.3, 0.3).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn constant_rates() {
        let tr = EgomotionTrack::constant(&times(21, 0.1), 0.1, [0.0, 5.0]).unwrap();
        assert!((tr.integrate_orientation(0.0, 2.0).unwrap() - 0.2).abs() < 1e-12);
        let q = tr.integrate_translation(0.0, 0.3).unwrap();
        assert!(q[0].abs() < 1e-12 && (q[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn piecewise_track_matches_direct_sums() {
        let ts = [0.0, 0.1, 0.25, 0.3, 0.5, 0.65];
        let rates = [0.4, -0.2, 1.0, 0.3, -0.7, 0.05];
        let vel = [[1.0, 2.0], [0.5, -1.0], [3.0, 0.0], [-2.0, 4.0], [0.0, 1.0], [9.0, 9.0]];
        let tr =
            EgomotionTrack::new((0..6).map(|i| EgoSample { t: ts[i], yaw_rate: rates[i], velocity: vel[i] }).collect())
                .unwrap();
        for i0 in 0..6 {
            for i in i0..6 {
                let alpha: f64 = (i0 + 1..=i).map(|j| rates[j] * (ts[j] - ts[j - 1])).sum();
                assert!((tr.integrate_orientation(ts[i0], ts[i]).unwrap() - alpha).abs() < 1e-12);
                let mut q = [0.0; 2];
                for j in i0..i {
                    q[0] += vel[j][0] * (ts[j + 1] - ts[j]);
                    q[1] += vel[j][1] * (ts[j + 1] - ts[j]);
                }
                let got = tr.integrate_translation(ts[i0], ts[i]).unwrap();
                assert!((got[0] - q[0]).abs() < 1e-12 && (got[1] - q[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn outside_span_and_bad_tracks() {
        let tr = EgomotionTrack::constant(&times(3, 0.1), 0.0, [0.0, 1.0]).unwrap();
        assert!(matches!(tr.integrate_orientation(-0.1, 0.1), Err(Error::OutsideTrack { .. })));
        assert!(matches!(tr.integrate_translation(0.0, 0.5), Err(Error::OutsideTrack { .. })));
        assert!(tr.integrate_orientation(0.2, 0.1).is_err());
        assert!(EgomotionTrack::constant(&[0.0, 0.0], 0.0, [0.0; 2]).is_err());
        assert!(EgomotionTrack::new(vec![]).is_err());
    }

    #[test]
    fn aligned_rotates_velocity_by_heading() {
        // Quarter turn over the first interval, then straight.
        let tr = EgomotionTrack::new(vec![
            EgoSample { t: 0.0, yaw_rate: 0.0, velocity: [0.0, 1.0] },
            EgoSample { t: 1.0, yaw_rate: std::f64::consts::FRAC_PI_2, velocity: [0.0, 1.0] },
            EgoSample { t: 2.0, yaw_rate: 0.0, velocity: [0.0, 1.0] },
        ])
        .unwrap();
        let a = tr.aligned(0.0).unwrap();
        let v = a.samples()[1].velocity;
        assert!((v[0] + 1.0).abs() < 1e-12 && v[1].abs() < 1e-12, "{v:?}");
        let same = tr.aligned(1.0).unwrap();
        assert!((same.samples()[1].velocity[1] - 1.0).abs() < 1e-12);
    }
}
