use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::{OpticalLayout, SourcePoint};

/// Keyed factory for per-pair random streams. Every pair index owns its own
/// ChaCha stream under the run seed, so the values drawn for a pair never
/// depend on how pairs are partitioned across workers.
#[derive(Clone)]
pub struct StreamKey {
    base: ChaCha8Rng,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn stream(&self, pair_index: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(pair_index);
        rng
    }
}

/// One emission event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonPair {
    pub origin: SourcePoint,
    pub signal_angle: f64,
    /// `-signal_angle + δ`.
    pub idler_angle: f64,
}

impl PhotonPair {
    /// Correlation deviation `δ`.
    pub fn deviation(&self) -> f64 {
        self.idler_angle + self.signal_angle
    }
}

/// Half-range of the uniform signal-angle draw: both slits plus three
/// standard deviations of correlation tail.
pub fn signal_angle_range(layout: &OpticalLayout) -> f64 {
    layout.slit_separation / (2.0 * layout.slit_distance) + 3.0 * layout.phi0
}

/// Draws one pair: origin uniform over the emission slab, signal angle
/// uniform over `±signal_angle_range`, and in-plane deviation `δ ~ N(0, φ₀)`.
pub fn sample_pair<R: Rng + ?Sized>(rng: &mut R, layout: &OpticalLayout) -> PhotonPair {
    let y_max = layout.slab_half_width();
    let transverse = y_max * (2.0 * rng.random::<f64>() - 1.0);
    let depth = layout.crystal_thickness * rng.random::<f64>();
    let theta_max = signal_angle_range(layout);
    let signal_angle = theta_max * (2.0 * rng.random::<f64>() - 1.0);
    let z: f64 = rng.sample(StandardNormal);
    let delta = layout.phi0 * z;
    PhotonPair {
        origin: SourcePoint::new(transverse, depth),
        signal_angle,
        idler_angle: -signal_angle + delta,
    }
}

/// Two-axis deviation `(δx, δy)`, each `N(0, φ₀)`. Its magnitude follows the
/// pair-detection shape `(φ/φ₀)·exp(−½(φ/φ₀)²)`.
pub fn sample_two_axis_deviation<R: Rng + ?Sized>(rng: &mut R, phi0: f64) -> (f64, f64) {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    (phi0 * a, phi0 * b)
}

/// The pair-detection shape as it is usually printed,
/// `√(2π)(φ/φ₀)·exp(−½(φ/φ₀)²)`. Not a normalized density.
pub fn pair_detection_shape(phi: f64, phi0: f64) -> f64 {
    let r = phi / phi0;
    (2.0 * std::f64::consts::PI).sqrt() * r * (-0.5 * r * r).exp()
}

/// Normalized magnitude density `(φ/φ₀²)·exp(−½(φ/φ₀)²)` on `φ >= 0`.
pub fn deviation_magnitude_density(phi: f64, phi0: f64) -> f64 {
    if phi < 0.0 {
        return 0.0;
    }
    let r = phi / phi0;
    r / phi0 * (-0.5 * r * r).exp()
}

pub fn deviation_magnitude_cdf(phi: f64, phi0: f64) -> f64 {
    if phi <= 0.0 {
        return 0.0;
    }
    let r = phi / phi0;
    1.0 - (-0.5 * r * r).exp()
}

/// Exact one-sample Kolmogorov–Smirnov statistic of two-axis deviation
/// magnitudes drawn from pair streams `0..n` against the closed-form CDF.
pub fn two_axis_ks_statistic(seed: u64, n: u64, phi0: f64) -> f64 {
    let key = StreamKey::new(seed);
    let mut mags: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = sample_two_axis_deviation(&mut key.stream(i), phi0);
            a.hypot(b)
        })
        .collect();
    mags.sort_by(|a, b| a.total_cmp(b));
    let nf = n as f64;
    mags.iter()
        .enumerate()
        .map(|(i, &m)| {
            let f = deviation_magnitude_cdf(m, phi0);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max)
}
