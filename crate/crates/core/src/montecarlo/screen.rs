//! Signal intensity on the screen and its tabulated inverse CDF.
//!
//! The amplitude at screen position `Y` is the sum over accessible slits of
//! `sinc(π a u / λ)·exp(i k L_j)`, with `L_j` the exact
//! origin → slit j → screen path length. The envelope direction sine `u` is
//! taken from the slit-pair midpoint, so both slits share one far-field
//! envelope centered on the axis.

use std::f64::consts::PI;
use std::sync::OnceLock;

use thiserror::Error;

use crate::geometry::{classify_slit_access, OpticalLayout, SlitAccess, SourcePoint};
use crate::montecarlo::sampler::PhotonPair;

/// Screen window half-width, in fringe periods.
pub const WINDOW_PERIODS: usize = 40;
pub const BINS_PER_PERIOD: usize = 20;
pub const TABLE_POINTS: usize = 2048;
/// Origin quantization: `w/64` transverse, `x/64` axial.
pub const QUANTIZATION_STEPS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("screen density requested for an origin with no slit access at ({y} m, {depth} m)")]
pub struct NoAccess {
    pub y: f64,
    pub depth: f64,
}

/// Binning of the screen: `±WINDOW_PERIODS` fringe periods about the axis,
/// `BINS_PER_PERIOD` bins per period.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScreenWindow {
    pub lower_edge: f64,
    pub bin_width: f64,
    pub n_bins: usize,
}

impl ScreenWindow {
    pub fn for_layout(layout: &OpticalLayout) -> Self {
        let period = layout.fringe_period();
        let bin_width = period / BINS_PER_PERIOD as f64;
        let n_bins = 2 * WINDOW_PERIODS * BINS_PER_PERIOD;
        ScreenWindow {
            lower_edge: -(n_bins as f64) * bin_width / 2.0,
            bin_width,
            n_bins,
        }
    }

    pub fn upper_edge(&self) -> f64 {
        self.lower_edge + self.n_bins as f64 * self.bin_width
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.n_bins as f64 * self.bin_width
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.lower_edge + (i as f64 + 0.5) * self.bin_width
    }

    pub fn bin_index(&self, y: f64) -> Option<usize> {
        let t = (y - self.lower_edge) / self.bin_width;
        if t >= 0.0 && t < self.n_bins as f64 {
            Some(t as usize)
        } else {
            None
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Normalized screen density for one origin and access class.
#[derive(Debug, Clone)]
pub struct ScreenDensity {
    access: SlitAccess,
    wavenumber: f64,
    envelope_scale: f64,
    screen_distance: f64,
    slit_separation: f64,
    /// `L_A − L_B` on the source side.
    inbound_difference: f64,
    half_width: f64,
    norm: f64,
}

// 8-point Gauss–Legendre on [-1, 1].
const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];
/// Quadrature panels per fringe period for normalization.
const PANELS_PER_PERIOD: usize = 4;

impl ScreenDensity {
    pub fn new(
        origin: SourcePoint,
        access: SlitAccess,
        layout: &OpticalLayout,
    ) -> Result<Self, NoAccess> {
        if access == SlitAccess::None {
            return Err(NoAccess {
                y: origin.transverse,
                depth: origin.depth,
            });
        }
        let s = layout.slit_separation;
        let axial = layout.slit_distance + origin.depth;
        let in_a = (0.5 * s - origin.transverse).hypot(axial);
        let in_b = (-0.5 * s - origin.transverse).hypot(axial);
        let window = ScreenWindow::for_layout(layout);
        let mut density = ScreenDensity {
            access,
            wavenumber: 2.0 * PI / layout.wavelength,
            envelope_scale: PI * layout.slit_width / layout.wavelength,
            screen_distance: layout.screen_distance,
            slit_separation: s,
            // (s/2 − y)² − (s/2 + y)² = −2sy
            inbound_difference: -2.0 * s * origin.transverse / (in_a + in_b),
            half_width: window.half_width(),
            norm: 1.0,
        };
        let panels = 2 * WINDOW_PERIODS * PANELS_PER_PERIOD;
        density.norm =
            density.integrate_unnormalized(-density.half_width, density.half_width, panels);
        Ok(density)
    }

    pub fn access(&self) -> SlitAccess {
        self.access
    }

    /// Screen window half-width over which the density is normalized.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Probability density at screen position `y` (per meter); zero outside
    /// the window.
    pub fn eval(&self, y: f64) -> f64 {
        if y.abs() > self.half_width {
            return 0.0;
        }
        self.unnormalized(y) / self.norm
    }

    pub(crate) fn unnormalized(&self, y: f64) -> f64 {
        let d = self.screen_distance;
        let u = y / y.hypot(d);
        let env = sinc(self.envelope_scale * u);
        let env2 = env * env;
        match self.access {
            SlitAccess::Both => {
                let s = self.slit_separation;
                let out_a = (y - 0.5 * s).hypot(d);
                let out_b = (y + 0.5 * s).hypot(d);
                let diff = self.inbound_difference - 2.0 * s * y / (out_a + out_b);
                env2 * (2.0 + 2.0 * (self.wavenumber * diff).cos())
            }
            SlitAccess::AOnly | SlitAccess::BOnly => env2,
            SlitAccess::None => 0.0,
        }
    }

    fn integrate_unnormalized(&self, lo: f64, hi: f64, panels: usize) -> f64 {
        let h = (hi - lo) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let mid = lo + (p as f64 + 0.5) * h;
            let half = 0.5 * h;
            let mut acc = 0.0;
            for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
                acc += w * (self.unnormalized(mid - half * x) + self.unnormalized(mid + half * x));
            }
            total += acc * half;
        }
        total
    }
}

/// Classifies the pair's origin and builds its screen density.
pub fn signal_screen_density(
    pair: &PhotonPair,
    layout: &OpticalLayout,
) -> Result<ScreenDensity, NoAccess> {
    let access = classify_slit_access(pair.origin, layout);
    ScreenDensity::new(pair.origin, access, layout)
}

/// Inverse-CDF sampler over a `TABLE_POINTS` tabulation of one density,
/// piecewise linear between nodes.
#[derive(Debug, Clone)]
pub struct DensityTable {
    density: ScreenDensity,
    lower: f64,
    step: f64,
    cdf: Vec<f64>,
}

impl DensityTable {
    pub fn new(density: ScreenDensity) -> Self {
        let lower = -density.half_width;
        let step = 2.0 * density.half_width / (TABLE_POINTS - 1) as f64;
        let mut cdf = Vec::with_capacity(TABLE_POINTS);
        cdf.push(0.0);
        let mut prev = density.unnormalized(lower);
        for i in 1..TABLE_POINTS {
            let next = density.unnormalized(lower + i as f64 * step);
            cdf.push(cdf[i - 1] + 0.5 * step * (prev + next));
            prev = next;
        }
        DensityTable {
            density,
            lower,
            step,
            cdf,
        }
    }

    /// Maps `u ∈ [0, 1)` to a screen position.
    pub fn sample(&self, u: f64) -> f64 {
        let total = self.cdf[TABLE_POINTS - 1];
        let target = u * total;
        let i = self
            .cdf
            .partition_point(|&c| c <= target)
            .saturating_sub(1)
            .min(TABLE_POINTS - 2);
        let x0 = self.lower + i as f64 * self.step;
        let p0 = self.density.unnormalized(x0);
        let p1 = self.density.unnormalized(x0 + self.step);
        let r = (target - self.cdf[i]).max(0.0);
        // solve p0·t + (p1 − p0)·t²/(2h) = r on [0, h]
        let disc = (p0 * p0 + 2.0 * (p1 - p0) * r / self.step).max(0.0);
        let denom = p0 + disc.sqrt();
        let t = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        x0 + t.clamp(0.0, self.step)
    }
}

/// Lazily built density tables keyed by quantized origin. Both-access
/// densities depend on the origin; single-access densities do not, so one
/// table serves all of them.
pub struct TableCache {
    layout: OpticalLayout,
    y_max: f64,
    step_y: f64,
    step_z: f64,
    ny: usize,
    nz: usize,
    both: Vec<OnceLock<DensityTable>>,
    single: OnceLock<DensityTable>,
}

impl TableCache {
    pub fn new(layout: &OpticalLayout) -> Self {
        let y_max = layout.slab_half_width();
        let step_y = layout.source_width / QUANTIZATION_STEPS as f64;
        let ny = ((2.0 * y_max / step_y).ceil() as usize).max(1);
        let (step_z, nz) = if layout.crystal_thickness > 0.0 {
            (
                layout.crystal_thickness / QUANTIZATION_STEPS as f64,
                QUANTIZATION_STEPS,
            )
        } else {
            (0.0, 1)
        };
        TableCache {
            layout: *layout,
            y_max,
            step_y,
            step_z,
            ny,
            nz,
            both: (0..ny * nz).map(|_| OnceLock::new()).collect(),
            single: OnceLock::new(),
        }
    }

    /// Center of the quantization cell holding `p`.
    pub fn quantize(&self, p: SourcePoint) -> SourcePoint {
        let (iy, iz) = self.cell(p);
        self.cell_center(iy, iz)
    }

    fn cell(&self, p: SourcePoint) -> (usize, usize) {
        let iy = (((p.transverse + self.y_max) / self.step_y).floor().max(0.0) as usize)
            .min(self.ny - 1);
        let iz = if self.step_z > 0.0 {
            ((p.depth / self.step_z).floor().max(0.0) as usize).min(self.nz - 1)
        } else {
            0
        };
        (iy, iz)
    }

    fn cell_center(&self, iy: usize, iz: usize) -> SourcePoint {
        SourcePoint::new(
            -self.y_max + (iy as f64 + 0.5) * self.step_y,
            (iz as f64 + 0.5) * self.step_z,
        )
    }

    pub fn table(&self, origin: SourcePoint, access: SlitAccess) -> Option<&DensityTable> {
        match access {
            SlitAccess::None => None,
            SlitAccess::AOnly | SlitAccess::BOnly => Some(self.single.get_or_init(|| {
                let d =
                    ScreenDensity::new(SourcePoint::new(0.0, 0.0), SlitAccess::AOnly, &self.layout)
                        .expect("single access");
                DensityTable::new(d)
            })),
            SlitAccess::Both => {
                let (iy, iz) = self.cell(origin);
                Some(self.both[iz * self.ny + iy].get_or_init(|| {
                    let center = self.cell_center(iy, iz);
                    let d = ScreenDensity::new(center, SlitAccess::Both, &self.layout)
                        .expect("both access");
                    DensityTable::new(d)
                }))
            }
        }
    }
}
