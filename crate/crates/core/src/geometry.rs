//! Planar bench geometry: the source aperture, the activation slab behind it,
//! and which slits each emission point can illuminate.
//!
//! Coordinates: `y` is transverse (slit A sits at `+s/2`, slit B at `-s/2`),
//! the optical axis points from the crystal toward the slits. The aperture
//! plane is at axial position 0, the slit plane at `d`, and emission points
//! sit at depth `ζ >= 0` behind the aperture.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Closed-interval slack for access boundaries, relative to `w/2`.
const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayoutError {
    #[error("{field} must be finite and strictly positive (got {value})")]
    NonPositive { field: &'static str, value: f64 },
    #[error("idler_distance must be at least 100 x slit_distance ({required} m), got {value} m")]
    IdlerTooClose { value: f64, required: f64 },
    #[error("small-angle validity violated: {quantity} = {value} rad, limit {limit} rad")]
    SmallAngle {
        quantity: &'static str,
        value: f64,
        limit: f64,
    },
    #[error("crystal_thickness {thickness} m exceeds the zone apex depth w*d/s = {apex} m")]
    ZoneContainment { thickness: f64, apex: f64 },
}

impl LayoutError {
    /// Name of the offending layout field.
    pub fn field(&self) -> &'static str {
        match self {
            LayoutError::NonPositive { field, .. } => field,
            LayoutError::IdlerTooClose { .. } => "idler_distance",
            LayoutError::SmallAngle { quantity, .. } => {
                if quantity.starts_with("s/") {
                    "slit_separation"
                } else {
                    "source_width"
                }
            }
            LayoutError::ZoneContainment { .. } => "crystal_thickness",
        }
    }
}

/// Operation inputs outside their mathematical domain.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{quantity} = {value} is outside the domain {domain}")]
pub struct DomainError {
    pub quantity: &'static str,
    pub value: f64,
    pub domain: &'static str,
}

/// Every length and angle of the bench, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalLayout {
    pub wavelength: f64,
    /// One-dimensional standard deviation of the pair angular deviation.
    pub phi0: f64,
    /// Aperture width at the crystal exit face.
    pub source_width: f64,
    /// Axial depth of the activation slab behind the aperture.
    pub crystal_thickness: f64,
    pub slit_distance: f64,
    /// Center-to-center.
    pub slit_separation: f64,
    pub slit_width: f64,
    pub idler_distance: f64,
    pub detector_angular_radius: f64,
    /// Slit plane to screen.
    pub screen_distance: f64,
}

pub const DEFAULT_SCREEN_DISTANCE: f64 = 1.0;
pub const IDLER_DISTANCE_FACTOR: f64 = 100.0;
pub const SLIT_WIDTH_FRACTION: f64 = 1.0 / 20.0;

impl OpticalLayout {
    /// Builds a layout from the physical core, filling the bench plumbing
    /// with defaults: `a = s/20`, `D = 1 m`, `d' = 100 d`, `ρ = 2 φ₀`.
    pub fn with_defaults(
        wavelength: f64,
        phi0: f64,
        source_width: f64,
        crystal_thickness: f64,
        slit_distance: f64,
        slit_separation: f64,
    ) -> Self {
        OpticalLayout {
            wavelength,
            phi0,
            source_width,
            crystal_thickness,
            slit_distance,
            slit_separation,
            slit_width: slit_separation * SLIT_WIDTH_FRACTION,
            idler_distance: IDLER_DISTANCE_FACTOR * slit_distance,
            detector_angular_radius: 2.0 * phi0,
            screen_distance: DEFAULT_SCREEN_DISTANCE,
        }
    }

    /// The concrete bench: λ = 702 nm, φ₀ = 2 mrad, s/d = 6φ₀ with d = 600 mm,
    /// w = 1.75e-2 mm, and the crystal cut at half the zone depth.
    pub fn paper() -> Self {
        let wavelength = 702e-9;
        let phi0 = 2e-3;
        let d = 0.6;
        let s = 6.0 * phi0 * d;
        let w = 1.75e-5;
        Self::with_defaults(wavelength, phi0, w, w * d / (2.0 * s), d, s)
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        self.validate_fields(false)
    }

    /// Same as [`validate`](Self::validate) but admits a zero crystal
    /// thickness (all emitters on the aperture plane).
    pub fn validate_allowing_thin_source(&self) -> Result<(), LayoutError> {
        self.validate_fields(true)
    }

    fn validate_fields(&self, allow_zero_thickness: bool) -> Result<(), LayoutError> {
        let fields = [
            ("wavelength", self.wavelength),
            ("phi0", self.phi0),
            ("source_width", self.source_width),
            ("crystal_thickness", self.crystal_thickness),
            ("slit_distance", self.slit_distance),
            ("slit_separation", self.slit_separation),
            ("slit_width", self.slit_width),
            ("idler_distance", self.idler_distance),
            ("detector_angular_radius", self.detector_angular_radius),
            ("screen_distance", self.screen_distance),
        ];
        for (field, value) in fields {
            let zero_ok = allow_zero_thickness && field == "crystal_thickness" && value == 0.0;
            if !(value.is_finite() && (value > 0.0 || zero_ok)) {
                return Err(LayoutError::NonPositive { field, value });
            }
        }
        let required = IDLER_DISTANCE_FACTOR * self.slit_distance;
        if self.idler_distance < required {
            return Err(LayoutError::IdlerTooClose {
                value: self.idler_distance,
                required,
            });
        }
        let sd = self.slit_separation / self.slit_distance;
        if sd >= 0.1 {
            return Err(LayoutError::SmallAngle {
                quantity: "s/d",
                value: sd,
                limit: 0.1,
            });
        }
        let wd = self.source_width / self.slit_distance;
        if wd >= 0.01 {
            return Err(LayoutError::SmallAngle {
                quantity: "w/d",
                value: wd,
                limit: 0.01,
            });
        }
        let apex = zone_axial_extent(self);
        if self.crystal_thickness > apex {
            return Err(LayoutError::ZoneContainment {
                thickness: self.crystal_thickness,
                apex,
            });
        }
        Ok(())
    }

    /// Half-width of the emission slab used for sampling: the widest
    /// single-access extent, `w/2 + (s/2d)·x`.
    pub fn slab_half_width(&self) -> f64 {
        0.5 * self.source_width
            + self.slit_separation * self.crystal_thickness / (2.0 * self.slit_distance)
    }

    /// Near-axis fringe period on the screen, `λD/s`.
    pub fn fringe_period(&self) -> f64 {
        self.wavelength * self.screen_distance / self.slit_separation
    }

    /// Transverse positions of the slit centers `(A, B)`.
    pub fn slit_centers(&self) -> (f64, f64) {
        (0.5 * self.slit_separation, -0.5 * self.slit_separation)
    }
}

/// Which slits an emission point can illuminate through the aperture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SlitAccess {
    None,
    AOnly,
    BOnly,
    Both,
}

impl SlitAccess {
    pub fn reaches_a(self) -> bool {
        matches!(self, SlitAccess::AOnly | SlitAccess::Both)
    }

    pub fn reaches_b(self) -> bool {
        matches!(self, SlitAccess::BOnly | SlitAccess::Both)
    }

    pub fn slit_count(self) -> u32 {
        self.reaches_a() as u32 + self.reaches_b() as u32
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SlitAccess::None => "NONE",
            SlitAccess::AOnly => "A_ONLY",
            SlitAccess::BOnly => "B_ONLY",
            SlitAccess::Both => "BOTH",
        }
    }
}

/// An emission point: transverse offset `y` and depth `ζ` behind the aperture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourcePoint {
    pub transverse: f64,
    pub depth: f64,
}

impl SourcePoint {
    pub fn new(transverse: f64, depth: f64) -> Self {
        SourcePoint { transverse, depth }
    }

    pub fn mirrored(self) -> Self {
        SourcePoint {
            transverse: -self.transverse,
            depth: self.depth,
        }
    }
}

/// Depth `w·d/s` at which the view cones toward the two slit centers
/// through the aperture stop cease to overlap.
pub fn zone_axial_extent(layout: &OpticalLayout) -> f64 {
    layout.source_width * layout.slit_distance / layout.slit_separation
}

/// Classifies a point by the small-angle aperture crossing
/// `y₀ = y ± ζ·s/(2d)` of its rays toward each slit center. Boundaries are
/// closed.
pub fn classify_slit_access(p: SourcePoint, layout: &OpticalLayout) -> SlitAccess {
    let half = 0.5 * layout.source_width;
    let limit = half * (1.0 + BOUNDARY_SLACK);
    let shift = p.depth * layout.slit_separation / (2.0 * layout.slit_distance);
    let a = (p.transverse + shift).abs() <= limit;
    let b = (p.transverse - shift).abs() <= limit;
    match (a, b) {
        (true, true) => SlitAccess::Both,
        (true, false) => SlitAccess::AOnly,
        (false, true) => SlitAccess::BOnly,
        (false, false) => SlitAccess::None,
    }
}

/// Area-weighted share of slit-accessible slab points that see both slits:
/// `(wx − sx²/2d) / (wx + sx²/2d)`.
pub fn both_access_fraction(layout: &OpticalLayout) -> Result<f64, DomainError> {
    let x = layout.crystal_thickness;
    if x > zone_axial_extent(layout) {
        return Err(DomainError {
            quantity: "crystal_thickness",
            value: x,
            domain: "[0, w*d/s]",
        });
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let w = layout.source_width;
    let tail = layout.slit_separation * x * x / (2.0 * layout.slit_distance);
    Ok((w * x - tail) / (w * x + tail))
}

/// Share of counts beyond the slits that are double-slit counts, given the
/// both-access share of emission points. Both-access points feed two slits,
/// single-access points one.
pub fn double_slit_count_fraction(p_both: f64) -> Result<f64, DomainError> {
    if !(0.0..=1.0).contains(&p_both) {
        return Err(DomainError {
            quantity: "p_both",
            value: p_both,
            domain: "[0, 1]",
        });
    }
    Ok(2.0 * p_both / (1.0 + p_both))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Aperture-plane crossing of the straight ray from `(y, -ζ)` to the slit
    /// center at `(slit_y, d)`, without the small-angle shortcut.
    fn exact_crossing(p: SourcePoint, slit_y: f64, d: f64) -> f64 {
        p.transverse + p.depth * (slit_y - p.transverse) / (d + p.depth)
    }

    fn exact_access(p: SourcePoint, layout: &OpticalLayout) -> SlitAccess {
        let half = 0.5 * layout.source_width;
        let (sa, sb) = layout.slit_centers();
        let a = exact_crossing(p, sa, layout.slit_distance).abs() <= half;
        let b = exact_crossing(p, sb, layout.slit_distance).abs() <= half;
        match (a, b) {
            (true, true) => SlitAccess::Both,
            (true, false) => SlitAccess::AOnly,
            (false, true) => SlitAccess::BOnly,
            (false, false) => SlitAccess::None,
        }
    }

    /// Scans depth until the two view cones (exact rays through the aperture
    /// edges toward each slit center) no longer share an on-axis point.
    fn ray_scan_zone_extent(layout: &OpticalLayout, steps: usize) -> f64 {
        let apex_guess = 4.0 * zone_axial_extent(layout);
        let dz = apex_guess / steps as f64;
        let half = 0.5 * layout.source_width;
        let (sa, sb) = layout.slit_centers();
        let d = layout.slit_distance;
        let mut last_overlap = 0.0;
        for i in 0..=steps {
            let z = i as f64 * dz;
            // For depth z, the set of y with |crossing toward slit| <= w/2 is
            // an interval; intersect the A and B intervals.
            let interval = |slit: f64| {
                // crossing = y (1 - z/(d+z)) + z slit/(d+z)
                let k = 1.0 - z / (d + z);
                let c = z * slit / (d + z);
                ((-half - c) / k, (half - c) / k)
            };
            let (a_lo, a_hi) = interval(sa);
            let (b_lo, b_hi) = interval(sb);
            if a_lo.max(b_lo) <= a_hi.min(b_hi) {
                last_overlap = z;
            } else {
                break;
            }
        }
        last_overlap
    }

    #[test]
    fn zone_extent_matches_quoted_distance() {
        let mut l = OpticalLayout::paper();
        l.source_width = 1.75e-5;
        let z = zone_axial_extent(&l);
        assert!((z - 1.458e-3).abs() < 1e-6, "{z}");
        assert_eq!(format!("{:.2}", z * 1e3), "1.46");
    }

    #[test]
    fn zone_extent_zero_width() {
        let mut l = OpticalLayout::paper();
        l.source_width = 0.0;
        assert_eq!(zone_axial_extent(&l), 0.0);
        assert!(matches!(
            l.validate(),
            Err(LayoutError::NonPositive {
                field: "source_width",
                ..
            })
        ));
    }

    #[test]
    fn zone_extent_agrees_with_ray_scan() {
        let mut l = OpticalLayout::paper();
        l.source_width = 2e-5;
        l.slit_distance = 0.5;
        l.slit_separation = 5e-3;
        let z = zone_axial_extent(&l);
        assert!((z - 2.0e-3).abs() < 1e-15);
        let scanned = ray_scan_zone_extent(&l, 400_000);
        // exact rays shift the apex by O(z/d) relative
        assert!((scanned - z).abs() / z < 5e-3, "{scanned} vs {z}");
    }

    #[test]
    fn zone_extent_scaling_grid() {
        let base = OpticalLayout::paper();
        let z0 = zone_axial_extent(&base);
        for i in 1..=10 {
            for j in 1..=10 {
                for k in 1..=10 {
                    let mut l = base;
                    l.source_width *= i as f64;
                    l.slit_distance *= j as f64;
                    l.slit_separation *= k as f64;
                    let expected = z0 * i as f64 * j as f64 / k as f64;
                    let z = zone_axial_extent(&l);
                    assert!((z - expected).abs() <= 1e-12 * expected);
                }
            }
        }
    }

    #[test]
    fn aperture_center_sees_both() {
        let l = OpticalLayout::paper();
        assert_eq!(
            classify_slit_access(SourcePoint::new(0.0, 0.0), &l),
            SlitAccess::Both
        );
    }

    #[test]
    fn apex_is_the_last_both_point() {
        let mut l = OpticalLayout::paper();
        l.crystal_thickness = zone_axial_extent(&l);
        let apex = l.crystal_thickness;
        assert_eq!(
            classify_slit_access(SourcePoint::new(0.0, apex), &l),
            SlitAccess::Both
        );
        for &y in &[1e-9, -1e-9, 1e-7] {
            assert_ne!(
                classify_slit_access(SourcePoint::new(y, apex), &l),
                SlitAccess::Both
            );
        }
        for eps in [1e-9, 1e-7, 1e-5] {
            let c = classify_slit_access(SourcePoint::new(0.0, apex + eps), &l);
            assert_ne!(c, SlitAccess::Both);
        }
        // the exact-ray apex sits deeper by a relative O(x/d)
        let exact_apex = apex * (1.0 + 2.0 * apex / l.slit_distance);
        assert_eq!(
            exact_access(SourcePoint::new(0.0, exact_apex), &l),
            SlitAccess::None
        );
    }

    #[test]
    fn small_angle_band_matches_exact_rays() {
        let l = OpticalLayout::paper();
        let (sa, sb) = l.slit_centers();
        let d = l.slit_distance;
        let shift = |z: f64| z * l.slit_separation / (2.0 * d);
        let mut worst: f64 = 0.0;
        for i in 0..=200 {
            let z = l.crystal_thickness * i as f64 / 200.0;
            for j in 0..=200 {
                let y = -l.slab_half_width() + 2.0 * l.slab_half_width() * j as f64 / 200.0;
                let p = SourcePoint::new(y, z);
                worst = worst.max((exact_crossing(p, sa, d) - (y + shift(z))).abs());
                worst = worst.max((exact_crossing(p, sb, d) - (y - shift(z))).abs());
            }
        }
        assert!(worst < 2e-3 * l.source_width, "worst {worst}");
    }

    #[test]
    fn edge_point_is_accessible() {
        let l = OpticalLayout::paper();
        let c = classify_slit_access(SourcePoint::new(0.5 * l.source_width, 0.0), &l);
        assert!(c.reaches_a());
        assert_eq!(c, SlitAccess::Both);
        let just_outside = SourcePoint::new(0.5 * l.source_width * (1.0 + 1e-9), 0.0);
        assert_eq!(classify_slit_access(just_outside, &l), SlitAccess::None);
    }

    #[test]
    fn paper_fraction_is_three_fifths() {
        let l = OpticalLayout::paper();
        let p = both_access_fraction(&l).unwrap();
        assert!((p - 0.6).abs() < 1e-12, "{p}");
        assert!((l.crystal_thickness - 7.29e-4).abs() < 1e-6);
    }

    #[test]
    fn fraction_limits() {
        let mut l = OpticalLayout::paper();
        l.crystal_thickness = 1e-15;
        assert!((both_access_fraction(&l).unwrap() - 1.0).abs() < 1e-9);
        l.crystal_thickness = zone_axial_extent(&l);
        assert!((both_access_fraction(&l).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        l.crystal_thickness *= 1.0001;
        assert!(both_access_fraction(&l).is_err());
    }

    #[test]
    fn fraction_at_apex_matches_rejection_sampling() {
        use rand::{Rng, SeedableRng};
        let mut l = OpticalLayout::paper();
        l.crystal_thickness = zone_axial_extent(&l);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let ymax = l.slab_half_width();
        let (mut both, mut accessible) = (0u64, 0u64);
        for _ in 0..1_000_000 {
            let p = SourcePoint::new(
                rng.random_range(-ymax..ymax),
                rng.random_range(0.0..l.crystal_thickness),
            );
            match classify_slit_access(p, &l) {
                SlitAccess::None => {}
                SlitAccess::Both => {
                    both += 1;
                    accessible += 1;
                }
                _ => accessible += 1,
            }
        }
        let est = both as f64 / accessible as f64;
        let sigma = (est * (1.0 - est) / accessible as f64).sqrt();
        assert!((est - 1.0 / 3.0).abs() < 3.0 * sigma, "{est} ± {sigma}");
    }

    #[test]
    fn count_fraction_values() {
        assert!((double_slit_count_fraction(0.6).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(double_slit_count_fraction(0.0).unwrap(), 0.0);
        assert_eq!(double_slit_count_fraction(1.0).unwrap(), 1.0);
        assert!(double_slit_count_fraction(-0.1).is_err());
        assert!(double_slit_count_fraction(1.1).is_err());
        assert!(double_slit_count_fraction(f64::NAN).is_err());
    }

    #[test]
    fn layout_invariants() {
        let l = OpticalLayout::paper();
        l.validate().unwrap();
        let mut bad = l;
        bad.idler_distance = 50.0 * l.slit_distance;
        assert!(matches!(
            bad.validate(),
            Err(LayoutError::IdlerTooClose { .. })
        ));
        let mut bad = l;
        bad.slit_separation = 0.1 * l.slit_distance;
        assert_eq!(bad.validate().unwrap_err().field(), "slit_separation");
        let mut bad = l;
        bad.source_width = 0.02 * l.slit_distance;
        assert_eq!(bad.validate().unwrap_err().field(), "source_width");
        let mut bad = l;
        bad.crystal_thickness = 1.01 * zone_axial_extent(&l);
        assert!(matches!(
            bad.validate(),
            Err(LayoutError::ZoneContainment { .. })
        ));
        let mut thin = l;
        thin.crystal_thickness = 0.0;
        assert!(thin.validate().is_err());
        thin.validate_allowing_thin_source().unwrap();
    }

    proptest! {
        #[test]
        fn classification_agrees_with_exact_rays(
            u in -1.0f64..1.0,
            v in 0.0f64..1.0,
            scale_w in 0.5f64..2.0,
            scale_s in 0.5f64..2.0,
        ) {
            let mut l = OpticalLayout::paper();
            l.source_width *= scale_w;
            l.slit_separation *= scale_s;
            l.crystal_thickness = 0.5 * zone_axial_extent(&l);
            let p = SourcePoint::new(u * l.slab_half_width(), v * l.crystal_thickness);
            let band = 2e-3 * l.source_width;
            let half = 0.5 * l.source_width;
            let shift = p.depth * l.slit_separation / (2.0 * l.slit_distance);
            let near_boundary = ((p.transverse + shift).abs() - half).abs() < band
                || ((p.transverse - shift).abs() - half).abs() < band;
            if !near_boundary {
                prop_assert_eq!(classify_slit_access(p, &l), exact_access(p, &l));
            }
        }

        #[test]
        fn mirror_symmetry(u in -1.0f64..1.0, v in 0.0f64..1.0) {
            let l = OpticalLayout::paper();
            let p = SourcePoint::new(u * l.slab_half_width(), v * l.crystal_thickness);
            let c = classify_slit_access(p, &l);
            let m = classify_slit_access(p.mirrored(), &l);
            prop_assert_eq!(c == SlitAccess::AOnly, m == SlitAccess::BOnly);
            prop_assert_eq!(c == SlitAccess::Both, m == SlitAccess::Both);
        }

        #[test]
        fn fractions_are_monotone(t1 in 0.001f64..1.0, t2 in 0.001f64..1.0, p1 in 0.0f64..1.0, p2 in 0.0f64..1.0) {
            let mut a = OpticalLayout::paper();
            let mut b = a;
            let apex = zone_axial_extent(&a);
            a.crystal_thickness = t1.min(t2) * apex;
            b.crystal_thickness = t1.max(t2) * apex;
            prop_assert!(both_access_fraction(&a).unwrap() >= both_access_fraction(&b).unwrap());
            let (lo, hi) = (p1.min(p2), p1.max(p2));
            prop_assert!(double_slit_count_fraction(lo).unwrap() <= double_slit_count_fraction(hi).unwrap());
        }
    }
}
