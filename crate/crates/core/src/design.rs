//! Design algebra for the bench.
//!
//! The three design inequalities are turned into equations by multipliers:
//!
//! * `K_pe = f·K_ae` (degree of entanglement),
//! * `s/d = 4g·φ₀` (discriminating slit A from slit B),
//! * `λ/s = 2h·w/d` (resolving the double-slit pattern).
//!
//! Together with the crystal cut `x = w·d/(2s)` these close to
//! `φ₀ = 1/(32π f g² h)` and `w = λ/(8 g h φ₀)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{DomainError, LayoutError, OpticalLayout};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("derived layout is invalid: {0}")]
    Layout(#[from] LayoutError),
    #[error("sweep is over-determined: at most three of f, g, h, phi0 may be swept, the fourth is derived")]
    OverDetermined,
}

/// The f, g, h multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignParams {
    pub f: f64,
    pub g: f64,
    pub h: f64,
}

impl DesignParams {
    pub const THRESHOLD: DesignParams = DesignParams {
        f: 1.0,
        g: 1.0,
        h: 1.0,
    };

    pub fn new(f: f64, g: f64, h: f64) -> Self {
        DesignParams { f, g, h }
    }

    /// Visibility parameter `g²h`.
    pub fn g2h(&self) -> f64 {
        self.g * self.g * self.h
    }

    pub fn fg2h(&self) -> f64 {
        self.f * self.g2h()
    }

    pub fn hg2(&self) -> f64 {
        self.g2h()
    }

    fn check_positive(&self) -> Result<(), DomainError> {
        for (quantity, value) in [("f", self.f), ("g", self.g), ("h", self.h)] {
            positive(quantity, value)?;
        }
        Ok(())
    }
}

fn positive(quantity: &'static str, value: f64) -> Result<(), DomainError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(DomainError {
            quantity,
            value,
            domain: "(0, inf)",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntanglementMeasures {
    /// Potential entanglement `x/λ`.
    pub k_pe: f64,
    /// Actual entanglement `(π/2)/φ₀`.
    pub k_ae: f64,
    /// `k_ae / k_pe`.
    pub ratio: f64,
    /// `0.5 < ratio < 1`.
    pub in_window: bool,
}

/// A strict inequality evaluated as a signed margin; `ok` iff `margin > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub ok: bool,
    pub margin: f64,
}

impl Condition {
    fn from_margin(margin: f64) -> Self {
        Condition {
            ok: margin > 0.0,
            margin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// `λ/s − w/d`, radians.
    pub resolution: Condition,
    /// `s/d − φ₀`, radians.
    pub discrimination: Condition,
    /// `λ/φ₀ − w`, meters.
    pub width: Condition,
    /// `min(ratio − 0.5, 1 − ratio)` on `K_ae/K_pe`, dimensionless.
    pub window: Condition,
    /// Chained bound `w < λ·d/s`, meters.
    pub derived_width_bound: f64,
    /// Smallest margin after normalizing each by its reference scale
    /// (`λ/s`, `s/d`, `λ/φ₀`, and 1). Near zero means marginal.
    pub min_relative_margin: f64,
}

impl FeasibilityReport {
    pub fn all_ok(&self) -> bool {
        self.resolution.ok && self.discrimination.ok && self.width.ok && self.window.ok
    }
}

/// `φ₀ = 1/(32π f g² h)`.
pub fn phi0_from_fgh(p: DesignParams) -> Result<f64, DomainError> {
    p.check_positive()?;
    Ok(1.0 / (32.0 * PI * p.fg2h()))
}

/// `w = λ/(8 g h φ₀)`.
pub fn width_from_design(wavelength: f64, phi0: f64, p: DesignParams) -> Result<f64, DomainError> {
    positive("wavelength", wavelength)?;
    positive("phi0", phi0)?;
    positive("g", p.g)?;
    positive("h", p.h)?;
    Ok(wavelength / (8.0 * p.g * p.h * phi0))
}

/// Builds the full bench from design inputs: `s = 4gφ₀d`, `w = λ/(8ghφ₀)`,
/// `x = wd/(2s)`, `ρ = 2φ₀`, plumbing defaults elsewhere.
///
/// `f` does not enter the geometry; it is fixed by the others through
/// `φ₀·32π f g² h = 1`, and [`params_from_layout`] recovers the `f` the
/// layout actually implies.
pub fn layout_from_design(
    wavelength: f64,
    phi0: f64,
    p: DesignParams,
    slit_distance: f64,
) -> Result<OpticalLayout, DesignError> {
    p.check_positive()?;
    positive("slit_distance", slit_distance)?;
    let w = width_from_design(wavelength, phi0, p)?;
    let s = 4.0 * p.g * phi0 * slit_distance;
    let x = w * slit_distance / (2.0 * s);
    let layout = OpticalLayout::with_defaults(wavelength, phi0, w, x, slit_distance, s);
    layout.validate()?;
    Ok(layout)
}

/// Inverts the three defining equations for an arbitrary layout.
pub fn params_from_layout(layout: &OpticalLayout) -> DesignParams {
    let sd = layout.slit_separation / layout.slit_distance;
    let g = sd / (4.0 * layout.phi0);
    let h = (layout.wavelength / layout.slit_separation)
        / (2.0 * layout.source_width / layout.slit_distance);
    let f = (layout.crystal_thickness / layout.wavelength) * (2.0 * layout.phi0 / PI);
    DesignParams { f, g, h }
}

pub fn entanglement_measures(layout: &OpticalLayout) -> EntanglementMeasures {
    let k_pe = layout.crystal_thickness / layout.wavelength;
    let k_ae = (PI / 2.0) / layout.phi0;
    let ratio = k_ae / k_pe;
    EntanglementMeasures {
        k_pe,
        k_ae,
        ratio,
        in_window: ratio > 0.5 && ratio < 1.0,
    }
}

pub fn check_feasibility(layout: &OpticalLayout) -> FeasibilityReport {
    let l = layout;
    let lambda_over_s = l.wavelength / l.slit_separation;
    let sd = l.slit_separation / l.slit_distance;
    let width_scale = l.wavelength / l.phi0;

    let resolution = Condition::from_margin(lambda_over_s - l.source_width / l.slit_distance);
    let discrimination = Condition::from_margin(sd - l.phi0);
    let width = Condition::from_margin(width_scale - l.source_width);
    let ratio = entanglement_measures(l).ratio;
    let window = Condition::from_margin((ratio - 0.5).min(1.0 - ratio));

    let min_relative_margin = [
        resolution.margin / lambda_over_s,
        discrimination.margin / sd,
        width.margin / width_scale,
        window.margin,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);

    FeasibilityReport {
        resolution,
        discrimination,
        width,
        window,
        derived_width_bound: l.wavelength * l.slit_distance / l.slit_separation,
        min_relative_margin,
    }
}

/// Grid over the design space. Exactly one of the four axes is left empty
/// and derived from `φ₀·32π f g² h = 1`. With two or more axes empty the
/// grid has no points.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
    #[serde(default = "default_slit_distance")]
    pub slit_distance: f64,
    #[serde(default)]
    pub f: Vec<f64>,
    #[serde(default)]
    pub g: Vec<f64>,
    #[serde(default)]
    pub h: Vec<f64>,
    #[serde(default)]
    pub phi0: Vec<f64>,
}

fn default_wavelength() -> f64 {
    702e-9
}

fn default_slit_distance() -> f64 {
    0.6
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Lexicographic grid index over the swept axes in `f, g, h, phi0` order.
    pub index: Vec<usize>,
    /// Parameters implied by the built layout.
    pub params: DesignParams,
    pub phi0: f64,
    pub layout: OpticalLayout,
    pub measures: EntanglementMeasures,
    pub report: FeasibilityReport,
}

impl SweepRow {
    pub fn g2h(&self) -> f64 {
        self.params.g2h()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedPoint {
    pub index: Vec<usize>,
    pub error: DesignError,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Grid points whose derived layout breaks a layout invariant.
    pub skipped: Vec<SkippedPoint>,
}

#[derive(Clone, Copy)]
enum Axis {
    F,
    G,
    H,
    Phi0,
}

pub fn sweep_designs(spec: &SweepSpec) -> Result<SweepTable, DesignError> {
    let axes = [
        (Axis::F, &spec.f),
        (Axis::G, &spec.g),
        (Axis::H, &spec.h),
        (Axis::Phi0, &spec.phi0),
    ];
    let empty: Vec<Axis> = axes
        .iter()
        .filter(|(_, v)| v.is_empty())
        .map(|(a, _)| *a)
        .collect();
    match empty.len() {
        0 => return Err(DesignError::OverDetermined),
        1 => {}
        _ => return Ok(SweepTable::default()),
    }
    let derived = empty[0];
    let swept: Vec<&Vec<f64>> = axes
        .iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(_, v)| *v)
        .collect();
    let total: usize = swept.iter().map(|v| v.len()).product();

    let results: Vec<(Vec<usize>, Result<SweepRow, DesignError>)> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut index = vec![0; swept.len()];
            let mut rem = flat;
            for (slot, axis) in index.iter_mut().zip(swept.iter()).rev() {
                *slot = rem % axis.len();
                rem /= axis.len();
            }
            let mut values = index.iter().zip(swept.iter()).map(|(&i, v)| v[i]);
            let mut take = |a: Axis| {
                if std::mem::discriminant(&a) == std::mem::discriminant(&derived) {
                    None
                } else {
                    values.next()
                }
            };
            let (f, g, h, phi0) = (
                take(Axis::F),
                take(Axis::G),
                take(Axis::H),
                take(Axis::Phi0),
            );
            let row = sweep_point(spec, f, g, h, phi0);
            (index, row)
        })
        .collect();

    let mut table = SweepTable::default();
    for (index, row) in results {
        match row {
            Ok(row) => table.rows.push(SweepRow { index, ..row }),
            Err(error) => table.skipped.push(SkippedPoint { index, error }),
        }
    }
    Ok(table)
}

fn sweep_point(
    spec: &SweepSpec,
    f: Option<f64>,
    g: Option<f64>,
    h: Option<f64>,
    phi0: Option<f64>,
) -> Result<SweepRow, DesignError> {
    // closure: phi0 * 32π f g² h = 1
    let closure = |a: f64, b: f64, c: f64| 1.0 / (32.0 * PI * a * b * c);
    let (f, g, h, phi0) = match (f, g, h, phi0) {
        (Some(f), Some(g), Some(h), None) => (f, g, h, phi0_from_fgh(DesignParams::new(f, g, h))?),
        (None, Some(g), Some(h), Some(p)) => (closure(g * g, h, p), g, h, p),
        (Some(f), Some(g), None, Some(p)) => (f, g, closure(f, g * g, p), p),
        (Some(f), None, Some(h), Some(p)) => (f, closure(f, h, p).sqrt(), h, p),
        _ => unreachable!("exactly one axis is derived"),
    };
    let params = DesignParams::new(f, g, h);
    let layout = layout_from_design(spec.wavelength, phi0, params, spec.slit_distance)?;
    Ok(SweepRow {
        index: Vec::new(),
        params: params_from_layout(&layout),
        phi0,
        layout,
        measures: entanglement_measures(&layout),
        report: check_feasibility(&layout),
    })
}
