//! C ABI over `spdc_bench`.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free`. Every fallible call returns an [`SpdcStatus`]; on
//! failure [`spdc_last_error_message`] describes the most recent error on
//! the calling thread.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use spdc_bench::design::{
    check_feasibility, entanglement_measures, layout_from_design, params_from_layout,
    phi0_from_fgh, DesignError, DesignParams,
};
use spdc_bench::fringe::{
    fit_fringes_with, BinnedCounts, EnvelopeModel, FitError, FitOptions, FringeAnalysis,
};
use spdc_bench::geometry::{
    both_access_fraction, double_slit_count_fraction, zone_axial_extent, OpticalLayout,
};
use spdc_bench::montecarlo::{
    both_access_coherence, run_experiment, RunModes, RunResult, SimulationConfig, SimulationError,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpdcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidLayout = 3,
    Domain = 4,
    FitInsufficientData = 5,
    FitNonConvergence = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Bench geometry handle.
pub struct SpdcLayout(OpticalLayout);

/// Finished simulation handle.
pub struct SpdcRunResult(RunResult);

/// Plain copy of every layout field, SI units.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpdcLayoutFields {
    pub wavelength: f64,
    pub phi0: f64,
    pub source_width: f64,
    pub crystal_thickness: f64,
    pub slit_distance: f64,
    pub slit_separation: f64,
    pub slit_width: f64,
    pub idler_distance: f64,
    pub detector_angular_radius: f64,
    pub screen_distance: f64,
}

impl From<OpticalLayout> for SpdcLayoutFields {
    fn from(l: OpticalLayout) -> Self {
        SpdcLayoutFields {
            wavelength: l.wavelength,
            phi0: l.phi0,
            source_width: l.source_width,
            crystal_thickness: l.crystal_thickness,
            slit_distance: l.slit_distance,
            slit_separation: l.slit_separation,
            slit_width: l.slit_width,
            idler_distance: l.idler_distance,
            detector_angular_radius: l.detector_angular_radius,
            screen_distance: l.screen_distance,
        }
    }
}

impl From<SpdcLayoutFields> for OpticalLayout {
    fn from(f: SpdcLayoutFields) -> Self {
        OpticalLayout {
            wavelength: f.wavelength,
            phi0: f.phi0,
            source_width: f.source_width,
            crystal_thickness: f.crystal_thickness,
            slit_distance: f.slit_distance,
            slit_separation: f.slit_separation,
            slit_width: f.slit_width,
            idler_distance: f.idler_distance,
            detector_angular_radius: f.detector_angular_radius,
            screen_distance: f.screen_distance,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpdcDesignParams {
    pub f: f64,
    pub g: f64,
    pub h: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpdcEntanglement {
    pub k_pe: f64,
    pub k_ae: f64,
    pub ratio: f64,
    pub in_window: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpdcFeasibility {
    pub resolution_ok: bool,
    pub discrimination_ok: bool,
    pub width_ok: bool,
    pub window_ok: bool,
    pub resolution_margin: f64,
    pub discrimination_margin: f64,
    pub width_margin: f64,
    pub window_margin: f64,
    pub derived_width_bound: f64,
    pub min_relative_margin: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpdcCounters {
    pub n_pairs_sampled: u64,
    pub n_blocked: u64,
    pub n_single_access: u64,
    pub n_both_access: u64,
    pub n_single_untransmitted: u64,
    pub n_screen: u64,
    pub n_coinc_a: u64,
    pub n_coinc_b: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpdcFringeAnalysis {
    pub period: f64,
    pub visibility: f64,
    pub phase: f64,
    pub fringe_fraction: f64,
    pub fit_residual: f64,
    pub raw_visibility: f64,
}

impl From<FringeAnalysis> for SpdcFringeAnalysis {
    fn from(a: FringeAnalysis) -> Self {
        SpdcFringeAnalysis {
            period: a.period,
            visibility: a.visibility,
            phase: a.phase,
            fringe_fraction: a.fringe_fraction,
            fit_residual: a.fit_residual,
            raw_visibility: a.raw_visibility,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpdcHistogram {
    Total = 0,
    CoincA = 1,
    CoincB = 2,
    NoCoinc = 3,
}

/// Flags for [`spdc_run`].
pub const SPDC_MODE_INCOHERENT_SOURCE: u32 = 1;
pub const SPDC_MODE_TWO_AXIS_CHECK: u32 = 2;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

type Failure = (SpdcStatus, String);

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SpdcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SpdcStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {message}"));
            SpdcStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    (SpdcStatus::NullPointer, format!("{name} is null"))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write<T>(p: *mut T, name: &str, value: T) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    p.write(value);
    Ok(())
}

fn design_failure(e: DesignError) -> Failure {
    let status = match e {
        DesignError::Layout(_) => SpdcStatus::InvalidLayout,
        DesignError::Domain(_) => SpdcStatus::Domain,
        DesignError::OverDetermined => SpdcStatus::InvalidArgument,
    };
    (status, e.to_string())
}

fn fit_failure(e: FitError) -> Failure {
    let status = match e {
        FitError::InsufficientData(_) => SpdcStatus::FitInsufficientData,
        FitError::NonConvergence { .. } => SpdcStatus::FitNonConvergence,
    };
    (status, e.to_string())
}

/// Copies the last error message on this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the buffer size the full message needs.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn spdc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// The concrete design bench.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn spdc_layout_paper(out: *mut *mut SpdcLayout) -> SpdcStatus {
    guard(|| {
        write(
            out,
            "out",
            Box::into_raw(Box::new(SpdcLayout(OpticalLayout::paper()))),
        )
    })
}

/// Builds a layout from design inputs; `phi0 <= 0` derives it from f, g, h.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn spdc_layout_from_design(
    wavelength: f64,
    phi0: f64,
    params: SpdcDesignParams,
    slit_distance: f64,
    out: *mut *mut SpdcLayout,
) -> SpdcStatus {
    guard(|| {
        let p = DesignParams::new(params.f, params.g, params.h);
        let phi0 = if phi0 > 0.0 {
            phi0
        } else {
            phi0_from_fgh(p).map_err(|e| (SpdcStatus::Domain, e.to_string()))?
        };
        let l = layout_from_design(wavelength, phi0, p, slit_distance).map_err(design_failure)?;
        write(out, "out", Box::into_raw(Box::new(SpdcLayout(l))))
    })
}

/// Validates and wraps explicit fields.
///
/// # Safety
/// `fields` must point to a readable struct; `out` must be valid for a
/// pointer write.
#[no_mangle]
pub unsafe extern "C" fn spdc_layout_from_fields(
    fields: *const SpdcLayoutFields,
    out: *mut *mut SpdcLayout,
) -> SpdcStatus {
    guard(|| {
        let l = OpticalLayout::from(*deref(fields, "fields")?);
        l.validate()
            .map_err(|e| (SpdcStatus::InvalidLayout, e.to_string()))?;
        write(out, "out", Box::into_raw(Box::new(SpdcLayout(l))))
    })
}

/// # Safety
/// `layout` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_layout_fields(
    layout: *const SpdcLayout,
    out: *mut SpdcLayoutFields,
) -> SpdcStatus {
    guard(|| write(out, "out", deref(layout, "layout")?.0.into()))
}

/// # Safety
/// `layout` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spdc_layout_free(layout: *mut SpdcLayout) {
    if !layout.is_null() {
        drop(Box::from_raw(layout));
    }
}

/// # Safety
/// `layout` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_zone_axial_extent(
    layout: *const SpdcLayout,
    out: *mut f64,
) -> SpdcStatus {
    guard(|| write(out, "out", zone_axial_extent(&deref(layout, "layout")?.0)))
}

/// # Safety
/// `layout` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_both_access_fraction(
    layout: *const SpdcLayout,
    out: *mut f64,
) -> SpdcStatus {
    guard(|| {
        let v = both_access_fraction(&deref(layout, "layout")?.0)
            .map_err(|e| (SpdcStatus::Domain, e.to_string()))?;
        write(out, "out", v)
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_double_slit_count_fraction(p_both: f64, out: *mut f64) -> SpdcStatus {
    guard(|| {
        let v =
            double_slit_count_fraction(p_both).map_err(|e| (SpdcStatus::Domain, e.to_string()))?;
        write(out, "out", v)
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_phi0_from_fgh(params: SpdcDesignParams, out: *mut f64) -> SpdcStatus {
    guard(|| {
        let v = phi0_from_fgh(DesignParams::new(params.f, params.g, params.h))
            .map_err(|e| (SpdcStatus::Domain, e.to_string()))?;
        write(out, "out", v)
    })
}

/// # Safety
/// `layout` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_params_from_layout(
    layout: *const SpdcLayout,
    out: *mut SpdcDesignParams,
) -> SpdcStatus {
    guard(|| {
        let p = params_from_layout(&deref(layout, "layout")?.0);
        write(
            out,
            "out",
            SpdcDesignParams {
                f: p.f,
                g: p.g,
                h: p.h,
            },
        )
    })
}

/// # Safety
/// `layout` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_entanglement(
    layout: *const SpdcLayout,
    out: *mut SpdcEntanglement,
) -> SpdcStatus {
    guard(|| {
        let m = entanglement_measures(&deref(layout, "layout")?.0);
        write(
            out,
            "out",
            SpdcEntanglement {
                k_pe: m.k_pe,
                k_ae: m.k_ae,
                ratio: m.ratio,
                in_window: m.in_window,
            },
        )
    })
}

/// # Safety
/// `layout` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_feasibility(
    layout: *const SpdcLayout,
    out: *mut SpdcFeasibility,
) -> SpdcStatus {
    guard(|| {
        let r = check_feasibility(&deref(layout, "layout")?.0);
        write(
            out,
            "out",
            SpdcFeasibility {
                resolution_ok: r.resolution.ok,
                discrimination_ok: r.discrimination.ok,
                width_ok: r.width.ok,
                window_ok: r.window.ok,
                resolution_margin: r.resolution.margin,
                discrimination_margin: r.discrimination.margin,
                width_margin: r.width.margin,
                window_margin: r.window.margin,
                derived_width_bound: r.derived_width_bound,
                min_relative_margin: r.min_relative_margin,
            },
        )
    })
}

/// Runs the Monte Carlo. `modes` is a bitwise OR of `SPDC_MODE_*`;
/// `workers = 0` uses every core.
///
/// # Safety
/// `layout` must be a live handle; `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn spdc_run(
    layout: *const SpdcLayout,
    n_pairs: u64,
    seed: u64,
    workers: u32,
    modes: u32,
    out: *mut *mut SpdcRunResult,
) -> SpdcStatus {
    guard(|| {
        let mut config = SimulationConfig::new(deref(layout, "layout")?.0, n_pairs, seed);
        config.workers = workers as usize;
        config.modes = RunModes {
            incoherent_source: modes & SPDC_MODE_INCOHERENT_SOURCE != 0,
            two_axis_check: modes & SPDC_MODE_TWO_AXIS_CHECK != 0,
        };
        let result = run_experiment(&config).map_err(|e| {
            let status = match e {
                SimulationError::Layout(_) => SpdcStatus::InvalidLayout,
                SimulationError::NoPairs => SpdcStatus::InvalidArgument,
                SimulationError::ThreadPool(_) => SpdcStatus::InvalidArgument,
            };
            (status, e.to_string())
        })?;
        write(out, "out", Box::into_raw(Box::new(SpdcRunResult(result))))
    })
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spdc_run_free(run: *mut SpdcRunResult) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of histogram bins, and the window geometry when the pointers are
/// non-null.
///
/// # Safety
/// `run` must be a live handle; the out pointers must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_run_window(
    run: *const SpdcRunResult,
    n_bins: *mut usize,
    lower_edge: *mut f64,
    bin_width: *mut f64,
) -> SpdcStatus {
    guard(|| {
        let w = deref(run, "run")?.0.window;
        if !n_bins.is_null() {
            n_bins.write(w.n_bins);
        }
        if !lower_edge.is_null() {
            lower_edge.write(w.lower_edge);
        }
        if !bin_width.is_null() {
            bin_width.write(w.bin_width);
        }
        Ok(())
    })
}

fn histogram(run: &RunResult, which: SpdcHistogram) -> &[u64] {
    match which {
        SpdcHistogram::Total => &run.total,
        SpdcHistogram::CoincA => &run.coinc_a,
        SpdcHistogram::CoincB => &run.coinc_b,
        SpdcHistogram::NoCoinc => &run.no_coinc,
    }
}

/// Copies one histogram into `buf`, which must hold at least `n_bins`
/// values.
///
/// # Safety
/// `run` must be a live handle; `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn spdc_run_histogram(
    run: *const SpdcRunResult,
    which: SpdcHistogram,
    buf: *mut u64,
    len: usize,
) -> SpdcStatus {
    guard(|| {
        let h = histogram(&deref(run, "run")?.0, which);
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < h.len() {
            return Err((
                SpdcStatus::BufferTooSmall,
                format!("need {} bins, got {len}", h.len()),
            ));
        }
        std::ptr::copy_nonoverlapping(h.as_ptr(), buf, h.len());
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_run_counters(
    run: *const SpdcRunResult,
    out: *mut SpdcCounters,
) -> SpdcStatus {
    guard(|| {
        let c = deref(run, "run")?.0.counters;
        write(
            out,
            "out",
            SpdcCounters {
                n_pairs_sampled: c.n_pairs_sampled,
                n_blocked: c.n_blocked,
                n_single_access: c.n_single_access,
                n_both_access: c.n_both_access,
                n_single_untransmitted: c.n_single_untransmitted,
                n_screen: c.n_screen,
                n_coinc_a: c.n_coinc_a,
                n_coinc_b: c.n_coinc_b,
            },
        )
    })
}

/// Writes the 64-character hex config digest plus NUL; `len` must be at
/// least 65.
///
/// # Safety
/// `run` must be a live handle; `buf` must be valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn spdc_run_digest(
    run: *const SpdcRunResult,
    buf: *mut c_char,
    len: usize,
) -> SpdcStatus {
    guard(|| {
        let d = &deref(run, "run")?.0.config_digest;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < d.len() + 1 {
            return Err((
                SpdcStatus::BufferTooSmall,
                format!("need {} bytes", d.len() + 1),
            ));
        }
        std::ptr::copy_nonoverlapping(d.as_ptr(), buf as *mut u8, d.len());
        *buf.add(d.len()) = 0;
        Ok(())
    })
}

/// Fits one histogram of a run against the simulated layout. The fringe
/// fraction is referenced to the both-access component's own visibility.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_run_fit(
    run: *const SpdcRunResult,
    which: SpdcHistogram,
    out: *mut SpdcFringeAnalysis,
) -> SpdcStatus {
    guard(|| {
        let r = &deref(run, "run")?.0;
        let l = r.layout;
        let counts =
            BinnedCounts::from_u64(r.window.lower_edge, r.window.bin_width, histogram(r, which));
        let options = FitOptions {
            intrinsic_visibility: both_access_coherence(&l),
            ..FitOptions::default()
        };
        let a = fit_fringes_with(
            &counts,
            l.fringe_period(),
            &EnvelopeModel::from_layout(&l),
            options,
        )
        .map_err(fit_failure)?;
        write(out, "out", a.into())
    })
}

/// Fits arbitrary uniformly binned counts with the layout's envelope.
///
/// # Safety
/// `counts` must be valid for `n` reads; `layout` must be a live handle;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spdc_fit_counts(
    lower_edge: f64,
    bin_width: f64,
    counts: *const f64,
    n: usize,
    period_hint: f64,
    layout: *const SpdcLayout,
    out: *mut SpdcFringeAnalysis,
) -> SpdcStatus {
    guard(|| {
        if counts.is_null() {
            return Err(null("counts"));
        }
        let l = deref(layout, "layout")?.0;
        let data = std::slice::from_raw_parts(counts, n).to_vec();
        let hist = BinnedCounts::new(lower_edge, bin_width, data);
        let a = fit_fringes_with(
            &hist,
            period_hint,
            &EnvelopeModel::from_layout(&l),
            FitOptions::default(),
        )
        .map_err(fit_failure)?;
        write(out, "out", a.into())
    })
}
