use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fringe::{
    fit_fringes_with, BinnedCounts, EnvelopeModel, FitError, FitOptions, FringeAnalysis,
};
use crate::geometry::{classify_slit_access, LayoutError, OpticalLayout, SlitAccess};
use crate::montecarlo::idler::{propagate_idler, IdlerOutcome};
use crate::montecarlo::sampler::{deviation_magnitude_cdf, sample_pair, StreamKey};
use crate::montecarlo::screen::{
    ScreenWindow, TableCache, BINS_PER_PERIOD, QUANTIZATION_STEPS, TABLE_POINTS, WINDOW_PERIODS,
};

/// Pairs per work unit. Results never depend on it: every pair owns its own
/// random stream and partial results are merged in chunk order.
const CHUNK: u64 = 1 << 15;
/// Bins of the two-axis magnitude histogram over `[0, 10 φ₀)`.
pub const DEVIATION_BINS: usize = 20_000;
const DEVIATION_RANGE: f64 = 10.0;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("n_pairs must be at least 1")]
    NoPairs,
    #[error("cannot start worker pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunModes {
    /// Emit every pair from the aperture plane with both slits forced open,
    /// so the screen shows the partially coherent source pattern.
    pub incoherent_source: bool,
    /// Draw a second, out-of-plane deviation component per pair and test the
    /// magnitude distribution.
    pub two_axis_check: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub layout: OpticalLayout,
    pub n_pairs: u64,
    pub seed: u64,
    /// 0 picks the number of available cores.
    pub workers: usize,
    pub modes: RunModes,
    pub keep_records: bool,
}

impl SimulationConfig {
    pub fn new(layout: OpticalLayout, n_pairs: u64, seed: u64) -> Self {
        SimulationConfig {
            layout,
            n_pairs,
            seed,
            workers: 0,
            modes: RunModes::default(),
            keep_records: false,
        }
    }

    /// The layout actually simulated; the incoherent-source mode flattens
    /// the slab onto the aperture plane.
    pub fn effective_layout(&self) -> OpticalLayout {
        let mut l = self.layout;
        if self.modes.incoherent_source {
            l.crystal_thickness = 0.0;
        }
        l
    }

    /// SHA-256 over the canonical JSON of everything that determines the
    /// output, including the fixed numerical constants. Worker count is
    /// excluded.
    pub fn digest(&self) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            format: u32,
            layout: &'a OpticalLayout,
            n_pairs: u64,
            seed: u64,
            modes: RunModes,
            window_periods: usize,
            bins_per_period: usize,
            table_points: usize,
            quantization_steps: usize,
            deviation_bins: usize,
        }
        let layout = self.effective_layout();
        let canonical = Canonical {
            format: 1,
            layout: &layout,
            n_pairs: self.n_pairs,
            seed: self.seed,
            modes: self.modes,
            window_periods: WINDOW_PERIODS,
            bins_per_period: BINS_PER_PERIOD,
            table_points: TABLE_POINTS,
            quantization_steps: QUANTIZATION_STEPS,
            deviation_bins: DEVIATION_BINS,
        };
        sha256_json(&canonical)
    }
}

pub fn layout_digest(layout: &OpticalLayout) -> String {
    sha256_json(layout)
}

fn sha256_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("plain data serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub screen_position: f64,
    pub slit_access: SlitAccess,
    pub idler_outcome: IdlerOutcome,
    pub signal_seq: u64,
    pub idler_seq: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounters {
    pub n_pairs_sampled: u64,
    pub n_blocked: u64,
    pub n_single_access: u64,
    pub n_both_access: u64,
    /// Single-access signals aimed away from their open slit.
    pub n_single_untransmitted: u64,
    /// Signals that landed inside the screen window.
    pub n_screen: u64,
    pub n_coinc_a: u64,
    pub n_coinc_b: u64,
}

impl RunCounters {
    fn add(&mut self, o: &RunCounters) {
        self.n_pairs_sampled += o.n_pairs_sampled;
        self.n_blocked += o.n_blocked;
        self.n_single_access += o.n_single_access;
        self.n_both_access += o.n_both_access;
        self.n_single_untransmitted += o.n_single_untransmitted;
        self.n_screen += o.n_screen;
        self.n_coinc_a += o.n_coinc_a;
        self.n_coinc_b += o.n_coinc_b;
    }

    /// Both-access share of emitters that reach at least one slit.
    pub fn both_access_share(&self) -> f64 {
        let reach = self.n_single_access + self.n_both_access;
        ratio(self.n_both_access, reach)
    }

    /// `2 n_both / (2 n_both + n_single)`: both-access emitters count once
    /// per open slit. With the transmission gate this is also the fringed
    /// share of screen counts.
    pub fn double_slit_count_share(&self) -> f64 {
        let both = 2 * self.n_both_access;
        ratio(both, both + self.n_single_access)
    }

    /// Both-access share of signals that reached the screen plane.
    pub fn fringed_screen_share(&self) -> f64 {
        let single = self.n_single_access - self.n_single_untransmitted;
        ratio(self.n_both_access, self.n_both_access + single)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationStats {
    pub count: u64,
    pub mean: f64,
    pub std_dev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoAxisCheck {
    pub samples: u64,
    /// Largest CDF gap at the magnitude bin edges.
    pub ks_statistic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub window: ScreenWindow,
    pub total: Vec<u64>,
    pub coinc_a: Vec<u64>,
    pub coinc_b: Vec<u64>,
    pub no_coinc: Vec<u64>,
    pub counters: RunCounters,
    pub deviation: DeviationStats,
    pub two_axis: Option<TwoAxisCheck>,
    pub seed: u64,
    pub config_digest: String,
    pub layout: OpticalLayout,
    pub records: Option<Vec<DetectionRecord>>,
}

impl RunResult {
    pub fn total_counts(&self) -> BinnedCounts {
        BinnedCounts::from_u64(self.window.lower_edge, self.window.bin_width, &self.total)
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        (0..self.window.n_bins)
            .map(|i| self.window.bin_center(i))
            .collect()
    }
}

/// Single-access signals reach the screen only when aimed at their open
/// slit (`θ_s >= 0` points at A); both-access signals always pass.
pub fn transmits(access: SlitAccess, signal_angle: f64) -> bool {
    match access {
        SlitAccess::None => false,
        SlitAccess::Both => true,
        SlitAccess::AOnly => signal_angle >= 0.0,
        SlitAccess::BOnly => signal_angle < 0.0,
    }
}

struct Partial {
    total: Vec<u64>,
    coinc_a: Vec<u64>,
    coinc_b: Vec<u64>,
    counters: RunCounters,
    dev_sum: f64,
    dev_sumsq: f64,
    magnitudes: Vec<u64>,
    records: Vec<DetectionRecord>,
}

struct Context<'a> {
    layout: OpticalLayout,
    window: ScreenWindow,
    cache: &'a TableCache,
    key: StreamKey,
    n_pairs: u64,
    modes: RunModes,
    keep_records: bool,
}

struct Transmitted {
    index: u64,
    pair: crate::montecarlo::sampler::PhotonPair,
    access: SlitAccess,
    y: f64,
}

fn run_chunk(ctx: &Context, chunk: u64) -> Partial {
    let start = chunk * CHUNK;
    let end = (start + CHUNK).min(ctx.n_pairs);
    let n_bins = ctx.window.n_bins;
    let mut p = Partial {
        total: vec![0; n_bins],
        coinc_a: vec![0; n_bins],
        coinc_b: vec![0; n_bins],
        counters: RunCounters::default(),
        dev_sum: 0.0,
        dev_sumsq: 0.0,
        magnitudes: if ctx.modes.two_axis_check {
            vec![0; DEVIATION_BINS + 1]
        } else {
            Vec::new()
        },
        records: Vec::new(),
    };
    let phi0 = ctx.layout.phi0;

    // signal phase
    let mut sent = Vec::with_capacity((end - start) as usize);
    for i in start..end {
        let mut rng = ctx.key.stream(i);
        let pair = sample_pair(&mut rng, &ctx.layout);
        let u: f64 = rng.random();
        let delta = pair.deviation();
        p.counters.n_pairs_sampled += 1;
        p.dev_sum += delta;
        p.dev_sumsq += delta * delta;
        if ctx.modes.two_axis_check {
            let z: f64 = rng.sample(StandardNormal);
            let mag = delta.hypot(phi0 * z);
            let bin = if phi0 > 0.0 {
                ((mag / phi0) * (DEVIATION_BINS as f64 / DEVIATION_RANGE)) as usize
            } else {
                0
            };
            p.magnitudes[bin.min(DEVIATION_BINS)] += 1;
        }

        let access = if ctx.modes.incoherent_source {
            SlitAccess::Both
        } else {
            classify_slit_access(pair.origin, &ctx.layout)
        };
        match access {
            SlitAccess::None => {
                p.counters.n_blocked += 1;
                continue;
            }
            SlitAccess::Both => p.counters.n_both_access += 1,
            _ => p.counters.n_single_access += 1,
        }
        if !transmits(access, pair.signal_angle) {
            p.counters.n_single_untransmitted += 1;
            continue;
        }
        let table = ctx
            .cache
            .table(pair.origin, access)
            .expect("access checked");
        sent.push(Transmitted {
            index: i,
            pair,
            access,
            y: table.sample(u),
        });
    }

    // idler phase
    for t in sent {
        let outcome = propagate_idler(&t.pair, &ctx.layout);
        if let Some(bin) = ctx.window.bin_index(t.y) {
            p.counters.n_screen += 1;
            p.total[bin] += 1;
            match outcome {
                IdlerOutcome::DetABar => {
                    p.coinc_a[bin] += 1;
                    p.counters.n_coinc_a += 1;
                }
                IdlerOutcome::DetBBar => {
                    p.coinc_b[bin] += 1;
                    p.counters.n_coinc_b += 1;
                }
                IdlerOutcome::Miss => {}
            }
        }
        if ctx.keep_records {
            p.records.push(DetectionRecord {
                screen_position: t.y,
                slit_access: t.access,
                idler_outcome: outcome,
                signal_seq: t.index,
                idler_seq: ctx.n_pairs + t.index,
            });
        }
    }
    p
}

pub fn run_experiment(config: &SimulationConfig) -> Result<RunResult, SimulationError> {
    if config.n_pairs == 0 {
        return Err(SimulationError::NoPairs);
    }
    let layout = config.effective_layout();
    if config.modes.incoherent_source {
        layout.validate_allowing_thin_source()?;
    } else {
        layout.validate()?;
    }
    let window = ScreenWindow::for_layout(&layout);
    let cache = TableCache::new(&layout);
    let ctx = Context {
        layout,
        window,
        cache: &cache,
        key: StreamKey::new(config.seed),
        n_pairs: config.n_pairs,
        modes: config.modes,
        keep_records: config.keep_records,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| SimulationError::ThreadPool(e.to_string()))?;
    let n_chunks = config.n_pairs.div_ceil(CHUNK);
    let partials: Vec<Partial> = pool.install(|| {
        (0..n_chunks)
            .into_par_iter()
            .map(|c| run_chunk(&ctx, c))
            .collect()
    });

    let n_bins = window.n_bins;
    let mut total = vec![0u64; n_bins];
    let mut coinc_a = vec![0u64; n_bins];
    let mut coinc_b = vec![0u64; n_bins];
    let mut counters = RunCounters::default();
    let (mut sum, mut sumsq) = (0.0, 0.0);
    let mut magnitudes = vec![
        0u64;
        if config.modes.two_axis_check {
            DEVIATION_BINS + 1
        } else {
            0
        }
    ];
    let mut records = config.keep_records.then(Vec::new);
    for part in partials {
        for i in 0..n_bins {
            total[i] += part.total[i];
            coinc_a[i] += part.coinc_a[i];
            coinc_b[i] += part.coinc_b[i];
        }
        counters.add(&part.counters);
        sum += part.dev_sum;
        sumsq += part.dev_sumsq;
        for (m, v) in magnitudes.iter_mut().zip(&part.magnitudes) {
            *m += v;
        }
        if let Some(r) = records.as_mut() {
            r.extend(part.records);
        }
    }
    let no_coinc = (0..n_bins)
        .map(|i| total[i] - coinc_a[i] - coinc_b[i])
        .collect();
    let n = counters.n_pairs_sampled as f64;
    let mean = sum / n;
    let deviation = DeviationStats {
        count: counters.n_pairs_sampled,
        mean,
        std_dev: (sumsq / n - mean * mean).max(0.0).sqrt(),
    };
    let two_axis = config
        .modes
        .two_axis_check
        .then(|| binned_ks(&magnitudes, layout.phi0));

    Ok(RunResult {
        window,
        total,
        coinc_a,
        coinc_b,
        no_coinc,
        counters,
        deviation,
        two_axis,
        seed: config.seed,
        config_digest: config.digest(),
        layout,
        records,
    })
}

fn binned_ks(magnitudes: &[u64], phi0: f64) -> TwoAxisCheck {
    let samples: u64 = magnitudes.iter().sum();
    let n = samples as f64;
    let bin = DEVIATION_RANGE * phi0 / DEVIATION_BINS as f64;
    let mut cum = 0u64;
    let mut ks: f64 = 0.0;
    for (k, &c) in magnitudes.iter().take(DEVIATION_BINS).enumerate() {
        cum += c;
        let edge = (k + 1) as f64 * bin;
        ks = ks.max((cum as f64 / n - deviation_magnitude_cdf(edge, phi0)).abs());
    }
    TwoAxisCheck {
        samples,
        ks_statistic: ks,
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Fringe visibility of an incoherent uniform source of width `w` seen
/// through both slits: `|sinc(π w s/(λ d))|`.
pub fn incoherent_source_visibility(layout: &OpticalLayout) -> f64 {
    sinc(
        std::f64::consts::PI * layout.source_width * layout.slit_separation
            / (layout.wavelength * layout.slit_distance),
    )
    .abs()
}

/// Visibility of the both-access component alone. At depth `ζ` the
/// both-access band has width `W = w − ζ s/d`, contributing an incoherent
/// sum with coherence `sinc(π s W/(λ (d + ζ)))`; the slab averages these
/// weighted by `W`.
pub fn both_access_coherence(layout: &OpticalLayout) -> f64 {
    let (w, s, d, lambda) = (
        layout.source_width,
        layout.slit_separation,
        layout.slit_distance,
        layout.wavelength,
    );
    let x = layout.crystal_thickness;
    if x <= 0.0 {
        return incoherent_source_visibility(layout);
    }
    let n = 2000;
    let h = x / n as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..=n {
        let zeta = i as f64 * h;
        let band = (w - zeta * s / d).max(0.0);
        let weight = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        num += weight * band * sinc(std::f64::consts::PI * s * band / (lambda * (d + zeta)));
        den += weight * band;
    }
    if den > 0.0 {
        (num / den).abs()
    } else {
        0.0
    }
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Debug, Clone)]
pub struct VisibilityCheck {
    pub measured: FringeAnalysis,
    pub predicted: f64,
}

/// Simulates the incoherent-source mode and fits the resulting fringes.
pub fn incoherent_source_visibility_check(
    layout: &OpticalLayout,
    n_pairs: u64,
    seed: u64,
    workers: usize,
) -> Result<VisibilityCheck, CheckError> {
    let mut config = SimulationConfig::new(*layout, n_pairs, seed);
    config.workers = workers;
    config.modes.incoherent_source = true;
    let run = run_experiment(&config)?;
    let l = run.layout;
    let measured = fit_fringes_with(
        &run.total_counts(),
        l.fringe_period(),
        &EnvelopeModel::from_layout(&l),
        FitOptions::default(),
    )?;
    Ok(VisibilityCheck {
        measured,
        predicted: incoherent_source_visibility(&l),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: u64, seed: u64) -> SimulationConfig {
        SimulationConfig::new(OpticalLayout::paper(), n, seed)
    }

    #[test]
    fn counters_are_consistent() {
        let r = run_experiment(&small(100_000, 1)).unwrap();
        let c = r.counters;
        assert_eq!(c.n_pairs_sampled, 100_000);
        assert_eq!(
            c.n_blocked + c.n_single_access + c.n_both_access,
            c.n_pairs_sampled
        );
        let hist: u64 = r.total.iter().sum();
        assert_eq!(hist, c.n_screen);
        for i in 0..r.window.n_bins {
            assert_eq!(r.total[i], r.coinc_a[i] + r.coinc_b[i] + r.no_coinc[i]);
        }
        assert!(
            (c.both_access_share() - 0.6).abs() < 0.01,
            "{}",
            c.both_access_share()
        );
        assert!((c.double_slit_count_share() - 0.75).abs() < 0.01);
        assert!((c.fringed_screen_share() - 0.75).abs() < 0.01);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut a = small(80_000, 9);
        a.workers = 1;
        a.keep_records = true;
        let mut b = a.clone();
        b.workers = 3;
        let ra = run_experiment(&a).unwrap();
        let rb = run_experiment(&b).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(ra.config_digest, rb.config_digest);
    }

    #[test]
    fn records_follow_sequence_rule() {
        let mut cfg = small(5_000, 4);
        cfg.keep_records = true;
        let r = run_experiment(&cfg).unwrap();
        let recs = r.records.unwrap();
        assert!(!recs.is_empty());
        for w in recs.windows(2) {
            assert!(w[0].signal_seq < w[1].signal_seq);
        }
        for rec in &recs {
            assert_eq!(rec.idler_seq, rec.signal_seq + 5_000);
            assert_ne!(rec.slit_access, SlitAccess::None);
        }
    }

    #[test]
    fn digest_tracks_inputs() {
        let a = small(1000, 1);
        let mut b = a.clone();
        b.workers = 7;
        assert_eq!(a.digest(), b.digest());
        b.seed = 2;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(
            run_experiment(&small(0, 1)),
            Err(SimulationError::NoPairs)
        ));
        let mut cfg = small(10, 1);
        cfg.layout.slit_separation = -1.0;
        assert!(matches!(
            run_experiment(&cfg),
            Err(SimulationError::Layout(_))
        ));
    }

    #[test]
    fn transmission_gate() {
        assert!(transmits(SlitAccess::AOnly, 1e-3));
        assert!(!transmits(SlitAccess::AOnly, -1e-3));
        assert!(transmits(SlitAccess::BOnly, -1e-3));
        assert!(!transmits(SlitAccess::BOnly, 1e-3));
        assert!(transmits(SlitAccess::Both, -1.0));
        assert!(!transmits(SlitAccess::None, 0.0));
    }

    #[test]
    fn coherence_limits() {
        let mut l = OpticalLayout::paper();
        l.crystal_thickness = 0.0;
        assert!((both_access_coherence(&l) - incoherent_source_visibility(&l)).abs() < 1e-15);
        l.source_width = l.wavelength * l.slit_distance / l.slit_separation;
        assert!(incoherent_source_visibility(&l) < 1e-12);
        let p = OpticalLayout::paper();
        let c = both_access_coherence(&p);
        assert!(c > incoherent_source_visibility(&p) && c < 1.0, "{c}");
    }

    #[test]
    fn two_axis_mode_reports_ks() {
        let mut cfg = small(200_000, 5);
        cfg.modes.two_axis_check = true;
        let r = run_experiment(&cfg).unwrap();
        let t = r.two_axis.unwrap();
        assert_eq!(t.samples, 200_000);
        // 1.36/√n is the 5% critical value
        assert!(
            t.ks_statistic < 1.36 / (200_000f64).sqrt(),
            "{}",
            t.ks_statistic
        );
    }
}
