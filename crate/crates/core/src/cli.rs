//! `spdc-bench design|simulate|analyze`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::design::{
    check_feasibility, entanglement_measures, params_from_layout, sweep_designs, DesignError,
    SweepSpec,
};
use crate::fringe::{fit_fringes_with, fringe_period_check, EnvelopeModel, FitError, FitOptions};
use crate::geometry::{
    both_access_fraction, double_slit_count_fraction, zone_axial_extent, OpticalLayout,
};
use crate::io::config::{ConfigError, RunConfig};
use crate::io::files::{
    read_histogram_csv, read_metadata, sweep_points, write_analysis_csv, write_design_csv,
    write_histogram_csv, write_json, write_plot_data, write_records_csv, AnalysisRow, DesignPoint,
    HistogramColumn, Metadata,
};
use crate::montecarlo::{both_access_coherence, layout_digest, run_experiment};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;
pub const EXIT_NONCONVERGENCE: u8 = 4;

/// Period deviation beyond which analyze reports a layout mismatch.
pub const PERIOD_TOLERANCE: f64 = 0.02;

#[derive(Parser, Debug)]
#[command(
    name = "spdc-bench",
    version,
    about = "SPDC double-slit coincidence bench: design, simulate, analyze"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Derive and check a design, or sweep the design space.
    Design(DesignArgs),
    /// Run the Monte Carlo and write histograms plus metadata.
    Simulate(SimulateArgs),
    /// Fit fringes in a histogram CSV.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug, Clone)]
#[group(required = false, multiple = false)]
pub struct Source {
    /// Config JSON file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Shipped preset for the concrete design.
    #[arg(long)]
    pub paper: bool,
    /// Shipped preset for the f = g = h = 1 threshold.
    #[arg(long)]
    pub threshold: bool,
}

impl Source {
    fn is_given(&self) -> bool {
        self.config.is_some() || self.paper || self.threshold
    }

    fn load(&self) -> Result<RunConfig, Failure> {
        if let Some(path) = &self.config {
            RunConfig::load(path).map_err(Failure::config)
        } else if self.threshold {
            Ok(RunConfig::threshold())
        } else if self.paper {
            Ok(RunConfig::paper())
        } else {
            Err(Failure::new(
                EXIT_CONFIG,
                "give one of --config, --paper, --threshold",
            ))
        }
    }
}

#[derive(Args, Debug)]
pub struct DesignArgs {
    #[command(flatten)]
    pub source: Source,
    /// Sweep spec JSON: lists for three of f, g, h, phi0; the fourth is derived.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["config", "paper", "threshold"])]
    pub sweep: Option<PathBuf>,
    /// Directory for the design CSV.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Exit nonzero when the design is infeasible.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: Source,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config pair count.
    #[arg(long)]
    pub pairs: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory; falls back to the config's output_dir, then spdc-out.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Also write per-pair detection records.
    #[arg(long)]
    pub records: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ColumnArg {
    Total,
    CoincA,
    CoincB,
    NoCoinc,
}

impl From<ColumnArg> for HistogramColumn {
    fn from(c: ColumnArg) -> Self {
        match c {
            ColumnArg::Total => HistogramColumn::Total,
            ColumnArg::CoincA => HistogramColumn::CoincA,
            ColumnArg::CoincB => HistogramColumn::CoincB,
            ColumnArg::NoCoinc => HistogramColumn::NoCoinc,
        }
    }
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Histogram CSV written by `simulate`.
    pub histogram: PathBuf,
    /// Layout source the histogram is interpreted against.
    #[command(flatten)]
    pub source: Source,
    /// Metadata JSON; defaults to metadata.json beside the histogram.
    #[arg(long, value_name = "PATH")]
    pub metadata: Option<PathBuf>,
    /// Histogram columns to fit (repeatable).
    #[arg(long, value_enum, default_values_t = [ColumnArg::Total])]
    pub column: Vec<ColumnArg>,
    /// Proceed despite a missing or mismatched run digest.
    #[arg(long)]
    pub force: bool,
    /// Output directory; defaults to the histogram's directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    fn config(e: ConfigError) -> Self {
        Self::new(EXIT_CONFIG, format!("config error at {e}"))
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Self::new(EXIT_RUNTIME, e.to_string())
    }

    fn fit(e: FitError) -> Self {
        let code = match e {
            FitError::NonConvergence { .. } => EXIT_NONCONVERGENCE,
            FitError::InsufficientData(_) => EXIT_RUNTIME,
        };
        Self::new(code, e.to_string())
    }
}

/// Runs a parsed command, returning the text for stdout.
pub fn execute(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Design(a) => design(a),
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::runtime(format!("{}: {e}", dir.display())))
}

fn design(a: DesignArgs) -> Result<String, Failure> {
    if let Some(path) = &a.sweep {
        return design_sweep(path, a.out.as_deref());
    }
    let config = a.source.load()?;
    let layout = config.layout().map_err(Failure::config)?;
    let params = params_from_layout(&layout);
    let point = DesignPoint {
        f: params.f,
        g: params.g,
        h: params.h,
        layout,
        measures: entanglement_measures(&layout),
        report: check_feasibility(&layout),
    };
    let mut out = design_report(&config, &point);
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        let path = dir.join("design.csv");
        let file = std::fs::File::create(&path)
            .map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
        write_design_csv(file, &[point]).map_err(Failure::runtime)?;
        let _ = writeln!(out, "wrote {}", path.display());
    }
    if a.strict && !point.report.all_ok() {
        return Err(Failure::new(
            EXIT_RUNTIME,
            format!("{out}design is infeasible"),
        ));
    }
    Ok(out)
}

fn design_sweep(path: &Path, out_dir: Option<&Path>) -> Result<String, Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_slice(&bytes);
    let spec: SweepSpec = serde_path_to_error::deserialize(de).map_err(|e| {
        Failure::new(
            EXIT_CONFIG,
            format!(
                "config error at {}:{}: {}",
                path.display(),
                e.path(),
                e.inner()
            ),
        )
    })?;
    let table = sweep_designs(&spec).map_err(|e| match e {
        DesignError::OverDetermined => Failure::new(EXIT_CONFIG, e.to_string()),
        other => Failure::runtime(other),
    })?;
    let points = sweep_points(&table);
    let mut csv_bytes = Vec::new();
    write_design_csv(&mut csv_bytes, &points).map_err(Failure::runtime)?;
    let mut report = String::new();
    for s in &table.skipped {
        let _ = writeln!(report, "# skipped grid point {:?}: {}", s.index, s.error);
    }
    match out_dir {
        Some(dir) => {
            create_dir(dir)?;
            let target = dir.join("sweep.csv");
            std::fs::write(&target, &csv_bytes)
                .map_err(|e| Failure::runtime(format!("{}: {e}", target.display())))?;
            let _ = writeln!(
                report,
                "{} feasible-checked rows, {} skipped; wrote {}",
                points.len(),
                table.skipped.len(),
                target.display()
            );
        }
        None => report.push_str(&String::from_utf8(csv_bytes).expect("csv is UTF-8")),
    }
    Ok(report)
}

fn flag(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "VIOLATED"
    }
}

pub fn design_report(config: &RunConfig, p: &DesignPoint) -> String {
    let l = &p.layout;
    let m = &p.measures;
    let r = &p.report;
    let mut s = String::new();
    let _ = writeln!(s, "design");
    if let Some(d) = &config.design {
        let _ = writeln!(s, "  inputs        f = {}  g = {}  h = {}", d.f, d.g, d.h);
    }
    let _ = writeln!(s, "  wavelength    {:.1} nm", l.wavelength * 1e9);
    let _ = writeln!(s, "  phi0          {:.4} mrad", l.phi0 * 1e3);
    let _ = writeln!(s, "  d             {:.1} mm", l.slit_distance * 1e3);
    let _ = writeln!(
        s,
        "  s             {:.3} mm   (s/d = {:.2} phi0)",
        l.slit_separation * 1e3,
        l.slit_separation / l.slit_distance / l.phi0
    );
    let _ = writeln!(
        s,
        "  w             {:.4e} mm  ({:.2} lambda)",
        l.source_width * 1e3,
        l.source_width / l.wavelength
    );
    let _ = writeln!(s, "  x             {:.3} mm", l.crystal_thickness * 1e3);
    let _ = writeln!(s, "  zone depth    {:.3} mm", zone_axial_extent(l) * 1e3);
    if let Ok(pb) = both_access_fraction(l) {
        let count = double_slit_count_fraction(pb).unwrap_or(f64::NAN);
        let _ = writeln!(s, "  both-access   {pb:.4}   double-slit counts {count:.4}");
    }
    let _ = writeln!(s, "implied parameters");
    let _ = writeln!(s, "  f = {:.4}  g = {:.4}  h = {:.4}", p.f, p.g, p.h);
    let _ = writeln!(
        s,
        "  fg2h = {:.3}  hg2 = {:.3}  g2h = {:.3}  32*pi*f = {:.2}",
        p.f * p.g * p.g * p.h,
        p.h * p.g * p.g,
        p.g * p.g * p.h,
        32.0 * std::f64::consts::PI * p.f
    );
    let _ = writeln!(s, "entanglement");
    let _ = writeln!(
        s,
        "  K_pe = {:.1}  K_ae = {:.1}  K_ae/K_pe = {:.3}  window {}",
        m.k_pe,
        m.k_ae,
        m.ratio,
        flag(m.in_window)
    );
    let _ = writeln!(s, "feasibility");
    let _ = writeln!(
        s,
        "  resolution     w/d < lambda/s    {:<8} margin {:.3e} rad",
        flag(r.resolution.ok),
        r.resolution.margin
    );
    let _ = writeln!(
        s,
        "  discrimination phi0 < s/d        {:<8} margin {:.3e} rad",
        flag(r.discrimination.ok),
        r.discrimination.margin
    );
    let _ = writeln!(
        s,
        "  width          w < lambda/phi0   {:<8} margin {:.3e} m",
        flag(r.width.ok),
        r.width.margin
    );
    let _ = writeln!(
        s,
        "  window         0.5 < ratio < 1   {:<8} margin {:.3e}",
        flag(r.window.ok),
        r.window.margin
    );
    let _ = writeln!(
        s,
        "  width bound lambda*d/s = {:.1} lambda",
        r.derived_width_bound / l.wavelength
    );
    let _ = writeln!(s, "  feasible: {}", if r.all_ok() { "yes" } else { "no" });
    s
}

fn simulate(a: SimulateArgs) -> Result<String, Failure> {
    let mut config = a.source.load()?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(n) = a.pairs {
        config.n_pairs = n;
    }
    if let Some(w) = a.workers {
        config.workers = w;
    }
    let mut sim = config.simulation().map_err(Failure::config)?;
    sim.keep_records = a.records;
    let dir = a
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("spdc-out"));
    create_dir(&dir)?;
    let result = run_experiment(&sim).map_err(Failure::runtime)?;
    write_histogram_csv(&dir.join("histogram.csv"), &result).map_err(Failure::runtime)?;
    let meta = Metadata::new(&config, &result);
    write_json(&dir.join("metadata.json"), &meta).map_err(Failure::runtime)?;
    if let Some(records) = &result.records {
        write_records_csv(&dir.join("records.csv"), records).map_err(Failure::runtime)?;
    }
    let c = &result.counters;
    let mut s = String::new();
    let _ = writeln!(s, "pairs sampled          {}", c.n_pairs_sampled);
    let _ = writeln!(s, "blocked                {}", c.n_blocked);
    let _ = writeln!(
        s,
        "single access          {}  ({} aimed away)",
        c.n_single_access, c.n_single_untransmitted
    );
    let _ = writeln!(s, "both access            {}", c.n_both_access);
    let _ = writeln!(s, "both-access share      {:.4}", c.both_access_share());
    let _ = writeln!(
        s,
        "double-slit share      {:.4}",
        c.double_slit_count_share()
    );
    let _ = writeln!(
        s,
        "screen counts          {}  (coinc A {}, coinc B {})",
        c.n_screen, c.n_coinc_a, c.n_coinc_b
    );
    let _ = writeln!(
        s,
        "deviation mean/sd      {:.3e} / {:.4e} rad",
        result.deviation.mean, result.deviation.std_dev
    );
    if let Some(t) = &result.two_axis {
        let _ = writeln!(
            s,
            "two-axis KS            {:.5} over {} draws",
            t.ks_statistic, t.samples
        );
    }
    let _ = writeln!(s, "config digest          {}", result.config_digest);
    let _ = writeln!(s, "wrote {}", dir.display());
    Ok(s)
}

fn analyze(a: AnalyzeArgs) -> Result<String, Failure> {
    let hist =
        read_histogram_csv(&a.histogram).map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
    let mut s = String::new();

    let meta_path = a
        .metadata
        .clone()
        .unwrap_or_else(|| a.histogram.with_file_name("metadata.json"));
    let meta = if meta_path.exists() {
        Some(read_metadata(&meta_path).map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?)
    } else {
        None
    };

    let config = if a.source.is_given() {
        Some(a.source.load()?)
    } else {
        meta.as_ref().map(|m| m.config.clone())
    };
    let Some(config) = config else {
        return Err(Failure::new(
            EXIT_CONFIG,
            "no layout source: give --config, --paper or --threshold, or keep metadata.json beside the histogram",
        ));
    };
    let layout: OpticalLayout = config
        .simulation()
        .map_err(Failure::config)?
        .effective_layout();

    let digest = layout_digest(&layout);
    match &meta {
        Some(m) if m.layout_digest != digest => {
            if !a.force {
                return Err(Failure::new(
                    EXIT_CONFIG,
                    format!(
                        "layout digest {digest} does not match the run's {} ({}); pass --force to analyze anyway",
                        m.layout_digest,
                        meta_path.display()
                    ),
                ));
            }
            let _ = writeln!(
                s,
                "warning: layout does not match the run ({}), continuing under --force",
                meta_path.display()
            );
        }
        None if !a.force => {
            return Err(Failure::new(
                EXIT_CONFIG,
                format!(
                    "no run metadata at {}; pass --force to analyze anyway",
                    meta_path.display()
                ),
            ));
        }
        None => {
            let _ = writeln!(s, "warning: no run metadata, continuing under --force");
        }
        _ => {}
    }
    let run_digest = meta
        .as_ref()
        .map(|m| m.config_digest.clone())
        .unwrap_or_default();

    let envelope = EnvelopeModel::from_layout(&layout);
    let intrinsic = both_access_coherence(&layout);
    let reference = layout.fringe_period();
    let options = FitOptions {
        intrinsic_visibility: intrinsic,
        ..FitOptions::default()
    };
    let mut rows = Vec::new();
    let mut plot = Vec::new();
    for (k, col) in a.column.iter().enumerate() {
        let col = HistogramColumn::from(*col);
        let binned = hist
            .binned(col)
            .map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", a.histogram.display())))?;
        let fit = fit_fringes_with(&binned, reference, &envelope, options).map_err(Failure::fit)?;
        let margin = fringe_period_check(&fit, &layout);
        let _ = writeln!(
            s,
            "{:<9} period {:.5e} m (margin {:+.4}{})  V {:.4}  phase {:+.4} rad  fringe fraction {:.4}  residual {:.4}",
            col.header(),
            fit.period,
            margin,
            if margin.abs() > PERIOD_TOLERANCE { ", LAYOUT MISMATCH" } else { "" },
            fit.visibility,
            fit.phase,
            fit.fringe_fraction,
            fit.fit_residual,
        );
        if k == 0 {
            plot = (0..binned.len())
                .map(|i| {
                    let y = binned.center(i);
                    (y, fit.model(&binned, &envelope, y))
                })
                .collect();
        }
        rows.push(AnalysisRow::new(
            col,
            &fit,
            reference,
            margin,
            intrinsic,
            binned.total(),
            run_digest.clone(),
        ));
    }

    let dir = a.out.clone().unwrap_or_else(|| {
        a.histogram
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default()
    });
    if !dir.as_os_str().is_empty() {
        create_dir(&dir)?;
    }
    write_analysis_csv(&dir.join("analysis.csv"), &rows).map_err(Failure::runtime)?;
    write_plot_data(&dir.join("plot.dat"), &plot).map_err(Failure::runtime)?;
    let _ = writeln!(
        s,
        "wrote {} and {}",
        dir.join("analysis.csv").display(),
        dir.join("plot.dat").display()
    );
    Ok(s)
}
