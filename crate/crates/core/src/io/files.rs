use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::design::{EntanglementMeasures, FeasibilityReport, SweepRow, SweepTable};
use crate::fringe::{BinnedCounts, FitError, FringeAnalysis};
use crate::geometry::OpticalLayout;
use crate::io::config::RunConfig;
use crate::montecarlo::run::{DeviationStats, TwoAxisCheck};
use crate::montecarlo::{layout_digest, DetectionRecord, RunCounters, RunResult, ScreenWindow};

pub const HISTOGRAM_HEADER: [&str; 5] = ["bin_center_m", "total", "coinc_A", "coinc_B", "no_coinc"];

#[derive(Debug)]
pub struct FileError {
    pub path: PathBuf,
    /// 1-based line, when the problem is inside the file.
    pub line: Option<u64>,
    pub message: String,
}

impl FileError {
    fn new(path: &Path, line: Option<u64>, message: impl Into<String>) -> Self {
        FileError {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::new(path, None, e.to_string())
    }
}

impl fmt::Display for FileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.path.display(), line, self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

impl std::error::Error for FileError {}

/// The simulator's bin format, read back.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramFile {
    pub centers: Vec<f64>,
    pub total: Vec<f64>,
    pub coinc_a: Vec<f64>,
    pub coinc_b: Vec<f64>,
    pub no_coinc: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistogramColumn {
    Total,
    CoincA,
    CoincB,
    NoCoinc,
}

impl HistogramColumn {
    pub fn header(self) -> &'static str {
        match self {
            HistogramColumn::Total => "total",
            HistogramColumn::CoincA => "coinc_A",
            HistogramColumn::CoincB => "coinc_B",
            HistogramColumn::NoCoinc => "no_coinc",
        }
    }
}

impl HistogramFile {
    pub fn column(&self, c: HistogramColumn) -> &[f64] {
        match c {
            HistogramColumn::Total => &self.total,
            HistogramColumn::CoincA => &self.coinc_a,
            HistogramColumn::CoincB => &self.coinc_b,
            HistogramColumn::NoCoinc => &self.no_coinc,
        }
    }

    pub fn binned(&self, c: HistogramColumn) -> Result<BinnedCounts, FitError> {
        BinnedCounts::from_centers(&self.centers, self.column(c).to_vec())
    }
}

pub fn write_histogram_csv(path: &Path, result: &RunResult) -> Result<(), FileError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| FileError::io(path, e))?;
    w.write_record(HISTOGRAM_HEADER)
        .map_err(|e| FileError::io(path, e))?;
    for i in 0..result.window.n_bins {
        w.write_record([
            format!("{:e}", result.window.bin_center(i)),
            result.total[i].to_string(),
            result.coinc_a[i].to_string(),
            result.coinc_b[i].to_string(),
            result.no_coinc[i].to_string(),
        ])
        .map_err(|e| FileError::io(path, e))?;
    }
    w.flush().map_err(|e| FileError::io(path, e))
}

pub fn read_histogram_csv(path: &Path) -> Result<HistogramFile, FileError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| FileError::io(path, e))?;
    let headers = r
        .headers()
        .map_err(|e| FileError::new(path, Some(1), e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != HISTOGRAM_HEADER {
        return Err(FileError::new(
            path,
            Some(1),
            format!("expected header `{}`", HISTOGRAM_HEADER.join(",")),
        ));
    }
    let mut h = HistogramFile {
        centers: Vec::new(),
        total: Vec::new(),
        coinc_a: Vec::new(),
        coinc_b: Vec::new(),
        no_coinc: Vec::new(),
    };
    for record in r.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line());
            FileError::new(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line());
        let mut values = [0.0; 5];
        for (k, v) in values.iter_mut().enumerate() {
            let field = record.get(k).unwrap_or("");
            *v = field.trim().parse::<f64>().map_err(|_| {
                FileError::new(
                    path,
                    line,
                    format!(
                        "column {}: cannot parse `{field}` as a number",
                        HISTOGRAM_HEADER[k]
                    ),
                )
            })?;
            if !v.is_finite() || (k > 0 && *v < 0.0) {
                return Err(FileError::new(
                    path,
                    line,
                    format!("column {}: invalid value `{field}`", HISTOGRAM_HEADER[k]),
                ));
            }
        }
        h.centers.push(values[0]);
        h.total.push(values[1]);
        h.coinc_a.push(values[2]);
        h.coinc_b.push(values[3]);
        h.no_coinc.push(values[4]);
    }
    if h.centers.is_empty() {
        return Err(FileError::new(path, None, "no histogram rows"));
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config: RunConfig,
    pub layout: OpticalLayout,
    pub seed: u64,
    pub n_pairs: u64,
    pub counters: RunCounters,
    pub both_access_share: f64,
    pub double_slit_count_share: f64,
    pub deviation: DeviationStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_axis: Option<TwoAxisCheck>,
    pub window: ScreenWindow,
    pub config_digest: String,
    pub layout_digest: String,
}

impl Metadata {
    pub fn new(config: &RunConfig, result: &RunResult) -> Self {
        // workers and output location do not affect results
        let mut echo = config.clone();
        echo.workers = 0;
        echo.output_dir = None;
        Metadata {
            config: echo,
            layout: result.layout,
            seed: result.seed,
            n_pairs: result.counters.n_pairs_sampled,
            counters: result.counters,
            both_access_share: result.counters.both_access_share(),
            double_slit_count_share: result.counters.double_slit_count_share(),
            deviation: result.deviation,
            two_axis: result.two_axis,
            window: result.window,
            config_digest: result.config_digest.clone(),
            layout_digest: layout_digest(&result.layout),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FileError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| FileError::io(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| FileError::io(path, e))
}

pub fn read_metadata(path: &Path) -> Result<Metadata, FileError> {
    let bytes = std::fs::read(path).map_err(|e| FileError::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_slice(&bytes);
    serde_path_to_error::deserialize(de)
        .map_err(|e| FileError::new(path, None, format!("{}: {}", e.path(), e.inner())))
}

pub fn write_records_csv(path: &Path, records: &[DetectionRecord]) -> Result<(), FileError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| FileError::io(path, e))?;
    w.write_record([
        "signal_seq",
        "idler_seq",
        "screen_position_m",
        "slit_access",
        "idler_outcome",
    ])
    .map_err(|e| FileError::io(path, e))?;
    for r in records {
        w.write_record([
            r.signal_seq.to_string(),
            r.idler_seq.to_string(),
            format!("{:e}", r.screen_position),
            r.slit_access.as_str().to_string(),
            r.idler_outcome.as_str().to_string(),
        ])
        .map_err(|e| FileError::io(path, e))?;
    }
    w.flush().map_err(|e| FileError::io(path, e))
}

/// One fitted histogram as a flat key-value row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub column: String,
    pub period_m: f64,
    pub reference_period_m: f64,
    pub period_margin: f64,
    pub visibility: f64,
    pub phase_rad: f64,
    pub fringe_fraction: f64,
    pub intrinsic_visibility: f64,
    pub fit_residual: f64,
    pub raw_visibility: f64,
    pub spectrum_peak_period_m: f64,
    pub total_counts: f64,
    pub config_digest: String,
}

impl AnalysisRow {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        column: HistogramColumn,
        a: &FringeAnalysis,
        reference_period: f64,
        margin: f64,
        intrinsic_visibility: f64,
        total_counts: f64,
        config_digest: String,
    ) -> Self {
        AnalysisRow {
            column: column.header().to_string(),
            period_m: a.period,
            reference_period_m: reference_period,
            period_margin: margin,
            visibility: a.visibility,
            phase_rad: a.phase,
            fringe_fraction: a.fringe_fraction,
            intrinsic_visibility,
            fit_residual: a.fit_residual,
            raw_visibility: a.raw_visibility,
            spectrum_peak_period_m: a.spectrum_peak_period,
            total_counts,
            config_digest,
        }
    }
}

pub fn write_analysis_csv(path: &Path, rows: &[AnalysisRow]) -> Result<(), FileError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| FileError::io(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| FileError::io(path, e))?;
    }
    w.flush().map_err(|e| FileError::io(path, e))
}

pub fn read_analysis_csv(path: &Path) -> Result<Vec<AnalysisRow>, FileError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| FileError::io(path, e))?;
    r.deserialize()
        .map(|row| {
            row.map_err(|e| {
                let line = e.position().map(|p| p.line());
                FileError::new(path, line, e.to_string())
            })
        })
        .collect()
}

/// Two whitespace-separated columns: position and fitted model value.
pub fn write_plot_data(path: &Path, points: &[(f64, f64)]) -> Result<(), FileError> {
    let file = std::fs::File::create(path).map_err(|e| FileError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for (x, y) in points {
        writeln!(w, "{x:e} {y:e}").map_err(|e| FileError::io(path, e))?;
    }
    w.flush().map_err(|e| FileError::io(path, e))
}

pub const DESIGN_HEADER: [&str; 20] = [
    "f",
    "g",
    "h",
    "phi0",
    "w",
    "s",
    "d",
    "x",
    "k_pe",
    "k_ae",
    "ratio",
    "g2h",
    "resolution_ok",
    "discrimination_ok",
    "width_ok",
    "window_ok",
    "resolution_margin",
    "discrimination_margin",
    "width_margin",
    "window_margin",
];

/// One design point: the parameters the layout implies, and its checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignPoint {
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub layout: OpticalLayout,
    pub measures: EntanglementMeasures,
    pub report: FeasibilityReport,
}

impl From<&SweepRow> for DesignPoint {
    fn from(r: &SweepRow) -> Self {
        DesignPoint {
            f: r.params.f,
            g: r.params.g,
            h: r.params.h,
            layout: r.layout,
            measures: r.measures,
            report: r.report,
        }
    }
}

impl DesignPoint {
    fn record(&self) -> Vec<String> {
        let l = &self.layout;
        let r = &self.report;
        let num = |v: f64| format!("{v:e}");
        vec![
            num(self.f),
            num(self.g),
            num(self.h),
            num(l.phi0),
            num(l.source_width),
            num(l.slit_separation),
            num(l.slit_distance),
            num(l.crystal_thickness),
            num(self.measures.k_pe),
            num(self.measures.k_ae),
            num(self.measures.ratio),
            num(self.g * self.g * self.h),
            r.resolution.ok.to_string(),
            r.discrimination.ok.to_string(),
            r.width.ok.to_string(),
            r.window.ok.to_string(),
            num(r.resolution.margin),
            num(r.discrimination.margin),
            num(r.width.margin),
            num(r.window.margin),
        ]
    }
}

pub fn write_design_csv<W: std::io::Write>(
    out: W,
    points: &[DesignPoint],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DESIGN_HEADER)?;
    for p in points {
        w.write_record(p.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep_points(table: &SweepTable) -> Vec<DesignPoint> {
    table.rows.iter().map(DesignPoint::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::{run_experiment, SimulationConfig};

    #[test]
    fn histogram_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let r = run_experiment(&SimulationConfig::new(OpticalLayout::paper(), 20_000, 3)).unwrap();
        write_histogram_csv(&path, &r).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("bin_center_m,total,coinc_A,coinc_B,no_coinc\n"));
        let h = read_histogram_csv(&path).unwrap();
        assert_eq!(h.centers.len(), r.window.n_bins);
        assert_eq!(h.total.iter().sum::<f64>() as u64, r.counters.n_screen);
        let b = h.binned(HistogramColumn::Total).unwrap();
        assert!((b.bin_width - r.window.bin_width).abs() < 1e-12 * r.window.bin_width);
    }

    #[test]
    fn malformed_histogram_reports_line_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "bin_center_m,total,coinc_A,coinc_B,no_coinc\n0.0,1,0,0,1\n1e-5,x,0,0,1\n",
        )
        .unwrap();
        let e = read_histogram_csv(&path).unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.to_string().contains("column total"), "{e}");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert_eq!(read_histogram_csv(&path).unwrap_err().line, Some(1));
    }

    #[test]
    fn design_csv_has_the_documented_columns() {
        let l = OpticalLayout::paper();
        let p = crate::design::params_from_layout(&l);
        let point = DesignPoint {
            f: p.f,
            g: p.g,
            h: p.h,
            layout: l,
            measures: crate::design::entanglement_measures(&l),
            report: crate::design::check_feasibility(&l),
        };
        let mut buf = Vec::new();
        write_design_csv(&mut buf, &[point]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), DESIGN_HEADER.join(","));
        assert_eq!(lines.next().unwrap().split(',').count(), 20);
    }
}
