//! Result rows and the CSV files written from them.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::PlotAxis;
use crate::error::{Error, Result};
use crate::evaluation::EvalReport;
use crate::models::{Family, ModelDescriptor};

/// One trained and evaluated configuration, or the reason it failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub environment: String,
    pub descriptor: ModelDescriptor,
    pub seed: u64,
    pub outcome: std::result::Result<EvalReport, String>,
    pub train_time_s: f64,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
}

impl ResultRow {
    pub fn failed(environment: &str, descriptor: ModelDescriptor, seed: u64, error: &Error) -> Self {
        Self {
            environment: environment.to_string(),
            descriptor,
            seed,
            outcome: Err(error.to_string()),
            train_time_s: 0.0,
            stopped_epoch: 0,
            best_epoch: 0,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.outcome.is_ok()
    }

    pub fn report(&self) -> Option<&EvalReport> {
        self.outcome.as_ref().ok()
    }

    pub fn status(&self) -> String {
        match &self.outcome {
            Ok(_) => "ok".into(),
            Err(msg) => format!("failed: {msg}"),
        }
    }

    pub fn rmse_mean(&self) -> Option<f64> {
        self.report().map(|r| r.rmse_mean)
    }

    /// Family name, suffixed with the layer count for stacked models.
    pub fn series(&self) -> String {
        if self.descriptor.layers > 1 {
            format!("{}-{}", self.descriptor.family, self.descriptor.layers)
        } else {
            self.descriptor.family.to_string()
        }
    }

    fn key_fields(&self) -> Vec<String> {
        let d = &self.descriptor;
        vec![
            self.environment.clone(),
            d.family.to_string(),
            d.layers.to_string(),
            d.hidden_units.to_string(),
            d.num_kernels.to_string(),
            d.kernel_size.to_string(),
            d.input_len.to_string(),
            d.output_len.to_string(),
        ]
    }
}

pub const MAIN_HEADER: [&str; 15] = [
    "environment",
    "family",
    "layers",
    "hidden_units",
    "num_kernels",
    "kernel_size",
    "input_len",
    "output_len",
    "seed",
    "status",
    "rmse_mean",
    "mae_mean",
    "train_time_s",
    "stopped_epoch",
    "best_epoch",
];

/// Columns that vary between otherwise identical runs.
pub const TIMING_COLUMNS: [&str; 1] = ["train_time_s"];

pub const PER_STEP_HEADER: [&str; 12] = [
    "environment",
    "family",
    "layers",
    "hidden_units",
    "num_kernels",
    "kernel_size",
    "input_len",
    "output_len",
    "seed",
    "step",
    "rmse",
    "mae",
];

pub const PLOT_HEADER: [&str; 6] = ["axis", "x", "series", "seed", "rmse", "mae"];

pub const SUMMARY_HEADER: [&str; 13] = [
    "environment",
    "family",
    "layers",
    "hidden_units",
    "num_kernels",
    "kernel_size",
    "input_len",
    "output_len",
    "runs",
    "failures",
    "rmse_median",
    "mae_median",
    "train_time_median_s",
];

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

pub fn write_main_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(MAIN_HEADER)?;
    for row in rows {
        let mut rec = row.key_fields();
        rec.push(row.seed.to_string());
        rec.push(row.status());
        match row.report() {
            Some(r) => {
                rec.push(r.rmse_mean.to_string());
                rec.push(r.mae_mean.to_string());
            }
            None => rec.extend([String::new(), String::new()]),
        }
        rec.push(format!("{:.6}", row.train_time_s));
        rec.push(row.stopped_epoch.to_string());
        rec.push(row.best_epoch.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One line per successful row and prediction step, steps counted from 1.
pub fn write_per_step_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(PER_STEP_HEADER)?;
    for row in rows {
        let Some(r) = row.report() else { continue };
        for (i, (rmse, mae)) in r.rmse_per_step.iter().zip(&r.mae_per_step).enumerate() {
            let mut rec = row.key_fields();
            rec.extend([row.seed.to_string(), (i + 1).to_string(), rmse.to_string(), mae.to_string()]);
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Resolves `Auto` to whichever length varies more across `rows`.
pub fn resolve_axis(rows: &[ResultRow], axis: PlotAxis) -> PlotAxis {
    match axis {
        PlotAxis::Auto => {
            let distinct = |f: fn(&ModelDescriptor) -> usize| {
                let mut v: Vec<usize> = rows.iter().map(|r| f(&r.descriptor)).collect();
                v.sort_unstable();
                v.dedup();
                v.len()
            };
            if distinct(|d| d.output_len) > distinct(|d| d.input_len) {
                PlotAxis::OutputLen
            } else {
                PlotAxis::InputLen
            }
        }
        other => other,
    }
}

/// Long format: one line per successful row, `x` on the chosen axis and
/// one series per family.
pub fn write_plot_csv<W: Write>(rows: &[ResultRow], axis: PlotAxis, out: W) -> Result<()> {
    let axis = resolve_axis(rows, axis);
    let (name, pick): (&str, fn(&ModelDescriptor) -> usize) = match axis {
        PlotAxis::OutputLen => ("output_len", |d| d.output_len),
        _ => ("input_len", |d| d.input_len),
    };
    let mut w = csv_writer(out);
    w.write_record(PLOT_HEADER)?;
    for row in rows {
        let Some(r) = row.report() else { continue };
        w.write_record([
            name.to_string(),
            pick(&row.descriptor).to_string(),
            row.series(),
            row.seed.to_string(),
            r.rmse_mean.to_string(),
            r.mae_mean.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Median of the scalar errors of successful runs per configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub environment: String,
    pub descriptor: ModelDescriptor,
    pub runs: usize,
    pub failures: usize,
    pub rmse_median: Option<f64>,
    pub mae_median: Option<f64>,
    pub train_time_median_s: Option<f64>,
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    type Key = (String, Family, usize, usize, usize, usize, usize, usize);
    let mut groups: BTreeMap<Key, Vec<&ResultRow>> = BTreeMap::new();
    let mut order: Vec<Key> = Vec::new();
    for row in rows {
        let d = &row.descriptor;
        let key = (
            row.environment.clone(),
            d.family,
            d.layers,
            d.hidden_units,
            d.num_kernels,
            d.kernel_size,
            d.input_len,
            d.output_len,
        );
        let entry = groups.entry(key.clone()).or_default();
        if entry.is_empty() {
            order.push(key);
        }
        entry.push(row);
    }
    order
        .into_iter()
        .map(|key| {
            let group = &groups[&key];
            let ok: Vec<&EvalReport> = group.iter().filter_map(|r| r.report()).collect();
            SummaryRow {
                environment: key.0.clone(),
                descriptor: group[0].descriptor,
                runs: group.len(),
                failures: group.len() - ok.len(),
                rmse_median: median(ok.iter().map(|r| r.rmse_mean).collect()),
                mae_median: median(ok.iter().map(|r| r.mae_mean).collect()),
                train_time_median_s: median(group.iter().filter(|r| r.is_ok()).map(|r| r.train_time_s).collect()),
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for s in summarize(rows) {
        let d = &s.descriptor;
        w.write_record([
            s.environment.clone(),
            d.family.to_string(),
            d.layers.to_string(),
            d.hidden_units.to_string(),
            d.num_kernels.to_string(),
            d.kernel_size.to_string(),
            d.input_len.to_string(),
            d.output_len.to_string(),
            s.runs.to_string(),
            s.failures.to_string(),
            opt(s.rmse_median),
            opt(s.mae_median),
            s.train_time_median_s.map(|t| format!("{t:.6}")).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub main: PathBuf,
    pub per_step: PathBuf,
    pub plot: PathBuf,
    pub summary: PathBuf,
}

/// Writes `<name>.csv`, `<name>_per_step.csv`, `<name>_plot.csv` and
/// `<name>_summary.csv` into `dir`, creating it if needed.
pub fn emit_report(rows: &[ResultRow], dir: &Path, name: &str, axis: PlotAxis) -> Result<ReportPaths> {
    if rows.is_empty() {
        return Err(Error::Config("no result rows to report".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = ReportPaths {
        main: dir.join(format!("{name}.csv")),
        per_step: dir.join(format!("{name}_per_step.csv")),
        plot: dir.join(format!("{name}_plot.csv")),
        summary: dir.join(format!("{name}_summary.csv")),
    };
    let create = |p: &Path| std::fs::File::create(p).map(std::io::BufWriter::new).map_err(|e| Error::io(p, e));
    write_main_csv(rows, create(&paths.main)?)?;
    write_per_step_csv(rows, create(&paths.per_step)?)?;
    write_plot_csv(rows, axis, create(&paths.plot)?)?;
    write_summary_csv(rows, create(&paths.summary)?)?;
    Ok(paths)
}

/// Drops the timing columns from a main CSV so runs can be compared.
pub fn strip_timing(main_csv: &str) -> Result<String> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(main_csv.as_bytes());
    let mut out = Vec::new();
    let mut keep: Option<Vec<bool>> = None;
    {
        let mut w = csv_writer(&mut out);
        for rec in r.records() {
            let rec = rec?;
            let mask = keep.get_or_insert_with(|| rec.iter().map(|h| !TIMING_COLUMNS.contains(&h)).collect());
            w.write_record(rec.iter().zip(mask.iter()).filter(|(_, k)| **k).map(|(v, _)| v))?;
        }
        w.flush().map_err(csv::Error::from)?;
    }
    String::from_utf8(out).map_err(|e| Error::Format(e.to_string()))
}
