//! Output directory layout and file formats.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use peoc_core::baselines::AeModel;
use peoc_core::bench::{BenchmarkReport, RepeatStatus, PEOC_FIRST, PEOC_LAST};
use peoc_core::evalx::{auc_table_to_csv, AggregateStats};
use peoc_core::nn::{decode_params, encode_params, PolicyArch, PolicyParams, POLICY_MAGIC};

use crate::config::config_to_string;
use crate::error::{BenchError, Result};
use crate::svg::{box_stats, box_svg, roc_svg, training_svg, write_file, RocSeries};

/// Median PEOC-1 AUC required for the directional check.
pub const REPRODUCTION_MIN_AUC: f64 = 0.6;

pub fn save_snapshot(path: &Path, params: &PolicyParams) -> Result<()> {
    write_file(path, encode_params(POLICY_MAGIC, &params.set))
}

pub fn load_snapshot(path: &Path, arch: PolicyArch) -> Result<PolicyParams> {
    let bytes = std::fs::read(path).map_err(|e| BenchError::io(path, e))?;
    let bad = |e: peoc_core::Error| BenchError::Data { path: path.into(), message: e.to_string() };
    let set = decode_params(POLICY_MAGIC, &arch.shapes(), &bytes).map_err(bad)?;
    PolicyParams::from_set(arch, set).map_err(bad)
}

pub fn save_autoencoder(path: &Path, model: &AeModel) -> Result<()> {
    write_file(path, model.to_bytes())
}

/// Paths of the standard output layout under one directory.
#[derive(Debug, Clone)]
pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn report_csv(&self) -> PathBuf {
        self.root.join("report.csv")
    }
    pub fn aggregate_csv(&self) -> PathBuf {
        self.root.join("aggregate.csv")
    }
    pub fn report_txt(&self) -> PathBuf {
        self.root.join("report.txt")
    }
    pub fn config_txt(&self) -> PathBuf {
        self.root.join("config.txt")
    }
    pub fn roc_csv(&self, repeat: usize, classifier: &str) -> PathBuf {
        self.root.join("roc").join(format!("{repeat}_{classifier}.csv"))
    }
    pub fn curve_csv(&self, repeat: usize) -> PathBuf {
        self.root.join("curves").join(format!("{repeat}_training.csv"))
    }
    pub fn snapshot(&self, repeat: usize, which: &str) -> PathBuf {
        self.root.join("snapshots").join(format!("{repeat}_{which}.bin"))
    }
    pub fn roc_svg(&self, repeat: usize) -> PathBuf {
        self.root.join("plots").join(format!("roc_{repeat}.svg"))
    }
    pub fn training_svg(&self, repeat: usize) -> PathBuf {
        self.root.join("plots").join(format!("training_{repeat}.svg"))
    }
    pub fn box_svg(&self) -> PathBuf {
        self.root.join("plots").join("box.svg")
    }
}

/// Whether PEOC-1 has median AUC at least 0.6 and at least the PEOC-last median.
pub fn peoc_reproduced(aggregate: &AggregateStats) -> Option<bool> {
    let first = aggregate.get(PEOC_FIRST)?.median;
    let last = aggregate.get(PEOC_LAST)?.median;
    Some(first >= REPRODUCTION_MIN_AUC && first >= last)
}

pub fn report_text(report: &BenchmarkReport) -> String {
    let c = &report.config;
    let mut out = String::new();
    let _ = writeln!(out, "PEOC benchmark report");
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "master_seed {}  repeats {}  levels {}  train_steps {} ({} updates)",
        c.master_seed,
        c.n_repeats,
        c.m_levels,
        c.train_steps,
        c.updates()
    );
    let _ = writeln!(
        out,
        "accepted {} of {} (gate: mean return >= {} over the last {} updates)",
        report.accepted,
        report.repeats.len(),
        c.gate.min_return,
        c.gate.window
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<10} {:>3} {:>8} {:>8} {:>8} {:>8} {:>8}", "classifier", "n", "median", "mean", "std", "q1", "q3");
    for s in &report.aggregate.classifiers {
        let std = if s.std_defined { format!("{:.4}", s.std) } else { "-".into() };
        let _ = writeln!(
            out,
            "{:<10} {:>3} {:>8.4} {:>8.4} {:>8} {:>8.4} {:>8.4}",
            s.classifier, s.n, s.median, s.mean, std, s.q1, s.q3
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "repeats:");
    for r in &report.repeats {
        let ret = r.curve.final_window_return(c.gate.window);
        let (h0, h1) = (r.curve.first_window_entropy(c.gate.window), r.curve.final_window_entropy(c.gate.window));
        match &r.status {
            RepeatStatus::Accepted => {
                let aucs: Vec<String> = r.results.iter().map(|x| format!("{} {:.4}", x.classifier, x.roc.auc)).collect();
                let _ = writeln!(
                    out,
                    "  {:>3} accepted   return {ret:.3}  entropy {h0:.4} -> {h1:.4}  ind {}/{} ood {}  {}",
                    r.repeat,
                    r.ind_train,
                    r.ind_test,
                    r.ood,
                    aucs.join("  ")
                );
            }
            RepeatStatus::Discarded { reason } => {
                let _ = writeln!(out, "  {:>3} discarded  return {ret:.3}  entropy {h0:.4} -> {h1:.4}  ({reason})", r.repeat);
            }
        }
    }
    let accepted: Vec<_> = report.repeats.iter().filter(|r| r.accepted()).collect();
    let decreased = accepted.iter().filter(|r| r.entropy_decreased(c.gate.window)).count();
    let _ = writeln!(out);
    let _ = writeln!(out, "entropy decreased in {decreased} of {} accepted repeats", accepted.len());
    let verdict = match peoc_reproduced(&report.aggregate) {
        Some(true) => "REPRODUCED",
        Some(false) => "NOT REPRODUCED",
        None => "UNDETERMINED",
    };
    let _ = writeln!(
        out,
        "PEOC direction (median {PEOC_FIRST} >= {REPRODUCTION_MIN_AUC} and >= median {PEOC_LAST}): {verdict}"
    );
    out
}

/// Writes every artifact of `report` under `layout.root`.
pub fn write_report(report: &BenchmarkReport, layout: &OutputLayout) -> Result<()> {
    write_file(&layout.config_txt(), config_to_string(&report.config))?;
    let records = report.auc_records();
    write_file(&layout.report_csv(), auc_table_to_csv(&records))?;
    write_file(&layout.aggregate_csv(), report.aggregate.to_csv())?;
    write_file(&layout.report_txt(), report_text(report))?;
    for r in &report.repeats {
        write_file(&layout.curve_csv(r.repeat), r.curve.to_csv())?;
        write_file(&layout.training_svg(r.repeat), training_svg(&r.curve, &format!("Training, repeat {}", r.repeat)))?;
        if let Some((first, last)) = &r.snapshots {
            save_snapshot(&layout.snapshot(r.repeat, "first"), &first.params)?;
            save_snapshot(&layout.snapshot(r.repeat, "last"), &last.params)?;
        }
        if !r.accepted() {
            continue;
        }
        let mut series = Vec::new();
        for c in &r.results {
            write_file(&layout.roc_csv(r.repeat, &c.classifier), c.roc.to_csv())?;
            series.push(RocSeries {
                name: c.classifier.clone(),
                points: c.roc.points.iter().map(|p| (p.fpr, p.tpr)).collect(),
                auc: c.roc.auc,
            });
        }
        write_file(
            &layout.roc_svg(r.repeat),
            roc_svg(&series, &format!("ROC, repeat {}", r.repeat), "false positive rate", "true positive rate"),
        )?;
    }
    let boxes = box_stats(&records)?;
    write_file(&layout.box_svg(), box_svg(&boxes, "AUC over accepted repeats", "classifier", "ROC AUC"))
}
