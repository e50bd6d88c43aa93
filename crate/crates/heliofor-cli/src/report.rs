//! Structured-text report emission.
//!
//! Layout: a key-value header (schema version, config hash, every seed, the
//! data window), then bracketed sections holding space-separated tables.
//! Numbers keep full precision via Rust's shortest round-trip formatting;
//! timestamps come from the data, never the clock, so identical runs emit
//! identical bytes. `-` marks a value a failed model could not produce.

use std::fmt::Write as _;

use heliofor_core::data::Dataset;
use heliofor_core::eval::{ComparisonReport, CvReport, Metrics};
use heliofor_core::linear::FeatureRanking;

use crate::config::SeedSet;

pub const SCHEMA_VERSION: u32 = 1;

pub struct Report {
    out: String,
}

impl Report {
    pub fn new(command: &str, config_sha256: &str, seeds: &SeedSet, data: &Dataset) -> Self {
        let mut out = String::new();
        writeln!(out, "heliofor report").expect("string write");
        writeln!(out, "schema_version: {SCHEMA_VERSION}").expect("string write");
        writeln!(out, "command: {command}").expect("string write");
        writeln!(out, "config_sha256: {config_sha256}").expect("string write");
        writeln!(out, "seed: {}", seeds.global).expect("string write");
        writeln!(out, "synth_seed: {}", seeds.synth).expect("string write");
        writeln!(out, "narx_seed: {}", seeds.narx).expect("string write");
        writeln!(out, "lstm_seed: {}", seeds.lstm).expect("string write");
        writeln!(out, "search_seed: {}", seeds.search).expect("string write");
        writeln!(out, "data_rows: {}", data.len()).expect("string write");
        let records = data.records();
        writeln!(out, "data_start: {}", records[0].timestamp).expect("string write");
        writeln!(out, "data_end: {}", records[records.len() - 1].timestamp)
            .expect("string write");
        writeln!(out, "data_step_seconds: {}", data.step_seconds()).expect("string write");
        Report { out }
    }

    fn section(&mut self, name: &str) {
        writeln!(self.out, "\n[{name}]").expect("string write");
    }

    /// `context_rows` is the count of leading rows consumed as lag context
    /// rather than scored; `None` when the split already accounts for them.
    pub fn metrics(&mut self, m: &Metrics, rows_scored: usize, context_rows: Option<usize>) {
        self.section("metrics");
        writeln!(self.out, "rows_scored: {rows_scored}").expect("string write");
        if let Some(c) = context_rows {
            writeln!(self.out, "context_rows_skipped: {c}").expect("string write");
        }
        writeln!(self.out, "rmse_watts: {}", m.rmse).expect("string write");
        writeln!(self.out, "mae_watts: {}", m.mae).expect("string write");
        writeln!(self.out, "mape_percent: {}", m.mape).expect("string write");
        writeln!(self.out, "mape_excluded_rows: {}", m.mape_excluded).expect("string write");
    }

    pub fn stages(&mut self, trace: &[String]) {
        self.section("stages");
        for (i, stage) in trace.iter().enumerate() {
            writeln!(self.out, "{} {stage}", i + 1).expect("string write");
        }
    }

    fn metrics_row(&mut self, label: &str, m: &Metrics) {
        writeln!(
            self.out,
            "{label} {} {} {} {}",
            m.rmse, m.mae, m.mape, m.mape_excluded
        )
        .expect("string write");
    }

    pub fn cv(&mut self, cv: &CvReport) {
        self.section("cv");
        writeln!(self.out, "k: {}", cv.k).expect("string write");
        writeln!(self.out, "fold rmse_watts mae_watts mape_percent mape_excluded")
            .expect("string write");
        for (i, fold) in cv.per_fold.iter().enumerate() {
            let label = (i + 1).to_string();
            self.metrics_row(&label, fold);
        }
        self.metrics_row("mean", &cv.aggregate);
    }

    pub fn comparison(&mut self, cmp: &ComparisonReport) {
        self.section("comparison");
        writeln!(self.out, "model rmse_watts mae_watts mape_percent mape_excluded")
            .expect("string write");
        for row in &cmp.rows {
            match &row.metrics {
                Some(m) => {
                    let label = row.model.clone();
                    self.metrics_row(&label, m);
                }
                None => writeln!(self.out, "{} - - - -", row.model).expect("string write"),
            }
        }
        match &cmp.best_model {
            Some(best) => writeln!(self.out, "best_model: {best}").expect("string write"),
            None => writeln!(self.out, "best_model: -").expect("string write"),
        }
        match cmp.improvement {
            Some(v) => writeln!(self.out, "improvement_percent: {v}").expect("string write"),
            None => writeln!(self.out, "improvement_percent: -").expect("string write"),
        }
    }

    pub fn importance(&mut self, ranking: &FeatureRanking) {
        self.section("importance");
        writeln!(self.out, "rank feature weight").expect("string write");
        for (i, (name, weight)) in ranking.entries.iter().enumerate() {
            writeln!(self.out, "{} {name} {weight}", i + 1).expect("string write");
        }
        writeln!(self.out, "no_signal: {}", ranking.no_signal).expect("string write");
    }

    pub fn predictions(&mut self, timestamps: &[i64], predicted: &[f64], actual: Option<&[f64]>) {
        self.section("predictions");
        if actual.is_some() {
            writeln!(self.out, "timestamp predicted_watts actual_watts").expect("string write");
        } else {
            writeln!(self.out, "timestamp predicted_watts").expect("string write");
        }
        for (i, (ts, p)) in timestamps.iter().zip(predicted).enumerate() {
            match actual {
                Some(a) => writeln!(self.out, "{ts} {p} {}", a[i]).expect("string write"),
                None => writeln!(self.out, "{ts} {p}").expect("string write"),
            }
        }
    }

    pub fn finish(self) -> String {
        self.out
    }
}
