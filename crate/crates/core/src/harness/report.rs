//! Evaluation reports. Keys come out in a fixed order and reals with fixed
//! precision, so equal results give byte-equal files.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub n_way: usize,
    pub k_shot: usize,
    pub episodes: usize,
    pub mean_accuracy: f64,
    pub ci95_halfwidth: f64,
    pub seed: u64,
    pub config_fingerprint: String,
    /// Seconds spent evaluating. Only written when requested, since it
    /// differs between runs.
    pub wall_time: f64,
}

impl EvalReport {
    pub fn accuracy_pct(&self) -> f64 {
        100.0 * self.mean_accuracy
    }

    pub fn ci95_pct(&self) -> f64 {
        100.0 * self.ci95_halfwidth
    }

    fn fields(&self, with_time: bool) -> Vec<(&'static str, String, bool)> {
        let mut f = vec![
            ("method", self.method.clone(), true),
            ("n_way", self.n_way.to_string(), false),
            ("k_shot", self.k_shot.to_string(), false),
            ("episodes", self.episodes.to_string(), false),
            ("mean_accuracy", format!("{:.8}", self.mean_accuracy), false),
            ("ci95_halfwidth", format!("{:.8}", self.ci95_halfwidth), false),
            ("accuracy_pct", format!("{:.4}", self.accuracy_pct()), false),
            ("ci95_pct", format!("{:.4}", self.ci95_pct()), false),
            ("seed", self.seed.to_string(), false),
            ("config_fingerprint", self.config_fingerprint.clone(), true),
        ];
        if with_time {
            f.push(("wall_time", format!("{:.3}", self.wall_time), false));
        }
        f
    }

    pub fn to_json(&self, with_time: bool) -> String {
        let mut out = String::from("{\n");
        let fields = self.fields(with_time);
        for (i, (k, v, quoted)) in fields.iter().enumerate() {
            let v = if *quoted {
                serde_json::to_string(v).expect("string serializes")
            } else {
                v.clone()
            };
            let comma = if i + 1 < fields.len() { "," } else { "" };
            let _ = writeln!(out, "  \"{k}\": {v}{comma}");
        }
        out.push_str("}\n");
        out
    }

    pub fn to_csv(&self, with_time: bool) -> String {
        let fields = self.fields(with_time);
        let header: Vec<&str> = fields.iter().map(|(k, _, _)| *k).collect();
        let values: Vec<String> = fields.iter().map(|(_, v, _)| v.clone()).collect();
        format!("{}\n{}\n", header.join(","), values.join(","))
    }

    pub fn render(&self, format: ReportFormat, with_time: bool) -> String {
        match format {
            ReportFormat::Json => self.to_json(with_time),
            ReportFormat::Csv => self.to_csv(with_time),
        }
    }

    /// One-line summary in the usual `acc ± ci` table style.
    pub fn summary(&self) -> String {
        format!(
            "{} {}-way {}-shot: {:.2} ± {:.2} ({} episodes)",
            self.method,
            self.n_way,
            self.k_shot,
            self.accuracy_pct(),
            self.ci95_pct(),
            self.episodes
        )
    }
}
