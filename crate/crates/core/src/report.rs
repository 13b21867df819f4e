//! Tabular (CSV) and JSON export of match results.

use std::io::Write;

use crate::matcher::{MatchReport, SimilarityScore};

pub const CSV_HEADER: [&str; 5] = ["component_index", "label", "metric", "value", "rank"];

/// Writes one row per score, in the order given, with values to 9 decimals.
pub fn write_csv<W: Write>(out: W, scores: &[SimilarityScore]) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for s in scores {
        writer.write_record([
            s.component_index.to_string(),
            s.component_label.clone(),
            s.metric.to_string(),
            format!("{:.9}", s.value),
            s.rank.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn csv_bytes(report: &MatchReport) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(&mut buf, &report.scores).expect("writing to a Vec cannot fail");
    buf
}

pub fn json_string(report: &MatchReport) -> String {
    serde_json::to_string_pretty(report).expect("report is always serializable")
}
