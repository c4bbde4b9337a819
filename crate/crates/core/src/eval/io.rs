//! CSV formats of the evaluation outputs. All files carry header rows;
//! undefined ratios serialize as empty fields.

use std::io::Write;

use crate::detect::DetectorKind;
use crate::features::FeatureKind;
use crate::sim::io::IoError;
use crate::sim::Pci;

use super::{AggregatedReport, RecallStats, ScoredRecord, TimelineRow};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_scores_csv<W: Write>(
    out: W,
    detector: DetectorKind,
    records: &[ScoredRecord],
) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "record_id",
        "time_s",
        "serving_pci",
        "detector",
        "score",
        "flagged",
        "is_static",
        "is_tp",
    ])?;
    for r in records {
        w.write_record(&[
            r.record_id.to_string(),
            r.time_s.to_string(),
            r.serving_pci.to_string(),
            detector.to_string(),
            r.score.to_string(),
            r.flagged.to_string(),
            r.is_static.to_string(),
            r.is_tp.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub struct RecallRow {
    pub serving_pci: Pci,
    pub detector: DetectorKind,
    pub scheme: FeatureKind,
    pub stats: RecallStats,
}

pub fn write_recall_csv<W: Write>(out: W, rows: &[RecallRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "serving_pci",
        "detector",
        "scheme",
        "threshold",
        "benign_fpr_achieved",
        "recall_with_static",
        "recall_without_static",
        "tp",
        "fp",
        "fn",
        "static",
    ])?;
    for row in rows {
        let s = &row.stats;
        w.write_record(&[
            row.serving_pci.to_string(),
            row.detector.to_string(),
            row.scheme.to_string(),
            s.threshold.to_string(),
            opt(s.benign_fpr_achieved()),
            opt(s.recall_with_static()),
            opt(s.recall_without_static()),
            s.tp_records.to_string(),
            s.false_positives.to_string(),
            s.missed_tp().to_string(),
            s.static_records.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub struct AggregatedRow {
    pub detector: DetectorKind,
    pub scheme: FeatureKind,
    pub report: AggregatedReport,
}

pub fn write_aggregated_csv<W: Write>(out: W, rows: &[AggregatedRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "false_pci",
        "detector",
        "scheme",
        "visible1_positions",
        "visible1_detection_ratio",
        "visible2_positions",
        "visible2_detection_ratio",
        "visible_gt2_positions",
        "visible_gt2_detection_ratio",
    ])?;
    for row in rows {
        let r = &row.report;
        w.write_record(&[
            r.false_pci.to_string(),
            row.detector.to_string(),
            row.scheme.to_string(),
            r.visible_1.positions.to_string(),
            opt(r.visible_1.detection_ratio()),
            r.visible_2.positions.to_string(),
            opt(r.visible_2.detection_ratio()),
            r.visible_many.positions.to_string(),
            opt(r.visible_many.detection_ratio()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timeline_csv<W: Write>(out: W, rows: &[TimelineRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_s", "serving_pci", "score", "contains_false_pci"])?;
    for r in rows {
        w.write_record(&[
            r.time_s.to_string(),
            r.serving_pci.to_string(),
            r.score.to_string(),
            r.contains_false_pci.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_score_file_is_header_only() {
        let mut buf = Vec::new();
        write_scores_csv(&mut buf, DetectorKind::Adf, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "record_id,time_s,serving_pci,detector,score,flagged,is_static,is_tp\n"
        );
    }

    #[test]
    fn undefined_ratios_serialize_as_empty_fields() {
        let row = RecallRow {
            serving_pci: Pci(3),
            detector: DetectorKind::Adf,
            scheme: FeatureKind::Col,
            stats: RecallStats {
                threshold: 1.5,
                n_records: 4,
                tp_records: 0,
                static_records: 0,
                detected_tp: 0,
                tp_nonstatic: 0,
                detected_tp_nonstatic: 0,
                benign_records: 4,
                false_positives: 1,
            },
        };
        let mut buf = Vec::new();
        write_recall_csv(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data_line = text.lines().nth(1).unwrap();
        assert_eq!(data_line, "3,adf,col,1.5,0.25,,,0,1,0,0");
    }
}
