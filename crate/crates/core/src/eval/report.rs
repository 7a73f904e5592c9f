use std::io::Write;

use serde::Serialize;

use super::RocPoint;
use crate::error::Result;

pub const REPORT_HEADER: &str = "method,estimator,dataset,source,K,M,auroc,acc,tpr@1%,tpr@10%";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub method: String,
    pub estimator: String,
    pub dataset: String,
    pub source: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub auroc: f64,
    pub acc: f64,
    #[serde(rename = "tpr@1%")]
    pub tpr_at_1: f64,
    #[serde(rename = "tpr@10%")]
    pub tpr_at_10: f64,
}

pub fn write_report_csv<W: Write>(rows: &[ReportRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(REPORT_HEADER.split(','))
        .map_err(std::io::Error::other)?;
    for row in rows {
        w.serialize(row).map_err(std::io::Error::other)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_roc_csv<W: Write>(points: &[RocPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["fpr", "tpr"]).map_err(std::io::Error::other)?;
    for p in points {
        w.write_record([p.fpr.to_string(), p.tpr.to_string()])
            .map_err(std::io::Error::other)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_fixed_even_without_rows() {
        let mut buf = Vec::new();
        write_report_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{REPORT_HEADER}\n"));
    }

    #[test]
    fn row_layout() {
        let row = ReportRow {
            method: "curvature".into(),
            estimator: "geometric".into(),
            dataset: "xsum".into(),
            source: "gpt-3.5".into(),
            k: 5,
            m: 1000,
            auroc: 0.5,
            acc: 0.75,
            tpr_at_1: 0.0,
            tpr_at_10: 0.25,
        };
        let mut buf = Vec::new();
        write_report_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "curvature,geometric,xsum,gpt-3.5,5,1000,0.5,0.75,0.0,0.25");
    }
}
