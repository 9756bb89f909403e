//! CSV artifacts and the per-subset P(NMAC) input table.
//!
//! | file          | columns |
//! |---------------|---------|
//! | summary       | `encounter_id,repetition,seed,nmac,nmac_time_s,min_horizontal_sep_ft,min_vertical_sep_ft,cpa_time_s,hmd_ft,vmd_ft,rel_heading_deg,alerted,first_alert_time_s,first_alert_range_ft,responded` |
//! | histogram     | `bin_lo_deg,bin_hi_deg,count` |
//! | profile       | `cross_track_nmi,along_track_nmi,category` |
//! | curve         | `p_no_response,with_speed,without_speed` |
//! | scatter       | `label,alert_rate,risk_ratio,pnmac` |
//! | subset input  | `subset,pnmac` |

use std::path::Path;

use serde::{Deserialize, Serialize};
use speedcas_core::logic::{DimSet, Dimension};
use speedcas_core::metrics::{CurvePoint, Histogram, MetricsReport, ProfileCell};
use speedcas_core::simulator::SimResult;

use crate::error::{Error, Result};

fn to_csv<R: Serialize>(rows: impl IntoIterator<Item = R>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("csv row serializes");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is UTF-8")
}

#[derive(Serialize)]
struct SummaryRow {
    encounter_id: u64,
    repetition: u32,
    seed: u64,
    nmac: bool,
    nmac_time_s: Option<f64>,
    min_horizontal_sep_ft: f64,
    min_vertical_sep_ft: f64,
    cpa_time_s: f64,
    hmd_ft: f64,
    vmd_ft: f64,
    rel_heading_deg: f64,
    alerted: bool,
    first_alert_time_s: Option<f64>,
    first_alert_range_ft: Option<f64>,
    responded: Option<String>,
}

pub fn summary_csv(results: &[SimResult]) -> String {
    to_csv(results.iter().map(|r| SummaryRow {
        encounter_id: r.encounter_id,
        repetition: r.repetition,
        seed: r.seed,
        nmac: r.nmac,
        nmac_time_s: r.nmac_time,
        min_horizontal_sep_ft: r.min_horizontal_sep,
        min_vertical_sep_ft: r.min_vertical_sep,
        cpa_time_s: r.cpa.time,
        hmd_ft: r.cpa.hmd,
        vmd_ft: r.cpa.vmd,
        rel_heading_deg: r.cpa.rel_heading.to_degrees(),
        alerted: r.alerted,
        first_alert_time_s: r.first_alert_time,
        first_alert_range_ft: r.first_alert_range,
        responded: r.responded.map(DimSet::label),
    }))
}

pub fn histogram_csv(h: &Histogram) -> String {
    #[derive(Serialize)]
    struct Row {
        bin_lo_deg: f64,
        bin_hi_deg: f64,
        count: u64,
    }
    to_csv(h.counts.iter().enumerate().map(|(i, &count)| Row {
        bin_lo_deg: h.lower(i),
        bin_hi_deg: h.lower(i) + h.bin_width_deg,
        count,
    }))
}

pub fn profile_csv(cells: &[ProfileCell]) -> String {
    #[derive(Serialize)]
    struct Row {
        cross_track_nmi: f64,
        along_track_nmi: f64,
        category: String,
    }
    to_csv(cells.iter().map(|c| Row {
        cross_track_nmi: c.cross_nmi,
        along_track_nmi: c.along_nmi,
        category: c.alerted.profile_label(),
    }))
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    to_csv(curve)
}

pub fn scatter_csv(label: &str, report: &MetricsReport) -> String {
    #[derive(Serialize)]
    struct Row<'a> {
        label: &'a str,
        alert_rate: f64,
        risk_ratio: Option<f64>,
        pnmac: f64,
    }
    to_csv([Row {
        label,
        alert_rate: report.alert_rate,
        risk_ratio: report.risk_ratio,
        pnmac: report.pnmac,
    }])
}

#[derive(Deserialize)]
struct SubsetRow {
    subset: String,
    pnmac: f64,
}

/// Reads a `subset,pnmac` table and checks it covers every subset of
/// {H, V, S}.
pub fn parse_subset_table(text: &str, path: &Path) -> Result<Vec<(DimSet, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows: Vec<(DimSet, f64)> = Vec::new();
    for (i, rec) in rdr.deserialize::<SubsetRow>().enumerate() {
        let line = i + 2;
        let parse = |detail: String| Error::Parse {
            path: path.to_owned(),
            line,
            detail,
        };
        let rec = rec.map_err(|e| parse(e.to_string()))?;
        let s = DimSet::parse(&rec.subset).map_err(|e| parse(e.to_string()))?;
        if !(0.0..=1.0).contains(&rec.pnmac) {
            return Err(parse(format!("pnmac {} outside [0, 1]", rec.pnmac)));
        }
        if rows.iter().any(|r| r.0 == s) {
            return Err(parse(format!("subset {} listed twice", s.label())));
        }
        rows.push((s, rec.pnmac));
    }
    let all: DimSet = Dimension::ALL.into_iter().collect();
    let missing: Vec<String> = all
        .subsets()
        .into_iter()
        .filter(|s| !rows.iter().any(|r| r.0 == *s))
        .map(DimSet::label)
        .collect();
    if !missing.is_empty() {
        return Err(Error::data(path, format!("missing subset rows: {}", missing.join(", "))));
    }
    rows.sort_by_key(|r| all.subsets().iter().position(|s| *s == r.0));
    Ok(rows)
}

pub fn load_subset_table(path: &Path) -> Result<Vec<(DimSet, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_subset_table(&text, path)
}
