//! Campaign reductions: risk ratio, alert rate, NMAC heading histogram,
//! pilot-response weighting and alerting profiles.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::encounters::{AircraftInit, Encounter, EncounterKind};
use crate::error::{Error, Result};
use crate::logic::{DimSet, Dimension};
use crate::policy::QTable;
use crate::simulator::{simulate, PilotModel, SimConfig, SimResult};
#[allow(unused_imports)]
use num_traits::Float;

pub const FT_PER_NMI: f64 = 6076.115_486;

/// Informational risk-ratio targets.
pub const THRESHOLDS: [(&str, f64); 3] = [
    ("icao_unequipped", 0.18),
    ("icao_equipped", 0.04),
    ("astm_suas", 0.18),
];

/// Alerting-profile categories in legend order.
pub const PROFILE_CATEGORIES: [&str; 8] = ["COC", "H", "V", "S", "V+H", "V+S", "H+S", "V+H+S"];

/// Per-encounter aggregate over repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncounterEstimate {
    pub id: u64,
    pub weight: f64,
    pub pnmac: f64,
    pub alerted: bool,
    pub repetitions: u32,
}

/// Encounter id to weight.
pub fn weights_of(encounters: &[Encounter]) -> BTreeMap<u64, f64> {
    encounters.iter().map(|e| (e.id, e.weight)).collect()
}

/// Groups results by encounter (ascending id).
pub fn per_encounter(results: &[SimResult], weights: &BTreeMap<u64, f64>) -> Result<Vec<EncounterEstimate>> {
    let mut acc: BTreeMap<u64, (u32, u32, bool)> = BTreeMap::new();
    for r in results {
        let e = acc.entry(r.encounter_id).or_insert((0, 0, false));
        e.0 += 1;
        e.1 += u32::from(r.nmac);
        e.2 |= r.alerted;
    }
    acc.into_iter()
        .map(|(id, (n, k, alerted))| {
            let weight = *weights
                .get(&id)
                .ok_or_else(|| Error::invalid(format!("no weight for encounter {id}")))?;
            if !(weight.is_finite() && weight > 0.0) {
                return Err(Error::invalid(format!("encounter {id} has non-positive weight")));
            }
            Ok(EncounterEstimate {
                id,
                weight,
                pnmac: f64::from(k) / f64::from(n),
                alerted,
                repetitions: n,
            })
        })
        .collect()
}

/// Weighted mean of repetition-averaged NMAC indicators.
pub fn weighted_pnmac(results: &[SimResult], weights: &BTreeMap<u64, f64>) -> Result<f64> {
    let est = per_encounter(results, weights)?;
    if est.is_empty() {
        return Err(Error::invalid("no results"));
    }
    let w: f64 = est.iter().map(|e| e.weight).sum();
    Ok(est.iter().map(|e| e.weight * e.pnmac).sum::<f64>() / w)
}

/// Ratio of weighted NMAC probabilities with and without the CAS.
pub fn risk_ratio(cas: &[SimResult], nocas: &[SimResult], weights: &BTreeMap<u64, f64>) -> Result<f64> {
    let a = per_encounter(cas, weights)?;
    let b = per_encounter(nocas, weights)?;
    if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| x.id != y.id) {
        return Err(Error::invalid("CAS and no-CAS results cover different encounters"));
    }
    let num: f64 = a.iter().map(|e| e.weight * e.pnmac).sum();
    let den: f64 = b.iter().map(|e| e.weight * e.pnmac).sum();
    if den == 0.0 {
        return Err(Error::UndefinedRatio(String::from("no NMACs without CAS")));
    }
    Ok(num / den)
}

/// Weighted fraction of encounters with an alert in any repetition.
pub fn alert_rate(results: &[SimResult], weights: &BTreeMap<u64, f64>) -> Result<f64> {
    let est = per_encounter(results, weights)?;
    if est.is_empty() {
        return Err(Error::invalid("no results"));
    }
    let w: f64 = est.iter().map(|e| e.weight).sum();
    Ok(est.iter().filter(|e| e.alerted).map(|e| e.weight).sum::<f64>() / w)
}

/// Probability a pilot facing `n_dims` dimensions follows exactly each
/// subset, in table order (None, singles, pairs, all).
pub fn response_subset_probs(p_no_response: f64, n_dims: usize) -> Result<Vec<(DimSet, f64)>> {
    if !(0.0..=1.0).contains(&p_no_response) {
        return Err(Error::invalid("p_no_response must be in [0, 1]"));
    }
    let dims: DimSet = match n_dims {
        3 => Dimension::ALL.into_iter().collect(),
        2 => [Dimension::Horizontal, Dimension::Vertical].into_iter().collect(),
        _ => return Err(Error::invalid("n_dims must be 2 or 3")),
    };
    let p = 1.0 - p_no_response.powf(1.0 / n_dims as f64);
    Ok(dims
        .subsets()
        .into_iter()
        .map(|s| {
            let k = s.len() as i32;
            (s, p.powi(k) * (1.0 - p).powi(n_dims as i32 - k))
        })
        .collect())
}

/// Σ P(subset) · P(NMAC | subset). Both inputs must name the same subsets.
pub fn weighted_system_pnmac(pnmac_by_subset: &[(DimSet, f64)], subset_probs: &[(DimSet, f64)]) -> Result<f64> {
    let table: BTreeMap<DimSet, f64> = pnmac_by_subset.iter().copied().collect();
    if table.len() != pnmac_by_subset.len() {
        return Err(Error::invalid("duplicate subset in P(NMAC) table"));
    }
    let probs: BTreeMap<DimSet, f64> = subset_probs.iter().copied().collect();
    if probs.len() != table.len() || probs.keys().any(|k| !table.contains_key(k)) {
        let have: Vec<String> = table.keys().map(|k| k.label()).collect();
        let want: Vec<String> = probs.keys().map(|k| k.label()).collect();
        return Err(Error::invalid(format!(
            "subset keys differ: P(NMAC) has {have:?}, probabilities have {want:?}"
        )));
    }
    Ok(probs.iter().map(|(k, p)| p * table[k]).sum())
}

/// Restricts a per-subset table to subsets of `dims`.
pub fn restrict(pnmac_by_subset: &[(DimSet, f64)], dims: DimSet) -> Vec<(DimSet, f64)> {
    pnmac_by_subset
        .iter()
        .copied()
        .filter(|(s, _)| s.is_subset(dims))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub p_no_response: f64,
    pub with_speed: f64,
    pub without_speed: f64,
}

/// System P(NMAC) over a sweep of no-response probabilities, normalized by
/// the no-response row so both curves reach 1 at p = 1.
pub fn response_curve(pnmac_by_subset: &[(DimSet, f64)], sweep: &[f64]) -> Result<Vec<CurvePoint>> {
    let none = pnmac_by_subset
        .iter()
        .find(|(s, _)| s.is_empty())
        .map(|e| e.1)
        .ok_or_else(|| Error::invalid("P(NMAC) table lacks the None row"))?;
    if !(none > 0.0) {
        return Err(Error::UndefinedRatio(String::from("None-row P(NMAC) is zero")));
    }
    let hv = DimSet::single(Dimension::Horizontal).with(Dimension::Vertical);
    let without = restrict(pnmac_by_subset, hv);
    sweep
        .iter()
        .map(|&p| {
            Ok(CurvePoint {
                p_no_response: p,
                with_speed: weighted_system_pnmac(pnmac_by_subset, &response_subset_probs(p, 3)?)? / none,
                without_speed: weighted_system_pnmac(&without, &response_subset_probs(p, 2)?)? / none,
            })
        })
        .collect()
}

/// Evenly spaced sweep over [0, 1] including both endpoints.
pub fn unit_sweep(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::invalid("sweep step must be in (0, 1]"));
    }
    let n = (1.0 / step - 1e-9).ceil() as usize;
    Ok((0..=n).map(|i| (i as f64 * step).min(1.0)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width_deg: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Lower edge of bin `i`, degrees.
    pub fn lower(&self, i: usize) -> f64 {
        i as f64 * self.bin_width_deg
    }

    /// Count in bins whose centre lies in `[lo, hi)` degrees.
    pub fn band(&self, lo: f64, hi: f64) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let c = self.lower(*i) + 0.5 * self.bin_width_deg;
                c >= lo && c < hi
            })
            .map(|(_, &n)| n)
            .sum()
    }
}

/// Relative heading at CPA of each encounter with an NMAC in any
/// repetition, degrees in `[0, 360)`. Uses the constructed CPA when present.
pub fn nmac_headings(results: &[SimResult], encounters: &[Encounter]) -> Result<Vec<f64>> {
    let by_id: BTreeMap<u64, &Encounter> = encounters.iter().map(|e| (e.id, e)).collect();
    let mut seen: BTreeMap<u64, f64> = BTreeMap::new();
    for r in results.iter().filter(|r| r.nmac) {
        let enc = by_id
            .get(&r.encounter_id)
            .ok_or_else(|| Error::invalid(format!("result for unknown encounter {}", r.encounter_id)))?;
        let rad = enc.cpa.map_or(r.cpa.rel_heading, |c| c.rel_heading);
        seen.entry(r.encounter_id).or_insert(crate::encounters::wrap_positive(rad).to_degrees());
    }
    Ok(seen.into_values().collect())
}

pub fn nmac_heading_histogram(
    results: &[SimResult],
    encounters: &[Encounter],
    bin_width_deg: f64,
) -> Result<Histogram> {
    let bins = 360.0 / bin_width_deg;
    if !(bin_width_deg > 0.0) || (bins - bins.round()).abs() > 1e-9 {
        return Err(Error::invalid("bin width must divide 360 degrees"));
    }
    let n = bins.round() as usize;
    let mut counts = alloc::vec![0u64; n];
    for deg in nmac_headings(results, encounters)? {
        counts[((deg / bin_width_deg) as usize).min(n - 1)] += 1;
    }
    Ok(Histogram {
        bin_width_deg,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFlag {
    pub name: String,
    pub target: f64,
    /// Whether the risk ratio is at or below the target; absent without a
    /// risk ratio.
    pub met: Option<bool>,
}

/// P(NMAC) conditioned on the ownship pilot's responding subset. Encounters
/// that never alert are unaffected by the response and count toward every
/// subset.
pub fn pnmac_by_response(results: &[SimResult], weights: &BTreeMap<u64, f64>) -> Result<Vec<(DimSet, f64)>> {
    let mut total = 0.0;
    let mut quiet_nmac = 0.0;
    let mut alert_w = 0.0;
    let mut groups: BTreeMap<DimSet, (f64, f64)> = BTreeMap::new();
    for r in results {
        let w = *weights
            .get(&r.encounter_id)
            .ok_or_else(|| Error::invalid(format!("no weight for encounter {}", r.encounter_id)))?;
        total += w;
        match r.responded {
            None => quiet_nmac += if r.nmac { w } else { 0.0 },
            Some(s) => {
                alert_w += w;
                let g = groups.entry(s).or_insert((0.0, 0.0));
                g.0 += w;
                g.1 += if r.nmac { w } else { 0.0 };
            }
        }
    }
    if total == 0.0 {
        return Err(Error::invalid("no results"));
    }
    Ok(groups
        .into_iter()
        .map(|(s, (w, k))| (s, (quiet_nmac + alert_w * k / w) / total))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSummary {
    pub p_no_response: f64,
    pub n_dims: usize,
    pub subset_probs: Vec<(DimSet, f64)>,
    pub observed_pnmac: Vec<(DimSet, f64)>,
    /// Present when every subset was observed.
    pub weighted_system_pnmac: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub encounters: usize,
    pub results: usize,
    pub nmac_encounters: usize,
    pub pnmac: f64,
    pub pnmac_baseline: Option<f64>,
    pub risk_ratio: Option<f64>,
    /// Why the risk ratio is absent, if it is.
    pub risk_ratio_note: Option<String>,
    pub alert_rate: f64,
    pub heading_histogram: Histogram,
    pub response: Option<ResponseSummary>,
    pub thresholds: Vec<ThresholdFlag>,
}

/// Full report for a CAS campaign, optionally against a no-CAS baseline.
pub fn evaluate(
    encounters: &[Encounter],
    results: &[SimResult],
    baseline: Option<&[SimResult]>,
    pilot: Option<&PilotModel>,
    bin_width_deg: f64,
) -> Result<MetricsReport> {
    let weights = weights_of(encounters);
    let est = per_encounter(results, &weights)?;
    if est.is_empty() {
        return Err(Error::invalid("no results"));
    }
    let (risk, note, base) = match baseline {
        None => (None, Some(String::from("no baseline results supplied")), None),
        Some(b) => {
            let base = weighted_pnmac(b, &weights)?;
            match risk_ratio(results, b, &weights) {
                Ok(r) => (Some(r), None, Some(base)),
                Err(Error::UndefinedRatio(msg)) => (None, Some(msg), Some(base)),
                Err(e) => return Err(e),
            }
        }
    };
    let response = match pilot {
        Some(&PilotModel::Probabilistic { p_no_response, .. }) => {
            let observed = pnmac_by_response(results, &weights)?;
            let seen: DimSet = observed.iter().flat_map(|(s, _)| s.iter()).collect();
            let n_dims = seen.len().clamp(2, 3);
            let probs = response_subset_probs(p_no_response, n_dims)?;
            let system = weighted_system_pnmac(&observed, &probs).ok();
            Some(ResponseSummary {
                p_no_response,
                n_dims,
                subset_probs: probs,
                observed_pnmac: observed,
                weighted_system_pnmac: system,
            })
        }
        _ => None,
    };
    Ok(MetricsReport {
        encounters: est.len(),
        results: results.len(),
        nmac_encounters: est.iter().filter(|e| e.pnmac > 0.0).count(),
        pnmac: weighted_pnmac(results, &weights)?,
        pnmac_baseline: base,
        risk_ratio: risk,
        risk_ratio_note: note,
        alert_rate: alert_rate(results, &weights)?,
        heading_histogram: nmac_heading_histogram(results, encounters, bin_width_deg)?,
        response,
        thresholds: THRESHOLDS
            .iter()
            .map(|&(name, target)| ThresholdFlag {
                name: String::from(name),
                target,
                met: risk.map(|r| r <= target),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileParams {
    /// ft/s.
    pub own_speed: f64,
    /// ft/s.
    pub int_speed: f64,
    /// Intruder heading relative to the ownship track, degrees; 180 is head-on.
    pub rel_heading_deg: f64,
    /// Half-width of the square of intruder start positions, NMi.
    pub extent_nmi: f64,
    pub cell_nmi: f64,
}

impl Default for ProfileParams {
    fn default() -> Self {
        ProfileParams {
            own_speed: 120.0,
            int_speed: 120.0,
            rel_heading_deg: 180.0,
            extent_nmi: 8.0,
            cell_nmi: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileCell {
    /// Intruder start, NMi right of the ownship track.
    pub cross_nmi: f64,
    /// Intruder start, NMi ahead of the ownship.
    pub along_nmi: f64,
    pub alerted: DimSet,
}

/// Co-altitude encounter with the ownship flying north from the origin and
/// the intruder starting at `(along, cross)` ft on a straight track. Runs
/// until 30 s past the straight-line CPA.
pub fn profile_encounter(along: f64, cross: f64, p: &ProfileParams) -> Encounter {
    let heading = crate::logic::wrap_angle(p.rel_heading_deg.to_radians());
    let (vn, ve) = (p.int_speed * heading.cos() - p.own_speed, p.int_speed * heading.sin());
    let v2 = vn * vn + ve * ve;
    let t_cpa = if v2 > 0.0 { -(along * vn + cross * ve) / v2 } else { 0.0 };
    let duration = (t_cpa.max(0.0) + 30.0 - 1e-9).min(900.0).ceil();
    let init = |x, y, heading, speed| AircraftInit {
        x,
        y,
        z: 0.0,
        heading,
        speed,
        vertical_rate: 0.0,
    };
    Encounter {
        id: 0,
        weight: 1.0,
        duration,
        kind: EncounterKind::Custom,
        ownship: init(0.0, 0.0, 0.0, p.own_speed),
        intruder: init(along, cross, heading, p.int_speed),
        script: Vec::new(),
        cpa: None,
    }
}

/// Cell centres along one axis, NMi.
pub fn profile_axis(p: &ProfileParams) -> Result<Vec<f64>> {
    if !(p.extent_nmi > 0.0 && p.cell_nmi > 0.0 && p.cell_nmi <= 2.0 * p.extent_nmi) {
        return Err(Error::invalid("profile extent and cell size must be positive"));
    }
    let n = (2.0 * p.extent_nmi / p.cell_nmi).round() as usize;
    Ok((0..n)
        .map(|i| -p.extent_nmi + (i as f64 + 0.5) * p.cell_nmi)
        .collect())
}

/// Logic dimensions that alert at any time in one profile cell.
pub fn profile_cell(tables: &[&QTable], cfg: &SimConfig, p: &ProfileParams, along_nmi: f64, cross_nmi: f64, seed: u64) -> Result<DimSet> {
    let enc = profile_encounter(along_nmi * FT_PER_NMI, cross_nmi * FT_PER_NMI, p);
    let unresponsive = SimConfig {
        pilot: PilotModel::Probabilistic {
            p_no_response: 1.0,
            delay: cfg.pilot.delay(),
        },
        ..cfg.clone()
    };
    let r = simulate(&enc, tables, None, &unresponsive, seed)?;
    Ok(r.timeline
        .iter()
        .flat_map(|e| e.advisory.alerting_dimensions().collect::<Vec<_>>())
        .collect())
}

/// Alerting category for every cell, cross-track major.
pub fn alerting_profile(tables: &[&QTable], cfg: &SimConfig, p: &ProfileParams, seed: u64) -> Result<Vec<ProfileCell>> {
    let axis = profile_axis(p)?;
    let mut out = Vec::with_capacity(axis.len() * axis.len());
    for (i, &cross) in axis.iter().enumerate() {
        for (j, &along) in axis.iter().enumerate() {
            let cell_seed = crate::rng::sub_seed(seed, (i * axis.len() + j) as u64);
            out.push(ProfileCell {
                cross_nmi: cross,
                along_nmi: along,
                alerted: profile_cell(tables, cfg, p, along, cross, cell_seed)?,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::CpaObserved;

    fn res(id: u64, nmac: bool, alerted: bool) -> SimResult {
        SimResult {
            encounter_id: id,
            repetition: 0,
            seed: 0,
            nmac,
            nmac_time: None,
            min_horizontal_sep: 0.0,
            min_vertical_sep: 0.0,
            cpa: CpaObserved {
                time: 0.0,
                hmd: 0.0,
                vmd: 0.0,
                rel_heading: 0.0,
            },
            alerted,
            first_alert_time: None,
            first_alert_range: None,
            timeline: Vec::new(),
            responded: None,
        }
    }

    #[test]
    fn worked_risk_ratio() {
        let w: BTreeMap<u64, f64> = [(0, 0.25), (1, 0.75)].into_iter().collect();
        let nocas = [res(0, true, false), res(1, true, false)];
        let mut cas = Vec::new();
        cas.push(res(0, false, true));
        for k in 0..5 {
            cas.push(res(1, k == 0, true));
        }
        let r = risk_ratio(&cas, &nocas, &w).unwrap();
        assert!((r - 0.15).abs() < 1e-12);
        assert_eq!(risk_ratio(&nocas, &nocas, &w).unwrap(), 1.0);
        let zero = [res(0, false, false), res(1, false, false)];
        assert!(matches!(risk_ratio(&cas, &zero, &w), Err(Error::UndefinedRatio(_))));
    }

    #[test]
    fn alert_rates() {
        let w: BTreeMap<u64, f64> = (0..4).map(|i| (i, 1.0)).collect();
        let r: Vec<_> = (0..4).map(|i| res(i, false, i == 2)).collect();
        assert_eq!(alert_rate(&r, &w).unwrap(), 0.25);
    }

    #[test]
    fn subset_probability_columns() {
        let with: Vec<f64> = response_subset_probs(0.10, 3).unwrap().iter().map(|e| e.1).collect();
        let expect = [0.10, 0.115443, 0.115443, 0.115443, 0.133275, 0.133275, 0.133275, 0.153846];
        for (a, b) in with.iter().zip(expect) {
            assert!((a - b).abs() < 1e-5, "{a} {b}");
        }
        let without: Vec<f64> = response_subset_probs(0.10, 2).unwrap().iter().map(|e| e.1).collect();
        for (a, b) in without.iter().zip([0.10, 0.21623, 0.21623, 0.46754]) {
            assert!((a - b).abs() < 1e-5);
        }
        let one = response_subset_probs(1.0, 3).unwrap();
        assert_eq!(one[0].1, 1.0);
        assert!(one[1..].iter().all(|e| e.1 == 0.0));
    }

    #[test]
    fn key_mismatch_rejected() {
        let probs = response_subset_probs(0.1, 2).unwrap();
        let table = [(DimSet::EMPTY, 1.0)];
        assert!(weighted_system_pnmac(&table, &probs).is_err());
    }

    #[test]
    fn histogram_bins() {
        let enc = crate::encounters::gen_hovering(3, 1).unwrap();
        let mut r: Vec<_> = enc.iter().map(|e| res(e.id, true, false)).collect();
        r.push(res(0, true, false));
        let h = nmac_heading_histogram(&r, &enc, 10.0).unwrap();
        assert_eq!(h.counts.len(), 36);
        assert_eq!(h.total(), 3);
        assert!(nmac_heading_histogram(&r, &enc, 7.0).is_err());
    }

    #[test]
    fn profile_geometry() {
        let p = ProfileParams::default();
        assert_eq!(profile_axis(&p).unwrap().len(), 32);
        let e = profile_encounter(30_000.0, 0.0, &p);
        let cfg = SimConfig {
            sensor: crate::simulator::SensorNoise::zero(),
            ..SimConfig::default()
        };
        let r = simulate(&e, &[], None, &cfg, 0).unwrap();
        assert!(r.min_horizontal_sep < 1.0, "{}", r.min_horizontal_sep);
        assert!((r.cpa.time - 125.0).abs() < 1.0);
        let wide = profile_encounter(0.0, 40_000.0, &p);
        assert_eq!(wide.duration, 30.0);
    }

    #[test]
    fn unit_sweep_has_endpoints() {
        let s = unit_sweep(0.005).unwrap();
        assert_eq!(s.first(), Some(&0.0));
        assert_eq!(s.last(), Some(&1.0));
        assert_eq!(s.len(), 201);
    }
}
