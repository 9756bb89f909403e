//! Seeded synthetic encounter sets.
//!
//! World frame: `x` north, `y` east, `z` altitude, all in feet. Headings are
//! clockwise from north; positive turn rates turn right.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AircraftInit {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub heading: f64,
    /// Ground speed, ft/s.
    pub speed: f64,
    /// ft/min.
    pub vertical_rate: f64,
}

/// Intruder controls that hold from `time` until the next maneuver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Maneuver {
    pub time: f64,
    /// rad/s.
    pub turn_rate: f64,
    /// Along-track acceleration, ft/s².
    pub accel: f64,
    /// ft/min.
    pub vertical_rate: f64,
}

/// Closest point of approach the encounter was constructed to reach when
/// neither aircraft maneuvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpaTarget {
    pub time: f64,
    /// Horizontal miss distance, ft.
    pub hmd: f64,
    /// Vertical miss distance, ft.
    pub vmd: f64,
    /// Intruder heading minus ownship heading, in `[0, 2π)`.
    pub rel_heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncounterKind {
    OpsuitLike,
    Hovering,
    Pairwise,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encounter {
    pub id: u64,
    pub weight: f64,
    /// Simulated time span, s.
    pub duration: f64,
    pub kind: EncounterKind,
    pub ownship: AircraftInit,
    pub intruder: AircraftInit,
    #[serde(default)]
    pub script: Vec<Maneuver>,
    #[serde(default)]
    pub cpa: Option<CpaTarget>,
}

impl Encounter {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::Encounter {
                id: self.id,
                source: alloc::boxed::Box::new(Error::invalid(String::from(what))),
            })
        };
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return bad("weight must be positive");
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad("duration must be positive");
        }
        for a in [&self.ownship, &self.intruder] {
            let f = [a.x, a.y, a.z, a.heading, a.speed, a.vertical_rate];
            if f.iter().any(|v| !v.is_finite()) || a.speed < 0.0 {
                return bad("aircraft state must be finite with non-negative speed");
            }
        }
        let mut last = 0.0;
        for m in &self.script {
            let f = [m.time, m.turn_rate, m.accel, m.vertical_rate];
            if f.iter().any(|v| !v.is_finite()) {
                return bad("script values must be finite");
            }
            if m.time < last || m.time > self.duration {
                return bad("script times must ascend within the duration");
            }
            last = m.time;
        }
        Ok(())
    }

    /// Scripted intruder maneuver in force at time `t`.
    pub fn maneuver_at(&self, t: f64) -> Option<&Maneuver> {
        self.script.iter().rev().find(|m| m.time <= t)
    }
}

/// Displacement (north, east) after `dt` at constant speed `v` and turn rate
/// `omega` starting from heading `heading`.
pub fn arc_displacement(v: f64, heading: f64, omega: f64, dt: f64) -> (f64, f64) {
    let turn = omega * dt;
    if turn.abs() < 1e-9 {
        let mid = heading + 0.5 * turn;
        return (v * dt * mid.cos(), v * dt * mid.sin());
    }
    let end = heading + turn;
    ((v / omega) * (end.sin() - heading.sin()), (v / omega) * (heading.cos() - end.cos()))
}

/// Parameters for [`gen_opsuit_like_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpsuitParams {
    pub duration: f64,
    pub cpa_time: f64,
    pub hmd_max: f64,
    pub vmd_max: f64,
    pub own_speed: (f64, f64),
    pub int_speed: (f64, f64),
    pub altitude: f64,
}

impl Default for OpsuitParams {
    fn default() -> Self {
        OpsuitParams {
            duration: 180.0,
            cpa_time: 90.0,
            hmd_max: 10_000.0,
            vmd_max: 2000.0,
            own_speed: (50.0, 237.0),
            int_speed: (0.0, 237.0),
            altitude: 5000.0,
        }
    }
}

/// Parameters for [`gen_hovering_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoverParams {
    pub duration: f64,
    pub cpa_time: f64,
    pub hmd_max: f64,
    pub vmd_max: f64,
    /// Probability an intruder transits in a straight line; otherwise it
    /// loiters in a constant-rate turn.
    pub transit_fraction: f64,
    pub transit_speed: (f64, f64),
    pub loiter_speed: (f64, f64),
    /// Loiter turn-rate magnitude, deg/s.
    pub loiter_turn_deg_s: (f64, f64),
    pub altitude: f64,
}

impl Default for HoverParams {
    fn default() -> Self {
        HoverParams {
            duration: 180.0,
            cpa_time: 90.0,
            hmd_max: 2000.0,
            vmd_max: 0.0,
            transit_fraction: 0.7,
            transit_speed: (50.0, 237.0),
            loiter_speed: (20.0, 80.0),
            loiter_turn_deg_s: (1.0, 3.0),
            altitude: 500.0,
        }
    }
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("encounter count must be at least 1"));
    }
    Ok(())
}

fn uniform(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..range.1)
    } else {
        range.0
    }
}

fn sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Unit vector to the right of `heading`.
fn right_of(heading: f64) -> (f64, f64) {
    (-heading.sin(), heading.cos())
}

fn check_window(duration: f64, cpa_time: f64) -> Result<()> {
    if !(duration > 0.0 && cpa_time >= 0.0 && cpa_time <= duration) {
        return Err(Error::invalid("CPA time must lie within a positive duration"));
    }
    Ok(())
}

pub fn gen_opsuit_like(n: usize, seed: u64) -> Result<Vec<Encounter>> {
    gen_opsuit_like_with(n, seed, &OpsuitParams::default())
}

/// Straight, level encounters built backwards from a sampled CPA.
pub fn gen_opsuit_like_with(n: usize, seed: u64, p: &OpsuitParams) -> Result<Vec<Encounter>> {
    check_count(n)?;
    check_window(p.duration, p.cpa_time)?;
    let w = 1.0 / n as f64;
    Ok((0..n as u64)
        .map(|id| {
            let mut rng = crate::rng::stream_rng(seed, id);
            let hmd = uniform(&mut rng, (0.0, p.hmd_max));
            let vmd = uniform(&mut rng, (0.0, p.vmd_max));
            let psi = uniform(&mut rng, (0.0, TAU));
            let h0 = uniform(&mut rng, (0.0, TAU));
            let v0 = uniform(&mut rng, p.own_speed);
            let v1 = uniform(&mut rng, p.int_speed);
            let side = sign(&mut rng);
            let above = sign(&mut rng);
            let h1 = h0 + psi;

            let (e0n, e0e) = (h0.cos(), h0.sin());
            let (e1n, e1e) = (h1.cos(), h1.sin());
            let (rvn, rve) = (v1 * e1n - v0 * e0n, v1 * e1e - v0 * e0e);
            let rv = rvn.hypot(rve);
            // offset perpendicular to relative motion
            let (un, ue) = if rv > 1e-9 {
                (-rve / rv, rvn / rv)
            } else {
                right_of(h0)
            };
            let t = p.cpa_time;
            let own = AircraftInit {
                x: -v0 * t * e0n,
                y: -v0 * t * e0e,
                z: p.altitude,
                heading: crate::logic::wrap_angle(h0),
                speed: v0,
                vertical_rate: 0.0,
            };
            let int = AircraftInit {
                x: side * hmd * un - v1 * t * e1n,
                y: side * hmd * ue - v1 * t * e1e,
                z: p.altitude + above * vmd,
                heading: crate::logic::wrap_angle(h1),
                speed: v1,
                vertical_rate: 0.0,
            };
            Encounter {
                id,
                weight: w,
                duration: p.duration,
                kind: EncounterKind::OpsuitLike,
                ownship: own,
                intruder: int,
                script: Vec::new(),
                cpa: Some(CpaTarget {
                    time: t,
                    hmd,
                    vmd,
                    rel_heading: psi,
                }),
            }
        })
        .collect())
}

pub fn gen_hovering(n: usize, seed: u64) -> Result<Vec<Encounter>> {
    gen_hovering_with(n, seed, &HoverParams::default())
}

/// Hovering ownship at the origin facing north; intruder transits or
/// loiters past it.
pub fn gen_hovering_with(n: usize, seed: u64, p: &HoverParams) -> Result<Vec<Encounter>> {
    check_count(n)?;
    check_window(p.duration, p.cpa_time)?;
    if !(0.0..=1.0).contains(&p.transit_fraction) {
        return Err(Error::invalid("transit_fraction must be in [0, 1]"));
    }
    let w = 1.0 / n as f64;
    Ok((0..n as u64)
        .map(|id| {
            let mut rng = crate::rng::stream_rng(seed, id);
            let psi = uniform(&mut rng, (0.0, TAU));
            let hmd = uniform(&mut rng, (0.0, p.hmd_max));
            let vmd = uniform(&mut rng, (0.0, p.vmd_max));
            let side = sign(&mut rng);
            let above = sign(&mut rng);
            let transit = rng.random::<f64>() < p.transit_fraction;
            let (speed, omega) = if transit {
                (uniform(&mut rng, p.transit_speed), 0.0)
            } else {
                let v = uniform(&mut rng, p.loiter_speed);
                let rate = uniform(&mut rng, p.loiter_turn_deg_s).to_radians();
                // curve away from the ownship so the CPA stays global
                (v, side * rate)
            };
            let (rn, re) = right_of(psi);
            let (cn, ce) = (side * hmd * rn, side * hmd * re);
            let t = p.cpa_time;
            let start_heading = psi - omega * t;
            let (dn, de) = arc_displacement(speed, start_heading, omega, t);
            let script = if omega != 0.0 {
                alloc::vec![Maneuver {
                    time: 0.0,
                    turn_rate: omega,
                    accel: 0.0,
                    vertical_rate: 0.0,
                }]
            } else {
                Vec::new()
            };
            Encounter {
                id,
                weight: w,
                duration: p.duration,
                kind: EncounterKind::Hovering,
                ownship: AircraftInit {
                    x: 0.0,
                    y: 0.0,
                    z: p.altitude,
                    heading: 0.0,
                    speed: 0.0,
                    vertical_rate: 0.0,
                },
                intruder: AircraftInit {
                    x: cn - dn,
                    y: ce - de,
                    z: p.altitude + above * vmd,
                    heading: crate::logic::wrap_angle(start_heading),
                    speed,
                    vertical_rate: 0.0,
                },
                script,
                cpa: Some(CpaTarget {
                    time: t,
                    hmd,
                    vmd,
                    rel_heading: psi,
                }),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairwiseGeometry {
    HeadOn,
    Overtake,
    /// Intruder heading relative to the ownship, rad.
    Crossing(f64),
}

/// Pairwise geometry that never closes; the encounter is still produced.
#[derive(Debug, Clone, PartialEq)]
pub struct NonClosing {
    pub detail: String,
}

/// Margin simulated beyond the collision time.
const PAIRWISE_TAIL_S: f64 = 60.0;

/// A single encounter on an exact collision course. The ownship starts at
/// the origin heading north; the intruder starts `r0` away.
pub fn gen_pairwise(
    geometry: PairwiseGeometry,
    r0: f64,
    v_own: f64,
    v_int: f64,
    altitude_offset: f64,
) -> Result<(Encounter, Option<NonClosing>)> {
    if !(r0.is_finite() && r0 > 0.0) {
        return Err(Error::invalid("r0 must be positive"));
    }
    if !(v_own >= 0.0 && v_int >= 0.0 && v_own.is_finite() && v_int.is_finite()) {
        return Err(Error::invalid("speeds must be finite and non-negative"));
    }
    if !altitude_offset.is_finite() {
        return Err(Error::invalid("altitude offset must be finite"));
    }
    let rel = match geometry {
        PairwiseGeometry::HeadOn => PI,
        PairwiseGeometry::Overtake => 0.0,
        PairwiseGeometry::Crossing(a) => {
            if !a.is_finite() {
                return Err(Error::invalid("crossing angle must be finite"));
            }
            a
        }
    };
    let (e1n, e1e) = (rel.cos(), rel.sin());
    let (rvn, rve) = (v_own - v_int * e1n, -v_int * e1e);
    let closure = rvn.hypot(rve);
    let overtake_stalled = geometry == PairwiseGeometry::Overtake && v_own <= v_int;
    let own = AircraftInit {
        x: 0.0,
        y: 0.0,
        z: 0.0,
        heading: 0.0,
        speed: v_own,
        vertical_rate: 0.0,
    };
    let mk = |x: f64, y: f64, cpa: Option<CpaTarget>, duration: f64| Encounter {
        id: 0,
        weight: 1.0,
        duration,
        kind: EncounterKind::Pairwise,
        ownship: own,
        intruder: AircraftInit {
            x,
            y,
            z: altitude_offset,
            heading: crate::logic::wrap_angle(rel),
            speed: v_int,
            vertical_rate: 0.0,
        },
        script: Vec::new(),
        cpa,
    };
    if overtake_stalled || closure < 1e-9 {
        let warning = NonClosing {
            detail: format!("geometry does not close (v_own {v_own} ft/s, v_int {v_int} ft/s)"),
        };
        return Ok((mk(r0, 0.0, None, 180.0), Some(warning)));
    }
    let t = r0 / closure;
    let cpa = CpaTarget {
        time: t,
        hmd: 0.0,
        vmd: altitude_offset.abs(),
        rel_heading: wrap_positive(rel),
    };
    let duration = (t + PAIRWISE_TAIL_S).ceil();
    Ok((mk(t * rvn, t * rve, Some(cpa), duration), None))
}

/// Angle wrapped into `[0, 2π)`.
pub fn wrap_positive(a: f64) -> f64 {
    let r = num_traits::Euclid::rem_euclid(&a, &TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hmd_statistics() {
        let set = gen_opsuit_like(1000, 3).unwrap();
        let hmd: Vec<f64> = set.iter().map(|e| e.cpa.unwrap().hmd).collect();
        let mean = hmd.iter().sum::<f64>() / 1000.0;
        assert!(hmd.iter().all(|&h| (0.0..=10_000.0).contains(&h)));
        assert!((mean - 5000.0).abs() < 300.0, "mean {mean}");
        let total: f64 = set.iter().map(|e| e.weight).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn generators_are_seeded() {
        assert_eq!(gen_opsuit_like(20, 9).unwrap(), gen_opsuit_like(20, 9).unwrap());
        assert_ne!(gen_opsuit_like(20, 9).unwrap(), gen_opsuit_like(20, 10).unwrap());
        assert_eq!(gen_hovering(20, 9).unwrap(), gen_hovering(20, 9).unwrap());
        assert!(gen_hovering(0, 1).is_err());
    }

    #[test]
    fn hover_initialization() {
        for e in gen_hovering(200, 5).unwrap() {
            assert_eq!(e.ownship.heading, 0.0);
            assert_eq!(e.ownship.speed, 0.0);
            e.validate().unwrap();
        }
    }

    #[test]
    fn hover_relative_heading_is_uniform() {
        let n = 10_000;
        let mut bins = [0usize; 10];
        for e in gen_hovering(n, 11).unwrap() {
            let deg = e.cpa.unwrap().rel_heading.to_degrees();
            bins[((deg / 36.0) as usize).min(9)] += 1;
        }
        let expect = n as f64 / 10.0;
        let band = 4.0 * (n as f64 * 0.1 * 0.9).sqrt();
        for b in bins {
            assert!((b as f64 - expect).abs() <= band, "{bins:?}");
        }
    }

    #[test]
    fn head_on_timing() {
        let (e, w) = gen_pairwise(PairwiseGeometry::HeadOn, 20_000.0, 150.0, 150.0, 0.0).unwrap();
        assert!(w.is_none());
        let cpa = e.cpa.unwrap();
        assert!((cpa.time - 20_000.0 / 300.0).abs() < 1e-9);
        assert!((e.intruder.x - 20_000.0).abs() < 1e-9 && e.intruder.y.abs() < 1e-9);
    }

    #[test]
    fn stalled_overtake_warns() {
        let (e, w) = gen_pairwise(PairwiseGeometry::Overtake, 5000.0, 100.0, 120.0, 0.0).unwrap();
        assert!(w.is_some());
        assert!(e.cpa.is_none());
        assert_eq!(e.intruder.x, 5000.0);
    }

    #[test]
    fn crossing_meets_at_intersection() {
        let (e, _) =
            gen_pairwise(PairwiseGeometry::Crossing(PI / 2.0), 10_000.0, 100.0, 100.0, 0.0).unwrap();
        let t = e.cpa.unwrap().time;
        let (dn, de) = arc_displacement(100.0, e.intruder.heading, 0.0, t);
        assert!((e.intruder.x + dn - 100.0 * t).abs() < 1e-6);
        assert!((e.intruder.y + de).abs() < 1e-6);
    }

    #[test]
    fn arc_is_chord_along_mid_heading() {
        for omega in [0.0, 1e-7, 0.05, -0.05] {
            let (a, b) = arc_displacement(100.0, 0.3, omega, 10.0);
            let chord = if omega == 0.0 {
                1000.0
            } else {
                2.0 * 100.0 / omega * (omega * 5.0).sin()
            };
            let mid = 0.3 + omega * 5.0;
            assert!((a - chord * mid.cos()).abs() < 1e-6, "{omega}");
            assert!((b - chord * mid.sin()).abs() < 1e-6, "{omega}");
        }
    }

    #[test]
    fn non_positive_weight_rejected() {
        let e = gen_pairwise(PairwiseGeometry::HeadOn, 100.0, 1.0, 1.0, 0.0).unwrap().0;
        let mut bad = e.clone();
        bad.weight = 0.0;
        assert!(bad.validate().is_err());
        assert!(e.validate().is_ok());
    }
}
