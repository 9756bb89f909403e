//! Closed-loop encounter simulation with table-driven logics, sensor noise,
//! altimeter bias and pilot response.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::encounters::{arc_displacement, wrap_positive, Encounter};
use crate::error::{Error, Result};
use crate::logic::{
    is_nmac, wrap_angle, Advisory, DimSet, Dimension, ManeuverParams, SpeedState, NMAC_HORIZONTAL_FT,
    NMAC_VERTICAL_FT,
};
use crate::policy::{argmax, blend, CompositeAdvisory, Lookup, QTable};
#[allow(unused_imports)]
use num_traits::Float;

/// Upper bound on the τ reported to the logics, s.
pub const TAU_MAX: f64 = 100.0;

/// Standard deviations of the per-step surveillance errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorNoise {
    /// ft.
    pub range: f64,
    /// rad.
    pub bearing: f64,
    /// ft/s.
    pub int_speed: f64,
    /// rad.
    pub rel_heading: f64,
    /// Per-aircraft altimeter bias, ft, drawn once per repetition.
    pub altitude: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        SensorNoise {
            range: 50.0,
            bearing: 0.5f64.to_radians(),
            int_speed: 3.0,
            rel_heading: 0.01,
            altitude: 50.0,
        }
    }
}

impl SensorNoise {
    pub fn zero() -> Self {
        SensorNoise {
            range: 0.0,
            bearing: 0.0,
            int_speed: 0.0,
            rel_heading: 0.0,
            altitude: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [self.range, self.bearing, self.int_speed, self.rel_heading, self.altitude];
        if all.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::invalid("sensor noise must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum PilotModel {
    /// Follows every advisory after `delay` seconds.
    Deterministic { delay: f64 },
    /// Responds to each alerting dimension independently; the responding
    /// subset is fixed at the first alert.
    Probabilistic { p_no_response: f64, delay: f64 },
}

impl Default for PilotModel {
    fn default() -> Self {
        PilotModel::Deterministic { delay: 5.0 }
    }
}

impl PilotModel {
    pub fn delay(&self) -> f64 {
        match *self {
            PilotModel::Deterministic { delay } | PilotModel::Probabilistic { delay, .. } => delay,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.delay().is_finite() && self.delay() >= 0.0) {
            return Err(Error::invalid("pilot delay must be finite and >= 0"));
        }
        if let PilotModel::Probabilistic { p_no_response, .. } = *self {
            if !(0.0..=1.0).contains(&p_no_response) {
                return Err(Error::invalid("p_no_response must be in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equipage {
    EquippedEquipped,
    #[default]
    EquippedUnequipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dt: f64,
    pub sensor: SensorNoise,
    pub pilot: PilotModel,
    pub equipage: Equipage,
    pub repetitions: u32,
    /// Belief particles per query; 0 queries the point observation.
    pub qmdp_particles: usize,
    pub maneuvers: ManeuverParams,
    pub speed_bounds: (f64, f64),
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1.0,
            sensor: SensorNoise::default(),
            pilot: PilotModel::default(),
            equipage: Equipage::default(),
            repetitions: 1,
            qmdp_particles: 0,
            maneuvers: ManeuverParams::default(),
            speed_bounds: (0.0, 237.0),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt must be positive"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        let (lo, hi) = self.speed_bounds;
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::invalid("speed bounds must satisfy 0 <= lo < hi"));
        }
        self.sensor.validate()?;
        self.pilot.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub t: f64,
    pub advisory: CompositeAdvisory,
}

/// Measured closest point of approach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpaObserved {
    pub time: f64,
    pub hmd: f64,
    pub vmd: f64,
    /// In `[0, 2π)`.
    pub rel_heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub encounter_id: u64,
    pub repetition: u32,
    pub seed: u64,
    pub nmac: bool,
    pub nmac_time: Option<f64>,
    pub min_horizontal_sep: f64,
    pub min_vertical_sep: f64,
    pub cpa: CpaObserved,
    pub alerted: bool,
    pub first_alert_time: Option<f64>,
    pub first_alert_range: Option<f64>,
    /// Ownship advisories, recorded when they change.
    pub timeline: Vec<TimelineEntry>,
    /// Ownship dimensions the pilot follows; set at the first alert.
    pub responded: Option<DimSet>,
}

/// Draws the dimensions a pilot follows: each of `dims` independently with
/// probability `1 - p_no_response^(1/|dims|)`.
pub fn sample_response(p_no_response: f64, dims: DimSet, rng: &mut impl Rng) -> DimSet {
    if dims.is_empty() {
        return DimSet::EMPTY;
    }
    let p = 1.0 - p_no_response.powf(1.0 / dims.len() as f64);
    dims.iter().filter(|_| rng.random::<f64>() < p).collect()
}

/// Responding subset for a pilot facing `n_dims` advisory dimensions
/// (horizontal, vertical and then speed).
pub fn sample_pilot_response(p_no_response: f64, n_dims: usize, seed: u64) -> Result<DimSet> {
    if !(0.0..=1.0).contains(&p_no_response) {
        return Err(Error::invalid("p_no_response must be in [0, 1]"));
    }
    if !(1..=3).contains(&n_dims) {
        return Err(Error::invalid("n_dims must be 1, 2 or 3"));
    }
    let dims: DimSet = Dimension::ALL.into_iter().take(n_dims).collect();
    let mut rng = crate::rng::stream_rng(seed, 0);
    Ok(sample_response(p_no_response, dims, &mut rng))
}

/// Checks that a logic set has at most one table per dimension.
pub fn check_logics(tables: &[&QTable]) -> Result<DimSet> {
    let mut dims = DimSet::EMPTY;
    for t in tables {
        let d = t.kind().dimension();
        if dims.contains(d) {
            return Err(Error::invalid(format!("two {} logics in one logic set", t.kind())));
        }
        dims.insert(d);
    }
    Ok(dims)
}

#[derive(Debug, Clone, Copy)]
struct Body {
    n: f64,
    e: f64,
    z: f64,
    heading: f64,
    speed: f64,
    /// ft/s.
    vz: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Command {
    accel: f64,
    turn: f64,
    vz: f64,
}

impl Body {
    fn advance(&mut self, c: &Command, dt: f64, bounds: (f64, f64)) {
        let v1 = (self.speed + c.accel * dt).clamp(bounds.0, bounds.1);
        let (dn, de) = arc_displacement(0.5 * (self.speed + v1), self.heading, c.turn, dt);
        self.n += dn;
        self.e += de;
        self.z += c.vz * dt;
        self.heading = wrap_angle(self.heading + c.turn * dt);
        self.speed = v1;
        self.vz = c.vz;
    }
}

/// Per-aircraft logic state.
struct Agent<'a> {
    tables: &'a [&'a QTable],
    dims: DimSet,
    prev: Vec<Advisory>,
    issued: Vec<CompositeAdvisory>,
    responded: Option<DimSet>,
    first_alert: Option<(f64, f64)>,
}

impl<'a> Agent<'a> {
    fn new(tables: &'a [&'a QTable]) -> Result<Self> {
        Ok(Agent {
            dims: check_logics(tables)?,
            prev: vec![Advisory::Coc; tables.len()],
            issued: Vec::new(),
            responded: None,
            tables,
            first_alert: None,
        })
    }

    /// Advisory the pilot is executing at step `k`.
    fn executed(&self, k: usize, delay_steps: usize) -> CompositeAdvisory {
        let follow = self.responded.unwrap_or(DimSet::EMPTY);
        match k.checked_sub(delay_steps).and_then(|i| self.issued.get(i)) {
            None => CompositeAdvisory::default(),
            Some(c) => {
                let mut out = CompositeAdvisory::default();
                for d in follow.iter() {
                    let a = c.in_dimension(d);
                    match d {
                        Dimension::Speed => out.speed = Some(a),
                        Dimension::Horizontal => out.horizontal = Some(a),
                        Dimension::Vertical => out.vertical = Some(a),
                    }
                }
                out
            }
        }
    }
}

fn normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * sigma
}

/// Relative state of `other` as seen from `me`, before sensor noise.
fn relative(me: &Body, other: &Body) -> (f64, f64, f64) {
    let dn = other.n - me.n;
    let de = other.e - me.e;
    let r = dn.hypot(de);
    let theta = wrap_angle(de.atan2(dn) - me.heading);
    let psi = wrap_angle(other.heading - me.heading);
    (r, theta, psi)
}

/// Time until vertical separation drops below the NMAC threshold.
pub fn tau_from_vertical(h: f64, h_rate: f64) -> f64 {
    if h.abs() < NMAC_VERTICAL_FT {
        return 0.0;
    }
    if h * h_rate < 0.0 {
        ((h.abs() - NMAC_VERTICAL_FT) / h_rate.abs()).clamp(0.0, TAU_MAX)
    } else {
        TAU_MAX
    }
}

fn observe(
    me: &Body,
    my_bias: f64,
    other: &Body,
    other_bias: f64,
    noise: &SensorNoise,
    rng: &mut ChaCha8Rng,
) -> SpeedState {
    let (r, theta, psi) = relative(me, other);
    let r = (r + normal(rng, noise.range)).max(0.0);
    let theta = wrap_angle(theta + normal(rng, noise.bearing));
    let psi = wrap_angle(psi + normal(rng, noise.rel_heading));
    let v1 = (other.speed + normal(rng, noise.int_speed)).max(0.0);
    let h = (me.z + my_bias) - (other.z + other_bias);
    let tau = tau_from_vertical(h, me.vz - other.vz);
    SpeedState::new(r, theta, psi, me.speed, v1, tau).with_h(h)
}

fn query(
    agent: &mut Agent<'_>,
    sensed: &SpeedState,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
    lookup: &mut Lookup,
    buf: &mut Vec<f64>,
) -> Result<CompositeAdvisory> {
    let mut picks: Vec<(Dimension, Advisory)> = Vec::with_capacity(agent.tables.len());
    for (i, table) in agent.tables.iter().enumerate() {
        let n = table.actions().len();
        buf.clear();
        buf.resize(n, 0.0);
        let base = sensed.with_prev(agent.prev[i]);
        if cfg.qmdp_particles == 0 {
            table.q_values_into(&base, lookup, buf)?;
        } else {
            let mut row = vec![0.0; n];
            let w = 1.0 / cfg.qmdp_particles as f64;
            let s = &cfg.sensor;
            for _ in 0..cfg.qmdp_particles {
                let mut p = base;
                p.r = (p.r + normal(rng, s.range)).max(0.0);
                p.theta = wrap_angle(p.theta + normal(rng, s.bearing));
                p.psi = wrap_angle(p.psi + normal(rng, s.rel_heading));
                p.v1 = (p.v1 + normal(rng, s.int_speed)).max(0.0);
                table.q_values_into(&p, lookup, &mut row)?;
                for (b, q) in buf.iter_mut().zip(&row) {
                    *b += w * q;
                }
            }
        }
        let a = table.actions()[argmax(buf)];
        agent.prev[i] = a;
        picks.push((table.kind().dimension(), a));
    }
    blend(&picks)
}

/// Maneuver commanded by the executed advisory on top of the nominal
/// controls.
fn command(exec: &CompositeAdvisory, nominal: Command, body: &Body, m: &ManeuverParams) -> Command {
    let mut c = nominal;
    let speed = exec.in_dimension(Dimension::Speed);
    match speed {
        Advisory::Sa => c.accel = m.speed_accel(),
        Advisory::Sd => c.accel = -m.speed_accel(),
        Advisory::Ma => c.accel = 0.0,
        _ => {}
    }
    let turn = exec.in_dimension(Dimension::Horizontal);
    if turn.is_alert() {
        if body.speed < m.min_turn_speed() {
            // build up to the minimum turning speed first
            c.turn = 0.0;
            if !speed.is_alert() {
                c.accel = m.speed_accel();
            }
        } else {
            c.turn = f64::from(turn.sense()) * m.turn_rate();
        }
    }
    match exec.in_dimension(Dimension::Vertical) {
        Advisory::Cl => c.vz = m.vertical_rate(),
        Advisory::Ds => c.vz = -m.vertical_rate(),
        _ => {}
    }
    c
}

/// Open interval of `s` in [0, 1] where `a s² + b s + c < 0`.
fn below_quadratic(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    if a <= 1e-12 {
        // effectively linear over the step
        if b.abs() <= 1e-12 {
            return (c < 0.0).then_some((0.0, 1.0));
        }
        let root = -c / b;
        return if b > 0.0 { Some((0.0, root)) } else { Some((root, 1.0)) };
    }
    let disc = b * b - 4.0 * a * c;
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    Some(((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)))
}

struct Tracker {
    min_h: f64,
    min_v: f64,
    cpa: CpaObserved,
    nmac_time: Option<f64>,
}

impl Tracker {
    fn new() -> Self {
        Tracker {
            min_h: f64::INFINITY,
            min_v: f64::INFINITY,
            cpa: CpaObserved {
                time: 0.0,
                hmd: f64::INFINITY,
                vmd: 0.0,
                rel_heading: 0.0,
            },
            nmac_time: None,
        }
    }

    /// Folds one step with relative motion linear between its endpoints.
    fn step(&mut self, t0: f64, dt: f64, a0: (&Body, &Body), a1: (&Body, &Body)) {
        let p0 = (a0.1.n - a0.0.n, a0.1.e - a0.0.e);
        let p1 = (a1.1.n - a1.0.n, a1.1.e - a1.0.e);
        let d = (p1.0 - p0.0, p1.1 - p0.1);
        let z0 = a0.1.z - a0.0.z;
        let z1 = a1.1.z - a1.0.z;
        let dz = z1 - z0;
        let psi0 = a0.1.heading - a0.0.heading;
        let dpsi = wrap_angle(a1.1.heading - a1.0.heading - psi0);

        let a = d.0 * d.0 + d.1 * d.1;
        let b = 2.0 * (p0.0 * d.0 + p0.1 * d.1);
        let s_star = if a > 0.0 { (-b / (2.0 * a)).clamp(0.0, 1.0) } else { 0.0 };
        let hx = p0.0 + s_star * d.0;
        let hy = p0.1 + s_star * d.1;
        let h = hx.hypot(hy);
        if h < self.min_h {
            self.min_h = h;
            self.cpa = CpaObserved {
                time: t0 + s_star * dt,
                hmd: h,
                vmd: (z0 + s_star * dz).abs(),
                rel_heading: wrap_positive(psi0 + s_star * dpsi),
            };
        }
        let v = if z0 * z1 <= 0.0 { 0.0 } else { z0.abs().min(z1.abs()) };
        self.min_v = self.min_v.min(v);

        if self.nmac_time.is_none() {
            let c = p0.0 * p0.0 + p0.1 * p0.1 - NMAC_HORIZONTAL_FT * NMAC_HORIZONTAL_FT;
            let horiz = below_quadratic(a, b, c);
            let vert = if dz.abs() <= 1e-12 {
                (z0.abs() < NMAC_VERTICAL_FT).then_some((0.0, 1.0))
            } else {
                let r1 = (-NMAC_VERTICAL_FT - z0) / dz;
                let r2 = (NMAC_VERTICAL_FT - z0) / dz;
                Some((r1.min(r2), r1.max(r2)))
            };
            if let (Some(hz), Some(vt)) = (horiz, vert) {
                let lo = hz.0.max(vt.0).max(0.0);
                let hi = hz.1.min(vt.1).min(1.0);
                if lo < hi || (lo == hi && lo == 0.0 && is_nmac(p0.0.hypot(p0.1), z0.abs())) {
                    self.nmac_time = Some(t0 + lo * dt);
                }
            }
        }
    }
}

fn body_of(a: &crate::encounters::AircraftInit) -> Body {
    Body {
        n: a.x,
        e: a.y,
        z: a.z,
        heading: wrap_angle(a.heading),
        speed: a.speed,
        vz: a.vertical_rate / 60.0,
    }
}

/// Simulates one repetition of `encounter`. Randomness comes only from
/// `seed`.
pub fn simulate(
    encounter: &Encounter,
    ownship_logics: &[&QTable],
    intruder_logics: Option<&[&QTable]>,
    cfg: &SimConfig,
    seed: u64,
) -> Result<SimResult> {
    simulate_repetition(encounter, ownship_logics, intruder_logics, cfg, seed, 0)
}

fn simulate_repetition(
    enc: &Encounter,
    own_logics: &[&QTable],
    int_logics: Option<&[&QTable]>,
    cfg: &SimConfig,
    seed: u64,
    repetition: u32,
) -> Result<SimResult> {
    cfg.validate()?;
    enc.validate()?;
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let own_bias = normal(&mut rng, cfg.sensor.altitude);
    let int_bias = normal(&mut rng, cfg.sensor.altitude);
    let mut own_agent = Agent::new(own_logics)?;
    let mut int_agent = match int_logics {
        Some(t) if !t.is_empty() => Some(Agent::new(t)?),
        _ => None,
    };

    let dt = cfg.dt;
    let steps = (enc.duration / dt - 1e-9).ceil().max(0.0) as usize;
    let delay_steps = (cfg.pilot.delay() / dt).round() as usize;
    let m = &cfg.maneuvers;
    let mut own = body_of(&enc.ownship);
    let mut int = body_of(&enc.intruder);
    let own_nominal = Command {
        accel: 0.0,
        turn: 0.0,
        vz: own.vz,
    };
    let mut tracker = Tracker::new();
    let mut timeline: Vec<TimelineEntry> = Vec::new();
    let mut alerted = false;
    let mut lookup = Lookup::default();
    let mut buf = Vec::new();

    for k in 0..steps {
        let t = k as f64 * dt;
        for (me, my_body, other_body, my_bias, other_bias) in [
            (Some(&mut own_agent), &own, &int, own_bias, int_bias),
            (int_agent.as_mut(), &int, &own, int_bias, own_bias),
        ] {
            let Some(agent) = me else { continue };
            if agent.tables.is_empty() {
                continue;
            }
            let sensed = observe(my_body, my_bias, other_body, other_bias, &cfg.sensor, &mut rng);
            let adv = query(agent, &sensed, cfg, &mut rng, &mut lookup, &mut buf)?;
            if adv.is_alert() && agent.first_alert.is_none() {
                let range = relative(my_body, other_body).0;
                agent.first_alert = Some((t, range));
                agent.responded = Some(match cfg.pilot {
                    PilotModel::Deterministic { .. } => agent.dims,
                    PilotModel::Probabilistic { p_no_response, .. } => {
                        sample_response(p_no_response, agent.dims, &mut rng)
                    }
                });
            }
            agent.issued.push(adv);
        }
        if let Some(&adv) = own_agent.issued.last() {
            alerted |= adv.is_alert();
            if timeline.last().is_none_or(|e| e.advisory != adv) {
                timeline.push(TimelineEntry { t, advisory: adv });
            }
        }

        let own_cmd = command(&own_agent.executed(k, delay_steps), own_nominal, &own, m);
        let scripted = enc.maneuver_at(t).map_or(
            Command {
                accel: 0.0,
                turn: 0.0,
                vz: enc.intruder.vertical_rate / 60.0,
            },
            |s| Command {
                accel: s.accel,
                turn: s.turn_rate,
                vz: s.vertical_rate / 60.0,
            },
        );
        let int_cmd = match &int_agent {
            Some(a) => command(&a.executed(k, delay_steps), scripted, &int, m),
            None => scripted,
        };

        let (own0, int0) = (own, int);
        own.advance(&own_cmd, dt, cfg.speed_bounds);
        int.advance(&int_cmd, dt, cfg.speed_bounds);
        tracker.step(t, dt, (&own0, &int0), (&own, &int));
    }

    let finite = |x: f64| if x.is_finite() { x } else { 0.0 };
    Ok(SimResult {
        encounter_id: enc.id,
        repetition,
        seed,
        nmac: tracker.nmac_time.is_some(),
        nmac_time: tracker.nmac_time,
        min_horizontal_sep: finite(tracker.min_h),
        min_vertical_sep: finite(tracker.min_v),
        cpa: CpaObserved {
            hmd: finite(tracker.cpa.hmd),
            ..tracker.cpa
        },
        alerted,
        first_alert_time: own_agent.first_alert.map(|a| a.0),
        first_alert_range: own_agent.first_alert.map(|a| a.1),
        timeline,
        responded: own_agent.responded,
    })
}

/// Seed of repetition `rep` of encounter `id`.
pub fn repetition_seed(base_seed: u64, id: u64, rep: u32) -> u64 {
    crate::rng::sub_seed(crate::rng::sub_seed(base_seed, id), u64::from(rep))
}

/// Ownship and intruder logic sets for a campaign.
#[derive(Debug, Clone, Copy)]
pub struct Campaign<'a> {
    pub ownship: &'a [&'a QTable],
    pub cfg: &'a SimConfig,
    pub base_seed: u64,
}

impl Campaign<'_> {
    /// Checks configuration and logic compatibility once per campaign.
    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        check_logics(self.ownship)?;
        Ok(())
    }

    /// Number of results a set of `n` encounters produces.
    pub fn result_count(&self, n: usize) -> usize {
        n * self.cfg.repetitions as usize
    }

    /// Result slot `i` in encounter-major, repetition-minor order.
    pub fn run_slot(&self, encounters: &[Encounter], i: usize) -> Result<SimResult> {
        let reps = self.cfg.repetitions as usize;
        let enc = &encounters[i / reps];
        let rep = (i % reps) as u32;
        let intruder = match self.cfg.equipage {
            Equipage::EquippedEquipped => Some(self.ownship),
            Equipage::EquippedUnequipped => None,
        };
        let seed = repetition_seed(self.base_seed, enc.id, rep);
        simulate_repetition(enc, self.ownship, intruder, self.cfg, seed, rep).map_err(|e| match e {
            Error::Encounter { .. } => e,
            other => Error::Encounter {
                id: enc.id,
                source: alloc::boxed::Box::new(other),
            },
        })
    }
}

/// Runs every repetition of every encounter in order.
pub fn run_set(
    encounters: &[Encounter],
    ownship_logics: &[&QTable],
    cfg: &SimConfig,
    base_seed: u64,
) -> Result<Vec<SimResult>> {
    if encounters.is_empty() {
        return Err(Error::invalid("encounter set is empty"));
    }
    let c = Campaign {
        ownship: ownship_logics,
        cfg,
        base_seed,
    };
    c.validate()?;
    (0..c.result_count(encounters.len()))
        .map(|i| c.run_slot(encounters, i))
        .collect()
}
