//! Collision-avoidance MDP ingredients: relative-state dynamics, advisory
//! sets, Gauss–Hermite transition construction, reward model and the NMAC
//! predicate.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use num_traits::Euclid;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, names, DiscretizationGrid};

/// Standard gravity, ft/s².
pub const G_FTPS2: f64 = 32.185;
pub const KNOT_FTPS: f64 = 1.687_809_857_101_2;
pub const NMAC_HORIZONTAL_FT: f64 = 500.0;
pub const NMAC_VERTICAL_FT: f64 = 100.0;

/// Three-point Gauss–Hermite rule for a unit normal.
const GH_NODES: [f64; 3] = [-1.732_050_807_568_877_2, 0.0, 1.732_050_807_568_877_2];
const GH_WEIGHTS: [f64; 3] = [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    #[serde(rename = "H")]
    Horizontal,
    #[serde(rename = "V")]
    Vertical,
    #[serde(rename = "S")]
    Speed,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Horizontal, Dimension::Vertical, Dimension::Speed];

    pub fn letter(self) -> &'static str {
        match self {
            Dimension::Horizontal => "H",
            Dimension::Vertical => "V",
            Dimension::Speed => "S",
        }
    }
}

/// A subset of advisory dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct DimSet(u8);

impl DimSet {
    pub const EMPTY: DimSet = DimSet(0);

    fn bit(d: Dimension) -> u8 {
        match d {
            Dimension::Horizontal => 1,
            Dimension::Vertical => 2,
            Dimension::Speed => 4,
        }
    }

    pub fn single(d: Dimension) -> Self {
        DimSet(Self::bit(d))
    }

    pub fn contains(self, d: Dimension) -> bool {
        self.0 & Self::bit(d) != 0
    }

    pub fn insert(&mut self, d: Dimension) {
        self.0 |= Self::bit(d);
    }

    pub fn with(mut self, d: Dimension) -> Self {
        self.insert(d);
        self
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: DimSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Dimension> {
        Dimension::ALL.into_iter().filter(move |&d| self.contains(d))
    }

    /// Every subset of `self`, in ascending size and then H, V, S order.
    pub fn subsets(self) -> Vec<DimSet> {
        let mut out: Vec<DimSet> = (0u8..8)
            .filter(|b| b & !self.0 == 0)
            .map(DimSet)
            .collect();
        out.sort_by_key(|s| (s.len(), s.order_key()));
        out
    }

    fn order_key(self) -> u8 {
        // H+S and V+S come before H+V among pairs
        match self.0 {
            5 => 0,
            6 => 1,
            3 => 2,
            b => b,
        }
    }

    /// Label in H, V, S order ("None" when empty), e.g. `H+V+S`.
    pub fn label(self) -> String {
        self.join(&[Dimension::Horizontal, Dimension::Vertical, Dimension::Speed], "None")
    }

    /// Label in V, H, S order ("COC" when empty), e.g. `V+H+S`.
    pub fn profile_label(self) -> String {
        self.join(&[Dimension::Vertical, Dimension::Horizontal, Dimension::Speed], "COC")
    }

    fn join(self, order: &[Dimension], empty: &str) -> String {
        if self.is_empty() {
            return String::from(empty);
        }
        let parts: Vec<&str> = order.iter().filter(|&&d| self.contains(d)).map(|d| d.letter()).collect();
        parts.join("+")
    }

    /// Parses either labelling style.
    pub fn parse(label: &str) -> Result<Self> {
        let t = label.trim();
        if t.eq_ignore_ascii_case("none") || t.eq_ignore_ascii_case("coc") {
            return Ok(DimSet::EMPTY);
        }
        let mut s = DimSet::EMPTY;
        for part in t.split('+') {
            let d = match part.trim() {
                "H" | "h" => Dimension::Horizontal,
                "V" | "v" => Dimension::Vertical,
                "S" | "s" => Dimension::Speed,
                other => return Err(Error::invalid(format!("unknown dimension {other:?} in {label:?}"))),
            };
            if s.contains(d) {
                return Err(Error::invalid(format!("dimension repeated in {label:?}")));
            }
            s.insert(d);
        }
        Ok(s)
    }
}

impl FromIterator<Dimension> for DimSet {
    fn from_iter<I: IntoIterator<Item = Dimension>>(iter: I) -> Self {
        let mut s = DimSet::EMPTY;
        for d in iter {
            s.insert(d);
        }
        s
    }
}

impl From<DimSet> for String {
    fn from(s: DimSet) -> String {
        s.label()
    }
}

impl TryFrom<String> for DimSet {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        DimSet::parse(&s)
    }
}

impl fmt::Display for DimSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Advisory {
    /// Clear of conflict.
    Coc,
    /// Decelerate along track.
    Sd,
    /// Accelerate along track.
    Sa,
    /// Hold current speed.
    Ma,
    /// Turn left.
    Tl,
    /// Turn right.
    Tr,
    /// Climb.
    Cl,
    /// Descend.
    Ds,
}

impl Advisory {
    pub fn label(self) -> &'static str {
        match self {
            Advisory::Coc => "COC",
            Advisory::Sd => "SD",
            Advisory::Sa => "SA",
            Advisory::Ma => "MA",
            Advisory::Tl => "TL",
            Advisory::Tr => "TR",
            Advisory::Cl => "CL",
            Advisory::Ds => "DS",
        }
    }

    pub fn dimension(self) -> Option<Dimension> {
        match self {
            Advisory::Coc => None,
            Advisory::Sd | Advisory::Sa | Advisory::Ma => Some(Dimension::Speed),
            Advisory::Tl | Advisory::Tr => Some(Dimension::Horizontal),
            Advisory::Cl | Advisory::Ds => Some(Dimension::Vertical),
        }
    }

    pub fn is_alert(self) -> bool {
        self != Advisory::Coc
    }

    /// Sign of the commanded maneuver within its dimension (left turns and
    /// descents are negative).
    pub fn sense(self) -> i8 {
        match self {
            Advisory::Sd | Advisory::Tl | Advisory::Ds => -1,
            Advisory::Sa | Advisory::Tr | Advisory::Cl => 1,
            Advisory::Coc | Advisory::Ma => 0,
        }
    }

    /// Commanded along-track acceleration as a multiple of g.
    pub fn accel_g(self, params: &ManeuverParams) -> f64 {
        match self {
            Advisory::Sd => -params.speed_accel_g,
            Advisory::Sa => params.speed_accel_g,
            _ => 0.0,
        }
    }
}

impl fmt::Display for Advisory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicKind {
    Speed,
    Horizontal,
    Vertical,
}

impl LogicKind {
    pub fn tag(self) -> u8 {
        match self {
            LogicKind::Speed => 0,
            LogicKind::Horizontal => 1,
            LogicKind::Vertical => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => LogicKind::Speed,
            1 => LogicKind::Horizontal,
            2 => LogicKind::Vertical,
            _ => return None,
        })
    }

    pub fn dimension(self) -> Dimension {
        match self {
            LogicKind::Speed => Dimension::Speed,
            LogicKind::Horizontal => Dimension::Horizontal,
            LogicKind::Vertical => Dimension::Vertical,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LogicKind::Speed => "speed",
            LogicKind::Horizontal => "horizontal",
            LogicKind::Vertical => "vertical",
        }
    }

    /// Action set in ordinal order. COC is always ordinal 0.
    pub fn actions(self, include_maintain: bool) -> Vec<Advisory> {
        match self {
            LogicKind::Speed if include_maintain => {
                alloc::vec![Advisory::Coc, Advisory::Sd, Advisory::Sa, Advisory::Ma]
            }
            LogicKind::Speed => alloc::vec![Advisory::Coc, Advisory::Sd, Advisory::Sa],
            LogicKind::Horizontal => alloc::vec![Advisory::Coc, Advisory::Tl, Advisory::Tr],
            LogicKind::Vertical => alloc::vec![Advisory::Coc, Advisory::Cl, Advisory::Ds],
        }
    }

    /// Action set implied by a stored action count.
    pub fn actions_for_count(self, count: usize) -> Result<Vec<Advisory>> {
        let acts = match (self, count) {
            (LogicKind::Speed, 4) => self.actions(true),
            (LogicKind::Speed, 3) => self.actions(false),
            (_, 3) => self.actions(false),
            _ => {
                return Err(Error::invalid(format!(
                    "{} logic cannot have {count} actions",
                    self.name()
                )))
            }
        };
        Ok(acts)
    }
}

impl FromStr for LogicKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "speed" | "S" => Ok(LogicKind::Speed),
            "horizontal" | "H" => Ok(LogicKind::Horizontal),
            "vertical" | "V" => Ok(LogicKind::Vertical),
            other => Err(Error::invalid(format!("unknown logic kind {other:?}"))),
        }
    }
}

impl fmt::Display for LogicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Advisory execution parameters, shared by the MDP model and the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManeuverParams {
    pub speed_accel_g: f64,
    pub turn_rate_deg_s: f64,
    pub vertical_rate_fpm: f64,
    /// Turns take effect only at or above this ground speed.
    pub min_turn_speed_kt: f64,
}

impl Default for ManeuverParams {
    fn default() -> Self {
        ManeuverParams {
            speed_accel_g: 0.0625,
            turn_rate_deg_s: 3.0,
            vertical_rate_fpm: 500.0,
            min_turn_speed_kt: 30.0,
        }
    }
}

impl ManeuverParams {
    pub fn speed_accel(&self) -> f64 {
        self.speed_accel_g * G_FTPS2
    }

    pub fn turn_rate(&self) -> f64 {
        self.turn_rate_deg_s.to_radians()
    }

    pub fn vertical_rate(&self) -> f64 {
        self.vertical_rate_fpm / 60.0
    }

    pub fn min_turn_speed(&self) -> f64 {
        self.min_turn_speed_kt * KNOT_FTPS
    }
}

/// Per-second white-noise standard deviations. Speeds in ft/s, headings in
/// deg/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub own_speed: f64,
    pub int_speed: f64,
    pub own_heading_deg: f64,
    pub int_heading_deg: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            own_speed: 1.64,
            int_speed: 3.64,
            own_heading_deg: 1.0027,
            int_heading_deg: 1.0027,
        }
    }
}

impl NoiseModel {
    pub fn zero() -> Self {
        NoiseModel {
            own_speed: 0.0,
            int_speed: 0.0,
            own_heading_deg: 0.0,
            int_heading_deg: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [self.own_speed, self.int_speed, self.own_heading_deg, self.int_heading_deg];
        if all.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::invalid("noise standard deviations must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub nmac_penalty: f64,
    pub alert_cost: f64,
    pub strengthen_cost: f64,
    pub reversal_cost: f64,
    pub maintain_cost: f64,
    pub discount: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            nmac_penalty: -1.0,
            alert_cost: -0.01,
            strengthen_cost: -0.005,
            reversal_cost: -0.02,
            maintain_cost: -0.002,
            discount: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.nmac_penalty < 0.0) {
            return Err(Error::invalid("nmac_penalty must be negative"));
        }
        let costs = [self.alert_cost, self.strengthen_cost, self.reversal_cost, self.maintain_cost];
        if costs.iter().any(|c| !(c.is_finite() && *c <= 0.0)) {
            return Err(Error::invalid("operational costs must be finite and <= 0"));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::invalid("discount must be in (0, 1]"));
        }
        Ok(())
    }

    /// Bound on |reward| for any state and action.
    pub fn max_abs(&self) -> f64 {
        self.nmac_penalty.abs()
            + self.alert_cost.abs()
            + self.strengthen_cost.abs()
            + self.reversal_cost.abs()
            + self.maintain_cost.abs()
    }

    /// FNV-1a over the bit patterns of every field.
    pub fn fingerprint(&self) -> u64 {
        let fields = [
            self.nmac_penalty,
            self.alert_cost,
            self.strengthen_cost,
            self.reversal_cost,
            self.maintain_cost,
            self.discount,
        ];
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for f in fields {
            for b in f.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

/// Relative encounter state as seen by one aircraft.
///
/// Range, bearing and relative heading are in the observer's body frame
/// (x forward, y right, angles positive clockwise). `h` is observer altitude
/// minus intruder altitude and is only consumed by the vertical baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedState {
    pub r: f64,
    pub theta: f64,
    pub psi: f64,
    pub v0: f64,
    pub v1: f64,
    pub h: f64,
    pub a_prev: Advisory,
    pub tau: f64,
}

impl SpeedState {
    pub fn new(r: f64, theta: f64, psi: f64, v0: f64, v1: f64, tau: f64) -> Self {
        SpeedState {
            r,
            theta,
            psi,
            v0,
            v1,
            h: 0.0,
            a_prev: Advisory::Coc,
            tau,
        }
    }

    pub fn with_prev(mut self, a: Advisory) -> Self {
        self.a_prev = a;
        self
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    /// Horizontal and vertical NMAC condition as seen by a logic of `kind`.
    /// The speed and horizontal logics read vertical coincidence from τ = 0;
    /// the vertical baseline reads it from `h`.
    pub fn in_nmac(&self, kind: LogicKind) -> bool {
        let vertical = match kind {
            LogicKind::Vertical => self.h.abs() < NMAC_VERTICAL_FT,
            _ => self.tau <= 0.0,
        };
        self.r < NMAC_HORIZONTAL_FT && vertical
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = Euclid::rem_euclid(&(a + PI), &(2.0 * PI)) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// Piecewise-constant controls over one step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Controls {
    /// Ownship along-track acceleration, ft/s².
    pub own_accel: f64,
    /// Ownship turn rate, rad/s (positive right).
    pub own_turn: f64,
    pub int_accel: f64,
    pub int_turn: f64,
    /// Ownship climb rate relative to the intruder, ft/s.
    pub climb_rate: f64,
}

/// Advances the relative state by `dt` with both aircraft flying constant
/// acceleration and turn rate. Positions use the mid-step heading. The
/// previous-action field is left untouched.
pub fn propagate(
    s: &SpeedState,
    c: &Controls,
    dt: f64,
    own_bounds: (f64, f64),
    int_bounds: (f64, f64),
) -> SpeedState {
    let v0n = (s.v0 + c.own_accel * dt).clamp(own_bounds.0, own_bounds.1);
    let v1n = (s.v1 + c.int_accel * dt).clamp(int_bounds.0, int_bounds.1);
    let d0 = 0.5 * (s.v0 + v0n) * dt;
    let d1 = 0.5 * (s.v1 + v1n) * dt;
    let own_mid = 0.5 * c.own_turn * dt;
    let own_end = c.own_turn * dt;
    let int_mid = s.psi + 0.5 * c.int_turn * dt;
    let int_end = s.psi + c.int_turn * dt;

    let (so, co) = own_mid.sin_cos();
    let (si, ci) = int_mid.sin_cos();
    let (st, ct) = s.theta.sin_cos();
    let rx = s.r * ct + d1 * ci - d0 * co;
    let ry = s.r * st + d1 * si - d0 * so;
    let (se, ce) = own_end.sin_cos();
    let x = rx * ce + ry * se;
    let y = -rx * se + ry * ce;

    SpeedState {
        r: x.hypot(y),
        theta: wrap_angle(y.atan2(x)),
        psi: wrap_angle(int_end - own_end),
        v0: v0n,
        v1: v1n,
        h: s.h + c.climb_rate * dt,
        a_prev: s.a_prev,
        tau: (s.tau - dt).max(0.0),
    }
}

/// Everything needed to build the MDP for one logic variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogicSpec {
    pub kind: LogicKind,
    pub noise: NoiseModel,
    pub weights: RewardWeights,
    pub maneuvers: ManeuverParams,
    pub include_maintain: bool,
    /// Extra backups of the τ = 0 stage, which is absorbing.
    pub coaltitude_sweeps: usize,
    /// Step used when the grid has fewer than two stages.
    pub step_s: f64,
    pub own_speed_bounds: (f64, f64),
    pub int_speed_bounds: (f64, f64),
    /// Relative-altitude cuts on each side of zero (vertical baseline).
    pub altitude_half_count: usize,
}

impl Default for LogicSpec {
    fn default() -> Self {
        LogicSpec {
            kind: LogicKind::Speed,
            noise: NoiseModel::default(),
            weights: RewardWeights::default(),
            maneuvers: ManeuverParams::default(),
            include_maintain: true,
            coaltitude_sweeps: 12,
            step_s: 100.0 / 9.0,
            own_speed_bounds: (50.0, 237.0),
            int_speed_bounds: (0.0, 237.0),
            altitude_half_count: 3,
        }
    }
}

impl LogicSpec {
    pub fn speed() -> Self {
        LogicSpec::default()
    }

    pub fn actions(&self) -> Vec<Advisory> {
        self.kind.actions(self.include_maintain)
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        self.weights.validate()?;
        if !(self.step_s > 0.0) {
            return Err(Error::invalid("step_s must be positive"));
        }
        let m = &self.maneuvers;
        if [m.speed_accel_g, m.turn_rate_deg_s, m.vertical_rate_fpm, m.min_turn_speed_kt]
            .iter()
            .any(|x| !(x.is_finite() && *x >= 0.0))
        {
            return Err(Error::invalid("maneuver parameters must be finite and >= 0"));
        }
        Ok(())
    }

    /// Default lattice for this logic at the given resolution scale.
    pub fn grid(&self, scale: f64) -> Result<DiscretizationGrid> {
        match self.kind {
            LogicKind::Speed => grid::speed_grid(scale, self.actions().len()),
            LogicKind::Horizontal => grid::horizontal_grid(scale),
            LogicKind::Vertical => grid::vertical_grid(
                scale,
                self.maneuvers.vertical_rate() * self.step_s,
                self.altitude_half_count,
            ),
        }
    }

    /// MDP time step for `grid`: the stage spacing, or `step_s` for
    /// single-stage grids.
    pub fn step_for(&self, grid: &DiscretizationGrid) -> f64 {
        grid.stage_step().unwrap_or(self.step_s)
    }

    /// Deterministic ownship controls commanded by `action`.
    pub fn controls(&self, action: Advisory) -> Controls {
        let m = &self.maneuvers;
        let mut c = Controls::default();
        match action {
            Advisory::Sd | Advisory::Sa => c.own_accel = action.accel_g(m) * G_FTPS2,
            Advisory::Tl => c.own_turn = -m.turn_rate(),
            Advisory::Tr => c.own_turn = m.turn_rate(),
            Advisory::Cl => c.climb_rate = m.vertical_rate(),
            Advisory::Ds => c.climb_rate = -m.vertical_rate(),
            Advisory::Coc | Advisory::Ma => {}
        }
        c
    }
}

/// Applies `action` and the intruder acceleration for `dt` with no turning.
/// Ownship speed is clamped to the spec's ownship bounds.
pub fn dynamics_step(
    state: &SpeedState,
    action: Advisory,
    intruder_accel: f64,
    dt: f64,
    spec: &LogicSpec,
) -> SpeedState {
    let mut c = spec.controls(action);
    c.int_accel = intruder_accel;
    let mut next = propagate(state, &c, dt, spec.own_speed_bounds, spec.int_speed_bounds);
    next.a_prev = action;
    next
}

/// Per-step noise dimensions that are active for `action`, as
/// (control slot, standard deviation of the per-step increment).
fn noise_dims(spec: &LogicSpec, action: Advisory, dt: f64) -> ([(usize, f64); 4], usize) {
    let n = &spec.noise;
    let root = dt.sqrt();
    let candidates = [
        (0usize, n.own_speed * root, true),
        (1, n.own_heading_deg.to_radians() * root, true),
        (2, n.int_speed * root, false),
        (3, n.int_heading_deg.to_radians() * root, false),
    ];
    let mut out = [(0usize, 0.0f64); 4];
    let mut len = 0;
    for (slot, sigma, ownship) in candidates {
        // advisories make the ownship deterministic
        if sigma > 0.0 && !(ownship && action.is_alert()) {
            out[len] = (slot, sigma);
            len += 1;
        }
    }
    (out, len)
}

/// Visits every quadrature branch of the transition from `state` under
/// `action`: the successor state (with `a_prev = action`) and its
/// probability. Branch order is fixed.
pub fn for_each_branch(
    spec: &LogicSpec,
    state: &SpeedState,
    action: Advisory,
    dt: f64,
    mut visit: impl FnMut(&SpeedState, f64),
) {
    let base = spec.controls(action);
    let (dims, len) = noise_dims(spec, action, dt);
    let branches = 3usize.pow(len as u32);
    for b in 0..branches {
        let mut c = base;
        let mut p = 1.0;
        let mut code = b;
        // first dimension varies slowest
        for k in (0..len).rev() {
            let node = code % 3;
            code /= 3;
            let (slot, sigma) = dims[k];
            let delta = GH_NODES[node] * sigma;
            p *= GH_WEIGHTS[node];
            match slot {
                0 => c.own_accel += delta / dt,
                1 => c.own_turn += delta / dt,
                2 => c.int_accel += delta / dt,
                _ => c.int_turn += delta / dt,
            }
        }
        let mut next = propagate(state, &c, dt, spec.own_speed_bounds, spec.int_speed_bounds);
        next.a_prev = action;
        visit(&next, p);
    }
}

/// Grid coordinates of `state`, one per axis, matched by axis name.
pub fn state_point_into(
    grid: &DiscretizationGrid,
    actions: &[Advisory],
    state: &SpeedState,
    out: &mut Vec<f64>,
) -> Result<()> {
    out.clear();
    for axis in grid.axes() {
        let x = match axis.name() {
            names::TAU => state.tau,
            names::RANGE => state.r,
            names::BEARING => state.theta,
            names::REL_HEADING => state.psi,
            names::OWN_SPEED => state.v0,
            names::INT_SPEED => state.v1,
            names::REL_ALTITUDE => state.h,
            names::PREV_ACTION => actions
                .iter()
                .position(|&a| a == state.a_prev)
                .ok_or_else(|| {
                    Error::invalid(format!("previous advisory {} not in action set", state.a_prev))
                })? as f64,
            other => return Err(Error::invalid(format!("unknown axis {other:?}"))),
        };
        out.push(x);
    }
    Ok(())
}

/// Inverse of [`state_point_into`] for lattice vertices. Axes the grid lacks
/// take neutral values (co-altitude, τ = 0, COC).
pub fn state_from_point(
    grid: &DiscretizationGrid,
    actions: &[Advisory],
    point: &[f64],
) -> Result<SpeedState> {
    let mut s = SpeedState::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (axis, &x) in grid.axes().iter().zip(point) {
        match axis.name() {
            names::TAU => s.tau = x,
            names::RANGE => s.r = x,
            names::BEARING => s.theta = x,
            names::REL_HEADING => s.psi = x,
            names::OWN_SPEED => s.v0 = x,
            names::INT_SPEED => s.v1 = x,
            names::REL_ALTITUDE => s.h = x,
            names::PREV_ACTION => {
                s.a_prev = *actions.get(x as usize).ok_or_else(|| {
                    Error::invalid(format!("previous-action index {x} out of range"))
                })?
            }
            other => return Err(Error::invalid(format!("unknown axis {other:?}"))),
        }
    }
    Ok(s)
}

/// Successor distribution of a lattice vertex under `action`, merged by
/// vertex and sorted by flat index.
pub fn transitions(
    grid: &DiscretizationGrid,
    vertex_state: &SpeedState,
    action: Advisory,
    spec: &LogicSpec,
    dt: f64,
) -> Result<Vec<(usize, f64)>> {
    let actions = spec.actions();
    if !actions.contains(&action) {
        return Err(Error::invalid(format!("{action} is not a {} advisory", spec.kind)));
    }
    let mut point = Vec::with_capacity(grid.axes().len());
    let mut weights = Vec::new();
    state_point_into(grid, &actions, vertex_state, &mut point)?;
    grid.interpolants_into(&point, &mut weights)?;
    if weights.len() != 1 {
        return Err(Error::invalid("state does not lie on a lattice vertex"));
    }

    let mut out: Vec<(usize, f64)> = Vec::new();
    let mut err = None;
    for_each_branch(spec, vertex_state, action, dt, |next, p| {
        if err.is_some() {
            return;
        }
        let r = state_point_into(grid, &actions, next, &mut point)
            .and_then(|_| grid.interpolants_into(&point, &mut weights));
        match r {
            Ok(()) => out.extend(weights.iter().map(|&(i, w)| (i, p * w))),
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    out.sort_by_key(|e| e.0);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(out.len());
    for (i, p) in out {
        match merged.last_mut() {
            Some(last) if last.0 == i => last.1 += p,
            _ => merged.push((i, p)),
        }
    }
    Ok(merged)
}

/// Immediate reward for taking `action` in `state`. Terms are additive.
pub fn reward(kind: LogicKind, state: &SpeedState, action: Advisory, w: &RewardWeights) -> f64 {
    let mut r = 0.0;
    if state.in_nmac(kind) {
        r += w.nmac_penalty;
    }
    if action.is_alert() {
        r += w.alert_cost;
    }
    if state.a_prev == Advisory::Coc && action.sense() != 0 {
        r += w.strengthen_cost;
    }
    if state.a_prev.sense() * action.sense() < 0 {
        r += w.reversal_cost;
    }
    if action == Advisory::Ma {
        r += w.maintain_cost;
    }
    r
}

/// Near mid-air collision: strictly inside 500 ft horizontally and 100 ft
/// vertically.
pub fn is_nmac(horizontal_sep: f64, vertical_sep: f64) -> bool {
    horizontal_sep < NMAC_HORIZONTAL_FT && vertical_sep < NMAC_VERTICAL_FT
}

/// Builds the comparison logic of the given kind with default parameters.
pub fn baseline_logic(kind: &str, maneuvers: ManeuverParams) -> Result<LogicSpec> {
    let kind: LogicKind = kind.parse()?;
    if kind == LogicKind::Speed {
        return Err(Error::invalid("baseline kind must be horizontal or vertical"));
    }
    Ok(LogicSpec {
        kind,
        maneuvers,
        ..LogicSpec::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, AxisKind, Unit};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn subset_order_and_labels() {
        let all = DimSet::from_iter(Dimension::ALL);
        let labels: Vec<String> = all.subsets().into_iter().map(DimSet::label).collect();
        assert_eq!(labels, ["None", "H", "V", "S", "H+S", "V+S", "H+V", "H+V+S"]);
        let two = DimSet::single(Dimension::Horizontal).with(Dimension::Vertical);
        let labels: Vec<String> = two.subsets().into_iter().map(DimSet::label).collect();
        assert_eq!(labels, ["None", "H", "V", "H+V"]);
        assert_eq!(all.profile_label(), "V+H+S");
        assert_eq!(DimSet::EMPTY.profile_label(), "COC");
        assert_eq!(DimSet::parse("V+H").unwrap(), two);
        assert!(DimSet::parse("H+H").is_err());
    }

    #[test]
    fn head_on_closes_at_combined_speed() {
        let s = SpeedState::new(10_000.0, 0.0, PI, 100.0, 100.0, 0.0);
        let n = dynamics_step(&s, Advisory::Coc, 0.0, 1.0, &LogicSpec::speed());
        assert!(close(n.r, 9800.0, 1e-9));
        assert!(close(n.theta, 0.0, 1e-12));
        assert!(close(wrap_angle(n.psi - PI), 0.0, 1e-12));
    }

    #[test]
    fn accelerate_advisory_adds_one_sixteenth_g() {
        let s = SpeedState::new(10_000.0, 0.0, PI, 100.0, 100.0, 0.0);
        let n = dynamics_step(&s, Advisory::Sa, 0.0, 1.0, &LogicSpec::speed());
        assert!(close(n.v0, 100.0 + 0.0625 * 32.185, 1e-12));
        assert!(close(n.v0, 102.01, 0.01));
        assert_eq!(n.a_prev, Advisory::Sa);
    }

    #[test]
    fn trailing_intruder_keeps_range() {
        let s = SpeedState::new(3000.0, PI, 0.0, 120.0, 120.0, 50.0);
        let n = dynamics_step(&s, Advisory::Coc, 0.0, 5.0, &LogicSpec::speed());
        assert!(close(n.r, 3000.0, 1e-9));
        assert!(close(n.tau, 45.0, 1e-12));
    }

    #[test]
    fn ownship_speed_clamped_to_solved_range() {
        let s = SpeedState::new(3000.0, 0.0, 0.0, 51.0, 100.0, 0.0);
        let n = dynamics_step(&s, Advisory::Sd, 0.0, 10.0, &LogicSpec::speed());
        assert_eq!(n.v0, 50.0);
    }

    #[test]
    fn nmac_is_strict() {
        assert!(is_nmac(499.0, 99.0));
        assert!(!is_nmac(500.0, 50.0));
        assert!(!is_nmac(100.0, 100.0));
    }

    #[test]
    fn reward_terms() {
        let w = RewardWeights::default();
        let k = LogicKind::Speed;
        let calm = SpeedState::new(5000.0, 0.0, 0.0, 100.0, 100.0, 0.0);
        assert_eq!(reward(k, &calm, Advisory::Coc, &w), 0.0);
        let nmac = SpeedState::new(400.0, 0.0, 0.0, 100.0, 100.0, 0.0);
        assert_eq!(reward(k, &nmac, Advisory::Coc, &w), -1.0);
        let after_sd = calm.with_prev(Advisory::Sd);
        assert_eq!(
            reward(k, &after_sd, Advisory::Sa, &w),
            w.alert_cost + w.reversal_cost
        );
        assert_eq!(
            reward(k, &calm, Advisory::Sd, &w),
            w.alert_cost + w.strengthen_cost
        );
        assert_eq!(
            reward(k, &after_sd, Advisory::Ma, &w),
            w.alert_cost + w.maintain_cost
        );
        // not co-altitude yet
        let later = SpeedState::new(400.0, 0.0, 0.0, 100.0, 100.0, 10.0);
        assert_eq!(reward(k, &later, Advisory::Coc, &w), 0.0);
    }

    #[test]
    fn vertical_nmac_reads_relative_altitude() {
        let s = SpeedState::new(400.0, 0.0, 0.0, 100.0, 100.0, 0.0);
        assert!(s.in_nmac(LogicKind::Vertical));
        assert!(!s.with_h(185.0).in_nmac(LogicKind::Vertical));
    }

    #[test]
    fn baseline_kinds() {
        let m = ManeuverParams::default();
        assert_eq!(baseline_logic("horizontal", m).unwrap().kind, LogicKind::Horizontal);
        assert_eq!(
            baseline_logic("vertical", m).unwrap().actions(),
            [Advisory::Coc, Advisory::Cl, Advisory::Ds]
        );
        assert!(baseline_logic("sideways", m).is_err());
        for a in baseline_logic("vertical", m).unwrap().actions().into_iter().take(1) {
            let c = LogicSpec::default().controls(a);
            assert_eq!(c, Controls::default());
        }
    }

    #[test]
    fn climb_for_ten_seconds() {
        let spec = baseline_logic("vertical", ManeuverParams::default()).unwrap();
        let s = SpeedState::new(9000.0, 0.0, PI, 100.0, 100.0, 0.0);
        let n = dynamics_step(&s, Advisory::Cl, 0.0, 10.0, &spec);
        assert!(close(n.h, 83.333_333_333, 1e-6));
    }

    #[test]
    fn min_turn_speed_delay() {
        let m = ManeuverParams::default();
        let v = m.min_turn_speed();
        assert!(close(v, 50.6, 0.05));
        assert!(close(v / m.speed_accel(), 25.2, 0.05));
    }

    fn speed_only_grid() -> DiscretizationGrid {
        DiscretizationGrid::new(alloc::vec![
            Axis::uniform("tau", Unit::Seconds, AxisKind::Stage, 0.0, 1.0, 2).unwrap(),
            Axis::uniform("v1", Unit::FeetPerSecond, AxisKind::Continuous, 0.0, 200.0, 21).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn single_noise_dimension_gives_three_point_rule() {
        let grid = speed_only_grid();
        let spec = LogicSpec {
            noise: NoiseModel {
                int_speed: 10.0 / 3f64.sqrt(),
                ..NoiseModel::zero()
            },
            ..LogicSpec::speed()
        };
        let s = SpeedState::new(5000.0, 0.3, 1.0, 100.0, 100.0, 1.0);
        let t = transitions(&grid, &s, Advisory::Coc, &spec, 1.0).unwrap();
        assert_eq!(t.len(), 3);
        let probs: Vec<f64> = t.iter().map(|e| e.1).collect();
        assert!(close(probs[0], 1.0 / 6.0, 1e-12));
        assert!(close(probs[1], 2.0 / 3.0, 1e-12));
        assert!(close(probs[2], 1.0 / 6.0, 1e-12));
        let v1: Vec<f64> = t.iter().map(|e| grid.vertex_of(e.0).unwrap()[1]).collect();
        assert!(close(v1[0], 90.0, 1e-9) && close(v1[1], 100.0, 1e-9) && close(v1[2], 110.0, 1e-9));
    }

    #[test]
    fn off_lattice_vertex_rejected() {
        let grid = speed_only_grid();
        let s = SpeedState::new(5000.0, 0.0, 0.0, 100.0, 105.0, 1.0);
        assert!(transitions(&grid, &s, Advisory::Coc, &LogicSpec::speed(), 1.0).is_err());
    }

    #[test]
    fn zero_noise_matches_deterministic_step() {
        let spec = LogicSpec {
            noise: NoiseModel::zero(),
            ..LogicSpec::speed()
        };
        let grid = spec.grid(0.1).unwrap();
        let actions = spec.actions();
        let v = grid.vertex_of(grid.index_of(&[3, 4, 2, 5, 7, 1, 1]).unwrap()).unwrap();
        let s = state_from_point(&grid, &actions, &v).unwrap();
        let dt = spec.step_for(&grid);
        let t = transitions(&grid, &s, Advisory::Coc, &spec, dt).unwrap();
        let next = dynamics_step(&s, Advisory::Coc, 0.0, dt, &spec);
        let mut p = Vec::new();
        state_point_into(&grid, &actions, &next, &mut p).unwrap();
        let mut expect = grid.interpolants(&p).unwrap();
        expect.sort_by_key(|e| e.0);
        assert_eq!(t.len(), expect.len());
        for (a, b) in t.iter().zip(&expect) {
            assert_eq!(a.0, b.0);
            assert!(close(a.1, b.1, 1e-15));
        }
    }

    #[test]
    fn advisories_make_ownship_speed_deterministic() {
        let spec = LogicSpec::speed();
        let s = SpeedState::new(8000.0, 0.2, 2.0, 120.0, 90.0, 30.0);
        for a in [Advisory::Sd, Advisory::Sa, Advisory::Ma] {
            let mut speeds = Vec::new();
            for_each_branch(&spec, &s, a, 10.0, |n, _| speeds.push(n.v0));
            assert_eq!(speeds.len(), 9);
            assert!(speeds.iter().all(|&v| v == speeds[0]));
        }
        let mut n = 0;
        for_each_branch(&spec, &s, Advisory::Coc, 10.0, |_, _| n += 1);
        assert_eq!(n, 81);
    }
}
