//! Discretization lattices over the logic state and multilinear interpolation
//! between lattice vertices.
//!
//! Vertices are flattened row-major in axis order. Grids that carry a stage
//! axis keep it first, so every stage occupies a contiguous block of
//! `stage_len()` vertices.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Euclid;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical axis names used by the logic state mapping.
pub mod names {
    pub const TAU: &str = "tau";
    pub const RANGE: &str = "r";
    pub const BEARING: &str = "theta";
    pub const REL_HEADING: &str = "psi";
    pub const OWN_SPEED: &str = "v0";
    pub const INT_SPEED: &str = "v1";
    pub const REL_ALTITUDE: &str = "h";
    pub const PREV_ACTION: &str = "a_prev";
}

pub const MAX_AXES: usize = 16;

const CATEGORICAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    /// Clamped at both ends, linear between cuts.
    Continuous,
    /// Angular axis. The last cut is the same physical point as the first.
    Periodic,
    /// Exact values only, no interpolation.
    Categorical,
    /// Backward-induction stage; lookups snap to the nearest cut.
    Stage,
}

impl AxisKind {
    pub fn tag(self) -> u8 {
        match self {
            AxisKind::Continuous => 0,
            AxisKind::Categorical => 1,
            AxisKind::Periodic => 2,
            AxisKind::Stage => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => AxisKind::Continuous,
            1 => AxisKind::Categorical,
            2 => AxisKind::Periodic,
            3 => AxisKind::Stage,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    None,
    Feet,
    Radians,
    FeetPerSecond,
    Seconds,
}

impl Unit {
    pub fn tag(self) -> u8 {
        match self {
            Unit::None => 0,
            Unit::Feet => 1,
            Unit::Radians => 2,
            Unit::FeetPerSecond => 3,
            Unit::Seconds => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Unit::None,
            1 => Unit::Feet,
            2 => Unit::Radians,
            3 => Unit::FeetPerSecond,
            4 => Unit::Seconds,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    name: String,
    unit: Unit,
    kind: AxisKind,
    cuts: Vec<f64>,
}

impl Axis {
    pub fn new(name: &str, unit: Unit, kind: AxisKind, cuts: Vec<f64>) -> Result<Self> {
        let min_len = match kind {
            AxisKind::Continuous | AxisKind::Periodic => 2,
            AxisKind::Categorical | AxisKind::Stage => 1,
        };
        if cuts.len() < min_len {
            return Err(Error::invalid(format!(
                "axis {name}: needs at least {min_len} cuts, got {}",
                cuts.len()
            )));
        }
        if cuts.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("axis {name}: non-finite cut")));
        }
        if cuts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "axis {name}: cuts must be strictly ascending"
            )));
        }
        Ok(Axis {
            name: name.to_string(),
            unit,
            kind,
            cuts,
        })
    }

    /// `count` evenly spaced cuts from `lo` to `hi` inclusive.
    pub fn uniform(
        name: &str,
        unit: Unit,
        kind: AxisKind,
        lo: f64,
        hi: f64,
        count: usize,
    ) -> Result<Self> {
        Self::new(name, unit, kind, linspace(lo, hi, count))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn kind(&self) -> AxisKind {
        self.kind
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.cuts[0]
    }

    pub fn hi(&self) -> f64 {
        self.cuts[self.cuts.len() - 1]
    }

    /// Wraps `x` into `[lo, hi)` for periodic axes; identity otherwise.
    pub fn wrap(&self, x: f64) -> f64 {
        if self.kind != AxisKind::Periodic {
            return x;
        }
        let lo = self.lo();
        let span = self.hi() - lo;
        let w = lo + Euclid::rem_euclid(&(x - lo), &span);
        if w >= lo + span {
            lo
        } else {
            w
        }
    }

    /// Neighbouring cut indices and the weight on the upper one.
    pub(crate) fn bracket(&self, x: f64) -> Result<Bracket> {
        if x.is_nan() {
            return Err(Error::invalid(format!("axis {}: NaN coordinate", self.name)));
        }
        let n = self.cuts.len();
        match self.kind {
            AxisKind::Categorical => self
                .cuts
                .iter()
                .position(|c| (c - x).abs() <= CATEGORICAL_TOL)
                .map(Bracket::single)
                .ok_or_else(|| {
                    Error::invalid(format!(
                        "axis {}: {x} is not one of the categorical values",
                        self.name
                    ))
                }),
            AxisKind::Stage => {
                if n == 1 {
                    return Ok(Bracket::single(0));
                }
                let b = self.clamped_bracket(x);
                // round half up
                Ok(if b.upper_weight >= 0.5 {
                    Bracket::single(b.upper)
                } else {
                    Bracket::single(b.lower)
                })
            }
            AxisKind::Continuous => Ok(self.clamped_bracket(x)),
            AxisKind::Periodic => {
                let mut b = self.clamped_bracket(self.wrap(x));
                if b.upper == n - 1 {
                    b.upper = 0;
                }
                if b.lower == n - 1 {
                    b.lower = 0;
                }
                Ok(b)
            }
        }
    }

    fn clamped_bracket(&self, x: f64) -> Bracket {
        let n = self.cuts.len();
        if x <= self.cuts[0] {
            return Bracket::single(0);
        }
        if x >= self.cuts[n - 1] {
            return Bracket::single(n - 1);
        }
        let j = self.cuts.partition_point(|&c| c <= x) - 1;
        let t = (x - self.cuts[j]) / (self.cuts[j + 1] - self.cuts[j]);
        if t == 0.0 {
            Bracket::single(j)
        } else {
            Bracket {
                lower: j,
                upper: j + 1,
                upper_weight: t,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Bracket {
    pub lower: usize,
    pub upper: usize,
    pub upper_weight: f64,
}

impl Bracket {
    fn single(i: usize) -> Self {
        Bracket {
            lower: i,
            upper: i,
            upper_weight: 0.0,
        }
    }

    pub fn is_single(&self) -> bool {
        self.upper_weight == 0.0
    }
}

pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let last = (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i == count - 1 {
                        hi
                    } else {
                        lo + (hi - lo) * (i as f64) / last
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct DiscretizationGrid {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    vertex_count: usize,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    axes: Vec<Axis>,
}

impl TryFrom<GridRepr> for DiscretizationGrid {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        DiscretizationGrid::new(r.axes)
    }
}

impl From<DiscretizationGrid> for GridRepr {
    fn from(g: DiscretizationGrid) -> Self {
        GridRepr { axes: g.axes }
    }
}

impl DiscretizationGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_AXES {
            return Err(Error::invalid(format!(
                "grid needs 1..={MAX_AXES} axes, got {}",
                axes.len()
            )));
        }
        for (i, a) in axes.iter().enumerate() {
            if a.kind == AxisKind::Stage && i != 0 {
                return Err(Error::invalid(format!(
                    "stage axis {} must be the outermost axis",
                    a.name
                )));
            }
            if axes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::invalid(format!("duplicate axis name {}", a.name)));
            }
            if a.kind == AxisKind::Continuous || a.kind == AxisKind::Periodic {
                // already guaranteed by Axis::new, but grids may be deserialized
                if a.cuts.len() < 2 {
                    return Err(Error::invalid(format!("axis {} too short", a.name)));
                }
            }
        }
        let mut strides = vec![0usize; axes.len()];
        let mut acc: usize = 1;
        for i in (0..axes.len()).rev() {
            strides[i] = acc;
            acc = acc
                .checked_mul(axes[i].len())
                .ok_or_else(|| Error::invalid("grid vertex count overflows usize"))?;
        }
        Ok(DiscretizationGrid {
            axes,
            strides,
            vertex_count: acc,
        })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis_index(&self, name: &str) -> Option<usize> {
        self.axes.iter().position(|a| a.name == name)
    }

    pub fn axis(&self, name: &str) -> Option<&Axis> {
        self.axes.iter().find(|a| a.name == name)
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::len).collect()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn stage_axis(&self) -> Option<&Axis> {
        self.axes.first().filter(|a| a.kind == AxisKind::Stage)
    }

    pub fn stage_count(&self) -> usize {
        self.stage_axis().map_or(1, Axis::len)
    }

    pub fn stage_len(&self) -> usize {
        self.vertex_count / self.stage_count()
    }

    /// Spacing between consecutive stages, if there are at least two.
    pub fn stage_step(&self) -> Option<f64> {
        let a = self.stage_axis()?;
        (a.len() >= 2).then(|| a.cuts[1] - a.cuts[0])
    }

    /// Nearest stage for a continuous stage coordinate (round half up).
    pub fn stage_of(&self, value: f64) -> Result<usize> {
        match self.stage_axis() {
            Some(a) => Ok(a.bracket(value)?.lower),
            None => Ok(0),
        }
    }

    pub fn index_of(&self, multi: &[usize]) -> Result<usize> {
        if multi.len() != self.axes.len() {
            return Err(Error::invalid(format!(
                "multi-index has {} entries, grid has {} axes",
                multi.len(),
                self.axes.len()
            )));
        }
        let mut flat = 0;
        for (i, (&m, a)) in multi.iter().zip(&self.axes).enumerate() {
            if m >= a.len() {
                return Err(Error::invalid(format!(
                    "index {m} out of bounds for axis {} (len {})",
                    a.name,
                    a.len()
                )));
            }
            flat += m * self.strides[i];
        }
        Ok(flat)
    }

    pub fn multi_index(&self, flat: usize) -> Result<Vec<usize>> {
        let mut out = vec![0; self.axes.len()];
        self.multi_index_into(flat, &mut out)?;
        Ok(out)
    }

    pub fn multi_index_into(&self, flat: usize, out: &mut [usize]) -> Result<()> {
        if flat >= self.vertex_count {
            return Err(Error::invalid(format!(
                "flat index {flat} out of bounds ({} vertices)",
                self.vertex_count
            )));
        }
        let mut rem = flat;
        for (i, s) in self.strides.iter().enumerate() {
            out[i] = rem / s;
            rem %= s;
        }
        Ok(())
    }

    pub fn vertex_of(&self, flat: usize) -> Result<Vec<f64>> {
        let multi = self.multi_index(flat)?;
        Ok(multi
            .iter()
            .zip(&self.axes)
            .map(|(&m, a)| a.cuts[m])
            .collect())
    }

    pub fn interpolants(&self, point: &[f64]) -> Result<Vec<(usize, f64)>> {
        let mut out = Vec::with_capacity(1 << self.axes.len().min(8));
        self.interpolants_into(point, &mut out)?;
        Ok(out)
    }

    /// Multilinear weights of `point` over the lattice. Clears `out` first.
    ///
    /// Out-of-range coordinates are clamped; periodic axes wrap. Zero weights
    /// are never emitted, so a point on a vertex yields a single entry.
    pub fn interpolants_into(&self, point: &[f64], out: &mut Vec<(usize, f64)>) -> Result<()> {
        if point.len() != self.axes.len() {
            return Err(Error::invalid(format!(
                "point has {} coordinates, grid has {} axes",
                point.len(),
                self.axes.len()
            )));
        }
        out.clear();
        out.push((0, 1.0));
        for ((axis, &x), &stride) in self.axes.iter().zip(point).zip(&self.strides) {
            let b = axis.bracket(x)?;
            expand(out, b, stride);
        }
        Ok(())
    }
}

/// Multiplies the partial interpolant set by one axis bracket.
pub(crate) fn expand(out: &mut Vec<(usize, f64)>, b: Bracket, stride: usize) {
    if b.is_single() {
        for e in out.iter_mut() {
            e.0 += b.lower * stride;
        }
    } else {
        let t = b.upper_weight;
        let n = out.len();
        for i in 0..n {
            let (f, w) = out[i];
            out[i] = (f + b.lower * stride, w * (1.0 - t));
            out.push((f + b.upper * stride, w * t));
        }
    }
}

fn reduced(count: usize, scale: f64) -> usize {
    let n = (scale * count as f64 - 1e-9).ceil() as usize;
    n.clamp(2, count)
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::invalid(format!("scale must be in (0, 1], got {scale}")));
    }
    Ok(())
}

/// Full-resolution counts for the speed-logic lattice.
pub mod table {
    pub const RANGE: (f64, f64, usize) = (499.0, 48169.0, 71);
    pub const ANGLE_CUTS: usize = 121;
    pub const OWN_SPEED: (f64, f64, usize) = (50.0, 237.0, 94);
    pub const INT_SPEED: (f64, f64, usize) = (0.0, 237.0, 4);
    pub const TAU: (f64, f64, usize) = (0.0, 100.0, 10);
}

/// Horizontal geometry axes shared by every logic kind, reduced by `scale`.
fn geometry_axes(scale: f64) -> Result<Vec<Axis>> {
    use names::*;
    let (rlo, rhi, rn) = table::RANGE;
    let (v0lo, v0hi, v0n) = table::OWN_SPEED;
    let (v1lo, v1hi, v1n) = table::INT_SPEED;
    let an = reduced(table::ANGLE_CUTS, scale);
    Ok(vec![
        Axis::uniform(RANGE, Unit::Feet, AxisKind::Continuous, rlo, rhi, reduced(rn, scale))?,
        Axis::uniform(BEARING, Unit::Radians, AxisKind::Periodic, -PI, PI, an)?,
        Axis::uniform(REL_HEADING, Unit::Radians, AxisKind::Periodic, -PI, PI, an)?,
        Axis::uniform(OWN_SPEED, Unit::FeetPerSecond, AxisKind::Continuous, v0lo, v0hi, reduced(v0n, scale))?,
        Axis::uniform(INT_SPEED, Unit::FeetPerSecond, AxisKind::Continuous, v1lo, v1hi, reduced(v1n, scale))?,
    ])
}

fn prev_action_axis(action_count: usize) -> Result<Axis> {
    Axis::new(
        names::PREV_ACTION,
        Unit::None,
        AxisKind::Categorical,
        (0..action_count).map(|i| i as f64).collect(),
    )
}

fn tau_axis() -> Result<Axis> {
    let (lo, hi, n) = table::TAU;
    Axis::uniform(names::TAU, Unit::Seconds, AxisKind::Stage, lo, hi, n)
}

/// The speed-logic lattice with four previous-action values.
pub fn default_speed_grid(scale: f64) -> Result<DiscretizationGrid> {
    speed_grid(scale, 4)
}

/// Speed-logic lattice. Continuous and angular axes are reduced to
/// `max(2, ceil(scale * N))` cuts; the previous-action and stage axes keep
/// every value.
pub fn speed_grid(scale: f64, action_count: usize) -> Result<DiscretizationGrid> {
    check_scale(scale)?;
    let mut axes = vec![tau_axis()?];
    axes.extend(geometry_axes(scale)?);
    axes.push(prev_action_axis(action_count)?);
    DiscretizationGrid::new(axes)
}

/// Horizontal-baseline lattice: speed geometry with a three-valued previous
/// action.
pub fn horizontal_grid(scale: f64) -> Result<DiscretizationGrid> {
    speed_grid(scale, 3)
}

/// Vertical-baseline lattice. A single co-altitude stage plus a relative
/// altitude axis whose cuts are multiples of `altitude_step` (one advisory
/// step of climb or descent), `2 * half_count + 1` values.
pub fn vertical_grid(scale: f64, altitude_step: f64, half_count: usize) -> Result<DiscretizationGrid> {
    check_scale(scale)?;
    if !(altitude_step > 0.0) || half_count == 0 {
        return Err(Error::invalid("vertical grid needs a positive altitude step"));
    }
    let k = half_count as i64;
    let mut axes = vec![Axis::new(names::TAU, Unit::Seconds, AxisKind::Stage, vec![0.0])?];
    axes.extend(geometry_axes(scale)?);
    axes.push(Axis::new(
        names::REL_ALTITUDE,
        Unit::Feet,
        AxisKind::Continuous,
        (-k..=k).map(|i| i as f64 * altitude_step).collect(),
    )?);
    axes.push(prev_action_axis(3)?);
    DiscretizationGrid::new(axes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> DiscretizationGrid {
        DiscretizationGrid::new(vec![
            Axis::uniform("x", Unit::None, AxisKind::Continuous, 0.0, 10.0, 11).unwrap(),
            Axis::uniform("a", Unit::Radians, AxisKind::Periodic, -PI, PI, 9).unwrap(),
            Axis::new("c", Unit::None, AxisKind::Categorical, vec![0.0, 1.0, 2.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn full_scale_matches_table() {
        let g = default_speed_grid(1.0).unwrap();
        let r = g.axis("r").unwrap();
        assert_eq!(r.len(), 71);
        assert_eq!((r.lo(), r.hi()), (499.0, 48169.0));
        let tau = g.axis("tau").unwrap();
        assert_eq!(tau.len(), 10);
        assert_eq!((tau.lo(), tau.hi()), (0.0, 100.0));
        assert_eq!(g.axis("theta").unwrap().len(), 121);
        assert_eq!(g.axis("psi").unwrap().len(), 121);
        assert_eq!(g.axis("v0").unwrap().len(), 94);
        assert_eq!((g.axis("v0").unwrap().lo(), g.axis("v0").unwrap().hi()), (50.0, 237.0));
        assert_eq!(g.axis("v1").unwrap().len(), 4);
        assert_eq!(g.axis("a_prev").unwrap().len(), 4);
        assert_eq!(g.stage_count(), 10);
    }

    #[test]
    fn reduced_scale() {
        let g = default_speed_grid(0.1).unwrap();
        let th = g.axis("theta").unwrap();
        assert_eq!(th.len(), 13);
        assert_eq!((th.lo(), th.hi()), (-PI, PI));
        assert_eq!(g.axis("r").unwrap().len(), 8);
        assert_eq!(g.axis("v1").unwrap().len(), 2);
        assert_eq!(g.axis("a_prev").unwrap().len(), 4);
        assert_eq!(g.axis("tau").unwrap().len(), 10);
    }

    #[test]
    fn scale_out_of_range() {
        for s in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(default_speed_grid(s), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn vertex_lookup_is_single_entry() {
        let g = toy();
        let v = g.vertex_of(123).unwrap();
        let w = g.interpolants(&v).unwrap();
        assert_eq!(w, vec![(123, 1.0)]);
    }

    #[test]
    fn midpoint_splits_evenly() {
        let g = toy();
        let w = g.interpolants(&[2.5, 0.0, 1.0]).unwrap();
        assert_eq!(w.len(), 2);
        assert!(w.iter().all(|&(_, x)| x == 0.5));
        let idx: Vec<usize> = w.iter().map(|e| e.0).collect();
        assert_eq!(idx, vec![g.index_of(&[2, 4, 1]).unwrap(), g.index_of(&[3, 4, 1]).unwrap()]);
    }

    #[test]
    fn categorical_mismatch_rejected() {
        let g = toy();
        assert!(matches!(
            g.interpolants(&[1.0, 0.0, 0.5]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn clamps_out_of_range() {
        let g = toy();
        assert_eq!(g.interpolants(&[-4.0, 0.0, 0.0]).unwrap(), g.interpolants(&[0.0, 0.0, 0.0]).unwrap());
        assert_eq!(g.interpolants(&[99.0, 0.0, 0.0]).unwrap(), g.interpolants(&[10.0, 0.0, 0.0]).unwrap());
    }

    #[test]
    fn periodic_upper_cut_aliases_first() {
        let g = toy();
        let at_pi = g.interpolants(&[0.0, PI, 0.0]).unwrap();
        let at_minus_pi = g.interpolants(&[0.0, -PI, 0.0]).unwrap();
        assert_eq!(at_pi, at_minus_pi);
        assert_eq!(at_pi, vec![(0, 1.0)]);
    }

    #[test]
    fn index_round_trip_edges() {
        let g = toy();
        assert_eq!(g.index_of(&[0, 0, 0]).unwrap(), 0);
        assert_eq!(g.index_of(&[10, 8, 2]).unwrap(), g.vertex_count() - 1);
        assert!(g.index_of(&[11, 0, 0]).is_err());
        assert!(g.multi_index(g.vertex_count()).is_err());
    }

    #[test]
    fn stage_axis_must_be_outermost() {
        let axes = vec![
            Axis::uniform("x", Unit::None, AxisKind::Continuous, 0.0, 1.0, 2).unwrap(),
            Axis::uniform("tau", Unit::Seconds, AxisKind::Stage, 0.0, 10.0, 3).unwrap(),
        ];
        assert!(DiscretizationGrid::new(axes).is_err());
    }

    #[test]
    fn stage_snaps_half_up() {
        let g = default_speed_grid(0.1).unwrap();
        let step = g.stage_step().unwrap();
        assert_eq!(g.stage_of(0.49 * step).unwrap(), 0);
        assert_eq!(g.stage_of(0.5 * step).unwrap(), 1);
        assert_eq!(g.stage_of(1e6).unwrap(), 9);
        assert_eq!(g.stage_of(-3.0).unwrap(), 0);
    }

    #[test]
    fn vertical_grid_layout() {
        let g = vertical_grid(0.1, 92.5, 3).unwrap();
        let h = g.axis("h").unwrap();
        assert_eq!(h.len(), 7);
        assert_eq!(h.cuts()[3], 0.0);
        assert_eq!(g.stage_count(), 1);
        assert_eq!(g.axes().last().unwrap().name(), "a_prev");
    }
}
