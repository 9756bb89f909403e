//! Solved action-value tables and the runtime policy: interpolated lookup,
//! argmax, QMDP over a belief and multi-logic blending.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{names, DiscretizationGrid};
use crate::logic::{state_point_into, Advisory, Dimension, LogicKind, SpeedState};

/// Action values over a lattice, `f32`, stage-major then vertex then action.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    kind: LogicKind,
    grid: DiscretizationGrid,
    actions: Vec<Advisory>,
    values: Vec<f32>,
    weights_hash: u64,
    solver_version: u32,
}

impl QTable {
    pub fn new(
        kind: LogicKind,
        grid: DiscretizationGrid,
        actions: Vec<Advisory>,
        values: Vec<f32>,
        weights_hash: u64,
        solver_version: u32,
    ) -> Result<Self> {
        let expected = kind.actions_for_count(actions.len())?;
        if expected != actions {
            return Err(Error::invalid(format!("action set does not match {kind} logic")));
        }
        if let Some(a) = grid.axis(names::PREV_ACTION) {
            if a.len() != actions.len() {
                return Err(Error::invalid(format!(
                    "grid has {} previous actions, table has {} actions",
                    a.len(),
                    actions.len()
                )));
            }
        }
        let want = grid.vertex_count() * actions.len();
        if values.len() != want {
            return Err(Error::invalid(format!(
                "table has {} values, grid and actions need {want}",
                values.len()
            )));
        }
        Ok(QTable {
            kind,
            grid,
            actions,
            values,
            weights_hash,
            solver_version,
        })
    }

    /// Narrows solver output to `f32`, rejecting values that overflow.
    pub fn from_f64(
        kind: LogicKind,
        grid: DiscretizationGrid,
        actions: Vec<Advisory>,
        values: &[f64],
        weights_hash: u64,
        solver_version: u32,
    ) -> Result<Self> {
        let n_act = actions.len().max(1);
        let stage_len = grid.stage_len();
        let mut narrow = Vec::with_capacity(values.len());
        for (i, &x) in values.iter().enumerate() {
            let y = x as f32;
            if !y.is_finite() {
                let v = i / n_act;
                return Err(Error::SolverFailure {
                    stage: v / stage_len.max(1),
                    vertex: v,
                    detail: format!("value {x} not representable as f32"),
                });
            }
            narrow.push(y);
        }
        QTable::new(kind, grid, actions, narrow, weights_hash, solver_version)
    }

    pub fn kind(&self) -> LogicKind {
        self.kind
    }

    pub fn grid(&self) -> &DiscretizationGrid {
        &self.grid
    }

    pub fn actions(&self) -> &[Advisory] {
        &self.actions
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn weights_hash(&self) -> u64 {
        self.weights_hash
    }

    pub fn solver_version(&self) -> u32 {
        self.solver_version
    }

    pub fn value(&self, vertex: usize, action: usize) -> f32 {
        self.values[vertex * self.actions.len() + action]
    }

    /// Interpolated action values at `state`, written into `out`.
    pub fn q_values_into(&self, state: &SpeedState, scratch: &mut Lookup, out: &mut [f64]) -> Result<()> {
        let n = self.actions.len();
        if out.len() != n {
            return Err(Error::invalid("output slice length differs from action count"));
        }
        state_point_into(&self.grid, &self.actions, state, &mut scratch.point)?;
        self.grid.interpolants_into(&scratch.point, &mut scratch.weights)?;
        out.fill(0.0);
        for &(v, w) in &scratch.weights {
            let row = &self.values[v * n..(v + 1) * n];
            for (o, &q) in out.iter_mut().zip(row) {
                *o += w * f64::from(q);
            }
        }
        Ok(())
    }

    pub fn q_values(&self, state: &SpeedState) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.actions.len()];
        self.q_values_into(state, &mut Lookup::default(), &mut out)?;
        Ok(out)
    }
}

/// Reusable buffers for table lookups.
#[derive(Debug, Clone, Default)]
pub struct Lookup {
    point: Vec<f64>,
    weights: Vec<(usize, f64)>,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Greedy advisory at `state`.
pub fn best_action(q: &QTable, state: &SpeedState) -> Result<Advisory> {
    Ok(q.actions[argmax(&q.q_values(state)?)])
}

/// QMDP advisory: the argmax of the belief-weighted action values.
/// Weights must be non-negative with a positive sum.
pub fn qmdp_action(q: &QTable, belief: &[(SpeedState, f64)]) -> Result<Advisory> {
    let total: f64 = belief.iter().map(|b| b.1).sum();
    if belief.iter().any(|b| !(b.1.is_finite() && b.1 >= 0.0)) || !(total > 0.0) {
        return Err(Error::invalid("belief weights must be non-negative with a positive sum"));
    }
    let n = q.actions.len();
    let mut acc = vec![0.0; n];
    let mut row = vec![0.0; n];
    let mut scratch = Lookup::default();
    for (s, w) in belief {
        q.q_values_into(s, &mut scratch, &mut row)?;
        for (a, r) in acc.iter_mut().zip(&row) {
            *a += w * r;
        }
    }
    Ok(q.actions[argmax(&acc)])
}

/// Joint advisory from up to one logic per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CompositeAdvisory {
    pub speed: Option<Advisory>,
    pub horizontal: Option<Advisory>,
    pub vertical: Option<Advisory>,
}

impl CompositeAdvisory {
    pub fn get(&self, d: Dimension) -> Option<Advisory> {
        match d {
            Dimension::Speed => self.speed,
            Dimension::Horizontal => self.horizontal,
            Dimension::Vertical => self.vertical,
        }
    }

    fn slot(&mut self, d: Dimension) -> &mut Option<Advisory> {
        match d {
            Dimension::Speed => &mut self.speed,
            Dimension::Horizontal => &mut self.horizontal,
            Dimension::Vertical => &mut self.vertical,
        }
    }

    /// The advisory in `d`, treating an absent logic as COC.
    pub fn in_dimension(&self, d: Dimension) -> Advisory {
        self.get(d).unwrap_or(Advisory::Coc)
    }

    pub fn is_alert(&self) -> bool {
        Dimension::ALL.iter().any(|&d| self.in_dimension(d).is_alert())
    }

    /// Dimensions with an active maneuver.
    pub fn alerting_dimensions(&self) -> impl Iterator<Item = Dimension> + '_ {
        Dimension::ALL
            .into_iter()
            .filter(move |&d| self.in_dimension(d).is_alert())
    }
}

/// Combines one advisory per dimension. Each dimension may appear once and
/// its advisory must be COC or belong to that dimension.
pub fn blend(advisories: &[(Dimension, Advisory)]) -> Result<CompositeAdvisory> {
    let mut out = CompositeAdvisory::default();
    for &(d, a) in advisories {
        if let Some(ad) = a.dimension() {
            if ad != d {
                return Err(Error::invalid(format!("{a} is not a {} advisory", d.letter())));
            }
        }
        let slot = out.slot(d);
        if slot.is_some() {
            return Err(Error::invalid(format!("dimension {} given twice", d.letter())));
        }
        *slot = Some(a);
    }
    Ok(out)
}
