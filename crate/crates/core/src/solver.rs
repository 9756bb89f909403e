//! Finite-horizon backward induction over a staged lattice MDP.
//!
//! Stage `k` holds the action values with `k` decision steps left before
//! the horizon. Stage 0 is initialised with the immediate reward, then
//! optionally backed up in place a fixed number of times (it is absorbing:
//! its successors stay in stage 0). Every later stage is a single backup
//! against the state values of the stage below.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{names, DiscretizationGrid};
use crate::logic::{
    for_each_branch, reward, state_from_point, state_point_into, Advisory, LogicSpec, SpeedState,
};
use crate::policy::QTable;

/// Bumped whenever solver semantics change in a way that alters tables.
pub const SOLVER_VERSION: u32 = 1;

/// A finite-horizon MDP laid out as equal-size stages over a shared vertex
/// set. Vertex indices are local to a stage.
pub trait StagedMdp {
    fn stage_count(&self) -> usize;
    fn stage_len(&self) -> usize;
    fn action_count(&self) -> usize;
    fn discount(&self) -> f64;

    /// Extra in-place backups applied to stage 0.
    fn absorbing_sweeps(&self) -> usize {
        0
    }

    fn reward(&self, stage: usize, vertex: usize, action: usize) -> Result<f64>;

    /// Terminal vertices keep their immediate reward with no continuation.
    fn is_terminal(&self, stage: usize, vertex: usize) -> Result<bool>;

    /// Successor distribution into stage `stage.saturating_sub(1)`. Clears
    /// `out` first.
    fn successors(
        &self,
        stage: usize,
        vertex: usize,
        action: usize,
        out: &mut Vec<(usize, f64)>,
    ) -> Result<()>;

    /// Number of consecutive vertices backed up together by
    /// [`StagedMdp::backup_block`]. Must divide the stage length.
    fn block_len(&self) -> usize {
        1
    }

    /// Writes the backed-up action values of one block into `out`
    /// (`block_len * action_count` entries, vertex-major). `prev_v` holds
    /// the state values of the successor stage.
    fn backup_block(&self, stage: usize, block: usize, prev_v: &[f64], out: &mut [f64]) -> Result<()> {
        let n_act = self.action_count();
        let gamma = self.discount();
        let bl = self.block_len();
        let mut succ = Vec::new();
        for i in 0..bl {
            let v = block * bl + i;
            let terminal = self.is_terminal(stage, v)?;
            for a in 0..n_act {
                let r = self.reward(stage, v, a)?;
                let q = if terminal {
                    r
                } else {
                    self.successors(stage, v, a, &mut succ)?;
                    r + gamma * succ.iter().map(|&(j, p)| p * prev_v[j]).sum::<f64>()
                };
                out[i * n_act + a] = q;
            }
        }
        Ok(())
    }
}

/// Runs the block backups of one stage.
pub trait SweepExecutor {
    fn backup_stage<M: StagedMdp + Sync>(
        &self,
        mdp: &M,
        stage: usize,
        prev_v: &[f64],
        out: &mut [f64],
    ) -> Result<()>;
}

/// Single-threaded executor.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl SweepExecutor for Sequential {
    fn backup_stage<M: StagedMdp + Sync>(
        &self,
        mdp: &M,
        stage: usize,
        prev_v: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        let chunk = mdp.block_len() * mdp.action_count();
        for (b, slot) in out.chunks_mut(chunk).enumerate() {
            mdp.backup_block(stage, b, prev_v, slot)?;
        }
        Ok(())
    }
}

/// One backup pass over a stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sweep {
    /// Position in the overall plan, from 0.
    pub index: usize,
    pub total: usize,
    pub stage: usize,
    /// True for the in-place passes over stage 0.
    pub absorbing: bool,
}

/// Backup passes in execution order.
pub fn sweep_plan<M: StagedMdp + ?Sized>(mdp: &M) -> Vec<Sweep> {
    let h0 = mdp.absorbing_sweeps();
    let k = mdp.stage_count();
    let total = h0 + k.saturating_sub(1);
    let mut plan = Vec::with_capacity(total);
    for _ in 0..h0 {
        plan.push((0, true));
    }
    for s in 1..k {
        plan.push((s, false));
    }
    plan.into_iter()
        .enumerate()
        .map(|(index, (stage, absorbing))| Sweep {
            index,
            total,
            stage,
            absorbing,
        })
        .collect()
}

/// Max over actions for each vertex.
pub fn state_values(q: &[f64], action_count: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend(
        q.chunks_exact(action_count)
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
    );
}

fn validate<M: StagedMdp + ?Sized>(mdp: &M) -> Result<()> {
    if mdp.stage_count() == 0 || mdp.stage_len() == 0 || mdp.action_count() == 0 {
        return Err(Error::invalid("MDP must have at least one stage, vertex and action"));
    }
    let bl = mdp.block_len();
    if bl == 0 || mdp.stage_len() % bl != 0 {
        return Err(Error::invalid(format!(
            "block length {bl} does not divide stage length {}",
            mdp.stage_len()
        )));
    }
    let g = mdp.discount();
    if !(g > 0.0 && g <= 1.0) {
        return Err(Error::invalid(format!("discount {g} outside (0, 1]")));
    }
    Ok(())
}

fn check_finite(stage: usize, stage_len: usize, n_act: usize, q: &[f64]) -> Result<()> {
    match q.iter().position(|x| !x.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::SolverFailure {
            stage,
            vertex: stage * stage_len + i / n_act,
            detail: format!("non-finite action value {} for action {}", q[i], i % n_act),
        }),
    }
}

/// Full action-value array, stage-major then vertex then action.
pub fn solve_values_with<M, E>(mdp: &M, exec: &E, mut progress: impl FnMut(&Sweep)) -> Result<Vec<f64>>
where
    M: StagedMdp + Sync,
    E: SweepExecutor,
{
    validate(mdp)?;
    let n_act = mdp.action_count();
    let len = mdp.stage_len();
    let row = len * n_act;
    let mut q = vec![0.0; mdp.stage_count() * row];

    for v in 0..len {
        for a in 0..n_act {
            q[v * n_act + a] = mdp.reward(0, v, a)?;
        }
    }
    check_finite(0, len, n_act, &q[..row])?;

    let mut prev_v = Vec::with_capacity(len);
    for sweep in sweep_plan(mdp) {
        let s = sweep.stage;
        let src = s.saturating_sub(1);
        state_values(&q[src * row..(src + 1) * row], n_act, &mut prev_v);
        let out = &mut q[s * row..(s + 1) * row];
        exec.backup_stage(mdp, s, &prev_v, out)?;
        check_finite(s, len, n_act, out)?;
        progress(&sweep);
    }
    Ok(q)
}

pub fn solve_values<M: StagedMdp + Sync>(mdp: &M) -> Result<Vec<f64>> {
    solve_values_with(mdp, &Sequential, |_| {})
}

/// One Bellman backup of a single vertex against the action values
/// `prev_q` of the successor stage.
pub fn bellman_backup<M: StagedMdp + ?Sized>(
    mdp: &M,
    stage: usize,
    vertex: usize,
    prev_q: &[f64],
) -> Result<Vec<f64>> {
    validate(mdp)?;
    let n_act = mdp.action_count();
    if vertex >= mdp.stage_len() || stage >= mdp.stage_count() {
        return Err(Error::invalid(format!("no vertex {vertex} in stage {stage}")));
    }
    if prev_q.len() != mdp.stage_len() * n_act {
        return Err(Error::invalid("successor action values have the wrong length"));
    }
    let mut v = Vec::new();
    state_values(prev_q, n_act, &mut v);
    let bl = mdp.block_len();
    let mut out = vec![0.0; bl * n_act];
    mdp.backup_block(stage, vertex / bl, &v, &mut out)?;
    let i = vertex % bl;
    Ok(out[i * n_act..(i + 1) * n_act].to_vec())
}

/// The collision-avoidance MDP defined by a logic spec over a lattice.
///
/// Trailing relative-altitude and previous-action axes are handled as a
/// block: the horizontal successors of a geometry are computed once per
/// action and shared across the block.
#[derive(Debug, Clone)]
pub struct CasMdp<'a> {
    spec: &'a LogicSpec,
    grid: &'a DiscretizationGrid,
    actions: Vec<Advisory>,
    dt: f64,
    h_cuts: Option<Vec<f64>>,
    h_axis: Option<usize>,
    h_stride: usize,
    a_len: usize,
    a_stride: usize,
    block_len: usize,
}

impl<'a> CasMdp<'a> {
    pub fn new(spec: &'a LogicSpec, grid: &'a DiscretizationGrid) -> Result<Self> {
        spec.validate()?;
        let actions = spec.actions();
        let axes = grid.axes();
        let mut h_axis = None;
        let mut a_axis = None;
        for (i, a) in axes.iter().enumerate() {
            match a.name() {
                names::REL_ALTITUDE => h_axis = Some(i),
                names::PREV_ACTION => {
                    if a.len() != actions.len() {
                        return Err(Error::invalid(format!(
                            "previous-action axis has {} values, logic has {} actions",
                            a.len(),
                            actions.len()
                        )));
                    }
                    a_axis = Some(i)
                }
                _ => {}
            }
        }
        let n = axes.len();
        let trailing = |i: Option<usize>, allowed: &[usize]| i.is_none_or(|i| allowed.contains(&i));
        if !(trailing(a_axis, &[n - 1, n.wrapping_sub(2)]) && trailing(h_axis, &[n - 1, n.wrapping_sub(2)])) {
            return Err(Error::invalid(
                "relative-altitude and previous-action axes must be the innermost axes",
            ));
        }
        let strides = grid.strides();
        let h_stride = h_axis.map_or(0, |i| strides[i]);
        let a_stride = a_axis.map_or(0, |i| strides[i]);
        let a_len = a_axis.map_or(1, |i| axes[i].len());
        let h_len = h_axis.map_or(1, |i| axes[i].len());
        Ok(CasMdp {
            spec,
            grid,
            dt: spec.step_for(grid),
            h_cuts: h_axis.map(|i| axes[i].cuts().to_vec()),
            h_axis,
            h_stride,
            a_len,
            a_stride,
            block_len: h_len * a_len,
            actions,
        })
    }

    pub fn actions(&self) -> &[Advisory] {
        &self.actions
    }

    pub fn step(&self) -> f64 {
        self.dt
    }

    fn state(&self, stage: usize, vertex: usize) -> Result<SpeedState> {
        let p = self.grid.vertex_of(stage * self.grid.stage_len() + vertex)?;
        state_from_point(self.grid, &self.actions, &p)
    }

    fn next_tau(&self, stage: usize) -> f64 {
        self.grid
            .stage_axis()
            .map_or(0.0, |a| a.cuts()[stage.saturating_sub(1)])
    }

    /// Horizontal successors of `state` under action `ai`, with altitude and
    /// previous action pinned to their first cut. Local indices.
    fn horizontal_successors(
        &self,
        stage: usize,
        state: &SpeedState,
        ai: usize,
        pin_inner: bool,
        out: &mut Vec<(usize, f64)>,
    ) -> Result<()> {
        out.clear();
        let tau = self.next_tau(stage);
        let offset = stage.saturating_sub(1) * self.grid.stage_len();
        let mut point = Vec::with_capacity(self.grid.axes().len());
        let mut w = Vec::new();
        let mut err = None;
        let h0 = self.h_cuts.as_ref().map_or(0.0, |c| c[0]);
        for_each_branch(self.spec, state, self.actions[ai], self.dt, |next, p| {
            if err.is_some() {
                return;
            }
            let mut n = *next;
            n.tau = tau;
            if pin_inner {
                n.h = h0;
                n.a_prev = self.actions[0];
            }
            let r = state_point_into(self.grid, &self.actions, &n, &mut point)
                .and_then(|_| self.grid.interpolants_into(&point, &mut w));
            match r {
                Ok(()) => out.extend(w.iter().map(|&(i, wt)| (i - offset, p * wt))),
                Err(e) => err = Some(e),
            }
        });
        err.map_or(Ok(()), Err)
    }
}

impl StagedMdp for CasMdp<'_> {
    fn stage_count(&self) -> usize {
        self.grid.stage_count()
    }

    fn stage_len(&self) -> usize {
        self.grid.stage_len()
    }

    fn action_count(&self) -> usize {
        self.actions.len()
    }

    fn discount(&self) -> f64 {
        self.spec.weights.discount
    }

    fn absorbing_sweeps(&self) -> usize {
        self.spec.coaltitude_sweeps
    }

    fn reward(&self, stage: usize, vertex: usize, action: usize) -> Result<f64> {
        let s = self.state(stage, vertex)?;
        Ok(reward(self.spec.kind, &s, self.actions[action], &self.spec.weights))
    }

    fn is_terminal(&self, stage: usize, vertex: usize) -> Result<bool> {
        Ok(self.state(stage, vertex)?.in_nmac(self.spec.kind))
    }

    fn successors(
        &self,
        stage: usize,
        vertex: usize,
        action: usize,
        out: &mut Vec<(usize, f64)>,
    ) -> Result<()> {
        let s = self.state(stage, vertex)?;
        self.horizontal_successors(stage, &s, action, false, out)
    }

    fn block_len(&self) -> usize {
        self.block_len
    }

    fn backup_block(&self, stage: usize, block: usize, prev_v: &[f64], out: &mut [f64]) -> Result<()> {
        let n_act = self.actions.len();
        let gamma = self.spec.weights.discount;
        let first = block * self.block_len;
        let geometry = self.state(stage, first)?;
        let h_axis = self.h_axis.map(|i| &self.grid.axes()[i]);
        let h_len = self.h_cuts.as_ref().map_or(1, Vec::len);
        let mut succ = Vec::new();

        for (ai, &action) in self.actions.iter().enumerate() {
            self.horizontal_successors(stage, &geometry, ai, true, &mut succ)?;
            let climb = self.spec.controls(action).climb_rate * self.dt;
            for hi in 0..h_len {
                let h = self.h_cuts.as_ref().map_or(0.0, |c| c[hi]);
                let cont = match h_axis {
                    Some(axis) => {
                        let b = axis.bracket(h + climb)?;
                        let lo = b.lower * self.h_stride + ai * self.a_stride;
                        let up = b.upper * self.h_stride + ai * self.a_stride;
                        let t = b.upper_weight;
                        succ.iter()
                            .map(|&(j, p)| p * ((1.0 - t) * prev_v[j + lo] + t * prev_v[j + up]))
                            .sum::<f64>()
                    }
                    None => succ
                        .iter()
                        .map(|&(j, p)| p * prev_v[j + ai * self.a_stride])
                        .sum::<f64>(),
                };
                for aj in 0..self.a_len {
                    let local = hi * self.h_stride + aj * self.a_stride;
                    let mut s = geometry;
                    s.h = h;
                    s.a_prev = if self.a_stride > 0 || self.a_len > 1 {
                        self.actions[aj]
                    } else {
                        geometry.a_prev
                    };
                    let r = reward(self.spec.kind, &s, action, &self.spec.weights);
                    out[local * n_act + ai] = if s.in_nmac(self.spec.kind) {
                        r
                    } else {
                        r + gamma * cont
                    };
                }
            }
        }
        Ok(())
    }
}

/// Solves the logic over `grid` with a caller-supplied executor.
pub fn solve_with<E: SweepExecutor>(
    spec: &LogicSpec,
    grid: &DiscretizationGrid,
    exec: &E,
    progress: impl FnMut(&Sweep),
) -> Result<QTable> {
    let mdp = CasMdp::new(spec, grid)?;
    let q = solve_values_with(&mdp, exec, progress)?;
    QTable::from_f64(
        spec.kind,
        grid.clone(),
        spec.actions(),
        &q,
        spec.weights.fingerprint(),
        SOLVER_VERSION,
    )
}

/// Solves the logic over `grid` on the current thread.
pub fn solve(spec: &LogicSpec, grid: &DiscretizationGrid) -> Result<QTable> {
    solve_with(spec, grid, &Sequential, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{LogicKind, NoiseModel};

    /// Two-state chain: state 0 can pay 1 to reach state 1 (worth 10 at
    /// the horizon) or stay for free.
    struct Chain;

    impl StagedMdp for Chain {
        fn stage_count(&self) -> usize {
            3
        }
        fn stage_len(&self) -> usize {
            2
        }
        fn action_count(&self) -> usize {
            2
        }
        fn discount(&self) -> f64 {
            0.5
        }
        fn reward(&self, stage: usize, vertex: usize, action: usize) -> Result<f64> {
            Ok(match (stage, vertex, action) {
                (0, 1, _) => 10.0,
                (0, 0, _) => 0.0,
                (_, _, 1) => -1.0,
                _ => 0.0,
            })
        }
        fn is_terminal(&self, _: usize, _: usize) -> Result<bool> {
            Ok(false)
        }
        fn successors(&self, _: usize, v: usize, a: usize, out: &mut Vec<(usize, f64)>) -> Result<()> {
            out.clear();
            out.push((if a == 1 { 1 } else { v }, 1.0));
            Ok(())
        }
    }

    #[test]
    fn chain_values_by_hand() {
        let q = solve_values(&Chain).unwrap();
        // stage 0: immediate reward
        assert_eq!(&q[0..4], &[0.0, 0.0, 10.0, 10.0]);
        // stage 1: v0 = [0, 10]
        assert_eq!(&q[4..8], &[0.0, 4.0, 5.0, 4.0]);
        // stage 2: v1 = [4, 5]
        assert_eq!(&q[8..12], &[2.0, 1.5, 2.5, 1.5]);
    }

    #[test]
    fn plan_orders_absorbing_sweeps_first() {
        struct P;
        impl StagedMdp for P {
            fn stage_count(&self) -> usize {
                3
            }
            fn stage_len(&self) -> usize {
                1
            }
            fn action_count(&self) -> usize {
                1
            }
            fn discount(&self) -> f64 {
                1.0
            }
            fn absorbing_sweeps(&self) -> usize {
                2
            }
            fn reward(&self, _: usize, _: usize, _: usize) -> Result<f64> {
                Ok(-1.0)
            }
            fn is_terminal(&self, _: usize, _: usize) -> Result<bool> {
                Ok(false)
            }
            fn successors(&self, _: usize, _: usize, _: usize, out: &mut Vec<(usize, f64)>) -> Result<()> {
                out.clear();
                out.push((0, 1.0));
                Ok(())
            }
        }
        let plan = sweep_plan(&P);
        let stages: Vec<_> = plan.iter().map(|s| (s.stage, s.absorbing)).collect();
        assert_eq!(stages, [(0, true), (0, true), (1, false), (2, false)]);
        let q = solve_values(&P).unwrap();
        assert_eq!(q, [-3.0, -4.0, -5.0]);
    }

    #[test]
    fn nan_reward_reports_vertex() {
        struct Bad;
        impl StagedMdp for Bad {
            fn stage_count(&self) -> usize {
                2
            }
            fn stage_len(&self) -> usize {
                4
            }
            fn action_count(&self) -> usize {
                1
            }
            fn discount(&self) -> f64 {
                1.0
            }
            fn reward(&self, stage: usize, vertex: usize, _: usize) -> Result<f64> {
                Ok(if stage == 1 && vertex == 2 { f64::NAN } else { 0.0 })
            }
            fn is_terminal(&self, _: usize, _: usize) -> Result<bool> {
                Ok(false)
            }
            fn successors(&self, _: usize, v: usize, _: usize, out: &mut Vec<(usize, f64)>) -> Result<()> {
                out.clear();
                out.push((v, 1.0));
                Ok(())
            }
        }
        match solve_values(&Bad) {
            Err(Error::SolverFailure { stage, vertex, .. }) => {
                assert_eq!((stage, vertex), (1, 6));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn block_backup_matches_per_vertex_successors() {
        let spec = LogicSpec {
            kind: LogicKind::Vertical,
            coaltitude_sweeps: 1,
            ..LogicSpec::default()
        };
        let grid = spec.grid(0.05).unwrap();
        let mdp = CasMdp::new(&spec, &grid).unwrap();
        assert_eq!(mdp.block_len(), 7 * 3);
        let n = mdp.stage_len();
        let prev_v: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 / 100.0).collect();
        let mut block = vec![0.0; mdp.block_len() * 3];
        let mut succ = Vec::new();
        for b in [0, 3, n / mdp.block_len() - 1] {
            mdp.backup_block(0, b, &prev_v, &mut block).unwrap();
            for i in 0..mdp.block_len() {
                let v = b * mdp.block_len() + i;
                for a in 0..3 {
                    let mut expect = mdp.reward(0, v, a).unwrap();
                    if !mdp.is_terminal(0, v).unwrap() {
                        mdp.successors(0, v, a, &mut succ).unwrap();
                        expect += succ.iter().map(|&(j, p)| p * prev_v[j]).sum::<f64>();
                    }
                    assert!((block[i * 3 + a] - expect).abs() < 1e-12, "v {v} a {a}");
                }
            }
        }
    }

    #[test]
    fn noiseless_overtake_never_alerts() {
        let spec = LogicSpec {
            noise: NoiseModel::zero(),
            coaltitude_sweeps: 2,
            ..LogicSpec::speed()
        };
        let grid = spec.grid(0.05).unwrap();
        let table = solve(&spec, &grid).unwrap();
        assert_eq!(table.actions()[0], Advisory::Coc);
        // Far away and diverging: nothing can happen within the horizon.
        let s = SpeedState::new(40_000.0, core::f64::consts::PI, core::f64::consts::PI, 200.0, 100.0, 100.0);
        assert_eq!(crate::policy::best_action(&table, &s).unwrap(), Advisory::Coc);
    }

    #[test]
    fn successor_probabilities_sum_to_one() {
        let spec = LogicSpec::speed();
        let grid = spec.grid(0.05).unwrap();
        let mdp = CasMdp::new(&spec, &grid).unwrap();
        let mut succ = Vec::new();
        for v in [0, 17, 401, mdp.stage_len() - 1] {
            for a in 0..4 {
                mdp.successors(5, v, a, &mut succ).unwrap();
                let total: f64 = succ.iter().map(|e| e.1).sum();
                assert!((total - 1.0).abs() < 1e-12);
                assert!(succ.iter().all(|&(j, _)| j < mdp.stage_len()));
            }
        }
    }
}
