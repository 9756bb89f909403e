//! Brute-force expectimax shared by the solver tests.

#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;

use speedcas_core::grid::{names, Axis, AxisKind, DiscretizationGrid, Unit};
use speedcas_core::logic::{reward, state_from_point, transitions, LogicSpec, SpeedState};
use speedcas_core::solver::{solve_values, CasMdp};

/// Finite-horizon expectimax by direct recursion over the full successor
/// distribution of each vertex.
struct Expectimax<'a> {
    spec: &'a LogicSpec,
    grid: &'a DiscretizationGrid,
    dt: f64,
    memo: HashMap<(usize, usize), f64>,
}

impl Expectimax<'_> {
    fn state(&self, v: usize) -> SpeedState {
        let p = self.grid.vertex_of(v).unwrap();
        state_from_point(self.grid, &self.spec.actions(), &p).unwrap()
    }

    /// Action values of global vertex `v` after `level` backups of its own
    /// stage (stage 0) or at the final level (higher stages).
    fn q(&mut self, v: usize, level: usize) -> Vec<f64> {
        let s = self.state(v);
        let actions = self.spec.actions();
        let stage = v / self.grid.stage_len();
        let base = |a| reward(self.spec.kind, &s, a, &self.spec.weights);
        if s.in_nmac(self.spec.kind) || (stage == 0 && level == 0) {
            return actions.iter().map(|&a| base(a)).collect();
        }
        let below = if stage == 0 { level - 1 } else { self.spec.coaltitude_sweeps };
        let mut out = Vec::new();
        for &a in &actions {
            let mut cont = 0.0;
            for (j, p) in transitions(self.grid, &s, a, self.spec, self.dt).unwrap() {
                assert_eq!(j / self.grid.stage_len(), stage.saturating_sub(1));
                cont += p * self.value(j, below);
            }
            out.push(base(a) + self.spec.weights.discount * cont);
        }
        out
    }

    fn value(&mut self, v: usize, level: usize) -> f64 {
        let stage = v / self.grid.stage_len();
        let key = (v, if stage == 0 { level } else { usize::MAX });
        if let Some(&x) = self.memo.get(&key) {
            return x;
        }
        let x = self.q(v, level).into_iter().fold(f64::NEG_INFINITY, f64::max);
        self.memo.insert(key, x);
        x
    }
}

/// Largest |Q_solver - Q_oracle| over every (vertex, action).
pub fn max_deviation(spec: &LogicSpec, grid: &DiscretizationGrid) -> f64 {
    assert!(grid.vertex_count() <= 10_000);
    let mdp = CasMdp::new(spec, grid).unwrap();
    let solved = solve_values(&mdp).unwrap();
    // some vertices must mix NMAC and safe futures
    assert!(solved.iter().any(|&x| x < -0.05 && x > -0.95));
    let n_act = spec.actions().len();
    let mut oracle = Expectimax {
        spec,
        grid,
        dt: spec.step_for(grid),
        memo: HashMap::new(),
    };
    let mut worst: f64 = 0.0;
    for v in 0..grid.vertex_count() {
        let q = oracle.q(v, spec.coaltitude_sweeps);
        for a in 0..n_act {
            worst = worst.max((q[a] - solved[v * n_act + a]).abs());
        }
    }
    worst
}

pub fn angle(n: usize) -> Axis {
    Axis::uniform("x", Unit::Radians, AxisKind::Periodic, -PI, PI, n).unwrap()
}

pub fn named(name: &str, a: Axis) -> Axis {
    Axis::new(name, a.unit(), a.kind(), a.cuts().to_vec()).unwrap()
}

pub fn small_speed_grid(stages: usize) -> DiscretizationGrid {
    let dt = 100.0 / 9.0;
    DiscretizationGrid::new(vec![
        Axis::new(names::TAU, Unit::Seconds, AxisKind::Stage, (0..stages).map(|i| i as f64 * dt).collect()).unwrap(),
        Axis::new(names::RANGE, Unit::Feet, AxisKind::Continuous, vec![499.0, 2500.0, 6000.0, 12000.0]).unwrap(),
        named(names::BEARING, angle(5)),
        named(names::REL_HEADING, angle(5)),
        Axis::new(names::OWN_SPEED, Unit::FeetPerSecond, AxisKind::Continuous, vec![50.0, 140.0, 237.0]).unwrap(),
        Axis::new(names::INT_SPEED, Unit::FeetPerSecond, AxisKind::Continuous, vec![0.0, 237.0]).unwrap(),
        Axis::new(names::PREV_ACTION, Unit::None, AxisKind::Categorical, vec![0.0, 1.0, 2.0, 3.0]).unwrap(),
    ])
    .unwrap()
}

