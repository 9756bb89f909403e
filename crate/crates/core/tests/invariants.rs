use std::collections::BTreeMap;
use std::f64::consts::PI;

use proptest::prelude::*;
use speedcas_core::encounters::gen_hovering;
use speedcas_core::grid::{names, Axis, AxisKind, DiscretizationGrid, Unit};
use speedcas_core::logic::{
    state_from_point, transitions, Advisory, DimSet, Dimension, LogicKind, LogicSpec, SpeedState,
};
use speedcas_core::metrics::{
    nmac_heading_histogram, response_curve, response_subset_probs, risk_ratio, unit_sweep,
    weighted_system_pnmac,
};
use speedcas_core::policy::{best_action, blend, qmdp_action, QTable};
use speedcas_core::simulator::{CpaObserved, SimResult};
use speedcas_core::solver::{solve_values, CasMdp};

fn lattice() -> DiscretizationGrid {
    DiscretizationGrid::new(vec![
        Axis::uniform(names::TAU, Unit::Seconds, AxisKind::Stage, 0.0, 20.0, 3).unwrap(),
        Axis::uniform("x", Unit::Feet, AxisKind::Continuous, 0.0, 1000.0, 5).unwrap(),
        Axis::uniform("a", Unit::Radians, AxisKind::Periodic, -PI, PI, 7).unwrap(),
        Axis::new("c", Unit::None, AxisKind::Categorical, vec![0.0, 1.0, 2.0]).unwrap(),
    ])
    .unwrap()
}

fn toy_table(values: Vec<f32>) -> QTable {
    let grid = DiscretizationGrid::new(vec![
        Axis::uniform(names::TAU, Unit::Seconds, AxisKind::Stage, 0.0, 10.0, 2).unwrap(),
        Axis::uniform(names::RANGE, Unit::Feet, AxisKind::Continuous, 0.0, 1000.0, 3).unwrap(),
    ])
    .unwrap();
    QTable::new(LogicKind::Speed, grid, LogicKind::Speed.actions(true), values, 0, 1).unwrap()
}

fn result(id: u64, nmac: bool) -> SimResult {
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
        alerted: false,
        first_alert_time: None,
        first_alert_range: None,
        timeline: Vec::new(),
        responded: None,
    }
}

fn subset_pnmac() -> Vec<(DimSet, f64)> {
    let s = DimSet::single;
    vec![
        (DimSet::EMPTY, 3.01e-3),
        (s(Dimension::Horizontal), 8.08e-5),
        (s(Dimension::Vertical), 2.14e-5),
        (s(Dimension::Speed), 1.32e-3),
        (s(Dimension::Horizontal).with(Dimension::Speed), 4.33e-5),
        (s(Dimension::Vertical).with(Dimension::Speed), 1.50e-5),
        (s(Dimension::Horizontal).with(Dimension::Vertical), 1.68e-5),
        (DimSet::from_iter(Dimension::ALL), 1.41e-5),
    ]
}

proptest! {
    #[test]
    fn interpolation_is_exact_at_vertices(v in 0usize..315) {
        let g = lattice();
        let p = g.vertex_of(v).unwrap();
        let m = g.multi_index(v).unwrap();
        // the last periodic cut aliases the first
        let want = if m[2] == 6 { v - 6 * g.strides()[2] } else { v };
        prop_assert_eq!(g.interpolants(&p).unwrap(), vec![(want, 1.0)]);
    }

    #[test]
    fn interpolants_partition_unity(t in 0.0f64..20.0, x in -200.0f64..1200.0, a in -10.0f64..10.0, c in 0usize..3) {
        let w = lattice().interpolants(&[t, x, a, c as f64]).unwrap();
        prop_assert!(w.iter().all(|e| e.1 >= 0.0));
        prop_assert!((w.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn periodic_axis_wraps(x in 0.0f64..1000.0, a in -PI..PI, k in -3i32..3) {
        let g = lattice();
        let base = g.interpolants(&[0.0, x, a, 1.0]).unwrap();
        let shifted = g.interpolants(&[0.0, x, a + 2.0 * PI * f64::from(k), 1.0]).unwrap();
        prop_assert_eq!(base.len(), shifted.len());
        for (p, q) in base.iter().zip(&shifted) {
            prop_assert_eq!(p.0, q.0);
            prop_assert!((p.1 - q.1).abs() < 1e-9);
        }
    }

    #[test]
    fn transitions_sum_to_one(v in 0usize..400, ai in 0usize..4) {
        let spec = LogicSpec::speed();
        let grid = spec.grid(0.04).unwrap();
        let v = grid.stage_len() + v * (grid.vertex_count() - grid.stage_len()) / 400;
        let s = state_from_point(&grid, &spec.actions(), &grid.vertex_of(v).unwrap()).unwrap();
        let t = transitions(&grid, &s, spec.actions()[ai], &spec, spec.step_for(&grid)).unwrap();
        prop_assert!(t.iter().all(|e| e.1 > 0.0));
        prop_assert!((t.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn argmax_ignores_shift_and_positive_scale(
        raw in prop::collection::vec(-64i32..64, 24),
        shift in -1000i32..1000,
        pow in -4i32..5,
        r in 0.0f64..1000.0,
        tau in 0.0f64..10.0,
        w in 0.0f64..1.0,
    ) {
        let base: Vec<f32> = raw.iter().map(|&x| x as f32).collect();
        let lam = 2f32.powi(pow);
        let moved: Vec<f32> = base.iter().map(|&x| (x + shift as f32) * lam).collect();
        let (q, m) = (toy_table(base), toy_table(moved));
        let s = SpeedState::new(r, 0.0, 0.0, 100.0, 100.0, tau);
        prop_assert_eq!(best_action(&q, &s).unwrap(), best_action(&m, &s).unwrap());
        let other = SpeedState::new(1000.0 - r, 0.0, 0.0, 100.0, 100.0, 10.0 - tau);
        let belief = [(s, w), (other, 1.0 - w)];
        if w > 0.0 && w < 1.0 {
            prop_assert_eq!(qmdp_action(&q, &belief).unwrap(), qmdp_action(&m, &belief).unwrap());
        }
    }

    #[test]
    fn blend_alert_is_or(s in 0usize..4, h in 0usize..3, v in 0usize..3) {
        let sa = LogicKind::Speed.actions(true)[s];
        let ha = LogicKind::Horizontal.actions(true)[h];
        let va = LogicKind::Vertical.actions(true)[v];
        let c = blend(&[(Dimension::Speed, sa), (Dimension::Horizontal, ha), (Dimension::Vertical, va)]).unwrap();
        prop_assert_eq!(c.is_alert(), sa != Advisory::Coc || ha != Advisory::Coc || va != Advisory::Coc);
    }

    #[test]
    fn subset_probabilities_sum_to_one(p in 0.0f64..=1.0, three in any::<bool>()) {
        let n = if three { 3 } else { 2 };
        let probs = response_subset_probs(p, n).unwrap();
        prop_assert_eq!(probs.len(), 1 << n);
        prop_assert!((probs.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn system_pnmac_is_linear(p in 0.0f64..=1.0, k in 0usize..8, delta in -1e-3f64..1e-3, c in 0.0f64..1.0) {
        let probs = response_subset_probs(p, 3).unwrap();
        let mut t = subset_pnmac();
        let before = weighted_system_pnmac(&t, &probs).unwrap();
        t[k].1 += delta;
        let after = weighted_system_pnmac(&t, &probs).unwrap();
        let pk = probs.iter().find(|e| e.0 == t[k].0).unwrap().1;
        prop_assert!((after - before - pk * delta).abs() < 1e-15);
        let flat: Vec<_> = t.iter().map(|e| (e.0, c)).collect();
        prop_assert!((weighted_system_pnmac(&flat, &probs).unwrap() - c).abs() < 1e-15);
    }

    #[test]
    fn risk_ratio_ignores_weight_scale(
        enc in prop::collection::vec((0.01f64..10.0, 0usize..5, 1usize..5), 1..20),
        scale in 1e-6f64..1e6,
    ) {
        let mut cas = Vec::new();
        let mut nocas = Vec::new();
        for (id, &(_, k, n)) in enc.iter().enumerate() {
            for rep in 0..n {
                cas.push(result(id as u64, rep < k.min(n)));
                nocas.push(result(id as u64, rep < n.min(k + 1)));
            }
        }
        let w: BTreeMap<u64, f64> = enc.iter().enumerate().map(|(i, e)| (i as u64, e.0)).collect();
        let ws: BTreeMap<u64, f64> = w.iter().map(|(&i, &x)| (i, x * scale)).collect();
        let a = risk_ratio(&cas, &nocas, &w).unwrap();
        let b = risk_ratio(&cas, &nocas, &ws).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        prop_assert_eq!(risk_ratio(&nocas, &nocas, &w).unwrap(), 1.0);
    }

    #[test]
    fn histogram_conserves_mass(mask in prop::collection::vec(any::<bool>(), 40), width in prop::sample::select(vec![1.0, 5.0, 10.0, 30.0, 90.0])) {
        let enc = gen_hovering(40, 11).unwrap();
        let r: Vec<_> = enc.iter().zip(&mask).map(|(e, &m)| result(e.id, m)).collect();
        let h = nmac_heading_histogram(&r, &enc, width).unwrap();
        prop_assert_eq!(h.total(), mask.iter().filter(|&&m| m).count() as u64);
    }
}

#[test]
fn response_curve_is_monotone_with_unit_endpoint() {
    let sweep = unit_sweep(0.005).unwrap();
    let curve = response_curve(&subset_pnmac(), &sweep).unwrap();
    for w in curve.windows(2) {
        assert!(w[1].with_speed >= w[0].with_speed - 1e-15);
        assert!(w[1].without_speed >= w[0].without_speed - 1e-15);
    }
    let last = curve.last().unwrap();
    assert_eq!((last.with_speed, last.without_speed), (1.0, 1.0));
    assert!(curve[0].with_speed < curve[0].without_speed);
}

#[test]
fn action_values_respect_horizon_bound() {
    let spec = LogicSpec {
        coaltitude_sweeps: 3,
        ..LogicSpec::speed()
    };
    let grid = spec.grid(0.04).unwrap();
    let mdp = CasMdp::new(&spec, &grid).unwrap();
    let q = solve_values(&mdp).unwrap();
    let backups = (spec.coaltitude_sweeps + grid.stage_count()) as f64;
    let floor = -spec.weights.nmac_penalty - backups * spec.weights.max_abs();
    assert!(q.iter().all(|&x| x <= 0.0 && x >= floor - 1e-12));
}

#[test]
fn larger_nmac_penalty_never_lowers_collision_aversion() {
    let base = LogicSpec {
        coaltitude_sweeps: 2,
        ..LogicSpec::speed()
    };
    let mut harsh = base.clone();
    harsh.weights.nmac_penalty *= 2.0;
    let grid = base.grid(0.04).unwrap();
    let a = solve_values(&CasMdp::new(&base, &grid).unwrap()).unwrap();
    let b = solve_values(&CasMdp::new(&harsh, &grid).unwrap()).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| y <= &(x + 1e-12)));
}
