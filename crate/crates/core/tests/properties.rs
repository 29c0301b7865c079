//! Property tests against independent oracles: finite differences for the
//! Jacobians, the forward pass for the MILP encoding, and exhaustive
//! enumeration for branch and bound.

use proptest::prelude::*;
use pwlgrid_core::case::{Branch, Bus, BusType, CostModel, GenCost, Generator, RawCase};
use pwlgrid_core::encode::{encode_on_box, interval_bounds, BoundBox};
use pwlgrid_core::grid::Network;
use pwlgrid_core::jacobian::{injection_jacobian, line_flow_jacobian, FlowDirection, LinearPfModel};
use pwlgrid_core::linalg::Matrix;
use pwlgrid_core::lp::{solve_lp, solve_milp, DualSimplex, LpStatus, MilpConfig, MilpModel, MilpStatus, Sense, VarTag};
use pwlgrid_core::nn::CompactPwlModel;
use pwlgrid_core::NoClock;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bus(id: u32, kind: BusType, pd: f64, qd: f64, bs: f64) -> Bus {
    Bus {
        id,
        kind,
        pd,
        qd,
        gs: 0.0,
        bs,
        area: 1,
        vm: 1.0,
        va: 0.0,
        base_kv: 138.0,
        zone: 1,
        vmax: 1.06,
        vmin: 0.94,
    }
}

fn branch(from: u32, to: u32, r: f64, x: f64, b: f64, tap: f64) -> Branch {
    Branch {
        from,
        to,
        r,
        x,
        b,
        rate_a: 2.0,
        rate_b: 2.0,
        rate_c: 2.0,
        tap,
        shift: 0.0,
        in_service: true,
        ang_min: -0.5,
        ang_max: 0.5,
    }
}

fn generator(bus: u32) -> Generator {
    Generator {
        bus,
        pg: 0.0,
        qg: 0.0,
        qmax: 1.0,
        qmin: -1.0,
        vg: 1.0,
        mbase: 100.0,
        in_service: true,
        pmax: 2.0,
        pmin: 0.0,
    }
}

/// Meshed four-bus case with line charging, a shunt and an off-nominal tap.
fn four_bus() -> RawCase {
    let cost = GenCost {
        model: CostModel::Polynomial,
        startup: 0.0,
        shutdown: 0.0,
        coeffs: vec![0.01, 20.0, 0.0],
    };
    RawCase {
        name: "four_bus".into(),
        base_mva: 100.0,
        buses: vec![
            bus(1, BusType::Ref, 0.0, 0.0, 0.0),
            bus(2, BusType::Pv, 0.2, 0.1, 0.0),
            bus(3, BusType::Pq, 0.9, 0.3, 0.19),
            bus(4, BusType::Pq, 0.5, 0.2, 0.0),
        ],
        branches: vec![
            branch(1, 2, 0.02, 0.06, 0.05, 0.0),
            branch(1, 3, 0.05, 0.19, 0.04, 0.0),
            branch(2, 3, 0.06, 0.17, 0.03, 0.0),
            branch(2, 4, 0.0, 0.25, 0.0, 0.978),
            branch(3, 4, 0.01, 0.04, 0.01, 0.0),
        ],
        generators: vec![generator(1), generator(2)],
        gencosts: vec![cost.clone(), cost],
    }
}

fn operating_point() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(0.94f64..1.06, 4),
        prop::collection::vec(-0.3f64..0.3, 4),
    )
        .prop_map(|(v, mut th)| {
            th[0] = 0.0;
            (v, th)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn injection_and_flow_jacobians_match_central_differences((v, th) in operating_point()) {
        let net = Network::build(&four_bus()).unwrap();
        let (n, m) = (net.n, net.m);
        let ji = injection_jacobian(&net, &v, &th).unwrap();
        let jf = line_flow_jacobian(&net, &v, &th, FlowDirection::FromTo).unwrap();
        let jt = line_flow_jacobian(&net, &v, &th, FlowDirection::ToFrom).unwrap();
        let outputs = |v: &[f64], th: &[f64]| {
            let op = net.eval_power_flow(v, th).unwrap();
            [op.p_inj, op.q_inj, op.p_ft, op.q_ft, op.p_tf, op.q_tf].concat()
        };
        let h = 1e-6;
        for k in 0..2 * n {
            let (mut vp, mut tp, mut vm, mut tm) = (v.clone(), th.clone(), v.clone(), th.clone());
            if k < n {
                vp[k] += h;
                vm[k] -= h;
            } else {
                tp[k - n] += h;
                tm[k - n] -= h;
            }
            let (fp, fm) = (outputs(&vp, &tp), outputs(&vm, &tm));
            for r in 0..2 * n + 4 * m {
                let a = if r < 2 * n {
                    ji[(r, k)]
                } else if r < 2 * n + 2 * m {
                    jf[(r - 2 * n, k)]
                } else {
                    jt[(r - 2 * n - 2 * m, k)]
                };
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                prop_assert!((fd - a).abs() <= 1e-5 * (1.0 + a.abs()), "row {r} col {k}: fd {fd} analytic {a}");
            }
        }
    }

    #[test]
    fn encoding_with_fixed_inputs_reproduces_the_forward_pass(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (nin, nout, rho) = (3, 6, 4);
        let linear = LinearPfModel {
            jstar: Matrix::from_fn(nout, nin, |_, _| rng.random_range(-1.0..1.0)),
            rstar: (0..nout).map(|_| rng.random_range(-1.0..1.0)).collect(),
            x0: vec![0.0; nin],
            net_id: "toy".into(),
        };
        let w1 = Matrix::from_fn(nin, rho, |_, _| rng.random_range(-1.0..1.0));
        let b = (0..rho).map(|_| rng.random_range(-0.5..0.5)).collect();
        let mut model = CompactPwlModel::from_linear(linear, w1, b).unwrap();
        model.w2 = Matrix::from_fn(nout, rho, |_, _| rng.random_range(-1.0..1.0));
        let bbox = BoundBox {
            n: 2,
            ref_bus: 0,
            x_lo: vec![-1.0; nin],
            x_hi: vec![1.0; nin],
            angle_rows: Vec::new(),
            y_lo: vec![f64::NEG_INFINITY; nout],
            y_hi: vec![f64::INFINITY; nout],
        };
        let bounds = interval_bounds(&model, &bbox).unwrap();
        let (mut milp, frag) = encode_on_box(&model, &bounds, &bbox).unwrap();
        let x: Vec<f64> = (0..nin).map(|_| rng.random_range(-1.0..1.0)).collect();
        for (&j, &xv) in frag.x.iter().zip(&x) {
            milp.vars[j].lower = xv;
            milp.vars[j].upper = xv;
        }
        let sol = solve_milp(&milp, &MilpConfig::exact(), &NoClock).unwrap();
        prop_assert_eq!(sol.status, MilpStatus::Optimal);
        let truth = model.predict(&x);
        for (r, &j) in frag.y.iter().enumerate() {
            prop_assert!((sol.x[j] - truth[r]).abs() <= 1e-7, "output {r}: {} vs {}", sol.x[j], truth[r]);
        }
    }

    #[test]
    fn branch_and_bound_matches_enumeration(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = MilpModel::new("random");
        let bins: Vec<usize> = (0..6).map(|i| m.add_binary(format!("b{i}"), VarTag::Untagged)).collect();
        let cont: Vec<usize> = (0..2).map(|i| m.add_continuous(format!("c{i}"), -2.0, 3.0, VarTag::Untagged)).collect();
        for &j in bins.iter().chain(&cont) {
            m.add_objective(j, rng.random_range(-4.0..4.0));
        }
        for r in 0..4 {
            let terms: Vec<(usize, f64)> = bins.iter().chain(&cont).map(|&j| (j, rng.random_range(-2.0..3.0))).collect();
            let sense = if r == 3 { Sense::Ge } else { Sense::Le };
            let rhs = if r == 3 { rng.random_range(-3.0..0.0) } else { rng.random_range(1.0..5.0) };
            m.add_constraint(format!("r{r}"), &terms, sense, rhs);
        }
        let mut best: Option<f64> = None;
        for mask in 0u32..64 {
            let mut fixed = m.relaxed();
            for (k, &j) in bins.iter().enumerate() {
                let v = f64::from((mask >> k) & 1);
                fixed.vars[j].lower = v;
                fixed.vars[j].upper = v;
            }
            let s = solve_lp(&fixed).unwrap();
            if s.status == LpStatus::Optimal {
                best = Some(best.map_or(s.objective, |b: f64| b.min(s.objective)));
            }
        }
        let sol = solve_milp(&m, &MilpConfig::exact(), &NoClock).unwrap();
        match best {
            Some(b) => {
                prop_assert_eq!(sol.status, MilpStatus::Optimal);
                prop_assert!((sol.objective - b).abs() <= 1e-6 * (1.0 + b.abs()));
            }
            None => prop_assert_eq!(sol.status, MilpStatus::Infeasible),
        }
    }

    #[test]
    fn warm_started_simplex_agrees_with_cold_solves(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = MilpModel::new("lp");
        let vars: Vec<usize> = (0..5).map(|i| m.add_continuous(format!("x{i}"), 0.0, 4.0, VarTag::Untagged)).collect();
        for &j in &vars {
            m.add_objective(j, rng.random_range(-3.0..3.0));
        }
        for r in 0..3 {
            let terms: Vec<(usize, f64)> = vars.iter().map(|&j| (j, rng.random_range(-1.0..2.0))).collect();
            m.add_constraint(format!("r{r}"), &terms, Sense::Le, rng.random_range(1.0..6.0));
        }
        let mut warm = DualSimplex::new(&m).unwrap();
        for _ in 0..5 {
            let j = vars[rng.random_range(0..vars.len())];
            let lo = rng.random_range(0.0..2.0);
            let hi = lo + rng.random_range(0.0..2.0);
            warm.set_bounds(j, lo, hi);
            m.vars[j].lower = lo;
            m.vars[j].upper = hi;
            let status = warm.solve().unwrap();
            let cold = solve_lp(&m).unwrap();
            prop_assert_eq!(status, cold.status);
            if status == LpStatus::Optimal {
                prop_assert!((warm.objective() - cold.objective).abs() <= 1e-8 * (1.0 + cold.objective.abs()));
            }
        }
    }
}
