use std::sync::Arc;

use vmlimit_core::diagnostics::{energy_drift, mass_drift};
use vmlimit_core::harness::{run_simulation, RunConfig, RunPlan};
use vmlimit_core::initial_data::{build_initial_data, species_perturbed_mass};
use vmlimit_core::vlasov::{trace_characteristic, UniformFields};
use vmlimit_core::{FieldState, LightSpeed, PhaseSpaceGrid, Stepper, NGHOST};

fn small(c: LightSpeed) -> RunConfig {
    let mut cfg = RunConfig::baseline(c);
    cfg.nx = 48;
    cfg.np1 = 24;
    cfg.np2 = 24;
    cfg.p_margin = Some(1.0);
    cfg.t_final = 0.3;
    cfg.dt_cap = 0.025;
    cfg
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[test]
fn grid_solution_follows_traced_characteristics() {
    let c = LightSpeed::Finite(8.0);
    let mut cfg = small(c);
    cfg.nx = 96;
    cfg.np1 = 48;
    cfg.np2 = 48;
    let plan = RunPlan::new(&cfg).unwrap();
    let (stepper, state) = Stepper::from_initial(&plan.data, c).unwrap();
    let grid = stepper.grid;
    let uniform = UniformFields { e1: 0.3, e2: -0.1, b: 0.2, span: (0.0, cfg.t_final) };
    let n = grid.x.n;
    let fields = FieldState::new(vec![uniform.e1; n], vec![uniform.e2; n], vec![uniform.b; n]);

    let mut f = state.f.clone();
    let dt = plan.dt;
    for _ in 0..plan.steps {
        stepper.advect_x(&mut f, 0.5 * dt).unwrap();
        stepper.kick_p(&mut f, dt, &fields).unwrap();
        stepper.advect_x(&mut f, 0.5 * dt).unwrap();
    }

    let peak = plan.data.f0.iter().map(|v| max_abs(v)).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for (a, sp) in stepper.species.iter().enumerate() {
        for ix in (0..n).filter(|&i| grid.x.node(i).abs() <= 3.0) {
            for k1 in 0..grid.p1.n {
                for k2 in 0..grid.p2.n {
                    let p = grid.momentum(k1, k2);
                    let tr = trace_characteristic((cfg.t_final, grid.x.node(ix), p), 0.0, 40, a, sp, c, &uniform);
                    assert!(!tr.truncated);
                    let foot = tr.end();
                    let exact = plan.spec.f0(a, foot.x, foot.p);
                    worst = worst.max((f.values[a][grid.index(ix, k1, k2)] - exact).abs());
                }
            }
        }
    }
    assert!(worst < 2e-2 * peak, "worst {worst:e} against peak {peak:e}");
}

#[test]
fn limit_preserves_transverse_factorization() {
    let mut cfg = small(LightSpeed::Infinite);
    cfg.profile = "factorized".into();
    for s in cfg.species.values_mut() {
        s.drift_pert = 0.0;
    }
    let out = run_simulation(&cfg).unwrap();
    let g = out.plan.grid;
    let mid = g.p2.n / 2;
    let mut worst = 0.0f64;
    let peak = out.state.f.values.iter().map(|v| max_abs(v)).fold(0.0, f64::max);
    for (a, f) in out.state.f.values.iter().enumerate() {
        let bg = &out.state.f.background.tables[a];
        for ix in 0..g.x.n {
            for k1 in 0..g.p1.n {
                let anchor = f[g.index(ix, k1, mid)];
                let anchor_bg = bg[k1 * g.p2.n + mid];
                if anchor_bg == 0.0 {
                    continue;
                }
                for k2 in 0..g.p2.n {
                    let scale = bg[k1 * g.p2.n + k2] / anchor_bg;
                    worst = worst.max((f[g.index(ix, k1, k2)] - anchor * scale).abs());
                }
            }
        }
    }
    assert!(worst <= 1e-10 * peak, "factorization broken by {worst:e}");
}

#[test]
fn mirrored_transverse_momentum_mirrors_the_solution() {
    let cfg = small(LightSpeed::Finite(8.0));
    let mut mirrored = cfg.clone();
    for s in mirrored.species.values_mut() {
        s.drift_pert = -s.drift_pert;
    }
    let a = run_simulation(&cfg).unwrap();
    let b = run_simulation(&mirrored).unwrap();
    let g = a.plan.grid;
    let peak = a.state.f.values.iter().map(|v| max_abs(v)).fold(0.0, f64::max);
    for (fa, fb) in a.state.f.values.iter().zip(&b.state.f.values) {
        for ix in 0..g.x.n {
            for k1 in 0..g.p1.n {
                for k2 in 0..g.p2.n {
                    let d = (fa[g.index(ix, k1, k2)] - fb[g.index(ix, k1, g.p2.n - 1 - k2)]).abs();
                    assert!(d <= 1e-12 * peak, "f mismatch {d:e}");
                }
            }
        }
    }
    let scale = max_abs(&a.state.fields.e2).max(max_abs(&a.state.fields.b));
    assert!(scale > 0.0);
    for i in 0..g.x.n {
        assert!((a.state.fields.e1[i] - b.state.fields.e1[i]).abs() <= 1e-12 * max_abs(&a.state.fields.e1));
        assert!((a.state.fields.e2[i] + b.state.fields.e2[i]).abs() <= 1e-12 * scale);
        assert!((a.state.fields.b[i] + b.state.fields.b[i]).abs() <= 1e-12 * scale);
    }
}

#[test]
fn species_order_does_not_matter() {
    let cfg = small(LightSpeed::Finite(8.0));
    let mut swapped = cfg.clone();
    let first = swapped.species.remove("1").unwrap();
    let second = swapped.species.remove("2").unwrap();
    swapped.species.insert("1".into(), second);
    swapped.species.insert("2".into(), first);
    let a = run_simulation(&cfg).unwrap();
    let b = run_simulation(&swapped).unwrap();
    let peak = a.state.f.values.iter().map(|v| max_abs(v)).fold(0.0, f64::max);
    for (fa, fb) in a.state.f.values.iter().zip(b.state.f.values.iter().rev()) {
        let d = fa.iter().zip(fb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d <= 1e-12 * peak, "{d:e}");
    }
    let d = a.state.fields.e1.iter().zip(&b.state.fields.e1).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(d <= 1e-12 * max_abs(&a.state.fields.e1));
}

#[test]
fn outflow_closes_the_mass_budget() {
    let mut cfg = small(LightSpeed::Finite(8.0));
    for s in cfg.species.values_mut() {
        s.charge = 0.0;
    }
    let spec = cfg.profile_spec().unwrap();
    let grid = PhaseSpaceGrid::new(40, 24, 24, 1.6, 3.0, 3.0).unwrap();
    let data = build_initial_data(&spec, &grid).unwrap();
    let (stepper, mut state) = Stepper::from_initial(&data, cfg.c).unwrap();
    let budget = |state: &vmlimit_core::SimState, a: usize| {
        species_perturbed_mass(&state.f.values[a], &state.f.background.tables[a], &grid)
            + state.f.outflow[a][0]
            + state.f.outflow[a][1]
    };
    let initial: Vec<f64> = (0..2).map(|a| budget(&state, a)).collect();
    let dt = 0.4 * grid.dx() / 3.0;
    for _ in 0..400 {
        stepper.step(&mut state, dt).unwrap();
    }
    for a in 0..2 {
        let left = state.f.outflow[a];
        assert!(left[0] > 0.05 * initial[a].abs() && left[1] > 0.05 * initial[a].abs(), "outflow {left:?}");
        let drift = (budget(&state, a) - initial[a]).abs() / initial[a].abs();
        assert!(drift < 1e-12, "species {a}: budget drift {drift:e}");
    }
    for a in 0..2 {
        let plane = grid.plane_len();
        for ix in (0..NGHOST).chain(grid.x.n - NGHOST..grid.x.n) {
            assert_eq!(&state.f.values[a][ix * plane..(ix + 1) * plane], &state.f.background.tables[a][..]);
        }
    }
    assert!(Arc::strong_count(&state.f.background) >= 1);
}

#[test]
fn repeated_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(LightSpeed::Finite(8.0));
    let mut read = |name: &str| {
        cfg.out_dir = Some(dir.path().join(name));
        run_simulation(&cfg).unwrap();
        let d = dir.path().join(name);
        (std::fs::read(d.join("series.csv")).unwrap(), std::fs::read(d.join("history.json")).unwrap())
    };
    let a = read("a");
    let b = read("b");
    assert!(a.0 == b.0, "series files differ");
    assert!(a.1 == b.1, "history files differ");
}

#[test]
fn conserved_quantities_hold_on_a_coarse_run() {
    let out = run_simulation(&small(LightSpeed::Finite(8.0))).unwrap();
    for d in mass_drift(&out.history) {
        assert!(d < 1e-10, "mass drift {d:e}");
    }
    let e = energy_drift(&out.history);
    assert!(e < 1e-2, "energy drift {e:e}");
}
