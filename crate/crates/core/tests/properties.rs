use proptest::prelude::*;

use wavefirst::design::{
    field_subproblem, ring_objective, structure_subproblem, BoxLsqSettings, BoxSystem, DesignBox, FieldTerm,
};
use wavefirst::devices::CouplerSpec;
use wavefirst::fdfd::{mode_source, plane_wave_profile, simulate, Direction, Port};
use wavefirst::grid::{build_edge_map, Boundary, GridOperators, GridSpec, PmlParams};
use wavefirst::io::{DeviceKind, GridFile, RunConfig};
use wavefirst::linalg::{norm, sub, C64};
use wavefirst::metrics::{aligned_error, transmission_efficiency, Plane};
use wavefirst::physics::{assemble_b_full, assemble_d, physics_residual, residual_vector, FieldState, SourceSpec, Structure};

const P_LO: f64 = 1.0 / 12.25;

fn grid(nx: usize, ny: usize, absorbing: bool) -> GridSpec {
    let bx = if absorbing {
        Boundary::Absorbing(PmlParams::default())
    } else {
        Boundary::Periodic
    };
    GridSpec::new(nx, ny, 21.0, bx, Boundary::Periodic).unwrap()
}

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C64::new(a, b)), n)
}

fn p_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(P_LO..1.0, n)
}

fn interior_source(g: &GridSpec, j: Vec<C64>) -> SourceSpec {
    let mut src = SourceSpec::zero(g);
    for (e, v) in j.into_iter().enumerate() {
        let (i, jj) = g.coords(e % g.n_cells());
        if !g.cell_in_pml(i, jj) {
            src.j[e] = v;
        }
    }
    src
}

/// Single-sheet plane wave entering a periodic strip from the left.
fn plane_wave_setup(g: &GridSpec) -> SourceSpec {
    let h = plane_wave_profile(g, 1.0).unwrap();
    mode_source(g, &h, Port::new(12), Direction::Forward).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(24) })]

    #[test]
    fn residual_splits_into_b_p_minus_d(
        absorbing in any::<bool>(),
        x in complex_vec(24 * 24),
        p in p_vec(24 * 24),
        j in complex_vec(2 * 24 * 24),
    ) {
        let g = grid(24, 24, absorbing);
        let ops = GridOperators::new(&g).unwrap();
        let src = interior_source(&g, j);
        let x = FieldState::new(x);
        let s = Structure::frozen(p.clone()).unwrap();
        let r = residual_vector(&ops, &s, &x, &src).unwrap();
        let pc: Vec<C64> = p.iter().map(|v| C64::new(*v, 0.0)).collect();
        let bp = assemble_b_full(&ops, &x, &src).unwrap().apply(&pc).unwrap();
        let d = assemble_d(&g, &x).unwrap();
        let gap = norm(&sub(&r, &sub(&bp, &d)));
        prop_assert!(gap <= 1e-12 * (norm(&bp) + norm(&d)));
    }

    #[test]
    fn residual_is_affine_in_p(
        x in complex_vec(24 * 24),
        p1 in p_vec(24 * 24),
        p2 in p_vec(24 * 24),
        t in 0.0f64..1.0,
    ) {
        let g = grid(24, 24, true);
        let ops = GridOperators::new(&g).unwrap();
        let src = SourceSpec::zero(&g);
        let x = FieldState::new(x);
        let mix: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        let r = |p: &[f64]| residual_vector(&ops, &Structure::frozen(p.to_vec()).unwrap(), &x, &src).unwrap();
        let (r1, r2, rm) = (r(&p1), r(&p2), r(&mix));
        let lin: Vec<C64> = r1.iter().zip(&r2).map(|(a, b)| a * (1.0 - t) + b * t).collect();
        prop_assert!(norm(&sub(&rm, &lin)) <= 1e-12 * (norm(&r1) + norm(&r2)));
    }

    #[test]
    fn residual_norm_ignores_global_phase(
        x in complex_vec(24 * 24),
        p in p_vec(24 * 24),
        j in complex_vec(2 * 24 * 24),
        theta in 0.0f64..6.3,
    ) {
        let g = grid(24, 24, true);
        let ops = GridOperators::new(&g).unwrap();
        let src = interior_source(&g, j);
        let s = Structure::frozen(p).unwrap();
        let rot = C64::from_polar(1.0, theta);
        let a = physics_residual(&ops, &s, &FieldState::new(x.clone()), &src).unwrap();
        let xr: Vec<C64> = x.iter().map(|v| v * rot).collect();
        let b = physics_residual(&ops, &s, &FieldState::new(xr), &src.scaled(rot)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn edge_averages_stay_within_cell_range(absorbing in any::<bool>(), p in p_vec(24 * 24)) {
        let g = grid(24, 24, absorbing);
        let m = build_edge_map(&g).unwrap();
        let (lo, hi) = p.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
        for v in m.average(&p) {
            prop_assert!(v >= lo - 1e-15 && v <= hi + 1e-15);
        }
        for r in 0..m.operator().rows() {
            let s: C64 = m.operator().row(r).map(|(_, v)| v).sum();
            prop_assert!((s - 1.0).norm() < 1e-15);
        }
    }

    #[test]
    fn curl_pair_is_an_adjoint_pair(nx in 5usize..12, ny in 5usize..12, x in complex_vec(144), e in complex_vec(288)) {
        let g = GridSpec::new(nx, ny, 21.0, Boundary::Periodic, Boundary::Periodic).unwrap();
        let ops = GridOperators::new(&g).unwrap();
        let (x, e) = (&x[..g.n_cells()], &e[..g.n_edges()]);
        let lhs: C64 = ops.curls.ch.apply(x).unwrap().iter().zip(e).map(|(a, b)| a * b).sum();
        let rhs: C64 = ops.curls.ce.apply(e).unwrap().iter().zip(x).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn grid_file_round_trip_is_bit_exact(
        nx in 1usize..6,
        ny in 1usize..6,
        values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 50),
        complex in any::<bool>(),
    ) {
        let n = nx * ny;
        let f = if complex {
            let c = values[..2 * n].chunks(2).map(|w| C64::new(w[0], w[1])).collect();
            GridFile::complex(nx, ny, c).unwrap()
        } else {
            GridFile::real(nx, ny, values[..n].to_vec()).unwrap()
        };
        let back = GridFile::parse(&f.to_text(), "memory").unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn config_round_trip(iterations in 1usize..1000, wavelength in 12.0f64..40.0, phase in proptest::option::of(-3.0f64..3.0)) {
        let mut cfg = RunConfig::for_kind(DeviceKind::Coupler);
        cfg.iterations = iterations;
        cfg.coupler = Some(CouplerSpec { wavelength, output_phase: phase, ..CouplerSpec::default() });
        let text = cfg.to_toml().unwrap();
        prop_assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn aligned_error_ignores_phase(x in complex_vec(20), t in complex_vec(20), theta in 0.0f64..6.3) {
        prop_assume!(norm(&t) > 1e-3);
        let rot: Vec<C64> = x.iter().map(|v| v * C64::from_polar(1.0, theta)).collect();
        let a = aligned_error(&x, &t).unwrap();
        let b = aligned_error(&rot, &t).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(8) })]

    #[test]
    fn efficiency_ignores_source_scale(
        bumps in prop::collection::vec(1.0f64..12.25, 6 * 24),
        re in -3.0f64..3.0,
        im in 0.1f64..3.0,
    ) {
        let g = grid(50, 24, true);
        let ops = GridOperators::new(&g).unwrap();
        let mut eps = vec![1.0; g.n_cells()];
        for (k, e) in bumps.iter().enumerate() {
            eps[g.idx(22 + k / 24, k % 24)] = *e;
        }
        let s = Structure::from_eps(&eps).unwrap();
        let src = plane_wave_setup(&g);
        let h = plane_wave_profile(&g, 1.0).unwrap();
        let eff = |src: &SourceSpec| {
            let (x, _) = simulate(&ops, &s, src).unwrap();
            transmission_efficiency(&g, &x, &h, Plane::new(16), &h, Plane::new(34)).unwrap().efficiency
        };
        let (a, b) = (eff(&src), eff(&src.scaled(C64::new(re, im))));
        prop_assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn structure_step_respects_bounds_and_frozen_cells(
        x in complex_vec(40 * 24),
        p in p_vec(40 * 24),
        mask in prop::collection::vec(any::<bool>(), 12 * 24),
    ) {
        let g = grid(40, 24, true);
        let ops = GridOperators::new(&g).unwrap();
        let b = DesignBox::new(14, 0, 12, 24);
        let mut vary = vec![false; g.n_cells()];
        for (k, m) in mask.iter().enumerate() {
            vary[g.idx(14 + k / 24, k % 24)] = *m;
        }
        let s = Structure::new(p, P_LO, 1.0, vary).unwrap();
        let obj = ring_objective(&g, b, &x, SourceSpec::zero(&g)).unwrap();
        let sys = BoxSystem::new(&obj);
        let field = FieldState::new(x);
        let term = FieldTerm { ops: &ops, objective: &obj, system: &sys, field: &field };
        let (next, rep) = structure_subproblem(&[term], &s, &BoxLsqSettings::default()).unwrap();
        for k in 0..g.n_cells() {
            prop_assert!(next.p[k] >= P_LO && next.p[k] <= 1.0);
            if !s.vary_mask[k] {
                prop_assert_eq!(next.p[k].to_bits(), s.p[k].to_bits());
            }
        }
        prop_assert!(rep.residual_after <= rep.residual_before * (1.0 + 1e-12));
    }

    #[test]
    fn field_step_keeps_pins_exact(x in complex_vec(40 * 24), p in p_vec(40 * 24)) {
        let g = grid(40, 24, true);
        let ops = GridOperators::new(&g).unwrap();
        let b = DesignBox::new(14, 0, 12, 24);
        let obj = ring_objective(&g, b, &x, SourceSpec::zero(&g)).unwrap();
        let s = Structure::frozen(p).unwrap();
        let (field, _) = field_subproblem(&ops, &s, &obj).unwrap();
        for (&k, v) in obj.pinned_indices.iter().zip(&obj.pinned_values) {
            prop_assert_eq!(field.x[k], *v);
        }
        for k in 0..g.n_cells() {
            let (i, j) = g.coords(k);
            if !b.contains(i, j) {
                prop_assert_eq!(field.x[k], C64::default());
            }
        }
    }
}
