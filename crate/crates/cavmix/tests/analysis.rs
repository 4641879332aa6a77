mod common;

use cavmix::analysis::{
    bifurcation_report, cavity_volumes, det_error_norms, field_diff_norms, fit_order,
    infsup_constant, infsup_constant_dense, infsup_system, rate_table, BifurcationCriteria,
    BifurcationRow, ConvergenceRow,
};
use cavmix::continuation::Branch;
use cavmix::{LinearSolver, Problem};
use cavmix_core::mesh::Element;
use cavmix_core::{
    generate_mesh, DefectSpec, ElementKind, MaterialParams, Mesh, MeshParams, State, Tensor2,
};
use proptest::prelude::*;

fn single(rho: f64, h: f64) -> Problem {
    let d = [DefectSpec {
        center: [0.0, 0.0],
        rho,
        delta: 1.0,
    }];
    let m = generate_mesh(&d, &MeshParams::with_h(h), &MaterialParams::standard()).unwrap();
    Problem::new(m, MaterialParams::standard()).unwrap()
}

fn two_defects(h: f64) -> Problem {
    let d = [
        DefectSpec {
            center: [-0.2, 0.0],
            rho: 0.01,
            delta: 0.15,
        },
        DefectSpec {
            center: [0.2, 0.0],
            rho: 0.01,
            delta: 0.15,
        },
    ];
    let m = generate_mesh(&d, &MeshParams::with_h(h), &MaterialParams::standard()).unwrap();
    Problem::new(m, MaterialParams::standard()).unwrap()
}

fn radial(pb: &Problem, area: f64) -> State {
    let mut s = State::identity(&pb.mesh, &pb.dofs, 0.0);
    s.u = pb.dofs.interpolate(&pb.mesh, |x| {
        let r = x[0].hypot(x[1]);
        let f = (r * r + area).sqrt() / r;
        [f * x[0], f * x[1]]
    });
    s
}

fn discrete_area(pb: &Problem) -> f64 {
    pb.geometry
        .iter()
        .flat_map(|g| g.qps.iter())
        .map(|q| q.weight)
        .sum()
}

#[test]
fn identity_has_zero_det_error() {
    let pb = two_defects(0.06);
    let s = State::identity(&pb.mesh, &pb.dofs, 0.3);
    let (l1, l2) = det_error_norms(&pb, &s);
    assert!(l1 < 1e-13 && l2 < 1e-13, "{l1} {l2}");
    let v = cavity_volumes(&pb, &s);
    let exact = std::f64::consts::PI * 1e-4;
    assert!(v.iter().all(|x| (x / exact - 1.0).abs() < 1e-4), "{v:?}");
    assert!(
        (v[0] - v[1]).abs() <= 1e-13 * v[0],
        "mirror-symmetric mesh: {v:?}"
    );
}

#[test]
fn radial_map_det_error_decreases_under_refinement() {
    let mut last = (f64::INFINITY, f64::INFINITY);
    for h in [0.06, 0.04, 0.03] {
        let pb = single(0.01, h);
        let (l1, l2) = det_error_norms(&pb, &radial(&pb, 0.05));
        assert!(
            l1 < last.0 && l2 < last.1,
            "h {h}: {l1} {l2} after {last:?}"
        );
        last = (l1, l2);
    }
}

#[test]
fn radial_map_cavity_volume() {
    let pb = single(0.01, 0.03);
    let area = 0.04;
    let v = cavity_volumes(&pb, &radial(&pb, area))[0];
    let exact = std::f64::consts::PI * (1e-4 + area);
    assert!((v / exact - 1.0).abs() < 1e-4, "{v} vs {exact}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn norms_and_energy_are_rotation_invariant(t in -3.1f64..3.1, seed in 0u64..1000) {
        let pb = common::two_element_problem().unwrap();
        let s = common::random_state(&pb, seed, 0.02);
        let q = Tensor2::new(t.cos(), -t.sin(), t.sin(), t.cos());
        let mut r = s.clone();
        for a in 0..r.u.len() / 2 {
            let y = q.apply([s.u[2 * a], s.u[2 * a + 1]]);
            r.u[2 * a] = y[0];
            r.u[2 * a + 1] = y[1];
        }
        let (a1, a2) = det_error_norms(&pb, &s);
        let (b1, b2) = det_error_norms(&pb, &r);
        prop_assert!((a1 - b1).abs() <= 1e-10 * a1.max(1e-3) && (a2 - b2).abs() <= 1e-10 * a2.max(1e-3));
        let (ea, eb) = (pb.energy(&s).unwrap(), pb.energy(&r).unwrap());
        prop_assert!((ea - eb).abs() <= 1e-10 * ea.abs());
        let (va, vb) = (cavity_volumes(&pb, &s)[0], cavity_volumes(&pb, &r)[0]);
        prop_assert!((va - vb).abs() <= 1e-10 * va.abs());
    }
}

#[test]
fn field_difference_of_state_with_itself_is_zero() {
    let pb = two_defects(0.06);
    let s = common::random_state(&pb, 7, 1e-3);
    let (w, p) = field_diff_norms(&pb, &s, &pb, &s).unwrap();
    assert!(w < 1e-12 && p < 1e-12, "{w} {p}");
}

/// Affine deformations and constant pressures are exactly representable on
/// every mesh, so the cross-mesh difference has a closed form over the
/// integration mesh: `|A − A'| |Ω_h|^{1/s}` and `|c − c'| |Ω_h|^{1/2}`.
#[test]
fn cross_mesh_difference_matches_closed_form() {
    let (a, b) = (single(0.01, 0.04), single(0.01, 0.06));
    let (ma, mb) = (
        Tensor2::new(1.2, 0.3, -0.1, 0.9),
        Tensor2::new(1.0, 0.1, 0.2, 1.1),
    );
    let state = |pb: &Problem, m: Tensor2, shift: [f64; 2], c: f64| {
        let mut s = State::identity(&pb.mesh, &pb.dofs, c);
        s.u = pb.dofs.interpolate(&pb.mesh, |x| {
            let y = m.apply(x);
            [y[0] + shift[0], y[1] + shift[1]]
        });
        s
    };
    let sa = state(&a, ma, [0.1, -0.2], 0.7);
    let sb = state(&b, mb, [0.0, 0.3], -0.4);
    let (w, p) = field_diff_norms(&a, &sa, &b, &sb).unwrap();
    let area = discrete_area(&a);
    let s = a.material.s;
    let w_exact = (ma - mb).norm() * area.powf(1.0 / s);
    let p_exact = 1.1 * area.sqrt();
    assert!((w - w_exact).abs() <= 1e-8 * w_exact, "{w} vs {w_exact}");
    assert!((p - p_exact).abs() <= 1e-8 * p_exact, "{p} vs {p_exact}");
}

/// Same mesh, two interpolated smooth fields: the norm equals the direct
/// quadrature of the interpolant difference.
#[test]
fn same_mesh_difference_matches_direct_quadrature() {
    let pb = single(0.01, 0.06);
    let f = |x: [f64; 2]| [x[0] + 0.1 * (3.0 * x[1]).sin(), x[1] + 0.05 * x[0] * x[0]];
    let mut sa = State::identity(&pb.mesh, &pb.dofs, 0.0);
    sa.u = pb.dofs.interpolate(&pb.mesh, f);
    let sb = State::identity(&pb.mesh, &pb.dofs, 0.0);
    let (w, _) = field_diff_norms(&pb, &sa, &pb, &sb).unwrap();
    let s = pb.material.s;
    let mut direct = 0.0;
    for e in 0..pb.n_elements() {
        let (la, lb) = (pb.local(e, &sa), pb.local(e, &sb));
        for q in &pb.geometry[e].qps {
            direct += q.weight * (la.gradient(q) - lb.gradient(q)).norm().powf(s);
        }
    }
    let direct = direct.powf(1.0 / s);
    assert!((w - direct).abs() <= 1e-8 * direct, "{w} vs {direct}");
}

fn square_patch(n: usize, triangles: bool) -> Mesh {
    let k = 2 * n + 1;
    let h = 1.0 / (2 * n) as f64;
    let nodes: Vec<[f64; 2]> = (0..k * k)
        .map(|i| [(i % k) as f64 * h, (i / k) as f64 * h])
        .collect();
    let id = |i: usize, j: usize| j * k + i;
    let mut elements = Vec::new();
    for cj in 0..n {
        for ci in 0..n {
            let (i, j) = (2 * ci, 2 * cj);
            if triangles {
                let t = |a: [usize; 6]| Element {
                    kind: ElementKind::Tri6,
                    nodes: [a[0], a[1], a[2], a[3], a[4], a[5], 0, 0, 0],
                    layer: None,
                    curved: false,
                };
                elements.push(t([
                    id(i, j),
                    id(i + 2, j),
                    id(i + 2, j + 2),
                    id(i + 1, j),
                    id(i + 2, j + 1),
                    id(i + 1, j + 1),
                ]));
                elements.push(t([
                    id(i, j),
                    id(i + 2, j + 2),
                    id(i, j + 2),
                    id(i + 1, j + 1),
                    id(i + 1, j + 2),
                    id(i, j + 1),
                ]));
            } else {
                elements.push(Element {
                    kind: ElementKind::Quad9,
                    nodes: [
                        id(i, j),
                        id(i + 2, j),
                        id(i + 2, j + 2),
                        id(i, j + 2),
                        id(i + 1, j),
                        id(i + 2, j + 1),
                        id(i + 1, j + 2),
                        id(i, j + 1),
                        id(i + 1, j + 1),
                    ],
                    layer: None,
                    curved: false,
                });
            }
        }
    }
    // clamped on the left, bottom and right sides
    let dirichlet = (0..k * k)
        .filter(|&v| v % k == 0 || v % k == k - 1 || v / k == 0)
        .collect();
    Mesh {
        nodes,
        elements,
        dirichlet,
        cavities: vec![],
        layers: vec![],
        defects: vec![],
    }
}

#[test]
fn lanczos_matches_dense_oracle_on_square_patches() {
    for (n, tri) in [(3, false), (4, false), (3, true)] {
        let pb = Problem::new(square_patch(n, tri), MaterialParams::standard()).unwrap();
        assert!(pb.dofs.n_total() <= 500);
        let s = State::identity(&pb.mesh, &pb.dofs, 0.0);
        let sys = infsup_system(&pb, &s).unwrap();
        let dense = infsup_constant_dense(&sys).unwrap();
        let lanczos = infsup_constant(&sys, &mut LinearSolver::new()).unwrap();
        assert!(dense > 0.05, "{dense}");
        assert!(
            (lanczos - dense).abs() <= 1e-8 * dense,
            "n {n} tri {tri}: {lanczos} vs {dense}"
        );
    }
}

#[test]
fn identity_constraint_block_is_divergence() {
    let pb = single(0.01, 0.06);
    let s = State::identity(&pb.mesh, &pb.dofs, 0.0);
    let sys = infsup_system(&pb, &s).unwrap();
    let n_u = pb.dofs.n_u;
    let mut worst: f64 = 0.0;
    for e in (0..pb.n_elements()).step_by(7) {
        let (nodes, n) = pb.dofs.element_nodes(&pb.mesh, e);
        let pd = pb.dofs.pressure_dofs(e);
        // element-local ∫ ψ_k div φ_{a,i}, compared where the element owns the entry alone
        let mut local = vec![[[0.0; 2]; 3]; n];
        for q in &pb.geometry[e].qps {
            for a in 0..n {
                for k in 0..3 {
                    for i in 0..2 {
                        local[a][k][i] += q.weight * q.pbasis[k] * q.grads[a][i];
                    }
                }
            }
        }
        for a in 0..n {
            for i in 0..2 {
                let row = 2 * nodes[a] + i;
                if pb.dofs.is_dirichlet[row] {
                    continue;
                }
                for k in 0..3 {
                    let got = sys.matrix.get(n_u + pd[k], row);
                    worst = worst.max((got - local[a][k][i]).abs());
                }
            }
        }
    }
    assert!(worst < 1e-14, "{worst}");
}

#[test]
fn unstable_pair_inf_sup_constant_decays() {
    let betas: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| infsup_constant_dense(&common::q1p0_system(n)).unwrap())
        .collect();
    assert!(betas[0] > betas[1] && betas[1] > betas[2], "{betas:?}");
    // roughly halves with h
    assert!(
        betas[2] < 0.7 * betas[1] && betas[1] < 0.7 * betas[0],
        "{betas:?}"
    );
    let lanczos = infsup_constant(&common::q1p0_system(8), &mut LinearSolver::new()).unwrap();
    assert!(
        (lanczos - betas[1]).abs() <= 1e-6 * betas[1],
        "{lanczos} vs {}",
        betas[1]
    );
}

#[test]
fn rate_fit_recovers_exact_power_laws() {
    let h = [0.06, 0.04, 0.03, 0.02];
    let e2: Vec<f64> = h.iter().map(|x| 3.0 * x * x).collect();
    let e15: Vec<f64> = h.iter().map(|x: &f64| 0.5 * x.powf(1.5)).collect();
    assert!((fit_order("a", &h, &e2).order.unwrap() - 2.0).abs() < 1e-10);
    assert!((fit_order("b", &h, &e15).order.unwrap() - 1.5).abs() < 1e-10);
    let f = fit_order("c", &h, &[1.0, 0.0, f64::NAN, 0.5]);
    assert_eq!(f.used, 2);
    assert_eq!(f.notes.len(), 2);
    assert!(fit_order("d", &h, &[0.0; 4]).order.is_none());

    let rows: Vec<ConvergenceRow> = h
        .iter()
        .map(|&x| ConvergenceRow {
            h: x,
            energy: 1.0,
            det_err_l2: x * x,
            det_err_l1: 2.0 * x.powf(1.5),
            w1s_diff_to_finest: if x == 0.02 { f64::NAN } else { x.powf(1.5) },
            p_diff_to_finest: if x == 0.02 { f64::NAN } else { x },
            infsup_beta: 0.1,
        })
        .collect();
    let fits = rate_table(&rows).unwrap();
    let order = |c: &str| fits.iter().find(|f| f.column == c).unwrap().order;
    assert!((order("det_err_L2").unwrap() - 2.0).abs() < 1e-10);
    assert!((order("det_err_L1").unwrap() - 1.5).abs() < 1e-10);
    assert!((order("w1s_diff_to_finest").unwrap() - 1.5).abs() < 1e-10);
    // identical energies: no usable differences
    assert!(order("energy_diff_to_finest").is_none());
    assert!(rate_table(&rows[..1]).is_err());
}

fn row(lambda: f64, branch: Branch, energy: f64, v1: f64, v2: f64) -> BifurcationRow {
    BifurcationRow {
        lambda,
        branch,
        energy,
        v1,
        v2,
    }
}

#[test]
fn bifurcation_report_cases() {
    let crit = BifurcationCriteria::default();
    // symmetric only: gap undefined, ratios emitted
    let sym: Vec<BifurcationRow> = [1.0, 1.1, 1.2]
        .iter()
        .map(|&l| row(l, Branch::Symmetric, l, 0.1, 0.1))
        .collect();
    let r = bifurcation_report(&sym, &crit);
    assert!(r.lambda_c.is_none());
    assert!(r
        .curve
        .iter()
        .all(|c| c.energy_gap().is_none() && c.ratio_sym == Some(1.0)));

    // separation from λ = 1.2 on the right branch
    let mut rows = sym.clone();
    rows.push(row(1.0, Branch::Right, 1.0, 0.1, 0.1));
    rows.push(row(1.1, Branch::Right, 1.1, 0.1, 0.1));
    rows.push(row(1.2, Branch::Right, 1.2 - 1e-3, 0.05, 0.2));
    let r = bifurcation_report(&rows, &crit);
    assert_eq!(r.lambda_c, Some(1.2));
    assert_eq!(r.curve[2].ratio_dom, Some(4.0));

    // a left branch alone is compared by its own dominance v1/v2
    let left: Vec<BifurcationRow> = sym
        .iter()
        .cloned()
        .chain([row(1.2, Branch::Left, 1.2 - 1e-3, 0.2, 0.05)])
        .collect();
    let r = bifurcation_report(&left, &crit);
    assert_eq!(r.lambda_c, Some(1.2));
    assert_eq!(r.curve[2].ratio_dom, Some(4.0));
}
