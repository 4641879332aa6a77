mod common;

use cavmix::analysis::cavity_volumes;
use cavmix::continuation::{
    continuation_sweep, solve_affine, Branch, ContinuationConfig, SweepConfig, INITIAL_PRESSURE,
};
use cavmix::linear::solve_dense;
use cavmix::newton::{line_search, newton_solve};
use cavmix::{LinearSolver, NewtonConfig, Problem};
use cavmix_core::dof::BoundaryCondition;
use cavmix_core::mesh::Element;
use cavmix_core::{
    generate_mesh, DefectSpec, ElementKind, MaterialParams, Mesh, MeshParams, State, Tensor2,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

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

/// One P2+ triangle clamped along its bottom edge.
fn one_triangle() -> Problem {
    let m = Mesh {
        nodes: vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [0.2, 0.9],
            [0.5, 0.0],
            [0.6, 0.45],
            [0.1, 0.45],
        ],
        elements: vec![Element {
            kind: ElementKind::Tri6,
            nodes: [0, 1, 2, 3, 4, 5, 0, 0, 0],
            layer: None,
            curved: false,
        }],
        dirichlet: vec![0, 1, 3],
        cavities: vec![],
        layers: vec![],
        defects: vec![],
    };
    Problem::new(m, MaterialParams::standard()).unwrap()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    common::rel_err(a, b)
}

#[test]
fn zero_rhs_gives_zero_increment() {
    let pb = single(0.01, 0.06);
    let s = State::identity(&pb.mesh, &pb.dofs, INITIAL_PRESSURE);
    let sys = pb.tangent(&s, None).unwrap();
    let x = LinearSolver::new()
        .solve_saddle(&sys.matrix, &vec![0.0; sys.rhs.len()], sys.n_u)
        .unwrap();
    assert!(x.iter().all(|&v| v == 0.0));
}

#[test]
fn stokes_like_manufactured_solve() {
    let pb = single(0.01, 0.06);
    let s = State::identity(&pb.mesh, &pb.dofs, INITIAL_PRESSURE);
    let sys = pb.tangent(&s, None).unwrap();
    let mut rng = StdRng::seed_from_u64(3);
    let x_star: Vec<f64> = (0..sys.rhs.len())
        .map(|i| {
            if i < sys.n_u && pb.dofs.is_dirichlet[i] {
                0.0
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect();
    let b = sys.matrix.matvec(&x_star);
    let x = LinearSolver::new()
        .solve_saddle(&sys.matrix, &b, sys.n_u)
        .unwrap();
    let r: Vec<f64> = sys
        .matrix
        .matvec(&x)
        .iter()
        .zip(&b)
        .map(|(a, c)| a - c)
        .collect();
    let rn =
        r.iter().map(|v| v * v).sum::<f64>().sqrt() / b.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(rn <= 1e-10, "{rn}");
    assert!(rel(&x, &x_star) < 1e-6, "{}", rel(&x, &x_star));
}

#[test]
fn single_element_matches_dense_oracle() {
    let pb = one_triangle();
    let mut s = State::identity(&pb.mesh, &pb.dofs, 0.2);
    let mut rng = StdRng::seed_from_u64(11);
    for i in 0..s.u.len() {
        if !pb.dofs.is_dirichlet[i] {
            s.u[i] += 0.02 * rng.random_range(-1.0..1.0);
        }
    }
    let sys = pb.tangent(&s, None).unwrap();
    let dense = solve_dense(&sys.matrix, &sys.rhs).unwrap();
    for mut solver in [LinearSolver::new(), LinearSolver::lu()] {
        let x = solver.solve_saddle(&sys.matrix, &sys.rhs, sys.n_u).unwrap();
        assert!(rel(&x, &dense) <= 1e-12, "{}", rel(&x, &dense));
    }
}

#[test]
fn line_search_zero_direction_and_damping() {
    let mut pb = single(0.01, 0.06);
    let cfg = NewtonConfig::default();
    let bc = BoundaryCondition::affine(Tensor2::diag(1.05, 1.02));
    let (s, _) = solve_affine(
        &mut pb,
        bc,
        &ContinuationConfig::default(),
        &cfg,
        &mut LinearSolver::new(),
    )
    .unwrap();
    let r0 = pb.residual(&s).unwrap().norm();
    let (w, pi) = (vec![0.0; s.u.len()], vec![0.0; s.p.len()]);
    let ls = line_search(&pb, &s, &w, &pi, r0, &cfg).unwrap();
    assert_eq!(ls.alpha, 1.0);
    assert_eq!(ls.state, s);

    // perturb, take the Newton direction and blow it up
    let mut t = s.clone();
    for (i, v) in t.u.iter_mut().enumerate() {
        if !pb.dofs.is_dirichlet[i] {
            *v += 1e-4 * ((i % 7) as f64 - 3.0);
        }
    }
    let sys = pb.tangent(&t, None).unwrap();
    let (w, pi) = LinearSolver::new().solve(&sys).unwrap();
    let (w100, pi100): (Vec<f64>, Vec<f64>) = (
        w.iter().map(|v| 100.0 * v).collect(),
        pi.iter().map(|v| 100.0 * v).collect(),
    );
    let rt = sys.residual.norm();
    let full = cavmix::newton::step(&t, &w100, &pi100, 1.0);
    assert!(!(pb.bounds(&full).min_det > 0.0) || !cfg.admissible(&pb.bounds(&full)));
    let ls = line_search(&pb, &t, &w100, &pi100, rt, &cfg).unwrap();
    assert!(ls.alpha < 1.0 && ls.residual < rt, "alpha {}", ls.alpha);
}

#[test]
fn unloaded_problem_converges_immediately() {
    let pb = two_defects(0.06);
    let s0 = State::identity(&pb.mesh, &pb.dofs, INITIAL_PRESSURE);
    let (s, tr) =
        newton_solve(&pb, s0, &NewtonConfig::default(), &mut LinearSolver::new()).unwrap();
    assert!(tr.iterations() <= 2, "{}", tr.iterations());
    let e = pb.energy(&s).unwrap();
    let e_id = pb
        .energy(&State::identity(&pb.mesh, &pb.dofs, 0.0))
        .unwrap();
    assert!((e - e_id).abs() <= 1e-12 * e_id);
}

#[test]
fn affine_solve_converges_quadratically_and_restarts_at_fixed_point() {
    let mut pb = single(0.01, 0.06);
    let cfg = NewtonConfig::default();
    let mut solver = LinearSolver::new();
    let bc = BoundaryCondition::affine(Tensor2::diag(2.5, 2.0));
    let (s, tr) = solve_affine(
        &mut pb,
        bc,
        &ContinuationConfig::default(),
        &cfg,
        &mut solver,
    )
    .unwrap();
    let res = pb.residual(&s).unwrap();
    assert!(
        res.norm() <= 1e-10 || res.norm() <= pb.residual_floor(&s).unwrap(),
        "{}",
        res.norm()
    );
    assert!(res.max_constraint() <= 1e-9);
    assert!(tr.rows.iter().all(|r| r.min_det > 0.0));
    // last solve of the continuation: full steps and quadratic contraction
    let start = tr.rows.iter().rposition(|r| r.iteration == 0).unwrap();
    let last = &tr.rows[start..];
    assert!(last.len() >= 3);
    assert!(last[last.len() - 2..].iter().all(|r| r.alpha == 1.0));
    let q = last[last.len() - 1].residual / last[last.len() - 2].residual.powi(2);
    assert!(q < 1e3, "r_k+1 / r_k^2 = {q}");

    let (s2, tr2) = newton_solve(&pb, s.clone(), &cfg, &mut solver).unwrap();
    assert!(tr2.iterations() <= 1);
    assert!(rel(&s2.u, &s.u) < 1e-12);
}

#[test]
fn symmetric_sweep_energies_increase_and_are_path_independent() {
    let mut pb = two_defects(0.06);
    let cfg = NewtonConfig::default();
    let sc = SweepConfig::default();
    let mut solver = LinearSolver::new();
    let lams = [1.05, 1.1, 1.15, 1.2];
    let fwd =
        continuation_sweep(&mut pb, &lams, Branch::Symmetric, &sc, &cfg, &mut solver).unwrap();
    assert!(fwd.failure.is_none());
    let e: Vec<f64> = fwd
        .points
        .iter()
        .map(|p| pb.energy(&p.state).unwrap())
        .collect();
    assert!(e.windows(2).all(|w| w[1] > w[0]), "{e:?}");
    for p in &fwd.points {
        let v = cavity_volumes(&pb, &p.state);
        assert!((v[1] / v[0] - 1.0).abs() < 0.01, "{v:?}");
        assert!(p.trace.rows.iter().all(|r| r.min_det > 0.0));
    }
    // reversed order
    let rev: Vec<f64> = lams.iter().rev().copied().collect();
    let back =
        continuation_sweep(&mut pb, &rev, Branch::Symmetric, &sc, &cfg, &mut solver).unwrap();
    for p in &back.points {
        let i = lams.iter().position(|&l| l == p.lambda).unwrap();
        let eb = pb.energy(&p.state).unwrap();
        assert!(
            (eb - e[i]).abs() <= 1e-8 * e[i],
            "λ {}: {eb} vs {}",
            p.lambda,
            e[i]
        );
    }
    // a single λ equals the end of a finer sweep
    let one =
        continuation_sweep(&mut pb, &[1.2], Branch::Symmetric, &sc, &cfg, &mut solver).unwrap();
    let e1 = pb.energy(&one.points[0].state).unwrap();
    assert!((e1 - e[3]).abs() <= 1e-8 * e[3]);
}

#[test]
fn dominant_branches_at_large_stretch() {
    let mut pb = two_defects(0.06);
    let cfg = NewtonConfig::default();
    let sc = SweepConfig::default();
    let mut solver = LinearSolver::new();
    let mut ratio = |b: Branch| {
        let r = continuation_sweep(&mut pb, &[1.3], b, &sc, &cfg, &mut solver).unwrap();
        let p = r.points.last().expect("converged");
        let v = cavity_volumes(&pb, &p.state);
        (v[1] / v[0], pb.energy(&p.state).unwrap())
    };
    let (qs, es) = ratio(Branch::Symmetric);
    let (qr, er) = ratio(Branch::Right);
    let (ql, el) = ratio(Branch::Left);
    assert!((qs - 1.0).abs() < 0.01, "{qs}");
    assert!(qr > 1.1 && ql < 1.0 / 1.1, "{qr} {ql}");
    assert!(er < es && el < es);
    // mirror-symmetric mesh: the two dominant branches are mirror images
    assert!(
        (qr * ql - 1.0).abs() < 1e-6 && (er - el).abs() < 1e-9 * es,
        "{qr} {ql} {er} {el}"
    );
}

#[test]
fn separated_branch_is_continued_without_bias() {
    let mut pb = two_defects(0.06);
    let cfg = NewtonConfig::default();
    let mut solver = LinearSolver::new();
    let r = continuation_sweep(
        &mut pb,
        &[1.3, 1.325, 1.35],
        Branch::Right,
        &SweepConfig::default(),
        &cfg,
        &mut solver,
    )
    .unwrap();
    assert!(r.failure.is_none() && r.points.len() == 3);
    assert!(pb.cavity_pressure.iter().all(|&p| p == 0.0));
    let q: Vec<f64> = r
        .points
        .iter()
        .map(|p| {
            let v = cavity_volumes(&pb, &p.state);
            v[1] / v[0]
        })
        .collect();
    assert!(q[0] > 1.1 && q[1] > q[0] && q[2] > q[1], "{q:?}");
    // a single unbiased secant step, not a bias ramp
    let rows: Vec<usize> = r.points.iter().map(|p| p.trace.rows.len()).collect();
    assert!(rows[2] <= 10, "{rows:?}");
}
