use std::path::PathBuf;

use cavmix::config::{BcConfig, ExperimentConfig};
use cavmix::io::{check_state, read_mesh, read_state, write_mesh, write_state, write_vtk};
use cavmix::{Error, Problem};
use cavmix_core::dof::BoundaryCondition;
use cavmix_core::{generate_mesh, DefectSpec, MaterialParams, MeshParams, State, Tensor2};
use proptest::prelude::*;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn sample_meshes() -> Vec<cavmix_core::Mesh> {
    let mat = MaterialParams::standard();
    let single = [DefectSpec {
        center: [0.0, 0.0],
        rho: 1e-4,
        delta: 1.0,
    }];
    let two = [
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
    vec![
        generate_mesh(&single, &MeshParams::with_h(0.06), &mat).unwrap(),
        generate_mesh(&two, &MeshParams::with_h(0.06), &mat).unwrap(),
    ]
}

#[test]
fn mesh_round_trip_is_exact() {
    for m in sample_meshes() {
        let text = write_mesh(&m);
        let back = read_mesh(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(write_mesh(&back), text);
    }
}

#[test]
fn malformed_mesh_reports_line() {
    let text = write_mesh(&sample_meshes()[0]);
    let mut lines: Vec<&str> = text.lines().collect();
    lines[3] = "3 oops 0.5";
    let err = read_mesh(&lines.join("\n")).unwrap_err();
    assert!(
        matches!(err, Error::Parse(ref s) if s.contains("line 4")),
        "{err}"
    );
    assert!(read_mesh("not a mesh").is_err());
    assert_eq!(read_mesh("").unwrap_err().exit_code(), 1);
}

proptest! {
    #[test]
    fn state_round_trip_is_bit_exact(
        u in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 0..40),
        p in prop::collection::vec(-1e300f64..1e300, 0..20),
        m in prop::array::uniform4(-10.0f64..10.0),
        b in prop::array::uniform2(-1.0f64..1.0),
    ) {
        let s = State { u, p, bc: BoundaryCondition::Affine { m: Tensor2::from_vec4(m), b } };
        let back = read_state(&write_state(&s)).unwrap();
        prop_assert_eq!(back.u.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), s.u.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(back, s);
    }
}

#[test]
fn state_size_is_checked_against_numbering() {
    let m = sample_meshes().remove(0);
    let pb = Problem::new(m, MaterialParams::standard()).unwrap();
    let mut s = State::identity(&pb.mesh, &pb.dofs, 0.0);
    check_state(&pb.dofs, &s).unwrap();
    s.p.pop();
    assert!(check_state(&pb.dofs, &s).is_err());
}

#[test]
fn vtk_has_consistent_sections() {
    let m = sample_meshes().remove(1);
    let pb = Problem::new(m, MaterialParams::standard()).unwrap();
    let s = State::identity(&pb.mesh, &pb.dofs, 0.5);
    let v = write_vtk(&pb.mesh, Some(&s));
    let n = pb.mesh.nodes.len();
    let ne = pb.mesh.elements.len();
    assert!(v.contains(&format!("POINTS {n} double")));
    assert!(v.contains(&format!("CELL_TYPES {ne}")));
    assert!(v.contains(&format!("POINT_DATA {n}")));
    let cells = v
        .lines()
        .skip_while(|l| !l.starts_with("CELLS"))
        .skip(1)
        .take(ne);
    for (line, el) in cells.zip(&pb.mesh.elements) {
        assert_eq!(line.split_whitespace().count(), 1 + el.kind.node_count());
    }
    // identity state: zero displacement everywhere
    let disp = v.lines().skip_while(|l| !l.starts_with("VECTORS")).skip(1);
    assert!(disp.take(n).all(|l| l == "0e0 0e0 0"));
}

#[test]
fn shipped_configs_round_trip() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let c = ExperimentConfig::load(&path).unwrap();
            let again = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
            assert_eq!(again, c, "{}", path.display());
            n += 1;
        }
    }
    assert!(n >= 4);
}

fn base_config() -> ExperimentConfig {
    ExperimentConfig::load(&configs_dir().join("single_cavity_rho0.01.toml")).unwrap()
}

proptest! {
    #[test]
    fn config_round_trip(
        h in 0.01f64..0.1, rho in 1e-5f64..0.05, lam in 1.0f64..2.0,
        m in prop::array::uniform4(0.5f64..3.0), tol in 1e-14f64..1e-8,
        stretch in any::<bool>(),
    ) {
        let mut c = base_config();
        c.mesh.h = h;
        c.defects[0].rho = rho;
        c.newton.tol_abs = tol;
        c.run.h_list = vec![h, 0.5 * h, 0.25 * h];
        if stretch {
            c.bc = BcConfig::Stretch { lambda: lam };
            c.run.lambdas = vec![1.0, lam];
        } else {
            c.bc = BcConfig::Affine { matrix: [[m[0], m[1]], [m[2], m[3]]] };
        }
        let text = c.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        prop_assert_eq!(back, c);
    }
}

#[test]
fn inconsistent_configs_are_rejected() {
    let text = std::fs::read_to_string(configs_dir().join("single_cavity_rho0.01.toml")).unwrap();
    let err = |t: &str| ExperimentConfig::from_toml(t).unwrap_err();
    // λ list with an affine boundary map
    let e = err(&text.replace("[run]", "[run]\nlambdas = [1.0, 1.1]"));
    assert_eq!(e.exit_code(), 1);
    assert!(e.to_string().contains("stretch"), "{e}");
    // unknown key
    assert_eq!(err(&text.replace("[run]", "[run]\nfoo = 1")).exit_code(), 1);
    // invalid strategy constant
    assert_eq!(err(&text.replace("C1 = 2.0", "C1 = 0.0")).exit_code(), 1);
    // defect outside the disk is a geometry (mesh) error
    assert_eq!(
        err(&text.replace("center = [0.0, 0.0]", "center = [0.999, 0.0]")).exit_code(),
        2
    );
}
