use std::f64::consts::PI;

use cavmix_core::geometry::polar_midpoint;
use cavmix_core::shape::{quad_q2, tri_p2, tri_p2plus};
use cavmix_core::{MaterialParams, Tensor2};
use proptest::prelude::*;

fn tensor(det_floor: f64) -> impl Strategy<Value = Tensor2> {
    prop::array::uniform4(-2.0f64..2.0)
        .prop_map(Tensor2::from_vec4)
        .prop_filter("orientation preserving", move |f| f.det() > det_floor)
}

fn rotation(t: f64) -> Tensor2 {
    Tensor2::new(t.cos(), -t.sin(), t.sin(), t.cos())
}

fn tri_point() -> impl Strategy<Value = [f64; 2]> {
    (0.01f64..0.98, 0.01f64..0.98)
        .prop_filter_map("inside", |(x, y)| (x + y < 0.99).then_some([x, y]))
}

fn fd_grad<const N: usize>(f: impl Fn([f64; 2]) -> [f64; N], x: [f64; 2]) -> [[f64; 2]; N] {
    let h = 1e-6;
    let mut g = [[0.0; 2]; N];
    for c in 0..2 {
        let (mut a, mut b) = (x, x);
        a[c] += h;
        b[c] -= h;
        let (fa, fb) = (f(a), f(b));
        for i in 0..N {
            g[i][c] = (fa[i] - fb[i]) / (2.0 * h);
        }
    }
    g
}

fn grad_rel_err<const N: usize>(g: &[[f64; 2]; N], r: &[[f64; 2]; N]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..N {
        for c in 0..2 {
            num += (g[i][c] - r[i][c]).powi(2);
            den += r[i][c].powi(2);
        }
    }
    (num / den).sqrt()
}

proptest! {
    #[test]
    fn shape_functions_partition_unity(x in tri_point(), q in prop::array::uniform2(-1.0f64..1.0)) {
        let (v, g) = tri_p2plus(x);
        prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        prop_assert!(g.iter().map(|d| d[0]).sum::<f64>().abs() < 1e-12);
        let (v, _) = tri_p2(x);
        prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        let (v, g) = quad_q2(q);
        prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        prop_assert!(g.iter().map(|d| d[1]).sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn shape_gradients_match_finite_differences(x in tri_point(), q in prop::array::uniform2(-0.99f64..0.99)) {
        let (_, g) = tri_p2plus(x);
        prop_assert!(grad_rel_err(&g, &fd_grad(|y| tri_p2plus(y).0, x)) < 1e-7);
        let (_, g) = quad_q2(q);
        prop_assert!(grad_rel_err(&g, &fd_grad(|y| quad_q2(y).0, q)) < 1e-7);
    }

    #[test]
    fn polar_midpoint_is_rotation_equivariant(
        ri in 0.1f64..2.0, rj in 0.1f64..2.0,
        ti in -PI..PI, dt in -3.0f64..3.0,
        rot in -PI..PI,
        c in prop::array::uniform2(-1.0f64..1.0),
    ) {
        let pt = |r: f64, t: f64| [c[0] + r * t.cos(), c[1] + r * t.sin()];
        let m = polar_midpoint(pt(ri, ti), pt(rj, ti + dt), c).unwrap();
        let mr = polar_midpoint(pt(ri, ti + rot), pt(rj, ti + dt + rot), c).unwrap();
        let back = rotation(-rot).apply([mr[0] - c[0], mr[1] - c[1]]);
        prop_assert!((back[0] + c[0] - m[0]).abs() < 1e-12 && (back[1] + c[1] - m[1]).abs() < 1e-12);
        // short arc: the midpoint angle lies between the endpoints
        let expect = pt(0.5 * (ri + rj), ti + 0.5 * dt);
        prop_assert!((m[0] - expect[0]).abs() < 1e-12 && (m[1] - expect[1]).abs() < 1e-12);
    }

    #[test]
    fn tensor_identities(a in prop::array::uniform4(-3.0f64..3.0), b in prop::array::uniform4(-3.0f64..3.0)) {
        let (a, b) = (Tensor2::from_vec4(a), Tensor2::from_vec4(b));
        prop_assert!((a.matmul(&b).det() - a.det() * b.det()).abs() < 1e-11);
        prop_assert!((a.cof().ddot(&a) - 2.0 * a.det()).abs() < 1e-12);
        let (s1, s2) = a.singular_values();
        prop_assert!((s1 * s2 - a.det().abs()).abs() < 1e-10);
        prop_assert!((s1 * s1 + s2 * s2 - a.norm_sq()).abs() < 1e-10);
    }

    #[test]
    fn energy_is_frame_indifferent(f in tensor(0.05), t in -PI..PI) {
        let m = MaterialParams::standard();
        let w = m.energy_density(&f).unwrap();
        let wq = m.energy_density(&rotation(t).matmul(&f)).unwrap();
        let wr = m.energy_density(&f.matmul(&rotation(t))).unwrap();
        prop_assert!((w - wq).abs() <= 1e-12 * w.abs());
        prop_assert!((w - wr).abs() <= 1e-12 * w.abs());
    }

    #[test]
    fn piola_is_energy_gradient(f in tensor(0.1), g in prop::array::uniform4(-1.0f64..1.0)) {
        let m = MaterialParams::standard();
        let g = Tensor2::from_vec4(g);
        let h = 1e-6;
        let fd = (m.energy_density(&(f + g * h)).unwrap() - m.energy_density(&(f - g * h)).unwrap()) / (2.0 * h);
        let an = m.first_piola(&f).unwrap().ddot(&g);
        prop_assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "fd {fd} analytic {an}");
    }

    #[test]
    fn tangent_is_second_derivative(
        f in tensor(0.2),
        p in -2.0f64..2.0,
        g in prop::array::uniform4(-1.0f64..1.0),
        k in prop::array::uniform4(-1.0f64..1.0),
    ) {
        let m = MaterialParams::standard();
        let (g, k) = (Tensor2::from_vec4(g), Tensor2::from_vec4(k));
        // second mixed difference of W(F) − p det F
        let l = |a: f64, b: f64| {
            let x = f + g * a + k * b;
            m.energy_density(&x).unwrap() - p * x.det()
        };
        let h = 1e-4;
        let fd = (l(h, h) - l(h, -h) - l(-h, h) + l(-h, -h)) / (4.0 * h * h);
        let an = m.tangent_action(&f, p, &g, &k).unwrap();
        let scale = m.tangent_action(&f, p, &g, &g).unwrap().abs() + m.tangent_action(&f, p, &k, &k).unwrap().abs();
        prop_assert!((fd - an).abs() <= 1e-5 * scale.max(1.0), "fd {fd} analytic {an}");
        // bilinearity
        let an2 = m.tangent_action(&f, p, &(g * 3.5), &k).unwrap();
        prop_assert!((an2 - 3.5 * an).abs() <= 1e-13 * an2.abs().max(1.0));
        // matrix form agrees
        let c = m.tangent_matrix(&f, p).unwrap();
        let (gv, kv) = (g.to_vec4(), k.to_vec4());
        let mut via = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                via += gv[i] * c[i][j] * kv[j];
            }
        }
        prop_assert!((via - an).abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn piola_of_diagonal_is_diagonal(a in 0.2f64..5.0) {
        let m = MaterialParams::standard();
        let pk = m.first_piola(&Tensor2::new(a, 0.0, 0.0, 1.0 / a)).unwrap();
        prop_assert!(pk.0[0][1] == 0.0 && pk.0[1][0] == 0.0);
    }
}
