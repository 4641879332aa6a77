use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::f64::consts::PI;

use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use super::ring::{build_ring, ring_schedule};
use super::{
    check_defects, make_ring_mesh, DefectSpec, Element, ElementKind, LayerTag, Mesh, MeshBuilder,
    MeshParams, MidRule,
};
use crate::error::{CoreError, CoreResult};
use crate::material::MaterialParams;
use crate::tensor::{dist, Point};

/// A closed loop the outer mesh must match: its vertices (ids in the builder)
/// and the circle it samples.
pub(crate) struct Hole {
    pub center: Point,
    pub radius: f64,
    pub vertices: Vec<usize>,
}

/// Triangulates the unit disk minus the holes, reusing the hole vertices
/// (and any existing edge midpoints). In `half` mode only `x ≥ 0` is meshed,
/// with the axis `x = 0` as a boundary. Returns the outer-circle node ids.
pub(crate) fn triangulate_outer(
    b: &mut MeshBuilder,
    holes: &[Hole],
    h: f64,
    half: bool,
) -> CoreResult<Vec<usize>> {
    let nb = (((2.0 * PI / h) / 4.0).round() as usize).max(2) * 4;
    let mut outer: Vec<usize> = Vec::new();
    if half {
        for i in 0..=nb / 2 {
            let p = if i == 0 {
                [0.0, -1.0]
            } else if i == nb / 2 {
                [0.0, 1.0]
            } else {
                let t = -0.5 * PI + 2.0 * PI * i as f64 / nb as f64;
                [t.cos(), t.sin()]
            };
            outer.push(b.add_node(p));
        }
    } else {
        for i in 0..nb {
            let t = 2.0 * PI * i as f64 / nb as f64;
            outer.push(b.add_node([t.cos(), t.sin()]));
        }
    }
    // axis from (0,1) down to (0,-1), endpoints shared with the semicircle
    let mut axis: Vec<usize> = Vec::new();
    if half {
        let na = ((2.0 / h).round() as usize).max(2);
        axis.push(*outer.last().unwrap());
        for i in (1..na).rev() {
            let y = -1.0 + 2.0 * i as f64 / na as f64;
            axis.push(b.add_node([0.0, y]));
        }
        axis.push(outer[0]);
    }

    let margin = 0.6 * h;
    let dy = h * 3f64.sqrt() / 2.0;
    let rows = (1.0 / dy).ceil() as i64 + 1;
    let cols = (1.0 / h).ceil() as i64 + 1;
    let mut lattice = Vec::new();
    for j in -rows..=rows {
        let y = j as f64 * dy;
        let shift = if j.rem_euclid(2) == 1 { 0.5 * h } else { 0.0 };
        for i in -cols..=cols {
            let x = i as f64 * h + shift;
            if x.hypot(y) > 1.0 - margin || (half && x < margin) {
                continue;
            }
            let clear = holes.iter().all(|hole| {
                let spacing = 2.0 * PI * hole.radius / hole.vertices.len() as f64;
                dist([x, y], hole.center) > hole.radius + 0.6 * spacing.max(h)
            });
            if clear {
                lattice.push(b.add_node([x, y]));
            }
        }
    }

    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::new();
    let mut id_of = Vec::new();
    let mut insert = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>,
                      ids: &[usize],
                      b: &MeshBuilder|
     -> CoreResult<Vec<spade::handles::FixedVertexHandle>> {
        let mut hs = Vec::with_capacity(ids.len());
        for &id in ids {
            let p = b.nodes[id];
            let hd = cdt.insert(Point2::new(p[0], p[1])).map_err(|e| {
                CoreError::Geometry(alloc::format!("triangulation insert failed: {e:?}"))
            })?;
            if hd.index() >= id_of.len() {
                id_of.resize(hd.index() + 1, usize::MAX);
            }
            if id_of[hd.index()] != usize::MAX && id_of[hd.index()] != id {
                return Err(CoreError::Geometry(alloc::format!(
                    "duplicate mesh point ({}, {})",
                    p[0],
                    p[1]
                )));
            }
            id_of[hd.index()] = id;
            hs.push(hd);
        }
        Ok(hs)
    };
    let ho = insert(&mut cdt, &outer, b)?;
    let ha = insert(&mut cdt, &axis, b)?;
    let hh: Vec<_> = holes
        .iter()
        .map(|hole| insert(&mut cdt, &hole.vertices, b))
        .collect::<CoreResult<_>>()?;
    insert(&mut cdt, &lattice, b)?;

    let mut boundary_edges = BTreeSet::new();
    let constrain = |cdt: &mut ConstrainedDelaunayTriangulation<Point2<f64>>,
                     hs: &[spade::handles::FixedVertexHandle],
                     closed: bool| {
        let n = hs.len();
        let m = if closed { n } else { n - 1 };
        for i in 0..m {
            cdt.add_constraint(hs[i], hs[(i + 1) % n]);
        }
    };
    constrain(&mut cdt, &ho, !half);
    if half {
        constrain(&mut cdt, &ha, false);
    }
    for hs in &hh {
        constrain(&mut cdt, hs, true);
    }
    let no = outer.len();
    let m = if half { no - 1 } else { no };
    for i in 0..m {
        let (a, c) = (outer[i], outer[(i + 1) % no]);
        boundary_edges.insert((a.min(c), a.max(c)));
    }
    // hole vertex count check: constraints may not split loop edges
    if cdt.num_constraints()
        != m + if half { axis.len() - 1 } else { 0 }
            + holes.iter().map(|h| h.vertices.len()).sum::<usize>()
    {
        return Err(CoreError::Geometry(
            "outer mesh constraints were split; loops too close to other points".into(),
        ));
    }

    let mut tris: Vec<[usize; 3]> = Vec::new();
    for face in cdt.inner_faces() {
        let vs = face.vertices();
        let ids = [
            id_of[vs[0].fix().index()],
            id_of[vs[1].fix().index()],
            id_of[vs[2].fix().index()],
        ];
        let pc = {
            let p: Vec<Point> = ids.iter().map(|&i| b.nodes[i]).collect();
            [
                (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                (p[0][1] + p[1][1] + p[2][1]) / 3.0,
            ]
        };
        if holes.iter().any(|hole| dist(pc, hole.center) < hole.radius) {
            continue;
        }
        tris.push(ids);
    }
    // deterministic order independent of the triangulation's internal storage
    tris.sort_unstable_by(|a, c| {
        let ka = centroid(a, b);
        let kc = centroid(c, b);
        ka[1].total_cmp(&kc[1]).then(ka[0].total_cmp(&kc[0]))
    });
    for t in tris {
        let rule = |a: usize, c: usize| {
            if boundary_edges.contains(&(a.min(c), a.max(c))) {
                MidRule::Polar([0.0, 0.0])
            } else {
                MidRule::Straight
            }
        };
        let rules = [rule(t[0], t[1]), rule(t[1], t[2]), rule(t[2], t[0])];
        let on_hole = [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])]
            .iter()
            .any(|&(a, c)| b.has_edge(a, c));
        b.add_triangle(t, rules, None)?;
        if on_hole {
            b.elements.last_mut().unwrap().curved = true;
        }
    }

    let mut dir = Vec::with_capacity(2 * no);
    for i in 0..no {
        dir.push(outer[i]);
        if i < m {
            let (a, c) = (outer[i], outer[(i + 1) % no]);
            let key = (a.min(c), a.max(c));
            let mid = *b.edges.get(&key).ok_or_else(|| {
                CoreError::Geometry("outer boundary edge missing from the triangulation".into())
            })?;
            dir.push(mid);
        }
    }
    Ok(dir)
}

fn centroid(t: &[usize; 3], b: &MeshBuilder) -> Point {
    let p = [b.nodes[t[0]], b.nodes[t[1]], b.nodes[t[2]]];
    [
        (p[0][0] + p[1][0] + p[2][0]) / 3.0,
        (p[0][1] + p[1][1] + p[2][1]) / 3.0,
    ]
}

/// Unstructured mesh of the unit disk minus closed circular loops given by their
/// points; loop edges are curved about `center`.
pub fn make_outer_mesh(loops: &[(Point, Vec<Point>)], h: f64) -> CoreResult<Mesh> {
    if !(h > 0.0) {
        return Err(CoreError::Config("mesh size must be positive".into()));
    }
    let mut b = MeshBuilder::default();
    let mut holes = Vec::new();
    for (center, pts) in loops {
        if pts.len() < 3 {
            return Err(CoreError::Geometry(
                "loop needs at least three points".into(),
            ));
        }
        let radius = pts.iter().map(|&p| dist(p, *center)).fold(0.0, f64::max);
        if dist(*center, [0.0, 0.0]) + radius >= 1.0 {
            return Err(CoreError::Geometry(
                "loop intersects the outer boundary".into(),
            ));
        }
        let vertices: Vec<usize> = pts.iter().map(|&p| b.add_node(p)).collect();
        let n = vertices.len();
        for i in 0..n {
            b.edge_node(vertices[i], vertices[(i + 1) % n], MidRule::Polar(*center))?;
        }
        holes.push(Hole {
            center: *center,
            radius,
            vertices,
        });
    }
    for (i, a) in holes.iter().enumerate() {
        for c in &holes[i + 1..] {
            if dist(a.center, c.center) <= a.radius + c.radius {
                return Err(CoreError::Geometry("loops intersect".into()));
            }
        }
    }
    let mut dirichlet = triangulate_outer(&mut b, &holes, h, false)?;
    dirichlet.sort_unstable();
    Ok(Mesh {
        nodes: b.nodes,
        elements: b.elements,
        dirichlet,
        ..Default::default()
    })
}

/// Partner of each defect under `x → −x`, if the configuration is mirror
/// symmetric and no ring region touches the axis.
fn mirror_partners(defects: &[DefectSpec]) -> Option<Vec<usize>> {
    let mut partner = Vec::with_capacity(defects.len());
    for d in defects {
        if d.center[0].abs() <= d.delta {
            return None;
        }
        let p = defects.iter().position(|e| {
            e.center[0] == -d.center[0]
                && e.center[1] == d.center[1]
                && e.rho == d.rho
                && e.delta == d.delta
        })?;
        partner.push(p);
    }
    Some(partner)
}

/// Full composite mesh: ring regions around every defect plus the outer triangulation.
///
/// Mirror-symmetric defect sets are meshed on `x ≥ 0` and reflected, so the
/// mesh itself is exactly symmetric.
pub fn generate_mesh(
    defects: &[DefectSpec],
    params: &MeshParams,
    material: &MaterialParams,
) -> CoreResult<Mesh> {
    params.validate(material)?;
    check_defects(defects)?;
    if defects.len() == 1 && defects[0].fills_domain() {
        return make_ring_mesh(&defects[0], params, material);
    }
    let partners = mirror_partners(defects);
    let half = partners.is_some();
    let mut b = MeshBuilder::default();
    let mut cavities: Vec<Option<Vec<usize>>> = alloc::vec![None; defects.len()];
    let mut layers = Vec::with_capacity(defects.len());
    let mut holes = Vec::new();
    for (k, d) in defects.iter().enumerate() {
        layers.push(ring_schedule(d, params, material)?);
        if half && d.center[0] < 0.0 {
            continue;
        }
        let loops = build_ring(&mut b, k, d, &layers[k])?;
        cavities[k] = Some(loops.inner);
        holes.push(Hole {
            center: d.center,
            radius: d.delta,
            vertices: loops.outer,
        });
    }
    let mut dirichlet = triangulate_outer(&mut b, &holes, params.h, half)?;

    let (mut nodes, mut elements) = (b.nodes, b.elements);
    if let Some(partner) = partners {
        let n0 = nodes.len();
        let mut map = Vec::with_capacity(n0);
        for i in 0..n0 {
            let p = nodes[i];
            if p[0] == 0.0 {
                map.push(i);
            } else {
                map.push(nodes.len());
                nodes.push([-p[0], p[1]]);
            }
        }
        let ne = elements.len();
        for e in 0..ne {
            let el = elements[e];
            let m = |i: usize| map[el.nodes[i]];
            let nodes9 = match el.kind {
                ElementKind::Tri6 => [m(0), m(2), m(1), m(5), m(4), m(3), 0, 0, 0],
                ElementKind::Quad9 => [m(0), m(3), m(2), m(1), m(7), m(6), m(5), m(4), m(8)],
            };
            let layer = el.layer.map(|t| LayerTag {
                defect: partner[t.defect],
                ..t
            });
            elements.push(Element {
                nodes: nodes9,
                layer,
                ..el
            });
        }
        let mirrored: Vec<usize> = dirichlet
            .iter()
            .map(|&i| map[i])
            .filter(|&i| i >= n0)
            .collect();
        dirichlet.extend(mirrored);
        for k in 0..defects.len() {
            if cavities[k].is_none() {
                let src = cavities[partner[k]].as_ref().unwrap();
                let n = src.len() / 2;
                let mut lp = Vec::with_capacity(src.len());
                for i in 0..n {
                    let v = (n - i) % n;
                    lp.push(map[src[2 * v]]);
                    lp.push(map[src[(2 * v + 2 * n - 1) % (2 * n)]]);
                }
                cavities[k] = Some(lp);
            }
        }
    }
    dirichlet.sort_unstable();
    dirichlet.dedup();
    Ok(Mesh {
        nodes,
        elements,
        dirichlet,
        cavities: cavities.into_iter().map(|c| c.unwrap()).collect(),
        layers,
        defects: defects.to_vec(),
    })
}
