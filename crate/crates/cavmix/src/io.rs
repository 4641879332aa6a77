//! Plain-text mesh and state files, legacy VTK export and CSV helpers.
//!
//! Floats are written in shortest round-trip form, so reading a written file
//! reproduces it bit for bit.

use std::fmt::Write as _;
use std::path::Path;
use std::str::SplitWhitespace;

use cavmix_core::dof::{BoundaryCondition, DofMap, State};
use cavmix_core::mesh::{Element, LayerInfo, LayerKind, LayerTag};
use cavmix_core::{DefectSpec, ElementKind, Mesh, Tensor2};

use crate::error::{Error, Result};

const MESH_MAGIC: &str = "cavmix-mesh";
const STATE_MAGIC: &str = "cavmix-state";
const VERSION: u32 = 1;

fn kind_name(k: ElementKind) -> &'static str {
    match k {
        ElementKind::Quad9 => "quad9",
        ElementKind::Tri6 => "tri6",
    }
}

fn layer_kind_name(k: LayerKind) -> &'static str {
    match k {
        LayerKind::Standard => "standard",
        LayerKind::Conforming => "conforming",
    }
}

fn parse_layer_kind(s: &str) -> Result<LayerKind> {
    match s {
        "standard" => Ok(LayerKind::Standard),
        "conforming" => Ok(LayerKind::Conforming),
        _ => Err(Error::Parse(format!("unknown layer kind '{s}'"))),
    }
}

/// Mesh file:
///
/// ```text
/// cavmix-mesh 1
/// nodes N            then N lines  "id x y"
/// elements M         then M lines  "id kind n1..nk tag curved"   (tag "-" or "defect:layer:kind")
/// dirichlet K        then one line of K node ids
/// defects D          then D lines  "cx cy rho delta"
/// cavity k L         then one line of L node ids                 (one block per defect)
/// layers k L         then L lines  "inner thickness n kind"      (one block per defect)
/// ```
pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = format!("{MESH_MAGIC} {VERSION}\nnodes {}\n", mesh.nodes.len());
    for (i, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(s, "{i} {:e} {:e}", p[0], p[1]);
    }
    let _ = writeln!(s, "elements {}", mesh.elements.len());
    for (i, el) in mesh.elements.iter().enumerate() {
        let _ = write!(s, "{i} {}", kind_name(el.kind));
        for n in el.geometric_nodes() {
            let _ = write!(s, " {n}");
        }
        match el.layer {
            Some(t) => {
                let _ = write!(s, " {}:{}:{}", t.defect, t.layer, layer_kind_name(t.kind));
            }
            None => s.push_str(" -"),
        }
        let _ = writeln!(s, " {}", u8::from(el.curved));
    }
    let _ = writeln!(s, "dirichlet {}", mesh.dirichlet.len());
    s.push_str(&join(&mesh.dirichlet));
    s.push('\n');
    let _ = writeln!(s, "defects {}", mesh.defects.len());
    for d in &mesh.defects {
        let _ = writeln!(
            s,
            "{:e} {:e} {:e} {:e}",
            d.center[0], d.center[1], d.rho, d.delta
        );
    }
    for (k, c) in mesh.cavities.iter().enumerate() {
        let _ = writeln!(s, "cavity {k} {}", c.len());
        s.push_str(&join(c));
        s.push('\n');
    }
    for (k, ls) in mesh.layers.iter().enumerate() {
        let _ = writeln!(s, "layers {k} {}", ls.len());
        for l in ls {
            let _ = writeln!(
                s,
                "{:e} {:e} {} {}",
                l.inner_radius,
                l.thickness,
                l.n,
                layer_kind_name(l.kind)
            );
        }
    }
    s
}

fn join(ids: &[usize]) -> String {
    ids.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Line-oriented token reader with line numbers in its errors.
struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Reader {
            lines: text.lines().enumerate(),
            line: 0,
        }
    }

    fn next_line(&mut self) -> Result<SplitWhitespace<'a>> {
        for (i, l) in self.lines.by_ref() {
            self.line = i + 1;
            if !l.trim().is_empty() {
                return Ok(l.split_whitespace());
            }
        }
        Err(Error::Parse("unexpected end of file".into()))
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::Parse(format!("line {}: {msg}", self.line))
    }

    fn header(&mut self, key: &str) -> Result<Vec<usize>> {
        let mut t = self.next_line()?;
        match t.next() {
            Some(k) if k == key => t.map(|v| self.parse(v)).collect(),
            other => Err(self.err(format!("expected '{key}', found {other:?}"))),
        }
    }

    fn parse<T: std::str::FromStr>(&self, v: &str) -> Result<T> {
        v.parse()
            .map_err(|_| self.err(format!("invalid value '{v}'")))
    }

    fn take<T: std::str::FromStr>(&self, t: &mut SplitWhitespace<'_>) -> Result<T> {
        let v = t.next().ok_or_else(|| self.err("missing field"))?;
        self.parse(v)
    }

    fn ids(&mut self, n: usize) -> Result<Vec<usize>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let t = self.next_line()?;
        let v: Vec<usize> = t.map(|x| self.parse(x)).collect::<Result<_>>()?;
        if v.len() != n {
            return Err(self.err(format!("expected {n} ids, found {}", v.len())));
        }
        Ok(v)
    }

    fn magic(&mut self, magic: &str) -> Result<()> {
        let mut t = self.next_line()?;
        if t.next() != Some(magic) {
            return Err(self.err(format!("not a {magic} file")));
        }
        let v: u32 = self.take(&mut t)?;
        if v != VERSION {
            return Err(self.err(format!("unsupported version {v}")));
        }
        Ok(())
    }
}

fn one(v: Vec<usize>, r: &Reader<'_>) -> Result<usize> {
    match v[..] {
        [n] => Ok(n),
        _ => Err(r.err("expected one count")),
    }
}

pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut r = Reader::new(text);
    r.magic(MESH_MAGIC)?;
    let h = r.header("nodes")?;
    let nn = one(h, &r)?;
    let mut nodes = Vec::with_capacity(nn);
    for i in 0..nn {
        let mut t = r.next_line()?;
        let id: usize = r.take(&mut t)?;
        if id != i {
            return Err(r.err(format!("node id {id} out of order")));
        }
        nodes.push([r.take(&mut t)?, r.take(&mut t)?]);
    }
    let h = r.header("elements")?;
    let ne = one(h, &r)?;
    let mut elements = Vec::with_capacity(ne);
    for i in 0..ne {
        let mut t = r.next_line()?;
        let id: usize = r.take(&mut t)?;
        if id != i {
            return Err(r.err(format!("element id {id} out of order")));
        }
        let kind = match t.next() {
            Some("quad9") => ElementKind::Quad9,
            Some("tri6") => ElementKind::Tri6,
            other => return Err(r.err(format!("unknown element kind {other:?}"))),
        };
        let mut ids = [0usize; 9];
        for slot in ids.iter_mut().take(kind.node_count()) {
            *slot = r.take(&mut t)?;
            if *slot >= nn {
                return Err(r.err(format!("node {slot} out of range")));
            }
        }
        let tag = t.next().ok_or_else(|| r.err("missing layer tag"))?;
        let layer = if tag == "-" {
            None
        } else {
            let parts: Vec<&str> = tag.split(':').collect();
            let [d, l, k] = parts[..] else {
                return Err(r.err(format!("invalid layer tag '{tag}'")));
            };
            Some(LayerTag {
                defect: r.parse(d)?,
                layer: r.parse(l)?,
                kind: parse_layer_kind(k)?,
            })
        };
        let curved = match t.next() {
            Some("1") => true,
            Some("0") => false,
            other => return Err(r.err(format!("invalid curved flag {other:?}"))),
        };
        elements.push(Element {
            kind,
            nodes: ids,
            layer,
            curved,
        });
    }
    let h = r.header("dirichlet")?;
    let nd = one(h, &r)?;
    let dirichlet = r.ids(nd)?;
    let h = r.header("defects")?;
    let ndef = one(h, &r)?;
    let mut defects = Vec::with_capacity(ndef);
    for _ in 0..ndef {
        let mut t = r.next_line()?;
        defects.push(DefectSpec {
            center: [r.take(&mut t)?, r.take(&mut t)?],
            rho: r.take(&mut t)?,
            delta: r.take(&mut t)?,
        });
    }
    let mut cavities = Vec::with_capacity(ndef);
    for k in 0..ndef {
        let h = r.header("cavity")?;
        match h[..] {
            [kk, len] if kk == k => cavities.push(r.ids(len)?),
            _ => return Err(r.err(format!("expected cavity block {k}"))),
        }
    }
    let mut layers = Vec::with_capacity(ndef);
    for k in 0..ndef {
        let h = r.header("layers")?;
        let len = match h[..] {
            [kk, len] if kk == k => len,
            _ => return Err(r.err(format!("expected layers block {k}"))),
        };
        let mut ls = Vec::with_capacity(len);
        for _ in 0..len {
            let mut t = r.next_line()?;
            ls.push(LayerInfo {
                inner_radius: r.take(&mut t)?,
                thickness: r.take(&mut t)?,
                n: r.take(&mut t)?,
                kind: parse_layer_kind(t.next().ok_or_else(|| r.err("missing layer kind"))?)?,
            });
        }
        layers.push(ls);
    }
    Ok(Mesh {
        nodes,
        elements,
        dirichlet,
        cavities,
        layers,
        defects,
    })
}

/// The mesh with every node moved to its deformed position.
pub fn deformed_mesh(mesh: &Mesh, s: &State) -> Mesh {
    let mut m = mesh.clone();
    for (i, p) in m.nodes.iter_mut().enumerate() {
        *p = [s.u[2 * i], s.u[2 * i + 1]];
    }
    m
}

/// State file: magic, the affine boundary map, then `u` and `p` coefficients.
pub fn write_state(s: &State) -> String {
    let BoundaryCondition::Affine { m, b } = s.bc;
    let mut out = format!("{STATE_MAGIC} {VERSION}\n");
    let _ = writeln!(
        out,
        "bc {:e} {:e} {:e} {:e} {:e} {:e}",
        m.0[0][0], m.0[0][1], m.0[1][0], m.0[1][1], b[0], b[1]
    );
    let _ = writeln!(out, "u {}", s.u.len());
    for v in &s.u {
        let _ = writeln!(out, "{v:e}");
    }
    let _ = writeln!(out, "p {}", s.p.len());
    for v in &s.p {
        let _ = writeln!(out, "{v:e}");
    }
    out
}

pub fn read_state(text: &str) -> Result<State> {
    let mut r = Reader::new(text);
    r.magic(STATE_MAGIC)?;
    let mut t = r.next_line()?;
    if t.next() != Some("bc") {
        return Err(r.err("expected 'bc'"));
    }
    let mut v = [0.0; 6];
    for x in v.iter_mut() {
        *x = r.take(&mut t)?;
    }
    let bc = BoundaryCondition::Affine {
        m: Tensor2::new(v[0], v[1], v[2], v[3]),
        b: [v[4], v[5]],
    };
    let mut vec = |key: &str| -> Result<Vec<f64>> {
        let h = r.header(key)?;
        let n = one(h, &r)?;
        (0..n)
            .map(|_| {
                let mut t = r.next_line()?;
                r.take(&mut t)
            })
            .collect()
    };
    let u = vec("u")?;
    let p = vec("p")?;
    Ok(State { u, p, bc })
}

/// Checks that a state matches the numbering of a problem.
pub fn check_state(dofs: &DofMap, s: &State) -> Result<()> {
    if s.u.len() != dofs.n_u || s.p.len() != dofs.n_p {
        return Err(Error::Parse(format!(
            "state has {} + {} coefficients, mesh needs {} + {}",
            s.u.len(),
            s.p.len(),
            dofs.n_u,
            dofs.n_p
        )));
    }
    Ok(())
}

/// Legacy ASCII VTK unstructured grid with quadratic cells (types 22 and 28).
/// With a state, points are placed at their deformed positions and the
/// displacement and element pressure are attached.
pub fn write_vtk(mesh: &Mesh, state: Option<&State>) -> String {
    let mut s =
        String::from("# vtk DataFile Version 3.0\ncavmix mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let n = mesh.nodes.len();
    let _ = writeln!(s, "POINTS {n} double");
    for (i, p) in mesh.nodes.iter().enumerate() {
        let q = state.map_or(*p, |st| [st.u[2 * i], st.u[2 * i + 1]]);
        let _ = writeln!(s, "{:e} {:e} 0", q[0], q[1]);
    }
    let size: usize = mesh.elements.iter().map(|e| 1 + e.kind.node_count()).sum();
    let _ = writeln!(s, "CELLS {} {size}", mesh.elements.len());
    for e in &mesh.elements {
        let _ = writeln!(s, "{} {}", e.kind.node_count(), join(e.geometric_nodes()));
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.elements.len());
    for e in &mesh.elements {
        let t = match e.kind {
            ElementKind::Tri6 => 22,
            ElementKind::Quad9 => 28,
        };
        let _ = writeln!(s, "{t}");
    }
    let _ = writeln!(
        s,
        "CELL_DATA {}\nSCALARS layer int 1\nLOOKUP_TABLE default",
        mesh.elements.len()
    );
    for e in &mesh.elements {
        let _ = writeln!(s, "{}", e.layer.map_or(-1, |t| t.layer as i64));
    }
    if let Some(st) = state {
        s.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
        for e in 0..mesh.elements.len() {
            let _ = writeln!(s, "{:e}", st.p[3 * e]);
        }
        let _ = writeln!(s, "POINT_DATA {n}\nVECTORS displacement double");
        for (i, p) in mesh.nodes.iter().enumerate() {
            let _ = writeln!(s, "{:e} {:e} 0", st.u[2 * i] - p[0], st.u[2 * i + 1] - p[1]);
        }
    }
    s
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}
