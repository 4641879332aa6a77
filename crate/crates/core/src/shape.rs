//! Reference shape functions.
//!
//! Triangle: unit triangle with vertices `(0,0), (1,0), (0,1)`, node order
//! `v1, v2, v3, m12, m23, m31` and, for the enriched space, the barycenter last.
//!
//! Quadrilateral: `[-1,1]²`, node order: 4 vertices counter-clockwise from
//! `(-1,-1)`, the midpoints of edges `(v1v2), (v2v3), (v3v4), (v4v1)`, then the center.

use crate::tensor::Point;

pub const TRI_NODES: [Point; 7] = [
    [0.0, 0.0],
    [1.0, 0.0],
    [0.0, 1.0],
    [0.5, 0.0],
    [0.5, 0.5],
    [0.0, 0.5],
    [1.0 / 3.0, 1.0 / 3.0],
];

pub const QUAD_NODES: [Point; 9] = [
    [-1.0, -1.0],
    [1.0, -1.0],
    [1.0, 1.0],
    [-1.0, 1.0],
    [0.0, -1.0],
    [1.0, 0.0],
    [0.0, 1.0],
    [-1.0, 0.0],
    [0.0, 0.0],
];

/// Tensor-index pattern of the quad nodes into the 1D nodes `-1, 0, 1`.
const QUAD_IJ: [(usize, usize); 9] = [
    (0, 0),
    (2, 0),
    (2, 2),
    (0, 2),
    (1, 0),
    (2, 1),
    (1, 2),
    (0, 1),
    (1, 1),
];

/// Quadratic Lagrange triangle (6 nodes), used for the geometry map.
pub fn tri_p2(x: Point) -> ([f64; 6], [[f64; 2]; 6]) {
    let l = [1.0 - x[0] - x[1], x[0], x[1]];
    let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    let mut v = [0.0; 6];
    let mut g = [[0.0; 2]; 6];
    for i in 0..3 {
        v[i] = l[i] * (2.0 * l[i] - 1.0);
        let c = 4.0 * l[i] - 1.0;
        g[i] = [c * dl[i][0], c * dl[i][1]];
    }
    for (k, (i, j)) in [(0usize, 1usize), (1, 2), (2, 0)].into_iter().enumerate() {
        v[3 + k] = 4.0 * l[i] * l[j];
        g[3 + k] = [
            4.0 * (dl[i][0] * l[j] + l[i] * dl[j][0]),
            4.0 * (dl[i][1] * l[j] + l[i] * dl[j][1]),
        ];
    }
    (v, g)
}

/// Nodal basis of `P2 ⊕ span{λ1λ2λ3}`; the bubble is scaled to 1 at the
/// barycenter and the quadratic functions are corrected to vanish there.
pub fn tri_p2plus(x: Point) -> ([f64; 7], [[f64; 2]; 7]) {
    let (p, dp) = tri_p2(x);
    let l = [1.0 - x[0] - x[1], x[0], x[1]];
    let b = 27.0 * l[0] * l[1] * l[2];
    let db = [
        27.0 * (-l[1] * l[2] + l[0] * l[2]),
        27.0 * (-l[1] * l[2] + l[0] * l[1]),
    ];
    let mut v = [0.0; 7];
    let mut g = [[0.0; 2]; 7];
    // values of the quadratic functions at the barycenter
    let at_bary = [
        -1.0 / 9.0,
        -1.0 / 9.0,
        -1.0 / 9.0,
        4.0 / 9.0,
        4.0 / 9.0,
        4.0 / 9.0,
    ];
    for i in 0..6 {
        v[i] = p[i] - at_bary[i] * b;
        g[i] = [dp[i][0] - at_bary[i] * db[0], dp[i][1] - at_bary[i] * db[1]];
    }
    v[6] = b;
    g[6] = db;
    (v, g)
}

fn lagrange3(t: f64) -> ([f64; 3], [f64; 3]) {
    (
        [0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)],
        [t - 0.5, -2.0 * t, t + 0.5],
    )
}

/// Biquadratic Lagrange basis on the 9-node square.
pub fn quad_q2(x: Point) -> ([f64; 9], [[f64; 2]; 9]) {
    let (lx, dx) = lagrange3(x[0]);
    let (ly, dy) = lagrange3(x[1]);
    let mut v = [0.0; 9];
    let mut g = [[0.0; 2]; 9];
    for (a, &(i, j)) in QUAD_IJ.iter().enumerate() {
        v[a] = lx[i] * ly[j];
        g[a] = [dx[i] * ly[j], lx[i] * dy[j]];
    }
    (v, g)
}

/// Bilinear basis on the 4 square vertices.
pub fn quad_q1(x: Point) -> ([f64; 4], [[f64; 2]; 4]) {
    let mut v = [0.0; 4];
    let mut g = [[0.0; 2]; 4];
    for a in 0..4 {
        let [sx, sy] = QUAD_NODES[a];
        v[a] = 0.25 * (1.0 + sx * x[0]) * (1.0 + sy * x[1]);
        g[a] = [0.25 * sx * (1.0 + sy * x[1]), 0.25 * sy * (1.0 + sx * x[0])];
    }
    (v, g)
}

/// Pressure basis `{1, x̂₁, x̂₂}` in reference coordinates.
#[inline]
pub fn pressure_basis(x: Point) -> [f64; 3] {
    [1.0, x[0], x[1]]
}
