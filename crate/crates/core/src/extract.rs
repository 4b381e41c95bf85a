//! Isocontours of grid fields: marching squares in 2D, marching cubes in 3D,
//! plus sampled Hausdorff distances for comparing geometry.
//!
//! Corners with `value > iso` are "high". Edge crossings are placed by linear
//! interpolation. On faces with two diagonally opposite high corners the high
//! corners are kept apart, in 2D and 3D alike, so neighbouring cells always
//! agree and contours are closed. The marching-cubes case table is derived
//! from that face rule at first use instead of being transcribed;
//! [`case_table_hash`] identifies it.
//!
//! Orientation: 2D loops run counter-clockwise around high regions, and
//! triangle normals point from the high side to the low side.
//!
//! Cells on the periodic seam are processed with wrapped indices, but
//! vertices are placed in the unwrapped frame of the cell that first creates
//! them; such output carries `crosses_seam = true`.

use std::collections::HashMap;
use std::io::{self, Write};
use std::sync::OnceLock;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::grid::ScalarField;

/// Lower bound on samples per side in [`hausdorff`].
pub const MIN_HAUSDORFF_SAMPLES: usize = 10_000;

/// Triangles at or below this area are dropped.
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polyline2D {
    /// Closed loops; the last vertex connects back to the first.
    pub loops: Vec<Vec<[f64; 2]>>,
    pub crosses_seam: bool,
}

impl Polyline2D {
    pub fn vertex_count(&self) -> usize {
        self.loops.iter().map(Vec::len).sum()
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| dist2(a, b)).sum()
    }

    /// Shoelace area summed over loops (positive for counter-clockwise loops).
    pub fn signed_area(&self) -> f64 {
        self.segments()
            .map(|(a, b)| 0.5 * (a[0] * b[1] - b[0] * a[1]))
            .sum()
    }

    pub fn segments(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        self.loops
            .iter()
            .flat_map(|l| (0..l.len()).map(move |i| (l[i], l[(i + 1) % l.len()])))
    }

    /// Points spread along the loops with spacing at most `length / count`.
    pub fn sample(&self, count: usize) -> Result<PointCloud> {
        let total = self.length();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("polyline has zero length".into()));
        }
        let step = total / count.max(1) as f64;
        let mut coords = Vec::with_capacity(2 * (count + self.vertex_count()));
        for (a, b) in self.segments() {
            let len = dist2(a, b);
            let pieces = (len / step).ceil().max(1.0) as usize;
            for s in 0..pieces {
                let t = s as f64 / pieces as f64;
                coords.push(a[0] + t * (b[0] - a[0]));
                coords.push(a[1] + t * (b[1] - a[1]));
            }
        }
        PointCloud::new(2, coords)
    }

    /// Rows `loop,x,y`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "loop,x,y")?;
        for (id, l) in self.loops.iter().enumerate() {
            for v in l {
                writeln!(w, "{id},{:.12},{:.12}", v[0], v[1])?;
            }
        }
        Ok(())
    }

    /// Closed paths over an optional point overlay, y axis pointing up.
    pub fn write_svg<W: Write>(
        &self,
        w: &mut W,
        extent: f64,
        points: Option<&PointCloud>,
    ) -> io::Result<()> {
        let size = 600.0;
        let scale = size / (2.0 * extent);
        let map = |p: &[f64]| ((p[0] + extent) * scale, (extent - p[1]) * scale);
        writeln!(
            w,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
        )?;
        writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
        if let Some(cloud) = points {
            for p in cloud.points() {
                let (x, y) = map(p);
                writeln!(w, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.5" fill="red"/>"#)?;
            }
        }
        for l in &self.loops {
            let mut d = String::new();
            for (i, v) in l.iter().enumerate() {
                let (x, y) = map(v);
                d.push_str(&format!("{}{x:.2},{y:.2} ", if i == 0 { "M" } else { "L" }));
            }
            d.push('Z');
            writeln!(
                w,
                r#"<path d="{d}" fill="none" stroke="black" stroke-width="1"/>"#
            )?;
        }
        writeln!(w, "</svg>")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    pub crosses_seam: bool,
}

impl TriMesh {
    fn corners(&self, t: &[usize; 3]) -> [[f64; 3]; 3] {
        [
            self.vertices[t[0]],
            self.vertices[t[1]],
            self.vertices[t[2]],
        ]
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| tri_area(&self.corners(t)))
            .sum()
    }

    /// Divergence-theorem volume; positive when normals point outward.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = self.corners(t);
                dot3(a, cross3(b, c)) / 6.0
            })
            .sum()
    }

    /// Barycentric lattice points on every triangle, density proportional to area.
    pub fn sample(&self, count: usize) -> Result<PointCloud> {
        let total = self.area();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("mesh has zero area".into()));
        }
        let mut coords = Vec::new();
        for t in &self.triangles {
            let [a, b, c] = self.corners(t);
            let share = tri_area(&[a, b, c]) / total * count as f64;
            let k = (2.0 * share).sqrt().ceil().max(1.0) as usize;
            for i in 0..=k {
                for j in 0..=(k - i) {
                    let (s, r) = (i as f64 / k as f64, j as f64 / k as f64);
                    let q = 1.0 - s - r;
                    for ax in 0..3 {
                        coords.push(q * a[ax] + s * b[ax] + r * c[ax]);
                    }
                }
            }
        }
        PointCloud::new(3, coords)
    }

    /// ASCII OBJ with 1-based `v`/`f` records.
    pub fn write_obj<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(
            w,
            "# {} vertices, {} triangles",
            self.vertices.len(),
            self.triangles.len()
        )?;
        for v in &self.vertices {
            writeln!(w, "v {:.12} {:.12} {:.12}", v[0], v[1], v[2])?;
        }
        for t in &self.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Curves(Polyline2D),
    Surface(TriMesh),
}

impl Geometry {
    pub fn crosses_seam(&self) -> bool {
        match self {
            Geometry::Curves(p) => p.crosses_seam,
            Geometry::Surface(m) => m.crosses_seam,
        }
    }

    pub fn as_curves(&self) -> Option<&Polyline2D> {
        match self {
            Geometry::Curves(p) => Some(p),
            Geometry::Surface(_) => None,
        }
    }

    pub fn as_surface(&self) -> Option<&TriMesh> {
        match self {
            Geometry::Surface(m) => Some(m),
            Geometry::Curves(_) => None,
        }
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn tri_area(t: &[[f64; 3]; 3]) -> f64 {
    let c = cross3(sub3(t[1], t[0]), sub3(t[2], t[0]));
    0.5 * dot3(c, c).sqrt()
}

/// Marching squares / cubes at `iso`.
pub fn extract_iso(field: &ScalarField, iso: f64) -> Result<Geometry> {
    let (min, max) = (field.min(), field.max());
    if !(iso.is_finite() && min < iso && iso < max) {
        return Err(Error::EmptyLevelSet { iso, min, max });
    }
    match field.grid().dim() {
        2 => Ok(Geometry::Curves(marching_squares(field, iso))),
        _ => Ok(Geometry::Surface(marching_cubes(field, iso))),
    }
}

/// Crossing on the edge from `a` (value `va`) to `b` (value `vb`) along `axis`.
fn crossing(va: f64, vb: f64, iso: f64) -> f64 {
    let t = (iso - va) / (vb - va);
    t.clamp(0.0, 1.0)
}

/// Directed segments through a face whose corners are listed counter-clockwise
/// (seen from the side the segments' left should face). Each maximal cyclic run
/// of high corners yields one segment, exit edge to entry edge, so high corners
/// sit on the segment's left. Edge `e` joins corner `e` and corner `e + 1`.
fn face_segments(high: [bool; 4]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for start in 0..4 {
        let prev = (start + 3) % 4;
        if high[start] && !high[prev] {
            let mut end = start;
            while high[(end + 1) % 4] {
                end = (end + 1) % 4;
            }
            out.push((end, prev));
        }
    }
    out
}

fn marching_squares(field: &ScalarField, iso: f64) -> Polyline2D {
    let grid = field.grid();
    let n = grid.cells_per_axis();
    let h = grid.spacing();
    let v = field.values();
    let mut positions: HashMap<usize, [f64; 2]> = HashMap::new();
    let mut next_of: HashMap<usize, usize> = HashMap::new();
    let mut order: Vec<usize> = Vec::new();
    let mut crosses_seam = false;

    for i in 0..n {
        for j in 0..n {
            let (i1, j1) = ((i + 1) % n, (j + 1) % n);
            // counter-clockwise in the (x, y) = (axis 0, axis 1) plane
            let nodes = [(i, j), (i1, j), (i1, j1), (i, j1)];
            let offsets = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
            let vals = nodes.map(|(a, b)| v[grid.flat(&[a, b])]);
            let high = vals.map(|x| x > iso);
            if high.iter().all(|&b| b) || !high.iter().any(|&b| b) {
                continue;
            }
            crosses_seam |= i == n - 1 || j == n - 1;
            // global edge ids: 2 * flat(base node) + axis
            let edge_ids = [
                2 * grid.flat(&[i, j]),
                2 * grid.flat(&[i1, j]) + 1,
                2 * grid.flat(&[i, j1]),
                2 * grid.flat(&[i, j]) + 1,
            ];
            let (x0, y0) = (grid.coord(i), grid.coord(j));
            for (exit, entry) in face_segments(high) {
                for e in [exit, entry] {
                    positions.entry(edge_ids[e]).or_insert_with(|| {
                        let (a, b) = (e, (e + 1) % 4);
                        let t = crossing(vals[a], vals[b], iso);
                        let (ox, oy) = (
                            offsets[a].0 + t * (offsets[b].0 - offsets[a].0),
                            offsets[a].1 + t * (offsets[b].1 - offsets[a].1),
                        );
                        [x0 + ox * h, y0 + oy * h]
                    });
                }
                next_of.insert(edge_ids[exit], edge_ids[entry]);
                order.push(edge_ids[exit]);
            }
        }
    }

    let mut loops = Vec::new();
    let mut used: HashMap<usize, bool> = HashMap::with_capacity(order.len());
    for &first in &order {
        if used.contains_key(&first) {
            continue;
        }
        let mut l: Vec<[f64; 2]> = Vec::new();
        let mut e = first;
        loop {
            used.insert(e, true);
            let p = positions[&e];
            if l.last() != Some(&p) {
                l.push(p);
            }
            e = match next_of.get(&e) {
                Some(&nx) => nx,
                None => break,
            };
            if e == first {
                break;
            }
        }
        while l.len() > 1 && l.first() == l.last() {
            l.pop();
        }
        if l.len() >= 3 {
            loops.push(l);
        }
    }
    Polyline2D {
        loops,
        crosses_seam,
    }
}

/// Cube corner `c` sits at offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)` along axes 0, 1, 2.
fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// The 12 cube edges as (low corner, high corner), in a fixed order.
fn cube_edges() -> &'static [(usize, usize); 12] {
    static EDGES: OnceLock<[(usize, usize); 12]> = OnceLock::new();
    EDGES.get_or_init(|| {
        let mut edges = [(0, 0); 12];
        let mut k = 0;
        for axis in 0..3 {
            for c in 0..8 {
                if c & (1 << axis) == 0 {
                    edges[k] = (c, c | (1 << axis));
                    k += 1;
                }
            }
        }
        edges
    })
}

fn edge_index(a: usize, b: usize) -> usize {
    let key = (a.min(b), a.max(b));
    cube_edges()
        .iter()
        .position(|&e| e == key)
        .expect("corners differ in one bit")
}

/// The six faces, corners counter-clockwise seen from outside the cube.
fn cube_faces() -> [[usize; 4]; 6] {
    let mut faces = [[0; 4]; 6];
    let mut k = 0;
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        for side in 0..2 {
            let at = |ub: usize, uc: usize| (side << a) | (ub << b) | (uc << c);
            let ccw = [at(0, 0), at(1, 0), at(1, 1), at(0, 1)];
            faces[k] = if side == 1 {
                ccw
            } else {
                [ccw[0], ccw[3], ccw[2], ccw[1]]
            };
            k += 1;
        }
    }
    faces
}

/// Triangles (as cube-edge indices) for each of the 256 corner sign patterns.
pub fn case_table() -> &'static [Vec<[u8; 3]>] {
    static TABLE: OnceLock<Vec<Vec<[u8; 3]>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let faces = cube_faces();
        (0..256usize)
            .map(|case| {
                let high = |c: usize| case & (1 << c) != 0;
                let mut next: HashMap<usize, usize> = HashMap::new();
                let mut starts = Vec::new();
                for face in &faces {
                    let flags = face.map(high);
                    for (exit, entry) in face_segments(flags) {
                        let from = edge_index(face[exit], face[(exit + 1) % 4]);
                        let to = edge_index(face[entry], face[(entry + 1) % 4]);
                        next.insert(from, to);
                        starts.push(from);
                    }
                }
                let mut tris = Vec::new();
                let mut seen = [false; 12];
                starts.sort_unstable();
                for &s in &starts {
                    if seen[s] {
                        continue;
                    }
                    let mut poly = Vec::new();
                    let mut e = s;
                    while !seen[e] {
                        seen[e] = true;
                        poly.push(e as u8);
                        e = next[&e];
                    }
                    // loops run with high corners on the left of each face; reversing
                    // the fan makes normals point from high to low
                    for k in 1..poly.len() - 1 {
                        tris.push([poly[0], poly[k + 1], poly[k]]);
                    }
                }
                tris
            })
            .collect()
    })
}

/// FNV-1a over the case table, identifying the ambiguity resolution in use.
pub fn case_table_hash() -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for (case, tris) in case_table().iter().enumerate() {
        for byte in std::iter::once(case as u8)
            .chain(tris.iter().flatten().copied())
            .chain([0xff])
        {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0100_0000_01b3);
        }
    }
    hash
}

fn marching_cubes(field: &ScalarField, iso: f64) -> TriMesh {
    let grid = field.grid();
    let n = grid.cells_per_axis();
    let h = grid.spacing();
    let v = field.values();
    let table = case_table();
    let edges = cube_edges();
    let mut vertex_of: HashMap<usize, usize> = HashMap::new();
    let mut mesh = TriMesh::default();

    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let base = [i, j, k];
                let node = |c: usize| {
                    let o = corner_offset(c);
                    grid.flat(&[(i + o[0]) % n, (j + o[1]) % n, (k + o[2]) % n])
                };
                let vals: [f64; 8] = std::array::from_fn(|c| v[node(c)]);
                let case = (0..8).fold(0usize, |acc, c| acc | ((vals[c] > iso) as usize) << c);
                let tris = &table[case];
                if tris.is_empty() {
                    continue;
                }
                mesh.crosses_seam |= base.iter().any(|&b| b == n - 1);
                let mut local = [usize::MAX; 12];
                for tri in tris {
                    let mut ids = [0usize; 3];
                    for (slot, &e) in ids.iter_mut().zip(tri) {
                        let e = e as usize;
                        if local[e] == usize::MAX {
                            let (a, b) = edges[e];
                            let axis = (a ^ b).trailing_zeros() as usize;
                            let key = 3 * node(a) + axis;
                            local[e] = *vertex_of.entry(key).or_insert_with(|| {
                                let t = crossing(vals[a], vals[b], iso);
                                let oa = corner_offset(a);
                                let mut p = [0.0; 3];
                                for ax in 0..3 {
                                    let off = oa[ax] as f64 + if ax == axis { t } else { 0.0 };
                                    p[ax] = grid.coord(base[ax]) + off * h;
                                }
                                mesh.vertices.push(p);
                                mesh.vertices.len() - 1
                            });
                        }
                        *slot = local[e];
                    }
                    if ids[0] == ids[1] || ids[1] == ids[2] || ids[0] == ids[2] {
                        continue;
                    }
                    if tri_area(&mesh.corners(&ids)) <= DEGENERATE_AREA {
                        continue;
                    }
                    mesh.triangles.push(ids);
                }
            }
        }
    }
    mesh
}

/// Something that can be densely sampled for a Hausdorff comparison.
pub enum Shape<'a> {
    Curves(&'a Polyline2D),
    Surface(&'a TriMesh),
    Points(&'a PointCloud),
    /// Closed parametric curve on `t ∈ [0, 1)`.
    Curve(&'a dyn Fn(f64) -> [f64; 2]),
    /// Parametric surface on `(s, t) ∈ [0, 1)²`.
    Patch(&'a dyn Fn(f64, f64) -> [f64; 3]),
}

impl Shape<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Curves(_) | Shape::Curve(_) => 2,
            Shape::Surface(_) | Shape::Patch(_) => 3,
            Shape::Points(c) => c.dim(),
        }
    }

    pub fn sample(&self, count: usize) -> Result<PointCloud> {
        match self {
            Shape::Curves(p) => p.sample(count),
            Shape::Surface(m) => m.sample(count),
            Shape::Points(c) => Ok((*c).clone()),
            Shape::Curve(f) => {
                let coords = (0..count)
                    .flat_map(|i| f(i as f64 / count as f64))
                    .collect();
                PointCloud::new(2, coords)
            }
            Shape::Patch(f) => {
                let side = (count as f64).sqrt().ceil() as usize;
                let coords = (0..side * side)
                    .flat_map(|q| {
                        f(
                            (q / side) as f64 / side as f64,
                            (q % side) as f64 / side as f64,
                        )
                    })
                    .collect();
                PointCloud::new(3, coords)
            }
        }
    }
}

impl<'a> From<&'a Geometry> for Shape<'a> {
    fn from(g: &'a Geometry) -> Self {
        match g {
            Geometry::Curves(p) => Shape::Curves(p),
            Geometry::Surface(m) => Shape::Surface(m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HausdorffReport {
    pub distance: f64,
    /// `max_a min_b |a - b|`
    pub forward: f64,
    /// `max_b min_a |a - b|`
    pub backward: f64,
    pub samples_a: usize,
    pub samples_b: usize,
}

/// Directed Hausdorff distance from `a` to `b` over point sets.
pub fn directed_hausdorff(a: &PointCloud, b: &PointCloud) -> f64 {
    let dim = b.dim();
    let mut sorted: Vec<&[f64]> = b.points().collect();
    sorted.sort_by(|p, q| p[0].total_cmp(&q[0]));
    let keys: Vec<f64> = sorted.iter().map(|p| p[0]).collect();
    let d2 = |p: &[f64], q: &[f64]| (0..dim).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>();
    a.points()
        .map(|p| {
            let at = keys.partition_point(|&x| x < p[0]);
            let mut best = f64::INFINITY;
            for q in sorted[at..].iter() {
                if (q[0] - p[0]).powi(2) >= best {
                    break;
                }
                best = best.min(d2(p, q));
            }
            for q in sorted[..at].iter().rev() {
                if (q[0] - p[0]).powi(2) >= best {
                    break;
                }
                best = best.min(d2(p, q));
            }
            best.sqrt()
        })
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance with at least `min_samples` (and never fewer
/// than [`MIN_HAUSDORFF_SAMPLES`]) samples on each continuous side.
pub fn hausdorff(a: &Shape, b: &Shape, min_samples: usize) -> Result<HausdorffReport> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let count = min_samples.max(MIN_HAUSDORFF_SAMPLES);
    let sa = a.sample(count)?;
    let sb = b.sample(count)?;
    let forward = directed_hausdorff(&sa, &sb);
    let backward = directed_hausdorff(&sb, &sa);
    Ok(HausdorffReport {
        distance: forward.max(backward),
        forward,
        backward,
        samples_a: sa.len(),
        samples_b: sb.len(),
    })
}

/// Mollified or raw source field for extraction from an indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsoSource {
    /// 0.5-level of the raw 0/1 indicator.
    Raw,
    /// 0.5-level of `G_τ * u` at the last τ used.
    #[default]
    Mollified,
}

impl IsoSource {
    pub fn name(&self) -> &'static str {
        match self {
            IsoSource::Raw => "raw",
            IsoSource::Mollified => "mollified",
        }
    }
}

/// Checks that consecutive loop vertices are distinct and every loop has at least 3.
pub fn polyline_is_well_formed(p: &Polyline2D) -> bool {
    p.loops
        .iter()
        .all(|l| l.len() >= 3 && (0..l.len()).all(|i| l[i] != l[(i + 1) % l.len()]))
}

/// Number of proper crossings between non-adjacent segments of all loops.
pub fn self_intersections(p: &Polyline2D) -> usize {
    let segs: Vec<([f64; 2], [f64; 2])> = p.segments().collect();
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let mut count = 0;
    for i in 0..segs.len() {
        for j in i + 1..segs.len() {
            let (a, b) = segs[i];
            let (c, d) = segs[j];
            if a == c || a == d || b == c || b == d {
                continue;
            }
            let (o1, o2) = (orient(a, b, c), orient(a, b, d));
            let (o3, o4) = (orient(c, d, a), orient(c, d, b));
            if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
                count += 1;
            }
        }
    }
    count
}
