//! Lattice sampling and iso-contour / isosurface extraction.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Aabb;
use crate::implicit::ImplicitFn;
use crate::mc_tables::{CORNER_OFFSETS, EDGE_CORNERS, EDGE_TABLE, TRI_TABLE};
use crate::scalar::Real;

/// Triangles with area at or below this are not emitted.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Scalar samples on a regular lattice; axis 0 varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGrid<T> {
    pub bounds: Aabb<T>,
    pub res: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Real> SampledGrid<T> {
    /// Wraps precomputed samples, checking their count.
    pub fn from_values(bounds: Aabb<T>, res: Vec<usize>, values: Vec<T>) -> Result<Self> {
        check_res(&bounds, &res)?;
        let n: usize = res.iter().product();
        if values.len() != n {
            return Err(Error::SizeMismatch(format!(
                "{} samples for a lattice of {n}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sample at lattice index {i}")));
        }
        Ok(SampledGrid { bounds, res, values })
    }

    pub fn dim(&self) -> usize {
        self.res.len()
    }

    /// Lattice spacing along `axis`.
    pub fn step(&self, axis: usize) -> T {
        self.bounds.extent(axis) / T::from_usize_lossy(self.res[axis] - 1)
    }

    pub fn coord(&self, axis: usize, i: usize) -> T {
        self.bounds.min[axis] + self.step(axis) * T::from_usize_lossy(i)
    }

    /// Length of one cell's diagonal.
    pub fn cell_diagonal(&self) -> T {
        (0..self.dim())
            .map(|a| self.step(a) * self.step(a))
            .sum::<T>()
            .sqrt()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.res)
            .rev()
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn at(&self, idx: &[usize]) -> T {
        self.values[self.flat_index(idx)]
    }

    pub fn min_max(&self) -> (T, T) {
        self.values.iter().fold(
            (T::infinity(), T::neg_infinity()),
            |(lo, hi), &v| (lo.min(v), hi.max(v)),
        )
    }

    /// Multilinear interpolation of the samples at `x` (clamped to the box).
    pub fn interpolate(&self, x: &[T]) -> T {
        let d = self.dim();
        let mut base = vec![0usize; d];
        let mut frac = vec![T::zero(); d];
        for a in 0..d {
            let u = ((x[a] - self.bounds.min[a]) / self.step(a))
                .max(T::zero())
                .min(T::from_usize_lossy(self.res[a] - 1));
            let i = u.floor().to_usize().unwrap_or(0).min(self.res[a] - 2);
            base[a] = i;
            frac[a] = u - T::from_usize_lossy(i);
        }
        let mut sum = T::zero();
        let mut idx = vec![0usize; d];
        for corner in 0..(1usize << d) {
            let mut w = T::one();
            for a in 0..d {
                let bit = (corner >> a) & 1;
                idx[a] = base[a] + bit;
                w = w * if bit == 1 { frac[a] } else { T::one() - frac[a] };
            }
            if w != T::zero() {
                sum = sum + w * self.at(&idx);
            }
        }
        sum
    }
}

fn check_res<T: Real>(bounds: &Aabb<T>, res: &[usize]) -> Result<()> {
    if res.len() != bounds.dim() {
        return Err(Error::DimensionMismatch {
            expected: bounds.dim(),
            found: res.len(),
        });
    }
    if let Some(&r) = res.iter().find(|&&r| r < 2) {
        return Err(Error::InvalidParameter(format!(
            "lattice resolution {r} below 2"
        )));
    }
    if (0..bounds.dim()).any(|a| !(bounds.extent(a) > T::zero())) {
        return Err(Error::InvalidParameter("sampling box has zero extent".into()));
    }
    Ok(())
}

/// Evaluates `f` at every lattice point of `bounds`.
pub fn sample_grid<T: Real, F: ImplicitFn<T> + ?Sized>(
    f: &F,
    bounds: &Aabb<T>,
    res: &[usize],
) -> Result<SampledGrid<T>> {
    check_res(bounds, res)?;
    if f.dim() != bounds.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: bounds.dim(),
        });
    }
    let d = res.len();
    let steps: Vec<T> = (0..d)
        .map(|a| bounds.extent(a) / T::from_usize_lossy(res[a] - 1))
        .collect();
    let total: usize = res.iter().product();
    let values: Vec<T> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut x = [T::zero(); crate::geometry::MAX_DIM];
            let mut rem = flat;
            for a in 0..d {
                let i = rem % res[a];
                rem /= res[a];
                x[a] = bounds.min[a] + steps[a] * T::from_usize_lossy(i);
            }
            f.value(&x[..d])
        })
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("implicit function at lattice index {i}")));
    }
    Ok(SampledGrid {
        bounds: bounds.clone(),
        res: res.to_vec(),
        values,
    })
}

/// Iso-contours as chains of 2D points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polyline2D<T> {
    pub loops: Vec<Vec<[T; 2]>>,
    pub closed: Vec<bool>,
}

impl<T: Real> Polyline2D<T> {
    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    pub fn len(&self) -> usize {
        self.loops.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.loops.iter().map(Vec::len).sum()
    }

    pub fn points(&self) -> impl Iterator<Item = &[T; 2]> + '_ {
        self.loops.iter().flatten()
    }

    /// Every segment, including the closing segment of closed loops.
    pub fn segments(&self) -> Vec<([T; 2], [T; 2])> {
        let mut out = Vec::new();
        for (pts, &closed) in self.loops.iter().zip(&self.closed) {
            for w in pts.windows(2) {
                out.push((w[0], w[1]));
            }
            if closed && pts.len() > 2 {
                out.push((pts[pts.len() - 1], pts[0]));
            }
        }
        out
    }

    /// Applies `map` to every vertex.
    pub fn map_points(&self, mut map: impl FnMut([T; 2]) -> [T; 2]) -> Self {
        Polyline2D {
            loops: self
                .loops
                .iter()
                .map(|l| l.iter().map(|&p| map(p)).collect())
                .collect(),
            closed: self.closed.clone(),
        }
    }
}

/// Triangle mesh.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh<T> {
    pub vertices: Vec<[T; 3]>,
    pub triangles: Vec<[usize; 3]>,
}

impl<T: Real> TriMesh<T> {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    fn edge_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut edges = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    /// `V - E + F` over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &i in t {
                used[i] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        let e = self.edge_counts().len() as i64;
        v - e + self.triangles.len() as i64
    }

    /// Every edge shared by exactly two triangles.
    pub fn is_closed(&self) -> bool {
        self.edge_counts().values().all(|&c| c == 2)
    }

    pub fn map_vertices(&self, mut map: impl FnMut([T; 3]) -> [T; 3]) -> Self {
        TriMesh {
            vertices: self.vertices.iter().map(|&v| map(v)).collect(),
            triangles: self.triangles.clone(),
        }
    }
}

#[inline]
fn edge_point<T: Real>(pa: &[T], pb: &[T], va: T, vb: T, iso: T) -> Vec<T> {
    let t = (iso - va) / (vb - va);
    pa.iter().zip(pb).map(|(&a, &b)| a + t * (b - a)).collect()
}

/// Marching squares with saddle cells decided by the mean of the four
/// corner samples.
pub fn marching_squares<T: Real>(grid: &SampledGrid<T>, iso: T) -> Result<Polyline2D<T>> {
    marching_squares_impl(grid, iso, None)
}

/// Marching squares with saddle cells decided by evaluating `center` at the
/// cell midpoint.
pub fn marching_squares_with_center<T: Real>(
    grid: &SampledGrid<T>,
    iso: T,
    center: &dyn Fn(&[T]) -> T,
) -> Result<Polyline2D<T>> {
    marching_squares_impl(grid, iso, Some(center))
}

fn marching_squares_impl<T: Real>(
    grid: &SampledGrid<T>,
    iso: T,
    center: Option<&dyn Fn(&[T]) -> T>,
) -> Result<Polyline2D<T>> {
    if grid.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: grid.dim(),
        });
    }
    let (nx, ny) = (grid.res[0], grid.res[1]);
    let horizontal = (nx - 1) * ny;
    let h_id = |i: usize, j: usize| j * (nx - 1) + i;
    let v_id = |i: usize, j: usize| horizontal + j * nx + i;
    let above = |i: usize, j: usize| grid.at(&[i, j]) > iso;

    let mut positions: HashMap<usize, [T; 2]> = HashMap::new();
    let mut adjacency: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut crossing = |id: usize, a: (usize, usize), b: (usize, usize)| {
        positions.entry(id).or_insert_with(|| {
            let pa = [grid.coord(0, a.0), grid.coord(1, a.1)];
            let pb = [grid.coord(0, b.0), grid.coord(1, b.1)];
            let p = edge_point(&pa, &pb, grid.at(&[a.0, a.1]), grid.at(&[b.0, b.1]), iso);
            [p[0], p[1]]
        });
        id
    };

    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let case = (above(i, j) as u8)
                | (above(i + 1, j) as u8) << 1
                | (above(i + 1, j + 1) as u8) << 2
                | (above(i, j + 1) as u8) << 3;
            if case == 0 || case == 15 {
                continue;
            }
            // Edges: 0 bottom, 1 right, 2 top, 3 left.
            let mut edge = |e: usize| match e {
                0 => crossing(h_id(i, j), (i, j), (i + 1, j)),
                1 => crossing(v_id(i + 1, j), (i + 1, j), (i + 1, j + 1)),
                2 => crossing(h_id(i, j + 1), (i, j + 1), (i + 1, j + 1)),
                _ => crossing(v_id(i, j), (i, j), (i, j + 1)),
            };
            let pairs: &[(usize, usize)] = match case {
                1 | 14 => &[(3, 0)],
                2 | 13 => &[(0, 1)],
                3 | 12 => &[(3, 1)],
                4 | 11 => &[(1, 2)],
                6 | 9 => &[(0, 2)],
                7 | 8 => &[(2, 3)],
                5 | 10 => {
                    let cx = (grid.coord(0, i) + grid.coord(0, i + 1)) * T::lit(0.5);
                    let cy = (grid.coord(1, j) + grid.coord(1, j + 1)) * T::lit(0.5);
                    let mid = match center {
                        Some(f) => f(&[cx, cy]),
                        None => {
                            (grid.at(&[i, j])
                                + grid.at(&[i + 1, j])
                                + grid.at(&[i + 1, j + 1])
                                + grid.at(&[i, j + 1]))
                                * T::lit(0.25)
                        }
                    };
                    // Separate the below-iso corners when the center is above.
                    let cut_odd = (mid > iso) == (case == 5);
                    if cut_odd {
                        &[(0, 1), (2, 3)]
                    } else {
                        &[(3, 0), (1, 2)]
                    }
                }
                _ => unreachable!(),
            };
            for &(a, b) in pairs {
                let (ea, eb) = (edge(a), edge(b));
                adjacency.entry(ea).or_default().push(eb);
                adjacency.entry(eb).or_default().push(ea);
            }
        }
    }

    Ok(chain_segments(&positions, &adjacency))
}

fn chain_segments<T: Real>(
    positions: &HashMap<usize, [T; 2]>,
    adjacency: &HashMap<usize, Vec<usize>>,
) -> Polyline2D<T> {
    let mut ids: Vec<usize> = adjacency.keys().copied().collect();
    ids.sort_unstable();
    let mut visited: HashMap<usize, bool> = ids.iter().map(|&i| (i, false)).collect();
    let mut out = Polyline2D::default();

    let walk = |start: usize, visited: &mut HashMap<usize, bool>| -> (Vec<usize>, bool) {
        let mut chain = vec![start];
        visited.insert(start, true);
        let mut prev = usize::MAX;
        let mut cur = start;
        loop {
            let next = adjacency[&cur]
                .iter()
                .copied()
                .find(|&n| n != prev && !visited[&n]);
            match next {
                Some(n) => {
                    visited.insert(n, true);
                    chain.push(n);
                    prev = cur;
                    cur = n;
                }
                None => {
                    let closed = chain.len() > 2 && adjacency[&cur].contains(&start);
                    return (chain, closed);
                }
            }
        }
    };

    let open_starts: Vec<usize> = ids
        .iter()
        .copied()
        .filter(|i| adjacency[i].len() == 1)
        .collect();
    let emit = |chain: Vec<usize>, closed: bool, out: &mut Polyline2D<T>| {
        let mut pts: Vec<[T; 2]> = Vec::with_capacity(chain.len());
        for id in chain {
            let p = positions[&id];
            if pts.last() != Some(&p) {
                pts.push(p);
            }
        }
        if closed && pts.len() > 1 && pts.first() == pts.last() {
            pts.pop();
        }
        if (closed && pts.len() >= 3) || (!closed && pts.len() >= 2) {
            out.loops.push(pts);
            out.closed.push(closed);
        }
    };
    for s in open_starts {
        if !visited[&s] {
            let (chain, _) = walk(s, &mut visited);
            emit(chain, false, &mut out);
        }
    }
    for &s in &ids {
        if !visited[&s] {
            let (chain, closed) = walk(s, &mut visited);
            emit(chain, closed, &mut out);
        }
    }
    out
}

fn triangle_area<T: Real>(a: &[T; 3], b: &[T; 3], c: &[T; 3]) -> T {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let n = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt() * T::lit(0.5)
}

/// Marching cubes over a 3D lattice. Vertices are shared between
/// neighboring cells, so the mesh is indexed and (away from the border)
/// closed.
pub fn marching_cubes<T: Real>(grid: &SampledGrid<T>, iso: T) -> Result<TriMesh<T>> {
    if grid.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: grid.dim(),
        });
    }
    let (nx, ny, nz) = (grid.res[0], grid.res[1], grid.res[2]);
    let edges_x = (nx - 1) * ny * nz;
    let edges_y = nx * (ny - 1) * nz;
    let mut vertex_of_edge = vec![usize::MAX; edges_x + edges_y + nx * ny * (nz - 1)];
    let lattice_edge = |base: (usize, usize, usize), axis: usize| -> usize {
        let (i, j, k) = base;
        match axis {
            0 => i + (nx - 1) * (j + ny * k),
            1 => edges_x + i + nx * (j + (ny - 1) * k),
            _ => edges_x + edges_y + i + nx * (j + ny * k),
        }
    };
    let point = |i: usize, j: usize, k: usize| [grid.coord(0, i), grid.coord(1, j), grid.coord(2, k)];

    let mut mesh = TriMesh::default();
    let min_area = T::lit(DEGENERATE_AREA);
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let corner = |c: usize| {
                    let (dx, dy, dz) = CORNER_OFFSETS[c];
                    (i + dx, j + dy, k + dz)
                };
                let mut case = 0usize;
                let mut vals = [T::zero(); 8];
                for (c, v) in vals.iter_mut().enumerate() {
                    let (a, b, cc) = corner(c);
                    *v = grid.at(&[a, b, cc]);
                    if !(*v > iso) {
                        case |= 1 << c;
                    }
                }
                if EDGE_TABLE[case] == 0 {
                    continue;
                }
                let mut local = [usize::MAX; 12];
                for (e, slot) in local.iter_mut().enumerate() {
                    if EDGE_TABLE[case] & (1 << e) == 0 {
                        continue;
                    }
                    let (ca, cb) = EDGE_CORNERS[e];
                    let (pa, pb) = (corner(ca), corner(cb));
                    let base = (pa.0.min(pb.0), pa.1.min(pb.1), pa.2.min(pb.2));
                    let axis = if pa.0 != pb.0 {
                        0
                    } else if pa.1 != pb.1 {
                        1
                    } else {
                        2
                    };
                    let id = lattice_edge(base, axis);
                    if vertex_of_edge[id] == usize::MAX {
                        let p = edge_point(
                            &point(pa.0, pa.1, pa.2),
                            &point(pb.0, pb.1, pb.2),
                            vals[ca],
                            vals[cb],
                            iso,
                        );
                        vertex_of_edge[id] = mesh.vertices.len();
                        mesh.vertices.push([p[0], p[1], p[2]]);
                    }
                    *slot = vertex_of_edge[id];
                }
                for tri in TRI_TABLE[case].chunks_exact(3) {
                    if tri[0] < 0 {
                        break;
                    }
                    let t = [
                        local[tri[0] as usize],
                        local[tri[1] as usize],
                        local[tri[2] as usize],
                    ];
                    let area = triangle_area(
                        &mesh.vertices[t[0]],
                        &mesh.vertices[t[1]],
                        &mesh.vertices[t[2]],
                    );
                    if area > min_area {
                        mesh.triangles.push(t);
                    }
                }
            }
        }
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::implicit::FnField;

    fn unit_square() -> Aabb<f64> {
        Aabb::from_f64(&[0.0, 0.0], &[1.0, 1.0])
    }

    #[test]
    fn constant_and_linear_sampling() {
        let one = FnField::new(2, |_: &[f64]| 1.0);
        let g = sample_grid(&one, &unit_square(), &[4, 5]).unwrap();
        assert!(g.values.iter().all(|&v| v == 1.0));
        let fx = FnField::new(2, |x: &[f64]| x[0]);
        let g = sample_grid(&fx, &unit_square(), &[3, 3]).unwrap();
        for j in 0..3 {
            assert_eq!(
                [g.at(&[0, j]), g.at(&[1, j]), g.at(&[2, j])],
                [0.0, 0.5, 1.0]
            );
        }
    }

    #[test]
    fn sampling_rejects_bad_input() {
        let fx = FnField::new(2, |x: &[f64]| x[0]);
        assert!(sample_grid(&fx, &unit_square(), &[1, 3]).is_err());
        let nan = FnField::new(2, |x: &[f64]| if x[0] > 0.6 { f64::NAN } else { 0.0 });
        match sample_grid(&nan, &unit_square(), &[3, 3]) {
            Err(Error::NonFinite(msg)) => assert!(msg.contains("index 2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_grid_is_empty() {
        let one = FnField::new(2, |_: &[f64]| 1.0);
        let g = sample_grid(&one, &unit_square(), &[8, 8]).unwrap();
        assert!(marching_squares(&g, 0.0).unwrap().is_empty());
        let one3 = FnField::new(3, |_: &[f64]| 1.0);
        let g3 = sample_grid(&one3, &Aabb::from_f64(&[0.0; 3], &[1.0; 3]), &[5, 5, 5]).unwrap();
        assert!(marching_cubes(&g3, 0.0).unwrap().is_empty());
    }

    #[test]
    fn horizontal_line_is_open_and_exact() {
        let f = FnField::new(2, |x: &[f64]| x[1] - 0.5);
        let g = sample_grid(&f, &unit_square(), &[10, 10]).unwrap();
        let p = marching_squares(&g, 0.0).unwrap();
        assert_eq!(p.len(), 1);
        assert!(!p.closed[0]);
        assert_eq!(p.loops[0].len(), 10);
        for q in p.points() {
            assert!((q[1] - 0.5).abs() < 1e-12);
        }
        let xs: Vec<f64> = p.points().map(|q| q[0]).collect();
        let (lo, hi) = xs.iter().fold((1.0_f64, 0.0_f64), |(l, h), &x| (l.min(x), h.max(x)));
        assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn saddle_uses_center_value() {
        // Corners: above at (0,0) and (1,1), below at the others.
        let b = unit_square();
        let g = SampledGrid::from_values(b, vec![2, 2], vec![1.0, -1.0, -1.0, 1.0]).unwrap();
        let joined = marching_squares_with_center(&g, 0.0, &|_| 1.0).unwrap();
        let split = marching_squares_with_center(&g, 0.0, &|_| -1.0).unwrap();
        assert_eq!(joined.len(), 2);
        assert_eq!(split.len(), 2);
        // With the center above, segments cut off the below corners (1,0) and (0,1).
        let seg = &joined.loops[0];
        let mid = [(seg[0][0] + seg[1][0]) / 2.0, (seg[0][1] + seg[1][1]) / 2.0];
        assert!(mid[0] > 0.5 && mid[1] < 0.5 || mid[0] < 0.5 && mid[1] > 0.5);
        let seg = &split.loops[0];
        let mid = [(seg[0][0] + seg[1][0]) / 2.0, (seg[0][1] + seg[1][1]) / 2.0];
        assert!(mid[0] < 0.5 && mid[1] < 0.5 || mid[0] > 0.5 && mid[1] > 0.5);
    }

    #[test]
    fn vertices_lie_on_interpolated_iso_level() {
        let f = FnField::new(2, |x: &[f64]| x[0] * x[0] + 0.7 * x[1] * x[1] - 0.3 + x[0] * x[1]);
        let g = sample_grid(&f, &Aabb::from_f64(&[-1.0, -1.0], &[1.0, 1.0]), &[23, 19]).unwrap();
        let p = marching_squares(&g, 0.0).unwrap();
        assert!(!p.is_empty());
        for q in p.points() {
            assert!(g.interpolate(q).abs() <= 1e-9);
        }
        let s = FnField::new(3, |x: &[f64]| x[0] * x[0] + x[1] * x[1] + 1.3 * x[2] * x[2] - 0.5);
        let g3 = sample_grid(&s, &Aabb::from_f64(&[-1.0; 3], &[1.0; 3]), &[11, 12, 13]).unwrap();
        let m = marching_cubes(&g3, 0.0).unwrap();
        for v in &m.vertices {
            assert!(g3.interpolate(v).abs() <= 1e-9);
        }
    }

    #[test]
    fn output_is_deterministic() {
        let f = FnField::new(2, |x: &[f64]| (3.0 * x[0]).sin() * (2.0 * x[1]).cos() - 0.1);
        let g = sample_grid(&f, &Aabb::from_f64(&[-2.0, -2.0], &[2.0, 2.0]), &[40, 40]).unwrap();
        assert_eq!(marching_squares(&g, 0.0).unwrap(), marching_squares(&g, 0.0).unwrap());
    }
}
