//! Boundary and normal constraints from images and oriented points, plus
//! the signed distance transform used as a baseline implicit function.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extract::{marching_squares, SampledGrid};
use crate::geometry::{Aabb, Constraint, Point};
use crate::scalar::{norm, Real};

/// Value assigned to normal constraints unless configured otherwise.
pub const DEFAULT_NORMAL_VALUE: f64 = 1.0;
/// Offset used for oriented points inside a unit cube.
pub const DEFAULT_CLOUD_OFFSET: f64 = 0.01;
/// Image gradients shorter than this produce no constraint.
pub const MIN_GRADIENT_NORM: f64 = 1e-9;

/// Grayscale raster, row-major, pixel `(x, y)` centered at integer
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage<T> {
    width: usize,
    height: usize,
    pixels: Vec<T>,
}

impl<T: Real> GrayImage<T> {
    pub fn new(width: usize, height: usize, pixels: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("image has zero size".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::SizeMismatch(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        let hi = T::lit(255.0);
        if let Some(i) = pixels
            .iter()
            .position(|&p| !(p >= T::zero() && p <= hi))
        {
            return Err(Error::InvalidParameter(format!(
                "pixel {i} outside [0, 255]"
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> T) -> Result<Self> {
        let pixels = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        GrayImage::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.pixels[y * self.width + x]
    }

    /// Bilinear interpolation at a continuous position inside the pixel
    /// lattice.
    pub fn bilinear(&self, x: T, y: T) -> T {
        let max_x = T::from_usize_lossy(self.width - 1);
        let max_y = T::from_usize_lossy(self.height - 1);
        let x = x.max(T::zero()).min(max_x);
        let y = y.max(T::zero()).min(max_y);
        let x0 = x.floor().to_usize().unwrap_or(0).min(self.width.saturating_sub(2));
        let y0 = y.floor().to_usize().unwrap_or(0).min(self.height.saturating_sub(2));
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - T::from_usize_lossy(x0);
        let fy = y - T::from_usize_lossy(y0);
        let top = self.get(x0, y0) * (T::one() - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (T::one() - fx) + self.get(x1, y1) * fx;
        top * (T::one() - fy) + bottom * fy
    }

    pub fn min_max(&self) -> (T, T) {
        self.pixels.iter().fold(
            (T::infinity(), T::neg_infinity()),
            |(lo, hi), &v| (lo.min(v), hi.max(v)),
        )
    }

    /// The image as a lattice sample over pixel-center coordinates.
    pub fn as_grid(&self) -> Result<SampledGrid<T>> {
        SampledGrid::from_values(
            Aabb::new(
                vec![T::zero(), T::zero()],
                vec![
                    T::from_usize_lossy(self.width - 1),
                    T::from_usize_lossy(self.height - 1),
                ],
            )?,
            vec![self.width, self.height],
            self.pixels.clone(),
        )
    }
}

/// Positions with unit normals; no connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct PointNormalCloud<T> {
    pub points: Vec<[T; 3]>,
    pub normals: Vec<[T; 3]>,
}

impl<T: Real> PointNormalCloud<T> {
    pub fn new(points: Vec<[T; 3]>, normals: Vec<[T; 3]>) -> Result<Self> {
        if points.len() != normals.len() {
            return Err(Error::SizeMismatch(format!(
                "{} points but {} normals",
                points.len(),
                normals.len()
            )));
        }
        Ok(PointNormalCloud { points, normals })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Paired boundary (value 0) and normal (positive value) constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet<T> {
    pub dim: usize,
    pub boundary: Vec<Constraint<T>>,
    pub normal: Vec<Constraint<T>>,
    /// `pairing[i]` is the index in `normal` paired with `boundary[i]`.
    pub pairing: Vec<Option<usize>>,
}

impl<T: Real> ConstraintSet<T> {
    pub fn empty(dim: usize) -> Self {
        ConstraintSet {
            dim,
            boundary: Vec::new(),
            normal: Vec::new(),
            pairing: Vec::new(),
        }
    }

    /// Builds a set of one-to-one pairs.
    pub fn from_pairs(dim: usize, pairs: Vec<(Constraint<T>, Constraint<T>)>) -> Self {
        let n = pairs.len();
        let (boundary, normal) = pairs.into_iter().unzip();
        ConstraintSet {
            dim,
            boundary,
            normal,
            pairing: (0..n).map(Some).collect(),
        }
    }

    /// Splits a flat list by value: zero values are boundary constraints,
    /// the rest normal constraints. Each boundary constraint is paired with
    /// its nearest normal constraint.
    pub fn from_constraints(list: Vec<Constraint<T>>) -> Result<Self> {
        let dim = crate::geometry::common_dim(&list)?;
        let (boundary, normal): (Vec<_>, Vec<_>) =
            list.into_iter().partition(|c| c.value == T::zero());
        let pairing = boundary
            .iter()
            .map(|b| {
                normal
                    .iter()
                    .enumerate()
                    .map(|(i, n)| {
                        (i, crate::scalar::distance(b.position.coords(), n.position.coords()))
                    })
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                    .map(|(i, _)| i)
            })
            .collect();
        Ok(ConstraintSet {
            dim,
            boundary,
            normal,
            pairing,
        })
    }

    pub fn len(&self) -> usize {
        self.boundary.len() + self.normal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Boundary constraints followed by normal constraints.
    pub fn all(&self) -> Vec<Constraint<T>> {
        self.boundary.iter().chain(&self.normal).cloned().collect()
    }

    /// Applies `map` to every position.
    pub fn map_positions(&self, dim: usize, mut map: impl FnMut(&[T]) -> Vec<T>) -> Self {
        let mut apply = |c: &Constraint<T>| Constraint {
            position: Point::new(map(c.position.coords())).expect("finite mapped position"),
            value: c.value,
        };
        ConstraintSet {
            dim,
            boundary: self.boundary.iter().map(&mut apply).collect(),
            normal: self.normal.iter().map(&mut apply).collect(),
            pairing: self.pairing.clone(),
        }
    }

    /// Uniformly scales positions about the origin.
    pub fn scaled(&self, factor: T) -> Self {
        self.map_positions(self.dim, |p| p.iter().map(|&c| c * factor).collect())
    }

    /// Keeps every `stride`-th pair (boundary order), dropping the rest.
    pub fn thinned(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        let mut out = ConstraintSet::empty(self.dim);
        for (i, b) in self.boundary.iter().enumerate().step_by(stride) {
            out.boundary.push(b.clone());
            match self.pairing[i] {
                Some(n) => {
                    out.pairing.push(Some(out.normal.len()));
                    out.normal.push(self.normal[n].clone());
                }
                None => out.pairing.push(None),
            }
        }
        out
    }

    /// Thins with the smallest stride that brings the total count to at
    /// most `max_total`.
    pub fn thinned_to(&self, max_total: usize) -> Self {
        let mut stride = 1;
        loop {
            let t = self.thinned(stride);
            if t.len() <= max_total || t.boundary.len() <= 1 {
                return t;
            }
            stride += 1;
        }
    }
}

/// Options for [`image_to_constraints_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageConstraintOptions<T> {
    /// Distance from each boundary constraint to its normal constraint.
    pub normal_offset: T,
    /// Value assigned to normal constraints.
    pub normal_value: T,
    /// Keep every n-th crossing in scan order.
    pub stride: usize,
}

impl<T: Real> Default for ImageConstraintOptions<T> {
    fn default() -> Self {
        ImageConstraintOptions {
            normal_offset: T::one(),
            normal_value: T::lit(DEFAULT_NORMAL_VALUE),
            stride: 1,
        }
    }
}

/// Crossings skipped while generating image constraints.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SkipCounts {
    pub vanishing_gradient: usize,
    pub near_border: usize,
}

/// Central-difference gradient of the bilinearly interpolated image, with
/// a one-pixel step.
pub fn image_gradient<T: Real>(img: &GrayImage<T>, pos: [T; 2]) -> Result<[T; 2]> {
    let max_x = T::from_usize_lossy(img.width - 1);
    let max_y = T::from_usize_lossy(img.height - 1);
    let [x, y] = pos;
    if !(x >= T::one() && y >= T::one() && x <= max_x - T::one() && y <= max_y - T::one()) {
        return Err(Error::Border {
            x: x.as_f64(),
            y: y.as_f64(),
        });
    }
    let half = T::lit(0.5);
    Ok([
        (img.bilinear(x + T::one(), y) - img.bilinear(x - T::one(), y)) * half,
        (img.bilinear(x, y + T::one()) - img.bilinear(x, y - T::one())) * half,
    ])
}

/// Boundary crossings of level `m` found by scanning each pixel's east and
/// south neighbor; positions by linear interpolation between pixel centers.
pub fn level_crossings<T: Real>(img: &GrayImage<T>, m: T) -> Vec<[T; 2]> {
    let mut out = Vec::new();
    let straddles = |a: T, b: T| (a < m && b > m) || (a > m && b < m);
    for y in 0..img.height {
        for x in 0..img.width {
            let a = img.get(x, y);
            let (fx, fy) = (T::from_usize_lossy(x), T::from_usize_lossy(y));
            if x + 1 < img.width {
                let b = img.get(x + 1, y);
                if straddles(a, b) {
                    out.push([fx + (m - a) / (b - a), fy]);
                }
            }
            if y + 1 < img.height {
                let b = img.get(x, y + 1);
                if straddles(a, b) {
                    out.push([fx, fy + (m - a) / (b - a)]);
                }
            }
        }
    }
    out
}

/// Boundary constraints at level `m` with normal constraints one
/// `normal_offset` toward the brighter side.
pub fn image_to_constraints<T: Real>(
    img: &GrayImage<T>,
    m: T,
    normal_offset: T,
) -> Result<ConstraintSet<T>> {
    let options = ImageConstraintOptions {
        normal_offset,
        ..ImageConstraintOptions::default()
    };
    image_to_constraints_with(img, m, &options).map(|(set, _)| set)
}

pub fn image_to_constraints_with<T: Real>(
    img: &GrayImage<T>,
    m: T,
    options: &ImageConstraintOptions<T>,
) -> Result<(ConstraintSet<T>, SkipCounts)> {
    if !(options.normal_offset > T::zero()) {
        return Err(Error::InvalidParameter("normal offset must be positive".into()));
    }
    if !(options.normal_value > T::zero()) {
        return Err(Error::InvalidParameter("normal value must be positive".into()));
    }
    let (lo, hi) = img.min_max();
    if !(m > lo && m < hi) {
        return Err(Error::EmptyShape(format!(
            "level {m} not strictly inside the pixel range [{lo}, {hi}]"
        )));
    }
    let mut skips = SkipCounts::default();
    let mut pairs = Vec::new();
    for pos in level_crossings(img, m).into_iter().step_by(options.stride.max(1)) {
        let g = match image_gradient(img, pos) {
            Ok(g) => g,
            Err(_) => {
                skips.near_border += 1;
                continue;
            }
        };
        let len = norm(&g);
        if !(len > T::lit(MIN_GRADIENT_NORM)) {
            skips.vanishing_gradient += 1;
            continue;
        }
        let n = [g[0] / len, g[1] / len];
        let inner = [
            pos[0] + options.normal_offset * n[0],
            pos[1] + options.normal_offset * n[1],
        ];
        pairs.push((
            Constraint::new(Point::new(pos.to_vec())?, T::zero())?,
            Constraint::new(Point::new(inner.to_vec())?, options.normal_value)?,
        ));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyShape("no usable boundary crossings".into()));
    }
    Ok((ConstraintSet::from_pairs(2, pairs), skips))
}

/// One boundary constraint per point and one normal constraint at
/// `p - k n` (inside, for outward normals).
pub fn points_normals_to_constraints<T: Real>(
    cloud: &PointNormalCloud<T>,
    k: T,
) -> Result<ConstraintSet<T>> {
    if !(k > T::zero()) {
        return Err(Error::InvalidParameter(format!("normal offset {k} must be positive")));
    }
    if cloud.is_empty() {
        return Err(Error::EmptyShape("point cloud has no points".into()));
    }
    let tol = T::lit(1e-3);
    let mut pairs = Vec::with_capacity(cloud.len());
    for (i, (p, n)) in cloud.points.iter().zip(&cloud.normals).enumerate() {
        let len = norm(n);
        if !((len - T::one()).abs() <= tol) {
            return Err(Error::InvalidNormal {
                index: i,
                length: len.as_f64(),
            });
        }
        let inner: Vec<T> = (0..3).map(|a| p[a] - k * n[a]).collect();
        pairs.push((
            Constraint::new(Point::new(p.to_vec())?, T::zero())?,
            Constraint::new(Point::new(inner)?, T::lit(DEFAULT_NORMAL_VALUE))?,
        ));
    }
    Ok(ConstraintSet::from_pairs(3, pairs))
}

/// Per-pixel signed distance, positive inside.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfGrid<T> {
    pub width: usize,
    pub height: usize,
    pub values: Vec<T>,
}

impl<T: Real> SdfGrid<T> {
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    /// The distance values as a lattice over pixel-center coordinates.
    pub fn as_grid(&self) -> Result<SampledGrid<T>> {
        SampledGrid::from_values(
            Aabb::new(
                vec![T::zero(), T::zero()],
                vec![
                    T::from_usize_lossy(self.width - 1),
                    T::from_usize_lossy(self.height - 1),
                ],
            )?,
            vec![self.width, self.height],
            self.values.clone(),
        )
    }
}

fn point_segment_distance<T: Real>(p: [T; 2], a: [T; 2], b: [T; 2]) -> T {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > T::zero() {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    (d[0] * d[0] + d[1] * d[1]).sqrt()
}

/// Brute-force signed Euclidean distance from each pixel center to the
/// sub-pixel boundary polyline at level `m`.
pub fn signed_distance_field<T: Real>(img: &GrayImage<T>, m: T) -> Result<SdfGrid<T>> {
    let contour = marching_squares(&img.as_grid()?, m)?;
    let segments = contour.segments();
    if segments.is_empty() {
        return Err(Error::EmptyShape(format!("no crossings of level {m}")));
    }
    let values = (0..img.width * img.height)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % img.width, i / img.width);
            let p = [T::from_usize_lossy(x), T::from_usize_lossy(y)];
            let d = segments
                .iter()
                .map(|&(a, b)| point_segment_distance(p, a, b))
                .fold(T::infinity(), T::min);
            if img.get(x, y) >= m {
                d
            } else {
                -d
            }
        })
        .collect();
    Ok(SdfGrid {
        width: img.width,
        height: img.height,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_image(a: f64, b: f64) -> GrayImage<f64> {
        GrayImage::new(2, 1, vec![a, b]).unwrap()
    }

    #[test]
    fn crossing_position_by_linear_interpolation() {
        let c = level_crossings(&pair_image(0.0, 255.0), 127.5);
        assert_eq!(c, vec![[0.5, 0.0]]);
        let c = level_crossings(&pair_image(0.0, 255.0), 63.75);
        assert_eq!(c, vec![[0.25, 0.0]]);
        let c = level_crossings(&pair_image(255.0, 0.0), 63.75);
        assert_eq!(c, vec![[0.75, 0.0]]);
    }

    #[test]
    fn gradient_of_affine_images_is_exact() {
        let ramp = GrayImage::from_fn(8, 8, |x, _| x as f64).unwrap();
        assert_eq!(image_gradient(&ramp, [3.3, 4.1]).unwrap(), [1.0, 0.0]);
        let flat = GrayImage::from_fn(8, 8, |_, _| 40.0).unwrap();
        assert_eq!(image_gradient(&flat, [3.0, 3.0]).unwrap(), [0.0, 0.0]);
        let plane = GrayImage::from_fn(10, 10, |x, y| 2.0 * x as f64 + 5.0 * y as f64).unwrap();
        let g = image_gradient(&plane, [4.37, 2.81]).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-9 && (g[1] - 5.0).abs() < 1e-9);
        assert!(matches!(
            image_gradient(&plane, [0.5, 4.0]),
            Err(Error::Border { .. })
        ));
    }

    #[test]
    fn constant_image_is_empty_shape() {
        let flat = GrayImage::from_fn(8, 8, |_, _| 40.0).unwrap();
        assert!(matches!(
            image_to_constraints(&flat, 40.0, 1.0),
            Err(Error::EmptyShape(_))
        ));
        assert!(matches!(
            signed_distance_field(&flat, 40.0),
            Err(Error::EmptyShape(_))
        ));
    }

    #[test]
    fn image_rejects_out_of_range_pixels() {
        assert!(GrayImage::new(1, 1, vec![256.0]).is_err());
        assert!(GrayImage::new(2, 1, vec![0.0]).is_err());
    }

    #[test]
    fn cloud_offsets_inward() {
        let cloud = PointNormalCloud::<f64>::new(vec![[0.5, 0.5, 0.5]], vec![[0.0, 0.0, 1.0]]).unwrap();
        let set = points_normals_to_constraints(&cloud, 0.01).unwrap();
        assert_eq!(set.boundary[0].position.coords(), &[0.5, 0.5, 0.5]);
        assert_eq!(set.boundary[0].value, 0.0);
        let n = set.normal[0].position.coords();
        assert_eq!(n[..2], [0.5, 0.5]);
        assert!((n[2] - 0.49).abs() < 1e-15);
        assert_eq!(set.normal[0].value, 1.0);
        assert!(points_normals_to_constraints(&cloud, 0.0).is_err());
        let bad = PointNormalCloud::new(vec![[0.0; 3]], vec![[0.0, 0.0, 1.1]]).unwrap();
        assert!(matches!(
            points_normals_to_constraints(&bad, 0.01),
            Err(Error::InvalidNormal { index: 0, .. })
        ));
    }

    #[test]
    fn cube_face_centers_offset_inside() {
        let mut pts = Vec::new();
        let mut nrm = Vec::new();
        for axis in 0..3 {
            for &s in &[-1.0, 1.0] {
                let mut p = [0.5; 3];
                p[axis] = 0.5 + 0.5 * s;
                let mut n = [0.0; 3];
                n[axis] = s;
                pts.push(p);
                nrm.push(n);
            }
        }
        let set = points_normals_to_constraints(&PointNormalCloud::new(pts, nrm).unwrap(), 0.01)
            .unwrap();
        for c in &set.normal {
            assert!(c.position.coords().iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn thinning_keeps_pairs_together() {
        let pairs: Vec<_> = (0..10)
            .map(|i| {
                (
                    Constraint::at(&[i as f64, 0.0], 0.0),
                    Constraint::at(&[i as f64, 1.0], 1.0),
                )
            })
            .collect();
        let set = ConstraintSet::<f64>::from_pairs(2, pairs);
        let t = set.thinned(3);
        assert_eq!(t.boundary.len(), 4);
        for (i, b) in t.boundary.iter().enumerate() {
            let n = &t.normal[t.pairing[i].unwrap()];
            assert_eq!(b.position[0], n.position[0]);
        }
        assert!(set.thinned_to(7).len() <= 7);
    }
}
