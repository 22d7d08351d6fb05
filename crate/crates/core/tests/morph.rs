mod common;

use common::*;
use varimorph::implicit::ImplicitFn;
use varimorph::metrics::{hausdorff_2d, Raster};
use varimorph::morph::{extract_zero_set, influence_sequence, GridSpec};
use varimorph::synth;
use varimorph::*;

/// Pixel shapes mapped into a unit-scale box: the image center goes to the
/// origin and `extent` pixels to one unit, as the command line does.
#[derive(Clone, Copy)]
struct Units {
    extent: f64,
}

impl Units {
    fn set(self, img: &GrayImage<f64>) -> ConstraintSet64 {
        image_to_constraints(img, 127.5, 1.0)
            .unwrap()
            .thinned_to(400)
            .map_positions(2, |p| vec![(p[0] - 31.5) / self.extent, (p[1] - 31.5) / self.extent])
    }

    fn grid(self) -> GridSpec<f64> {
        let h = 31.5 / self.extent;
        GridSpec::uniform(Aabb::from_f64(&[-h, -h], &[h, h]), 64)
    }

    fn to_pixels(self, g: &morph::Geometry<f64>) -> Polyline {
        g.contour()
            .unwrap()
            .map_points(|p| [p[0] * self.extent + 31.5, p[1] * self.extent + 31.5])
    }

    fn point(self, p: [f64; 2]) -> [f64; 2] {
        [(p[0] - 31.5) / self.extent, (p[1] - 31.5) / self.extent]
    }
}

const FULL: Units = Units { extent: 64.0 };

/// Separation small next to the shapes, where intermediate slices of
/// identical endpoints stay close to the endpoints.
const LOCAL_T_MAX: f64 = 0.1;

fn disk(cx: f64, cy: f64, r: f64) -> GrayImage<f64> {
    synth::image_from_sdf(64, 64, synth::disk_sdf(cx, cy, r))
}

fn square(cx: f64, cy: f64, half: f64) -> GrayImage<f64> {
    synth::image_from_sdf(64, 64, move |x, y| half - (x - cx).abs().max((y - cy).abs()))
}

fn disk_set(cx: f64, cy: f64, r: f64) -> ConstraintSet64 {
    FULL.set(&disk(cx, cy, r))
}

fn square_set(cx: f64, cy: f64, half: f64) -> ConstraintSet64 {
    FULL.set(&square(cx, cy, half))
}

fn image_set(img: &GrayImage<f64>) -> ConstraintSet64 {
    FULL.set(img)
}

fn pixel_grid() -> GridSpec<f64> {
    FULL.grid()
}

fn in_pixels(g: &morph::Geometry<f64>) -> Polyline {
    FULL.to_pixels(g)
}

/// Smallest and largest distance from `c` to the contour vertices.
fn radius_range(poly: &Polyline, c: [f64; 2]) -> (f64, f64) {
    let d: Vec<f64> = poly.points().map(|p| dist(p, &c)).collect();
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d.iter().copied().fold(0.0, f64::max);
    (lo, hi)
}

#[test]
fn embedding_rule() {
    let a = disk_set(32.0, 32.0, 10.0);
    let b = disk_set(30.0, 30.0, 14.0);
    let lifted = embed_pair(&a, &b, 2.5).unwrap();
    assert_eq!(lifted.dim, 3);
    let ab = &a.boundary[0];
    let la = &lifted.boundary[0];
    assert_eq!(la.position.coords()[..2], ab.position.coords()[..]);
    assert_eq!(la.position[2], 0.0);
    assert_eq!(la.value, 0.0);
    let bn = &b.normal[0];
    let lb = &lifted.normal[a.normal.len()];
    assert_eq!(lb.position.coords()[..2], bn.position.coords()[..]);
    assert_eq!(lb.position[2], 2.5);
    assert_eq!(lb.value, 1.0);
    assert_eq!(lifted.len(), a.len() + b.len());
    assert!(embed_pair(&a, &b, 0.0).is_err());
}

#[test]
fn empty_shape_rejected() {
    let a = disk_set(32.0, 32.0, 10.0);
    assert!(matches!(
        build_morph(&a, &ConstraintSet::empty(2), 1.0, KernelKind::Cubic),
        Err(Error::EmptyShape(_))
    ));
}

#[test]
fn endpoint_slices_interpolate() {
    let a = image_set(&synth::x_image());
    let b = image_set(&synth::o_image());
    let m = build_morph(&a, &b, 1.0, KernelKind::Cubic).unwrap();
    let (g0, g1) = (slice(&m, 0.0), slice(&m, 1.0));
    for c in &a.boundary {
        assert!(g0.value(c.position.coords()).abs() <= 1e-5);
    }
    for c in &a.normal {
        assert!((g0.value(c.position.coords()) - 1.0).abs() <= 1e-5);
    }
    for c in &b.boundary {
        assert!(g1.value(c.position.coords()).abs() <= 1e-5);
    }
}

#[test]
fn x_to_o_sequence() {
    let a = image_set(&synth::x_image());
    let b = image_set(&synth::o_image());
    assert!(a.len() <= 400 && b.len() <= 400);
    let m = build_morph(&a, &b, 1.0, KernelKind::Cubic).unwrap();
    let frames = morph_sequence(&m, 8, &pixel_grid()).unwrap();
    assert_eq!(frames.len(), 8);
    let reference = |img: GrayImage<f64>| marching_squares(&img.as_grid().unwrap(), 127.5).unwrap();
    assert!(hausdorff_2d(&in_pixels(&frames[0].geometry), &reference(synth::x_image())) <= 1.0);
    assert!(hausdorff_2d(&in_pixels(&frames[7].geometry), &reference(synth::o_image())) <= 1.0);
    for f in &frames[1..7] {
        let c = f.geometry.contour().unwrap();
        assert!(!c.is_empty() && c.closed.iter().all(|&b| b));
    }
    let bounds = pixel_grid().bounds;
    let chi: Vec<i64> = frames
        .iter()
        .map(|f| Raster::of(&slice(&m, f.coords[0]), &bounds, 128).unwrap().euler_characteristic())
        .collect();
    assert_eq!((chi[0], chi[7]), (1, 0));
    assert!((1..7).any(|i| chi[i - 1] == 1 && chi[i] == 0), "{chi:?}");
}

#[test]
fn two_frames_are_the_endpoints() {
    let a = disk_set(26.0, 32.0, 10.0);
    let b = disk_set(38.0, 32.0, 10.0);
    let m = build_morph(&a, &b, 1.0, KernelKind::Cubic).unwrap();
    let grid = pixel_grid();
    let frames = morph_sequence(&m, 2, &grid).unwrap();
    assert_eq!(frames.len(), 2);
    assert_eq!(frames[0].coords, vec![0.0]);
    assert_eq!(frames[1].coords, vec![1.0]);
    assert_eq!(frames[0].geometry, extract_zero_set(&slice(&m, 0.0), &grid).unwrap());
    assert_eq!(frames[1].geometry, extract_zero_set(&slice(&m, 1.0), &grid).unwrap());
    assert!(matches!(morph_sequence(&m, 1, &grid), Err(Error::InvalidParameter(_))));
}

#[test]
fn same_shape_at_both_ends() {
    let units = Units { extent: 32.0 };
    let a = units.set(&disk(31.5, 31.5, 16.0));
    let m = build_morph(&a, &a, LOCAL_T_MAX, KernelKind::Cubic).unwrap();
    for f in &morph_sequence(&m, 6, &units.grid()).unwrap() {
        let (lo, hi) = radius_range(&units.to_pixels(&f.geometry), [31.5, 31.5]);
        assert!(lo >= 15.0 && hi <= 17.0, "t {} radius {lo}..{hi}", f.coords[0]);
    }

    let units = Units { extent: 56.0 };
    let x = units.set(&synth::x_image());
    let mx = build_morph(&x, &x, LOCAL_T_MAX, KernelKind::Cubic).unwrap();
    let at_zero = units.to_pixels(&extract_zero_set(&slice(&mx, 0.0), &units.grid()).unwrap());
    for i in 1..5 {
        let t = LOCAL_T_MAX * i as f64 / 5.0;
        let mid = units.to_pixels(&extract_zero_set(&slice(&mx, t), &units.grid()).unwrap());
        assert!(hausdorff_2d(&mid, &at_zero) <= 0.5, "t {t}");
    }
}

#[test]
fn wide_separation_inflates_identical_endpoints() {
    let units = Units { extent: 32.0 };
    let a = units.set(&disk(31.5, 31.5, 16.0));
    let mid_radius = |t_max: f64| {
        let m = build_morph(&a, &a, t_max, KernelKind::Cubic).unwrap();
        let g = slice(&m, t_max / 2.0);
        ray_root(|x| g.value(x), &[0.0, 0.0], &[1.0, 0.0], 2.0).unwrap() * units.extent
    };
    let radii: Vec<f64> = [0.1, 0.25, 0.5, 1.0].into_iter().map(mid_radius).collect();
    assert!(radii.windows(2).all(|w| w[1] > w[0]), "{radii:?}");
    assert!((radii[0] - 16.0).abs() < 0.5);
}

#[test]
fn translated_disks_keep_their_area() {
    let units = Units { extent: 32.0 };
    let a = units.set(&disk(29.5, 31.5, 14.0));
    let b = units.set(&disk(33.5, 31.5, 14.0));
    let m = build_morph(&a, &b, LOCAL_T_MAX, KernelKind::Cubic).unwrap();
    let areas: Vec<f64> = morph_sequence(&m, 5, &units.grid())
        .unwrap()
        .iter()
        .map(|f| raster_area(&units.to_pixels(&f.geometry), 64, 64, 4))
        .collect();
    let first = areas[0];
    for a in &areas {
        assert!((a - first).abs() / first <= 0.02, "{areas:?}");
    }
}

#[test]
fn growing_disk_grows_monotonically() {
    let units = Units { extent: 44.0 };
    let a = units.set(&disk(31.5, 31.5, 8.0));
    let b = units.set(&disk(31.5, 31.5, 22.0));
    let m = build_morph(&a, &b, 1.0, KernelKind::Cubic).unwrap();
    let c = units.point([31.5, 31.5]);
    for ray in 0..8 {
        let ang = std::f64::consts::TAU * ray as f64 / 8.0 + 0.1;
        let dir = [ang.cos(), ang.sin()];
        let radii: Vec<f64> = (0..8)
            .map(|i| {
                let g = slice(&m, i as f64 / 7.0);
                ray_root(|x| g.value(x), &c, &dir, 1.0).unwrap()
            })
            .collect();
        assert!(radii.windows(2).all(|w| w[1] > w[0]), "ray {ray}: {radii:?}");
    }
}

#[test]
fn baseline_endpoints_and_linearity() {
    let x = signed_distance_field(&synth::x_image::<f64>(), 127.5).unwrap();
    let o = signed_distance_field(&synth::o_image::<f64>(), 127.5).unwrap();
    assert_eq!(sdf_morph_baseline(&x, &o, 0.0).unwrap(), x);
    assert_eq!(sdf_morph_baseline(&x, &o, 1.0).unwrap(), o);
    let mid = sdf_morph_baseline(&x, &x, 0.5).unwrap();
    for (a, b) in mid.values.iter().zip(&x.values) {
        assert!((a - b).abs() <= 1e-12);
    }
    assert!(sdf_morph_baseline(&x, &o, 1.5).is_err());
    let small = signed_distance_field(&GrayImage::from_fn(8, 8, |x, _| if x < 4 { 0.0 } else { 255.0 }).unwrap(), 127.5).unwrap();
    assert!(matches!(sdf_morph_baseline(&x, &small, 0.5), Err(Error::SizeMismatch(_))));
}

#[test]
fn influence_embedding_rule() {
    let sphere = points_normals_to_constraints(&synth::sphere_cloud::<f64>([0.0; 3], 1.0, 20), 0.1).unwrap();
    let lifted = embed_influence(&sphere, &sphere, &sphere, &InfluencePlacement::default()).unwrap();
    assert_eq!(lifted.dim, 5);
    let n = sphere.boundary.len();
    let p = sphere.boundary[0].position.coords();
    assert_eq!(lifted.boundary[0].position.coords(), &[p[0], p[1], p[2], 0.0, 0.0]);
    assert_eq!(lifted.boundary[n].position.coords(), &[p[0], p[1], p[2], 1.0, 0.0]);
    assert_eq!(lifted.boundary[2 * n].position.coords(), &[p[0], p[1], p[2], 0.5, 0.5]);
    let collinear = InfluencePlacement { a: [0.0, 0.0], b: [1.0, 0.0], c: [0.5, 0.0] };
    assert!(matches!(
        embed_influence(&sphere, &sphere, &sphere, &collinear),
        Err(Error::DegeneratePlacement(_))
    ));
}

#[test]
fn influence_slices_interpolate_each_shape() {
    let a = disk_set(31.5, 31.5, 12.0);
    let b = disk_set(31.5, 31.5, 20.0);
    let c = square_set(31.5, 31.5, 14.0);
    let placement = InfluencePlacement::default();
    let im = build_influence(&a, &b, &c, &placement, KernelKind::ThinPlate).unwrap();
    assert_eq!(im.model.dim(), 4);
    for (set, [s, t]) in [(&a, placement.a), (&b, placement.b), (&c, placement.c)] {
        let g = influence_slice(&im.model, s, t).unwrap();
        for q in &set.boundary {
            assert!(g.value(q.position.coords()).abs() <= 1e-5);
        }
    }
    let plain = build_morph(&a, &b, 1.0, KernelKind::ThinPlate).unwrap();
    assert!(influence_slice(&plain.model, 0.0, 0.0).is_err());
}

#[test]
fn influence_path_leaves_the_pair_plane() {
    let a = disk_set(31.5, 31.5, 12.0);
    let b = disk_set(31.5, 31.5, 20.0);
    let c = square_set(31.5, 31.5, 14.0);
    let im = build_influence(&a, &b, &c, &InfluencePlacement::default(), KernelKind::ThinPlate).unwrap();
    let grid = pixel_grid();
    let on = extract_zero_set(&influence_slice(&im.model, 0.5, 0.0).unwrap(), &grid).unwrap();
    let off = extract_zero_set(&influence_slice(&im.model, 0.5, 0.25).unwrap(), &grid).unwrap();
    assert!(hausdorff_2d(&in_pixels(&on), &in_pixels(&off)) > 0.0);

    let frames = influence_sequence(&im, &[[0.0, 0.0], [0.5, 0.25], [1.0, 0.0]], 5, &grid).unwrap();
    assert_eq!(frames[2].coords, vec![0.5, 0.25]);
    assert_eq!(frames[2].geometry, off);
}

#[test]
fn empty_influence_shape_reduces_to_pair_morph() {
    let a = image_set(&synth::x_image());
    let b = image_set(&synth::o_image());
    let kernel = KernelKind::Cubic;
    let im = build_influence(&a, &b, &ConstraintSet::empty(2), &InfluencePlacement::default(), kernel).unwrap();
    let pair = build_morph(&a, &b, 1.0, kernel).unwrap();
    let grid = pixel_grid();
    for s in [0.0, 0.3, 0.6, 1.0] {
        let lifted = extract_zero_set(&influence_slice(&im.model, s, 0.0).unwrap(), &grid).unwrap();
        let plain = extract_zero_set(&slice(&pair, s), &grid).unwrap();
        assert!(hausdorff_2d(&in_pixels(&lifted), &in_pixels(&plain)) <= 0.5);
    }
    let along_s = influence_sequence(&im, &[[0.0, 0.0], [1.0, 0.0]], 4, &grid).unwrap();
    let seq = morph_sequence(&pair, 4, &grid).unwrap();
    for (f, g) in along_s.iter().zip(&seq) {
        assert!(hausdorff_2d(&in_pixels(&f.geometry), &in_pixels(&g.geometry)) <= 0.5);
    }
}

#[test]
fn three_dimensional_morph() {
    let a = points_normals_to_constraints(&synth::sphere_cloud::<f64>([0.0; 3], 0.8, 60), 0.1).unwrap();
    let b = points_normals_to_constraints(&synth::rounded_box_cloud::<f64>([0.0; 3], [0.7; 3], 60), 0.1).unwrap();
    let m = build_morph(&a, &b, 1.0, KernelKind::default_for_dim(4)).unwrap();
    let grid = GridSpec::uniform(Aabb::from_f64(&[-1.2; 3], &[1.2; 3]), 25);
    let frames = morph_sequence(&m, 4, &grid).unwrap();
    for f in &frames {
        let mesh = f.geometry.surface().unwrap();
        assert!(mesh.is_closed());
        assert_eq!(mesh.euler_characteristic(), 2);
    }
    let g0 = slice(&m, 0.0);
    for c in &a.boundary {
        assert!(g0.value(c.position.coords()).abs() <= 1e-5);
    }
}
