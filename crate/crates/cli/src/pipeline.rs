use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use varimorph::constraints::{image_to_constraints_with, ImageConstraintOptions};
use varimorph::extract::marching_squares;
use varimorph::io::{self, SlicePlacement};
use varimorph::morph::{influence_sequence, Frame, Geometry, GridSpec};
use varimorph::slices::{place_oriented, reconstruct, ReconstructOptions};
use varimorph::warp::warped_morph;
use varimorph::{
    build_influence, build_morph, morph_sequence, points_normals_to_constraints,
    sdf_morph_baseline, signed_distance_field, solve_model_with, Aabb, ConstraintSet,
    GrayImage, ImplicitFn, InfluencePlacement, KernelKind, OrientedSlice, PointNormalCloud,
    RbfModel, SliceFrame, SolveOptions,
};

use crate::config::{RunConfig, Task};
use crate::error::{CliError, StageExt};
use crate::manifest::{RunManifest, ShapeCounts, SolverDiagnostics};

/// Normal offset for meshes, as a fraction of the longest bounding-box
/// extent (`0.01` for a shape filling the unit cube).
const MESH_OFFSET_FRACTION: f64 = 0.01;
const IMAGE_OFFSET_PX: f64 = 1.0;
const MESH_RES: usize = 32;
const MESH_PAD_FRACTION: f64 = 0.1;

/// Maps input coordinates into a box of unit longest side centered at the
/// origin (or leaves them alone).
#[derive(Debug, Clone)]
struct UnitBox {
    center: Vec<f64>,
    scale: f64,
}

impl UnitBox {
    fn identity(dim: usize) -> Self {
        UnitBox {
            center: vec![0.0; dim],
            scale: 1.0,
        }
    }

    fn around(bounds: &Aabb<f64>, enabled: bool) -> Self {
        if !enabled {
            return Self::identity(bounds.dim());
        }
        let longest = (0..bounds.dim()).map(|a| bounds.extent(a)).fold(0.0, f64::max);
        UnitBox {
            center: bounds.center(),
            scale: if longest > 0.0 { longest } else { 1.0 },
        }
    }

    fn forward(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(&self.center)
            .map(|(x, c)| (x - c) / self.scale)
            .collect()
    }

    fn inverse<const D: usize>(&self, p: [f64; D]) -> [f64; D] {
        std::array::from_fn(|a| p[a] * self.scale + self.center[a])
    }

    fn set(&self, s: &ConstraintSet<f64>) -> ConstraintSet<f64> {
        s.map_positions(s.dim, |p| self.forward(p))
    }

    fn bounds(&self, b: &Aabb<f64>) -> Aabb<f64> {
        Aabb::new(self.forward(&b.min), self.forward(&b.max)).expect("ordered box")
    }

    fn frame(&self, f: Frame<f64>) -> Frame<f64> {
        let geometry = match f.geometry {
            Geometry::Contour(c) => Geometry::Contour(c.map_points(|p| self.inverse(p))),
            Geometry::Surface(m) => Geometry::Surface(m.map_vertices(|v| self.inverse(v))),
        };
        Frame {
            coords: f.coords,
            geometry,
        }
    }
}

struct Run<'a> {
    config: &'a RunConfig,
    manifest: RunManifest,
    clock: Instant,
}

impl<'a> Run<'a> {
    fn new(config: &'a RunConfig) -> Self {
        Run {
            config,
            manifest: RunManifest::new(config.clone(), io::geometry_digits()),
            clock: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let ms = self.clock.elapsed().as_secs_f64() * 1e3;
        self.manifest.timings_ms.push((stage.to_string(), ms));
        self.clock = Instant::now();
    }

    fn kernel(&self, solve_dim: usize) -> KernelKind {
        self.config
            .kernel
            .unwrap_or_else(|| KernelKind::default_for_dim(solve_dim))
    }

    fn check_dim(&self, shape_dim: usize) -> Result<(), CliError> {
        match self.config.dim_hint {
            Some(d) if d != shape_dim => Err(CliError::Usage(format!(
                "--dim-hint {d} does not match {shape_dim}D input shapes"
            ))),
            _ => Ok(()),
        }
    }

    fn count(&mut self, name: &str, set: &ConstraintSet<f64>) {
        self.manifest.shapes.push(ShapeCounts {
            name: name.to_string(),
            boundary: set.boundary.len(),
            normal: set.normal.len(),
        });
    }

    fn solved(&mut self, model: &RbfModel<f64>) {
        self.manifest.solver.push(SolverDiagnostics {
            dim: model.dim(),
            kernel: model.kernel().name().to_string(),
            centers: model.len(),
            min_pivot: model.report().map(|r| r.min_pivot),
            affine_rank: model.report().map(|r| r.affine_rank),
        });
    }

    fn output_dir(&self) -> Result<&'a Path, CliError> {
        let dir = self.config.out.as_path();
        fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(dir)
    }

    fn wrote(&mut self, path: &Path) {
        let shown = path
            .strip_prefix(&self.config.out)
            .ok()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(path);
        self.manifest.outputs.push(shown.display().to_string());
    }

    fn image_set(&self, img: &GrayImage<f64>) -> varimorph::Result<ConstraintSet<f64>> {
        let options = ImageConstraintOptions {
            normal_offset: self.config.normal_offset.unwrap_or(IMAGE_OFFSET_PX),
            stride: self.config.stride,
            ..ImageConstraintOptions::default()
        };
        image_to_constraints_with(img, self.config.level, &options).map(|(set, _)| set)
    }

    fn mesh_set(&self, cloud: &PointNormalCloud<f64>, extent: f64) -> varimorph::Result<ConstraintSet<f64>> {
        let k = self
            .config
            .normal_offset
            .unwrap_or(MESH_OFFSET_FRACTION * extent);
        Ok(points_normals_to_constraints(cloud, k)?.thinned(self.config.stride))
    }

    fn write_frames(&mut self, frames: Vec<Frame<f64>>) -> Result<(), CliError> {
        let dir = self.output_dir()?;
        for (i, frame) in frames.iter().enumerate() {
            let path = match &frame.geometry {
                Geometry::Contour(c) => {
                    let p = dir.join(format!("frame_{i:03}.txt"));
                    io::save_polyline(c, &p).stage("write")?;
                    p
                }
                Geometry::Surface(m) => {
                    let p = dir.join(format!("frame_{i:03}.obj"));
                    io::save_obj(m, &p).stage("write")?;
                    p
                }
            };
            self.wrote(&path);
        }
        Ok(())
    }

    fn finish(mut self, manifest_path: PathBuf) -> Result<RunManifest, CliError> {
        self.lap("write");
        self.manifest.save(&manifest_path)?;
        Ok(self.manifest)
    }
}

fn image_domain(images: &[&GrayImage<f64>]) -> Aabb<f64> {
    let w = images.iter().map(|i| i.width()).max().unwrap_or(1);
    let h = images.iter().map(|i| i.height()).max().unwrap_or(1);
    Aabb::from_f64(&[0.0, 0.0], &[(w - 1) as f64, (h - 1) as f64])
}

fn cloud_bounds(clouds: &[&PointNormalCloud<f64>]) -> varimorph::Result<Aabb<f64>> {
    Aabb::around(clouds.iter().flat_map(|c| c.points.iter().map(|p| p.as_slice())))
        .ok_or_else(|| varimorph::Error::EmptyShape("mesh has no vertices".into()))
}

/// Lattice points per axis: `n` along the longest axis, proportional
/// elsewhere.
fn grid_for(bounds: Aabb<f64>, n: usize) -> GridSpec<f64> {
    let longest = (0..bounds.dim()).map(|a| bounds.extent(a)).fold(0.0, f64::max);
    let res = (0..bounds.dim())
        .map(|a| (((bounds.extent(a) / longest) * (n - 1) as f64).ceil() as usize).max(1) + 1)
        .collect();
    GridSpec::new(bounds, res)
}

fn image_grid(domain: &Aabb<f64>, unit: &UnitBox, res: Option<usize>) -> GridSpec<f64> {
    let n = res.unwrap_or((domain.extent(0).max(domain.extent(1))) as usize + 1);
    grid_for(unit.bounds(domain), n)
}

fn mesh_grid(bounds: &Aabb<f64>, unit: &UnitBox, res: Option<usize>) -> GridSpec<f64> {
    let b = unit.bounds(bounds);
    grid_for(b.padded(MESH_PAD_FRACTION * b.diagonal()), res.unwrap_or(MESH_RES))
}

fn is_obj(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("obj"))
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// Runs the configured pipeline, writes its outputs and manifest, and
/// returns the manifest.
pub fn run_pipeline(config: &RunConfig) -> Result<RunManifest, CliError> {
    match config.task {
        Task::Build => run_build(config),
        Task::Morph2d => run_morph2d(config),
        Task::Morph3d => run_morph3d(config),
        Task::Reconstruct => run_reconstruct(config),
        Task::Influence => run_influence(config),
        Task::Warp => run_warp(config),
        Task::BaselineSdf => run_baseline(config),
    }
}

fn file_manifest(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn run_build(config: &RunConfig) -> Result<RunManifest, CliError> {
    let mut run = Run::new(config);
    let input = config.input("input");
    let constraints = if is_pgm(input) {
        let img = io::load_pgm::<f64>(input).stage("read")?;
        run.lap("read");
        let set = run.image_set(&img).stage("constraint-gen")?;
        run.count("input", &set);
        set.all()
    } else if is_obj(input) {
        let cloud = io::load_obj::<f64>(input).stage("read")?;
        run.lap("read");
        let b = cloud_bounds(&[&cloud]).stage("constraint-gen")?;
        let extent = (0..3).map(|a| b.extent(a)).fold(0.0, f64::max);
        let set = run.mesh_set(&cloud, extent).stage("constraint-gen")?;
        run.count("input", &set);
        set.all()
    } else {
        let list = io::load_constraints::<f64>(input).stage("read")?;
        run.lap("read");
        list
    };
    if let Some(c) = constraints.first() {
        run.check_dim(c.dim())?;
    }
    run.lap("constraint-gen");
    let dim = constraints.first().map(|c| c.dim()).unwrap_or(0);
    let model = solve_model_with(
        &constraints,
        run.kernel(dim),
        SolveOptions {
            normalize: config.normalize,
        },
    )
    .stage("solve")?;
    run.solved(&model);
    run.lap("solve");
    io::save_model(&model, &config.out).stage("write")?;
    run.wrote(&config.out);
    run.finish(file_manifest(&config.out))
}

fn load_images(run: &mut Run, roles: &[&str]) -> Result<Vec<GrayImage<f64>>, CliError> {
    run.check_dim(2)?;
    let images = roles
        .iter()
        .map(|r| io::load_pgm::<f64>(run.config.input(r)).stage("read"))
        .collect::<Result<Vec<_>, _>>()?;
    run.lap("read");
    Ok(images)
}

fn image_sets(run: &mut Run, roles: &[&str], images: &[GrayImage<f64>], unit: &UnitBox) -> Result<Vec<ConstraintSet<f64>>, CliError> {
    let mut sets = Vec::new();
    for (role, img) in roles.iter().zip(images) {
        let set = run.image_set(img).stage("constraint-gen")?;
        run.count(role, &set);
        sets.push(unit.set(&set));
    }
    run.lap("constraint-gen");
    Ok(sets)
}

fn run_morph2d(config: &RunConfig) -> Result<RunManifest, CliError> {
    let mut run = Run::new(config);
    let images = load_images(&mut run, &["a", "b"])?;
    let domain = image_domain(&[&images[0], &images[1]]);
    let unit = UnitBox::around(&domain, config.normalize);
    let sets = image_sets(&mut run, &["a", "b"], &images, &unit)?;
    let morph = build_morph(&sets[0], &sets[1], config.t_max, run.kernel(3)).stage("morph")?;
    run.solved(&morph.model);
    run.lap("solve");
    let grid = image_grid(&domain, &unit, config.res);
    let frames = morph_sequence(&morph, config.frames, &grid).stage("extract")?;
    run.lap("extract");
    if config.raster {
        let dir = run.output_dir()?;
        for (i, frame) in frames.iter().enumerate() {
            let g = varimorph::slice(&morph, frame.coords[0]);
            let img = GrayImage::from_fn(images[0].width(), images[0].height(), |x, y| {
                let p = unit.forward(&[x as f64, y as f64]);
                if g.value(&p) > 0.0 {
                    255.0
                } else {
                    0.0
                }
            })
            .stage("extract")?;
            let path = dir.join(format!("frame_{i:03}.pgm"));
            io::save_pgm(&img, &path).stage("write")?;
            run.wrote(&path);
        }
    }
    run.write_frames(frames.into_iter().map(|f| unit.frame(f)).collect())?;
    let manifest = config.out.join("manifest.json");
    run.finish(manifest)
}

fn load_clouds(run: &mut Run, roles: &[&str]) -> Result<Vec<PointNormalCloud<f64>>, CliError> {
    run.check_dim(3)?;
    let clouds = roles
        .iter()
        .map(|r| io::load_obj::<f64>(run.config.input(r)).stage("read"))
        .collect::<Result<Vec<_>, _>>()?;
    run.lap("read");
    Ok(clouds)
}

fn mesh_sets(run: &mut Run, roles: &[&str], clouds: &[PointNormalCloud<f64>], bounds: &Aabb<f64>, unit: &UnitBox) -> Result<Vec<ConstraintSet<f64>>, CliError> {
    let extent = (0..3).map(|a| bounds.extent(a)).fold(0.0, f64::max);
    let mut sets = Vec::new();
    for (role, cloud) in roles.iter().zip(clouds) {
        let set = run.mesh_set(cloud, extent).stage("constraint-gen")?;
        run.count(role, &set);
        sets.push(unit.set(&set));
    }
    run.lap("constraint-gen");
    Ok(sets)
}

fn run_morph3d(config: &RunConfig) -> Result<RunManifest, CliError> {
    let mut run = Run::new(config);
    let clouds = load_clouds(&mut run, &["a", "b"])?;
    let bounds = cloud_bounds(&[&clouds[0], &clouds[1]]).stage("constraint-gen")?;
    let unit = UnitBox::around(&bounds, config.normalize);
    let sets = mesh_sets(&mut run, &["a", "b"], &clouds, &bounds, &unit)?;
    let morph = build_morph(&sets[0], &sets[1], config.t_max, run.kernel(4)).stage("morph")?;
    run.solved(&morph.model);
    run.lap("solve");
    let grid = mesh_grid(&bounds, &unit, config.res);
    let frames = morph_sequence(&morph, config.frames, &grid).stage("extract")?;
    run.lap("extract");
    run.write_frames(frames.into_iter().map(|f| unit.frame(f)).collect())?;
    run.finish(config.out.join("manifest.json"))
}

fn run_reconstruct(config: &RunConfig) -> Result<RunManifest, CliError> {
    let mut run = Run::new(config);
    run.check_dim(2)?;
    let entries = io::load_slice_manifest::<f64>(config.input("stack")).stage("read")?;
    if entries.is_empty() {
        return Err(CliError::Stage {
            stage: "read",
            source: varimorph::Error::EmptyShape("slice manifest lists no slices".into()),
        });
    }
    let mut slices = Vec::with_capacity(entries.len());
    for (i, e) in entries.iter().enumerate() {
        let list = io::load_constraints::<f64>(&e.path).stage("read")?;
        let set = ConstraintSet::from_constraints(list).stage("constraint-gen")?;
        if set.dim != 2 {
            return Err(CliError::Stage {
                stage: "constraint-gen",
                source: varimorph::Error::DimensionMismatch {
                    expected: 2,
                    found: set.dim,
                },
            });
        }
        run.count(&format!("slice{i}"), &set);
        let frame = match &e.placement {
            SlicePlacement::Height(z) => SliceFrame::horizontal(*z),
            SlicePlacement::Rigid(m) => SliceFrame::from_rigid(m).stage("constraint-gen")?,
        };
        slices.push(OrientedSlice {
            constraints: set,
            frame,
        });
    }
    run.lap("read");
    let mut heights: Vec<f64> = entries
        .iter()
        .filter_map(|e| match e.placement {
            SlicePlacement::Height(z) => Some(z),
            SlicePlacement::Rigid(_) => None,
        })
        .collect();
    let max_spacing = if heights.len() == entries.len() {
        heights.sort_by(f64::total_cmp);
        heights.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    } else {
        0.0
    };
    let placed = place_oriented(&slices).stage("slice-recon")?;
    run.lap("constraint-gen");
    let options = ReconstructOptions {
        res: config.res.unwrap_or(48),
        max_spacing,
    };
    let rec = reconstruct(&placed.constraints, run.kernel(3), &options).stage("slice-recon")?;
    run.solved(&rec.model);
    run.lap("solve");
    io::save_obj(&rec.mesh, &config.out).stage("write")?;
    run.wrote(&config.out);
    run.finish(file_manifest(&config.out))
}

fn run_influence(config: &RunConfig) -> Result<RunManifest, CliError> {
    let mut run = Run::new(config);
    let roles = ["a", "b", "c"];
    let path = config.path.clone().unwrap_or_else(|| vec![[0.0, 0.0], [1.0, 0.0]]);
    let placement = InfluencePlacement::default();
    let (model, grid, unit) = if is_obj(config.input("a")) {
        let clouds = load_clouds(&mut run, &roles)?;
        let bounds = cloud_bounds(&[&clouds[0], &clouds[1], &clouds[2]]).stage("constraint-gen")?;
        let unit = UnitBox::around(&bounds, config.normalize);
        let sets = mesh_sets(&mut run, &roles, &clouds, &bounds, &unit)?;
        let m = build_influence(&sets[0], &sets[1], &sets[2], &placement, run.kernel(5))
            .stage("morph")?;
        (m, mesh_grid(&bounds, &unit, config.res), unit)
    } else {
        let images = load_images(&mut run, &roles)?;
        let domain = image_domain(&[&images[0], &images[1], &images[2]]);
        let unit = UnitBox::around(&domain, config.normalize);
        let sets = image_sets(&mut run, &roles, &images, &unit)?;
        let m = build_influence(&sets[0], &sets[1], &sets[2], &placement, run.kernel(4))
            .stage("morph")?;
        (m, image_grid(&domain, &unit, config.res), unit)
    };
    run.solved(&model.model);
    run.lap("solve");
    let frames = influence_sequence(&model, &path, config.frames, &grid).stage("extract")?;
    run.lap("extract");
    run.write_frames(frames.into_iter().map(|f| unit.frame(f)).collect())?;
    run.finish(config.out.join("manifest.json"))
}

fn run_warp(config: &RunConfig) -> Result<RunManifest, CliError> {
    let mut run = Run::new(config);
    let images = load_images(&mut run, &["a", "b"])?;
    let corr = io::load_correspondences::<f64>(config.input("corr")).stage("read")?;
    if corr.dim() != 2 {
        return Err(CliError::Stage {
            stage: "read",
            source: varimorph::Error::DimensionMismatch {
                expected: 2,
                found: corr.dim(),
            },
        });
    }
    let domain = image_domain(&[&images[0], &images[1]]);
    let unit = UnitBox::around(&domain, config.normalize);
    let sets = image_sets(&mut run, &["a", "b"], &images, &unit)?;
    let map = |pts: &[varimorph::Point<f64>]| {
        pts.iter()
            .map(|p| varimorph::Point::new(unit.forward(p.coords())))
            .collect::<varimorph::Result<Vec<_>>>()
    };
    let corr = map(&corr.a_points)
        .and_then(|a| Ok((a, map(&corr.b_points)?)))
        .and_then(|(a, b)| varimorph::CorrespondenceSet::new(a, b))
        .stage("warp")?;
    let grid = image_grid(&domain, &unit, config.res);
    let frames = warped_morph(
        &sets[0],
        &sets[1],
        &corr,
        config.t_max,
        run.kernel(3),
        KernelKind::default_for_dim(2),
        config.frames,
        &grid,
    )
    .stage("warp")?;
    run.lap("solve+extract");
    run.write_frames(frames.into_iter().map(|f| unit.frame(f)).collect())?;
    run.finish(config.out.join("manifest.json"))
}

fn run_baseline(config: &RunConfig) -> Result<RunManifest, CliError> {
    let mut run = Run::new(config);
    let images = load_images(&mut run, &["a", "b"])?;
    let sdfs = images
        .iter()
        .map(|img| signed_distance_field(img, config.level).stage("sdf"))
        .collect::<Result<Vec<_>, _>>()?;
    run.lap("sdf");
    let dir = run.output_dir()?;
    for (name, sdf) in ["sdf_a.pgm", "sdf_b.pgm"].iter().zip(&sdfs) {
        let path = dir.join(name);
        io::save_sdf_pgm(sdf, &path).stage("write")?;
        run.wrote(&path);
        run.wrote(&io::sidecar_path(&path));
    }
    let n = config.frames;
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let alpha = i as f64 / (n - 1) as f64;
        let blend = sdf_morph_baseline(&sdfs[0], &sdfs[1], alpha).stage("sdf")?;
        let grid = blend.as_grid().stage("extract")?;
        frames.push(Frame {
            coords: vec![alpha],
            geometry: Geometry::Contour(marching_squares(&grid, 0.0).stage("extract")?),
        });
    }
    run.lap("extract");
    run.write_frames(frames)?;
    run.finish(config.out.join("manifest.json"))
}
