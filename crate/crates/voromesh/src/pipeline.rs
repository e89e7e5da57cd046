//! Stages of a reconstruction run, each timed.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voromesh_core::extract::{
    assign_occupancy, check_watertight, extract_voromesh, repair_nonmanifold, RepairReport, VoroMeshSurface,
    WatertightReport,
};
use voromesh_core::mesh::{normalize, NormalizationTransform, TriangleMesh};
use voromesh_core::metrics::{self, MetricReport, DEFAULT_F1_THRESHOLD, DEFAULT_METRIC_SAMPLES};
use voromesh_core::optim::{fit, init_generators, FitConfig, FitResult, GridInit, DUPLICATE_JITTER, DUPLICATE_TOLERANCE};
use voromesh_core::sampling::{default_sample_count, sample_surface, winding_number, SurfacePointSet};
use voromesh_core::voroloss::GeneratorSet;
use voromesh_core::voronoi::{compute_diagram, ClipBox, VoronoiDiagram};
use voromesh_core::DVec3;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("input mesh is not watertight: {0}")]
    NotWatertight(String),
    #[error(transparent)]
    Core(#[from] voromesh_core::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub fit: FitConfig,
    /// Surface samples; `None` uses 150 per squared grid resolution.
    pub samples: Option<usize>,
    pub metric_samples: usize,
    pub metric_seed: u64,
    pub f1_threshold: f64,
    pub clip_box: ClipBox,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            fit: FitConfig::default(),
            samples: None,
            metric_samples: DEFAULT_METRIC_SAMPLES,
            metric_seed: 0,
            f1_threshold: DEFAULT_F1_THRESHOLD,
            clip_box: ClipBox::around_unit_box(),
        }
    }
}

impl PipelineConfig {
    pub fn sample_count(&self) -> usize {
        self.samples.unwrap_or_else(|| default_sample_count(self.fit.grid_resolution))
    }
}

/// Wall-clock seconds per named stage, in execution order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Timings(pub Vec<(String, f64)>);

impl Timings {
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push((stage.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    pub fn total(&self) -> f64 {
        self.0.iter().map(|(_, s)| s).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputCheck {
    pub nonmanifold_edges: usize,
    pub probes: usize,
    /// Largest distance of a probe's winding number from an integer.
    pub worst_winding_deviation: f64,
    pub far_winding: f64,
}

const WINDING_PROBES: usize = 64;
const WINDING_TOLERANCE: f64 = 1e-3;

/// Rejects meshes that are not closed 2-manifolds: every edge must have two
/// faces, and winding numbers at random probes must be integers.
pub fn check_input(mesh: &TriangleMesh, seed: u64) -> Result<InputCheck, PipelineError> {
    let nonmanifold_edges = mesh.non_manifold_edge_count();
    let bounds = mesh.bounds().ok_or(voromesh_core::Error::EmptyMesh)?;
    let (c, e) = (bounds.center(), bounds.extent() * 0.6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..WINDING_PROBES {
        let p = c + DVec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * e;
        let w = winding_number(mesh, p);
        worst = worst.max((w - w.round()).abs());
    }
    let far_winding = winding_number(mesh, c + DVec3::splat(10.0 * e.max_element().max(1.0)));
    let check = InputCheck { nonmanifold_edges, probes: WINDING_PROBES, worst_winding_deviation: worst, far_winding };
    if nonmanifold_edges > 0 {
        return Err(PipelineError::NotWatertight(format!("{nonmanifold_edges} edges without exactly two faces")));
    }
    if worst > WINDING_TOLERANCE || far_winding.abs() > WINDING_TOLERANCE {
        return Err(PipelineError::NotWatertight(format!(
            "winding number deviates from an integer by {worst:.2e} (far point {far_winding:.2e})"
        )));
    }
    Ok(check)
}

pub struct FitOutput {
    pub normalized: TriangleMesh,
    pub transform: NormalizationTransform,
    pub samples: SurfacePointSet,
    pub init: GridInit,
    pub fit: FitResult,
}

/// Normalizes, samples, initializes generators on the grid and fits them.
pub fn fit_stage(input: &TriangleMesh, config: &PipelineConfig, timings: &mut Timings) -> Result<FitOutput, PipelineError> {
    let (normalized, transform) = timings.time("normalize", || normalize(input))?;
    let samples = timings.time("sample", || sample_surface(&normalized, config.sample_count(), config.fit.seed))?;
    let init = timings.time("init", || init_generators(&samples, config.fit.grid_resolution))?;
    let fit = timings.time("fit", || fit(&samples.points, &init.generators, &config.fit))?;
    Ok(FitOutput { normalized, transform, samples, init, fit })
}

pub enum OccupancySource<'a> {
    /// Barycenter queries against this mesh (in the generators' space).
    Mesh(&'a TriangleMesh),
    /// Fixed labels; cells touching the clip box are still forced outside.
    Given(&'a [bool]),
}

pub struct ExtractOutput {
    pub diagram: VoronoiDiagram,
    pub occupancy: Vec<bool>,
    pub surface: VoroMeshSurface,
    pub repair: RepairReport,
    pub watertight: WatertightReport,
}

pub fn extract_stage(
    generators: &GeneratorSet,
    occupancy: OccupancySource<'_>,
    clip_box: &ClipBox,
    timings: &mut Timings,
) -> Result<ExtractOutput, PipelineError> {
    let diagram = timings.time("diagram", || compute_diagram(generators, clip_box))?;
    let occupancy = match occupancy {
        OccupancySource::Mesh(m) => timings.time("occupancy", || assign_occupancy(&diagram, m)),
        OccupancySource::Given(o) => {
            if o.len() != diagram.len() {
                return Err(voromesh_core::Error::LengthMismatch { expected: diagram.len(), found: o.len() }.into());
            }
            let mut forced = 0;
            let occ = o
                .iter()
                .zip(&diagram.cells)
                .map(|(&inside, c)| {
                    forced += usize::from(inside && c.clipped);
                    inside && !c.clipped
                })
                .collect();
            if forced > 0 {
                log::warn!("{forced} inside cells touch the clip box and were set outside");
            }
            occ
        }
    };
    let raw = timings.time("extract", || extract_voromesh(&diagram, &occupancy))?;
    if raw.is_empty() {
        log::warn!("all cells have the same occupancy; the extracted surface is empty");
    }
    let (surface, repair) = timings.time("repair", || repair_nonmanifold(&raw));
    let watertight = timings.time("check", || check_watertight(&surface));
    Ok(ExtractOutput { diagram, occupancy, surface, repair, watertight })
}

/// Metrics of the surface against the reference; `None` for an empty surface.
pub fn evaluate_stage(
    reference: &TriangleMesh,
    surface: &VoroMeshSurface,
    config: &PipelineConfig,
    timings: &mut Timings,
) -> Result<Option<MetricReport>, PipelineError> {
    if surface.is_empty() {
        return Ok(None);
    }
    let candidate = surface.to_triangle_mesh();
    let report = timings.time("metrics", || {
        metrics::evaluate(reference, &candidate, config.metric_samples, config.f1_threshold, config.metric_seed)
    })?;
    Ok(Some(report))
}

pub struct Reconstruction {
    pub fit: FitOutput,
    pub extract: ExtractOutput,
    pub metrics: Option<MetricReport>,
    pub timings: Timings,
}

/// The full procedure on a mesh in its original coordinates. Outputs live
/// in the normalized space.
pub fn reconstruct(input: &TriangleMesh, config: &PipelineConfig) -> Result<Reconstruction, PipelineError> {
    let mut timings = Timings::default();
    let fit = fit_stage(input, config, &mut timings)?;
    let extract = extract_stage(
        &fit.fit.generators,
        OccupancySource::Mesh(&fit.normalized),
        &config.clip_box,
        &mut timings,
    )?;
    let metrics = evaluate_stage(&fit.normalized, &extract.surface, config, &mut timings)?;
    Ok(Reconstruction { fit, extract, metrics, timings })
}

/// The default clip box, or a larger cube when some generator comes within
/// a quarter unit of its walls (as heavy perturbation can do).
pub fn clip_box_for(generators: &GeneratorSet) -> ClipBox {
    let b = ClipBox::around_unit_box();
    let reach = generators.positions.iter().fold(0.0f64, |r, p| r.max(p.abs().max_element()));
    if reach <= 0.75 || !reach.is_finite() {
        return b;
    }
    let half = reach + 0.25;
    log::warn!("generators reach {reach:.3}; clip box grown to [-{half:.3}, {half:.3}]^3");
    ClipBox::new(DVec3::splat(-half), DVec3::splat(half)).unwrap_or(b)
}

/// Adds uniform noise of `delta_percent` of the voxel size `1 / grid` to
/// every coordinate and separates any generators that end up coincident.
/// Returns the new set and the number of jittered generators.
pub fn perturb(generators: &GeneratorSet, grid: usize, delta_percent: f64, seed: u64) -> (GeneratorSet, usize) {
    let amplitude = delta_percent / 100.0 / grid as f64;
    let mut out = generators.perturbed(amplitude, seed);
    let jittered = if amplitude == 0.0 {
        0
    } else {
        out.jitter_coincident(DUPLICATE_TOLERANCE, DUPLICATE_JITTER, seed ^ 0x5851_f42d_4c95_7f2d)
    };
    if jittered > 0 {
        log::warn!("{jittered} generators coincided after perturbation and were jittered");
    }
    (out, jittered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use voromesh_core::shapes;

    #[test]
    fn closed_meshes_pass_the_input_check() {
        let c = check_input(&shapes::icosphere(2, 3.0), 1).unwrap();
        assert!(c.worst_winding_deviation < 1e-9);
        check_input(&shapes::torus(0.3, 0.1, 16, 8), 1).unwrap();
    }

    #[test]
    fn open_mesh_fails_the_input_check() {
        let mut m = shapes::icosphere(2, 1.0);
        m.faces.pop();
        assert!(matches!(check_input(&m, 1), Err(PipelineError::NotWatertight(_))));
        assert!(matches!(check_input(&shapes::square(1.0, 0.0), 1), Err(PipelineError::NotWatertight(_))));
    }

    #[test]
    fn clip_box_grows_for_far_generators() {
        let near = GeneratorSet::new(vec![DVec3::splat(0.75), DVec3::splat(-0.5)]);
        assert_eq!(clip_box_for(&near), ClipBox::around_unit_box());
        let far = GeneratorSet::new(vec![DVec3::new(0.0, -1.25, 0.0), DVec3::ZERO]);
        let b = clip_box_for(&far);
        assert!((b.min.y + 1.5).abs() < 1e-15 && (b.max.x - 1.5).abs() < 1e-15);
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let q = GeneratorSet::new(vec![DVec3::new(-0.0, 0.1, 0.2), DVec3::ONE * 0.3]);
        let (p, n) = perturb(&q, 32, 0.0, 5);
        assert_eq!(n, 0);
        assert_eq!(p.positions, q.positions);
    }

    #[test]
    fn perturbation_is_bounded() {
        let q = GeneratorSet::new((0..100).map(|i| DVec3::splat(i as f64 * 0.01)).collect());
        let (p, _) = perturb(&q, 10, 50.0, 5);
        for (a, b) in p.positions.iter().zip(&q.positions) {
            assert!((*a - *b).abs().max_element() <= 0.05 + 1e-15);
        }
        assert_ne!(p.positions, q.positions);
    }
}
