//! Grid initialization of generators and the Adam fitting loop.

use alloc::vec;
use alloc::vec::Vec;
use glam::DVec3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::sampling::SurfacePointSet;
use crate::voroloss::{self, GeneratorSet, DEFAULT_K};
use crate::{Error, Result};

/// Distance below which two generators are considered coincident after fitting.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;
/// Magnitude of the random offset applied to coincident generators.
pub const DUPLICATE_JITTER: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub grid_resolution: usize,
    pub steps: usize,
    pub learning_rate: f64,
    /// Steps at which the learning rate is halved (cumulatively).
    pub halving_steps: Vec<usize>,
    pub minibatch_fraction: f64,
    pub k: usize,
    /// Weight of the maximum-offset regularizer.
    pub lambda: f64,
    pub seed: u64,
    /// Evaluate the loss on all samples every this many steps (0: first and last only).
    pub full_loss_every: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            grid_resolution: 32,
            steps: 400,
            learning_rate: 0.005,
            halving_steps: vec![80, 120, 200, 250],
            minibatch_fraction: 0.2,
            k: DEFAULT_K,
            lambda: 0.0,
            seed: 0,
            full_loss_every: 100,
        }
    }
}

impl FitConfig {
    pub fn validate(&self, sample_count: usize) -> Result<()> {
        if self.grid_resolution < 2 {
            return Err(Error::InvalidConfig("grid resolution must be at least 2"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be positive and finite"));
        }
        if !(self.minibatch_fraction > 0.0 && self.minibatch_fraction <= 1.0) {
            return Err(Error::InvalidConfig("minibatch fraction must lie in (0, 1]"));
        }
        if self.minibatch_fraction * (sample_count as f64) < 1.0 {
            return Err(Error::InvalidConfig("minibatch would contain no samples"));
        }
        if self.k < 2 {
            return Err(Error::InvalidConfig("k must be at least 2"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig("lambda must be non-negative"));
        }
        Ok(())
    }

    /// Learning rate in effect at `step`.
    pub fn lr_at(&self, step: usize) -> f64 {
        let halvings = self.halving_steps.iter().filter(|&&s| s <= step).count();
        self.learning_rate * libm::pow(0.5, halvings as f64)
    }

    pub fn minibatch_size(&self, sample_count: usize) -> usize {
        (libm::ceil(self.minibatch_fraction * sample_count as f64) as usize).clamp(1, sample_count)
    }
}

/// Result of [`init_generators`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridInit {
    pub generators: GeneratorSet,
    /// Samples outside `[-0.5, 0.5]^3` that were clamped into the grid.
    pub clamped: usize,
    pub marked_voxels: usize,
}

/// Voxel index of `p` in a `g`-resolution grid over `[-0.5, 0.5]^3`, and
/// whether it had to be clamped. Rounding overshoot up to `1e-9` from
/// normalization does not count as clamping.
pub fn voxel_of(p: DVec3, g: usize) -> ([usize; 3], bool) {
    let mut clamped = false;
    let idx = [p.x, p.y, p.z].map(|c| {
        let f = libm::floor((c + 0.5) * g as f64);
        if !(c.abs() <= 0.5 + 1e-9) {
            clamped = true;
        }
        if f.is_nan() || f < 0.0 {
            0
        } else {
            (f as usize).min(g - 1)
        }
    });
    (idx, clamped)
}

/// Position of grid node `(i, j, k)`.
pub fn grid_node(node: [usize; 3], g: usize) -> DVec3 {
    let h = 1.0 / g as f64;
    DVec3::new(node[0] as f64, node[1] as f64, node[2] as f64) * h - DVec3::splat(0.5)
}

/// Every grid node adjacent to at least one voxel that contains a sample.
/// Generators are ordered by node index `(i, j, k)` lexicographically.
pub fn init_generators(samples: &SurfacePointSet, grid_resolution: usize) -> Result<GridInit> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    if grid_resolution < 2 {
        return Err(Error::InvalidConfig("grid resolution must be at least 2"));
    }
    let g = grid_resolution;
    let mut clamped = 0;
    let mut voxels: Vec<[usize; 3]> = samples
        .points
        .iter()
        .map(|&p| {
            let (v, c) = voxel_of(p, g);
            clamped += c as usize;
            v
        })
        .collect();
    voxels.sort_unstable();
    voxels.dedup();
    let mut nodes: Vec<[usize; 3]> = Vec::with_capacity(voxels.len() * 2);
    for v in &voxels {
        for c in 0..8 {
            nodes.push([v[0] + (c & 1), v[1] + ((c >> 1) & 1), v[2] + ((c >> 2) & 1)]);
        }
    }
    nodes.sort_unstable();
    nodes.dedup();
    let positions = nodes.iter().map(|&n| grid_node(n, g)).collect();
    Ok(GridInit { generators: GeneratorSet::new(positions), clamped, marked_voxels: voxels.len() })
}

/// Largest displacement from the starting position, with its subgradient:
/// the unit offset direction on the lowest-index maximizer.
pub fn offset_regularizer(generators: &GeneratorSet) -> (f64, Vec<DVec3>) {
    let mut grad = vec![DVec3::ZERO; generators.len()];
    let mut best: Option<(f64, usize)> = None;
    for (i, (p, v)) in generators.positions.iter().zip(&generators.initial_positions).enumerate() {
        let norm = (*p - *v).length();
        if best.map_or(true, |(b, _)| norm > b) {
            best = Some((norm, i));
        }
    }
    match best {
        Some((value, i)) if value > 0.0 => {
            grad[i] = (generators.positions[i] - generators.initial_positions[i]) / value;
            (value, grad)
        }
        _ => (0.0, grad),
    }
}

/// Adam state over a list of 3D parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u32,
    m: Vec<DVec3>,
    v: Vec<DVec3>,
}

impl Adam {
    pub fn new(len: usize) -> Adam {
        Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![DVec3::ZERO; len], v: vec![DVec3::ZERO; len] }
    }

    /// One bias-corrected update of `params` in place.
    pub fn step(&mut self, params: &mut [DVec3], grad: &[DVec3], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::LengthMismatch { expected: self.m.len(), found: grad.len().min(params.len()) });
        }
        if !grad.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFiniteGradient { step: self.t as usize });
        }
        self.t += 1;
        let c1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = *m * self.beta1 + *g * (1.0 - self.beta1);
            *v = *v * self.beta2 + (*g * *g) * (1.0 - self.beta2);
            let mhat = *m / c1;
            let vhat = *v / c2;
            let denom = DVec3::new(libm::sqrt(vhat.x), libm::sqrt(vhat.y), libm::sqrt(vhat.z)) + DVec3::splat(self.eps);
            *p -= mhat / denom * lr;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub lr: f64,
    /// Objective on the step's minibatch: mean loss plus weighted regularizer.
    pub minibatch_loss: Option<f64>,
    /// Summed loss over all samples, when evaluated at this step.
    pub full_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub generators: GeneratorSet,
    pub trace: Vec<TraceRow>,
    /// Generators moved apart after fitting because they coincided.
    pub jittered: usize,
}

impl FitResult {
    pub fn initial_full_loss(&self) -> Option<f64> {
        self.trace.first().and_then(|r| r.full_loss)
    }

    pub fn final_full_loss(&self) -> Option<f64> {
        self.trace.last().and_then(|r| r.full_loss)
    }
}

/// Fits generator positions to surface samples with Adam.
///
/// Each step draws a fresh minibatch, minimizes `loss / batch + lambda * R`,
/// and the trace ends with a row at `step == steps` holding the final
/// full-set loss.
pub fn fit(samples: &[DVec3], initial: &GeneratorSet, config: &FitConfig) -> Result<FitResult> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    if initial.is_empty() {
        return Err(Error::NoGenerators);
    }
    if initial.len() < 2 {
        return Err(Error::TooFewGenerators(initial.len()));
    }
    config.validate(samples.len())?;
    let k = config.k.min(initial.len());
    let batch_size = config.minibatch_size(samples.len());

    let mut q = initial.clone();
    let mut adam = Adam::new(q.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<u32> = (0..samples.len() as u32).collect();
    let mut batch = Vec::with_capacity(batch_size);
    let mut trace = Vec::with_capacity(config.steps + 1);

    let full_due = |step: usize| step == 0 || (config.full_loss_every > 0 && step % config.full_loss_every == 0);

    for step in 0..config.steps {
        let lr = config.lr_at(step);
        let (chosen, _) = order.partial_shuffle(&mut rng, batch_size);
        batch.clear();
        batch.extend(chosen.iter().map(|&i| samples[i as usize]));

        let (loss, mut grad) = voroloss::voroloss_with_grad(&batch, &q, k)?;
        let inv = 1.0 / batch_size as f64;
        let mut objective = loss * inv;
        for g in &mut grad {
            *g *= inv;
        }
        if config.lambda > 0.0 {
            let (r, rg) = offset_regularizer(&q);
            objective += config.lambda * r;
            for (g, r) in grad.iter_mut().zip(rg) {
                *g += r * config.lambda;
            }
        }
        if !objective.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        let full_loss = if full_due(step) { Some(voroloss::voroloss(samples, &q, k)?) } else { None };
        trace.push(TraceRow { step, lr, minibatch_loss: Some(objective), full_loss });
        adam.step(&mut q.positions, &grad, lr).map_err(|e| match e {
            Error::NonFiniteGradient { .. } => Error::NonFiniteGradient { step },
            other => other,
        })?;
    }
    let final_loss = voroloss::voroloss(samples, &q, k)?;
    if !final_loss.is_finite() {
        return Err(Error::NonFiniteLoss { step: config.steps });
    }
    trace.push(TraceRow {
        step: config.steps,
        lr: config.lr_at(config.steps),
        minibatch_loss: None,
        full_loss: Some(final_loss),
    });
    let jittered = q.jitter_coincident(DUPLICATE_TOLERANCE, DUPLICATE_JITTER, config.seed ^ 0x9e37_79b9_7f4a_7c15);
    Ok(FitResult { generators: q, trace, jittered })
}
