//! Binary particle swarm optimization of space-time codings.
//!
//! The objective rewards concentrating each assigned harmonic's near-field
//! energy at its target point: the fitness is the weighted sum of target
//! cell intensities divided by the total intensity over the evaluated
//! harmonic set. The zero-order line is always part of the normalizing
//! power, so energy left in the static (mirror) component counts against
//! a coding even when no task is placed on k = 0.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::ris::{
    greens_weight, harmonic_coefficient, FieldGrid, RisGeometry, StcCoding,
};

/// How the decision vector maps onto the coding tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodingMode {
    /// One sequence per element: M*N*L bits.
    Full,
    /// One sequence per column, shared by all rows: N*L bits.
    ColumnShared,
    /// One sequence per row, shared by all columns: M*L bits.
    RowShared,
}

impl CodingMode {
    pub fn bits_len(&self, geometry: &RisGeometry) -> usize {
        match self {
            CodingMode::Full => geometry.rows * geometry.cols * geometry.code_length,
            CodingMode::ColumnShared => geometry.cols * geometry.code_length,
            CodingMode::RowShared => geometry.rows * geometry.code_length,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CodingMode::Full => "full",
            CodingMode::ColumnShared => "column-shared",
            CodingMode::RowShared => "row-shared",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(CodingMode::Full),
            "column-shared" => Ok(CodingMode::ColumnShared),
            "row-shared" => Ok(CodingMode::RowShared),
            other => Err(CoreError::Parse(format!("unknown coding mode '{other}'"))),
        }
    }

    /// Expands a decision vector into the full coding tensor.
    pub fn decode(&self, geometry: &RisGeometry, bits: &[u8]) -> Result<StcCoding> {
        let l = geometry.code_length;
        match self {
            CodingMode::Full => {
                StcCoding::from_bits(geometry.rows, geometry.cols, l, bits.to_vec())
            }
            CodingMode::ColumnShared => {
                let seqs: Vec<Vec<u8>> =
                    (0..geometry.cols).map(|n| bits[n * l..(n + 1) * l].to_vec()).collect();
                StcCoding::from_column_sequences(geometry.rows, &seqs)
            }
            CodingMode::RowShared => {
                let seqs: Vec<Vec<u8>> =
                    (0..geometry.rows).map(|m| bits[m * l..(m + 1) * l].to_vec()).collect();
                StcCoding::from_row_sequences(geometry.cols, &seqs)
            }
        }
    }
}

/// One harmonic-to-target assignment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeamAssignment {
    pub harmonic: i32,
    pub target: [f64; 3],
    pub weight: f64,
}

/// Set of harmonic focusing assignments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeamTask {
    pub assignments: Vec<BeamAssignment>,
}

impl BeamTask {
    pub fn new(assignments: Vec<BeamAssignment>) -> Result<Self> {
        if assignments.is_empty() {
            return Err(CoreError::Optimizer("beam task needs at least one assignment".into()));
        }
        for (i, a) in assignments.iter().enumerate() {
            if !(a.weight > 0.0) {
                return Err(CoreError::Optimizer(format!(
                    "assignment {i}: weight must be positive"
                )));
            }
            for b in assignments.iter().skip(i + 1) {
                if a.harmonic == b.harmonic {
                    return Err(CoreError::Optimizer(format!(
                        "harmonic {} assigned twice",
                        a.harmonic
                    )));
                }
            }
        }
        Ok(Self { assignments })
    }

    /// Convenience constructor with unit weights.
    pub fn uniform(pairs: &[(i32, [f64; 3])]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(harmonic, target)| BeamAssignment { harmonic, target, weight: 1.0 })
                .collect(),
        )
    }
}

/// Optimizer settings. Defaults follow common BPSO practice: linearly
/// decaying inertia, c1 = c2 = 2, velocities clamped to +/-6.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BpsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia_start: f64,
    pub inertia_end: f64,
    pub cognitive: f64,
    pub social: f64,
    pub v_max: f64,
    pub seed: u64,
    pub mode: CodingMode,
}

impl Default for BpsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 40,
            iterations: 300,
            inertia_start: 0.9,
            inertia_end: 0.4,
            cognitive: 2.0,
            social: 2.0,
            v_max: 6.0,
            seed: 1,
            mode: CodingMode::ColumnShared,
        }
    }
}

impl BpsoConfig {
    fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(CoreError::Optimizer("swarm size must be >= 2".into()));
        }
        if self.iterations < 1 {
            return Err(CoreError::Optimizer("iterations must be >= 1".into()));
        }
        if !(self.v_max > 0.0) {
            return Err(CoreError::Optimizer("v_max must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of one optimization run.
#[derive(Debug, Clone)]
pub struct OptResult {
    pub best_coding: StcCoding,
    pub best_fitness: f64,
    /// Global-best fitness after the initial evaluation and after each
    /// iteration (length iterations + 1); non-decreasing.
    pub trace: Vec<f64>,
    pub evaluations: u64,
}

// ─── Objective ───────────────────────────────────────────────────────────

/// Precomputed focusing objective: collapsed element weights per grid
/// point and the per-slot Fourier coefficients for the evaluated harmonic
/// set (task harmonics plus the zero order).
pub struct FocusingObjective {
    mode: CodingMode,
    /// Evaluated harmonic orders; the task harmonics, with k = 0 appended
    /// when absent.
    harmonics: Vec<i32>,
    /// (task index) -> (harmonic index in `harmonics`, flat cell, weight)
    targets: Vec<(usize, usize, f64)>,
    /// coeff[ki * code_length + l]
    coeff: Vec<Complex64>,
    /// Collapsed weights, point-major: weights[p * groups + g] where a
    /// group is a column (ColumnShared), a row (RowShared) or an element
    /// (Full, row-major).
    weights: Vec<Complex64>,
    groups: usize,
    points: usize,
    code_length: usize,
}

impl FocusingObjective {
    pub fn new(
        tasks: &BeamTask,
        geometry: &RisGeometry,
        grid: &FieldGrid,
        mode: CodingMode,
    ) -> Result<Self> {
        if tasks.assignments.is_empty() {
            return Err(CoreError::Optimizer("empty task list".into()));
        }
        let mut harmonics: Vec<i32> = tasks.assignments.iter().map(|a| a.harmonic).collect();
        if !harmonics.contains(&0) {
            harmonics.push(0);
        }
        let mut targets = Vec::with_capacity(tasks.assignments.len());
        for (i, a) in tasks.assignments.iter().enumerate() {
            let (ci, cj) = grid.cell_of(a.target).ok_or_else(|| {
                CoreError::Optimizer(format!(
                    "assignment {i}: target {:?} maps to no grid cell",
                    a.target
                ))
            })?;
            let ki = harmonics.iter().position(|&k| k == a.harmonic).unwrap();
            targets.push((ki, grid.flat(ci, cj), a.weight));
        }
        let l_count = geometry.code_length;
        let mut coeff = Vec::with_capacity(harmonics.len() * l_count);
        for &k in &harmonics {
            for l in 1..=l_count {
                coeff.push(harmonic_coefficient(k, l, l_count)?);
            }
        }
        let groups = match mode {
            CodingMode::Full => geometry.rows * geometry.cols,
            CodingMode::ColumnShared => geometry.cols,
            CodingMode::RowShared => geometry.rows,
        };
        let points = grid.len();
        let weights: Vec<Complex64> = (0..points)
            .into_par_iter()
            .map(|p| {
                let point = grid.point_flat(p);
                let mut row = vec![Complex64::new(0.0, 0.0); groups];
                for m in 0..geometry.rows {
                    for n in 0..geometry.cols {
                        let w = geometry.illumination(m, n)
                            * greens_weight(geometry, (m, n), point)?;
                        let g = match mode {
                            CodingMode::Full => m * geometry.cols + n,
                            CodingMode::ColumnShared => n,
                            CodingMode::RowShared => m,
                        };
                        row[g] += w;
                    }
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        Ok(Self {
            mode,
            harmonics,
            targets,
            coeff,
            weights,
            groups,
            points,
            code_length: l_count,
        })
    }

    /// Decision-vector length expected by [`Self::fitness_bits`].
    pub fn bits_len(&self) -> usize {
        self.groups * self.code_length
    }

    pub fn mode(&self) -> CodingMode {
        self.mode
    }

    /// Fitness of a decision vector: sum of weighted target-cell
    /// intensities over the total intensity of the evaluated harmonics.
    pub fn fitness_bits(&self, bits: &[u8]) -> f64 {
        debug_assert_eq!(bits.len(), self.bits_len());
        let nk = self.harmonics.len();
        let l_count = self.code_length;
        // per-group spectrum at each evaluated harmonic, group-major
        let mut spectra = vec![Complex64::new(0.0, 0.0); self.groups * nk];
        for g in 0..self.groups {
            let b = &bits[g * l_count..(g + 1) * l_count];
            for ki in 0..nk {
                let c = &self.coeff[ki * l_count..(ki + 1) * l_count];
                let mut acc = Complex64::new(0.0, 0.0);
                for (l, &bit) in b.iter().enumerate() {
                    let gamma = if bit == 0 { 1.0 } else { -1.0 };
                    acc += gamma * c[l];
                }
                spectra[g * nk + ki] = acc;
            }
        }
        let mut total = 0.0;
        let mut target_power = vec![0.0; self.targets.len()];
        let mut gains = vec![Complex64::new(0.0, 0.0); nk];
        for p in 0..self.points {
            let row = &self.weights[p * self.groups..(p + 1) * self.groups];
            gains.iter_mut().for_each(|g| *g = Complex64::new(0.0, 0.0));
            for (g, w) in row.iter().enumerate() {
                let s = &spectra[g * nk..(g + 1) * nk];
                for ki in 0..nk {
                    gains[ki] += w * s[ki];
                }
            }
            for ki in 0..nk {
                total += gains[ki].norm_sqr();
            }
            for (t, &(ki, cell, _)) in self.targets.iter().enumerate() {
                if cell == p {
                    target_power[t] = gains[ki].norm_sqr();
                }
            }
        }
        if total <= 0.0 {
            return 0.0;
        }
        self.targets
            .iter()
            .zip(target_power.iter())
            .map(|(&(_, _, weight), &pw)| weight * pw / total)
            .sum()
    }

    /// Fitness of a full coding tensor (any symmetry).
    pub fn fitness_of_coding(&self, coding: &StcCoding) -> Result<f64> {
        match self.mode {
            CodingMode::Full => {
                if coding.rows * coding.cols * coding.code_length
                    != self.groups * self.code_length
                {
                    return Err(CoreError::Coding("coding does not match objective".into()));
                }
                Ok(self.fitness_bits(coding.bits()))
            }
            _ => Err(CoreError::Optimizer(
                "fitness_of_coding requires a Full-mode objective".into(),
            )),
        }
    }
}

/// One-shot fitness of a coding for a task set. Builds a full-mode
/// objective internally; callers evaluating many codings should build one
/// [`FocusingObjective`] and reuse it.
pub fn focusing_fitness(
    coding: &StcCoding,
    tasks: &BeamTask,
    geometry: &RisGeometry,
    grid: &FieldGrid,
) -> Result<f64> {
    coding.check_matches(geometry)?;
    let obj = FocusingObjective::new(tasks, geometry, grid, CodingMode::Full)?;
    obj.fitness_of_coding(coding)
}

// ─── Optimizer ───────────────────────────────────────────────────────────

struct Particle {
    bits: Vec<u8>,
    velocity: Vec<f64>,
    pbest_bits: Vec<u8>,
    pbest_fitness: f64,
    rng: ChaCha8Rng,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Runs BPSO on the focusing objective. Fully deterministic for a given
/// config: every particle draws from its own counter-based substream of
/// the master seed, so parallel fitness evaluation cannot reorder draws.
pub fn bpso_optimize(
    tasks: &BeamTask,
    geometry: &RisGeometry,
    grid: &FieldGrid,
    config: &BpsoConfig,
) -> Result<OptResult> {
    config.validate()?;
    let bits_len = config.mode.bits_len(geometry);
    if config.mode == CodingMode::Full && bits_len > 1_000_000 {
        return Err(CoreError::Optimizer(format!(
            "full-mode decision vector has {bits_len} bits; use a column-shared or \
             row-shared mode for apertures this large"
        )));
    }
    let objective = FocusingObjective::new(tasks, geometry, grid, config.mode)?;

    let mut particles: Vec<Particle> = (0..config.swarm_size)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64 + 1);
            let bits: Vec<u8> = (0..bits_len).map(|_| rng.random_range(0..=1u8)).collect();
            Particle {
                bits,
                velocity: vec![0.0; bits_len],
                pbest_bits: Vec::new(),
                pbest_fitness: f64::NEG_INFINITY,
                rng,
            }
        })
        .collect();

    let mut evaluations = 0u64;
    let mut gbest_bits: Vec<u8> = Vec::new();
    let mut gbest_fitness = f64::NEG_INFINITY;
    let mut trace = Vec::with_capacity(config.iterations + 1);

    let fitnesses: Vec<f64> = particles
        .par_iter()
        .map(|p| objective.fitness_bits(&p.bits))
        .collect();
    evaluations += particles.len() as u64;
    for (p, &f) in particles.iter_mut().zip(fitnesses.iter()) {
        p.pbest_bits = p.bits.clone();
        p.pbest_fitness = f;
        if f > gbest_fitness {
            gbest_fitness = f;
            gbest_bits = p.bits.clone();
        }
    }
    trace.push(gbest_fitness);

    for iter in 0..config.iterations {
        let frac = if config.iterations > 1 {
            iter as f64 / (config.iterations - 1) as f64
        } else {
            0.0
        };
        let inertia = config.inertia_start + (config.inertia_end - config.inertia_start) * frac;

        for p in particles.iter_mut() {
            for b in 0..bits_len {
                let r1: f64 = p.rng.random();
                let r2: f64 = p.rng.random();
                let x = p.bits[b] as f64;
                let v = inertia * p.velocity[b]
                    + config.cognitive * r1 * (p.pbest_bits[b] as f64 - x)
                    + config.social * r2 * (gbest_bits[b] as f64 - x);
                let v = v.clamp(-config.v_max, config.v_max);
                p.velocity[b] = v;
                let u: f64 = p.rng.random();
                p.bits[b] = if u < sigmoid(v) { 1 } else { 0 };
            }
        }

        let fitnesses: Vec<f64> = particles
            .par_iter()
            .map(|p| objective.fitness_bits(&p.bits))
            .collect();
        evaluations += particles.len() as u64;
        for (p, &f) in particles.iter_mut().zip(fitnesses.iter()) {
            if f > p.pbest_fitness {
                p.pbest_fitness = f;
                p.pbest_bits = p.bits.clone();
            }
            if f > gbest_fitness {
                gbest_fitness = f;
                gbest_bits = p.bits.clone();
            }
        }
        trace.push(gbest_fitness);
    }

    Ok(OptResult {
        best_coding: config.mode.decode(geometry, &gbest_bits)?,
        best_fitness: gbest_fitness,
        trace,
        evaluations,
    })
}

/// Enumerates every coding of an exhaustible decision space and returns
/// (best bits, best fitness). Intended for oracle tests on <= 24 bits.
pub fn brute_force_best(objective: &FocusingObjective) -> Result<(Vec<u8>, f64)> {
    let bits_len = objective.bits_len();
    if bits_len > 24 {
        return Err(CoreError::Optimizer(format!(
            "{bits_len}-bit space is too large to enumerate"
        )));
    }
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for mask in 0u32..(1u32 << bits_len) {
        let bits: Vec<u8> = (0..bits_len).map(|b| ((mask >> b) & 1) as u8).collect();
        let f = objective.fitness_bits(&bits);
        if f > best.1 {
            best = (bits, f);
        }
    }
    Ok(best)
}
