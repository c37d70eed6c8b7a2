//! Exact event-driven simulation of the rescaled birth–death process on a
//! circle of length `L`.
//!
//! Each particle dies at rate `m + eps kappa_minus s_i` with
//! `s_i = sum_{j != i} a_minus_per(x_i - x_j)` and gives birth at rate
//! `kappa_plus`, placing the offspring at a dispersal-kernel displacement
//! from itself. The initial state is Poisson with intensity `rho0 / eps`.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::kernel::{Kernel, PERIODIZATION_TAIL};
use crate::params::ModelParams;

/// Competition kernel wrapped onto the circle and cut off where its tail
/// mass drops below [`PERIODIZATION_TAIL`].
#[derive(Debug, Clone)]
pub struct PairKernel {
    kernel: Kernel,
    length: f64,
    cutoff: f64,
    images: i64,
}

impl PairKernel {
    pub fn new(kernel: &Kernel, length: f64) -> Self {
        let cutoff = kernel.cutoff_radius(PERIODIZATION_TAIL);
        Self {
            kernel: *kernel,
            length,
            cutoff,
            images: (cutoff / length).ceil() as i64,
        }
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Sum of `a(d + nL)` over images with `|d + nL| <= cutoff`.
    pub fn weight(&self, d: f64) -> f64 {
        let d = d - self.length * (d / self.length).round();
        let mut total = 0.0;
        for n in -self.images..=self.images {
            let z = d + n as f64 * self.length;
            if z.abs() <= self.cutoff {
                total += self.kernel.eval(z);
            }
        }
        total
    }
}

/// Binary tree of partial sums. Parents are recomputed from their
/// children on every update, so the root never drifts.
#[derive(Debug, Clone)]
struct SumTree {
    nodes: Vec<f64>,
    leaves: usize,
}

impl SumTree {
    fn new() -> Self {
        Self {
            nodes: vec![0.0; 2],
            leaves: 1,
        }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn grow(&mut self) {
        let old = std::mem::take(&mut self.nodes);
        let old_leaves = self.leaves;
        self.leaves *= 2;
        self.nodes = vec![0.0; 2 * self.leaves];
        self.nodes[self.leaves..self.leaves + old_leaves].copy_from_slice(&old[old_leaves..]);
        for i in (1..self.leaves).rev() {
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    fn set(&mut self, i: usize, value: f64) {
        while i >= self.leaves {
            self.grow();
        }
        let mut k = i + self.leaves;
        self.nodes[k] = value;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Leaf index whose cumulative interval contains `u` in `[0, total)`.
    fn find(&self, mut u: f64, len: usize) -> usize {
        let mut k = 1;
        while k < self.leaves {
            let left = self.nodes[2 * k];
            if u < left {
                k *= 2;
            } else {
                u -= left;
                k = 2 * k + 1;
            }
        }
        // rounding can push the walk onto an empty trailing leaf
        (k - self.leaves).min(len - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Birth,
    Death,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    /// Position of the newborn or of the particle that died.
    pub position: f64,
    /// Index of the parent at the moment of birth.
    pub parent: Option<usize>,
}

/// Particle positions with cached competition sums and neighbour buckets.
#[derive(Debug, Clone)]
pub struct ParticleState {
    time: f64,
    positions: Vec<f64>,
    competition: Vec<f64>,
    bucket_of: Vec<usize>,
    slot_of: Vec<usize>,
    buckets: Vec<Vec<usize>>,
    bucket_width: f64,
    tree: SumTree,
    pair: PairKernel,
    length: f64,
    neighbours: Vec<(usize, f64)>,
}

impl ParticleState {
    pub fn new(params: &ModelParams, positions: Vec<f64>) -> Result<Self> {
        let length = params.domain_length;
        if let Some(&x) = positions.iter().find(|&&x| !(0.0..length).contains(&x)) {
            return Err(Error::InvalidConfiguration(format!(
                "position {x} outside [0, {length})"
            )));
        }
        let pair = PairKernel::new(&params.a_minus, length);
        let per_cutoff = (length / pair.cutoff()).floor();
        let n_buckets = if per_cutoff >= 3.0 {
            (per_cutoff as usize).min(1 << 16)
        } else {
            1
        };
        let mut state = Self {
            time: 0.0,
            positions: Vec::with_capacity(positions.len()),
            competition: Vec::with_capacity(positions.len()),
            bucket_of: Vec::new(),
            slot_of: Vec::new(),
            buckets: vec![Vec::new(); n_buckets],
            bucket_width: length / n_buckets as f64,
            tree: SumTree::new(),
            pair,
            length,
            neighbours: Vec::new(),
        };
        for x in positions {
            state.insert(x);
        }
        Ok(state)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Cached `s_i`.
    pub fn competition_sums(&self) -> &[f64] {
        &self.competition
    }

    /// Cached `sum_i s_i`.
    pub fn competition_total(&self) -> f64 {
        self.tree.total()
    }

    /// `s_i` recomputed over all pairs.
    pub fn recompute_competition(&self) -> Vec<f64> {
        let n = self.len();
        let mut s = vec![0.0; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.pair.weight(self.positions[i] - self.positions[j]);
                s[i] += w;
                s[j] += w;
            }
        }
        s
    }

    /// Relative difference between the cached and recomputed death totals.
    pub fn cache_discrepancy(&self, params: &ModelParams) -> f64 {
        let crowd = params.eps * params.kappa_minus;
        let n = self.len() as f64;
        let cached = params.m * n + crowd * self.competition_total();
        let fresh = params.m * n + crowd * self.recompute_competition().iter().sum::<f64>();
        if fresh == 0.0 {
            cached.abs()
        } else {
            (cached - fresh).abs() / fresh
        }
    }

    fn bucket(&self, x: f64) -> usize {
        ((x / self.bucket_width) as usize).min(self.buckets.len() - 1)
    }

    /// Fills `self.neighbours` with `(index, weight)` for every particle
    /// within the cutoff of `x`, skipping `skip`.
    fn collect_neighbours(&mut self, x: f64, skip: Option<usize>) {
        self.neighbours.clear();
        let nb = self.buckets.len();
        let visit: &[usize] = if nb == 1 {
            &[0]
        } else {
            let b = self.bucket(x);
            &[(b + nb - 1) % nb, b, (b + 1) % nb]
        };
        for &b in visit {
            for &j in &self.buckets[b] {
                if Some(j) == skip {
                    continue;
                }
                let w = self.pair.weight(x - self.positions[j]);
                if w != 0.0 {
                    self.neighbours.push((j, w));
                }
            }
        }
    }

    fn insert(&mut self, x: f64) {
        self.collect_neighbours(x, None);
        let i = self.positions.len();
        let mut own = 0.0;
        for k in 0..self.neighbours.len() {
            let (j, w) = self.neighbours[k];
            own += w;
            self.competition[j] += w;
            self.tree.set(j, self.competition[j]);
        }
        let b = self.bucket(x);
        self.positions.push(x);
        self.competition.push(own);
        self.bucket_of.push(b);
        self.slot_of.push(self.buckets[b].len());
        self.buckets[b].push(i);
        self.tree.set(i, own);
    }

    fn remove(&mut self, i: usize) {
        let x = self.positions[i];
        self.collect_neighbours(x, Some(i));
        for k in 0..self.neighbours.len() {
            let (j, w) = self.neighbours[k];
            self.competition[j] = (self.competition[j] - w).max(0.0);
            self.tree.set(j, self.competition[j]);
        }

        let (b, slot) = (self.bucket_of[i], self.slot_of[i]);
        self.buckets[b].swap_remove(slot);
        if let Some(&moved) = self.buckets[b].get(slot) {
            self.slot_of[moved] = slot;
        }

        let last = self.positions.len() - 1;
        if i != last {
            let (lb, ls) = (self.bucket_of[last], self.slot_of[last]);
            self.buckets[lb][ls] = i;
        }
        self.positions.swap_remove(i);
        self.competition.swap_remove(i);
        self.bucket_of.swap_remove(i);
        self.slot_of.swap_remove(i);
        if i != last {
            self.tree.set(i, self.competition[i]);
        }
        self.tree.set(last, 0.0);
    }
}

/// Poisson configuration with intensity `rho0 / eps`, uniform within each
/// cell of `rho0`.
pub fn sample_initial<R: Rng + ?Sized>(
    params: &ModelParams,
    rho0: &Field,
    rng: &mut R,
) -> Result<ParticleState> {
    params.check()?;
    if rho0.length() != params.domain_length {
        return Err(Error::GridMismatch {
            expected: rho0.sites(),
            expected_length: params.domain_length,
            found: rho0.sites(),
            found_length: rho0.length(),
        });
    }
    let h = rho0.spacing();
    let mean = rho0.integral() / params.eps;
    let count = if mean > 0.0 {
        let poisson = Poisson::new(mean)
            .map_err(|e| Error::InvalidParameter(format!("initial intensity {mean}: {e}")))?;
        poisson.sample(rng) as usize
    } else {
        0
    };
    let mut positions = Vec::with_capacity(count);
    if count > 0 {
        let cells = WeightedIndex::new(rho0.values())
            .map_err(|e| Error::InvalidParameter(format!("initial density: {e}")))?;
        for _ in 0..count {
            let c = cells.sample(rng);
            let x = (c as f64 + rng.random::<f64>()) * h;
            positions.push(if x < params.domain_length { x } else { 0.0 });
        }
    }
    ParticleState::new(params, positions)
}

/// `(kappa_plus n, m n + eps kappa_minus sum_i s_i)`.
pub fn event_rates(params: &ModelParams, state: &ParticleState) -> (f64, f64) {
    let n = state.len() as f64;
    (
        params.kappa_plus * n,
        params.m * n + params.eps * params.kappa_minus * state.competition_total(),
    )
}

/// Advances `state` by one jump. Returns `None` once the population is
/// extinct, which is absorbing.
pub fn gillespie_step<R: Rng + ?Sized>(
    params: &ModelParams,
    state: &mut ParticleState,
    rng: &mut R,
) -> Option<SimEvent> {
    step_until(params, state, f64::INFINITY, rng)
}

/// One jump if it happens no later than `horizon`; otherwise the clock
/// moves to `horizon` and `None` is returned. Discarding the pending
/// waiting time is exact because it is memoryless.
fn step_until<R: Rng + ?Sized>(
    params: &ModelParams,
    state: &mut ParticleState,
    horizon: f64,
    rng: &mut R,
) -> Option<SimEvent> {
    let (birth, death) = event_rates(params, state);
    let total = birth + death;
    if total <= 0.0 {
        if horizon.is_finite() {
            state.time = state.time.max(horizon);
        }
        return None;
    }
    let wait: f64 = Exp::new(total).expect("positive rate").sample(rng);
    let t = state.time + wait;
    if t > horizon {
        state.time = horizon;
        return None;
    }
    state.time = t;
    let n = state.len();
    let u = rng.random::<f64>() * total;
    if u < birth {
        let parent = rng.random_range(0..n);
        let raw = state.positions[parent] + params.a_plus.sample(rng);
        let mut x = raw.rem_euclid(state.length);
        if x >= state.length {
            x = 0.0;
        }
        state.insert(x);
        Some(SimEvent {
            time: t,
            kind: EventKind::Birth,
            position: x,
            parent: Some(parent),
        })
    } else {
        let v = u - birth;
        let intrinsic = params.m * n as f64;
        let victim = if v < intrinsic {
            ((v / params.m) as usize).min(n - 1)
        } else {
            let crowd = params.eps * params.kappa_minus;
            state.tree.find((v - intrinsic) / crowd, n)
        };
        let position = state.positions[victim];
        state.remove(victim);
        Some(SimEvent {
            time: t,
            kind: EventKind::Death,
            position,
            parent: None,
        })
    }
}

/// Particle positions at one recorded time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub time: f64,
    pub positions: Vec<f64>,
}

fn check_times(t_end: f64, times: &[f64]) -> Result<()> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("bad end time {t_end}")));
    }
    if times.iter().any(|&t| !(0.0..=t_end).contains(&t)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(format!(
            "snapshot times must be sorted within [0, {t_end}]"
        )));
    }
    Ok(())
}

/// Simulates from a fresh Poisson sample to `t_end`, recording the
/// configuration at each (sorted) snapshot time.
pub fn run_trajectory(
    params: &ModelParams,
    rho0: &Field,
    t_end: f64,
    times: &[f64],
    seed: u64,
) -> Result<Vec<Snapshot>> {
    check_times(t_end, times)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = sample_initial(params, rho0, &mut rng)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        while step_until(params, &mut state, t, &mut rng).is_some() {}
        out.push(Snapshot {
            time: t,
            positions: state.positions.clone(),
        });
    }
    Ok(out)
}

/// Seed of replicate `r`; a SplitMix64 step keyed by the base seed.
pub fn replicate_seed(base: u64, r: u64) -> u64 {
    let mut z = base.wrapping_add((r + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleResult {
    pub params: ModelParams,
    pub times: Vec<f64>,
    pub seeds: Vec<u64>,
    /// `replicates[r][s]` is replicate `r` at `times[s]`.
    pub replicates: Vec<Vec<Snapshot>>,
}

impl EnsembleResult {
    pub fn len(&self) -> usize {
        self.replicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicates.is_empty()
    }

    /// Every replicate's snapshot at index `s`.
    pub fn at(&self, s: usize) -> impl Iterator<Item = &Snapshot> + '_ {
        self.replicates.iter().map(move |r| &r[s])
    }
}

/// Independent replicates in parallel; replicate `r` is
/// [`run_trajectory`] with [`replicate_seed`]`(base_seed, r)`.
pub fn run_ensemble(
    params: &ModelParams,
    rho0: &Field,
    t_end: f64,
    times: &[f64],
    replicates: usize,
    base_seed: u64,
) -> Result<EnsembleResult> {
    check_times(t_end, times)?;
    let seeds: Vec<u64> = (0..replicates as u64)
        .map(|r| replicate_seed(base_seed, r))
        .collect();
    let runs = seeds
        .par_iter()
        .map(|&s| run_trajectory(params, rho0, t_end, times, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleResult {
        params: params.clone(),
        times: times.to_vec(),
        seeds,
        replicates: runs,
    })
}
