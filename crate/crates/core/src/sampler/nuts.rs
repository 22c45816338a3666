use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::adapt::{DualAveraging, WindowedAdaptation};
use super::{Model, SampleRecord, Target};
use crate::error::{ensure_finite, Error, Result};
use crate::parallel::{map_indexed, Execution};

/// Sampler settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NutsConfig {
    pub n_warmup: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub max_depth: usize,
    /// Energy error beyond which a trajectory counts as divergent.
    pub max_delta_h: f64,
    /// Adapt a diagonal inverse metric during warmup.
    pub adapt_metric: bool,
    pub init_step_size: f64,
    /// Fail when more than this fraction of warmup transitions diverge.
    pub max_warmup_divergence_rate: f64,
}

impl Default for NutsConfig {
    fn default() -> Self {
        Self {
            n_warmup: 1000,
            n_samples: 1000,
            seed: 1,
            target_accept: 0.8,
            max_depth: 10,
            max_delta_h: 1000.0,
            adapt_metric: true,
            init_step_size: 1.0,
            max_warmup_divergence_rate: 0.5,
        }
    }
}

/// Position, momentum and bookkeeping for one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
    /// Gradient of the log density at `position`.
    pub gradient: Vec<f64>,
    pub log_density: f64,
    pub step_size: f64,
    pub n_leapfrog: usize,
    pub rng_seed: u64,
    pub iteration: usize,
}

impl ChainState {
    /// Evaluates the target at `position` with zero momentum.
    pub fn new(target: &mut dyn Target, position: Vec<f64>, step_size: f64, rng_seed: u64) -> Result<Self> {
        ensure_finite(&position, "initial position")?;
        let mut gradient = vec![0.0; position.len()];
        let log_density = target.log_density_grad(&position, &mut gradient)?;
        if !log_density.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical("log density or gradient not finite at the initial position".into()));
        }
        let momentum = vec![0.0; position.len()];
        Ok(Self { position, momentum, gradient, log_density, step_size, n_leapfrog: 0, rng_seed, iteration: 0 })
    }

    /// `H = −log π(q) + ½ pᵀ M⁻¹ p`.
    pub fn hamiltonian(&self, inv_metric: &[f64]) -> f64 {
        -self.log_density + kinetic(&self.momentum, inv_metric)
    }
}

fn kinetic(p: &[f64], inv_metric: &[f64]) -> f64 {
    0.5 * p.iter().zip(inv_metric).map(|(p, m)| p * p * m).sum::<f64>()
}

#[derive(Debug, Clone)]
struct Point {
    q: Vec<f64>,
    p: Vec<f64>,
    g: Vec<f64>,
    logp: f64,
}

impl Point {
    fn h(&self, inv_metric: &[f64]) -> f64 {
        let h = -self.logp + kinetic(&self.p, inv_metric);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }
}

/// One leapfrog step in place. Returns `false` if the target could not be
/// evaluated at the new position.
fn evolve(target: &mut dyn Target, z: &mut Point, eps: f64, inv_metric: &[f64]) -> bool {
    let half = 0.5 * eps;
    for i in 0..z.q.len() {
        z.p[i] += half * z.g[i];
    }
    for i in 0..z.q.len() {
        z.q[i] += eps * inv_metric[i] * z.p[i];
    }
    match target.log_density_grad(&z.q, &mut z.g) {
        Ok(lp) if lp.is_finite() && z.g.iter().all(|g| g.is_finite()) => {
            z.logp = lp;
            for i in 0..z.q.len() {
                z.p[i] += half * z.g[i];
            }
            true
        }
        _ => {
            z.logp = f64::NEG_INFINITY;
            false
        }
    }
}

/// Runs `n_steps` leapfrog steps of size `eps` from `state`.
///
/// Returns the new state and a divergence flag, raised when the target fails
/// or returns a non-finite value along the way.
pub fn leapfrog(
    state: &ChainState,
    target: &mut dyn Target,
    eps: f64,
    n_steps: usize,
    inv_metric: &[f64],
) -> (ChainState, bool) {
    let mut z = Point { q: state.position.clone(), p: state.momentum.clone(), g: state.gradient.clone(), logp: state.log_density };
    let mut divergent = false;
    let mut taken = 0;
    for _ in 0..n_steps {
        taken += 1;
        if !evolve(target, &mut z, eps, inv_metric) {
            divergent = true;
            break;
        }
    }
    let next = ChainState {
        position: z.q,
        momentum: z.p,
        gradient: z.g,
        log_density: z.logp,
        step_size: eps,
        n_leapfrog: state.n_leapfrog + taken,
        rng_seed: state.rng_seed,
        iteration: state.iteration,
    };
    (next, divergent)
}

/// Outcome of one NUTS transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionStats {
    pub accept_stat: f64,
    pub tree_depth: usize,
    pub n_leapfrog: usize,
    pub divergent: bool,
    pub energy: f64,
}

/// Draws and health summaries of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub chain_id: usize,
    pub records: Vec<SampleRecord>,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    pub warmup_divergences: usize,
    pub divergences: usize,
    pub max_depth_hits: usize,
    pub mean_accept_stat: f64,
    /// Energy Bayesian fraction of missing information.
    pub ebfmi: f64,
    pub tree_depth_counts: Vec<usize>,
}

struct Nuts<'t> {
    target: &'t mut dyn Target,
    rng: ChaCha8Rng,
    inv_metric: Vec<f64>,
    eps: f64,
    max_depth: usize,
    max_delta_h: f64,
    divergent: bool,
}

fn criterion(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    let a: f64 = p_sharp_plus.iter().zip(rho).map(|(x, y)| x * y).sum();
    let b: f64 = p_sharp_minus.iter().zip(rho).map(|(x, y)| x * y).sum();
    a > 0.0 && b > 0.0
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

fn sum(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

impl Nuts<'_> {
    fn p_sharp(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.inv_metric).map(|(p, m)| p * m).collect()
    }

    fn sample_momentum(&mut self, z: &mut Point) {
        for i in 0..z.p.len() {
            let n: f64 = self.rng.sample(StandardNormal);
            z.p[i] = n / self.inv_metric[i].sqrt();
        }
    }

    /// Doubles the step size while the one-step acceptance stays above 0.8,
    /// or halves it while below.
    fn init_step_size(&mut self, z_init: &Point) -> Result<()> {
        let ln08 = 0.8f64.ln();
        let mut direction = 0i32;
        loop {
            let mut z = z_init.clone();
            self.sample_momentum(&mut z);
            let h0 = z.h(&self.inv_metric);
            let h = if evolve(self.target, &mut z, self.eps, &self.inv_metric) { z.h(&self.inv_metric) } else { f64::INFINITY };
            let delta_h = h0 - h;
            if direction == 0 {
                direction = if delta_h > ln08 { 1 } else { -1 };
            } else if (direction == 1 && !(delta_h > ln08)) || (direction == -1 && !(delta_h < ln08)) {
                break;
            }
            if direction == 1 {
                self.eps *= 2.0;
            } else {
                self.eps *= 0.5;
            }
            if self.eps > 1e7 {
                return Err(Error::Diagnostics("step size search diverged; the posterior may be improper".into()));
            }
            if self.eps == 0.0 {
                return Err(Error::Diagnostics("step size search collapsed to zero".into()));
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn build_tree(
        &mut self,
        z: &mut Point,
        depth: usize,
        z_propose: &mut Point,
        p_sharp_beg: &mut Vec<f64>,
        p_sharp_end: &mut Vec<f64>,
        rho: &mut [f64],
        p_beg: &mut Vec<f64>,
        p_end: &mut Vec<f64>,
        h0: f64,
        sign: f64,
        n_leapfrog: &mut usize,
        log_sum_weight: &mut f64,
        sum_metro_prob: &mut f64,
    ) -> bool {
        if depth == 0 {
            let ok = evolve(self.target, z, sign * self.eps, &self.inv_metric);
            *n_leapfrog += 1;
            let h = if ok { z.h(&self.inv_metric) } else { f64::INFINITY };
            if !ok || h - h0 > self.max_delta_h {
                self.divergent = true;
            }
            *log_sum_weight = log_sum_exp(*log_sum_weight, h0 - h);
            *sum_metro_prob += if h0 - h > 0.0 { 1.0 } else { (h0 - h).exp() };
            *z_propose = z.clone();
            *p_sharp_beg = self.p_sharp(&z.p);
            *p_sharp_end = p_sharp_beg.clone();
            add_into(rho, &z.p);
            *p_beg = z.p.clone();
            *p_end = z.p.clone();
            return !self.divergent;
        }

        let dim = z.q.len();
        let mut log_sum_weight_init = f64::NEG_INFINITY;
        let mut p_init_end = vec![0.0; dim];
        let mut p_sharp_init_end = vec![0.0; dim];
        let mut rho_init = vec![0.0; dim];
        let valid_init = self.build_tree(
            z,
            depth - 1,
            z_propose,
            p_sharp_beg,
            &mut p_sharp_init_end,
            &mut rho_init,
            p_beg,
            &mut p_init_end,
            h0,
            sign,
            n_leapfrog,
            &mut log_sum_weight_init,
            sum_metro_prob,
        );
        if !valid_init {
            return false;
        }

        let mut z_propose_final = z.clone();
        let mut log_sum_weight_final = f64::NEG_INFINITY;
        let mut p_final_beg = vec![0.0; dim];
        let mut p_sharp_final_beg = vec![0.0; dim];
        let mut rho_final = vec![0.0; dim];
        let valid_final = self.build_tree(
            z,
            depth - 1,
            &mut z_propose_final,
            &mut p_sharp_final_beg,
            p_sharp_end,
            &mut rho_final,
            &mut p_final_beg,
            p_end,
            h0,
            sign,
            n_leapfrog,
            &mut log_sum_weight_final,
            sum_metro_prob,
        );
        if !valid_final {
            return false;
        }

        let log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, log_sum_weight_subtree);
        if log_sum_weight_final > log_sum_weight_subtree {
            *z_propose = z_propose_final;
        } else {
            let accept_prob = (log_sum_weight_final - log_sum_weight_subtree).exp();
            if self.rng.random::<f64>() < accept_prob {
                *z_propose = z_propose_final;
            }
        }

        let rho_subtree = sum(&rho_init, &rho_final);
        add_into(rho, &rho_subtree);
        let mut persist = criterion(p_sharp_beg, p_sharp_end, &rho_subtree);
        let rho_extended = sum(&rho_init, &p_final_beg);
        persist &= criterion(p_sharp_beg, &p_sharp_final_beg, &rho_extended);
        let rho_extended = sum(&rho_final, &p_init_end);
        persist &= criterion(&p_sharp_init_end, p_sharp_end, &rho_extended);
        persist
    }

    fn transition(&mut self, current: &Point) -> (Point, TransitionStats) {
        let mut z = current.clone();
        self.sample_momentum(&mut z);
        self.divergent = false;

        let mut z_fwd = z.clone();
        let mut z_bck = z.clone();
        let mut z_sample = z.clone();
        let mut z_propose = z.clone();

        let p_sharp0 = self.p_sharp(&z.p);
        let mut p_sharp_fwd_bck = p_sharp0.clone();
        let mut p_sharp_fwd_fwd = p_sharp0.clone();
        let mut p_sharp_bck_fwd = p_sharp0.clone();
        let mut p_sharp_bck_bck = p_sharp0;
        let mut p_fwd_bck = z.p.clone();
        let mut p_fwd_fwd = z.p.clone();
        let mut p_bck_fwd = z.p.clone();
        let mut p_bck_bck = z.p.clone();
        let mut rho = z.p.clone();

        let mut log_sum_weight = 0.0;
        let h0 = z.h(&self.inv_metric);
        let mut n_leapfrog = 0;
        let mut sum_metro_prob = 0.0;
        let mut depth = 0;
        let dim = z.q.len();

        while depth < self.max_depth {
            let mut rho_fwd = vec![0.0; dim];
            let mut rho_bck = vec![0.0; dim];
            let mut log_sum_weight_subtree = f64::NEG_INFINITY;
            let valid_subtree;

            if self.rng.random::<f64>() > 0.5 {
                z = z_fwd.clone();
                rho_bck.copy_from_slice(&rho);
                p_bck_fwd.copy_from_slice(&p_fwd_bck);
                p_sharp_bck_fwd.copy_from_slice(&p_sharp_fwd_bck);
                valid_subtree = self.build_tree(
                    &mut z,
                    depth,
                    &mut z_propose,
                    &mut p_sharp_fwd_bck,
                    &mut p_sharp_fwd_fwd,
                    &mut rho_fwd,
                    &mut p_fwd_bck,
                    &mut p_fwd_fwd,
                    h0,
                    1.0,
                    &mut n_leapfrog,
                    &mut log_sum_weight_subtree,
                    &mut sum_metro_prob,
                );
                z_fwd = z.clone();
            } else {
                z = z_bck.clone();
                rho_fwd.copy_from_slice(&rho);
                p_fwd_bck.copy_from_slice(&p_bck_fwd);
                p_sharp_fwd_bck.copy_from_slice(&p_sharp_bck_fwd);
                valid_subtree = self.build_tree(
                    &mut z,
                    depth,
                    &mut z_propose,
                    &mut p_sharp_bck_fwd,
                    &mut p_sharp_bck_bck,
                    &mut rho_bck,
                    &mut p_bck_fwd,
                    &mut p_bck_bck,
                    h0,
                    -1.0,
                    &mut n_leapfrog,
                    &mut log_sum_weight_subtree,
                    &mut sum_metro_prob,
                );
                z_bck = z.clone();
            }

            if !valid_subtree {
                break;
            }
            depth += 1;

            if log_sum_weight_subtree > log_sum_weight {
                z_sample = z_propose.clone();
            } else {
                let accept_prob = (log_sum_weight_subtree - log_sum_weight).exp();
                if self.rng.random::<f64>() < accept_prob {
                    z_sample = z_propose.clone();
                }
            }
            log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

            rho = sum(&rho_bck, &rho_fwd);
            let mut persist = criterion(&p_sharp_bck_bck, &p_sharp_fwd_fwd, &rho);
            let rho_extended = sum(&rho_bck, &p_fwd_bck);
            persist &= criterion(&p_sharp_bck_bck, &p_sharp_fwd_bck, &rho_extended);
            let rho_extended = sum(&rho_fwd, &p_bck_fwd);
            persist &= criterion(&p_sharp_bck_fwd, &p_sharp_fwd_fwd, &rho_extended);
            if !persist {
                break;
            }
        }

        let accept_stat = if n_leapfrog > 0 { sum_metro_prob / n_leapfrog as f64 } else { 0.0 };
        let energy = z_sample.h(&self.inv_metric);
        let stats = TransitionStats { accept_stat, tree_depth: depth, n_leapfrog, divergent: self.divergent, energy };
        (z_sample, stats)
    }
}

/// Runs one chain of NUTS from `init`, adapting during warmup.
///
/// The chain's random stream is ChaCha8 seeded with `config.seed + chain_id`.
pub fn nuts_sample(target: &mut dyn Target, init: &[f64], config: &NutsConfig, chain_id: usize) -> Result<ChainOutput> {
    let seed = config.seed.wrapping_add(chain_id as u64);
    sample_with_rng(target, init, config, chain_id, ChaCha8Rng::seed_from_u64(seed))
}

fn validate(config: &NutsConfig) -> Result<()> {
    if !(config.target_accept > 0.0 && config.target_accept < 1.0) {
        return Err(Error::Config(format!("target_accept must lie in (0, 1), got {}", config.target_accept)));
    }
    if config.max_depth == 0 {
        return Err(Error::Config("max_depth must be at least 1".into()));
    }
    if !(config.init_step_size > 0.0) {
        return Err(Error::Config("init_step_size must be positive".into()));
    }
    Ok(())
}

fn sample_with_rng(
    target: &mut dyn Target,
    init: &[f64],
    config: &NutsConfig,
    chain_id: usize,
    rng: ChaCha8Rng,
) -> Result<ChainOutput> {
    validate(config)?;
    let dim = target.dim();
    if init.len() != dim {
        return Err(Error::Input(format!("initial position has length {} but the target has dimension {dim}", init.len())));
    }
    let state = ChainState::new(target, init.to_vec(), config.init_step_size, config.seed.wrapping_add(chain_id as u64))?;
    let mut current = Point { q: state.position, p: state.momentum, g: state.gradient, logp: state.log_density };

    let mut nuts = Nuts {
        target,
        rng,
        inv_metric: vec![1.0; dim],
        eps: config.init_step_size,
        max_depth: config.max_depth,
        max_delta_h: config.max_delta_h,
        divergent: false,
    };
    nuts.init_step_size(&current)?;
    let mut step_adapt = DualAveraging::new(config.target_accept);
    step_adapt.restart(nuts.eps);
    let mut metric_adapt = WindowedAdaptation::new(config.n_warmup, dim);

    let mut warmup_divergences = 0;
    for _ in 0..config.n_warmup {
        let (next, stats) = nuts.transition(&current);
        current = next;
        warmup_divergences += stats.divergent as usize;
        nuts.eps = step_adapt.learn(stats.accept_stat);
        if config.adapt_metric && metric_adapt.learn(&mut nuts.inv_metric, &current.q) {
            nuts.init_step_size(&current)?;
            step_adapt.restart(nuts.eps);
        }
    }
    if config.n_warmup > 0 {
        let rate = warmup_divergences as f64 / config.n_warmup as f64;
        if rate > config.max_warmup_divergence_rate {
            return Err(Error::Diagnostics(format!(
                "chain {chain_id}: {warmup_divergences} of {} warmup transitions diverged ({:.1}%)",
                config.n_warmup,
                100.0 * rate
            )));
        }
        nuts.eps = step_adapt.final_step_size();
    }

    let mut records = Vec::with_capacity(config.n_samples);
    let mut divergences = 0;
    let mut max_depth_hits = 0;
    let mut tree_depth_counts = vec![0; config.max_depth + 1];
    for _ in 0..config.n_samples {
        let (next, stats) = nuts.transition(&current);
        current = next;
        divergences += stats.divergent as usize;
        max_depth_hits += (stats.tree_depth >= config.max_depth) as usize;
        tree_depth_counts[stats.tree_depth] += 1;
        let draw = nuts.target.draw(&current.q)?;
        records.push(SampleRecord {
            beta: draw.beta,
            theta: draw.theta,
            r: draw.r,
            extras: draw.extras,
            log_posterior: current.logp,
            accept_stat: stats.accept_stat,
            tree_depth: stats.tree_depth,
            n_leapfrog: stats.n_leapfrog,
            divergent: stats.divergent,
            energy: stats.energy,
        });
    }

    let energies: Vec<f64> = records.iter().map(|r| r.energy).collect();
    let mean_accept_stat = if records.is_empty() {
        f64::NAN
    } else {
        records.iter().map(|r| r.accept_stat).sum::<f64>() / records.len() as f64
    };
    Ok(ChainOutput {
        chain_id,
        records,
        step_size: nuts.eps,
        inv_metric: nuts.inv_metric,
        warmup_divergences,
        divergences,
        max_depth_hits,
        mean_accept_stat,
        ebfmi: ebfmi(&energies),
        tree_depth_counts,
    })
}

/// `Σ (E_n − E_{n−1})² / Σ (E_n − Ē)²`.
pub fn ebfmi(energies: &[f64]) -> f64 {
    if energies.len() < 2 {
        return f64::NAN;
    }
    let mean = energies.iter().sum::<f64>() / energies.len() as f64;
    let num: f64 = energies.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let den: f64 = energies.iter().map(|e| (e - mean).powi(2)).sum();
    num / den
}

/// Runs `n_chains` independent chains of `model`, in parallel when `exec`
/// allows. Chain `k` draws its initial position and its transitions from the
/// stream seeded with `config.seed + k`, so results do not depend on `exec`.
pub fn run_chains(model: &dyn Model, config: &NutsConfig, n_chains: usize, exec: Execution) -> Result<Vec<ChainOutput>> {
    validate(config)?;
    map_indexed(n_chains, exec, |chain| -> Result<ChainOutput> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(chain as u64));
        let mut target = model.make_target()?;
        let mut init = model.initial_position(&mut rng);
        let mut attempts = 1;
        while let Err(e) = ChainState::new(target.as_mut(), init.clone(), 1.0, 0) {
            if attempts >= 100 {
                return Err(Error::Numerical(format!("chain {chain}: no usable initial position after 100 attempts: {e}")));
            }
            init = model.initial_position(&mut rng);
            attempts += 1;
        }
        sample_with_rng(target.as_mut(), &init, config, chain, rng)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::Draw;

    struct Gauss(usize);

    impl Target for Gauss {
        fn dim(&self) -> usize {
            self.0
        }
        fn log_density_grad(&mut self, q: &[f64], grad: &mut [f64]) -> Result<f64> {
            for (g, x) in grad.iter_mut().zip(q) {
                *g = -x;
            }
            Ok(-0.5 * q.iter().map(|x| x * x).sum::<f64>())
        }
        fn draw(&mut self, q: &[f64]) -> Result<Draw> {
            Ok(Draw { beta: q.to_vec(), theta: q.to_vec(), ..Draw::default() })
        }
    }

    #[test]
    fn stationary_point_is_fixed() {
        let mut t = Gauss(3);
        let s = ChainState::new(&mut t, vec![0.0; 3], 0.1, 0).unwrap();
        let (next, div) = leapfrog(&s, &mut t, 0.1, 10, &[1.0; 3]);
        assert!(!div);
        assert_eq!(next.position, vec![0.0; 3]);
    }

    #[test]
    fn leapfrog_is_reversible() {
        let mut t = Gauss(2);
        let mut s = ChainState::new(&mut t, vec![0.3, -1.1], 0.1, 0).unwrap();
        s.momentum = vec![0.7, 0.2];
        let (mut mid, _) = leapfrog(&s, &mut t, 0.1, 25, &[1.0, 1.0]);
        mid.momentum.iter_mut().for_each(|p| *p = -*p);
        let (back, _) = leapfrog(&mid, &mut t, 0.1, 25, &[1.0, 1.0]);
        for (a, b) in back.position.iter().zip(&s.position) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = NutsConfig { n_warmup: 200, n_samples: 100, seed: 9, ..NutsConfig::default() };
        let a = nuts_sample(&mut Gauss(3), &[0.5, 0.5, 0.5], &cfg, 0).unwrap();
        let b = nuts_sample(&mut Gauss(3), &[0.5, 0.5, 0.5], &cfg, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_moments() {
        let cfg = NutsConfig { n_warmup: 500, n_samples: 4000, seed: 3, ..NutsConfig::default() };
        let out = nuts_sample(&mut Gauss(5), &[1.0; 5], &cfg, 0).unwrap();
        for i in 0..5 {
            let xs: Vec<f64> = out.records.iter().map(|r| r.theta[i]).collect();
            let m = crate::stats::mean(&xs);
            let se = (crate::stats::variance(&xs) / crate::stats::effective_sample_size(&xs)).sqrt();
            assert!(m.abs() < 4.0 * se, "coordinate {i}: mean {m}, se {se}");
            assert!((crate::stats::variance(&xs) - 1.0).abs() < 0.1);
        }
        assert!(out.mean_accept_stat > 0.6 && out.mean_accept_stat < 0.95);
        assert!(out.ebfmi > 0.2);
    }
}
