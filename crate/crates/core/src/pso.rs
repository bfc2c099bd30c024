//! Continuous particle swarm optimizer shared by partitioning and placement.
//!
//! Positions live in the unit hypercube; problems decode them into discrete
//! solutions inside their fitness function. Fitness evaluation of distinct
//! particles runs on the rayon pool; the swarm update is sequential and draws
//! from one seeded stream, so runs are reproducible regardless of pool size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Deadline;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoParams {
    pub swarm_size: usize,
    pub iterations: usize,
    /// Inertia weight.
    pub w: f64,
    /// Cognitive (personal best) coefficient.
    pub c1: f64,
    /// Social (global best) coefficient.
    pub c2: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        // constriction-equivalent coefficients
        Self {
            swarm_size: 20,
            iterations: 100,
            w: 0.7298,
            c1: 1.49618,
            c2: 1.49618,
        }
    }
}

impl PsoParams {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size == 0 {
            return Err(Error::range("pso.swarm_size", "must be at least 1"));
        }
        for (name, v) in [("pso.w", self.w), ("pso.c1", self.c1), ("pso.c2", self.c2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::range(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

const V_MAX: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct PsoOutcome {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    /// Global-best fitness after initialization (index 0) and after each iteration.
    pub history: Vec<f64>,
}

struct Particle {
    position: Vec<f64>,
    velocity: Vec<f64>,
    best_position: Vec<f64>,
    best_fitness: f64,
}

/// Minimizes `fitness` over `[0, 1]^dim`.
///
/// `initial` positions (if any) replace the random initialization of the
/// first particles; extra entries beyond the swarm size are ignored.
pub fn minimize<F>(
    dim: usize,
    params: &PsoParams,
    seed: u64,
    initial: &[Vec<f64>],
    deadline: &Deadline,
    fitness: F,
) -> Result<PsoOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    minimize_observed(dim, params, seed, initial, deadline, fitness, |_, _| {})
}

/// Current positions and fitness values of the swarm, as handed to observers.
pub struct SwarmView<'a> {
    pub positions: Vec<&'a [f64]>,
    pub fitness: &'a [f64],
}

/// Like [`minimize`], calling `observe(iteration, swarm)` after every
/// evaluation (iteration 0 is the initial swarm).
pub fn minimize_observed<F, O>(
    dim: usize,
    params: &PsoParams,
    seed: u64,
    initial: &[Vec<f64>],
    deadline: &Deadline,
    fitness: F,
    mut observe: O,
) -> Result<PsoOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
    O: FnMut(usize, SwarmView<'_>),
{
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut swarm: Vec<Particle> = (0..params.swarm_size)
        .map(|k| {
            let position: Vec<f64> = match initial.get(k) {
                Some(p) => {
                    assert_eq!(p.len(), dim, "initial position has wrong dimension");
                    p.iter().map(|x| x.clamp(0.0, 1.0)).collect()
                }
                None => (0..dim).map(|_| rng.gen::<f64>()).collect(),
            };
            let velocity = (0..dim).map(|_| rng.gen_range(-V_MAX..=V_MAX) * 0.5).collect();
            Particle {
                best_position: position.clone(),
                position,
                velocity,
                best_fitness: f64::INFINITY,
            }
        })
        .collect();

    let mut best_position = swarm[0].position.clone();
    let mut best_fitness = f64::INFINITY;
    let scores = evaluate(&mut swarm, &fitness, &mut best_position, &mut best_fitness);
    observe(0, view(&swarm, &scores));
    let mut history = Vec::with_capacity(params.iterations + 1);
    history.push(best_fitness);

    for iter in 1..=params.iterations {
        deadline.check()?;
        for p in &mut swarm {
            for d in 0..dim {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                let v = params.w * p.velocity[d]
                    + params.c1 * r1 * (p.best_position[d] - p.position[d])
                    + params.c2 * r2 * (best_position[d] - p.position[d]);
                let v = v.clamp(-V_MAX, V_MAX);
                let x = p.position[d] + v;
                if !(0.0..=1.0).contains(&x) {
                    p.position[d] = x.clamp(0.0, 1.0);
                    p.velocity[d] = 0.0;
                } else {
                    p.position[d] = x;
                    p.velocity[d] = v;
                }
            }
        }
        let scores = evaluate(&mut swarm, &fitness, &mut best_position, &mut best_fitness);
        observe(iter, view(&swarm, &scores));
        history.push(best_fitness);
    }

    Ok(PsoOutcome {
        best_position,
        best_fitness,
        history,
    })
}

fn view<'a>(swarm: &'a [Particle], scores: &'a [f64]) -> SwarmView<'a> {
    SwarmView {
        positions: swarm.iter().map(|p| p.position.as_slice()).collect(),
        fitness: scores,
    }
}

fn evaluate<F>(swarm: &mut [Particle], fitness: &F, gbest: &mut Vec<f64>, gbest_fit: &mut f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let scores: Vec<f64> = swarm.par_iter().map(|p| fitness(&p.position)).collect();
    for (p, &f) in swarm.iter_mut().zip(&scores) {
        if f < p.best_fitness {
            p.best_fitness = f;
            p.best_position.clone_from(&p.position);
        }
        // strict improvement only: ties keep the earlier best
        if f < *gbest_fit {
            *gbest_fit = f;
            gbest.clone_from(&p.position);
        }
    }
    scores
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum()
    }

    #[test]
    fn converges_on_sphere() {
        let out = minimize(4, &PsoParams::default(), 7, &[], &Deadline::none(), sphere).unwrap();
        assert!(out.best_fitness < 1e-6, "{}", out.best_fitness);
    }

    #[test]
    fn global_best_is_non_increasing_and_deterministic() {
        let p = PsoParams { iterations: 30, ..PsoParams::default() };
        let a = minimize(6, &p, 3, &[], &Deadline::none(), sphere).unwrap();
        let b = minimize(6, &p, 3, &[], &Deadline::none(), sphere).unwrap();
        assert!(a.history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(a.history, b.history);
        assert_eq!(a.best_position, b.best_position);
    }

    #[test]
    fn seeded_particle_bounds_result() {
        let seed_pos = vec![vec![0.3; 3]];
        let p = PsoParams { iterations: 0, ..PsoParams::default() };
        let out = minimize(3, &p, 1, &seed_pos, &Deadline::none(), sphere).unwrap();
        assert_eq!(out.best_fitness, 0.0);
    }
}
