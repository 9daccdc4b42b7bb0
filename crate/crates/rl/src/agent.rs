use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Transition;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("invalid agent parameter: {0}")]
    InvalidParams(String),
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("non-finite target {0}")]
    NonFiniteTarget(f64),
    #[error("budget {budget} is below replay_initial {replay_initial}")]
    BudgetTooSmall { budget: u64, replay_initial: u64 },
    #[error("q-table shape {found:?} does not match environment {expected:?}")]
    Shape {
        expected: (usize, usize),
        found: (usize, usize),
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.01,
            anneal_steps: 100_000,
        }
    }
}

/// Linear from `start` to `end` over `anneal_steps`, then flat.
pub fn epsilon_at(schedule: &EpsilonSchedule, step: u64) -> f64 {
    if schedule.anneal_steps == 0 || step >= schedule.anneal_steps {
        return schedule.end;
    }
    let frac = step as f64 / schedule.anneal_steps as f64;
    schedule.start + (schedule.end - schedule.start) * frac
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub gamma: f64,
    pub n_step: usize,
    pub learning_rate: f64,
    pub epsilon: EpsilonSchedule,
    /// Behaviour epsilon during evaluation.
    pub eval_epsilon: f64,
    pub target_update_period: u64,
    pub replay_capacity: usize,
    /// Random-policy steps before learning starts.
    pub replay_initial: u64,
    pub batch_size: usize,
    /// Environment steps per replay update.
    pub update_period: u64,
    pub sticky_p: f64,
    pub priority_exponent: f64,
    pub importance_exponent: f64,
    pub use_prioritized: bool,
    pub eval_episodes: usize,
    /// Learning-curve evaluations per run.
    pub curve_points: usize,
    pub curve_episodes: usize,
    pub episode_limit: u32,
    /// Treat episode ends as time-limit truncation and keep bootstrapping
    /// (the clock is not part of the observation).
    pub time_limit_bootstrap: bool,
    /// ε annealing length when finetuning a trained table.
    pub finetune_anneal_steps: u64,
    /// Random-policy warm-up when finetuning a trained table.
    pub finetune_replay_initial: u64,
    pub finetune_learning_rate: f64,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            n_step: 3,
            learning_rate: 0.1,
            epsilon: EpsilonSchedule::default(),
            eval_epsilon: 0.01,
            target_update_period: 1_000,
            replay_capacity: 50_000,
            replay_initial: 2_000,
            batch_size: 8,
            update_period: 1,
            sticky_p: 0.25,
            priority_exponent: 0.6,
            importance_exponent: 0.4,
            use_prioritized: true,
            eval_episodes: 30,
            curve_points: 10,
            curve_episodes: 5,
            episode_limit: crate::env::DEFAULT_EPISODE_LIMIT,
            time_limit_bootstrap: true,
            finetune_anneal_steps: 100_000 / FINETUNE_RATIO,
            finetune_replay_initial: 2_000 / FINETUNE_RATIO,
            finetune_learning_rate: 0.1,
        }
    }
}

/// Budget ratio between expert training and finetuning.
pub const FINETUNE_RATIO: u64 = 20;

impl AgentParams {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: String| Err(AgentError::InvalidParams(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if self.n_step == 0 {
            return bad("n_step must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate {} outside (0, 1]", self.learning_rate));
        }
        for (name, e) in [
            ("epsilon.start", self.epsilon.start),
            ("epsilon.end", self.epsilon.end),
            ("eval_epsilon", self.eval_epsilon),
            ("sticky_p", self.sticky_p),
        ] {
            if !(0.0..=1.0).contains(&e) {
                return bad(format!("{name} {e} outside [0, 1]"));
            }
        }
        if self.batch_size == 0 || self.update_period == 0 || self.target_update_period == 0 {
            return bad("batch_size, update_period and target_update_period must be positive".into());
        }
        if self.replay_capacity == 0 {
            return bad("replay_capacity must be positive".into());
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be positive".into());
        }
        if self.priority_exponent < 0.0 || self.importance_exponent < 0.0 {
            return bad("prioritization exponents must be nonnegative".into());
        }
        Ok(())
    }

    /// Schedule for adapting a trained table: a fresh ε anneal and warm-up of
    /// the finetuning lengths.
    pub fn finetune(&self) -> Self {
        let mut p = self.clone();
        p.epsilon.anneal_steps = self.finetune_anneal_steps;
        p.replay_initial = self.finetune_replay_initial;
        p.learning_rate = self.finetune_learning_rate;
        p
    }
}

/// Dense state x action value table, zero-initialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            values: vec![0.0; num_states * num_actions],
        }
    }

    pub fn from_values(num_states: usize, num_actions: usize, values: Vec<f64>) -> Option<Self> {
        (values.len() == num_states * num_actions && values.iter().all(|v| v.is_finite())).then_some(Self {
            num_states,
            num_actions,
            values,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_states, self.num_actions)
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.num_actions + action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.values[state * self.num_actions + action] = value;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Greedy action; ties go to the lowest index.
    pub fn argmax(&self, state: usize) -> usize {
        let row = self.row(state);
        let mut best = 0;
        for (a, v) in row.iter().enumerate().skip(1) {
            if *v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn max(&self, state: usize) -> f64 {
        self.row(state).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// ε-greedy action selection.
pub fn act<R: Rng>(q: &QTable, state: usize, epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..q.num_actions())
    } else {
        q.argmax(state)
    }
}

/// n-step double-Q return over the leading transitions of `traj`:
/// `Σ_{k<m} γ^k r_k + γ^m q_target(x_m, argmax_a q_online(x_m, a))`, with
/// `m = min(n, len)` and the bootstrap dropped if a terminal step is reached.
pub fn nstep_double_q_target(
    traj: &[Transition],
    q_online: &QTable,
    q_target: &QTable,
    gamma: f64,
    n: usize,
) -> Result<f64, AgentError> {
    if traj.is_empty() {
        return Err(AgentError::EmptyTrajectory);
    }
    let mut ret = 0.0;
    let mut discount = 1.0;
    let m = n.max(1).min(traj.len());
    for t in &traj[..m] {
        ret += discount * t.reward;
        discount *= gamma;
        if t.terminal {
            return Ok(ret);
        }
    }
    let x = traj[m - 1].next_state;
    Ok(ret + discount * q_target.get(x, q_online.argmax(x)))
}

/// `q(s, a) += lr * (target - q(s, a))`.
pub fn q_update(q: &mut QTable, state: usize, action: usize, target: f64, learning_rate: f64) -> Result<f64, AgentError> {
    if !target.is_finite() {
        return Err(AgentError::NonFiniteTarget(target));
    }
    let old = q.get(state, action);
    let td = target - old;
    q.set(state, action, old + learning_rate * td);
    Ok(td)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(state: usize, reward: f64, next_state: usize, terminal: bool) -> Transition {
        Transition {
            state,
            action: 0,
            reward,
            next_state,
            terminal,
            truncated: false,
        }
    }

    #[test]
    fn epsilon_schedule() {
        let s = EpsilonSchedule::default();
        assert_eq!(epsilon_at(&s, 0), 1.0);
        assert_eq!(epsilon_at(&s, s.anneal_steps), 0.01);
        assert_eq!(epsilon_at(&s, 10 * s.anneal_steps), 0.01);
        assert!((epsilon_at(&s, s.anneal_steps / 2) - 0.505).abs() < 1e-12);
    }

    #[test]
    fn greedy_and_ties() {
        let mut q = QTable::new(2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(act(&q, 0, 0.0, &mut rng), 0);
        q.set(1, 2, 0.5);
        q.set(1, 1, 0.5);
        assert_eq!(act(&q, 1, 0.0, &mut rng), 1);
    }

    #[test]
    fn uniform_exploration() {
        let q = QTable::new(1, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 3];
        let n = 100_000;
        for _ in 0..n {
            counts[act(&q, 0, 1.0, &mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.01);
        }
    }

    #[test]
    fn target_hand_values() {
        let mut online = QTable::new(4, 2);
        let mut target = QTable::new(4, 2);
        online.set(3, 1, 5.0);
        target.set(3, 1, 2.0);
        target.set(3, 0, 9.0);
        let traj = [tr(0, 1.0, 1, false), tr(1, 0.0, 2, false), tr(2, 1.0, 3, false)];
        let v = nstep_double_q_target(&traj, &online, &target, 0.99, 3).unwrap();
        assert!((v - 3.920698).abs() < 1e-12);
        assert_eq!(nstep_double_q_target(&traj, &online, &target, 0.0, 3).unwrap(), 1.0);
        let cut = [tr(0, 1.0, 1, true), tr(1, 5.0, 2, false)];
        assert_eq!(nstep_double_q_target(&cut, &online, &target, 0.99, 3).unwrap(), 1.0);
        assert_eq!(nstep_double_q_target(&[], &online, &target, 0.99, 3), Err(AgentError::EmptyTrajectory));
    }

    #[test]
    fn one_step_reduces_to_q_learning() {
        let mut q = QTable::new(3, 2);
        q.set(2, 0, 1.5);
        q.set(2, 1, -0.5);
        let t = [tr(0, 0.25, 2, false)];
        let v = nstep_double_q_target(&t, &q, &q, 0.9, 1).unwrap();
        assert_eq!(v, 0.25 + 0.9 * q.max(2));
    }

    #[test]
    fn update_arithmetic() {
        let mut q = QTable::new(1, 1);
        q_update(&mut q, 0, 0, 2.0, 0.5).unwrap();
        assert_eq!(q.get(0, 0), 1.0);
        q_update(&mut q, 0, 0, 1.0, 0.3).unwrap();
        assert_eq!(q.get(0, 0), 1.0);
        q_update(&mut q, 0, 0, 7.0, 1.0).unwrap();
        assert_eq!(q.get(0, 0), 7.0);
        assert!(q_update(&mut q, 0, 0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(AgentParams::default().validate().is_ok());
        let p = AgentParams {
            gamma: 1.5,
            ..AgentParams::default()
        };
        assert!(p.validate().is_err());
        let p = AgentParams {
            n_step: 0,
            ..AgentParams::default()
        };
        assert!(p.validate().is_err());
        let f = AgentParams::default().finetune();
        assert_eq!(f.epsilon.anneal_steps, 5_000);
        assert_eq!(f.replay_initial, 100);
    }
}
