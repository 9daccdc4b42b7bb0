//! Training, evaluation, finetuning and the all-to-all transfer experiment.
//!
//! Every run draws its randomness from seeds derived from `(base seed, role,
//! variant, index)`, so results do not depend on worker scheduling.

use std::collections::{BTreeMap, VecDeque};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use curricula_core::design::{enumerate_variants, FactorialDesign, VariantId};
use curricula_core::scores::{build_transfer_matrix, select_top_k, ScoreKind, ScoreTable, TransferMatrix};

use crate::agent::{act, epsilon_at, nstep_double_q_target, q_update, AgentError, AgentParams, QTable};
use crate::checkpoint::{self, CheckpointMeta};
use crate::env::{Environment, MiniEnvConfig, MiniFreeway, Transition, NUM_ACTIONS, NUM_STATES};
use crate::replay::{importance_weights, ReplayBuffer};
use crate::RlError;

const PRIORITY_EPS: f64 = 1e-6;

/// Seed roles.
pub mod role {
    pub const EXPERT: u64 = 1;
    pub const FINETUNE: u64 = 2;
    pub const SCRATCH: u64 = 3;
    pub const TRAIN_ENV: u64 = 10;
    pub const TRAIN_AGENT: u64 = 11;
    pub const EVAL_ENV: u64 = 12;
    pub const EVAL_AGENT: u64 = 13;
    pub const CURVE: u64 = 14;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(base), |acc, p| splitmix64(acc ^ splitmix64(*p)))
}

fn variant_key(v: VariantId) -> u64 {
    ((v.difficulty_bit as u64) << 16) | v.mode_code as u64
}

/// Evaluation seed of a run on a target; a run evaluated on its own variant
/// reproduces its recorded final score.
pub fn eval_seed(run_seed: u64, target: VariantId) -> u64 {
    derive_seed(run_seed, &[role::EVAL_ENV, variant_key(target)])
}

fn env_for(variant: VariantId, params: &AgentParams, seed: u64) -> Result<MiniFreeway, RlError> {
    let mut config = MiniEnvConfig::from_variant(variant, seed)?;
    config.sticky_p = params.sticky_p;
    config.episode_limit = params.episode_limit;
    Ok(MiniFreeway::new(config)?)
}

/// Mean episode return of ε-greedy play.
pub fn evaluate_env<E: Environment>(
    env: &mut E,
    q: &QTable,
    episodes: usize,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64, RlError> {
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut obs = env.reset();
        loop {
            let t = env.step(act(q, obs, epsilon, rng))?;
            total += t.reward;
            obs = t.next_state;
            if t.terminal || t.truncated {
                break;
            }
        }
    }
    Ok(total / episodes as f64)
}

/// Mean return of `q` on a MiniFreeway variant over `episodes` episodes.
pub fn evaluate(
    q: &QTable,
    variant: VariantId,
    params: &AgentParams,
    episodes: usize,
    epsilon: f64,
    seed: u64,
) -> Result<f64, RlError> {
    if episodes == 0 {
        return Err(AgentError::InvalidParams("episodes must be positive".into()).into());
    }
    check_shape(q)?;
    let mut env = env_for(variant, params, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[role::EVAL_AGENT]));
    evaluate_env(&mut env, q, episodes, epsilon, &mut rng)
}

fn check_shape(q: &QTable) -> Result<(), AgentError> {
    if q.shape() != (NUM_STATES, NUM_ACTIONS) {
        return Err(AgentError::Shape {
            expected: (NUM_STATES, NUM_ACTIONS),
            found: q.shape(),
        });
    }
    Ok(())
}

/// Replay-based n-step double-Q learning for `budget` environment steps,
/// starting from `q`. The first `replay_initial` steps act uniformly at
/// random and do not learn; ε then anneals from its start value.
/// `on_step(step, q)` runs after every step.
pub fn learn<E: Environment>(
    env: &mut E,
    q: QTable,
    params: &AgentParams,
    budget: u64,
    rng: &mut ChaCha8Rng,
    mut on_step: impl FnMut(u64, &QTable) -> Result<(), RlError>,
) -> Result<QTable, RlError> {
    params.validate()?;
    if q.shape() != (env.num_states(), env.num_actions()) {
        return Err(AgentError::Shape {
            expected: (env.num_states(), env.num_actions()),
            found: q.shape(),
        }
        .into());
    }
    let mut online = q;
    let mut target = online.clone();
    let mut buffer: ReplayBuffer<Vec<Transition>> = if params.use_prioritized {
        ReplayBuffer::prioritized(params.replay_capacity, params.priority_exponent)
    } else {
        ReplayBuffer::uniform(params.replay_capacity)
    };
    let mut window: VecDeque<Transition> = VecDeque::with_capacity(params.n_step);
    let mut obs = env.reset();
    for step in 0..budget {
        let eps = if step < params.replay_initial {
            1.0
        } else {
            epsilon_at(&params.epsilon, step - params.replay_initial)
        };
        let mut t = env.step(act(&online, obs, eps, rng))?;
        if params.time_limit_bootstrap && t.terminal {
            t.terminal = false;
            t.truncated = true;
        }
        window.push_back(t);
        if window.len() == params.n_step {
            buffer.push(window.iter().copied().collect());
            window.pop_front();
        }
        if t.terminal || t.truncated {
            while !window.is_empty() {
                buffer.push(window.iter().copied().collect());
                window.pop_front();
            }
            obs = env.reset();
        } else {
            obs = t.next_state;
        }
        if step >= params.replay_initial && (step + 1) % params.update_period == 0 && !buffer.is_empty() {
            replay_update(&mut online, &target, &mut buffer, params, rng)?;
        }
        if (step + 1) % params.target_update_period == 0 {
            target.clone_from(&online);
        }
        on_step(step + 1, &online)?;
    }
    Ok(online)
}

fn replay_update(
    online: &mut QTable,
    target: &QTable,
    buffer: &mut ReplayBuffer<Vec<Transition>>,
    params: &AgentParams,
    rng: &mut ChaCha8Rng,
) -> Result<(), RlError> {
    let batch: Vec<(usize, f64)> = buffer
        .sample(rng, params.batch_size)?
        .iter()
        .map(|s| (s.index, s.probability))
        .collect();
    let weights = if buffer.is_prioritized() {
        let probs: Vec<f64> = batch.iter().map(|b| b.1).collect();
        importance_weights(&probs, buffer.len(), params.importance_exponent)
    } else {
        vec![1.0; batch.len()]
    };
    for ((index, _), w) in batch.iter().zip(weights) {
        let traj = buffer.get(*index).expect("sampled index");
        let first = traj[0];
        let y = nstep_double_q_target(traj, online, target, params.gamma, params.n_step)?;
        let td = q_update(online, first.state, first.action, y, params.learning_rate * w)?;
        buffer.update_priority(*index, td.abs() + PRIORITY_EPS)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub q: QTable,
    /// `(step, eval_return)`.
    pub curve: Vec<(u64, f64)>,
    pub final_score: f64,
}

impl TrainOutcome {
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("step,eval_return\n");
        for (s, v) in &self.curve {
            out.push_str(&format!("{s},{v}\n"));
        }
        out
    }
}

fn train_from(
    q: QTable,
    variant: VariantId,
    params: &AgentParams,
    budget: u64,
    seed: u64,
) -> Result<TrainOutcome, RlError> {
    let mut env = env_for(variant, params, derive_seed(seed, &[role::TRAIN_ENV]))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[role::TRAIN_AGENT]));
    let every = if params.curve_points == 0 {
        0
    } else {
        (budget / params.curve_points as u64).max(1)
    };
    let mut curve = Vec::new();
    let q = learn(&mut env, q, params, budget, &mut rng, |step, q| {
        if every > 0 && step % every == 0 && params.curve_episodes > 0 {
            let s = derive_seed(seed, &[role::CURVE, step]);
            curve.push((step, evaluate(q, variant, params, params.curve_episodes, params.eval_epsilon, s)?));
        }
        Ok(())
    })?;
    let final_score = evaluate(
        &q,
        variant,
        params,
        params.eval_episodes,
        params.eval_epsilon,
        eval_seed(seed, variant),
    )?;
    Ok(TrainOutcome { q, curve, final_score })
}

/// Trains a variant-expert from a zero table.
pub fn train_expert(variant: VariantId, params: &AgentParams, budget: u64, seed: u64) -> Result<TrainOutcome, RlError> {
    if budget < params.replay_initial {
        return Err(AgentError::BudgetTooSmall {
            budget,
            replay_initial: params.replay_initial,
        }
        .into());
    }
    train_from(QTable::new(NUM_STATES, NUM_ACTIONS), variant, params, budget, seed)
}

/// Continues training `q` on `variant` under the finetuning schedule
/// (`params.finetune()`). A zero budget only evaluates.
pub fn finetune(q: &QTable, variant: VariantId, params: &AgentParams, budget: u64, seed: u64) -> Result<TrainOutcome, RlError> {
    check_shape(q)?;
    let ft = params.finetune();
    if budget == 0 {
        let final_score = evaluate(q, variant, &ft, ft.eval_episodes, ft.eval_epsilon, eval_seed(seed, variant))?;
        return Ok(TrainOutcome {
            q: q.clone(),
            curve: Vec::new(),
            final_score,
        });
    }
    train_from(q.clone(), variant, &ft, budget, seed)
}

/// From-scratch ablation: the finetuning schedule and budget on a zero table.
pub fn train_scratch(variant: VariantId, params: &AgentParams, budget: u64, seed: u64) -> Result<TrainOutcome, RlError> {
    finetune(&QTable::new(NUM_STATES, NUM_ACTIONS), variant, params, budget, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub expert_budget: u64,
    pub finetune_budget: u64,
    /// Expert runs per variant (the selection grid).
    pub expert_seeds: usize,
    /// Experts kept per variant.
    pub keep: usize,
    /// Finetune and scratch runs per non-default variant.
    pub finetune_seeds: usize,
    pub base_seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            expert_budget: 200_000,
            finetune_budget: 10_000,
            expert_seeds: 3,
            keep: 3,
            finetune_seeds: 3,
            base_seed: 0,
            workers: 0,
            checkpoint_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RunKind {
    Expert,
    Finetune,
    Scratch,
}

impl RunKind {
    fn role(self) -> u64 {
        match self {
            RunKind::Expert => role::EXPERT,
            RunKind::Finetune => role::FINETUNE,
            RunKind::Scratch => role::SCRATCH,
        }
    }

    fn label(self) -> &'static str {
        match self {
            RunKind::Expert => "expert",
            RunKind::Finetune => "finetune",
            RunKind::Scratch => "scratch",
        }
    }
}

/// Seed of run `index` of `kind` on `variant`.
pub fn run_seed(base: u64, kind: RunKind, variant: VariantId, index: usize) -> u64 {
    derive_seed(base, &[kind.role(), variant_key(variant), index as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Kept expert scores, best first.
    pub experts: ScoreTable,
    /// Kept expert seed indices per variant, best first.
    pub selected: BTreeMap<VariantId, Vec<usize>>,
    pub zero_shot: BTreeMap<VariantId, ScoreTable>,
    pub matrix: TransferMatrix,
    pub finetuned: ScoreTable,
    pub scratch: ScoreTable,
    /// Every expert run's learning curve.
    pub curves: BTreeMap<(VariantId, usize), Vec<(u64, f64)>>,
    /// Runs restored from checkpoints.
    pub resumed: usize,
}

fn fingerprint(params: &AgentParams, budget: u64, seed: u64, kind: RunKind, source: Option<u64>) -> u64 {
    let text = format!("{params:?}|{budget}|{seed}|{kind:?}|{source:?}");
    text.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

struct Job<'a> {
    kind: RunKind,
    variant: VariantId,
    index: usize,
    source: Option<(&'a QTable, u64)>,
}

fn run_job(job: &Job<'_>, params: &AgentParams, cfg: &ExperimentConfig) -> Result<(TrainOutcome, bool), RlError> {
    let seed = run_seed(cfg.base_seed, job.kind, job.variant, job.index);
    let budget = match job.kind {
        RunKind::Expert => cfg.expert_budget,
        _ => cfg.finetune_budget,
    };
    let fp = fingerprint(params, budget, seed, job.kind, job.source.map(|s| s.1));
    let key = format!("{}_{}_s{}", job.kind.label(), job.variant, job.index);
    let path = cfg.checkpoint_dir.as_deref().map(|d| d.join(format!("{key}.csv")));
    if let Some(path) = path.as_deref().filter(|p| p.exists()) {
        match checkpoint::load(path) {
            Ok((meta, q)) if meta.fingerprint == fp && meta.key == key => {
                return Ok((
                    TrainOutcome {
                        q,
                        curve: meta.curve,
                        final_score: meta.final_score,
                    },
                    true,
                ));
            }
            Ok(_) => log::warn!("{}: stale checkpoint, retraining", path.display()),
            Err(e) => log::warn!("{e}; retraining"),
        }
    }
    let outcome = match (job.kind, job.source) {
        (RunKind::Expert, _) => train_expert(job.variant, params, budget, seed)?,
        (RunKind::Finetune, Some((q, _))) => finetune(q, job.variant, params, budget, seed)?,
        (RunKind::Finetune, None) => unreachable!("finetune job without source"),
        (RunKind::Scratch, _) => train_scratch(job.variant, params, budget, seed)?,
    };
    if let Some(path) = path {
        let meta = CheckpointMeta {
            key,
            fingerprint: fp,
            final_score: outcome.final_score,
            curve: outcome.curve.clone(),
        };
        checkpoint::save(&path, &meta, &outcome.q)?;
    }
    Ok((outcome, false))
}

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, RlError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RlError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Expert grid, top-k selection, all-to-all zero-shot evaluation, and
/// default-expert finetuning against the from-scratch ablation on every
/// non-default variant.
pub fn transfer_experiment(
    design: &FactorialDesign,
    params: &AgentParams,
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult, RlError> {
    params.validate()?;
    if cfg.expert_seeds == 0 || cfg.keep == 0 {
        return Err(AgentError::InvalidParams("expert_seeds and keep must be positive".into()).into());
    }
    let variants = enumerate_variants(design);
    let title = design.title.clone();
    in_pool(cfg.workers, || -> Result<ExperimentResult, RlError> {
        let mut resumed = 0;

        let jobs: Vec<Job> = variants
            .iter()
            .flat_map(|v| {
                (0..cfg.expert_seeds).map(move |i| Job {
                    kind: RunKind::Expert,
                    variant: *v,
                    index: i,
                    source: None,
                })
            })
            .collect();
        let outcomes: Vec<(TrainOutcome, bool)> = jobs
            .par_iter()
            .map(|j| run_job(j, params, cfg))
            .collect::<Result<_, _>>()?;
        let mut runs: BTreeMap<(VariantId, usize), TrainOutcome> = BTreeMap::new();
        for (job, (o, r)) in jobs.iter().zip(outcomes) {
            resumed += r as usize;
            runs.insert((job.variant, job.index), o);
        }
        let curves = runs.iter().map(|(k, o)| (*k, o.curve.clone())).collect();

        let mut experts = ScoreTable::new(&title, ScoreKind::Expert);
        let mut selected = BTreeMap::new();
        for v in &variants {
            let grid: Vec<(usize, f64)> = (0..cfg.expert_seeds).map(|i| (i, runs[&(*v, i)].final_score)).collect();
            let top = select_top_k(&grid, cfg.keep);
            experts.insert(design, *v, top.scores())?;
            selected.insert(*v, top.selected.iter().map(|(i, _)| *i).collect::<Vec<_>>());
        }

        let mut evals: Vec<(VariantId, usize, VariantId)> = Vec::new();
        for s in &variants {
            for rank in 0..selected[s].len() {
                evals.extend(variants.iter().map(|t| (*s, rank, *t)));
            }
        }
        let scores: Vec<f64> = evals
            .par_iter()
            .map(|(s, rank, t)| {
                let index = selected[s][*rank];
                let seed = run_seed(cfg.base_seed, RunKind::Expert, *s, index);
                evaluate(&runs[&(*s, index)].q, *t, params, params.eval_episodes, params.eval_epsilon, eval_seed(seed, *t))
            })
            .collect::<Result<_, _>>()?;
        let mut cells: BTreeMap<(VariantId, VariantId), Vec<f64>> = BTreeMap::new();
        for ((s, _, t), x) in evals.iter().zip(scores) {
            cells.entry((*s, *t)).or_default().push(x);
        }
        let mut zero_shot = BTreeMap::new();
        for s in &variants {
            let mut table = ScoreTable::new(&title, ScoreKind::ZeroShotFrom(*s));
            for t in &variants {
                table.insert(design, *t, cells.remove(&(*s, *t)).unwrap_or_default())?;
            }
            zero_shot.insert(*s, table);
        }
        let matrix = build_transfer_matrix(&experts, &zero_shot)?;

        let default = VariantId::DEFAULT;
        let sources: Vec<(&QTable, u64)> = selected
            .get(&default)
            .map(|picks| {
                picks
                    .iter()
                    .map(|i| (&runs[&(default, *i)].q, run_seed(cfg.base_seed, RunKind::Expert, default, *i)))
                    .collect()
            })
            .unwrap_or_default();
        let mut jobs: Vec<Job> = Vec::new();
        if !sources.is_empty() {
            for v in variants.iter().filter(|v| !v.is_default()) {
                for i in 0..cfg.finetune_seeds {
                    jobs.push(Job {
                        kind: RunKind::Finetune,
                        variant: *v,
                        index: i,
                        source: Some(sources[i % sources.len()]),
                    });
                    jobs.push(Job {
                        kind: RunKind::Scratch,
                        variant: *v,
                        index: i,
                        source: None,
                    });
                }
            }
        }
        let outcomes: Vec<(TrainOutcome, bool)> = jobs
            .par_iter()
            .map(|j| run_job(j, params, cfg))
            .collect::<Result<_, _>>()?;
        let mut finetuned = ScoreTable::new(&title, ScoreKind::FinetunedFrom(default));
        let mut scratch = ScoreTable::new(&title, ScoreKind::ScratchReducedBudget);
        let mut ft_scores: BTreeMap<VariantId, Vec<f64>> = BTreeMap::new();
        let mut sc_scores: BTreeMap<VariantId, Vec<f64>> = BTreeMap::new();
        for (job, (o, r)) in jobs.iter().zip(outcomes) {
            resumed += r as usize;
            let bucket = match job.kind {
                RunKind::Finetune => &mut ft_scores,
                _ => &mut sc_scores,
            };
            bucket.entry(job.variant).or_default().push(o.final_score);
        }
        for (v, s) in ft_scores {
            finetuned.insert(design, v, s)?;
        }
        for (v, s) in sc_scores {
            scratch.insert(design, v, s)?;
        }

        Ok(ExperimentResult {
            experts,
            selected,
            zero_shot,
            matrix,
            finetuned,
            scratch,
            curves,
            resumed,
        })
    })?
}

/// Paired finetune-vs-scratch scores on one variant, one pair per seed index.
pub fn paired_finetune_scratch(
    source: &QTable,
    variant: VariantId,
    params: &AgentParams,
    budget: u64,
    base_seed: u64,
    seeds: usize,
) -> Result<Vec<(f64, f64)>, RlError> {
    (0..seeds)
        .into_par_iter()
        .map(|i| {
            let ft = finetune(source, variant, params, budget, run_seed(base_seed, RunKind::Finetune, variant, i))?;
            let sc = train_scratch(variant, params, budget, run_seed(base_seed, RunKind::Scratch, variant, i))?;
            Ok((ft.final_score, sc.final_score))
        })
        .collect()
}

pub fn checkpoint_path(dir: &Path, kind: RunKind, variant: VariantId, index: usize) -> PathBuf {
    dir.join(format!("{}_{}_s{}.csv", kind.label(), variant, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> AgentParams {
        AgentParams {
            replay_initial: 200,
            epsilon: crate::agent::EpsilonSchedule {
                anneal_steps: 1_000,
                ..Default::default()
            },
            eval_episodes: 3,
            curve_points: 2,
            curve_episodes: 1,
            episode_limit: 100,
            ..AgentParams::default()
        }
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = derive_seed(7, &[1, 2, 3]);
        assert_eq!(a, derive_seed(7, &[1, 2, 3]));
        assert_ne!(a, derive_seed(7, &[1, 3, 2]));
        assert_ne!(a, derive_seed(8, &[1, 2, 3]));
    }

    #[test]
    fn budget_below_warmup_rejected() {
        let p = small();
        assert!(matches!(
            train_expert(VariantId::DEFAULT, &p, 100, 0),
            Err(RlError::Agent(AgentError::BudgetTooSmall { .. }))
        ));
    }

    #[test]
    fn same_seed_same_outcome() {
        let p = small();
        let a = train_expert(VariantId::DEFAULT, &p, 2_000, 5).unwrap();
        let b = train_expert(VariantId::DEFAULT, &p, 2_000, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.curve.len(), 2);
    }

    #[test]
    fn final_score_is_self_evaluation() {
        let p = small();
        let v: VariantId = "1_02".parse().unwrap();
        let out = train_expert(v, &p, 1_500, 9).unwrap();
        let again = evaluate(&out.q, v, &p, p.eval_episodes, p.eval_epsilon, eval_seed(9, v)).unwrap();
        assert_eq!(again, out.final_score);
    }

    #[test]
    fn zero_budget_finetune_is_identity() {
        let p = small();
        let out = train_expert(VariantId::DEFAULT, &p, 1_000, 1).unwrap();
        let ft = finetune(&out.q, "0_05".parse().unwrap(), &p, 0, 3).unwrap();
        assert_eq!(ft.q, out.q);
    }

    #[test]
    fn checkpoint_resume_reuses_runs() {
        let dir = std::env::temp_dir().join(format!("curricula-harness-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let p = small();
        let cfg = ExperimentConfig {
            expert_budget: 20_000,
            finetune_budget: 1_000,
            expert_seeds: 1,
            keep: 1,
            finetune_seeds: 1,
            checkpoint_dir: Some(dir.clone()),
            workers: 2,
            ..Default::default()
        };
        let design = MiniEnvConfig::design();
        let first = transfer_experiment(&design, &p, &cfg).unwrap();
        assert_eq!(first.resumed, 0);
        assert!(checkpoint_path(&dir, RunKind::Expert, VariantId::DEFAULT, 0).exists());
        let second = transfer_experiment(&design, &p, &cfg).unwrap();
        assert_eq!(second.resumed, 16 + 2 * 15);
        assert_eq!(first.matrix, second.matrix);
        assert_eq!(first.finetuned, second.finetuned);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
