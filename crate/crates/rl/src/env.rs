//! MiniFreeway: a small road-crossing grid with the same three design
//! factors as Freeway (knock-back difficulty, traffic density, speed regime).
//!
//! Geometry: 12 rows, row 0 is the start kerb and row 11 the far kerb, rows
//! 1..=10 are lanes. Every lane is 20 cells wide and wraps. Lanes 1..=5 move
//! right, lanes 6..=10 move left. The chicken always stands in column 7.
//!
//! Each step: the executed action moves the chicken one row (clamped), then
//! every car advances by its lane speed. A car ending in the chicken's cell
//! is a collision: one lane back with difficulty Off, back to row 0 with
//! difficulty On. Reaching row 11 pays 1 and returns the chicken to row 0.
//!
//! Tabular observation: `row * 64 + 16 * d(row - 1) + 4 * d(row) + d(row + 1)`
//! where `d(lane)` is the distance, in cells, from the chicken's column to
//! the nearest car upstream of it in that lane, capped at 3 (kerbs and
//! missing lanes read 3). 12 * 4^3 = 768 states.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use curricula_core::design::{decode_variant, load_design, DesignError, FactorialDesign, VariantId};

pub const ROWS: usize = 12;
pub const LANES: usize = 10;
pub const WIDTH: usize = 20;
pub const CHICKEN_COL: usize = 7;
pub const FAR_KERB: usize = ROWS - 1;
pub const DISTANCE_CAP: usize = 3;
pub const NUM_STATES: usize = ROWS * 64;
pub const NUM_ACTIONS: usize = 3;
pub const DEFAULT_EPISODE_LIMIT: u32 = 500;
pub const DEFAULT_STICKY_P: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("step after terminal (clock = {0})")]
    Terminal(u32),
    #[error("invalid action index {0}")]
    InvalidAction(usize),
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Design(#[from] DesignError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Noop = 0,
    Up = 1,
    Down = 2,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Noop, Action::Up, Action::Down];

    pub fn from_index(i: usize) -> Result<Self, EnvError> {
        Self::ALL.get(i).copied().ok_or(EnvError::InvalidAction(i))
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KnockBack {
    OneLane,
    ToKerb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Traffic {
    Default,
    Thick,
    Thicker,
    Thickest,
}

impl Traffic {
    /// Cars per lane.
    pub fn cars_per_lane(self) -> usize {
        match self {
            Traffic::Default => 1,
            Traffic::Thick => 2,
            Traffic::Thicker => 3,
            Traffic::Thickest => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Speeds {
    Constant,
    Randomised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiniEnvConfig {
    pub difficulty: KnockBack,
    pub traffic: Traffic,
    pub speeds: Speeds,
    pub episode_limit: u32,
    pub sticky_p: f64,
    pub seed: u64,
    /// Replaces the traffic density (0 = empty road, `WIDTH` = solid).
    pub cars_override: Option<usize>,
}

impl MiniEnvConfig {
    pub fn new(difficulty: KnockBack, traffic: Traffic, speeds: Speeds, seed: u64) -> Self {
        Self {
            difficulty,
            traffic,
            speeds,
            episode_limit: DEFAULT_EPISODE_LIMIT,
            sticky_p: DEFAULT_STICKY_P,
            seed,
            cars_override: None,
        }
    }

    pub fn design() -> FactorialDesign {
        load_design("MiniFreeway").expect("bundled MiniFreeway design")
    }

    pub fn from_variant(id: VariantId, seed: u64) -> Result<Self, EnvError> {
        let design = Self::design();
        let levels = decode_variant(&design, id)?;
        let lv = levels.as_slice();
        let difficulty = [KnockBack::OneLane, KnockBack::ToKerb][lv[0]];
        let traffic = [Traffic::Default, Traffic::Thick, Traffic::Thicker, Traffic::Thickest][lv[1]];
        let speeds = [Speeds::Constant, Speeds::Randomised][lv[2]];
        Ok(Self::new(difficulty, traffic, speeds, seed))
    }

    pub fn variant(&self) -> VariantId {
        let design = Self::design();
        let levels = vec![
            self.difficulty as usize,
            self.traffic as usize,
            self.speeds as usize,
        ];
        curricula_core::design::encode_variant(&design, &curricula_core::design::FactorLevels(levels))
            .expect("every config is a design cell")
    }

    pub fn cars_per_lane(&self) -> usize {
        self.cars_override.unwrap_or(self.traffic.cars_per_lane()).min(WIDTH)
    }

    fn validate(&self) -> Result<(), EnvError> {
        if self.episode_limit == 0 {
            return Err(EnvError::InvalidConfig("episode_limit must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.sticky_p) {
            return Err(EnvError::InvalidConfig(format!("sticky_p {} outside [0, 1]", self.sticky_p)));
        }
        Ok(())
    }
}

/// One step of experience in abstract-state form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    /// Episode over; no bootstrap past this step.
    pub terminal: bool,
    /// Episode cut without terminating the underlying process.
    pub truncated: bool,
}

/// Finite-state episodic environment driven by action indices.
pub trait Environment {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// Starts a new episode and returns its first state.
    fn reset(&mut self) -> usize;
    fn step(&mut self, action: usize) -> Result<Transition, EnvError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EnvState {
    pub chicken_row: usize,
    /// Car columns per lane, lane `i` is row `i + 1`.
    pub car_positions: Vec<Vec<usize>>,
    pub car_speeds: Vec<usize>,
    pub clock: u32,
    pub previous_action: Action,
}

#[derive(Debug, Clone)]
pub struct MiniFreeway {
    config: MiniEnvConfig,
    state: EnvState,
    rng: ChaCha8Rng,
}

fn lane_direction(lane: usize) -> isize {
    if lane < LANES / 2 {
        1
    } else {
        -1
    }
}

impl MiniFreeway {
    pub fn new(config: MiniEnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut env = Self {
            state: EnvState {
                chicken_row: 0,
                car_positions: vec![Vec::new(); LANES],
                car_speeds: vec![1; LANES],
                clock: 0,
                previous_action: Action::Noop,
            },
            config,
            rng,
        };
        env.reset();
        Ok(env)
    }

    pub fn config(&self) -> &MiniEnvConfig {
        &self.config
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn previous_action(&self) -> Action {
        self.state.previous_action
    }

    pub fn is_terminal(&self) -> bool {
        self.state.clock >= self.config.episode_limit
    }

    fn lane_distance(&self, row: isize) -> usize {
        if row < 1 || row > LANES as isize {
            return DISTANCE_CAP;
        }
        let lane = row as usize - 1;
        let dir = lane_direction(lane);
        self.state.car_positions[lane]
            .iter()
            .map(|&c| (((CHICKEN_COL as isize - c as isize) * dir).rem_euclid(WIDTH as isize)) as usize)
            .min()
            .unwrap_or(DISTANCE_CAP)
            .min(DISTANCE_CAP)
    }

    pub fn observation(&self) -> usize {
        let r = self.state.chicken_row as isize;
        self.state.chicken_row * 64 + 16 * self.lane_distance(r - 1) + 4 * self.lane_distance(r) + self.lane_distance(r + 1)
    }

    fn occupied(&self, row: usize) -> bool {
        (1..=LANES).contains(&row) && self.state.car_positions[row - 1].contains(&CHICKEN_COL)
    }

    /// FNV-1a over the full state.
    pub fn state_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        feed(self.state.chicken_row as u64);
        for (cars, speed) in self.state.car_positions.iter().zip(&self.state.car_speeds) {
            feed(*speed as u64);
            for c in cars {
                feed(*c as u64);
            }
            feed(u64::MAX);
        }
        feed(self.state.clock as u64);
        feed(self.state.previous_action as u64);
        h
    }

    /// Draws a fresh car layout and speeds; chicken back at the start kerb.
    pub fn reset_episode(&mut self) -> usize {
        let n = self.config.cars_per_lane();
        for lane in 0..LANES {
            let mut cols = sample(&mut self.rng, WIDTH, n).into_vec();
            cols.sort_unstable();
            self.state.car_positions[lane] = cols;
            self.state.car_speeds[lane] = match self.config.speeds {
                Speeds::Constant => 1,
                Speeds::Randomised => self.rng.gen_range(1..=2),
            };
        }
        self.state.chicken_row = 0;
        self.state.clock = 0;
        self.state.previous_action = Action::Noop;
        self.observation()
    }

    pub fn step_action(&mut self, requested: Action) -> Result<Transition, EnvError> {
        if self.is_terminal() {
            return Err(EnvError::Terminal(self.state.clock));
        }
        let state = self.observation();
        let sticky: f64 = self.rng.gen();
        let executed = if sticky < self.config.sticky_p {
            self.state.previous_action
        } else {
            requested
        };
        let row = &mut self.state.chicken_row;
        match executed {
            Action::Up => *row = (*row + 1).min(FAR_KERB),
            Action::Down => *row = row.saturating_sub(1),
            Action::Noop => {}
        }
        for lane in 0..LANES {
            let shift = (self.state.car_speeds[lane] as isize * lane_direction(lane)).rem_euclid(WIDTH as isize) as usize;
            for c in &mut self.state.car_positions[lane] {
                *c = (*c + shift) % WIDTH;
            }
        }
        if self.occupied(self.state.chicken_row) {
            self.state.chicken_row = match self.config.difficulty {
                KnockBack::OneLane => self.state.chicken_row - 1,
                KnockBack::ToKerb => 0,
            };
        }
        let mut reward = 0.0;
        if self.state.chicken_row == FAR_KERB {
            reward = 1.0;
            self.state.chicken_row = 0;
        }
        self.state.clock += 1;
        self.state.previous_action = executed;
        Ok(Transition {
            state,
            action: requested.index(),
            reward,
            next_state: self.observation(),
            terminal: self.is_terminal(),
            truncated: false,
        })
    }
}

impl Environment for MiniFreeway {
    fn num_states(&self) -> usize {
        NUM_STATES
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn reset(&mut self) -> usize {
        self.reset_episode()
    }

    fn step(&mut self, action: usize) -> Result<Transition, EnvError> {
        self.step_action(Action::from_index(action)?)
    }
}

/// Total reward of one fresh episode under `policy`.
pub fn episode_return(env: &mut MiniFreeway, mut policy: impl FnMut(usize) -> Action) -> f64 {
    let mut obs = env.reset_episode();
    let mut total = 0.0;
    loop {
        let t = env.step_action(policy(obs)).expect("episode not terminal");
        total += t.reward;
        obs = t.next_state;
        if t.terminal {
            return total;
        }
    }
}

/// One fresh episode as CSV `t,state_hash,action,reward`.
pub fn trajectory_csv(env: &mut MiniFreeway, mut policy: impl FnMut(usize) -> Action) -> String {
    let mut out = String::from("t,state_hash,action,reward\n");
    let mut obs = env.reset_episode();
    loop {
        let t = env.state.clock;
        let hash = env.state_hash();
        let action = policy(obs);
        let tr = env.step_action(action).expect("episode not terminal");
        out.push_str(&format!("{t},{hash:016x},{},{}\n", action.index(), tr.reward));
        obs = tr.next_state;
        if tr.terminal {
            return out;
        }
    }
}
