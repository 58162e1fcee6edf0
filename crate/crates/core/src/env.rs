//! CorridorWorld: a tiny procedurally generated gridworld.
//!
//! The agent starts in the bottom-left corner and has to reach the coin in the
//! bottom-right corner. Vertical walls with a single gap and a few hazard
//! cells sit in between. Collecting the coin pays 10, touching a hazard ends
//! the episode with nothing, and episodes time out after
//! [`MAX_EPISODE_STEPS`] steps.
//!
//! Coordinates are `(x, y)` with `y = 0` the top row.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const WIDTH: usize = 12;
pub const HEIGHT: usize = 6;
pub const CELLS: usize = WIDTH * HEIGHT;
pub const CHANNELS: usize = 4;
pub const OBS_DIM: usize = CELLS * CHANNELS;
pub const N_ACTIONS: usize = 4;
pub const MAX_EPISODE_STEPS: u32 = 200;
pub const COIN_REWARD: f64 = 10.0;
pub const MAX_GENERATION_ATTEMPTS: u32 = 1000;

const START: Cell = Cell { x: 0, y: HEIGHT - 1 };
const COIN: Cell = Cell { x: WIDTH - 1, y: HEIGHT - 1 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tile {
    Empty,
    Wall,
    Hazard,
    Coin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    fn index(self) -> usize {
        self.y * WIDTH + self.x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Left = 0,
    Right = 1,
    Up = 2,
    Down = 3,
}

impl Action {
    pub const ALL: [Action; N_ACTIONS] = [Action::Left, Action::Right, Action::Up, Action::Down];

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Up => (0, -1),
            Action::Down => (0, 1),
        }
    }
}

/// A generated level. Fixed 12x6 grid, one coin, start and coin in the
/// bottom corners.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Level {
    pub seed: u64,
    tiles: [Tile; CELLS],
    pub start: Cell,
    pub coin: Cell,
}

impl Level {
    pub const WIDTH: usize = WIDTH;
    pub const HEIGHT: usize = HEIGHT;

    pub fn tile(&self, cell: Cell) -> Tile {
        self.tiles[cell.index()]
    }

    pub fn tiles(&self) -> &[Tile; CELLS] {
        &self.tiles
    }

    /// Builds a level from raw tiles, checking the structural invariants
    /// (single coin, empty start, solvability).
    pub fn from_tiles(seed: u64, tiles: [Tile; CELLS], start: Cell) -> Result<Self> {
        let coins: Vec<usize> = (0..CELLS).filter(|&i| tiles[i] == Tile::Coin).collect();
        if coins.len() != 1 {
            return Err(Error::Format(alloc::format!("expected one coin, found {}", coins.len())));
        }
        let coin = Cell::new(coins[0] % WIDTH, coins[0] / WIDTH);
        if tiles[start.index()] != Tile::Empty || start == coin {
            return Err(Error::Format("start must be an empty cell distinct from the coin".into()));
        }
        let level = Self { seed, tiles, start, coin };
        if shortest_path_len(&level).is_none() {
            return Err(Error::Format("coin unreachable from start".into()));
        }
        Ok(level)
    }

    /// Text form: a `seed=<u64>` line followed by one line per row using
    /// `.` empty, `#` wall, `!` hazard, `C` coin, `S` start.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(16 + CELLS + HEIGHT);
        let _ = writeln!(out, "seed={}", self.seed);
        for y in 0..HEIGHT {
            for x in 0..WIDTH {
                let cell = Cell::new(x, y);
                let ch = if cell == self.start {
                    'S'
                } else {
                    match self.tile(cell) {
                        Tile::Empty => '.',
                        Tile::Wall => '#',
                        Tile::Hazard => '!',
                        Tile::Coin => 'C',
                    }
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Format("missing seed line".into()))?;
        let seed = header
            .strip_prefix("seed=")
            .and_then(|s| s.trim().parse::<u64>().ok())
            .ok_or_else(|| Error::Format(alloc::format!("bad seed line: {header:?}")))?;
        let mut tiles = [Tile::Empty; CELLS];
        let mut start = None;
        let rows: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
        if rows.len() != HEIGHT {
            return Err(Error::Format(alloc::format!("expected {HEIGHT} rows, got {}", rows.len())));
        }
        for (y, row) in rows.iter().enumerate() {
            let chars: Vec<char> = row.chars().collect();
            if chars.len() != WIDTH {
                return Err(Error::Format(alloc::format!("row {y} has {} cells", chars.len())));
            }
            for (x, ch) in chars.into_iter().enumerate() {
                let cell = Cell::new(x, y);
                tiles[cell.index()] = match ch {
                    '.' => Tile::Empty,
                    '#' => Tile::Wall,
                    '!' => Tile::Hazard,
                    'C' => Tile::Coin,
                    'S' => {
                        start = Some(cell);
                        Tile::Empty
                    }
                    other => return Err(Error::Format(alloc::format!("unknown tile {other:?}"))),
                };
            }
        }
        let start = start.ok_or_else(|| Error::Format("no start cell".into()))?;
        Self::from_tiles(seed, tiles, start)
    }
}

/// Length of the shortest start-to-coin path through empty cells, if any.
pub fn shortest_path_len(level: &Level) -> Option<usize> {
    let mut dist = [usize::MAX; CELLS];
    let mut queue = VecDeque::new();
    dist[level.start.index()] = 0;
    queue.push_back(level.start);
    while let Some(cell) = queue.pop_front() {
        if cell == level.coin {
            return Some(dist[cell.index()]);
        }
        for action in Action::ALL {
            let Some(next) = neighbour(cell, action) else { continue };
            let passable = matches!(level.tile(next), Tile::Empty | Tile::Coin);
            if passable && dist[next.index()] == usize::MAX {
                dist[next.index()] = dist[cell.index()] + 1;
                queue.push_back(next);
            }
        }
    }
    None
}

fn neighbour(cell: Cell, action: Action) -> Option<Cell> {
    let (dx, dy) = action.delta();
    let x = cell.x.checked_add_signed(dx)?;
    let y = cell.y.checked_add_signed(dy)?;
    (x < WIDTH && y < HEIGHT).then_some(Cell::new(x, y))
}

/// Generates the level for `seed`.
///
/// One SplitMix64 stream is seeded with `seed`; a layout that turns out to be
/// unsolvable is discarded and the next attempt keeps drawing from the same
/// stream.
pub fn generate_level(seed: u64) -> Result<Level> {
    let mut rng = SplitMix64::new(seed);
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let level = draw_layout(seed, &mut rng);
        if shortest_path_len(&level).is_some() {
            return Ok(level);
        }
    }
    Err(Error::UnsatisfiableSeed { seed, attempts: MAX_GENERATION_ATTEMPTS })
}

fn draw_layout(seed: u64, rng: &mut SplitMix64) -> Level {
    let mut tiles = [Tile::Empty; CELLS];

    // Walls occupy distinct columns in [2, WIDTH - 3].
    let n_walls = 3 + rng.below(3) as usize;
    let wall_columns = (WIDTH - 4) as u64;
    let mut used = [false; WIDTH];
    let mut placed = 0;
    while placed < n_walls {
        let x = 2 + rng.below(wall_columns) as usize;
        if used[x] {
            continue;
        }
        used[x] = true;
        placed += 1;
        let gap = rng.below(HEIGHT as u64) as usize;
        for y in (0..HEIGHT).filter(|&y| y != gap) {
            tiles[Cell::new(x, y).index()] = Tile::Wall;
        }
    }

    // Hazards go on empty cells outside the start and coin columns.
    let n_hazards = 2 + rng.below(3) as usize;
    let mut placed = 0;
    while placed < n_hazards {
        let x = 1 + rng.below((WIDTH - 2) as u64) as usize;
        let y = rng.below(HEIGHT as u64) as usize;
        let idx = Cell::new(x, y).index();
        if tiles[idx] == Tile::Empty {
            tiles[idx] = Tile::Hazard;
            placed += 1;
        }
    }

    tiles[COIN.index()] = Tile::Coin;
    Level { seed, tiles, start: START, coin: COIN }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Running,
    CoinCollected,
    Dead,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EnvState {
    pub level: Level,
    pub agent: Cell,
    pub steps_taken: u32,
    pub outcome: Outcome,
}

impl EnvState {
    pub fn terminal(&self) -> bool {
        self.outcome != Outcome::Running
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: EnvState,
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

pub fn reset(level: &Level) -> (EnvState, Vec<f64>) {
    let state = EnvState {
        level: level.clone(),
        agent: level.start,
        steps_taken: 0,
        outcome: Outcome::Running,
    };
    let obs = observe(&state);
    (state, obs)
}

/// Applies `action` and returns the successor state. Pure: `state` is left
/// untouched.
pub fn step(state: &EnvState, action: Action) -> Result<StepResult> {
    let mut next = state.clone();
    let (reward, done) = step_in_place(&mut next, action)?;
    let observation = observe(&next);
    Ok(StepResult { state: next, observation, reward, done })
}

/// In-place variant of [`step`] used by the rollout loops. Returns
/// `(reward, done)`.
pub fn step_in_place(state: &mut EnvState, action: Action) -> Result<(f64, bool)> {
    if state.terminal() {
        return Err(Error::SteppedTerminalState);
    }
    if let Some(target) = neighbour(state.agent, action) {
        if state.level.tile(target) != Tile::Wall {
            state.agent = target;
        }
    }
    state.steps_taken += 1;
    let mut reward = 0.0;
    match state.level.tile(state.agent) {
        Tile::Hazard => state.outcome = Outcome::Dead,
        Tile::Coin => {
            state.outcome = Outcome::CoinCollected;
            reward = COIN_REWARD;
        }
        Tile::Empty | Tile::Wall => {}
    }
    if !state.terminal() && state.steps_taken >= MAX_EPISODE_STEPS {
        state.outcome = Outcome::Timeout;
    }
    Ok((reward, state.terminal()))
}

/// Channel-major one-hot encoding: index `channel * CELLS + y * WIDTH + x`,
/// channels ordered wall, hazard, coin, agent.
pub fn observe(state: &EnvState) -> Vec<f64> {
    let mut obs = vec![0.0; OBS_DIM];
    observe_into(state, &mut obs);
    obs
}

pub fn observe_into(state: &EnvState, obs: &mut [f64]) {
    assert_eq!(obs.len(), OBS_DIM);
    obs.fill(0.0);
    for (i, tile) in state.level.tiles.iter().enumerate() {
        match tile {
            Tile::Wall => obs[i] = 1.0,
            Tile::Hazard => obs[CELLS + i] = 1.0,
            Tile::Coin if state.outcome != Outcome::CoinCollected => obs[2 * CELLS + i] = 1.0,
            _ => {}
        }
    }
    obs[3 * CELLS + state.agent.index()] = 1.0;
}
