use std::collections::VecDeque;

use peoc_core::env::*;
use peoc_core::rng::SplitMix64;
use proptest::prelude::*;

/// Breadth-first search over passable tiles, written against the public tile map only.
fn oracle_path_len(level: &Level) -> Option<usize> {
    let passable = |x: usize, y: usize| matches!(level.tile(Cell::new(x, y)), Tile::Empty | Tile::Coin);
    let mut dist = vec![vec![usize::MAX; WIDTH]; HEIGHT];
    let mut queue = VecDeque::new();
    dist[level.start.y][level.start.x] = 0;
    queue.push_back((level.start.x, level.start.y));
    while let Some((x, y)) = queue.pop_front() {
        if (x, y) == (level.coin.x, level.coin.y) {
            return Some(dist[y][x]);
        }
        let d = dist[y][x];
        let mut visit = |nx: usize, ny: usize| {
            if passable(nx, ny) && dist[ny][nx] == usize::MAX {
                dist[ny][nx] = d + 1;
                queue.push_back((nx, ny));
            }
        };
        if x > 0 {
            visit(x - 1, y);
        }
        if x + 1 < WIDTH {
            visit(x + 1, y);
        }
        if y > 0 {
            visit(x, y - 1);
        }
        if y + 1 < HEIGHT {
            visit(x, y + 1);
        }
    }
    None
}

/// Follows the oracle BFS path with actual environment steps.
fn walk_shortest_path(level: &Level) -> f64 {
    let target = level.coin;
    let (mut state, _) = reset(level);
    let mut total = 0.0;
    while !state.terminal() {
        let here = oracle_path_len_from(level, state.agent, target).unwrap();
        let action = Action::ALL
            .into_iter()
            .find(|&a| {
                let mut probe = state.clone();
                step_in_place(&mut probe, a).unwrap();
                probe.outcome != Outcome::Dead && oracle_path_len_from(level, probe.agent, target).is_some_and(|d| d + 1 == here)
            })
            .expect("some move shortens the path");
        total += step_in_place(&mut state, action).unwrap().0;
    }
    assert_eq!(state.outcome, Outcome::CoinCollected);
    total
}

fn oracle_path_len_from(level: &Level, from: Cell, to: Cell) -> Option<usize> {
    let mut moved = level.clone();
    moved.start = from;
    moved.coin = to;
    oracle_path_len(&moved)
}

#[test]
fn thousand_levels_are_solvable() {
    for seed in 0..1000u64 {
        let level = generate_level(seed).unwrap();
        let expected = oracle_path_len(&level).unwrap_or_else(|| panic!("seed {seed} unsolvable"));
        assert_eq!(shortest_path_len(&level), Some(expected), "seed {seed}");
        assert_eq!(level.tile(level.start), Tile::Empty);
        assert_eq!(level.tile(level.coin), Tile::Coin);
        assert_eq!(level.tiles().iter().filter(|&&t| t == Tile::Coin).count(), 1);
        assert_eq!(Level::from_text(&level.to_text()).unwrap(), level);
        assert_eq!(generate_level(seed).unwrap(), level);
    }
}

#[test]
fn shortest_path_collects_the_coin() {
    for seed in [0u64, 1, 2, 3, 77, 1234, u64::MAX] {
        let level = generate_level(seed).unwrap();
        assert_eq!(walk_shortest_path(&level), COIN_REWARD);
    }
}

#[test]
fn random_episodes_return_zero_or_ten() {
    let mut rng = SplitMix64::new(9);
    let mut seen = [false; 2];
    for episode in 0..3000u64 {
        let level = generate_level(episode % 50).unwrap();
        let (mut state, _) = reset(&level);
        let mut total = 0.0;
        loop {
            let a = Action::from_index(rng.below(4) as usize).unwrap();
            let (r, done) = step_in_place(&mut state, a).unwrap();
            assert!(r == 0.0 || r == COIN_REWARD);
            total += r;
            if done {
                break;
            }
        }
        assert!(state.steps_taken <= MAX_EPISODE_STEPS);
        assert!(total == 0.0 || total == COIN_REWARD, "return {total}");
        seen[(total > 0.0) as usize] = true;
        assert!(step_in_place(&mut state, Action::Left).is_err());
    }
    assert_eq!(seen, [true, true]);
}

#[test]
fn observation_encodes_tiles_and_agent() {
    let level = generate_level(5).unwrap();
    let (state, obs) = reset(&level);
    assert_eq!(obs.len(), OBS_DIM);
    for y in 0..HEIGHT {
        for x in 0..WIDTH {
            let i = y * WIDTH + x;
            let t = level.tile(Cell::new(x, y));
            assert_eq!(obs[i], (t == Tile::Wall) as u8 as f64);
            assert_eq!(obs[CELLS + i], (t == Tile::Hazard) as u8 as f64);
            assert_eq!(obs[2 * CELLS + i], (t == Tile::Coin) as u8 as f64);
            assert_eq!(obs[3 * CELLS + i], (Cell::new(x, y) == state.agent) as u8 as f64);
        }
    }
}

fn trajectory(seed: u64, actions: &[usize]) -> Vec<(Cell, Vec<f64>, f64, bool)> {
    let level = generate_level(seed).unwrap();
    let (mut state, _) = reset(&level);
    let mut out = Vec::new();
    for &a in actions {
        if state.terminal() {
            break;
        }
        let r = step(&state, Action::from_index(a).unwrap()).unwrap();
        out.push((r.state.agent, r.observation.clone(), r.reward, r.done));
        state = r.state;
    }
    out
}

proptest! {
    #[test]
    fn episodes_are_deterministic(seed in any::<u64>(), actions in prop::collection::vec(0usize..4, 0..250)) {
        prop_assert_eq!(trajectory(seed, &actions), trajectory(seed, &actions));
    }

    #[test]
    fn step_is_pure(seed in 0u64..500, a in 0usize..4) {
        let (state, _) = reset(&generate_level(seed).unwrap());
        let before = state.clone();
        let _ = step(&state, Action::from_index(a).unwrap()).unwrap();
        prop_assert_eq!(state, before);
    }

    #[test]
    fn generated_levels_are_solvable(seed in any::<u64>()) {
        let level = generate_level(seed).unwrap();
        prop_assert!(oracle_path_len(&level).is_some());
    }
}
