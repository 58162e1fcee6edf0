//! PPO-clip with GAE and an entropy bonus.
//!
//! A training run alternates between collecting a fixed-length rollout on the
//! training levels and several epochs of minibatch Adam steps on the clipped
//! surrogate loss. Everything is single-threaded and seeded.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::env::{self, Action, EnvState, Level, OBS_DIM};
use crate::error::{Error, Result};
use crate::nn::{
    entropy_of, log_softmax_at, softmax_into, AdamConfig, AdamState, GradientBundle, PolicyArch, PolicyCache,
    PolicyParams, PolicyScratch,
};
use crate::rng::{mix64, SplitMix64};

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub rollout_len: usize,
    pub minibatch: usize,
    pub epochs: usize,
    pub updates: usize,
    pub adam: AdamConfig,
    pub arch: PolicyArch,
    pub level_seeds: Vec<u64>,
    pub init_seed: u64,
    pub rollout_seed: u64,
    /// Added to the advantage standard deviation before normalizing.
    pub adv_eps: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            entropy_coef: 0.01,
            value_coef: 0.5,
            rollout_len: 1024,
            minibatch: 256,
            epochs: 10,
            updates: 150,
            adam: AdamConfig { lr: 1e-3, ..AdamConfig::default() },
            arch: PolicyArch::default(),
            level_seeds: vec![0, 1, 2, 3],
            init_seed: 0,
            rollout_seed: 1,
            adv_eps: 1.0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad(format!("gae_lambda {} outside [0, 1]", self.gae_lambda));
        }
        if !(self.clip_eps > 0.0) {
            return bad(format!("clip_eps must be positive, got {}", self.clip_eps));
        }
        if !(self.adv_eps > 0.0 && self.adv_eps.is_finite()) {
            return bad(format!("adv_eps must be positive, got {}", self.adv_eps));
        }
        if !(self.entropy_coef >= 0.0) || !(self.value_coef >= 0.0) {
            return bad("loss coefficients must be nonnegative".into());
        }
        if !(self.adam.lr > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.adam.lr));
        }
        if self.updates == 0 {
            return bad("updates must be at least 1".into());
        }
        if self.rollout_len == 0 || self.minibatch == 0 || self.epochs == 0 {
            return bad("rollout_len, minibatch and epochs must be positive".into());
        }
        if self.level_seeds.is_empty() {
            return bad("at least one training level is required".into());
        }
        if self.arch.obs_dim != OBS_DIM {
            return bad(format!("policy input must be {OBS_DIM}, got {}", self.arch.obs_dim));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Action,
    pub log_prob_old: f64,
    pub reward: f64,
    pub value_est: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    /// Value estimate of the state following the last transition; only used
    /// when that transition did not end its episode.
    pub bootstrap_value: f64,
    pub advantages: Vec<f64>,
    pub return_targets: Vec<f64>,
    /// Returns of the episodes that finished inside the rollout.
    pub episode_returns: Vec<f64>,
    /// Mean policy entropy over the visited states.
    pub mean_entropy: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn mean_episode_return(&self) -> f64 {
        if self.episode_returns.is_empty() {
            0.0
        } else {
            self.episode_returns.iter().sum::<f64>() / self.episode_returns.len() as f64
        }
    }
}

/// Runs `params` for `len` steps, cycling through `levels` round-robin.
pub fn collect_rollout(params: &PolicyParams, levels: &[Level], len: usize, rng_seed: u64) -> Result<Trajectory> {
    if levels.is_empty() {
        return Err(Error::EmptyInput("rollout levels"));
    }
    let mut rng = SplitMix64::new(rng_seed);
    let mut cache = PolicyCache::new(&params.arch);
    let mut probs = vec![0.0; params.arch.n_actions];
    let mut traj = Trajectory { transitions: Vec::with_capacity(len), ..Default::default() };

    let mut level_idx = 0;
    let (mut state, mut obs) = env::reset(&levels[level_idx]);
    let mut episode_return = 0.0;
    let mut entropy_sum = 0.0;

    for _ in 0..len {
        params.forward_cached(&obs, &mut cache)?;
        softmax_into(&cache.logits, &mut probs);
        entropy_sum += entropy_of(&probs);
        let a = rng.categorical(&probs);
        let action = Action::from_index(a).expect("policy head has one logit per action");
        let log_prob_old = log_softmax_at(&cache.logits, a);

        let (reward, done) = env::step_in_place(&mut state, action)?;
        episode_return += reward;
        let next_obs = if done {
            traj.episode_returns.push(episode_return);
            episode_return = 0.0;
            level_idx = (level_idx + 1) % levels.len();
            let (s, o) = env::reset(&levels[level_idx]);
            state = s;
            o
        } else {
            env::observe(&state)
        };
        traj.transitions.push(Transition {
            obs: core::mem::replace(&mut obs, next_obs),
            action,
            log_prob_old,
            reward,
            value_est: cache.value,
            done,
        });
    }
    if traj.transitions.last().is_some_and(|t| !t.done) {
        params.forward_cached(&obs, &mut cache)?;
        traj.bootstrap_value = cache.value;
    }
    if len > 0 {
        traj.mean_entropy = entropy_sum / len as f64;
    }
    Ok(traj)
}

/// Fills in GAE advantages and return targets (`A + V`). Advantages are left
/// unnormalized here; [`ppo_update`] normalizes them per update.
pub fn compute_gae(mut traj: Trajectory, gamma: f64, lambda: f64) -> Result<Trajectory> {
    let n = traj.transitions.len();
    if n == 0 {
        return Err(Error::EmptyTrajectory);
    }
    let mut advantages = vec![0.0; n];
    let mut next_value = traj.bootstrap_value;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let tr = &traj.transitions[t];
        let live = if tr.done { 0.0 } else { 1.0 };
        let delta = tr.reward + gamma * next_value * live - tr.value_est;
        advantages[t] = delta + gamma * lambda * live * next_adv;
        next_adv = advantages[t];
        next_value = tr.value_est;
    }
    traj.return_targets = advantages.iter().zip(&traj.transitions).map(|(a, tr)| a + tr.value_est).collect();
    traj.advantages = advantages;
    Ok(traj)
}

/// Shifts and scales to zero mean and unit (population) variance.
pub fn normalize_advantages(advantages: &mut [f64], eps: f64) {
    let n = advantages.len();
    if n == 0 {
        return;
    }
    let mean = advantages.iter().sum::<f64>() / n as f64;
    let var = advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
    let std = libm::sqrt(var);
    for a in advantages.iter_mut() {
        *a = (*a - mean) / (std + eps);
    }
}

/// One training sample for the PPO loss.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub obs: &'a [f64],
    pub action: usize,
    pub log_prob_old: f64,
    pub advantage: f64,
    pub return_target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    /// Mean clipped-surrogate term, `-min(r A, clip(r) A)`.
    pub policy_loss: f64,
    /// Mean squared value error `(V - target)^2`.
    pub value_loss: f64,
    pub mean_entropy: f64,
    /// The full minimized objective.
    pub total: f64,
}

/// Probability ratios `pi(a|s) / pi_old(a|s)` for every sample.
pub fn ratios(params: &PolicyParams, samples: &[Sample<'_>]) -> Result<Vec<f64>> {
    let mut cache = PolicyCache::new(&params.arch);
    samples
        .iter()
        .map(|s| {
            params.forward_cached(s.obs, &mut cache)?;
            Ok(libm::exp(log_softmax_at(&cache.logits, s.action) - s.log_prob_old))
        })
        .collect()
}

/// Mean PPO loss over `batch`; when `grads` is given, its gradient is
/// accumulated there as well.
pub fn ppo_loss(
    params: &PolicyParams,
    batch: &[Sample<'_>],
    config: &PpoConfig,
    mut grads: Option<&mut GradientBundle>,
) -> Result<LossStats> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("loss batch"));
    }
    let n_actions = params.arch.n_actions;
    let mut cache = PolicyCache::new(&params.arch);
    let mut scratch = PolicyScratch::new(&params.arch);
    let mut probs = vec![0.0; n_actions];
    let mut dlogits = vec![0.0; n_actions];
    let scale = 1.0 / batch.len() as f64;
    let (lo, hi) = (1.0 - config.clip_eps, 1.0 + config.clip_eps);

    let mut stats = LossStats::default();
    for s in batch {
        params.forward_cached(s.obs, &mut cache)?;
        softmax_into(&cache.logits, &mut probs);
        let log_prob = log_softmax_at(&cache.logits, s.action);
        let ratio = libm::exp(log_prob - s.log_prob_old);
        let unclipped = ratio * s.advantage;
        let clipped = ratio.clamp(lo, hi) * s.advantage;
        let policy_loss = -unclipped.min(clipped);
        let value_err = cache.value - s.return_target;
        let entropy = entropy_of(&probs);

        stats.policy_loss += policy_loss;
        stats.value_loss += value_err * value_err;
        stats.mean_entropy += entropy;

        if let Some(g) = grads.as_deref_mut() {
            // d(-min)/d(log pi): the clipped branch is flat in theta.
            let dlogp = if unclipped <= clipped { -unclipped } else { 0.0 };
            for j in 0..n_actions {
                let p = probs[j];
                let onehot = if j == s.action { 1.0 } else { 0.0 };
                let dentropy = if p > 0.0 { -p * (libm::log(p) + entropy) } else { 0.0 };
                dlogits[j] = scale * (dlogp * (onehot - p) - config.entropy_coef * dentropy);
            }
            let dvalue = scale * 2.0 * config.value_coef * value_err;
            params.backward(s.obs, &cache, &dlogits, dvalue, g, &mut scratch);
        }
    }
    stats.policy_loss *= scale;
    stats.value_loss *= scale;
    stats.mean_entropy *= scale;
    stats.total = stats.policy_loss + config.value_coef * stats.value_loss - config.entropy_coef * stats.mean_entropy;
    Ok(stats)
}

/// Runs `epochs` passes of shuffled minibatch Adam steps over `traj`.
///
/// `update` is only used to label a [`Error::NonFiniteLoss`].
pub fn ppo_update(
    params: &PolicyParams,
    opt: &mut AdamState,
    traj: &Trajectory,
    config: &PpoConfig,
    rng_seed: u64,
    update: usize,
) -> Result<(PolicyParams, LossStats)> {
    let n = traj.len();
    if n == 0 {
        return Err(Error::EmptyTrajectory);
    }
    if traj.advantages.len() != n || traj.return_targets.len() != n {
        return Err(Error::InvalidConfig("trajectory has no advantages; run compute_gae first".into()));
    }
    let mut advantages = traj.advantages.clone();
    normalize_advantages(&mut advantages, config.adv_eps);
    let samples: Vec<Sample<'_>> = traj
        .transitions
        .iter()
        .enumerate()
        .map(|(i, tr)| Sample {
            obs: &tr.obs,
            action: tr.action.index(),
            log_prob_old: tr.log_prob_old,
            advantage: advantages[i],
            return_target: traj.return_targets[i],
        })
        .collect();

    let mut params = params.clone();
    let mut grads = params.set.zeros_like();
    let mut rng = SplitMix64::new(rng_seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch = Vec::with_capacity(config.minibatch);
    let mut totals = LossStats::default();
    let mut steps = 0usize;

    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(config.minibatch) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| samples[i]));
            grads.fill(0.0);
            let stats = ppo_loss(&params, &batch, config, Some(&mut grads))?;
            if !stats.total.is_finite() || !grads.is_finite() {
                return Err(Error::NonFiniteLoss {
                    update,
                    detail: format!(
                        "policy {} value {} entropy {}",
                        stats.policy_loss, stats.value_loss, stats.mean_entropy
                    ),
                });
            }
            opt.apply(&mut params.set, &grads)?;
            totals.policy_loss += stats.policy_loss;
            totals.value_loss += stats.value_loss;
            totals.mean_entropy += stats.mean_entropy;
            totals.total += stats.total;
            steps += 1;
        }
    }
    let k = 1.0 / steps as f64;
    totals.policy_loss *= k;
    totals.value_loss *= k;
    totals.mean_entropy *= k;
    totals.total *= k;
    Ok((params, totals))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub update: usize,
    pub mean_return: f64,
    pub mean_entropy: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
}

/// Per-update training statistics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingCurve {
    pub points: Vec<CurvePoint>,
}

impl TrainingCurve {
    pub const CSV_HEADER: &'static str = "update,mean_return,mean_entropy,policy_loss,value_loss";

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Mean entropy over the first `window` updates.
    pub fn first_window_entropy(&self, window: usize) -> f64 {
        mean(self.points.iter().take(window).map(|p| p.mean_entropy))
    }

    /// Mean entropy over the last `window` updates.
    pub fn final_window_entropy(&self, window: usize) -> f64 {
        mean(self.points.iter().rev().take(window).map(|p| p.mean_entropy))
    }

    pub fn final_window_return(&self, window: usize) -> f64 {
        mean(self.points.iter().rev().take(window).map(|p| p.mean_return))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                p.update, p.mean_return, p.mean_entropy, p.policy_loss, p.value_loss
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == Self::CSV_HEADER => {}
            other => return Err(Error::Format(format!("unexpected training curve header {other:?}"))),
        }
        let mut points = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            let bad = || Error::Format(format!("training curve line {}: {line:?}", i + 2));
            if fields.len() != 5 {
                return Err(bad());
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
            points.push(CurvePoint {
                update: fields[0].trim().parse().map_err(|_| bad())?,
                mean_return: num(fields[1])?,
                mean_entropy: num(fields[2])?,
                policy_loss: num(fields[3])?,
                value_loss: num(fields[4])?,
            });
        }
        Ok(Self { points })
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPolicy {
    pub after_first_update: PolicyParams,
    pub after_last_update: PolicyParams,
    pub curve: TrainingCurve,
}

/// Trains a policy for `config.updates` rollout/update cycles.
pub fn train(config: &PpoConfig) -> Result<TrainedPolicy> {
    train_with_progress(config, |_| {})
}

/// As [`train`], calling `progress` after every update.
pub fn train_with_progress(config: &PpoConfig, mut progress: impl FnMut(&CurvePoint)) -> Result<TrainedPolicy> {
    config.validate()?;
    let levels = config.level_seeds.iter().map(|&s| env::generate_level(s)).collect::<Result<Vec<_>>>()?;
    let mut params = PolicyParams::init(config.arch, config.init_seed);
    let mut opt = AdamState::new(&params.set, config.adam);
    let mut curve = TrainingCurve::default();
    let mut first = None;

    for update in 1..=config.updates {
        let rollout_seed = mix64(config.rollout_seed ^ (update as u64).wrapping_mul(0x2545_f491_4f6c_dd1d));
        let traj = collect_rollout(&params, &levels, config.rollout_len, rollout_seed)?;
        let traj = compute_gae(traj, config.gamma, config.gae_lambda)?;
        let (next, stats) = ppo_update(&params, &mut opt, &traj, config, mix64(rollout_seed), update)?;
        params = next;
        let point = CurvePoint {
            update,
            mean_return: traj.mean_episode_return(),
            mean_entropy: traj.mean_entropy,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
        };
        progress(&point);
        curve.points.push(point);
        if update == 1 {
            first = Some(params.clone());
        }
    }
    Ok(TrainedPolicy {
        after_first_update: first.expect("updates >= 1 was validated"),
        after_last_update: params,
        curve,
    })
}

/// Episode runner shared by evaluation code: steps `params` on `state`,
/// sampling actions, and returns `(reward, done)`.
pub(crate) fn policy_step(
    params: &PolicyParams,
    state: &mut EnvState,
    obs: &[f64],
    cache: &mut PolicyCache,
    probs: &mut [f64],
    rng: &mut SplitMix64,
) -> Result<(f64, bool)> {
    params.forward_cached(obs, cache)?;
    softmax_into(&cache.logits, probs);
    let action = Action::from_index(rng.categorical(probs)).expect("policy head has one logit per action");
    env::step_in_place(state, action)
}
