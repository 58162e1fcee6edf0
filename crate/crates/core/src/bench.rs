//! The benchmarking process, one repeat at a time.
//!
//! A process-repeat trains a policy on `m` levels, discards it unless its
//! return converged near the maximum, then runs the final policy on the
//! training levels (in-distribution states) and on fresh levels
//! (out-of-distribution states). The in-distribution set is split; the
//! baselines are fitted on the train part and every classifier scores the
//! held-out in-distribution states together with the OOD states.
//!
//! Each repeat is a pure function of `(config, repeat index)`, so repeats can
//! run in any order or in parallel.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::baselines::{ae_fit, knn_fit, AeConfig, Autoencoder, Knn};
use crate::env::{self, Level};
use crate::error::{Error, Result};
use crate::evalx::{self, AggregateStats, AucRecord, RocCurve, ScoredSample};
use crate::nn::{PolicyCache, PolicyParams};
use crate::peoc::{separation_check, Classifier, Peoc, PolicySnapshot, Separation, SnapshotTag};
use crate::ppo::{self, policy_step, PpoConfig, TrainingCurve};
use crate::rng::{mix64, SplitMix64};

pub const PEOC_FIRST: &str = "PEOC-1";
pub const PEOC_LAST: &str = "PEOC-last";
pub const AUTOENCODER: &str = "AE";
pub const KNN: &str = "kNN";
/// Evaluation order of the classifier roster.
pub const CLASSIFIERS: [&str; 4] = [PEOC_FIRST, PEOC_LAST, AUTOENCODER, KNN];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateConfig {
    /// Number of final updates averaged.
    pub window: usize,
    /// Inclusive lower bound on the windowed mean episode return.
    pub min_return: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self { window: 10, min_return: 0.95 * env::COIN_REWARD }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub n_repeats: usize,
    pub m_levels: usize,
    pub train_steps: usize,
    pub ind_run_steps: usize,
    pub ood_run_steps: usize,
    pub split_train: u32,
    pub split_test: u32,
    pub gate: GateConfig,
    /// Training hyperparameters. Level seeds, seeds and the update count are
    /// filled in per repeat.
    pub ppo: PpoConfig,
    pub ae: AeConfig,
    pub knn_k: usize,
    pub master_seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_repeats: 40,
            m_levels: 4,
            train_steps: 200_000,
            ind_run_steps: 30_000,
            ood_run_steps: 10_000,
            split_train: 2,
            split_test: 1,
            gate: GateConfig::default(),
            ppo: PpoConfig::default(),
            ae: AeConfig::default(),
            knn_k: 5,
            master_seed: 0,
        }
    }
}

impl BenchConfig {
    /// Table-1 scale: 40 repeats of 2.5M training steps each.
    pub fn paper_scale() -> Self {
        Self { train_steps: 2_500_000, ..Self::default() }
    }

    /// PPO updates per repeat: `ceil(train_steps / rollout_len)`.
    pub fn updates(&self) -> usize {
        self.train_steps.div_ceil(self.ppo.rollout_len.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, v) in [
            ("n_repeats", self.n_repeats),
            ("m_levels", self.m_levels),
            ("train_steps", self.train_steps),
            ("ind_run_steps", self.ind_run_steps),
            ("ood_run_steps", self.ood_run_steps),
            ("gate_window", self.gate.window),
            ("knn_k", self.knn_k),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.m_levels >= 1 << 16 {
            return bad("m_levels must be below 65536".into());
        }
        if self.split_train == 0 || self.split_test == 0 {
            return bad("split parts must be positive".into());
        }
        if !self.gate.min_return.is_finite() {
            return bad("gate_min_return must be finite".into());
        }
        if self.ae.epochs > 0 && (self.ae.minibatch == 0 || !(self.ae.lr > 0.0)) {
            return bad("ae_minibatch and ae_lr must be positive".into());
        }
        if self.ae.hidden == 0 || self.ae.bottleneck == 0 {
            return bad("autoencoder layer sizes must be positive".into());
        }
        let ppo = PpoConfig { updates: self.updates(), ..self.ppo.clone() };
        ppo.validate()
    }
}

/// Every seed a repeat consumes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedBundle {
    pub level_seeds: Vec<u64>,
    pub init: u64,
    pub rollout: u64,
    pub ind_run: u64,
    pub ood_run: u64,
    pub ood_stream: u64,
    pub split: u64,
    pub autoencoder: u64,
    pub knn: u64,
}

#[repr(u64)]
enum Component {
    Init = 1,
    Rollout,
    IndRun,
    OodRun,
    OodStream,
    Split,
    Autoencoder,
    Knn,
    /// Level `j` uses component `Level + j`.
    Level = 0x100,
}

/// Seeds for repeat `repeat` of a benchmark keyed by `master`.
///
/// Each seed is `mix64(base ^ (component << 48 | repeat))`. `mix64` is a
/// bijection, so seeds are pairwise distinct across components and repeats
/// for `repeat < 2^48`, and level seeds never repeat between repeats.
pub fn derive_seeds(master: u64, repeat: usize, m_levels: usize) -> SeedBundle {
    let base = mix64(master ^ 0x5045_4f43_4245_4e43);
    let seed = |component: u64| mix64(base ^ (component << 48 | (repeat as u64 & ((1 << 48) - 1))));
    SeedBundle {
        level_seeds: (0..m_levels as u64).map(|j| seed(Component::Level as u64 + j)).collect(),
        init: seed(Component::Init as u64),
        rollout: seed(Component::Rollout as u64),
        ind_run: seed(Component::IndRun as u64),
        ood_run: seed(Component::OodRun as u64),
        ood_stream: seed(Component::OodStream as u64),
        split: seed(Component::Split as u64),
        autoencoder: seed(Component::Autoencoder as u64),
        knn: seed(Component::Knn as u64),
    }
}

/// True iff the mean return over the last `gate.window` updates reaches
/// `gate.min_return`.
pub fn performance_check(curve: &TrainingCurve, gate: &GateConfig) -> bool {
    !curve.is_empty() && curve.final_window_return(gate.window) >= gate.min_return
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Ind,
    Ood,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub role: Role,
    pub observations: Vec<Vec<f64>>,
    /// Level seed of every episode that contributed states, in order.
    pub episode_seeds: Vec<u64>,
}

pub enum CollectMode<'a> {
    /// Cycle the training levels round-robin.
    Ind { levels: &'a [Level] },
    /// Fresh generator seed per episode, never one of `exclude`.
    Ood { stream_seed: u64, exclude: &'a [u64] },
}

/// Runs `policy` for `steps` steps with sampled actions and records the
/// observation seen before every step.
pub fn collect_states(policy: &PolicyParams, mode: CollectMode<'_>, steps: usize, rng_seed: u64) -> Result<SampleSet> {
    let mut rng = SplitMix64::new(rng_seed);
    let mut cache = PolicyCache::new(&policy.arch);
    let mut probs = vec![0.0; policy.arch.n_actions];
    let (role, mut next_level): (Role, alloc::boxed::Box<dyn FnMut() -> Result<Level> + '_>) = match mode {
        CollectMode::Ind { levels } => {
            if levels.is_empty() {
                return Err(Error::EmptyInput("in-distribution levels"));
            }
            let mut i = 0;
            (
                Role::Ind,
                alloc::boxed::Box::new(move || {
                    let level = levels[i % levels.len()].clone();
                    i += 1;
                    Ok(level)
                }),
            )
        }
        CollectMode::Ood { stream_seed, exclude } => {
            let mut stream = SplitMix64::new(stream_seed);
            (
                Role::Ood,
                alloc::boxed::Box::new(move || loop {
                    let seed = stream.next_u64();
                    if !exclude.contains(&seed) {
                        return env::generate_level(seed);
                    }
                }),
            )
        }
    };

    let mut set = SampleSet { role, observations: Vec::with_capacity(steps), episode_seeds: Vec::new() };
    if steps == 0 {
        return Ok(set);
    }
    let level = next_level()?;
    set.episode_seeds.push(level.seed);
    let (mut state, mut obs) = env::reset(&level);
    while set.observations.len() < steps {
        let (_, done) = policy_step(policy, &mut state, &obs, &mut cache, &mut probs, &mut rng)?;
        let next = if done {
            if set.observations.len() + 1 < steps {
                let level = next_level()?;
                set.episode_seeds.push(level.seed);
                let (s, o) = env::reset(&level);
                state = s;
                o
            } else {
                env::observe(&state)
            }
        } else {
            env::observe(&state)
        };
        set.observations.push(core::mem::replace(&mut obs, next));
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RepeatStatus {
    Accepted,
    Discarded { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierResult {
    pub classifier: String,
    pub roc: RocCurve,
    pub separation: Separation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatReport {
    pub repeat: usize,
    pub seeds: SeedBundle,
    pub status: RepeatStatus,
    pub curve: TrainingCurve,
    /// First- and last-update snapshots, when training completed.
    pub snapshots: Option<(PolicySnapshot, PolicySnapshot)>,
    pub ind_train: usize,
    pub ind_test: usize,
    pub ood: usize,
    pub results: Vec<ClassifierResult>,
}

impl RepeatReport {
    pub fn accepted(&self) -> bool {
        self.status == RepeatStatus::Accepted
    }

    pub fn auc(&self, classifier: &str) -> Option<f64> {
        self.results.iter().find(|r| r.classifier == classifier).map(|r| r.roc.auc)
    }

    /// Final-window mean entropy below first-window mean entropy.
    pub fn entropy_decreased(&self, window: usize) -> bool {
        !self.curve.is_empty() && self.curve.final_window_entropy(window) < self.curve.first_window_entropy(window)
    }
}

/// Stages reported by [`run_process_repeat_observed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Training,
    Discarded,
    CollectingInd,
    CollectingOod,
    FittingBaselines,
    Scoring,
    Done,
}

pub fn run_process_repeat(config: &BenchConfig, repeat: usize) -> Result<RepeatReport> {
    run_process_repeat_observed(config, repeat, &mut |_, _| {})
}

/// [`run_process_repeat`] with a stage callback `(repeat, stage)`.
pub fn run_process_repeat_observed(
    config: &BenchConfig,
    repeat: usize,
    observer: &mut dyn FnMut(usize, Stage),
) -> Result<RepeatReport> {
    config.validate()?;
    let seeds = derive_seeds(config.master_seed, repeat, config.m_levels);
    let ppo_config = PpoConfig {
        updates: config.updates(),
        level_seeds: seeds.level_seeds.clone(),
        init_seed: seeds.init,
        rollout_seed: seeds.rollout,
        ..config.ppo.clone()
    };
    let mut report = RepeatReport {
        repeat,
        seeds: seeds.clone(),
        status: RepeatStatus::Accepted,
        curve: TrainingCurve::default(),
        snapshots: None,
        ind_train: 0,
        ind_test: 0,
        ood: 0,
        results: Vec::new(),
    };

    observer(repeat, Stage::Training);
    let trained = match ppo::train(&ppo_config) {
        Ok(t) => t,
        Err(e @ Error::NonFiniteLoss { .. }) => {
            report.status = RepeatStatus::Discarded { reason: format!("training failed: {e}") };
            observer(repeat, Stage::Discarded);
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    report.curve = trained.curve;
    let first = PolicySnapshot::new(trained.after_first_update, SnapshotTag::AfterFirstUpdate, seeds.init, 1)?;
    let last =
        PolicySnapshot::new(trained.after_last_update, SnapshotTag::AfterLastUpdate, seeds.init, ppo_config.updates)?;
    report.snapshots = Some((first.clone(), last.clone()));

    if !performance_check(&report.curve, &config.gate) {
        report.status = RepeatStatus::Discarded {
            reason: format!(
                "final-window mean return {} below {}",
                report.curve.final_window_return(config.gate.window),
                config.gate.min_return
            ),
        };
        observer(repeat, Stage::Discarded);
        return Ok(report);
    }

    observer(repeat, Stage::CollectingInd);
    let levels = seeds.level_seeds.iter().map(|&s| env::generate_level(s)).collect::<Result<Vec<_>>>()?;
    let ind = collect_states(&last.params, CollectMode::Ind { levels: &levels }, config.ind_run_steps, seeds.ind_run)?;
    observer(repeat, Stage::CollectingOod);
    let ood = collect_states(
        &last.params,
        CollectMode::Ood { stream_seed: seeds.ood_stream, exclude: &seeds.level_seeds },
        config.ood_run_steps,
        seeds.ood_run,
    )?;

    let (ind_train, ind_test) =
        evalx::train_test_split(&ind.observations, config.split_train, config.split_test, seeds.split)?;
    report.ind_train = ind_train.len();
    report.ind_test = ind_test.len();
    report.ood = ood.observations.len();

    observer(repeat, Stage::FittingBaselines);
    let ae = ae_fit(&ind_train, &AeConfig { seed: seeds.autoencoder, ..config.ae })?;
    let knn = knn_fit(&ind_train, config.knn_k)?;
    let classifiers: [&dyn Classifier; 4] = [
        &Peoc::new(PEOC_FIRST, first),
        &Peoc::new(PEOC_LAST, last),
        &Autoencoder::new(AUTOENCODER, ae),
        &Knn::new(KNN, knn),
    ];

    observer(repeat, Stage::Scoring);
    let test = DedupedSet::new(ind_test.iter().chain(&ood.observations));
    let n_ind = ind_test.len();
    for classifier in classifiers {
        let scores = test.score(classifier)?;
        let (ind_scores, ood_scores) = scores.split_at(n_ind);
        let samples: Vec<ScoredSample> = ind_scores
            .iter()
            .map(|&s| ScoredSample::ind(s))
            .chain(ood_scores.iter().map(|&s| ScoredSample::ood(s)))
            .collect();
        report.results.push(ClassifierResult {
            classifier: classifier.name().to_string(),
            roc: evalx::roc_curve(&samples)?,
            separation: separation_check(ind_scores, ood_scores)?,
        });
    }
    observer(repeat, Stage::Done);
    Ok(report)
}

/// Observations with identical values scored once. Scores are deterministic,
/// so this changes cost, not results.
struct DedupedSet<'a> {
    unique: Vec<&'a [f64]>,
    slot: Vec<usize>,
}

impl<'a> DedupedSet<'a> {
    fn new(observations: impl Iterator<Item = &'a Vec<f64>>) -> Self {
        let mut index: BTreeMap<ObsKey<'a>, usize> = BTreeMap::new();
        let mut unique = Vec::new();
        let mut slot = Vec::new();
        for obs in observations {
            let key = ObsKey(obs);
            let next = unique.len();
            let s = *index.entry(key).or_insert(next);
            if s == next {
                unique.push(obs.as_slice());
            }
            slot.push(s);
        }
        Self { unique, slot }
    }

    fn score(&self, classifier: &dyn Classifier) -> Result<Vec<f64>> {
        let unique_scores = self.unique.iter().map(|o| classifier.score(o)).collect::<Result<Vec<_>>>()?;
        Ok(self.slot.iter().map(|&s| unique_scores[s]).collect())
    }
}

/// Observation ordered lexicographically by `f64::total_cmp`.
struct ObsKey<'a>(&'a [f64]);

impl Ord for ObsKey<'_> {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.0
            .iter()
            .zip(other.0)
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or_else(|| self.0.len().cmp(&other.0.len()))
    }
}

impl PartialOrd for ObsKey<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for ObsKey<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for ObsKey<'_> {}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub config: BenchConfig,
    pub repeats: Vec<RepeatReport>,
    pub aggregate: AggregateStats,
    pub accepted: usize,
    pub discarded: usize,
}

impl BenchmarkReport {
    /// One row per (accepted repeat, classifier), ordered by repeat index.
    pub fn auc_records(&self) -> Vec<AucRecord> {
        auc_records(&self.repeats)
    }
}

pub fn auc_records(repeats: &[RepeatReport]) -> Vec<AucRecord> {
    repeats
        .iter()
        .filter(|r| r.accepted())
        .flat_map(|r| {
            r.results.iter().map(move |c| AucRecord { repeat: r.repeat, classifier: c.classifier.clone(), auc: c.roc.auc })
        })
        .collect()
}

/// Orders repeats by index and aggregates the accepted ones.
pub fn assemble_report(config: &BenchConfig, mut repeats: Vec<RepeatReport>) -> Result<BenchmarkReport> {
    repeats.sort_by_key(|r| r.repeat);
    let accepted = repeats.iter().filter(|r| r.accepted()).count();
    let discarded = repeats.len() - accepted;
    if accepted == 0 {
        return Err(Error::NoAcceptedRepeats);
    }
    let aggregate = evalx::aggregate(&evalx::group_by_classifier(&auc_records(&repeats)))?;
    Ok(BenchmarkReport { config: config.clone(), repeats, aggregate, accepted, discarded })
}

/// Runs every repeat in order on the current thread.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    let repeats = (0..config.n_repeats).map(|i| run_process_repeat(config, i)).collect::<Result<Vec<_>>>()?;
    assemble_report(config, repeats)
}
