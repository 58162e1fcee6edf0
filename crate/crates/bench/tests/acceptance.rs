//! Acceptance criteria. Each test prints one PASS/FAIL line.

use std::collections::VecDeque;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use peoc_bench::output::{peoc_reproduced, report_text};
use peoc_bench::runner::run_benchmark_parallel;
use peoc_core::baselines::{ae_loss, AeConfig};
use peoc_core::bench::{BenchConfig, BenchmarkReport, PEOC_FIRST, PEOC_LAST};
use peoc_core::env::*;
use peoc_core::evalx::{roc_curve, RocCurve, ScoredSample};
use peoc_core::nn::{entropy, log_softmax_at, Distribution, ParamSet, PolicyArch, PolicyParams};
use peoc_core::peoc::separation_check;
use peoc_core::ppo::{collect_rollout, ppo_loss, ratios, PpoConfig, Sample};
use peoc_core::rng::SplitMix64;

fn verdict(criterion: &str, pass: bool, detail: String) {
    let line = format!("ACCEPTANCE [{}] {criterion}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{criterion}: {detail}");
}

#[test]
fn entropy_closed_forms() {
    let h = |p: &[f64]| entropy(&Distribution { probs: p.to_vec() });
    let errs = [
        (h(&[0.25; 4]) - 4f64.ln()).abs(),
        h(&[0.0, 1.0, 0.0, 0.0]).abs(),
        (h(&[0.5, 0.5, 0.0, 0.0]) - 2f64.ln()).abs(),
    ];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    verdict("entropy math", worst <= 1e-12, format!("max error {worst:e}"));
}

/// Worst relative error of `analytic` against central differences where either exceeds 1e-6.
fn fd_worst(params: &ParamSet, analytic: &ParamSet, mut loss: impl FnMut(&ParamSet) -> f64) -> (f64, usize) {
    let mut p = params.clone();
    let (mut worst, mut n) = (0.0f64, 0);
    for i in 0..p.len() {
        let x = p.values()[i];
        p.values_mut()[i] = x + 1e-5;
        let up = loss(&p);
        p.values_mut()[i] = x - 1e-5;
        let down = loss(&p);
        p.values_mut()[i] = x;
        let numeric = (up - down) / 2e-5;
        let a = analytic.values()[i];
        let scale = a.abs().max(numeric.abs());
        if scale > 1e-6 {
            worst = worst.max((a - numeric).abs() / scale);
            n += 1;
        }
    }
    (worst, n)
}

#[test]
fn gradient_oracle() {
    let mut rng = SplitMix64::new(77);
    let arch = PolicyArch { obs_dim: 8, hidden: 6, n_actions: 4 };
    let config = PpoConfig::default();
    let ae = AeConfig { input: 8, hidden: 5, bottleneck: 3, ..AeConfig::default() };
    let (mut worst, mut compared, mut batches) = (0.0f64, 0, 0);
    while batches < 20 {
        let mut params = PolicyParams::init(arch, rng.next_u64());
        params.set.values_mut().iter_mut().for_each(|v| *v += rng.uniform(-0.1, 0.1));
        let obs: Vec<Vec<f64>> = (0..4).map(|_| (0..8).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
        let mut samples = Vec::new();
        for o in &obs {
            let action = rng.below(4) as usize;
            let lp = log_softmax_at(&params.forward(o).unwrap().0, action);
            samples.push(Sample {
                obs: o,
                action,
                log_prob_old: lp - rng.uniform(0.5, 1.5f64).ln(),
                advantage: rng.uniform(-2.0, 2.0),
                return_target: rng.uniform(-3.0, 3.0),
            });
        }
        // Skip batches with a ratio on a clip kink.
        let near_kink = ratios(&params, &samples).unwrap().iter().any(|r| (r - 0.8).abs() < 1e-3 || (r - 1.2).abs() < 1e-3);
        if near_kink {
            continue;
        }
        let mut g = params.set.zeros_like();
        ppo_loss(&params, &samples, &config, Some(&mut g)).unwrap();
        let (w, n) = fd_worst(&params.set, &g, |p| {
            ppo_loss(&PolicyParams::from_set(arch, p.clone()).unwrap(), &samples, &config, None).unwrap().total
        });
        worst = worst.max(w);
        compared += n;

        // Zero biases put dead units exactly on the ReLU kink; jitter moves them off it.
        let mut ae_params = ParamSet::init(&ae.shapes(), rng.next_u64());
        ae_params.values_mut().iter_mut().for_each(|v| *v += rng.uniform(-0.1, 0.1));
        let batch: Vec<&[f64]> = obs.iter().map(Vec::as_slice).collect();
        let mut g = ae_params.zeros_like();
        ae_loss(&ae_params, &ae, &batch, Some(&mut g));
        let (w, n) = fd_worst(&ae_params, &g, |p| ae_loss(p, &ae, &batch, None));
        worst = worst.max(w);
        compared += n;
        batches += 1;
    }
    verdict(
        "gradient oracle",
        worst < 1e-4,
        format!("{batches} PPO + {batches} AE batches, {compared} coordinates, max relative error {worst:e}"),
    );
}

fn pairwise(ind: &[f64], ood: &[f64]) -> f64 {
    let mut credit = 0u64;
    for &o in ood {
        for &i in ind {
            credit += (o > i) as u64 * 2 + (o == i) as u64;
        }
    }
    credit as f64 / (2 * ind.len() * ood.len()) as f64
}

fn random_scores(rng: &mut SplitMix64, distinct: u64) -> (Vec<f64>, Vec<f64>) {
    let n_ind = 1 + rng.below(50) as usize;
    let n_ood = 1 + rng.below(50) as usize;
    let ind = (0..n_ind).map(|_| rng.below(distinct) as f64).collect();
    let ood = (0..n_ood).map(|_| (rng.below(distinct) + rng.below(2)) as f64).collect();
    (ind, ood)
}

fn curve(ind: &[f64], ood: &[f64]) -> RocCurve {
    let s: Vec<ScoredSample> = ind.iter().map(|&x| ScoredSample::ind(x)).chain(ood.iter().map(|&x| ScoredSample::ood(x))).collect();
    roc_curve(&s).unwrap()
}

#[test]
fn auc_oracle_equivalence() {
    let mut rng = SplitMix64::new(1);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let distinct = [2, 3, 10, 1000, u64::MAX >> 11][i % 5];
        let (ind, ood) = random_scores(&mut rng, distinct);
        worst = worst.max((curve(&ind, &ood).auc - pairwise(&ind, &ood)).abs());
    }
    verdict("AUC oracle equivalence", worst <= 1e-12, format!("1000 sets, max deviation {worst:e}"));
}

#[test]
fn roc_structure() {
    let mut rng = SplitMix64::new(2);
    let mut failures = Vec::new();
    for i in 0..500 {
        let (ind, ood) = random_scores(&mut rng, [3, 20, 1 << 20][i % 3]);
        let c = curve(&ind, &ood);
        let v: Vec<(f64, f64)> = c.points.iter().map(|p| (p.fpr, p.tpr)).collect();
        if v[0] != (0.0, 0.0) || *v.last().unwrap() != (1.0, 1.0) {
            failures.push(format!("set {i}: endpoints"));
        }
        if v.windows(2).any(|w| w[1].0 < w[0].0 || w[1].1 < w[0].1) {
            failures.push(format!("set {i}: not monotone"));
        }
        let t = |x: &[f64]| x.iter().map(|s| 2.0 * s * s * s + 5.0).collect::<Vec<_>>();
        let ct = curve(&t(&ind), &t(&ood));
        let vt: Vec<(f64, f64)> = ct.points.iter().map(|p| (p.fpr, p.tpr)).collect();
        if vt != v || ct.auc != c.auc {
            failures.push(format!("set {i}: transform changed the curve"));
        }
        if (curve(&ood, &ind).auc - (1.0 - c.auc)).abs() > 1e-12 {
            failures.push(format!("set {i}: label inversion"));
        }
    }
    verdict("ROC structural suite", failures.is_empty(), format!("500 sets, failures {failures:?}"));
}

fn bfs_solvable(level: &Level) -> bool {
    let ok = |c: Cell| matches!(level.tile(c), Tile::Empty | Tile::Coin);
    let mut seen = [[false; WIDTH]; HEIGHT];
    let mut queue = VecDeque::from([level.start]);
    seen[level.start.y][level.start.x] = true;
    while let Some(c) = queue.pop_front() {
        if c == level.coin {
            return true;
        }
        let mut next = Vec::new();
        if c.x > 0 {
            next.push(Cell::new(c.x - 1, c.y));
        }
        if c.x + 1 < WIDTH {
            next.push(Cell::new(c.x + 1, c.y));
        }
        if c.y > 0 {
            next.push(Cell::new(c.x, c.y - 1));
        }
        if c.y + 1 < HEIGHT {
            next.push(Cell::new(c.x, c.y + 1));
        }
        for n in next {
            if ok(n) && !seen[n.y][n.x] {
                seen[n.y][n.x] = true;
                queue.push_back(n);
            }
        }
    }
    false
}

fn episode(level: &Level, actions: &mut impl FnMut() -> usize) -> (f64, Vec<(Cell, f64)>) {
    let (mut state, _) = reset(level);
    let mut trace = Vec::new();
    let mut ret = 0.0;
    while !state.terminal() {
        let (r, _) = step_in_place(&mut state, Action::from_index(actions()).unwrap()).unwrap();
        ret += r;
        trace.push((state.agent, r));
    }
    (ret, trace)
}

#[test]
fn environment_suite() {
    let unsolvable: Vec<u64> = (0..1000).filter(|&s| !bfs_solvable(&generate_level(s).unwrap())).collect();
    let mut bad_returns = 0;
    let mut nondeterministic = 0;
    for e in 0..500u64 {
        let level = generate_level(e).unwrap();
        let mut a = SplitMix64::new(e);
        let mut b = SplitMix64::new(e);
        let (ra, ta) = episode(&level, &mut || a.below(4) as usize);
        let (rb, tb) = episode(&generate_level(e).unwrap(), &mut || b.below(4) as usize);
        bad_returns += (ra != 0.0 && ra != COIN_REWARD) as usize;
        nondeterministic += (ta != tb || ra != rb) as usize;
    }
    verdict(
        "environment suite",
        unsolvable.is_empty() && bad_returns == 0 && nondeterministic == 0,
        format!("unsolvable {unsolvable:?}, bad returns {bad_returns}, nondeterministic episodes {nondeterministic}"),
    );
}

#[test]
fn ratio_identity() {
    let params = PolicyParams::init(PolicyArch::default(), 3);
    let levels: Vec<Level> = (0..4).map(|s| generate_level(s).unwrap()).collect();
    let traj = collect_rollout(&params, &levels, 4096, 8).unwrap();
    let samples: Vec<Sample<'_>> = traj
        .transitions
        .iter()
        .map(|t| Sample { obs: &t.obs, action: t.action.index(), log_prob_old: t.log_prob_old, advantage: 0.0, return_target: 0.0 })
        .collect();
    let worst = ratios(&params, &samples).unwrap().iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    verdict("ratio identity", worst <= 1e-12, format!("{} samples, max |r - 1| {worst:e}", samples.len()));
}

#[test]
fn separation_implies_unit_auc() {
    let mut rng = SplitMix64::new(4);
    let (mut separable, mut wrong) = (0, 0);
    for _ in 0..1000 {
        let ind: Vec<f64> = (0..1 + rng.below(40)).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let shift = rng.uniform(-0.5, 2.5);
        let ood: Vec<f64> = (0..1 + rng.below(40)).map(|_| rng.uniform(0.0, 1.0) + shift).collect();
        if separation_check(&ind, &ood).unwrap().perfectly_separable {
            separable += 1;
            wrong += (curve(&ind, &ood).auc != 1.0) as usize;
        }
    }
    verdict(
        "separation consistency",
        separable > 100 && wrong == 0,
        format!("{separable} separable sets, {wrong} with AUC != 1"),
    );
}

fn scaled_config() -> BenchConfig {
    BenchConfig { n_repeats: 10, m_levels: 4, train_steps: 200_000, ..BenchConfig::default() }
}

fn scaled_run() -> &'static BenchmarkReport {
    static RUN: OnceLock<BenchmarkReport> = OnceLock::new();
    RUN.get_or_init(|| {
        let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
        run_benchmark_parallel(&scaled_config(), jobs, &|_, _| {}).expect("scaled benchmark run")
    })
}

#[test]
fn training_trend() {
    let report = scaled_run();
    let window = report.config.gate.window;
    let accepted: Vec<_> = report.repeats.iter().filter(|r| r.accepted()).collect();
    let decreased = accepted.iter().filter(|r| r.entropy_decreased(window)).count();
    let entropies: Vec<String> = accepted
        .iter()
        .map(|r| format!("{}: {:.3}->{:.3}", r.repeat, r.curve.first_window_entropy(window), r.curve.final_window_entropy(window)))
        .collect();
    verdict(
        "training trend",
        decreased == accepted.len() && report.accepted >= 3,
        format!(
            "{} of {} repeats passed the gate, entropy decreased in {decreased} of them [{}]",
            report.accepted,
            report.repeats.len(),
            entropies.join(", ")
        ),
    );
}

#[test]
fn peoc_separation() {
    let report = scaled_run();
    let first = report.aggregate.get(PEOC_FIRST).unwrap().median;
    let last = report.aggregate.get(PEOC_LAST).unwrap().median;
    let flagged = peoc_reproduced(&report.aggregate) == Some(true);
    let text_flag = report_text(report).contains(": REPRODUCED");
    verdict(
        "PEOC separation",
        first >= 0.6 && first >= last && flagged && text_flag,
        format!("median AUC {PEOC_FIRST} {first:.4}, {PEOC_LAST} {last:.4} over {} accepted repeats", report.accepted),
    );
}

const TINY: &str = "\
n_repeats = 3
m_levels = 2
train_steps = 1024
ind_run_steps = 400
ood_run_steps = 200
gate_min_return = 0
ppo_rollout_len = 256
ppo_minibatch = 64
ppo_epochs = 2
policy_hidden = 16
ae_hidden = 16
ae_bottleneck = 4
ae_epochs = 3
";

fn run_cli(config: &Path, out: &Path, jobs: &str) {
    let status = Command::new(env!("CARGO_BIN_EXE_peoc"))
        .args(["bench", "run", "--quiet", "--seed", "5", "--jobs", jobs])
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .status()
        .unwrap();
    assert!(status.success());
}

fn compared_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = vec!["report.csv".to_string(), "aggregate.csv".to_string()];
    let mut svgs: Vec<String> = std::fs::read_dir(root.join("plots"))
        .unwrap()
        .map(|e| format!("plots/{}", e.unwrap().file_name().to_string_lossy()))
        .filter(|n| n.ends_with(".svg"))
        .collect();
    svgs.sort();
    files.extend(svgs);
    files.into_iter().map(|f| (f.clone(), std::fs::read(root.join(&f)).unwrap())).collect()
}

#[test]
fn end_to_end_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.conf");
    std::fs::write(&config, TINY).unwrap();
    let runs: Vec<_> = [("a", "1"), ("b", "1"), ("c", "4"), ("d", "4")]
        .iter()
        .map(|(name, jobs)| {
            let out = dir.path().join(name);
            run_cli(&config, &out, jobs);
            compared_files(&out)
        })
        .collect();
    let n_files = runs[0].len();
    let identical = runs.iter().all(|r| *r == runs[0]);
    verdict(
        "end-to-end determinism",
        identical && n_files >= 2 + 3 + 3 + 1,
        format!("{n_files} files compared across --jobs 1 and --jobs 4, identical {identical}"),
    );
}
