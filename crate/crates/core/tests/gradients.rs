//! Analytic gradients against central finite differences.

use peoc_core::baselines::{ae_loss, AeConfig};
use peoc_core::nn::{log_softmax_at, ParamSet, PolicyArch, PolicyParams};
use peoc_core::ppo::{ppo_loss, PpoConfig, Sample};
use peoc_core::rng::SplitMix64;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
const MIN_GRAD: f64 = 1e-6;

struct Check {
    compared: usize,
    worst: f64,
}

/// Compares `analytic` with central differences of `loss` at the given coordinates.
fn check(params: &ParamSet, analytic: &ParamSet, coords: &[usize], mut loss: impl FnMut(&ParamSet) -> f64) -> Check {
    let mut p = params.clone();
    let mut out = Check { compared: 0, worst: 0.0 };
    for &i in coords {
        let x = p.values()[i];
        p.values_mut()[i] = x + H;
        let up = loss(&p);
        p.values_mut()[i] = x - H;
        let down = loss(&p);
        p.values_mut()[i] = x;
        let numeric = (up - down) / (2.0 * H);
        let a = analytic.values()[i];
        if a.abs().max(numeric.abs()) > MIN_GRAD {
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs());
            out.worst = out.worst.max(rel);
            out.compared += 1;
            assert!(rel < TOL, "coordinate {i}: analytic {a:e}, numeric {numeric:e}, rel {rel:e}");
        }
    }
    out
}

fn random_obs(rng: &mut SplitMix64, dim: usize, binary: bool) -> Vec<f64> {
    (0..dim)
        .map(|_| if binary { (rng.next_f64() < 0.3) as u8 as f64 } else { rng.uniform(-1.0, 1.0) })
        .collect()
}

/// Builds a batch whose ratios stay clear of the clip boundaries, where the loss has kinks.
fn ppo_batch(params: &PolicyParams, rng: &mut SplitMix64, n: usize, dim: usize, binary: bool, clip: f64) -> Vec<(Vec<f64>, usize, f64, f64, f64)> {
    let mut out = Vec::new();
    while out.len() < n {
        let obs = random_obs(rng, dim, binary);
        let action = rng.below(4) as usize;
        let (logits, _) = params.forward(&obs).unwrap();
        let lp = log_softmax_at(&logits, action);
        let ratio = rng.uniform(0.5, 1.5);
        if (ratio - (1.0 - clip)).abs() < 1e-3 || (ratio - (1.0 + clip)).abs() < 1e-3 {
            continue;
        }
        let advantage = rng.uniform(-2.0, 2.0);
        let target = rng.uniform(-3.0, 3.0);
        out.push((obs, action, lp - ratio.ln(), advantage, target));
    }
    out
}

fn samples(batch: &[(Vec<f64>, usize, f64, f64, f64)]) -> Vec<Sample<'_>> {
    batch
        .iter()
        .map(|(obs, action, lpo, adv, target)| Sample {
            obs,
            action: *action,
            log_prob_old: *lpo,
            advantage: *adv,
            return_target: *target,
        })
        .collect()
}

#[test]
fn ppo_loss_gradient_small_network_all_coordinates() {
    let arch = PolicyArch { obs_dim: 7, hidden: 6, n_actions: 4 };
    let config = PpoConfig { entropy_coef: 0.05, ..PpoConfig::default() };
    let mut rng = SplitMix64::new(11);
    let mut compared = 0;
    for trial in 0..24 {
        let mut params = PolicyParams::init(arch, 100 + trial);
        // Nonzero biases so every parameter gets exercised.
        for v in params.set.values_mut() {
            *v += rng.uniform(-0.1, 0.1);
        }
        let batch = ppo_batch(&params, &mut rng, 4 + trial as usize % 5, arch.obs_dim, false, config.clip_eps);
        let s = samples(&batch);
        let mut grads = params.set.zeros_like();
        ppo_loss(&params, &s, &config, Some(&mut grads)).unwrap();
        let coords: Vec<usize> = (0..params.set.len()).collect();
        let r = check(&params.set, &grads, &coords, |p| {
            let q = PolicyParams::from_set(arch, p.clone()).unwrap();
            ppo_loss(&q, &s, &config, None).unwrap().total
        });
        compared += r.compared;
    }
    assert!(compared > 24 * 100, "too few coordinates compared: {compared}");
}

#[test]
fn ppo_loss_gradient_full_network_sampled_coordinates() {
    let arch = PolicyArch::default();
    let config = PpoConfig::default();
    let mut rng = SplitMix64::new(5);
    for trial in 0..3 {
        let params = PolicyParams::init(arch, trial);
        let batch = ppo_batch(&params, &mut rng, 8, arch.obs_dim, true, config.clip_eps);
        let s = samples(&batch);
        let mut grads = params.set.zeros_like();
        ppo_loss(&params, &s, &config, Some(&mut grads)).unwrap();
        // Largest-magnitude coordinates plus a random spread.
        let mut by_size: Vec<usize> = (0..params.set.len()).collect();
        by_size.sort_by(|&a, &b| grads.values()[b].abs().total_cmp(&grads.values()[a].abs()));
        let mut coords: Vec<usize> = by_size[..100].to_vec();
        coords.extend((0..200).map(|_| rng.below(params.set.len() as u64) as usize));
        let r = check(&params.set, &grads, &coords, |p| {
            let q = PolicyParams::from_set(arch, p.clone()).unwrap();
            ppo_loss(&q, &s, &config, None).unwrap().total
        });
        assert!(r.compared >= 100);
    }
}

#[test]
fn ae_loss_gradient() {
    let config = AeConfig { input: 9, hidden: 6, bottleneck: 3, ..AeConfig::default() };
    let mut rng = SplitMix64::new(3);
    let mut compared = 0;
    for trial in 0..24u64 {
        let mut params = ParamSet::init(&config.shapes(), trial);
        for v in params.values_mut() {
            *v += rng.uniform(-0.1, 0.1);
        }
        let data: Vec<Vec<f64>> = (0..3 + trial % 6).map(|_| random_obs(&mut rng, config.input, trial % 2 == 0)).collect();
        let batch: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let mut grads = params.zeros_like();
        ae_loss(&params, &config, &batch, Some(&mut grads));
        let coords: Vec<usize> = (0..params.len()).collect();
        compared += check(&params, &grads, &coords, |p| ae_loss(p, &config, &batch, None)).compared;
    }
    assert!(compared > 24 * 100, "too few coordinates compared: {compared}");
}

#[test]
fn ae_loss_gradient_full_size_sampled() {
    let config = AeConfig::default();
    let mut rng = SplitMix64::new(8);
    let params = ParamSet::init(&config.shapes(), 1);
    let data: Vec<Vec<f64>> = (0..6).map(|_| random_obs(&mut rng, config.input, true)).collect();
    let batch: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
    let mut grads = params.zeros_like();
    ae_loss(&params, &config, &batch, Some(&mut grads));
    let coords: Vec<usize> = (0..300).map(|_| rng.below(params.len() as u64) as usize).collect();
    check(&params, &grads, &coords, |p| ae_loss(p, &config, &batch, None));
}
