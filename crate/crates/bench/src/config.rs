//! Benchmark configuration files.
//!
//! Flat `key = value` lines; `#` starts a comment. Omitted keys keep their
//! defaults, unknown keys are rejected. [`KEYS`] documents every key.

use std::path::Path;

use peoc_core::bench::BenchConfig;

use crate::error::{BenchError, Result};

/// `(key, description)` for every accepted key, in file order.
pub const KEYS: &[(&str, &str)] = &[
    ("n_repeats", "number of process-repeats"),
    ("m_levels", "training levels per repeat"),
    ("train_steps", "environment steps of policy training per repeat"),
    ("ind_run_steps", "in-distribution collection steps per accepted repeat"),
    ("ood_run_steps", "out-of-distribution collection steps per accepted repeat"),
    ("split_train", "train parts of the in-distribution split"),
    ("split_test", "test parts of the in-distribution split"),
    ("gate_window", "final updates averaged by the performance check"),
    ("gate_min_return", "minimum windowed mean return to accept a policy"),
    ("master_seed", "seed every repeat's seeds are derived from"),
    ("ppo_gamma", "discount factor"),
    ("ppo_gae_lambda", "GAE lambda"),
    ("ppo_clip_eps", "PPO clip range"),
    ("ppo_entropy_coef", "entropy bonus coefficient"),
    ("ppo_value_coef", "value loss coefficient"),
    ("ppo_rollout_len", "environment steps per update"),
    ("ppo_minibatch", "minibatch size"),
    ("ppo_epochs", "passes over each rollout"),
    ("ppo_lr", "Adam learning rate"),
    ("ppo_adam_beta1", "Adam beta1"),
    ("ppo_adam_beta2", "Adam beta2"),
    ("ppo_adam_eps", "Adam epsilon"),
    ("ppo_adv_eps", "added to the advantage standard deviation when normalizing"),
    ("policy_hidden", "width of both policy trunk layers"),
    ("ae_hidden", "autoencoder hidden width"),
    ("ae_bottleneck", "autoencoder code width"),
    ("ae_epochs", "autoencoder training epochs"),
    ("ae_minibatch", "autoencoder minibatch size"),
    ("ae_lr", "autoencoder Adam learning rate"),
    ("knn_k", "neighbour rank used by the k-NN baseline"),
];

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| BenchError::Parse { line, message: format!("invalid value {raw:?} for `{key}`") })
}

fn positive(key: &str, v: usize) -> Result<usize> {
    if v == 0 {
        return Err(BenchError::Range { key: key.into(), message: "must be at least 1".into() });
    }
    Ok(v)
}

fn finite_positive(key: &str, v: f64) -> Result<f64> {
    if !(v.is_finite() && v > 0.0) {
        return Err(BenchError::Range { key: key.into(), message: format!("must be a positive number, got {v}") });
    }
    Ok(v)
}

fn unit_interval(key: &str, v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(BenchError::Range { key: key.into(), message: format!("must lie in [0, 1], got {v}") });
    }
    Ok(v)
}

fn set_key(c: &mut BenchConfig, line: usize, key: &str, raw: &str) -> Result<()> {
    macro_rules! int {
        () => {
            positive(key, parse_value::<usize>(line, key, raw)?)?
        };
    }
    macro_rules! float {
        () => {
            parse_value::<f64>(line, key, raw)?
        };
    }
    match key {
        "n_repeats" => c.n_repeats = int!(),
        "m_levels" => c.m_levels = int!(),
        "train_steps" => c.train_steps = int!(),
        "ind_run_steps" => c.ind_run_steps = int!(),
        "ood_run_steps" => c.ood_run_steps = int!(),
        "split_train" => c.split_train = positive(key, parse_value::<u32>(line, key, raw)? as usize)? as u32,
        "split_test" => c.split_test = positive(key, parse_value::<u32>(line, key, raw)? as usize)? as u32,
        "gate_window" => c.gate.window = int!(),
        "gate_min_return" => {
            let v: f64 = float!();
            if !v.is_finite() {
                return Err(BenchError::Range { key: key.into(), message: "must be finite".into() });
            }
            c.gate.min_return = v;
        }
        "master_seed" => c.master_seed = parse_value(line, key, raw)?,
        "ppo_gamma" => c.ppo.gamma = unit_interval(key, float!())?,
        "ppo_gae_lambda" => c.ppo.gae_lambda = unit_interval(key, float!())?,
        "ppo_clip_eps" => c.ppo.clip_eps = finite_positive(key, float!())?,
        "ppo_entropy_coef" => c.ppo.entropy_coef = nonnegative(key, float!())?,
        "ppo_value_coef" => c.ppo.value_coef = nonnegative(key, float!())?,
        "ppo_rollout_len" => c.ppo.rollout_len = int!(),
        "ppo_minibatch" => c.ppo.minibatch = int!(),
        "ppo_epochs" => c.ppo.epochs = int!(),
        "ppo_lr" => c.ppo.adam.lr = finite_positive(key, float!())?,
        "ppo_adam_beta1" => c.ppo.adam.beta1 = unit_interval(key, float!())?,
        "ppo_adam_beta2" => c.ppo.adam.beta2 = unit_interval(key, float!())?,
        "ppo_adam_eps" => c.ppo.adam.eps = finite_positive(key, float!())?,
        "ppo_adv_eps" => c.ppo.adv_eps = finite_positive(key, float!())?,
        "policy_hidden" => c.ppo.arch.hidden = int!(),
        "ae_hidden" => c.ae.hidden = int!(),
        "ae_bottleneck" => c.ae.bottleneck = int!(),
        "ae_epochs" => c.ae.epochs = parse_value(line, key, raw)?,
        "ae_minibatch" => c.ae.minibatch = int!(),
        "ae_lr" => c.ae.lr = finite_positive(key, float!())?,
        "knn_k" => c.knn_k = int!(),
        _ => return Err(BenchError::UnknownKey { line, key: key.into() }),
    }
    Ok(())
}

fn nonnegative(key: &str, v: f64) -> Result<f64> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(BenchError::Range { key: key.into(), message: format!("must be a nonnegative number, got {v}") });
    }
    Ok(v)
}

/// Parses configuration text on top of [`BenchConfig::default`].
pub fn parse_config_str(text: &str) -> Result<BenchConfig> {
    let mut config = BenchConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(BenchError::Parse { line, message: format!("expected `key = value`, got {content:?}") });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(BenchError::Parse { line, message: "empty key or value".into() });
        }
        if seen.contains(&key) {
            return Err(BenchError::Parse { line, message: format!("duplicate key `{key}`") });
        }
        set_key(&mut config, line, key, value)?;
        seen.push(key);
    }
    config.validate().map_err(|e| BenchError::Range { key: "config".into(), message: e.to_string() })?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<BenchConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    parse_config_str(&text)
}

/// Renders every key; parsing the result yields `config` again.
pub fn config_to_string(c: &BenchConfig) -> String {
    let values: Vec<String> = vec![
        c.n_repeats.to_string(),
        c.m_levels.to_string(),
        c.train_steps.to_string(),
        c.ind_run_steps.to_string(),
        c.ood_run_steps.to_string(),
        c.split_train.to_string(),
        c.split_test.to_string(),
        c.gate.window.to_string(),
        c.gate.min_return.to_string(),
        c.master_seed.to_string(),
        c.ppo.gamma.to_string(),
        c.ppo.gae_lambda.to_string(),
        c.ppo.clip_eps.to_string(),
        c.ppo.entropy_coef.to_string(),
        c.ppo.value_coef.to_string(),
        c.ppo.rollout_len.to_string(),
        c.ppo.minibatch.to_string(),
        c.ppo.epochs.to_string(),
        c.ppo.adam.lr.to_string(),
        c.ppo.adam.beta1.to_string(),
        c.ppo.adam.beta2.to_string(),
        c.ppo.adam.eps.to_string(),
        c.ppo.adv_eps.to_string(),
        c.ppo.arch.hidden.to_string(),
        c.ae.hidden.to_string(),
        c.ae.bottleneck.to_string(),
        c.ae.epochs.to_string(),
        c.ae.minibatch.to_string(),
        c.ae.lr.to_string(),
        c.knn_k.to_string(),
    ];
    debug_assert_eq!(values.len(), KEYS.len());
    let mut out = String::from("# peoc benchmark configuration\n");
    for ((key, doc), value) in KEYS.iter().zip(values) {
        out.push_str(&format!("# {doc}\n{key} = {value}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default() {
        assert_eq!(parse_config_str("").unwrap(), BenchConfig::default());
        assert_eq!(parse_config_str("# nothing\n\n   \n").unwrap(), BenchConfig::default());
    }

    #[test]
    fn zero_repeats_is_range_error() {
        assert!(matches!(parse_config_str("n_repeats = 0"), Err(BenchError::Range { .. })));
    }

    #[test]
    fn unknown_key_reports_line() {
        match parse_config_str("n_repeats = 3\n\nbogus = 1\n") {
            Err(BenchError::UnknownKey { line: 3, key }) => assert_eq!(key, "bogus"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(parse_config_str("n_repeats 3"), Err(BenchError::Parse { line: 1, .. })));
        assert!(matches!(parse_config_str("\nn_repeats = three"), Err(BenchError::Parse { line: 2, .. })));
        assert!(matches!(parse_config_str("knn_k = 2\nknn_k = 3"), Err(BenchError::Parse { line: 2, .. })));
        assert!(matches!(parse_config_str("ppo_gamma = 1.5"), Err(BenchError::Range { .. })));
    }

    #[test]
    fn comments_and_overrides() {
        let c = parse_config_str("n_repeats = 10 # scaled\nmaster_seed=18446744073709551615\nppo_lr = 1e-3\n").unwrap();
        assert_eq!(c.n_repeats, 10);
        assert_eq!(c.master_seed, u64::MAX);
        assert_eq!(c.ppo.adam.lr, 1e-3);
    }

    #[test]
    fn every_documented_key_is_accepted() {
        let text = config_to_string(&BenchConfig::default());
        for (key, _) in KEYS {
            assert!(text.contains(&format!("\n{key} = ")), "{key}");
        }
    }
}
