//! Flat `key = value` files for the market simulator.
//!
//! Keys are the [`MarketConfig`] field names. Blank lines and lines starting
//! with `#` are skipped. Keys not given keep their default value.

use churnforge_core::synth::MarketConfig;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigFileError {
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value {value:?} for {key}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
}

/// Applies every assignment in `text` on top of `config`.
pub fn apply_config_text(config: &mut MarketConfig, text: &str) -> Result<(), ConfigFileError> {
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or(ConfigFileError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = || ConfigFileError::BadValue {
            line,
            key: key.into(),
            value: value.into(),
        };
        macro_rules! set {
            ($field:ident) => {
                config.$field = value.parse().map_err(|_| bad())?
            };
        }
        match key {
            "n_workers" => set!(n_workers),
            "n_tasks" => set!(n_tasks),
            "horizon_days" => set!(horizon_days),
            "task_rate" => set!(task_rate),
            "worker_join_spread" => set!(worker_join_spread),
            "skill_alpha" => set!(skill_alpha),
            "skill_beta" => set!(skill_beta),
            "base_participation_prob" => set!(base_participation_prob),
            "streak_hazard" => set!(streak_hazard),
            "base_hazard" => set!(base_hazard),
            "seed" => set!(seed),
            _ => {
                return Err(ConfigFileError::UnknownKey {
                    line,
                    key: key.into(),
                })
            }
        }
    }
    Ok(())
}

/// Renders a config in the same format.
pub fn config_text(config: &MarketConfig) -> String {
    format!(
        "n_workers = {}\nn_tasks = {}\nhorizon_days = {}\ntask_rate = {}\n\
         worker_join_spread = {}\nskill_alpha = {}\nskill_beta = {}\n\
         base_participation_prob = {}\nstreak_hazard = {}\nbase_hazard = {}\nseed = {}\n",
        config.n_workers,
        config.n_tasks,
        config.horizon_days,
        config.task_rate,
        config.worker_join_spread,
        config.skill_alpha,
        config.skill_beta,
        config.base_participation_prob,
        config.streak_hazard,
        config.base_hazard,
        config.seed,
    )
}
