use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, StrategyTemplate};
use crate::generators::SamplingParams;
use crate::strategies::StrategyConfig;
use crate::types::StrategyTag;
use crate::verifiers::{NoiseSpec, SparsityLevel};

/// One run of the experiment matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Position in matrix order; the ledger is written in this order.
    pub ordinal: usize,
    pub run_id: String,
    pub task_id: String,
    pub seed: u64,
    pub template: usize,
    pub strategy: StrategyConfig,
    pub temperature: f64,
    pub variant: Option<String>,
}

impl Cell {
    pub fn tag(&self) -> StrategyTag {
        self.strategy.strategy_tag
    }
}

fn strategy_config(
    t: &StrategyTemplate,
    n: u32,
    temperature: f64,
    sparsity: SparsityLevel,
    sigma: f64,
) -> StrategyConfig {
    StrategyConfig {
        strategy_tag: t.strategy,
        n,
        k: if t.strategy == StrategyTag::IadFb {
            t.k.resolve(n)
        } else {
            0
        },
        sampling: SamplingParams {
            temperature,
            top_p: t.top_p,
            max_tokens: t.max_tokens,
        },
        condition_on_worst: t.condition_on_worst,
        sparsity,
        noise: NoiseSpec { sigma },
        context_token_cap: t.context_token_cap,
        judge_token_cap: t.judge_token_cap,
        templates: t.templates.clone(),
    }
}

/// Expands strategy × N × temperature × sparsity × noise × seed × task, in
/// that nesting order. Single-turn runs only at N = 1, once.
pub fn expand(config: &ExperimentConfig, task_ids: &[String]) -> Vec<Cell> {
    let multi_t = config.temperature_grid.len() > 1;
    let multi_s = config.sparsity_grid.len() > 1;
    let multi_z = config.noise_grid.len() > 1;
    let mut cells = Vec::new();
    for (ti, template) in config.strategies.iter().enumerate() {
        let ns: Vec<u32> = if template.strategy == StrategyTag::SingleTurn {
            vec![1]
        } else {
            config.n_grid.clone()
        };
        for &n in &ns {
            for &temperature in &config.temperature_grid {
                for &sparsity in &config.sparsity_grid {
                    for &sigma in &config.noise_grid {
                        let mut parts = Vec::new();
                        if let Some(l) = &template.label {
                            parts.push(l.clone());
                        }
                        if multi_t {
                            parts.push(format!("t={temperature}"));
                        }
                        if multi_s {
                            parts.push(format!("sparsity={sparsity}"));
                        }
                        if multi_z {
                            parts.push(format!("sigma={sigma}"));
                        }
                        let variant = (!parts.is_empty()).then(|| parts.join(","));
                        let strategy = strategy_config(template, n, temperature, sparsity, sigma);
                        for &seed in &config.seeds {
                            for task_id in task_ids {
                                let run_id = format!(
                                    "{}/n={n}/t={temperature}/{sparsity}/sigma={sigma}/seed={seed}",
                                    template.name()
                                );
                                cells.push(Cell {
                                    ordinal: cells.len(),
                                    run_id,
                                    task_id: task_id.clone(),
                                    seed,
                                    template: ti,
                                    strategy: strategy.clone(),
                                    temperature,
                                    variant: variant.clone(),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::KSpec;
    use std::collections::BTreeSet;

    fn config() -> ExperimentConfig {
        ExperimentConfig::from_toml(
            r#"
task_family = "synthetic_bitstring"
seeds = [0, 1, 2]
n_grid = [1, 4]
output_dir = "out"
[[strategies]]
strategy = "SingleTurn"
[[strategies]]
strategy = "IADFB"
k = "n"
"#,
        )
        .unwrap()
    }

    #[test]
    fn matrix_arithmetic() {
        let c = config();
        let tasks = vec!["a".to_string()];
        let cells = expand(&c, &tasks);
        // single-turn: 3 seeds; IADFB: 2 n values x 3 seeds
        assert_eq!(cells.len(), 3 + 6);
        let ids: BTreeSet<(String, String)> =
            cells.iter().map(|c| (c.run_id.clone(), c.task_id.clone())).collect();
        assert_eq!(ids.len(), cells.len());
        assert!(cells.iter().enumerate().all(|(i, c)| c.ordinal == i));
        let fb: Vec<(u32, u32)> = cells
            .iter()
            .filter(|c| c.tag() == StrategyTag::IadFb)
            .map(|c| (c.strategy.n, c.strategy.k))
            .collect();
        assert_eq!(fb, vec![(1, 1), (1, 1), (1, 1), (4, 4), (4, 4), (4, 4)]);
        assert!(cells.iter().all(|c| c.variant.is_none()));
    }

    #[test]
    fn variants_name_the_swept_axes() {
        let mut c = config();
        c.sparsity_grid = vec![SparsityLevel::NS, SparsityLevel::ES];
        c.strategies[1].k = KSpec::Fixed(2);
        c.strategies[1].label = Some("k2".into());
        let cells = expand(&c, &["a".to_string(), "b".to_string()]);
        assert_eq!(cells.len(), (2 + 2 * 2) * 3 * 2);
        let v: BTreeSet<Option<String>> = cells.iter().map(|c| c.variant.clone()).collect();
        assert!(v.contains(&Some("k2,sparsity=ES".into())));
        assert!(v.contains(&Some("sparsity=NS".into())));
        for cell in &cells {
            cell.strategy.validate().unwrap();
        }
    }
}
