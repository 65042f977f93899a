//! Shared fixtures for the decoding benchmarks.

use brevity::corpus::generate_synthetic;
use brevity::model::{BudgetModel, BudgetParams};
use brevity::{SyntheticTask, SyntheticTaskConfig, TokenId};

/// A budget model over a mid-sized synthetic task plus a few sources.
pub struct Fixture {
    pub task: SyntheticTask,
    pub model: BudgetModel,
    pub sources: Vec<Vec<TokenId>>,
}

pub fn budget_fixture(sentences: usize) -> Fixture {
    let task = generate_synthetic(&SyntheticTaskConfig {
        min_len: 2,
        max_len: 20,
        fertility: [0.7, 0.3],
        num_pairs: sentences.max(1),
        seed: 1,
        ..SyntheticTaskConfig::default()
    })
    .expect("valid synthetic config");
    let model = BudgetModel::for_task(&task, BudgetParams::default(), 1).expect("valid params");
    let sources = task.corpus.sources().map(<[TokenId]>::to_vec).collect();
    Fixture {
        task,
        model,
        sources,
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixture_has_requested_size() {
        assert_eq!(super::budget_fixture(7).sources.len(), 7);
    }
}
