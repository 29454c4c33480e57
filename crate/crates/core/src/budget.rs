use crate::error::{Error, Result};
use crate::types::BudgetLedger;

/// Call limits for one run plus the counters spent so far.
#[derive(Clone, Debug)]
pub struct Budget {
    max_gen_calls: u32,
    max_judge_calls: u32,
    spent: BudgetLedger,
}

impl Budget {
    pub fn new(max_gen_calls: u32, max_judge_calls: u32) -> Self {
        Budget {
            max_gen_calls,
            max_judge_calls,
            spent: BudgetLedger::default(),
        }
    }

    pub fn gen_remaining(&self) -> u32 {
        self.max_gen_calls - self.spent.n_gen_calls
    }

    pub fn judge_remaining(&self) -> u32 {
        self.max_judge_calls - self.spent.k_judge_calls
    }

    pub fn check_gen(&self) -> Result<()> {
        if self.gen_remaining() == 0 {
            return Err(Error::BudgetExceeded {
                kind: "generation",
                used: self.spent.n_gen_calls,
            });
        }
        Ok(())
    }

    pub fn check_judge(&self) -> Result<()> {
        if self.judge_remaining() == 0 {
            return Err(Error::BudgetExceeded {
                kind: "judge",
                used: self.spent.k_judge_calls,
            });
        }
        Ok(())
    }

    pub(crate) fn record_gen(&mut self, tokens: u64) {
        self.spent.n_gen_calls += 1;
        self.spent.gen_tokens += tokens;
    }

    pub(crate) fn record_judge(&mut self, tokens: u64) {
        self.spent.k_judge_calls += 1;
        self.spent.judge_tokens += tokens;
    }

    pub fn spent(&self) -> BudgetLedger {
        self.spent
    }
}
