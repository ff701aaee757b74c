use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spend tracking in USD.
///
/// A request must first `reserve` its worst-case cost; the reservation is
/// swapped for the actual cost by `settle`. Requests whose reservation would
/// push committed spend past the limit are refused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetState {
    pub spent_usd: f64,
    pub limit_usd: f64,
    pub price_per_1k_in: f64,
    pub price_per_1k_out: f64,
    #[serde(skip)]
    reserved_usd: f64,
}

impl BudgetState {
    pub fn new(limit_usd: f64, price_per_1k_in: f64, price_per_1k_out: f64) -> Self {
        BudgetState {
            spent_usd: 0.0,
            limit_usd,
            price_per_1k_in,
            price_per_1k_out,
            reserved_usd: 0.0,
        }
    }

    pub fn cost(&self, tokens_in: u64, tokens_out: u64) -> f64 {
        (tokens_in as f64 * self.price_per_1k_in + tokens_out as f64 * self.price_per_1k_out) / 1000.0
    }

    pub fn reserve(&mut self, projected: f64) -> Result<()> {
        let committed = self.spent_usd + self.reserved_usd;
        if committed + projected > self.limit_usd {
            return Err(Error::BudgetExhausted {
                spent: self.spent_usd,
                limit: self.limit_usd,
                projected,
            });
        }
        self.reserved_usd += projected;
        Ok(())
    }

    pub fn release(&mut self, projected: f64) {
        self.reserved_usd = (self.reserved_usd - projected).max(0.0);
    }

    pub fn settle(&mut self, projected: f64, actual: f64) {
        self.release(projected);
        self.spent_usd += actual.max(0.0);
    }

    pub fn remaining(&self) -> f64 {
        self.limit_usd - self.spent_usd
    }
}

/// Rough token count when the server omits usage: `ceil(chars / 4)`.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_limit_refuses() {
        let mut b = BudgetState::new(0.0, 0.5, 1.5);
        assert!(matches!(b.reserve(b.cost(100, 10)), Err(Error::BudgetExhausted { .. })));
    }

    #[test]
    fn reserve_settle_cycle() {
        let mut b = BudgetState::new(1.0, 1.0, 1.0);
        let p = b.cost(400, 100);
        assert!((p - 0.5).abs() < 1e-12);
        b.reserve(p).unwrap();
        // A second reservation would exceed the limit while the first is open.
        assert!(b.reserve(0.6).is_err());
        b.settle(p, 0.3);
        assert!((b.spent_usd - 0.3).abs() < 1e-12);
        b.reserve(0.6).unwrap();
    }

    #[test]
    fn token_estimate() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcd"), 1);
        assert_eq!(estimate_tokens("abcde"), 2);
    }
}
