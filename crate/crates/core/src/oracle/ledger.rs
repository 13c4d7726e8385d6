use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::Result;

/// Why episodes were spent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    /// CSQA draw plus one transition-oracle query (tabular data collection).
    Csqa,
    FeatureEstimation,
    TargetEstimation,
    /// Classical trajectory.
    Rollout,
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Purpose::Csqa => "csqa",
            Purpose::FeatureEstimation => "feature_estimation",
            Purpose::TargetEstimation => "target_estimation",
            Purpose::Rollout => "rollout",
        })
    }
}

/// Phase, policy and purpose attached to a charge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChargeContext {
    pub phase: u64,
    pub policy_id: u64,
    pub purpose: Purpose,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Charge {
    pub phase: u64,
    pub policy_id: u64,
    pub episodes: u64,
    pub purpose: Purpose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChargeOutcome {
    Full,
    /// The budget ran out; `charged` episodes were recorded and the ledger is closed.
    Truncated {
        charged: u64,
    },
}

/// Append-only account of every episode spent in a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeLedger {
    total: u64,
    consumed: u64,
    terminated: bool,
    charges: Vec<Charge>,
}

impl EpisodeLedger {
    pub fn new(total: u64) -> Self {
        Self {
            total,
            consumed: 0,
            terminated: false,
            charges: Vec::new(),
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn remaining(&self) -> u64 {
        self.total - self.consumed
    }

    /// True once a request could not be served in full.
    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    /// Closed ledgers accept no further episodes.
    pub fn is_closed(&self) -> bool {
        self.terminated || self.remaining() == 0
    }

    pub fn charges(&self) -> &[Charge] {
        &self.charges
    }

    pub fn charge(&mut self, ctx: ChargeContext, episodes: u64) -> ChargeOutcome {
        if self.terminated {
            return ChargeOutcome::Truncated { charged: 0 };
        }
        let granted = episodes.min(self.remaining());
        if granted > 0 {
            self.consumed += granted;
            self.charges.push(Charge {
                phase: ctx.phase,
                policy_id: ctx.policy_id,
                episodes: granted,
                purpose: ctx.purpose,
            });
        }
        if granted < episodes {
            self.terminated = true;
            ChargeOutcome::Truncated { charged: granted }
        } else {
            ChargeOutcome::Full
        }
    }

    /// Charge or fail with [`crate::Error::BudgetExhausted`].
    pub fn charge_all(&mut self, ctx: ChargeContext, episodes: u64) -> Result<()> {
        match self.charge(ctx, episodes) {
            ChargeOutcome::Full => Ok(()),
            ChargeOutcome::Truncated { charged } => Err(crate::Error::BudgetExhausted {
                requested: episodes,
                charged,
            }),
        }
    }

    /// CSV with columns `phase,policy_id,episodes,purpose,cumulative`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["phase", "policy_id", "episodes", "purpose", "cumulative"])?;
        let mut cumulative = 0;
        for c in &self.charges {
            cumulative += c.episodes;
            w.write_record([
                c.phase.to_string(),
                c.policy_id.to_string(),
                c.episodes.to_string(),
                c.purpose.to_string(),
                cumulative.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Replay an exported charge log against a budget of `total` episodes.
    pub fn read_csv<R: std::io::Read>(input: R, total: u64) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            phase: u64,
            policy_id: u64,
            episodes: u64,
            purpose: Purpose,
            cumulative: u64,
        }
        let mut ledger = EpisodeLedger::new(total);
        for row in csv::Reader::from_reader(input).deserialize::<Row>() {
            let row = row?;
            let ctx = ChargeContext {
                phase: row.phase,
                policy_id: row.policy_id,
                purpose: row.purpose,
            };
            if ledger.charge(ctx, row.episodes) != ChargeOutcome::Full
                || ledger.consumed() != row.cumulative
            {
                return Err(crate::Error::InvalidModel(format!(
                    "charge log is inconsistent at cumulative {}",
                    row.cumulative
                )));
            }
        }
        Ok(ledger)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    const CTX: ChargeContext = ChargeContext {
        phase: 1,
        policy_id: 1,
        purpose: Purpose::Csqa,
    };

    #[test]
    fn fresh_ledger_charge() {
        let mut l = EpisodeLedger::new(100);
        assert_eq!(l.charge(CTX, 30), ChargeOutcome::Full);
        assert_eq!(l.remaining(), 70);
        assert!(!l.is_closed());
    }

    #[test]
    fn overdraw_truncates_and_terminates() {
        let mut l = EpisodeLedger::new(10);
        l.charge(CTX, 7);
        assert_eq!(l.charge(CTX, 5), ChargeOutcome::Truncated { charged: 3 });
        assert!(l.is_terminated());
        assert_eq!(l.charge(CTX, 1), ChargeOutcome::Truncated { charged: 0 });
        assert_eq!(l.consumed(), 10);
        assert_eq!(l.charges().len(), 2);
    }

    #[test]
    fn charge_all_reports_partial() {
        let mut l = EpisodeLedger::new(2);
        let err = l.charge_all(CTX, 5).unwrap_err();
        assert!(matches!(
            err,
            crate::Error::BudgetExhausted {
                requested: 5,
                charged: 2
            }
        ));
    }

    #[test]
    fn csv_has_cumulative_column() {
        let mut l = EpisodeLedger::new(10);
        l.charge(CTX, 3);
        l.charge(
            ChargeContext {
                phase: 2,
                policy_id: 2,
                purpose: Purpose::TargetEstimation,
            },
            4,
        );
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "phase,policy_id,episodes,purpose,cumulative\n1,1,3,csqa,3\n2,2,4,target_estimation,7\n"
        );
        let back = EpisodeLedger::read_csv(buf.as_slice(), 10).unwrap();
        assert_eq!(back.charges(), l.charges());
        assert!(EpisodeLedger::read_csv(buf.as_slice(), 5).is_err());
    }

    proptest! {
        #[test]
        fn consumption_matches_charge_log(total in 0u64..500, requests in prop::collection::vec(0u64..80, 0..40)) {
            let mut l = EpisodeLedger::new(total);
            let mut prev = 0;
            for r in requests {
                let was_terminated = l.is_terminated();
                let before = l.charges().len();
                l.charge(CTX, r);
                if was_terminated {
                    prop_assert_eq!(l.charges().len(), before);
                }
                let replay: u64 = l.charges().iter().map(|c| c.episodes).sum();
                prop_assert_eq!(replay, l.consumed());
                prop_assert!(l.consumed() <= total);
                prop_assert!(l.consumed() >= prev);
                prev = l.consumed();
            }
        }
    }
}
