use rand::Rng;

use super::{BinaryOracle, ChargeContext, EpisodeLedger, OracleTag, ProbabilityOracle};
use crate::mdp::{next_state_distribution, occupancy_measure, Dims, Policy, TabularMdp};
use crate::Result;

/// One classical episode: `states[0..=H]` and `actions[0..H]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

/// Quantum-accessible view of an MDP.
///
/// Learners see rewards and dimensions directly. Transitions are only
/// reachable through charged sampling or oracle handles, whose contents are
/// in turn only reachable through the estimation routines.
#[derive(Debug, Clone, Copy)]
pub struct SimulatedEnvironment<'a> {
    mdp: &'a TabularMdp,
}

impl<'a> SimulatedEnvironment<'a> {
    pub fn new(mdp: &'a TabularMdp) -> Self {
        Self { mdp }
    }

    pub fn dims(&self) -> Dims {
        self.mdp.dims()
    }

    pub fn initial_state(&self) -> usize {
        self.mdp.initial_state()
    }

    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.mdp.reward(h, s, a)
    }

    /// Rewards flattened `[h][s][a]`.
    pub fn rewards(&self) -> &[f64] {
        self.mdp.rewards()
    }

    /// Draw `s_h ~ d_h^π` at the cost of one episode.
    ///
    /// Classical Sampling via Quantum Access prepares the step-`h` state by
    /// alternating policy and transition oracles and then measures; its
    /// output law equals that of a forward rollout, which is what runs here.
    pub fn csqa_sample<R: Rng + ?Sized>(
        &self,
        pi: &Policy,
        h: usize,
        ledger: &mut EpisodeLedger,
        ctx: ChargeContext,
        rng: &mut R,
    ) -> Result<usize> {
        let dims = self.dims();
        pi.check_dims(dims)?;
        dims.check_step(h)?;
        ledger.charge_all(ctx, 1)?;
        let mut s = self.mdp.initial_state();
        for step in 0..h {
            let a = pi.sample_action(step, s, rng);
            s = self.mdp.sample_next(step, s, a, rng);
        }
        Ok(s)
    }

    /// Classical episode under `π`, charged as one rollout.
    pub fn rollout<R: Rng + ?Sized>(
        &self,
        pi: &Policy,
        ledger: &mut EpisodeLedger,
        ctx: ChargeContext,
        rng: &mut R,
    ) -> Result<Trajectory> {
        let dims = self.dims();
        pi.check_dims(dims)?;
        ledger.charge_all(ctx, 1)?;
        let mut states = Vec::with_capacity(dims.horizon + 1);
        let mut actions = Vec::with_capacity(dims.horizon);
        let mut s = self.mdp.initial_state();
        states.push(s);
        for h in 0..dims.horizon {
            let a = pi.sample_action(h, s, rng);
            s = self.mdp.sample_next(h, s, a, rng);
            actions.push(a);
            states.push(s);
        }
        Ok(Trajectory { states, actions })
    }

    /// Transition oracle for `P_h(· | s, a)`.
    pub fn transition_oracle(&self, h: usize, s: usize, a: usize) -> ProbabilityOracle {
        ProbabilityOracle::new(
            self.mdp.transition(h, s, a).to_vec(),
            OracleTag::Transition { h, s, a },
        )
        .expect("validated MDP rows are distributions")
    }

    /// Oracle for the law of `(s_h, a_h)` under `π`, outcomes indexed `s * A + a`.
    pub fn occupancy_oracle(
        &self,
        pi: &Policy,
        policy_id: u64,
        h: usize,
    ) -> Result<ProbabilityOracle> {
        ProbabilityOracle::new(
            occupancy_measure(self.mdp, pi, h)?,
            OracleTag::StateActionOccupancy { policy_id, h },
        )
    }

    /// Oracle for the law of `s_{h+1}` under `π`.
    pub fn next_state_oracle(
        &self,
        pi: &Policy,
        policy_id: u64,
        h: usize,
    ) -> Result<ProbabilityOracle> {
        ProbabilityOracle::new(
            next_state_distribution(self.mdp, pi, h)?,
            OracleTag::NextState { policy_id, h },
        )
    }

    /// Binary oracle for a state-value vector, bounded by `bound`.
    pub fn value_oracle(&self, v: &[f64], bound: f64) -> Result<BinaryOracle> {
        BinaryOracle::new(v.iter().map(|x| vec![*x]).collect(), bound)
    }
}
