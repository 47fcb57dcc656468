//! Station and AP state machines for channel establishment (CE) and a
//! bounded explicit-state model checker over them.

mod checker;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sigchain::ChainContext;

pub use checker::{
    model_check, shortest_connection, AdversaryAction, CheckConfig, Defenses, Step, TraceActor,
    Verdict,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StaState {
    /// α1
    #[default]
    Disconnected,
    /// α2
    Ce,
    /// α3
    Connected,
}

/// Condition atoms evaluated on the latest frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct Observation {
    /// Station received the AP's N-th CE frame.
    pub c_as_n: bool,
    /// Station received the AP's first CE frame.
    pub c_as1: bool,
    /// Station sent its final frame.
    pub c_sa_n: bool,
    pub within_t_in: bool,
    /// `L`: attempts remain.
    pub limit_ok: bool,
    pub ch_ok: bool,
    pub seq_ok: bool,
    pub slice_ok: bool,
}

impl Observation {
    pub fn any_check_failed(&self) -> bool {
        !self.ch_ok || !self.seq_ok || !self.slice_ok
    }

    /// All 256 atom assignments.
    pub fn all() -> impl Iterator<Item = Observation> {
        (0u16..256).map(|v| {
            let b = |i: u16| v >> i & 1 == 1;
            Observation {
                c_as_n: b(0),
                c_as1: b(1),
                c_sa_n: b(2),
                within_t_in: b(3),
                limit_ok: b(4),
                ch_ok: b(5),
                seq_ok: b(6),
                slice_ok: b(7),
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    Tau1,
    Tau2,
    Tau3,
    Tau4,
}

/// Every transition whose condition holds in `state` under `obs`.
pub fn enabled_transitions(state: StaState, obs: &Observation) -> Vec<Transition> {
    let bad = obs.any_check_failed();
    let o = obs;
    let mut out = Vec::new();
    match state {
        StaState::Disconnected => {
            if o.c_as1 {
                out.push(Transition::Tau1);
            }
        }
        StaState::Ce => {
            if (!o.c_as_n && o.limit_ok && bad) || (!o.c_sa_n && o.within_t_in && o.limit_ok && bad)
            {
                out.push(Transition::Tau2);
            }
            if (!o.c_sa_n && !o.within_t_in && !o.limit_ok && bad)
                || (!o.c_as_n && !o.limit_ok && bad)
            {
                out.push(Transition::Tau3);
            }
            if o.c_sa_n && o.limit_ok && o.ch_ok && o.seq_ok && o.slice_ok {
                out.push(Transition::Tau4);
            }
        }
        StaState::Connected => {}
    }
    out
}

/// Station transition; the state is unchanged when no condition holds and
/// `Connected` is absorbing.
pub fn sta_step(state: StaState, obs: &Observation) -> StaState {
    match enabled_transitions(state, obs).first() {
        Some(Transition::Tau1) => StaState::Ce,
        Some(Transition::Tau2) => StaState::Ce,
        Some(Transition::Tau3) => StaState::Disconnected,
        Some(Transition::Tau4) => StaState::Connected,
        None => state,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ApState {
    #[default]
    Disconnected,
    Ce,
    Connected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApEvent {
    /// AP sent its first CE frame.
    SentFirst,
    /// Station's final frame arrived.
    ReceivedFinal,
    /// The station gave up after exhausting its attempts.
    LimitExhausted,
}

pub fn ap_step(state: ApState, event: ApEvent) -> ApState {
    match (state, event) {
        (ApState::Disconnected, ApEvent::SentFirst) => ApState::Ce,
        (ApState::Ce, ApEvent::ReceivedFinal) => ApState::Connected,
        (ApState::Ce, ApEvent::LimitExhausted) => ApState::Disconnected,
        (s, _) => s,
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("attempt limit exceeded")]
pub struct LimitExceeded;

/// Consumes one attempt; fails once none remain.
pub fn enforce_limit(ctx: &mut ChainContext) -> Result<(), LimitExceeded> {
    if ctx.attempts_left == 0 {
        return Err(LimitExceeded);
    }
    ctx.attempts_left -= 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn at_most_one_transition_per_observation() {
        for state in [StaState::Disconnected, StaState::Ce, StaState::Connected] {
            for obs in Observation::all() {
                assert!(
                    enabled_transitions(state, &obs).len() <= 1,
                    "{state:?} {obs:?}"
                );
            }
        }
        assert_eq!(
            Observation::all()
                .collect::<std::collections::HashSet<_>>()
                .len(),
            256
        );
    }

    #[test]
    fn tabulated_transitions() {
        let first = Observation {
            c_as1: true,
            ..Default::default()
        };
        assert_eq!(sta_step(StaState::Disconnected, &first), StaState::Ce);
        let good = Observation {
            c_sa_n: true,
            c_as_n: true,
            limit_ok: true,
            ch_ok: true,
            seq_ok: true,
            slice_ok: true,
            within_t_in: true,
            ..Default::default()
        };
        assert_eq!(sta_step(StaState::Ce, &good), StaState::Connected);
        for obs in Observation::all() {
            assert_eq!(sta_step(StaState::Connected, &obs), StaState::Connected);
        }
    }

    #[test]
    fn bad_frame_retries_then_disconnects() {
        let bad = Observation {
            within_t_in: true,
            limit_ok: true,
            ch_ok: false,
            seq_ok: true,
            slice_ok: true,
            ..Default::default()
        };
        assert_eq!(
            enabled_transitions(StaState::Ce, &bad),
            vec![Transition::Tau2]
        );
        let exhausted = Observation {
            limit_ok: false,
            ..bad
        };
        assert_eq!(sta_step(StaState::Ce, &exhausted), StaState::Disconnected);
    }

    #[test]
    fn disconnected_ignores_everything_but_first_frame() {
        for obs in Observation::all().filter(|o| !o.c_as1) {
            assert_eq!(
                sta_step(StaState::Disconnected, &obs),
                StaState::Disconnected
            );
        }
    }

    #[test]
    fn ap_mirror() {
        let s = ap_step(ApState::Disconnected, ApEvent::SentFirst);
        assert_eq!(s, ApState::Ce);
        assert_eq!(ap_step(s, ApEvent::ReceivedFinal), ApState::Connected);
        assert_eq!(ap_step(s, ApEvent::LimitExhausted), ApState::Disconnected);
        assert_eq!(
            ap_step(ApState::Connected, ApEvent::LimitExhausted),
            ApState::Connected
        );
        assert_eq!(
            ap_step(ApState::Disconnected, ApEvent::ReceivedFinal),
            ApState::Disconnected
        );
    }

    #[test]
    fn limit_counts_down() {
        let mut ctx = ChainContext::new(1, 0);
        assert!(ctx.limit_ok());
        for left in [2, 1, 0] {
            enforce_limit(&mut ctx).unwrap();
            assert_eq!(ctx.attempts_left, left);
        }
        assert!(!ctx.limit_ok());
        assert_eq!(enforce_limit(&mut ctx), Err(LimitExceeded));
    }
}
