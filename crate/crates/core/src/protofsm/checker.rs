//! Breadth-first search over the composed station, AP and adversary world.
//!
//! The world is abstract: frames carry provenance flags instead of bits.
//! A frame is tainted when the adversary delivered it, and the safety
//! property is that the station never connects on a chain containing a
//! tainted frame.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{ap_step, sta_step, ApEvent, ApState, Observation, StaState};
use crate::sigchain::ATTEMPT_LIMIT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryAction {
    /// Fake channel switch announcement to the station only; the adversary
    /// then relays between the two channels.
    FakeCsaToSta,
    /// Jam the AP's own announcement and push the AP alone to another channel.
    JamAndForceApSwitch,
    /// Fake announcements to both sides, moving them to different channels
    /// at the same chain position.
    DualChannelCsaMitm,
    /// Altered frame element around the genuine preamble bits.
    SpoofElementKeepPreamble,
    /// Frame with adversary-chosen preamble bits.
    SpoofPreambleBits,
    /// Replay of a recorded slice chain.
    ReplaySliceChain,
}

impl AdversaryAction {
    pub const ALL: [AdversaryAction; 6] = [
        AdversaryAction::FakeCsaToSta,
        AdversaryAction::JamAndForceApSwitch,
        AdversaryAction::DualChannelCsaMitm,
        AdversaryAction::SpoofElementKeepPreamble,
        AdversaryAction::SpoofPreambleBits,
        AdversaryAction::ReplaySliceChain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdversaryAction::FakeCsaToSta => "fake_csa_to_sta",
            AdversaryAction::JamAndForceApSwitch => "jam_and_force_ap_switch",
            AdversaryAction::DualChannelCsaMitm => "dual_channel_csa_mitm",
            AdversaryAction::SpoofElementKeepPreamble => "spoof_element_keep_preamble",
            AdversaryAction::SpoofPreambleBits => "spoof_preamble_bits",
            AdversaryAction::ReplaySliceChain => "replay_slice_chain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct Defenses {
    pub signature: bool,
    pub time_bound: bool,
    pub seq_check: bool,
    pub channel_check: bool,
}

impl Default for Defenses {
    fn default() -> Self {
        Defenses::all()
    }
}

impl Defenses {
    pub const NAMES: [&'static str; 4] = ["signature", "time_bound", "seq_check", "channel_check"];

    pub fn all() -> Self {
        Defenses {
            signature: true,
            time_bound: true,
            seq_check: true,
            channel_check: true,
        }
    }

    /// All defenses except `name`; `None` for an unknown name.
    pub fn without(name: &str) -> Option<Self> {
        let mut d = Defenses::all();
        match name {
            "signature" => d.signature = false,
            "time_bound" => d.time_bound = false,
            "seq_check" => d.seq_check = false,
            "channel_check" => d.channel_check = false,
            _ => return None,
        }
        Some(d)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckConfig {
    pub max_depth: usize,
    /// Frames per chain.
    pub chain_len: u8,
    pub defenses: Defenses,
    pub actions: Vec<AdversaryAction>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            max_depth: 40,
            chain_len: 13,
            defenses: Defenses::all(),
            actions: AdversaryAction::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceActor {
    Ap,
    Adversary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    /// Station state after the step.
    pub state: StaState,
    pub ap_state: ApState,
    pub actor: TraceActor,
    pub action: String,
    /// Atoms the station evaluated, if a frame reached it.
    pub obs: Option<Observation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub safe: bool,
    pub counterexample: Option<Vec<Step>>,
    pub states_explored: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Chan {
    A,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Provenance {
    Empty,
    Current,
    Old,
    Mixed,
    Forged,
}

impl Provenance {
    fn push(self, slice: Provenance) -> Provenance {
        match (self, slice) {
            (Provenance::Empty, s) => s,
            (a, b) if a == b => a,
            (Provenance::Forged, _) | (_, Provenance::Forged) => Provenance::Forged,
            _ => Provenance::Mixed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct World {
    sta: StaState,
    ap: ApState,
    sta_ch: Chan,
    ap_ch: Chan,
    /// Index of the next chain frame the station expects, from 1.
    next: u8,
    attempts_left: u8,
    /// Chain position after which each side switched channel.
    sta_switch: Option<u8>,
    ap_switch: Option<u8>,
    relay: bool,
    chain: Provenance,
    tainted: bool,
}

impl World {
    fn initial() -> Self {
        World {
            sta: StaState::Disconnected,
            ap: ApState::Disconnected,
            sta_ch: Chan::A,
            ap_ch: Chan::A,
            next: 1,
            attempts_left: ATTEMPT_LIMIT,
            sta_switch: None,
            ap_switch: None,
            relay: false,
            chain: Provenance::Empty,
            tainted: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    from_adversary: bool,
    in_time: bool,
    slice: Provenance,
    seq_fresh: bool,
    /// Channel mixed into the last slice's mask.
    hashed_ch: Chan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Move {
    ApTransmit,
    ApValidSwitch,
    Adversary(AdversaryAction),
}

impl Move {
    fn actor(self) -> TraceActor {
        match self {
            Move::Adversary(_) => TraceActor::Adversary,
            _ => TraceActor::Ap,
        }
    }

    fn name(self) -> String {
        match self {
            Move::ApTransmit => "ap_transmit".into(),
            Move::ApValidSwitch => "ap_valid_switch".into(),
            Move::Adversary(a) => a.name().into(),
        }
    }
}

/// Station-side processing of one frame (or of a timeout when `frame` is
/// `None`).
fn deliver(w: World, frame: Option<Frame>, cfg: &CheckConfig) -> (World, Observation) {
    let d = cfg.defenses;
    let last = w.next == cfg.chain_len;
    let limit_ok = w.attempts_left > 0;
    let (obs, accepted) = match frame {
        None => (
            Observation {
                limit_ok,
                ..Default::default()
            },
            false,
        ),
        Some(f) => {
            let within_t_in = !d.time_bound || f.in_time;
            let seq_ok = !d.seq_check || f.seq_fresh;
            let ch_ok = !(last && d.channel_check) || f.hashed_ch == w.sta_ch;
            let slice_ok = !(last && d.signature)
                || match w.chain.push(f.slice) {
                    Provenance::Current => w.sta_switch == w.ap_switch,
                    Provenance::Old => w.sta_switch.is_none(),
                    _ => false,
                };
            let accepted = limit_ok && within_t_in && ch_ok && seq_ok && slice_ok;
            let obs = Observation {
                c_as_n: last,
                c_as1: w.next == 1,
                c_sa_n: last && accepted,
                within_t_in,
                limit_ok,
                ch_ok,
                seq_ok,
                slice_ok,
            };
            (obs, accepted)
        }
    };
    let sta = sta_step(w.sta, &obs);
    if w.sta == StaState::Ce && sta == StaState::Disconnected {
        return (World::initial(), obs);
    }
    let mut n = w;
    n.sta = sta;
    match frame {
        Some(f) if accepted => {
            n.chain = w.chain.push(f.slice);
            n.tainted |= f.from_adversary;
            if !last {
                n.next += 1;
            }
        }
        _ => n.attempts_left = w.attempts_left.saturating_sub(1),
    }
    if sta == StaState::Connected {
        n.ap = ap_step(n.ap, ApEvent::ReceivedFinal);
    }
    (n, obs)
}

fn successors(w: World, cfg: &CheckConfig) -> Vec<(Move, World, Option<Observation>)> {
    if w.sta == StaState::Connected {
        return Vec::new();
    }
    let mut out = Vec::new();
    let can_switch = w.next >= 2;

    if w.ap != ApState::Connected {
        let mut from = w;
        from.ap = ap_step(w.ap, ApEvent::SentFirst);
        let genuine = Frame {
            from_adversary: false,
            in_time: true,
            slice: Provenance::Current,
            seq_fresh: true,
            hashed_ch: w.ap_ch,
        };
        let frame = if w.sta_ch == w.ap_ch {
            Some(genuine)
        } else if w.relay {
            Some(Frame {
                from_adversary: true,
                ..genuine
            })
        } else {
            None
        };
        let (n, obs) = deliver(from, frame, cfg);
        out.push((Move::ApTransmit, n, Some(obs)));
    }

    let both_ce = w.sta == StaState::Ce && w.ap == ApState::Ce;
    let unswitched = w.sta_switch.is_none() && w.ap_switch.is_none();
    if both_ce && unswitched && can_switch && w.sta_ch == w.ap_ch {
        let mut n = w;
        n.sta_ch = Chan::Y;
        n.ap_ch = Chan::Y;
        n.sta_switch = Some(w.next - 1);
        n.ap_switch = Some(w.next - 1);
        out.push((Move::ApValidSwitch, n, None));
    }

    for &action in &cfg.actions {
        let mv = Move::Adversary(action);
        let inject = |slice, in_time, seq_fresh, hashed_ch| {
            let f = Frame {
                from_adversary: true,
                in_time,
                slice,
                seq_fresh,
                hashed_ch,
            };
            let (n, obs) = deliver(w, Some(f), cfg);
            (mv, n, Some(obs))
        };
        match action {
            AdversaryAction::FakeCsaToSta => {
                if w.sta == StaState::Ce && w.sta_switch.is_none() && can_switch {
                    let mut n = w;
                    n.sta_ch = Chan::Y;
                    n.sta_switch = Some(w.next - 1);
                    n.relay = true;
                    out.push((mv, n, None));
                }
            }
            AdversaryAction::JamAndForceApSwitch => {
                if w.ap == ApState::Ce && w.ap_switch.is_none() && can_switch {
                    let mut n = w;
                    n.ap_ch = Chan::Z;
                    n.ap_switch = Some(w.next - 1);
                    n.relay = true;
                    out.push((mv, n, None));
                }
            }
            AdversaryAction::DualChannelCsaMitm => {
                if both_ce && unswitched && can_switch {
                    let mut n = w;
                    n.sta_ch = Chan::Y;
                    n.ap_ch = Chan::Z;
                    n.sta_switch = Some(w.next - 1);
                    n.ap_switch = Some(w.next - 1);
                    n.relay = true;
                    out.push((mv, n, None));
                }
            }
            // re-sending captured bits takes longer than the AP's own frame
            AdversaryAction::SpoofElementKeepPreamble => {
                if w.ap == ApState::Ce {
                    out.push(inject(Provenance::Current, false, true, w.ap_ch));
                }
            }
            AdversaryAction::SpoofPreambleBits => {
                out.push(inject(Provenance::Forged, true, true, w.sta_ch));
            }
            AdversaryAction::ReplaySliceChain => {
                out.push(inject(Provenance::Old, true, false, Chan::A));
            }
        }
    }
    out
}

struct Node {
    world: World,
    parent: Option<(usize, Move, Option<Observation>)>,
}

fn trace(nodes: &[Node], mut at: usize) -> Vec<Step> {
    let mut steps = Vec::new();
    while let Some((parent, mv, obs)) = nodes[at].parent {
        let w = nodes[at].world;
        steps.push(Step {
            state: w.sta,
            ap_state: w.ap,
            actor: mv.actor(),
            action: mv.name(),
            obs,
        });
        at = parent;
    }
    steps.reverse();
    steps
}

/// Shortest trace to a world satisfying `goal`, and the number of distinct
/// worlds visited.
fn bfs(cfg: &CheckConfig, goal: impl Fn(&World) -> bool) -> (Option<Vec<Step>>, usize) {
    let start = World::initial();
    let mut nodes = vec![Node {
        world: start,
        parent: None,
    }];
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    while let Some((idx, depth)) = queue.pop_front() {
        if depth >= cfg.max_depth {
            continue;
        }
        for (mv, next, obs) in successors(nodes[idx].world, cfg) {
            if !seen.insert(next) {
                continue;
            }
            nodes.push(Node {
                world: next,
                parent: Some((idx, mv, obs)),
            });
            let id = nodes.len() - 1;
            if goal(&next) {
                return (Some(trace(&nodes, id)), seen.len());
            }
            queue.push_back((id, depth + 1));
        }
    }
    (None, seen.len())
}

/// Searches for a minimal-length trace in which the station connects on a
/// chain containing adversary-delivered frames.
pub fn model_check(cfg: &CheckConfig) -> Verdict {
    let (cex, explored) = bfs(cfg, |w| w.sta == StaState::Connected && w.tainted);
    Verdict {
        safe: cex.is_none(),
        counterexample: cex,
        states_explored: explored,
    }
}

/// Shortest trace to any connected state.
pub fn shortest_connection(cfg: &CheckConfig) -> Option<Vec<Step>> {
    bfs(cfg, |w| w.sta == StaState::Connected).0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(defenses: Defenses, actions: &[AdversaryAction]) -> CheckConfig {
        CheckConfig {
            defenses,
            actions: actions.to_vec(),
            ..Default::default()
        }
    }

    #[test]
    fn benign_run_connects_in_chain_len_steps() {
        for n in [13u8, 14, 15] {
            let c = CheckConfig {
                chain_len: n,
                actions: vec![],
                ..Default::default()
            };
            let t = shortest_connection(&c).expect("honest run connects");
            assert_eq!(t.len(), n as usize);
            assert!(t.iter().all(|s| s.actor == TraceActor::Ap));
            assert_eq!(t.last().unwrap().state, StaState::Connected);
            assert_eq!(t.last().unwrap().ap_state, ApState::Connected);
            assert!(model_check(&c).safe);
        }
    }

    #[test]
    fn full_defenses_are_safe_against_each_action_and_pair() {
        for (i, &a) in AdversaryAction::ALL.iter().enumerate() {
            let v = model_check(&cfg(Defenses::all(), &[a]));
            assert!(v.safe, "{a:?}: {:?}", v.counterexample);
            for &b in &AdversaryAction::ALL[i + 1..] {
                let v = model_check(&cfg(Defenses::all(), &[a, b]));
                assert!(v.safe, "{a:?}+{b:?}: {:?}", v.counterexample);
            }
        }
    }

    #[test]
    fn each_defense_is_necessary() {
        let expected = [
            ("signature", AdversaryAction::SpoofPreambleBits),
            ("time_bound", AdversaryAction::SpoofElementKeepPreamble),
            ("seq_check", AdversaryAction::ReplaySliceChain),
            ("channel_check", AdversaryAction::DualChannelCsaMitm),
        ];
        for (defense, action) in expected {
            let v = model_check(&cfg(Defenses::without(defense).unwrap(), &[action]));
            let cex = v.counterexample.expect(defense);
            assert!(cex.iter().any(|s| s.action == action.name()), "{defense}");
            assert_eq!(cex.last().unwrap().state, StaState::Connected);
        }
    }

    #[test]
    fn missing_time_bound_counterexample_is_minimal() {
        let v = model_check(&cfg(
            Defenses::without("time_bound").unwrap(),
            &[AdversaryAction::SpoofElementKeepPreamble],
        ));
        // the AP must send frame 1 before its preamble can be reused, then
        // one spoofed frame taints the chain
        let cex = v.counterexample.unwrap();
        assert_eq!(cex.len(), 13);
        assert_eq!(cex[0].action, "ap_transmit");
    }

    #[test]
    fn unknown_defense_name() {
        assert_eq!(Defenses::without("firewall"), None);
    }

    #[test]
    fn depth_limit_is_respected() {
        let c = CheckConfig {
            max_depth: 5,
            actions: vec![AdversaryAction::SpoofPreambleBits],
            defenses: Defenses::without("signature").unwrap(),
            ..Default::default()
        };
        assert!(model_check(&c).safe);
    }

    #[test]
    fn step_json_shape() {
        let t = shortest_connection(&CheckConfig {
            chain_len: 2,
            actions: vec![],
            ..Default::default()
        })
        .unwrap();
        let v = serde_json::to_value(&t[0]).unwrap();
        for key in ["state", "actor", "action", "obs"] {
            assert!(v.get(key).is_some(), "{v}");
        }
        assert_eq!(v["state"], "ce");
        assert_eq!(v["actor"], "ap");
    }
}
