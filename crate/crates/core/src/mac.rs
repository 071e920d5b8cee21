//! Tag anti-collision for the inventory step: framed slotted ALOHA and an
//! EPC C1G2 style Q-protocol. Two or more tags replying in one slot always
//! collide (no capture).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest Q value.
pub const Q_MAX: f64 = 15.0;

/// Step applied to the floating-point Q after an idle or collided slot.
pub const Q_STEP: f64 = 0.3;

/// Seeded generator used throughout the simulators.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent child seed for task `index` of a run seeded with `master`
/// (SplitMix64 finaliser over the pair).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InventoryResult {
    pub identified: BTreeSet<usize>,
    pub slots_used: usize,
    pub successes: usize,
    pub collisions: usize,
    pub idle_slots: usize,
    pub rounds: usize,
}

impl InventoryResult {
    fn record(&mut self, responders: usize) -> SlotOutcome {
        self.slots_used += 1;
        match responders {
            0 => {
                self.idle_slots += 1;
                SlotOutcome::Idle
            }
            1 => {
                self.successes += 1;
                SlotOutcome::Success
            }
            _ => {
                self.collisions += 1;
                SlotOutcome::Collision
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SlotOutcome {
    Idle,
    Success,
    Collision,
}

/// Expected singleton slots when `n_tags` pick uniformly among `frame_size`.
pub fn expected_successes(n_tags: usize, frame_size: usize) -> f64 {
    assert!(frame_size >= 1, "frame size must be at least 1");
    if n_tags == 0 {
        return 0.0;
    }
    let n = n_tags as f64;
    n * (1.0 - 1.0 / frame_size as f64).powf(n - 1.0)
}

/// One ALOHA frame over the given tag ids, cut off after `slot_limit` slots.
fn aloha_frame<R: Rng>(
    tags: &[usize],
    frame_size: usize,
    slot_limit: usize,
    rng: &mut R,
    result: &mut InventoryResult,
) {
    let mut slots: Vec<Vec<usize>> = vec![Vec::new(); frame_size];
    for &tag in tags {
        slots[rng.gen_range(0..frame_size)].push(tag);
    }
    result.rounds += 1;
    for slot in slots.iter().take(slot_limit) {
        if result.record(slot.len()) == SlotOutcome::Success {
            result.identified.insert(slot[0]);
        }
    }
}

/// A single frame of framed slotted ALOHA with tags `0..n_tags`.
pub fn framed_slotted_aloha<R: Rng>(n_tags: usize, frame_size: usize, rng: &mut R) -> InventoryResult {
    assert!(frame_size >= 1, "frame size must be at least 1");
    let tags: Vec<usize> = (0..n_tags).collect();
    let mut result = InventoryResult::default();
    aloha_frame(&tags, frame_size, frame_size, rng, &mut result);
    result
}

pub fn framed_slotted_aloha_seeded(n_tags: usize, frame_size: usize, seed: u64) -> InventoryResult {
    framed_slotted_aloha(n_tags, frame_size, &mut seeded_rng(seed))
}

/// Reader-side Q bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QState {
    pub q: f64,
    pub round_index: usize,
}

impl QState {
    pub fn new(q_init: f64) -> Self {
        assert!((0.0..=Q_MAX).contains(&q_init), "q_init {q_init} outside [0, {Q_MAX}]");
        Self { q: q_init, round_index: 0 }
    }

    /// Integer Q that sets the frame size.
    pub fn q_int(&self) -> u32 {
        self.q.round() as u32
    }

    pub fn frame_size(&self) -> usize {
        1usize << self.q_int()
    }

    fn after(&mut self, outcome: SlotOutcome) {
        match outcome {
            SlotOutcome::Idle => self.q = (self.q - Q_STEP).max(0.0),
            SlotOutcome::Collision => self.q = (self.q + Q_STEP).min(Q_MAX),
            SlotOutcome::Success => {}
        }
    }
}

const SILENT: u32 = u32::MAX;

/// Q-protocol over the given tag ids, for at most `max_slots` slots.
///
/// Each round every unidentified tag draws a counter in `[0, 2^Q - 1]`; a
/// tag replies when its counter is zero. Collided tags stay silent until the
/// next round. A new round starts when the frame is exhausted or when the
/// rounded Q changes.
fn q_rounds<R: Rng>(tags: &[usize], q_init: f64, max_slots: usize, rng: &mut R) -> InventoryResult {
    let mut state = QState::new(q_init);
    let mut result = InventoryResult::default();
    let mut pending: Vec<usize> = tags.to_vec();
    let mut counters: Vec<u32> = Vec::with_capacity(pending.len());

    while result.slots_used < max_slots {
        let q_int = state.q_int();
        let frame = 1u32 << q_int;
        counters.clear();
        counters.extend(pending.iter().map(|_| rng.gen_range(0..frame)));
        state.round_index += 1;
        result.rounds += 1;

        let mut slot_in_frame = 0u32;
        loop {
            let responders: Vec<usize> = counters.iter().enumerate().filter(|(_, &c)| c == 0).map(|(i, _)| i).collect();
            let outcome = result.record(responders.len());
            match outcome {
                SlotOutcome::Success => {
                    let idx = responders[0];
                    result.identified.insert(pending[idx]);
                    pending.swap_remove(idx);
                    counters.swap_remove(idx);
                }
                SlotOutcome::Collision => {
                    for &idx in &responders {
                        counters[idx] = SILENT;
                    }
                }
                SlotOutcome::Idle => {}
            }
            state.after(outcome);

            if pending.is_empty() || result.slots_used >= max_slots {
                return result;
            }
            slot_in_frame += 1;
            if state.q_int() != q_int || slot_in_frame >= frame {
                break;
            }
            for c in counters.iter_mut().filter(|c| **c != SILENT) {
                *c -= 1;
            }
        }
    }
    result
}

/// Multi-round Q-protocol inventory of tags `0..n_tags`. Stops once every
/// tag is identified or `max_slots` slots have elapsed; at least one slot is
/// always spent.
pub fn q_protocol_inventory(n_tags: usize, q_init: f64, max_slots: usize, seed: u64) -> InventoryResult {
    assert!(max_slots >= 1, "max_slots must be at least 1");
    let tags: Vec<usize> = (0..n_tags).collect();
    q_rounds(&tags, q_init, max_slots, &mut seeded_rng(seed))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// Repeated ALOHA frames of fixed size.
    Fsa {
        frame_size: usize,
    },
    Q {
        q_init: f64,
    },
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Fsa { .. } => "fsa",
            Scheme::Q { .. } => "q",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;

    /// Parses the scheme name with default parameters (frame 16, Q 4).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fsa" | "aloha" => Ok(Scheme::Fsa { frame_size: 16 }),
            "q" | "q-protocol" => Ok(Scheme::Q { q_init: 4.0 }),
            other => Err(format!("unknown scheme '{other}' (expected fsa or q)")),
        }
    }
}

/// Runs `scheme` over `participants` until all are identified or the window
/// of `window_slots` slots closes.
pub fn inventory_window<R: Rng>(
    participants: &[usize],
    window_slots: usize,
    scheme: Scheme,
    rng: &mut R,
) -> InventoryResult {
    if window_slots == 0 {
        return InventoryResult::default();
    }
    match scheme {
        Scheme::Q { q_init } => q_rounds(participants, q_init, window_slots, rng),
        Scheme::Fsa { frame_size } => {
            assert!(frame_size >= 1, "frame size must be at least 1");
            let mut result = InventoryResult::default();
            let mut pending = participants.to_vec();
            while !pending.is_empty() && result.slots_used < window_slots {
                let left = window_slots - result.slots_used;
                aloha_frame(&pending, frame_size, left, rng, &mut result);
                pending.retain(|t| !result.identified.contains(t));
            }
            result
        }
    }
}

/// Number of tags out of `participants` identified within the window.
pub fn inventory_within_window(participants: usize, window_slots: usize, scheme: Scheme, seed: u64) -> usize {
    let tags: Vec<usize> = (0..participants).collect();
    inventory_window(&tags, window_slots, scheme, &mut seeded_rng(seed)).identified.len()
}
