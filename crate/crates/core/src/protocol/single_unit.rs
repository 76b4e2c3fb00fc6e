//! Strategies for a single energy unit (`U = 1`).
//!
//! The unit starts at node 1. Only its holder can send a "1", and sending one
//! hands the unit to the other node, so every scheme is a possession
//! schedule. Node `j`'s symbols are read by the other node from the
//! transcript; the decoders below use nothing else besides the agreed bit
//! count `m`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::transcript::Transcript;
use super::Node;
use crate::error::{Error, Result};

/// Sum rate of fixed frames of `F` uses in which the holder signals
/// `log2 F` bits by the position of its single "1".
pub fn naive_frame_rate(frame_size: u64) -> Result<f64> {
    if frame_size < 2 || !frame_size.is_power_of_two() {
        return Err(Error::InvalidFrameSize(frame_size));
    }
    Ok(frame_size.trailing_zeros() as f64 / frame_size as f64)
}

/// Outcome of a simulated single-unit exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleUnitRun {
    pub transcript: Transcript,
    pub sent: [Vec<bool>; 2],
    /// `decoded[j]` is the other node's estimate of node `j + 1`'s bits.
    pub decoded: [Vec<bool>; 2],
    /// Uses in which the holder had nothing left to say and only passed the
    /// unit on.
    pub handoff_uses: usize,
}

impl SingleUnitRun {
    pub fn bits_per_node(&self) -> usize {
        self.sent[0].len()
    }

    pub fn sum_rate(&self) -> f64 {
        2.0 * self.bits_per_node() as f64 / self.transcript.len() as f64
    }

    pub fn decoded_exactly(&self) -> bool {
        self.sent == self.decoded
    }
}

fn holder(state: u32) -> Node {
    if state == 1 {
        Node::One
    } else {
        Node::Two
    }
}

/// Symbols for one use in which `who` sends `bit` and the other node is
/// silent.
fn symbols(who: Node, bit: bool) -> (u8, u8) {
    match who {
        Node::One => (bit as u8, 0),
        Node::Two => (0, bit as u8),
    }
}

fn check_lengths(bits1: &[bool], bits2: &[bool]) -> Result<usize> {
    if bits1.len() != bits2.len() {
        return Err(Error::InvalidArgument(format!(
            "nodes carry {} and {} bits; equal counts are required",
            bits1.len(),
            bits2.len()
        )));
    }
    if bits1.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one bit per node is required".into(),
        ));
    }
    Ok(bits1.len())
}

fn random_bits(m: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    (0..m).map(|_| rng.gen()).collect()
}

/// Alternating exchange with the prefix code `0 -> "01"`, `1 -> "1"`: every
/// codeword ends with the "1" that passes the unit, so the nodes take turns
/// one bit at a time.
pub fn variable_length_exchange(bits1: &[bool], bits2: &[bool]) -> Result<SingleUnitRun> {
    let m = check_lengths(bits1, bits2)?;
    let mut t = Transcript::with_capacity(1, 1, 3 * m)?;
    for k in 0..m {
        for (who, bits) in [(Node::One, bits1), (Node::Two, bits2)] {
            debug_assert_eq!(holder(t.final_state()), who);
            if !bits[k] {
                let (a, b) = symbols(who, false);
                t.push(a, b)?;
            }
            let (a, b) = symbols(who, true);
            t.push(a, b)?;
        }
    }
    let decoded = decode_variable_length(&t, m)?;
    Ok(SingleUnitRun {
        transcript: t,
        sent: [bits1.to_vec(), bits2.to_vec()],
        decoded,
        handoff_uses: 0,
    })
}

fn decode_variable_length(t: &Transcript, m: usize) -> Result<[Vec<bool>; 2]> {
    let mut out = [Vec::with_capacity(m), Vec::with_capacity(m)];
    let mut pending_zero = false;
    for (i, c) in t.uses().iter().enumerate() {
        let who = holder(c.state);
        let (mine, theirs) = match who {
            Node::One => (c.x1, c.x2),
            Node::Two => (c.x2, c.x1),
        };
        let bad = |reason: &str| Error::InfeasibleTranscript {
            index: i + 1,
            reason: reason.into(),
        };
        if theirs != 0 {
            return Err(bad("the node without the unit sent a \"1\""));
        }
        if mine == 0 {
            if pending_zero {
                return Err(bad("\"00\" is not a codeword prefix"));
            }
            pending_zero = true;
        } else {
            out[who.index()].push(!pending_zero);
            pending_zero = false;
        }
    }
    if pending_zero || out[0].len() != m || out[1].len() != m {
        return Err(Error::InfeasibleTranscript {
            index: t.len(),
            reason: "transcript ends inside a codeword".into(),
        });
    }
    Ok(out)
}

/// [`variable_length_exchange`] on `m` equiprobable bits per node.
pub fn variable_length_sim(m: usize, seed: u64) -> Result<SingleUnitRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits1 = random_bits(m, &mut rng);
    let bits2 = random_bits(m, &mut rng);
    variable_length_exchange(&bits1, &bits2)
}

/// Bit-level time sharing: the holder sends its pending bits verbatim, a "1"
/// passing the unit. A holder whose bits are exhausted spends one use
/// sending a bare "1" to hand the unit over while the other node still has
/// bits left.
pub fn optimal_timeshare_sim(bits1: &[bool], bits2: &[bool]) -> Result<SingleUnitRun> {
    let m = check_lengths(bits1, bits2)?;
    let bits = [bits1, bits2];
    let mut sent = [0usize; 2];
    let mut handoff_uses = 0;
    let mut t = Transcript::with_capacity(1, 1, 2 * m + 16)?;
    while sent[0] < m || sent[1] < m {
        let who = holder(t.final_state());
        let j = who.index();
        let bit = if sent[j] < m {
            sent[j] += 1;
            bits[j][sent[j] - 1]
        } else {
            handoff_uses += 1;
            true
        };
        let (a, b) = symbols(who, bit);
        t.push(a, b)?;
    }
    let decoded = decode_timeshare(&t, m)?;
    Ok(SingleUnitRun {
        transcript: t,
        sent: [bits1.to_vec(), bits2.to_vec()],
        decoded,
        handoff_uses,
    })
}

fn decode_timeshare(t: &Transcript, m: usize) -> Result<[Vec<bool>; 2]> {
    let mut out = [Vec::with_capacity(m), Vec::with_capacity(m)];
    for (i, c) in t.uses().iter().enumerate() {
        let who = holder(c.state);
        let j = who.index();
        let (mine, theirs) = match who {
            Node::One => (c.x1, c.x2),
            Node::Two => (c.x2, c.x1),
        };
        let bad = |reason: &str| Error::InfeasibleTranscript {
            index: i + 1,
            reason: reason.into(),
        };
        if theirs != 0 {
            return Err(bad("the node without the unit sent a \"1\""));
        }
        if out[j].len() < m {
            out[j].push(mine == 1);
        } else if mine != 1 || out[who.other().index()].len() == m {
            return Err(bad("unexpected use after the holder finished"));
        }
    }
    if out[0].len() != m || out[1].len() != m {
        return Err(Error::InfeasibleTranscript {
            index: t.len(),
            reason: "transcript ends before both nodes finished".into(),
        });
    }
    Ok(out)
}

/// [`optimal_timeshare_sim`] on `m` equiprobable bits per node.
pub fn optimal_timeshare_random(m: usize, seed: u64) -> Result<SingleUnitRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits1 = random_bits(m, &mut rng);
    let bits2 = random_bits(m, &mut rng);
    optimal_timeshare_sim(&bits1, &bits2)
}
