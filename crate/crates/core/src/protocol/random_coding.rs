//! State-multiplexed random codes.
//!
//! Node `j` owns one codebook per energy level `e = 1..=U`, drawn i.i.d.
//! Bernoulli(`p_j[e]`). Node 1's level-`e` book is active whenever the state
//! is `e`; node 2's whenever the state is `U - e`. A pointer per book
//! advances on every use of that state; once a codeword is exhausted the
//! node pads with fresh Bernoulli(`p_j[e]`) symbols, so the state process is
//! exactly the chain of the policy. The receiver collects the uses of each
//! state, keeps the first `n_{j,e}` of them, and looks the codeword up.
//!
//! Codebook sizes are stored as bit counts. Codewords are generated on
//! demand from a hash of (book seed, message), so a book with `2^4000`
//! entries costs nothing until one of its codewords is needed.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::transcript::Transcript;
use super::Node;
use crate::chain::{
    build_kernel, stationary, EnergyBudget, MarginalPolicy, StationaryDistribution,
};
use crate::entropy::h2;
use crate::error::{Error, Result};

/// Books with at most this many message bits may be searched exhaustively.
const ENUMERATE_MAX_BITS: u64 = 12;

/// Cap on `K * n_{j,e}` symbols generated by an exhaustive search.
const ENUMERATE_MAX_SYMBOLS: u64 = 1 << 24;

/// Slack for rounding real-valued lengths that land on an integer.
const ROUND_SLACK: f64 = 1e-9;

fn ceil_guarded(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= ROUND_SLACK * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

fn floor_guarded(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= ROUND_SLACK * x.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodingParams {
    pub blocklength: usize,
    /// Occupancy margin subtracted from each stationary mass.
    pub epsilon: f64,
    /// Rate margin subtracted from each level's entropy. Negative values
    /// oversize the books.
    pub delta: f64,
}

impl CodingParams {
    fn validate(&self) -> Result<()> {
        if self.blocklength == 0 {
            return Err(Error::InvalidArgument(
                "blocklength must be positive".into(),
            ));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon {} is outside [0, 1)",
                self.epsilon
            )));
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidArgument("delta must be finite".into()));
        }
        Ok(())
    }
}

/// How codeword collisions are detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CollisionCheck {
    /// Exhaustive search where cheap, sampling otherwise.
    #[default]
    Auto,
    /// Always compare against every other codeword. Only for small books.
    Enumerate,
    /// Draw the event from its exact probability given the sent codeword.
    Sampled,
}

/// A message of one codebook: `bits` bits in little-endian `u64` limbs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    bits: u64,
    limbs: Vec<u64>,
}

impl Message {
    /// The fixed estimate put out when decoding fails.
    pub fn zero(bits: u64) -> Self {
        Self {
            bits,
            limbs: vec![0; bits.div_ceil(64) as usize],
        }
    }

    pub fn random<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> Self {
        let mut m = Self::zero(bits);
        for l in m.limbs.iter_mut() {
            *l = rng.next_u64();
        }
        m.mask();
        m
    }

    /// Message number `index` of a book with at most 64 bits.
    pub fn from_index(bits: u64, index: u64) -> Result<Self> {
        if bits > 64 || (bits < 64 && index >> bits != 0) {
            return Err(Error::InvalidArgument(format!(
                "index {index} does not fit in {bits} bits"
            )));
        }
        let mut m = Self::zero(bits);
        if bits > 0 {
            m.limbs[0] = index;
        }
        Ok(m)
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn limbs(&self) -> &[u64] {
        &self.limbs
    }

    fn mask(&mut self) {
        let rem = self.bits % 64;
        if rem != 0 {
            if let Some(top) = self.limbs.last_mut() {
                *top &= (1u64 << rem) - 1;
            }
        }
    }
}

/// One message per level for each node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageTuple {
    /// `levels[j][e - 1]` is node `j + 1`'s message for level `e`.
    pub levels: [Vec<Message>; 2],
}

impl MessageTuple {
    pub fn get(&self, node: Node, level: u32) -> &Message {
        &self.levels[node.index()][level as usize - 1]
    }
}

/// Codebook of one node at one energy level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub node: Node,
    pub level: u32,
    /// Chain state in which the book is read.
    pub state: usize,
    /// Codeword length `n_{j,e}`.
    pub length: usize,
    /// `log2 K_{j,e}`.
    pub message_bits: u64,
    pub p: f64,
    seed: u64,
}

impl Codebook {
    /// Codeword of `msg`, one symbol per byte.
    pub fn codeword(&self, msg: &Message) -> Vec<u8> {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update([self.node.index() as u8]);
        h.update(self.level.to_le_bytes());
        h.update(msg.bits.to_le_bytes());
        for l in &msg.limbs {
            h.update(l.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
        (0..self.length)
            .map(|_| (rng.gen::<f64>() < self.p) as u8)
            .collect()
    }

    fn enumerable(&self) -> bool {
        self.message_bits <= ENUMERATE_MAX_BITS
            && (self.length as u64).saturating_mul(1 << self.message_bits) <= ENUMERATE_MAX_SYMBOLS
    }

    /// Probability that at least one of the other `K - 1` codewords equals
    /// `word`, each being an independent Bernoulli(`p`) string.
    pub fn collision_probability(&self, word: &[u8]) -> f64 {
        if self.message_bits == 0 {
            return 0.0;
        }
        let ones = word.iter().filter(|&&c| c == 1).count() as f64;
        let zeros = word.len() as f64 - ones;
        let ln_q = if ones > 0.0 { ones * self.p.ln() } else { 0.0 }
            + if zeros > 0.0 {
                zeros * (-self.p).ln_1p()
            } else {
                0.0
            };
        if ln_q == f64::NEG_INFINITY {
            return 0.0;
        }
        // (1 - q)^(K - 1) = exp((K - 1) ln(1 - q)); keep everything in logs.
        let q = ln_q.exp();
        let ln_neg_ln1mq = if q > 1e-8 { (-(-q).ln_1p()).ln() } else { ln_q };
        let ln_others = if self.message_bits >= 53 {
            self.message_bits as f64 * std::f64::consts::LN_2
        } else {
            (((1u64 << self.message_bits) - 1) as f64).ln()
        };
        -(-(ln_others + ln_neg_ln1mq).exp()).exp_m1()
    }

    /// Whether another message of this book shares the codeword of `msg`.
    fn collides<R: Rng + ?Sized>(
        &self,
        msg: &Message,
        word: &[u8],
        check: CollisionCheck,
        rng: &mut R,
    ) -> bool {
        let exhaustive = match check {
            CollisionCheck::Auto => self.enumerable(),
            CollisionCheck::Enumerate => true,
            CollisionCheck::Sampled => false,
        };
        if exhaustive && self.message_bits <= 64 {
            let sent = msg.limbs.first().copied().unwrap_or(0);
            let count = if self.message_bits == 64 {
                u64::MAX
            } else {
                1u64 << self.message_bits
            };
            (0..count).filter(|&i| i != sent).any(|i| {
                self.codeword(&Message::from_index(self.message_bits, i).expect("index fits"))
                    == word
            })
        } else {
            rng.gen::<f64>() < self.collision_probability(word)
        }
    }
}

/// Every codebook of both nodes for one policy and blocklength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookSet {
    pub budget: EnergyBudget,
    pub params: CodingParams,
    pub policy: MarginalPolicy<f64>,
    pub stationary: StationaryDistribution<f64>,
    pub collision_check: CollisionCheck,
    /// Node 1's books for levels `1..=U`, then node 2's.
    books: Vec<Codebook>,
    seed: u64,
}

/// Draws the books. Lengths are `ceil(n (pi_s - epsilon))` and sizes
/// `floor(length (H(p) - delta))` bits, clamped at zero, where `s` is the
/// state in which the book is read.
pub fn build_codebooks(
    budget: EnergyBudget,
    policy: &MarginalPolicy<f64>,
    params: CodingParams,
    seed: u64,
) -> Result<CodebookSet> {
    params.validate()?;
    if policy.p1().len() != budget.states() {
        return Err(Error::PolicyLength {
            expected: budget.states(),
            got: policy.p1().len(),
        });
    }
    let pi = stationary(&build_kernel(policy)?)?;
    let total = budget.total();
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut books = Vec::with_capacity(2 * total as usize);
    for node in [Node::One, Node::Two] {
        for level in 1..=total {
            let (state, p) = match node {
                Node::One => (level as usize, policy.p1()[level as usize]),
                Node::Two => (
                    budget.complement(level as usize),
                    policy.p2()[level as usize],
                ),
            };
            let mass = pi.get(state);
            if mass <= params.epsilon {
                return Err(Error::MarginExhausted {
                    state,
                    mass,
                    epsilon: params.epsilon,
                });
            }
            let length = ceil_guarded(params.blocklength as f64 * (mass - params.epsilon)) as usize;
            let message_bits =
                floor_guarded(length as f64 * (h2(p) - params.delta)).max(0.0) as u64;
            books.push(Codebook {
                node,
                level,
                state,
                length,
                message_bits,
                p,
                seed: seeds.next_u64(),
            });
        }
    }
    Ok(CodebookSet {
        budget,
        params,
        policy: policy.clone(),
        stationary: pi,
        collision_check: CollisionCheck::Auto,
        books,
        seed,
    })
}

impl CodebookSet {
    pub fn book(&self, node: Node, level: u32) -> &Codebook {
        assert!(
            (1..=self.budget.total()).contains(&level),
            "level {level} out of range"
        );
        &self.books[node.index() * self.budget.total() as usize + level as usize - 1]
    }

    pub fn books(&self) -> &[Codebook] {
        &self.books
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Same lengths and sizes, fresh codewords.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut seeds = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        out.seed = seed;
        for b in &mut out.books {
            b.seed = seeds.next_u64();
        }
        out
    }

    pub fn with_collision_check(mut self, check: CollisionCheck) -> Self {
        self.collision_check = check;
        self
    }

    /// `log2` of node `node`'s message count.
    pub fn message_bits(&self, node: Node) -> u64 {
        (1..=self.budget.total())
            .map(|e| self.book(node, e).message_bits)
            .sum()
    }

    /// `log2(prod K_{1,e} * prod K_{2,e}) / n`.
    pub fn sum_rate(&self) -> f64 {
        (self.message_bits(Node::One) + self.message_bits(Node::Two)) as f64
            / self.params.blocklength as f64
    }

    pub fn random_messages<R: Rng + ?Sized>(&self, rng: &mut R) -> MessageTuple {
        let mut per_node = |node| {
            (1..=self.budget.total())
                .map(|e| Message::random(self.book(node, e).message_bits, rng))
                .collect::<Vec<_>>()
        };
        let first = per_node(Node::One);
        MessageTuple {
            levels: [first, per_node(Node::Two)],
        }
    }

    /// `ceil(U / 2)`.
    pub fn default_initial_state(&self) -> usize {
        self.budget.total().div_ceil(2) as usize
    }
}

/// Result of one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    /// `decoded_ok[j]`: node `j + 1`'s message was recovered by the other node.
    pub decoded_ok: [bool; 2],
    /// Books whose state was visited fewer times than their length.
    pub e1_events: Vec<(Node, u32)>,
    /// Books in which another message shares the sent codeword.
    pub e2_events: Vec<(Node, u32)>,
    /// Fraction of the `n` uses spent in each state.
    pub empirical_occupancy: Vec<f64>,
    pub estimates: MessageTuple,
}

impl TrialOutcome {
    pub fn failed(&self) -> bool {
        !(self.decoded_ok[0] && self.decoded_ok[1])
    }
}

/// Runs one block of `n` channel uses.
pub fn run_trial(
    codebooks: &CodebookSet,
    messages: &MessageTuple,
    initial_state: usize,
    seed: u64,
) -> Result<TrialOutcome> {
    run_trial_with_transcript(codebooks, messages, initial_state, seed).map(|(o, _)| o)
}

/// [`run_trial`] that also returns the channel uses.
pub fn run_trial_with_transcript(
    codebooks: &CodebookSet,
    messages: &MessageTuple,
    initial_state: usize,
    seed: u64,
) -> Result<(TrialOutcome, Transcript)> {
    let total = codebooks.budget.total();
    if initial_state > total as usize {
        return Err(Error::StateOutOfRange {
            state: initial_state,
            total,
        });
    }
    for node in [Node::One, Node::Two] {
        let levels = &messages.levels[node.index()];
        if levels.len() != total as usize {
            return Err(Error::PolicyLength {
                expected: total as usize,
                got: levels.len(),
            });
        }
        for (e, m) in (1..=total).zip(levels) {
            if m.bits != codebooks.book(node, e).message_bits {
                return Err(Error::InvalidArgument(format!(
                    "node {node} level {e} message has {} bits, book has {}",
                    m.bits,
                    codebooks.book(node, e).message_bits
                )));
            }
        }
    }

    let words: Vec<Vec<u8>> = codebooks
        .books
        .iter()
        .map(|b| b.codeword(messages.get(b.node, b.level)))
        .collect();
    let slot = |node: Node, level: u32| node.index() * total as usize + level as usize - 1;

    // Stream 0 pads, stream 1 draws sampled collision events.
    let mut pad_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut collision_rng = ChaCha8Rng::seed_from_u64(seed);
    collision_rng.set_stream(1);

    let n = codebooks.params.blocklength;
    let mut pointers = vec![0usize; words.len()];
    let mut t = Transcript::with_capacity(total, initial_state as u32, n)?;
    let mut emit = |node: Node, level: u32| -> u8 {
        let k = slot(node, level);
        let w = &words[k];
        if pointers[k] < w.len() {
            pointers[k] += 1;
            w[pointers[k] - 1]
        } else {
            (pad_rng.gen::<f64>() < codebooks.books[k].p) as u8
        }
    };
    for _ in 0..n {
        let u = t.final_state();
        let x1 = if u == 0 { 0 } else { emit(Node::One, u) };
        let x2 = if u == total {
            0
        } else {
            emit(Node::Two, total - u)
        };
        t.push(x1, x2)?;
    }

    // Received symbols grouped by state, in time order.
    let mut by_state: Vec<Vec<(u8, u8)>> = vec![Vec::new(); total as usize + 1];
    for c in t.uses() {
        by_state[c.state as usize].push((c.x1, c.x2));
    }

    let mut e1_events = Vec::new();
    let mut e2_events = Vec::new();
    let mut estimates = MessageTuple {
        levels: [Vec::new(), Vec::new()],
    };
    for b in &codebooks.books {
        let sent = messages.get(b.node, b.level);
        let seen = &by_state[b.state];
        let insufficient = seen.len() < b.length;
        let collision = b.collides(
            sent,
            &words[slot(b.node, b.level)],
            codebooks.collision_check,
            &mut collision_rng,
        );
        if insufficient {
            e1_events.push((b.node, b.level));
        }
        if collision {
            e2_events.push((b.node, b.level));
        }
        let estimate = if insufficient || collision {
            Message::zero(b.message_bits)
        } else {
            // The channel is noiseless, so the observed prefix is the sent
            // codeword and the list is exactly {sent}.
            debug_assert!(seen[..b.length]
                .iter()
                .zip(&words[slot(b.node, b.level)])
                .all(|(&(a, c), &w)| {
                    match b.node {
                        Node::One => a == w,
                        Node::Two => c == w,
                    }
                }));
            sent.clone()
        };
        estimates.levels[b.node.index()].push(estimate);
    }
    let decoded_ok = [Node::One, Node::Two]
        .map(|node| estimates.levels[node.index()] == messages.levels[node.index()]);
    let empirical_occupancy = by_state.iter().map(|s| s.len() as f64 / n as f64).collect();
    Ok((
        TrialOutcome {
            decoded_ok,
            e1_events,
            e2_events,
            empirical_occupancy,
            estimates,
        },
        t,
    ))
}

/// One trial with messages drawn from `seed`; returns the messages too.
pub fn random_trial(
    codebooks: &CodebookSet,
    initial_state: usize,
    seed: u64,
) -> Result<(MessageTuple, TrialOutcome, Transcript)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let messages = codebooks.random_messages(&mut rng);
    let (outcome, t) =
        run_trial_with_transcript(codebooks, &messages, initial_state, rng.next_u64())?;
    Ok((messages, outcome, t))
}

/// Event counts of one book over a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub node: Node,
    pub level: u32,
    pub e1: usize,
    pub e2: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub trials: usize,
    pub failures: usize,
    pub error_rate: f64,
    pub mean_occupancy: Vec<f64>,
    /// Largest `|empirical - pi|` over all trials and states.
    pub max_occupancy_deviation: f64,
    pub events: Vec<EventCounts>,
    /// Rate of the scheme, `log2(prod K) / n`, in bits per channel use.
    pub sum_rate: f64,
}

/// Error rate averaged over messages and codebook draws. Trial `t` uses
/// stream `t` of a generator seeded with `seed`, so the report does not
/// depend on how trials are scheduled.
pub fn monte_carlo_error(
    codebooks: &CodebookSet,
    trials: usize,
    initial_state: Option<usize>,
    seed: u64,
) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument(
            "at least one trial is required".into(),
        ));
    }
    let initial = initial_state.unwrap_or_else(|| codebooks.default_initial_state());
    let outcomes: Vec<TrialOutcome> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            let books = codebooks.reseeded(rng.next_u64());
            let messages = books.random_messages(&mut rng);
            run_trial(&books, &messages, initial, rng.next_u64())
        })
        .collect::<Result<_>>()?;

    let states = codebooks.budget.states();
    let mut mean_occupancy = vec![0.0; states];
    let mut events: Vec<EventCounts> = codebooks
        .books
        .iter()
        .map(|b| EventCounts {
            node: b.node,
            level: b.level,
            e1: 0,
            e2: 0,
        })
        .collect();
    let total = codebooks.budget.total() as usize;
    let mut failures = 0;
    let mut max_occupancy_deviation: f64 = 0.0;
    for o in &outcomes {
        failures += o.failed() as usize;
        for (x, pi) in o
            .empirical_occupancy
            .iter()
            .zip(codebooks.stationary.probs())
        {
            max_occupancy_deviation = max_occupancy_deviation.max((x - pi).abs());
        }
        for (m, x) in mean_occupancy.iter_mut().zip(&o.empirical_occupancy) {
            *m += x / trials as f64;
        }
        for &(node, level) in &o.e1_events {
            events[node.index() * total + level as usize - 1].e1 += 1;
        }
        for &(node, level) in &o.e2_events {
            events[node.index() * total + level as usize - 1].e2 += 1;
        }
    }
    Ok(MonteCarloReport {
        trials,
        failures,
        error_rate: failures as f64 / trials as f64,
        mean_occupancy,
        max_occupancy_deviation,
        events,
        sum_rate: codebooks.sum_rate(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget(u: u32) -> EnergyBudget {
        EnergyBudget::new(u).unwrap()
    }

    fn params(n: usize, epsilon: f64, delta: f64) -> CodingParams {
        CodingParams {
            blocklength: n,
            epsilon,
            delta,
        }
    }

    #[test]
    fn single_unit_book_sizes() {
        let p = MarginalPolicy::uniform(budget(1), 0.5).unwrap();
        let set = build_codebooks(budget(1), &p, params(10_000, 0.02, 0.05), 1).unwrap();
        for node in [Node::One, Node::Two] {
            let b = set.book(node, 1);
            assert_eq!(b.length, 4800);
            assert_eq!(b.message_bits, 4560);
        }
        assert_eq!(set.book(Node::One, 1).state, 1);
        assert_eq!(set.book(Node::Two, 1).state, 0);
        assert!((set.sum_rate() - 0.912).abs() < 1e-12);
    }

    #[test]
    fn rate_margin_can_empty_a_book() {
        let p = MarginalPolicy::uniform(budget(1), 0.5).unwrap();
        let set = build_codebooks(budget(1), &p, params(1000, 0.02, 1.0), 1).unwrap();
        assert!(set.books().iter().all(|b| b.message_bits == 0));
        let set = build_codebooks(budget(1), &p, params(1000, 0.02, 1.5), 1).unwrap();
        assert_eq!(set.sum_rate(), 0.0);
    }

    #[test]
    fn margin_exhausting_a_state_is_an_error() {
        let p = MarginalPolicy::uniform(budget(1), 0.5).unwrap();
        let err = build_codebooks(budget(1), &p, params(1000, 0.5, 0.0), 1).unwrap_err();
        assert!(matches!(err, Error::MarginExhausted { .. }));
        assert!(build_codebooks(budget(1), &p, params(0, 0.02, 0.0), 1).is_err());
        assert!(build_codebooks(budget(2), &p, params(10, 0.02, 0.0), 1).is_err());
    }

    #[test]
    fn same_seed_same_books() {
        let p = MarginalPolicy::uniform(budget(2), 0.4).unwrap();
        let a = build_codebooks(budget(2), &p, params(2000, 0.02, 0.05), 9).unwrap();
        let b = build_codebooks(budget(2), &p, params(2000, 0.02, 0.05), 9).unwrap();
        assert_eq!(a, b);
        let m = Message::random(
            a.book(Node::One, 1).message_bits,
            &mut ChaCha8Rng::seed_from_u64(3),
        );
        assert_eq!(
            a.book(Node::One, 1).codeword(&m),
            b.book(Node::One, 1).codeword(&m)
        );
        let c = a.reseeded(10);
        assert_ne!(
            a.book(Node::One, 1).codeword(&m),
            c.book(Node::One, 1).codeword(&m)
        );
    }

    #[test]
    fn messages_respect_bit_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for bits in [0, 1, 63, 64, 65, 130] {
            let m = Message::random(bits, &mut rng);
            assert_eq!(m.limbs().len() as u64, bits.div_ceil(64));
            if bits % 64 != 0 {
                assert_eq!(m.limbs().last().unwrap() >> (bits % 64), 0);
            }
        }
        assert!(Message::from_index(3, 8).is_err());
        assert!(Message::from_index(3, 7).is_ok());
    }

    #[test]
    fn codeword_density_follows_p() {
        let p = MarginalPolicy::uniform(budget(1), 0.2).unwrap();
        let set = build_codebooks(budget(1), &p, params(100_000, 0.02, 0.05), 3).unwrap();
        let b = set.book(Node::One, 1);
        let w = b.codeword(&Message::zero(b.message_bits));
        let ones = w.iter().map(|&c| c as f64).sum::<f64>() / w.len() as f64;
        assert!((ones - 0.2).abs() < 0.01, "{ones}");
    }

    #[test]
    fn collision_probability_limits() {
        let mut b = Codebook {
            node: Node::One,
            level: 1,
            state: 1,
            length: 4,
            message_bits: 1,
            p: 0.5,
            seed: 0,
        };
        // One other codeword, equal with probability 2^-4.
        assert!((b.collision_probability(&[0, 1, 0, 1]) - 1.0 / 16.0).abs() < 1e-15);
        b.message_bits = 0;
        assert_eq!(b.collision_probability(&[0, 1, 0, 1]), 0.0);
        b.message_bits = 4000;
        b.length = 100;
        assert!(b.collision_probability(&[0; 100]) > 1.0 - 1e-12);
        b.message_bits = 10;
        assert!(b.collision_probability(&[0; 100]) < 1e-25);
    }

    #[test]
    fn trivial_books_always_decode() {
        let p = MarginalPolicy::uniform(budget(2), 0.5).unwrap();
        let set = build_codebooks(budget(2), &p, params(200, 0.02, 1.0), 4).unwrap();
        let r = monte_carlo_error(&set, 20, None, 5).unwrap();
        assert_eq!(r.error_rate, 0.0);
        assert!(r.events.iter().all(|e| e.e2 == 0));
    }

    #[test]
    fn trial_is_deterministic_and_feasible() {
        let p = MarginalPolicy::uniform(budget(2), 0.5).unwrap();
        let set = build_codebooks(budget(2), &p, params(5000, 0.02, 0.1), 4).unwrap();
        let msgs = set.random_messages(&mut ChaCha8Rng::seed_from_u64(1));
        let (a, ta) = run_trial_with_transcript(&set, &msgs, 1, 2).unwrap();
        let (b, tb) = run_trial_with_transcript(&set, &msgs, 1, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        ta.validate().unwrap();
        assert_eq!(ta.len(), 5000);
        assert_eq!(ta.initial_state(), 1);
        assert!(run_trial(&set, &msgs, 3, 2).is_err());
        let sum: f64 = a.empirical_occupancy.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn failure_falls_back_to_zero_message() {
        // Node 1 practically never releases the unit, so state 0, where node
        // 2's book is read, is not visited in a block started at state 1.
        let p = MarginalPolicy::new(budget(1), vec![0.0, 1e-6], vec![0.0, 0.5]).unwrap();
        let set = build_codebooks(budget(1), &p, params(100, 0.0, 0.0), 4).unwrap();
        let msgs = set.random_messages(&mut ChaCha8Rng::seed_from_u64(1));
        let o = run_trial(&set, &msgs, 1, 0).unwrap();
        assert_eq!(o.e1_events, vec![(Node::Two, 1)]);
        assert_eq!(o.empirical_occupancy, vec![0.0, 1.0]);
        let book = set.book(Node::Two, 1);
        assert_eq!(
            o.estimates.get(Node::Two, 1),
            &Message::zero(book.message_bits)
        );
        assert_eq!(
            o.decoded_ok[1],
            msgs.get(Node::Two, 1) == &Message::zero(book.message_bits)
        );
        assert!(o.decoded_ok[0]);
    }

    #[test]
    fn zero_trials_rejected() {
        let p = MarginalPolicy::uniform(budget(1), 0.5).unwrap();
        let set = build_codebooks(budget(1), &p, params(100, 0.02, 0.1), 4).unwrap();
        assert!(monte_carlo_error(&set, 0, None, 0).is_err());
        let one = monte_carlo_error(&set, 1, None, 0).unwrap();
        assert!(one.error_rate == 0.0 || one.error_rate == 1.0);
    }

    #[test]
    fn rate_ladder_approaches_the_inner_bound() {
        let p = MarginalPolicy::uniform(budget(2), 0.5).unwrap();
        let bound = crate::inner::rates_for_policy(&p).unwrap().sum();
        let ladder = [
            (1_000, 0.1, 0.3),
            (10_000, 0.05, 0.15),
            (100_000, 0.02, 0.05),
            (1_000_000, 0.005, 0.01),
        ];
        let mut last = 0.0;
        for (i, (n, eps, delta)) in ladder.into_iter().enumerate() {
            let set = build_codebooks(budget(2), &p, params(n, eps, delta), i as u64).unwrap();
            let rate = set.sum_rate();
            assert!(
                rate > last && rate < bound,
                "{n}: {rate} after {last}, bound {bound}"
            );
            let r = monte_carlo_error(&set, 3, None, i as u64).unwrap();
            assert_eq!(r.error_rate, 0.0, "{n}");
            last = rate;
        }
        assert!(bound - last < 0.05, "{last} vs {bound}");
    }

    /// Small books where both collision checks apply: the sampled event
    /// frequency must match exhaustive search.
    #[test]
    fn sampled_collisions_match_enumeration() {
        let p = MarginalPolicy::uniform(budget(1), 0.5).unwrap();
        // Length ceil(20 * 0.3) = 6 and 6 message bits: 64 words of 6 bits.
        let set = build_codebooks(budget(1), &p, params(20, 0.2, 0.0), 1).unwrap();
        assert_eq!(
            (
                set.book(Node::One, 1).length,
                set.book(Node::One, 1).message_bits
            ),
            (6, 6)
        );
        let rate = |check| {
            let r =
                monte_carlo_error(&set.clone().with_collision_check(check), 3000, None, 2).unwrap();
            r.events.iter().map(|e| e.e2).sum::<usize>() as f64 / (2.0 * 3000.0)
        };
        let exact = rate(CollisionCheck::Enumerate);
        let sampled = rate(CollisionCheck::Sampled);
        // 1 - (1 - 2^-6)^63 is about 0.63 for an average codeword.
        assert!((exact - 0.63).abs() < 0.05, "{exact}");
        assert!((exact - sampled).abs() < 0.04, "{exact} vs {sampled}");
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]
        #[test]
        fn clean_trials_decode(
            u in 1u32..=4,
            free in proptest::collection::vec(0.1f64..0.9, 8),
            n in 200usize..3000,
            eps in 0.0f64..0.05,
            delta in -0.3f64..0.3,
            seed in 0u64..1000,
        ) {
            let p = MarginalPolicy::from_free(budget(u), &free[..2 * u as usize]).unwrap();
            let Ok(set) = build_codebooks(budget(u), &p, params(n, eps, delta), seed) else {
                return Ok(());
            };
            let msgs = set.random_messages(&mut ChaCha8Rng::seed_from_u64(seed));
            let initial = (seed % (u as u64 + 1)) as usize;
            let (o, t) = run_trial_with_transcript(&set, &msgs, initial, seed).unwrap();
            t.validate().unwrap();
            proptest::prop_assert_eq!(t.len(), n);
            if o.e1_events.is_empty() && o.e2_events.is_empty() {
                proptest::prop_assert!(o.decoded_ok[0] && o.decoded_ok[1]);
                proptest::prop_assert_eq!(&o.estimates, &msgs);
            }
            for (j, node) in [Node::One, Node::Two].into_iter().enumerate() {
                let clean = !o.e1_events.iter().chain(&o.e2_events).any(|&(m, _)| m == node);
                if clean {
                    proptest::prop_assert!(o.decoded_ok[j]);
                }
            }
        }
    }
}
