//! Admissible switching signals realized from a certificate.
//!
//! A signal is a list of blocks `(index, dwell)`. The non-periodic schedule
//! emits `Seq1`, then `s` copies of `Seq2` for `s = 1, 2, 3, …`, each time
//! preceded by another `Seq1`. The periodic schedule repeats one sequence.

use serde::Serialize;

use crate::certificate::{Certificate, PathQuad};
use crate::error::{Error, Result};
use crate::system::{DwellBounds, Path, SwitchGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Block {
    pub index: usize,
    pub dwell: u32,
}

impl Block {
    pub fn new(index: usize, dwell: u32) -> Self {
        Self { index, dwell }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Nonperiodic,
    Periodic,
}

/// Subsystem sequence `j, interior(j → i), i, interior(i → j)` with dwell
/// `q` on the first block, `p` on the block after the `j → i` interior and
/// `delta` elsewhere.
pub fn sequence(p: u32, q: u32, delta: u32, j_to_i: &Path, i_to_j: &Path) -> Vec<Block> {
    let mut out = vec![Block::new(j_to_i.source(), q)];
    out.extend(j_to_i.interior().iter().map(|&w| Block::new(w, delta)));
    out.push(Block::new(i_to_j.source(), p));
    out.extend(i_to_j.interior().iter().map(|&w| Block::new(w, delta)));
    out
}

/// Descriptor of an infinite block stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SignalGenerator {
    pub kind: SignalKind,
    pub seq1: Vec<Block>,
    /// Equal to `seq1` for periodic signals.
    pub seq2: Vec<Block>,
}

impl SignalGenerator {
    pub fn nonperiodic(p: u32, q: u32, delta: u32, paths: &PathQuad) -> Self {
        Self {
            kind: SignalKind::Nonperiodic,
            seq1: sequence(p, q, delta, &paths.j_to_i_1, &paths.i_to_j_1),
            seq2: sequence(p, q, delta, &paths.j_to_i_2, &paths.i_to_j_2),
        }
    }

    pub fn periodic(p: u32, q: u32, delta: u32, j_to_i: &Path, i_to_j: &Path) -> Self {
        let seq = sequence(p, q, delta, j_to_i, i_to_j);
        Self {
            kind: SignalKind::Periodic,
            seq1: seq.clone(),
            seq2: seq,
        }
    }

    pub fn for_certificate(cert: &Certificate, delta: u32) -> Self {
        let c = &cert.combination;
        if cert.kind.is_periodic() {
            Self::periodic(c.p, c.q, delta, &cert.paths.j_to_i_1, &cert.paths.i_to_j_1)
        } else {
            Self::nonperiodic(c.p, c.q, delta, &cert.paths)
        }
    }

    /// Shortest horizon that exhibits the construction: one `Seq1` + `Seq2`
    /// pair, or one period.
    pub fn minimum_horizon(&self) -> u64 {
        let span = |s: &[Block]| s.iter().map(|b| u64::from(b.dwell)).sum::<u64>();
        match self.kind {
            SignalKind::Nonperiodic => span(&self.seq1) + span(&self.seq2),
            SignalKind::Periodic => span(&self.seq1),
        }
    }

    pub fn blocks(&self) -> Blocks<'_> {
        Blocks {
            generator: self,
            in_seq2: false,
            copies_left: 0,
            round: 0,
            pos: 0,
        }
    }
}

/// Lazy infinite block iterator of a [`SignalGenerator`].
#[derive(Debug, Clone)]
pub struct Blocks<'a> {
    generator: &'a SignalGenerator,
    in_seq2: bool,
    copies_left: u64,
    round: u64,
    pos: usize,
}

impl Iterator for Blocks<'_> {
    type Item = Block;

    fn next(&mut self) -> Option<Block> {
        let g = self.generator;
        if g.kind == SignalKind::Periodic {
            let b = g.seq1[self.pos];
            self.pos = (self.pos + 1) % g.seq1.len();
            return Some(b);
        }
        let seq = if self.in_seq2 { &g.seq2 } else { &g.seq1 };
        let b = seq[self.pos];
        self.pos += 1;
        if self.pos == seq.len() {
            self.pos = 0;
            if self.in_seq2 {
                self.copies_left -= 1;
                self.in_seq2 = self.copies_left > 0;
            } else {
                self.round += 1;
                self.copies_left = self.round;
                self.in_seq2 = true;
            }
        }
        Some(b)
    }
}

/// A finite switching signal covering steps `[0, horizon)`. The last block
/// may extend past the horizon; blocks are never cut.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchingSignal {
    blocks: Vec<Block>,
    starts: Vec<u64>,
    horizon: u64,
    generator: Option<SignalGenerator>,
}

impl SwitchingSignal {
    /// Blocks as given; the horizon is their total dwell.
    pub fn from_blocks(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidInput(
                "a signal needs at least one block".into(),
            ));
        }
        if let Some(b) = blocks.iter().find(|b| b.dwell == 0) {
            return Err(Error::InvalidInput(format!(
                "block on subsystem {} has zero dwell",
                b.index
            )));
        }
        let mut starts = Vec::with_capacity(blocks.len());
        let mut t = 0u64;
        for b in &blocks {
            starts.push(t);
            t += u64::from(b.dwell);
        }
        Ok(Self {
            blocks,
            starts,
            horizon: t,
            generator: None,
        })
    }

    /// Whole blocks from `generator` until `horizon` steps are covered.
    pub fn materialize(generator: SignalGenerator, horizon: u64) -> Result<Self> {
        let min = generator.minimum_horizon();
        if horizon < min {
            return Err(Error::InvalidInput(format!(
                "horizon {horizon} is shorter than one schedule unit of {min} steps"
            )));
        }
        let mut blocks = Vec::new();
        let mut starts = Vec::new();
        let mut t = 0u64;
        for b in generator.blocks() {
            if t >= horizon {
                break;
            }
            starts.push(t);
            t += u64::from(b.dwell);
            blocks.push(b);
        }
        Ok(Self {
            blocks,
            starts,
            horizon,
            generator: Some(generator),
        })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Switching instants `τ_h`, one per block.
    pub fn starts(&self) -> &[u64] {
        &self.starts
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn generator(&self) -> Option<&SignalGenerator> {
        self.generator.as_ref()
    }

    /// Active subsystem at every step `0..horizon`.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks
            .iter()
            .flat_map(|b| std::iter::repeat_n(b.index, b.dwell as usize))
            .take(self.horizon as usize)
    }
}

pub fn synthesize_nonperiodic(
    cert: &Certificate,
    delta: u32,
    horizon: u64,
) -> Result<SwitchingSignal> {
    if cert.kind.is_periodic() {
        return Err(Error::InvalidInput(format!(
            "{} certificates use the periodic schedule",
            cert.kind
        )));
    }
    let c = &cert.combination;
    SwitchingSignal::materialize(
        SignalGenerator::nonperiodic(c.p, c.q, delta, &cert.paths),
        horizon,
    )
}

pub fn synthesize_periodic(
    cert: &Certificate,
    delta: u32,
    horizon: u64,
) -> Result<SwitchingSignal> {
    if !cert.kind.is_periodic() {
        return Err(Error::InvalidInput(format!(
            "{} certificates use the non-periodic schedule",
            cert.kind
        )));
    }
    let c = &cert.combination;
    let g = SignalGenerator::periodic(c.p, c.q, delta, &cert.paths.j_to_i_1, &cert.paths.i_to_j_1);
    SwitchingSignal::materialize(g, horizon)
}

/// The schedule matching the certificate's kind.
pub fn synthesize(cert: &Certificate, delta: u32, horizon: u64) -> Result<SwitchingSignal> {
    SwitchingSignal::materialize(SignalGenerator::for_certificate(cert, delta), horizon)
}

pub fn signal_at(signal: &SwitchingSignal, t: u64) -> Result<usize> {
    if t >= signal.horizon {
        return Err(Error::InvalidInput(format!(
            "step {t} outside [0, {})",
            signal.horizon
        )));
    }
    let h = signal.starts.partition_point(|&s| s <= t) - 1;
    Ok(signal.blocks[h].index)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalViolation {
    Dwell { tau: u64, index: usize, dwell: u32 },
    Switch { tau: u64, from: usize, to: usize },
}

/// All admissibility violations; empty iff every switch is an edge of
/// `graph` and every dwell lies in `bounds`.
pub fn check_admissible(
    signal: &SwitchingSignal,
    graph: &SwitchGraph,
    bounds: &DwellBounds,
) -> Vec<SignalViolation> {
    let mut out = Vec::new();
    for (h, b) in signal.blocks.iter().enumerate() {
        let tau = signal.starts[h];
        if !bounds.contains(b.dwell) {
            out.push(SignalViolation::Dwell {
                tau,
                index: b.index,
                dwell: b.dwell,
            });
        }
        if let Some(next) = signal.blocks.get(h + 1) {
            if !graph.has_edge(b.index, next.index) {
                out.push(SignalViolation::Switch {
                    tau: signal.starts[h + 1],
                    from: b.index,
                    to: next.index,
                });
            }
        }
    }
    out
}

pub fn is_admissible(signal: &SwitchingSignal, graph: &SwitchGraph, bounds: &DwellBounds) -> bool {
    check_admissible(signal, graph, bounds).is_empty()
}
