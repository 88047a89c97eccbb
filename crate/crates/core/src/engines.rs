//! Three interchangeable step engines over [`World`]:
//!
//! * [`ReferenceEngine`] counts neighbours cell by cell over a byte array
//!   with a one-cell dead halo, so the inner loop has no boundary tests.
//! * [`BitSlicedEngine`] updates 64 cells per machine word with boolean
//!   adder chains.
//! * [`CircuitEngine`] clocks an elaborated gate-level netlist.
//!
//! All engines double-buffer and never allocate inside [`Engine::step`].

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::circuit::{self, CircuitError, Netlist};
use crate::grid::{Word, World};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("({x}, {y}) is outside the {width}x{height} world")]
    OutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("unknown engine {0:?} (expected reference, bitsliced or circuit)")]
    UnknownKind(String),
}

/// Live-neighbour count of a cell, always in `0..=8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NeighborCount(u8);

impl NeighborCount {
    pub fn new(value: u8) -> Option<Self> {
        (value <= 8).then_some(NeighborCount(value))
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

/// Survive with two or three neighbours, birth with exactly three.
#[inline]
pub fn next_cell_state(alive: bool, cnt: NeighborCount) -> bool {
    (alive && cnt.0 == 2) || cnt.0 == 3
}

pub fn neighbor_count(world: &World, x: usize, y: usize) -> Result<NeighborCount, EngineError> {
    if x >= world.width() || y >= world.height() {
        return Err(EngineError::OutOfBounds {
            x,
            y,
            width: world.width(),
            height: world.height(),
        });
    }
    let (x, y) = (x as isize, y as isize);
    let mut cnt = 0;
    for dy in -1..=1 {
        for dx in -1..=1 {
            if (dx, dy) != (0, 0) && world.get(x + dx, y + dy) {
                cnt += 1;
            }
        }
    }
    Ok(NeighborCount(cnt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EngineKind {
    Reference,
    BitSliced,
    Circuit,
}

impl EngineKind {
    pub const ALL: [EngineKind; 3] = [EngineKind::Reference, EngineKind::BitSliced, EngineKind::Circuit];

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Reference => "reference",
            EngineKind::BitSliced => "bitsliced",
            EngineKind::Circuit => "circuit",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "reference" | "ref" => Ok(EngineKind::Reference),
            "bitsliced" | "bit-sliced" => Ok(EngineKind::BitSliced),
            "circuit" => Ok(EngineKind::Circuit),
            _ => Err(EngineError::UnknownKind(s.to_string())),
        }
    }
}

/// A stepper holding the current world.
pub trait Engine {
    fn kind(&self) -> EngineKind;

    /// Advances one generation.
    fn step(&mut self);

    fn advance(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }

    fn generation(&self) -> u64;

    /// Snapshot of the current world.
    fn world(&self) -> World;
}

/// Builds an engine of `kind` loaded with `world`.
pub fn engine_for(kind: EngineKind, world: &World) -> Box<dyn Engine> {
    match kind {
        EngineKind::Reference => Box::new(ReferenceEngine::new(world)),
        EngineKind::BitSliced => Box::new(BitSlicedEngine::new(world)),
        EngineKind::Circuit => Box::new(CircuitEngine::new(world)),
    }
}

/// `steps` generations of `world` under `kind`.
pub fn run(kind: EngineKind, world: &World, steps: u64) -> World {
    let mut engine = engine_for(kind, world);
    engine.advance(steps);
    engine.world()
}

/// One generation with the reference engine.
pub fn step_reference(world: &World) -> World {
    let mut e = ReferenceEngine::new(world);
    e.step();
    e.world()
}

/// One generation with the bit-sliced engine.
pub fn step_bitsliced(world: &World) -> World {
    let mut e = BitSlicedEngine::new(world);
    e.step();
    e.world()
}

/// Loads `world` into `netlist`, applies one clock edge and reads it back.
pub fn step_circuit(netlist: &mut Netlist, world: &World) -> Result<World, EngineError> {
    netlist.load(world)?;
    netlist.tick();
    let mut next = netlist.read();
    next.set_generation(world.generation() + 1);
    Ok(next)
}

/// Scalar engine over a `(width + 2) × (height + 2)` byte array whose outer
/// frame stays 0.
#[derive(Debug, Clone)]
pub struct ReferenceEngine {
    width: usize,
    height: usize,
    stride: usize,
    curr: Vec<u8>,
    next: Vec<u8>,
    generation: u64,
}

impl ReferenceEngine {
    pub fn new(world: &World) -> Self {
        let (width, height) = (world.width(), world.height());
        let stride = width + 2;
        let mut curr = vec![0u8; stride * (height + 2)];
        for y in 0..height {
            for x in 0..width {
                curr[(y + 1) * stride + x + 1] = world.is_alive(x, y) as u8;
            }
        }
        let next = vec![0u8; curr.len()];
        ReferenceEngine {
            width,
            height,
            stride,
            curr,
            next,
            generation: world.generation(),
        }
    }
}

impl Engine for ReferenceEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::Reference
    }

    fn step(&mut self) {
        let s = self.stride;
        let curr = &self.curr;
        for i in 1..=self.height {
            let (up, mid, down) = ((i - 1) * s, i * s, (i + 1) * s);
            for j in 1..=self.width {
                let cnt = curr[up + j - 1]
                    + curr[up + j]
                    + curr[up + j + 1]
                    + curr[down + j - 1]
                    + curr[down + j]
                    + curr[down + j + 1]
                    + curr[mid + j - 1]
                    + curr[mid + j + 1];
                // Non-short-circuit operators: no data-dependent branch.
                self.next[mid + j] = ((curr[mid + j] == 1) & (cnt == 2) | (cnt == 3)) as u8;
            }
        }
        std::mem::swap(&mut self.curr, &mut self.next);
        self.generation += 1;
    }

    fn generation(&self) -> u64 {
        self.generation
    }

    fn world(&self) -> World {
        let mut w = World::from_fn(self.width, self.height, |x, y| {
            self.curr[(y + 1) * self.stride + x + 1] == 1
        })
        .expect("engine dimensions are positive");
        w.set_generation(self.generation);
        w
    }
}

/// Word-parallel engine working directly on the packed rows of a [`World`].
#[derive(Debug, Clone)]
pub struct BitSlicedEngine {
    curr: World,
    next: World,
    /// Rolling per-word column sums `a + b + c` of the three rows around the
    /// row being computed, as (low bit, high bit).
    col_lo: Vec<Word>,
    col_hi: Vec<Word>,
}

impl BitSlicedEngine {
    pub fn new(world: &World) -> Self {
        let words = world.words_per_row();
        BitSlicedEngine {
            curr: world.clone(),
            next: world.clone(),
            col_lo: vec![0; words],
            col_hi: vec![0; words],
        }
    }
}

/// Cells shifted one column east within a row: bit `x` receives the bit of
/// cell `x - 1`, carried across word boundaries.
#[inline(always)]
fn from_west(cur: Word, prev: Word) -> Word {
    (cur << 1) | (prev >> 63)
}

/// Bit `x` receives the bit of cell `x + 1`.
#[inline(always)]
fn from_east(cur: Word, next: Word) -> Word {
    (cur >> 1) | (next << 63)
}

/// Next state of 64 cells from the three 2-bit column sums around them.
///
/// `w`/`e` are the full column sums (three rows) shifted in from the west and
/// east neighbours; `c` is the column sum of the cell's own column without the
/// cell itself. Their total is the 4-bit neighbour count.
#[inline(always)]
fn rule_word(alive: Word, w: (Word, Word), e: (Word, Word), c: (Word, Word)) -> Word {
    // Weight 1.
    let t = w.0 ^ e.0;
    let s0 = t ^ c.0;
    let k0 = (w.0 & e.0) | (t & c.0);
    // Weight 2: w.1 + e.1 + c.1 + k0.
    let t2 = w.1 ^ e.1;
    let p = t2 ^ c.1;
    let k1 = (w.1 & e.1) | (t2 & c.1);
    let s1 = p ^ k0;
    let k2 = p & k0;
    // Weight 4 and 8.
    let s2 = k1 ^ k2;
    let s3 = k1 & k2;
    // cnt == 3, or cnt == 2 and alive.
    !(s2 | s3) & s1 & (s0 | alive)
}

impl Engine for BitSlicedEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::BitSliced
    }

    fn step(&mut self) {
        let height = self.curr.height();
        let words = self.curr.words_per_row();
        let mask = self.curr.last_word_mask();
        let src = self.curr.words();
        let dst = self.next.words_mut();
        let zero_row = [0 as Word; 0];

        for y in 0..height {
            let row = &src[y * words..(y + 1) * words];
            let up = if y > 0 { &src[(y - 1) * words..y * words] } else { &zero_row[..] };
            let down = if y + 1 < height {
                &src[(y + 1) * words..(y + 2) * words]
            } else {
                &zero_row[..]
            };
            let word_at = |r: &[Word], i: usize| -> Word { r.get(i).copied().unwrap_or(0) };

            // Full column sums (up + row + down) and the vertical pair sums
            // (up + down) for each word of this row.
            for i in 0..words {
                let (a, b, c) = (word_at(up, i), row[i], word_at(down, i));
                let ab = a ^ b;
                self.col_lo[i] = ab ^ c;
                self.col_hi[i] = (a & b) | (ab & c);
            }

            let out = &mut dst[y * words..(y + 1) * words];
            for i in 0..words {
                let (lo, hi) = (self.col_lo[i], self.col_hi[i]);
                let (plo, phi) = if i > 0 { (self.col_lo[i - 1], self.col_hi[i - 1]) } else { (0, 0) };
                let (nlo, nhi) = if i + 1 < words {
                    (self.col_lo[i + 1], self.col_hi[i + 1])
                } else {
                    (0, 0)
                };
                let west = (from_west(lo, plo), from_west(hi, phi));
                let east = (from_east(lo, nlo), from_east(hi, nhi));
                let (a, c) = (word_at(up, i), word_at(down, i));
                let centre = (a ^ c, a & c);
                out[i] = rule_word(row[i], west, east, centre);
            }
            out[words - 1] &= mask;
        }

        std::mem::swap(&mut self.curr, &mut self.next);
        let generation = self.next.generation() + 1;
        self.curr.set_generation(generation);
    }

    fn generation(&self) -> u64 {
        self.curr.generation()
    }

    fn world(&self) -> World {
        self.curr.clone()
    }
}

/// Adapter that clocks a netlist elaborated for the world's dimensions.
#[derive(Debug, Clone)]
pub struct CircuitEngine {
    netlist: Netlist,
    generation: u64,
}

impl CircuitEngine {
    pub fn new(world: &World) -> Self {
        let netlist = circuit::elaborate(world.width(), world.height(), Some(world))
            .expect("dimensions come from a valid world");
        CircuitEngine {
            netlist,
            generation: world.generation(),
        }
    }

    pub fn netlist(&self) -> &Netlist {
        &self.netlist
    }
}

impl Engine for CircuitEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::Circuit
    }

    fn step(&mut self) {
        self.netlist.tick();
        self.generation += 1;
    }

    fn generation(&self) -> u64 {
        self.generation
    }

    fn world(&self) -> World {
        let mut w = self.netlist.read();
        w.set_generation(self.generation);
        w
    }
}
