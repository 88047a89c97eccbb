//! Bit-packed worlds, seeded random generation and the plaintext pattern
//! format (`.` dead, `O` alive).
//!
//! Coordinates are `(x, y)` with `x` growing to the right and `y` growing
//! downwards; the origin is the top-left cell, which is also the first
//! character of the first line of a pattern. Everything outside the
//! rectangle is permanently dead.

use std::fmt;

use thiserror::Error;

/// Backing word of a row.
pub type Word = u64;

/// Cells per backing word.
pub const WORD_BITS: usize = Word::BITS as usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("world dimensions must be positive, got {width}x{height}")]
    ZeroSize { width: usize, height: usize },
    #[error("density {0} is outside [0, 1]")]
    BadDensity(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("pattern is empty")]
    Empty,
    #[error("line {line}: expected {expected} cells, found {found}")]
    RaggedLines {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: illegal character {ch:?}")]
    IllegalChar { line: usize, column: usize, ch: char },
}

impl PatternError {
    /// 1-based line the error was found on, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            PatternError::Empty => None,
            PatternError::RaggedLines { line, .. } | PatternError::IllegalChar { line, .. } => {
                Some(*line)
            }
        }
    }
}

/// A finite rectangular world with one bit per cell.
///
/// Rows are stored contiguously, each padded up to a whole number of
/// [`Word`]s. Bit `x % 64` of word `x / 64` holds cell `x`. Padding bits are
/// kept at zero after every mutation so that equality and population are
/// plain word operations.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct World {
    width: usize,
    height: usize,
    words_per_row: usize,
    cells: Vec<Word>,
    generation: u64,
}

impl World {
    /// All-dead world.
    pub fn new(width: usize, height: usize) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::ZeroSize { width, height });
        }
        let words_per_row = width.div_ceil(WORD_BITS);
        Ok(World {
            width,
            height,
            words_per_row,
            cells: vec![0; words_per_row * height],
            generation: 0,
        })
    }

    /// Builds a world from a predicate over `(x, y)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut alive: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self, GridError> {
        let mut world = World::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                if alive(x, y) {
                    world.set(x, y, true);
                }
            }
        }
        Ok(world)
    }

    /// Builds a world with the listed `(x, y)` cells alive. Coordinates
    /// outside the world are ignored.
    pub fn with_live_cells(
        width: usize,
        height: usize,
        live: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GridError> {
        let mut world = World::new(width, height)?;
        for (x, y) in live {
            if x < width && y < height {
                world.set(x, y, true);
            }
        }
        Ok(world)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn set_generation(&mut self, generation: u64) {
        self.generation = generation;
    }

    /// Cell state; anything outside the rectangle reads as dead.
    #[inline]
    pub fn get(&self, x: isize, y: isize) -> bool {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return false;
        }
        self.is_alive(x as usize, y as usize)
    }

    /// Cell state for in-range coordinates.
    #[inline]
    pub fn is_alive(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        let word = self.cells[y * self.words_per_row + x / WORD_BITS];
        (word >> (x % WORD_BITS)) & 1 == 1
    }

    /// # Panics
    ///
    /// Panics if `(x, y)` lies outside the world.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, alive: bool) {
        assert!(
            x < self.width && y < self.height,
            "({x}, {y}) outside {}x{} world",
            self.width,
            self.height
        );
        let word = &mut self.cells[y * self.words_per_row + x / WORD_BITS];
        let mask = 1 << (x % WORD_BITS);
        if alive {
            *word |= mask;
        } else {
            *word &= !mask;
        }
    }

    /// Number of live cells.
    pub fn population(&self) -> usize {
        self.cells.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// `true` when both worlds have the same dimensions and cell states,
    /// regardless of generation.
    pub fn same_cells(&self, other: &World) -> bool {
        self.width == other.width && self.height == other.height && self.cells == other.cells
    }

    /// Live cells in row-major order.
    pub fn live_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height)
            .flat_map(move |y| (0..self.width).map(move |x| (x, y)))
            .filter(|&(x, y)| self.is_alive(x, y))
    }

    /// Packed words of row `y`.
    #[inline]
    pub fn row(&self, y: usize) -> &[Word] {
        let start = y * self.words_per_row;
        &self.cells[start..start + self.words_per_row]
    }

    /// All packed words, row after row.
    pub fn words(&self) -> &[Word] {
        &self.cells
    }

    /// Mutable access to the packed words. Callers must leave padding bits
    /// cleared, see [`World::last_word_mask`].
    pub(crate) fn words_mut(&mut self) -> &mut [Word] {
        &mut self.cells
    }

    /// Mask of the valid bits in the last word of each row.
    #[inline]
    pub fn last_word_mask(&self) -> Word {
        match self.width % WORD_BITS {
            0 => Word::MAX,
            rem => (1 << rem) - 1,
        }
    }

    /// Returns the `width`×`height` window whose top-left corner is
    /// `(left, top)`; cells beyond this world read as dead.
    pub fn crop(&self, left: isize, top: isize, width: usize, height: usize) -> Result<World, GridError> {
        let mut out = World::from_fn(width, height, |x, y| {
            self.get(left + x as isize, top + y as isize)
        })?;
        out.generation = self.generation;
        Ok(out)
    }
}

impl fmt::Debug for World {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "World {}x{} gen {} pop {}",
            self.width,
            self.height,
            self.generation,
            self.population()
        )?;
        f.write_str(&serialize_pattern(self))
    }
}

impl fmt::Display for World {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_pattern(self))
    }
}

/// Parses plaintext pattern text. A single trailing newline is allowed,
/// `\r\n` terminators are accepted.
pub fn parse_pattern(text: &str) -> Result<World, PatternError> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let body = body.strip_suffix('\r').unwrap_or(body);
    if body.is_empty() {
        return Err(PatternError::Empty);
    }
    let lines: Vec<&str> = body
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect();

    let width = lines[0].chars().count();
    for (idx, line) in lines.iter().enumerate() {
        let mut found = 0;
        for (column, ch) in line.chars().enumerate() {
            if ch != '.' && ch != 'O' {
                return Err(PatternError::IllegalChar {
                    line: idx + 1,
                    column: column + 1,
                    ch,
                });
            }
            found += 1;
        }
        if found != width {
            return Err(PatternError::RaggedLines {
                line: idx + 1,
                expected: width,
                found,
            });
        }
    }
    if width == 0 {
        return Err(PatternError::Empty);
    }

    let mut world = World::new(width, lines.len()).expect("nonzero dimensions");
    for (y, line) in lines.iter().enumerate() {
        for (x, ch) in line.chars().enumerate() {
            if ch == 'O' {
                world.set(x, y, true);
            }
        }
    }
    Ok(world)
}

/// Renders a world as plaintext, one `\n`-terminated line per row.
pub fn serialize_pattern(world: &World) -> String {
    let mut out = String::with_capacity((world.width + 1) * world.height);
    for y in 0..world.height {
        for x in 0..world.width {
            out.push(if world.is_alive(x, y) { 'O' } else { '.' });
        }
        out.push('\n');
    }
    out
}

/// SplitMix64: a 64-bit counter advanced by the golden-ratio increment and
/// passed through a fixed mixing function. The output sequence depends only
/// on the seed, so worlds are reproducible on every platform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

impl Rng {
    const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(Self::GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[0, bound)`. Uses rejection so there is no modulo bias.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    /// Independent stream derived from this one.
    pub fn split(&mut self) -> Rng {
        Rng::new(self.next_u64())
    }
}

/// Default live-cell fraction of generated worlds.
pub const DEFAULT_DENSITY: f64 = 0.5;

/// Random world in which each cell is alive independently with probability
/// `density`. Cells are drawn in row-major order, one generator output per
/// cell.
pub fn random_world(width: usize, height: usize, density: f64, seed: u64) -> Result<World, GridError> {
    if !(0.0..=1.0).contains(&density) {
        return Err(GridError::BadDensity(density));
    }
    let mut rng = Rng::new(seed);
    World::from_fn(width, height, |_, _| rng.next_f64() < density)
}
