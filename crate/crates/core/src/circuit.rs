//! Gate-level model of the per-cell hardware: one D flip-flop per cell, an
//! 8-input popcount built from full and half adders, and the survive/birth
//! comparison. [`elaborate`] replicates the cell over a world, [`Netlist::tick`]
//! simulates one clock edge, and [`estimate_resources`] maps a world size onto
//! the published FPGA synthesis results.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::grid::World;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("world is {found_width}x{found_height}, netlist was elaborated for {width}x{height}")]
    SizeMismatch {
        width: usize,
        height: usize,
        found_width: usize,
        found_height: usize,
    },
    #[error("netlist dimensions must be positive, got {width}x{height}")]
    ZeroSize { width: usize, height: usize },
    #[error("evaluation order is not a topological order of the netlist: {0}")]
    InvalidOrder(String),
    #[error("{cells} cells is outside the calibrated range {min}..={max}")]
    OutOfRange { cells: usize, min: usize, max: usize },
    #[error("calibration table: {0}")]
    BadCalibration(String),
}

/// Index into [`Netlist::nodes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    fn idx(self) -> usize {
        self.0 as usize
    }
}

/// A node of the netlist. `RegOut` is the output tap of a state register;
/// every other variant is combinational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    RegOut(u32),
    Const0,
    Not(NodeId),
    And(NodeId, NodeId),
    Or(NodeId, NodeId),
    Xor(NodeId, NodeId),
}

impl Node {
    pub fn kind(&self) -> &'static str {
        match self {
            Node::RegOut(_) => "REG",
            Node::Const0 => "CONST0",
            Node::Not(_) => "NOT",
            Node::And(..) => "AND",
            Node::Or(..) => "OR",
            Node::Xor(..) => "XOR",
        }
    }

    pub fn is_combinational(&self) -> bool {
        !matches!(self, Node::RegOut(_))
    }

    pub fn inputs(&self) -> impl Iterator<Item = NodeId> {
        let (a, b) = match *self {
            Node::RegOut(_) | Node::Const0 => (None, None),
            Node::Not(a) => (Some(a), None),
            Node::And(a, b) | Node::Or(a, b) | Node::Xor(a, b) => (Some(a), Some(b)),
        };
        a.into_iter().chain(b)
    }
}

/// 1-bit clocked storage element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Register {
    pub init: bool,
    /// Node driving the D input.
    pub next: NodeId,
}

/// Gate-level netlist of a `width`×`height` world.
///
/// Register `y * width + x` holds cell `(x, y)`. Nodes are stored in a
/// topological order: every input of node `i` has an index below `i`, which
/// makes the combinational graph acyclic by construction. The only feedback
/// paths go through registers.
#[derive(Debug, Clone)]
pub struct Netlist {
    width: usize,
    height: usize,
    nodes: Vec<Node>,
    registers: Vec<Register>,
    const0: NodeId,
    /// Popcount inputs of each cell, neighbours in row-major order.
    cell_inputs: Vec<[NodeId; 8]>,
    state: Vec<bool>,
    values: Vec<bool>,
    cycles: u64,
}

impl PartialEq for Netlist {
    /// Structural equality; simulation state is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.nodes == other.nodes
            && self.registers == other.registers
    }
}

impl Eq for Netlist {}

struct Builder {
    nodes: Vec<Node>,
}

impl Builder {
    fn push(&mut self, node: Node) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(node);
        id
    }

    fn not(&mut self, a: NodeId) -> NodeId {
        self.push(Node::Not(a))
    }

    fn and(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Node::And(a, b))
    }

    fn or(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Node::Or(a, b))
    }

    fn xor(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Node::Xor(a, b))
    }

    /// (sum, carry)
    fn half_adder(&mut self, a: NodeId, b: NodeId) -> (NodeId, NodeId) {
        (self.xor(a, b), self.and(a, b))
    }

    /// (sum, carry)
    fn full_adder(&mut self, a: NodeId, b: NodeId, c: NodeId) -> (NodeId, NodeId) {
        let ab = self.xor(a, b);
        let sum = self.xor(ab, c);
        let g = self.and(a, b);
        let p = self.and(ab, c);
        (sum, self.or(g, p))
    }

    /// 4-bit sum of eight 1-bit inputs, least significant bit first.
    fn popcount8(&mut self, i: &[NodeId; 8]) -> [NodeId; 4] {
        // Weight 1.
        let (s_a, c_a) = self.full_adder(i[0], i[1], i[2]);
        let (s_b, c_b) = self.full_adder(i[3], i[4], i[5]);
        let (s_c, c_c) = self.half_adder(i[6], i[7]);
        let (bit0, c_1) = self.full_adder(s_a, s_b, s_c);
        // Weight 2: c_a + c_b + c_c + c_1, at most 4.
        let (t, u) = self.full_adder(c_a, c_b, c_c);
        let (bit1, v) = self.half_adder(t, c_1);
        // Weight 4: u + v, at most 2.
        let (bit2, bit3) = self.half_adder(u, v);
        [bit0, bit1, bit2, bit3]
    }

    /// `(alive && cnt == 2) || cnt == 3` over the popcount bits.
    fn rule(&mut self, alive: NodeId, cnt: [NodeId; 4]) -> NodeId {
        let [b0, b1, b2, b3] = cnt;
        let high = self.or(b2, b3);
        let not_high = self.not(high);
        let two_or_three = self.and(b1, not_high);
        let is3 = self.and(two_or_three, b0);
        let not_b0 = self.not(b0);
        let is2 = self.and(two_or_three, not_b0);
        let survive = self.and(alive, is2);
        self.or(survive, is3)
    }
}

/// Replicates the cell circuit over a `width`×`height` world. Registers are
/// reset to `initial` when given, otherwise to dead. Neighbour inputs that
/// fall outside the world are tied to a shared constant-0 node.
pub fn elaborate(width: usize, height: usize, initial: Option<&World>) -> Result<Netlist, CircuitError> {
    if width == 0 || height == 0 {
        return Err(CircuitError::ZeroSize { width, height });
    }
    if let Some(w) = initial {
        check_size(width, height, w)?;
    }
    let cells = width * height;
    let mut b = Builder {
        nodes: Vec::with_capacity(cells * 40 + 1),
    };
    for r in 0..cells {
        b.push(Node::RegOut(r as u32));
    }
    let const0 = b.push(Node::Const0);
    let tap = |x: isize, y: isize| -> NodeId {
        if x < 0 || y < 0 || x as usize >= width || y as usize >= height {
            const0
        } else {
            NodeId((y as usize * width + x as usize) as u32)
        }
    };

    let mut registers = Vec::with_capacity(cells);
    let mut cell_inputs = Vec::with_capacity(cells);
    for y in 0..height as isize {
        for x in 0..width as isize {
            let mut inputs = [const0; 8];
            let mut k = 0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if dx != 0 || dy != 0 {
                        inputs[k] = tap(x + dx, y + dy);
                        k += 1;
                    }
                }
            }
            let cnt = b.popcount8(&inputs);
            let next = b.rule(tap(x, y), cnt);
            let init = initial.is_some_and(|w| w.is_alive(x as usize, y as usize));
            registers.push(Register { init, next });
            cell_inputs.push(inputs);
        }
    }

    let state = registers.iter().map(|r| r.init).collect();
    let values = vec![false; b.nodes.len()];
    Ok(Netlist {
        width,
        height,
        nodes: b.nodes,
        registers,
        const0,
        cell_inputs,
        state,
        values,
        cycles: 0,
    })
}

fn check_size(width: usize, height: usize, w: &World) -> Result<(), CircuitError> {
    if w.width() != width || w.height() != height {
        return Err(CircuitError::SizeMismatch {
            width,
            height,
            found_width: w.width(),
            found_height: w.height(),
        });
    }
    Ok(())
}

#[inline]
fn eval(node: Node, values: &[bool], state: &[bool]) -> bool {
    match node {
        Node::RegOut(r) => state[r as usize],
        Node::Const0 => false,
        Node::Not(a) => !values[a.idx()],
        Node::And(a, b) => values[a.idx()] & values[b.idx()],
        Node::Or(a, b) => values[a.idx()] | values[b.idx()],
        Node::Xor(a, b) => values[a.idx()] ^ values[b.idx()],
    }
}

impl Netlist {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn const0(&self) -> NodeId {
        self.const0
    }

    /// The eight popcount inputs of cell `(x, y)`.
    pub fn cell_inputs(&self, x: usize, y: usize) -> &[NodeId; 8] {
        &self.cell_inputs[y * self.width + x]
    }

    /// Clock edges applied since elaboration or the last [`Netlist::reset`].
    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    /// Current register contents.
    pub fn state(&self) -> &[bool] {
        &self.state
    }

    /// Restores every register to its reset value.
    pub fn reset(&mut self) {
        for (s, r) in self.state.iter_mut().zip(&self.registers) {
            *s = r.init;
        }
        self.cycles = 0;
    }

    /// Overwrites the register contents with `world`.
    pub fn load(&mut self, world: &World) -> Result<(), CircuitError> {
        check_size(self.width, self.height, world)?;
        for y in 0..self.height {
            for x in 0..self.width {
                self.state[y * self.width + x] = world.is_alive(x, y);
            }
        }
        Ok(())
    }

    /// Register image as a world (generation 0).
    pub fn read(&self) -> World {
        World::from_fn(self.width, self.height, |x, y| self.state[y * self.width + x])
            .expect("elaborated dimensions are positive")
    }

    /// One clock edge. All combinational nodes are evaluated from the current
    /// register outputs first; only then do the registers latch.
    pub fn tick(&mut self) {
        for i in 0..self.nodes.len() {
            self.values[i] = eval(self.nodes[i], &self.values, &self.state);
        }
        self.latch();
    }

    /// Like [`Netlist::tick`] but evaluates nodes in the caller's order, which
    /// must be a permutation of all node ids that lists every node after its
    /// inputs.
    pub fn tick_in_order(&mut self, order: &[NodeId]) -> Result<(), CircuitError> {
        self.check_order(order)?;
        for &id in order {
            self.values[id.idx()] = eval(self.nodes[id.idx()], &self.values, &self.state);
        }
        self.latch();
        Ok(())
    }

    fn latch(&mut self) {
        for (s, r) in self.state.iter_mut().zip(&self.registers) {
            *s = self.values[r.next.idx()];
        }
        self.cycles += 1;
    }

    fn check_order(&self, order: &[NodeId]) -> Result<(), CircuitError> {
        if order.len() != self.nodes.len() {
            return Err(CircuitError::InvalidOrder(format!(
                "{} entries for {} nodes",
                order.len(),
                self.nodes.len()
            )));
        }
        let mut done = vec![false; self.nodes.len()];
        for &id in order {
            let node = self
                .nodes
                .get(id.idx())
                .ok_or_else(|| CircuitError::InvalidOrder(format!("unknown node {}", id.0)))?;
            if done[id.idx()] {
                return Err(CircuitError::InvalidOrder(format!("node {} listed twice", id.0)));
            }
            if let Some(input) = node.inputs().find(|i| !done[i.idx()]) {
                return Err(CircuitError::InvalidOrder(format!(
                    "node {} scheduled before its input {}",
                    id.0, input.0
                )));
            }
            done[id.idx()] = true;
        }
        Ok(())
    }

    /// Verifies the structural invariants: inputs precede their users, every
    /// register is driven by a combinational node, and there is one state
    /// register per cell.
    pub fn validate(&self) -> Result<(), String> {
        if self.registers.len() != self.width * self.height {
            return Err(format!(
                "{} registers for {} cells",
                self.registers.len(),
                self.width * self.height
            ));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let Some(bad) = node.inputs().find(|inp| inp.idx() >= i) {
                return Err(format!("node {i} reads later node {}", bad.0));
            }
            if let Node::RegOut(r) = node {
                if *r as usize >= self.registers.len() {
                    return Err(format!("node {i} taps missing register {r}"));
                }
            }
        }
        for (r, reg) in self.registers.iter().enumerate() {
            match self.nodes.get(reg.next.idx()) {
                Some(n) if n.is_combinational() => {}
                _ => return Err(format!("register {r} has no combinational driver")),
            }
        }
        Ok(())
    }

    /// Line-oriented debugging dump, `NODE <id> <kind> <inputs...>` followed
    /// by `REG <index> <init> <next>`. Not a stable format.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let _ = write!(out, "NODE {i} {}", node.kind());
            if let Node::RegOut(r) = node {
                let _ = write!(out, " r{r}");
            }
            for input in node.inputs() {
                let _ = write!(out, " {}", input.0);
            }
            out.push('\n');
        }
        for (r, reg) in self.registers.iter().enumerate() {
            let _ = writeln!(out, "REG {r} {} {}", reg.init as u8, reg.next.0);
        }
        out
    }
}

/// Registers and combinational node count of a netlist. The node count is
/// this model's own metric; it is not a vendor LE count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceCount {
    pub registers: usize,
    pub logic_nodes: usize,
}

pub fn count_resources(netlist: &Netlist) -> ResourceCount {
    ResourceCount {
        registers: netlist.registers.len(),
        logic_nodes: netlist.nodes.iter().filter(|n| n.is_combinational()).count(),
    }
}

/// Node count per kind, for reports.
pub fn node_histogram(netlist: &Netlist) -> HashMap<&'static str, usize> {
    let mut h = HashMap::new();
    for n in &netlist.nodes {
        *h.entry(n.kind()).or_insert(0) += 1;
    }
    h
}

/// One synthesis result: world size, logic elements, registers and the
/// reported minimum clock period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRow {
    pub width: usize,
    pub height: usize,
    pub les: u64,
    pub registers: u64,
    pub min_clock_ns: f64,
}

impl CalibrationRow {
    pub fn cells(&self) -> usize {
        self.width * self.height
    }
}

/// Synthesis results for square worlds from 10×10 to 100×100 on a Cyclone IV.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    rows: Vec<CalibrationRow>,
}

const TABLE2_CSV: &str = include_str!("../data/table2.csv");

/// Registers the synthesized designs carry beyond one per cell.
pub const REGISTER_OVERHEAD: u64 = 4;

impl CalibrationTable {
    pub fn new(rows: Vec<CalibrationRow>) -> Result<Self, CircuitError> {
        if rows.len() < 2 {
            return Err(CircuitError::BadCalibration("need at least two rows".into()));
        }
        for pair in rows.windows(2) {
            if pair[1].cells() <= pair[0].cells() {
                return Err(CircuitError::BadCalibration(format!(
                    "cells not strictly increasing at {}",
                    pair[1].cells()
                )));
            }
        }
        if let Some(r) = rows.iter().find(|r| r.les == 0 || r.min_clock_ns <= 0.0) {
            return Err(CircuitError::BadCalibration(format!(
                "non-positive values in row {}x{}",
                r.width, r.height
            )));
        }
        Ok(CalibrationTable { rows })
    }

    /// The published table, parsed from the embedded data file.
    pub fn published() -> Self {
        Self::from_csv(TABLE2_CSV).expect("embedded calibration table is valid")
    }

    /// Parses `width,height,les,registers,min_clock_ns` rows with a header.
    pub fn from_csv(text: &str) -> Result<Self, CircuitError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| CircuitError::BadCalibration(e.to_string()))?;
            let field = |i: usize| -> Result<&str, CircuitError> {
                record
                    .get(i)
                    .map(str::trim)
                    .ok_or_else(|| CircuitError::BadCalibration(format!("missing column {i}")))
            };
            let bad = |e: &dyn std::fmt::Display| CircuitError::BadCalibration(e.to_string());
            rows.push(CalibrationRow {
                width: field(0)?.parse().map_err(|e| bad(&e))?,
                height: field(1)?.parse().map_err(|e| bad(&e))?,
                les: field(2)?.parse().map_err(|e| bad(&e))?,
                registers: field(3)?.parse().map_err(|e| bad(&e))?,
                min_clock_ns: field(4)?.parse().map_err(|e| bad(&e))?,
            });
        }
        Self::new(rows)
    }

    pub fn rows(&self) -> &[CalibrationRow] {
        &self.rows
    }

    pub fn min_cells(&self) -> usize {
        self.rows[0].cells()
    }

    pub fn max_cells(&self) -> usize {
        self.rows[self.rows.len() - 1].cells()
    }

    fn out_of_range(&self, cells: usize) -> CircuitError {
        CircuitError::OutOfRange {
            cells,
            min: self.min_cells(),
            max: self.max_cells(),
        }
    }

    /// Indices of the rows at or around `cells`: `(i, i)` on an exact match,
    /// `(i, i + 1)` when strictly between, `None` outside the table.
    fn bracket(&self, cells: usize) -> Option<(usize, usize)> {
        let pos = self.rows.partition_point(|r| r.cells() < cells);
        if pos == self.rows.len() {
            return None;
        }
        if self.rows[pos].cells() == cells {
            Some((pos, pos))
        } else if pos == 0 {
            None
        } else {
            Some((pos - 1, pos))
        }
    }

    /// Minimum clock period for `cells`: the row value on an exact match,
    /// otherwise the larger of the two bracketing rows.
    pub fn clock_period_ns(&self, cells: usize) -> Result<f64, CircuitError> {
        let (lo, hi) = self.bracket(cells).ok_or_else(|| self.out_of_range(cells))?;
        Ok(self.rows[lo].min_clock_ns.max(self.rows[hi].min_clock_ns))
    }

    /// Logic elements, linearly interpolated in cell count between
    /// bracketing rows and rounded half up. Exact on table rows.
    pub fn les(&self, cells: usize) -> Result<u64, CircuitError> {
        let (lo, hi) = self.bracket(cells).ok_or_else(|| self.out_of_range(cells))?;
        Ok(interpolate(&self.rows[lo], &self.rows[hi], cells))
    }
}

/// Rounded-half-up line through two rows, evaluated at `cells`. Also used
/// outside the table span, where it may go negative and is clamped to 1.
fn interpolate(a: &CalibrationRow, b: &CalibrationRow, cells: usize) -> u64 {
    if a.cells() == b.cells() {
        return a.les;
    }
    let (c0, c1) = (a.cells() as i128, b.cells() as i128);
    let (l0, l1) = (a.les as i128, b.les as i128);
    let den = c1 - c0;
    let num = l0 * den + (cells as i128 - c0) * (l1 - l0);
    // floor(num / den + 1/2)
    let v = (2 * num + den).div_euclid(2 * den);
    v.max(1) as u64
}

/// Modelled FPGA footprint of a world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceEstimate {
    pub width: usize,
    pub height: usize,
    pub registers: u64,
    pub les: u64,
    pub min_clock_ns: f64,
    pub extrapolated: bool,
}

/// Maps a world size onto the calibration table.
///
/// Registers are `cells + REGISTER_OVERHEAD`. LEs are interpolated between
/// the bracketing rows and the clock period is the slower bracketing row.
/// Sizes outside the table are rejected unless `extrapolate` is set, in which
/// case LEs follow the nearest end segment and the clock period is the slowest
/// in the table.
pub fn estimate_resources(
    width: usize,
    height: usize,
    cal: &CalibrationTable,
    extrapolate: bool,
) -> Result<ResourceEstimate, CircuitError> {
    if width == 0 || height == 0 {
        return Err(CircuitError::ZeroSize { width, height });
    }
    let cells = width * height;
    let in_range = (cal.min_cells()..=cal.max_cells()).contains(&cells);
    let (les, min_clock_ns) = if in_range {
        (cal.les(cells)?, cal.clock_period_ns(cells)?)
    } else if extrapolate {
        let rows = cal.rows();
        let (a, b) = if cells < cal.min_cells() {
            (&rows[0], &rows[1])
        } else {
            (&rows[rows.len() - 2], &rows[rows.len() - 1])
        };
        let slowest = rows.iter().map(|r| r.min_clock_ns).fold(f64::MIN, f64::max);
        (interpolate(a, b, cells), slowest)
    } else {
        return Err(cal.out_of_range(cells));
    };
    Ok(ResourceEstimate {
        width,
        height,
        registers: cells as u64 + REGISTER_OVERHEAD,
        les,
        min_clock_ns,
        extrapolated: !in_range,
    })
}
