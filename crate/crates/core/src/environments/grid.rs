//! Slippery grid world with traps and walls.

use std::collections::{BTreeMap, BTreeSet};

use super::EnvironmentError;
use crate::model::{Mdp, ModelBuilder};
use crate::spec::{Direction, Specification};

const BUNDLED: &str = include_str!("../../layouts/grid.txt");

pub const INTENDED: f64 = 0.55;
pub const SLIP: f64 = 0.15;

type Cell = (usize, usize);

/// North, east, south, west.
const MOVES: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
    pub start: Cell,
    pub goal: Cell,
    pub traps: BTreeSet<Cell>,
    /// Unordered pairs of adjacent cells separated by a wall.
    pub walls: BTreeSet<(Cell, Cell)>,
}

fn layout_error(line: usize, message: impl Into<String>) -> EnvironmentError {
    EnvironmentError::Layout {
        line,
        message: message.into(),
    }
}

impl GridLayout {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled grid layout is valid")
    }

    /// Parses rows of `S`, `G`, `X`, `.` followed by `W row col dir` lines.
    pub fn parse(text: &str) -> Result<Self, EnvironmentError> {
        let mut grid: Vec<Vec<char>> = Vec::new();
        let mut wall_lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("W ") {
                wall_lines.push((i + 1, rest.to_string()));
            } else if !wall_lines.is_empty() {
                return Err(layout_error(i + 1, "grid rows must precede walls"));
            } else {
                grid.push(line.chars().collect());
            }
        }
        let rows = grid.len();
        let cols = grid.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 || grid.iter().any(|r| r.len() != cols) {
            return Err(layout_error(0, "grid must be a nonempty rectangle"));
        }
        let (mut start, mut goal, mut traps) = (None, None, BTreeSet::new());
        for (r, row) in grid.iter().enumerate() {
            for (c, &ch) in row.iter().enumerate() {
                match ch {
                    'S' if start.is_none() => start = Some((r, c)),
                    'G' if goal.is_none() => goal = Some((r, c)),
                    'X' => {
                        traps.insert((r, c));
                    }
                    '.' => {}
                    _ => return Err(layout_error(r + 1, format!("unexpected cell '{ch}'"))),
                }
            }
        }
        let mut walls = BTreeSet::new();
        for (line, spec) in wall_lines {
            let parts: Vec<&str> = spec.split_whitespace().collect();
            let [r, c, d] = parts[..] else {
                return Err(layout_error(line, "expected 'W row col dir'"));
            };
            let parse = |v: &str| v.parse::<usize>().map_err(|_| layout_error(line, "bad coordinate"));
            let cell = (parse(r)?, parse(c)?);
            let dir = ["N", "E", "S", "W"]
                .iter()
                .position(|&x| x == d)
                .ok_or_else(|| layout_error(line, format!("bad direction '{d}'")))?;
            let other = step(cell, dir, rows, cols).ok_or_else(|| layout_error(line, "wall on the outer boundary"))?;
            walls.insert((cell.min(other), cell.max(other)));
        }
        Ok(Self {
            rows,
            cols,
            start: start.ok_or_else(|| layout_error(0, "missing start cell"))?,
            goal: goal.ok_or_else(|| layout_error(0, "missing goal cell"))?,
            traps,
            walls,
        })
    }

    fn index(&self, (r, c): Cell) -> usize {
        r * self.cols + c
    }

    fn target(&self, cell: Cell, dir: usize) -> Cell {
        match step(cell, dir, self.rows, self.cols) {
            Some(next) if !self.walls.contains(&(cell.min(next), cell.max(next))) => next,
            _ => cell,
        }
    }
}

fn step((r, c): Cell, dir: usize, rows: usize, cols: usize) -> Option<Cell> {
    let (dr, dc) = MOVES[dir];
    let r = r.checked_add_signed(dr).filter(|&r| r < rows)?;
    let c = c.checked_add_signed(dc).filter(|&c| c < cols)?;
    Some((r, c))
}

/// Builds the grid: each move goes the intended way with 0.55 and each other
/// way with 0.15; moves into a wall or the boundary stay in place. Goal and
/// traps are absorbing. The objective is the maximal probability of reaching
/// the goal without entering a trap.
pub fn build_grid_with(layout: &GridLayout) -> (Mdp, Specification) {
    let n = layout.rows * layout.cols;
    let labels = (0..n)
        .map(|i| format!("r{}c{}", i / layout.cols, i % layout.cols))
        .collect();
    let mut b = ModelBuilder::new(n, layout.index(layout.start))
        .state_labels(labels)
        .action_labels(["north", "east", "south", "west"].map(String::from).to_vec());
    for r in 0..layout.rows {
        for c in 0..layout.cols {
            let cell = (r, c);
            let s = layout.index(cell);
            if cell == layout.goal || layout.traps.contains(&cell) {
                b.choice(s, 0, 0.0, vec![(s, 1.0)]);
                continue;
            }
            for intended in 0..4 {
                let mut mass = BTreeMap::new();
                for dir in 0..4 {
                    let p = if dir == intended { INTENDED } else { SLIP };
                    *mass.entry(layout.index(layout.target(cell, dir))).or_insert(0.0) += p;
                }
                b.choice(s, intended, 0.0, mass.into_iter().collect());
            }
        }
    }
    let mdp = b.build().expect("grid is well formed");
    let traps = layout.traps.iter().map(|&t| layout.index(t));
    let spec = Specification::reach_avoid([layout.index(layout.goal)], traps, Direction::Max);
    (mdp, spec)
}

pub fn build_grid() -> (Mdp, Specification) {
    build_grid_with(&GridLayout::bundled())
}
