// SPDX-License-Identifier: Apache-2.0

//! Mapping cascade chains onto the physical 8 x 50 array.
//!
//! Cascade links run horizontally and alternate direction row by row: even
//! rows (counted from the bottom) pass data left to right, odd rows right to
//! left. Placement works in two steps:
//!
//! 1. Chains of unequal length are packed first-fit-decreasing into links of
//!    the longest chain's length; leftover slots become pass-through cells.
//! 2. Links are packed from the bottom-left corner, left to right, bottom to
//!    top. When whole links per row do not give enough room, links are laid
//!    along one continuous serpentine path instead, turning upward at the end
//!    of each row.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::engine::{ArrayConfig, TileGrid};

pub const ARRAY_ROWS: usize = 8;
pub const ARRAY_COLS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhysicalGrid {
    pub rows: usize,
    pub cols: usize,
}

impl Default for PhysicalGrid {
    fn default() -> Self {
        Self {
            rows: ARRAY_ROWS,
            cols: ARRAY_COLS,
        }
    }
}

impl PhysicalGrid {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn capacity(&self) -> usize {
        self.rows * self.cols
    }

    pub fn direction(&self, row: usize) -> Direction {
        if row % 2 == 0 {
            Direction::LeftToRight
        } else {
            Direction::RightToLeft
        }
    }

    /// Column of the `offset`-th cell along `row`'s cascade direction.
    fn col_along(&self, row: usize, offset: usize) -> usize {
        match self.direction(row) {
            Direction::LeftToRight => offset,
            Direction::RightToLeft => self.cols - 1 - offset,
        }
    }

    fn row_end(&self, row: usize) -> usize {
        self.col_along(row, self.cols - 1)
    }
}

/// Logical cascade chains of one task, replicated `task_count` times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalArray {
    pub chain_lengths: Vec<usize>,
    pub task_count: usize,
}

impl LogicalArray {
    pub fn uniform(chain_count: usize, chain_length: usize, task_count: usize) -> Self {
        Self {
            chain_lengths: vec![chain_length; chain_count],
            task_count,
        }
    }

    pub fn from_grid(grid: &TileGrid, task_count: usize) -> Self {
        Self {
            chain_lengths: grid.chain_lengths(),
            task_count,
        }
    }

    pub fn cells_per_task(&self) -> usize {
        self.chain_lengths.iter().sum()
    }
}

/// Content of one link slot: a chain cell or a pass-through filler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Chain { chain: usize, pos: usize },
    PassThrough,
}

/// Equal-length links produced by step 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Links {
    pub length: usize,
    pub links: Vec<Vec<Slot>>,
}

/// Step 1: first-fit-decreasing packing of chains into links as long as the
/// longest chain. Ties keep chain order.
pub fn equalize(chain_lengths: &[usize]) -> Links {
    let length = chain_lengths.iter().copied().max().unwrap_or(0);
    let mut order: Vec<usize> = (0..chain_lengths.len())
        .filter(|&c| chain_lengths[c] > 0)
        .collect();
    order.sort_by(|&x, &y| chain_lengths[y].cmp(&chain_lengths[x]).then(x.cmp(&y)));
    let mut links: Vec<Vec<Slot>> = Vec::new();
    for c in order {
        let len = chain_lengths[c];
        let cells = (0..len).map(|pos| Slot::Chain { chain: c, pos });
        match links.iter_mut().find(|l| l.len() + len <= length) {
            Some(link) => link.extend(cells),
            None => links.push(cells.collect()),
        }
    }
    for link in &mut links {
        link.resize(length, Slot::PassThrough);
    }
    Links { length, links }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Every link sits inside one row.
    RowAligned,
    /// Links follow one continuous path that turns up at row ends.
    Serpentine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub task: usize,
    pub link: usize,
    pub pos: usize,
    pub slot: Slot,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementResult {
    pub link_length: usize,
    pub links_per_task: usize,
    pub layout: Layout,
    pub assignments: Vec<Assignment>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlacementError {
    #[error("nothing to place")]
    Empty,
    #[error("link of {length} cells does not fit a {cols}-cell row")]
    LinkTooLong { length: usize, cols: usize },
    #[error("{required} cells requested but the array has {available}")]
    Capacity { required: usize, available: usize },
}

impl PlacementResult {
    pub fn occupied_count(&self) -> usize {
        self.assignments.len()
    }

    /// One character per cell, top row first: task index (`0-9a-z`, then
    /// `#`) or `.` for a free cell.
    pub fn to_text_grid(&self, grid: &PhysicalGrid) -> String {
        let mut cells = vec![b'.'; grid.capacity()];
        for a in &self.assignments {
            let ch = match a.task {
                t @ 0..=9 => b'0' + t as u8,
                t @ 10..=35 => b'a' + (t - 10) as u8,
                _ => b'#',
            };
            if a.row < grid.rows && a.col < grid.cols {
                cells[a.row * grid.cols + a.col] = ch;
            }
        }
        let mut out = String::with_capacity(grid.capacity() + grid.rows);
        for row in (0..grid.rows).rev() {
            let line = &cells[row * grid.cols..(row + 1) * grid.cols];
            out.extend(line.iter().map(|&b| b as char));
            out.push('\n');
        }
        out
    }
}

/// Two-step placement of `logical` onto `grid`.
pub fn place(logical: &LogicalArray, grid: &PhysicalGrid) -> Result<PlacementResult, PlacementError> {
    let links = equalize(&logical.chain_lengths);
    if links.length == 0 || logical.task_count == 0 {
        return Err(PlacementError::Empty);
    }
    if links.length > grid.cols {
        return Err(PlacementError::LinkTooLong {
            length: links.length,
            cols: grid.cols,
        });
    }
    let per_task = links.links.len();
    let total_links = per_task * logical.task_count;
    let required = total_links * links.length;
    if required > grid.capacity() {
        return Err(PlacementError::Capacity {
            required,
            available: grid.capacity(),
        });
    }
    let per_row = grid.cols / links.length;
    let layout = if per_row * grid.rows >= total_links {
        Layout::RowAligned
    } else {
        Layout::Serpentine
    };

    let mut assignments = Vec::with_capacity(required);
    for task in 0..logical.task_count {
        for (link, slots) in links.links.iter().enumerate() {
            let k = task * per_task + link;
            for (pos, &slot) in slots.iter().enumerate() {
                let (row, offset) = match layout {
                    Layout::RowAligned => (k / per_row, (k % per_row) * links.length + pos),
                    Layout::Serpentine => {
                        let g = k * links.length + pos;
                        (g / grid.cols, g % grid.cols)
                    }
                };
                let col = match (layout, grid.direction(row)) {
                    (_, Direction::LeftToRight) => offset,
                    // keep row-aligned links packed from the left edge
                    (Layout::RowAligned, Direction::RightToLeft) => {
                        let start = (k % per_row) * links.length;
                        start + links.length - 1 - (offset - start)
                    }
                    (Layout::Serpentine, Direction::RightToLeft) => grid.col_along(row, offset),
                };
                assignments.push(Assignment {
                    task,
                    link,
                    pos,
                    slot,
                    row,
                    col,
                });
            }
        }
    }
    Ok(PlacementResult {
        link_length: links.length,
        links_per_task: per_task,
        layout,
        assignments,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    OutOfBounds { task: usize, link: usize, pos: usize },
    Collision { row: usize, col: usize },
    NotAdjacent { task: usize, link: usize, pos: usize },
    WrongDirection { task: usize, link: usize, pos: usize },
}

/// Checks bounds, injectivity and that each link position `pos + 1` sits on
/// the cascade successor of position `pos`.
pub fn validate_placement(p: &PlacementResult, grid: &PhysicalGrid) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = vec![false; grid.capacity()];
    for a in &p.assignments {
        if a.row >= grid.rows || a.col >= grid.cols {
            out.push(Violation::OutOfBounds {
                task: a.task,
                link: a.link,
                pos: a.pos,
            });
            continue;
        }
        let idx = a.row * grid.cols + a.col;
        if seen[idx] {
            out.push(Violation::Collision {
                row: a.row,
                col: a.col,
            });
        }
        seen[idx] = true;
    }

    let mut order: Vec<&Assignment> = p.assignments.iter().collect();
    order.sort_by_key(|a| (a.task, a.link, a.pos));
    for w in order.windows(2) {
        let (x, y) = (w[0], w[1]);
        if (x.task, x.link) != (y.task, y.link) {
            continue;
        }
        let here = (y.task, y.link, y.pos);
        let in_bounds = |a: &Assignment| a.row < grid.rows && a.col < grid.cols;
        if !in_bounds(x) || !in_bounds(y) {
            continue;
        }
        if y.pos != x.pos + 1 {
            out.push(Violation::NotAdjacent {
                task: here.0,
                link: here.1,
                pos: here.2,
            });
            continue;
        }
        let step = y.col as isize - x.col as isize;
        if x.row == y.row && step.abs() == 1 {
            let forward = match grid.direction(x.row) {
                Direction::LeftToRight => 1,
                Direction::RightToLeft => -1,
            };
            if step != forward {
                out.push(Violation::WrongDirection {
                    task: here.0,
                    link: here.1,
                    pos: here.2,
                });
            }
        } else if !(y.row == x.row + 1 && y.col == x.col && x.col == grid.row_end(x.row)) {
            out.push(Violation::NotAdjacent {
                task: here.0,
                link: here.1,
                pos: here.2,
            });
        }
    }
    out
}

/// PLIO streams needed by one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlioPlan {
    pub inputs_per_task: usize,
    pub outputs_per_task: usize,
    pub total_plio: usize,
}

/// A segments are broadcast along tile rows and B segments along
/// anti-diagonals, so a task needs `P0 + P1` inputs and one output per chain.
pub fn plan_broadcast(cfg: &ArrayConfig) -> PlioPlan {
    let inputs = cfg.p_intra0 + cfg.p_intra1;
    let outputs = cfg.p_intra0 + cfg.p_intra1 - 1;
    PlioPlan {
        inputs_per_task: inputs,
        outputs_per_task: outputs,
        total_plio: (inputs + outputs) * cfg.p_inter,
    }
}

/// PLIO count without broadcast: one A input, one B input and one output per tile.
pub fn naive_plio(cfg: &ArrayConfig) -> usize {
    3 * cfg.p_intra() * cfg.p_inter
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::plan_tiles;

    fn cfg(p_inter: usize, p0: usize, p1: usize) -> ArrayConfig {
        ArrayConfig::new(65536, p_inter, p0, p1).unwrap()
    }

    #[test]
    fn broadcast_counts() {
        let p = plan_broadcast(&cfg(1, 3, 2));
        assert_eq!((p.inputs_per_task, p.outputs_per_task, p.total_plio), (5, 4, 9));
        let p = plan_broadcast(&cfg(1, 1, 1));
        assert_eq!((p.inputs_per_task, p.outputs_per_task), (2, 1));
        assert_eq!(plan_broadcast(&cfg(3, 11, 12)).total_plio, 135);
        for p0 in 1..30 {
            for p1 in 1..30 {
                let c = cfg(2, p0, p1);
                assert!(plan_broadcast(&c).total_plio <= naive_plio(&c));
            }
        }
    }

    #[test]
    fn twenty_cells_as_five_links_of_four() {
        let grid = PhysicalGrid::default();
        let p = place(&LogicalArray::uniform(5, 4, 1), &grid).unwrap();
        assert_eq!(p.layout, Layout::RowAligned);
        assert_eq!(p.occupied_count(), 20);
        assert!(validate_placement(&p, &grid).is_empty());
        for link in 0..5 {
            let rows: Vec<usize> = p
                .assignments
                .iter()
                .filter(|a| a.link == link)
                .map(|a| a.row)
                .collect();
            assert!(rows.iter().all(|&r| r == rows[0]));
        }
    }

    #[test]
    fn four_by_five_grid_equalizes_to_five_links() {
        let g = plan_tiles(40, 40, 4, 5).unwrap();
        let links = equalize(&g.chain_lengths());
        assert_eq!((links.links.len(), links.length), (5, 4));
        assert!(links
            .links
            .iter()
            .all(|l| l.iter().all(|s| *s != Slot::PassThrough)));
    }

    #[test]
    fn eleven_by_twelve_times_three_fills_396_cells() {
        let grid = PhysicalGrid::default();
        let g = plan_tiles(2115, 2115, 11, 12).unwrap();
        let p = place(&LogicalArray::from_grid(&g, 3), &grid).unwrap();
        assert_eq!((p.links_per_task, p.link_length), (12, 11));
        assert_eq!(p.occupied_count(), 396);
        assert_eq!(p.layout, Layout::Serpentine);
        assert!(validate_placement(&p, &grid).is_empty());
    }

    #[test]
    fn single_cell_goes_bottom_left() {
        let p = place(&LogicalArray::uniform(1, 1, 1), &PhysicalGrid::default()).unwrap();
        assert_eq!((p.assignments[0].row, p.assignments[0].col), (0, 0));
    }

    #[test]
    fn rejects_oversized_requests() {
        let grid = PhysicalGrid::default();
        assert!(matches!(
            place(&LogicalArray::uniform(1, 51, 1), &grid),
            Err(PlacementError::LinkTooLong { .. })
        ));
        assert!(matches!(
            place(&LogicalArray::uniform(401, 1, 1), &grid),
            Err(PlacementError::Capacity { .. })
        ));
        assert!(place(&LogicalArray::uniform(8, 50, 1), &grid).is_ok());
    }

    #[test]
    fn constructed_violations() {
        let grid = PhysicalGrid::default();
        let mut p = place(&LogicalArray::uniform(1, 3, 1), &grid).unwrap();
        p.assignments[2].col = 5;
        let v = validate_placement(&p, &grid);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::NotAdjacent { pos: 2, .. }));

        // even row laid right to left
        let mut p = place(&LogicalArray::uniform(1, 3, 1), &grid).unwrap();
        for a in &mut p.assignments {
            a.col = 2 - a.pos;
        }
        let v = validate_placement(&p, &grid);
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|x| matches!(x, Violation::WrongDirection { .. })));

        let mut p = place(&LogicalArray::uniform(2, 2, 1), &grid).unwrap();
        p.assignments[3].col = p.assignments[1].col;
        p.assignments[3].row = p.assignments[1].row;
        assert!(validate_placement(&p, &grid)
            .iter()
            .any(|x| matches!(x, Violation::Collision { .. })));
    }

    #[test]
    fn odd_rows_run_right_to_left() {
        let grid = PhysicalGrid::default();
        let p = place(&LogicalArray::uniform(20, 10, 1), &grid).unwrap();
        let odd: Vec<&Assignment> = p.assignments.iter().filter(|a| a.row == 1).collect();
        assert!(!odd.is_empty());
        assert!(validate_placement(&p, &grid).is_empty());
        let text = p.to_text_grid(&grid);
        assert_eq!(text.lines().count(), 8);
        assert!(text.lines().all(|l| l.len() == 50));
    }

    #[test]
    fn exhaustive_small_requests_validate() {
        let grid = PhysicalGrid::default();
        for len in 1..=50 {
            for tasks in 1..=4 {
                for chains in [1usize, 3, 7] {
                    let logical = LogicalArray::uniform(chains, len, tasks);
                    match place(&logical, &grid) {
                        Ok(p) => {
                            assert_eq!(p.occupied_count(), chains * len * tasks);
                            assert!(validate_placement(&p, &grid).is_empty());
                        }
                        Err(PlacementError::Capacity { required, .. }) => assert!(required > 400),
                        Err(e) => panic!("{e}"),
                    }
                }
            }
        }
    }
}
