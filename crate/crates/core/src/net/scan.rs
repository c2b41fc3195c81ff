use alloc::vec::Vec;

/// One of the four column-first traversals of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Direction {
    pub top_down: bool,
    pub left_to_right: bool,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction { top_down: true, left_to_right: true },
        Direction { top_down: true, left_to_right: false },
        Direction { top_down: false, left_to_right: true },
        Direction { top_down: false, left_to_right: false },
    ];

    /// Row of the already-visited vertical neighbour, if inside the grid.
    #[inline]
    pub(crate) fn y_pred(self, row: usize, height: usize) -> Option<usize> {
        if self.top_down {
            row.checked_sub(1)
        } else {
            (row + 1 < height).then_some(row + 1)
        }
    }

    /// Column of the already-visited horizontal neighbour, if inside the grid.
    #[inline]
    pub(crate) fn x_pred(self, col: usize, width: usize) -> Option<usize> {
        if self.left_to_right {
            col.checked_sub(1)
        } else {
            (col + 1 < width).then_some(col + 1)
        }
    }

    #[inline]
    pub(crate) fn column_at(self, i: usize, width: usize) -> usize {
        if self.left_to_right { i } else { width - 1 - i }
    }

    #[inline]
    pub(crate) fn row_at(self, i: usize, height: usize) -> usize {
        if self.top_down { i } else { height - 1 - i }
    }
}

/// Visiting order as `(column, row)` pairs: columns are the outer key.
pub fn scan_order(width: usize, height: usize, dir: Direction) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(width * height);
    for i in 0..width {
        let col = dir.column_at(i, width);
        for j in 0..height {
            out.push((col, dir.row_at(j, height)));
        }
    }
    out
}

/// The four orders in [`Direction::ALL`] order.
pub fn scan_orders(width: usize, height: usize) -> [Vec<(usize, usize)>; 4] {
    Direction::ALL.map(|d| scan_order(width, height, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use std::collections::BTreeSet;

    #[test]
    fn single_cell() {
        for order in scan_orders(1, 1) {
            assert_eq!(order, vec![(0, 0)]);
        }
    }

    #[test]
    fn two_by_two_top_down_left_right() {
        let o = scan_order(2, 2, Direction { top_down: true, left_to_right: true });
        assert_eq!(o, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn every_order_is_a_column_first_bijection() {
        for (w, h) in [(1, 5), (4, 1), (3, 4), (7, 2)] {
            for (dir, order) in Direction::ALL.iter().zip(scan_orders(w, h)) {
                let set: BTreeSet<_> = order.iter().copied().collect();
                assert_eq!(set.len(), w * h);
                assert_eq!(order.len(), w * h);
                for chunk in order.chunks(h) {
                    assert!(chunk.iter().all(|c| c.0 == chunk[0].0), "{dir:?} not column-first");
                }
            }
        }
    }

    #[test]
    fn mirrored_grid_swaps_horizontal_direction() {
        let (w, h) = (5, 3);
        for top_down in [true, false] {
            let lr = scan_order(w, h, Direction { top_down, left_to_right: true });
            let rl = scan_order(w, h, Direction { top_down, left_to_right: false });
            let mirrored: Vec<_> = rl.iter().map(|&(c, r)| (w - 1 - c, r)).collect();
            assert_eq!(lr, mirrored);
        }
    }

    #[test]
    fn predecessors_are_visited_first() {
        let (w, h) = (4, 3);
        for dir in Direction::ALL {
            let order = scan_order(w, h, dir);
            let pos = |c: (usize, usize)| order.iter().position(|&o| o == c).unwrap();
            for &(c, r) in &order {
                if let Some(py) = dir.y_pred(r, h) {
                    assert!(pos((c, py)) < pos((c, r)));
                }
                if let Some(px) = dir.x_pred(c, w) {
                    assert!(pos((px, r)) < pos((c, r)));
                }
            }
        }
    }
}
