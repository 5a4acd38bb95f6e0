//! Binary pixel grids and summed-area tables over them.

use serde::{Deserialize, Serialize};

/// Row-major `width × height` grid of membership flags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipGrid {
    width: u32,
    height: u32,
    cells: Vec<bool>,
}

impl MembershipGrid {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            cells: vec![false; width as usize * height as usize],
        }
    }

    /// Builds a grid from `f(x, y)`.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut cells = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                cells.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            cells,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.cells[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.cells[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn count(&self) -> u64 {
        self.cells.iter().filter(|&&c| c).count() as u64
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }
}

/// Inclusive prefix sums with a zero border: `table[(y+1)(W+1) + x+1]` is the
/// number of set cells in `[0, x] × [0, y]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummedAreaTable {
    width: u32,
    height: u32,
    table: Vec<u64>,
}

impl SummedAreaTable {
    pub fn new(grid: &MembershipGrid) -> Self {
        Self::from_counts(grid.width, grid.height, |x, y| u64::from(grid.get(x, y)))
    }

    pub fn from_counts(width: u32, height: u32, value: impl Fn(u32, u32) -> u64) -> Self {
        let stride = width as usize + 1;
        let mut table = vec![0u64; stride * (height as usize + 1)];
        for y in 0..height {
            let mut row = 0u64;
            for x in 0..width {
                row += value(x, y);
                let i = (y as usize + 1) * stride + x as usize + 1;
                table[i] = table[i - stride] + row;
            }
        }
        Self {
            width,
            height,
            table,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Sum over the half-open rectangle `[x0, x1) × [y0, y1)`.
    #[inline]
    pub fn sum(&self, x0: u32, y0: u32, x1: u32, y1: u32) -> u64 {
        debug_assert!(x0 <= x1 && x1 <= self.width && y0 <= y1 && y1 <= self.height);
        let stride = self.width as usize + 1;
        let at = |x: u32, y: u32| self.table[y as usize * stride + x as usize];
        at(x1, y1) + at(x0, y0) - at(x0, y1) - at(x1, y0)
    }

    /// Sum over a `w × h` window at `(x, y)` on the torus: parts running past
    /// the right or bottom edge continue from the opposite edge.
    pub fn wrapped_sum(&self, x: u32, y: u32, w: u32, h: u32) -> u64 {
        debug_assert!(x < self.width && y < self.height && w <= self.width && h <= self.height);
        let spans = |start: u32, len: u32, size: u32| {
            let end = start + len;
            if end <= size {
                [(start, end), (0, 0)]
            } else {
                [(start, size), (0, end - size)]
            }
        };
        let mut total = 0;
        for (x0, x1) in spans(x, w, self.width) {
            for (y0, y1) in spans(y, h, self.height) {
                if x1 > x0 && y1 > y0 {
                    total += self.sum(x0, y0, x1, y1);
                }
            }
        }
        total
    }

    pub fn total(&self) -> u64 {
        self.sum(0, 0, self.width, self.height)
    }
}
