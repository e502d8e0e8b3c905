//! Anti-diagonal wavefront scheduler for two-neighbour lattice recursions.
//!
//! A cell `(i, j)` of a `width × height` grid depends on its left neighbour
//! `(i-1, j)` and its lower neighbour `(i, j-1)`. The grid is cut into square
//! tiles; tiles on one tile-antidiagonal are independent and run in parallel.
//! Inside a tile cells are filled row by row. Each cell value is a pure
//! function of its neighbours, so the result does not depend on the schedule.

use rayon::prelude::*;

const TILE: usize = 128;

/// Fills the grid in row-major order (`j` outer). `cell(i, j, left, down)`
/// receives `None` for neighbours outside the grid.
pub fn fill<T, F>(width: usize, height: usize, cell: F) -> Vec<T>
where
    T: Copy + Default + Send + Sync,
    F: Fn(usize, usize, Option<T>, Option<T>) -> T + Sync,
{
    let tiles_w = width.div_ceil(TILE);
    let tiles_h = height.div_ceil(TILE);
    if rayon::current_num_threads() == 1 || tiles_w.min(tiles_h) < 2 {
        fill_sequential(width, height, cell)
    } else {
        fill_tiled(width, height, TILE, cell)
    }
}

pub fn fill_sequential<T, F>(width: usize, height: usize, cell: F) -> Vec<T>
where
    T: Copy + Default,
    F: Fn(usize, usize, Option<T>, Option<T>) -> T,
{
    let mut out: Vec<T> = Vec::with_capacity(width * height);
    for j in 0..height {
        for i in 0..width {
            let left = if i > 0 { Some(out[j * width + i - 1]) } else { None };
            let down = if j > 0 { Some(out[(j - 1) * width + i]) } else { None };
            out.push(cell(i, j, left, down));
        }
    }
    out
}

/// Tiled parallel fill; exposed so tests can force the parallel path.
pub fn fill_tiled<T, F>(width: usize, height: usize, tile: usize, cell: F) -> Vec<T>
where
    T: Copy + Default + Send + Sync,
    F: Fn(usize, usize, Option<T>, Option<T>) -> T + Sync,
{
    assert!(tile > 0);
    let tiles_w = width.div_ceil(tile);
    let tiles_h = height.div_ceil(tile);
    let mut out = vec![T::default(); width * height];
    for d in 0..tiles_w + tiles_h - 1 {
        let t_lo = d.saturating_sub(tiles_h - 1);
        let t_hi = d.min(tiles_w - 1);
        let grid = &out;
        let done: Vec<(usize, usize, Vec<T>)> = (t_lo..=t_hi)
            .into_par_iter()
            .map(|ti| {
                let tj = d - ti;
                let (i0, j0) = (ti * tile, tj * tile);
                let (i1, j1) = ((i0 + tile).min(width), (j0 + tile).min(height));
                let tw = i1 - i0;
                let mut local: Vec<T> = Vec::with_capacity(tw * (j1 - j0));
                for j in j0..j1 {
                    for i in i0..i1 {
                        let left = if i > i0 {
                            Some(local[(j - j0) * tw + (i - i0 - 1)])
                        } else if i > 0 {
                            Some(grid[j * width + i - 1])
                        } else {
                            None
                        };
                        let down = if j > j0 {
                            Some(local[(j - j0 - 1) * tw + (i - i0)])
                        } else if j > 0 {
                            Some(grid[(j - 1) * width + i])
                        } else {
                            None
                        };
                        local.push(cell(i, j, left, down));
                    }
                }
                (i0, j0, local)
            })
            .collect();
        for (i0, j0, local) in done {
            let tw = (i0 + tile).min(width) - i0;
            for (r, row) in local.chunks(tw).enumerate() {
                let start = (j0 + r) * width + i0;
                out[start..start + tw].copy_from_slice(row);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn maxplus(i: usize, j: usize, left: Option<f64>, down: Option<f64>) -> f64 {
        let w = ((i * 7919 + j * 104_729) % 997) as f64 / 997.0;
        w + match (left, down) {
            (Some(a), Some(b)) => a.max(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 0.0,
        }
    }

    #[test]
    fn tiled_matches_sequential() {
        for &(w, h, t) in &[(1, 1, 4), (5, 3, 2), (37, 50, 8), (130, 17, 16), (64, 64, 64)] {
            let a = fill_sequential(w, h, maxplus);
            let b = fill_tiled(w, h, t, maxplus);
            assert_eq!(a, b, "{w}x{h} tile {t}");
        }
    }

    #[test]
    fn tiled_matches_sequential_in_a_multithreaded_pool() {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = fill_sequential(300, 257, maxplus);
        let b = pool.install(|| fill_tiled(300, 257, 32, maxplus));
        let c = pool.install(|| fill(300, 257, maxplus));
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn neighbours_are_reported_exactly_at_the_edges() {
        let v = fill_tiled(9, 7, 4, |i, j, l, d| {
            assert_eq!(l.is_some(), i > 0);
            assert_eq!(d.is_some(), j > 0);
            (i + 100 * j) as u32
        });
        assert_eq!(v[6 * 9 + 8], 608);
    }
}
