use super::AlignmentPath;

/// Inclusive column range `lo..=hi` allowed in one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub lo: usize,
    pub hi: usize,
}

impl Span {
    pub fn width(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn contains(&self, j: usize) -> bool {
        self.lo <= j && j <= self.hi
    }
}

/// Set of admissible cells over an `n x m` grid, stored as one contiguous
/// column span per row.
///
/// Every mask produced here (Sakoe-Chiba style band, dilated projection of a
/// monotone path, and their intersection) is row-contiguous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corridor {
    n: usize,
    m: usize,
    rows: Vec<Option<Span>>,
}

impl Corridor {
    pub fn full(n: usize, m: usize) -> Self {
        let span = if m == 0 {
            None
        } else {
            Some(Span { lo: 0, hi: m - 1 })
        };
        Corridor {
            n,
            m,
            rows: vec![span; n],
        }
    }

    /// Cells satisfying the proportional band constraint
    /// `|i*(m-1) - j*(n-1)| <= band * max(n-1, m-1)`.
    ///
    /// For equal lengths this is `|i - j| <= band`. For unequal lengths the
    /// band is measured along the longer axis around the straight line from
    /// `(0,0)` to `(n-1,m-1)`, and the test is symmetric under swapping the
    /// two series.
    pub fn band(n: usize, m: usize, band: usize) -> Self {
        let rows = (0..n).map(|i| band_span(i, n, m, band)).collect();
        Corridor { n, m, rows }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> Option<Span> {
        self.rows.get(i).copied().flatten()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row(i).is_some_and(|s| s.contains(j))
    }

    pub fn cell_count(&self) -> usize {
        self.rows.iter().flatten().map(Span::width).sum()
    }

    pub fn is_full(&self) -> bool {
        self.cell_count() == self.n * self.m
    }

    /// Row-major iterator over admissible cells.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|s| (i, s)))
            .flat_map(|(i, s)| (s.lo..=s.hi).map(move |j| (i, j)))
    }

    pub fn intersect(&self, other: &Corridor) -> Corridor {
        assert_eq!(
            (self.n, self.m),
            (other.n, other.m),
            "corridor shapes differ"
        );
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => {
                    let lo = a.lo.max(b.lo);
                    let hi = a.hi.min(b.hi);
                    (lo <= hi).then_some(Span { lo, hi })
                }
                _ => None,
            })
            .collect();
        Corridor {
            n: self.n,
            m: self.m,
            rows,
        }
    }
}

fn band_span(i: usize, n: usize, m: usize, band: usize) -> Option<Span> {
    if m == 0 {
        return None;
    }
    if n <= 1 || m <= 1 {
        // A length-one series pairs with every element of the other.
        return Some(Span { lo: 0, hi: m - 1 });
    }
    let (n1, m1) = ((n - 1) as i128, (m - 1) as i128);
    let width = band as i128 * n1.max(m1);
    let center = i as i128 * m1;
    // j*n1 in [center - width, center + width]
    let lo = div_ceil(center - width, n1).max(0);
    let hi = div_floor(center + width, n1).min(m1);
    (lo <= hi).then_some(Span {
        lo: lo as usize,
        hi: hi as usize,
    })
}

fn div_floor(a: i128, b: i128) -> i128 {
    a.div_euclid(b)
}

fn div_ceil(a: i128, b: i128) -> i128 {
    -((-a).div_euclid(b))
}

/// Projects a coarse path onto an `n x m` grid one level finer.
///
/// Each coarse cell `(I, J)` covers the fine block
/// `[I*factor, (I+1)*factor) x [J*factor, (J+1)*factor)`; the union of blocks is
/// dilated by `radius` cells in every direction and clipped to the grid.
pub fn expand_corridor(
    path: &AlignmentPath,
    factor: usize,
    radius: usize,
    n: usize,
    m: usize,
) -> Corridor {
    project_steps(&path.steps, factor, radius, n, m)
}

pub(crate) fn project_steps(
    steps: &[(usize, usize)],
    factor: usize,
    radius: usize,
    n: usize,
    m: usize,
) -> Corridor {
    let mut rows: Vec<Option<Span>> = vec![None; n];
    if m == 0 {
        return Corridor { n, m, rows };
    }
    for &(ci, cj) in steps {
        let r0 = ci.saturating_mul(factor);
        let c0 = cj.saturating_mul(factor);
        if r0 >= n || c0 >= m {
            continue;
        }
        let r1 = (r0 + factor).min(n) - 1;
        let c1 = (c0 + factor).min(m) - 1;
        let lo = c0.saturating_sub(radius);
        let hi = c1.saturating_add(radius).min(m - 1);
        let top = r0.saturating_sub(radius);
        let bottom = r1.saturating_add(radius).min(n - 1);
        for row in &mut rows[top..=bottom] {
            *row = Some(match *row {
                Some(s) => Span {
                    lo: s.lo.min(lo),
                    hi: s.hi.max(hi),
                },
                None => Span { lo, hi },
            });
        }
    }
    Corridor { n, m, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn cells(c: &Corridor) -> BTreeSet<(usize, usize)> {
        c.cells().collect()
    }

    #[test]
    fn single_coarse_cell_covers_block() {
        let c = project_steps(&[(0, 0)], 2, 0, 2, 2);
        assert_eq!(
            cells(&c),
            [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().collect()
        );
    }

    #[test]
    fn radius_one_adds_clipped_border() {
        let c = project_steps(&[(0, 0)], 2, 1, 4, 4);
        let expected: BTreeSet<_> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
        assert_eq!(cells(&c), expected);
        // on a 2x2 grid the border is clipped away entirely
        assert!(project_steps(&[(0, 0)], 2, 1, 2, 2).is_full());
    }

    #[test]
    fn large_radius_saturates() {
        let c = project_steps(&[(0, 0), (1, 1), (2, 2)], 2, 7, 6, 7);
        assert!(c.is_full());
    }

    #[test]
    fn trailing_partial_block_is_clipped() {
        let c = project_steps(&[(0, 0), (1, 1)], 2, 0, 3, 3);
        assert_eq!(c.row(2), Some(Span { lo: 2, hi: 2 }));
    }

    #[test]
    fn equal_length_band_is_diagonal_strip() {
        let c = Corridor::band(6, 6, 1);
        for (i, j) in c.cells() {
            assert!(i.abs_diff(j) <= 1);
        }
        assert_eq!(c.cell_count(), 6 + 2 * 5);
    }

    #[test]
    fn band_is_symmetric_under_transpose() {
        for (n, m, w) in [
            (5, 9, 0),
            (5, 9, 2),
            (365, 366, 14),
            (3, 4, 0),
            (1, 7, 0),
            (10, 2, 1),
        ] {
            let ab = Corridor::band(n, m, w);
            let ba = Corridor::band(m, n, w);
            let t: BTreeSet<_> = ba.cells().map(|(j, i)| (i, j)).collect();
            assert_eq!(cells(&ab), t, "n={n} m={m} w={w}");
        }
    }

    #[test]
    fn zero_band_with_unequal_lengths_can_leave_rows_empty() {
        let c = Corridor::band(3, 4, 0);
        // row 1 maps to column 1.5
        assert_eq!(c.row(1), None);
        assert!(c.contains(0, 0) && c.contains(2, 3));
    }
}
