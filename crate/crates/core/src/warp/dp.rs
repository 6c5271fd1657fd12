use super::corridor::Corridor;
use super::AlignmentPath;

const DIAG: u8 = 0;
const UP: u8 = 1; // from (i-1, j)
const LEFT: u8 = 2; // from (i, j-1)
const NONE: u8 = 3;

/// Accumulated cost table stored span-by-span.
struct Table {
    offsets: Vec<usize>,
    cost: Vec<f64>,
    len: Vec<u32>,
    from: Vec<u8>,
}

impl Table {
    fn index(&self, corridor: &Corridor, i: usize, j: usize) -> Option<usize> {
        let span = corridor.row(i)?;
        span.contains(j).then(|| self.offsets[i] + (j - span.lo))
    }
}

#[inline]
fn better(cost: f64, len: u32, best_cost: f64, best_len: u32) -> bool {
    cost < best_cost || (cost == best_cost && len < best_len)
}

/// Minimum-cost monotone path from `(0,0)` to `(n-1,m-1)` inside `corridor`.
///
/// Cells are ranked by (accumulated cost, path length); remaining ties go to
/// the diagonal predecessor, then `(i-1, j)`, then `(i, j-1)`. Returns `None`
/// when the end cell is unreachable.
pub(crate) fn solve(
    a: &[f64],
    b: &[f64],
    corridor: &Corridor,
    local: impl Fn(f64, f64) -> f64,
    normalize: bool,
) -> Option<AlignmentPath> {
    let n = a.len();
    let m = b.len();
    debug_assert_eq!((corridor.n(), corridor.m()), (n, m));

    let mut offsets = Vec::with_capacity(n);
    let mut total = 0usize;
    for i in 0..n {
        offsets.push(total);
        total += corridor.row(i).map_or(0, |s| s.width());
    }
    let mut table = Table {
        offsets,
        cost: vec![f64::INFINITY; total],
        len: vec![u32::MAX; total],
        from: vec![NONE; total],
    };

    for i in 0..n {
        let Some(span) = corridor.row(i) else {
            continue;
        };
        let prev = if i > 0 { corridor.row(i - 1) } else { None };
        let base = table.offsets[i];
        let prev_base = if i > 0 { table.offsets[i - 1] } else { 0 };
        for j in span.lo..=span.hi {
            let here = base + (j - span.lo);
            if i == 0 && j == 0 {
                table.cost[here] = local(a[0], b[0]);
                table.len[here] = 1;
                continue;
            }
            let mut best_cost = f64::INFINITY;
            let mut best_len = u32::MAX;
            let mut best_from = NONE;
            if let Some(p) = prev {
                if j > 0 && p.contains(j - 1) {
                    let k = prev_base + (j - 1 - p.lo);
                    if better(table.cost[k], table.len[k], best_cost, best_len) {
                        (best_cost, best_len, best_from) = (table.cost[k], table.len[k], DIAG);
                    }
                }
                if p.contains(j) {
                    let k = prev_base + (j - p.lo);
                    if better(table.cost[k], table.len[k], best_cost, best_len) {
                        (best_cost, best_len, best_from) = (table.cost[k], table.len[k], UP);
                    }
                }
            }
            if j > span.lo {
                let k = here - 1;
                if better(table.cost[k], table.len[k], best_cost, best_len) {
                    (best_cost, best_len, best_from) = (table.cost[k], table.len[k], LEFT);
                }
            }
            if best_from != NONE {
                table.cost[here] = best_cost + local(a[i], b[j]);
                table.len[here] = best_len + 1;
                table.from[here] = best_from;
            }
        }
    }

    let end = table.index(corridor, n - 1, m - 1)?;
    let total_cost = table.cost[end];
    if !total_cost.is_finite() {
        return None;
    }
    let mut steps = Vec::with_capacity(table.len[end] as usize);
    let (mut i, mut j) = (n - 1, m - 1);
    loop {
        steps.push((i, j));
        if i == 0 && j == 0 {
            break;
        }
        let k = table
            .index(corridor, i, j)
            .expect("backtrack stays inside the corridor");
        match table.from[k] {
            DIAG => {
                i -= 1;
                j -= 1;
            }
            UP => i -= 1,
            LEFT => j -= 1,
            _ => unreachable!("reachable cell without predecessor"),
        }
    }
    steps.reverse();
    let normalized_cost = if normalize {
        total_cost / steps.len() as f64
    } else {
        total_cost
    };
    Some(AlignmentPath {
        steps,
        total_cost,
        normalized_cost,
    })
}
