//! Lower envelope of additively weighted distance functions on a line.
//!
//! Every history record `k` induces a function of the sample coordinate,
//! `f_k(x) = b_k + a2·|x - p_k|`, where `p_k` is the record's sample and
//! `b_k = a1·‖θ_n - θ_k‖` its design-distance offset under the joint metric.
//! The record nearest to `(θ_n, x)` is the minimizer of `f_k(x)`, so the
//! pointwise minimum of these V-shaped functions partitions the line into
//! nearest-record cells. Because every pairwise comparison region
//! `{x : f_k(x) < f_j(x)}` is an interval, each record's cell is a single
//! (possibly empty) interval, and the whole partition can be built with one
//! left-to-right stack sweep over position-sorted sites — the 1-D additively
//! weighted Voronoi diagram.
//!
//! Ties resolve toward the smallest record index. This includes degenerate
//! configurations where two sites are equidistant on an entire ray (offset
//! difference exactly matching the position gap): the tied ray is owned by
//! the smaller index. Queries are verified against the owners of the
//! containing cell and its two neighbors, so cell boundaries computed in
//! floating point never misassign a query by more than rounding already
//! allows.

/// A maximal interval `[left, next.left)` of the envelope, owned by one site.
///
/// The first cell starts at `-∞`; the last extends to `+∞`. `pos` and
/// `offset` are the owning site's parameters, kept here so queries can be
/// re-verified without an extra lookup.
#[derive(Clone, Copy, Debug)]
pub(crate) struct EnvelopeCell {
    pub left: f64,
    pub pos: f64,
    pub offset: f64,
    pub owner: u32,
}

/// Builds the envelope over sites given in `(position, index)` order sorted
/// ascending (ties by index). `offsets[idx]` is the additive offset of the
/// site with original index `idx`; `a2` is the (positive) weight on sample
/// distance. The resulting cells are appended to `cells` (cleared first) with
/// strictly increasing `left` boundaries and pairwise distinct owners.
pub(crate) fn build_envelope(
    sorted: &[(f64, u32)],
    offsets: &[f64],
    a2: f64,
    cells: &mut Vec<EnvelopeCell>,
) {
    cells.clear();
    let mut i = 0;
    while i < sorted.len() {
        let pos = sorted[i].0;
        // Among sites sharing a position, only the lexicographically smallest
        // (offset, index) can ever win a query; the rest are dominated.
        let mut best = sorted[i].1;
        let mut j = i + 1;
        while j < sorted.len() && sorted[j].0 == pos {
            let cand = sorted[j].1;
            let (bo, co) = (offsets[best as usize], offsets[cand as usize]);
            if co < bo || (co == bo && cand < best) {
                best = cand;
            }
            j += 1;
        }
        insert_site(cells, pos, offsets[best as usize], best, a2);
        i = j;
    }
    debug_assert!(!cells.is_empty() || sorted.is_empty());
}

/// Inserts one site (strictly to the right of all current sites) into the
/// envelope stack.
fn insert_site(cells: &mut Vec<EnvelopeCell>, p_s: f64, b_s: f64, s_idx: u32, a2: f64) {
    loop {
        let Some(top) = cells.last().copied() else {
            cells.push(EnvelopeCell {
                left: f64::NEG_INFINITY,
                pos: p_s,
                offset: b_s,
                owner: s_idx,
            });
            return;
        };
        let (p_t, b_t) = (top.pos, top.offset);
        debug_assert!(
            p_s > p_t,
            "sites must be inserted in strictly increasing position order"
        );
        // Difference of the two cones on the far rays: dl = f_s - f_t left of
        // both sites, dr = f_t - f_s right of both. Their signs classify the
        // interaction completely.
        let gap = a2 * (p_s - p_t);
        let dl = (b_s - b_t) + gap;
        let dr = (b_t - b_s) + gap;
        if dr < 0.0 {
            // The top site is strictly below the new one everywhere.
            return;
        }
        if dr == 0.0 {
            // Tied on [p_s, ∞), top strictly below to the left: the smaller
            // index takes the tied ray.
            if s_idx < top.owner {
                push_cell(cells, p_s, p_s, b_s, s_idx);
            }
            return;
        }
        if dl < 0.0 {
            // The new site is strictly below the top everywhere it still owns.
            cells.pop();
            continue;
        }
        if dl == 0.0 {
            // Tied on (-∞, p_t], new site strictly below to the right.
            if s_idx < top.owner || top.left >= p_t {
                cells.pop();
                continue;
            }
            push_cell(cells, p_t, p_s, b_s, s_idx);
            return;
        }
        // Transversal crossing at x* ∈ (p_t, p_s): top wins left of it, the
        // new site right of it.
        let x_star = p_t + dl / (2.0 * a2);
        if x_star <= top.left {
            cells.pop();
            continue;
        }
        push_cell(cells, x_star, p_s, b_s, s_idx);
        return;
    }
}

fn push_cell(cells: &mut Vec<EnvelopeCell>, left: f64, pos: f64, offset: f64, owner: u32) {
    debug_assert!(cells.last().is_none_or(|c| c.left < left));
    cells.push(EnvelopeCell {
        left,
        pos,
        offset,
        owner,
    });
}

/// Evaluates a candidate cell against the current best `(distance, index)`.
#[inline]
fn consider(cell: &EnvelopeCell, a2: f64, x: f64, best: &mut (f64, u32)) {
    let d = cell.offset + a2 * (x - cell.pos).abs();
    if d < best.0 || (d == best.0 && cell.owner < best.1) {
        *best = (d, cell.owner);
    }
}

/// Index of the cell whose interval contains `x` (rightmost `left <= x`).
#[cfg(test)]
fn containing_cell(cells: &[EnvelopeCell], x: f64) -> usize {
    debug_assert!(!cells.is_empty());
    // partition_point gives the first cell with left > x; its predecessor
    // contains x. Cell 0 starts at -inf, so the predecessor always exists.
    cells.partition_point(|c| c.left <= x).saturating_sub(1)
}

/// Nearest site index for a single query, resolved by distance then index
/// among the containing cell and its immediate neighbors.
#[cfg(test)]
pub(crate) fn assign_query(cells: &[EnvelopeCell], a2: f64, x: f64) -> u32 {
    let c = containing_cell(cells, x);
    verified_owner(cells, a2, x, c)
}

fn verified_owner(cells: &[EnvelopeCell], a2: f64, x: f64, c: usize) -> u32 {
    let mut best = (f64::INFINITY, u32::MAX);
    let lo = c.saturating_sub(1);
    let hi = (c + 2).min(cells.len());
    for cell in &cells[lo..hi] {
        consider(cell, a2, x, &mut best);
    }
    best.1
}

/// Streaming nearest-site assignment for a nondecreasing query sequence.
pub(crate) struct EnvelopeSweep<'a> {
    cells: &'a [EnvelopeCell],
    a2: f64,
    cursor: usize,
}

impl<'a> EnvelopeSweep<'a> {
    pub(crate) fn new(cells: &'a [EnvelopeCell], a2: f64) -> Self {
        debug_assert!(!cells.is_empty());
        Self {
            cells,
            a2,
            cursor: 0,
        }
    }

    /// Assigns the next query; queries must arrive in nondecreasing order.
    pub(crate) fn assign_next(&mut self, x: f64) -> u32 {
        while self.cursor + 1 < self.cells.len() && self.cells[self.cursor + 1].left <= x {
            self.cursor += 1;
        }
        verified_owner(self.cells, self.a2, x, self.cursor)
    }
}
