//! Predicted L2 convergence rates of `σ`, `dσ`, `u`, `du` for the four
//! canonical pairs under lower-order perturbations.

use crate::error::{FeecError, Result};
use crate::perturbed::TermMask;

fn has(mask: TermMask, i: usize) -> bool {
    mask & (1 << (i - 1)) != 0
}

/// Rates `[σ, dσ, u, du]` for `pair_id` at degree `r` with the active terms in `mask`.
pub fn predict_rates(pair_id: usize, r: usize, mask: TermMask) -> Result<[usize; 4]> {
    let (l2, l4, l5) = (has(mask, 2), has(mask, 4), has(mask, 5));
    Ok(match pair_id {
        1 => [if l2 || l4 || l5 { r + 1 } else { r + 2 }, if l4 { r } else { r + 1 }, r + 1, r],
        2 => [r + 1, if l4 { r } else { r + 1 }, r + 1, r],
        3 => [if l2 || l5 { r } else { r + 1 }, r, r, r],
        4 => [r, r, r, r],
        other => return Err(FeecError::InvalidPairId(other)),
    })
}

/// Rates the discretization actually achieves. For `k = 1` the `σ`-spaces of
/// pairs 1 and 2 (and of pairs 3 and 4) coincide, so each estimate applies to
/// both and the larger rate holds.
pub fn effective_rates(pair_id: usize, r: usize, mask: TermMask, k: usize) -> Result<[usize; 4]> {
    let own = predict_rates(pair_id, r, mask)?;
    if k != 1 {
        return Ok(own);
    }
    let twin = match pair_id {
        1 => 2,
        2 => 1,
        3 => 4,
        _ => 3,
    };
    let other = predict_rates(twin, r, mask)?;
    Ok([0, 1, 2, 3].map(|i| own[i].max(other[i])))
}

/// The full truth table, one line per `(pair, r, mask)` with `r` in `1..=3`:
/// `pair r mask σ dσ u du`, the mask as five flags `l1..l5`.
pub fn rate_table() -> String {
    let mut out = String::new();
    for pair in 1..=4 {
        for r in 1..=3 {
            for mask in 0..32u8 {
                let flags: String = (1..=5).map(|i| if has(mask, i) { '1' } else { '0' }).collect();
                let p = predict_rates(pair, r, mask).expect("valid pair");
                out.push_str(&format!("{pair} {r} {flags} {} {} {} {}\n", p[0], p[1], p[2], p[3]));
            }
        }
    }
    out
}
