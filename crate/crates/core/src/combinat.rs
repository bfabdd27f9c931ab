//! Index bookkeeping for exterior algebra on R^n.
//!
//! A k-form is stored by its coefficients on `dx_I` for increasing index
//! tuples `I`, enumerated lexicographically.

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// All increasing `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binomial(n, k));
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Position of an increasing subset in the lexicographic enumeration.
pub fn subset_index(n: usize, set: &[usize]) -> usize {
    let k = set.len();
    let mut idx = 0;
    let mut prev = 0;
    for (pos, &s) in set.iter().enumerate() {
        for skipped in prev..s {
            idx += binomial(n - skipped - 1, k - pos - 1);
        }
        prev = s + 1;
    }
    idx
}

/// Sign of the permutation that sorts `seq` (entries distinct).
pub fn permutation_sign(seq: &[usize]) -> f64 {
    let mut inversions = 0;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] > seq[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `dx_a ∧ dx_b = sign * dx_{sorted(a ∪ b)}`, or `None` if they overlap.
pub fn wedge_sign(a: &[usize], b: &[usize]) -> Option<(f64, Vec<usize>)> {
    let mut merged: Vec<usize> = a.iter().chain(b).copied().collect();
    let sign = permutation_sign(&merged);
    merged.sort_unstable();
    if merged.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((sign, merged))
}

/// Complement of an increasing subset within `0..n`.
pub fn complement(n: usize, set: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !set.contains(i)).collect()
}

/// Multi-indices of length `nvars` with total degree exactly `deg`, in a fixed order.
pub fn multi_indices_eq(nvars: usize, deg: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; nvars];
    fn rec(pos: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for v in (0..=left).rev() {
            cur[pos] = v;
            rec(pos + 1, left - v, cur, out);
        }
    }
    if nvars == 0 {
        if deg == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(0, deg, &mut cur, &mut out);
    out
}

/// Multi-indices with total degree `<= deg`, ordered by degree.
pub fn multi_indices_le(nvars: usize, deg: usize) -> Vec<Vec<usize>> {
    (0..=deg).flat_map(|d| multi_indices_eq(nvars, d)).collect()
}

/// Determinant of the square submatrix with the given rows and columns.
pub fn minor(a: &nalgebra::DMatrix<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    let k = rows.len();
    match k {
        0 => 1.0,
        1 => a[(rows[0], cols[0])],
        2 => a[(rows[0], cols[0])] * a[(rows[1], cols[1])] - a[(rows[0], cols[1])] * a[(rows[1], cols[0])],
        _ => {
            let sub = nalgebra::DMatrix::from_fn(k, k, |i, j| a[(rows[i], cols[j])]);
            sub.determinant()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_index_matches_enumeration() {
        for n in 0..=4 {
            for k in 0..=n {
                let all = subsets(n, k);
                assert_eq!(all.len(), binomial(n, k));
                for (i, s) in all.iter().enumerate() {
                    assert_eq!(subset_index(n, s), i, "n={n} k={k} {s:?}");
                }
            }
        }
    }

    #[test]
    fn wedge_sign_basics() {
        assert_eq!(wedge_sign(&[1], &[0]), Some((-1.0, vec![0, 1])));
        assert_eq!(wedge_sign(&[0], &[1, 2]), Some((1.0, vec![0, 1, 2])));
        assert_eq!(wedge_sign(&[1], &[0, 2]), Some((-1.0, vec![0, 1, 2])));
        assert_eq!(wedge_sign(&[1], &[1]), None);
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices_le(2, 3).len(), 10);
        assert_eq!(multi_indices_le(3, 2).len(), 10);
        assert_eq!(multi_indices_eq(3, 1).len(), 3);
        assert_eq!(multi_indices_le(0, 4).len(), 1);
    }
}
