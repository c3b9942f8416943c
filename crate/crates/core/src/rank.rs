//! Rank of integer matrices over the rationals.
//!
//! Gaussian elimination is carried out modulo two large primes. The rank over
//! `F_p` never exceeds the rank over `Q`, and the two agree unless `p` divides
//! every nonzero maximal minor, so the larger of the two modular ranks is
//! taken. Incidence matrices only have `±1` entries, far from that regime.

use crate::sparse::CsrMatrix;

const PRIMES: [u64; 2] = [(1 << 61) - 1, 4_611_686_018_427_387_847];

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    acc
}

fn rank_mod(m: &CsrMatrix<i64>, p: u64) -> usize {
    let ncols = m.ncols();
    let reduce = |v: i64| -> u64 { v.rem_euclid(p as i64) as u64 };
    let mut rows: Vec<Vec<u64>> = (0..m.nrows())
        .map(|r| {
            let mut dense = vec![0u64; ncols];
            for (c, v) in m.row(r) {
                dense[c] = reduce(v);
            }
            dense
        })
        .collect();

    let mut rank = 0;
    for col in 0..ncols {
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let inv = pow_mod(rows[rank][col], p - 2, p);
        let pivot_row = rows[rank].clone();
        for r in rank + 1..rows.len() {
            let lead = rows[r][col];
            if lead == 0 {
                continue;
            }
            let factor = mul_mod(lead, inv, p);
            for c in col..ncols {
                if pivot_row[c] != 0 {
                    let sub = mul_mod(factor, pivot_row[c], p);
                    rows[r][c] = (rows[r][c] + p - sub) % p;
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

pub(crate) fn rank_over_rationals(m: &CsrMatrix<i64>) -> usize {
    if m.nnz() == 0 {
        return 0;
    }
    PRIMES.iter().map(|&p| rank_mod(m, p)).max().unwrap_or(0)
}
