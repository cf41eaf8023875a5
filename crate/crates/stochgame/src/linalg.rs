//! Direct solves of `(I - d·P_σ) x = b` and `(I - d·P_σᵀ) x = b`.
//!
//! Uniform rows contribute the rank-one term `(d/n)·e_U·1ᵀ`, which is split off
//! and restored with the Sherman–Morrison formula. The remaining sparse part is
//! factored by Gaussian elimination on the diagonal. `I - d·S` is strictly
//! diagonally dominant by rows (and its transpose by columns) for `0 ≤ d < 1`,
//! so diagonal pivots are safe and no row exchanges are needed.

use crate::game::{Strategy, StochasticGame, Transition};
use crate::scalar::Scalar;

type Row<F> = Vec<(usize, F)>;

/// Solves `(I - d·P_σ) x = b`, or the transposed system when `transpose` is set.
pub fn solve_resolvent<F: Scalar>(
    game: &StochasticGame<F>,
    sigma: &Strategy,
    d: F,
    b: &[F],
    transpose: bool,
) -> Vec<F> {
    let n = game.num_states();
    assert_eq!(b.len(), n, "right-hand side length");
    let (rows, uniform) = sparse_part(game, sigma, d, transpose);
    let weight = d / F::from_usize_lossy(n);
    if !uniform.iter().any(|&u| u) {
        return eliminate(rows, vec![b.to_vec()]).pop().unwrap();
    }
    // The correction is a·1ᵀ (plain) or 1·aᵀ (transposed) with a = weight·e_U.
    let a: Vec<F> = uniform
        .iter()
        .map(|&u| if u { weight } else { F::zero() })
        .collect();
    let second = if transpose { vec![F::one(); n] } else { a.clone() };
    let mut sol = eliminate(rows, vec![b.to_vec(), second]);
    let z = sol.pop().unwrap();
    let y = sol.pop().unwrap();
    let (num, den) = if transpose {
        (dot(&a, &y), F::one() - dot(&a, &z))
    } else {
        (y.iter().copied().sum::<F>(), F::one() - z.iter().copied().sum::<F>())
    };
    let scale = num / den;
    y.iter().zip(&z).map(|(&yi, &zi)| yi + zi * scale).collect()
}

/// `(I - d·P_σ) x - b` (or transposed), computed directly from the game.
pub fn resolvent_residual<F: Scalar>(
    game: &StochasticGame<F>,
    sigma: &Strategy,
    d: F,
    x: &[F],
    b: &[F],
    transpose: bool,
) -> Vec<F> {
    let px = if transpose {
        apply_transpose(game, sigma, x)
    } else {
        apply(game, sigma, x)
    };
    x.iter()
        .zip(&px)
        .zip(b)
        .map(|((&xi, &pi), &bi)| xi - d * pi - bi)
        .collect()
}

/// `P_σ x`.
pub fn apply<F: Scalar>(game: &StochasticGame<F>, sigma: &Strategy, x: &[F]) -> Vec<F> {
    let m = crate::game::mean(x);
    (0..game.num_states())
        .map(|s| game.expect_with_mean(s, sigma.get(s), x, m))
        .collect()
}

/// `P_σᵀ x`.
pub fn apply_transpose<F: Scalar>(game: &StochasticGame<F>, sigma: &Strategy, x: &[F]) -> Vec<F> {
    let n = game.num_states();
    let mut out = vec![F::zero(); n];
    let mut uniform_mass = F::zero();
    for s in 0..n {
        match &game.action(s, sigma.get(s)).transition {
            Transition::Uniform => uniform_mass = uniform_mass + x[s],
            Transition::Sparse(entries) => {
                for &(t, p) in entries {
                    out[t] = out[t] + p * x[s];
                }
            }
        }
    }
    let share = uniform_mass / F::from_usize_lossy(n);
    out.iter_mut().for_each(|o| *o = *o + share);
    out
}

fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Rows of `I - d·S` (or its transpose) with `S` the non-uniform part of `P_σ`,
/// plus the mask of uniform rows.
fn sparse_part<F: Scalar>(
    game: &StochasticGame<F>,
    sigma: &Strategy,
    d: F,
    transpose: bool,
) -> (Vec<Row<F>>, Vec<bool>) {
    let n = game.num_states();
    let mut rows: Vec<Row<F>> = (0..n).map(|s| vec![(s, F::one())]).collect();
    let mut uniform = vec![false; n];
    for s in 0..n {
        match &game.action(s, sigma.get(s)).transition {
            Transition::Uniform => uniform[s] = true,
            Transition::Sparse(entries) => {
                for &(t, p) in entries {
                    let (r, c) = if transpose { (t, s) } else { (s, t) };
                    rows[r].push((c, -d * p));
                }
            }
        }
    }
    for row in &mut rows {
        normalize_row(row);
    }
    (rows, uniform)
}

/// Sorts by column and merges duplicates.
fn normalize_row<F: Scalar>(row: &mut Row<F>) {
    row.sort_by_key(|e| e.0);
    let mut out: Row<F> = Vec::with_capacity(row.len());
    for &(c, v) in row.iter() {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 = last.1 + v,
            _ => out.push((c, v)),
        }
    }
    *row = out;
}

fn find<F>(row: &Row<F>, c: usize) -> Option<usize> {
    row.binary_search_by_key(&c, |e| e.0).ok()
}

/// `target - f·source` over sorted sparse rows, skipping column `skip`.
fn axpy_row<F: Scalar>(target: &Row<F>, f: F, source: &Row<F>, skip: usize, fill: &mut Vec<usize>) -> Row<F> {
    let mut out = Vec::with_capacity(target.len() + source.len());
    let (mut i, mut j) = (0, 0);
    while i < target.len() || j < source.len() {
        let ct = target.get(i).map_or(usize::MAX, |e| e.0);
        let cs = source.get(j).map_or(usize::MAX, |e| e.0);
        if ct < cs {
            if ct != skip {
                out.push(target[i]);
            }
            i += 1;
        } else if cs < ct {
            if cs != skip {
                out.push((cs, -f * source[j].1));
                fill.push(cs);
            }
            j += 1;
        } else {
            if ct != skip {
                out.push((ct, target[i].1 - f * source[j].1));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

/// Gaussian elimination with diagonal pivots in a fill-reducing static order
/// (sparsest rows first), then back substitution, for several right-hand sides.
fn eliminate<F: Scalar>(mut rows: Vec<Row<F>>, mut rhs: Vec<Vec<F>>) -> Vec<Vec<F>> {
    let n = rows.len();
    let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, row) in rows.iter().enumerate() {
        for &(c, _) in row {
            if c != r {
                col_rows[c].push(r);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&k| (rows[k].len() * col_rows[k].len(), k));
    let mut done = vec![false; n];
    let mut fill = Vec::new();
    for &k in &order {
        done[k] = true;
        let pivot = rows[k][find(&rows[k], k).expect("diagonal entry")].1;
        let users = std::mem::take(&mut col_rows[k]);
        for j in users {
            if done[j] {
                continue;
            }
            let Some(pos) = find(&rows[j], k) else {
                continue;
            };
            let f = rows[j][pos].1 / pivot;
            fill.clear();
            let updated = axpy_row(&rows[j], f, &rows[k], k, &mut fill);
            for &c in &fill {
                if c != j && find(&rows[j], c).is_none() {
                    col_rows[c].push(j);
                }
            }
            rows[j] = updated;
            for b in rhs.iter_mut() {
                b[j] = b[j] - f * b[k];
            }
        }
    }
    let mut sol: Vec<Vec<F>> = vec![vec![F::zero(); n]; rhs.len()];
    for &k in order.iter().rev() {
        let row = &rows[k];
        let mut diag = F::one();
        for (x, b) in sol.iter_mut().zip(&rhs) {
            let mut acc = b[k];
            for &(c, v) in row {
                if c == k {
                    diag = v;
                } else {
                    acc = acc - v * x[c];
                }
            }
            x[k] = acc / diag;
        }
    }
    sol
}
