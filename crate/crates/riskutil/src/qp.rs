//! Exact Euclidean projection onto the discretized utility polytope for
//! small dimensions, by direct KKT enumeration.
//!
//! This is a reference implementation: it enumerates candidate active sets
//! of the inequality constraints, solves the corresponding
//! equality-constrained least-distance problem exactly, and accepts the
//! first candidate satisfying primal feasibility and dual nonnegativity.
//! Cost grows combinatorially, so it is only meant for `d` up to about 8,
//! where it certifies the iterative projection.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::{c, Real};

/// All inequality constraints `a . u <= b` of the polytope
/// `{u[0] = 0, u[d-1] = H, monotone, pairwise Lipschitz}`, written over the
/// full vector. The two boundary equalities are handled separately.
fn inequality_rows<R: Real>(d: usize, lipschitz: R, eps: R) -> Vec<(Vec<R>, R)> {
    let mut rows = Vec::new();
    // Monotonicity: u[i] - u[i+1] <= 0.
    for i in 0..d - 1 {
        let mut a = vec![R::zero(); d];
        a[i] = R::one();
        a[i + 1] = -R::one();
        rows.push((a, R::zero()));
    }
    // Pairwise Lipschitz (upper side; the lower side is implied by
    // monotonicity inside the set): u[j] - u[i] <= L (j - i) eps.
    for i in 0..d {
        for j in i + 1..d {
            let mut a = vec![R::zero(); d];
            a[i] = -R::one();
            a[j] = R::one();
            rows.push((a, lipschitz * c::<R>((j - i) as f64) * eps));
        }
    }
    rows
}

/// Exact projection of `v` onto the boundary-pinned polytope; `None` when
/// the KKT search fails (which signals a bug or an infeasible instance).
pub fn exact_projection<R: Real>(v: &[R], grid: &Grid<R>, lipschitz: R) -> Result<Vec<R>> {
    let d = grid.d();
    assert_eq!(v.len(), d);
    if d > 8 {
        return Err(Error::EnumerationCapExceeded(format!(
            "exact projection reference supports d <= 8, got {d}"
        )));
    }
    let h = c::<R>(grid.horizon() as f64);
    if lipschitz * c::<R>((d - 1) as f64) * grid.epsilon0() < h - c(1e-9) {
        return Err(Error::Infeasible(
            "Lipschitz band cannot span the horizon".into(),
        ));
    }

    // Work in the reduced space of free coordinates u[1..d-1].
    let free = d - 2;
    let rows = inequality_rows(d, lipschitz, grid.epsilon0());
    let reduced: Vec<(Vec<R>, R)> = rows
        .iter()
        .map(|(a, b)| {
            // substitute u[0] = 0, u[d-1] = H
            let rb = *b - a[d - 1] * h;
            (a[1..d - 1].to_vec(), rb)
        })
        .collect();
    let target = &v[1..d - 1];

    if free == 0 {
        return Ok(vec![R::zero(), h]);
    }

    let m = reduced.len();
    let feas_tol = c::<R>(1e-9);
    let dual_tol = c::<R>(-1e-9);

    // Candidate active sets in increasing size; at most `free` constraints
    // can be active with independent normals.
    let mut best: Option<Vec<R>> = None;
    let mut indices: Vec<usize> = Vec::new();
    for size in 0..=free.min(m) {
        indices.clear();
        if enumerate_sets(
            m,
            size,
            0,
            &mut indices,
            &mut |active: &[usize]| -> bool {
                match solve_kkt(target, &reduced, active) {
                    Some((x, lambdas)) => {
                        if lambdas.iter().any(|&l| l < dual_tol) {
                            return false;
                        }
                        for (a, b) in &reduced {
                            let lhs: R =
                                a.iter().zip(&x).map(|(&ai, &xi)| ai * xi).sum();
                            if lhs > *b + feas_tol {
                                return false;
                            }
                        }
                        let mut full = Vec::with_capacity(free + 2);
                        full.push(R::zero());
                        full.extend_from_slice(&x);
                        full.push(h);
                        best = Some(full);
                        true
                    }
                    None => false,
                }
            },
        ) {
            break;
        }
    }

    best.ok_or_else(|| Error::Infeasible("KKT enumeration found no optimum".into()))
}

/// Depth-first enumeration of `size`-subsets; stops early when the visitor
/// returns true.
fn enumerate_sets(
    m: usize,
    size: usize,
    start: usize,
    current: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]) -> bool,
) -> bool {
    if current.len() == size {
        return visit(current);
    }
    for i in start..m {
        current.push(i);
        if enumerate_sets(m, size, i + 1, current, visit) {
            return true;
        }
        current.pop();
    }
    false
}

/// Solves `min ||x - t||^2  s.t.  A_active x = b_active` via the KKT system
/// `[I A^T; A 0] [x; lambda] = [t; b]`; returns `None` on singular systems.
fn solve_kkt<R: Real>(
    target: &[R],
    rows: &[(Vec<R>, R)],
    active: &[usize],
) -> Option<(Vec<R>, Vec<R>)> {
    let n = target.len();
    let k = active.len();
    let dim = n + k;
    let mut mat = vec![R::zero(); dim * dim];
    let mut rhs = vec![R::zero(); dim];
    for i in 0..n {
        mat[i * dim + i] = R::one();
        rhs[i] = target[i];
    }
    for (row_idx, &ci) in active.iter().enumerate() {
        let (a, b) = &rows[ci];
        for j in 0..n {
            mat[j * dim + n + row_idx] = a[j];
            mat[(n + row_idx) * dim + j] = a[j];
        }
        rhs[n + row_idx] = *b;
    }
    let sol = gaussian_solve(&mut mat, &mut rhs, dim)?;
    // Sign convention: stationarity is x - t + sum lambda_i a_i = 0 and the
    // assembled system solves for +lambda directly.
    let x = sol[..n].to_vec();
    let lambdas = sol[n..].to_vec();
    Some((x, lambdas))
}

fn gaussian_solve<R: Real>(mat: &mut [R], rhs: &mut [R], n: usize) -> Option<Vec<R>> {
    for col in 0..n {
        // partial pivoting
        let mut pivot = col;
        let mut best = mat[col * n + col].abs();
        for row in col + 1..n {
            let v = mat[row * n + col].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best < c(1e-12) {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                mat.swap(col * n + j, pivot * n + j);
            }
            rhs.swap(col, pivot);
        }
        let diag = mat[col * n + col];
        for row in col + 1..n {
            let factor = mat[row * n + col] / diag;
            if factor == R::zero() {
                continue;
            }
            for j in col..n {
                let v = mat[col * n + j];
                mat[row * n + j] -= factor * v;
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = vec![R::zero(); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for j in row + 1..n {
            acc -= mat[row * n + j] * x[j];
        }
        x[row] = acc / mat[row * n + row];
    }
    Some(x)
}
