//! Dense two-phase revised simplex for `max c.x  s.t.  A x = b, x >= 0`.
//!
//! Sized for the concavification programs: a handful of equality rows (one per state) and up to
//! a few million columns. The basis inverse is kept explicitly and refactorized periodically.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    /// Basic columns with positive value, sorted by column index.
    pub basic: Vec<(usize, f64)>,
    /// Simplex multipliers `c_B B^-1`, one per row.
    pub duals: Vec<f64>,
}

/// Standard-form problem with column-major storage.
pub struct Lp<'a> {
    pub columns: &'a [Vec<f64>],
    pub objective: &'a [f64],
    pub rhs: &'a [f64],
}

const PIVOT_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 40;
const DEGENERATE_STREAK: usize = 50;
const MAX_ITERATIONS: usize = 100_000;

struct State {
    m: usize,
    basis: Vec<usize>,
    binv: Vec<Vec<f64>>,
    xb: Vec<f64>,
}

impl<'a> Lp<'a> {
    pub fn solve(&self) -> Result<LpSolution> {
        let m = self.rhs.len();
        let n = self.columns.len();
        if self.objective.len() != n {
            return Err(Error::LinearProgram(
                "objective length differs from column count".into(),
            ));
        }
        if self.columns.iter().any(|c| c.len() != m) {
            return Err(Error::LinearProgram(
                "column length differs from row count".into(),
            ));
        }
        // Flip rows so that b >= 0 and the artificial basis is feasible.
        let sign: Vec<f64> = self
            .rhs
            .iter()
            .map(|&b| if b < 0.0 { -1.0 } else { 1.0 })
            .collect();
        let rhs: Vec<f64> = self.rhs.iter().zip(&sign).map(|(b, s)| b * s).collect();
        let mut signed: Vec<Vec<f64>> = self
            .columns
            .iter()
            .map(|c| c.iter().zip(&sign).map(|(a, s)| a * s).collect())
            .collect();
        signed.extend((0..m).map(|i| {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            e
        }));
        let scale = self
            .objective
            .iter()
            .fold(1.0f64, |acc, c| acc.max(c.abs()));

        let mut st = State {
            m,
            basis: (n..n + m).collect(),
            binv: identity(m),
            xb: rhs.clone(),
        };

        // Phase 1: maximize minus the sum of artificials.
        let phase1 = |j: usize| if j >= n { -1.0 } else { 0.0 };
        run_simplex(&mut st, n, m, &signed, &phase1, &rhs, 1e-12, true)?;
        let infeasibility: f64 = st
            .basis
            .iter()
            .zip(&st.xb)
            .filter(|(&j, _)| j >= n)
            .map(|(_, x)| x)
            .sum();
        if infeasibility > 1e-9 {
            return Err(Error::InfeasibleGrid);
        }
        drive_out_artificials(&mut st, n, &signed);

        // Phase 2 on the original objective; artificials may not re-enter.
        let phase2 = |j: usize| if j >= n { 0.0 } else { self.objective[j] };
        run_simplex(&mut st, n, m, &signed, &phase2, &rhs, 1e-11 * scale, false)?;
        refactor(&mut st, &signed, &rhs)?;

        let duals = multipliers(&st, &phase2);
        // Duals were computed on sign-flipped rows.
        let duals = duals.iter().zip(&sign).map(|(y, s)| y * s).collect();
        let mut basic: Vec<(usize, f64)> = st
            .basis
            .iter()
            .zip(&st.xb)
            .filter(|(&j, &x)| j < n && x > 0.0)
            .map(|(&j, &x)| (j, x))
            .collect();
        basic.sort_by_key(|(j, _)| *j);
        let value = basic.iter().map(|(j, x)| self.objective[*j] * x).sum();
        Ok(LpSolution {
            value,
            basic,
            duals,
        })
    }
}

fn identity(m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn multipliers(st: &State, cost: &dyn Fn(usize) -> f64) -> Vec<f64> {
    let mut y = vec![0.0; st.m];
    for (r, &j) in st.basis.iter().enumerate() {
        let c = cost(j);
        if c != 0.0 {
            for (yi, b) in y.iter_mut().zip(&st.binv[r]) {
                *yi += c * b;
            }
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
fn run_simplex(
    st: &mut State,
    n: usize,
    m: usize,
    cols: &[Vec<f64>],
    cost: &dyn Fn(usize) -> f64,
    rhs: &[f64],
    tol: f64,
    allow_artificial: bool,
) -> Result<()> {
    let limit = if allow_artificial { n + m } else { n };
    let mut bland = false;
    let mut streak = 0;
    let mut in_basis = vec![false; n + m];
    for &j in &st.basis {
        in_basis[j] = true;
    }
    for iter in 0..MAX_ITERATIONS {
        if iter > 0 && iter % REFACTOR_EVERY == 0 {
            refactor(st, cols, rhs)?;
        }
        let y = multipliers(st, cost);
        let mut entering = None;
        let mut best = tol;
        for j in 0..limit {
            if in_basis[j] {
                continue;
            }
            let d = cost(j) - y.iter().zip(&cols[j][..]).map(|(y, a)| y * a).sum::<f64>();
            if d > best {
                entering = Some(j);
                best = d;
                if bland {
                    break;
                }
            }
        }
        let Some(j) = entering else {
            return Ok(());
        };
        let a = &cols[j][..];
        let u: Vec<f64> = st
            .binv
            .iter()
            .map(|row| row.iter().zip(a).map(|(b, a)| b * a).sum())
            .collect();
        let mut leave: Option<usize> = None;
        let mut theta = f64::INFINITY;
        for i in 0..m {
            if u[i] > PIVOT_TOL {
                let t = st.xb[i].max(0.0) / u[i];
                let better = match leave {
                    None => true,
                    Some(l) => {
                        t < theta - 1e-15 || (t <= theta + 1e-15 && st.basis[i] < st.basis[l])
                    }
                };
                if better {
                    leave = Some(i);
                    theta = t.min(theta);
                }
            }
        }
        let Some(r) = leave else {
            return Err(Error::LinearProgram("objective is unbounded".into()));
        };
        if theta <= 1e-14 {
            streak += 1;
            if streak > DEGENERATE_STREAK {
                bland = true;
            }
        } else {
            streak = 0;
        }
        pivot(st, r, &u);
        in_basis[st.basis[r]] = false;
        st.basis[r] = j;
        in_basis[j] = true;
    }
    Err(Error::LinearProgram("iteration limit reached".into()))
}

fn pivot(st: &mut State, r: usize, u: &[f64]) {
    let pr = u[r];
    for v in st.binv[r].iter_mut() {
        *v /= pr;
    }
    st.xb[r] /= pr;
    let row_r = st.binv[r].clone();
    let xr = st.xb[r];
    for i in 0..st.m {
        if i != r && u[i] != 0.0 {
            let f = u[i];
            for (v, w) in st.binv[i].iter_mut().zip(&row_r) {
                *v -= f * w;
            }
            st.xb[i] -= f * xr;
        }
    }
}

/// Recomputes `B^-1` and `x_B` from scratch by Gauss-Jordan elimination with partial pivoting.
fn refactor(st: &mut State, cols: &[Vec<f64>], rhs: &[f64]) -> Result<()> {
    let m = st.m;
    let basis_cols: Vec<&[f64]> = st.basis.iter().map(|&j| &cols[j][..]).collect();
    // aug = [B | I]
    let mut aug: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row: Vec<f64> = basis_cols.iter().map(|c| c[i]).collect();
            row.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..m {
        let p = (c..m)
            .max_by(|&a, &b| aug[a][c].abs().total_cmp(&aug[b][c].abs()))
            .expect("non-empty range");
        if aug[p][c].abs() < 1e-14 {
            return Err(Error::LinearProgram("basis became singular".into()));
        }
        aug.swap(c, p);
        let piv = aug[c][c];
        aug[c].iter_mut().for_each(|v| *v /= piv);
        let row_c = aug[c].clone();
        for (i, row) in aug.iter_mut().enumerate() {
            if i != c && row[c] != 0.0 {
                let f = row[c];
                row.iter_mut().zip(&row_c).for_each(|(v, w)| *v -= f * w);
            }
        }
    }
    st.binv = aug.into_iter().map(|row| row[m..].to_vec()).collect();
    st.xb = st
        .binv
        .iter()
        .map(|row| row.iter().zip(rhs).map(|(b, r)| b * r).sum::<f64>())
        .collect();
    Ok(())
}

/// Replaces zero-level artificial basics by original columns where possible.
fn drive_out_artificials(st: &mut State, n: usize, cols: &[Vec<f64>]) {
    for r in 0..st.m {
        if st.basis[r] < n {
            continue;
        }
        for j in 0..n {
            if st.basis.contains(&j) {
                continue;
            }
            let a = &cols[j][..];
            let u: Vec<f64> = st
                .binv
                .iter()
                .map(|row| row.iter().zip(a).map(|(b, a)| b * a).sum())
                .collect();
            if u[r].abs() > 1e-9 {
                pivot(st, r, &u);
                st.basis[r] = j;
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_program() {
        // max x + 2y  s.t. x + y + s = 4, x + 3y + t = 6
        let columns = vec![
            vec![1.0, 1.0],
            vec![1.0, 3.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ];
        let objective = vec![1.0, 2.0, 0.0, 0.0];
        let rhs = vec![4.0, 6.0];
        let sol = Lp {
            columns: &columns,
            objective: &objective,
            rhs: &rhs,
        }
        .solve()
        .unwrap();
        // optimum at x = 3, y = 1
        assert!((sol.value - 5.0).abs() < 1e-12);
        assert_eq!(sol.basic.len(), 2);
        assert!((sol.basic[0].1 - 3.0).abs() < 1e-12);
        assert!((sol.basic[1].1 - 1.0).abs() < 1e-12);
        // strong duality
        let dual: f64 = sol.duals.iter().zip(&rhs).map(|(y, b)| y * b).sum();
        assert!((dual - 5.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_program() {
        let columns = vec![vec![1.0]];
        let objective = vec![1.0];
        let rhs = vec![-1.0];
        assert!(Lp {
            columns: &columns,
            objective: &objective,
            rhs: &rhs
        }
        .solve()
        .is_err());
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let columns = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let objective = vec![1.0, 3.0];
        let rhs = vec![1.0, 1.0];
        let sol = Lp {
            columns: &columns,
            objective: &objective,
            rhs: &rhs,
        }
        .solve()
        .unwrap();
        assert!((sol.value - 3.0).abs() < 1e-12);
    }
}
