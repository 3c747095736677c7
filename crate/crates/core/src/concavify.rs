//! One-shot value programs solved as linear programs over a simplex mesh.
//!
//! Each program picks weights on candidate beliefs to maximize the mean objective subject to the
//! weights averaging back to the prior. The candidate set is a uniform mesh (of the simplex, or
//! of `F(mu0, alpha)` for the biased-posterior programs) plus the prior itself, optionally
//! augmented with points bracketing every best-response boundary crossed by a mesh edge, so that
//! the discontinuities of the value function are captured to machine precision.

use std::collections::HashMap;

use crate::belief::{apply_bias, Belief, BiasParam};
use crate::decision::{
    best_response, exact_receiver_argmax, v_hat, v_hat_alpha, ActionModel, DecisionProblem,
};
use crate::error::{Error, Result};
use crate::grid::{compositions, lattice_point};
use crate::lp::Lp;

const BISECTION_STEPS: usize = 64;
const MAX_GRID_POINTS: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    /// Subdivisions per simplex edge; the mesh step is `1 / resolution`.
    pub resolution: usize,
    /// Bracket best-response boundaries on mesh edges by bisection.
    pub refine_boundaries: bool,
}

impl GridSpec {
    pub fn new(resolution: usize, refine_boundaries: bool) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidGrid(format!(
                "resolution must be at least 2, got {resolution}"
            )));
        }
        Ok(GridSpec {
            resolution,
            refine_boundaries,
        })
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            resolution: 200,
            refine_boundaries: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcavificationResult {
    pub value: f64,
    /// Optimal distribution of posteriors, sorted by belief coordinates.
    pub support: Vec<(Belief, f64)>,
    /// Primal value minus the best affine upper bound read off the duals; `<= 0` up to rounding.
    pub certificate_gap: f64,
}

/// Mesh of the image of the simplex under `map`, plus optional boundary brackets.
struct Candidates {
    points: Vec<Belief>,
}

fn build_candidates(
    dim: usize,
    grid: GridSpec,
    map: &dyn Fn(&Belief) -> Belief,
    cell: Option<&dyn Fn(&Belief) -> usize>,
    extra: &Belief,
) -> Result<Candidates> {
    let count = binomial(grid.resolution + dim - 1, dim - 1);
    if count > MAX_GRID_POINTS as f64 {
        return Err(Error::InvalidGrid(format!(
            "mesh would have {count:.0} points"
        )));
    }
    let lattice = compositions(dim, grid.resolution);
    let mut points: Vec<Belief> = lattice
        .iter()
        .map(|c| map(&lattice_point(c, grid.resolution)))
        .collect();

    if let (true, Some(cell)) = (grid.refine_boundaries, cell) {
        let cells: Vec<usize> = points.iter().map(cell).collect();
        let index: HashMap<&[usize], usize> = lattice
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_slice(), i))
            .collect();
        let mut brackets = Vec::new();
        let mut neighbor = vec![0usize; dim];
        for (a, c) in lattice.iter().enumerate() {
            for i in 0..dim {
                for j in (i + 1)..dim {
                    if c[j] == 0 {
                        continue;
                    }
                    neighbor.copy_from_slice(c);
                    neighbor[i] += 1;
                    neighbor[j] -= 1;
                    let b = index[neighbor.as_slice()];
                    if cells[a] != cells[b] {
                        let (lo, hi) = bisect(&points[a], &points[b], cells[a], cell);
                        brackets.push(lo);
                        brackets.push(hi);
                    }
                }
            }
        }
        points.extend(brackets);
    }
    points.push(extra.clone());
    Ok(Candidates { points })
}

/// Narrows the segment `[p, q]` to a pair of points straddling the first cell change from `p`.
fn bisect(
    p: &Belief,
    q: &Belief,
    cell_p: usize,
    cell: &dyn Fn(&Belief) -> usize,
) -> (Belief, Belief) {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let at = |t: f64| q.mix(t, p);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cell(&at(mid)) == cell_p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (at(lo), at(hi))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Solves `max sum_g w_g f(mu_g)` s.t. `sum_g w_g mu_g = mu0`, `w` a probability vector.
fn concavify_points(
    mu0: &Belief,
    points: &[Belief],
    objective: &[f64],
) -> Result<ConcavificationResult> {
    let d = mu0.dim();
    // Coordinates 0..d-1 plus the mass row; the last coordinate is implied.
    let row = |b: &Belief| -> Vec<f64> {
        let mut r: Vec<f64> = b.weights()[..d - 1].to_vec();
        r.push(1.0);
        r
    };
    let columns: Vec<Vec<f64>> = points.iter().map(row).collect();
    let rhs = row(mu0);
    let sol = Lp {
        columns: &columns,
        objective,
        rhs: &rhs,
    }
    .solve()?;

    let affine = |c: &[f64]| -> f64 { sol.duals.iter().zip(c).map(|(y, a)| y * a).sum() };
    let violation = columns
        .iter()
        .zip(objective)
        .map(|(c, f)| f - affine(c))
        .fold(f64::NEG_INFINITY, f64::max);
    let upper = affine(&rhs) + violation.max(0.0);

    let mut support: Vec<(Belief, f64)> = sol
        .basic
        .iter()
        .map(|&(j, w)| (points[j].clone(), w))
        .collect();
    support.sort_by(|a, b| {
        a.0.weights()
            .iter()
            .zip(b.0.weights())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(ConcavificationResult {
        value: sol.value,
        support,
        certificate_gap: sol.value - upper,
    })
}

fn finite_cell(problem: &DecisionProblem) -> Option<impl Fn(&Belief) -> usize + '_> {
    matches!(problem.action_model(), ActionModel::Finite { .. })
        .then(|| move |mu: &Belief| exact_receiver_argmax(problem, mu).expect("finite action"))
}

fn solve_with(
    problem: &DecisionProblem,
    grid: GridSpec,
    map: &dyn Fn(&Belief) -> Belief,
    cell: Option<&dyn Fn(&Belief) -> usize>,
    objective: &dyn Fn(&Belief) -> f64,
) -> Result<ConcavificationResult> {
    let GridSpec { resolution, .. } = GridSpec::new(grid.resolution, grid.refine_boundaries)?;
    let _ = resolution;
    let mu0 = problem.prior();
    let cands = build_candidates(mu0.dim(), grid, map, cell, mu0)?;
    let values: Vec<f64> = cands.points.iter().map(objective).collect();
    concavify_points(mu0, &cands.points, &values)
}

/// The standard concavification value `V(mu0)`.
pub fn solve_v(problem: &DecisionProblem, grid: GridSpec) -> Result<ConcavificationResult> {
    let cell = finite_cell(problem);
    solve_with(
        problem,
        grid,
        &|g| g.clone(),
        cell.as_ref().map(|c| c as &dyn Fn(&Belief) -> usize),
        &|mu| v_hat(problem, mu),
    )
}

/// One-shot value against a biased receiver, in Bayesian-posterior coordinates.
pub fn solve_v_alpha(
    problem: &DecisionProblem,
    alpha: BiasParam,
    grid: GridSpec,
) -> Result<ConcavificationResult> {
    let cell = finite_cell(problem);
    let biased_cell = cell
        .as_ref()
        .map(|c| move |mu: &Belief| c(&apply_bias(alpha, problem.prior(), mu)));
    solve_with(
        problem,
        grid,
        &|g| g.clone(),
        biased_cell.as_ref().map(|c| c as &dyn Fn(&Belief) -> usize),
        &|mu| v_hat_alpha(problem, mu, alpha),
    )
}

/// One-shot value when the sender is as biased as the receiver: concavify `v_hat` over
/// biased posteriors restricted to `F(mu0, alpha)`. Support is in biased coordinates.
pub fn solve_v_alpha_biased(
    problem: &DecisionProblem,
    alpha: BiasParam,
    grid: GridSpec,
) -> Result<ConcavificationResult> {
    let cell = finite_cell(problem);
    solve_with(
        problem,
        grid,
        &|g| apply_bias(alpha, problem.prior(), g),
        cell.as_ref().map(|c| c as &dyn Fn(&Belief) -> usize),
        &|mu| v_hat(problem, mu),
    )
}

/// Transparent-motives form: choose biased posteriors in `F(mu0, alpha)` to maximize
/// `v(a(mu'))`. Agrees with [`solve_v_alpha`] when the sender's utility ignores the state.
pub fn solve_transparent(
    problem: &DecisionProblem,
    alpha: BiasParam,
    grid: GridSpec,
) -> Result<ConcavificationResult> {
    if !problem.is_transparent() {
        return Err(Error::NotTransparentMotives);
    }
    let cell = finite_cell(problem);
    solve_with(
        problem,
        grid,
        &|g| apply_bias(alpha, problem.prior(), g),
        cell.as_ref().map(|c| c as &dyn Fn(&Belief) -> usize),
        &|mu| problem.sender_utility(0, &best_response(problem, mu)),
    )
}

/// `max v_hat` over a mesh of `F(mu0, alpha)` (with boundary brackets), and a maximizer.
pub fn sup_over_feasible(
    problem: &DecisionProblem,
    alpha: BiasParam,
    grid: GridSpec,
) -> Result<(f64, Belief)> {
    let grid = GridSpec::new(grid.resolution, grid.refine_boundaries)?;
    let cell = finite_cell(problem);
    let mu0 = problem.prior();
    let cands = build_candidates(
        mu0.dim(),
        grid,
        &|g| apply_bias(alpha, mu0, g),
        cell.as_ref().map(|c| c as &dyn Fn(&Belief) -> usize),
        mu0,
    )?;
    let mut best = (f64::NEG_INFINITY, mu0.clone());
    for p in cands.points {
        let v = v_hat(problem, &p);
        if v > best.0 {
            best = (v, p);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::is_feasible_biased_posterior;
    use crate::decision::library::{linear, prosecutor, quadratic_cs};

    fn a(x: f64) -> BiasParam {
        BiasParam::new(x).unwrap()
    }

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n, true).unwrap()
    }

    #[test]
    fn prosecutor_v() {
        let r = solve_v(&prosecutor(0.3), grid(100)).unwrap();
        assert!((r.value - 0.6).abs() < 1e-12);
        assert_eq!(r.support.len(), 2);
        assert!((r.support[0].0[1] - 0.5).abs() < 1e-12 && (r.support[0].1 - 0.6).abs() < 1e-12);
        assert!(r.support[1].0[1].abs() < 1e-12 && (r.support[1].1 - 0.4).abs() < 1e-12);
        assert!(r.certificate_gap <= 1e-9);
    }

    #[test]
    fn refinement_finds_off_grid_thresholds() {
        // threshold at 0.5 is off a 7-subdivision mesh
        let coarse = solve_v(&prosecutor(0.3), GridSpec::new(7, false).unwrap()).unwrap();
        let fine = solve_v(&prosecutor(0.3), GridSpec::new(7, true).unwrap()).unwrap();
        assert!(coarse.value < 0.6 - 1e-3);
        assert!((fine.value - 0.6).abs() < 1e-12);
    }

    #[test]
    fn linear_value_is_prior_mean() {
        for n in [2, 5, 50] {
            let r = solve_v(&linear(0.5, 1.0), grid(n)).unwrap();
            assert!((r.value - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn cs_unbiased_and_high_prior_prosecutor() {
        let cs = quadratic_cs(0.3, 0.0);
        let r = solve_v(&cs, grid(40)).unwrap();
        // v_hat(mu) = -Var(mu) <= 0 with equality at vertices: full disclosure gives 0.
        assert!(r.value.abs() < 1e-12);
        let p = prosecutor(0.7);
        let r = solve_v(&p, grid(40)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prosecutor_v_alpha() {
        let p = prosecutor(0.3);
        let r0 = solve_v_alpha(&p, BiasParam::ZERO, grid(100)).unwrap();
        assert!((r0.value - 0.6).abs() < 1e-12);
        let r = solve_v_alpha(&p, a(0.5), grid(100)).unwrap();
        assert!((r.value - 3.0 / 7.0).abs() < 1e-12);
        assert!((r.support[0].0[1] - 0.7).abs() < 1e-9);
    }

    #[test]
    fn cs_v_alpha_is_full_revelation() {
        let cs = quadratic_cs(0.5, 0.1);
        let r = solve_v_alpha(&cs, a(0.5), grid(100)).unwrap();
        assert!((r.value + 0.0725).abs() < 1e-12);
        assert_eq!(r.support.len(), 2);
        assert_eq!(r.support[0].0, Belief::vertex(2, 1));
        assert_eq!(r.support[1].0, Belief::vertex(2, 0));
    }

    #[test]
    fn prosecutor_biased_and_transparent() {
        let p = prosecutor(0.3);
        let r = solve_v_alpha_biased(&p, a(0.5), grid(100)).unwrap();
        assert!((r.value - 3.0 / 7.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = r.support.iter().map(|(b, w)| (b[1], *w)).collect();
        assert!((pts[0].0 - 0.5).abs() < 1e-12 && (pts[0].1 - 3.0 / 7.0).abs() < 1e-12);
        assert!((pts[1].0 - 0.15).abs() < 1e-12 && (pts[1].1 - 4.0 / 7.0).abs() < 1e-12);
        for (b, _) in &r.support {
            assert!(is_feasible_biased_posterior(a(0.5), p.prior(), b));
        }
        let t = solve_transparent(&p, a(0.5), grid(100)).unwrap();
        assert!((t.value - r.value).abs() < 1e-12);
        let zero = solve_v_alpha_biased(&p, BiasParam::ZERO, grid(100)).unwrap();
        assert!((zero.value - 0.6).abs() < 1e-12);
        let strong = solve_v_alpha_biased(&p, a(0.99), grid(100)).unwrap();
        assert!(strong.value.abs() < 1e-12);
    }

    #[test]
    fn transparent_requires_state_independence() {
        assert_eq!(
            solve_transparent(&quadratic_cs(0.5, 0.1), a(0.5), grid(10)),
            Err(Error::NotTransparentMotives)
        );
    }

    #[test]
    fn sup_over_feasible_examples() {
        let (v, arg) = sup_over_feasible(&prosecutor(0.3), a(0.5), grid(100)).unwrap();
        assert_eq!(v, 1.0);
        assert!(arg[1] >= 0.5 - 1e-12 && arg[1] <= 0.65 + 1e-12);
        let (v, arg) = sup_over_feasible(&linear(0.5, 1.0), a(0.5), grid(100)).unwrap();
        assert!((v - 0.75).abs() < 1e-12);
        assert!((arg[1] - 0.75).abs() < 1e-12);
        let (v, _) = sup_over_feasible(&linear(0.5, 1.0), BiasParam::ZERO, grid(10)).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_grid() {
        assert!(GridSpec::new(1, true).is_err());
        let bad = GridSpec {
            resolution: 1,
            refine_boundaries: false,
        };
        assert!(solve_v(&prosecutor(0.3), bad).is_err());
    }
}
