//! Uniform meshes of the probability simplex.

use crate::belief::{Belief, BiasParam};

/// All compositions of `total` into `parts` non-negative integers, in lexicographic order.
pub fn compositions(parts: usize, total: usize) -> Vec<Vec<usize>> {
    fn rec(parts: usize, total: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=total {
            prefix.push(k);
            rec(parts - 1, total - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(parts, total, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

/// Beliefs `k / subdivisions` for every composition `k` of `subdivisions`.
pub fn simplex_grid(dim: usize, subdivisions: usize) -> Vec<Belief> {
    compositions(dim, subdivisions)
        .into_iter()
        .map(|c| lattice_point(&c, subdivisions))
        .collect()
}

pub(crate) fn lattice_point(c: &[usize], subdivisions: usize) -> Belief {
    let n = subdivisions as f64;
    Belief::renormalized(c.iter().map(|&k| k as f64 / n).collect())
}

/// The affine image `alpha * mu0 + (1 - alpha) * g` of a simplex point `g`; maps the simplex onto
/// `F(mu0, alpha)`.
pub fn into_feasible_set(alpha: BiasParam, mu0: &Belief, g: &Belief) -> Belief {
    crate::belief::apply_bias(alpha, mu0, g)
}

/// A uniform mesh of `F(mu0, alpha)`, obtained by mapping the simplex mesh into it.
pub fn feasible_set_grid(alpha: BiasParam, mu0: &Belief, subdivisions: usize) -> Vec<Belief> {
    simplex_grid(mu0.dim(), subdivisions)
        .iter()
        .map(|g| into_feasible_set(alpha, mu0, g))
        .collect()
}
