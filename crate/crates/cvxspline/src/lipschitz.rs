//! Verification lab for the geometry behind the solver's selection matrices.
//!
//! The uniform-boundedness argument for the convex fit rests on a chain of
//! facts about `F_α F_αᵀ` that hold for every active set `α`: the product is
//! tridiagonal, nonnegative, strictly diagonally dominant with explicit
//! entries determined by the breakpoint gaps; its row sums equal the row sums
//! `η_i` of `F_α`; and after scaling by `Ξ_α = diag(1/η_i)` its spectrum sits
//! inside `[1/3, 1]`. The functions here recompute those quantities two ways
//! (matrix arithmetic vs. closed forms) and sweep `‖G_α‖_∞` across knot
//! counts to confirm the bound does not grow.

use crate::cone_qp::{breakpoint_blocks, selection_rows, solution_operator, QpError};
use crate::linalg::{inf_norm, symmetric_eigenvalues};
use crate::splines::{build_design, SplineBasis, SplineError};
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Row-sum deviations beyond this are counted as violations.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Slack allowed around the `[1/3, 1]` spectral window.
pub const EIG_TOL: f64 = 1e-10;
/// Design points per knot interval used when a sweep assembles its Gram matrix.
pub const SWEEP_POINTS_PER_INTERVAL: usize = 64;

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("eigenvalue computation failed: {0}")]
    Eig(#[from] crate::linalg::LinalgError),
    #[error("knot grid must be nonempty")]
    EmptyGrid,
}

/// Outcome of checking `F_α F_αᵀ` against its predicted structure.
#[derive(Debug, Clone, Serialize)]
pub struct StructureCheck {
    /// Entries more than one off the diagonal are exactly zero.
    pub tridiagonal: bool,
    /// All entries are nonnegative.
    pub nonnegative: bool,
    /// Strict diagonal dominance (the dominance gap never falls below 1/2).
    pub diagonally_dominant: bool,
    /// Largest absolute deviation from the closed-form entries.
    pub entry_deviation: f64,
    pub pass: bool,
}

/// Per-row breakpoint gaps (left, right) in the same order as the rows of
/// `selection_rows`; singleton rows have neither.
fn row_gaps(active: &[usize], m: usize) -> Vec<(Option<usize>, Option<usize>)> {
    let (blocks, n_active) = breakpoint_blocks(active, m);
    let mut gaps = Vec::with_capacity(m - n_active);
    let mut block_iter = blocks.iter().peekable();
    let mut c = 0;
    while c < m {
        if let Some(knots) = block_iter.peek().filter(|k| k[0] == c) {
            for (j, &t) in knots.iter().enumerate() {
                let left = (j > 0).then(|| t - knots[j - 1]);
                let right = (j + 1 < knots.len()).then(|| knots[j + 1] - t);
                gaps.push((left, right));
            }
            c = *knots.last().expect("blocks are nonempty") + 1;
            block_iter.next();
        } else {
            gaps.push((None, None));
            c += 1;
        }
    }
    gaps
}

/// Squared mass of one linear tail across a gap of `h` intervals:
/// `Σ_{i=1}^{h-1} (i/h)² = (h−1)(2h−1)/(6h)`.
fn tail_mass(h: Option<usize>) -> f64 {
    match h {
        None => 0.0,
        Some(h) => {
            let h = h as f64;
            (h - 1.0) * (2.0 * h - 1.0) / (6.0 * h)
        }
    }
}

/// Closed-form `F_α F_αᵀ`: diagonal `1 + tail(left) + tail(right)`, and the
/// off-diagonal `(h² − 1)/(6h)` between consecutive rows of one block.
fn expected_product(active: &[usize], m: usize) -> Array2<f64> {
    let gaps = row_gaps(active, m);
    let l = gaps.len();
    let mut t = Array2::<f64>::zeros((l, l));
    for (j, &(left, right)) in gaps.iter().enumerate() {
        t[[j, j]] = 1.0 + tail_mass(left) + tail_mass(right);
        if let Some(h) = right {
            // A right gap means row j+1 exists and shares this gap.
            let h = h as f64;
            let off = (h * h - 1.0) / (6.0 * h);
            t[[j, j + 1]] = off;
            t[[j + 1, j]] = off;
        }
    }
    t
}

/// Expected row sums of `F_α`: `1 + (h_left − 1)/2 + (h_right − 1)/2`.
fn expected_row_sums(active: &[usize], m: usize) -> Vec<f64> {
    row_gaps(active, m)
        .iter()
        .map(|&(left, right)| {
            let half = |h: Option<usize>| h.map_or(0.0, |h| (h as f64 - 1.0) / 2.0);
            1.0 + half(left) + half(right)
        })
        .collect()
}

/// Verify tridiagonality, nonnegativity, strict diagonal dominance, and the
/// closed-form entries of `F_α F_αᵀ`.
pub fn check_product_structure(active: &[usize], m: usize) -> StructureCheck {
    let f = selection_rows(active, m);
    let t = f.dot(&f.t());
    let l = t.nrows();
    let mut tridiagonal = true;
    let mut nonnegative = true;
    let mut dominant = true;
    let mut deviation = 0.0_f64;
    let expected = expected_product(active, m);
    for i in 0..l {
        let mut off = 0.0;
        for j in 0..l {
            let v = t[[i, j]];
            if i.abs_diff(j) > 1 && v != 0.0 {
                tridiagonal = false;
            }
            if v < 0.0 {
                nonnegative = false;
            }
            if i != j {
                off += v.abs();
            }
            deviation = deviation.max((v - expected[[i, j]]).abs());
        }
        // The dominance gap is 1 for singleton and block-edge rows and at
        // least 1/2 for interior rows, so a strict check is safe.
        if t[[i, i]] - off <= 1e-9 {
            dominant = false;
        }
    }
    let pass = tridiagonal && nonnegative && dominant && deviation <= ROW_SUM_TOL;
    StructureCheck { tridiagonal, nonnegative, diagonally_dominant: dominant, entry_deviation: deviation, pass }
}

/// Largest deviation between the row sums of `F_α F_αᵀ` and the row sums of
/// `F_α` (which also match their closed form).
pub fn row_sum_identity(active: &[usize], m: usize) -> f64 {
    let f = selection_rows(active, m);
    let t = f.dot(&f.t());
    let eta_expected = expected_row_sums(active, m);
    let mut dev = 0.0_f64;
    for (j, row) in t.rows().into_iter().enumerate() {
        let eta: f64 = f.row(j).sum();
        dev = dev.max((row.sum() - eta).abs());
        dev = dev.max((eta - eta_expected[j]).abs());
    }
    dev
}

/// Extreme eigenvalues of `Ξ_α F_α F_αᵀ`, computed through the similar
/// symmetric matrix `Ξ^{1/2} F F ᵀ Ξ^{1/2}`. The pair always lies in `[1/3, 1]`.
pub fn eigenvalue_range(active: &[usize], m: usize) -> Result<(f64, f64), LabError> {
    let f = selection_rows(active, m);
    let t = f.dot(&f.t());
    let l = t.nrows();
    let eta: Vec<f64> = (0..l).map(|j| f.row(j).sum()).collect();
    let mut s = Array2::<f64>::zeros((l, l));
    for i in 0..l {
        for j in 0..l {
            s[[i, j]] = t[[i, j]] / (eta[i] * eta[j]).sqrt();
        }
    }
    let eig = symmetric_eigenvalues(&s.view())?;
    Ok((eig[0], eig[l - 1]))
}

/// Active-set sample for one dimension: exhaustive when `m ≤ 10`, otherwise
/// `count` random subsets (each constraint kept with probability 1/2)
/// prefixed by three structured patterns: all active, alternating, and a
/// single long run.
pub fn sample_active_sets(m: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let n_constraints = m - 2;
    if m <= 10 {
        return (0u32..(1u32 << n_constraints))
            .map(|mask| (0..n_constraints).filter(|&i| mask >> i & 1 == 1).collect())
            .collect();
    }
    let mut out: Vec<Vec<usize>> = Vec::with_capacity(count);
    out.push((0..n_constraints).collect());
    out.push((0..n_constraints).step_by(2).collect());
    let start = n_constraints / 4;
    out.push((start..start + n_constraints / 2).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < count.max(3) {
        let set: Vec<usize> = (0..n_constraints).filter(|_| rng.random::<bool>()).collect();
        out.push(set);
    }
    out.truncate(count.max(3));
    out
}

/// One sweep batch: all sampled active sets at a single knot count.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub kn: usize,
    pub m: usize,
    pub alphas_tested: usize,
    pub sampling: String,
    pub max_inf_norm_g: f64,
    pub eig_min: f64,
    pub eig_max: f64,
    pub row_sum_deviation: f64,
    pub structure_violations: usize,
}

/// Full sweep report across a knot grid.
#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    pub degree: usize,
    pub points_per_interval: usize,
    pub seed: u64,
    pub records: Vec<SweepRecord>,
    /// Ratio of the last grid maximum of `‖G_α‖_∞` to the first.
    pub growth_ratio: f64,
    /// Ratio of the largest grid maximum to the smallest.
    pub spread_ratio: f64,
    /// Set when `growth_ratio` exceeds 1.5, evidence against uniform
    /// boundedness across the grid.
    pub growth_flag: bool,
}

impl LipschitzReport {
    pub fn total_violations(&self) -> usize {
        self.records.iter().map(|r| r.structure_violations).sum()
    }
}

/// Sweep `max_α ‖G_α‖_∞` and the structural checks across a grid of knot
/// counts. Each knot count assembles its Gram matrix from a design with 64
/// points per interval; active sets are sampled per [`sample_active_sets`]
/// and processed in parallel.
pub fn inf_norm_sweep(
    degree: usize,
    kn_grid: &[usize],
    alphas_per_kn: usize,
    seed: u64,
) -> Result<LipschitzReport, LabError> {
    if kn_grid.is_empty() {
        return Err(LabError::EmptyGrid);
    }
    let mut records = Vec::with_capacity(kn_grid.len());
    for (gi, &kn) in kn_grid.iter().enumerate() {
        let basis = SplineBasis::new(degree, kn)?;
        let n = SWEEP_POINTS_PER_INTERVAL * kn;
        let bundle = build_design(&basis, &vec![0.0; n])?;
        let m = basis.len();
        let alphas = sample_active_sets(m, alphas_per_kn, seed.wrapping_add(gi as u64));
        let sampling = if m <= 10 { "exhaustive" } else { "random+structured" };
        let per_alpha: Vec<Result<(f64, f64, f64, f64, bool), LabError>> = alphas
            .par_iter()
            .map(|alpha| {
                let f = selection_rows(alpha, m);
                let g = solution_operator(&f.view(), &bundle.gram.view())?;
                let norm = inf_norm(&g.view());
                let structure = check_product_structure(alpha, m);
                let row_dev = row_sum_identity(alpha, m);
                let (lo, hi) = eigenvalue_range(alpha, m)?;
                let ok = structure.pass
                    && row_dev <= ROW_SUM_TOL
                    && lo >= 1.0 / 3.0 - EIG_TOL
                    && hi <= 1.0 + EIG_TOL;
                Ok((norm, lo, hi, row_dev, ok))
            })
            .collect();
        let mut record = SweepRecord {
            kn,
            m,
            alphas_tested: alphas.len(),
            sampling: sampling.to_string(),
            max_inf_norm_g: 0.0,
            eig_min: f64::INFINITY,
            eig_max: f64::NEG_INFINITY,
            row_sum_deviation: 0.0,
            structure_violations: 0,
        };
        for r in per_alpha {
            let (norm, lo, hi, row_dev, ok) = r?;
            record.max_inf_norm_g = record.max_inf_norm_g.max(norm);
            record.eig_min = record.eig_min.min(lo);
            record.eig_max = record.eig_max.max(hi);
            record.row_sum_deviation = record.row_sum_deviation.max(row_dev);
            if !ok {
                record.structure_violations += 1;
            }
        }
        records.push(record);
    }
    let first = records.first().expect("grid is nonempty").max_inf_norm_g;
    let last = records.last().expect("grid is nonempty").max_inf_norm_g;
    let hi = records.iter().map(|r| r.max_inf_norm_g).fold(0.0_f64, f64::max);
    let lo = records
        .iter()
        .map(|r| r.max_inf_norm_g)
        .fold(f64::INFINITY, f64::min);
    let growth_ratio = last / first;
    Ok(LipschitzReport {
        degree,
        points_per_interval: SWEEP_POINTS_PER_INTERVAL,
        seed,
        records,
        growth_ratio,
        spread_ratio: hi / lo,
        growth_flag: growth_ratio > 1.5,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn worked_example_product_and_row_sums() {
        // α = {0}, m = 5: F F ᵀ is [[5/4,1/4,0,0],[1/4,5/4,0,0],[0,0,1,0],[0,0,0,1]]
        // with row sums (3/2, 3/2, 1, 1).
        let f = selection_rows(&[0], 5);
        let t = f.dot(&f.t());
        let want = [
            [1.25, 0.25, 0.0, 0.0],
            [0.25, 1.25, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(t[[i, j]], want[i][j], epsilon = 1e-15);
            }
        }
        let eta: Vec<f64> = (0..4).map(|j| f.row(j).sum()).collect();
        assert_eq!(eta, vec![1.5, 1.5, 1.0, 1.0]);
        assert!(row_sum_identity(&[0], 5) <= 1e-15);
        let check = check_product_structure(&[0], 5);
        assert!(check.pass, "{check:?}");
    }

    #[test]
    fn worked_example_eigenvalues() {
        // Ξ F F ᵀ for the example has spectrum {2/3, 1} on the block and 1 on
        // the singletons.
        let (lo, hi) = eigenvalue_range(&[0], 5).unwrap();
        assert_abs_diff_eq!(lo, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_active_set_gives_identity() {
        let check = check_product_structure(&[], 7);
        assert!(check.pass);
        assert_eq!(row_sum_identity(&[], 7), 0.0);
        let (lo, hi) = eigenvalue_range(&[], 7).unwrap();
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn all_active_single_block_matches_closed_form() {
        // One block spanning everything: Ξ F F ᵀ has eigenvalues
        // {(h+2)/(3h), 1} with h = m − 1.
        let m = 9;
        let active: Vec<usize> = (0..m - 2).collect();
        let (lo, hi) = eigenvalue_range(&active, m).unwrap();
        let h = (m - 1) as f64;
        assert_abs_diff_eq!(lo, (h + 2.0) / (3.0 * h), epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exhaustive_small_dimension_has_no_violations() {
        let m = 8;
        for alpha in sample_active_sets(m, 0, 0) {
            let check = check_product_structure(&alpha, m);
            assert!(check.pass, "structure failed for {alpha:?}: {check:?}");
            assert!(row_sum_identity(&alpha, m) <= ROW_SUM_TOL);
            let (lo, hi) = eigenvalue_range(&alpha, m).unwrap();
            assert!(lo >= 1.0 / 3.0 - EIG_TOL, "low eigenvalue {lo} for {alpha:?}");
            assert!(hi <= 1.0 + EIG_TOL, "high eigenvalue {hi} for {alpha:?}");
        }
    }

    #[test]
    fn random_large_dimension_respects_bounds() {
        let m = 40;
        for alpha in sample_active_sets(m, 60, 42) {
            assert!(check_product_structure(&alpha, m).pass);
            assert!(row_sum_identity(&alpha, m) <= ROW_SUM_TOL);
            let (lo, hi) = eigenvalue_range(&alpha, m).unwrap();
            assert!(lo >= 1.0 / 3.0 - EIG_TOL);
            assert!(hi <= 1.0 + EIG_TOL);
        }
    }

    #[test]
    fn sampler_is_exhaustive_for_small_m_and_seeded_for_large() {
        assert_eq!(sample_active_sets(5, 0, 1).len(), 8);
        let a = sample_active_sets(20, 50, 9);
        let b = sample_active_sets(20, 50, 9);
        assert_eq!(a.len(), 50);
        assert_eq!(a, b);
        // Structured patterns lead the sample.
        assert_eq!(a[0], (0..18).collect::<Vec<_>>());
        assert_eq!(a[1], (0..18).step_by(2).collect::<Vec<_>>());
    }

    #[test]
    fn sweep_produces_flat_norm_profile() {
        let report = inf_norm_sweep(1, &[8, 16, 32], 40, 7).unwrap();
        assert_eq!(report.records.len(), 3);
        assert_eq!(report.total_violations(), 0);
        assert!(
            !report.growth_flag,
            "norm profile grew: {:?}",
            report.records.iter().map(|r| r.max_inf_norm_g).collect::<Vec<_>>()
        );
        for r in &report.records {
            assert!(r.eig_min >= 1.0 / 3.0 - EIG_TOL);
            assert!(r.eig_max <= 1.0 + EIG_TOL);
        }
    }

    #[test]
    fn unit_gram_norm_is_exact_for_worked_example() {
        // With Λ = I, G is the orthogonal projector onto the rows of F; for
        // the α = {0}, m = 5 example its largest absolute row sum is
        // computable by hand from (F F ᵀ)⁻¹ = [[5/6,-1/6],[-1/6,5/6]] ⊕ I.
        let f = selection_rows(&[0], 5);
        let gram = ndarray::Array2::<f64>::eye(5);
        let g = solution_operator(&f.view(), &gram.view()).unwrap();
        // G = F ᵀ (F F ᵀ)⁻¹ F; row 0: (5/6, 1/3, -1/6, 0, 0).
        assert_abs_diff_eq!(g[[0, 0]], 5.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[[0, 1]], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[[0, 2]], -1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(inf_norm(&g.view()), 4.0 / 3.0, epsilon = 1e-12);
    }
}
