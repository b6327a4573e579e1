//! Robustness studies: Dirichlet weight perturbation, Kendall tau-b rank
//! stability, readiness percentile swaps, top-k overlap, and distribution
//! drift (PSI / KS).

use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{percentile, priority_score, AggregationError, PercentileMethod};
use crate::requirement::RequirementId;
use crate::rng::substream;
use crate::stats;

#[derive(Debug, thiserror::Error)]
pub enum SensitivityError {
    #[error("rank vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} {what}, got {got}")]
    TooFew {
        what: &'static str,
        need: usize,
        got: usize,
    },
    #[error("all values tied on one side; tau-b is undefined")]
    AllTied,
    #[error("k must be in 1..={max}, got {k}")]
    InvalidK { k: usize, max: usize },
    #[error("PSI needs at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("Dirichlet concentration parameters must be positive")]
    NonPositiveAlpha,
    #[error(transparent)]
    Percentile(#[from] AggregationError),
}

/// Proportion floor applied to PSI bin shares to avoid log(0).
pub const PSI_EPSILON: f64 = 1e-6;

/// Draws `n` weight vectors from a Dirichlet distribution via normalized
/// gamma variates, one derived substream per draw.
pub fn sample_dirichlet_weights(
    alpha: [f64; 4],
    n: usize,
    seed: u64,
) -> Result<Vec<[f64; 4]>, SensitivityError> {
    if alpha.iter().any(|a| *a <= 0.0) {
        return Err(SensitivityError::NonPositiveAlpha);
    }
    let gammas: Vec<Gamma<f64>> = alpha
        .iter()
        .map(|a| Gamma::new(*a, 1.0).expect("positive shape"))
        .collect();
    Ok((0..n)
        .into_par_iter()
        .map(|draw| {
            let mut rng = substream(seed, "dirichlet", draw as u64);
            let mut w = [0.0f64; 4];
            for (slot, gamma) in w.iter_mut().zip(gammas.iter()) {
                *slot = gamma.sample(&mut rng);
            }
            let total: f64 = w.iter().sum();
            for slot in &mut w {
                *slot /= total;
            }
            w
        })
        .collect())
}

/// Kendall's tau-b (tie-corrected) between two equal-length value vectors.
///
/// Pairs are counted directly: concordant minus discordant over the geometric
/// mean of non-tied pair counts. Errors when either side is entirely tied.
pub fn kendall_tau_b(a: &[f64], b: &[f64]) -> Result<f64, SensitivityError> {
    if a.len() != b.len() {
        return Err(SensitivityError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(SensitivityError::TooFew {
            what: "observations",
            need: 2,
            got: a.len(),
        });
    }
    let n = a.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut tied_a = 0i64;
    let mut tied_b = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let da = a[i].partial_cmp(&a[j]).expect("non-comparable value");
            let db = b[i].partial_cmp(&b[j]).expect("non-comparable value");
            match (da, db) {
                (std::cmp::Ordering::Equal, std::cmp::Ordering::Equal) => {
                    tied_a += 1;
                    tied_b += 1;
                }
                (std::cmp::Ordering::Equal, _) => tied_a += 1,
                (_, std::cmp::Ordering::Equal) => tied_b += 1,
                (x, y) if x == y => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as f64;
    let denom = (n0 - tied_a as f64) * (n0 - tied_b as f64);
    if denom <= 0.0 {
        return Err(SensitivityError::AllTied);
    }
    Ok((concordant - discordant) as f64 / denom.sqrt())
}

/// Per-requirement mean of the four gap-dimension medians; the input to the
/// weight-perturbation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementProfile {
    pub requirement_id: RequirementId,
    /// Dimension means in E/M/G/K order.
    pub dim_means: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauStats {
    pub mean: f64,
    pub p05: f64,
    pub median: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationStudyResult {
    pub n_draws: usize,
    pub tau_stats: TauStats,
    pub seed: u64,
    /// Requirements ordered by equal-weight GapScore, largest gap first.
    pub baseline_ranking: Vec<RequirementId>,
}

fn weighted_scores(profiles: &[RequirementProfile], weights: &[f64; 4]) -> Vec<f64> {
    profiles
        .iter()
        .map(|p| {
            p.dim_means
                .iter()
                .zip(weights.iter())
                .map(|(m, w)| m * w)
                .sum()
        })
        .collect()
}

/// Ranking with the largest score first; ties keep requirement order.
fn rank_requirements(profiles: &[RequirementProfile], scores: &[f64]) -> Vec<RequirementId> {
    let mut order: Vec<usize> = (0..profiles.len()).collect();
    order.sort_by(|x, y| {
        scores[*y]
            .partial_cmp(&scores[*x])
            .expect("non-comparable score")
    });
    order.into_iter().map(|i| profiles[i].requirement_id).collect()
}

/// Perturbs the equal E/M/G/K weights with Dirichlet draws and measures the
/// stability of the requirement GapScore ranking as Kendall tau-b against the
/// equal-weight baseline.
pub fn weight_perturbation_study(
    profiles: &[RequirementProfile],
    n: usize,
    seed: u64,
) -> Result<PerturbationStudyResult, SensitivityError> {
    if profiles.len() < 2 {
        return Err(SensitivityError::TooFew {
            what: "requirements",
            need: 2,
            got: profiles.len(),
        });
    }
    if n < 1 {
        return Err(SensitivityError::TooFew {
            what: "draws",
            need: 1,
            got: n,
        });
    }
    let baseline = weighted_scores(profiles, &[0.25; 4]);
    let draws = sample_dirichlet_weights([1.0; 4], n, seed)?;
    let taus: Vec<f64> = draws
        .par_iter()
        .map(|weights| kendall_tau_b(&baseline, &weighted_scores(profiles, weights)))
        .collect::<Result<_, _>>()?;

    Ok(PerturbationStudyResult {
        n_draws: n,
        tau_stats: TauStats {
            mean: stats::mean(&taus),
            p05: stats::percentile_linear(&taus, 5.0),
            median: stats::percentile_linear(&taus, 50.0),
            p95: stats::percentile_linear(&taus, 95.0),
        },
        seed,
        baseline_ranking: rank_requirements(profiles, &baseline),
    })
}

/// Per-requirement inputs to the percentile-swap study.
#[derive(Debug, Clone, PartialEq)]
pub struct RequirementReadiness {
    pub requirement_id: RequirementId,
    pub gap_mean: f64,
    /// Readiness values of the requirement's units.
    pub readiness: Vec<f64>,
}

/// Ranks requirements by priority computed with readiness at `p_alt` versus
/// `p_base` and returns Kendall tau-b between the two priority vectors.
pub fn percentile_swap_study(
    inputs: &[RequirementReadiness],
    p_alt: f64,
    p_base: f64,
    method: PercentileMethod,
) -> Result<f64, SensitivityError> {
    if inputs.len() < 2 {
        return Err(SensitivityError::TooFew {
            what: "requirements",
            need: 2,
            got: inputs.len(),
        });
    }
    let priorities = |p: f64| -> Result<Vec<f64>, SensitivityError> {
        inputs
            .iter()
            .map(|r| {
                let readiness_p = percentile(&r.readiness, p, method)?;
                Ok(priority_score(r.gap_mean, readiness_p))
            })
            .collect()
    };
    kendall_tau_b(&priorities(p_base)?, &priorities(p_alt)?)
}

/// Share of the top `k` entries two rankings have in common.
pub fn topk_overlap<T: PartialEq>(
    ranking_a: &[T],
    ranking_b: &[T],
    k: usize,
) -> Result<f64, SensitivityError> {
    let max = ranking_a.len().min(ranking_b.len());
    if k == 0 || k > max {
        return Err(SensitivityError::InvalidK { k, max });
    }
    let top_a = &ranking_a[..k];
    let shared = ranking_b[..k].iter().filter(|b| top_a.contains(b)).count();
    Ok(shared as f64 / k as f64)
}

/// Population-stability index and Kolmogorov-Smirnov distance between a
/// reference and a current sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftStats {
    pub psi: f64,
    pub ks: f64,
}

/// PSI over `bins` equal-width bins spanning both samples (proportions
/// floored at [`PSI_EPSILON`]), and the exact KS statistic over the two
/// empirical CDFs.
pub fn drift_stats(
    reference: &[f64],
    current: &[f64],
    bins: usize,
) -> Result<DriftStats, SensitivityError> {
    if reference.is_empty() || current.is_empty() {
        return Err(SensitivityError::TooFew {
            what: "sample values",
            need: 1,
            got: 0,
        });
    }
    if bins < 2 {
        return Err(SensitivityError::TooFewBins(bins));
    }

    let lo = reference
        .iter()
        .chain(current.iter())
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let hi = reference
        .iter()
        .chain(current.iter())
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let bin_of = |v: f64| -> usize {
        if width == 0.0 {
            0
        } else {
            (((v - lo) / width) as usize).min(bins - 1)
        }
    };
    let proportions = |sample: &[f64]| -> Vec<f64> {
        let mut counts = vec![0usize; bins];
        for v in sample {
            counts[bin_of(*v)] += 1;
        }
        counts
            .into_iter()
            .map(|c| (c as f64 / sample.len() as f64).max(PSI_EPSILON))
            .collect()
    };
    let p = proportions(reference);
    let q = proportions(current);
    let psi: f64 = p
        .iter()
        .zip(q.iter())
        .map(|(pi, qi)| (qi - pi) * (qi / pi).ln())
        .sum();

    let mut sorted_ref = reference.to_vec();
    let mut sorted_cur = current.to_vec();
    sorted_ref.sort_by(|a, b| a.partial_cmp(b).expect("non-comparable value"));
    sorted_cur.sort_by(|a, b| a.partial_cmp(b).expect("non-comparable value"));
    let cdf = |sorted: &[f64], v: f64| -> f64 {
        sorted.partition_point(|x| *x <= v) as f64 / sorted.len() as f64
    };
    let mut ks = 0.0f64;
    for v in sorted_ref.iter().chain(sorted_cur.iter()) {
        let d = (cdf(&sorted_ref, *v) - cdf(&sorted_cur, *v)).abs();
        ks = ks.max(d);
    }

    Ok(DriftStats { psi, ks })
}

/// Sensitivity report CSV: the weight-perturbation tau distribution row plus
/// one row per readiness percentile swap.
pub fn sensitivity_csv(
    perturbation: &PerturbationStudyResult,
    swaps: &[(f64, f64, f64)],
) -> String {
    let mut out = String::from("study,detail,mean,p05,median,p95,tau\n");
    let t = &perturbation.tau_stats;
    out.push_str(&format!(
        "weight_perturbation,N={} seed={},{},{},{},{},\n",
        perturbation.n_draws, perturbation.seed, t.mean, t.p05, t.median, t.p95
    ));
    for (p_alt, p_base, tau) in swaps {
        out.push_str(&format!(
            "readiness_percentile_swap,P{p_alt:.0} vs P{p_base:.0},,,,,{tau}\n"
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_identical_is_one() {
        assert_eq!(kendall_tau_b(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
    }

    #[test]
    fn tau_reversed_is_minus_one() {
        assert_eq!(kendall_tau_b(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn tau_adjacent_swap_fixture() {
        // x=(1,2,3,4), y=(1,3,2,4): 5 concordant, 1 discordant of 6 pairs.
        let tau = kendall_tau_b(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((tau - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn tau_symmetry() {
        let a = [3.0, 1.0, 4.0, 1.5, 9.0];
        let b = [2.0, 7.0, 1.0, 8.0, 2.5];
        assert_eq!(
            kendall_tau_b(&a, &b).unwrap(),
            kendall_tau_b(&b, &a).unwrap()
        );
    }

    #[test]
    fn tau_all_tied_side_errors() {
        assert!(matches!(
            kendall_tau_b(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(SensitivityError::AllTied)
        ));
    }

    #[test]
    fn dirichlet_vectors_on_simplex() {
        let draws = sample_dirichlet_weights([1.0; 4], 200, 7).unwrap();
        assert_eq!(draws.len(), 200);
        for w in &draws {
            assert!(w.iter().all(|x| *x >= 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_same_seed_identical() {
        assert_eq!(
            sample_dirichlet_weights([1.0; 4], 50, 7).unwrap(),
            sample_dirichlet_weights([1.0; 4], 50, 7).unwrap()
        );
    }

    #[test]
    fn dirichlet_rejects_nonpositive_alpha() {
        assert!(sample_dirichlet_weights([1.0, 0.0, 1.0, 1.0], 5, 7).is_err());
    }

    fn profile(r: RequirementId, dims: [f64; 4]) -> RequirementProfile {
        RequirementProfile {
            requirement_id: r,
            dim_means: dims,
        }
    }

    #[test]
    fn perturbation_proportional_profiles_stay_ranked() {
        // Profiles proportional to a common vector: order is weight-invariant.
        let base = [2.0, 1.0, 3.0, 2.0];
        let profiles: Vec<RequirementProfile> = [1.0f64, 0.5, 2.0, 1.5]
            .iter()
            .enumerate()
            .map(|(i, scale)| {
                profile(
                    RequirementId::from_index(i + 1).unwrap(),
                    [
                        base[0] * scale,
                        base[1] * scale,
                        base[2] * scale,
                        base[3] * scale,
                    ],
                )
            })
            .collect();
        let result = weight_perturbation_study(&profiles, 64, 7).unwrap();
        assert_eq!(result.tau_stats.mean, 1.0);
        assert_eq!(result.tau_stats.p05, 1.0);
        assert_eq!(result.tau_stats.p95, 1.0);
        assert_eq!(
            result.baseline_ranking,
            vec![
                RequirementId::R3,
                RequirementId::R4,
                RequirementId::R1,
                RequirementId::R2
            ]
        );
    }

    #[test]
    fn perturbation_single_draw_deterministic() {
        let profiles = vec![
            profile(RequirementId::R1, [4.0, 4.0, 4.0, 4.0]),
            profile(RequirementId::R2, [1.0, 5.0, 2.0, 4.0]),
            profile(RequirementId::R3, [3.0, 2.0, 5.0, 1.0]),
        ];
        let a = weight_perturbation_study(&profiles, 1, 3).unwrap();
        let b = weight_perturbation_study(&profiles, 1, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tau_stats.mean, a.tau_stats.median);
    }

    fn readiness(r: RequirementId, gap: f64, values: &[f64]) -> RequirementReadiness {
        RequirementReadiness {
            requirement_id: r,
            gap_mean: gap,
            readiness: values.to_vec(),
        }
    }

    #[test]
    fn swap_same_percentile_is_one() {
        let inputs = vec![
            readiness(RequirementId::R1, 4.0, &[0.0, 1.0, 3.0]),
            readiness(RequirementId::R2, 3.5, &[1.0, 2.0, 5.0]),
            readiness(RequirementId::R3, 4.4, &[0.0, 0.0, 1.0]),
        ];
        let tau = percentile_swap_study(&inputs, 80.0, 80.0, PercentileMethod::Linear).unwrap();
        assert_eq!(tau, 1.0);
    }

    #[test]
    fn swap_constant_readiness_driven_by_gap() {
        let inputs = vec![
            readiness(RequirementId::R1, 4.0, &[2.0, 2.0]),
            readiness(RequirementId::R2, 3.5, &[2.0, 2.0]),
            readiness(RequirementId::R3, 4.4, &[2.0, 2.0]),
        ];
        let tau = percentile_swap_study(&inputs, 70.0, 80.0, PercentileMethod::Linear).unwrap();
        assert_eq!(tau, 1.0);
    }

    #[test]
    fn topk_cases() {
        let a = ["r5", "r9", "r4", "r1"];
        let b = ["r9", "r5", "r2", "r1"];
        assert_eq!(topk_overlap(&a, &a, 4).unwrap(), 1.0);
        assert_eq!(topk_overlap(&a, &b, 2).unwrap(), 1.0);
        assert!((topk_overlap(&a, &b, 3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(topk_overlap(&["a", "b"], &["c", "d"], 2).unwrap(), 0.0);
        assert!(topk_overlap(&a, &b, 0).is_err());
        assert!(topk_overlap(&a, &b, 5).is_err());
    }

    #[test]
    fn drift_identical_samples() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        let d = drift_stats(&s, &s, 4).unwrap();
        assert_eq!(d.ks, 0.0);
        assert!(d.psi.abs() < 1e-9);
    }

    #[test]
    fn drift_disjoint_support() {
        let d = drift_stats(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0], 4).unwrap();
        assert_eq!(d.ks, 1.0);
        assert!(d.psi > 0.0);
    }

    #[test]
    fn drift_ks_matches_ecdf_oracle() {
        // Brute-force oracle: evaluate |F_ref - F_cur| on a fine value grid.
        let reference = [1.0, 2.0, 2.0, 3.0, 7.0];
        let current = [2.0, 3.0, 3.0, 5.0];
        let ecdf = |sample: &[f64], v: f64| {
            sample.iter().filter(|x| **x <= v).count() as f64 / sample.len() as f64
        };
        let mut oracle: f64 = 0.0;
        let mut grid: Vec<f64> = reference.iter().chain(current.iter()).cloned().collect();
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for v in grid {
            oracle = oracle.max((ecdf(&reference, v) - ecdf(&current, v)).abs());
        }
        let d = drift_stats(&reference, &current, 4).unwrap();
        assert!((d.ks - oracle).abs() < 1e-15);
    }

    #[test]
    fn drift_constant_equal_samples() {
        let d = drift_stats(&[2.0, 2.0], &[2.0, 2.0], 4).unwrap();
        assert_eq!(d.ks, 0.0);
        assert!(d.psi.abs() < 1e-12);
    }
}
