use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

/// Largest number of nonzero differences for which the null distribution is
/// enumerated exactly.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    pub n_effective: usize,
    /// Sum of ranks of positive differences `a - b`.
    pub statistic: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Average ranks (1-based) of `values`, with tie-group sizes.
fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// One-sided signed-rank test of the alternative "a tends to be smaller than b".
///
/// Zero differences are dropped. With at most [`EXACT_MAX_N`] remaining pairs
/// the p-value is `P(W+ <= observed)` over all `2^n` sign assignments of the
/// observed ranks; otherwise a normal approximation with tie and continuity
/// corrections is used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(a, b, None)
}

/// As [`wilcoxon_signed_rank`], but `exact = Some(_)` forces one branch.
/// Forcing enumeration is only feasible for small samples.
pub fn wilcoxon_signed_rank_with(a: &[f64], b: &[f64], exact: Option<bool>) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(Error::NoInformation);
    }
    if exact == Some(true) && diffs.len() > 24 {
        return Err(Error::IndexOutOfRange(format!(
            "exact enumeration of {} pairs",
            diffs.len()
        )));
    }
    let exact = exact.unwrap_or(diffs.len() <= EXACT_MAX_N);
    wilcoxon_from_diffs(&diffs, exact)
}

fn wilcoxon_from_diffs(diffs: &[f64], exact: bool) -> Result<WilcoxonResult> {
    let n = diffs.len();
    if n == 0 {
        return Err(Error::NoInformation);
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = average_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();

    let p_value = if exact {
        let mut hits = 0u64;
        let total = 1u64 << n;
        for mask in 0..total {
            let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if w <= w_plus + 1e-9 {
                hits += 1;
            }
        }
        hits as f64 / total as f64
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        if var <= 0.0 {
            return Err(Error::NoInformation);
        }
        let z = (w_plus - mean + 0.5) / var.sqrt();
        Normal::standard().cdf(z)
    };
    Ok(WilcoxonResult {
        n_effective: n,
        statistic: w_plus,
        p_value: p_value.clamp(0.0, 1.0),
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_smaller_five_pairs() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [1.5, 3.0, 4.5, 6.0, 7.5];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0 / 32.0);
        assert!(r.exact);
    }

    #[test]
    fn symmetric_differences_give_half() {
        let b = [0.0; 6];
        let a = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        // P(W+ <= 10.5) for n = 6: the median of a symmetric distribution, plus the atom.
        assert!(r.p_value >= 0.5 && r.p_value < 0.6, "{}", r.p_value);
    }

    #[test]
    fn zero_differences_dropped_and_all_tied_is_error() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[1.0, 3.0, 4.0]).unwrap();
        assert_eq!(r.n_effective, 2);
        assert!(matches!(
            wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::NoInformation)
        ));
    }

    #[test]
    fn average_ranks_with_ties() {
        let (r, t) = average_ranks(&[2.0, 1.0, 2.0, 3.0]);
        assert_eq!(r, vec![2.5, 1.0, 2.5, 4.0]);
        assert_eq!(t, vec![1, 2, 1]);
    }
}
