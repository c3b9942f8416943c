use crate::eigensolve::SpectrumSet;

fn nearest(x: f64, candidates: &[f64]) -> f64 {
    candidates
        .iter()
        .map(|c| (x - c).abs())
        .fold((x - SpectrumSet::BASEPOINT).abs(), f64::min)
}

/// Hausdorff distance between `{-1} ∪ (S1 ∩ [0, A])` and `{-1} ∪ (S2 ∩ [0, A])`,
/// where points of either window may also be matched against the other set's
/// values in `(A, A + slack]` so truncation does not inflate the distance.
pub fn windowed_hausdorff(s1: &SpectrumSet, s2: &SpectrumSet, window: f64, slack: f64) -> f64 {
    let a1 = s1.in_window(window);
    let a2 = s2.in_window(window);
    let e1 = s1.in_window(window + slack);
    let e2 = s2.in_window(window + slack);
    let one_way = |from: &[f64], to: &[f64]| from.iter().map(|&x| nearest(x, to)).fold(0.0, f64::max);
    one_way(&a1, &e2).max(one_way(&a2, &e1))
}

/// Hausdorff distance of the pointed, windowed spectra; an upper bound for
/// the pointed Gromov–Hausdorff distance of the two spectra.
pub fn spectra_distance(s1: &SpectrumSet, s2: &SpectrumSet, window: f64) -> f64 {
    windowed_hausdorff(s1, s2, window, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[f64]) -> SpectrumSet {
        SpectrumSet::new(v.to_vec(), None, 1e-12)
    }

    #[test]
    fn examples() {
        assert!((spectra_distance(&set(&[0.0, 1.0, 2.0]), &set(&[0.0, 1.1, 2.0]), 3.0) - 0.1).abs() < 1e-12);
        assert_eq!(spectra_distance(&set(&[0.0, 2.0]), &set(&[0.0, 2.0]), 3.0), 0.0);
        let d = spectra_distance(&set(&[0.0, 2.0, 2.0, 4.0]), &set(&[0.0, 0.5, 0.5, 1.0]), 4.0);
        assert!((d - 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_windows_reduce_to_basepoint() {
        assert_eq!(spectra_distance(&set(&[5.0]), &set(&[7.0]), 1.0), 0.0);
        // a lone point is matched to the basepoint
        assert_eq!(spectra_distance(&set(&[0.5]), &set(&[]), 1.0), 1.5);
    }

    #[test]
    fn slack_absorbs_truncation() {
        let a = set(&[0.0, 0.99]);
        let b = set(&[0.0, 1.01]);
        assert!((spectra_distance(&a, &b, 1.0) - 0.99).abs() < 1e-12);
        assert!((windowed_hausdorff(&a, &b, 1.0, 0.05) - 0.02).abs() < 1e-12);
    }
}
