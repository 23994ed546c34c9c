use crate::error::{Error, Result};
use crate::solution::SolutionMatrix;

/// `‖U_ref − U_sur‖_F / ‖U_ref‖_F`.
pub fn normalized_error(reference: &SolutionMatrix, surrogate: &SolutionMatrix) -> Result<f64> {
    reference.ensure_same_shape(surrogate)?;
    let norm = reference.frobenius_norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::UndefinedMetric(format!("reference norm is {norm}")));
    }
    let diff = reference
        .values()
        .iter()
        .zip(surrogate.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(diff / norm)
}

/// Mean of [`normalized_error`] over aligned pairs.
pub fn average_normalized_error(refs: &[SolutionMatrix], surs: &[SolutionMatrix]) -> Result<f64> {
    if refs.len() != surs.len() {
        return Err(Error::dim("error pairs", &[refs.len()], &[surs.len()]));
    }
    if refs.is_empty() {
        return Err(Error::UndefinedMetric("no pairs to average".into()));
    }
    let mut total = 0.0;
    for (r, s) in refs.iter().zip(surs) {
        total += normalized_error(r, s)?;
    }
    Ok(total / refs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(v: &[f64]) -> SolutionMatrix {
        SolutionMatrix::new(2, 2, v.to_vec()).unwrap()
    }

    #[test]
    fn identity_against_zero_is_one() {
        let e = normalized_error(&m(&[1.0, 0.0, 0.0, 1.0]), &m(&[0.0; 4])).unwrap();
        assert_eq!(e, 1.0);
    }

    #[test]
    fn exact_match_is_zero() {
        let a = m(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(normalized_error(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn zero_reference_is_undefined() {
        let err = normalized_error(&m(&[0.0; 4]), &m(&[1.0; 4])).unwrap_err();
        assert!(matches!(err, Error::UndefinedMetric(_)));
    }

    #[test]
    fn average_of_two_and_four_percent() {
        let r = m(&[1.0, 0.0, 0.0, 0.0]);
        let refs = vec![r.clone(), r.clone()];
        let surs = vec![m(&[0.98, 0.0, 0.0, 0.0]), m(&[1.04, 0.0, 0.0, 0.0])];
        let e = average_normalized_error(&refs, &surs).unwrap();
        assert!((e - 0.03).abs() < 1e-15);
    }
}
