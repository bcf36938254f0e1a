// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::error::{Error, Result};

/// Magnitudes this close to 1 are rounding noise on an exact line.
const UNIT_SLACK: f64 = 4.0 * f64::EPSILON;

/// Sample Pearson correlation, computed from centred sums.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "pearson on {} and {} values",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::DegenerateSeries(format!(
            "need at least 2 pairs, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0) || !(syy > 0.0) {
        return Err(Error::DegenerateSeries("constant input to pearson".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    Ok(if 1.0 - r.abs() <= UNIT_SLACK { r.signum() } else { r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_lines() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 1.0);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap(), -1.0);
        assert_eq!(pearson(&[0.0, 1.0], &[3.7, 91.3]).unwrap(), 1.0);
        assert!(pearson(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn affine_invariance(
            xy in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..30),
            a in 0.1f64..10.0, b in -50.0f64..50.0, c in 0.1f64..10.0, d in -50.0f64..50.0,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
            let Ok(r) = pearson(&x, &y) else { return Ok(()); };
            let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let ys: Vec<f64> = y.iter().map(|v| c * v + d).collect();
            let yn: Vec<f64> = y.iter().map(|v| -c * v + d).collect();
            prop_assert!((pearson(&xs, &ys).unwrap() - r).abs() < 1e-10);
            prop_assert!((pearson(&xs, &yn).unwrap() + r).abs() < 1e-10);
        }
    }
}
