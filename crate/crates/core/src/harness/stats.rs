/// Sample mean with its standard error `s / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub count: usize,
}

impl MeanEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                standard_error: f64::NAN,
                count: 0,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let standard_error = if n > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            standard_error,
            count: n,
        }
    }

    /// Root mean square from samples of squared errors, with the first-order
    /// delta-method standard error `se(mean) / (2 rms)`.
    pub fn rms_from_squares(squares: &[f64]) -> (f64, f64) {
        let est = Self::from_samples(squares);
        let rms = est.mean.max(0.0).sqrt();
        let se = if rms > 0.0 { est.standard_error / (2.0 * rms) } else { 0.0 };
        (rms, se)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_standard_error() {
        let e = MeanEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        // sample variance 5/3
        assert!((e.standard_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        let single = MeanEstimate::from_samples(&[7.0]);
        assert_eq!(single.standard_error, 0.0);
    }

    #[test]
    fn rms_of_constant_squares_has_zero_error() {
        let (rms, se) = MeanEstimate::rms_from_squares(&[4.0; 10]);
        assert_eq!(rms, 2.0);
        assert_eq!(se, 0.0);
        assert_eq!(MeanEstimate::rms_from_squares(&[0.0, 0.0]), (0.0, 0.0));
    }
}
