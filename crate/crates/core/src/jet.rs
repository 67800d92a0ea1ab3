//! Truncated Taylor series used to push arclength derivatives through `1/rho`.

/// Taylor coefficients `c[k] = f^(k)(t0) / k!`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Series(pub Vec<f64>);

impl Series {
    pub fn from_derivatives(derivs: &[f64]) -> Self {
        let mut fact = 1.0;
        let coeffs = derivs
            .iter()
            .enumerate()
            .map(|(k, d)| {
                if k > 0 {
                    fact *= k as f64;
                }
                d / fact
            })
            .collect();
        Series(coeffs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn mul(&self, other: &Series) -> Series {
        let n = self.len().min(other.len());
        let mut out = vec![0.0; n];
        for (i, a) in self.0.iter().take(n).enumerate() {
            for (j, b) in other.0.iter().take(n - i).enumerate() {
                out[i + j] += a * b;
            }
        }
        Series(out)
    }

    pub fn recip(&self) -> Series {
        let n = self.len();
        let mut out = vec![0.0; n];
        let a0 = self.0[0];
        out[0] = 1.0 / a0;
        for k in 1..n {
            let acc: f64 = (1..=k).map(|j| self.0[j] * out[k - j]).sum();
            out[k] = -acc / a0;
        }
        Series(out)
    }

    pub fn derivative(&self) -> Series {
        Series(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }
}
