//! Inner-product weighting along the frequency axis: identity, or the
//! inverse of a Toeplitz diffuse-plus-noise covariance.

use num_complex::Complex64;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    n: usize,
    /// Row-major `N×N` inverse covariance; `None` means identity.
    rinv: Option<Vec<Complex64>>,
    /// `lags[d + N − 1] = Σ_m W[m, m+d]`.
    lags: Vec<Complex64>,
    logdet: f64,
}

impl Metric {
    pub fn identity(n: usize) -> Self {
        let mut lags = vec![ZERO; 2 * n - 1];
        lags[n - 1] = Complex64::new(n as f64, 0.0);
        Metric { n, rinv: None, lags, logdet: 0.0 }
    }

    /// Weighting by a given Hermitian inverse covariance with known `ln|R|`.
    pub fn from_inverse(n: usize, rinv: Vec<Complex64>, logdet: f64) -> Self {
        assert_eq!(rinv.len(), n * n);
        let mut lags = vec![ZERO; 2 * n - 1];
        for m in 0..n {
            for c in 0..n {
                lags[c + n - 1 - m] += rinv[m * n + c];
            }
        }
        Metric { n, rinv: Some(rinv), lags, logdet }
    }

    pub fn is_identity(&self) -> bool {
        self.rinv.is_none()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `ln|R|` of the frequency covariance (zero for identity).
    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn inverse(&self) -> Option<&[Complex64]> {
        self.rinv.as_deref()
    }

    pub fn lag_sums(&self) -> &[Complex64] {
        &self.lags
    }

    /// `a† W b`.
    pub fn quad(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        match &self.rinv {
            None => a.iter().zip(b).map(|(x, y)| x.conj() * y).sum(),
            Some(w) => {
                let n = self.n;
                let mut acc = ZERO;
                for m in 0..n {
                    let row = &w[m * n..(m + 1) * n];
                    let wb: Complex64 = row.iter().zip(b).map(|(x, y)| x * y).sum();
                    acc += a[m].conj() * wb;
                }
                acc
            }
        }
    }

    /// Applies `W` along the frequency axis of a `(k·E + e)` tensor with `E`
    /// spatial elements.
    pub fn whiten(&self, tensor: &[Complex64], elements: usize) -> Vec<Complex64> {
        let Some(w) = &self.rinv else {
            return tensor.to_vec();
        };
        let n = self.n;
        let mut out = vec![ZERO; tensor.len()];
        for m in 0..n {
            let dst = &mut out[m * elements..(m + 1) * elements];
            for c in 0..n {
                let wv = w[m * n + c];
                if wv == ZERO {
                    continue;
                }
                let src = &tensor[c * elements..(c + 1) * elements];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += wv * s;
                }
            }
        }
        out
    }

    /// `Re(e(τ)† W e(τ))` for `e_k = exp(−j2πτ f_k)` on a grid with step `df`.
    pub fn phasor_quad(&self, delay: f64, df: f64) -> f64 {
        let n = self.n as isize;
        let mut acc = 0.0;
        for (i, l) in self.lags.iter().enumerate() {
            let d = i as isize - (n - 1);
            let ph = Complex64::cis(-std::f64::consts::TAU * delay * d as f64 * df);
            acc += (l * ph).re;
        }
        acc
    }
}
