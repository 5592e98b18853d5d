//! Distribution of the number of Weibull renewals in `[0, t]`.

use statrs::function::gamma::ln_gamma;

use super::TrafficError;

const MAX_TERMS: usize = 500;
const TERM_TOL: f64 = 1e-12;
const MAX_SAFE_TERM: f64 = 1e7;

/// Memoised table of the series coefficients, stored as logarithms.
/// All coefficients are positive so log-sum-exp is exact enough.
#[derive(Clone, Debug)]
pub struct DeltaTable {
    nu: f64,
    // ln_delta[k][j - k]
    ln_delta: Vec<Vec<f64>>,
}

impl DeltaTable {
    pub fn new(nu: f64) -> Result<Self, TrafficError> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(TrafficError::InvalidParameter(format!(
                "shape must be finite and > 0, got {nu}"
            )));
        }
        Ok(Self {
            nu,
            ln_delta: Vec::new(),
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    fn ensure(&mut self, j: usize, k: usize) {
        while self.ln_delta.len() <= k {
            self.ln_delta.push(Vec::new());
        }
        for kk in 0..=k {
            // row kk needs entries up to j - (k - kk) so that row kk + 1 reaches its target.
            let need = j - (k - kk);
            let have = kk + self.ln_delta[kk].len();
            for jj in have..=need {
                let v = self.compute(jj, kk);
                self.ln_delta[kk].push(v);
            }
        }
    }

    fn compute(&self, j: usize, k: usize) -> f64 {
        let nu = self.nu;
        if k == 0 {
            return ln_gamma(nu * j as f64 + 1.0) - ln_gamma(j as f64 + 1.0);
        }
        let prev = &self.ln_delta[k - 1];
        let terms: Vec<f64> = ((k - 1)..j)
            .map(|m| {
                prev[m - (k - 1)] + ln_gamma(nu * (j - m) as f64 + 1.0)
                    - ln_gamma((j - m) as f64 + 1.0)
            })
            .collect();
        log_sum_exp(&terms)
    }

    /// Natural log of the coefficient for term `j` of count `k` (`j >= k`).
    pub fn ln_get(&mut self, j: usize, k: usize) -> Result<f64, TrafficError> {
        if j < k {
            return Err(TrafficError::InvalidParameter(format!(
                "coefficient needs j >= k, got j={j}, k={k}"
            )));
        }
        self.ensure(j, k);
        Ok(self.ln_delta[k][j - k])
    }

    pub fn get(&mut self, j: usize, k: usize) -> Result<f64, TrafficError> {
        self.ln_get(j, k).map(f64::exp)
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Single series coefficient. Prefer [`DeltaTable`] when many are needed.
pub fn delta_coefficient(j: usize, k: usize, nu: f64) -> Result<f64, TrafficError> {
    DeltaTable::new(nu)?.get(j, k)
}

/// `P(N(t) = k)` for a renewal process with Weibull(scale `gamma`, shape `nu`)
/// inter-arrival times.
pub fn count_probability(k: usize, t: f64, gamma: f64, nu: f64) -> Result<f64, TrafficError> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(TrafficError::InvalidParameter(format!(
            "scale must be finite and > 0, got {gamma}"
        )));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(TrafficError::InvalidParameter(format!(
            "t must be finite and >= 0, got {t}"
        )));
    }
    let mut table = DeltaTable::new(nu)?;
    if t == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    let ln_x = (t / gamma).ln();
    let mut sum = 0.0;
    let mut max_term: f64 = 0.0;
    let mut prev_mag = f64::INFINITY;
    for j in k..k + MAX_TERMS {
        let ln_mag = nu * j as f64 * ln_x + table.ln_get(j, k)? - ln_gamma(nu * j as f64 + 1.0);
        let mag = ln_mag.exp();
        max_term = max_term.max(mag);
        let sign = if (j + k).is_multiple_of(2) { 1.0 } else { -1.0 };
        sum += sign * mag;
        if mag < TERM_TOL && mag <= prev_mag {
            if max_term > MAX_SAFE_TERM {
                return Err(TrafficError::PrecisionLoss(max_term));
            }
            return Ok(sum.clamp(0.0, 1.0));
        }
        prev_mag = mag;
    }
    Err(TrafficError::NonConvergence(MAX_TERMS))
}
