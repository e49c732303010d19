use crate::error::{Error, Result};

/// Inputs to the sample-size bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleCountParams {
    pub n: usize,
    pub m: usize,
    pub lipschitz: f64,
    pub h: f64,
    pub epsilon: f64,
    pub delta: f64,
}

impl SampleCountParams {
    fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.n == 0 || self.m == 0 {
            return Err(Error::usage("n and m must be positive"));
        }
        if !(positive(self.lipschitz) && positive(self.h) && positive(self.epsilon)) {
            return Err(Error::usage("L, H and epsilon must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::usage(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }

    fn levels(&self) -> f64 {
        (self.h / self.epsilon - 1e-9).ceil().max(1.0)
    }

    /// Right-hand side of `S >= rhs(S)`.
    pub fn rhs(&self, s: u64) -> f64 {
        let (n, m) = (self.n as f64, self.m as f64);
        let (l, h, eps) = (self.lipschitz, self.h, self.epsilon);
        let cells = self.levels();
        let scale = 8.0 * n * n * m * m * l * l * h * h / (eps * eps);
        let constant = (4.0 * n * m * l * h / eps).ln() + (1.0 / self.delta).ln() + n.ln() + 2.0 * m * cells.ln();
        scale * (constant + n * m * cells * ((s as f64) + 1.0).ln())
    }

    pub fn satisfied_by(&self, s: u64) -> bool {
        s as f64 >= self.rhs(s)
    }
}

/// Smallest `S` with `S >= rhs(S)`, found by iterating `S <- ceil(rhs(S))` from 1.
///
/// `rhs` is increasing and concave in `S`, so the iteration climbs
/// monotonically to the least fixed point.
pub fn recommended_sample_count(params: SampleCountParams) -> Result<u64> {
    params.validate()?;
    let mut s: u64 = 1;
    for _ in 0..10_000 {
        if params.satisfied_by(s) {
            return Ok(s);
        }
        let next = params.rhs(s).ceil();
        if !next.is_finite() || next >= u64::MAX as f64 {
            return Err(Error::capacity("recommended sample count", u128::MAX, u64::MAX as u128));
        }
        s = (next as u64).max(s + 1);
    }
    Err(Error::internal("sample-count iteration did not converge"))
}
