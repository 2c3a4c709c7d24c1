use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    Naive,
    Splitting,
}

/// A probability estimate at horizon `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurvivalEstimate {
    pub n: u64,
    pub p_hat: f64,
    pub stderr: f64,
    pub runs: u64,
    pub method: Method,
    /// Runs in which a population cap was engaged.
    pub cap_hits: u64,
}

impl SurvivalEstimate {
    /// Binomial estimate from `hits` successes out of `runs`.
    pub fn binomial(n: u64, hits: u64, runs: u64, cap_hits: u64) -> Self {
        let p = hits as f64 / runs as f64;
        SurvivalEstimate {
            n,
            p_hat: p,
            stderr: (p * (1.0 - p) / runs as f64).sqrt(),
            runs,
            method: Method::Naive,
            cap_hits,
        }
    }
}
