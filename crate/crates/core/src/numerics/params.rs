use serde::{Deserialize, Serialize};

use crate::error::{MftError, Result};

/// Reservoir densities and coupling strengths.
///
/// `alpha`/`beta` are the left/right reservoir densities and `a`/`b` the
/// inverse strengths of the interaction with them. The boundary rates of the
/// microscopic dynamics are scaled by `1/a` and `1/b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct Params {
    alpha: f64,
    beta: f64,
    a: f64,
    b: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    alpha: f64,
    beta: f64,
    #[serde(rename = "A")]
    a: f64,
    #[serde(rename = "B")]
    b: f64,
}

impl TryFrom<RawParams> for Params {
    type Error = MftError;

    fn try_from(raw: RawParams) -> Result<Self> {
        Params::new(raw.alpha, raw.beta, raw.a, raw.b)
    }
}

impl From<Params> for RawParams {
    fn from(p: Params) -> Self {
        RawParams {
            alpha: p.alpha,
            beta: p.beta,
            a: p.a,
            b: p.b,
        }
    }
}

impl Params {
    /// Requires `0 < alpha <= beta < 1` and positive couplings.
    pub fn new(alpha: f64, beta: f64, a: f64, b: f64) -> Result<Self> {
        let all_finite = [alpha, beta, a, b].iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(MftError::InvalidParams("non-finite value".into()));
        }
        if !(0.0 < alpha && alpha <= beta && beta < 1.0) {
            return Err(MftError::InvalidParams(format!(
                "need 0 < alpha <= beta < 1, got alpha={alpha}, beta={beta}"
            )));
        }
        if a <= 0.0 || b <= 0.0 {
            return Err(MftError::InvalidParams(format!(
                "couplings must be positive, got A={a}, B={b}"
            )));
        }
        Ok(Params { alpha, beta, a, b })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Rejects the equilibrium case `alpha == beta`, where the set of
    /// increasing profiles strictly between the reservoir densities is empty.
    pub fn require_driven(&self) -> Result<()> {
        if self.alpha < self.beta {
            Ok(())
        } else {
            Err(MftError::InvalidParams(format!(
                "operation needs alpha < beta strictly, got alpha = beta = {}",
                self.alpha
            )))
        }
    }

    /// `min(alpha, 1 - beta)`: the distance of the reservoir densities from
    /// the edges of `[0, 1]`.
    pub fn delta0(&self) -> f64 {
        self.alpha.min(1.0 - self.beta)
    }

    /// Lower and upper derivative bounds `(p, q)` satisfied by every image of
    /// the Euler-Lagrange fixed-point map.
    pub fn derivative_bounds(&self) -> (f64, f64) {
        let (al, be, a, b) = (self.alpha, self.beta, self.a, self.b);
        let p = al * (be - al) / (a * al + (b + 1.0) * be) * (1.0 - be) / (1.0 - al);
        let q = (1.0 - al) * (be - al) / (a * (1.0 - al) + (b + 1.0) * (1.0 - be)) * be / al;
        (p, q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_params() {
        assert!(Params::new(0.0, 0.5, 1.0, 1.0).is_err());
        assert!(Params::new(0.6, 0.5, 1.0, 1.0).is_err());
        assert!(Params::new(0.2, 1.0, 1.0, 1.0).is_err());
        assert!(Params::new(0.2, 0.8, 0.0, 1.0).is_err());
        assert!(Params::new(0.2, 0.8, 1.0, -1.0).is_err());
        assert!(Params::new(0.2, 0.8, f64::NAN, 1.0).is_err());
        assert!(Params::new(0.5, 0.5, 1.0, 1.0).is_ok());
    }

    #[test]
    fn equilibrium_is_not_driven() {
        let p = Params::new(0.5, 0.5, 1.0, 1.0).unwrap();
        assert!(p.require_driven().is_err());
        let p = Params::new(0.2, 0.8, 1.0, 1.0).unwrap();
        assert!(p.require_driven().is_ok());
    }

    #[test]
    fn p_below_q() {
        for &(al, be, a, b) in &[
            (0.2, 0.8, 1.0, 1.0),
            (0.3, 0.4, 0.5, 2.0),
            (0.05, 0.95, 3.0, 0.2),
        ] {
            let (p, q) = Params::new(al, be, a, b).unwrap().derivative_bounds();
            assert!(0.0 < p && p < q, "p={p} q={q}");
        }
    }
}
