//! System parameters and the per-χ constants of the delay-tail closed forms.

use crate::error::{Error, Result};

/// Homogeneous data-center model: `n` servers, Poisson flow initiations at
/// rate `n * lambda`, exponential flow durations with mean `beta`, packets at
/// rate `nu` per active flow and packet service rate `mu` per server.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub n: usize,
    pub lambda: f64,
    pub beta: f64,
    pub nu: f64,
    pub mu: f64,
}

impl SystemParams {
    /// Builds and validates a parameter set. Only hard errors (non-positive
    /// rates or counts) are rejected; overload is reported by [`validate`].
    ///
    /// [`validate`]: SystemParams::validate
    pub fn new(n: usize, lambda: f64, beta: f64, nu: f64, mu: f64) -> Result<Self> {
        let params = SystemParams {
            n,
            lambda,
            beta,
            nu,
            mu,
        };
        params.validate()?;
        Ok(params)
    }

    /// n = 500, λ = 100/s, β = 1.5 s, ν = 100/s, μ = 20000/s (ρ = 150).
    pub fn baseline() -> Self {
        SystemParams {
            n: 500,
            lambda: 100.0,
            beta: 1.5,
            nu: 100.0,
            mu: 20_000.0,
        }
    }

    /// Same rates with a different per-server load, obtained by scaling λ.
    pub fn with_rho(self, rho: f64) -> Self {
        SystemParams {
            lambda: rho / self.beta,
            ..self
        }
    }

    pub fn with_servers(self, n: usize) -> Self {
        SystemParams { n, ..self }
    }

    /// Mean number of active flows per server, ρ = λβ.
    pub fn rho(&self) -> f64 {
        self.lambda * self.beta
    }

    /// Number of concurrent flows a server can carry, μ/ν.
    pub fn flow_capacity(&self) -> f64 {
        self.mu / self.nu
    }

    /// ⌊μ/ν⌋: the largest occupancy whose packet queue is stable.
    pub fn max_stable_occupancy(&self) -> usize {
        (self.mu / self.nu).floor() as usize
    }

    /// Average packet-level utilization ρν/μ.
    pub fn utilization(&self) -> f64 {
        self.rho() * self.nu / self.mu
    }

    /// Checks hard constraints and collects warnings.
    pub fn validate(&self) -> Result<ValidationReport> {
        if self.n == 0 {
            return Err(Error::param("n", "at least one server is required"));
        }
        for (name, value) in [
            ("lambda", self.lambda),
            ("beta", self.beta),
            ("nu", self.nu),
            ("mu", self.mu),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::param(
                    name,
                    format!("must be positive and finite, got {value}"),
                ));
            }
        }

        let mut warnings = Vec::new();
        let peak = self.rho().ceil() * self.nu;
        if peak >= self.mu {
            warnings.push(Warning::Overload {
                ceil_rho_nu: peak,
                mu: self.mu,
            });
        }
        Ok(ValidationReport {
            rho: self.rho(),
            utilization: self.utilization(),
            flow_capacity: self.flow_capacity(),
            warnings,
        })
    }
}

/// Outcome of [`SystemParams::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub rho: f64,
    pub utilization: f64,
    pub flow_capacity: f64,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_stable(&self) -> bool {
        self.warnings.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// ⌈ρ⌉ν ≥ μ: a server carrying the rounded-up mean load is overloaded.
    Overload { ceil_rho_nu: f64, mu: f64 },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::Overload { ceil_rho_nu, mu } => write!(
                f,
                "ceil(rho)*nu = {ceil_rho_nu} >= mu = {mu}: servers at the mean load are overloaded"
            ),
        }
    }
}

/// Constants of the χ-delay closed forms: `a_chi = ρ e^{χν/μ}` and
/// `b_chi = exp(-χ(1 - ν/μ) + a_chi - ρ)`. `b_chi` is kept in log form since
/// it overflows for large χ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiDelayParams {
    pub chi: f64,
    pub a_chi: f64,
    pub ln_b_chi: f64,
}

impl ChiDelayParams {
    pub fn new(chi: f64, params: &SystemParams) -> Self {
        let rho = params.rho();
        let ratio = params.nu / params.mu;
        let a_chi = rho * (chi * ratio).exp();
        let ln_b_chi = -chi * (1.0 - ratio) + a_chi - rho;
        ChiDelayParams {
            chi,
            a_chi,
            ln_b_chi,
        }
    }

    pub fn b_chi(&self) -> f64 {
        self.ln_b_chi.exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_is_valid_with_three_quarter_utilization() {
        let report = SystemParams::baseline().validate().unwrap();
        assert_eq!(report.rho, 150.0);
        assert!((report.utilization - 0.75).abs() < 1e-12);
        assert!(report.is_stable());
    }

    #[test]
    fn zero_service_rate_is_a_hard_error() {
        let err = SystemParams::new(500, 100.0, 1.5, 100.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "mu", .. }));
        assert!(SystemParams::new(0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(SystemParams::new(1, f64::NAN, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn overload_is_reported_not_rejected() {
        let params = SystemParams::new(500, 100.0, 1.5, 100.0, 14_000.0).unwrap();
        let report = params.validate().unwrap();
        assert_eq!(
            report.warnings,
            vec![Warning::Overload {
                ceil_rho_nu: 15_000.0,
                mu: 14_000.0
            }]
        );
    }

    #[test]
    fn chi_constants() {
        let params = SystemParams::baseline();
        let c = ChiDelayParams::new(200.0, &params);
        assert!((c.a_chi - 150.0 * 1f64.exp()).abs() < 1e-9);
        assert!(c.a_chi >= params.rho());
        assert!((c.ln_b_chi - (-199.0 + c.a_chi - 150.0)).abs() < 1e-9);
        let zero = ChiDelayParams::new(0.0, &params);
        assert_eq!(zero.a_chi, 150.0);
        assert_eq!(zero.b_chi(), 1.0);
    }
}
