//! Divergences between distributions on a finite support.
//!
//! The f-divergence family is a closed registry with hand-derived
//! generator `f`, derivative `f′`, convex conjugate `f*` and `(f*)′`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DivergenceError {
    #[error("{what} = {value} is outside the domain of {name}")]
    Domain { name: &'static str, what: &'static str, value: f64 },
    #[error("unknown divergence `{0}`")]
    Unknown(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FDivergence {
    /// `f(u) = u log u`.
    Kl,
    /// `f(u) = −log u`.
    ReverseKl,
    /// `f(u) = u log u − (u+1) log((u+1)/2)`, twice the Jensen-Shannon divergence.
    Js,
    /// `f(u) = (u−1)²`.
    Pearson,
}

pub const ALL_F_DIVERGENCES: [FDivergence; 4] =
    [FDivergence::Kl, FDivergence::ReverseKl, FDivergence::Js, FDivergence::Pearson];

impl FDivergence {
    pub fn from_name(name: &str) -> Result<Self, DivergenceError> {
        match name.trim().to_ascii_lowercase().as_str() {
            "kl" => Ok(Self::Kl),
            "reverse_kl" | "reversekl" | "rkl" => Ok(Self::ReverseKl),
            "js" | "jensen_shannon" => Ok(Self::Js),
            "pearson" | "chi2" | "pearson_chi2" => Ok(Self::Pearson),
            other => Err(DivergenceError::Unknown(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Kl => "kl",
            Self::ReverseKl => "reverse_kl",
            Self::Js => "js",
            Self::Pearson => "pearson",
        }
    }

    fn check_u(self, u: f64) -> Result<(), DivergenceError> {
        let ok = match self {
            Self::Pearson => u >= 0.0,
            _ => u > 0.0,
        };
        if ok && u.is_finite() {
            Ok(())
        } else {
            Err(DivergenceError::Domain { name: self.name(), what: "u", value: u })
        }
    }

    /// Whether `t` lies in the effective domain of `f*`.
    pub fn conj_domain_contains(self, t: f64) -> bool {
        t.is_finite()
            && match self {
                Self::Kl | Self::Pearson => true,
                Self::ReverseKl => t < 0.0,
                Self::Js => t < std::f64::consts::LN_2,
            }
    }

    fn check_t(self, t: f64) -> Result<(), DivergenceError> {
        if self.conj_domain_contains(t) {
            Ok(())
        } else {
            Err(DivergenceError::Domain { name: self.name(), what: "t", value: t })
        }
    }

    pub fn f(self, u: f64) -> Result<f64, DivergenceError> {
        self.check_u(u)?;
        Ok(match self {
            Self::Kl => xlogx(u),
            Self::ReverseKl => -u.ln(),
            Self::Js => xlogx(u) - (u + 1.0) * ((u + 1.0) / 2.0).ln(),
            Self::Pearson => (u - 1.0) * (u - 1.0),
        })
    }

    pub fn f_prime(self, u: f64) -> Result<f64, DivergenceError> {
        self.check_u(u)?;
        if u == 0.0 {
            // Only Pearson admits u = 0.
            return Ok(-2.0);
        }
        Ok(match self {
            Self::Kl => 1.0 + u.ln(),
            Self::ReverseKl => -1.0 / u,
            Self::Js => (2.0 * u / (u + 1.0)).ln(),
            Self::Pearson => 2.0 * (u - 1.0),
        })
    }

    pub fn conj(self, t: f64) -> Result<f64, DivergenceError> {
        self.check_t(t)?;
        Ok(match self {
            Self::Kl => (t - 1.0).exp(),
            Self::ReverseKl => -1.0 - (-t).ln(),
            Self::Js => -(2.0 - t.exp()).ln(),
            Self::Pearson => t * t / 4.0 + t,
        })
    }

    pub fn conj_prime(self, t: f64) -> Result<f64, DivergenceError> {
        self.check_t(t)?;
        Ok(match self {
            Self::Kl => (t - 1.0).exp(),
            Self::ReverseKl => -1.0 / t,
            Self::Js => t.exp() / (2.0 - t.exp()),
            Self::Pearson => t / 2.0 + 1.0,
        })
    }

    /// `D_f(p‖q) = Σ q·f(p/q)`, with `q > 0` required coordinatewise.
    pub fn divergence(self, p: &[f64], q: &[f64]) -> Result<f64, DivergenceError> {
        same_len(p, q)?;
        let mut acc = 0.0;
        for (&a, &b) in p.iter().zip(q) {
            if b <= 0.0 {
                return Err(DivergenceError::Domain { name: self.name(), what: "q", value: b });
            }
            acc += b * self.f(a / b)?;
        }
        Ok(acc)
    }

    /// `∂D_f/∂q_x = f(u) − u·f′(u)` with `u = p_x/q_x`.
    pub fn divergence_grad_q(self, p: &[f64], q: &[f64]) -> Result<Vec<f64>, DivergenceError> {
        same_len(p, q)?;
        p.iter()
            .zip(q)
            .map(|(&a, &b)| {
                if b <= 0.0 {
                    return Err(DivergenceError::Domain { name: self.name(), what: "q", value: b });
                }
                let u = a / b;
                Ok(self.f(u)? - u * self.f_prime(u)?)
            })
            .collect()
    }
}

fn same_len(p: &[f64], q: &[f64]) -> Result<(), DivergenceError> {
    if p.len() == q.len() {
        Ok(())
    } else {
        Err(DivergenceError::LengthMismatch(p.len(), q.len()))
    }
}

/// `x log x` with `0 log 0 = 0`.
pub fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `KL(p‖q) = Σ p log(p/q)` with `0 log 0 = 0`. Infinite if `p > 0 = q`.
pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            if a == 0.0 {
                0.0
            } else if b == 0.0 {
                f64::INFINITY
            } else {
                a * (a / b).ln()
            }
        })
        .sum()
}

/// Jensen-Shannon divergence in nats, `½KL(p‖m) + ½KL(q‖m)`.
pub fn jsd(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    0.5 * kl(p, &m) + 0.5 * kl(q, &m)
}

/// `∂JSD/∂q_x = ½ log(q_x/m_x)`. Where `q_x = 0 < p_x` the true derivative is
/// `−∞`; it is capped at `½ log(f64::MIN_POSITIVE)` so callers stay finite.
pub fn jsd_grad_q(p: &[f64], q: &[f64]) -> Vec<f64> {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            if a == 0.0 {
                0.5 * std::f64::consts::LN_2
            } else {
                0.5 * (2.0 * b / (a + b)).max(f64::MIN_POSITIVE).ln()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn f_vanishes_at_one() {
        for d in ALL_F_DIVERGENCES {
            assert!(d.f(1.0).unwrap().abs() < 1e-15, "{d:?}");
        }
    }

    #[test]
    fn conjugate_derivative_inverts_f_prime() {
        for d in ALL_F_DIVERGENCES {
            for u in [0.05, 0.3, 1.0, 2.5, 9.0] {
                let t = d.f_prime(u).unwrap();
                assert!((d.conj_prime(t).unwrap() - u).abs() < 1e-10, "{d:?} u={u}");
                // Fenchel-Young equality at the conjugate pair.
                let gap = d.f(u).unwrap() + d.conj(t).unwrap() - u * t;
                assert!(gap.abs() < 1e-10, "{d:?} u={u} gap={gap}");
            }
        }
    }

    #[test]
    fn fenchel_identity_on_grid() {
        for d in ALL_F_DIVERGENCES {
            let (lo, hi) = (d.f_prime(1e-3).unwrap(), d.f_prime(1e3).unwrap());
            let ts: Vec<f64> = (0..=200_000).map(|k| lo + (hi - lo) * k as f64 / 200_000.0).collect();
            for u in [0.2, 0.5, 1.0, 1.7, 4.0] {
                let best = ts
                    .iter()
                    .filter(|&&t| d.conj_domain_contains(t))
                    .map(|&t| u * t - d.conj(t).unwrap())
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!((best - d.f(u).unwrap()).abs() < 1e-4, "{d:?} u={u}: {best}");
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for d in ALL_F_DIVERGENCES {
            for u in [0.3, 0.9, 2.2] {
                let fd = (d.f(u + h).unwrap() - d.f(u - h).unwrap()) / (2.0 * h);
                let an = d.f_prime(u).unwrap();
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-2));
                let t = d.f_prime(u).unwrap();
                let fd = (d.conj(t + h).unwrap() - d.conj(t - h).unwrap()) / (2.0 * h);
                let an = d.conj_prime(t).unwrap();
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-2));
            }
        }
    }

    #[test]
    fn js_member_is_twice_jsd() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let q = [0.25, 0.4, 0.05, 0.3];
        let d = FDivergence::Js.divergence(&p, &q).unwrap();
        assert!((d - 2.0 * jsd(&p, &q)).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(FDivergence::ReverseKl.conj(0.5).is_err());
        assert!(FDivergence::Js.conj(1.0).is_err());
        assert!(FDivergence::Kl.f(-0.1).is_err());
        assert!(matches!(FDivergence::from_name("hellinger"), Err(DivergenceError::Unknown(_))));
        assert_eq!(FDivergence::from_name("Pearson").unwrap(), FDivergence::Pearson);
    }

    fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.05f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn divergences_nonnegative(p in simplex(4), q in simplex(4)) {
            for d in ALL_F_DIVERGENCES {
                prop_assert!(d.divergence(&p, &q).unwrap() >= -1e-12);
                prop_assert!(d.divergence(&p, &p).unwrap().abs() < 1e-12);
            }
            prop_assert!(jsd(&p, &q) >= -1e-12);
            prop_assert!((jsd(&p, &q) - jsd(&q, &p)).abs() < 1e-12);
        }

        #[test]
        fn grad_q_matches_finite_differences(p in simplex(3), q in simplex(3)) {
            let h = 1e-6;
            for d in ALL_F_DIVERGENCES {
                let g = d.divergence_grad_q(&p, &q).unwrap();
                for i in 0..3 {
                    let mut a = q.clone();
                    let mut b = q.clone();
                    a[i] += h;
                    b[i] -= h;
                    let fd = (d.divergence(&p, &a).unwrap() - d.divergence(&p, &b).unwrap()) / (2.0 * h);
                    prop_assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1e-1));
                }
            }
            let g = jsd_grad_q(&p, &q);
            for i in 0..3 {
                let mut a = q.clone();
                let mut b = q.clone();
                a[i] += h;
                b[i] -= h;
                let fd = (jsd(&p, &a) - jsd(&p, &b)) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() <= 1e-6);
            }
        }
    }
}
