//! Numeric tolerances shared by every module.
//!
//! All feasibility and equality comparisons in the crate route through a
//! [`Tolerances`] value so that one knob retunes the whole pipeline. The
//! defaults match what double-precision LP/SOCP arithmetic can actually
//! deliver; loosening them hides bugs, tightening them produces false alarms.

/// Tolerance bundle. Construct with [`Tolerances::default`], read the
/// `SOCVEXIFY_TOL` environment variable with [`Tolerances::from_env`], or set
/// an explicit feasibility tolerance with [`Tolerances::with_feasibility`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Slack allowed when deciding `g(v) ≤ 0`-style constraint satisfaction.
    pub feasibility: f64,
    /// Slack allowed when checking affine invariants (`Σλ = 1`, certificate
    /// reconstruction, round-trip identities).
    pub equality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: 1e-7,
            equality: 1e-6,
        }
    }
}

impl Tolerances {
    /// Environment variable consulted by [`Tolerances::from_env`].
    pub const ENV_VAR: &'static str = "SOCVEXIFY_TOL";

    /// Defaults, with the feasibility tolerance overridden by the
    /// `SOCVEXIFY_TOL` environment variable when it is set and parses as a
    /// positive float. A malformed value is ignored rather than fatal: the
    /// variable is a convenience override, not configuration of record.
    pub fn from_env() -> Self {
        match std::env::var(Self::ENV_VAR)
            .ok()
            .and_then(|s| s.trim().parse::<f64>().ok())
        {
            Some(t) if t > 0.0 && t.is_finite() => Self::with_feasibility(t),
            _ => Self::default(),
        }
    }

    /// Tolerances with the given feasibility slack. The equality slack keeps
    /// its usual 10× headroom over feasibility but never tightens below the
    /// default (equality checks compound two feasibility-grade quantities).
    pub fn with_feasibility(tol: f64) -> Self {
        Tolerances {
            feasibility: tol,
            equality: (10.0 * tol).max(1e-6),
        }
    }

    /// Half-width of the band around a constraint boundary inside which a
    /// classification is treated as BOUNDARY rather than a definite
    /// inside/outside verdict. Ten feasibility tolerances: both membership
    /// oracles are numerical, so calling points this close is ill-posed.
    pub fn boundary_band(&self) -> f64 {
        10.0 * self.feasibility
    }
}

/// Radicand values in `[-RADICAND_CLAMP, 0)` are treated as exact zeros when
/// evaluating `√(q(x))` right-hand sides. The column-space normalization
/// produces exact zeros that round a few ulps negative.
pub const RADICAND_CLAMP: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_pinned() {
        let t = Tolerances::default();
        assert_eq!(t.feasibility, 1e-7);
        assert_eq!(t.equality, 1e-6);
        assert_eq!(t.boundary_band(), 1e-6);
    }

    #[test]
    fn with_feasibility_keeps_equality_headroom() {
        let t = Tolerances::with_feasibility(1e-5);
        assert_eq!(t.feasibility, 1e-5);
        assert_eq!(t.equality, 1e-4);
        // Tightening feasibility does not tighten equality below default.
        let t = Tolerances::with_feasibility(1e-9);
        assert_eq!(t.equality, 1e-6);
    }

    #[test]
    fn env_override_parses_and_rejects_garbage() {
        // Env-var handling is process-global; test the parse paths directly.
        std::env::set_var(Tolerances::ENV_VAR, "1e-5");
        assert_eq!(Tolerances::from_env().feasibility, 1e-5);
        std::env::set_var(Tolerances::ENV_VAR, "not-a-number");
        assert_eq!(Tolerances::from_env(), Tolerances::default());
        std::env::set_var(Tolerances::ENV_VAR, "-3.0");
        assert_eq!(Tolerances::from_env(), Tolerances::default());
        std::env::remove_var(Tolerances::ENV_VAR);
        assert_eq!(Tolerances::from_env(), Tolerances::default());
    }
}
