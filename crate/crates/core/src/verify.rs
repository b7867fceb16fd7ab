//! Self-check suite used by the `verify` command.

use crate::combinatorics::{resource_norm_s, resource_norm_s_closed_form, CodeParams, SqueezingSpec};
use crate::error::{domain, Result};
use crate::fock_sim::{heralded_state_channel_sim, heralded_state_direct};
use crate::gaussian::{phase_flipped_tmsv, swap_pipeline, swapped_nu, tmsv_cm};
use crate::rates::{optimize_single_shot, plob_capacity, single_shot_rate, LinkSpec};

/// A named check returning a detail string on success and a description of
/// the violated invariant on failure.
pub struct Check {
    pub name: &'static str,
    pub run: fn() -> std::result::Result<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub results: Vec<CheckResult>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.results.iter().filter(|r| !r.passed)
    }
}

pub fn run_suite(checks: &[Check]) -> Result<Report> {
    if checks.is_empty() {
        return Err(domain("empty verification suite"));
    }
    let results = checks
        .iter()
        .map(|c| {
            let (passed, detail) = match (c.run)() {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckResult { name: c.name.to_string(), passed, detail }
        })
        .collect();
    Ok(Report { results })
}

pub fn standard_checks() -> Vec<Check> {
    vec![
        Check { name: "resource-norm-closed-form", run: resource_norm_check },
        Check { name: "heralded-state-oracle", run: heralded_state_check },
        Check { name: "swap-formula", run: swap_check },
        Check { name: "plob-dominance", run: plob_check },
        Check { name: "long-distance-ratio", run: long_distance_check },
    ]
}

pub fn run_standard() -> Result<Report> {
    run_suite(&standard_checks())
}

fn resource_norm_check() -> std::result::Result<String, String> {
    for k in 1..=4 {
        for m in 1..=8 {
            let p = CodeParams::new(k, m).map_err(|e| e.to_string())?;
            let brute = resource_norm_s(p).map_err(|e| e.to_string())?;
            let closed = resource_norm_s_closed_form(p).ok_or("missing closed form")?;
            if brute != closed {
                return Err(format!("S({k},{m}): brute force {brute} != closed form {closed}"));
            }
        }
    }
    Ok("k<=4, m<=8 exact".into())
}

fn heralded_state_check() -> std::result::Result<String, String> {
    let chi = SqueezingSpec::new(0.5).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for m in 1..=2 {
        for k1 in 0..=2 {
            for j1 in 0..=k1 {
                for alice in [None, Some(chi)] {
                    let err = |e: crate::Error| e.to_string();
                    let a = heralded_state_direct(k1, j1, m, 0.7, alice).map_err(err)?;
                    let b = heralded_state_channel_sim(k1, j1, m, 0.7, alice, 4).map_err(err)?;
                    let d = a.trace_distance_pure(&b).map_err(err)?;
                    worst = worst.max(d);
                    if d > 1e-10 {
                        return Err(format!("(k1={k1}, j1={j1}, m={m}): trace distance {d:e}"));
                    }
                }
            }
        }
    }
    Ok(format!("max trace distance {worst:.1e}"))
}

fn swap_check() -> std::result::Result<String, String> {
    let t = tmsv_cm(2.0).map_err(|e| e.to_string())?;
    let out = swap_pipeline(&t, &t).map_err(|e| e.to_string())?;
    let expect = phase_flipped_tmsv(swapped_nu(2.0)).map_err(|e| e.to_string())?;
    let d = out.max_abs_diff(&expect);
    if d > 1e-10 {
        return Err(format!("swap of TMSV(2) deviates by {d:e}"));
    }
    Ok(format!("nu=2 -> {}, max deviation {d:.1e}", swapped_nu(2.0)))
}

fn plob_check() -> std::result::Result<String, String> {
    for km in [1.0, 10.0, 50.0, 100.0, 200.0] {
        let eta = LinkSpec::fibre(km).map_err(|e| e.to_string())?.eta();
        let cap = plob_capacity(eta).map_err(|e| e.to_string())?;
        for k in 1..=6 {
            for m in 1..=6 {
                let p = CodeParams::new(k, m).map_err(|e| e.to_string())?;
                let r = single_shot_rate(p, eta).map_err(|e| e.to_string())?;
                if !cap.dominates(r.rate) {
                    return Err(format!("rate {} exceeds capacity at {km} km, (k,m)=({k},{m})", r.rate));
                }
            }
        }
    }
    Ok("single-shot rates below capacity".into())
}

fn long_distance_check() -> std::result::Result<String, String> {
    let eta = LinkSpec::fibre(200.0).map_err(|e| e.to_string())?.eta();
    let (p, r) = optimize_single_shot(eta, 20, 20).map_err(|e| e.to_string())?;
    let target = 3f64.ln() / 3.0;
    if (r.ratio - target).abs() > 0.005 || (p.k, p.m) != (1, 3) {
        return Err(format!("ratio {} at (k,m)=({},{}), expected ~{target:.4} at (1,3)", r.ratio, p.k, p.m));
    }
    Ok(format!("ratio {:.4} at (1,3)", r.ratio))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_suite_is_error() {
        assert!(run_suite(&[]).is_err());
    }

    #[test]
    fn failures_are_reported() {
        let checks = [
            Check { name: "ok", run: || Ok("fine".into()) },
            Check { name: "bad", run: || Err("broken invariant".into()) },
        ];
        let r = run_suite(&checks).unwrap();
        assert!(!r.all_passed());
        let f: Vec<_> = r.failures().collect();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].detail, "broken invariant");
    }

    #[test]
    fn standard_suite_passes() {
        let r = run_standard().unwrap();
        for c in &r.results {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
