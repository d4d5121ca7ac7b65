use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{order_function, PotentialError, PotentialSpec, PotentialTerm, Result, MINIMUM_TOL};
use crate::rng;

/// Hypotheses covered by [`check_assumptions`], in report order.
pub const HYPOTHESES: [&str; 9] = [
    "re-v-nonnegative",
    "grad-a-bounded",
    "a-higher-derivatives-decay",
    "v-hessian-bounded",
    "im-v-controlled",
    "re-v-elliptic-at-infinity",
    "im-v-flat-at-minima",
    "symbol-elliptic-at-infinity",
    "im-v-controlled-globally",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Evidence {
    /// Follows from the term catalog.
    Structural,
    /// Tested on finitely many sample points.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisRecord {
    pub id: &'static str,
    pub passed: bool,
    pub evidence: Evidence,
    /// Worst sample for the hypothesis, if any was evaluated.
    pub witness: Option<Vec<f64>>,
    /// Positive when passing; the size of the slack in the hypothesis' own units.
    pub margin: f64,
    /// Best constant found, for hypotheses stated with an unspecified constant.
    pub constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub records: Vec<HypothesisRecord>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.records.iter().all(|r| r.passed)
    }

    pub fn get(&self, id: &str) -> Option<&HypothesisRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionConfig {
    pub radius: f64,
    pub shell_samples: usize,
    pub c_search_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for AssumptionConfig {
    fn default() -> Self {
        Self {
            radius: 10.0,
            shell_samples: 1000,
            c_search_grid: (2..=40).map(|c| c as f64).collect(),
            seed: 0,
        }
    }
}

/// Thickness of a sampling shell: radii are drawn from `[r, SHELL_SPREAD r]`.
const SHELL_SPREAD: f64 = 1.25;
/// Growth allowed between inner and outer shells before an `O(1)` claim fails.
const BOUNDED_GROWTH: f64 = 2.0;

fn sample_shell(dim: usize, r: f64, count: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            let mut d: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let nrm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            let rad = r * (1.0 + (SHELL_SPREAD - 1.0) * rng.random::<f64>());
            for v in d.iter_mut() {
                *v *= rad / nrm;
            }
            d
        })
        .collect()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

struct Shells {
    radii: [f64; 4],
    points: Vec<Vec<Vec<f64>>>,
}

/// Structural record for hypotheses certified by the catalog.
fn structural(id: &'static str, margin: f64) -> HypothesisRecord {
    HypothesisRecord {
        id,
        passed: true,
        evidence: Evidence::Structural,
        witness: None,
        margin,
        constant: None,
    }
}

/// `O(1)` test of a nonnegative ratio over the shells: the supremum on the
/// outermost shell may exceed the supremum over the inner ones by at most
/// [`BOUNDED_GROWTH`]. `extra` points (e.g. near the minima) join the inner set.
fn bounded_ratio(
    id: &'static str,
    shells: &Shells,
    extra: &[Vec<f64>],
    ratio: impl Fn(&[f64]) -> f64,
) -> HypothesisRecord {
    let mut inner_sup = 0.0_f64;
    let mut outer_sup = 0.0_f64;
    let mut witness: Option<(f64, Vec<f64>)> = None;
    let last = shells.points.len() - 1;
    let inner = shells.points[..last].iter().flatten().chain(extra);
    for (k, x) in inner
        .map(|x| (0, x))
        .chain(shells.points[last].iter().map(|x| (1, x)))
    {
        let r = ratio(x);
        if k == 0 {
            inner_sup = inner_sup.max(r);
        } else {
            outer_sup = outer_sup.max(r);
        }
        if witness.as_ref().is_none_or(|(w, _)| r > *w) {
            witness = Some((r, x.clone()));
        }
    }
    let cap = BOUNDED_GROWTH * inner_sup;
    let finite = inner_sup.is_finite() && outer_sup.is_finite();
    HypothesisRecord {
        id,
        passed: finite && outer_sup <= cap.max(f64::MIN_POSITIVE),
        evidence: Evidence::Sampled,
        witness: witness.map(|w| w.1),
        margin: if finite {
            cap - outer_sup
        } else {
            f64::NEG_INFINITY
        },
        constant: Some(inner_sup.max(outer_sup)),
    }
}

/// Smallest `C` in the grid with `lhs(x) * C >= rhs(x)` at every sample
/// with `|x| >= C`. Only grid values up to the largest sampled radius count.
fn smallest_constant(
    id: &'static str,
    grid: &[f64],
    points: &[Vec<f64>],
    lhs: impl Fn(&[f64]) -> f64,
    rhs: impl Fn(&[f64]) -> f64,
) -> HypothesisRecord {
    let max_radius = points.iter().map(|x| norm(x)).fold(0.0, f64::max);
    let mut sorted: Vec<f64> = grid
        .iter()
        .cloned()
        .filter(|&c| c > 1.0 && c <= max_radius)
        .collect();
    sorted.sort_by(f64::total_cmp);
    let evals: Vec<(f64, f64, f64)> = points.iter().map(|x| (norm(x), lhs(x), rhs(x))).collect();
    let mut last_witness = None;
    for &c in &sorted {
        let mut worst: Option<(f64, usize)> = None;
        for (i, &(r, l, rh)) in evals.iter().enumerate() {
            if r < c {
                continue;
            }
            let slack = c * l - rh;
            if worst.is_none_or(|(w, _)| slack < w) {
                worst = Some((slack, i));
            }
        }
        match worst {
            Some((slack, i)) if slack < 0.0 => last_witness = Some(points[i].clone()),
            Some((slack, i)) => {
                return HypothesisRecord {
                    id,
                    passed: true,
                    evidence: Evidence::Sampled,
                    witness: Some(points[i].clone()),
                    margin: slack,
                    constant: Some(c),
                }
            }
            None => {}
        }
    }
    HypothesisRecord {
        id,
        passed: false,
        evidence: Evidence::Sampled,
        witness: last_witness,
        margin: f64::NEG_INFINITY,
        constant: None,
    }
}

/// Tests the hypotheses of the main theorems on `spec`.
///
/// Structural growth conditions are read off the term catalog. Pointwise
/// conditions are sampled on the shells `|x| ≈ R/4, R/2, R, 2R` (and on
/// phase-space shells for the ellipticity of `Re p`). Sampled passes are
/// evidence, not proofs.
pub fn check_assumptions(
    spec: &PotentialSpec,
    candidates: &[Vec<f64>],
    cfg: &AssumptionConfig,
) -> Result<AssumptionReport> {
    if cfg.radius < 10.0 {
        return Err(PotentialError::InvalidArgument(format!(
            "sample radius {} < 10",
            cfg.radius
        )));
    }
    if cfg.shell_samples < 1000 {
        return Err(PotentialError::InvalidArgument(format!(
            "{} samples per shell < 1000",
            cfg.shell_samples
        )));
    }
    let n = spec.dim();
    let r = cfg.radius;
    let radii = [r / 4.0, r / 2.0, r, 2.0 * r];
    let points: Vec<Vec<Vec<f64>>> = radii
        .iter()
        .enumerate()
        .map(|(k, &rad)| {
            let mut g = rng::stream(cfg.seed, &format!("assumptions/shell/{k}"));
            sample_shell(n, rad, cfg.shell_samples, &mut g)
        })
        .collect();
    let shells = Shells { radii, points };
    let all: Vec<Vec<f64>> = shells.points.iter().flatten().cloned().collect();

    // points inside the inner shell, including small spheres around the minima
    let mut g = rng::stream(cfg.seed, "assumptions/interior");
    let mut interior = Vec::new();
    for _ in 0..cfg.shell_samples {
        let mut d: Vec<f64> = (0..n).map(|_| g.sample(StandardNormal)).collect();
        let nrm = norm(&d);
        let rad = shells.radii[0] * g.random::<f64>().powf(1.0 / n as f64);
        for v in d.iter_mut() {
            *v *= rad / nrm;
        }
        interior.push(d);
    }
    let mut near_minima = Vec::new();
    for c in candidates {
        for &rho in &[1e-2, 3e-2, 1e-1] {
            for p in sample_shell(n, rho, 64, &mut g) {
                near_minima.push(p.iter().zip(c).map(|(a, b)| a + b).collect::<Vec<f64>>());
            }
        }
    }
    let mut inside: Vec<Vec<f64>> = interior.clone();
    inside.extend(near_minima.iter().cloned());

    let mut records = Vec::with_capacity(HYPOTHESES.len());

    // V₁ >= 0
    {
        let mut worst: Option<(f64, Vec<f64>)> = None;
        for x in all.iter().chain(&inside) {
            let v1 = spec.potential(x).re;
            if worst.as_ref().is_none_or(|(w, _)| v1 < *w) {
                worst = Some((v1, x.clone()));
            }
        }
        let (min_v1, w) = worst.expect("samples exist");
        records.push(HypothesisRecord {
            id: "re-v-nonnegative",
            passed: min_v1 >= -1e-12,
            evidence: Evidence::Sampled,
            witness: Some(w),
            margin: min_v1,
            constant: None,
        });
    }

    // A affine
    let jac_norm = spec.a_jacobian().iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut r13 = structural("grad-a-bounded", 0.0);
    r13.constant = Some(jac_norm);
    records.push(r13);
    records.push(structural("a-higher-derivatives-decay", 0.0));

    // every term has growth order <= 2; the sampled sup of |V''| is reported
    {
        let max_order = spec
            .terms()
            .iter()
            .map(PotentialTerm::effective_degree)
            .max()
            .unwrap_or(0);
        let mut sup = 0.0_f64;
        let mut w = None;
        for x in all.iter().chain(&inside) {
            let h = spec
                .evaluate(x)
                .hess_v
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if h > sup {
                sup = h;
                w = Some(x.clone());
            }
        }
        let mut rec = structural("v-hessian-bounded", (2 - max_order) as f64);
        rec.passed = max_order <= 2;
        rec.witness = w;
        rec.constant = Some(sup);
        records.push(rec);
    }

    // |V₂| <= O(1)(1 + V₁ + |V₂'|²)
    records.push(bounded_ratio("im-v-controlled", &shells, &inside, |x| {
        let e = spec.evaluate(x);
        e.v2().abs() / (1.0 + e.v1() + e.grad_v2_sq())
    }));

    // V₁ >= (1 + |V₂'|²)/C for |x| >= C
    records.push(smallest_constant(
        "re-v-elliptic-at-infinity",
        &cfg.c_search_grid,
        &all,
        |x| spec.potential(x).re,
        |x| 1.0 + spec.evaluate(x).grad_v2_sq(),
    ));

    // V₂ and ∇V₂ vanish at the declared zeros of V₁
    {
        let mut worst = 0.0_f64;
        let mut w = None;
        for c in candidates {
            let e = spec.evaluate(c);
            let defect = e.grad_v.iter().map(|g| g.im.abs()).fold(e.v2().abs(), f64::max);
            if defect >= worst {
                worst = defect;
                w = Some(c.clone());
            }
        }
        records.push(HypothesisRecord {
            id: "im-v-flat-at-minima",
            passed: !candidates.is_empty() && worst <= MINIMUM_TOL,
            evidence: Evidence::Sampled,
            witness: w,
            margin: MINIMUM_TOL - worst,
            constant: None,
        });
    }

    // Re p >= m / C̃ for |X| >= C̃, on phase-space shells
    {
        let mut phase = Vec::new();
        for (k, &rad) in radii.iter().enumerate() {
            let mut g = rng::stream(cfg.seed, &format!("assumptions/phase/{k}"));
            phase.extend(sample_shell(2 * n, rad, cfg.shell_samples, &mut g));
        }
        let re_p = |big: &[f64]| {
            let (x, xi) = big.split_at(n);
            let a = spec.magnetic_potential(x);
            let kin: f64 = xi.iter().zip(&a).map(|(p, q)| (p - q) * (p - q)).sum();
            kin + spec.potential(x).re
        };
        records.push(smallest_constant(
            "symbol-elliptic-at-infinity",
            &cfg.c_search_grid,
            &phase,
            re_p,
            |big| {
                let (x, xi) = big.split_at(n);
                order_function(spec, x, xi)
            },
        ));
    }

    // |V₂| <= O(1)(V₁ + |V₂'|²) everywhere, including near the minima
    records.push(bounded_ratio("im-v-controlled-globally", &shells, &inside, |x| {
        let e = spec.evaluate(x);
        let num = e.v2().abs();
        let den = e.v1() + e.grad_v2_sq();
        if num <= f64::MIN_POSITIVE {
            0.0
        } else if den <= 0.0 {
            f64::INFINITY
        } else {
            num / den
        }
    }));

    Ok(AssumptionReport { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    fn spec(terms: Vec<PotentialTerm>) -> PotentialSpec {
        PotentialSpec::electric(1, terms).unwrap()
    }

    fn quad(coeff: C64) -> PotentialTerm {
        PotentialTerm::Monomial {
            coeff,
            powers: vec![2],
        }
    }

    #[test]
    fn rotated_oscillator_passes_everything() {
        let s = spec(vec![quad(C64::new(1.0, 1.0))]);
        let rep = check_assumptions(&s, &[vec![0.0]], &AssumptionConfig::default()).unwrap();
        let ids: Vec<&str> = rep.records.iter().map(|r| r.id).collect();
        assert_eq!(ids, HYPOTHESES.to_vec());
        assert!(rep.all_passed(), "{rep:#?}");
        assert_eq!(rep.get("re-v-elliptic-at-infinity").unwrap().constant, Some(5.0));
        assert_eq!(
            rep.get("symbol-elliptic-at-infinity").unwrap().constant,
            Some(6.0)
        );
    }

    #[test]
    fn imaginary_oscillator_fails_ellipticity() {
        let s = spec(vec![quad(C64::new(0.0, 1.0))]);
        let rep = check_assumptions(&s, &[vec![0.0]], &AssumptionConfig::default()).unwrap();
        let r = rep.get("re-v-elliptic-at-infinity").unwrap();
        assert!(!r.passed);
        assert!(r.witness.is_some());
    }

    #[test]
    fn damped_cubic_keeps_v1_nonnegative() {
        let s = spec(vec![
            quad(C64::new(1.0, 1.0)),
            PotentialTerm::Damped {
                coeff: C64::new(1.0, 0.0),
                powers: vec![3],
                damping: 1,
            },
        ]);
        let rep = check_assumptions(&s, &[vec![0.0]], &AssumptionConfig::default()).unwrap();
        assert!(rep.get("re-v-nonnegative").unwrap().passed);
        assert!(rep.all_passed(), "{rep:#?}");
    }

    #[test]
    fn bad_arguments_are_rejected() {
        let s = spec(vec![quad(C64::new(1.0, 0.0))]);
        let mut cfg = AssumptionConfig {
            radius: 5.0,
            ..AssumptionConfig::default()
        };
        assert!(check_assumptions(&s, &[vec![0.0]], &cfg).is_err());
        cfg.radius = 10.0;
        cfg.shell_samples = 10;
        assert!(check_assumptions(&s, &[vec![0.0]], &cfg).is_err());
    }
}
