//! The acceptance suite: nine end-to-end checks with fixed models, grids and
//! tolerances. Each returns a [`CriterionResult`]; errors count as failures.

use std::time::Instant;

use serde::Serialize;

use crate::discretize::{assemble, Grid, GridOperator};
use crate::linalg::{greedy_match, norm2, random_vector, sub, LinearOp, C64};
use crate::model::{
    antisymmetrize, enclosed_multiplicity, lowest_points, pencil_eigenvalues, pencil_multiplicity_contour,
    singular_space_closed_form, singular_space_iterative, QuadraticModel,
};
use crate::oracles::{det_winding_refined, hermite_galerkin_spectrum, random_model, RandomModelKind};
use crate::potential::{verify_minima, PotentialSpec, PotentialTerm};
use crate::rng;
use crate::semigroup::{decay_series, geometric_times, propagate, DecaySeries, PropagatorKind};
use crate::spectral::{
    eigs_in_disc, leading_eigenvalue_asymptotics, line_sup_resolvent, parabolic_probe, spectral_projection,
    ProjectionDiagnostics,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub metrics: Vec<(String, f64)>,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl CriterionResult {
    /// One line: `[PASS] 4 leading-order asymptotics (12.3 s / 300 s): ...`
    pub fn line(&self) -> String {
        format!(
            "[{}] {} {} ({:.1} s / {:.0} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.budget_seconds,
            self.detail
        )
    }
}

type Outcome = Result<(bool, String, Vec<(String, f64)>), String>;

fn timed(id: u8, name: &'static str, budget_seconds: f64, body: impl FnOnce() -> Outcome) -> CriterionResult {
    let start = Instant::now();
    let outcome = body();
    let seconds = start.elapsed().as_secs_f64();
    let (ok, mut detail, metrics) = outcome.unwrap_or_else(|e| (false, format!("error: {e}"), Vec::new()));
    let in_budget = seconds < budget_seconds;
    if !in_budget {
        detail.push_str("; over the runtime budget");
    }
    CriterionResult {
        id,
        name,
        passed: ok && in_budget,
        detail,
        metrics,
        seconds,
        budget_seconds,
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// `V = coeff x²` in one dimension, `A = 0`.
pub fn quadratic_1d(coeff: C64) -> PotentialSpec {
    PotentialSpec::electric(
        1,
        vec![PotentialTerm::Monomial {
            coeff,
            powers: vec![2],
        }],
    )
    .expect("valid quadratic potential")
}

/// `V = (1 + i) x² + x³ (1 + x²)^{-1}`, `A = 0`.
pub fn anharmonic_1d() -> PotentialSpec {
    PotentialSpec::electric(
        1,
        vec![
            PotentialTerm::Monomial {
                coeff: c(1.0, 1.0),
                powers: vec![2],
            },
            PotentialTerm::Damped {
                coeff: c(1.0, 0.0),
                powers: vec![3],
                damping: 1,
            },
        ],
    )
    .expect("valid anharmonic potential")
}

/// Lattice points against the Hermite–Galerkin oracle at `K` and `2K`.
pub fn criterion_lattice_vs_galerkin() -> CriterionResult {
    timed(1, "lattice vs Hermite-Galerkin", 60.0, || {
        let cases: [(&str, QuadraticModel, usize); 3] = [
            (
                "n=1 V=1",
                QuadraticModel::from_rows(1, &[0.0], &[c(1.0, 0.0)]).map_err(err)?,
                40,
            ),
            (
                "n=1 V=2i",
                QuadraticModel::from_rows(1, &[0.0], &[c(0.0, 2.0)]).map_err(err)?,
                80,
            ),
            (
                "n=2 A=J/2 V=I",
                QuadraticModel::from_rows(
                    2,
                    &[0.0, -0.5, 0.5, 0.0],
                    &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
                )
                .map_err(err)?,
                24,
            ),
        ];
        let mut ok = true;
        let mut parts = Vec::new();
        let mut metrics = Vec::new();
        for (label, model, k) in cases {
            let lattice = lowest_points(&model, 8).map_err(err)?;
            let coarse = hermite_galerkin_spectrum(&model, k).map_err(err)?;
            let fine = hermite_galerkin_spectrum(&model, 2 * k).map_err(err)?;
            let worst = |g: &[C64]| {
                let pairs = greedy_match(&lattice, g);
                if pairs.len() < lattice.len() {
                    f64::INFINITY
                } else {
                    pairs.iter().map(|p| p.2).fold(0.0, f64::max)
                }
            };
            let e_coarse = worst(coarse.trusted_eigenvalues());
            let e_fine = worst(fine.trusted_eigenvalues());
            let pass = e_coarse < 1e-6 && e_fine < 1e-6;
            ok &= pass;
            parts.push(format!(
                "{label}: K={k} err {e_coarse:.1e}, K={} err {e_fine:.1e}",
                2 * k
            ));
            metrics.push((format!("{label} error K"), e_coarse));
            metrics.push((format!("{label} error 2K"), e_fine));
        }
        Ok((ok, parts.join("; "), metrics))
    })
}

/// Singular space trivial iff `V` invertible; closed form equals the
/// iterated-bracket construction.
pub fn criterion_singular_space(seed: u64) -> CriterionResult {
    timed(2, "singular space characterization", 60.0, || {
        let mut g = rng::stream(seed, "verify/singular");
        let mut mismatches = 0usize;
        let mut worst_distance = 0.0_f64;
        let mut nontrivial = 0usize;
        for k in 0..500 {
            let n = 1 + k % 3;
            let kind = match (k / 3) % 3 {
                0 => RandomModelKind::Generic,
                1 => RandomModelKind::DegenerateReal,
                _ => RandomModelKind::CommonKernel(1 + (k / 9) % n),
            };
            let model = random_model(n, kind, &mut g);
            let closed = singular_space_closed_form(&model).map_err(err)?;
            let iterative = match singular_space_iterative(&model, 2 * n - 1) {
                Ok(b) => b,
                Err(_) => {
                    mismatches += 1;
                    continue;
                }
            };
            worst_distance = worst_distance.max(closed.distance_to(&iterative));
            if closed.is_trivial() != (model.v_sigma_min() > 1e-8) {
                mismatches += 1;
            }
            nontrivial += usize::from(!closed.is_trivial());
        }
        let ok = mismatches == 0 && worst_distance <= 1e-10;
        Ok((
            ok,
            format!(
                "500 models, {nontrivial} with nontrivial S, {mismatches} mismatches, worst subspace distance {worst_distance:.1e}"
            ),
            vec![
                ("mismatches".into(), mismatches as f64),
                ("worst distance".into(), worst_distance),
            ],
        ))
    })
}

fn multiplicity_triple(
    model: &QuadraticModel,
    center: C64,
    radius: f64,
) -> Result<(usize, i64, usize), String> {
    let roots = pencil_eigenvalues(model).map_err(err)?;
    let contour = pencil_multiplicity_contour(model, center, radius, 256).map_err(err)?;
    let winding = det_winding_refined(model, center, radius, 64, 1 << 14).map_err(err)?;
    Ok((contour, winding, enclosed_multiplicity(&roots, center, radius)))
}

/// Trace integral, determinant winding and Hamilton-map clusters agree.
pub fn criterion_multiplicity(seed: u64) -> CriterionResult {
    timed(3, "root multiplicity three ways", 60.0, || {
        let mut g = rng::stream(seed, "verify/multiplicity");
        let mut disagreements = 0usize;
        for k in 0..100 {
            let n = 1 + k % 3;
            let model = random_model(n, RandomModelKind::Generic, &mut g);
            let roots = pencil_eigenvalues(&model).map_err(err)?;
            let center = roots[k % roots.len()].lambda;
            let gap = roots
                .iter()
                .map(|r| (r.lambda - center).norm())
                .filter(|&d| d > 1e-12)
                .fold(f64::INFINITY, f64::min);
            let radius = if gap.is_finite() { 0.5 * gap } else { 1.0 };
            let (a, b, c3) = multiplicity_triple(&model, center, radius)?;
            if a as i64 != b || a != c3 {
                disagreements += 1;
            }
        }
        // V = 2I, A = 0: T(λ) = (λ² + 1) I has double roots ±i
        let double = QuadraticModel::from_rows(
            2,
            &[0.0; 4],
            &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)],
        )
        .map_err(err)?;
        let (a, b, c3) = multiplicity_triple(&double, c(0.0, 1.0), 0.5)?;
        let double_ok = a == 2 && b == 2 && c3 == 2;
        Ok((
            disagreements == 0 && double_ok,
            format!("{disagreements}/100 disagreements; double root gives ({a}, {b}, {c3})"),
            vec![
                ("disagreements".into(), disagreements as f64),
                ("double root multiplicity".into(), a as f64),
            ],
        ))
    })
}

/// `λ₀(h)/h → μ₀` at rate `O(h)` for a perturbed complex oscillator.
pub fn criterion_leading_order(seed: u64) -> CriterionResult {
    timed(4, "leading-order eigenvalue asymptotics", 300.0, || {
        let spec = anharmonic_1d();
        let minima = verify_minima(&spec, &[vec![0.0]]).map_err(err)?;
        let grid = Grid::new(1, 8.0, 800).map_err(err)?;
        let table =
            leading_eigenvalue_asymptotics(&spec, &minima, &[0.1, 0.05, 0.025], grid, seed).map_err(err)?;
        let expected = c(1.09868, 0.45509);
        let last = table.rows.last().ok_or("empty table")?;
        let final_dev = (last.scaled - expected).norm();
        let decreasing = table.rows.windows(2).all(|w| w[1].deviation < w[0].deviation);
        let ok = decreasing && (0.7..=1.3).contains(&table.slope) && final_dev < 0.05;
        let devs: Vec<String> = table
            .rows
            .iter()
            .map(|r| format!("h={} dev {:.4}", r.h, r.deviation))
            .collect();
        Ok((
            ok,
            format!(
                "{}; slope {:.3}; final |λ/h - μ₀| {final_dev:.4}",
                devs.join(", "),
                table.slope
            ),
            vec![
                ("slope".into(), table.slope),
                ("final deviation".into(), final_dev),
            ],
        ))
    })
}

/// Contour projections for every eigenvalue in `D(0, 8h)` of the real and
/// the complex oscillator at `h = 0.05`.
pub fn projection_suite(seed: u64) -> Result<Vec<ProjectionDiagnostics>, String> {
    let h = 0.05;
    let grid = Grid::new(1, 8.0, 800).map_err(err)?;
    let mut out = Vec::new();
    for coeff in [c(1.0, 0.0), c(1.0, 1.0)] {
        let op = assemble(&quadratic_1d(coeff), grid, h).map_err(err)?;
        // a wider disc so the last eigenvalue inside sees its outer neighbour
        let eigs = eigs_in_disc(&op, 12.0, 20, seed).map_err(err)?;
        let known: Vec<C64> = eigs.eigenpairs.iter().map(|p| p.lambda).collect();
        for (k, &lambda) in known.iter().enumerate() {
            if lambda.norm() >= 8.0 * h {
                continue;
            }
            let gap = known
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, mu)| (mu - lambda).norm())
                .fold(f64::INFINITY, f64::min);
            let p = spectral_projection(&op, lambda, 0.5 * gap, 32, &known, seed ^ k as u64).map_err(err)?;
            out.push(p.diagnostics);
        }
    }
    Ok(out)
}

pub fn criterion_projections(seed: u64) -> CriterionResult {
    timed(5, "contour spectral projections", 120.0, || {
        let diags = projection_suite(seed)?;
        let mut ok = diags.len() == 7;
        let mut worst_idem = 0.0_f64;
        let mut worst_trace = 0.0_f64;
        let mut worst_drift = 0.0_f64;
        let mut max_norm = 0.0_f64;
        for d in &diags {
            worst_idem = worst_idem.max(d.idem_residual);
            worst_trace = worst_trace.max((d.trace - 1.0).norm());
            worst_drift = worst_drift.max(d.drift);
            max_norm = max_norm.max(d.norm);
            ok &= d.idem_residual < 1e-4
                && (d.trace - 1.0).norm() < 1e-4
                && d.drift < 1e-6
                && d.norm.is_finite();
        }
        let norms: Vec<String> = diags.iter().map(|d| format!("{:.3}", d.norm)).collect();
        Ok((
            ok,
            format!(
                "{} projections; worst idempotency {worst_idem:.1e}, trace error {worst_trace:.1e}, drift {worst_drift:.1e}; norms [{}]",
                diags.len(),
                norms.join(", ")
            ),
            vec![
                ("projections".into(), diags.len() as f64),
                ("worst idempotency".into(), worst_idem),
                ("worst trace error".into(), worst_trace),
                ("worst drift".into(), worst_drift),
                ("largest norm".into(), max_norm),
            ],
        ))
    })
}

/// Remainder decay after removing the ground state, dense propagator.
pub fn semigroup_decay(coeff: C64, h: f64, a: f64, grid: Grid, seed: u64) -> Result<DecaySeries, String> {
    let op = assemble(&quadratic_1d(coeff), grid, h).map_err(err)?;
    let eigs = eigs_in_disc(&op, 8.0, 10, seed).map_err(err)?;
    let known: Vec<C64> = eigs.eigenpairs.iter().map(|p| p.lambda).collect();
    let lambdas: Vec<C64> = known.iter().cloned().filter(|l| l.re < a * h).collect();
    let mut projectors = Vec::new();
    for &l in &lambdas {
        let gap = known
            .iter()
            .map(|mu| (mu - l).norm())
            .filter(|&d| d > 0.0)
            .fold(f64::INFINITY, f64::min);
        projectors.push(
            spectral_projection(&op, l, 0.5 * gap, 32, &known, seed)
                .map_err(err)?
                .projector,
        );
    }
    let refs: Vec<&dyn LinearOp> = projectors.iter().map(|p| p as &dyn LinearOp).collect();
    let times = geometric_times(0.5, 10.0, 8);
    decay_series(&op, PropagatorKind::Dense, &lambdas, &refs, &times, a, seed).map_err(err)
}

pub fn criterion_semigroup_decay(seed: u64) -> CriterionResult {
    timed(6, "semigroup remainder decay", 600.0, || {
        let grid = Grid::new(1, 6.0, 600).map_err(err)?;
        let complex = semigroup_decay(c(1.0, 1.0), 0.05, 2.0, grid, seed)?;
        let real = semigroup_decay(c(1.0, 0.0), 0.05, 2.0, grid, seed)?;
        let ok = complex.fitted_rate >= 1.9 && (real.fitted_rate - 3.0).abs() <= 0.1;
        Ok((
            ok,
            format!(
                "complex rate {:.3} ({} points, R² {:.4}); real rate {:.3} ({} points)",
                complex.fitted_rate, complex.fitted_points, complex.r2, real.fitted_rate, real.fitted_points
            ),
            vec![
                ("complex rate".into(), complex.fitted_rate),
                ("real rate".into(), real.fitted_rate),
            ],
        ))
    })
}

fn oscillator_ops(coeff: C64, hs: &[f64], grid: Grid) -> Result<Vec<GridOperator>, String> {
    hs.iter()
        .map(|&h| assemble(&quadratic_1d(coeff), grid, h).map_err(err))
        .collect()
}

const H_LIST: [f64; 3] = [0.1, 0.05, 0.025];

/// `sup h ‖(M - z)^{-1}‖` on `Re z = 2h`, `|Im z| <= 5h` is stable in `h`.
pub fn criterion_line_resolvent() -> CriterionResult {
    timed(7, "resolvent along Re z = 2h", 180.0, || {
        let model = QuadraticModel::from_rows(1, &[0.0], &[c(2.0, 2.0)]).map_err(err)?;
        let (model, _) = antisymmetrize(&model);
        let lattice = lowest_points(&model, 4).map_err(err)?;
        let grid = Grid::new(1, 8.0, 800).map_err(err)?;
        let mut sups = Vec::new();
        for op in oscillator_ops(c(1.0, 1.0), &H_LIST, grid)? {
            sups.push(
                line_sup_resolvent(&op, 2.0, (-5.0, 5.0), 41, &lattice)
                    .map_err(err)?
                    .sup_scaled,
            );
        }
        let max = sups.iter().cloned().fold(0.0, f64::max);
        let min = sups.iter().cloned().fold(f64::INFINITY, f64::min);
        let ratio = max / min;
        Ok((
            ratio < 2.0,
            format!("h·sup = {sups:.4?}; max/min {ratio:.3}"),
            vec![("ratio".into(), ratio)],
        ))
    })
}

/// `‖(M - is)^{-1}‖ h^{2/3} s^{1/3}` stays within `3×` of its median.
pub fn criterion_parabolic() -> CriterionResult {
    timed(8, "parabolic-region resolvent bound", 300.0, || {
        let grid = Grid::new(1, 8.0, 800).map_err(err)?;
        let mut values = Vec::new();
        for op in oscillator_ops(c(1.0, 1.0), &H_LIST, grid)? {
            for s in parabolic_probe(&op, &[1.0, 2.0, 4.0]).map_err(err)? {
                values.push(s.compensated);
            }
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let spread = sorted
            .iter()
            .map(|v| (v / median).max(median / v))
            .fold(0.0, f64::max);
        Ok((
            spread <= 3.0,
            format!("compensated products {values:.3?}; median {median:.3}, spread {spread:.3}"),
            vec![("median".into(), median), ("spread".into(), spread)],
        ))
    })
}

/// Contraction and the composition law for the Krylov propagator.
pub fn criterion_contraction(seed: u64) -> CriterionResult {
    timed(9, "contraction and semigroup law", 60.0, || {
        let op = assemble(
            &quadratic_1d(c(1.0, 1.0)),
            Grid::new(1, 6.0, 200).map_err(err)?,
            0.1,
        )
        .map_err(err)?;
        let mut g = rng::stream(seed, "verify/contraction");
        let mut worst_growth = 0.0_f64;
        let mut worst_composition = 0.0_f64;
        for _ in 0..50 {
            let v = random_vector(op.dim(), &mut g);
            let nv = norm2(&v);
            for t in [0.1, 1.0, 10.0] {
                let w = propagate(&op, &v, t).map_err(err)?;
                worst_growth = worst_growth.max(norm2(&w) / nv - 1.0);
            }
            let direct = propagate(&op, &v, 2.0).map_err(err)?;
            let inner = propagate(&op, &v, 1.3).map_err(err)?;
            let composed = propagate(&op, &inner, 0.7).map_err(err)?;
            worst_composition = worst_composition.max(norm2(&sub(&direct, &composed)) / nv);
        }
        let ok = worst_growth <= 1e-8 && worst_composition <= 1e-6;
        Ok((
            ok,
            format!("50 vectors; worst ‖e^(-tM/h)v‖/‖v‖ - 1 = {worst_growth:.1e}, composition error {worst_composition:.1e}"),
            vec![
                ("worst growth".into(), worst_growth),
                ("worst composition".into(), worst_composition),
            ],
        ))
    })
}

/// All nine checks in order.
pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    vec![
        criterion_lattice_vs_galerkin(),
        criterion_singular_space(seed),
        criterion_multiplicity(seed),
        criterion_leading_order(seed),
        criterion_projections(seed),
        criterion_semigroup_decay(seed),
        criterion_line_resolvent(),
        criterion_parabolic(),
        criterion_contraction(seed),
    ]
}
