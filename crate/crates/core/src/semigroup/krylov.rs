use crate::linalg::{axpy, dot, expm, norm2, CMatrix, C64};

/// Outcome of one Krylov propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct KrylovRun {
    pub w: Vec<C64>,
    pub steps: usize,
    pub rejections: usize,
    /// Sum of the local error estimates.
    pub error_estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepFailure {
    pub t_reached: f64,
    pub step: f64,
}

const GAMMA: f64 = 0.9;
const DELTA: f64 = 1.2;
const MAX_REJECT: usize = 10;

fn round_step(t: f64) -> f64 {
    let s = 10f64.powf(t.log10().floor() - 1.0);
    (t / s).ceil() * s
}

/// `exp(t A) v` for `t >= 0` by Krylov projection with adaptive substeps.
///
/// `tol` bounds the local error per unit time, so the accumulated error is
/// at most about `1.2 t tol`. `anorm` is any upper bound for `‖A‖`.
pub fn expv(
    t: f64,
    apply: impl Fn(&[C64]) -> Vec<C64>,
    anorm: f64,
    v: &[C64],
    m: usize,
    tol: f64,
) -> Result<KrylovRun, StepFailure> {
    let n = v.len();
    let m = m.min(n).max(2);
    let mut w = v.to_vec();
    let mut beta = norm2(&w);
    let mut run = KrylovRun {
        w: Vec::new(),
        steps: 0,
        rejections: 0,
        error_estimate: 0.0,
    };
    if t == 0.0 || beta == 0.0 || anorm == 0.0 {
        run.w = w;
        return Ok(run);
    }
    let btol = 1e-12 * beta;
    let rndoff = anorm * f64::EPSILON;
    let mf = m as f64;
    let fact =
        ((mf + 1.0) / std::f64::consts::E).powf(mf + 1.0) * (2.0 * std::f64::consts::PI * (mf + 1.0)).sqrt();
    let mut t_new = round_step((1.0 / anorm) * ((fact * tol) / (4.0 * beta * anorm)).powf(1.0 / mf));
    let mut t_now = 0.0;
    while t_now < t {
        run.steps += 1;
        let mut t_step = (t - t_now).min(t_new);
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        basis.push(w.iter().map(|x| x / beta).collect());
        let mut hm = CMatrix::zeros(m + 2, m + 2);
        let mut mb = m;
        let mut breakdown = false;
        for j in 0..m {
            let mut p = apply(&basis[j]);
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let c = dot(q, &p);
                    hm[(i, j)] += c;
                    axpy(-c, q, &mut p);
                }
            }
            let s = norm2(&p);
            if s < btol {
                breakdown = true;
                mb = j + 1;
                t_step = t - t_now;
                break;
            }
            hm[(j + 1, j)] = C64::new(s, 0.0);
            basis.push(p.into_iter().map(|x| x / s).collect());
        }
        let mut avnorm = 0.0;
        if !breakdown {
            hm[(m + 1, m)] = C64::new(1.0, 0.0);
            avnorm = norm2(&apply(&basis[m]));
        }
        let mut rejects = 0;
        let (f, err_loc, xm) = loop {
            let mx = if breakdown { mb } else { mb + 2 };
            let sub = hm.view((0, 0), (mx, mx)) * C64::new(t_step, 0.0);
            let f = expm(&sub.into_owned());
            if breakdown {
                break (f, btol, 1.0 / mf);
            }
            let phi1 = (beta * f[(m, 0)]).norm();
            let phi2 = (beta * f[(m + 1, 0)] * avnorm).norm();
            let (err, xm) = if phi1 > 10.0 * phi2 {
                (phi2, 1.0 / mf)
            } else if phi1 > phi2 {
                (phi1 * phi2 / (phi1 - phi2), 1.0 / mf)
            } else {
                (phi1, 1.0 / (mf - 1.0))
            };
            if err <= DELTA * t_step * tol {
                break (f, err, xm);
            }
            if rejects == MAX_REJECT {
                return Err(StepFailure {
                    t_reached: t_now,
                    step: t_step,
                });
            }
            t_step = round_step(GAMMA * t_step * (t_step * tol / err).powf(xm));
            rejects += 1;
        };
        run.rejections += rejects;
        let mx = if breakdown { mb } else { mb + 1 };
        let mut next = vec![C64::default(); n];
        for (j, q) in basis.iter().take(mx).enumerate() {
            axpy(beta * f[(j, 0)], q, &mut next);
        }
        w = next;
        beta = norm2(&w);
        t_now += t_step;
        t_new = round_step(GAMMA * t_step * (t_step * tol / err_loc.max(f64::MIN_POSITIVE)).powf(xm));
        run.error_estimate += err_loc.max(rndoff);
        if beta == 0.0 {
            break;
        }
    }
    run.w = w;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseOp;
    use crate::linalg::LinearOp;

    #[test]
    fn diagonal_decay() {
        let d = [0.0, -1.0, -3.0, -50.0];
        let a = CMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                C64::new(d[i], 0.0)
            } else {
                C64::default()
            }
        });
        let op = DenseOp(&a);
        let v = vec![C64::new(1.0, 0.0); 4];
        let run = expv(2.0, |x| op.apply(x), 50.0, &v, 3, 1e-12).unwrap();
        for (k, &dk) in d.iter().enumerate() {
            assert!((run.w[k] - (2.0 * dk).exp()).norm() < 1e-9, "{k}: {}", run.w[k]);
        }
    }

    #[test]
    fn rotation_generator() {
        // exp(t [[0, 1], [-1, 0]]) is a rotation by t
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::default(),
                C64::new(1.0, 0.0),
                C64::new(-1.0, 0.0),
                C64::default(),
            ],
        );
        let op = DenseOp(&a);
        let v = [C64::new(1.0, 0.0), C64::default()];
        let run = expv(10.0, |x| op.apply(x), 1.0, &v, 2, 1e-12).unwrap();
        assert!((run.w[0] - 10f64.cos()).norm() < 1e-9);
        assert!((run.w[1] + 10f64.sin()).norm() < 1e-9);
    }
}
