//! Finite-difference verification of tape gradients.

use std::rc::Rc;

use rand::Rng;

use super::{Tape, Tensor, Var};
use crate::error::Result;
use crate::seed;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Largest componentwise relative error.
    pub max_rel_error: f64,
    /// `(param, flat index)` where the largest error occurred.
    pub worst: Option<(usize, usize)>,
    pub components: usize,
}

/// Relative error with the `max(|a|, |b|, 1e-8)` denominator.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Compares reverse-mode gradients of the scalar built by `f` against
/// central differences `(f(p+h) - f(p-h)) / 2h`, one component at a time.
///
/// `f` receives a fresh tape and one [`Var`] per entry of `params`, and must
/// return a `1 x 1` variable.
pub fn grad_check<F>(f: F, params: &[Tensor], h: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let eval = |ps: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.constant(p.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        components: 0,
    };
    let mut probe: Vec<Tensor> = params.to_vec();
    for (pi, var) in vars.iter().enumerate() {
        let analytic = grads.get(*var);
        for k in 0..params[pi].len() {
            let orig = params[pi].as_slice()[k];
            probe[pi].as_mut_slice()[k] = orig + h;
            let up = eval(&probe)?;
            probe[pi].as_mut_slice()[k] = orig - h;
            let down = eval(&probe)?;
            probe[pi].as_mut_slice()[k] = orig;

            let numeric = (up - down) / (2.0 * h);
            let a = analytic.map_or(0.0, |g| g.as_slice()[k]);
            let err = relative_error(a, numeric);
            report.components += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((pi, k));
            }
        }
    }
    Ok(report)
}

/// Worst relative error of one tape primitive over random shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimitiveCheck {
    pub name: &'static str,
    pub cases: usize,
    pub max_rel_error: f64,
}

/// Tape primitives covered by [`primitive_suite`].
pub const PRIMITIVES: [&str; 13] = [
    "matmul",
    "add",
    "add_bias_row",
    "concat_cols",
    "relu",
    "row_sum_pool",
    "aggregate_neighbors",
    "mse",
    "softmax_cross_entropy",
    "bce_with_logits",
    "scalar_sum",
    "scale",
    "cosine",
];

/// Entries in `[-2, 2]` kept at least `0.05` away from zero, so ReLU kinks
/// sit far outside the finite-difference stencil.
fn random_tensor(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| {
            let v: f64 = rng.random_range(0.05..2.0);
            if rng.random_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::from_vec(rows, cols, data).expect("length matches shape")
}

/// Reduces a matrix to a scalar through an MSE against a fixed target.
fn reduce(tape: &mut Tape, v: Var, target: &Tensor) -> Result<Var> {
    let t = tape.constant(target.clone());
    tape.mse(v, t)
}

/// Checks every primitive on `cases` random shapes (dimensions 1 to 6)
/// with step `h`.
pub fn primitive_suite(cases: usize, seed: u64, h: f64) -> Result<Vec<PrimitiveCheck>> {
    let mut out = Vec::with_capacity(PRIMITIVES.len());
    for name in PRIMITIVES {
        let mut rng = seed::rng(seed::derive(seed, name));
        let mut worst: f64 = 0.0;
        for _ in 0..cases {
            let (n, m, p) = (
                rng.random_range(1..=6usize),
                rng.random_range(1..=6usize),
                rng.random_range(1..=6usize),
            );
            let a = random_tensor(n, m, &mut rng);
            let report = match name {
                "matmul" => {
                    let target = random_tensor(n, p, &mut rng);
                    grad_check(
                        |t, v| {
                            let y = t.matmul(v[0], v[1])?;
                            reduce(t, y, &target)
                        },
                        &[a, random_tensor(m, p, &mut rng)],
                        h,
                    )?
                }
                "add" => {
                    let target = random_tensor(n, m, &mut rng);
                    grad_check(
                        |t, v| {
                            let y = t.add(v[0], v[1])?;
                            reduce(t, y, &target)
                        },
                        &[a, random_tensor(n, m, &mut rng)],
                        h,
                    )?
                }
                "add_bias_row" => {
                    let target = random_tensor(n, m, &mut rng);
                    grad_check(
                        |t, v| {
                            let y = t.add_bias_row(v[0], v[1])?;
                            reduce(t, y, &target)
                        },
                        &[a, random_tensor(1, m, &mut rng)],
                        h,
                    )?
                }
                "concat_cols" => {
                    let target = random_tensor(n, m + p, &mut rng);
                    grad_check(
                        |t, v| {
                            let y = t.concat_cols(v[0], v[1])?;
                            reduce(t, y, &target)
                        },
                        &[a, random_tensor(n, p, &mut rng)],
                        h,
                    )?
                }
                "relu" => {
                    let target = random_tensor(n, m, &mut rng);
                    grad_check(
                        |t, v| {
                            let y = t.relu(v[0]);
                            reduce(t, y, &target)
                        },
                        &[a],
                        h,
                    )?
                }
                "row_sum_pool" => {
                    let segments: Rc<[usize]> = (0..n).map(|_| rng.random_range(0..p)).collect();
                    let target = random_tensor(p, m, &mut rng);
                    grad_check(
                        |t, v| {
                            let y = t.row_sum_pool(v[0], segments.clone(), p)?;
                            reduce(t, y, &target)
                        },
                        &[a],
                        h,
                    )?
                }
                "aggregate_neighbors" => {
                    let mut edges = Vec::new();
                    for u in 0..n {
                        for w in u + 1..n {
                            if rng.random_bool(0.5) {
                                edges.push((u, w));
                            }
                        }
                    }
                    let edges: Rc<[(usize, usize)]> = edges.into();
                    let target = random_tensor(n, m, &mut rng);
                    grad_check(
                        |t, v| {
                            let y = t.aggregate_neighbors(v[0], edges.clone())?;
                            reduce(t, y, &target)
                        },
                        &[a],
                        h,
                    )?
                }
                "mse" => grad_check(|t, v| t.mse(v[0], v[1]), &[a, random_tensor(n, m, &mut rng)], h)?,
                "softmax_cross_entropy" => {
                    let targets: Rc<[usize]> = (0..n).map(|_| rng.random_range(0..m)).collect();
                    grad_check(|t, v| t.softmax_cross_entropy(v[0], targets.clone()), &[a], h)?
                }
                "bce_with_logits" => {
                    let targets: Rc<[f64]> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
                    grad_check(
                        |t, v| t.bce_with_logits(v[0], targets.clone()),
                        &[random_tensor(n, 1, &mut rng)],
                        h,
                    )?
                }
                "scalar_sum" => grad_check(|t, v| Ok(t.scalar_sum(v[0])), &[a], h)?,
                "scale" => {
                    let factor = rng.random_range(-3.0..3.0);
                    let target = random_tensor(n, m, &mut rng);
                    grad_check(
                        |t, v| {
                            let y = t.scale(v[0], factor);
                            reduce(t, y, &target)
                        },
                        &[a],
                        h,
                    )?
                }
                "cosine" => grad_check(
                    |t, v| t.cosine(v[0], v[1]),
                    &[random_tensor(1, m, &mut rng), random_tensor(1, m, &mut rng)],
                    h,
                )?,
                _ => unreachable!("unlisted primitive"),
            };
            worst = worst.max(report.max_rel_error);
        }
        out.push(PrimitiveCheck {
            name,
            cases,
            max_rel_error: worst,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_matches_finite_differences() {
        let mut rng = crate::seed::rng(3);
        let data: Vec<f64> = (0..9).map(|_| rng.random_range(-2.0..2.0)).collect();
        let p = Tensor::from_vec(3, 3, data).unwrap();
        let report = grad_check(
            |tape, v| {
                let zero = tape.constant(Tensor::zeros(3, 3));
                let m = tape.mse(v[0], zero)?;
                Ok(tape.scale(m, 9.0))
            },
            &[p],
            1e-5,
        )
        .unwrap();
        assert_eq!(report.components, 9);
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }

    #[test]
    fn every_primitive_passes_on_random_shapes() {
        for check in primitive_suite(20, 7, 1e-5).unwrap() {
            assert!(check.max_rel_error < 1e-6, "{check:?}");
        }
    }

    #[test]
    fn constant_function_has_zero_error() {
        let p = Tensor::ones(2, 2);
        let report = grad_check(|tape, _| Ok(tape.constant(Tensor::scalar(4.0))), &[p], 1e-5).unwrap();
        assert_eq!(report.max_rel_error, 0.0);
    }
}
