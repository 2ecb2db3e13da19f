//! Small dense-vector helpers and conjugate gradients.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conjugate gradients for a symmetric positive (semi)definite operator.
/// Returns the solution, or the final relative residual on failure.
pub fn conjugate_gradient<F>(
    apply: F,
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() <= rtol * bnorm {
            return Ok(x);
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    let rel = rr.sqrt() / bnorm;
    if rel <= rtol {
        Ok(x)
    } else {
        Err(rel)
    }
}
