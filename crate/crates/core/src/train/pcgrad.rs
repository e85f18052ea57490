//! Gradient surgery for conflicting task gradients.

use rand::seq::SliceRandom;
use rand::Rng;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Random visiting order of the other tasks, one list per task.
pub fn random_orders<R: Rng + ?Sized>(tasks: usize, rng: &mut R) -> Vec<Vec<usize>> {
    (0..tasks)
        .map(|i| {
            let mut others: Vec<usize> = (0..tasks).filter(|&j| j != i).collect();
            others.shuffle(rng);
            others
        })
        .collect()
}

/// Project every task gradient away from the original gradients it
/// conflicts with, visiting the others in `orders[i]`. Zero-norm partners
/// are skipped.
pub fn project_conflicting(grads: &[Vec<f64>], orders: &[Vec<usize>]) -> Vec<Vec<f64>> {
    assert_eq!(grads.len(), orders.len());
    let norms: Vec<f64> = grads.iter().map(|g| dot(g, g)).collect();
    grads
        .iter()
        .zip(orders)
        .map(|(g, order)| {
            let mut p = g.clone();
            for &j in order {
                let d = dot(&p, &grads[j]);
                if d < 0.0 && norms[j] > 0.0 {
                    let c = d / norms[j];
                    p.iter_mut().zip(&grads[j]).for_each(|(x, y)| *x -= c * y);
                }
            }
            p
        })
        .collect()
}

/// Element-wise mean of equal-length vectors.
pub fn mean_gradient(grads: &[Vec<f64>]) -> Vec<f64> {
    let n = grads.len() as f64;
    let mut out = vec![0.0; grads.first().map_or(0, Vec::len)];
    for g in grads {
        assert_eq!(g.len(), out.len());
        out.iter_mut().zip(g).for_each(|(o, x)| *o += x);
    }
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Mean of the projected gradients under a fixed visiting order.
pub fn pcgrad_with_orders(grads: &[Vec<f64>], orders: &[Vec<usize>]) -> Vec<f64> {
    mean_gradient(&project_conflicting(grads, orders))
}

/// Mean of the projected gradients with a random visiting order.
pub fn pcgrad<R: Rng + ?Sized>(grads: &[Vec<f64>], rng: &mut R) -> Vec<f64> {
    assert!(grads.len() >= 2, "gradient surgery needs at least two tasks");
    pcgrad_with_orders(grads, &random_orders(grads.len(), rng))
}
